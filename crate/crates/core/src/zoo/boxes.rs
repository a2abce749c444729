use crate::error::{Error, Result};
use crate::graph::{IsomorphismMap, Vertex, WeightedGraph};

use super::limit::{LimitModel, LocalWindow};
use super::HALF;

fn coords(mut id: usize, n: usize, d: usize) -> Vec<i64> {
    let mut c = vec![0; d];
    for ci in c.iter_mut() {
        *ci = (id % n) as i64;
        id /= n;
    }
    c
}

/// `Z^d ∩ [0, N-1]^d` with nearest-neighbor edges of weight 1/2; vertex id is
/// the mixed-radix encoding of its coordinates (first coordinate fastest).
pub fn make_box(n: usize, d: usize) -> Result<WeightedGraph> {
    if d < 2 {
        return Err(Error::Param("box dimension must be at least 2".into()));
    }
    if n < 2 {
        return Err(Error::Param("box side must be at least 2".into()));
    }
    let total = n.checked_pow(d as u32).ok_or_else(|| Error::Param("box too large".into()))?;
    let mut edges = Vec::with_capacity(d * total);
    let mut stride = 1;
    for _axis in 0..d {
        for id in 0..total {
            if (id / stride) % n + 1 < n {
                edges.push((id as Vertex, (id + stride) as Vertex, HALF));
            }
        }
        stride *= n;
    }
    let labels = (0..total).map(|id| coords(id, n, d)).collect();
    WeightedGraph::from_edges(total, &edges)?.with_labels(labels)
}

/// `w(G_N)/|G_N| = d (N-1)/N` for the box.
pub fn box_ratio_closed_form(n: usize, d: usize) -> f64 {
    d as f64 * (n as f64 - 1.0) / n as f64
}

/// `Z_+^a × Z^b`; the first `a` coordinates are nonnegative.
#[derive(Clone, Copy, Debug)]
pub struct BoxLimit {
    pub a: usize,
    pub b: usize,
}

impl LimitModel for BoxLimit {
    fn origin(&self) -> Vec<i64> {
        vec![0; self.a + self.b]
    }

    fn neighbors(&self, key: &[i64]) -> Vec<(Vec<i64>, f64)> {
        let mut out = Vec::with_capacity(2 * key.len());
        for i in 0..key.len() {
            for s in [-1, 1] {
                let mut k = key.to_vec();
                k[i] += s;
                if i >= self.a || k[i] >= 0 {
                    out.push((k, HALF));
                }
            }
        }
        out
    }

    fn contains(&self, key: &[i64]) -> bool {
        key.len() == self.a + self.b && key[..self.a].iter().all(|&c| c >= 0)
    }
}

pub fn make_box_limit_window(a: usize, b: usize, radius: u32) -> Result<LocalWindow> {
    if a + b < 2 {
        return Err(Error::Param("limit dimension must be at least 2".into()));
    }
    if radius < 1 {
        return Err(Error::Param("window radius must be at least 1".into()));
    }
    let m = BoxLimit { a, b };
    LocalWindow::build(&m, &m.origin(), radius)
}

/// Folding isomorphism from the ball `B(center, radius)` of the box onto a
/// window of `Z_+^a × Z^(d-a)`. Constrained coordinates map to
/// `min(y_i, N-1-y_i)` and come first; free coordinates are shifted by the
/// center.
pub fn box_fold_map(
    g: &WeightedGraph,
    n: usize,
    center: Vertex,
    radius: u32,
    constrained: &[bool],
) -> Result<(LocalWindow, IsomorphismMap)> {
    let d = constrained.len();
    let a = constrained.iter().filter(|&&c| c).count();
    let cc = g.label(center).ok_or_else(|| Error::Param("box graph without labels".into()))?.to_vec();
    let order: Vec<usize> =
        (0..d).filter(|&i| constrained[i]).chain((0..d).filter(|&i| !constrained[i])).collect();
    let fold = |y: &[i64]| -> Vec<i64> {
        order
            .iter()
            .map(|&i| if constrained[i] { y[i].min(n as i64 - 1 - y[i]) } else { y[i] - cc[i] })
            .collect()
    };
    let model = BoxLimit { a, b: d - a };
    let origin_key = fold(&cc);
    // the window must reach every image of the ball
    let ball = g.metric(center, radius)?.ball;
    let win_radius = ball
        .ids()
        .iter()
        .map(|&y| {
            let k = fold(g.label(y).unwrap());
            k.iter().zip(&origin_key).map(|(p, q)| (p - q).unsigned_abs() as u32).sum::<u32>()
        })
        .max()
        .unwrap_or(0)
        .max(1);
    let win = LocalWindow::build(&model, &origin_key, win_radius)?;
    let mut pairs = Vec::with_capacity(ball.len());
    for &y in ball.ids() {
        let key = fold(g.label(y).unwrap());
        let img = win.id(&key).ok_or(Error::WindowOutsideDomain)?;
        pairs.push((y, img));
    }
    Ok((win, IsomorphismMap { pairs, z_offset: None }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::verify_isomorphism;

    #[test]
    fn small_boxes() {
        let g = make_box(3, 2).unwrap();
        assert_eq!((g.n(), g.num_edges()), (9, 12));
        assert_eq!(g.total_weight(), 12.0);
        let g2 = make_box(2, 2).unwrap();
        assert_eq!(g2.total_weight() / g2.n() as f64, 1.0);
        assert!(make_box(3, 1).is_err());
        assert_eq!(g.metric(0, 2).unwrap().ball.len(), 6);
    }

    #[test]
    fn z2_ball_radius_one() {
        let w = make_box_limit_window(0, 2, 1).unwrap();
        assert_eq!(w.ball(1).len(), 5);
        assert_eq!(w.graph.vertex_weight(w.origin), 2.0);
    }

    #[test]
    fn corner_fold_is_isomorphism() {
        let g = make_box(3, 2).unwrap();
        let (win, map) = box_fold_map(&g, 3, 0, 1, &[true, true]).unwrap();
        assert!(verify_isomorphism(&g, &win.graph, &map).unwrap().ok);
        let g = make_box(9, 2).unwrap();
        let (win, map) = box_fold_map(&g, 9, 0, 3, &[true, true]).unwrap();
        assert!(verify_isomorphism(&g, &win.graph, &map).unwrap().ok);
        let center = 4 + 9 * 4;
        let (win, map) = box_fold_map(&g, 9, center, 3, &[false, false]).unwrap();
        assert!(verify_isomorphism(&g, &win.graph, &map).unwrap().ok);
    }
}
