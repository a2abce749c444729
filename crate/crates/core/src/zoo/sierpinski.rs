//! Sierpinski graphs in triangular-lattice coordinates `y = i·s1 + j·s2`.
//!
//! The unit up-triangles of `G_N` are exactly those with lower-left corner
//! `(i, j)`, `i, j ≥ 0`, `i & j = 0`, `i + j < 2^N`, and two vertices are
//! adjacent iff they lie on a common such triangle.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::graph::{IsomorphismMap, Vertex, WeightedGraph};

use super::limit::{LimitModel, LocalWindow};
use super::HALF;

type P = (i64, i64);

const DIRS: [P; 6] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1)];

fn valid_corner(c: P, bound: Option<i64>) -> bool {
    c.0 >= 0 && c.1 >= 0 && c.0 & c.1 == 0 && bound.is_none_or(|b| c.0 + c.1 < b)
}

/// The unit up-triangle containing both endpoints of a unit lattice step.
fn triangle_corner(a: P, b: P) -> P {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    match (hi.0 - lo.0, hi.1 - lo.1) {
        (1, 0) | (0, 1) => lo,
        // (i, j+1) and (i+1, j)
        (1, -1) => (lo.0, hi.1),
        _ => unreachable!("not a unit step"),
    }
}

fn is_vertex(p: P, bound: Option<i64>) -> bool {
    valid_corner(p, bound)
        || valid_corner((p.0 - 1, p.1), bound)
        || valid_corner((p.0, p.1 - 1), bound)
}

fn neighbors_half(p: P, bound: Option<i64>) -> Vec<P> {
    if !is_vertex(p, bound) {
        return Vec::new();
    }
    DIRS.iter()
        .map(|d| (p.0 + d.0, p.1 + d.1))
        .filter(|&q| {
            let c = triangle_corner(p, q);
            valid_corner(c, bound)
        })
        .collect()
}

pub fn sierpinski_size(n: u32) -> usize {
    3 + (1..=n).map(|k| 3usize.pow(k)).sum::<usize>()
}

/// `w(G_N)/|G_N| = 2 − 3/|G_N|`.
pub fn sierpinski_ratio_closed_form(n: u32) -> f64 {
    2.0 - 3.0 / sierpinski_size(n) as f64
}

#[derive(Clone, Debug)]
pub struct SierpinskiGraph {
    pub depth: u32,
    pub graph: WeightedGraph,
    index: HashMap<P, Vertex>,
}

impl SierpinskiGraph {
    pub fn id(&self, p: (i64, i64)) -> Option<Vertex> {
        self.index.get(&p).copied()
    }

    pub fn coord(&self, v: Vertex) -> (i64, i64) {
        let l = self.graph.label(v).unwrap();
        (l[0], l[1])
    }

    /// `2^N·{0, s1, s2}`.
    pub fn corners(&self) -> [(i64, i64); 3] {
        let s = 1i64 << self.depth;
        [(0, 0), (s, 0), (0, s)]
    }

    pub fn midpoint(&self) -> (i64, i64) {
        (1i64 << self.depth.saturating_sub(1), 0)
    }
}

pub fn make_sierpinski(n: u32) -> Result<SierpinskiGraph> {
    if n > 20 {
        return Err(Error::Param("Sierpinski depth beyond 20".into()));
    }
    let side = 1i64 << n;
    let mut pts = Vec::new();
    for i in 0..=side {
        for j in 0..=side - i {
            if is_vertex((i, j), Some(side)) {
                pts.push((i, j));
            }
        }
    }
    let index: HashMap<P, Vertex> = pts.iter().enumerate().map(|(k, &p)| (p, k as Vertex)).collect();
    let mut edges = Vec::new();
    for (k, &p) in pts.iter().enumerate() {
        for q in neighbors_half(p, Some(side)) {
            let u = index[&q];
            if (k as Vertex) < u {
                edges.push((k as Vertex, u, HALF));
            }
        }
    }
    let labels = pts.iter().map(|&(i, j)| vec![i, j]).collect();
    let graph = WeightedGraph::from_edges(pts.len(), &edges)?.with_labels(labels)?;
    Ok(SierpinskiGraph { depth: n, graph, index })
}

fn in_g(p: P, n: u32) -> bool {
    is_vertex(p, Some(1i64 << n))
}

fn rot120(p: P) -> P {
    (-p.0 - p.1, p.0)
}

fn rot240(p: P) -> P {
    (p.1, -p.0 - p.1)
}

/// `s_N : G_{N+1} → G_N`.
pub fn sierpinski_s(n: u32, p: (i64, i64)) -> Result<(i64, i64)> {
    if !in_g(p, n + 1) {
        return Err(Error::NotInSource);
    }
    if in_g(p, n) {
        return Ok(p);
    }
    let s = 1i64 << n;
    // copy ρ_{2^N s1, 4π/3} G_N, which as a set is G_N + 2^N s1
    if in_g((p.0 - s, p.1), n) {
        let r = rot120((p.0 - s, p.1));
        return Ok((r.0 + s, r.1));
    }
    let r = rot240((p.0, p.1 - s));
    Ok((r.0, r.1 + s))
}

/// `π_N = s_N ∘ … ∘ s_{m−1}` for a vertex of `G_m`.
pub fn sierpinski_project(n: u32, m: u32, p: (i64, i64)) -> Result<(i64, i64)> {
    if m < n || !in_g(p, m) {
        return Err(Error::NotInSource);
    }
    let mut q = p;
    for k in (n..m).rev() {
        q = sierpinski_s(k, q)?;
    }
    Ok(q)
}

/// Largest violation of `p^{G_N}(y,y') = Σ_{y'_1 ∈ π_N^{-1}(y') ∩ B(ŷ,1)} p^{G_m}(ŷ,y'_1)`
/// over all `ŷ ∈ G_m` and `y' ∈ G_N`, with `y = π_N(ŷ)`.
pub fn projection_kernel_defect(n: u32, m: u32) -> Result<f64> {
    let gn = make_sierpinski(n)?;
    let gm = make_sierpinski(m)?;
    let proj: Vec<Vertex> = (0..gm.graph.n() as Vertex)
        .map(|v| sierpinski_project(n, m, gm.coord(v)).map(|q| gn.id(q).expect("projection lands in G_N")))
        .collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    let mut acc = vec![0.0; gn.graph.n()];
    for yh in 0..gm.graph.n() as Vertex {
        let y = proj[yh as usize];
        acc.iter_mut().for_each(|a| *a = 0.0);
        for (y1, _) in gm.graph.edges_of(yh) {
            acc[proj[y1 as usize] as usize] += gm.graph.p(yh, y1);
        }
        for y2 in 0..gn.graph.n() as Vertex {
            worst = worst.max((gn.graph.p(y, y2) - acc[y2 as usize]).abs());
        }
    }
    Ok(worst)
}

/// One-sided infinite gasket `G^+_∞ = ∪ G_N`.
#[derive(Clone, Copy, Debug, Default)]
pub struct SierpinskiHalf;

impl LimitModel for SierpinskiHalf {
    fn origin(&self) -> Vec<i64> {
        vec![0, 0]
    }

    fn neighbors(&self, key: &[i64]) -> Vec<(Vec<i64>, f64)> {
        neighbors_half((key[0], key[1]), None).into_iter().map(|q| (vec![q.0, q.1], HALF)).collect()
    }

    fn contains(&self, key: &[i64]) -> bool {
        key.len() == 2 && is_vertex((key[0], key[1]), None)
    }
}

/// Two-sided gasket `G^+_∞ ∪ σG^+_∞`, glued at the origin; `σ(i,j) = (−i−j, j)`
/// is the reflection about the vertical axis.
#[derive(Clone, Copy, Debug, Default)]
pub struct SierpinskiFull;

fn sigma(p: P) -> P {
    (-p.0 - p.1, p.1)
}

impl LimitModel for SierpinskiFull {
    fn origin(&self) -> Vec<i64> {
        vec![0, 0]
    }

    fn neighbors(&self, key: &[i64]) -> Vec<(Vec<i64>, f64)> {
        let p = (key[0], key[1]);
        let mut out: Vec<P> = neighbors_half(p, None);
        out.extend(neighbors_half(sigma(p), None).into_iter().map(sigma));
        out.sort_unstable();
        out.dedup();
        out.into_iter().map(|q| (vec![q.0, q.1], HALF)).collect()
    }

    fn contains(&self, key: &[i64]) -> bool {
        key.len() == 2 && (is_vertex((key[0], key[1]), None) || is_vertex(sigma((key[0], key[1])), None))
    }
}

/// Translation by `(−2^{N−1}, 0)` from `B((2^{N−1},0), r) ⊂ G_N` into a window of `G_∞`.
pub fn sierpinski_midpoint_map(g: &SierpinskiGraph, r: u32) -> Result<(LocalWindow, IsomorphismMap)> {
    let mid = g.midpoint();
    let c = g.id(mid).ok_or(Error::NotInSource)?;
    let win = LocalWindow::build(&SierpinskiFull, &[0, 0], r)?;
    let ball = g.graph.metric(c, r)?.ball;
    let mut pairs = Vec::new();
    for &y in ball.ids() {
        let (i, j) = g.coord(y);
        let img = win.id(&[i - mid.0, j - mid.1]).ok_or(Error::WindowOutsideDomain)?;
        pairs.push((y, img));
    }
    Ok((win, IsomorphismMap { pairs, z_offset: None }))
}
