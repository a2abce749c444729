//! Finite weighted graphs.
//!
//! Weights are symmetric, positive on edges and implicitly zero elsewhere.
//! The walk moves from `y` to `y'` with probability `w(y,y')/w_y`, where
//! `w_y` is the sum of edge weights at `y`.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vertex = u32;

/// Compressed adjacency. Neighbor lists are sorted by id.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    offsets: Vec<usize>,
    targets: Vec<Vertex>,
    weights: Vec<f64>,
    vertex_weight: Vec<f64>,
    uniform: Option<f64>,
    labels: Option<Vec<Vec<i64>>>,
}

impl WeightedGraph {
    /// Builds a graph from unordered edges. Rejects self-loops, duplicates,
    /// non-positive weights and isolated vertices (except in the one-vertex
    /// graph); connectivity is checked separately by
    /// [`WeightedGraph::ensure_connected`].
    pub fn from_edges(n: usize, edges: &[(Vertex, Vertex, f64)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySet);
        }
        let mut deg = vec![0usize; n];
        for &(u, v, w) in edges {
            let (u, v) = (u as usize, v as usize);
            if u >= n {
                return Err(Error::InvalidVertex(u));
            }
            if v >= n {
                return Err(Error::InvalidVertex(v));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at {u}")));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidGraph(format!("weight {w} on edge {u}-{v}")));
            }
            deg[u] += 1;
            deg[v] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + deg[i];
        }
        let mut fill = offsets.clone();
        let mut targets = vec![0; offsets[n]];
        let mut weights = vec![0.0; offsets[n]];
        for &(u, v, w) in edges {
            for (a, b) in [(u, v), (v, u)] {
                let k = fill[a as usize];
                targets[k] = b;
                weights[k] = w;
                fill[a as usize] += 1;
            }
        }
        let mut vertex_weight = vec![0.0; n];
        for y in 0..n {
            let lo = offsets[y];
            let hi = offsets[y + 1];
            let mut pairs: Vec<(Vertex, f64)> =
                targets[lo..hi].iter().copied().zip(weights[lo..hi].iter().copied()).collect();
            pairs.sort_by_key(|p| p.0);
            for w in pairs.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::InvalidGraph(format!("duplicate edge {y}-{}", w[0].0)));
                }
            }
            for (k, (t, w)) in pairs.into_iter().enumerate() {
                targets[lo + k] = t;
                weights[lo + k] = w;
            }
            vertex_weight[y] = weights[lo..hi].iter().sum();
            if vertex_weight[y] == 0.0 && n > 1 {
                return Err(Error::InvalidGraph(format!("isolated vertex {y}")));
            }
        }
        let uniform = match weights.first() {
            Some(&w0) if weights.iter().all(|&w| w == w0) => Some(w0),
            _ => None,
        };
        Ok(Self { offsets, targets, weights, vertex_weight, uniform, labels: None })
    }

    pub fn with_labels(mut self, labels: Vec<Vec<i64>>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::Param(format!("{} labels for {} vertices", labels.len(), self.n())));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.vertex_weight.len()
    }

    pub fn num_edges(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn labels(&self) -> Option<&[Vec<i64>]> {
        self.labels.as_deref()
    }

    pub fn label(&self, y: Vertex) -> Option<&[i64]> {
        self.labels.as_ref().map(|l| l[y as usize].as_slice())
    }

    pub fn degree(&self, y: Vertex) -> usize {
        let y = y as usize;
        self.offsets[y + 1] - self.offsets[y]
    }

    pub fn neighbors(&self, y: Vertex) -> &[Vertex] {
        let y = y as usize;
        &self.targets[self.offsets[y]..self.offsets[y + 1]]
    }

    pub fn neighbor_weights(&self, y: Vertex) -> &[f64] {
        let y = y as usize;
        &self.weights[self.offsets[y]..self.offsets[y + 1]]
    }

    pub fn edges_of(&self, y: Vertex) -> impl Iterator<Item = (Vertex, f64)> + '_ {
        self.neighbors(y).iter().copied().zip(self.neighbor_weights(y).iter().copied())
    }

    /// `w(y, y')`, zero for non-neighbors.
    pub fn weight(&self, y: Vertex, y2: Vertex) -> f64 {
        match self.neighbors(y).binary_search(&y2) {
            Ok(k) => self.neighbor_weights(y)[k],
            Err(_) => 0.0,
        }
    }

    pub fn vertex_weight(&self, y: Vertex) -> f64 {
        self.vertex_weight[y as usize]
    }

    pub fn vertex_weights(&self) -> &[f64] {
        &self.vertex_weight
    }

    /// `w(G)`.
    pub fn total_weight(&self) -> f64 {
        self.vertex_weight.iter().sum()
    }

    /// The common edge weight, if all edges carry the same one.
    pub fn uniform_weight(&self) -> Option<f64> {
        self.uniform
    }

    /// `(c0, c1) = (min w_y, max w_y)`.
    pub fn weight_range(&self) -> (f64, f64) {
        let c0 = self.vertex_weight.iter().copied().fold(f64::INFINITY, f64::min);
        let c1 = self.vertex_weight.iter().copied().fold(0.0, f64::max);
        (c0, c1)
    }

    /// Transition probability `p(y, y')`.
    pub fn p(&self, y: Vertex, y2: Vertex) -> f64 {
        self.weight(y, y2) / self.vertex_weight(y)
    }

    /// Unordered edges with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(Vertex, Vertex, f64)> {
        let mut out = Vec::with_capacity(self.num_edges());
        for u in 0..self.n() as Vertex {
            for (v, w) in self.edges_of(u) {
                if u < v {
                    out.push((u, v, w));
                }
            }
        }
        out
    }

    /// One step of the discrete-time walk.
    #[inline]
    pub fn step<R: Rng + ?Sized>(&self, y: Vertex, rng: &mut R) -> Vertex {
        let nb = self.neighbors(y);
        if self.uniform.is_some() {
            return nb[rng.random_range(0..nb.len())];
        }
        let ws = self.neighbor_weights(y);
        let mut u = rng.random::<f64>() * self.vertex_weight(y);
        for (k, &w) in ws.iter().enumerate() {
            if u < w {
                return nb[k];
            }
            u -= w;
        }
        nb[nb.len() - 1]
    }

    pub fn check_vertex(&self, y: usize) -> Result<Vertex> {
        if y < self.n() {
            Ok(y as Vertex)
        } else {
            Err(Error::InvalidVertex(y))
        }
    }

    /// Breadth-first distances from `src`; `u32::MAX` marks unreachable vertices.
    pub fn bfs(&self, src: Vertex) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.n()];
        let mut q = VecDeque::new();
        dist[src as usize] = 0;
        q.push_back(src);
        while let Some(y) = q.pop_front() {
            let dy = dist[y as usize];
            for &t in self.neighbors(y) {
                if dist[t as usize] == u32::MAX {
                    dist[t as usize] = dy + 1;
                    q.push_back(t);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.bfs(0).iter().all(|&d| d != u32::MAX)
    }

    pub fn ensure_connected(&self) -> Result<()> {
        if self.is_connected() {
            Ok(())
        } else {
            Err(Error::Disconnected)
        }
    }

    pub fn distance(&self, a: Vertex, b: Vertex) -> Result<Option<u32>> {
        self.check_vertex(a as usize)?;
        self.check_vertex(b as usize)?;
        let d = self.bfs(a)[b as usize];
        Ok((d != u32::MAX).then_some(d))
    }

    /// Closed ball, its exterior boundary and their union.
    pub fn metric(&self, center: Vertex, radius: u32) -> Result<MetricBall> {
        self.check_vertex(center as usize)?;
        let dist = self.bfs(center);
        let ball: Vec<Vertex> =
            (0..self.n() as Vertex).filter(|&y| dist[y as usize] <= radius).collect();
        let boundary: Vec<Vertex> = (0..self.n() as Vertex)
            .filter(|&y| dist[y as usize] == radius.saturating_add(1))
            .collect();
        let mut closure = ball.clone();
        closure.extend_from_slice(&boundary);
        closure.sort_unstable();
        Ok(MetricBall {
            ball: VertexSet(ball),
            boundary: VertexSet(boundary),
            closure: VertexSet(closure),
        })
    }

    /// `(w(A), pi, mu)` with `pi(y) = w_y / w(G)` and `mu` uniform.
    pub fn measures(&self, a: &VertexSet) -> Result<Measures> {
        if a.is_empty() {
            return Err(Error::EmptySet);
        }
        for &y in a.ids() {
            self.check_vertex(y as usize)?;
        }
        let w_a = a.ids().iter().map(|&y| self.vertex_weight(y)).sum();
        let total = self.total_weight();
        let n = self.n() as f64;
        Ok(Measures {
            w_a,
            pi: self.vertex_weight.iter().map(|w| w / total).collect(),
            mu: vec![1.0 / n; self.n()],
        })
    }

    /// Line format: header `|V| |E|`, one `u v w` line per edge, then one
    /// `y c1 c2 ...` line per vertex when labels are present. Weights use
    /// the shortest round-trip representation, so dump/load is bit-exact.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.n(), self.num_edges());
        for (u, v, w) in self.edges() {
            let _ = writeln!(s, "{u} {v} {w:?}");
        }
        if let Some(labels) = &self.labels {
            for (y, l) in labels.iter().enumerate() {
                let _ = write!(s, "{y}");
                for c in l {
                    let _ = write!(s, " {c}");
                }
                s.push('\n');
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let perr = |line: usize, msg: &str| Error::Parse { line, msg: msg.to_string() };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hl, header) = lines.next().ok_or_else(|| perr(1, "missing header"))?;
        let hv: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| perr(hl + 1, "bad header")))
            .collect::<Result<_>>()?;
        if hv.len() != 2 {
            return Err(perr(hl + 1, "header must be `|V| |E|`"));
        }
        let (n, m) = (hv[0], hv[1]);
        let mut edges = Vec::with_capacity(m);
        for _ in 0..m {
            let (ln, l) = lines.next().ok_or_else(|| perr(0, "truncated edge list"))?;
            let t: Vec<&str> = l.split_whitespace().collect();
            if t.len() != 3 {
                return Err(perr(ln + 1, "edge line must be `u v w`"));
            }
            let u = t[0].parse().map_err(|_| perr(ln + 1, "bad vertex"))?;
            let v = t[1].parse().map_err(|_| perr(ln + 1, "bad vertex"))?;
            let w = t[2].parse().map_err(|_| perr(ln + 1, "bad weight"))?;
            edges.push((u, v, w));
        }
        let g = Self::from_edges(n, &edges)?;
        let rest: Vec<(usize, &str)> = lines.collect();
        if rest.is_empty() {
            return Ok(g);
        }
        if rest.len() != n {
            return Err(perr(rest[0].0 + 1, "label section must have one line per vertex"));
        }
        let mut labels = vec![Vec::new(); n];
        for (ln, l) in rest {
            let mut it = l.split_whitespace();
            let y: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| perr(ln + 1, "bad label vertex"))?;
            if y >= n {
                return Err(perr(ln + 1, "label vertex out of range"));
            }
            labels[y] = it
                .map(|t| t.parse().map_err(|_| perr(ln + 1, "bad label")))
                .collect::<Result<_>>()?;
        }
        g.with_labels(labels)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexSet(Vec<Vertex>);

impl VertexSet {
    pub fn new(mut ids: Vec<Vertex>, g: &WeightedGraph) -> Result<Self> {
        ids.sort_unstable();
        ids.dedup();
        if let Some(&bad) = ids.iter().find(|&&y| y as usize >= g.n()) {
            return Err(Error::InvalidVertex(bad as usize));
        }
        Ok(Self(ids))
    }

    pub fn all(g: &WeightedGraph) -> Self {
        Self((0..g.n() as Vertex).collect())
    }

    pub fn ids(&self) -> &[Vertex] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, y: Vertex) -> bool {
        self.0.binary_search(&y).is_ok()
    }
}

#[derive(Clone, Debug)]
pub struct MetricBall {
    pub ball: VertexSet,
    pub boundary: VertexSet,
    pub closure: VertexSet,
}

#[derive(Clone, Debug)]
pub struct Measures {
    pub w_a: f64,
    pub pi: Vec<f64>,
    pub mu: Vec<f64>,
}

/// Injective partial map between two graphs. For cylinder maps the height
/// shift `z_offset` is applied to every vertex; because vertical edges all
/// carry weight 1/2, checking the base map is sufficient.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct IsomorphismMap {
    pub pairs: Vec<(Vertex, Vertex)>,
    pub z_offset: Option<i64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IsoCheck {
    pub ok: bool,
    pub violation: Option<String>,
}

/// Checks `w(phi y, phi y') = w(y, y')` for all domain pairs. Only neighbor
/// lists are compared: pairs outside both neighbor lists carry weight 0 on
/// both sides.
pub fn verify_isomorphism(
    src: &WeightedGraph,
    dst: &WeightedGraph,
    map: &IsomorphismMap,
) -> Result<IsoCheck> {
    let mut fwd = std::collections::HashMap::with_capacity(map.pairs.len());
    let mut inv = std::collections::HashMap::with_capacity(map.pairs.len());
    for &(a, b) in &map.pairs {
        src.check_vertex(a as usize)?;
        if b as usize >= dst.n() {
            return Err(Error::MissingImage(b as usize));
        }
        if fwd.insert(a, b).is_some() {
            return Ok(fail(format!("vertex {a} mapped twice")));
        }
        if let Some(prev) = inv.insert(b, a) {
            return Ok(fail(format!("vertices {prev} and {a} share image {b}")));
        }
    }
    for (&a, &b) in &fwd {
        for (a2, w) in src.edges_of(a) {
            if let Some(&b2) = fwd.get(&a2) {
                let w2 = dst.weight(b, b2);
                if w2 != w {
                    return Ok(fail(format!("w({a},{a2}) = {w} but w({b},{b2}) = {w2}")));
                }
            }
        }
        // edges in the image whose preimage pair is a non-edge
        for (b2, w2) in dst.edges_of(b) {
            if let Some(&a2) = inv.get(&b2) {
                let w = src.weight(a, a2);
                if w != w2 {
                    return Ok(fail(format!("w({a},{a2}) = {w} but w({b},{b2}) = {w2}")));
                }
            }
        }
    }
    Ok(IsoCheck { ok: true, violation: None })
}

fn fail(msg: String) -> IsoCheck {
    IsoCheck { ok: false, violation: Some(msg) }
}

pub fn identity_map(g: &WeightedGraph) -> IsomorphismMap {
    IsomorphismMap { pairs: (0..g.n() as Vertex).map(|y| (y, y)).collect(), z_offset: None }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> WeightedGraph {
        WeightedGraph::from_edges(3, &[(0, 1, 0.5), (1, 2, 0.5)]).unwrap()
    }

    #[test]
    fn two_vertex_measures() {
        let g = WeightedGraph::from_edges(2, &[(0, 1, 0.5)]).unwrap();
        let m = g.measures(&VertexSet::all(&g)).unwrap();
        assert_eq!(m.w_a, 1.0);
        assert_eq!(m.pi, vec![0.5, 0.5]);
        assert_eq!(m.mu, vec![0.5, 0.5]);
    }

    #[test]
    fn empty_set_rejected() {
        let g = path3();
        let e = VertexSet::new(vec![], &g).unwrap();
        assert!(matches!(g.measures(&e), Err(Error::EmptySet)));
    }

    #[test]
    fn path_ball() {
        let g = path3();
        let b = g.metric(0, 1).unwrap();
        assert_eq!(b.ball.ids(), &[0, 1]);
        assert_eq!(b.boundary.ids(), &[2]);
        assert_eq!(b.closure.ids(), &[0, 1, 2]);
        assert_eq!(g.metric(1, 0).unwrap().ball.ids(), &[1]);
        assert!(g.metric(5, 1).is_err());
    }

    #[test]
    fn rejects_malformed_edges() {
        assert!(WeightedGraph::from_edges(2, &[(0, 0, 0.5)]).is_err());
        assert!(WeightedGraph::from_edges(2, &[(0, 1, 0.0)]).is_err());
        assert!(WeightedGraph::from_edges(2, &[(0, 1, 0.5), (1, 0, 0.5)]).is_err());
        assert!(WeightedGraph::from_edges(3, &[(0, 1, 0.5)]).is_err());
    }

    #[test]
    fn disconnected_detected() {
        let g = WeightedGraph::from_edges(4, &[(0, 1, 0.5), (2, 3, 0.5)]).unwrap();
        assert!(matches!(g.ensure_connected(), Err(Error::Disconnected)));
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let g = WeightedGraph::from_edges(3, &[(0, 1, 0.1 + 0.2), (1, 2, 1.0 / 3.0)])
            .unwrap()
            .with_labels(vec![vec![0, -1], vec![], vec![7]])
            .unwrap();
        let t = g.to_text();
        let h = WeightedGraph::from_text(&t).unwrap();
        assert_eq!(g, h);
        assert_eq!(t, h.to_text());
        assert_eq!(h.weight(0, 1).to_bits(), (0.1f64 + 0.2).to_bits());
    }

    #[test]
    fn isomorphism_detects_non_edge_mapped_to_edge() {
        let tri = WeightedGraph::from_edges(3, &[(0, 1, 0.5), (1, 2, 0.5), (0, 2, 0.5)]).unwrap();
        let p = path3();
        let m = IsomorphismMap { pairs: vec![(0, 0), (1, 1), (2, 2)], z_offset: None };
        let r = verify_isomorphism(&p, &tri, &m).unwrap();
        assert!(!r.ok);
        assert!(r.violation.is_some());
        assert!(verify_isomorphism(&tri, &tri, &identity_map(&tri)).unwrap().ok);
    }
}
