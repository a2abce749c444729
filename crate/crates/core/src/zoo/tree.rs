//! Balls in the `(d+1)`-regular tree, its boundary tree `G_◊`, and the
//! labelling isomorphism between them.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::graph::{IsomorphismMap, Vertex, WeightedGraph};

use super::limit::LimitModel;
use super::HALF;

pub fn tree_size(d: usize, n: u32) -> usize {
    1 + (d + 1) * (d.pow(n) - 1) / (d - 1)
}

/// Interior vertices weigh `(d+1)/2`, leaves `1/2`.
pub fn tree_ratio_closed_form(d: usize, n: u32) -> f64 {
    let inner = if n == 0 { 0.0 } else { tree_size(d, n - 1) as f64 };
    let r = inner / tree_size(d, n) as f64;
    r * (d as f64 + 1.0) / 2.0 + (1.0 - r) / 2.0
}

#[derive(Clone, Debug)]
pub struct TreeGraph {
    pub d: usize,
    pub depth: u32,
    pub graph: WeightedGraph,
    pub parent: Vec<Option<Vertex>>,
    pub children: Vec<Vec<Vertex>>,
}

impl TreeGraph {
    pub const ROOT: Vertex = 0;

    /// `|y| = N − d(y, root)`.
    pub fn height(&self, y: Vertex) -> u32 {
        self.graph.label(y).unwrap()[0] as u32
    }

    pub fn path_to_root(&self, mut y: Vertex) -> Vec<Vertex> {
        let mut p = vec![y];
        while let Some(q) = self.parent[y as usize] {
            p.push(q);
            y = q;
        }
        p
    }
}

/// Ball of radius `N` around the root of the `(d+1)`-regular tree. Vertices are
/// numbered breadth-first; each label is `[height]`.
pub fn make_tree(d: usize, n: u32) -> Result<TreeGraph> {
    if d < 2 {
        return Err(Error::Param("tree arity must be at least 2".into()));
    }
    if n < 1 {
        return Err(Error::Param("tree depth must be at least 1".into()));
    }
    let size = tree_size(d, n);
    let mut parent = vec![None; 1];
    let mut children = vec![Vec::new(); 1];
    let mut height = vec![n as i64];
    let mut edges = Vec::with_capacity(size - 1);
    let mut frontier = vec![0 as Vertex];
    for level in 1..=n {
        let mut next = Vec::with_capacity(frontier.len() * d);
        for &v in &frontier {
            let k = if v == 0 { d + 1 } else { d };
            for _ in 0..k {
                let c = parent.len() as Vertex;
                parent.push(Some(v));
                children.push(Vec::new());
                height.push((n - level) as i64);
                children[v as usize].push(c);
                edges.push((v, c, HALF));
                next.push(c);
            }
        }
        frontier = next;
    }
    debug_assert_eq!(parent.len(), size);
    let labels = height.into_iter().map(|h| vec![h]).collect();
    let graph = WeightedGraph::from_edges(size, &edges)?.with_labels(labels)?;
    Ok(TreeGraph { d, depth: n, graph, parent, children })
}

/// The infinite `(d+1)`-regular tree; a vertex is its reduced word from the
/// root (first letter in `0..=d`, then `0..d`).
#[derive(Clone, Copy, Debug)]
pub struct RegularTree {
    pub d: usize,
}

impl LimitModel for RegularTree {
    fn origin(&self) -> Vec<i64> {
        Vec::new()
    }

    fn neighbors(&self, key: &[i64]) -> Vec<(Vec<i64>, f64)> {
        let mut out = Vec::with_capacity(self.d + 1);
        if !key.is_empty() {
            out.push((key[..key.len() - 1].to_vec(), HALF));
        }
        let k = if key.is_empty() { self.d + 1 } else { self.d };
        for c in 0..k {
            let mut w = key.to_vec();
            w.push(c as i64);
            out.push((w, HALF));
        }
        out
    }

    fn contains(&self, key: &[i64]) -> bool {
        key.iter().enumerate().all(|(i, &c)| c >= 0 && (c as usize) < if i == 0 { self.d + 1 } else { self.d })
    }
}

/// `G_◊`: vertex `(k; s)` stored as `[k, s_1, …, s_j]` with trailing 1s trimmed.
/// The parent of `(k; s)` is `(k+1; s_2, s_3, …)`; for `k ≥ 1` its children
/// are `(k−1; c, s_1, s_2, …)`, `c = 1..d`.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryTree {
    pub d: usize,
}

fn trim(mut v: Vec<i64>) -> Vec<i64> {
    while v.len() > 1 && *v.last().unwrap() == 1 {
        v.pop();
    }
    v
}

impl LimitModel for BoundaryTree {
    fn origin(&self) -> Vec<i64> {
        vec![0]
    }

    fn neighbors(&self, key: &[i64]) -> Vec<(Vec<i64>, f64)> {
        let k = key[0];
        let s = &key[1..];
        let mut out = Vec::with_capacity(self.d + 1);
        let mut up = vec![k + 1];
        up.extend(s.iter().skip(1));
        out.push((trim(up), HALF));
        if k >= 1 {
            for c in 1..=self.d as i64 {
                let mut ch = vec![k - 1, c];
                ch.extend_from_slice(s);
                out.push((trim(ch), HALF));
            }
        }
        out
    }

    fn contains(&self, key: &[i64]) -> bool {
        !key.is_empty()
            && key[0] >= 0
            && key[1..].iter().all(|&c| c >= 1 && c <= self.d as i64)
            && (key.len() == 1 || key[key.len() - 1] != 1)
    }
}

/// Descendants of `(K; 1)` in `G_◊`: a `d`-ary tree of depth `K` whose top
/// vertex `(K; 1)` is flagged as frontier (its parent lies outside).
#[derive(Clone, Debug)]
pub struct BoundaryTreeWindow {
    pub d: usize,
    pub cap: u32,
    pub graph: WeightedGraph,
    pub frontier: Vec<bool>,
    index: HashMap<Vec<i64>, Vertex>,
}

impl BoundaryTreeWindow {
    pub fn new(d: usize, cap: u32) -> Result<Self> {
        if cap == 0 {
            return Err(Error::Param("boundary-tree window needs cap >= 1".into()));
        }
        let model = BoundaryTree { d };
        let mut keys = vec![vec![cap as i64]];
        let mut edges = Vec::new();
        let mut i = 0;
        while i < keys.len() {
            let key = keys[i].clone();
            if key[0] >= 1 {
                for (ch, w) in model.neighbors(&key).into_iter().skip(1) {
                    edges.push((i as Vertex, keys.len() as Vertex, w));
                    keys.push(ch);
                }
            }
            i += 1;
        }
        let index = keys.iter().enumerate().map(|(k, v)| (v.clone(), k as Vertex)).collect();
        let n = keys.len();
        let graph = WeightedGraph::from_edges(n, &edges)?.with_labels(keys)?;
        let mut frontier = vec![false; n];
        frontier[0] = true;
        Ok(Self { d, cap, graph, frontier, index })
    }

    pub fn id(&self, key: &[i64]) -> Option<Vertex> {
        self.index.get(key).copied()
    }
}

/// Labelling isomorphism `φ(y) = (|y|; s(y), 1, 1, …)` from `B(center, r)` into
/// the boundary tree below the common ancestor `y_*`.
pub fn tree_boundary_embed(
    t: &TreeGraph,
    center: Vertex,
    r: u32,
) -> Result<(BoundaryTreeWindow, IsomorphismMap)> {
    t.graph.check_vertex(center as usize)?;
    let ball = t.graph.metric(center, r)?.ball;
    let path = t.path_to_root(center);
    let ystar = *path.iter().find(|&&y| !ball.contains(y)).ok_or(Error::NoCommonAncestor)?;
    if ystar == TreeGraph::ROOT {
        return Err(Error::NoCommonAncestor);
    }
    let on_path: std::collections::HashSet<Vertex> = path.iter().copied().collect();
    // label of each child: 1 for the path child, then 2.. in child order
    let mut label = HashMap::new();
    let mut stack = vec![ystar];
    while let Some(x) = stack.pop() {
        let ch = &t.children[x as usize];
        let mut next = 2;
        let has_path_child = ch.iter().any(|c| on_path.contains(c));
        for (i, &c) in ch.iter().enumerate() {
            let l = if has_path_child {
                if on_path.contains(&c) {
                    1
                } else {
                    next += 1;
                    next - 1
                }
            } else {
                i as i64 + 1
            };
            label.insert(c, l);
            stack.push(c);
        }
    }
    let win = BoundaryTreeWindow::new(t.d, t.height(ystar))?;
    let mut pairs = Vec::with_capacity(ball.len());
    for &y in ball.ids() {
        let mut key = vec![t.height(y) as i64];
        let mut x = y;
        while x != ystar {
            key.push(label[&x]);
            x = t.parent[x as usize].unwrap();
        }
        let key = trim(key);
        pairs.push((y, win.id(&key).ok_or(Error::WindowOutsideDomain)?));
    }
    Ok((win, IsomorphismMap { pairs, z_offset: None }))
}

/// Re-rooting isomorphism from `B(center, r)` onto the ball around the root of
/// the regular tree; fails with a violation if the ball meets the leaves.
pub fn tree_regular_embed(t: &TreeGraph, center: Vertex, r: u32) -> Result<(super::LocalWindow, IsomorphismMap)> {
    let model = RegularTree { d: t.d };
    let win = super::LocalWindow::build(&model, &[], r)?;
    let ball = t.graph.metric(center, r)?.ball;
    let mut img: HashMap<Vertex, Vec<i64>> = HashMap::from([(center, Vec::new())]);
    let mut order = vec![center];
    let mut i = 0;
    while i < order.len() {
        let y = order[i];
        let mut c = 0i64;
        for &nb in t.graph.neighbors(y) {
            if ball.contains(nb) && !img.contains_key(&nb) {
                let mut w = img[&y].clone();
                w.push(c);
                c += 1;
                img.insert(nb, w);
                order.push(nb);
            }
        }
        i += 1;
    }
    let mut pairs = Vec::with_capacity(ball.len());
    for &y in ball.ids() {
        pairs.push((y, win.id(&img[&y]).ok_or(Error::WindowOutsideDomain)?));
    }
    Ok((win, IsomorphismMap { pairs, z_offset: None }))
}
