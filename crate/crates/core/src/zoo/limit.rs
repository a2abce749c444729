use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::graph::{Vertex, WeightedGraph};

/// An infinite, locally finite weighted graph whose vertices are integer keys.
pub trait LimitModel {
    fn origin(&self) -> Vec<i64>;
    fn neighbors(&self, key: &[i64]) -> Vec<(Vec<i64>, f64)>;
    fn contains(&self, key: &[i64]) -> bool;
}

/// Guard against exponentially growing balls (trees) at large radii.
pub const MAX_WINDOW_VERTICES: usize = 1 << 20;

/// Ball of radius `radius` around a vertex of a limit model, together with its
/// exterior boundary (the frontier). Interior vertices keep their full
/// weights; frontier vertices are meant to be absorbing.
#[derive(Clone, Debug)]
pub struct LocalWindow {
    pub graph: WeightedGraph,
    pub radius: u32,
    pub origin: Vertex,
    pub dist: Vec<u32>,
    index: HashMap<Vec<i64>, Vertex>,
}

impl LocalWindow {
    pub fn build<M: LimitModel + ?Sized>(model: &M, center: &[i64], radius: u32) -> Result<Self> {
        if !model.contains(center) {
            return Err(Error::Param(format!("center {center:?} not in model")));
        }
        let mut keys: Vec<Vec<i64>> = vec![center.to_vec()];
        let mut dist = vec![0u32];
        let mut index: HashMap<Vec<i64>, Vertex> = HashMap::new();
        index.insert(center.to_vec(), 0);
        let mut q = VecDeque::from([0 as Vertex]);
        let mut adjacency: Vec<Vec<(Vertex, f64)>> = Vec::new();
        while let Some(v) = q.pop_front() {
            if keys.len() > MAX_WINDOW_VERTICES {
                return Err(Error::Param(format!("window of radius {radius} exceeds {MAX_WINDOW_VERTICES} vertices")));
            }
            let dv = dist[v as usize];
            if dv > radius {
                continue;
            }
            let mut nb = Vec::new();
            for (nk, w) in model.neighbors(&keys[v as usize]) {
                let u = *index.entry(nk.clone()).or_insert_with(|| {
                    keys.push(nk);
                    dist.push(dv + 1);
                    q.push_back((keys.len() - 1) as Vertex);
                    (keys.len() - 1) as Vertex
                });
                nb.push((u, w));
            }
            if adjacency.len() <= v as usize {
                adjacency.resize(v as usize + 1, Vec::new());
            }
            adjacency[v as usize] = nb;
        }
        let mut edges = Vec::new();
        for (v, nb) in adjacency.iter().enumerate() {
            for &(u, w) in nb {
                if dist[u as usize] > radius || (u as usize) > v {
                    edges.push((v as Vertex, u, w));
                }
            }
        }
        let graph = WeightedGraph::from_edges(keys.len(), &edges)?.with_labels(keys)?;
        Ok(Self { graph, radius, origin: 0, dist, index })
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn is_interior(&self, v: Vertex) -> bool {
        self.dist[v as usize] <= self.radius
    }

    pub fn id(&self, key: &[i64]) -> Option<Vertex> {
        self.index.get(key).copied()
    }

    pub fn key(&self, v: Vertex) -> &[i64] {
        self.graph.label(v).expect("window graphs carry keys")
    }

    /// Interior vertices within distance `r` of the origin.
    pub fn ball(&self, r: u32) -> Vec<Vertex> {
        (0..self.n() as Vertex).filter(|&v| self.dist[v as usize] <= r.min(self.radius)).collect()
    }
}
