use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{Vertex, WeightedGraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CylVertex {
    pub y: Vertex,
    pub z: i64,
}

impl CylVertex {
    pub fn new(y: Vertex, z: i64) -> Self {
        Self { y, z }
    }
}

/// `G × Z` with weight `w(y,y')` within a level and `1/2` between `(y,z)` and
/// `(y,z±1)`; never materialized.
#[derive(Clone, Copy, Debug)]
pub struct CylinderView<'g> {
    pub base: &'g WeightedGraph,
}

impl<'g> CylinderView<'g> {
    pub fn new(base: &'g WeightedGraph) -> Self {
        Self { base }
    }

    pub fn vertex_weight(&self, x: CylVertex) -> f64 {
        self.base.vertex_weight(x.y) + 1.0
    }

    pub fn weight(&self, a: CylVertex, b: CylVertex) -> f64 {
        if a.z == b.z {
            self.base.weight(a.y, b.y)
        } else if a.y == b.y && (a.z - b.z).abs() == 1 {
            0.5
        } else {
            0.0
        }
    }

    pub fn neighbors(&self, x: CylVertex) -> Vec<(CylVertex, f64)> {
        let mut out: Vec<(CylVertex, f64)> =
            self.base.edges_of(x.y).map(|(y, w)| (CylVertex::new(y, x.z), w)).collect();
        out.push((CylVertex::new(x.y, x.z + 1), 0.5));
        out.push((CylVertex::new(x.y, x.z - 1), 0.5));
        out
    }

    /// One step; returns the new vertex.
    #[inline]
    pub fn step<R: Rng + ?Sized>(&self, x: CylVertex, rng: &mut R) -> CylVertex {
        let g = self.base;
        if g.uniform_weight() == Some(0.5) {
            let nb = g.neighbors(x.y);
            let k = rng.random_range(0..nb.len() + 2);
            return if k < nb.len() {
                CylVertex::new(nb[k], x.z)
            } else if k == nb.len() {
                CylVertex::new(x.y, x.z + 1)
            } else {
                CylVertex::new(x.y, x.z - 1)
            };
        }
        let u = rng.random::<f64>() * (g.vertex_weight(x.y) + 1.0);
        if u < 0.5 {
            return CylVertex::new(x.y, x.z + 1);
        }
        if u < 1.0 {
            return CylVertex::new(x.y, x.z - 1);
        }
        let mut u = u - 1.0;
        let nb = g.neighbors(x.y);
        for (k, &w) in g.neighbor_weights(x.y).iter().enumerate() {
            if u < w {
                return CylVertex::new(nb[k], x.z);
            }
            u -= w;
        }
        CylVertex::new(nb[nb.len() - 1], x.z)
    }
}
