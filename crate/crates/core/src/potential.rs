//! Escape probabilities, equilibrium measures and capacities on cylinders, and
//! the finite-window trace of random interlacements.
//!
//! On an infinite cylinder `𝔾 × Z` the walk is truncated to the region
//! `R_r = {(y, z): d(o, y) ≤ r, |z| ≤ r}` with everything outside absorbing.
//! The truncated capacity `e_r(V) = Σ_x P_x[leave R_r before H̃_V]·w_x`
//! decreases to `cap(V)` like `r^{-γ}`; the bracket is
//! `[e_r − (e_{r/2} − e_r)/(2^γ − 1), e_r]` and the reported value its midpoint.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Vertex, WeightedGraph};
use crate::linalg::{cg, dense_solve};
use crate::rng::stream;
use crate::stats::Welford;
use crate::zoo::{CylVertex, CylinderView, LimitModel, LocalWindow};

const DENSE_LIMIT: usize = 1500;
const CG_TOL: f64 = 1e-11;

/// A cylinder over a ball of a limit model, centred at the model's origin.
#[derive(Clone, Debug)]
pub struct CylWindow {
    pub base: LocalWindow,
    pub rho: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowShape {
    Single,
    Pair,
    /// The origin and two of its neighbours.
    LTriple,
}

impl WindowShape {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Self::Single),
            "pair" => Ok(Self::Pair),
            "triple" | "l-triple" => Ok(Self::LTriple),
            _ => Err(Error::Param(format!("unknown window shape {s:?}"))),
        }
    }
}

impl CylWindow {
    pub fn new<M: LimitModel + ?Sized>(model: &M, rho: u32) -> Result<Self> {
        Ok(Self { base: LocalWindow::build(model, &model.origin(), rho)?, rho })
    }

    pub fn at(&self, key: &[i64], z: i64) -> Option<CylVertex> {
        self.base.id(key).map(|y| CylVertex::new(y, z))
    }

    pub fn inside(&self, x: CylVertex, r: u32) -> bool {
        self.base.dist[x.y as usize] <= r && x.z.unsigned_abs() <= r as u64
    }

    pub fn radius_of(&self, v: &[CylVertex]) -> u32 {
        v.iter().map(|x| self.base.dist[x.y as usize].max(x.z.unsigned_abs() as u32)).max().unwrap_or(0)
    }

    /// Nested shapes at height 0: single ⊂ pair ⊂ L-triple. Truncated at a
    /// leaf, which has a single neighbour.
    pub fn shape(&self, s: WindowShape) -> Vec<CylVertex> {
        let g = &self.base.graph;
        let o = self.base.origin;
        let mut nb: Vec<Vertex> = g.neighbors(o).to_vec();
        nb.sort_by(|a, b| self.base.key(*a).cmp(self.base.key(*b)));
        let take = match s {
            WindowShape::Single => 0,
            WindowShape::Pair => 1,
            WindowShape::LTriple => 2,
        };
        std::iter::once(o).chain(nb.into_iter().take(take)).map(|y| CylVertex::new(y, 0)).collect()
    }

    pub fn keys(&self, v: &[CylVertex]) -> Vec<(Vec<i64>, i64)> {
        v.iter().map(|x| (self.base.key(x.y).to_vec(), x.z)).collect()
    }

    fn region(&self, r: u32) -> Region<'_> {
        let ys = (0..self.base.n() as Vertex).filter(|&y| self.base.dist[y as usize] <= r).collect();
        Region::new(&self.base.graph, ys, -(r as i64), r as i64)
    }

}

/// Finite set `{y ∈ ys} × [zlo, zhi]`; its complement is absorbing.
struct Region<'g> {
    g: &'g WeightedGraph,
    ys: Vec<Vertex>,
    local: Vec<u32>,
    zlo: i64,
    nz: usize,
}

impl<'g> Region<'g> {
    fn new(g: &'g WeightedGraph, ys: Vec<Vertex>, zlo: i64, zhi: i64) -> Self {
        let mut local = vec![u32::MAX; g.n()];
        for (i, &y) in ys.iter().enumerate() {
            local[y as usize] = i as u32;
        }
        Self { g, ys, local, zlo, nz: (zhi - zlo + 1) as usize }
    }

    fn len(&self) -> usize {
        self.ys.len() * self.nz
    }

    fn idx(&self, x: CylVertex) -> Option<usize> {
        let l = self.local[x.y as usize];
        let zi = x.z - self.zlo;
        (l != u32::MAX && zi >= 0 && (zi as usize) < self.nz).then(|| l as usize * self.nz + zi as usize)
    }

    /// `w_{xx'}` over neighbours, as `(index in region or None, weight)`.
    fn neighbours(&self, i: usize) -> impl Iterator<Item = (Option<usize>, f64)> + '_ {
        let (l, zi) = (i / self.nz, i % self.nz);
        let y = self.ys[l];
        let nz = self.nz;
        let horiz = self.g.edges_of(y).map(move |(t, w)| {
            let lt = self.local[t as usize];
            ((lt != u32::MAX).then(|| lt as usize * nz + zi), w)
        });
        let up = ((zi + 1 < nz).then(|| i + 1), 0.5);
        let down = ((zi > 0).then(|| i - 1), 0.5);
        horiz.chain([up, down])
    }

    /// `e(x) = P_x[leave before H̃_V]·w_x` for each `x ∈ V`.
    fn equilibrium(&self, v: &[CylVertex]) -> Result<Vec<f64>> {
        let (f, in_v, vi) = self.escape(v)?;
        Ok(vi
            .iter()
            .map(|&i| self.neighbours(i).map(|(j, w)| w * j.map_or(1.0, |j| if in_v[j] { 0.0 } else { f[j] })).sum())
            .collect())
    }

    /// `f = P_·[leave before H_V]`, harmonic off `V`, 0 on `V`, 1 outside.
    fn escape(&self, v: &[CylVertex]) -> Result<(Vec<f64>, Vec<bool>, Vec<usize>)> {
        let n = self.len();
        let mut in_v = vec![false; n];
        let vi: Vec<usize> = v.iter().map(|&x| self.idx(x).ok_or(Error::TruncationTooSmall)).collect::<Result<_>>()?;
        for &i in &vi {
            in_v[i] = true;
        }
        let diag: Vec<f64> =
            (0..n).map(|i| if in_v[i] { 1.0 } else { self.g.vertex_weight(self.ys[i / self.nz]) + 1.0 }).collect();
        let b: Vec<f64> = (0..n)
            .map(|i| if in_v[i] { 0.0 } else { self.neighbours(i).filter(|p| p.0.is_none()).map(|p| p.1).sum() })
            .collect();
        let f = if n <= DENSE_LIMIT {
            let mut a = nalgebra::DMatrix::zeros(n, n);
            for i in 0..n {
                a[(i, i)] = diag[i];
                if !in_v[i] {
                    for (j, w) in self.neighbours(i) {
                        if let Some(j) = j.filter(|&j| !in_v[j]) {
                            a[(i, j)] -= w;
                        }
                    }
                }
            }
            dense_solve(a, &b)?
        } else {
            // flattened base adjacency in local indices; V stays 0 along CG
            // iterates (zero right-hand side, identity rows), so its columns
            // need no masking
            let mut off = vec![0usize];
            let mut nbl = Vec::new();
            let mut nbw = Vec::new();
            for &y in &self.ys {
                for (t, w) in self.g.edges_of(y) {
                    let lt = self.local[t as usize];
                    if lt != u32::MAX {
                        nbl.push(lt as usize);
                        nbw.push(w);
                    }
                }
                off.push(nbl.len());
            }
            let nz = self.nz;
            let apply = |x: &[f64], out: &mut [f64]| {
                for l in 0..self.ys.len() {
                    let row = l * nz;
                    for zi in 0..nz {
                        let i = row + zi;
                        let mut acc = diag[i] * x[i];
                        if zi > 0 {
                            acc -= 0.5 * x[i - 1];
                        }
                        if zi + 1 < nz {
                            acc -= 0.5 * x[i + 1];
                        }
                        for k in off[l]..off[l + 1] {
                            acc -= nbw[k] * x[nbl[k] * nz + zi];
                        }
                        out[i] = acc;
                    }
                }
                for &i in &vi {
                    out[i] = x[i];
                }
            };
            let out = cg(apply, &diag, &b, CG_TOL, 50 * n.max(100));
            if !(out.rel_residual < 1e-9) {
                return Err(Error::Param(format!("capacity solve stalled at residual {:.2e}", out.rel_residual)));
            }
            out.x
        };
        Ok((f, in_v, vi))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CapMethod {
    Exact,
    MonteCarlo,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CapacityEstimate {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub rho: u32,
    pub method: CapMethod,
    /// Standard error (Monte Carlo only).
    pub se: Option<f64>,
    /// Truncation-error exponent used for the bracket.
    pub gamma: f64,
}

impl CapacityEstimate {
    pub fn zero(rho: u32, method: CapMethod) -> Self {
        Self { value: 0.0, lower: 0.0, upper: 0.0, rho, method, se: None, gamma: f64::NAN }
    }

    pub fn rel_width(&self) -> f64 {
        (self.upper - self.lower) / self.value
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EquilibriumMeasure {
    pub vertices: Vec<CylVertex>,
    pub mass: Vec<f64>,
    pub normalized: Vec<f64>,
}

impl EquilibriumMeasure {
    fn new(vertices: Vec<CylVertex>, mass: Vec<f64>) -> Self {
        let total: f64 = mass.iter().sum();
        let normalized = mass.iter().map(|m| if total > 0.0 { m / total } else { 0.0 }).collect();
        Self { vertices, mass, normalized }
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EscapeBracket {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

fn check_window(win: &CylWindow, v: &[CylVertex], r: u32) -> Result<()> {
    if win.radius_of(v) + 2 > r || r > win.rho {
        return Err(Error::TruncationTooSmall);
    }
    Ok(())
}

/// `e_r(x)` for each `x ∈ V`.
pub fn truncated_equilibrium(win: &CylWindow, v: &[CylVertex], r: u32) -> Result<Vec<f64>> {
    check_window(win, v, r)?;
    win.region(r).equilibrium(v)
}

/// `γ` from `e_{ρ/4}, e_{ρ/2}, e_ρ`, assuming `e_r − cap ∝ r^{−γ}`.
pub fn fit_gamma(win: &CylWindow, v: &[CylVertex]) -> Result<f64> {
    let e = |r| truncated_equilibrium(win, v, r).map(|e| e.iter().sum::<f64>());
    let (e1, e2, e4) = (e(win.rho / 4)?, e(win.rho / 2)?, e(win.rho)?);
    Ok(((e1 - e2) / (e2 - e4)).log2())
}

fn richardson(fine: f64, coarse: f64, gamma: f64) -> (f64, f64) {
    let lower = (fine - (coarse - fine) / (2f64.powf(gamma) - 1.0)).max(0.0);
    (lower, fine)
}

/// Per-vertex `P_x[H̃_V = ∞]` brackets; `gamma = None` fits the exponent.
pub fn escape_probability(win: &CylWindow, v: &[CylVertex], gamma: Option<f64>) -> Result<Vec<EscapeBracket>> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    let gamma = match gamma {
        Some(g) => g,
        None => fit_gamma(win, v)?,
    };
    let fine = truncated_equilibrium(win, v, win.rho)?;
    let coarse = truncated_equilibrium(win, v, win.rho / 2)?;
    Ok(v.iter()
        .zip(fine.iter().zip(&coarse))
        .map(|(x, (f, c))| {
            let w = win.base.graph.vertex_weight(x.y) + 1.0;
            let (lo, hi) = richardson(f / w, c / w, gamma);
            EscapeBracket { value: 0.5 * (lo + hi), lower: lo, upper: hi }
        })
        .collect())
}

/// Exact bracketed capacity and the truncated equilibrium measure at `ρ`.
pub fn capacity(win: &CylWindow, v: &[CylVertex], gamma: Option<f64>) -> Result<(CapacityEstimate, EquilibriumMeasure)> {
    if v.is_empty() {
        return Ok((CapacityEstimate::zero(win.rho, CapMethod::Exact), EquilibriumMeasure::new(Vec::new(), Vec::new())));
    }
    let gamma = match gamma {
        Some(g) => g,
        None => fit_gamma(win, v)?,
    };
    let fine = truncated_equilibrium(win, v, win.rho)?;
    let coarse: f64 = truncated_equilibrium(win, v, win.rho / 2)?.iter().sum();
    let (lower, upper) = richardson(fine.iter().sum(), coarse, gamma);
    let est = CapacityEstimate {
        value: 0.5 * (lower + upper),
        lower,
        upper,
        rho: win.rho,
        method: CapMethod::Exact,
        se: None,
        gamma,
    };
    Ok((est, EquilibriumMeasure::new(v.to_vec(), fine)))
}

/// Monte Carlo estimate of the same functional as [`capacity`]: from each
/// `x ∈ V`, a walk records whether it left `R_{ρ/2}` and `R_ρ` before
/// returning to `V`.
pub fn capacity_mc(win: &CylWindow, v: &[CylVertex], gamma: f64, walks: u64, seed: u64) -> Result<CapacityEstimate> {
    if v.is_empty() {
        return Ok(CapacityEstimate::zero(win.rho, CapMethod::MonteCarlo));
    }
    let (rho, half) = (win.rho, win.rho / 2);
    check_window(win, v, half)?;
    let ca = -0.5 / (2f64.powf(gamma) - 1.0);
    let cb = 1.0 - ca;
    let cyl = CylinderView::new(&win.base.graph);
    let (mut value, mut var) = (0.0, 0.0);
    for (i, &x0) in v.iter().enumerate() {
        let mut rng = stream(seed, "capacity-mc", i as u64);
        let mut acc = Welford::default();
        for _ in 0..walks {
            let (mut a, mut b) = (false, false);
            let mut x = cyl.step(x0, &mut rng);
            loop {
                if v.contains(&x) {
                    break;
                }
                if !a && !win.inside(x, half) {
                    a = true;
                }
                if !win.inside(x, rho) {
                    b = true;
                    break;
                }
                x = cyl.step(x, &mut rng);
            }
            acc.push(cb * b as u8 as f64 + ca * a as u8 as f64);
        }
        let w = cyl.vertex_weight(x0);
        value += w * acc.mean();
        var += (w * acc.se()).powi(2);
    }
    let se = var.sqrt();
    Ok(CapacityEstimate {
        value,
        lower: value - 3.0 * se,
        upper: value + 3.0 * se,
        rho,
        method: CapMethod::MonteCarlo,
        se: Some(se),
        gamma,
    })
}

/// `cap_B̃(V) = Σ_{x∈V} P_x[T_B̃ < H̃_V]·w_x` for `B̃ = G × (lo, hi)`.
pub fn box_capacity(
    base: &WeightedGraph,
    lo: i64,
    hi: i64,
    v: &[CylVertex],
) -> Result<(CapacityEstimate, EquilibriumMeasure)> {
    if v.is_empty() {
        return Ok((CapacityEstimate::zero(0, CapMethod::Exact), EquilibriumMeasure::new(Vec::new(), Vec::new())));
    }
    if hi - lo < 2 || v.iter().any(|x| x.y as usize >= base.n() || x.z <= lo || x.z >= hi) {
        return Err(Error::NotInBox);
    }
    let region = Region::new(base, (0..base.n() as Vertex).collect(), lo + 1, hi - 1);
    let e = region.equilibrium(v)?;
    let cap: f64 = e.iter().sum();
    let est = CapacityEstimate { value: cap, lower: cap, upper: cap, rho: 0, method: CapMethod::Exact, se: None, gamma: f64::NAN };
    Ok((est, EquilibriumMeasure::new(v.to_vec(), e)))
}

/// `P_{(y,z)}[H_V < T_B̃]` for every `y`, with `B̃ = G × (lo, hi)`.
pub fn box_hitting_probability(base: &WeightedGraph, lo: i64, hi: i64, v: &[CylVertex], z: i64) -> Result<Vec<f64>> {
    if hi - lo < 2 || z <= lo || z >= hi || v.iter().any(|x| x.y as usize >= base.n() || x.z <= lo || x.z >= hi) {
        return Err(Error::NotInBox);
    }
    if v.is_empty() {
        return Ok(vec![0.0; base.n()]);
    }
    let region = Region::new(base, (0..base.n() as Vertex).collect(), lo + 1, hi - 1);
    let (f, in_v, _) = region.escape(v)?;
    Ok((0..base.n() as Vertex)
        .map(|y| {
            let i = region.idx(CylVertex::new(y, z)).unwrap();
            if in_v[i] { 1.0 } else { 1.0 - f[i] }
        })
        .collect())
}

/// `P[V vacant] = exp(−u·cap(V))` with the interval from the capacity bracket.
pub fn vacant_probability(u: f64, cap: &CapacityEstimate) -> Result<(f64, f64, f64)> {
    if !(u >= 0.0) {
        return Err(Error::Param("level u must be nonnegative".into()));
    }
    Ok(((-u * cap.value).exp(), (-u * cap.upper).exp(), (-u * cap.lower).exp()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    InterlacementSample,
    WalkExperiment,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VacantWindow {
    pub keys: Vec<(Vec<i64>, i64)>,
    pub vacant: Vec<bool>,
    pub provenance: Provenance,
}

impl VacantWindow {
    /// All of the listed window positions vacant.
    pub fn all_vacant(&self, which: &[usize]) -> bool {
        which.iter().all(|&i| self.vacant[i])
    }

    pub fn bits(&self) -> String {
        self.vacant.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

/// Trace on `K` of random interlacements at level `u`, for the walk killed on
/// leaving `R_ρ`: `Poisson(u·e_ρ(K))` forward walks from the normalized
/// truncated equilibrium measure. For that chain the law is exact, so
/// `P[V vacant] = exp(−u·e_ρ(V))` for every `V ⊆ K`.
pub struct InterlacementSampler<'w> {
    win: &'w CylWindow,
    k: Vec<CylVertex>,
    cap_rho: f64,
    starts: Option<WeightedIndex<f64>>,
}

impl<'w> InterlacementSampler<'w> {
    /// Fails with `IncreaseTruncation` when the capacity bracket of `K` is
    /// wider than `max_rel_width` of its value.
    pub fn new(win: &'w CylWindow, k: Vec<CylVertex>, est: &CapacityEstimate, eq: &EquilibriumMeasure, max_rel_width: f64) -> Result<Self> {
        if !k.is_empty() && est.rel_width() >= max_rel_width {
            return Err(Error::IncreaseTruncation(est.rel_width()));
        }
        let starts = if k.is_empty() { None } else { Some(WeightedIndex::new(&eq.mass).map_err(|e| Error::Param(e.to_string()))?) };
        Ok(Self { win, cap_rho: eq.total(), k, starts })
    }

    pub fn cap_rho(&self) -> f64 {
        self.cap_rho
    }

    pub fn sample(&self, u: f64, seed: u64, trial: u64) -> Result<VacantWindow> {
        if !(u >= 0.0) {
            return Err(Error::Param("level u must be nonnegative".into()));
        }
        let mut vacant = vec![true; self.k.len()];
        let mut rng = stream(seed, "interlacement", trial);
        let mean = u * self.cap_rho;
        let n = if mean > 0.0 { Poisson::new(mean).map_err(|e| Error::Param(e.to_string()))?.sample(&mut rng) as u64 } else { 0 };
        let cyl = CylinderView::new(&self.win.base.graph);
        let mut left = self.k.len();
        'walks: for _ in 0..n {
            let mut x = self.k[self.starts.as_ref().unwrap().sample(&mut rng)];
            while self.win.inside(x, self.win.rho) {
                if let Some(i) = self.k.iter().position(|&kx| kx == x) {
                    if vacant[i] {
                        vacant[i] = false;
                        left -= 1;
                        if left == 0 {
                            break 'walks;
                        }
                    }
                }
                x = cyl.step(x, &mut rng);
            }
        }
        Ok(VacantWindow { keys: self.win.keys(&self.k), vacant, provenance: Provenance::InterlacementSample })
    }
}

pub fn sample_interlacement_window(u: f64, win: &CylWindow, k: &[CylVertex], gamma: Option<f64>, seed: u64) -> Result<VacantWindow> {
    let (est, eq) = capacity(win, k, gamma)?;
    InterlacementSampler::new(win, k.to_vec(), &est, &eq, 0.05)?.sample(u, seed, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::{make_box_limit_window, BoxLimit};

    struct Point;
    impl LimitModel for Point {
        fn origin(&self) -> Vec<i64> {
            vec![0]
        }
        fn neighbors(&self, _: &[i64]) -> Vec<(Vec<i64>, f64)> {
            Vec::new()
        }
        fn contains(&self, k: &[i64]) -> bool {
            k == [0]
        }
    }

    /// `P_x[T < H̃_V]` by a dense absorbing-chain solve over explicit states.
    fn dense_oracle(base: &WeightedGraph, lo: i64, hi: i64, x0: CylVertex, v: &[CylVertex]) -> f64 {
        let zs: Vec<i64> = (lo + 1..hi).collect();
        let states: Vec<CylVertex> = (0..base.n() as Vertex).flat_map(|y| zs.iter().map(move |&z| CylVertex::new(y, z))).collect();
        let pos = |x: CylVertex| states.iter().position(|&s| s == x);
        let cyl = CylinderView::new(base);
        let n = states.len();
        // h(s) = P_s[leave before hitting V]; h = 0 on V
        let mut a = nalgebra::DMatrix::identity(n, n);
        let mut b = vec![0.0; n];
        for (i, &s) in states.iter().enumerate() {
            if v.contains(&s) {
                continue;
            }
            let w = cyl.vertex_weight(s);
            for (t, wt) in cyl.neighbors(s) {
                match pos(t) {
                    Some(j) => a[(i, j)] -= wt / w,
                    None => b[i] += wt / w,
                }
            }
        }
        let h = dense_solve(a, &b).unwrap();
        let w = cyl.vertex_weight(x0);
        cyl.neighbors(x0)
            .iter()
            .map(|&(t, wt)| wt / w * pos(t).map_or(1.0, |j| if v.contains(&t) { 0.0 } else { h[j] }))
            .sum()
    }

    #[test]
    fn box_capacity_two_vertex_base() {
        let g = WeightedGraph::from_edges(2, &[(0, 1, 0.5)]).unwrap();
        let x = CylVertex::new(0, 0);
        let (est, eq) = box_capacity(&g, -2, 2, &[x]).unwrap();
        let p = dense_oracle(&g, -2, 2, x, &[x]);
        assert!((est.value - 1.5 * p).abs() < 1e-13, "{} vs {}", est.value, 1.5 * p);
        assert!((eq.normalized[0] - 1.0).abs() < 1e-15);
        assert!(matches!(box_capacity(&g, -2, 2, &[CylVertex::new(0, 2)]), Err(Error::NotInBox)));
        assert_eq!(box_capacity(&g, -2, 2, &[]).unwrap().0.value, 0.0);
    }

    #[test]
    fn box_capacity_cg_matches_dense() {
        let g = crate::zoo::make_box(8, 2).unwrap();
        let v = [CylVertex::new(27, 0), CylVertex::new(28, 0), CylVertex::new(27, 1)];
        // 64 * 29 > DENSE_LIMIT; the oracle is dense
        let (est, eq) = box_capacity(&g, -15, 15, &v).unwrap();
        for (x, e) in v.iter().zip(&eq.mass) {
            let p = dense_oracle(&g, -15, 15, *x, &v);
            assert!((e - (g.vertex_weight(x.y) + 1.0) * p).abs() < 1e-8);
            assert!(*e <= g.vertex_weight(x.y) + 1.0);
        }
        assert!((eq.normalized.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(est.value > 0.0);
    }

    #[test]
    fn recurrent_fiber_bracket_stays_open() {
        let win = CylWindow::new(&Point, 64).unwrap();
        let x = [CylVertex::new(0, 0)];
        // gambler's ruin: e_r = 1/(r+1)
        let e = truncated_equilibrium(&win, &x, 64).unwrap()[0];
        assert!((e - 1.0 / 65.0).abs() < 1e-12);
        let (est, _) = capacity(&win, &x, None).unwrap();
        assert!(est.lower < 0.1 * est.upper && est.rel_width() > 1.0);
    }

    #[test]
    fn truncation_errors() {
        let win = make_box_limit_window(0, 2, 4).map(|b| CylWindow { base: b, rho: 4 }).unwrap();
        let far = [CylVertex::new(0, 3)];
        assert!(matches!(truncated_equilibrium(&win, &far, 4), Err(Error::TruncationTooSmall)));
        assert!(matches!(truncated_equilibrium(&win, &far, 5), Err(Error::TruncationTooSmall)));
        assert_eq!(capacity(&win, &[], Some(1.0)).unwrap().0.value, 0.0);
        assert!(vacant_probability(-1.0, &CapacityEstimate::zero(4, CapMethod::Exact)).is_err());
    }

    #[test]
    fn z3_monotone_subadditive() {
        let win = CylWindow::new(&BoxLimit { a: 0, b: 2 }, 12).unwrap();
        let s = win.shape(WindowShape::Single);
        let p = win.shape(WindowShape::Pair);
        let t = win.shape(WindowShape::LTriple);
        let c = |v: &[CylVertex]| truncated_equilibrium(&win, v, 12).unwrap().iter().sum::<f64>();
        let (cs, cp, ct) = (c(&s), c(&p), c(&t));
        assert!(cs < cp && cp < ct);
        assert!(cp <= 2.0 * cs && ct <= cp + cs);
        // far from 1/(something) yet bounded by weights
        assert!(cs > 1.8 && cs < 3.0);
    }

    #[test]
    fn sampler_trivial_cases() {
        let win = CylWindow::new(&BoxLimit { a: 0, b: 2 }, 16).unwrap();
        let k = win.shape(WindowShape::Pair);
        let (est, eq) = capacity(&win, &k, Some(1.0)).unwrap();
        let s = InterlacementSampler::new(&win, k.clone(), &est, &eq, 1.0).unwrap();
        assert!(s.sample(0.0, 1, 0).unwrap().vacant.iter().all(|&b| b));
        assert!(matches!(InterlacementSampler::new(&win, k, &est, &eq, 1e-6), Err(Error::IncreaseTruncation(_))));
        let (p, lo, hi) = vacant_probability(0.5, &est).unwrap();
        assert!(lo <= p && p <= hi);
    }
}
