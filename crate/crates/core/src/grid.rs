//! Partially inhomogeneous grids on `Z` and the return/departure excursion
//! decomposition of a `Z`-trajectory.
//!
//! Around each grid point `g` sit the closed interval `[g−d, g+d]` (union `C`)
//! and the open interval `(g−h, g+h)` (union `O`). `R_k` is the `k`-th entrance
//! into `C` and `D_k` the following exit from `O`.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, WalkRng};

/// Balls `B(c_i, p)` covering the input points with `B(c_i, b·p)` pairwise disjoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cover {
    pub centers: Vec<i64>,
    pub p: f64,
    /// Number of radius multiplications by `b²`.
    pub rounds: usize,
}

fn closed_ball_disjoint(c: i64, c2: i64, r: f64) -> bool {
    (c - c2).unsigned_abs() > 2 * r.floor() as u64
}

/// Minimal cover of sorted, deduplicated points by integer balls of radius `r`:
/// clusters grown greedily from the left, each centred at its floor midpoint.
fn greedy_cover(sorted: &[i64], r: f64) -> Vec<i64> {
    let span = 2 * r.floor() as i64;
    let mut centers = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let lo = sorted[i];
        let mut hi = lo;
        while i < sorted.len() && sorted[i] - lo <= span {
            hi = sorted[i];
            i += 1;
        }
        centers.push(lo + (hi - lo).div_euclid(2));
    }
    centers
}

pub fn cover_points(points: &[i64], a: f64, b: f64) -> Result<Cover> {
    if points.is_empty() {
        return Err(Error::EmptySet);
    }
    if !(a >= 1.0) || !(b >= 2.0) {
        return Err(Error::Param(format!("cover needs a >= 1 and b >= 2, got a={a}, b={b}")));
    }
    let mut sorted = points.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut r = a;
    for rounds in 0..=points.len() {
        let centers = greedy_cover(&sorted, r);
        let disjoint = centers.windows(2).all(|w| closed_ball_disjoint(w[0], w[1], b * r));
        if disjoint {
            return Ok(Cover { centers, p: r, rounds });
        }
        r *= b * b;
    }
    unreachable!("a single ball is always disjoint")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFlags {
    /// `λ^{-1/2}|G|^{ε/8} ≤ d`.
    pub s1_lower: bool,
    /// `h ≤ λ^{-1/2}|G|^{ε/4}`.
    pub s1_upper: bool,
    /// Constructive `b` gave `h/d` below the requested ratio; `b` was overridden.
    pub b_override: bool,
    pub s2: bool,
    pub s3: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub z_star: Vec<i64>,
    pub d: i64,
    pub h: i64,
    pub targets: Vec<i64>,
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub flags: GridFlags,
}

impl GridSpec {
    pub fn new(mut z_star: Vec<i64>, d: i64, h: i64) -> Result<Self> {
        if d < 1 || h < d || z_star.is_empty() {
            return Err(Error::Param(format!("grid needs 1 <= d <= h and points, got d={d}, h={h}")));
        }
        z_star.sort_unstable();
        let s2 = z_star.windows(2).all(|w| w[1] - w[0] >= 100 * h);
        Ok(Self {
            targets: z_star.clone(),
            z_star,
            d,
            h,
            a: d as f64 / 2.0,
            b: f64::NAN,
            p: d as f64 / 2.0,
            flags: GridFlags { s1_lower: true, s1_upper: true, b_override: false, s2, s3: true },
        })
    }

    pub fn is_grid_point(&self, g: i64) -> bool {
        self.z_star.binary_search(&g).is_ok()
            || (g.rem_euclid(2 * self.h) == 0 && self.z_star.iter().all(|&s| (g - s).abs() >= 2 * self.h))
    }

    /// Grid points within `3h` of `z` are always among these candidates.
    fn nearby(&self, z: i64) -> impl Iterator<Item = i64> + '_ {
        let k = z.div_euclid(2 * self.h);
        ((k - 3)..=(k + 4))
            .map(move |j| j * 2 * self.h)
            .filter(move |&g| self.is_grid_point(g))
            .chain(self.z_star.iter().copied())
    }

    pub fn dist_to_c(&self, z: i64) -> i64 {
        self.nearby(z).map(|g| ((z - g).abs() - self.d).max(0)).min().unwrap()
    }

    pub fn in_c(&self, z: i64) -> bool {
        self.dist_to_c(z) == 0
    }

    /// Steps needed to leave `O` (0 if already outside). Components of `O` never merge.
    pub fn dist_exit_o(&self, z: i64) -> i64 {
        self.nearby(z).map(|g| (self.h - (z - g).abs()).max(0)).max().unwrap()
    }

    pub fn in_o(&self, z: i64) -> bool {
        self.dist_exit_o(z) > 0
    }

    /// Index `l` with `z ∈ I_l = [z*_l − d, z*_l + d]`.
    pub fn interval_of(&self, z: i64) -> Option<usize> {
        self.z_star.iter().position(|&s| (z - s).abs() <= self.d)
    }

    pub fn t_n(&self) -> f64 {
        let (h, d) = (self.h as f64, self.d as f64);
        (h - d).powi(2) + h * h - d * d
    }

    /// `(σ, k_*, k^*)` for horizon `α|G|²`.
    pub fn sigma(&self, alpha: f64, g_size: f64) -> (u64, u64, u64) {
        let sigma = (alpha * g_size * g_size / self.t_n()).floor() as u64;
        let j = (sigma as f64).powf(0.75).floor() as u64;
        (sigma, sigma.saturating_sub(j), sigma + j)
    }

    fn check_s3(&self) -> bool {
        self.targets.iter().all(|&t| self.z_star.iter().any(|&s| (t - s).abs() <= self.d / 2))
    }
}

/// Grid for target heights `z_1..z_M`. When the constructive `b` yields
/// `h/d < ratio` it is replaced by `200·ratio` and flagged.
pub fn build_grid(targets: &[i64], g_size: f64, lambda: f64, eps: f64, ratio: f64) -> Result<GridSpec> {
    if targets.is_empty() {
        return Err(Error::EmptySet);
    }
    if !(g_size >= 2.0) || !(lambda > 0.0) || !(eps > 0.0 && eps < 1.0) || !(ratio >= 1.0) {
        return Err(Error::Param("build_grid needs |G| >= 2, lambda > 0, 0 < eps < 1, ratio >= 1".into()));
    }
    let m = targets.len() as f64;
    let scale = lambda.powf(-0.5);
    let a = (scale * g_size.powf(eps / 8.0)).ceil().max(1.0);
    let b_con = g_size.powf(eps / (8.0 * (2.0 * m + 1.0))).floor();
    let b_override = b_con < 200.0 * ratio;
    let b = if b_override { 200.0 * ratio } else { b_con };
    let cover = cover_points(targets, a, b)?;
    let p = cover.p;
    let d = (2.0 * p).floor() as i64;
    let h = (b * p / 100.0).floor() as i64;
    let mut z_star = cover.centers;
    while z_star.len() < targets.len() {
        let top = *z_star.iter().max().unwrap() + 100 * h;
        z_star.push(top.div_euclid(2 * h) * 2 * h + if top.rem_euclid(2 * h) == 0 { 0 } else { 2 * h });
    }
    let mut grid = GridSpec::new(z_star, d, h)?;
    grid.targets = targets.to_vec();
    grid.a = a;
    grid.b = b;
    grid.p = p;
    grid.flags.b_override = b_override;
    grid.flags.s1_lower = scale * g_size.powf(eps / 8.0) <= d as f64;
    grid.flags.s1_upper = h as f64 <= scale * g_size.powf(eps / 4.0);
    grid.flags.s3 = grid.check_s3();
    if !grid.flags.s2 || !grid.flags.s3 {
        return Err(Error::GridInfeasible(format!(
            "s2={} s3={} for z*={:?}, d={d}, h={h}",
            grid.flags.s2, grid.flags.s3, grid.z_star
        )));
    }
    Ok(grid)
}

/// Feeds positions `(n, Z_n)` in increasing `n` and records `R_k`, `D_k`.
/// Positions may be skipped only while no entrance or exit can occur.
#[derive(Clone, Debug)]
struct Tracker {
    inside: bool,
    r: Vec<u64>,
    d: Vec<u64>,
    entry: Vec<Option<usize>>,
}

impl Tracker {
    fn new() -> Self {
        Self { inside: false, r: Vec::new(), d: Vec::new(), entry: Vec::new() }
    }

    /// Returns true when a departure was recorded at `n`.
    fn observe(&mut self, grid: &GridSpec, n: u64, z: i64) -> bool {
        if self.inside {
            if !grid.in_o(z) {
                self.inside = false;
                self.d.push(n);
                return true;
            }
        } else if grid.in_c(z) {
            self.inside = true;
            self.r.push(n);
            self.entry.push(grid.interval_of(z));
        }
        false
    }

    /// Distance within which nothing can happen.
    fn quiet(&self, grid: &GridSpec, z: i64) -> i64 {
        if self.inside {
            grid.dist_exit_o(z)
        } else {
            grid.dist_to_c(z)
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExcursionDecomposition {
    pub r: Vec<u64>,
    pub d: Vec<u64>,
    /// Interval `I_l` containing `Z_{R_k}`, if any.
    pub entry: Vec<Option<usize>>,
    pub t_n: f64,
    pub sigma: u64,
    pub k_lo: u64,
    pub k_hi: u64,
    /// The skeleton ended before `D_{k^*}`.
    pub truncated: bool,
    /// The skeleton never entered `C`.
    pub no_return: bool,
}

impl ExcursionDecomposition {
    /// `Σ_{k ≤ k_max} 1{Z_{R_k} ∈ I_l}` per interval.
    pub fn entry_counts(&self, intervals: usize, k_max: u64) -> Vec<u64> {
        let mut c = vec![0; intervals];
        for l in self.entry.iter().take(k_max as usize).flatten() {
            c[*l] += 1;
        }
        c
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,R,D,interval\n");
        for (k, (&r, e)) in self.r.iter().zip(&self.entry).enumerate() {
            let d = self.d.get(k).map(|d| d.to_string()).unwrap_or_default();
            let e = e.map(|e| e.to_string()).unwrap_or_default();
            s.push_str(&format!("{},{r},{d},{e}\n", k + 1));
        }
        s
    }

    /// Continuous-time images `(𝖱_k, 𝖣_k)` from the skeleton's holding times.
    pub fn continuous_images(&self, holding: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut cum = Vec::with_capacity(holding.len() + 1);
        cum.push(0.0);
        for h in holding {
            cum.push(cum.last().unwrap() + h);
        }
        let at = |n: &u64| cum.get(*n as usize).copied().unwrap_or(f64::NAN);
        (self.r.iter().map(at).collect(), self.d.iter().map(at).collect())
    }
}

pub fn decompose_excursions(skeleton: &[i64], grid: &GridSpec, alpha: f64, g_size: f64) -> ExcursionDecomposition {
    let mut t = Tracker::new();
    for (n, &z) in skeleton.iter().enumerate() {
        t.observe(grid, n as u64, z);
    }
    let (sigma, k_lo, k_hi) = grid.sigma(alpha, g_size);
    ExcursionDecomposition {
        truncated: (t.d.len() as u64) < k_hi,
        no_return: t.r.is_empty(),
        r: t.r,
        d: t.d,
        entry: t.entry,
        t_n: grid.t_n(),
        sigma,
        k_lo,
        k_hi,
    }
}

/// Simple random walk on `Z` driven by one random bit per step; `advance(k)`
/// consumes `k` bits at once through popcounts.
pub struct FastZWalk {
    pub z: i64,
    pub n: u64,
    rng: WalkRng,
    bits: u64,
    left: u32,
}

impl FastZWalk {
    pub fn new(z: i64, rng: WalkRng) -> Self {
        Self { z, n: 0, rng, bits: 0, left: 0 }
    }

    pub fn step(&mut self) {
        self.advance(1);
    }

    /// `k` steps at once; the path in between stays within distance `k`.
    pub fn advance(&mut self, mut k: u64) {
        self.n += k;
        while k > 0 {
            if self.left == 0 {
                self.bits = self.rng.next_u64();
                self.left = 64;
            }
            let m = k.min(self.left as u64) as u32;
            let chunk = if m == 64 { self.bits } else { self.bits & ((1u64 << m) - 1) };
            self.z += 2 * chunk.count_ones() as i64 - m as i64;
            self.bits = if m == 64 { 0 } else { self.bits >> m };
            self.left -= m;
            k -= m as u64;
        }
    }
}

/// One synthetic run for the excursion-count statements, from `Z_0 = 0`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExcursionTrial {
    /// `D_{k_*} ≤ α|G|² ≤ D_{k^*}`.
    pub bracketed: bool,
    pub departures_by_t: u64,
    /// Per `z ∈ I_1`: `L̂^z_{[α|G|²]}` and `L̂^z_{D_{k_*}}`.
    pub lt_t: Vec<u64>,
    pub lt_dk: Vec<u64>,
    /// `Σ_{k ≤ k_*} 1{Z_{R_k} ∈ I_1}`.
    pub entries: u64,
    /// `D_{k_*}` when reached.
    pub d_klo: Option<u64>,
    /// `R_k − D_{k−1}` for `2 ≤ k ≤ k_*`.
    pub gaps: Vec<u64>,
}

pub fn excursion_trial(grid: &GridSpec, alpha: f64, g_size: f64, seed: u64, trial: u64) -> ExcursionTrial {
    let t_end = (alpha * g_size * g_size).floor() as u64;
    let (_, k_lo, k_hi) = grid.sigma(alpha, g_size);
    let (lo, hi) = (grid.z_star[0] - grid.d, grid.z_star[0] + grid.d);
    let mut lt = vec![0u64; (hi - lo + 1) as usize];
    let mut lt_t = None;
    let mut lt_dk = None;
    let mut tr = Tracker::new();
    let mut w = FastZWalk::new(0, stream(seed, "excursion-z", trial));
    loop {
        if w.n == t_end {
            lt_t = Some(lt.clone());
        }
        if tr.observe(grid, w.n, w.z) && tr.d.len() as u64 == k_lo {
            lt_dk = Some(lt.clone());
        }
        let done_t = lt_t.is_some();
        if (done_t && (lt_dk.is_some() || tr.d.len() as u64 >= k_hi)) || w.n >= 4 * t_end.max(1) {
            break;
        }
        let to_t = if done_t { u64::MAX } else { t_end - w.n };
        if w.z >= lo && w.z <= hi {
            lt[(w.z - lo) as usize] += 1;
            w.step();
            continue;
        }
        let outside = if w.z < lo { lo - w.z } else { w.z - hi };
        let quiet = tr.quiet(grid, w.z).min(outside).max(1) as u64;
        w.advance(quiet.min(to_t));
    }
    let lt_t = lt_t.unwrap_or_else(|| lt.clone());
    let entries = tr.entry.iter().take(k_lo as usize).filter(|e| **e == Some(0)).count() as u64;
    let dep_by_t = tr.d.iter().filter(|&&d| d <= t_end).count() as u64;
    let kk = (k_lo as usize).min(tr.r.len());
    let gaps = (1..kk).filter(|&k| k <= tr.d.len()).map(|k| tr.r[k] - tr.d[k - 1]).collect();
    ExcursionTrial {
        d_klo: tr.d.get(k_lo.max(1) as usize - 1).copied(),
        gaps,
        bracketed: dep_by_t >= k_lo && dep_by_t < k_hi,
        departures_by_t: dep_by_t,
        lt_t,
        lt_dk: lt_dk.unwrap_or(lt),
        entries,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cover_examples() {
        assert_eq!(cover_points(&[5], 1.0, 2.0).unwrap(), Cover { centers: vec![5], p: 1.0, rounds: 0 });
        let c = cover_points(&[0, 100], 1.0, 2.0).unwrap();
        assert_eq!((c.centers, c.p), (vec![0, 100], 1.0));
        let c = cover_points(&[0, 3], 1.0, 2.0).unwrap();
        assert_eq!((c.centers.len(), c.p), (1, 4.0));
        assert!(cover_points(&[], 1.0, 2.0).is_err());
        assert!(cover_points(&[1], 0.5, 2.0).is_err());
    }

    #[test]
    fn t_n_arithmetic() {
        let g = GridSpec::new(vec![0], 2, 10).unwrap();
        assert_eq!(g.t_n(), 160.0);
    }

    #[test]
    fn grid_membership() {
        let g = GridSpec::new(vec![0], 2, 10).unwrap();
        assert!(g.is_grid_point(20) && g.is_grid_point(-40) && !g.is_grid_point(10));
        assert!(g.in_c(22) && !g.in_c(23) && g.in_c(-2));
        assert!(g.in_o(9) && !g.in_o(10) && g.in_o(11));
        assert_eq!(g.dist_exit_o(0), 10);
        assert_eq!(g.dist_to_c(10), 8);
        // a grid point is blocked near an off-lattice z*
        let g = GridSpec::new(vec![7], 2, 10).unwrap();
        assert!(!g.is_grid_point(0) && !g.is_grid_point(20) && g.is_grid_point(40));
        assert_eq!(g.dist_to_c(25), 13);
    }

    #[test]
    fn build_grid_examples() {
        let g = build_grid(&[0], 1e4, 0.01, 0.5, 10.0).unwrap();
        assert_eq!((g.z_star.clone(), g.d, g.h), (vec![0], 36, 360));
        assert!(g.flags.b_override && g.flags.s3);
        let g = build_grid(&[0, 100_000], 1e6, 1e-4, 0.8, 10.0).unwrap();
        assert_eq!(g.a, 399.0);
        assert_eq!(g.z_star.len(), 2);
        assert!(g.d >= 398 && g.flags.s2 && g.flags.s3 && !g.flags.s1_upper);
    }

    #[test]
    fn decomposition_from_inside_c() {
        let g = GridSpec::new(vec![0], 2, 10).unwrap();
        let sk: Vec<i64> = (0..=22).chain((10..22).rev()).collect();
        let dec = decompose_excursions(&sk, &g, 1.0, 10.0);
        assert_eq!((dec.r.clone(), dec.d.clone()), (vec![0, 18], vec![10, 34]));
        assert_eq!(dec.entry, vec![Some(0), None]);
        assert!(dec.to_csv().starts_with("k,R,D,interval\n1,0,10,0\n2,18,34,\n"));
        let (r, d) = dec.continuous_images(&vec![0.5; sk.len()]);
        assert_eq!((r[1], d[1]), (9.0, 17.0));
        let none = decompose_excursions(&[50, 51], &g, 1.0, 100.0);
        assert!(none.no_return && none.truncated);
    }

    #[test]
    fn accelerated_walk_matches_stepwise_in_law() {
        let g = GridSpec::new(vec![0], 3, 90).unwrap();
        let (gs, trials) = (300.0, 200);
        let t_end = (gs * gs) as usize;
        let fast: crate::stats::Welford =
            (0..trials).map(|k| excursion_trial(&g, 1.0, gs, 11, k).departures_by_t as f64).collect();
        let slow: crate::stats::Welford = (0..trials)
            .map(|k| {
                let mut w = FastZWalk::new(0, stream(12, "slow", k));
                let mut sk = Vec::with_capacity(t_end + 1);
                sk.push(0);
                for _ in 0..t_end {
                    w.step();
                    sk.push(w.z);
                }
                decompose_excursions(&sk, &g, 1.0, gs).d.len() as f64
            })
            .collect();
        let se = (fast.se().powi(2) + slow.se().powi(2)).sqrt();
        assert!((fast.mean() - slow.mean()).abs() < 4.0 * se, "{} vs {}", fast.mean(), slow.mean());
    }
}
