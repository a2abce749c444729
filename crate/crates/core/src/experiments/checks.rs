//! Dedicated runs for the auxiliary limit statements: excursion counts on
//! synthetic grids, continuous-time local times, visit bounds, tree heat
//! kernels, box hitting asymptotics and the jump-process identities.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp1, Gamma, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{Check, Direction, Thresholds};
use crate::error::{Error, Result};
use crate::graph::{Vertex, WeightedGraph};
use crate::grid::{build_grid, excursion_trial, FastZWalk};
use crate::potential::{box_capacity, box_hitting_probability, CapacityEstimate};
use crate::rng::{derive_seed, stream};
use crate::spectral::{spectral_gap, GapMode, DEFAULT_DENSE_LIMIT};
use crate::stats::{ols, Welford};
use crate::walk::run_continuous;
use crate::zoo::{make_box, CylVertex, LocalWindow, RegularTree};

fn labels_g(gs: &[f64]) -> Vec<String> {
    gs.iter().map(|g| format!("|G|={g:.0}")).collect()
}

/// `(mean, se)` of `η^Y_t/t` over `runs` stationary starts, and `w(G)/|G|`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct JumpRate {
    pub mean: f64,
    pub se: f64,
    pub target: f64,
}

pub fn jump_rate_identity(g: &WeightedGraph, t: f64, runs: u64, seed: u64) -> Result<JumpRate> {
    let rates: Vec<f64> = (0..runs)
        .into_par_iter()
        .map(|k| {
            let s = derive_seed(seed, &format!("jump-rate-{k}"));
            let y0 = stream(s, "start", 0).random_range(0..g.n() as Vertex);
            run_continuous(g, y0, t, s).map(|tr| tr.steps() as f64 / t)
        })
        .collect::<Result<_>>()?;
    let w: Welford = rates.into_iter().collect();
    Ok(JumpRate { mean: w.mean(), se: w.se(), target: g.total_weight() / g.n() as f64 })
}

/// Variance and covariance of the compensated increments `I_{s,t}` of `η^Y`
/// against `c1(t−s) + c1²(t−s)²` and `c1²(t−s)(t'−s')|G|e^{−(s'−t)λ}`.
pub fn increment_check(g: &WeightedGraph, block: f64, runs: u64, seed: u64) -> Result<Check> {
    let (lambda, _) = spectral_gap(g, GapMode::Continuous, DEFAULT_DENSE_LIMIT)?;
    let (_, c1) = g.weight_range();
    let rate = g.total_weight() / g.n() as f64;
    let incs: Vec<(f64, f64)> = (0..runs)
        .into_par_iter()
        .map(|k| {
            let s = derive_seed(seed, &format!("increments-{k}"));
            let y0 = stream(s, "start", 0).random_range(0..g.n() as Vertex);
            let tr = run_continuous(g, y0, 3.0 * block, s)?;
            let i1 = tr.eta(block) as f64 - block * rate;
            let i3 = (tr.steps() - tr.eta(2.0 * block)) as f64 - block * rate;
            Ok((i1, i3))
        })
        .collect::<Result<_>>()?;
    let n = incs.len() as f64;
    let m1 = incs.iter().map(|p| p.0).sum::<f64>() / n;
    let m3 = incs.iter().map(|p| p.1).sum::<f64>() / n;
    let var = incs.iter().map(|p| (p.0 - m1).powi(2)).sum::<f64>() / (n - 1.0);
    let cov = incs.iter().map(|p| (p.0 - m1) * (p.1 - m3)).sum::<f64>() / (n - 1.0);
    let var_bound = c1 * block + c1 * c1 * block * block;
    let cov_bound = c1 * c1 * block * block * g.n() as f64 * (-block * lambda).exp();
    Ok(Check::trend(
        "increment-moments",
        "var(I_{s,t}) ≤ c1(t−s) + c1²(t−s)², |cov(I_{s,t}, I_{s',t'})| ≤ c1²(t−s)(t'−s')|G|e^{−(s'−t)λ}",
        Direction::Bounded,
        vec!["var/bound".into(), "|cov|/bound".into()],
        vec![var / var_bound, cov.abs() / cov_bound],
        vec![],
        Some(1.0),
        0.0,
    ))
}

/// Statistics of the synthetic excursion runs at one `|G|`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExcursionStats {
    pub g_size: f64,
    pub d: i64,
    pub h: i64,
    pub k_lo: u64,
    pub k_hi: u64,
    pub bracketed: f64,
    pub sp2: f64,
    pub sp3: f64,
    pub sp4: f64,
    pub sp4_se: f64,
    /// Mean of `|𝖣_{k_*}/D_{k_*} − 1| ∧ 1`.
    pub dlln: f64,
    /// `sup_k` of the fraction of runs with `𝖱_k − 𝖣_{k−1} ≤ λ^{-1}|G|^ε`.
    pub gap_hits: f64,
}

/// Grid at `λ^{-1} = √|G|`, one target at 0, `α = 1`, `ε = 1/2`.
pub fn excursion_stats(g_size: f64, trials: u64, ratio: f64, seed: u64) -> Result<ExcursionStats> {
    let (alpha, eps) = (1.0, 0.5);
    let lambda = g_size.powf(-0.5);
    let grid = build_grid(&[0], g_size, lambda, eps, ratio)?;
    let (_, k_lo, k_hi) = grid.sigma(alpha, g_size);
    let sep = g_size.powf(eps) / lambda;
    let seed = derive_seed(seed, &format!("excursions-{g_size}"));
    let runs: Vec<_> = (0..trials).into_par_iter().map(|k| excursion_trial(&grid, alpha, g_size, seed, k)).collect();
    let n = runs.len() as f64;
    let bracketed = runs.iter().filter(|r| r.bracketed).count() as f64 / n;
    // sup over z ∈ I_1 of the means
    let width = runs[0].lt_t.len();
    let sup = |f: &dyn Fn(&crate::grid::ExcursionTrial, usize) -> f64| -> (f64, f64) {
        (0..width)
            .map(|z| {
                let w: Welford = runs.iter().map(|r| f(r, z)).collect();
                (w.mean(), w.se())
            })
            .fold((0.0, 0.0), |a, b| if b.0 > a.0 { b } else { a })
    };
    let (sp2, _) = sup(&|r, z| ((r.lt_t[z] as f64 - r.lt_dk[z] as f64).abs() / g_size).min(1.0));
    let (sp4, sp4_se) = sup(&|r, z| (r.lt_dk[z] as f64 - grid.h as f64 * r.entries as f64).abs() / g_size);
    let sp3 = grid.h as f64 / g_size * runs.iter().map(|r| r.entries as f64).sum::<f64>() / n;
    let mut rng = stream(seed, "holding-images", 0);
    let mut dlln = Welford::default();
    // per-excursion hit counts; the check takes the sup over k
    let mut gap_hits: Vec<u64> = Vec::new();
    for r in &runs {
        if let Some(d) = r.d_klo.filter(|&d| d > 0) {
            let g: f64 = Gamma::new(d as f64, 1.0).map_err(|e| Error::Param(e.to_string()))?.sample(&mut rng);
            dlln.push((g / d as f64 - 1.0).abs().min(1.0));
        }
        if gap_hits.len() < r.gaps.len() {
            gap_hits.resize(r.gaps.len(), 0);
        }
        for (k, &gap) in r.gaps.iter().enumerate() {
            let c: f64 = Gamma::new(gap.max(1) as f64, 1.0).map_err(|e| Error::Param(e.to_string()))?.sample(&mut rng);
            gap_hits[k] += (c <= sep) as u64;
        }
    }
    Ok(ExcursionStats {
        g_size,
        d: grid.d,
        h: grid.h,
        k_lo,
        k_hi,
        bracketed,
        sp2,
        sp3,
        sp4,
        sp4_se,
        dlln: dlln.mean(),
        gap_hits: gap_hits.iter().max().map_or(0.0, |&h| h as f64 / n),
    })
}

/// The excursion-count checks across `g_sizes` (increasing).
pub fn excursion_checks(g_sizes: &[f64], trials: u64, seed: u64, th: &Thresholds) -> Result<(Vec<ExcursionStats>, Vec<Check>)> {
    let stats: Vec<ExcursionStats> = g_sizes.iter().map(|&g| excursion_stats(g, trials, 10.0, seed)).collect::<Result<_>>()?;
    let labels = labels_g(g_sizes);
    let col = |f: fn(&ExcursionStats) -> f64| stats.iter().map(f).collect::<Vec<_>>();
    // Laplace-smoothed, so an empty count still carries sampling error
    let bern_se = |p: f64| {
        let n = trials as f64;
        let q = (p * n + 1.0) / (n + 2.0);
        (q * (1.0 - q) / n).sqrt()
    };
    let sigma = th.trend_sigma;
    let checks = vec![
        Check::trend(
            "excursion-bracket",
            "P[D_{k_*} ≤ α|G|² ≤ D_{k^*}] → 1",
            Direction::ToOne,
            labels.clone(),
            col(|s| s.bracketed),
            stats.iter().map(|s| bern_se(s.bracketed)).collect(),
            Some(1.0 - th.excursion_bracket_min),
            sigma,
        ),
        Check::trend(
            "departure-local-time",
            "sup_z E[(|L̂^z_{α|G|²} − L̂^z_{D_{k_*}}|/|G|) ∧ 1] → 0",
            Direction::ToZero,
            labels.clone(),
            col(|s| s.sp2),
            vec![],
            None,
            sigma,
        ),
        Check::trend(
            "entries-bounded",
            "sup_N (h/|G|)·E[Σ_{k ≤ k_*} 1{Z_{R_k} ∈ I}] < ∞",
            Direction::Bounded,
            labels.clone(),
            col(|s| s.sp3),
            vec![],
            Some(th.entries_bound),
            sigma,
        ),
        Check::trend(
            "entry-local-time",
            "sup_z E[|L̂^z_{D_{k_*}} − h·Σ_{k ≤ k_*} 1{Z_{R_k} ∈ I}|]/|G| → 0",
            Direction::ToZero,
            labels.clone(),
            col(|s| s.sp4),
            col(|s| s.sp4_se),
            None,
            sigma,
        )
        .with_note("slow: the entry interval has width 2d ≈ h/5 at these sizes"),
        Check::trend(
            "departure-time-lln",
            "E[|𝖣_{a_N}/D_{a_N} − 1| ∧ 1] → 0",
            Direction::ToZero,
            labels.clone(),
            col(|s| s.dlln),
            vec![],
            None,
            sigma,
        ),
        Check::trend(
            "gap-separation",
            "sup_k P[𝖱_k − 𝖣_{k−1} ≤ λ^{-1}|G|^ε] → 0",
            Direction::ToZero,
            labels,
            col(|s| s.gap_hits),
            stats.iter().map(|s| bern_se(s.gap_hits)).collect(),
            None,
            sigma,
        ),
    ];
    Ok((stats, checks))
}

/// `(𝖫^0_T, L̂^0_{⌊T⌋})` for the rate-one continuous walk on `Z`, `T = α|G|²`.
/// The holding times are drawn only at visits to 0; between visits the
/// elapsed time is a Gamma variable.
pub fn continuous_local_time(t: f64, seed: u64, trial: u64) -> (f64, u64) {
    let mut w = FastZWalk::new(0, stream(seed, "z-skeleton", trial));
    let mut hrng = stream(seed, "z-holding", trial);
    let t_steps = t.floor() as u64;
    let (mut l_cont, mut l_hat) = (0.0, 0u64);
    let mut clock = 0.0;
    let mut last = 0u64; // steps whose holding times are accounted for
    let cap = 4 * t_steps.max(16);
    while w.n < cap && (clock <= t || w.n < t_steps) {
        if w.z == 0 {
            let k = w.n - last;
            if k > 0 {
                clock += Gamma::new(k as f64, 1.0).unwrap().sample(&mut hrng);
            }
            let e: f64 = Exp1.sample(&mut hrng);
            if clock < t {
                l_cont += (clock + e).min(t) - clock;
            }
            clock += e;
            last = w.n + 1;
            if w.n < t_steps {
                l_hat += 1;
            }
            w.step();
        } else {
            w.advance(w.z.unsigned_abs());
        }
    }
    (l_cont, l_hat)
}

pub fn continuous_local_time_check(g_sizes: &[f64], trials: u64, seed: u64, th: &Thresholds) -> Check {
    let mut stat = Vec::new();
    let mut se = Vec::new();
    for &g in g_sizes {
        let s = derive_seed(seed, &format!("continuous-lt-{g}"));
        let w: Welford = (0..trials)
            .into_par_iter()
            .map(|k| {
                let (lc, lh) = continuous_local_time(g * g, s, k);
                ((lc - lh as f64).abs() / g).min(1.0)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .collect();
        stat.push(w.mean());
        se.push(w.se());
    }
    Check::trend(
        "continuous-local-time",
        "E[(|𝖫^z_{α|G|²} − L̂^z_{[α|G|²]}|/|G|) ∧ 1] → 0",
        Direction::ToZero,
        labels_g(g_sizes),
        stat,
        se,
        None,
        th.trend_sigma,
    )
}

/// `P_0[0 ∈ 𝖹_{[s,s+1]}]·√s/2` for the rate-one walk.
pub fn visit_bound_check(s_values: &[f64], samples: u64, seed: u64, th: &Thresholds) -> Result<Check> {
    let mut stat = Vec::new();
    let mut se = Vec::new();
    for &s in s_values {
        let mut rng = stream(seed, &format!("visit-bound-{s}"), 0);
        let pois = Poisson::new(s).map_err(|e| Error::Param(e.to_string()))?;
        let unit = Poisson::new(1.0).unwrap();
        let mut hits = 0u64;
        for _ in 0..samples {
            let n = pois.sample(&mut rng) as u64;
            let up = Binomial::new(n, 0.5).unwrap().sample(&mut rng) as i64;
            let mut z = 2 * up - n as i64;
            let k = unit.sample(&mut rng) as u64;
            let mut hit = z == 0;
            for _ in 0..k {
                z += if rng.random::<bool>() { 1 } else { -1 };
                hit |= z == 0;
            }
            hits += hit as u64;
        }
        let p = hits as f64 / samples as f64;
        let f = s.sqrt() / 2.0;
        stat.push(p * f);
        se.push((p * (1.0 - p) / samples as f64).sqrt() * f);
    }
    let labels = s_values.iter().map(|s| format!("s={s}")).collect();
    Ok(Check::trend(
        "visit-bound",
        "P_z[z' ∈ 𝖹_{[s,t]}] ≤ c(1+t−s)/√s",
        Direction::Bounded,
        labels,
        stat,
        se,
        Some(th.visit_bound),
        th.trend_sigma,
    ))
}

/// `max_y p_n(o, y)` on the `(d+1)`-regular tree for `n = 1..=n_max`, through
/// the distance chain: `P[|Y_n| = k]` spread over the `(d+1)d^{k−1}` vertices
/// of the sphere.
pub fn regular_tree_kernel_max(d: usize, n_max: usize) -> Vec<f64> {
    let q = 1.0 / (d as f64 + 1.0);
    let mut p = vec![0.0; n_max + 2];
    p[0] = 1.0;
    let sphere = |k: usize| if k == 0 { 1.0 } else { (d as f64 + 1.0) * (d as f64).powi(k as i32 - 1) };
    let mut out = Vec::with_capacity(n_max);
    for _ in 0..n_max {
        let mut next = vec![0.0; n_max + 2];
        next[1] += p[0];
        for k in 1..=n_max {
            next[k + 1] += p[k] * (1.0 - q);
            next[k - 1] += p[k] * q;
        }
        p = next;
        out.push((0..=n_max).map(|k| p[k] / sphere(k)).fold(0.0, f64::max));
    }
    out
}

/// Same quantity by powers of the walk on a window of radius `r ≥ n_max`;
/// the frontier is out of reach before step `r + 1`.
pub fn regular_tree_kernel_window(d: usize, n_max: u32) -> Result<Vec<f64>> {
    let win = LocalWindow::build(&RegularTree { d }, &[], n_max)?;
    let g = &win.graph;
    let mut p = vec![0.0; g.n()];
    p[win.origin as usize] = 1.0;
    let mut out = Vec::new();
    for _ in 0..n_max {
        let mut next = vec![0.0; g.n()];
        for y in 0..g.n() as Vertex {
            if p[y as usize] == 0.0 || !win.is_interior(y) {
                continue;
            }
            for (t, w) in g.edges_of(y) {
                next[t as usize] += p[y as usize] * w / g.vertex_weight(y);
            }
        }
        p = next;
        out.push(p.iter().copied().fold(0.0, f64::max));
    }
    Ok(out)
}

pub fn tree_heat_kernel_check(d: usize, n_max: usize, th: &Thresholds) -> Check {
    let m = regular_tree_kernel_max(d, n_max);
    let x: Vec<f64> = (1..=n_max).map(|n| n as f64).collect();
    let y: Vec<f64> = m.iter().map(|p| p.ln()).collect();
    let (_, slope, r2) = ols(&x, &y);
    Check::trend(
        "tree-heat-kernel-decay",
        "p_n(y_0, y) ≤ e^{−c(d)n} on the regular tree",
        Direction::Bounded,
        vec!["log-linear slope".into(), "1 − R²".into()],
        vec![slope, 1.0 - r2],
        vec![],
        None,
        th.trend_sigma,
    )
    .and(slope < 0.0 && r2 > th.heat_kernel_r2)
    .with_note(format!("n ≤ {n_max}, R² = {r2:.4}"))
}

/// One scale of the box hitting asymptotics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HittingScale {
    pub n: usize,
    pub d: i64,
    pub h: i64,
    pub cap: f64,
    /// `P_{z1,z2}[H_V < T_B̃] / ((h/|G|)·cap_B̃(V))` for `(z1, z2)` in
    /// `{(+d, +h), (+d, −h)}`.
    pub ratios: [f64; 2],
    /// `max |ratio − 1|·h/d`.
    pub c_fit: f64,
}

/// `V` the centre of the box `[0, n)²` at height 0, `B̃ = G × (−h, h)`.
/// The exit side after `H_V` is fair, so
/// `P_{z1}[H_V < T, Z_T = z2] = P_{z1}[H_V < T]/2` and the conditioning
/// divides by `P_{z1}[Z_T = z2] = (h ± d)/(2h)`.
pub fn hitting_scale(n: usize, d: i64, h: i64) -> Result<HittingScale> {
    if !(0 < d && d < h) {
        return Err(Error::Param("need 0 < d < h".into()));
    }
    let g = make_box(n, 2)?;
    let c = (n / 2) as i64;
    let y = (0..g.n() as Vertex).find(|&y| g.label(y).unwrap() == [c, c]).unwrap();
    let v = [CylVertex::new(y, 0)];
    let (cap, _) = box_capacity(&g, -h, h, &v)?;
    let hit = box_hitting_probability(&g, -h, h, &v, d)?;
    let p = hit.iter().sum::<f64>() / g.n() as f64;
    let scale = h as f64 / g.n() as f64 * cap.value;
    let side = |towards: bool| if towards { (h + d) as f64 / (2 * h) as f64 } else { (h - d) as f64 / (2 * h) as f64 };
    let ratios = [0.5 * p / side(true) / scale, 0.5 * p / side(false) / scale];
    let c_fit = ratios.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max) * h as f64 / d as f64;
    Ok(HittingScale { n, d, h, cap: cap.value, ratios, c_fit })
}

pub fn hitting_asymptotics_check(scales: &[(usize, i64, i64)], th: &Thresholds) -> Result<(Vec<HittingScale>, Check)> {
    let hs: Vec<HittingScale> = scales.iter().map(|&(n, d, h)| hitting_scale(n, d, h)).collect::<Result<_>>()?;
    let cs: Vec<f64> = hs.iter().map(|s| s.c_fit).collect();
    let lo = cs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = cs.iter().copied().fold(0.0, f64::max);
    let labels = hs.iter().map(|s| format!("N={},d={},h={}", s.n, s.d, s.h)).collect();
    let chk = Check::trend(
        "box-hitting-asymptotics",
        "1 − c·d/h ≤ P_{z1,z2}[H_V < T_B̃] / ((h/|G|)·cap_B̃(V)) ≤ 1 + c·d/h",
        Direction::Bounded,
        labels,
        cs,
        vec![],
        None,
        th.trend_sigma,
    )
    .and(lo > 0.0 && hi / lo <= th.hitting_constant_ratio)
    .with_note("statistic: fitted c per scale; stable when max/min is within the threshold");
    Ok((hs, chk))
}

/// `cap_B̃(V)` for `B̃ = G_N × (−h, h)`, `h = ⌈N^{3/2}⌉`, against the limit
/// capacity of the single vertex.
pub fn box_capacity_limit_check(sizes: &[usize], limit: &CapacityEstimate, th: &Thresholds) -> Result<Check> {
    let mut stat = Vec::new();
    for &n in sizes {
        let g = make_box(n, 2)?;
        let c = (n / 2) as i64;
        let y = (0..g.n() as Vertex).find(|&y| g.label(y).unwrap() == [c, c]).unwrap();
        let h = (n as f64).powf(1.5).ceil() as i64;
        let (cap, _) = box_capacity(&g, -h, h, &[CylVertex::new(y, 0)])?;
        stat.push(cap.value / limit.value);
    }
    Ok(Check::trend(
        "box-capacity-limit",
        "cap_B̃(V_I) → Σ_m cap(𝕍_m)",
        Direction::ToOne,
        sizes.iter().map(|n| format!("N={n}")).collect(),
        stat,
        vec![],
        None,
        th.trend_sigma,
    ))
}

/// `Σ_{n ≤ λ^{-1}|G|^ε} sup_{y_0 ∈ ∂(C^c), y ∈ B(y_m, ρ_0)} p_n(y_0, y)/√n`
/// with `C = B(y_m, r)`. Uses reversibility to start the powers from the
/// (few) vertices of `B(y_m, ρ_0)`.
pub fn a10_surrogate(g: &WeightedGraph, y_m: Vertex, r: u32, rho0: u32, eps: f64) -> Result<f64> {
    let (lambda, _) = spectral_gap(g, GapMode::Continuous, DEFAULT_DENSE_LIMIT)?;
    let n_max = (g.n() as f64).powf(eps) / lambda;
    let n_max = n_max.floor() as usize;
    let dist = g.bfs(y_m);
    let boundary: Vec<Vertex> = (0..g.n() as Vertex)
        .filter(|&y| dist[y as usize] <= r && g.neighbors(y).iter().any(|&t| dist[t as usize] > r))
        .collect();
    if boundary.is_empty() {
        return Err(Error::Param("ball covers the whole graph".into()));
    }
    let targets: Vec<Vertex> = (0..g.n() as Vertex).filter(|&y| dist[y as usize] <= rho0).collect();
    let mut best = vec![0.0f64; n_max + 1];
    for &y in &targets {
        // q_n(x) = p_n(y, x); p_n(x, y) = q_n(x)·w_y/w_x
        let mut q = vec![0.0; g.n()];
        q[y as usize] = 1.0;
        for b in best.iter_mut().skip(1) {
            let mut next = vec![0.0; g.n()];
            for x in 0..g.n() as Vertex {
                let qx = q[x as usize];
                if qx != 0.0 {
                    let wx = g.vertex_weight(x);
                    for (t, w) in g.edges_of(x) {
                        next[t as usize] += qx * w / wx;
                    }
                }
            }
            q = next;
            let m = boundary.iter().map(|&x| q[x as usize] * g.vertex_weight(y) / g.vertex_weight(x)).fold(0.0, f64::max);
            *b = b.max(m);
        }
    }
    Ok(best.iter().enumerate().skip(1).map(|(n, p)| p / (n as f64).sqrt()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_kernel_chain_matches_window_powers() {
        for d in [2, 3] {
            let chain = regular_tree_kernel_max(d, 9);
            let win = regular_tree_kernel_window(d, 9).unwrap();
            for (a, b) in chain.iter().zip(&win) {
                assert!((a - b).abs() < 1e-14, "{a} vs {b}");
            }
        }
        assert!((regular_tree_kernel_max(2, 1)[0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn continuous_local_time_is_consistent() {
        // 𝖫 and L̂ have the same mean √(2T/π) to leading order
        let t = 10_000.0;
        let (mut a, mut b) = (Welford::default(), Welford::default());
        for k in 0..2000 {
            let (lc, lh) = continuous_local_time(t, 4, k);
            a.push(lc);
            b.push(lh as f64);
        }
        let want = (2.0 * t / std::f64::consts::PI).sqrt();
        assert!((a.mean() - want).abs() < 4.0 * a.se(), "{} vs {want}", a.mean());
        assert!((b.mean() - want).abs() < 4.0 * b.se(), "{} vs {want}", b.mean());
    }

    #[test]
    fn hitting_ratio_matches_green_function_heuristic() {
        // leading order: (h−d)/(h+d) towards the far side, 1 towards the near side
        let s = hitting_scale(8, 4, 40).unwrap();
        assert!((s.ratios[0] - 36.0 / 44.0).abs() < 0.1, "{:?}", s.ratios);
        assert!((s.ratios[1] - 1.0).abs() < 0.1, "{:?}", s.ratios);
        assert!(hitting_scale(8, 4, 4).is_err());
    }

    #[test]
    fn jump_rate_on_two_vertices() {
        let g = WeightedGraph::from_edges(2, &[(0, 1, 0.5)]).unwrap();
        let r = jump_rate_identity(&g, 50.0, 2000, 1).unwrap();
        assert_eq!(r.target, 0.5);
        assert!((r.mean - 0.5).abs() < 4.0 * r.se);
    }

    #[test]
    fn a10_sum_shrinks_on_boxes() {
        let s: Vec<f64> =
            [8, 12, 16].iter().map(|&n| a10_surrogate(&make_box(n, 2).unwrap(), (n / 2 * n + n / 2) as Vertex, (n / 4) as u32, 1, 0.5).unwrap()).collect();
        assert!(s[0] > s[1] && s[1] > s[2], "{s:?}");
    }
}
