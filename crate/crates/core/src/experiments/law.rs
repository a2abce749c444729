//! The conditional vacancy law given the local time, and the local-time
//! marginal against a simulated Brownian local time.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TrialRecord;
use crate::error::{Error, Result};
use crate::grid::FastZWalk;
use crate::potential::CapacityEstimate;
use crate::rng::stream;
use crate::stats::{chi2_sf, ks_two_sample, wls_through_origin, Welford};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LawBin {
    pub n: usize,
    pub u_lo: f64,
    pub u_hi: f64,
    pub u_mean: f64,
    pub freq: f64,
    pub predicted: f64,
    pub z: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionalReport {
    pub site: usize,
    pub shape: usize,
    pub records: usize,
    pub beta: f64,
    pub cap: f64,
    /// `cap/(1+β)`.
    pub target: f64,
    pub slope: f64,
    pub slope_se: f64,
    pub rel_error: f64,
    pub bins: Vec<LawBin>,
    pub max_abs_z: f64,
    pub chi2: f64,
    pub chi2_p: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LawOptions {
    pub bins: usize,
    pub min_records: usize,
    pub min_per_bin: usize,
    /// Largest accepted relative width of the capacity bracket.
    pub max_cap_width: f64,
}

impl Default for LawOptions {
    fn default() -> Self {
        Self { bins: 10, min_records: 10_000, min_per_bin: 100, max_cap_width: 0.05 }
    }
}

/// Bins by `U`, compares vacancy frequencies with `exp(−Ū·cap/(1+β))` and fits
/// the slope of `−log(freq)` against `Ū` (weights `n·p/(1−p)`, through 0).
pub fn conditional_vacant_law_test(
    records: &[TrialRecord],
    site: usize,
    shape: usize,
    cap: &CapacityEstimate,
    beta: f64,
    opts: &LawOptions,
) -> Result<ConditionalReport> {
    if opts.bins < 8 {
        return Err(Error::Param("at least 8 bins".into()));
    }
    if records.len() < opts.min_records {
        return Err(Error::InsufficientRecords(format!("{} records, need {}", records.len(), opts.min_records)));
    }
    if cap.value > 0.0 && cap.rel_width() >= opts.max_cap_width {
        return Err(Error::IncreaseTruncation(cap.rel_width()));
    }
    let mut pts: Vec<(f64, bool)> = records
        .iter()
        .map(|r| {
            let s = r.sites.get(site).ok_or_else(|| Error::Param(format!("no site {site}")))?;
            let v = *s.vacant.get(shape).ok_or_else(|| Error::Param(format!("no shape {shape}")))?;
            Ok((s.u, v))
        })
        .collect::<Result<_>>()?;
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let target = cap.value / (1.0 + beta);
    let n = pts.len();
    let mut bins = Vec::with_capacity(opts.bins);
    for b in 0..opts.bins {
        let chunk = &pts[b * n / opts.bins..(b + 1) * n / opts.bins];
        if chunk.len() < opts.min_per_bin {
            return Err(Error::InsufficientRecords(format!("bin {b} holds {}", chunk.len())));
        }
        let m = chunk.len() as f64;
        let u_mean = chunk.iter().map(|p| p.0).sum::<f64>() / m;
        let freq = chunk.iter().filter(|p| p.1).count() as f64 / m;
        let predicted = (-u_mean * target).exp();
        let sd = (predicted * (1.0 - predicted) / m).sqrt();
        let z = if sd > 0.0 { (freq - predicted) / sd } else { 0.0 };
        bins.push(LawBin { n: chunk.len(), u_lo: chunk[0].0, u_hi: chunk[chunk.len() - 1].0, u_mean, freq, predicted, z });
    }
    let usable: Vec<&LawBin> = bins.iter().filter(|b| b.freq > 0.0).collect();
    let x: Vec<f64> = usable.iter().map(|b| b.u_mean).collect();
    let y: Vec<f64> = usable.iter().map(|b| -b.freq.ln()).collect();
    let w: Vec<f64> = usable.iter().map(|b| b.n as f64 * b.freq / (1.0 - b.freq).max(1.0 / b.n as f64)).collect();
    let (slope, slope_se) = if x.iter().any(|&x| x > 0.0) { wls_through_origin(&x, &y, &w) } else { (0.0, f64::INFINITY) };
    let chi2: f64 = bins.iter().map(|b| b.z * b.z).sum();
    let rel_error = if target > 0.0 { (slope - target) / target } else { slope };
    Ok(ConditionalReport {
        site,
        shape,
        records: n,
        beta,
        cap: cap.value,
        target,
        slope,
        slope_se,
        rel_error,
        max_abs_z: bins.iter().map(|b| b.z.abs()).fold(0.0, f64::max),
        chi2,
        chi2_p: chi2_sf(chi2, bins.len() as f64),
        bins,
    })
}

/// Brownian local time `L(v, s)` from a simple random walk of `K` steps per
/// unit time: `L ≈ #{l < Ks : S_l = round(v√K)}/√K`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BrownianLocalTimeRef {
    pub k: u64,
}

/// Spread a positive count uniformly over its lattice cell so that KS
/// compares against a continuous law; zero is a genuine atom and stays put.
fn dither(c: u64, rng: &mut impl Rng) -> f64 {
    if c == 0 {
        0.0
    } else {
        c as f64 + rng.random::<f64>() - 0.5
    }
}

fn visits(site: i64, steps: u64, w: &mut FastZWalk) -> u64 {
    let mut c = 0;
    while w.n < steps {
        let dist = (w.z - site).unsigned_abs();
        if dist == 0 {
            c += 1;
            w.step();
        } else {
            w.advance(dist.min(steps - w.n));
        }
    }
    c
}

impl BrownianLocalTimeRef {
    pub fn new(k: u64) -> Result<Self> {
        if k < 100 {
            return Err(Error::Param("reference walk needs at least 100 steps per unit time".into()));
        }
        Ok(Self { k })
    }

    /// Walk of `K·s` steps read at `v`.
    pub fn sample(&self, v: f64, s: f64, seed: u64, draws: u64) -> Vec<f64> {
        let rk = (self.k as f64).sqrt();
        let steps = (self.k as f64 * s).round() as u64;
        let site = (v * rk).round() as i64;
        (0..draws)
            .map(|i| {
                let mut w = FastZWalk::new(0, stream(seed, "brownian-a", i));
                let c = visits(site, steps, &mut w);
                dither(c, &mut stream(seed, "brownian-a-dither", i)) / rk
            })
            .collect()
    }

    /// Through the scaling law: `√s · L(v/√s, 1)`.
    pub fn sample_scaled(&self, v: f64, s: f64, seed: u64, draws: u64) -> Vec<f64> {
        let rk = (self.k as f64).sqrt();
        let site = (v * rk / s.sqrt()).round() as i64;
        (0..draws)
            .map(|i| {
                let mut w = FastZWalk::new(0, stream(seed, "brownian-b", i));
                let c = visits(site, self.k, &mut w);
                s.sqrt() * dither(c, &mut stream(seed, "brownian-b-dither", i)) / rk
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReferenceCheck {
    pub s: f64,
    pub k: u64,
    pub mean: f64,
    pub se: f64,
    /// `√(2s/π)`.
    pub closed_form: f64,
    pub rel_error: f64,
    /// KS between the direct and the rescaled sampler.
    pub scaling_ks: f64,
    pub scaling_p: f64,
}

/// Mean at `v = 0` against `√(2s/π)` and the scaling law between the two samplers.
pub fn reference_check(r: &BrownianLocalTimeRef, s: f64, seed: u64, draws: u64) -> ReferenceCheck {
    let a = r.sample(0.0, s, seed, draws);
    let b = r.sample_scaled(0.0, s, seed, draws);
    let w: Welford = a.iter().copied().collect();
    let closed_form = (2.0 * s / std::f64::consts::PI).sqrt();
    let (d, p) = ks_two_sample(&a, &b);
    ReferenceCheck {
        s,
        k: r.k,
        mean: w.mean(),
        se: w.se(),
        closed_form,
        rel_error: (w.mean() - closed_form) / closed_form,
        scaling_ks: d,
        scaling_p: p,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MarginalReport {
    pub site: usize,
    pub v: f64,
    pub beta: f64,
    pub scale: f64,
    pub s: f64,
    pub records: usize,
    pub draws: usize,
    pub ks: f64,
    pub p_value: f64,
    pub empirical_mean: f64,
    pub reference_mean: f64,
}

/// KS distance between `U_m` and `(1+β)·L(v_m, α/(1+β))`. In continuous time
/// pass `beta = 0`.
#[allow(clippy::too_many_arguments)]
pub fn local_time_marginal_test(
    records: &[TrialRecord],
    site: usize,
    alpha: f64,
    beta: f64,
    v: f64,
    reference: &BrownianLocalTimeRef,
    draws: u64,
    seed: u64,
) -> Result<MarginalReport> {
    // discrete-time U = L/|G| lives on a lattice; continuous-time U does not
    let mut rng = stream(seed, "marginal-dither", 0);
    let u: Vec<f64> = records
        .iter()
        .map(|r| {
            let s = r.sites.get(site).ok_or_else(|| Error::Param(format!("no site {site}")))?;
            Ok(match s.l_cont {
                Some(_) => s.u,
                None if s.l == 0 => 0.0,
                None => s.u * dither(s.l, &mut rng) / s.l as f64,
            })
        })
        .collect::<Result<_>>()?;
    if u.is_empty() || draws == 0 {
        return Err(Error::InsufficientRecords("empty sample".into()));
    }
    let scale = 1.0 + beta;
    let s = alpha / scale;
    let refs: Vec<f64> = reference.sample(v, s, seed, draws).into_iter().map(|x| scale * x).collect();
    let (ks, p_value) = ks_two_sample(&u, &refs);
    Ok(MarginalReport {
        site,
        v,
        beta,
        scale,
        s,
        records: u.len(),
        draws: refs.len(),
        ks,
        p_value,
        empirical_mean: u.iter().sum::<f64>() / u.len() as f64,
        reference_mean: refs.iter().sum::<f64>() / refs.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::SiteRecord;
    use crate::potential::CapMethod;
    use rand::Rng;

    fn synthetic(n: usize, c: f64, seed: u64) -> Vec<TrialRecord> {
        let mut rng = stream(seed, "synthetic", 0);
        (0..n)
            .map(|k| {
                let u: f64 = rng.random::<f64>() * 3.0;
                let vac = rng.random::<f64>() < (-c * u).exp();
                TrialRecord {
                    size: 0,
                    trial: k as u64,
                    seed,
                    sites: vec![SiteRecord { vacant: vec![vac, true], u, l: 0, l_hat: 0, l_cont: None }],
                    eta: None,
                }
            })
            .collect()
    }

    fn cap(v: f64) -> CapacityEstimate {
        CapacityEstimate { value: v, lower: v, upper: v, rho: 0, method: CapMethod::Exact, se: None, gamma: 1.0 }
    }

    #[test]
    fn recovers_planted_slope() {
        let recs = synthetic(20_000, 0.6, 1);
        let r = conditional_vacant_law_test(&recs, 0, 0, &cap(1.8), 2.0, &LawOptions::default()).unwrap();
        assert!((r.slope - 0.6).abs() < 4.0 * r.slope_se + 0.02, "{} ± {}", r.slope, r.slope_se);
        assert!(r.max_abs_z < 4.5);
        // the first bin sits near U = 0 and predicts almost sure vacancy
        assert!(r.bins[0].predicted > 0.9);
    }

    #[test]
    fn empty_window_is_always_vacant() {
        let recs = synthetic(20_000, 0.6, 2);
        let r = conditional_vacant_law_test(&recs, 0, 1, &CapacityEstimate::zero(0, CapMethod::Exact), 2.0, &LawOptions::default()).unwrap();
        assert!(r.bins.iter().all(|b| b.freq == 1.0 && b.predicted == 1.0));
        assert_eq!(r.slope, 0.0);
    }

    #[test]
    fn preconditions() {
        let recs = synthetic(500, 0.6, 3);
        let opts = LawOptions::default();
        assert!(matches!(conditional_vacant_law_test(&recs, 0, 0, &cap(1.0), 2.0, &opts), Err(Error::InsufficientRecords(_))));
        let wide = CapacityEstimate { lower: 0.9, upper: 1.1, ..cap(1.0) };
        let recs = synthetic(20_000, 0.6, 3);
        assert!(matches!(conditional_vacant_law_test(&recs, 0, 0, &wide, 2.0, &opts), Err(Error::IncreaseTruncation(_))));
        let few = LawOptions { min_per_bin: 5000, ..opts };
        assert!(conditional_vacant_law_test(&recs, 0, 0, &cap(1.0), 2.0, &few).is_err());
    }

    #[test]
    fn reference_mean_and_scaling() {
        for k in [2_500, 10_000] {
            let r = BrownianLocalTimeRef::new(k).unwrap();
            let c = reference_check(&r, 0.5, 9, 20_000);
            assert!(c.rel_error.abs() < 0.02, "K = {k}: {c:?}");
            assert!(c.scaling_p > 1e-3, "{c:?}");
        }
    }

    #[test]
    fn far_site_concentrates_at_zero() {
        let r = BrownianLocalTimeRef::new(400).unwrap();
        assert!(r.sample(20.0, 0.3, 1, 200).iter().all(|&x| x == 0.0));
    }
}
