//! Per-size summaries, pass/fail checks and the on-disk formats of the trial
//! records.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::law::{
    conditional_vacant_law_test, local_time_marginal_test, BrownianLocalTimeRef, ConditionalReport, LawOptions,
    MarginalReport,
};
use super::{Mode, SizeRun, TrialRecord};
use crate::error::Result;
use crate::potential::CapacityEstimate;
use crate::rng::derive_seed;
use crate::stats::Welford;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// Decreasing towards 0.
    ToZero,
    /// `|x − 1|` decreasing.
    ToOne,
    /// Below the threshold everywhere.
    Bounded,
    /// An identity: every value within the threshold.
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// The statement being checked.
    pub statement: String,
    pub direction: Direction,
    /// One label per size.
    pub labels: Vec<String>,
    pub statistic: Vec<f64>,
    pub se: Vec<f64>,
    pub threshold: Option<f64>,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Monotone trend across sizes, each step allowed `sigma` combined standard
/// errors of slack, plus the final-size threshold.
pub fn trend_verdict(values: &[f64], se: &[f64], dir: Direction, threshold: Option<f64>, sigma: f64) -> Verdict {
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Verdict::Fail;
    }
    let se_at = |i: usize| se.get(i).copied().unwrap_or(0.0);
    let dev: Vec<f64> = match dir {
        Direction::ToOne => values.iter().map(|v| (v - 1.0).abs()).collect(),
        _ => values.to_vec(),
    };
    let ok = match dir {
        Direction::ToZero | Direction::ToOne => {
            let mono = dev.windows(2).enumerate().all(|(i, w)| {
                w[1] <= w[0] + sigma * (se_at(i).powi(2) + se_at(i + 1).powi(2)).sqrt()
            });
            mono && threshold.is_none_or(|t| *dev.last().unwrap() <= t)
        }
        Direction::Bounded | Direction::Exact => threshold.is_none_or(|t| dev.iter().all(|v| v.abs() <= t)),
    };
    Verdict::from_bool(ok)
}

impl Check {
    #[allow(clippy::too_many_arguments)]
    pub fn trend(
        name: &str,
        statement: &str,
        direction: Direction,
        labels: Vec<String>,
        statistic: Vec<f64>,
        se: Vec<f64>,
        threshold: Option<f64>,
        sigma: f64,
    ) -> Self {
        let verdict = trend_verdict(&statistic, &se, direction, threshold, sigma);
        Self { name: name.into(), statement: statement.into(), direction, labels, statistic, se, threshold, verdict, note: None }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// Forces a failure on top of the trend verdict.
    pub fn and(mut self, ok: bool) -> Self {
        if !ok {
            self.verdict = Verdict::Fail;
        }
        self
    }
}

/// Tolerances of the statistical checks. None of them comes from the theory;
/// they are acceptance parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Slack, in combined standard errors, for a monotone trend.
    pub trend_sigma: f64,
    /// Relative error of the conditional slope at the largest size.
    pub slope_rel_error: f64,
    /// Relative error of the mean of `U` at the largest size.
    pub u_mean_rel_error: f64,
    /// Relative error of the reference sampler's mean.
    pub reference_mean_rel_error: f64,
    /// Standard errors allowed for the jump-rate identity.
    pub identity_se: f64,
    /// Bracketing frequency of the excursion count at the largest size.
    pub excursion_bracket_min: f64,
    /// `R²` of the log-linear heat-kernel fit.
    pub heat_kernel_r2: f64,
    /// Largest ratio between the two fitted constants of the hitting asymptotics.
    pub hitting_constant_ratio: f64,
    /// Bound on the scaled visit probability.
    pub visit_bound: f64,
    /// Bound on `(h/|G|)·E[entries]`.
    pub entries_bound: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            trend_sigma: 2.0,
            slope_rel_error: 0.15,
            u_mean_rel_error: 0.10,
            reference_mean_rel_error: 0.02,
            identity_se: 3.0,
            excursion_bracket_min: 0.9,
            heat_kernel_r2: 0.95,
            hitting_constant_ratio: 2.0,
            visit_bound: 1.0,
            entries_bound: 10.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShapeSummary {
    pub freq: f64,
    pub se: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SiteSummary {
    pub z: i64,
    pub u_mean: f64,
    pub u_se: f64,
    pub u_var: f64,
    pub vacancy: Vec<ShapeSummary>,
    /// Mean of `(|L − (1+w(G)/|G|)·L̂|/|G|) ∧ 1`.
    pub skeleton_gap: f64,
    pub skeleton_gap_se: f64,
    /// The same with the limit `β`.
    pub skeleton_gap_limit: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EtaSummary {
    /// Mean of `η^Y_T/T` against `w(G)/|G|`.
    pub base_rate: f64,
    pub base_rate_se: f64,
    pub base_rate_target: f64,
    /// Mean of `|η^X_T/T − (1+β)| ∧ 1`.
    pub total_rate_gap: f64,
    pub total_rate_gap_se: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SizeSummary {
    pub size: u32,
    pub g_size: usize,
    pub steps: u64,
    pub mode: Mode,
    pub beta_exact: f64,
    pub beta_limit: f64,
    pub records: usize,
    pub failures: u64,
    pub audit: super::AuditReport,
    pub sites: Vec<SiteSummary>,
    pub eta: Option<EtaSummary>,
}

pub fn summarize(run: &SizeRun) -> SizeSummary {
    let plan = &run.plan;
    let gs = plan.g_size as f64;
    let sites = plan
        .sites
        .iter()
        .enumerate()
        .map(|(m, site)| {
            let u: Welford = run.records.iter().map(|r| r.sites[m].u).collect();
            let vacancy = (0..plan.shapes.len())
                .map(|i| {
                    let w: Welford = run.records.iter().map(|r| r.sites[m].vacant[i] as u8 as f64).collect();
                    ShapeSummary { freq: w.mean(), se: w.se() }
                })
                .collect();
            let gap = |beta: f64| -> Welford {
                run.records
                    .iter()
                    .map(|r| {
                        let s = &r.sites[m];
                        ((s.l as f64 - (1.0 + beta) * s.l_hat as f64).abs() / gs).min(1.0)
                    })
                    .collect()
            };
            let exact = gap(plan.beta_exact);
            SiteSummary {
                z: site.z,
                u_mean: u.mean(),
                u_se: u.se(),
                u_var: u.var(),
                vacancy,
                skeleton_gap: exact.mean(),
                skeleton_gap_se: exact.se(),
                skeleton_gap_limit: gap(plan.beta_limit).mean(),
            }
        })
        .collect();
    let eta = (run.mode == Mode::Continuous).then(|| {
        let t = plan.horizon();
        let base: Welford = run.records.iter().filter_map(|r| r.eta).map(|e| e.y as f64 / t).collect();
        let total: Welford = run
            .records
            .iter()
            .filter_map(|r| r.eta)
            .map(|e| (e.x as f64 / t - (1.0 + plan.beta_limit)).abs().min(1.0))
            .collect();
        EtaSummary {
            base_rate: base.mean(),
            base_rate_se: base.se(),
            base_rate_target: plan.beta_exact,
            total_rate_gap: total.mean(),
            total_rate_gap_se: total.se(),
        }
    });
    SizeSummary {
        size: plan.size,
        g_size: plan.g_size,
        steps: plan.steps(),
        mode: run.mode,
        beta_exact: plan.beta_exact,
        beta_limit: plan.beta_limit,
        records: run.records.len(),
        failures: run.failures,
        audit: run.audit,
        sites,
        eta,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionalEntry {
    pub size: u32,
    pub site: usize,
    pub shape: usize,
    #[serde(rename = "beta_kind")]
    pub beta_kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<ConditionalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MarginalEntry {
    pub size: u32,
    pub beta_kind: String,
    pub report: MarginalReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisOptions {
    pub law: LawOptions,
    pub reference_k: u64,
    pub reference_draws: u64,
    pub thresholds: Thresholds,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self { law: LawOptions::default(), reference_k: 40_000, reference_draws: 20_000, thresholds: Thresholds::default() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TheoremAnalysis {
    pub summaries: Vec<SizeSummary>,
    pub conditional: Vec<ConditionalEntry>,
    pub marginal: Vec<MarginalEntry>,
    pub checks: Vec<Check>,
}

/// Summaries, conditional-law regressions (exact and limit `β`), local-time
/// marginals and the in-run checks. `caps[m][i]` is the capacity of shape
/// `i` at site `m`.
pub fn analyze_theorem_runs(
    runs: &[SizeRun],
    caps: &[Vec<CapacityEstimate>],
    opts: &AnalysisOptions,
    seed: u64,
) -> Result<TheoremAnalysis> {
    let th = &opts.thresholds;
    let summaries: Vec<SizeSummary> = runs.iter().map(summarize).collect();
    let labels: Vec<String> = runs.iter().map(|r| format!("N={}", r.plan.size)).collect();
    let reference = BrownianLocalTimeRef::new(opts.reference_k)?;
    let mut conditional = Vec::new();
    let mut marginal = Vec::new();
    let mut checks = Vec::new();
    let Some(first) = runs.first() else {
        return Ok(TheoremAnalysis { summaries, conditional, marginal, checks });
    };
    let continuous = first.mode == Mode::Continuous;
    for run in runs {
        let plan = &run.plan;
        let betas = if continuous {
            vec![("none", 0.0)]
        } else {
            vec![("exact", plan.beta_exact), ("limit", plan.beta_limit)]
        };
        for (m, site) in plan.sites.iter().enumerate() {
            for (i, cap) in caps.get(m).map(|c| c.as_slice()).unwrap_or(&[]).iter().enumerate() {
                for &(kind, beta) in &betas {
                    let r = conditional_vacant_law_test(&run.records, m, i, cap, beta, &opts.law);
                    conditional.push(ConditionalEntry {
                        size: plan.size,
                        site: m,
                        shape: i,
                        beta_kind: kind.into(),
                        error: r.as_ref().err().map(|e| e.to_string()),
                        report: r.ok(),
                    });
                }
            }
            if m == 0 {
                for &(kind, beta) in &betas {
                    let s = derive_seed(seed, &format!("reference-{}-{kind}", plan.size));
                    let report = local_time_marginal_test(&run.records, m, plan.alpha, beta, site.v, &reference, opts.reference_draws, s)?;
                    marginal.push(MarginalEntry { size: plan.size, beta_kind: kind.into(), report });
                }
            }
        }
    }
    let sigma = th.trend_sigma;
    checks.push(Check::trend(
        "dual-accounting",
        "vacancy by window scan = vacancy by passage time, on every audited path",
        Direction::Exact,
        labels.clone(),
        summaries.iter().map(|s| s.audit.mismatches as f64).collect(),
        vec![],
        Some(0.0),
        sigma,
    ));
    checks.push(Check::trend(
        "skeleton-local-time",
        "E[(|L^z − (1+β)·L̂^z|/|G|) ∧ 1] → 0",
        Direction::ToZero,
        labels.clone(),
        summaries.iter().map(|s| s.sites[0].skeleton_gap).collect(),
        summaries.iter().map(|s| s.sites[0].skeleton_gap_se).collect(),
        None,
        sigma,
    ));
    if continuous {
        let eta: Vec<&EtaSummary> = summaries.iter().filter_map(|s| s.eta.as_ref()).collect();
        let ok = eta.iter().all(|e| (e.base_rate - e.base_rate_target).abs() <= th.identity_se * e.base_rate_se);
        checks.push(
            Check::trend(
                "jump-rate-identity",
                "E[η^Y_t] = t·w(G)/|G|",
                Direction::Exact,
                labels.clone(),
                eta.iter().map(|e| (e.base_rate - e.base_rate_target) / e.base_rate_se).collect(),
                vec![],
                Some(th.identity_se),
                sigma,
            )
            .and(ok)
            .with_note("statistic in standard errors"),
        );
        checks.push(Check::trend(
            "jump-process-lln",
            "E[|η^X_{α|G|²}/(α|G|²) − (1+β)| ∧ 1] → 0",
            Direction::ToZero,
            labels.clone(),
            eta.iter().map(|e| e.total_rate_gap).collect(),
            eta.iter().map(|e| e.total_rate_gap_se).collect(),
            None,
            sigma,
        ));
    }
    // conditional slope on the first shape of the first site
    for kind in if continuous { vec!["none"] } else { vec!["exact", "limit"] } {
        let rows: Vec<&ConditionalEntry> =
            conditional.iter().filter(|c| c.site == 0 && c.shape == 0 && c.beta_kind == kind).collect();
        if rows.is_empty() {
            continue;
        }
        let errs: Vec<f64> = rows.iter().map(|c| c.report.as_ref().map_or(f64::NAN, |r| r.rel_error.abs())).collect();
        let ses: Vec<f64> =
            rows.iter().map(|c| c.report.as_ref().map_or(f64::NAN, |r| r.slope_se / r.target.max(1e-300))).collect();
        let mut chk = Check::trend(
            &format!("conditional-slope-{kind}"),
            "P[𝕍 vacant | U] = exp(−U·cap(𝕍)/(1+β))",
            Direction::ToZero,
            labels.clone(),
            errs,
            ses,
            Some(th.slope_rel_error),
            sigma,
        );
        if let Some(e) = rows.iter().find_map(|c| c.error.clone()) {
            chk = chk.and(false).with_note(e);
        }
        checks.push(chk);
    }
    for kind in if continuous { vec!["none"] } else { vec!["exact", "limit"] } {
        let rows: Vec<&MarginalEntry> = marginal.iter().filter(|m| m.beta_kind == kind).collect();
        let n = rows.first().map_or(1.0, |r| r.report.records.min(r.report.draws) as f64);
        // KS noise floor of two samples of this size
        let floor = (2.0 / n).sqrt();
        checks.push(Check::trend(
            &format!("local-time-marginal-{kind}"),
            "U_m → (1+β)·L(v_m, α/(1+β)) in law",
            Direction::ToZero,
            labels.clone(),
            rows.iter().map(|r| r.report.ks).collect(),
            rows.iter().map(|_| floor / 2.0).collect(),
            None,
            sigma,
        ));
    }
    if let Some(last) = marginal.iter().rev().find(|m| m.beta_kind == "exact" || m.beta_kind == "none") {
        let r = &last.report;
        let rel = (r.empirical_mean - r.reference_mean) / r.reference_mean;
        checks.push(Check::trend(
            "local-time-mean",
            "E[U_m] → (1+β)·E[L(v_m, α/(1+β))]",
            Direction::Bounded,
            vec![format!("N={}", last.size)],
            vec![rel],
            vec![],
            Some(th.u_mean_rel_error),
            sigma,
        ));
    }
    Ok(TheoremAnalysis { summaries, conditional, marginal, checks })
}

pub fn write_records_jsonl<W: Write>(mut w: W, records: &[TrialRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_records_jsonl(text: &str) -> Result<Vec<TrialRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| crate::error::Error::Parse { line: i + 1, msg: e.to_string() })
        })
        .collect()
}

/// `trial,U,vacant` for one site and shape.
pub fn write_pairs_csv<W: Write>(mut w: W, records: &[TrialRecord], site: usize, shape: usize) -> Result<()> {
    writeln!(w, "trial,U,vacant")?;
    for r in records {
        let s = &r.sites[site];
        writeln!(w, "{},{},{}", r.trial, s.u, s.vacant[shape] as u8)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::SiteRecord;

    #[test]
    fn trends() {
        let v = |x: &[f64]| x.to_vec();
        assert_eq!(trend_verdict(&v(&[0.3, 0.2, 0.1]), &[], Direction::ToZero, Some(0.15), 2.0), Verdict::Pass);
        assert_eq!(trend_verdict(&v(&[0.3, 0.2, 0.1]), &[], Direction::ToZero, Some(0.05), 2.0), Verdict::Fail);
        assert_eq!(trend_verdict(&v(&[0.1, 0.2]), &[], Direction::ToZero, None, 2.0), Verdict::Fail);
        // within noise
        assert_eq!(trend_verdict(&v(&[0.1, 0.11]), &[0.01, 0.01], Direction::ToZero, None, 2.0), Verdict::Pass);
        assert_eq!(trend_verdict(&v(&[1.3, 0.9, 1.05]), &[], Direction::ToOne, None, 2.0), Verdict::Pass);
        assert_eq!(trend_verdict(&v(&[0.0, 0.0]), &[], Direction::Exact, Some(0.0), 2.0), Verdict::Pass);
        assert_eq!(trend_verdict(&v(&[f64::NAN]), &[], Direction::Bounded, None, 2.0), Verdict::Fail);
    }

    #[test]
    fn jsonl_and_csv_round_trip() {
        let recs: Vec<TrialRecord> = (0..3)
            .map(|k| TrialRecord {
                size: 4,
                trial: k,
                seed: 9,
                sites: vec![SiteRecord { vacant: vec![k % 2 == 0], u: 0.25 * k as f64, l: k, l_hat: 0, l_cont: None }],
                eta: None,
            })
            .collect();
        let mut buf = Vec::new();
        write_records_jsonl(&mut buf, &recs).unwrap();
        assert_eq!(read_records_jsonl(std::str::from_utf8(&buf).unwrap()).unwrap(), recs);
        let mut csv = Vec::new();
        write_pairs_csv(&mut csv, &recs, 0, 0).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), "trial,U,vacant\n0,0,1\n1,0.25,0\n2,0.5,1\n");
    }
}
