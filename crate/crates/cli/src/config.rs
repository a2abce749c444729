//! Experiment configuration: TOML on disk, flags on top, validated before
//! anything runs.

use std::path::{Path, PathBuf};

use cylwalk::experiments::{AnalysisOptions, Family, Mode, SiteKind, SiteSpec};
use cylwalk::potential::WindowShape;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const OUTPUT_ENV: &str = "CYLWALK_OUTPUT_DIR";

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    /// `box`, `sierpinski` or `tree`.
    pub family: String,
    /// Box dimension or tree branching number.
    pub d: usize,
    pub sizes: Vec<u32>,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self { family: "box".into(), d: 2, sizes: Vec::new() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub alpha: f64,
    pub eps: f64,
    pub trials: u64,
    pub mode: Mode,
    pub seed: u64,
    pub audit: u64,
    pub shapes: Vec<WindowShape>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            eps: 0.5,
            trials: 20_000,
            mode: Mode::Discrete,
            seed: 1,
            audit: 20,
            shapes: vec![WindowShape::Single],
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum CapMethodConfig {
    Exact,
    MonteCarlo,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct CapacityConfig {
    /// Truncation radius; unset means the limit model's default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<u32>,
    pub method: CapMethodConfig,
    /// Walks per vertex for the Monte Carlo method.
    pub walks: u64,
}

impl Default for CapacityConfig {
    fn default() -> Self {
        Self { rho: None, method: CapMethodConfig::Exact, walks: 100_000 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ChecksConfig {
    /// Run the dedicated auxiliary checks after the ensemble.
    pub auxiliary: bool,
    pub excursion_sizes: Vec<f64>,
    pub excursion_trials: u64,
}

impl Default for ChecksConfig {
    fn default() -> Self {
        Self { auxiliary: true, excursion_sizes: vec![1e3, 10f64.powf(3.5), 1e4], excursion_trials: 200 }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphConfig,
    /// Empty means the family's default site at height 0.
    pub sites: Vec<SiteSpec>,
    pub run: RunConfig,
    pub capacity: CapacityConfig,
    pub analysis: AnalysisOptions,
    pub checks: ChecksConfig,
    /// Not part of the hash.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

/// Field-level problems, reported together.
#[derive(Debug)]
pub struct ConfigError(pub Vec<String>);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "config error: {e}")?;
        }
        Ok(())
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(vec![format!("{}: {e}", path.display())]))?;
        toml::from_str(&text).map_err(|e| ConfigError(vec![format!("{}: {e}", path.display())]))
    }

    pub fn family(&self) -> Result<Family, ConfigError> {
        match self.graph.family.as_str() {
            "box" => Ok(Family::Box { d: self.graph.d }),
            "sierpinski" => Ok(Family::Sierpinski),
            "tree" => Ok(Family::Tree { d: self.graph.d }),
            f => Err(ConfigError(vec![format!("graph.family: unknown family {f:?} (box, sierpinski, tree)")])),
        }
    }

    pub fn sizes(&self) -> Vec<u32> {
        if self.graph.sizes.is_empty() {
            self.family().map(|f| f.default_sizes()).unwrap_or_default()
        } else {
            self.graph.sizes.clone()
        }
    }

    pub fn sites(&self) -> Vec<SiteSpec> {
        if self.sites.is_empty() {
            self.family().map(|f| vec![SiteSpec { kind: f.default_site(), v: 0.0 }]).unwrap_or_default()
        } else {
            self.sites.clone()
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        std::env::var_os(OUTPUT_ENV)
            .map(PathBuf::from)
            .or_else(|| self.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("cylwalk-out"))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errs = Vec::new();
        let family = match self.family() {
            Ok(f) => Some(f),
            Err(e) => {
                errs.extend(e.0);
                None
            }
        };
        let sizes = self.sizes();
        match family {
            Some(Family::Box { d }) => {
                if d < 2 {
                    errs.push(format!("graph.d: box needs d >= 2, got {d}"));
                }
                if let Some(n) = sizes.iter().find(|&&n| n < 3) {
                    errs.push(format!("graph.sizes: box side must be >= 3, got {n}"));
                }
            }
            Some(Family::Tree { d }) => {
                if d < 2 {
                    errs.push(format!("graph.d: tree needs d >= 2, got {d}"));
                }
                if let Some(n) = sizes.iter().find(|&&n| n < 1) {
                    errs.push(format!("graph.sizes: tree depth must be >= 1, got {n}"));
                }
            }
            Some(Family::Sierpinski) => {
                if let Some(n) = sizes.iter().find(|&&n| n > 8) {
                    errs.push(format!("graph.sizes: Sierpinski level {n} is beyond desk scale (<= 8)"));
                }
            }
            None => {}
        }
        if sizes.is_empty() {
            errs.push("graph.sizes: at least one size".into());
        }
        let mut sorted = sizes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted != sizes {
            errs.push("graph.sizes: must be strictly increasing".into());
        }
        let sites = self.sites();
        if sites.len() > 3 {
            errs.push(format!("sites: at most three sites, got {}", sites.len()));
        }
        if let Some(f) = family {
            for (i, s) in sites.iter().enumerate() {
                let ok = matches!(
                    (s.kind, f),
                    (SiteKind::BoxCentre | SiteKind::BoxCorner, Family::Box { .. })
                        | (SiteKind::SierpinskiMidpoint | SiteKind::SierpinskiCorner, Family::Sierpinski)
                        | (SiteKind::TreeLeaf | SiteKind::TreeRoot, Family::Tree { .. })
                );
                if !ok {
                    errs.push(format!("sites[{i}].kind: {:?} is not a {} site", s.kind, f.name()));
                }
                if !s.v.is_finite() {
                    errs.push(format!("sites[{i}].v: must be finite"));
                }
            }
        }
        let r = &self.run;
        if !(r.alpha > 0.0 && r.alpha.is_finite()) {
            errs.push(format!("run.alpha: must be positive, got {}", r.alpha));
        }
        if !(r.eps > 0.0 && r.eps < 1.0) {
            errs.push(format!("run.eps: must lie in (0, 1), got {}", r.eps));
        }
        if r.trials == 0 {
            errs.push("run.trials: at least one trial".into());
        }
        if r.audit > r.trials {
            errs.push(format!("run.audit: cannot exceed run.trials ({} > {})", r.audit, r.trials));
        }
        if r.shapes.is_empty() {
            errs.push("run.shapes: at least one window shape".into());
        }
        let c = &self.capacity;
        if let Some(rho) = c.rho.filter(|r| !(8..=400).contains(r)) {
            errs.push(format!("capacity.rho: must lie in [8, 400], got {rho}"));
        }
        if c.method == CapMethodConfig::MonteCarlo && c.walks == 0 {
            errs.push("capacity.walks: at least one walk".into());
        }
        let a = &self.analysis;
        if a.reference_k < 100 {
            errs.push(format!("analysis.reference_k: must be >= 100, got {}", a.reference_k));
        }
        if a.law.bins < 8 {
            errs.push(format!("analysis.law.bins: must be >= 8, got {}", a.law.bins));
        }
        if self.checks.excursion_sizes.iter().any(|&g| g.is_nan() || g < 10.0) {
            errs.push("checks.excursion_sizes: every |G| must be >= 10".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError(errs))
        }
    }

    /// The configuration as hashed: everything but the output directory.
    pub fn hashed_value(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(m) = v.as_object_mut() {
            m.remove("output_dir");
        }
        v
    }

    /// SHA-256 of the canonical JSON (keys sorted, output directory dropped).
    pub fn hash(&self) -> String {
        hash_value(&self.hashed_value())
    }
}

/// Canonical JSON: serde_json's map is ordered, so nested keys come out sorted.
pub fn canonical_json(v: &serde_json::Value) -> String {
    let v: serde_json::Value = serde_json::from_str(&v.to_string()).expect("round trip");
    v.to_string()
}

pub fn hash_value(v: &serde_json::Value) -> String {
    hex::encode(Sha256::digest(canonical_json(v).as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn field_level_diagnostics() {
        let mut c = ExperimentConfig::default();
        c.graph.d = 1;
        c.run.eps = 1.5;
        c.sites = vec![SiteSpec { kind: SiteKind::TreeRoot, v: 0.0 }];
        let e = c.validate().unwrap_err();
        let text = e.to_string();
        assert!(text.contains("graph.d"), "{text}");
        assert!(text.contains("run.eps"), "{text}");
        assert!(text.contains("sites[0].kind"), "{text}");
    }

    #[test]
    fn hash_ignores_key_order_and_output_dir() {
        let a: ExperimentConfig = toml::from_str("[run]\nseed = 3\ntrials = 10\n[graph]\nfamily = \"tree\"\nd = 2\n").unwrap();
        let mut b: ExperimentConfig = toml::from_str("[graph]\nd = 2\nfamily = \"tree\"\n[run]\ntrials = 10\nseed = 3\n").unwrap();
        b.output_dir = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.run.seed = 4;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<ExperimentConfig>("[run]\nsed = 3\n").is_err());
        assert!(toml::from_str::<ExperimentConfig>("[analysis.thresholds]\nslope_rel_eror = 0.1\n").is_err());
        assert!(toml::from_str::<ExperimentConfig>("[analysis.thresholds]\nslope_rel_error = 0.1\n").is_ok());
    }
}
