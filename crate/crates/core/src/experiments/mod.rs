//! The verification suite: site plans, the trial ensemble on `G_N × Z`, the
//! conditional vacant-law regression, the local-time marginal and the
//! auxiliary limit checks.
//!
//! A trial starts at `(y, 0)` with `y` uniform and runs `t = ⌊α|G|²⌋` steps
//! (discrete) or up to time `α|G|²` (continuous). For each site it records
//! whether every target set stayed unvisited and the scaled local time
//! `U = L^{z_m}/|G|` of the height projection.

mod checks;
mod law;
mod report;

pub use checks::*;
pub use law::*;
pub use report::*;

use std::collections::{HashMap, HashSet};

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{verify_isomorphism, IsomorphismMap, Vertex, WeightedGraph};
use crate::potential::{capacity, CapacityEstimate, CylWindow, Provenance, VacantWindow, WindowShape};
use crate::rng::{derive_seed, stream};
use crate::walk::{passage_times, Trajectory};
use crate::zoo::{
    box_fold_map, make_box, make_sierpinski, make_tree, sierpinski_midpoint_map, tree_boundary_embed,
    tree_regular_embed, BoundaryTree, BoxLimit, CylVertex, CylinderView, LimitModel, LocalWindow,
    RegularTree, SierpinskiFull, SierpinskiGraph, SierpinskiHalf, TreeGraph,
};

/// Radius `𝗋` of the mapped ball around each site.
pub const SITE_RADIUS: u32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family")]
pub enum Family {
    Box { d: usize },
    Sierpinski,
    Tree { d: usize },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Box { .. } => "box",
            Family::Sierpinski => "sierpinski",
            Family::Tree { .. } => "tree",
        }
    }

    pub fn default_sizes(&self) -> Vec<u32> {
        match self {
            Family::Box { .. } => vec![10, 14, 20],
            Family::Sierpinski => vec![3, 4, 5],
            Family::Tree { .. } => vec![6, 8, 10],
        }
    }

    pub fn default_site(&self) -> SiteKind {
        match self {
            Family::Box { .. } => SiteKind::BoxCentre,
            Family::Sierpinski => SiteKind::SierpinskiMidpoint,
            Family::Tree { .. } => SiteKind::TreeLeaf,
        }
    }

    /// `lim w(G_N)/|G_N|`.
    pub fn beta_limit(&self) -> f64 {
        match self {
            Family::Box { d } => *d as f64,
            Family::Sierpinski => 2.0,
            Family::Tree { .. } => 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BaseGraph {
    pub family: Family,
    pub size: u32,
    pub graph: WeightedGraph,
    sierpinski: Option<SierpinskiGraph>,
    tree: Option<TreeGraph>,
}

impl BaseGraph {
    pub fn build(family: Family, size: u32) -> Result<Self> {
        let (graph, sierpinski, tree) = match family {
            Family::Box { d } => (make_box(size as usize, d)?, None, None),
            Family::Sierpinski => {
                let s = make_sierpinski(size)?;
                (s.graph.clone(), Some(s), None)
            }
            Family::Tree { d } => {
                let t = make_tree(d, size)?;
                (t.graph.clone(), None, Some(t))
            }
        };
        Ok(Self { family, size, graph, sierpinski, tree })
    }

    pub fn beta_exact(&self) -> f64 {
        self.graph.total_weight() / self.graph.n() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SiteKind {
    BoxCentre,
    BoxCorner,
    SierpinskiMidpoint,
    SierpinskiCorner,
    TreeLeaf,
    TreeRoot,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteSpec {
    pub kind: SiteKind,
    /// Height as a fraction of `|G|`: `z_m = round(v·|G|)`.
    #[serde(default)]
    pub v: f64,
}

/// The infinite graph `𝔾_m` a site's neighbourhood looks like.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "model")]
pub enum LimitKind {
    Box { a: usize, b: usize },
    SierpinskiHalf,
    SierpinskiFull,
    BoundaryTree { d: usize },
    RegularTree { d: usize },
}

impl LimitKind {
    pub fn window(&self, rho: u32) -> Result<CylWindow> {
        match *self {
            LimitKind::Box { a, b } => CylWindow::new(&BoxLimit { a, b }, rho),
            LimitKind::SierpinskiHalf => CylWindow::new(&SierpinskiHalf, rho),
            LimitKind::SierpinskiFull => CylWindow::new(&SierpinskiFull, rho),
            LimitKind::BoundaryTree { d } => CylWindow::new(&BoundaryTree { d }, rho),
            LimitKind::RegularTree { d } => CylWindow::new(&RegularTree { d }, rho),
        }
    }

    /// Truncation at which the single-vertex bracket is narrow enough at
    /// desk cost: balls in trees grow exponentially, Sierpinski ones slowly.
    pub fn default_rho(&self) -> u32 {
        match self {
            LimitKind::Box { .. } => 40,
            LimitKind::SierpinskiHalf | LimitKind::SierpinskiFull => 32,
            LimitKind::BoundaryTree { .. } => 20,
            LimitKind::RegularTree { .. } => 10,
        }
    }

    /// Known decay exponent of the truncated capacity: `dim − 2` for the
    /// lattice cylinders; fitted otherwise.
    pub fn gamma(&self) -> Option<f64> {
        match *self {
            LimitKind::Box { a, b } => Some((a + b) as f64 - 1.0),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Site {
    pub kind: SiteKind,
    pub y: Vertex,
    pub z: i64,
    pub v: f64,
    pub limit: LimitKind,
    pub radius: u32,
    /// Per window shape, `Φ^{-1}(𝕍)` in `G × Z`.
    pub targets: Vec<Vec<CylVertex>>,
    pub target_keys: Vec<Vec<(Vec<i64>, i64)>>,
    /// Model key of every vertex of the mapped ball.
    #[serde(skip)]
    preimage: HashMap<Vec<i64>, Vertex>,
}

impl Site {
    /// All `(key, z')` of the window `Φ(B(y_m, 𝗋)) × [−𝗋, 𝗋]`, sorted.
    pub fn window_keys(&self) -> Vec<(Vec<i64>, i64)> {
        let mut keys: Vec<&Vec<i64>> = self.preimage.keys().collect();
        keys.sort();
        let r = self.radius as i64;
        keys.into_iter().flat_map(|k| (-r..=r).map(move |z| (k.clone(), z))).collect()
    }

    pub fn preimage(&self, key: &[i64], z: i64) -> Option<CylVertex> {
        self.preimage.get(key).map(|&y| CylVertex::new(y, self.z + z))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SitePlan {
    pub family: Family,
    pub size: u32,
    pub g_size: usize,
    pub alpha: f64,
    pub eps: f64,
    pub beta_exact: f64,
    pub beta_limit: f64,
    pub shapes: Vec<WindowShape>,
    pub sites: Vec<Site>,
}

impl SitePlan {
    pub fn steps(&self) -> u64 {
        (self.alpha * (self.g_size as f64).powi(2)).floor() as u64
    }

    pub fn horizon(&self) -> f64 {
        self.alpha * (self.g_size as f64).powi(2)
    }
}

fn key_map(window: &WeightedGraph, map: &IsomorphismMap) -> HashMap<Vec<i64>, Vertex> {
    map.pairs.iter().map(|&(y, w)| (window.label(w).unwrap().to_vec(), y)).collect()
}

fn checked(src: &WeightedGraph, dst: &WeightedGraph, map: &IsomorphismMap) -> Result<()> {
    if verify_isomorphism(src, dst, map)?.ok {
        Ok(())
    } else {
        Err(Error::WindowOutsideDomain)
    }
}

fn locate(base: &BaseGraph, kind: SiteKind, r: u32) -> Result<(Vertex, LimitKind, HashMap<Vec<i64>, Vertex>)> {
    let g = &base.graph;
    let wrong = || Error::Param(format!("site {kind:?} does not belong to the {} family", base.family.name()));
    match (kind, base.family) {
        (SiteKind::BoxCentre | SiteKind::BoxCorner, Family::Box { d }) => {
            let n = base.size as usize;
            let c = if kind == SiteKind::BoxCentre { (n / 2) as i64 } else { 0 };
            let y = (0..g.n() as Vertex).find(|&y| g.label(y).unwrap().iter().all(|&k| k == c)).ok_or_else(wrong)?;
            let constrained = vec![kind == SiteKind::BoxCorner; d];
            let (win, map) = box_fold_map(g, n, y, r, &constrained)?;
            checked(g, &win.graph, &map)?;
            let a = if kind == SiteKind::BoxCorner { d } else { 0 };
            Ok((y, LimitKind::Box { a, b: d - a }, key_map(&win.graph, &map)))
        }
        (SiteKind::SierpinskiMidpoint, Family::Sierpinski) => {
            let s = base.sierpinski.as_ref().unwrap();
            let (win, map) = sierpinski_midpoint_map(s, r)?;
            checked(g, &win.graph, &map)?;
            Ok((s.id(s.midpoint()).unwrap(), LimitKind::SierpinskiFull, key_map(&win.graph, &map)))
        }
        (SiteKind::SierpinskiCorner, Family::Sierpinski) => {
            let s = base.sierpinski.as_ref().unwrap();
            let y = s.id((0, 0)).unwrap();
            let win = LocalWindow::build(&SierpinskiHalf, &SierpinskiHalf.origin(), r)?;
            let ball = g.metric(y, r)?.ball;
            let pairs = ball
                .ids()
                .iter()
                .map(|&x| {
                    let (i, j) = s.coord(x);
                    win.id(&[i, j]).map(|w| (x, w)).ok_or(Error::WindowOutsideDomain)
                })
                .collect::<Result<Vec<_>>>()?;
            let map = IsomorphismMap { pairs, z_offset: None };
            checked(g, &win.graph, &map)?;
            Ok((y, LimitKind::SierpinskiHalf, key_map(&win.graph, &map)))
        }
        (SiteKind::TreeLeaf, Family::Tree { d }) => {
            let t = base.tree.as_ref().unwrap();
            let y = (0..g.n() as Vertex).find(|&y| t.height(y) == 0).ok_or_else(wrong)?;
            let (win, map) = tree_boundary_embed(t, y, r)?;
            checked(g, &win.graph, &map)?;
            Ok((y, LimitKind::BoundaryTree { d }, key_map(&win.graph, &map)))
        }
        (SiteKind::TreeRoot, Family::Tree { d }) => {
            let t = base.tree.as_ref().unwrap();
            let (win, map) = tree_regular_embed(t, TreeGraph::ROOT, r)?;
            checked(g, &win.graph, &map)?;
            Ok((TreeGraph::ROOT, LimitKind::RegularTree { d }, key_map(&win.graph, &map)))
        }
        _ => Err(wrong()),
    }
}

/// Sites, their isomorphisms and targets at one size.
pub fn site_plan(base: &BaseGraph, specs: &[SiteSpec], shapes: &[WindowShape], alpha: f64, eps: f64) -> Result<SitePlan> {
    if specs.is_empty() || specs.len() > 3 {
        return Err(Error::Param("between one and three sites".into()));
    }
    if shapes.is_empty() {
        return Err(Error::Param("at least one window shape".into()));
    }
    if !(alpha >= 0.0) {
        return Err(Error::Param("alpha must be nonnegative".into()));
    }
    let g_size = base.graph.n();
    let mut sites = Vec::with_capacity(specs.len());
    for spec in specs {
        let (y, limit, preimage) = locate(base, spec.kind, SITE_RADIUS)?;
        let z = (spec.v * g_size as f64).round() as i64;
        let shape_win = limit.window(SITE_RADIUS)?;
        let mut targets = Vec::new();
        let mut target_keys = Vec::new();
        for &s in shapes {
            let keys = shape_win.keys(&shape_win.shape(s));
            let t = keys
                .iter()
                .map(|(k, dz)| preimage.get(k).map(|&y| CylVertex::new(y, z + dz)).ok_or(Error::WindowOutsideDomain))
                .collect::<Result<Vec<_>>>()?;
            targets.push(t);
            target_keys.push(keys);
        }
        sites.push(Site { kind: spec.kind, y, z, v: spec.v, limit, radius: SITE_RADIUS, targets, target_keys, preimage });
    }
    // mapped cylinder balls must stay apart
    for i in 0..sites.len() {
        for j in i + 1..sites.len() {
            let dy = base.graph.distance(sites[i].y, sites[j].y)?.unwrap_or(u32::MAX) as i64;
            if dy.saturating_add((sites[i].z - sites[j].z).abs()) <= 2 * SITE_RADIUS as i64 + 1 {
                return Err(Error::Param(format!("sites {i} and {j} are not separated")));
            }
        }
    }
    Ok(SitePlan {
        family: base.family,
        size: base.size,
        g_size,
        alpha,
        eps,
        beta_exact: base.beta_exact(),
        beta_limit: base.family.beta_limit(),
        shapes: shapes.to_vec(),
        sites,
    })
}

/// `cap(𝕍)` of every target shape in the limit model, truncated at `rho`
/// (or the model's default); `caps[m][i]` belongs to shape `i` at site `m`.
pub fn site_capacities(plan: &SitePlan, rho: Option<u32>) -> Result<Vec<Vec<CapacityEstimate>>> {
    plan.sites
        .iter()
        .map(|site| {
            let win = site.limit.window(rho.unwrap_or_else(|| site.limit.default_rho()))?;
            site.target_keys
                .iter()
                .map(|keys| {
                    let v = keys.iter().map(|(k, z)| win.at(k, *z).ok_or(Error::WindowOutsideDomain)).collect::<Result<Vec<_>>>()?;
                    capacity(&win, &v, site.limit.gamma()).map(|c| c.0)
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Discrete,
    Continuous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteRecord {
    /// Per shape: `Φ^{-1}(𝕍)` unvisited.
    pub vacant: Vec<bool>,
    /// `L/|G|` (discrete) or `𝖫/|G|` (continuous).
    pub u: f64,
    /// Steps `l < n` at height `z_m`.
    pub l: u64,
    /// Vertical moves out of height `z_m` among those steps.
    pub l_hat: u64,
    pub l_cont: Option<f64>,
}

/// Jump counts at the horizon: total, base, vertical.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EtaCounts {
    pub x: u64,
    pub y: u64,
    pub z: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub size: u32,
    pub trial: u64,
    pub seed: u64,
    pub sites: Vec<SiteRecord>,
    pub eta: Option<EtaCounts>,
}

struct SiteState<'p> {
    site: &'p Site,
    pos: HashMap<CylVertex, usize>,
    hit: Vec<bool>,
    l: u64,
    l_hat: u64,
    l_cont: f64,
}

impl<'p> SiteState<'p> {
    fn new(site: &'p Site) -> Self {
        let mut pos = HashMap::new();
        for t in &site.targets {
            for &x in t {
                let k = pos.len();
                pos.entry(x).or_insert(k);
            }
        }
        let n = pos.len();
        Self { site, pos, hit: vec![false; n], l: 0, l_hat: 0, l_cont: 0.0 }
    }

    #[inline]
    fn visit(&mut self, x: CylVertex) {
        if (x.z - self.site.z).abs() <= 1 {
            if let Some(&i) = self.pos.get(&x) {
                self.hit[i] = true;
            }
        }
    }

    fn record(&self, g_size: usize, continuous: bool) -> SiteRecord {
        let vacant = self.site.targets.iter().map(|t| t.iter().all(|x| !self.hit[self.pos[x]])).collect();
        let scaled = if continuous { self.l_cont } else { self.l as f64 };
        SiteRecord {
            vacant,
            u: scaled / g_size as f64,
            l: self.l,
            l_hat: self.l_hat,
            l_cont: continuous.then_some(self.l_cont),
        }
    }
}

/// Seed of the trial ensemble at one size.
pub fn trial_seed(master: u64, size: u32) -> u64 {
    derive_seed(master, &format!("trial-{size}"))
}

/// One trial; with `keep` the skeleton (and holding times) come back too.
pub fn run_trial(
    base: &WeightedGraph,
    plan: &SitePlan,
    mode: Mode,
    seed: u64,
    trial: u64,
    keep: bool,
) -> (TrialRecord, Option<Trajectory<CylVertex>>) {
    let cyl = CylinderView::new(base);
    let mut rng = stream(seed, "trial", trial);
    let mut hrng = stream(seed, "trial-holding", trial);
    let continuous = mode == Mode::Continuous;
    let mut states: Vec<SiteState> = plan.sites.iter().map(SiteState::new).collect();
    let mut x = CylVertex::new(rng.random_range(0..base.n() as Vertex), 0);
    let mut sk = keep.then(|| vec![x]);
    let mut hold = (keep && continuous).then(Vec::new);
    let mut eta = EtaCounts { x: 0, y: 0, z: 0 };
    let t_steps = plan.steps();
    let horizon = plan.horizon();
    let mut time = 0.0;
    let mut n = 0u64;
    for s in states.iter_mut() {
        s.visit(x);
    }
    loop {
        let dt = if continuous {
            let e: f64 = Exp1.sample(&mut hrng);
            let dt = e / cyl.vertex_weight(x);
            if time + dt > horizon {
                for s in states.iter_mut().filter(|s| s.site.z == x.z) {
                    s.l_cont += horizon - time;
                }
                break;
            }
            dt
        } else {
            if n == t_steps {
                break;
            }
            0.0
        };
        let nx = cyl.step(x, &mut rng);
        let vertical = nx.z != x.z;
        for s in states.iter_mut() {
            if s.site.z == x.z {
                s.l += 1;
                s.l_cont += dt;
                s.l_hat += vertical as u64;
            }
            s.visit(nx);
        }
        if vertical {
            eta.z += 1;
        } else {
            eta.y += 1;
        }
        time += dt;
        n += 1;
        x = nx;
        if let Some(sk) = sk.as_mut() {
            sk.push(x);
        }
        if let Some(h) = hold.as_mut() {
            h.push(dt);
        }
    }
    eta.x = n;
    let rec = TrialRecord {
        size: plan.size,
        trial,
        seed,
        sites: states.iter().map(|s| s.record(plan.g_size, continuous)).collect(),
        eta: continuous.then_some(eta),
    };
    let traj = sk.map(|skeleton| Trajectory {
        skeleton,
        exp_draws: None,
        holding_times: hold,
        horizon: continuous.then_some(horizon),
        seed,
    });
    (rec, traj)
}

/// `ω(𝕩) = 1` iff `Φ^{-1}(𝕩)` is unvisited by steps `0..=t`, over the whole
/// mapped window of site `m`.
pub fn vacant_configuration(traj: &Trajectory<CylVertex>, plan: &SitePlan, m: usize, t: usize) -> Result<VacantWindow> {
    let site = plan.sites.get(m).ok_or_else(|| Error::Param(format!("no site {m}")))?;
    if t > traj.steps() {
        return Err(Error::Param(format!("t = {t} beyond the {} recorded steps", traj.steps())));
    }
    let seen: HashSet<CylVertex> = traj.skeleton[..=t].iter().copied().collect();
    let keys = site.window_keys();
    let vacant = keys
        .iter()
        .map(|(k, z)| site.preimage(k, *z).map(|x| !seen.contains(&x)).ok_or(Error::WindowOutsideDomain))
        .collect::<Result<Vec<_>>>()?;
    Ok(VacantWindow { keys, vacant, provenance: Provenance::WalkExperiment })
}

/// Vacancy of every target three ways: streamed, window scan, passage time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub checked: u64,
    pub mismatches: u64,
}

fn audit(plan: &SitePlan, rec: &TrialRecord, traj: &Trajectory<CylVertex>) -> Result<u64> {
    let t = traj.steps();
    let prefix = Trajectory { skeleton: traj.skeleton[..=t].to_vec(), ..traj.clone() };
    let mut bad = 0;
    for (m, site) in plan.sites.iter().enumerate() {
        let win = vacant_configuration(traj, plan, m, t)?;
        let at: HashMap<&(Vec<i64>, i64), bool> = win.keys.iter().zip(&win.vacant).map(|(k, &v)| (k, v)).collect();
        for (i, keys) in site.target_keys.iter().enumerate() {
            let scan = keys.iter().all(|k| at[k]);
            let set: HashSet<CylVertex> = site.targets[i].iter().copied().collect();
            let passage = passage_times(&prefix, &set).entrance.is_none();
            let streamed = rec.sites[m].vacant[i];
            bad += (scan != streamed || passage != streamed) as u64;
        }
    }
    Ok(bad)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub trials: u64,
    pub mode: Mode,
    pub seed: u64,
    /// Trials re-checked against their full trajectory.
    pub audit: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SizeRun {
    pub plan: SitePlan,
    pub mode: Mode,
    pub records: Vec<TrialRecord>,
    pub failures: u64,
    pub audit: AuditReport,
}

/// `R` independent trials at one size, in trial order.
pub fn run_ensemble(base: &WeightedGraph, plan: &SitePlan, cfg: &EnsembleConfig) -> SizeRun {
    let seed = trial_seed(cfg.seed, plan.size);
    let out: Vec<std::result::Result<(TrialRecord, u64, bool), String>> = (0..cfg.trials)
        .into_par_iter()
        .map(|k| {
            let keep = k < cfg.audit;
            let (rec, traj) = run_trial(base, plan, cfg.mode, seed, k, keep);
            let bad = match traj {
                Some(t) => audit(plan, &rec, &t).map_err(|e| format!("trial {k}: {e}"))?,
                None => 0,
            };
            Ok((rec, bad, keep))
        })
        .collect();
    let mut records = Vec::with_capacity(out.len());
    let mut failures = 0;
    let mut audit_rep = AuditReport::default();
    for r in out {
        match r {
            Ok((rec, bad, kept)) => {
                audit_rep.checked += kept as u64;
                audit_rep.mismatches += bad;
                records.push(rec);
            }
            Err(_) => failures += 1,
        }
    }
    SizeRun { plan: plan.clone(), mode: cfg.mode, records, failures, audit: audit_rep }
}

/// The ensemble at every configured size.
pub fn run_theorem_experiment(
    family: Family,
    sizes: &[u32],
    specs: &[SiteSpec],
    shapes: &[WindowShape],
    alpha: f64,
    eps: f64,
    cfg: &EnsembleConfig,
) -> Result<Vec<SizeRun>> {
    if cfg.trials < 1 {
        return Err(Error::Param("at least one trial".into()));
    }
    sizes
        .iter()
        .map(|&n| {
            let base = BaseGraph::build(family, n)?;
            let plan = site_plan(&base, specs, shapes, alpha, eps)?;
            Ok(run_ensemble(&base.graph, &plan, cfg))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn box_plan(n: u32, alpha: f64) -> (BaseGraph, SitePlan) {
        let base = BaseGraph::build(Family::Box { d: 2 }, n).unwrap();
        let shapes = [WindowShape::Single, WindowShape::Pair, WindowShape::LTriple];
        let plan = site_plan(&base, &[SiteSpec { kind: SiteKind::BoxCentre, v: 0.0 }], &shapes, alpha, 0.5).unwrap();
        (base, plan)
    }

    #[test]
    fn plans_for_every_site_kind() {
        let cases = [
            (Family::Box { d: 2 }, 6, SiteKind::BoxCentre),
            (Family::Box { d: 3 }, 5, SiteKind::BoxCorner),
            (Family::Sierpinski, 3, SiteKind::SierpinskiMidpoint),
            (Family::Sierpinski, 3, SiteKind::SierpinskiCorner),
            (Family::Tree { d: 2 }, 4, SiteKind::TreeLeaf),
            (Family::Tree { d: 2 }, 4, SiteKind::TreeRoot),
        ];
        for (f, n, kind) in cases {
            let base = BaseGraph::build(f, n).unwrap();
            let plan = site_plan(&base, &[SiteSpec { kind, v: 0.0 }], &[WindowShape::LTriple], 1.0, 0.5).unwrap();
            let site = &plan.sites[0];
            let want = if kind == SiteKind::TreeLeaf { 2 } else { 3 };
            assert_eq!(site.targets[0].len(), want, "{kind:?}");
            assert_eq!(site.targets[0][0], CylVertex::new(site.y, 0));
            for w in site.targets[0].windows(2) {
                assert_ne!(w[0], w[1]);
            }
        }
        let base = BaseGraph::build(Family::Sierpinski, 3).unwrap();
        assert!(site_plan(&base, &[SiteSpec { kind: SiteKind::TreeLeaf, v: 0.0 }], &[WindowShape::Single], 1.0, 0.5).is_err());
    }

    #[test]
    fn sites_must_be_separated() {
        let base = BaseGraph::build(Family::Box { d: 2 }, 10).unwrap();
        let s = SiteSpec { kind: SiteKind::BoxCentre, v: 0.0 };
        assert!(site_plan(&base, &[s, s], &[WindowShape::Single], 1.0, 0.5).is_err());
        let far = SiteSpec { kind: SiteKind::BoxCentre, v: 0.1 };
        let plan = site_plan(&base, &[s, far], &[WindowShape::Single], 1.0, 0.5).unwrap();
        assert_eq!(plan.sites[1].z, 10);
    }

    #[test]
    fn zero_time_leaves_everything_but_the_start() {
        let (base, plan) = box_plan(6, 0.0);
        for trial in 0..50 {
            let (rec, traj) = run_trial(&base.graph, &plan, Mode::Discrete, 3, trial, true);
            let traj = traj.unwrap();
            assert_eq!(traj.steps(), 0);
            let start = traj.skeleton[0];
            let win = vacant_configuration(&traj, &plan, 0, 0).unwrap();
            let site = &plan.sites[0];
            for ((k, z), &vac) in win.keys.iter().zip(&win.vacant) {
                assert_eq!(vac, site.preimage(k, *z) != Some(start));
            }
            for (i, t) in site.targets.iter().enumerate() {
                assert_eq!(rec.sites[0].vacant[i], !t.contains(&start));
            }
            assert_eq!(rec.sites[0].l, 0);
        }
    }

    #[test]
    fn confined_trajectory_leaves_window_vacant() {
        let (_, plan) = box_plan(6, 1.0);
        let skeleton: Vec<CylVertex> = (0..40).map(|k| CylVertex::new((k % 3) as Vertex, 10 + (k % 2))).collect();
        let traj = Trajectory { skeleton, exp_draws: None, holding_times: None, horizon: None, seed: 0 };
        let win = vacant_configuration(&traj, &plan, 0, 39).unwrap();
        assert!(win.vacant.iter().all(|&v| v));
        assert_eq!(win.keys.len(), plan.sites[0].window_keys().len());
        assert!(vacant_configuration(&traj, &plan, 0, 40).is_err());
    }

    #[test]
    fn streamed_records_match_trajectories() {
        let (base, plan) = box_plan(5, 1.0);
        for mode in [Mode::Discrete, Mode::Continuous] {
            let cfg = EnsembleConfig { trials: 40, mode, seed: 11, audit: 40 };
            let run = run_ensemble(&base.graph, &plan, &cfg);
            assert_eq!(run.audit, AuditReport { checked: 40, mismatches: 0 });
            let seed = trial_seed(11, plan.size);
            for rec in &run.records {
                let (_, traj) = run_trial(&base.graph, &plan, mode, seed, rec.trial, true);
                let traj = traj.unwrap();
                let n = traj.steps();
                let z = plan.sites[0].z;
                let l = traj.skeleton[..n].iter().filter(|x| x.z == z).count() as u64;
                assert_eq!(rec.sites[0].l, l);
                let lh = traj.skeleton.windows(2).filter(|w| w[0].z == z && w[1].z != z).count() as u64;
                assert_eq!(rec.sites[0].l_hat, lh);
                if mode == Mode::Discrete {
                    assert_eq!(n as u64, plan.steps());
                } else {
                    let (_, lt) = crate::walk::passage_and_local_times(&traj, &[], &[z]);
                    assert!((lt[0].l_cont.unwrap() - rec.sites[0].l_cont.unwrap()).abs() < 1e-9);
                    let e = rec.eta.unwrap();
                    assert_eq!(e.x, n as u64);
                    assert_eq!(e.y + e.z, e.x);
                }
            }
        }
    }

    #[test]
    fn ensemble_is_deterministic() {
        let (base, plan) = box_plan(4, 0.5);
        let cfg = EnsembleConfig { trials: 30, mode: Mode::Discrete, seed: 5, audit: 0 };
        let a = run_ensemble(&base.graph, &plan, &cfg);
        let b = run_ensemble(&base.graph, &plan, &cfg);
        assert_eq!(a.records, b.records);
    }
}
