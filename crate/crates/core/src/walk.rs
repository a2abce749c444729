//! Discrete- and continuous-time random walks on finite graphs and cylinders.
//!
//! A walk with seed `s` draws its moves from the stream `(s, "skeleton")` and
//! its standard exponentials `e_k` from `(s, "holding")`. The discrete and
//! continuous runs with the same seed therefore share their skeleton, and
//! the Poisson processes of Lemma-2.2 type coupling can be rebuilt from the
//! seed alone.

use std::collections::HashSet;
use std::hash::Hash;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Vertex, WeightedGraph};
use crate::rng::{stream, WalkRng};
use crate::zoo::{CylVertex, CylinderView};

/// A state space the walk can move on.
pub trait WalkSpace {
    type V: Copy + Eq + Hash + std::fmt::Debug;
    fn step<R: Rng + ?Sized>(&self, v: Self::V, rng: &mut R) -> Self::V;
    fn vertex_weight(&self, v: Self::V) -> f64;
    fn is_neighbor(&self, a: Self::V, b: Self::V) -> bool;
    fn validate(&self, v: Self::V) -> Result<()>;
}

impl WalkSpace for WeightedGraph {
    type V = Vertex;
    #[inline]
    fn step<R: Rng + ?Sized>(&self, v: Vertex, rng: &mut R) -> Vertex {
        WeightedGraph::step(self, v, rng)
    }
    fn vertex_weight(&self, v: Vertex) -> f64 {
        WeightedGraph::vertex_weight(self, v)
    }
    fn is_neighbor(&self, a: Vertex, b: Vertex) -> bool {
        self.weight(a, b) > 0.0
    }
    fn validate(&self, v: Vertex) -> Result<()> {
        self.check_vertex(v as usize).map(|_| ())
    }
}

impl WalkSpace for CylinderView<'_> {
    type V = CylVertex;
    #[inline]
    fn step<R: Rng + ?Sized>(&self, v: CylVertex, rng: &mut R) -> CylVertex {
        CylinderView::step(self, v, rng)
    }
    fn vertex_weight(&self, v: CylVertex) -> f64 {
        CylinderView::vertex_weight(self, v)
    }
    fn is_neighbor(&self, a: CylVertex, b: CylVertex) -> bool {
        self.weight(a, b) > 0.0
    }
    fn validate(&self, v: CylVertex) -> Result<()> {
        self.base.check_vertex(v.y as usize).map(|_| ())
    }
}

pub fn skeleton_rng(seed: u64) -> WalkRng {
    stream(seed, "skeleton", 0)
}

pub fn holding_rng(seed: u64) -> WalkRng {
    stream(seed, "holding", 0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<V> {
    pub skeleton: Vec<V>,
    /// `e_k`, `k = 1..=n`, when continuous.
    pub exp_draws: Option<Vec<f64>>,
    /// `e_k / w_{X_{k-1}}`, when continuous.
    pub holding_times: Option<Vec<f64>>,
    pub horizon: Option<f64>,
    pub seed: u64,
}

impl<V: Copy> Trajectory<V> {
    pub fn steps(&self) -> usize {
        self.skeleton.len() - 1
    }

    /// Jump times `σ_1 ≤ σ_2 ≤ …`.
    pub fn jump_times(&self) -> Vec<f64> {
        let mut t = 0.0;
        self.holding_times
            .as_deref()
            .unwrap_or(&[])
            .iter()
            .map(|h| {
                t += h;
                t
            })
            .collect()
    }

    /// `η_t = sup{n : σ_n ≤ t}`.
    pub fn eta(&self, t: f64) -> usize {
        let jt = self.jump_times();
        jt.partition_point(|&s| s <= t)
    }
}

pub fn run_discrete<S: WalkSpace>(space: &S, start: S::V, steps: usize, seed: u64) -> Result<Trajectory<S::V>> {
    space.validate(start)?;
    let mut rng = skeleton_rng(seed);
    let mut sk = Vec::with_capacity(steps + 1);
    let mut x = start;
    sk.push(x);
    for _ in 0..steps {
        x = space.step(x, &mut rng);
        sk.push(x);
    }
    Ok(Trajectory { skeleton: sk, exp_draws: None, holding_times: None, horizon: None, seed })
}

/// Runs until the first jump after `horizon`; that jump is not recorded.
pub fn run_continuous<S: WalkSpace>(space: &S, start: S::V, horizon: f64, seed: u64) -> Result<Trajectory<S::V>> {
    if !(horizon >= 0.0) {
        return Err(Error::Param("horizon must be nonnegative".into()));
    }
    space.validate(start)?;
    let mut srng = skeleton_rng(seed);
    let mut hrng = holding_rng(seed);
    let mut sk = vec![start];
    let mut es = Vec::new();
    let mut hs = Vec::new();
    let mut x = start;
    let mut t = 0.0;
    loop {
        let e: f64 = Exp1.sample(&mut hrng);
        let h = e / space.vertex_weight(x);
        t += h;
        if t > horizon {
            break;
        }
        x = space.step(x, &mut srng);
        sk.push(x);
        es.push(e);
        hs.push(h);
    }
    Ok(Trajectory { skeleton: sk, exp_draws: Some(es), holding_times: Some(hs), horizon: Some(horizon), seed })
}

/// `η^ν_t = sup{n : e_1 + … + e_n ≤ νt}` on the exponentials of `seed`.
pub fn poisson_count(seed: u64, nu: f64, t: f64) -> usize {
    let mut hrng = holding_rng(seed);
    let mut s = 0.0;
    let mut n = 0;
    loop {
        let e: f64 = Exp1.sample(&mut hrng);
        s += e;
        if s > nu * t {
            return n;
        }
        n += 1;
    }
}

/// `(η^{c0}_t, η_t, η^{c1}_t)` for a continuous trajectory.
pub fn poisson_sandwich<V: Copy>(traj: &Trajectory<V>, c0: f64, c1: f64, t: f64) -> (usize, usize, usize) {
    (poisson_count(traj.seed, c0, t), traj.eta(t), poisson_count(traj.seed, c1, t))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PassageReport {
    /// `H_A = inf{n ≥ 0 : X_n ∈ A}`.
    pub entrance: Option<usize>,
    /// `T_A = inf{n ≥ 0 : X_n ∉ A}`.
    pub exit: Option<usize>,
    /// `H̃_A = inf{n ≥ 1 : X_n ∈ A}`.
    pub ret: Option<usize>,
    /// The same three as times when holding times are present.
    pub entrance_time: Option<f64>,
    pub exit_time: Option<f64>,
    pub return_time: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LocalTimeRecord {
    pub z: i64,
    /// Steps `l < n` of the full skeleton at height `z`.
    pub l: u64,
    /// Steps `k < n_Z` of the `Z`-skeleton at height `z`.
    pub l_hat: u64,
    /// Time spent at height `z` up to the horizon.
    pub l_cont: Option<f64>,
}

pub fn passage_times<V: Copy + Eq + Hash>(traj: &Trajectory<V>, a: &HashSet<V>) -> PassageReport {
    let sk = &traj.skeleton;
    let entrance = sk.iter().position(|x| a.contains(x));
    let exit = sk.iter().position(|x| !a.contains(x));
    let ret = sk.iter().skip(1).position(|x| a.contains(x)).map(|k| k + 1);
    let times = traj.holding_times.as_ref().map(|_| {
        let mut jt = vec![0.0];
        jt.extend(traj.jump_times());
        jt
    });
    let at = |k: Option<usize>| times.as_ref().and_then(|jt| k.map(|k| jt[k]));
    PassageReport {
        entrance,
        exit,
        ret,
        entrance_time: at(entrance),
        exit_time: at(exit),
        return_time: at(ret),
    }
}

/// Passage reports per target set and local times per height.
pub fn passage_and_local_times(
    traj: &Trajectory<CylVertex>,
    targets: &[HashSet<CylVertex>],
    sites: &[i64],
) -> (Vec<PassageReport>, Vec<LocalTimeRecord>) {
    let passages = targets.iter().map(|a| passage_times(traj, a)).collect();
    let sk = &traj.skeleton;
    let n = sk.len() - 1;
    let mut recs: Vec<LocalTimeRecord> =
        sites.iter().map(|&z| LocalTimeRecord { z, l_cont: traj.horizon.map(|_| 0.0), ..Default::default() }).collect();
    for l in 0..n {
        let z = sk[l].z;
        let zmove = sk[l + 1].z != z;
        for r in recs.iter_mut().filter(|r| r.z == z) {
            r.l += 1;
            if zmove {
                r.l_hat += 1;
            }
        }
    }
    if let (Some(h), Some(hs)) = (traj.horizon, traj.holding_times.as_ref()) {
        let mut t = 0.0;
        for (l, &dt) in hs.iter().enumerate() {
            let z = sk[l].z;
            for r in recs.iter_mut().filter(|r| r.z == z) {
                *r.l_cont.as_mut().unwrap() += dt;
            }
            t += dt;
        }
        let z = sk[n].z;
        for r in recs.iter_mut().filter(|r| r.z == z) {
            *r.l_cont.as_mut().unwrap() += h - t;
        }
    }
    (passages, recs)
}

/// `Σ_{k<n_Z} 1{Z_k=z}(1+m_k) + 1{Z_{n_Z}=z}·m_{n_Z}`, with `m_k` the number of
/// base moves between the `k`-th and `(k+1)`-th vertical move. Equals `L^z_n`.
pub fn local_time_from_segments(traj: &Trajectory<CylVertex>, z: i64) -> u64 {
    let sk = &traj.skeleton;
    let mut total = 0u64;
    let mut m = 0u64;
    let mut zk = sk[0].z;
    for w in sk.windows(2) {
        if w[1].z != w[0].z {
            if zk == z {
                total += 1 + m;
            }
            m = 0;
            zk = w[1].z;
        } else {
            m += 1;
        }
    }
    if zk == z {
        total += m;
    }
    total
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub seed: u64,
    pub steps: usize,
    pub passages: Vec<PassageReport>,
    pub local_times: Vec<LocalTimeRecord>,
}

fn put_varint(out: &mut Vec<u8>, mut v: u64) {
    while v >= 0x80 {
        out.push((v as u8) | 0x80);
        v >>= 7;
    }
    out.push(v as u8);
}

fn get_varint(buf: &[u8], pos: &mut usize) -> Result<u64> {
    let mut v = 0u64;
    let mut shift = 0;
    loop {
        let b = *buf.get(*pos).ok_or_else(|| Error::Param("truncated frame".into()))?;
        *pos += 1;
        v |= ((b & 0x7f) as u64) << shift;
        if b & 0x80 == 0 {
            return Ok(v);
        }
        shift += 7;
        if shift > 63 {
            return Err(Error::Param("varint overflow".into()));
        }
    }
}

fn zigzag(z: i64) -> u64 {
    ((z << 1) ^ (z >> 63)) as u64
}

fn unzigzag(u: u64) -> i64 {
    ((u >> 1) as i64) ^ -((u & 1) as i64)
}

/// Frames `(varint y, zigzag-varint z, f64 LE holding)`; the holding time of the
/// start frame is 0 and of frame `k` is the time spent before jumping to it.
pub fn encode_frames(traj: &Trajectory<CylVertex>) -> Vec<u8> {
    let mut out = Vec::with_capacity(traj.skeleton.len() * 11);
    for (k, x) in traj.skeleton.iter().enumerate() {
        put_varint(&mut out, x.y as u64);
        put_varint(&mut out, zigzag(x.z));
        let h = if k == 0 { 0.0 } else { traj.holding_times.as_ref().map_or(0.0, |h| h[k - 1]) };
        out.extend_from_slice(&h.to_le_bytes());
    }
    out
}

pub fn decode_frames(buf: &[u8]) -> Result<Vec<(CylVertex, f64)>> {
    let mut pos = 0;
    let mut out = Vec::new();
    while pos < buf.len() {
        let y = get_varint(buf, &mut pos)? as Vertex;
        let z = unzigzag(get_varint(buf, &mut pos)?);
        let b = buf.get(pos..pos + 8).ok_or_else(|| Error::Param("truncated frame".into()))?;
        pos += 8;
        out.push((CylVertex::new(y, z), f64::from_le_bytes(b.try_into().unwrap())));
    }
    Ok(out)
}

/// Outcome of the rejection sampler for `P_{z,z'}`.
#[derive(Clone, Debug)]
pub struct ConditionedExcursion {
    pub trajectory: Trajectory<CylVertex>,
    pub attempts: u64,
}

/// A walk started at `(uniform y, z)` and run until its height leaves
/// `(center − h, center + h)`, conditioned by rejection on leaving at `exit`.
pub fn conditioned_excursion(
    base: &WeightedGraph,
    center: i64,
    h: i64,
    z: i64,
    exit: i64,
    seed: u64,
    max_attempts: u64,
) -> Result<ConditionedExcursion> {
    if h < 1 || (z - center).abs() >= h || (exit != center - h && exit != center + h) {
        return Err(Error::UnreachableExit);
    }
    let cyl = CylinderView::new(base);
    for attempt in 0..max_attempts {
        let s = crate::rng::splitmix64(seed ^ attempt.wrapping_mul(0xA076_1D64_78BD_642F));
        let mut rng = skeleton_rng(s);
        let y0 = rng.random_range(0..base.n() as Vertex);
        let mut x = CylVertex::new(y0, z);
        let mut sk = vec![x];
        while (x.z - center).abs() < h {
            x = cyl.step(x, &mut rng);
            sk.push(x);
        }
        if x.z == exit {
            return Ok(ConditionedExcursion {
                trajectory: Trajectory { skeleton: sk, exp_draws: None, holding_times: None, horizon: None, seed: s },
                attempts: attempt + 1,
            });
        }
    }
    Err(Error::Param(format!("no accepted excursion within {max_attempts} attempts")))
}

/// Acceptance frequency of [`conditioned_excursion`] over `n` independent attempts.
pub fn excursion_acceptance(base: &WeightedGraph, center: i64, h: i64, z: i64, exit: i64, seed: u64, n: u64) -> Result<f64> {
    if h < 1 || (z - center).abs() >= h || (exit != center - h && exit != center + h) {
        return Err(Error::UnreachableExit);
    }
    let cyl = CylinderView::new(base);
    let mut rng = stream(seed, "excursion-acceptance", 0);
    let mut acc = 0u64;
    for _ in 0..n {
        let mut x = CylVertex::new(rng.random_range(0..base.n() as Vertex), z);
        while (x.z - center).abs() < h {
            x = cyl.step(x, &mut rng);
        }
        acc += (x.z == exit) as u64;
    }
    Ok(acc as f64 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::make_box;

    fn two() -> WeightedGraph {
        WeightedGraph::from_edges(2, &[(0, 1, 0.5)]).unwrap()
    }

    #[test]
    fn forced_alternation_and_zero_steps() {
        let g = two();
        let t = run_discrete(&g, 0, 5, 1).unwrap();
        assert_eq!(t.skeleton, vec![0, 1, 0, 1, 0, 1]);
        assert_eq!(run_discrete(&g, 1, 0, 1).unwrap().skeleton, vec![1]);
        assert!(run_discrete(&g, 2, 1, 1).is_err());
    }

    #[test]
    fn continuous_shares_skeleton_and_stores_draws() {
        let g = make_box(3, 2).unwrap();
        let c = run_continuous(&g, 4, 20.0, 9).unwrap();
        let d = run_discrete(&g, 4, c.steps(), 9).unwrap();
        assert_eq!(c.skeleton, d.skeleton);
        let es = c.exp_draws.as_ref().unwrap();
        let hs = c.holding_times.as_ref().unwrap();
        for k in 0..hs.len() {
            assert_eq!(hs[k], es[k] / g.vertex_weight(c.skeleton[k]));
        }
        assert!(c.jump_times().last().copied().unwrap_or(0.0) <= 20.0);
        assert_eq!(c.eta(20.0), c.steps());
    }

    #[test]
    fn consecutive_vertices_adjacent() {
        let g = make_box(4, 2).unwrap();
        let cyl = CylinderView::new(&g);
        let t = run_discrete(&cyl, CylVertex::new(5, 0), 2000, 3).unwrap();
        assert!(t.skeleton.windows(2).all(|w| cyl.is_neighbor(w[0], w[1])));
    }

    #[test]
    fn segment_identity_exact() {
        let g = make_box(3, 2).unwrap();
        let cyl = CylinderView::new(&g);
        for seed in 0..20 {
            let t = run_discrete(&cyl, CylVertex::new(0, 0), 3000, seed).unwrap();
            let (_, recs) = passage_and_local_times(&t, &[], &[-2, -1, 0, 1, 2]);
            for r in recs {
                assert_eq!(r.l, local_time_from_segments(&t, r.z));
            }
        }
    }

    #[test]
    fn flat_trajectory_local_time_and_passages() {
        let g = two();
        let cyl = CylinderView::new(&g);
        let sk: Vec<CylVertex> = (0..7).map(|k| CylVertex::new(k % 2, 0)).collect();
        let t = Trajectory { skeleton: sk, exp_draws: None, holding_times: None, horizon: None, seed: 0 };
        let (p, r) = passage_and_local_times(&t, &[HashSet::from([CylVertex::new(0, 0)])], &[0]);
        assert_eq!(r[0].l, 6);
        assert_eq!(r[0].l_hat, 0);
        assert_eq!(p[0].entrance, Some(0));
        assert_eq!(p[0].ret, Some(2));
        assert_eq!(p[0].exit, Some(1));
        let _ = cyl;
    }

    #[test]
    fn continuous_local_time_sums_to_horizon() {
        let g = two();
        let cyl = CylinderView::new(&g);
        let t = run_continuous(&cyl, CylVertex::new(0, 0), 50.0, 5).unwrap();
        let zs: Vec<i64> = (-60..=60).collect();
        let (_, recs) = passage_and_local_times(&t, &[], &zs);
        let total: f64 = recs.iter().map(|r| r.l_cont.unwrap()).sum();
        assert!((total - 50.0).abs() < 1e-9);
    }

    #[test]
    fn frames_round_trip() {
        let g = two();
        let cyl = CylinderView::new(&g);
        let t = run_continuous(&cyl, CylVertex::new(1, -3), 10.0, 2).unwrap();
        let f = decode_frames(&encode_frames(&t)).unwrap();
        assert_eq!(f.len(), t.skeleton.len());
        for (k, (x, h)) in f.iter().enumerate() {
            assert_eq!(*x, t.skeleton[k]);
            if k > 0 {
                assert_eq!(h.to_bits(), t.holding_times.as_ref().unwrap()[k - 1].to_bits());
            }
        }
    }

    #[test]
    fn excursion_errors_and_postcondition() {
        let g = two();
        assert!(matches!(conditioned_excursion(&g, 0, 10, 0, 7, 1, 10), Err(Error::UnreachableExit)));
        assert!(matches!(conditioned_excursion(&g, 0, 10, 12, 10, 1, 10), Err(Error::UnreachableExit)));
        for s in 0..10 {
            let e = conditioned_excursion(&g, 0, 10, 2, -10, s, 10_000).unwrap();
            assert_eq!(e.trajectory.skeleton.last().unwrap().z, -10);
            assert!(e.trajectory.skeleton[..e.trajectory.skeleton.len() - 1].iter().all(|x| x.z.abs() < 10));
        }
    }
}
