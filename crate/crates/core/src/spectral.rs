//! Dirichlet forms, spectral gaps and heat kernels of the base graph.
//!
//! The continuous-time walk jumps from `y` to `y'` at rate `w(y,y')`, so its
//! generator is `−L` with `L = diag(w_y) − A`, symmetric and reversible for the
//! uniform measure. The discrete walk has `I − P` similar to
//! `I − D^{-1/2} A D^{-1/2}`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Vertex, WeightedGraph};
use crate::linalg::smallest_nonzero_eigenvalue;

pub const DEFAULT_DENSE_LIMIT: usize = 5000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapMode {
    Continuous,
    Discrete,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    DenseEigen,
    Iterative,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralReport {
    pub n: usize,
    pub lambda: f64,
    pub lambda_d: f64,
    pub relaxation_time: f64,
    pub method: Method,
    pub c0: f64,
    pub c1: f64,
    /// `c0·λ^d ≤ λ ≤ c1·λ^d`.
    pub sandwich_holds: bool,
    pub a2: A2Verdict,
}

/// `λ^{-1} ≤ |G|^{2−ε}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct A2Verdict {
    pub eps: f64,
    pub relaxation_time: f64,
    pub bound: f64,
    pub holds: bool,
}

pub fn a2_verdict(lambda: f64, n: usize, eps: f64) -> A2Verdict {
    let bound = (n as f64).powf(2.0 - eps);
    A2Verdict { eps, relaxation_time: 1.0 / lambda, bound, holds: 1.0 / lambda <= bound }
}

pub fn laplacian(g: &WeightedGraph) -> DMatrix<f64> {
    let n = g.n();
    let mut l = DMatrix::zeros(n, n);
    for y in 0..n as Vertex {
        l[(y as usize, y as usize)] = g.vertex_weight(y);
        for (t, w) in g.edges_of(y) {
            l[(y as usize, t as usize)] = -w;
        }
    }
    l
}

fn normalized_laplacian(g: &WeightedGraph) -> DMatrix<f64> {
    let n = g.n();
    let mut s = DMatrix::identity(n, n);
    for y in 0..n as Vertex {
        for (t, w) in g.edges_of(y) {
            s[(y as usize, t as usize)] = -w / (g.vertex_weight(y) * g.vertex_weight(t)).sqrt();
        }
    }
    s
}

fn apply_op(g: &WeightedGraph, mode: GapMode, x: &[f64], out: &mut [f64]) {
    for y in 0..g.n() as Vertex {
        let yi = y as usize;
        let mut acc = match mode {
            GapMode::Continuous => g.vertex_weight(y) * x[yi],
            GapMode::Discrete => x[yi],
        };
        for (t, w) in g.edges_of(y) {
            acc -= match mode {
                GapMode::Continuous => w * x[t as usize],
                GapMode::Discrete => w / (g.vertex_weight(y) * g.vertex_weight(t)).sqrt() * x[t as usize],
            };
        }
        out[yi] = acc;
    }
}

/// Smallest nonzero eigenvalue of `L` (continuous) or `I − P` (discrete).
pub fn spectral_gap(g: &WeightedGraph, mode: GapMode, dense_limit: usize) -> Result<(f64, Method)> {
    g.ensure_connected()?;
    let n = g.n();
    if n < 2 {
        return Err(Error::Param("spectral gap needs at least two vertices".into()));
    }
    if n <= dense_limit {
        let m = match mode {
            GapMode::Continuous => laplacian(g),
            GapMode::Discrete => normalized_laplacian(g),
        };
        let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        return Ok((ev[1], Method::DenseEigen));
    }
    let null: Vec<f64> = match mode {
        GapMode::Continuous => vec![1.0 / (n as f64).sqrt(); n],
        GapMode::Discrete => {
            let tw = g.total_weight();
            g.vertex_weights().iter().map(|w| (w / tw).sqrt()).collect()
        }
    };
    let lam = smallest_nonzero_eigenvalue(|x, out| apply_op(g, mode, x, out), &null, 1e-10);
    Ok((lam, Method::Iterative))
}

pub fn spectral_report(g: &WeightedGraph, eps: f64, dense_limit: usize) -> Result<SpectralReport> {
    let (lambda, method) = spectral_gap(g, GapMode::Continuous, dense_limit)?;
    let (lambda_d, _) = spectral_gap(g, GapMode::Discrete, dense_limit)?;
    let (c0, c1) = g.weight_range();
    let slack = 1e-10 * lambda.max(1e-300);
    Ok(SpectralReport {
        n: g.n(),
        lambda,
        lambda_d,
        relaxation_time: 1.0 / lambda,
        method,
        c0,
        c1,
        sandwich_holds: c0 * lambda_d <= lambda + slack && lambda <= c1 * lambda_d + slack,
        a2: a2_verdict(lambda, g.n(), eps),
    })
}

/// `D(f,f) = (1/2) Σ_{y,y'} (f(y) − f(y'))² w(y,y') / |G|`.
pub fn dirichlet_form(g: &WeightedGraph, f: &[f64]) -> f64 {
    let mut s = 0.0;
    for y in 0..g.n() as Vertex {
        for (t, w) in g.edges_of(y) {
            s += (f[y as usize] - f[t as usize]).powi(2) * w;
        }
    }
    0.5 * s / g.n() as f64
}

pub fn var_mu(f: &[f64]) -> f64 {
    let n = f.len() as f64;
    let m = f.iter().sum::<f64>() / n;
    f.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n
}

pub fn rayleigh_quotient(g: &WeightedGraph, f: &[f64]) -> f64 {
    dirichlet_form(g, f) / var_mu(f)
}

/// `q_t = e^{−tL}` by scaling and squaring.
pub fn heat_kernel(g: &WeightedGraph, t: f64) -> Result<DMatrix<f64>> {
    if !(t >= 0.0) {
        return Err(Error::Param("time must be nonnegative".into()));
    }
    Ok((laplacian(g) * (-t)).exp())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MixingRow {
    pub t: f64,
    pub sup_dev: f64,
    pub bound: f64,
    pub holds: bool,
}

/// `sup_{y,y'} |q_t(y,y') − 1/|G||` against `e^{−λt}` (+1e−9).
pub fn mixing_certificate(g: &WeightedGraph, times: &[f64]) -> Result<Vec<MixingRow>> {
    if g.n() > 2000 {
        return Err(Error::Param("mixing certificate limited to 2000 vertices".into()));
    }
    let (lambda, _) = spectral_gap(g, GapMode::Continuous, usize::MAX)?;
    let inv = 1.0 / g.n() as f64;
    times
        .iter()
        .map(|&t| {
            let q = heat_kernel(g, t)?;
            let sup_dev = q.iter().map(|x| (x - inv).abs()).fold(0.0, f64::max);
            let bound = (-lambda * t).exp();
            Ok(MixingRow { t, sup_dev, bound, holds: sup_dev <= bound + 1e-9 })
        })
        .collect()
}
