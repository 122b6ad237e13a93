//! The integrals ∫ exp(−αφ) dv over ℙ_m, written in the moduli coordinates
//! x_p = |z_p|² of the affine chart z_0 = 1 (the constant factor π^m from the
//! angular integration is dropped throughout).
//!
//! For φ = ψ with a_m = m + 1 the integrand is
//! (1 + Σx)^{(α−1)(m+1)} / (x_1 ⋯ x_m)^α, finite for α < 1.
//!
//! Each axis is mapped to t ∈ (0, 1) by x = u^p, u = (t/(1 − t))^q with
//! p = 1/(1 − α) and q = m + 1. The first factor absorbs x^{−α} near 0, the
//! exponent q makes the weight vanish polynomially in t at both ends even
//! when several axes run to infinity together. Everything is carried in logs.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::hermitian::ScalarField;
use crate::projective::{ChartPoint, TupleShape};
use crate::quadrature::{composite_rule, gauss_legendre_unit};
use num_complex::Complex64;

/// Largest m accepted by tensor-product quadrature.
pub const MAX_TENSOR_DIM: usize = 3;

/// Contributions whose log falls below this are dropped (exp underflows).
const LOG_UNDERFLOW: f64 = -745.0;

/// Samples per Monte Carlo chunk; each chunk owns one RNG stream.
const MC_CHUNK: u64 = 1 << 16;

/// Moduli with |ln x| beyond this cannot be represented as chart points.
const LN_X_LIMIT: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegralMethod {
    TensorQuadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralEstimate {
    pub value: f64,
    /// Standard error for Monte Carlo; |Q_N − Q_{N/2}| for quadrature.
    #[serde(rename = "stderr")]
    pub abs_error_estimate: f64,
    pub method: IntegralMethod,
    /// Total evaluation points: samples, or N^m tensor nodes.
    #[serde(rename = "nodes_or_samples")]
    pub samples_or_nodes: u64,
    pub seed: Option<u64>,
    pub alpha: f64,
    pub m: usize,
}

fn check_alpha_open(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::AlphaOutOfRange(alpha))
    }
}

fn check_dim(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    Ok(())
}

/// ln(1 + Σ exp(l_i)) without overflow.
fn ln_one_plus_sum_exp(ln_x: &[f64]) -> f64 {
    let top = ln_x.iter().copied().fold(0.0, f64::max);
    let s: f64 = (-top).exp() + ln_x.iter().map(|l| (l - top).exp()).sum::<f64>();
    top + s.ln()
}

fn ln_psi_integrand(ln_x: &[f64], alpha: f64) -> f64 {
    let m1 = (ln_x.len() + 1) as f64;
    (alpha - 1.0) * m1 * ln_one_plus_sum_exp(ln_x) - alpha * ln_x.iter().sum::<f64>()
}

/// (1 + x_1 + .. + x_m)^{(α−1)(m+1)} / (x_1 ⋯ x_m)^α.
pub fn tian_integrand(x: &[f64], alpha: f64, m: usize) -> Result<f64> {
    if x.len() != m {
        return Err(Error::ShapeMismatch {
            expected: m,
            got: x.len(),
        });
    }
    if let Some(v) = x.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::DomainError(format!(
            "x = {v} is not a positive real"
        )));
    }
    let ln_x: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    Ok(ln_psi_integrand(&ln_x, alpha).exp())
}

/// Γ(1−α)^{m+1} / Γ((m+1)(1−α)), the exact value of the ψ integral.
pub fn dirichlet_oracle(alpha: f64, m: usize) -> Result<f64> {
    check_alpha_open(alpha)?;
    check_dim(m)?;
    let b = 1.0 - alpha;
    let m1 = (m + 1) as f64;
    Ok((m1 * ln_gamma(b) - ln_gamma(m1 * b)).exp())
}

#[derive(Debug, Clone, Copy)]
struct AxisMap {
    pq: f64,
}

impl AxisMap {
    fn new(alpha: f64, m: usize) -> Self {
        AxisMap {
            pq: (m + 1) as f64 / (1.0 - alpha),
        }
    }

    /// (ln x, ln dx/dt) at t ∈ (0, 1).
    fn map(&self, t: f64) -> (f64, f64) {
        let lt = t.ln();
        let l1t = (-t).ln_1p();
        let ln_x = self.pq * (lt - l1t);
        (ln_x, ln_x + self.pq.ln() - lt - l1t)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn add(&mut self, v: f64) {
        let y = v - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

fn tensor_sum(alpha: f64, m: usize, nodes: usize) -> f64 {
    let map = AxisMap::new(alpha, m);
    let (t, w) = gauss_legendre_unit(nodes);
    let (ln_x, ln_w): (Vec<f64>, Vec<f64>) = t
        .iter()
        .zip(&w)
        .map(|(&t, &w)| {
            let (lx, lj) = map.map(t);
            (lx, lj + w.ln())
        })
        .unzip();
    let inner = nodes.pow(m as u32 - 1);
    let slices: Vec<f64> = (0..nodes)
        .into_par_iter()
        .map(|i0| {
            let mut acc = Kahan::default();
            let mut lx = vec![0.0; m];
            for rest in 0..inner {
                let mut idx = rest;
                let mut lw = ln_w[i0];
                lx[0] = ln_x[i0];
                for slot in lx.iter_mut().skip(1).rev() {
                    let j = idx % nodes;
                    idx /= nodes;
                    *slot = ln_x[j];
                    lw += ln_w[j];
                }
                let l = lw + ln_psi_integrand(&lx, alpha);
                if l > LOG_UNDERFLOW {
                    acc.add(l.exp());
                }
            }
            acc.sum
        })
        .collect();
    let mut total = Kahan::default();
    slices.into_iter().for_each(|s| total.add(s));
    total.sum
}

/// Suggested per-axis node counts for [`tian_psi_integral`].
pub fn default_nodes(m: usize) -> usize {
    match m {
        0..=2 => 200,
        _ => 120,
    }
}

/// Tensor-product Gauss–Legendre estimate of the ψ integral with `nodes`
/// points per axis. The error estimate compares against the rule with half
/// as many nodes.
pub fn tian_psi_integral(alpha: f64, m: usize, nodes: usize) -> Result<IntegralEstimate> {
    check_alpha_open(alpha)?;
    check_dim(m)?;
    if m > MAX_TENSOR_DIM {
        return Err(Error::QuadratureRefused(m));
    }
    if nodes < 4 {
        return Err(Error::InvalidArgument(format!(
            "quadrature needs at least 4 nodes per axis, got {nodes}"
        )));
    }
    let fine = tensor_sum(alpha, m, nodes);
    let coarse = tensor_sum(alpha, m, nodes / 2);
    Ok(IntegralEstimate {
        value: fine,
        abs_error_estimate: (fine - coarse).abs(),
        method: IntegralMethod::TensorQuadrature,
        samples_or_nodes: (nodes as u64).pow(m as u32),
        seed: None,
        alpha,
        m,
    })
}

/// Uniform on the open interval (0, 1).
fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Runs `samples` draws of the axis map; `log_value(ln_x, phases)` returns the
/// log of the integrand at the sample (−∞ for zero). Chunks are summed in
/// index order, so the result does not depend on the thread count.
fn monte_carlo<W>(
    alpha: f64,
    m: usize,
    samples: u64,
    seed: u64,
    with_phases: bool,
    log_value: W,
) -> Result<(f64, f64)>
where
    W: Fn(&[f64], &[f64]) -> f64 + Sync,
{
    if samples < 2 {
        return Err(Error::InvalidArgument(
            "Monte Carlo needs at least 2 samples".into(),
        ));
    }
    let map = AxisMap::new(alpha, m);
    let chunks = samples.div_ceil(MC_CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            let (mut s1, mut s2) = (Kahan::default(), Kahan::default());
            let mut ln_x = vec![0.0; m];
            let mut phases = vec![0.0; if with_phases { m } else { 0 }];
            for _ in 0..count {
                let mut ln_jac = 0.0;
                for lx in ln_x.iter_mut() {
                    let (a, b) = map.map(open_unit(&mut rng));
                    *lx = a;
                    ln_jac += b;
                }
                for th in phases.iter_mut() {
                    *th = std::f64::consts::TAU * open_unit(&mut rng);
                }
                let l = ln_jac + log_value(&ln_x, &phases);
                if l.is_nan() || l == f64::INFINITY {
                    return Err(Error::EvaluationFailed(
                        "integrand is infinite or NaN at a sample".into(),
                    ));
                }
                if l > LOG_UNDERFLOW {
                    let w = l.exp();
                    s1.add(w);
                    s2.add(w * w);
                }
            }
            Ok((s1.sum, s2.sum))
        })
        .collect::<Result<_>>()?;
    let (mut s1, mut s2) = (Kahan::default(), Kahan::default());
    for (a, b) in partial {
        s1.add(a);
        s2.add(b);
    }
    let n = samples as f64;
    let mean = s1.sum / n;
    let var = ((s2.sum / n - mean * mean) * n / (n - 1.0)).max(0.0);
    Ok((mean, (var / n).sqrt()))
}

/// Monte Carlo estimate of the ψ integral, any m ≥ 1.
pub fn tian_psi_integral_mc(
    alpha: f64,
    m: usize,
    samples: u64,
    seed: u64,
) -> Result<IntegralEstimate> {
    check_alpha_open(alpha)?;
    check_dim(m)?;
    let (value, stderr) = monte_carlo(alpha, m, samples, seed, false, |lx, _| {
        ln_psi_integrand(lx, alpha)
    })?;
    Ok(IntegralEstimate {
        value,
        abs_error_estimate: stderr,
        method: IntegralMethod::MonteCarlo,
        samples_or_nodes: samples,
        seed: Some(seed),
        alpha,
        m,
    })
}

/// Monte Carlo estimate of ∫ exp(−αf) dv, with dv = (1 + Σx)^{−(m+1)} dx and
/// uniform phases, so that f = ψ reproduces the ψ integral.
///
/// Samples whose moduli cannot be represented (|ln x| > 700) are dropped;
/// for f ≥ ψ their contribution is below e^{−40} each. Requires α < 1.
pub fn tian_mc_integral<F: ScalarField + ?Sized>(
    f: &F,
    alpha: f64,
    shape: TupleShape,
    samples: u64,
    seed: u64,
) -> Result<IntegralEstimate> {
    if !(alpha < 1.0 && alpha.is_finite()) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    let m = shape.m();
    let (value, stderr) = monte_carlo(alpha, m, samples, seed, true, |lx, th| {
        if lx.iter().any(|l| l.abs() > LN_X_LIMIT) {
            return f64::NEG_INFINITY;
        }
        let affine: Vec<Complex64> = lx
            .iter()
            .zip(th)
            .map(|(&l, &t)| Complex64::from_polar((0.5 * l).exp(), t))
            .collect();
        let Ok(p) = ChartPoint::new(0, affine, shape) else {
            return f64::NAN;
        };
        let phi = match f.eval(&p) {
            ExtReal::Finite(v) => v,
            ExtReal::PosInf => return f64::NEG_INFINITY,
            ExtReal::NegInf => return f64::INFINITY,
        };
        -alpha * phi - (m + 1) as f64 * ln_one_plus_sum_exp(lx)
    })?;
    Ok(IntegralEstimate {
        value,
        abs_error_estimate: stderr,
        method: IntegralMethod::MonteCarlo,
        samples_or_nodes: samples,
        seed: Some(seed),
        alpha,
        m,
    })
}

/// Truncated integrals over [1/R, R]^m for each cutoff R, α ≥ 1.
pub fn divergence_sweep(alpha: f64, m: usize, cutoffs: &[f64]) -> Result<Vec<(f64, f64)>> {
    if !(alpha >= 1.0 && alpha.is_finite()) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    check_dim(m)?;
    if m > MAX_TENSOR_DIM {
        return Err(Error::QuadratureRefused(m));
    }
    if cutoffs.iter().any(|&r| !(r > 1.0 && r.is_finite()))
        || cutoffs.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::InvalidArgument(
            "cutoffs must be finite, greater than 1 and strictly increasing".into(),
        ));
    }
    cutoffs
        .iter()
        .map(|&r| Ok((r, truncated_integral(alpha, m, r))))
        .collect()
}

// x = e^s on [−ln R, ln R]^m, composite Gauss–Legendre with unit-length panels.
fn truncated_integral(alpha: f64, m: usize, r: f64) -> f64 {
    let l = r.ln();
    let panels = (2.0 * l).ceil().max(1.0) as usize;
    let (s, w) = composite_rule(-l, l, panels, 10);
    let n = s.len();
    let mut acc = Kahan::default();
    let mut lx = vec![0.0; m];
    for idx in 0..n.pow(m as u32) {
        let mut rest = idx;
        let mut weight = 1.0;
        for slot in lx.iter_mut() {
            let j = rest % n;
            rest /= n;
            *slot = s[j];
            weight *= w[j];
        }
        // dx = x ds on each axis
        let log_val = ln_psi_integrand(&lx, alpha) + lx.iter().sum::<f64>();
        acc.add(weight * log_val.exp());
    }
    acc.sum
}
