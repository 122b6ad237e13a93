//! Kähler potentials and metrics: a multiple of Fubini–Study on ℙ_m and the
//! restricted product metric g^M on the incidence manifold.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::hermitian::{
    complex_hessian, is_positive_definite, HermitianForm, HessianOptions, ScalarField,
};
use crate::projective::{ChartPoint, TupleShape};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// a_m times the Fubini–Study metric on ℙ_m.
    FubiniStudy { a_m: f64 },
    /// Restriction to M of k·g_FS(ℙ_m) + (n−1)·Σ g_FS(ℙ_{n−1}).
    ProductM,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub kind: MetricKind,
    pub shape: TupleShape,
}

impl MetricSpec {
    pub fn fubini_study(shape: TupleShape, a_m: f64) -> Result<Self> {
        if !(a_m > 0.0 && a_m.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "a_m = {a_m} must be positive"
            )));
        }
        Ok(MetricSpec {
            kind: MetricKind::FubiniStudy { a_m },
            shape,
        })
    }

    /// Fubini–Study scaled into the first Chern class, a_m = m + 1.
    pub fn chern(shape: TupleShape) -> Self {
        MetricSpec {
            kind: MetricKind::FubiniStudy {
                a_m: (shape.m() + 1) as f64,
            },
            shape,
        }
    }

    pub fn product_m(shape: TupleShape) -> Self {
        MetricSpec {
            kind: MetricKind::ProductM,
            shape,
        }
    }

    /// True for Fubini–Study with a_m = m + 1, and always for the M metric
    /// with its fixed weights (k, n−1, .., n−1).
    pub fn in_first_chern_class(&self) -> bool {
        match self.kind {
            MetricKind::FubiniStudy { a_m } => a_m == (self.shape.m() + 1) as f64,
            MetricKind::ProductM => true,
        }
    }

    pub fn metric_at(&self, p: &ChartPoint) -> Result<HermitianForm> {
        match self.kind {
            MetricKind::FubiniStudy { a_m } => Ok(fs_metric(p, a_m)),
            MetricKind::ProductM => gm_metric(p),
        }
    }
}

/// a_m · ln(1 + Σ|z_λ|²).
pub fn fs_potential(p: &ChartPoint, a_m: f64) -> f64 {
    a_m * p.norm_sqr().ln_1p()
}

/// a_m [δ_{λμ}/(1+|z|²) − z̄_λ z_μ/(1+|z|²)²].
pub fn fs_metric(p: &ChartPoint, a_m: f64) -> HermitianForm {
    let z = p.affine();
    let m = z.len();
    let s = 1.0 + p.norm_sqr();
    let entries = DMatrix::from_fn(m, m, |l, u| {
        let delta = if l == u { 1.0 / s } else { 0.0 };
        (Complex64::new(delta, 0.0) - z[l].conj() * z[u] / (s * s)) * a_m
    });
    HermitianForm::symmetrized(entries)
}

/// Density of the volume form in affine coordinates, 1/(1+|z|²)^{m+1}, with
/// the constant factor of the wedge product dropped.
pub fn fs_volume_density(p: &ChartPoint) -> f64 {
    let m = p.affine().len() as i32;
    (1.0 + p.norm_sqr()).powi(-(m + 1))
}

// Σ|w|² and the tuple norms |W_h|² of the homogeneous vector of `p`.
fn tuple_norms(p: &ChartPoint) -> (f64, Vec<f64>) {
    let shape = p.shape();
    let w = p.homogeneous();
    let tuples: Vec<f64> = (0..shape.k())
        .map(|h| w[shape.tuple_range(h)].iter().map(|z| z.norm_sqr()).sum())
        .collect();
    (tuples.iter().sum(), tuples)
}

fn check_tuples(shape: TupleShape, tuples: &[f64]) -> Result<()> {
    // for n = 1 the tuple factors carry exponent 0 and drop out
    if shape.n() >= 2 {
        if let Some(h) = tuples.iter().position(|&t| t == 0.0) {
            return Err(Error::ZeroTuple(h));
        }
    }
    Ok(())
}

/// k·ln(1+Σ|z|²) + (n−1)·Σ_h ln |Z_h|², tuple norms taken with the chart
/// coordinate set to 1 (so the chart's own tuple reads 1 + ...).
pub fn gm_potential(p: &ChartPoint) -> Result<f64> {
    let shape = p.shape();
    let (total, tuples) = tuple_norms(p);
    check_tuples(shape, &tuples)?;
    let mut v = shape.k() as f64 * total.ln();
    if shape.n() >= 2 {
        let w = (shape.n() - 1) as f64;
        v += tuples.iter().map(|t| w * t.ln()).sum::<f64>();
    }
    Ok(v)
}

struct GmPotential;

impl ScalarField for GmPotential {
    fn eval(&self, p: &ChartPoint) -> ExtReal {
        match gm_potential(p) {
            Ok(v) => ExtReal::Finite(v),
            Err(_) => ExtReal::NegInf,
        }
    }
}

/// Complex Hessian of [`gm_potential`], computed numerically.
pub fn gm_metric(p: &ChartPoint) -> Result<HermitianForm> {
    gm_potential(p)?;
    complex_hessian(&GmPotential, p, HessianOptions::default())
}

/// Closed-form determinant of g^M:
/// k^{k−1} Π_h[(n−1)S + k·T_h]^{n−1} / (S^{m+1} Π_h T_h^{n−1}).
pub fn gm_det_formula(p: &ChartPoint) -> Result<f64> {
    let shape = p.shape();
    let (total, tuples) = tuple_norms(p);
    check_tuples(shape, &tuples)?;
    let (n, k) = (shape.n() as f64, shape.k() as f64);
    // accumulate in logs; the products overflow for large shapes
    let mut log = (k - 1.0) * k.ln() - (shape.m() + 1) as f64 * total.ln();
    if shape.n() >= 2 {
        for t in &tuples {
            log += (n - 1.0) * (((n - 1.0) * total + k * t).ln() - t.ln());
        }
    }
    Ok(log.exp())
}

/// Whether `metric(p) + ∂∂̄f(p)` is positive definite with tolerance `tol`.
pub fn admissibility<F: ScalarField + ?Sized>(
    f: &F,
    p: &ChartPoint,
    metric: &MetricSpec,
    tol: f64,
) -> Result<bool> {
    let g = metric.metric_at(p)?;
    let h = complex_hessian(f, p, HessianOptions::default())?;
    Ok(is_positive_definite(&g.add(&h), tol))
}
