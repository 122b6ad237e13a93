//! Smooth G_{n,k}-invariant test functions, their admissibility calibration
//! and sup normalization.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::geometry::MetricSpec;
use crate::grid::GridSpec;
use crate::hermitian::{complex_hessian, HermitianForm, HessianOptions, ScalarField};
use crate::projective::{ChartPoint, TupleShape};

/// Required ratio λ_min(g + ε∂∂̄F) / λ_min(g) at every calibration point.
pub const CALIBRATION_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TestFamily {
    /// F = ln(Σ|z_i|^{2d} / (Σ|z_i|²)^d); maximum 0 at the coordinate vertices.
    PowerRatio { degree: u32 },
    /// F = Σ_j w_j ln(Σ_h T_h^{j+1} / (Σ_h T_h)^{j+1}) with T_h the squared
    /// norm of tuple h.
    TupleNormMix { weights: Vec<f64> },
    /// F = |z_j|² / Σ|z_i|². Not invariant; a negative control for the
    /// invariance checks.
    CoordinateWeight { index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionSpec {
    #[serde(flatten)]
    pub family: TestFamily,
    pub epsilon: f64,
    pub shape: TupleShape,
    pub a_m: f64,
}

/// ε·F for one of the families, evaluated from the homogeneous coordinates
/// rescaled so that the largest modulus is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TestField {
    spec: TestFunctionSpec,
}

impl TestField {
    pub fn spec(&self) -> &TestFunctionSpec {
        &self.spec
    }

    /// The same family with a different scale.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<TestField> {
        make_test_function(TestFunctionSpec {
            epsilon,
            ..self.spec.clone()
        })
    }

    fn unscaled(&self, r2: &[f64]) -> f64 {
        let top = r2.iter().copied().fold(0.0, f64::max);
        let r: Vec<f64> = r2.iter().map(|v| v / top).collect();
        let total: f64 = r.iter().sum();
        match &self.spec.family {
            TestFamily::PowerRatio { degree } => {
                let d = *degree as i32;
                r.iter().map(|v| v.powi(d)).sum::<f64>().ln() - d as f64 * total.ln()
            }
            TestFamily::TupleNormMix { weights } => {
                let shape = self.spec.shape;
                let t: Vec<f64> = (0..shape.k())
                    .map(|h| r[shape.tuple_range(h)].iter().sum())
                    .collect();
                weights
                    .iter()
                    .enumerate()
                    .map(|(j, w)| {
                        let e = j as i32 + 2;
                        w * (t.iter().map(|v| v.powi(e)).sum::<f64>().ln() - e as f64 * total.ln())
                    })
                    .sum()
            }
            TestFamily::CoordinateWeight { index } => r[*index] / total,
        }
    }

    /// Whether the family is G_{n,k}-invariant by construction.
    pub fn is_invariant(&self) -> bool {
        !matches!(self.spec.family, TestFamily::CoordinateWeight { .. })
    }
}

impl ScalarField for TestField {
    fn eval(&self, p: &ChartPoint) -> ExtReal {
        if self.spec.epsilon == 0.0 {
            return ExtReal::ZERO;
        }
        let r2: Vec<f64> = p.homogeneous().iter().map(|z| z.norm_sqr()).collect();
        ExtReal::Finite(self.spec.epsilon * self.unscaled(&r2))
    }
}

pub fn make_test_function(spec: TestFunctionSpec) -> Result<TestField> {
    if !(spec.epsilon >= 0.0 && spec.epsilon.is_finite()) {
        return Err(Error::InvalidSpec(format!(
            "epsilon = {} must be a finite non-negative number",
            spec.epsilon
        )));
    }
    if !(spec.a_m > 0.0 && spec.a_m.is_finite()) {
        return Err(Error::InvalidSpec(format!(
            "a_m = {} must be positive",
            spec.a_m
        )));
    }
    match &spec.family {
        TestFamily::PowerRatio { degree } if *degree < 1 => {
            return Err(Error::InvalidSpec(
                "power_ratio degree must be at least 1".into(),
            ))
        }
        TestFamily::TupleNormMix { weights }
            if weights.is_empty() || weights.iter().any(|w| !w.is_finite()) =>
        {
            return Err(Error::InvalidSpec(
                "tuple_norm_mix needs a non-empty list of finite weights".into(),
            ))
        }
        TestFamily::CoordinateWeight { index } if *index >= spec.shape.len() => {
            return Err(Error::InvalidSpec(format!(
                "coordinate index {index} out of range for {} coordinates",
                spec.shape.len()
            )))
        }
        _ => {}
    }
    Ok(TestField { spec })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    /// Largest ε tried; returned as-is when it passes.
    pub upper: f64,
    pub bisection_steps: u32,
    pub margin: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            upper: 16.0,
            bisection_steps: 40,
            margin: CALIBRATION_MARGIN,
        }
    }
}

struct CalibrationPoint {
    metric: HermitianForm,
    hessian: HermitianForm,
    floor: f64,
}

/// Largest ε on the bisection lattice of [0, upper] such that g + ε∂∂̄f keeps
/// λ_min ≥ margin·λ_min(g) at every point of `grid` (moduli points in chart 0).
/// `field` is taken at unit scale; the Hessian is linear in ε, so it is
/// computed once per point.
pub fn calibrate_admissible<F: ScalarField + ?Sized>(
    field: &F,
    metric: &MetricSpec,
    grid: &GridSpec,
    options: CalibrationOptions,
) -> Result<f64> {
    grid.validate()?;
    if !(options.upper > 0.0 && options.upper.is_finite()) {
        return Err(Error::InvalidArgument(
            "calibration upper bound must be positive".into(),
        ));
    }
    let m = metric.shape.m();
    let axis = grid.axis();
    let points: Vec<CalibrationPoint> = (0..grid.len(m))
        .into_par_iter()
        .map(|idx| {
            let p = ChartPoint::from_real(&grid.point(&axis, m, idx), metric.shape)?;
            let g = metric.metric_at(&p)?;
            let floor = options.margin * g.min_eigenvalue();
            Ok(CalibrationPoint {
                hessian: complex_hessian(field, &p, HessianOptions::default())?,
                metric: g,
                floor,
            })
        })
        .collect::<Result<_>>()?;
    let passes = |eps: f64| {
        points
            .par_iter()
            .all(|c| c.metric.add(&c.hessian.scaled(eps)).min_eigenvalue() >= c.floor)
    };
    if !passes(0.0) {
        return Err(Error::NeverAdmissible);
    }
    if passes(options.upper) {
        return Ok(options.upper);
    }
    let (mut lo, mut hi) = (0.0, options.upper);
    for _ in 0..options.bisection_steps {
        let mid = 0.5 * (lo + hi);
        if passes(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// `inner − sup`, with the sup estimate and where it was found.
#[derive(Debug, Clone)]
pub struct NormalizedField<F> {
    inner: F,
    pub sup: f64,
    /// Moduli of the maximizing point [1, x_1, .., x_m].
    pub argmax: Vec<f64>,
    /// Increase of the sup estimate from local refinement over the best grid
    /// value; a large gain means the grid was too coarse.
    pub refinement_gain: f64,
}

impl<F> NormalizedField<F> {
    pub fn inner(&self) -> &F {
        &self.inner
    }
}

impl<F: ScalarField> ScalarField for NormalizedField<F> {
    fn eval(&self, p: &ChartPoint) -> ExtReal {
        self.inner.eval(p) + (-self.sup)
    }

    fn in_domain(&self, p: &ChartPoint) -> bool {
        self.inner.in_domain(p)
    }
}

// −∞ is a legitimate value (never the max); +∞ means f is unbounded above.
fn eval_moduli<F: ScalarField + ?Sized>(f: &F, x: &[f64], shape: TupleShape) -> Result<f64> {
    let p = ChartPoint::from_real(x, shape)?;
    match f.eval(&p) {
        ExtReal::PosInf => Err(Error::EvaluationFailed(format!("+inf at {x:?}"))),
        v => Ok(v.to_f64()),
    }
}

/// Estimates sup f over the moduli cube (which covers ℙ_m for invariant f)
/// on `grid`, then refines by a compass search clamped to the cube.
pub fn normalize_sup<F: ScalarField>(
    field: F,
    shape: TupleShape,
    grid: &GridSpec,
) -> Result<NormalizedField<F>> {
    grid.validate()?;
    let m = shape.m();
    let axis = grid.axis();
    let values: Vec<f64> = (0..grid.len(m))
        .into_par_iter()
        .map(|idx| eval_moduli(&field, &grid.point(&axis, m, idx), shape))
        .collect::<Result<_>>()?;
    let mut best_idx = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best_idx] {
            best_idx = i;
        }
    }
    let grid_best = values[best_idx];
    if grid_best == f64::NEG_INFINITY {
        return Err(Error::EvaluationFailed(
            "field is -inf on the whole grid".into(),
        ));
    }
    let mut x = grid.point(&axis, m, best_idx);
    let mut best = grid_best;
    let lower = axis[0];
    let mut step = axis.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    while step > 1e-12 {
        let mut improved = false;
        for i in 0..m {
            for dir in [1.0, -1.0] {
                let mut y = x.clone();
                y[i] = (y[i] + dir * step).clamp(lower, 1.0);
                if y[i] == x[i] {
                    continue;
                }
                let v = eval_moduli(&field, &y, shape)?;
                if v > best {
                    best = v;
                    x = y;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok(NormalizedField {
        inner: field,
        sup: best,
        argmax: x,
        refinement_gain: best - grid_best,
    })
}
