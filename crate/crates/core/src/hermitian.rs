//! Complex Hessians by central finite differences and positive-definiteness
//! of Hermitian forms.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::ser::{SerializeSeq, Serializer};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::projective::{ChartPoint, ProjectivePoint};

/// Hermitian symmetry tolerance, relative to the larger entry magnitude.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Default tolerance for [`is_positive_definite`].
pub const PD_TOL: f64 = 1e-8;

/// A real function of chart coordinates, possibly −∞.
///
/// Implementations must be deterministic: the same point gives bit-identical
/// output. Fields that are genuinely defined on ℙ_m should give the same value
/// in every chart.
pub trait ScalarField: Send + Sync {
    fn eval(&self, p: &ChartPoint) -> ExtReal;

    fn in_domain(&self, _p: &ChartPoint) -> bool {
        true
    }

    /// Evaluates at a projective point through its best-conditioned chart.
    fn eval_projective(&self, p: &ProjectivePoint) -> ExtReal {
        self.eval(&p.best_chart())
    }
}

impl<F: ScalarField + ?Sized> ScalarField for &F {
    fn eval(&self, p: &ChartPoint) -> ExtReal {
        (**self).eval(p)
    }
    fn in_domain(&self, p: &ChartPoint) -> bool {
        (**self).in_domain(p)
    }
}

impl<F: ScalarField + ?Sized> ScalarField for Box<F> {
    fn eval(&self, p: &ChartPoint) -> ExtReal {
        (**self).eval(p)
    }
    fn in_domain(&self, p: &ChartPoint) -> bool {
        (**self).in_domain(p)
    }
}

/// Wraps a closure as a [`ScalarField`].
pub struct FnField<F> {
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(&ChartPoint) -> ExtReal + Send + Sync,
{
    pub fn new(f: F) -> Self {
        FnField { f }
    }
}

impl<F> ScalarField for FnField<F>
where
    F: Fn(&ChartPoint) -> ExtReal + Send + Sync,
{
    fn eval(&self, p: &ChartPoint) -> ExtReal {
        (self.f)(p)
    }
}

/// Negation of another field.
pub struct Negated<F>(pub F);

impl<F: ScalarField> ScalarField for Negated<F> {
    fn eval(&self, p: &ChartPoint) -> ExtReal {
        -self.0.eval(p)
    }
    fn in_domain(&self, p: &ChartPoint) -> bool {
        self.0.in_domain(p)
    }
}

/// A complex Hermitian matrix, entries `[λ][μ]` ~ ∂²/∂z_λ∂z̄_μ.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianForm {
    entries: DMatrix<Complex64>,
}

fn hermitian_defect(m: &DMatrix<Complex64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            let a = m[(i, j)];
            let b = m[(j, i)];
            let scale = a.norm().max(b.norm());
            let diff = (a - b.conj()).norm();
            if diff > HERMITIAN_TOL * scale {
                worst = worst.max(if scale > 0.0 {
                    diff / scale
                } else {
                    f64::INFINITY
                });
            }
        }
    }
    worst
}

impl HermitianForm {
    /// Checks Hermitian symmetry within [`HERMITIAN_TOL`] (relative).
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::ShapeMismatch {
                expected: entries.nrows(),
                got: entries.ncols(),
            });
        }
        let defect = hermitian_defect(&entries);
        if defect > 0.0 {
            return Err(Error::NotHermitian(defect));
        }
        Ok(HermitianForm { entries })
    }

    /// (A + Aᴴ)/2, exactly Hermitian.
    pub fn symmetrized(raw: DMatrix<Complex64>) -> Self {
        let half = Complex64::new(0.5, 0.0);
        let mut entries = (&raw + raw.adjoint()) * half;
        for i in 0..entries.nrows() {
            entries[(i, i)].im = 0.0;
        }
        HermitianForm { entries }
    }

    pub fn identity(dim: usize) -> Self {
        HermitianForm {
            entries: DMatrix::identity(dim, dim),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut entries = DMatrix::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            entries[(i, i)] = Complex64::new(d, 0.0);
        }
        HermitianForm { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[(row, col)]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.entries[(i, i)].re).sum()
    }

    pub fn add(&self, other: &HermitianForm) -> HermitianForm {
        HermitianForm {
            entries: &self.entries + &other.entries,
        }
    }

    pub fn scaled(&self, c: f64) -> HermitianForm {
        HermitianForm {
            entries: &self.entries * Complex64::new(c, 0.0),
        }
    }

    /// Real eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .entries
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(f64::INFINITY)
    }

    pub fn determinant(&self) -> f64 {
        self.entries.clone().determinant().re
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// ‖self − reference‖_F / ‖reference‖_F.
    pub fn relative_deviation(&self, reference: &HermitianForm) -> f64 {
        let diff: f64 = self
            .entries
            .iter()
            .zip(reference.entries.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        diff / reference.frobenius_norm()
    }
}

impl Serialize for HermitianForm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.dim();
        let rows: Vec<Vec<[f64; 2]>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let z = self.entries[(i, j)];
                        [z.re, z.im]
                    })
                    .collect()
            })
            .collect();
        let mut seq = s.serialize_seq(Some(n))?;
        for row in &rows {
            seq.serialize_element(row)?;
        }
        seq.end()
    }
}

/// Smallest eigenvalue strictly above `tol · (1 + |trace|)`.
pub fn is_positive_definite(h: &HermitianForm, tol: f64) -> bool {
    h.min_eigenvalue() > tol * (1.0 + h.trace().abs())
}

/// Finite-difference settings for [`complex_hessian`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HessianOptions {
    /// Step in each real coordinate; `None` means `1e-4 · (1 + |p|∞)`.
    pub step: Option<f64>,
    /// Combine steps h and h/2 as (4·H(h/2) − H(h))/3.
    pub richardson: bool,
}

impl HessianOptions {
    pub fn with_step(step: f64) -> Self {
        HessianOptions {
            step: Some(step),
            richardson: false,
        }
    }

    pub fn step_for(&self, p: &ChartPoint) -> f64 {
        self.step.unwrap_or(1e-4 * (1.0 + p.sup_norm()))
    }
}

fn sample<F: ScalarField + ?Sized>(f: &F, p: &ChartPoint, shifts: &[(usize, f64)]) -> Result<f64> {
    let m = p.affine().len();
    let mut affine = p.affine().to_vec();
    for &(axis, delta) in shifts {
        if axis < m {
            affine[axis].re += delta;
        } else {
            affine[axis - m].im += delta;
        }
    }
    match f.eval(&p.with_affine(affine)) {
        ExtReal::Finite(v) if v.is_finite() => Ok(v),
        _ => Err(Error::NonFiniteSample),
    }
}

// Real Hessian over (u_1..u_m, v_1..v_m), central differences.
fn real_hessian<F: ScalarField + ?Sized>(f: &F, p: &ChartPoint, h: f64) -> Result<DMatrix<f64>> {
    let dim = 2 * p.affine().len();
    let f0 = sample(f, p, &[])?;
    let mut out = DMatrix::zeros(dim, dim);
    for a in 0..dim {
        let fp = sample(f, p, &[(a, h)])?;
        let fm = sample(f, p, &[(a, -h)])?;
        out[(a, a)] = (fp - 2.0 * f0 + fm) / (h * h);
        for b in a + 1..dim {
            let fpp = sample(f, p, &[(a, h), (b, h)])?;
            let fpm = sample(f, p, &[(a, h), (b, -h)])?;
            let fmp = sample(f, p, &[(a, -h), (b, h)])?;
            let fmm = sample(f, p, &[(a, -h), (b, -h)])?;
            let v = ((fpp - fpm) - (fmp - fmm)) / (4.0 * h * h);
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
    Ok(out)
}

fn complex_from_real(r: &DMatrix<f64>, m: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(m, m, |l, u| {
        let re = r[(l, u)] + r[(m + l, m + u)];
        let im = r[(l, m + u)] - r[(m + l, u)];
        Complex64::new(0.25 * re, 0.25 * im)
    })
}

/// ∂²f/∂z_λ∂z̄_μ at `p` in the chart of `p`, symmetrized to exact Hermitian.
pub fn complex_hessian<F: ScalarField + ?Sized>(
    f: &F,
    p: &ChartPoint,
    opts: HessianOptions,
) -> Result<HermitianForm> {
    let m = p.affine().len();
    let h = opts.step_for(p);
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("step {h}")));
    }
    let mut real = real_hessian(f, p, h)?;
    if opts.richardson {
        let fine = real_hessian(f, p, 0.5 * h)?;
        real = (fine * 4.0 - real) / 3.0;
    }
    Ok(HermitianForm::symmetrized(complex_from_real(&real, m)))
}
