//! Extremal functions ψ, ψ̃, ψ_M, ψ̃_M and the geometric-mean reduction chain
//! that bounds G_{n,k}-invariant admissible functions from below.
//!
//! For an admissible invariant φ, the difference φ − ψ can only decrease when
//! the moduli of a tuple are replaced by their geometric mean (first block:
//! the n − 1 free moduli; other blocks: all n), then when the tuple means
//! ζ_1..ζ_{k−1} are replaced by their geometric mean γ, and finally when the
//! point is moved to [1, .., 1]. With sup φ = 0 the value at [1, .., 1] is
//! non-negative, which gives φ ≥ ψ everywhere.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::grid::GridSpec;
use crate::hermitian::ScalarField;
use crate::projective::{
    lift_to_m, make_real_point, ChartPoint, MPoint, ProjectivePoint, TupleShape,
};

fn psi_from_moduli_sqr(r2: &[f64], a_m: f64) -> ExtReal {
    if r2.contains(&0.0) {
        return ExtReal::NegInf;
    }
    let m1 = r2.len() as f64;
    let total: f64 = r2.iter().sum();
    let logs: f64 = r2.iter().map(|r| r.ln()).sum();
    ExtReal::Finite(a_m / m1 * logs - a_m * total.ln())
}

fn psi_tilde_from_moduli_sqr(r2: &[f64], a_m: f64) -> ExtReal {
    if r2[0] == 0.0 {
        return ExtReal::NegInf;
    }
    let total: f64 = r2.iter().sum();
    ExtReal::Finite(a_m * (r2[0].ln() - total.ln()))
}

/// ψ = ln[(|z_0|⋯|z_m|)^{2a_m/(m+1)} / (Σ|z_i|²)^{a_m}]; −∞ on coordinate
/// hyperplanes.
pub fn eval_psi(p: &ProjectivePoint, a_m: f64) -> ExtReal {
    let r2: Vec<f64> = p.coords().iter().map(|z| z.norm_sqr()).collect();
    psi_from_moduli_sqr(&r2, a_m)
}

/// ψ̃ = ln[|z_0|^{2a_m} / (Σ|z_i|²)^{a_m}]; maximum 0 at [1, 0, .., 0].
pub fn eval_psi_tilde(p: &ProjectivePoint, a_m: f64) -> ExtReal {
    let r2: Vec<f64> = p.coords().iter().map(|z| z.norm_sqr()).collect();
    psi_tilde_from_moduli_sqr(&r2, a_m)
}

/// ψ_M in the primed coordinates z'_i = ζ_h z_i:
/// ln[(Σ|z'|²)^{−k} Π|z'_i|² / Π_h |Z'_h|^{2(n−1)}].
pub fn eval_psi_m(p: &MPoint) -> ExtReal {
    let shape = p.shape();
    let r2: Vec<f64> = p.primed_coords().iter().map(|z| z.norm_sqr()).collect();
    if r2.contains(&0.0) {
        return ExtReal::NegInf;
    }
    let total: f64 = r2.iter().sum();
    let mut v = -(shape.k() as f64) * total.ln() + r2.iter().map(|r| r.ln()).sum::<f64>();
    if shape.n() >= 2 {
        let w = (shape.n() - 1) as f64;
        for h in 0..shape.k() {
            let t: f64 = r2[shape.tuple_range(h)].iter().sum();
            v -= w * t.ln();
        }
    }
    ExtReal::Finite(v)
}

/// ψ̃_M in primed coordinates: the distinguished coordinates are z'_0 (with
/// exponent 2k + 2(n−1)) and the first coordinate z'_{hn} of every later tuple
/// (exponent 2(n−1)).
pub fn eval_psi_tilde_m(p: &MPoint) -> ExtReal {
    let shape = p.shape();
    let (n, k) = (shape.n(), shape.k());
    let r2: Vec<f64> = p.primed_coords().iter().map(|z| z.norm_sqr()).collect();
    let w = (n - 1) as f64;
    if r2[0] == 0.0 || (n >= 2 && (0..k).any(|h| r2[h * n] == 0.0)) {
        return ExtReal::NegInf;
    }
    let total: f64 = r2.iter().sum();
    let mut v = k as f64 * (r2[0].ln() - total.ln());
    if n >= 2 {
        for h in 0..k {
            let t: f64 = r2[shape.tuple_range(h)].iter().sum();
            v += w * (r2[h * n].ln() - t.ln());
        }
    }
    ExtReal::Finite(v)
}

/// ψ as a field on charts, read from the homogeneous coordinates.
#[derive(Debug, Clone, Copy)]
pub struct Psi {
    pub a_m: f64,
}

impl ScalarField for Psi {
    fn eval(&self, p: &ChartPoint) -> ExtReal {
        let r2: Vec<f64> = p.homogeneous().iter().map(|z| z.norm_sqr()).collect();
        psi_from_moduli_sqr(&r2, self.a_m)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PsiTilde {
    pub a_m: f64,
}

impl ScalarField for PsiTilde {
    fn eval(&self, p: &ChartPoint) -> ExtReal {
        let r2: Vec<f64> = p.homogeneous().iter().map(|z| z.norm_sqr()).collect();
        psi_tilde_from_moduli_sqr(&r2, self.a_m)
    }
}

/// ψ_M on the chart of ℙ_m that parametrizes M near points with nonzero tuples.
#[derive(Debug, Clone, Copy)]
pub struct PsiM;

impl ScalarField for PsiM {
    fn eval(&self, p: &ChartPoint) -> ExtReal {
        match lift_to_m(&p.to_projective()) {
            Ok(mp) => eval_psi_m(&mp),
            Err(_) => ExtReal::NegInf,
        }
    }
}

fn check_unit_interval(x: &[f64]) -> Result<()> {
    match x.iter().find(|&&v| !(v > 0.0 && v <= 1.0)) {
        Some(&v) => Err(Error::OutOfRange(v)),
        None => Ok(()),
    }
}

fn geometric_mean(x: &[f64]) -> f64 {
    x.iter().product::<f64>().powf(1.0 / x.len() as f64)
}

/// Tuple geometric means of the moduli x_1..x_m of [1, x_1, .., x_m]: ζ_0 over
/// the n − 1 free moduli of the first tuple (`None` when n = 1), and ζ_h over
/// the n moduli of tuple h ≥ 1.
pub fn tuple_means(x: &[f64], shape: TupleShape) -> Result<(Option<f64>, Vec<f64>)> {
    if x.len() != shape.m() {
        return Err(Error::ShapeMismatch {
            expected: shape.m(),
            got: x.len(),
        });
    }
    check_unit_interval(x)?;
    let n = shape.n();
    let zeta0 = (n >= 2).then(|| geometric_mean(&x[..n - 1]));
    let rest = (1..shape.k())
        .map(|h| geometric_mean(&x[h * n - 1..(h + 1) * n - 1]))
        .collect();
    Ok((zeta0, rest))
}

/// First reduction: every tuple replaced by its geometric mean, repeated.
pub fn lemma1_reduce(x: &[f64], shape: TupleShape) -> Result<Vec<f64>> {
    let (zeta0, zetas) = tuple_means(x, shape)?;
    let n = shape.n();
    let mut out = Vec::with_capacity(x.len());
    if let Some(z0) = zeta0 {
        out.extend(std::iter::repeat_n(z0, n - 1));
    }
    for z in zetas {
        out.extend(std::iter::repeat_n(z, n));
    }
    Ok(out)
}

/// Second reduction: γ = (ζ_1 ⋯ ζ_{k−1})^{1/(k−1)}.
pub fn lemma2_reduce(zetas: &[f64]) -> Result<f64> {
    if zetas.is_empty() {
        return Err(Error::InvalidArgument("no tuple means to reduce".into()));
    }
    check_unit_interval(zetas)?;
    Ok(geometric_mean(zetas))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageLabel {
    Input,
    Lemma1,
    Lemma2,
    Lemma3Target,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceStage {
    pub label: StageLabel,
    /// Moduli x_1..x_m of the stage point [1, x_1, .., x_m].
    pub moduli: Vec<f64>,
    pub point: ProjectivePoint,
    /// (φ − ψ) at the stage point.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionTrace {
    pub stages: Vec<TraceStage>,
}

impl ReductionTrace {
    /// Number of consecutive stage pairs where the gap rises by more than `tol`.
    pub fn violations(&self, tol: f64) -> usize {
        self.stages
            .windows(2)
            .filter(|w| w[1].gap > w[0].gap + tol)
            .count()
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.stages.iter().map(|s| s.gap).collect()
    }
}

fn gap_at<F: ScalarField + ?Sized>(f: &F, x: &[f64], shape: TupleShape, a_m: f64) -> Result<f64> {
    let p = ChartPoint::from_real(x, shape)?;
    if !f.in_domain(&p) {
        return Err(Error::EvaluationFailed(format!("outside domain at {x:?}")));
    }
    let phi = f.eval(&p);
    let psi = Psi { a_m }.eval(&p);
    match phi.checked_sub(psi) {
        Some(ExtReal::Finite(g)) => Ok(g),
        _ => Err(Error::EvaluationFailed(format!(
            "phi - psi not finite at {x:?} (phi = {phi}, psi = {psi})"
        ))),
    }
}

/// Moves moduli with entries above 1 into the unit cube through the group
/// action (largest coordinate to position 0).
pub fn normalize_moduli(x: &[f64], shape: TupleShape) -> Result<Vec<f64>> {
    if x.iter().all(|&v| v <= 1.0) {
        return Ok(x.to_vec());
    }
    let mut homog = Vec::with_capacity(x.len() + 1);
    homog.push(1.0);
    homog.extend_from_slice(x);
    Ok(make_real_point(&homog, shape)?.to_unit_cube())
}

/// Evaluates (φ − ψ) along input → first reduction → second reduction →
/// [1, .., 1]. Moduli above 1 are first moved into the unit cube.
pub fn reduction_chain<F: ScalarField + ?Sized>(
    f: &F,
    x: &[f64],
    shape: TupleShape,
    a_m: f64,
) -> Result<ReductionTrace> {
    if x.len() != shape.m() {
        return Err(Error::ShapeMismatch {
            expected: shape.m(),
            got: x.len(),
        });
    }
    if let Some(&v) = x.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::OutOfRange(v));
    }
    let x = normalize_moduli(x, shape)?;
    let (zeta0, zetas) = tuple_means(&x, shape)?;
    let first = lemma1_reduce(&x, shape)?;
    let gamma = lemma2_reduce(&zetas)?;
    let n = shape.n();
    let mut second = Vec::with_capacity(x.len());
    if let Some(z0) = zeta0 {
        second.extend(std::iter::repeat_n(z0, n - 1));
    }
    second.extend(std::iter::repeat_n(gamma, (shape.k() - 1) * n));
    let target = vec![1.0; x.len()];

    let stages = [
        (StageLabel::Input, x),
        (StageLabel::Lemma1, first),
        (StageLabel::Lemma2, second),
        (StageLabel::Lemma3Target, target),
    ]
    .into_iter()
    .map(|(label, moduli)| {
        let gap = gap_at(f, &moduli, shape, a_m)?;
        let point = ChartPoint::from_real(&moduli, shape)?.to_projective();
        Ok(TraceStage {
            label,
            moduli,
            point,
            gap,
        })
    })
    .collect::<Result<Vec<_>>>()?;
    Ok(ReductionTrace { stages })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeTolerances {
    /// Pass requires min (φ − ψ) ≥ −gap.
    pub gap: f64,
    /// Allowed rise of (φ − ψ) between consecutive chain stages.
    pub monotone: f64,
}

impl Default for EnvelopeTolerances {
    fn default() -> Self {
        EnvelopeTolerances {
            gap: 1e-6,
            monotone: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSample {
    pub moduli: Vec<f64>,
    pub gap: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub min_gap: f64,
    /// Moduli vector where the minimum is attained (lowest grid index on ties).
    pub argmin: Vec<f64>,
    pub violations: usize,
    pub points: usize,
    pub grid_spec: GridSpec,
    pub shape: TupleShape,
    pub tolerances: EnvelopeTolerances,
    pub passed: bool,
}

/// Runs the reduction chain at every grid point, in parallel; output is in
/// grid order.
pub fn scan_envelope<F: ScalarField + ?Sized>(
    f: &F,
    shape: TupleShape,
    a_m: f64,
    grid: &GridSpec,
    monotone_tol: f64,
) -> Result<Vec<GridSample>> {
    grid.validate()?;
    if grid.delta <= 0.0 {
        return Err(Error::InvalidArgument(
            "envelope grid must stay off the coordinate hyperplanes (delta > 0)".into(),
        ));
    }
    let m = shape.m();
    let axis = grid.axis();
    (0..grid.len(m))
        .into_par_iter()
        .map(|idx| {
            let x = grid.point(&axis, m, idx);
            let trace = reduction_chain(f, &x, shape, a_m)?;
            Ok(GridSample {
                gap: trace.stages[0].gap,
                violations: trace.violations(monotone_tol),
                moduli: x,
            })
        })
        .collect()
}

pub fn summarize_scan(
    samples: &[GridSample],
    shape: TupleShape,
    grid: &GridSpec,
    tolerances: EnvelopeTolerances,
) -> EnvelopeReport {
    let mut best: Option<&GridSample> = None;
    for s in samples {
        if best.is_none_or(|b| s.gap < b.gap) {
            best = Some(s);
        }
    }
    let min_gap = best.map_or(f64::INFINITY, |b| b.gap);
    let violations = samples.iter().map(|s| s.violations).sum();
    EnvelopeReport {
        min_gap,
        argmin: best.map(|b| b.moduli.clone()).unwrap_or_default(),
        violations,
        points: samples.len(),
        grid_spec: *grid,
        shape,
        tolerances,
        passed: min_gap >= -tolerances.gap && violations == 0,
    }
}

/// Grid check of φ ≥ ψ together with chain monotonicity.
pub fn verify_envelope<F: ScalarField + ?Sized>(
    f: &F,
    shape: TupleShape,
    a_m: f64,
    grid: &GridSpec,
    tolerances: EnvelopeTolerances,
) -> Result<EnvelopeReport> {
    let samples = scan_envelope(f, shape, a_m, grid, tolerances.monotone)?;
    Ok(summarize_scan(&samples, shape, grid, tolerances))
}

/// (φ − ψ)([1, .., 1]) = φ([1, .., 1]) + a_m ln(m + 1).
pub fn verify_center_bound<F: ScalarField + ?Sized>(
    f: &F,
    shape: TupleShape,
    a_m: f64,
) -> Result<f64> {
    gap_at(f, &vec![1.0; shape.m()], shape, a_m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{fs_metric, gm_metric};
    use crate::hermitian::{complex_hessian, FnField, HessianOptions, Negated};
    use crate::projective::{make_point, Generator};
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn shape(n: usize, k: usize) -> TupleShape {
        TupleShape::new(n, k).unwrap()
    }

    fn pt(x: &[f64], s: TupleShape) -> ProjectivePoint {
        make_real_point(x, s).unwrap()
    }

    #[test]
    fn psi_maximum_value() {
        let s = shape(2, 2);
        let v = eval_psi(&pt(&[1.0; 4], s), 4.0).finite().unwrap();
        assert!((v + 4.0 * 4f64.ln()).abs() < 1e-14);
        assert_eq!(
            eval_psi(&pt(&[1.0, 0.0, 1.0, 1.0], s), 4.0),
            ExtReal::NegInf
        );
        let torus = make_point(
            vec![
                Complex64::new(1.0, 0.0),
                Complex64::from_polar(1.0, 0.7),
                Complex64::from_polar(1.0, -2.1),
                Complex64::new(1.0, 0.0),
            ],
            s,
        )
        .unwrap();
        let v = eval_psi(&torus, 4.0).finite().unwrap();
        assert!((v + 4.0 * 4f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn psi_tilde_values() {
        let s = shape(2, 2);
        assert_eq!(
            eval_psi_tilde(&pt(&[1.0, 0.0, 0.0, 0.0], s), 4.0),
            ExtReal::ZERO
        );
        assert_eq!(
            eval_psi_tilde(&pt(&[0.0, 1.0, 0.0, 0.0], s), 4.0),
            ExtReal::NegInf
        );
        let v = eval_psi_tilde(&pt(&[1.0; 4], s), 4.0).finite().unwrap();
        assert!((v + 4.0 * 4f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn psi_m_values() {
        let s = shape(2, 2);
        let ones = lift_to_m(&pt(&[1.0; 4], s)).unwrap();
        let v = eval_psi_m(&ones).finite().unwrap();
        assert!((v + 64f64.ln()).abs() < 1e-14);
        let vt = eval_psi_tilde_m(&ones).finite().unwrap();
        assert!((vt + 64f64.ln()).abs() < 1e-14);

        let hole = lift_to_m(&pt(&[1.0, 1.0, 0.0, 1.0], s)).unwrap();
        assert_eq!(eval_psi_m(&hole), ExtReal::NegInf);

        // z_1 = 0 is not distinguished for the tilde variant: 3^{-2}/(1·2)
        let z1 = lift_to_m(&pt(&[1.0, 0.0, 1.0, 1.0], s)).unwrap();
        let vt = eval_psi_tilde_m(&z1).finite().unwrap();
        assert!((vt + 18f64.ln()).abs() < 1e-14);
        let z0 = lift_to_m(&pt(&[0.0, 1.0, 1.0, 1.0], s)).unwrap();
        assert_eq!(eval_psi_tilde_m(&z0), ExtReal::NegInf);
    }

    #[test]
    fn psi_m_ignores_factor_scaling() {
        let s = shape(2, 2);
        let base = pt(&[1.0, 0.5, 0.3, 0.9], s);
        let lifted = lift_to_m(&base).unwrap();
        let c = |re: f64| Complex64::new(re, 0.0);
        let scaled = MPoint::new(base, vec![vec![c(7.0), c(3.5)], vec![c(0.3), c(0.9)]]).unwrap();
        let a = eval_psi_m(&lifted).finite().unwrap();
        let b = eval_psi_m(&scaled).finite().unwrap();
        assert!((a - b).abs() < 1e-13);
    }

    #[test]
    fn psi_m_is_psi_for_singleton_tuples() {
        // n = 1: ψ_M reduces to ψ with a_m = k = m + 1
        let s = shape(1, 3);
        let p = pt(&[1.0, 0.4, 0.8], s);
        let a = eval_psi_m(&lift_to_m(&p).unwrap()).finite().unwrap();
        let b = eval_psi(&p, 3.0).finite().unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn lemma1_examples() {
        let s = shape(2, 2);
        let r = lemma1_reduce(&[0.5, 0.04, 0.25], s).unwrap();
        let want = [0.5, 0.1, 0.1];
        for (a, b) in r.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(lemma1_reduce(&[1.0; 3], s).unwrap(), vec![1.0; 3]);
        let s13 = shape(1, 3);
        assert_eq!(lemma1_reduce(&[0.3, 0.7], s13).unwrap(), vec![0.3, 0.7]);
        assert_eq!(
            lemma1_reduce(&[0.0, 0.5, 0.5], s).unwrap_err(),
            Error::OutOfRange(0.0)
        );
        assert_eq!(
            lemma1_reduce(&[1.5, 0.5, 0.5], s).unwrap_err(),
            Error::OutOfRange(1.5)
        );
    }

    #[test]
    fn lemma2_examples() {
        assert!((lemma2_reduce(&[0.04, 0.25]).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(lemma2_reduce(&[0.37]).unwrap(), 0.37);
        assert_eq!(lemma2_reduce(&[1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert!(lemma2_reduce(&[0.5, 2.0]).is_err());
    }

    #[test]
    fn chain_of_psi_is_identically_zero() {
        let s = shape(2, 3);
        let trace = reduction_chain(&Psi { a_m: 6.0 }, &[0.3, 0.5, 0.2, 0.9, 0.4], s, 6.0).unwrap();
        assert_eq!(trace.stages.len(), 4);
        assert!(trace.gaps().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn chain_at_center_is_flat() {
        let s = shape(2, 2);
        let zero = FnField::new(|_: &ChartPoint| ExtReal::ZERO);
        let trace = reduction_chain(&zero, &[1.0; 3], s, 4.0).unwrap();
        let g = trace.gaps();
        assert!(g.iter().all(|&v| v == g[0]));
        assert!(trace.stages.iter().all(|st| st.moduli == vec![1.0; 3]));
    }

    #[test]
    fn chain_stage_shapes() {
        let s = shape(3, 3);
        let x = [0.2, 0.8, 0.3, 0.6, 0.9, 0.1, 0.5, 0.7];
        let zero = FnField::new(|_: &ChartPoint| ExtReal::ZERO);
        let trace = reduction_chain(&zero, &x, s, 9.0).unwrap();
        let second = &trace.stages[2].moduli;
        let z0 = (0.2f64 * 0.8).sqrt();
        let gamma =
            ((0.3f64 * 0.6 * 0.9).powf(1.0 / 3.0) * (0.1f64 * 0.5 * 0.7).powf(1.0 / 3.0)).sqrt();
        assert!((second[0] - z0).abs() < 1e-15 && (second[1] - z0).abs() < 1e-15);
        assert!(second[2..].iter().all(|v| (v - gamma).abs() < 1e-14));
        // the zero field is admissible and invariant, so the chain cannot rise
        assert_eq!(trace.violations(0.0), 0);
    }

    #[test]
    fn chain_normalizes_large_moduli() {
        let s = shape(2, 2);
        let zero = FnField::new(|_: &ChartPoint| ExtReal::ZERO);
        let trace = reduction_chain(&zero, &[0.5, 4.0, 2.0], s, 4.0).unwrap();
        assert!(trace.stages[0].moduli.iter().all(|&v| v > 0.0 && v <= 1.0));
        // ψ is invariant, so the gap at the moved point equals the original one
        let direct = -Psi { a_m: 4.0 }
            .eval(&ChartPoint::from_real(&[0.5, 4.0, 2.0], s).unwrap())
            .finite()
            .unwrap();
        assert!((trace.stages[0].gap - direct).abs() < 1e-12);
    }

    #[test]
    fn zero_field_envelope() {
        let s = shape(2, 2);
        let zero = FnField::new(|_: &ChartPoint| ExtReal::ZERO);
        let rep = verify_envelope(
            &zero,
            s,
            4.0,
            &GridSpec::log(1e-3, 9),
            EnvelopeTolerances::default(),
        )
        .unwrap();
        assert!((rep.min_gap - 4.0 * 4f64.ln()).abs() < 1e-12);
        assert_eq!(rep.argmin, vec![1.0; 3]);
        assert_eq!(rep.violations, 0);
        assert!(rep.passed);
        let c = verify_center_bound(&zero, s, 4.0).unwrap();
        assert!((c - 4.0 * 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn envelope_rejects_floor_zero() {
        let zero = FnField::new(|_: &ChartPoint| ExtReal::ZERO);
        assert!(verify_envelope(
            &zero,
            shape(2, 2),
            4.0,
            &GridSpec::linear(0.0, 5),
            EnvelopeTolerances::default()
        )
        .is_err());
    }

    #[test]
    fn psi_hessian_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (n, k) in [(1, 2), (2, 2)] {
            let s = shape(n, k);
            let a_m = (s.m() + 1) as f64;
            for _ in 0..10 {
                let affine = (0..s.m())
                    .map(|_| {
                        Complex64::from_polar(
                            rng.random_range(0.3..1.4),
                            rng.random_range(0.0..TAU),
                        )
                    })
                    .collect();
                let p = ChartPoint::new(0, affine, s).unwrap();
                let h =
                    complex_hessian(&Negated(Psi { a_m }), &p, HessianOptions::default()).unwrap();
                assert!(h.relative_deviation(&fs_metric(&p, a_m)) < 1e-5);
            }
        }
    }

    #[test]
    fn psi_m_hessian_identity() {
        let s = shape(2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let affine = (0..3)
                .map(|_| {
                    Complex64::from_polar(rng.random_range(0.3..1.4), rng.random_range(0.0..TAU))
                })
                .collect();
            let p = ChartPoint::new(0, affine, s).unwrap();
            let h = complex_hessian(&Negated(PsiM), &p, HessianOptions::default()).unwrap();
            assert!(h.relative_deviation(&gm_metric(&p).unwrap()) < 1e-5);
        }
    }

    #[test]
    fn psi_m_invariant_under_induced_group() {
        let s = shape(2, 2);
        let p = lift_to_m(&pt(&[1.0, 0.6, 0.3, 0.8], s)).unwrap();
        let a = eval_psi_m(&p).finite().unwrap();
        for g in [
            Generator::Sigma { i: 0, j: 1 },
            Generator::Tau {
                index: 2,
                theta: 1.1,
            },
            Generator::Gamma { p: 2, q: 3 },
        ] {
            let b = eval_psi_m(&p.apply(&g).unwrap()).finite().unwrap();
            assert!((a - b).abs() < 1e-13);
        }
    }

    proptest! {
        #[test]
        fn psi_scale_invariant(re in prop::collection::vec(0.05f64..3.0, 4),
                               ph in prop::collection::vec(0.0f64..TAU, 4),
                               lr in 0.01f64..100.0, lp in 0.0f64..TAU) {
            let s = shape(2, 2);
            let coords: Vec<Complex64> = re.iter().zip(&ph).map(|(&r, &t)| Complex64::from_polar(r, t)).collect();
            let lambda = Complex64::from_polar(lr, lp);
            let p = make_point(coords.clone(), s).unwrap();
            let q = make_point(coords.iter().map(|z| z * lambda).collect(), s).unwrap();
            let a = eval_psi(&p, 4.0).finite().unwrap();
            let b = eval_psi(&q, 4.0).finite().unwrap();
            prop_assert!((a - b).abs() <= 1e-13 * (1.0 + a.abs()));
        }

        #[test]
        fn psi_bounded_by_its_maximum(x in prop::collection::vec(0.001f64..=1.0, 5)) {
            let s = shape(3, 2);
            let mut h = vec![1.0];
            h.extend_from_slice(&x);
            let v = eval_psi(&pt(&h, s), 6.0).finite().unwrap();
            let max = -6.0 * 6f64.ln();
            prop_assert!(v <= max + 1e-12);
            if x.iter().any(|&v| v < 0.999) {
                prop_assert!(v < max);
            }
        }

        #[test]
        fn lemma1_preserves_tuple_products(x in prop::collection::vec(0.001f64..=1.0, 8)) {
            let s = shape(3, 3);
            let r = lemma1_reduce(&x, s).unwrap();
            let blocks: [std::ops::Range<usize>; 3] = [0..2, 2..5, 5..8];
            for b in blocks {
                let before: f64 = x[b.clone()].iter().product();
                let after: f64 = r[b].iter().product();
                prop_assert!((after / before - 1.0).abs() < 1e-14);
            }
        }
    }
}
