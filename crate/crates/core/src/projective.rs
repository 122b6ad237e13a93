//! Homogeneous and affine coordinates on ℙ_m(ℂ) with m = kn − 1, the symmetry
//! group generated by tuple swaps, phase rotations and within-tuple swaps, and
//! the lift to the incidence manifold M ⊂ ℙ_m × (ℙ_{n−1})^k.

use std::ops::Range;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::hermitian::ScalarField;

/// Tolerance used by [`ProjectivePoint::projectively_eq`] callers that want the
/// default comparison.
pub const PROJECTIVE_EQ_TOL: f64 = 1e-12;

/// Incidence tolerance accepted by [`MPoint::new`].
pub const INCIDENCE_TOL: f64 = 1e-10;

/// Maximum length of a random generator word in [`orbit_sample`].
pub const MAX_WORD_LEN: usize = 8;

/// Block structure of ℙ_m: `k` tuples of length `n`, m = kn − 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawShape")]
pub struct TupleShape {
    n: usize,
    k: usize,
}

#[derive(Deserialize)]
struct RawShape {
    n: usize,
    k: usize,
}

impl TryFrom<RawShape> for TupleShape {
    type Error = Error;
    fn try_from(raw: RawShape) -> Result<Self> {
        TupleShape::new(raw.n, raw.k)
    }
}

impl TupleShape {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidShape("tuple length n must be >= 1".into()));
        }
        if k < 2 {
            return Err(Error::InvalidShape(
                "number of tuples k must be >= 2 (k = 1 gives the trivial group)".into(),
            ));
        }
        let shape = TupleShape { n, k };
        if !shape.exponent_identity_holds() {
            return Err(Error::InvalidShape(format!(
                "k/(m+1) + (n-1)/n != 1 for n = {n}, k = {k}"
            )));
        }
        Ok(shape)
    }

    /// Shape of a factor ℙ_{len−1} of M: `len` singleton tuples. Allows one
    /// tuple, which the public constructor rejects.
    pub(crate) fn flat(len: usize) -> Self {
        TupleShape { n: 1, k: len }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Complex dimension of the projective space.
    pub fn m(&self) -> usize {
        self.k * self.n - 1
    }

    /// Number of homogeneous coordinates, m + 1.
    pub fn len(&self) -> usize {
        self.k * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tuple_of(&self, index: usize) -> usize {
        index / self.n
    }

    pub fn tuple_range(&self, h: usize) -> Range<usize> {
        h * self.n..(h + 1) * self.n
    }

    /// k/(m+1) + (n−1)/n = 1, checked in integers.
    pub fn exponent_identity_holds(&self) -> bool {
        let (n, k, m1) = (self.n as u128, self.k as u128, (self.k * self.n) as u128);
        k * n + (n - 1) * m1 == n * m1
    }
}

/// One generator of G_{n,k}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Generator {
    /// Swap tuples `Z_i` and `Z_j`.
    Sigma { i: usize, j: usize },
    /// Multiply coordinate `index` by `e^{iθ}`.
    Tau { index: usize, theta: f64 },
    /// Swap coordinates `p` and `q` of the same tuple.
    Gamma { p: usize, q: usize },
}

impl Generator {
    pub fn validate(&self, shape: &TupleShape) -> Result<()> {
        let limit = shape.len();
        let check = |index: usize, limit: usize| {
            if index >= limit {
                Err(Error::IndexOutOfRange { index, limit })
            } else {
                Ok(())
            }
        };
        match *self {
            Generator::Sigma { i, j } => {
                check(i, shape.k())?;
                check(j, shape.k())
            }
            Generator::Tau { index, theta } => {
                if !theta.is_finite() {
                    return Err(Error::InvalidArgument("non-finite phase".into()));
                }
                check(index, limit)
            }
            Generator::Gamma { p, q } => {
                check(p, limit)?;
                check(q, limit)?;
                if shape.tuple_of(p) != shape.tuple_of(q) {
                    return Err(Error::CrossTupleSwap { p, q });
                }
                Ok(())
            }
        }
    }

    fn act(&self, shape: &TupleShape, coords: &mut [Complex64]) {
        match *self {
            Generator::Sigma { i, j } => {
                if i != j {
                    let n = shape.n();
                    for r in 0..n {
                        coords.swap(i * n + r, j * n + r);
                    }
                }
            }
            Generator::Tau { index, theta } => {
                coords[index] *= Complex64::from_polar(1.0, theta);
            }
            Generator::Gamma { p, q } => coords.swap(p, q),
        }
    }
}

/// A point of ℙ_m, stored as the representative whose largest-modulus
/// coordinate (first one on ties) equals exactly 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoint")]
pub struct ProjectivePoint {
    coords: Vec<Complex64>,
    shape: TupleShape,
}

#[derive(Deserialize)]
struct RawPoint {
    coords: Vec<Complex64>,
    shape: TupleShape,
}

impl TryFrom<RawPoint> for ProjectivePoint {
    type Error = Error;
    fn try_from(raw: RawPoint) -> Result<Self> {
        make_point(raw.coords, raw.shape)
    }
}

fn pivot_index(coords: &[Complex64]) -> usize {
    let mut best = 0;
    let mut best_mod = -1.0;
    for (i, z) in coords.iter().enumerate() {
        let r = z.norm();
        if r > best_mod {
            best_mod = r;
            best = i;
        }
    }
    best
}

fn normalized(mut coords: Vec<Complex64>) -> Vec<Complex64> {
    let piv = pivot_index(&coords);
    let scale = coords[piv];
    for z in coords.iter_mut() {
        *z /= scale;
    }
    coords[piv] = Complex64::new(1.0, 0.0);
    coords
}

fn validate_coords(coords: &[Complex64], expected: usize) -> Result<()> {
    if coords.len() != expected {
        return Err(Error::ShapeMismatch {
            expected,
            got: coords.len(),
        });
    }
    if let Some(i) = coords.iter().position(|z| !z.is_finite()) {
        return Err(Error::NonFiniteCoordinate(i));
    }
    if coords.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return Err(Error::AllZero);
    }
    Ok(())
}

/// Builds the canonical representative of `[coords]`.
pub fn make_point(coords: Vec<Complex64>, shape: TupleShape) -> Result<ProjectivePoint> {
    validate_coords(&coords, shape.len())?;
    Ok(ProjectivePoint {
        coords: normalized(coords),
        shape,
    })
}

/// Convenience constructor from real homogeneous coordinates.
pub fn make_real_point(coords: &[f64], shape: TupleShape) -> Result<ProjectivePoint> {
    make_point(
        coords.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        shape,
    )
}

impl ProjectivePoint {
    pub fn coords(&self) -> &[Complex64] {
        &self.coords
    }

    pub fn shape(&self) -> TupleShape {
        self.shape
    }

    /// The n-tuple Z_h.
    pub fn tuple(&self, h: usize) -> &[Complex64] {
        &self.coords[self.shape.tuple_range(h)]
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.coords.iter().map(|z| z.norm()).collect()
    }

    /// Index of the coordinate normalized to 1.
    pub fn pivot(&self) -> usize {
        pivot_index(&self.coords)
    }

    /// Equality in ℙ_m: the canonical representatives agree up to a global
    /// phase, relative tolerance `tol`.
    pub fn projectively_eq(&self, other: &ProjectivePoint, tol: f64) -> bool {
        if self.coords.len() != other.coords.len() {
            return false;
        }
        // least-squares scalar λ with self ≈ λ·other
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0;
        for (a, b) in self.coords.iter().zip(&other.coords) {
            num += b.conj() * a;
            den += b.norm_sqr();
        }
        let lambda = num / den;
        let scale = self.coords.iter().map(|z| z.norm()).fold(0.0, f64::max);
        self.coords
            .iter()
            .zip(&other.coords)
            .all(|(a, b)| (a - lambda * b).norm() <= tol * scale)
    }

    pub fn to_chart(&self, chart_index: usize) -> Result<ChartPoint> {
        to_chart(self, chart_index)
    }

    /// Chart of the largest-modulus coordinate; always defined.
    pub fn best_chart(&self) -> ChartPoint {
        self.to_chart(self.pivot())
            .expect("pivot coordinate is nonzero")
    }

    pub fn apply(&self, generator: &Generator) -> Result<ProjectivePoint> {
        apply_generator(self, generator)
    }

    /// Moves the point by group elements to the form [1, x_1, .., x_m] with
    /// real 0 ≤ x_i ≤ 1 and returns those moduli.
    pub fn to_unit_cube(&self) -> Vec<f64> {
        let shape = self.shape;
        let piv = self.pivot();
        let (h, r) = (shape.tuple_of(piv), piv % shape.n());
        let mut q = self.clone();
        if h != 0 {
            q = q
                .apply(&Generator::Sigma { i: 0, j: h })
                .expect("valid tuple indices");
        }
        if r != 0 {
            q = q
                .apply(&Generator::Gamma { p: 0, q: r })
                .expect("same tuple");
        }
        let z0 = q.coords[0].norm();
        q.coords[1..]
            .iter()
            .map(|z| (z.norm() / z0).min(1.0))
            .collect()
    }
}

/// A point in the affine chart {z_j ≠ 0}, coordinates z_λ / z_j for λ ≠ j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    chart_index: usize,
    affine: Vec<Complex64>,
    shape: TupleShape,
}

impl ChartPoint {
    pub fn new(chart_index: usize, affine: Vec<Complex64>, shape: TupleShape) -> Result<Self> {
        if chart_index > shape.m() {
            return Err(Error::IndexOutOfRange {
                index: chart_index,
                limit: shape.m() + 1,
            });
        }
        if affine.len() != shape.m() {
            return Err(Error::ShapeMismatch {
                expected: shape.m(),
                got: affine.len(),
            });
        }
        if let Some(i) = affine.iter().position(|z| !z.is_finite()) {
            return Err(Error::NonFiniteCoordinate(i));
        }
        Ok(ChartPoint {
            chart_index,
            affine,
            shape,
        })
    }

    /// The point [1, x_1, .., x_m] in chart 0 with real coordinates.
    pub fn from_real(x: &[f64], shape: TupleShape) -> Result<Self> {
        ChartPoint::new(
            0,
            x.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            shape,
        )
    }

    pub fn origin(chart_index: usize, shape: TupleShape) -> Result<Self> {
        ChartPoint::new(
            chart_index,
            vec![Complex64::new(0.0, 0.0); shape.m()],
            shape,
        )
    }

    pub(crate) fn with_affine(&self, affine: Vec<Complex64>) -> ChartPoint {
        ChartPoint {
            chart_index: self.chart_index,
            affine,
            shape: self.shape,
        }
    }

    pub fn chart_index(&self) -> usize {
        self.chart_index
    }

    pub fn affine(&self) -> &[Complex64] {
        &self.affine
    }

    pub fn shape(&self) -> TupleShape {
        self.shape
    }

    pub fn sup_norm(&self) -> f64 {
        self.affine.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Σ |z_λ|² over the affine coordinates.
    pub fn norm_sqr(&self) -> f64 {
        self.affine.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Homogeneous coordinates with a 1 in position `chart_index`.
    pub fn homogeneous(&self) -> Vec<Complex64> {
        let mut w = Vec::with_capacity(self.affine.len() + 1);
        w.extend_from_slice(&self.affine[..self.chart_index]);
        w.push(Complex64::new(1.0, 0.0));
        w.extend_from_slice(&self.affine[self.chart_index..]);
        w
    }

    pub fn to_projective(&self) -> ProjectivePoint {
        make_point(self.homogeneous(), self.shape).expect("chart coordinate is 1")
    }
}

pub fn to_chart(p: &ProjectivePoint, chart_index: usize) -> Result<ChartPoint> {
    let shape = p.shape();
    if chart_index > shape.m() {
        return Err(Error::IndexOutOfRange {
            index: chart_index,
            limit: shape.m() + 1,
        });
    }
    let denom = p.coords[chart_index];
    if denom == Complex64::new(0.0, 0.0) {
        return Err(Error::ChartUndefined(chart_index));
    }
    let affine = p
        .coords
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != chart_index)
        .map(|(_, z)| z / denom)
        .collect();
    ChartPoint::new(chart_index, affine, shape)
}

pub fn apply_generator(p: &ProjectivePoint, generator: &Generator) -> Result<ProjectivePoint> {
    generator.validate(&p.shape)?;
    let mut coords = p.coords.clone();
    generator.act(&p.shape, &mut coords);
    make_point(coords, p.shape)
}

fn random_generator(shape: &TupleShape, rng: &mut ChaCha8Rng) -> Generator {
    let kinds = if shape.n() >= 2 { 3 } else { 2 };
    match rng.random_range(0..kinds) {
        0 => {
            let i = rng.random_range(0..shape.k());
            let mut j = rng.random_range(0..shape.k() - 1);
            if j >= i {
                j += 1;
            }
            Generator::Sigma { i, j }
        }
        1 => Generator::Tau {
            index: rng.random_range(0..shape.len()),
            theta: rng.random_range(0.0..std::f64::consts::TAU),
        },
        _ => {
            let h = rng.random_range(0..shape.k());
            let a = rng.random_range(0..shape.n());
            let mut b = rng.random_range(0..shape.n() - 1);
            if b >= a {
                b += 1;
            }
            Generator::Gamma {
                p: h * shape.n() + a,
                q: h * shape.n() + b,
            }
        }
    }
}

/// A random word of length 1..=8 in the generators.
pub fn random_word(shape: &TupleShape, rng: &mut ChaCha8Rng) -> Vec<Generator> {
    let len = rng.random_range(1..=MAX_WORD_LEN);
    (0..len).map(|_| random_generator(shape, rng)).collect()
}

/// `count` images of `p` under random generator words; deterministic in `seed`.
pub fn orbit_sample(p: &ProjectivePoint, count: usize, seed: u64) -> Result<Vec<ProjectivePoint>> {
    if count == 0 {
        return Err(Error::InvalidCount);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = p.shape();
    (0..count)
        .map(|_| {
            random_word(&shape, &mut rng)
                .iter()
                .try_fold(p.clone(), |q, g| q.apply(g))
        })
        .collect()
}

/// `count` chart-0 points with affine moduli uniform in [lo, hi] and uniform
/// phases; deterministic in `seed`.
pub fn sample_chart_points(
    shape: TupleShape,
    count: usize,
    (lo, hi): (f64, f64),
    seed: u64,
) -> Result<Vec<ChartPoint>> {
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "modulus range [{lo}, {hi}] must be positive and ordered"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let affine = (0..shape.m())
                .map(|_| {
                    let r = lo + (hi - lo) * rng.random::<f64>();
                    Complex64::from_polar(r, std::f64::consts::TAU * rng.random::<f64>())
                })
                .collect();
            ChartPoint::new(0, affine, shape)
        })
        .collect()
}

fn eval_checked<F: ScalarField + ?Sized>(f: &F, p: &ProjectivePoint) -> Result<ExtReal> {
    let chart = p.best_chart();
    if !f.in_domain(&chart) {
        return Err(Error::EvaluationFailed(format!(
            "point outside field domain: {:?}",
            p.coords()
        )));
    }
    Ok(f.eval(&chart))
}

/// max |f(q) − f(p)| over `count` orbit samples of `p`. Two −∞ values count
/// as equal; −∞ against a finite value is an infinite deviation.
pub fn check_invariance<F: ScalarField + ?Sized>(
    f: &F,
    p: &ProjectivePoint,
    count: usize,
    seed: u64,
) -> Result<f64> {
    let base = eval_checked(f, p)?;
    let mut worst: f64 = 0.0;
    for q in orbit_sample(p, count, seed)? {
        let v = eval_checked(f, &q)?;
        let dev = match (base, v) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => (a - b).abs(),
            (a, b) if a == b => 0.0,
            _ => f64::INFINITY,
        };
        worst = worst.max(dev);
    }
    Ok(worst)
}

/// A point of M: base point in ℙ_m and k factor points in ℙ_{n−1} with each
/// tuple Z_h of the base proportional to the h-th factor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MPoint {
    base: ProjectivePoint,
    factors: Vec<ProjectivePoint>,
}

impl MPoint {
    /// Validates incidence with tolerance [`INCIDENCE_TOL`].
    pub fn new(base: ProjectivePoint, factors: Vec<Vec<Complex64>>) -> Result<Self> {
        let shape = base.shape();
        if factors.len() != shape.k() {
            return Err(Error::ShapeMismatch {
                expected: shape.k(),
                got: factors.len(),
            });
        }
        let factors = factors
            .into_iter()
            .map(|f| make_point(f, TupleShape::flat(shape.n())))
            .collect::<Result<Vec<_>>>()?;
        let point = MPoint { base, factors };
        for h in 0..shape.k() {
            let defect = point.tuple_defect(h);
            if defect > INCIDENCE_TOL {
                return Err(Error::IncidenceViolation { tuple: h, defect });
            }
        }
        Ok(point)
    }

    pub fn base(&self) -> &ProjectivePoint {
        &self.base
    }

    pub fn factors(&self) -> &[ProjectivePoint] {
        &self.factors
    }

    pub fn shape(&self) -> TupleShape {
        self.base.shape()
    }

    // Z_h rescaled so that its entry at the factor's pivot is 1, compared with
    // the factor. Zero when the factor was produced from Z_h by `make_point`.
    fn tuple_defect(&self, h: usize) -> f64 {
        let tuple = self.base.tuple(h);
        if tuple.iter().all(|z| z.norm() == 0.0) {
            return 0.0;
        }
        let factor = self.factors[h].coords();
        let piv = pivot_index(factor);
        let anchor = tuple[piv];
        if anchor.norm() == 0.0 {
            return 1.0;
        }
        tuple
            .iter()
            .zip(factor)
            .map(|(z, f)| (z / anchor - f).norm())
            .fold(0.0, f64::max)
    }

    /// Largest incidence defect over the tuples.
    pub fn incidence_defect(&self) -> f64 {
        (0..self.shape().k())
            .map(|h| self.tuple_defect(h))
            .fold(0.0, f64::max)
    }

    /// The scalars ζ_h with Z_h = ζ_h · factor_h (zero for a vanishing tuple).
    pub fn zetas(&self) -> Vec<Complex64> {
        (0..self.shape().k())
            .map(|h| {
                let tuple = self.base.tuple(h);
                let factor = self.factors[h].coords();
                let num: Complex64 = factor.iter().zip(tuple).map(|(f, z)| f.conj() * z).sum();
                let den: f64 = factor.iter().map(|f| f.norm_sqr()).sum();
                num / den
            })
            .collect()
    }

    /// z'_i = ζ_h · (factor_h)_i, the base coordinates rebuilt from the fibres.
    pub fn primed_coords(&self) -> Vec<Complex64> {
        let shape = self.shape();
        let zetas = self.zetas();
        let mut out = Vec::with_capacity(shape.len());
        for (h, zeta) in zetas.iter().enumerate() {
            out.extend(self.factors[h].coords().iter().map(|f| zeta * f));
        }
        out
    }

    /// Action of the induced group: move the base point, then re-lift.
    pub fn apply(&self, generator: &Generator) -> Result<MPoint> {
        lift_to_m(&self.base.apply(generator)?)
    }
}

/// Lifts a point with all tuples nonzero to the unique point of M above it.
pub fn lift_to_m(p: &ProjectivePoint) -> Result<MPoint> {
    let shape = p.shape();
    let factors = (0..shape.k())
        .map(|h| {
            let tuple = p.tuple(h).to_vec();
            if tuple.iter().all(|z| z.norm() == 0.0) {
                return Err(Error::ZeroTuple(h));
            }
            make_point(tuple, TupleShape::flat(shape.n()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MPoint {
        base: p.clone(),
        factors,
    })
}
