//! Weighted point-sphere incidence counting and its reduction to cone
//! Fourier analysis: spheres lift to punctured lines in `F^(d+2)`, points
//! lift into the cone `C_(d+2)`, and the incidence deviation is controlled
//! by the cone energy of the lifted weight function.
//!
//! The energy is evaluated two ways: a brute dense transform over `F^(d+2)`
//! (only feasible for tiny `q`), and the pairwise identity
//! `sum_(x in C) |W^(x)|^2 = q^(d+2) sum_(m,m') w'(m) conj(w'(m')) C_v(m-m')`
//! with the closed form of `C_v` per pair. The closed mode is the default:
//! it needs `O(|S'|^2)` work instead of a `q^(d+2)` grid.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::characters::CharTable;
use crate::cone::{cone_ift_closed, in_dual_variety, ConeVariety};
use crate::field::{Field, Point, Scalar};
use crate::spectral::GridFn;
use crate::{Budget, Error, Result};

/// `S_d(a, r) = { x : ||x - a|| = r }`; the radius is a field element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sphere {
    pub center: Point,
    pub radius: Scalar,
}

impl Sphere {
    pub fn contains(&self, field: &Field, x: &[Scalar]) -> bool {
        let diff: Point = x.iter().zip(&self.center).map(|(&a, &b)| field.sub(a, b)).collect();
        field.norm(&diff) == self.radius
    }
}

/// Every point of a sphere, by grid scan.
pub fn sphere_points(field: &Arc<Field>, sphere: &Sphere, budget: Budget) -> Result<Vec<Point>> {
    let d = sphere.center.len();
    let len = budget.grid_len(field.order(), d)?;
    let mut out = Vec::new();
    for idx in 0..len {
        let pt = field.point_at(idx, d);
        if sphere.contains(field, &pt) {
            out.push(pt);
        }
    }
    Ok(out)
}

/// A sphere family with one complex weight per sphere; `(center, radius)`
/// pairs must be distinct.
#[derive(Clone, Debug)]
pub struct WeightedFamily {
    dim: usize,
    spheres: Vec<Sphere>,
    weights: Vec<Complex64>,
}

impl WeightedFamily {
    pub fn new(dim: usize, spheres: Vec<Sphere>, weights: Vec<Complex64>) -> Result<WeightedFamily> {
        if spheres.len() != weights.len() {
            return Err(Error::DimensionMismatch { expected: spheres.len(), got: weights.len() });
        }
        let mut seen = std::collections::HashSet::new();
        for s in &spheres {
            if s.center.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: s.center.len() });
            }
            if !seen.insert((s.center.clone(), s.radius)) {
                return Err(Error::Precondition("duplicate (center, radius) pair".into()));
            }
        }
        Ok(WeightedFamily { dim, spheres, weights })
    }

    /// Unweighted family (`w = 1`).
    pub fn unit(dim: usize, spheres: Vec<Sphere>) -> Result<WeightedFamily> {
        let n = spheres.len();
        WeightedFamily::new(dim, spheres, vec![Complex64::new(1.0, 0.0); n])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.spheres.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spheres.is_empty()
    }

    pub fn spheres(&self) -> &[Sphere] {
        &self.spheres
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [Complex64] {
        &mut self.weights
    }

    pub fn weight_sum(&self) -> Complex64 {
        self.weights.iter().sum()
    }

    /// `sum_s |w(s)|^2`.
    pub fn weight_l2_sq(&self) -> f64 {
        self.weights.iter().map(|w| w.norm_sqr()).sum()
    }
}

/// `I_w(P, S) = sum_(p, s) 1_(p in s) w(s)`.
pub fn incidence_weighted(field: &Field, points: &[Point], family: &WeightedFamily) -> Result<Complex64> {
    for p in points {
        if p.len() != family.dim {
            return Err(Error::DimensionMismatch { expected: family.dim, got: p.len() });
        }
    }
    let mut total = Complex64::new(0.0, 0.0);
    for (s, &w) in family.spheres.iter().zip(&family.weights) {
        let hits = points.iter().filter(|p| s.contains(field, p)).count();
        total += w * (hits as f64);
    }
    Ok(total)
}

/// The lift `S' = { t (-2a, 1, ||a|| - r) : t in F* }` of a sphere family
/// into `F^(d+2)`, with weights `w'(t(-2a, 1, ||a|| - r)) = w(a, r)`.
#[derive(Clone, Debug)]
pub struct LiftedFamily {
    dim: usize,
    points: Vec<Point>,
    weights: Vec<Complex64>,
    sphere_of: Vec<usize>,
}

impl LiftedFamily {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    pub fn sphere_of(&self) -> &[usize] {
        &self.sphere_of
    }
}

/// Direction vector `(-2a, 1, ||a|| - r)` of a sphere's lifted line.
fn lift_direction(field: &Field, sphere: &Sphere) -> Point {
    let two = field.from_int(2);
    let mut v: Point = sphere.center.iter().map(|&c| field.neg(field.mul(two, c))).collect();
    v.push(field.one());
    v.push(field.sub(field.norm(&sphere.center), sphere.radius));
    v
}

pub fn lift_family(field: &Field, family: &WeightedFamily) -> Result<LiftedFamily> {
    if family.dim < 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: family.dim });
    }
    let mut points = Vec::with_capacity((field.order() as usize - 1) * family.len());
    let mut weights = Vec::with_capacity(points.capacity());
    let mut sphere_of = Vec::with_capacity(points.capacity());
    for (i, (s, &w)) in family.spheres.iter().zip(&family.weights).enumerate() {
        let dir = lift_direction(field, s);
        for t in field.nonzero_elements() {
            let pt: Point = dir.iter().map(|&c| field.mul(t, c)).collect();
            points.push(pt);
            weights.push(w);
            sphere_of.push(i);
        }
    }
    Ok(LiftedFamily { dim: family.dim + 2, points, weights, sphere_of })
}

/// Lifted point set `P' = { lambda (x, ||x||, 1) : x in P, lambda in F* }`,
/// a subset of the cone `C_(d+2)`.
#[derive(Clone, Debug)]
pub struct LiftedPoints {
    dim: usize,
    points: Vec<Point>,
}

impl LiftedPoints {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }
}

pub fn lift_points(field: &Field, pts: &[Point]) -> LiftedPoints {
    let dim = pts.first().map(|p| p.len() + 2).unwrap_or(2);
    let mut points = Vec::with_capacity((field.order() as usize - 1) * pts.len());
    for x in pts {
        let mut base = x.clone();
        base.push(field.norm(x));
        base.push(field.one());
        for lambda in field.nonzero_elements() {
            points.push(base.iter().map(|&c| field.mul(lambda, c)).collect());
        }
    }
    LiftedPoints { dim, points }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum EnergyMode {
    Closed,
    Brute,
}

/// `sum_(x in C_(d+2)) |(w' 1_S')^(x)|^2`.
pub fn cone_energy(
    field: &Arc<Field>,
    lifted: &LiftedFamily,
    mode: EnergyMode,
    budget: Budget,
) -> Result<f64> {
    match mode {
        EnergyMode::Closed => {
            let q = field.order() as f64;
            let scale = q.powi(lifted.dim as i32);
            let pts = &lifted.points;
            let ws = &lifted.weights;
            budget.check((pts.len() as u64).saturating_mul(pts.len() as u64))?;
            let total: Complex64 = (0..pts.len())
                .into_par_iter()
                .map(|i| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    let mut diff = vec![Scalar(0); lifted.dim];
                    for j in 0..pts.len() {
                        for (k, d) in diff.iter_mut().enumerate() {
                            *d = field.sub(pts[i][k], pts[j][k]);
                        }
                        acc += ws[i] * ws[j].conj() * cone_ift_closed(field, &diff);
                    }
                    acc
                })
                .reduce(|| Complex64::new(0.0, 0.0), |a, b| a + b);
            let energy = total * scale;
            debug_assert!(energy.im.abs() <= 1e-6 * energy.re.abs().max(1.0));
            Ok(energy.re)
        }
        EnergyMode::Brute => {
            let mut grid = GridFn::zeros(field, lifted.dim, budget)?;
            for (pt, &w) in lifted.points.iter().zip(&lifted.weights) {
                grid.values_mut()[field.point_index(pt)] = w;
            }
            let hat = grid.fourier();
            let cone = ConeVariety::build(field, lifted.dim, budget)?;
            Ok(cone
                .grid_indices()
                .iter()
                .map(|&i| hat.values()[i].norm_sqr())
                .sum())
        }
    }
}

/// Outcome of the exact reduction identity from point-sphere incidences to
/// a bilinear exponential sum over the lifted sets, plus its Cauchy-Schwarz
/// consequence with the traced constant.
#[derive(Clone, Debug, Serialize)]
pub struct LiftIdentityReport {
    pub incidence: [f64; 2],
    pub main_term: [f64; 2],
    pub bilinear_term: [f64; 2],
    /// `|I_w - main - bilinear|`: must vanish to tolerance.
    pub identity_residual: f64,
    /// `|I_w - main|`.
    pub deviation: f64,
    /// `sqrt(|P|) sqrt(energy) / (q sqrt(q-1))`: the exact traced bound.
    pub cs_bound: f64,
    /// The same bound read as `c q^(-3/2) sqrt(|P|) sqrt(energy)`.
    pub cs_constant: f64,
    pub energy: f64,
    pub holds: bool,
}

fn require_distinct(points: &[Point]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for p in points {
        if !seen.insert(p.clone()) {
            return Err(Error::Precondition("point set contains duplicates".into()));
        }
    }
    Ok(())
}

/// Verify the exact identity
/// `I_w(P,S) = (|P|/q) sum_s w(s) + (q(q-1))^-1 sum_(x in P', y in S') e(x.y) w'(y)`
/// by evaluating both sides, then check the Cauchy-Schwarz bound through the
/// cone energy. `P` must be a set: the energy comparison relies on the
/// lifted points being distinct elements of the cone.
pub fn lift_identity_check(
    field: &Arc<Field>,
    points: &[Point],
    family: &WeightedFamily,
    budget: Budget,
) -> Result<LiftIdentityReport> {
    require_distinct(points)?;
    let q = field.order() as f64;
    let incidence = incidence_weighted(field, points, family)?;
    let main = family.weight_sum() * (points.len() as f64 / q);

    let lifted = lift_family(field, family)?;
    let lifted_pts = lift_points(field, points);
    let chars = CharTable::new(field);
    let bilinear: Complex64 = lifted_pts
        .points()
        .par_iter()
        .map(|x| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (y, &w) in lifted.points().iter().zip(lifted.weights()) {
                acc += w * chars.e_dot(x, y);
            }
            acc
        })
        .reduce(|| Complex64::new(0.0, 0.0), |a, b| a + b);
    let bilinear = bilinear / (q * (q - 1.0));

    let energy = cone_energy(field, &lifted, EnergyMode::Closed, budget)?;
    let deviation = (incidence - main).norm();
    let cs_bound = (points.len() as f64).sqrt() * energy.max(0.0).sqrt() / (q * (q - 1.0).sqrt());
    let terms = lifted_pts.len() * lifted.len();
    let residual = (incidence - main - bilinear).norm();
    Ok(LiftIdentityReport {
        incidence: [incidence.re, incidence.im],
        main_term: [main.re, main.im],
        bilinear_term: [bilinear.re, bilinear.im],
        identity_residual: residual,
        deviation,
        cs_bound,
        cs_constant: (q / (q - 1.0)).sqrt(),
        energy,
        holds: deviation <= cs_bound + crate::sum_tol(terms.max(1)),
    })
}

/// The three parity regimes of the incidence machinery.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParityCase {
    /// `d = 2 mod 4` and `q = 3 mod 4`: the lifted Gauss power is negative.
    EvenNegative,
    /// `d = 0 mod 4`, or `d` even with `q = 1 mod 4`: positive Gauss power.
    EvenPositive,
    /// Odd `d`.
    Odd,
}

impl ParityCase {
    pub fn of(d: usize, q: u64) -> ParityCase {
        if d % 2 == 1 {
            ParityCase::Odd
        } else if d % 4 == 0 || q % 4 == 1 {
            ParityCase::EvenPositive
        } else {
            ParityCase::EvenNegative
        }
    }

    /// Sphere-count threshold `|S| <= q^(exp)` for the incidence bound.
    pub fn sphere_threshold(&self, d: usize, q: u64) -> f64 {
        let qf = q as f64;
        match self {
            ParityCase::EvenNegative => qf.powf(d as f64 / 2.0),
            ParityCase::EvenPositive => qf.powf((d as f64 - 2.0) / 2.0),
            ParityCase::Odd => qf.powf((d as f64 - 1.0) / 2.0),
        }
    }
}

/// How the weight vector sits inside the complex plane; the traced constant
/// in the energy regime bound depends on it (the proof splits a complex
/// weight into four nonnegative parts).
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum WeightClass {
    Nonnegative,
    Real,
    Complex,
}

pub fn weight_class(weights: &[Complex64]) -> WeightClass {
    let real = weights.iter().all(|w| w.im == 0.0);
    if real && weights.iter().all(|w| w.re >= 0.0) {
        WeightClass::Nonnegative
    } else if real {
        WeightClass::Real
    } else {
        WeightClass::Complex
    }
}

/// Splitting overhead in the energy bound: 1 for nonnegative weights, 2 for
/// signed real weights, 4 for complex weights.
pub fn split_factor(class: WeightClass) -> f64 {
    match class {
        WeightClass::Nonnegative => 1.0,
        WeightClass::Real => 2.0,
        WeightClass::Complex => 4.0,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyDecomposition {
    pub case: ParityCase,
    pub energy: f64,
    /// Diagonal term `q^(d+1) sum_m |w'(m)|^2`.
    pub diagonal_term: f64,
    /// Term over pairs with difference in the dual variety (diagonal included).
    pub dual_term: f64,
    /// Term over pairs with difference off the dual variety.
    pub off_term: f64,
    pub decomposition_residual: f64,
    /// Sign claim for the negative term, checked when weights are nonnegative.
    pub negative_term_ok: Option<bool>,
    /// `split * (q^(d+2) + q^(regime exponent) |S|) sum |w|^2`.
    pub regime_bound: f64,
    pub bound_holds: bool,
}

/// Verify the signed three-term decomposition of the cone energy and the
/// explicit regime bound. For even `d` the decomposition is exact; for odd
/// `d` only the final inequality is available.
pub fn energy_decomposition_check(
    field: &Arc<Field>,
    family: &WeightedFamily,
    budget: Budget,
) -> Result<EnergyDecomposition> {
    let d = family.dim();
    let q = field.order() as f64;
    let case = ParityCase::of(d, field.order());
    let lifted = lift_family(field, family)?;

    // Energy from the brute dense transform when the grid fits, otherwise
    // from the pairwise closed form.
    let energy = match cone_energy(field, &lifted, EnergyMode::Brute, budget) {
        Ok(e) => e,
        Err(Error::BudgetExceeded { .. }) => {
            cone_energy(field, &lifted, EnergyMode::Closed, budget)?
        }
        Err(e) => return Err(e),
    };

    let sum_w2_lifted: f64 = lifted.weights().iter().map(|w| w.norm_sqr()).sum();
    let diagonal = q.powi(d as i32 + 1) * sum_w2_lifted;

    // Pair sums over S' classified by dual-variety membership of m - m'.
    let pts = lifted.points();
    let ws = lifted.weights();
    let (dual_sum, off_sum) = (0..pts.len())
        .into_par_iter()
        .map(|i| {
            let mut dual = Complex64::new(0.0, 0.0);
            let mut off = Complex64::new(0.0, 0.0);
            let mut diff = vec![Scalar(0); lifted.dim()];
            for j in 0..pts.len() {
                for (k, dd) in diff.iter_mut().enumerate() {
                    *dd = field.sub(pts[i][k], pts[j][k]);
                }
                let term = ws[i] * ws[j].conj();
                if in_dual_variety(field, &diff).unwrap() {
                    dual += term;
                } else {
                    off += term;
                }
            }
            (dual, off)
        })
        .reduce(
            || (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)),
            |a, b| (a.0 + b.0, a.1 + b.1),
        );

    let class = weight_class(family.weights());
    let qd2 = q.powf(d as f64 / 2.0);
    let (dual_term, off_term, decomposition_residual, negative_ok) = match case {
        ParityCase::EvenNegative => {
            let dual_term = -(q - 1.0) * qd2 * dual_sum.re;
            let off_term = qd2 * off_sum.re;
            let recon = diagonal + dual_term + off_term;
            let neg = if class == WeightClass::Nonnegative { Some(dual_term <= 0.0) } else { None };
            (dual_term, off_term, (energy - recon).abs(), neg)
        }
        ParityCase::EvenPositive => {
            let dual_term = (q - 1.0) * qd2 * dual_sum.re;
            let off_term = -qd2 * off_sum.re;
            let recon = diagonal + dual_term + off_term;
            let neg = if class == WeightClass::Nonnegative { Some(off_term <= 0.0) } else { None };
            (dual_term, off_term, (energy - recon).abs(), neg)
        }
        ParityCase::Odd => {
            // No exact class decomposition in odd dimensions (the off-dual
            // values oscillate with the quadratic character); only the final
            // inequality is checked.
            (0.0, 0.0, 0.0, None)
        }
    };

    let regime_exp = match case {
        ParityCase::EvenNegative => (d as f64 + 4.0) / 2.0,
        ParityCase::EvenPositive => (d as f64 + 6.0) / 2.0,
        ParityCase::Odd => (d as f64 + 5.0) / 2.0,
    };
    let split = split_factor(class);
    let regime_bound = split
        * (q.powi(d as i32 + 2) + q.powf(regime_exp) * family.len() as f64)
        * family.weight_l2_sq();
    let scale = energy.abs().max(diagonal).max(1.0);
    Ok(EnergyDecomposition {
        case,
        energy,
        diagonal_term: diagonal,
        dual_term,
        off_term,
        decomposition_residual,
        negative_term_ok: negative_ok,
        regime_bound,
        bound_holds: energy <= regime_bound + 1e-9 * scale,
    })
}

/// Uniform explicit constant for the incidence deviation bound with complex
/// weights over any field with `q >= 3`: `2 sqrt(2) sqrt(q/(q-1)) <= 2 sqrt(3)`.
///
/// Trace: the reduction identity bounds the deviation by
/// `sqrt(|P|) sqrt(E) / (q sqrt(q-1))`; splitting a complex weight into four
/// nonnegative parts costs a factor 4 inside `E`, the in-regime energy bound
/// gives `E <= 4 * 2 q^(d+2) sum|w|^2`, and `1/sqrt(q-1) = sqrt(q/(q-1)) / sqrt(q)`.
pub fn incidence_bound_constant() -> f64 {
    2.0 * 3.0_f64.sqrt()
}

/// Per-field sharp version of [`incidence_bound_constant`].
pub fn incidence_bound_constant_for(q: u64) -> f64 {
    let qf = q as f64;
    2.0 * 2.0_f64.sqrt() * (qf / (qf - 1.0)).sqrt()
}

#[derive(Clone, Debug, Serialize)]
pub struct IncidenceBoundReport {
    pub case: ParityCase,
    pub deviation: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub constant: f64,
    pub sphere_threshold: f64,
    pub in_regime: bool,
    pub holds: bool,
}

/// Check `|I_w(P,S) - q^-1 |P| sum_s w(s)| <= C q^((d-1)/2) sqrt(|P|) sqrt(sum |w|^2)`
/// with the derived explicit constant. Out-of-regime instances still produce
/// a report, flagged.
pub fn incidence_bound_check(
    field: &Field,
    points: &[Point],
    family: &WeightedFamily,
) -> Result<IncidenceBoundReport> {
    require_distinct(points)?;
    let d = family.dim();
    let q = field.order();
    let qf = q as f64;
    let case = ParityCase::of(d, q);
    let threshold = case.sphere_threshold(d, q);
    let in_regime = (family.len() as f64) <= threshold;

    let incidence = incidence_weighted(field, points, family)?;
    let main = family.weight_sum() * (points.len() as f64 / qf);
    let deviation = (incidence - main).norm();
    let constant = incidence_bound_constant();
    let rhs = constant
        * qf.powf((d as f64 - 1.0) / 2.0)
        * (points.len() as f64).sqrt()
        * family.weight_l2_sq().sqrt();
    let ratio = if rhs > 0.0 { deviation / rhs } else { 0.0 };
    Ok(IncidenceBoundReport {
        case,
        deviation,
        rhs,
        ratio,
        constant,
        sphere_threshold: threshold,
        in_regime,
        holds: !in_regime || deviation <= rhs * (1.0 + 1e-12) + 1e-12,
    })
}

/// `Delta(E) = { ||x - y|| : x, y in E }`, sorted, duplicates removed.
pub fn distance_set(field: &Field, points: &[Point]) -> Vec<Scalar> {
    let mut out = std::collections::BTreeSet::new();
    for (i, x) in points.iter().enumerate() {
        for y in &points[i..] {
            let diff: Point = x.iter().zip(y).map(|(&a, &b)| field.sub(a, b)).collect();
            out.insert(field.norm(&diff));
        }
    }
    out.into_iter().collect()
}

/// On-disk instance format: everything needed to rebuild `(P, S, w)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Instance {
    pub d: usize,
    pub p: u64,
    #[serde(default = "default_ell")]
    pub ell: u32,
    #[serde(default)]
    pub modulus: Vec<u64>,
    /// Points as canonical element indices.
    pub points: Vec<Vec<u64>>,
    pub spheres: Vec<SphereSpec>,
    /// One `[re, im]` pair per sphere.
    pub weights: Vec<[f64; 2]>,
}

fn default_ell() -> u32 {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SphereSpec {
    pub center: Vec<u64>,
    pub radius: u64,
}

impl Instance {
    pub fn from_parts(field: &Field, points: &[Point], family: &WeightedFamily) -> Instance {
        Instance {
            d: family.dim(),
            p: field.p(),
            ell: field.ell(),
            modulus: field.modulus().to_vec(),
            points: points
                .iter()
                .map(|pt| pt.iter().map(|s| s.index() as u64).collect())
                .collect(),
            spheres: family
                .spheres()
                .iter()
                .map(|s| SphereSpec {
                    center: s.center.iter().map(|c| c.index() as u64).collect(),
                    radius: s.radius.index() as u64,
                })
                .collect(),
            weights: family.weights().iter().map(|w| [w.re, w.im]).collect(),
        }
    }

    pub fn field(&self) -> Result<Arc<Field>> {
        let modulus = if self.ell > 1 { Some(&self.modulus[..]) } else { None };
        Field::new(self.p, self.ell, modulus)
    }

    pub fn into_parts(&self, field: &Arc<Field>) -> Result<(Vec<Point>, WeightedFamily)> {
        let points: Vec<Point> = self
            .points
            .iter()
            .map(|pt| pt.iter().map(|&i| field.element(i)).collect())
            .collect();
        let spheres: Vec<Sphere> = self
            .spheres
            .iter()
            .map(|s| Sphere {
                center: s.center.iter().map(|&i| field.element(i)).collect(),
                radius: field.element(s.radius),
            })
            .collect();
        let weights: Vec<Complex64> =
            self.weights.iter().map(|[re, im]| Complex64::new(*re, *im)).collect();
        Ok((points, WeightedFamily::new(self.d, spheres, weights)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::close_c;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn f(p: u64) -> Arc<Field> {
        Field::prime(p).unwrap()
    }

    fn random_family(
        field: &Arc<Field>,
        d: usize,
        count: usize,
        complex: bool,
        rng: &mut ChaCha8Rng,
    ) -> WeightedFamily {
        let q = field.order();
        let mut seen = std::collections::HashSet::new();
        let mut spheres = Vec::new();
        while spheres.len() < count {
            let center: Point = (0..d).map(|_| field.element(rng.gen_range(0..q))).collect();
            let radius = field.element(rng.gen_range(0..q));
            if seen.insert((center.clone(), radius)) {
                spheres.push(Sphere { center, radius });
            }
        }
        let weights: Vec<Complex64> = (0..count)
            .map(|_| {
                let re = rng.gen_range(-1.0..1.0);
                let im = if complex { rng.gen_range(-1.0..1.0) } else { 0.0 };
                Complex64::new(re, im)
            })
            .collect();
        WeightedFamily::new(d, spheres, weights).unwrap()
    }

    fn random_points(field: &Arc<Field>, d: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
        use rand::seq::SliceRandom;
        let grid = (field.order() as usize).pow(d as u32);
        let count = count.min(grid);
        let mut indices: Vec<usize> = (0..grid).collect();
        indices.partial_shuffle(rng, count);
        indices.iter().take(count).map(|&i| field.point_at(i, d)).collect()
    }

    #[test]
    fn incidence_examples() {
        let f3 = f(3);
        // The origin lies on its own zero-radius sphere.
        let s = Sphere { center: vec![f3.zero(), f3.zero()], radius: f3.zero() };
        let fam = WeightedFamily::unit(2, vec![s]).unwrap();
        let p = vec![vec![f3.zero(), f3.zero()]];
        assert_eq!(incidence_weighted(&f3, &p, &fam).unwrap(), Complex64::new(1.0, 0.0));

        // x^2 + y^2 = 1 mod 3 has the four points (+-1, 0), (0, +-1).
        let unit = Sphere { center: vec![f3.zero(), f3.zero()], radius: f3.one() };
        let pts = sphere_points(&f3, &unit, Budget::default()).unwrap();
        assert_eq!(pts.len(), 4);
        let fam = WeightedFamily::unit(2, vec![unit.clone()]).unwrap();
        assert_eq!(incidence_weighted(&f3, &pts, &fam).unwrap(), Complex64::new(4.0, 0.0));

        let fam_i =
            WeightedFamily::new(2, vec![unit], vec![Complex64::new(0.0, 1.0)]).unwrap();
        assert_eq!(incidence_weighted(&f3, &pts, &fam_i).unwrap(), Complex64::new(0.0, 4.0));
    }

    #[test]
    fn duplicate_spheres_rejected() {
        let f3 = f(3);
        let s = Sphere { center: vec![f3.zero(), f3.zero()], radius: f3.one() };
        assert!(WeightedFamily::unit(2, vec![s.clone(), s]).is_err());
    }

    #[test]
    fn lift_examples() {
        let f3 = f(3);
        let s = Sphere { center: vec![f3.zero(), f3.zero()], radius: f3.one() };
        let fam = WeightedFamily::unit(2, vec![s]).unwrap();
        let lifted = lift_family(&f3, &fam).unwrap();
        // ||a|| - r = -1 = 2 mod 3; orbit of (0, 0, 1, 2) under F*.
        let expect: Vec<Point> = vec![
            vec![f3.zero(), f3.zero(), f3.one(), f3.element(2)],
            vec![f3.zero(), f3.zero(), f3.element(2), f3.one()],
        ];
        assert_eq!(lifted.points(), &expect[..]);
        assert_eq!(lifted.len(), (3 - 1) * fam.len());

        let pts = vec![vec![f3.one(), f3.zero()]];
        let lp = lift_points(&f3, &pts);
        let expect: Vec<Point> = vec![
            vec![f3.one(), f3.zero(), f3.one(), f3.one()],
            vec![f3.element(2), f3.zero(), f3.element(2), f3.element(2)],
        ];
        assert_eq!(lp.points(), &expect[..]);
        for x in lp.points() {
            assert!(crate::cone::on_cone(&f3, x));
        }
    }

    #[test]
    fn lifted_lines_are_disjoint_and_sized() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for q in [3u64, 5, 7] {
            let fld = f(q);
            let fam = random_family(&fld, 2, 8, true, &mut rng);
            let lifted = lift_family(&fld, &fam).unwrap();
            assert_eq!(lifted.len(), (q as usize - 1) * fam.len());
            let mut seen = std::collections::HashSet::new();
            for pt in lifted.points() {
                assert!(seen.insert(pt.clone()), "orbits must not collide");
            }
        }
    }

    #[test]
    fn lifted_points_lie_on_cone() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for q in [3u64, 5] {
            let fld = f(q);
            let pts = random_points(&fld, 3, 10, &mut rng);
            let lp = lift_points(&fld, &pts);
            assert_eq!(lp.len(), (q as usize - 1) * pts.len());
            for x in lp.points() {
                assert!(crate::cone::on_cone(&fld, x));
            }
        }
    }

    #[test]
    fn energy_modes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let fld = f(3);
        for count in [1usize, 3, 6] {
            let fam = random_family(&fld, 2, count, true, &mut rng);
            let lifted = lift_family(&fld, &fam).unwrap();
            let closed = cone_energy(&fld, &lifted, EnergyMode::Closed, Budget::default()).unwrap();
            let brute = cone_energy(&fld, &lifted, EnergyMode::Brute, Budget::default()).unwrap();
            assert!(
                (closed - brute).abs() <= 1e-9 * brute.abs().max(1.0) * 100.0,
                "count={count}: closed {closed} brute {brute}"
            );
        }
    }

    #[test]
    fn energy_zero_weights() {
        let fld = f(3);
        let s = Sphere { center: vec![fld.zero(), fld.zero()], radius: fld.one() };
        let fam = WeightedFamily::new(2, vec![s], vec![Complex64::new(0.0, 0.0)]).unwrap();
        let lifted = lift_family(&fld, &fam).unwrap();
        let e = cone_energy(&fld, &lifted, EnergyMode::Closed, Budget::default()).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn energy_plancherel_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for q in [3u64, 7] {
            let fld = f(q);
            let fam = random_family(&fld, 2, 5, true, &mut rng);
            let lifted = lift_family(&fld, &fam).unwrap();
            let e = cone_energy(&fld, &lifted, EnergyMode::Closed, Budget::default()).unwrap();
            let cap = (q as f64).powi(5) * fam.weight_l2_sq();
            assert!(e <= cap * (1.0 + 1e-9));
        }
    }

    #[test]
    fn identity_check_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (d, q) in [(2usize, 3u64), (2, 7), (3, 5)] {
            let fld = f(q);
            for _ in 0..20 {
                let fam = random_family(&fld, d, rng.gen_range(1..6), true, &mut rng);
                let pts = random_points(&fld, d, rng.gen_range(1..10), &mut rng);
                let rep = lift_identity_check(&fld, &pts, &fam, Budget::default()).unwrap();
                assert!(
                    rep.identity_residual < 1e-8,
                    "(d={d}, q={q}): residual {}",
                    rep.identity_residual
                );
                assert!(rep.holds, "(d={d}, q={q}): deviation {} bound {}", rep.deviation, rep.cs_bound);
            }
        }
    }

    #[test]
    fn identity_check_degenerate() {
        let fld = f(3);
        let s = Sphere { center: vec![fld.zero(), fld.zero()], radius: fld.one() };
        let fam = WeightedFamily::new(2, vec![s], vec![Complex64::new(0.0, 0.0)]).unwrap();
        let rep = lift_identity_check(&fld, &[], &fam, Budget::default()).unwrap();
        assert_eq!(rep.incidence, [0.0, 0.0]);
        assert!(rep.identity_residual < 1e-12);
        assert!(rep.holds);
    }

    #[test]
    fn decomposition_even_negative_case() {
        // d = 2 mod 4 with q = 3 mod 4: exact decomposition, middle term <= 0
        // for nonnegative weights.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for q in [3u64, 7] {
            let fld = f(q);
            let mut fam = random_family(&fld, 2, 5, false, &mut rng);
            for w in fam.weights_mut() {
                *w = Complex64::new(w.re.abs(), 0.0);
            }
            let rep = energy_decomposition_check(&fld, &fam, Budget::default()).unwrap();
            assert_eq!(rep.case, ParityCase::EvenNegative);
            let scale = rep.energy.abs().max(rep.diagonal_term).max(1.0);
            assert!(rep.decomposition_residual < 1e-8 * scale);
            assert_eq!(rep.negative_term_ok, Some(true));
            assert!(rep.bound_holds);
        }
    }

    #[test]
    fn decomposition_even_positive_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let fld = f(5);
        let mut fam = random_family(&fld, 2, 4, false, &mut rng);
        for w in fam.weights_mut() {
            *w = Complex64::new(w.re.abs(), 0.0);
        }
        let rep = energy_decomposition_check(&fld, &fam, Budget::default()).unwrap();
        assert_eq!(rep.case, ParityCase::EvenPositive);
        let scale = rep.energy.abs().max(rep.diagonal_term).max(1.0);
        assert!(rep.decomposition_residual < 1e-8 * scale);
        assert_eq!(rep.negative_term_ok, Some(true));
        assert!(rep.bound_holds);
    }

    #[test]
    fn decomposition_single_unit_sphere() {
        let fld = f(3);
        let s = Sphere { center: vec![fld.zero(), fld.zero()], radius: fld.one() };
        let fam = WeightedFamily::unit(2, vec![s]).unwrap();
        let rep = energy_decomposition_check(&fld, &fam, Budget::default()).unwrap();
        let scale = rep.energy.abs().max(rep.diagonal_term).max(1.0);
        assert!(rep.decomposition_residual < 1e-8 * scale);
        assert!(rep.bound_holds);
    }

    #[test]
    fn decomposition_odd_case_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let fld = f(5);
        let mut fam = random_family(&fld, 3, 6, false, &mut rng);
        for w in fam.weights_mut() {
            *w = Complex64::new(w.re.abs(), 0.0);
        }
        let rep = energy_decomposition_check(&fld, &fam, Budget::default()).unwrap();
        assert_eq!(rep.case, ParityCase::Odd);
        assert!(rep.bound_holds, "energy {} bound {}", rep.energy, rep.regime_bound);
    }

    #[test]
    fn bound_check_all_parity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (d, q) in [(2usize, 3u64), (2, 7), (4, 5), (2, 5), (3, 5), (3, 7)] {
            let fld = f(q);
            let case = ParityCase::of(d, q);
            let threshold = case.sphere_threshold(d, q) as usize;
            for _ in 0..25 {
                let count = rng.gen_range(1..=threshold.max(1)).min(12);
                let fam = random_family(&fld, d, count, true, &mut rng);
                let pts = random_points(&fld, d, rng.gen_range(1..30), &mut rng);
                let rep = incidence_bound_check(&fld, &pts, &fam).unwrap();
                assert!(rep.in_regime);
                assert!(
                    rep.holds,
                    "(d={d}, q={q}) deviation {} rhs {}",
                    rep.deviation, rep.rhs
                );
            }
        }
    }

    #[test]
    fn bound_check_flags_out_of_regime() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let fld = f(3);
        // d = 2, q = 5: threshold is q^0 = 1, so two spheres are out of regime.
        let fld5 = f(5);
        let fam = random_family(&fld5, 2, 2, true, &mut rng);
        let pts = random_points(&fld5, 2, 4, &mut rng);
        let rep = incidence_bound_check(&fld5, &pts, &fam).unwrap();
        assert!(!rep.in_regime);

        // Empty family: both sides vanish.
        let empty = WeightedFamily::unit(2, vec![]).unwrap();
        let rep = incidence_bound_check(&fld, &random_points(&fld, 2, 3, &mut rng), &empty).unwrap();
        assert_eq!(rep.deviation, 0.0);
        assert_eq!(rep.rhs, 0.0);
        assert!(rep.holds);
    }

    #[test]
    fn constant_derivation_chain() {
        // Per-field constant dominates the uniform one only below q = 3.
        for q in [3u64, 5, 7, 11, 19] {
            assert!(incidence_bound_constant_for(q) <= incidence_bound_constant() + 1e-12);
        }
        assert!((incidence_bound_constant() - 3.4641016151377544).abs() < 1e-15);
        // In-regime energy cap E <= 4 * 2 q^(d+2) sum|w|^2 for complex
        // weights: checked numerically against the brute energy.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for q in [3u64, 7] {
            let fld = f(q);
            let d = 2usize;
            let count = (q as f64).sqrt().floor() as usize;
            let fam = random_family(&fld, d, count.max(1), true, &mut rng);
            let lifted = lift_family(&fld, &fam).unwrap();
            let e = cone_energy(&fld, &lifted, EnergyMode::Brute, Budget::default()).unwrap();
            let cap = 4.0 * 2.0 * (q as f64).powi(d as i32 + 2) * fam.weight_l2_sq();
            assert!(e <= cap * (1.0 + 1e-9), "q={q}: E={e} cap={cap}");
        }
    }

    #[test]
    fn bound_check_full_grid_unweighted() {
        // P = F^d with w = 1: the incidence count is the total sphere mass
        // and the deviation measures sphere-size fluctuation around q^(d-1).
        let fld = f(3);
        let pts: Vec<Point> = (0..9).map(|i| fld.point_at(i, 2)).collect();
        let spheres = vec![
            Sphere { center: vec![fld.zero(), fld.zero()], radius: fld.one() },
            Sphere { center: vec![fld.one(), fld.element(2)], radius: fld.element(2) },
            Sphere { center: vec![fld.element(2), fld.zero()], radius: fld.zero() },
        ];
        let fam = WeightedFamily::unit(2, spheres.clone()).unwrap();
        let total: usize = spheres
            .iter()
            .map(|s| sphere_points(&fld, s, Budget::default()).unwrap().len())
            .sum();
        let count = incidence_weighted(&fld, &pts, &fam).unwrap();
        assert_eq!(count.re.round() as usize, total);
        let rep = incidence_bound_check(&fld, &pts, &fam).unwrap();
        assert!(rep.in_regime);
        assert!(rep.holds, "deviation {} rhs {}", rep.deviation, rep.rhs);
    }

    #[test]
    fn distance_set_examples() {
        let f3 = f(3);
        let e = vec![vec![f3.zero(), f3.zero()], vec![f3.one(), f3.zero()]];
        let d = distance_set(&f3, &e);
        assert_eq!(d, vec![f3.zero(), f3.one()]);

        let all: Vec<Point> = (0..9).map(|i| f3.point_at(i, 2)).collect();
        let d = distance_set(&f3, &all);
        assert_eq!(d.len(), 3);

        let single = vec![vec![f3.one(), f3.one()]];
        assert_eq!(distance_set(&f3, &single), vec![f3.zero()]);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
        #[test]
        fn identity_residual_vanishes_on_arbitrary_instances(
            seed in 0u64..1_000_000,
            n_spheres in 1usize..6,
            n_points in 1usize..9,
        ) {
            let fld = f(3);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let fam = random_family(&fld, 2, n_spheres, true, &mut rng);
            let pts = random_points(&fld, 2, n_points, &mut rng);
            let rep = lift_identity_check(&fld, &pts, &fam, Budget::default()).unwrap();
            proptest::prop_assert!(rep.identity_residual < 1e-8);
            proptest::prop_assert!(rep.holds);
        }
    }

    #[test]
    fn instance_json_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let fld = f(7);
        let fam = random_family(&fld, 2, 4, true, &mut rng);
        let pts = random_points(&fld, 2, 6, &mut rng);
        let inst = Instance::from_parts(&fld, &pts, &fam);
        let json = serde_json::to_string(&inst).unwrap();
        let back: Instance = serde_json::from_str(&json).unwrap();
        let fld2 = back.field().unwrap();
        let (pts2, fam2) = back.into_parts(&fld2).unwrap();
        assert_eq!(pts, pts2);
        assert_eq!(fam.spheres(), fam2.spheres());
        let a = incidence_weighted(&fld, &pts, &fam).unwrap();
        let b = incidence_weighted(&fld2, &pts2, &fam2).unwrap();
        assert!(close_c(a, b, pts.len() * fam.len().max(1)));
    }
}
