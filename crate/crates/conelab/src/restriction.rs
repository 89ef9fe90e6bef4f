//! Empirical extension-estimate machinery: extension ratios for test
//! functions on the cone, seeded sweeps that estimate the best constant as a
//! maximum over witness families, the three-regime characteristic-function
//! bound for the surface `L^2` norm, dyadic decomposition, and the
//! square-graph witness set behind the necessary conditions.
//!
//! The true operator norm is a supremum over all functions and is out of
//! reach; sweeps report the maximum over the families the proofs identify
//! as extremal (point masses, characteristic sets at dyadic sizes, random
//! complex functions, cone subspaces, the dual witness set), plus the
//! fitted growth of that maximum in `q`.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::ConeVariety;
use crate::constructions::omega_subspace;
use crate::field::{Field, Point, Scalar};
use crate::spectral::{Exponent, GridFn, SurfaceMeasure};
use crate::{Budget, Error, Result};

/// Slope thresholds for classifying the fitted growth of a sweep maximum.
/// These are artifact policy, not mathematics: below the first the trend is
/// called bounded, above the second growing, in between inconclusive.
pub const BOUNDED_SLOPE_MAX: f64 = 0.1;
pub const GROWING_SLOPE_MIN: f64 = 0.25;

/// `||(f dsigma)_v||_(L^r(dx)) / ||f||_(L^p(dsigma))` for `f` given on the
/// cone support.
pub fn extension_ratio(
    cone: &ConeVariety,
    measure: &SurfaceMeasure,
    f: &[Complex64],
    p: &Exponent,
    r: &Exponent,
    budget: Budget,
) -> Result<f64> {
    if f.iter().all(|v| v.norm_sqr() == 0.0) {
        return Err(Error::EmptyInput("extension ratio of the zero function".into()));
    }
    debug_assert_eq!(f.len(), cone.len());
    let ext = measure.extension(f, budget)?;
    let num = ext.lr_counting_norm(r);
    let den = measure.lp_norm(f, p);
    Ok(num / den)
}

/// Witness families evaluated by a sweep.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    /// Point masses on the cone.
    Singletons,
    /// Random characteristic subsets of the cone at dyadic size scales.
    RandomSubsets,
    /// Random complex-valued functions on the cone.
    RandomComplex,
    /// Indicator of the maximal subspace inside the cone.
    ConeSubspace,
    /// Dual-side witness: the square-graph set tested against the
    /// restriction inequality (same operator norm by duality).
    DualGammaSet,
}

impl FamilyKind {
    pub fn all() -> Vec<FamilyKind> {
        vec![
            FamilyKind::Singletons,
            FamilyKind::RandomSubsets,
            FamilyKind::RandomComplex,
            FamilyKind::ConeSubspace,
            FamilyKind::DualGammaSet,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            FamilyKind::Singletons => "singletons",
            FamilyKind::RandomSubsets => "random-subsets",
            FamilyKind::RandomComplex => "random-complex",
            FamilyKind::ConeSubspace => "cone-subspace",
            FamilyKind::DualGammaSet => "dual-gamma-set",
        }
    }
}

impl std::str::FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<FamilyKind> {
        match s.trim() {
            "singletons" => Ok(FamilyKind::Singletons),
            "random-subsets" => Ok(FamilyKind::RandomSubsets),
            "random-complex" => Ok(FamilyKind::RandomComplex),
            "cone-subspace" => Ok(FamilyKind::ConeSubspace),
            "dual-gamma-set" => Ok(FamilyKind::DualGammaSet),
            other => Err(Error::Parse(format!("unknown family '{other}'"))),
        }
    }
}

/// Sweep configuration; mirrors the CLI flags and the config-file format.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepConfig {
    pub qs: Vec<u64>,
    pub n: usize,
    pub p: Exponent,
    pub r: Exponent,
    pub families: Vec<FamilyKind>,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_max_cells")]
    pub max_cells: u64,
}

fn default_max_cells() -> u64 {
    Budget::default().max_cells
}

impl SweepConfig {
    pub fn budget(&self) -> Budget {
        Budget::new(self.max_cells)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QSweepRow {
    pub q: u64,
    pub cone_size: usize,
    pub family_max: BTreeMap<String, f64>,
    pub max_ratio: f64,
    pub argmax: String,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trend {
    Bounded,
    Inconclusive,
    Growing,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrendFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub classification: Trend,
}

/// Least-squares fit of `ln(max ratio)` against `ln q`.
pub fn fit_trend(rows: &[(u64, f64)]) -> TrendFit {
    let n = rows.len() as f64;
    let xs: Vec<f64> = rows.iter().map(|(q, _)| (*q as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|(_, v)| v.max(f64::MIN_POSITIVE).ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let classification = if slope < BOUNDED_SLOPE_MAX {
        Trend::Bounded
    } else if slope > GROWING_SLOPE_MIN {
        Trend::Growing
    } else {
        Trend::Inconclusive
    };
    TrendFit { slope, intercept, r_squared, classification }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RatioReport {
    pub schema_version: u32,
    pub n: usize,
    pub p: Exponent,
    pub r: Exponent,
    pub trials: usize,
    pub seed: u64,
    pub families: Vec<FamilyKind>,
    pub per_q: Vec<QSweepRow>,
    pub fit: TrendFit,
}

impl RatioReport {
    /// `(q, max_ratio)` rows for plotting.
    pub fn plot_rows(&self) -> Vec<(u64, f64)> {
        self.per_q.iter().map(|row| (row.q, row.max_ratio)).collect()
    }
}

/// Run a sweep: for each field size evaluate every family, record per-family
/// maxima and the overall maximum, then fit the growth of the maximum.
pub fn sweep_restriction(config: &SweepConfig) -> Result<RatioReport> {
    if config.families.is_empty() {
        return Err(Error::EmptyInput("sweep needs at least one family".into()));
    }
    if config.qs.is_empty() {
        return Err(Error::EmptyInput("sweep needs at least one field size".into()));
    }
    let budget = config.budget();
    let mut per_q = Vec::with_capacity(config.qs.len());
    for &q in &config.qs {
        let field = Field::prime(q)?;
        let cone = ConeVariety::build(&field, config.n, budget)?;
        let measure = cone.surface_measure();
        let mut family_max = BTreeMap::new();
        let mut best = (f64::NEG_INFINITY, String::new());
        for fam in &config.families {
            let (value, desc) = family_maximum(&cone, &measure, *fam, config, budget)?;
            family_max.insert(fam.name().to_string(), value);
            if value > best.0 {
                best = (value, desc);
            }
        }
        per_q.push(QSweepRow {
            q,
            cone_size: cone.len(),
            family_max,
            max_ratio: best.0,
            argmax: best.1,
        });
    }
    let fit = fit_trend(&per_q.iter().map(|row| (row.q, row.max_ratio)).collect::<Vec<_>>());
    Ok(RatioReport {
        schema_version: 1,
        n: config.n,
        p: config.p,
        r: config.r,
        trials: config.trials,
        seed: config.seed,
        families: config.families.clone(),
        per_q,
        fit,
    })
}

fn trial_rng(seed: u64, q: u64, family: FamilyKind, trial: usize) -> ChaCha8Rng {
    let tag = family.name().bytes().fold(0u64, |acc, b| acc.wrapping_mul(31).wrapping_add(b as u64));
    ChaCha8Rng::seed_from_u64(
        seed ^ q.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ tag.wrapping_mul(0x2545_f491_4f6c_dd1d)
            ^ (trial as u64).wrapping_mul(0xd6e8_feb8_6659_fd93),
    )
}

fn family_maximum(
    cone: &ConeVariety,
    measure: &SurfaceMeasure,
    family: FamilyKind,
    config: &SweepConfig,
    budget: Budget,
) -> Result<(f64, String)> {
    let nc = cone.len();
    let p = &config.p;
    let r = &config.r;
    match family {
        FamilyKind::Singletons => {
            // The extension of a point mass has constant modulus, so every
            // singleton gives the same ratio; probe a few anyway.
            let count = nc.min(4);
            let mut best = (f64::NEG_INFINITY, String::new());
            for j in 0..count {
                let idx = j * nc / count;
                let mut f = vec![Complex64::new(0.0, 0.0); nc];
                f[idx] = Complex64::new(1.0, 0.0);
                let v = extension_ratio(cone, measure, &f, p, r, budget)?;
                if v > best.0 {
                    best = (v, format!("singleton@{idx}"));
                }
            }
            Ok(best)
        }
        FamilyKind::RandomSubsets => {
            let scales: Vec<usize> = {
                let mut s = Vec::new();
                let mut size = 1usize;
                while size <= nc {
                    s.push(size);
                    size *= 2;
                }
                s
            };
            let results: Vec<(f64, String)> = (0..config.trials)
                .into_par_iter()
                .map(|t| {
                    let size = scales[t % scales.len()];
                    let mut rng = trial_rng(config.seed, cone.field().order(), family, t);
                    let mut indices: Vec<usize> = (0..nc).collect();
                    indices.partial_shuffle(&mut rng, size);
                    let mut f = vec![Complex64::new(0.0, 0.0); nc];
                    for &i in indices.iter().take(size) {
                        f[i] = Complex64::new(1.0, 0.0);
                    }
                    let v = extension_ratio(cone, measure, &f, p, r, budget)?;
                    Ok((v, format!("subset(size={size}, trial={t})")))
                })
                .collect::<Result<_>>()?;
            Ok(max_entry(results))
        }
        FamilyKind::RandomComplex => {
            let results: Vec<(f64, String)> = (0..config.trials)
                .into_par_iter()
                .map(|t| {
                    let mut rng = trial_rng(config.seed, cone.field().order(), family, t);
                    let f: Vec<Complex64> = (0..nc)
                        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                        .collect();
                    let v = extension_ratio(cone, measure, &f, p, r, budget)?;
                    Ok((v, format!("random-complex(trial={t})")))
                })
                .collect::<Result<_>>()?;
            Ok(max_entry(results))
        }
        FamilyKind::ConeSubspace => {
            let field = cone.field();
            let omega = omega_subspace(field, cone.dim(), budget)?;
            let members: std::collections::HashSet<usize> = omega
                .elements(field)
                .iter()
                .map(|pt| field.point_index(pt))
                .collect();
            let f: Vec<Complex64> = cone
                .grid_indices()
                .iter()
                .map(|idx| {
                    if members.contains(idx) {
                        Complex64::new(1.0, 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect();
            let v = extension_ratio(cone, measure, &f, p, r, budget)?;
            Ok((v, format!("cone-subspace(size={})", members.len())))
        }
        FamilyKind::DualGammaSet => {
            let field = cone.field();
            let gamma = gamma_testset(field, cone.dim(), budget)?;
            let indicator_indices: Vec<usize> =
                gamma.iter().map(|pt| field.point_index(pt)).collect();
            let g = GridFn::indicator(field, cone.dim(), &indicator_indices, budget)?;
            let ghat = measure.restrict(&g.fourier());
            let num = measure.lp_norm(&ghat, &p.conjugate());
            let den = (gamma.len() as f64).powf(1.0 / r.conjugate().as_f64());
            Ok((num / den, format!("dual-gamma(size={})", gamma.len())))
        }
    }
}

fn max_entry(entries: Vec<(f64, String)>) -> (f64, String) {
    entries
        .into_iter()
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap_or((f64::NEG_INFINITY, String::new()))
}

/// Size regime of a characteristic set relative to `q^(n/2)` and
/// `q^((n+2)/2)`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum SizeRegime {
    Small,
    Middle,
    Large,
}

#[derive(Clone, Debug, Serialize)]
pub struct L2CharEstimate {
    pub size: usize,
    /// `M = q^(1-n) sum_(xi in cone) |G^(xi)|^2`.
    pub m: f64,
    /// Diagonal part, exactly `|G|`.
    pub m1: f64,
    /// Nonpositive part from pairs with difference in the dual variety.
    pub m2: f64,
    /// Remaining part, at most `q^(-n/2) |G|^2`.
    pub m3: f64,
    pub dual_pairs: u64,
    pub decomposition_residual: f64,
    /// `|G| + q^(-n/2) |G|^2`.
    pub bound: f64,
    pub regime: SizeRegime,
    pub holds: bool,
}

/// Evaluate the surface `L^2` mass `M` of a characteristic set and its exact
/// signed decomposition `M = M1 + M2 + M3`. Requires `q = 3 mod 4` and
/// `n = 0 mod 4` so the cone transform takes exactly three real values.
pub fn l2_char_estimate(cone: &ConeVariety, subset: &[usize], budget: Budget) -> Result<L2CharEstimate> {
    let field = cone.field();
    let q = field.order();
    let n = cone.dim();
    if q % 4 != 3 || n % 4 != 0 {
        return Err(Error::Precondition(format!(
            "need q = 3 mod 4 and n = 0 mod 4, got q = {q}, n = {n}"
        )));
    }
    {
        let mut seen = std::collections::HashSet::new();
        for &i in subset {
            if !seen.insert(i) {
                return Err(Error::Precondition("subset contains duplicates".into()));
            }
        }
    }
    let size = subset.len();
    let qf = q as f64;
    let g = GridFn::indicator(field, n, subset, budget)?;
    let ghat = g.fourier();
    let m = qf.powi(1 - n as i32)
        * cone
            .grid_indices()
            .iter()
            .map(|&i| ghat.values()[i].norm_sqr())
            .sum::<f64>();

    // Pairs (x, y) in G^2 with x - y in the dual variety: by direct pair
    // enumeration when small, otherwise through the autocorrelation
    // (the inverse transform of |G^|^2 counts pairs at each difference).
    let dual_pairs: u64 = if size * size <= 1 << 14 {
        let pts: Vec<Point> = subset.iter().map(|&i| field.point_at(i, n)).collect();
        let mut count = 0u64;
        for x in &pts {
            for y in &pts {
                let diff: Point = x.iter().zip(y).map(|(&a, &b)| field.sub(a, b)).collect();
                if crate::cone::in_dual_variety(field, &diff)? {
                    count += 1;
                }
            }
        }
        count
    } else {
        let sq = GridFn::from_values(
            field,
            n,
            ghat.values().iter().map(|v| Complex64::new(v.norm_sqr(), 0.0)).collect(),
        )?;
        let corr = sq.inverse_fourier();
        let mut count = 0u64;
        for (idx, v) in corr.values().iter().enumerate() {
            let x = field.point_at(idx, n);
            if crate::cone::in_dual_variety(field, &x)? {
                let pairs = v.re.round();
                debug_assert!((v.re - pairs).abs() < 1e-4, "autocorrelation not integral");
                count += pairs as u64;
            }
        }
        count
    };

    let m1 = size as f64;
    let m2 = -(qf - 1.0) * qf.powf(-(n as f64) / 2.0) * (dual_pairs as f64);
    let m3 = qf.powf(-(n as f64) / 2.0) * ((size as f64) * (size as f64) - dual_pairs as f64);
    let bound = m1 + qf.powf(-(n as f64) / 2.0) * (size as f64) * (size as f64);
    let residual = (m - (m1 + m2 + m3)).abs();
    let regime = if (size as f64) <= qf.powf(n as f64 / 2.0) {
        SizeRegime::Small
    } else if (size as f64) <= qf.powf((n as f64 + 2.0) / 2.0) {
        SizeRegime::Middle
    } else {
        SizeRegime::Large
    };
    let scale = m.abs().max(bound).max(1.0);
    Ok(L2CharEstimate {
        size,
        m,
        m1,
        m2,
        m3,
        dual_pairs,
        decomposition_residual: residual,
        bound,
        regime,
        holds: m2 <= 0.0 && m3 >= -1e-9 * scale && m <= bound + 1e-9 * scale,
    })
}

/// Dyadic level sets of a `[0, 1]`-valued function: level `i` holds the
/// points with `2^(-i-1) < g <= 2^(-i)`, levels beyond the cutoff fall into
/// the tail.
#[derive(Clone, Debug)]
pub struct DyadicDecomposition {
    pub cutoff: usize,
    pub levels: Vec<Vec<usize>>,
    pub tail: Vec<usize>,
}

/// Decompose `g` into dyadic level sets. The cutoff must be at least
/// `n log2 q` so the tail mass is at most 1 with constant one.
pub fn dyadic_decompose(g: &GridFn, cutoff: usize) -> Result<DyadicDecomposition> {
    let n = g.dim();
    let q = g.field().order() as f64;
    let min_cutoff = (n as f64 * q.log2()).ceil() as usize;
    if cutoff < min_cutoff {
        return Err(Error::Precondition(format!(
            "cutoff {cutoff} below n log2 q = {min_cutoff}"
        )));
    }
    let mut levels = vec![Vec::new(); cutoff + 1];
    let mut tail = Vec::new();
    for (idx, v) in g.values().iter().enumerate() {
        if v.im.abs() > 1e-12 || v.re < -1e-12 || v.re > 1.0 + 1e-12 {
            return Err(Error::Precondition(format!(
                "value {v} at index {idx} is not real in [0, 1]"
            )));
        }
        let x = v.re;
        if x <= 0.0 {
            continue;
        }
        let mut level = (-x.log2()).floor().max(0.0) as usize;
        // Nudge across floating-point boundaries so the half-open brackets
        // are honored exactly.
        while x <= 2f64.powi(-(level as i32) - 1) {
            level += 1;
        }
        while level > 0 && x > 2f64.powi(-(level as i32)) {
            level -= 1;
        }
        if level <= cutoff {
            levels[level].push(idx);
        } else {
            tail.push(idx);
        }
    }
    Ok(DyadicDecomposition { cutoff, levels, tail })
}

impl DyadicDecomposition {
    /// `g~ = sum_(i <= L) 2^(-i) 1_(G_i)`.
    pub fn reconstruction(&self, field: &Arc<Field>, dim: usize, budget: Budget) -> Result<GridFn> {
        let mut out = GridFn::zeros(field, dim, budget)?;
        for (i, level) in self.levels.iter().enumerate() {
            let v = Complex64::new(2f64.powi(-(i as i32)), 0.0);
            for &idx in level {
                out.values_mut()[idx] = v;
            }
        }
        Ok(out)
    }

    /// Check `g <= g~ < 2g` on every non-tail support point.
    pub fn reconstruction_brackets(&self, g: &GridFn) -> bool {
        for (i, level) in self.levels.iter().enumerate() {
            let v = 2f64.powi(-(i as i32));
            for &idx in level {
                let x = g.values()[idx].re;
                if !(x <= v && v < 2.0 * x) {
                    return false;
                }
            }
        }
        true
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.len()).collect()
    }

    /// `sum_i 2^(-kappa i) |G_i|` (the mass that equals 1 for normalized
    /// dyadic-valued input).
    pub fn normalized_mass(&self, kappa: f64) -> f64 {
        self.levels
            .iter()
            .enumerate()
            .map(|(i, l)| 2f64.powf(-kappa * i as f64) * l.len() as f64)
            .sum()
    }

    /// Per-level bound `|G_i| <= 2^(kappa i)` implied by unit mass.
    pub fn level_bound_holds(&self, kappa: f64) -> bool {
        self.levels
            .iter()
            .enumerate()
            .all(|(i, l)| (l.len() as f64) <= 2f64.powf(kappa * i as f64) * (1.0 + 1e-9))
    }
}

/// The three partial sums of the level-set surface norms, split at
/// `q^(n/2)` and `q^((n+2)/2)` by nominal level size `2^(kappa i)`.
#[derive(Clone, Debug, Serialize)]
pub struct LevelSums {
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
    /// Surface `L^2` norm of the transform of the reconstruction.
    pub total_norm: f64,
    /// Triangle-inequality domination: `total <= u1 + u2 + u3`.
    pub dominated: bool,
}

pub fn level_sums(
    decomposition: &DyadicDecomposition,
    cone: &ConeVariety,
    kappa: f64,
    budget: Budget,
) -> Result<LevelSums> {
    let field = cone.field();
    let n = cone.dim();
    let q = field.order() as f64;
    let measure_len = cone.len() as f64;
    let surface_l2 = |grid: &GridFn| -> f64 {
        (cone
            .grid_indices()
            .iter()
            .map(|&i| grid.values()[i].norm_sqr())
            .sum::<f64>()
            / measure_len)
            .sqrt()
    };

    let mut sums = [0.0f64; 3];
    for (i, level) in decomposition.levels.iter().enumerate() {
        if level.is_empty() {
            continue;
        }
        let nominal = 2f64.powf(kappa * i as f64);
        let class = if nominal <= q.powf(n as f64 / 2.0) {
            0
        } else if nominal <= q.powf((n as f64 + 2.0) / 2.0) {
            1
        } else {
            2
        };
        let indicator = GridFn::indicator(field, n, level, budget)?;
        let norm = surface_l2(&indicator.fourier());
        sums[class] += 2f64.powi(-(i as i32)) * norm;
    }
    let recon = decomposition.reconstruction(field, n, budget)?;
    let total_norm = surface_l2(&recon.fourier());
    Ok(LevelSums {
        u1: sums[0],
        u2: sums[1],
        u3: sums[2],
        total_norm,
        dominated: total_norm <= sums.iter().sum::<f64>() + 1e-9 * total_norm.max(1.0),
    })
}

/// The square-graph witness set: points of `F^(n-1) x D` (D the nonzero
/// squares) whose next-to-last coordinate is determined by
/// `x_(n-1) = (x_1^2 + ... + x_(n-2)^2) / (4 x_n)`. Its size is
/// `q^(n-2) (q-1)/2`.
pub fn gamma_testset(field: &Arc<Field>, n: usize, budget: Budget) -> Result<Vec<Point>> {
    if n < 3 {
        return Err(Error::DimensionMismatch { expected: 3, got: n });
    }
    let head_len = budget.grid_len(field.order(), n - 2)?;
    let squares: Vec<_> = field
        .nonzero_elements()
        .filter(|&s| field.is_square(s).unwrap())
        .collect();
    let four = field.from_int(4);
    let mut out = Vec::with_capacity(head_len * squares.len());
    for idx in 0..head_len {
        let head = field.point_at(idx, n - 2);
        let norm = field.norm(&head);
        for &xn in &squares {
            let denom = field.inv(field.mul(four, xn))?;
            let mut pt = head.clone();
            pt.push(field.mul(norm, denom));
            pt.push(xn);
            out.push(pt);
        }
    }
    Ok(out)
}

/// Membership test matching [`gamma_testset`].
pub fn gamma_testset_contains(field: &Field, x: &[Scalar]) -> bool {
    let n = x.len();
    if n < 3 || x[n - 1].index() == 0 || !field.is_square(x[n - 1]).unwrap() {
        return false;
    }
    let norm = field.norm(&x[..n - 2]);
    let four_xn = field.mul(field.from_int(4), x[n - 1]);
    field.mul(x[n - 2], four_xn) == norm
}


#[derive(Clone, Debug, Serialize)]
pub struct GammaWitnessReport {
    pub n: usize,
    pub q: u64,
    pub set_size: usize,
    pub expected_size: u64,
    /// `q^((n-2)/2) (q-1)/2`.
    pub expected_magnitude: f64,
    /// Cone points with nonzero next-to-last coordinate.
    pub checked_points: usize,
    pub max_abs_deviation: f64,
    pub holds: bool,
}

/// Check that the transform of the witness indicator has constant modulus
/// `q^((n-2)/2) (q-1)/2` at every cone point whose next-to-last coordinate
/// is nonzero, via the dense transform oracle.
pub fn gamma_testset_ft_check(cone: &ConeVariety, budget: Budget) -> Result<GammaWitnessReport> {
    let field = cone.field();
    let n = cone.dim();
    let q = field.order();
    let set = gamma_testset(field, n, budget)?;
    let indices: Vec<usize> = set.iter().map(|pt| field.point_index(pt)).collect();
    let indicator = GridFn::indicator(field, n, &indices, budget)?;
    let hat = indicator.fourier();
    let expected = (q as f64).powf((n as f64 - 2.0) / 2.0) * ((q - 1) as f64) / 2.0;
    let mut checked = 0usize;
    let mut max_dev = 0.0f64;
    for (pt, &idx) in cone.points().iter().zip(cone.grid_indices()) {
        if pt[n - 2].index() == 0 {
            continue;
        }
        checked += 1;
        let dev = (hat.values()[idx].norm() - expected).abs();
        max_dev = max_dev.max(dev);
    }
    Ok(GammaWitnessReport {
        n,
        q,
        set_size: set.len(),
        expected_size: q.pow(n as u32 - 2) * (q - 1) / 2,
        expected_magnitude: expected,
        checked_points: checked,
        max_abs_deviation: max_dev,
        holds: max_dev <= 1e-8 * (set.len() as f64).max(1.0),
    })
}
