//! Dense Fourier analysis on `F^n`: forward and inverse transforms, the
//! extension operator against a normalized surface measure, and the norms
//! used throughout (counting-measure `L^r`, normalized surface `L^p`).
//!
//! Transforms exploit separability: `n` rank-1 passes of cost `q` per output
//! give `O(n q^(n+1))` instead of the naive `O(q^(2n))`. The naive transform
//! is kept as an oracle for grids up to `3^6` cells.

use std::io::{BufRead, Write};
use std::sync::Arc;

use num_complex::Complex64;
use num_rational::Ratio;
use rayon::prelude::*;

use crate::characters::CharTable;
use crate::field::{Field, Point, Scalar};
use crate::{Budget, Error, Result};

/// Largest grid the naive quadratic-cost transform oracle will accept.
pub const NAIVE_ORACLE_MAX_CELLS: usize = 729;

/// An exact Lebesgue exponent: a rational in `[1, oo)` or infinity, so
/// conjugate pairs like `(2n+4)/n` never round.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Exponent {
    Finite(Ratio<i64>),
    Infinity,
}

impl Exponent {
    pub fn new(num: i64, den: i64) -> Result<Exponent> {
        if den == 0 || num * den.signum() < den.abs() {
            return Err(Error::BadExponent(format!("{num}/{den}")));
        }
        Ok(Exponent::Finite(Ratio::new(num, den)))
    }

    pub fn one() -> Exponent {
        Exponent::Finite(Ratio::new(1, 1))
    }

    pub fn from_int(k: i64) -> Result<Exponent> {
        Exponent::new(k, 1)
    }

    /// Parse `"a/b"`, `"a"`, or `"inf"`.
    pub fn parse(s: &str) -> Result<Exponent> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s == "∞" {
            return Ok(Exponent::Infinity);
        }
        let (num, den) = match s.split_once('/') {
            Some((a, b)) => (
                a.trim().parse::<i64>().map_err(|e| Error::Parse(e.to_string()))?,
                b.trim().parse::<i64>().map_err(|e| Error::Parse(e.to_string()))?,
            ),
            None => (s.parse::<i64>().map_err(|e| Error::Parse(e.to_string()))?, 1),
        };
        Exponent::new(num, den)
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            Exponent::Finite(r) => *r.numer() as f64 / *r.denom() as f64,
            Exponent::Infinity => f64::INFINITY,
        }
    }

    /// Holder conjugate: `p' = p/(p-1)`, with `1' = oo` and `oo' = 1`.
    pub fn conjugate(&self) -> Exponent {
        match self {
            Exponent::Infinity => Exponent::one(),
            Exponent::Finite(r) if *r == Ratio::new(1, 1) => Exponent::Infinity,
            Exponent::Finite(r) => Exponent::Finite(r / (r - Ratio::new(1, 1))),
        }
    }
}

impl std::fmt::Display for Exponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Exponent::Finite(r) if *r.denom() == 1 => write!(f, "{}", r.numer()),
            Exponent::Finite(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Exponent::Infinity => write!(f, "inf"),
        }
    }
}

impl serde::Serialize for Exponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Exponent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Exponent::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// A dense complex-valued function on `F^n`, indexed by the canonical
/// point encoding (coordinate 0 fastest).
#[derive(Clone)]
pub struct GridFn {
    field: Arc<Field>,
    dim: usize,
    values: Vec<Complex64>,
}

impl GridFn {
    pub fn zeros(field: &Arc<Field>, dim: usize, budget: Budget) -> Result<GridFn> {
        let len = budget.grid_len(field.order(), dim)?;
        Ok(GridFn { field: Arc::clone(field), dim, values: vec![Complex64::new(0.0, 0.0); len] })
    }

    pub fn from_values(field: &Arc<Field>, dim: usize, values: Vec<Complex64>) -> Result<GridFn> {
        let expected = (field.order() as usize).pow(dim as u32);
        if values.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: values.len() });
        }
        Ok(GridFn { field: Arc::clone(field), dim, values })
    }

    pub fn from_fn(
        field: &Arc<Field>,
        dim: usize,
        budget: Budget,
        mut f: impl FnMut(&[Scalar]) -> Complex64,
    ) -> Result<GridFn> {
        let mut g = GridFn::zeros(field, dim, budget)?;
        for idx in 0..g.values.len() {
            let pt = field.point_at(idx, dim);
            g.values[idx] = f(&pt);
        }
        Ok(g)
    }

    /// Indicator function of a set of grid indices.
    pub fn indicator(field: &Arc<Field>, dim: usize, indices: &[usize], budget: Budget) -> Result<GridFn> {
        let mut g = GridFn::zeros(field, dim, budget)?;
        for &i in indices {
            g.values[i] = Complex64::new(1.0, 0.0);
        }
        Ok(g)
    }

    pub fn field(&self) -> &Arc<Field> {
        &self.field
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn at(&self, pt: &[Scalar]) -> Complex64 {
        self.values[self.field.point_index(pt)]
    }

    /// `g^(xi) = sum_x e(-xi.x) g(x)`.
    pub fn fourier(&self) -> GridFn {
        self.transform(true)
    }

    /// `f_v(x) = q^(-n) sum_xi e(xi.x) f(xi)`.
    pub fn inverse_fourier(&self) -> GridFn {
        let mut out = self.transform(false);
        let scale = 1.0 / (self.values.len() as f64);
        for v in &mut out.values {
            *v *= scale;
        }
        out
    }

    /// Separable transform: one rank-1 pass per coordinate.
    fn transform(&self, forward: bool) -> GridFn {
        let q = self.field.order() as usize;
        let chars = CharTable::new(&self.field);
        // kernel[a * q + t] = e(-a t) for the forward transform, e(a t) inverse.
        let mut kernel = vec![Complex64::new(0.0, 0.0); q * q];
        for a in 0..q {
            for t in 0..q {
                let prod = self.field.mul(Scalar(a as u32), Scalar(t as u32));
                kernel[a * q + t] = if forward { chars.e_neg(prod) } else { chars.e(prod) };
            }
        }

        let mut cur = self.values.clone();
        let total = cur.len();
        for axis in 0..self.dim {
            let stride = q.pow(axis as u32);
            let mut next = vec![Complex64::new(0.0, 0.0); total];
            let fibers = total / q;
            // Fiber index -> base offset of that fiber along the axis.
            let base_of = |fiber: usize| -> usize {
                let low = fiber % stride;
                let high = fiber / stride;
                high * stride * q + low
            };
            if total >= 1 << 14 {
                // Parallelize over fibers, writing q outputs each.
                let results: Vec<(usize, Vec<Complex64>)> = (0..fibers)
                    .into_par_iter()
                    .map(|fiber| {
                        let base = base_of(fiber);
                        let mut out = vec![Complex64::new(0.0, 0.0); q];
                        for (a, o) in out.iter_mut().enumerate() {
                            let row = &kernel[a * q..(a + 1) * q];
                            let mut acc = Complex64::new(0.0, 0.0);
                            for (t, k) in row.iter().enumerate() {
                                acc += k * cur[base + t * stride];
                            }
                            *o = acc;
                        }
                        (base, out)
                    })
                    .collect();
                for (base, out) in results {
                    for (a, v) in out.into_iter().enumerate() {
                        next[base + a * stride] = v;
                    }
                }
            } else {
                for fiber in 0..fibers {
                    let base = base_of(fiber);
                    for a in 0..q {
                        let row = &kernel[a * q..(a + 1) * q];
                        let mut acc = Complex64::new(0.0, 0.0);
                        for (t, k) in row.iter().enumerate() {
                            acc += k * cur[base + t * stride];
                        }
                        next[base + a * stride] = acc;
                    }
                }
            }
            cur = next;
        }
        GridFn { field: Arc::clone(&self.field), dim: self.dim, values: cur }
    }

    /// Naive quadratic-cost transform, kept as an oracle for small grids.
    pub fn fourier_naive(&self) -> Result<GridFn> {
        if self.values.len() > NAIVE_ORACLE_MAX_CELLS {
            return Err(Error::BudgetExceeded {
                needed: self.values.len() as u128,
                budget: NAIVE_ORACLE_MAX_CELLS as u128,
            });
        }
        let chars = CharTable::new(&self.field);
        let mut out = vec![Complex64::new(0.0, 0.0); self.values.len()];
        for (i, o) in out.iter_mut().enumerate() {
            let xi = self.field.point_at(i, self.dim);
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &g) in self.values.iter().enumerate() {
                let x = self.field.point_at(j, self.dim);
                acc += chars.e_neg(self.field.dot(&xi, &x)) * g;
            }
            *o = acc;
        }
        Ok(GridFn { field: Arc::clone(&self.field), dim: self.dim, values: out })
    }

    /// Counting-measure norm `(sum_x |u(x)|^r)^(1/r)`, `max |u|` for `r = oo`.
    pub fn lr_counting_norm(&self, r: &Exponent) -> f64 {
        match r {
            Exponent::Infinity => self.values.iter().map(|v| v.norm()).fold(0.0, f64::max),
            Exponent::Finite(rat) => {
                let rf = *rat.numer() as f64 / *rat.denom() as f64;
                let sum: f64 = self.values.iter().map(|v| v.norm().powf(rf)).sum();
                sum.powf(1.0 / rf)
            }
        }
    }

    pub fn l2_counting_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Flat dump `index,re,im` with round-trip-exact formatting.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,re,im")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{i},{:e},{:e}", v.re, v.im)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(field: &Arc<Field>, dim: usize, r: R) -> Result<GridFn> {
        let expected = (field.order() as usize).pow(dim as u32);
        let mut values = vec![Complex64::new(0.0, 0.0); expected];
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if lineno == 0 && line.starts_with("index") {
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let idx: usize = parts
                .next()
                .ok_or_else(|| Error::Parse(format!("line {lineno}: missing index")))?
                .trim()
                .parse()
                .map_err(|e: std::num::ParseIntError| Error::Parse(e.to_string()))?;
            let re: f64 = parts
                .next()
                .ok_or_else(|| Error::Parse(format!("line {lineno}: missing re")))?
                .trim()
                .parse()
                .map_err(|e: std::num::ParseFloatError| Error::Parse(e.to_string()))?;
            let im: f64 = parts
                .next()
                .ok_or_else(|| Error::Parse(format!("line {lineno}: missing im")))?
                .trim()
                .parse()
                .map_err(|e: std::num::ParseFloatError| Error::Parse(e.to_string()))?;
            if idx >= expected {
                return Err(Error::Parse(format!("index {idx} out of range")));
            }
            values[idx] = Complex64::new(re, im);
        }
        GridFn::from_values(field, dim, values)
    }
}

/// Normalized counting measure on a finite support in `F^n`: mass `1/N`
/// per point.
pub struct SurfaceMeasure {
    field: Arc<Field>,
    dim: usize,
    support: Vec<Point>,
    indices: Vec<usize>,
}

impl SurfaceMeasure {
    pub fn new(field: &Arc<Field>, support: Vec<Point>) -> Result<SurfaceMeasure> {
        if support.is_empty() {
            return Err(Error::EmptyInput("surface measure needs a nonempty support".into()));
        }
        let dim = support[0].len();
        let mut indices = Vec::with_capacity(support.len());
        let mut seen = std::collections::HashSet::new();
        for pt in &support {
            if pt.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: pt.len() });
            }
            let idx = field.point_index(pt);
            if !seen.insert(idx) {
                return Err(Error::Precondition("surface support contains duplicates".into()));
            }
            indices.push(idx);
        }
        Ok(SurfaceMeasure { field: Arc::clone(field), dim, support, indices })
    }

    pub fn field(&self) -> &Arc<Field> {
        &self.field
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn support(&self) -> &[Point] {
        &self.support
    }

    pub fn grid_indices(&self) -> &[usize] {
        &self.indices
    }

    /// `(f dsigma)_v(x) = (1/N) sum_xi f(xi) e(x.xi)` over the whole grid,
    /// computed through the fast inverse transform of the grid embedding.
    pub fn extension(&self, f: &[Complex64], budget: Budget) -> Result<GridFn> {
        if f.len() != self.support.len() {
            return Err(Error::DimensionMismatch { expected: self.support.len(), got: f.len() });
        }
        let mut embedded = GridFn::zeros(&self.field, self.dim, budget)?;
        for (&idx, &v) in self.indices.iter().zip(f) {
            embedded.values_mut()[idx] = v;
        }
        let mut out = embedded.inverse_fourier();
        let scale = (out.len() as f64) / (self.support.len() as f64);
        for v in out.values_mut() {
            *v *= scale;
        }
        Ok(out)
    }

    /// Direct-summation oracle for [`SurfaceMeasure::extension`].
    pub fn extension_direct(&self, f: &[Complex64], budget: Budget) -> Result<GridFn> {
        if f.len() != self.support.len() {
            return Err(Error::DimensionMismatch { expected: self.support.len(), got: f.len() });
        }
        let chars = CharTable::new(&self.field);
        let mut out = GridFn::zeros(&self.field, self.dim, budget)?;
        let n = self.dim;
        let mass = 1.0 / (self.support.len() as f64);
        let field = &self.field;
        let support = &self.support;
        out.values_mut()
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, o)| {
                let x = field.point_at(i, n);
                let mut acc = Complex64::new(0.0, 0.0);
                for (xi, &fv) in support.iter().zip(f) {
                    acc += fv * chars.e_dot(&x, xi);
                }
                *o = acc * mass;
            });
        Ok(out)
    }

    /// `(1/N) sum f`.
    pub fn integrate(&self, f: &[Complex64]) -> Complex64 {
        f.iter().sum::<Complex64>() / (self.support.len() as f64)
    }

    /// Normalized surface norm `((1/N) sum |f|^p)^(1/p)`.
    pub fn lp_norm(&self, f: &[Complex64], p: &Exponent) -> f64 {
        match p {
            Exponent::Infinity => f.iter().map(|v| v.norm()).fold(0.0, f64::max),
            Exponent::Finite(rat) => {
                let pf = *rat.numer() as f64 / *rat.denom() as f64;
                let mean: f64 =
                    f.iter().map(|v| v.norm().powf(pf)).sum::<f64>() / (f.len() as f64);
                mean.powf(1.0 / pf)
            }
        }
    }

    /// Restriction of a grid function to the support, in support order.
    pub fn restrict(&self, g: &GridFn) -> Vec<Complex64> {
        self.indices.iter().map(|&i| g.values()[i]).collect()
    }
}
