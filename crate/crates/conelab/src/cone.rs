//! The cone variety `C_n` in `F^n`, its dual quadratic form `Gamma`, the dual
//! variety `C_n* = {Gamma = 0}`, exact cardinality, and the closed form of
//! the inverse Fourier transform of the cone indicator, with a brute-force
//! summation oracle.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::characters::{gauss_power, gauss_power_sign, quadratic_char, CharTable};
use crate::field::{Field, Point, Scalar};
use crate::spectral::SurfaceMeasure;
use crate::{Budget, Error, Result};

/// `C_n = { xi : xi_(n-1) xi_n = xi_1^2 + ... + xi_(n-2)^2 }`, `n >= 3`.
pub struct ConeVariety {
    field: Arc<Field>,
    n: usize,
    points: Vec<Point>,
    indices: Vec<usize>,
}

/// Whether a point satisfies the cone equation.
pub fn on_cone(field: &Field, xi: &[Scalar]) -> bool {
    let n = xi.len();
    let lhs = field.mul(xi[n - 2], xi[n - 1]);
    let rhs = field.norm(&xi[..n - 2]);
    lhs == rhs
}

/// The dual form `Gamma(x) = x_1^2 + ... + x_(n-2)^2 - 4 x_(n-1) x_n`.
pub fn gamma(field: &Field, x: &[Scalar]) -> Result<Scalar> {
    let n = x.len();
    if n < 3 {
        return Err(Error::DimensionMismatch { expected: 3, got: n });
    }
    let head = field.norm(&x[..n - 2]);
    let four = field.from_int(4);
    let tail = field.mul(four, field.mul(x[n - 2], x[n - 1]));
    Ok(field.sub(head, tail))
}

/// Membership in the dual variety `C_n*`.
pub fn in_dual_variety(field: &Field, x: &[Scalar]) -> Result<bool> {
    Ok(gamma(field, x)?.index() == 0)
}

impl ConeVariety {
    /// Enumerate the cone by scanning the grid.
    pub fn build(field: &Arc<Field>, n: usize, budget: Budget) -> Result<ConeVariety> {
        if n < 3 {
            return Err(Error::DimensionMismatch { expected: 3, got: n });
        }
        let len = budget.grid_len(field.order(), n)?;
        let mut points = Vec::new();
        let mut indices = Vec::new();
        for idx in 0..len {
            let pt = field.point_at(idx, n);
            if on_cone(field, &pt) {
                points.push(pt);
                indices.push(idx);
            }
        }
        let cone = ConeVariety { field: Arc::clone(field), n, points, indices };
        debug_assert_eq!(cone.points.len() as u64, cone.cardinality_closed());
        Ok(cone)
    }

    pub fn field(&self) -> &Arc<Field> {
        &self.field
    }

    pub fn dim(&self) -> usize {
        self.n
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

    pub fn grid_indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn contains(&self, xi: &[Scalar]) -> bool {
        xi.len() == self.n && on_cone(&self.field, xi)
    }

    /// Exact cardinality from the closed form: `q^(n-1) + (q-1) G_1^(n-2)`
    /// for even `n` (the Gauss power is a real integer there), `q^(n-1)` for
    /// odd `n`.
    pub fn cardinality_closed(&self) -> u64 {
        cardinality_closed(&self.field, self.n)
    }

    /// The normalized surface measure on the cone.
    pub fn surface_measure(&self) -> SurfaceMeasure {
        SurfaceMeasure::new(&self.field, self.points.clone()).unwrap()
    }

    /// Point list as CSV, one row per cone point.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for pt in &self.points {
            let row: Vec<String> = pt.iter().map(|s| s.index().to_string()).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

pub fn cardinality_closed(field: &Field, n: usize) -> u64 {
    let q = field.order() as i128;
    let base = q.pow(n as u32 - 1);
    if n % 2 == 0 {
        let g = gauss_power_sign(field, n as u32);
        debug_assert!(g.im.abs() < 1e-9);
        let total = base + (q - 1) * (g.re.round() as i128);
        total as u64
    } else {
        base as u64
    }
}

/// Closed form of `C_n_v(x) = q^(-n) sum_(xi in C_n) e(x.xi)`.
///
/// Even `n`: `delta_0(x)/q + (q-1) G_1^(n-2) / q^n` on the dual variety and
/// `-G_1^(n-2) / q^n` off it. Odd `n`: `delta_0(x)/q` on the dual variety and
/// `G_1^(n-1) eta(-Gamma(x)) / q^n` off it. Values are always real because
/// only even Gauss powers appear.
pub fn cone_ift_closed(field: &Field, x: &[Scalar]) -> Complex64 {
    let n = x.len();
    assert!(n >= 3, "cone needs n >= 3");
    let q = field.order() as f64;
    let qn = q.powi(n as i32);
    let is_zero = x.iter().all(|s| s.index() == 0);
    let g = gamma(field, x).expect("dimension checked");
    let on_dual = g.index() == 0;
    if n % 2 == 0 {
        let gp = gauss_power_sign(field, n as u32).re;
        if on_dual {
            let delta = if is_zero { 1.0 / q } else { 0.0 };
            Complex64::new(delta + (q - 1.0) * gp / qn, 0.0)
        } else {
            Complex64::new(-gp / qn, 0.0)
        }
    } else if on_dual {
        let delta = if is_zero { 1.0 / q } else { 0.0 };
        Complex64::new(delta, 0.0)
    } else {
        let gp = gauss_power(field, n as u32 - 1).re;
        let eta = quadratic_char(field, field.neg(g)) as f64;
        Complex64::new(gp * eta / qn, 0.0)
    }
}

/// Brute-force oracle: direct summation over the enumerated cone.
pub fn cone_ift_brute(cone: &ConeVariety, x: &[Scalar]) -> Complex64 {
    let chars = CharTable::new(&cone.field);
    cone_ift_brute_with(cone, &chars, x)
}

fn cone_ift_brute_with(cone: &ConeVariety, chars: &CharTable, x: &[Scalar]) -> Complex64 {
    let field = &cone.field;
    let qn = (field.order() as f64).powi(cone.n as i32);
    let sum: Complex64 = cone.points.iter().map(|xi| chars.e_dot(x, xi)).sum();
    sum / qn
}

/// Brute-force values at every grid point, in canonical order.
pub fn cone_ift_brute_all(cone: &ConeVariety, budget: Budget) -> Result<Vec<Complex64>> {
    let field = &cone.field;
    let len = budget.grid_len(field.order(), cone.n)?;
    let chars = CharTable::new(field);
    let out: Vec<Complex64> = (0..len)
        .into_par_iter()
        .map(|idx| {
            let x = field.point_at(idx, cone.n);
            cone_ift_brute_with(cone, &chars, &x)
        })
        .collect();
    Ok(out)
}

/// Inverse transform of the normalized surface measure:
/// `dsigma_v(x) = (q^n / |C_n|) C_n_v(x)`.
pub fn sigma_ift(cone: &ConeVariety, x: &[Scalar]) -> Complex64 {
    let q = cone.field.order() as f64;
    let scale = q.powi(cone.n as i32) / (cone.len() as f64);
    cone_ift_closed(&cone.field, x) * scale
}
