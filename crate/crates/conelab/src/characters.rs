//! The canonical additive character `e`, the quadratic character `eta`,
//! Gauss sums with their explicit closed forms, and the completing-the-square
//! identity for quadratic exponential sums.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::field::{Field, Scalar};
use crate::{Error, Result};

/// Canonical additive character `e(t) = exp(2 pi i Tr(t) / p)`, evaluated
/// directly. For tight loops use [`CharTable`].
pub fn additive_char(field: &Field, t: Scalar) -> Complex64 {
    let angle = 2.0 * PI * (field.trace(t) as f64) / (field.p() as f64);
    Complex64::from_polar(1.0, angle)
}

/// Per-element table of additive character values.
pub struct CharTable {
    field: Arc<Field>,
    values: Vec<Complex64>,
}

impl CharTable {
    pub fn new(field: &Arc<Field>) -> CharTable {
        let values: Vec<Complex64> = field
            .elements()
            .map(|t| {
                let v = additive_char(field, t);
                debug_assert!((v.norm_sqr() - 1.0).abs() <= 1e-12);
                v
            })
            .collect();
        CharTable { field: Arc::clone(field), values }
    }

    pub fn field(&self) -> &Arc<Field> {
        &self.field
    }

    /// `e(t)`.
    #[inline]
    pub fn e(&self, t: Scalar) -> Complex64 {
        self.values[t.index()]
    }

    /// `e(-t)`.
    #[inline]
    pub fn e_neg(&self, t: Scalar) -> Complex64 {
        self.values[t.index()].conj()
    }

    /// `e(x . y)` for vectors.
    #[inline]
    pub fn e_dot(&self, x: &[Scalar], y: &[Scalar]) -> Complex64 {
        self.e(self.field.dot(x, y))
    }
}

/// Quadratic character: 1 on squares of `F*`, -1 on non-squares, 0 at zero.
///
/// The zero convention keeps multiplicativity statements uniform and matches
/// the orthogonality identities the closed forms rely on.
pub fn quadratic_char(field: &Field, t: Scalar) -> i32 {
    if t.index() == 0 {
        0
    } else if field.is_square(t).unwrap() {
        1
    } else {
        -1
    }
}

/// A computed Gauss sum `G_a = sum_{t in F*} eta(t) e(at)`, together with the
/// value predicted by the closed form (`eta(a)` times the explicit `G_1`).
#[derive(Clone, Debug)]
pub struct GaussValue {
    pub value: Complex64,
    pub twist: Scalar,
    pub closed_form: Complex64,
}

/// Direct evaluation of `G_a`; errors when `a = 0`.
pub fn gauss_sum(field: &Field, a: Scalar) -> Result<GaussValue> {
    if a.index() == 0 {
        return Err(Error::ZeroArgument);
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for t in field.nonzero_elements() {
        let eta = quadratic_char(field, t) as f64;
        sum += eta * additive_char(field, field.mul(a, t));
    }
    let closed = gauss_closed_form(field) * (quadratic_char(field, a) as f64);
    let v = GaussValue { value: sum, twist: a, closed_form: closed };
    debug_assert!(
        (v.value.norm() - (field.order() as f64).sqrt()).abs()
            <= 1e-9 * (field.order() as f64).sqrt().max(1.0)
    );
    Ok(v)
}

/// Explicit value of `G_1` for `F_{p^ell}`:
/// `(-1)^(ell-1) sqrt(q)` when `p = 1 mod 4`, and
/// `(-1)^(ell-1) i^ell sqrt(q)` when `p = 3 mod 4`.
pub fn gauss_closed_form(field: &Field) -> Complex64 {
    gauss_power(field, 1)
}

/// `G_1^m`, computed exactly from the closed form: the sign and the power of
/// `i` are carried as integers, so even powers come out exactly real.
pub fn gauss_power(field: &Field, m: u32) -> Complex64 {
    let q = field.order() as f64;
    let ell = field.ell();
    let sign = if (ell as u64 + 1) % 2 == 0 { 1.0 } else { -1.0 }; // (-1)^(ell-1)
    let (base_sign, i_exp) = if field.p() % 4 == 1 {
        (sign, 0u32)
    } else {
        (sign, ell % 4)
    };
    let total_sign = if m % 2 == 0 { 1.0 } else { base_sign };
    let phase = (i_exp as u64 * m as u64) % 4;
    let magnitude = if m % 2 == 0 {
        q.powi((m / 2) as i32)
    } else {
        q.powi((m / 2) as i32) * q.sqrt()
    };
    let unit = match phase {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    };
    total_sign * magnitude * unit
}

/// `G_1^(n-2)`. When `q = 3 mod 4` and `n = 0 mod 4` this is exactly
/// `-q^((n-2)/2)`.
pub fn gauss_power_sign(field: &Field, n: u32) -> Complex64 {
    assert!(n >= 2);
    gauss_power(field, n - 2)
}

/// Closed form of `sum_{alpha in F^k} e(s alpha.alpha + beta.alpha)`:
/// completing the square gives `eta(s)^k G_1^k e(||beta|| / (-4s))`.
pub fn quad_exp_sum_closed(field: &Field, s: Scalar, beta: &[Scalar]) -> Result<Complex64> {
    if s.index() == 0 {
        return Err(Error::ZeroArgument);
    }
    let k = beta.len();
    let eta_k = if k % 2 == 0 { 1.0 } else { quadratic_char(field, s) as f64 };
    let g_k = gauss_power(field, k as u32);
    let minus_4s = field.neg(field.mul(field.from_int(4), s));
    let arg = field.div(field.norm(beta), minus_4s)?;
    Ok(eta_k * g_k * additive_char(field, arg))
}

/// Brute-force companion of [`quad_exp_sum_closed`].
pub fn quad_exp_sum_brute(field: &Field, s: Scalar, beta: &[Scalar]) -> Complex64 {
    let k = beta.len();
    let q = field.order() as usize;
    let mut total = Complex64::new(0.0, 0.0);
    let count = q.pow(k as u32);
    for idx in 0..count {
        let alpha = field.point_at(idx, k);
        let quad = field.mul(s, field.norm(&alpha));
        let lin = field.dot(beta, &alpha);
        total += additive_char(field, field.add(quad, lin));
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::close_c;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn test_fields() -> Vec<Arc<Field>> {
        vec![
            Field::prime(3).unwrap(),
            Field::prime(5).unwrap(),
            Field::prime(7).unwrap(),
            Field::prime(11).unwrap(),
            Field::new(3, 2, Some(&[1, 0, 1])).unwrap(),
            Field::new(3, 3, Some(&[1, 2, 0, 1])).unwrap(),
            Field::new(5, 2, Some(&[2, 0, 1])).unwrap(),
            Field::new(7, 2, Some(&[1, 0, 1])).unwrap(),
        ]
    }

    #[test]
    fn additive_char_examples() {
        let f3 = Field::prime(3).unwrap();
        assert!(close_c(additive_char(&f3, f3.zero()), c(1.0, 0.0), 1));
        let third = Complex64::from_polar(1.0, 2.0 * PI / 3.0);
        assert!(close_c(additive_char(&f3, f3.one()), third, 1));

        let f9 = Field::new(3, 2, Some(&[1, 0, 1])).unwrap();
        // x (index 3) has trace 0, so e(x) = 1.
        assert!(close_c(additive_char(&f9, f9.element(3)), c(1.0, 0.0), 1));
    }

    #[test]
    fn char_orthogonality() {
        for f in test_fields() {
            let q = f.order() as f64;
            for a in f.elements() {
                let sum: Complex64 = f
                    .elements()
                    .map(|t| additive_char(&f, f.mul(a, t)))
                    .sum();
                let expected = if a.index() == 0 { c(q, 0.0) } else { c(0.0, 0.0) };
                assert!(
                    (sum - expected).norm() <= 1e-9 * q,
                    "orthogonality failed at q={} a={:?}",
                    f.order(),
                    a
                );
            }
        }
    }

    #[test]
    fn quadratic_char_orthogonality_and_multiplicativity() {
        for f in test_fields() {
            for a in f.nonzero_elements() {
                let sum: i64 = f
                    .nonzero_elements()
                    .map(|t| quadratic_char(&f, f.mul(a, t)) as i64)
                    .sum();
                assert_eq!(sum, 0);
            }
            for a in f.nonzero_elements() {
                for b in f.nonzero_elements() {
                    assert_eq!(
                        quadratic_char(&f, f.mul(a, b)),
                        quadratic_char(&f, a) * quadratic_char(&f, b)
                    );
                }
            }
            assert_eq!(quadratic_char(&f, f.zero()), 0);
        }
    }

    #[test]
    fn quadratic_char_examples() {
        let f7 = Field::prime(7).unwrap();
        assert_eq!(quadratic_char(&f7, f7.element(3)), -1);
        let f5 = Field::prime(5).unwrap();
        assert_eq!(quadratic_char(&f5, f5.element(4)), 1);
    }

    #[test]
    fn gauss_sum_examples() {
        let f3 = Field::prime(3).unwrap();
        let g = gauss_sum(&f3, f3.one()).unwrap();
        assert!(close_c(g.value, c(0.0, 3.0_f64.sqrt()), 3));

        let f5 = Field::prime(5).unwrap();
        let g = gauss_sum(&f5, f5.one()).unwrap();
        assert!(close_c(g.value, c(5.0_f64.sqrt(), 0.0), 5));

        // G_a = eta(a) G_1: a = 2 is a non-square mod 3.
        let g2 = gauss_sum(&f3, f3.element(2)).unwrap();
        assert!(close_c(g2.value, c(0.0, -(3.0_f64.sqrt())), 3));
        assert!(close_c(g2.value, g2.closed_form, 3));
    }

    #[test]
    fn gauss_magnitude_is_sqrt_q() {
        for f in test_fields() {
            let root_q = (f.order() as f64).sqrt();
            for a in f.nonzero_elements() {
                let g = gauss_sum(&f, a).unwrap();
                assert!((g.value.norm() - root_q).abs() <= 1e-9 * root_q);
            }
        }
    }

    #[test]
    fn gauss_closed_form_matches_direct_sum() {
        for f in test_fields() {
            let direct = gauss_sum(&f, f.one()).unwrap().value;
            let closed = gauss_closed_form(&f);
            assert!(
                close_c(direct, closed, f.order() as usize),
                "closed form mismatch for {:?}: direct {} closed {}",
                f,
                direct,
                closed
            );
        }
    }

    #[test]
    fn gauss_closed_form_specific_values() {
        // p = 3 mod 4, ell = 2: (-1)^1 i^2 * 3 = 3.
        let f9 = Field::new(3, 2, Some(&[1, 0, 1])).unwrap();
        assert!(close_c(gauss_closed_form(&f9), c(3.0, 0.0), 9));
        // F_7: i sqrt(7).
        let f7 = Field::prime(7).unwrap();
        assert!(close_c(gauss_closed_form(&f7), c(0.0, 7.0_f64.sqrt()), 7));
        // F_27: (-1)^2 i^3 sqrt(27) = -3 sqrt(3) i.
        let f27 = Field::new(3, 3, Some(&[1, 2, 0, 1])).unwrap();
        assert!(close_c(
            gauss_closed_form(&f27),
            c(0.0, -27.0_f64.sqrt()),
            27
        ));
    }

    #[test]
    fn gauss_value_agrees_across_moduli_for_f9() {
        let a = Field::new(3, 2, Some(&[1, 0, 1])).unwrap();
        let b = Field::new(3, 2, Some(&[2, 1, 1])).unwrap();
        let ga = gauss_sum(&a, a.one()).unwrap().value;
        let gb = gauss_sum(&b, b.one()).unwrap().value;
        assert!(close_c(ga, gb, 9));
        assert!(close_c(ga, c(3.0, 0.0), 9));
    }

    #[test]
    fn gauss_power_sign_examples() {
        let f3 = Field::prime(3).unwrap();
        assert!(close_c(gauss_power_sign(&f3, 4), c(-3.0, 0.0), 1));
        let f7 = Field::prime(7).unwrap();
        assert!(close_c(gauss_power_sign(&f7, 8), c(-343.0, 0.0), 1));
        let f5 = Field::prime(5).unwrap();
        assert!(close_c(gauss_power_sign(&f5, 4), c(5.0, 0.0), 1));
    }

    #[test]
    fn gauss_power_matches_repeated_multiplication() {
        for f in test_fields() {
            let g1 = gauss_sum(&f, f.one()).unwrap().value;
            let mut acc = c(1.0, 0.0);
            for m in 0..=8u32 {
                let exact = gauss_power(&f, m);
                assert!(
                    close_c(acc, exact, f.order() as usize * (m as usize + 1)),
                    "{:?} power {}: {} vs {}",
                    f,
                    m,
                    acc,
                    exact
                );
                acc *= g1;
            }
        }
    }

    #[test]
    fn square_sum_identity() {
        // sum_{s in F} e(a s^2) = eta(a) G_1 for a != 0.
        for f in test_fields() {
            let g1 = gauss_closed_form(&f);
            for a in f.nonzero_elements() {
                let sum: Complex64 = f
                    .elements()
                    .map(|s| additive_char(&f, f.mul(a, f.mul(s, s))))
                    .sum();
                let expected = (quadratic_char(&f, a) as f64) * g1;
                assert!(close_c(sum, expected, f.order() as usize));
            }
        }
    }

    #[test]
    fn quad_exp_sum_examples() {
        let f3 = Field::prime(3).unwrap();
        let closed = quad_exp_sum_closed(&f3, f3.one(), &[f3.zero()]).unwrap();
        assert!(close_c(closed, c(0.0, 3.0_f64.sqrt()), 3));
        let brute = quad_exp_sum_brute(&f3, f3.one(), &[f3.zero()]);
        assert!(close_c(brute, closed, 3));

        let beta2 = vec![f3.zero(), f3.zero()];
        let closed = quad_exp_sum_closed(&f3, f3.one(), &beta2).unwrap();
        assert!(close_c(closed, c(-3.0, 0.0), 9));
        assert!(close_c(quad_exp_sum_brute(&f3, f3.one(), &beta2), closed, 9));
    }

    #[test]
    fn quad_exp_sum_closed_equals_brute() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for f in [
            Field::prime(3).unwrap(),
            Field::prime(5).unwrap(),
            Field::prime(7).unwrap(),
            Field::prime(11).unwrap(),
            Field::new(3, 2, Some(&[1, 0, 1])).unwrap(),
        ] {
            for k in 1..=3usize {
                for s in f.nonzero_elements() {
                    let beta: Vec<Scalar> = (0..k)
                        .map(|_| f.element(rng.gen_range(0..f.order())))
                        .collect();
                    let closed = quad_exp_sum_closed(&f, s, &beta).unwrap();
                    let brute = quad_exp_sum_brute(&f, s, &beta);
                    let terms = (f.order() as usize).pow(k as u32);
                    assert!(
                        close_c(closed, brute, terms),
                        "{:?} k={} s={:?}: closed {} brute {}",
                        f,
                        k,
                        s,
                        closed,
                        brute
                    );
                }
            }
        }
    }

    #[test]
    fn quad_exp_sum_even_k_real_when_q_3_mod_4() {
        let f = Field::prime(7).unwrap();
        let beta = vec![f.zero(), f.zero()];
        let v = quad_exp_sum_closed(&f, f.one(), &beta).unwrap();
        assert!(v.im.abs() < 1e-12);
        assert!((v.re.abs() - 7.0).abs() < 1e-9);
    }

    #[test]
    fn zero_twist_rejected() {
        let f = Field::prime(5).unwrap();
        assert!(gauss_sum(&f, f.zero()).is_err());
        assert!(quad_exp_sum_closed(&f, f.zero(), &[f.one()]).is_err());
    }
}
