//! Exact arithmetic in `F_{p^ell}` with odd characteristic: scalars, vectors,
//! canonical enumeration, and the little linear algebra the lab needs.
//!
//! Elements are stored by their canonical index: the coefficient vector of
//! the representative polynomial read as a base-`p` integer, constant
//! coefficient least significant. Index order is the canonical element order
//! used everywhere for enumeration and deterministic search. All arithmetic
//! goes through tables precomputed at construction, so scalar operations are
//! O(1) inside `q^n`-sized loops.

use std::sync::Arc;

use crate::{Budget, Error, Result};

/// A field element, identified by its canonical index in `[0, q)`.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Scalar(pub u32);

impl Scalar {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A vector in `F^n`.
pub type Point = Vec<Scalar>;

/// `F_{p^ell}`: characteristic, degree, modulus, and the operation tables.
pub struct Field {
    p: u64,
    ell: u32,
    q: u64,
    /// Monic irreducible of degree `ell` over `Z_p`, constant term first.
    /// Empty for prime fields.
    modulus: Vec<u64>,
    add_t: Vec<u32>,
    mul_t: Vec<u32>,
    neg_t: Vec<u32>,
    inv_t: Vec<u32>,
    trace_t: Vec<u64>,
    square_t: Vec<bool>,
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Polynomial remainder of `a` by monic `m` over `Z_p`; coefficients low-first.
fn poly_rem(mut a: Vec<u64>, m: &[u64], p: u64) -> Vec<u64> {
    let dm = m.len() - 1;
    while a.len() > dm {
        let lead = *a.last().unwrap() % p;
        let shift = a.len() - 1 - dm;
        if lead != 0 {
            for i in 0..=dm {
                let idx = shift + i;
                a[idx] = (a[idx] + p * p - (lead * m[i]) % p) % p;
            }
        }
        a.pop();
    }
    a
}

fn poly_mul(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] = (out[i + j] + ai * bj) % p;
        }
    }
    out
}

/// Enumerate monic polynomials of exact degree `d` over `Z_p`.
fn monic_polys(d: usize, p: u64) -> impl Iterator<Item = Vec<u64>> {
    let count = p.pow(d as u32);
    (0..count).map(move |mut k| {
        let mut c = Vec::with_capacity(d + 1);
        for _ in 0..d {
            c.push(k % p);
            k /= p;
        }
        c.push(1);
        c
    })
}

fn poly_is_zero(a: &[u64]) -> bool {
    a.iter().all(|&c| c == 0)
}

impl Field {
    /// Construct `F_p` (prime field).
    pub fn prime(p: u64) -> Result<Arc<Field>> {
        Field::new(p, 1, None)
    }

    /// Construct `F_{p^ell}`. A monic irreducible modulus of degree `ell`
    /// (coefficients constant-first, length `ell + 1`) is required exactly
    /// when `ell > 1`; irreducibility is verified by exhaustive trial
    /// division, which is fine at desk scale.
    pub fn new(p: u64, ell: u32, modulus: Option<&[u64]>) -> Result<Arc<Field>> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if p == 2 {
            return Err(Error::EvenCharacteristic(p));
        }
        if ell == 0 {
            return Err(Error::BadDegree(ell));
        }
        let modulus: Vec<u64> = match (ell, modulus) {
            (1, None) => Vec::new(),
            (1, Some(m)) if m.is_empty() => Vec::new(),
            (1, Some(_)) => {
                return Err(Error::BadModulus("prime field takes no modulus".into()))
            }
            (_, None) => {
                return Err(Error::BadModulus(format!(
                    "degree-{ell} extension requires a modulus polynomial"
                )))
            }
            (_, Some(m)) => {
                if m.len() != ell as usize + 1 {
                    return Err(Error::BadModulus(format!(
                        "expected {} coefficients, got {}",
                        ell + 1,
                        m.len()
                    )));
                }
                let m: Vec<u64> = m.iter().map(|&c| c % p).collect();
                if *m.last().unwrap() != 1 {
                    return Err(Error::BadModulus("modulus must be monic".into()));
                }
                // Trial division by every monic polynomial of degree <= ell/2.
                for d in 1..=(ell as usize / 2) {
                    for g in monic_polys(d, p) {
                        if poly_is_zero(&poly_rem(m.clone(), &g, p)) {
                            let pretty: Vec<String> =
                                g.iter().map(|c| c.to_string()).collect();
                            return Err(Error::ReducibleModulus(format!(
                                "[{}]",
                                pretty.join(", ")
                            )));
                        }
                    }
                }
                m
            }
        };

        let q = p.pow(ell);
        if q > (1 << 16) {
            return Err(Error::BudgetExceeded { needed: q as u128 * q as u128, budget: 1 << 32 });
        }
        let qs = q as usize;

        // Coefficients of element `i` are its base-p digits.
        let coeffs = |i: u64| -> Vec<u64> {
            let mut c = Vec::with_capacity(ell as usize);
            let mut k = i;
            for _ in 0..ell {
                c.push(k % p);
                k /= p;
            }
            c
        };
        let index_of = |c: &[u64]| -> u64 {
            let mut idx = 0u64;
            for &d in c.iter().rev() {
                idx = idx * p + (d % p);
            }
            idx
        };

        let mut add_t = vec![0u32; qs * qs];
        let mut mul_t = vec![0u32; qs * qs];
        let mut neg_t = vec![0u32; qs];
        for a in 0..q {
            let ca = coeffs(a);
            let cn: Vec<u64> = ca.iter().map(|&d| (p - d) % p).collect();
            neg_t[a as usize] = index_of(&cn) as u32;
            for b in a..q {
                let cb = coeffs(b);
                let cs: Vec<u64> = ca.iter().zip(&cb).map(|(&x, &y)| (x + y) % p).collect();
                let s = index_of(&cs) as u32;
                add_t[(a * q + b) as usize] = s;
                add_t[(b * q + a) as usize] = s;
                let prod = if ell == 1 {
                    ((a * b) % p) as u32
                } else {
                    let raw = poly_mul(&ca, &cb, p);
                    let red = poly_rem(raw, &modulus, p);
                    let mut full = red;
                    full.resize(ell as usize, 0);
                    index_of(&full) as u32
                };
                mul_t[(a * q + b) as usize] = prod;
                mul_t[(b * q + a) as usize] = prod;
            }
        }

        let mut field = Field {
            p,
            ell,
            q,
            modulus,
            add_t,
            mul_t,
            neg_t,
            inv_t: vec![0u32; qs],
            trace_t: vec![0u64; qs],
            square_t: vec![false; qs],
        };

        for a in 1..q {
            field.inv_t[a as usize] = field.pow(Scalar(a as u32), q - 2).0;
            let sq = field.mul(Scalar(a as u32), Scalar(a as u32));
            field.square_t[sq.index()] = true;
        }
        for a in 0..q {
            // Absolute trace: a + a^p + ... + a^{p^(ell-1)}, landing in Z_p.
            let mut acc = Scalar(a as u32);
            let mut frob = Scalar(a as u32);
            for _ in 1..ell {
                frob = field.pow(frob, p);
                acc = field.add(acc, frob);
            }
            let c = coeffs(acc.0 as u64);
            debug_assert!(c[1..].iter().all(|&d| d == 0), "trace must lie in Z_p");
            field.trace_t[a as usize] = c[0];
        }
        debug_assert_eq!(
            field.square_t.iter().filter(|&&s| s).count(),
            (q as usize - 1) / 2
        );

        Ok(Arc::new(field))
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    /// Field order `q = p^ell`.
    pub fn order(&self) -> u64 {
        self.q
    }

    pub fn modulus(&self) -> &[u64] {
        &self.modulus
    }

    pub fn zero(&self) -> Scalar {
        Scalar(0)
    }

    pub fn one(&self) -> Scalar {
        Scalar(1)
    }

    /// Element with the given canonical index.
    pub fn element(&self, idx: u64) -> Scalar {
        assert!(idx < self.q, "element index {idx} out of range");
        Scalar(idx as u32)
    }

    /// Embedding of the integers (lands in the prime subfield).
    pub fn from_int(&self, k: i64) -> Scalar {
        let r = k.rem_euclid(self.p as i64) as u32;
        Scalar(r)
    }

    /// Coefficient vector of an element, constant term first.
    pub fn coeffs(&self, s: Scalar) -> Vec<u64> {
        let mut c = Vec::with_capacity(self.ell as usize);
        let mut k = s.0 as u64;
        for _ in 0..self.ell {
            c.push(k % self.p);
            k /= self.p;
        }
        c
    }

    #[inline]
    pub fn add(&self, a: Scalar, b: Scalar) -> Scalar {
        Scalar(self.add_t[a.index() * self.q as usize + b.index()])
    }

    #[inline]
    pub fn sub(&self, a: Scalar, b: Scalar) -> Scalar {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: Scalar, b: Scalar) -> Scalar {
        Scalar(self.mul_t[a.index() * self.q as usize + b.index()])
    }

    #[inline]
    pub fn neg(&self, a: Scalar) -> Scalar {
        Scalar(self.neg_t[a.index()])
    }

    pub fn inv(&self, a: Scalar) -> Result<Scalar> {
        if a.0 == 0 {
            return Err(Error::DivisionByZero);
        }
        Ok(Scalar(self.inv_t[a.index()]))
    }

    pub fn div(&self, a: Scalar, b: Scalar) -> Result<Scalar> {
        Ok(self.mul(a, self.inv(b)?))
    }

    pub fn pow(&self, a: Scalar, mut e: u64) -> Scalar {
        let mut base = a;
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Absolute trace to `Z_p`, returned as a residue in `[0, p)`.
    #[inline]
    pub fn trace(&self, s: Scalar) -> u64 {
        self.trace_t[s.index()]
    }

    /// Whether a nonzero element is a square in `F*`. Zero is a domain
    /// error here; the quadratic character handles it by convention.
    pub fn is_square(&self, s: Scalar) -> Result<bool> {
        if s.0 == 0 {
            return Err(Error::ZeroArgument);
        }
        Ok(self.square_t[s.index()])
    }

    pub fn elements(&self) -> impl Iterator<Item = Scalar> {
        (0..self.q as u32).map(Scalar)
    }

    pub fn nonzero_elements(&self) -> impl Iterator<Item = Scalar> {
        (1..self.q as u32).map(Scalar)
    }

    pub fn dot(&self, a: &[Scalar], b: &[Scalar]) -> Scalar {
        debug_assert_eq!(a.len(), b.len());
        let mut acc = self.zero();
        for (&x, &y) in a.iter().zip(b) {
            acc = self.add(acc, self.mul(x, y));
        }
        acc
    }

    /// Sum-of-squares form `||x|| = x_1^2 + ... + x_n^2`.
    pub fn norm(&self, a: &[Scalar]) -> Scalar {
        self.dot(a, a)
    }

    /// Canonical index of a point in the `q^n` grid (coordinate 0 fastest).
    pub fn point_index(&self, pt: &[Scalar]) -> usize {
        let mut idx = 0usize;
        for &c in pt.iter().rev() {
            idx = idx * self.q as usize + c.index();
        }
        idx
    }

    /// Inverse of `point_index`.
    pub fn point_at(&self, mut idx: usize, n: usize) -> Point {
        debug_assert!(
            (idx as u128) < (self.q as u128).pow(n as u32),
            "point index {idx} out of range for q^{n}"
        );
        let q = self.q as usize;
        let mut pt = Vec::with_capacity(n);
        for _ in 0..n {
            pt.push(Scalar((idx % q) as u32));
            idx /= q;
        }
        pt
    }

    /// All `q^n` points of `F^n` exactly once, in canonical order.
    pub fn points(&self, n: usize, budget: Budget) -> Result<PointIter<'_>> {
        let len = budget.grid_len(self.q, n)?;
        Ok(PointIter { field: self, n, next: 0, len })
    }

    /// Row-reduced span of a list of vectors.
    pub fn span(&self, vectors: &[Point]) -> Subspace {
        assert!(!vectors.is_empty(), "span of an empty list is not defined");
        let n = vectors[0].len();
        let mut basis: Vec<Point> = Vec::new();
        for v in vectors {
            assert_eq!(v.len(), n, "span: mixed ambient dimensions");
            let r = self.reduce_against(v, &basis);
            if r.iter().any(|s| s.0 != 0) {
                // Normalize so the leading coordinate is 1, keep echelon order.
                let lead = r.iter().position(|s| s.0 != 0).unwrap();
                let scale = self.inv(r[lead]).unwrap();
                let normed: Point = r.iter().map(|&s| self.mul(s, scale)).collect();
                basis.push(normed);
                basis.sort_by_key(|b| b.iter().position(|s| s.0 != 0).unwrap());
            }
        }
        Subspace { ambient: n, basis }
    }

    /// Remainder of `v` after eliminating the leading entries of `basis`
    /// (basis assumed in echelon form with leading coefficient 1).
    fn reduce_against(&self, v: &[Scalar], basis: &[Point]) -> Point {
        let mut r: Point = v.to_vec();
        for b in basis {
            let lead = b.iter().position(|s| s.0 != 0).unwrap();
            if r[lead].0 != 0 {
                let c = r[lead];
                for i in 0..r.len() {
                    r[i] = self.sub(r[i], self.mul(c, b[i]));
                }
            }
        }
        r
    }
}

impl std::fmt::Debug for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "F_{}", self.q)?;
        if self.ell > 1 {
            write!(f, " (p={}, ell={}, modulus={:?})", self.p, self.ell, self.modulus)?;
        }
        Ok(())
    }
}

pub struct PointIter<'a> {
    field: &'a Field,
    n: usize,
    next: usize,
    len: usize,
}

impl Iterator for PointIter<'_> {
    type Item = Point;

    fn next(&mut self) -> Option<Point> {
        if self.next >= self.len {
            return None;
        }
        let pt = self.field.point_at(self.next, self.n);
        self.next += 1;
        Some(pt)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let rem = self.len - self.next;
        (rem, Some(rem))
    }
}

impl ExactSizeIterator for PointIter<'_> {}

/// A linear subspace of `F^n`, kept as an echelonized basis.
#[derive(Clone, Debug)]
pub struct Subspace {
    ambient: usize,
    basis: Vec<Point>,
}

impl Subspace {
    pub fn trivial(ambient: usize) -> Subspace {
        Subspace { ambient, basis: Vec::new() }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Point] {
        &self.basis
    }

    pub fn size(&self, field: &Field) -> u64 {
        field.order().pow(self.basis.len() as u32)
    }

    pub fn contains(&self, field: &Field, v: &[Scalar]) -> bool {
        let r = field.reduce_against(v, &self.basis);
        r.iter().all(|s| s.0 == 0)
    }

    /// Materialize every element (all `q^dim` linear combinations).
    pub fn elements(&self, field: &Field) -> Vec<Point> {
        let q = field.order();
        let dim = self.basis.len();
        let total = q.pow(dim as u32);
        let mut out = Vec::with_capacity(total as usize);
        for mut k in 0..total {
            let mut v = vec![field.zero(); self.ambient];
            for b in &self.basis {
                let c = Scalar((k % q) as u32);
                k /= q;
                for i in 0..self.ambient {
                    v[i] = field.add(v[i], field.mul(c, b[i]));
                }
            }
            out.push(v);
        }
        out
    }
}
