//! Constructive witnesses: mutually orthogonal null vectors found by
//! deterministic search, maximal isotropic subspaces of the zero sphere,
//! the cone subspaces built from them, and the zero-incidence point/sphere
//! families that show the incidence bound is sharp.

use std::sync::Arc;

use crate::field::{Field, Point, Scalar, Subspace};
use crate::incidence::{incidence_weighted, ParityCase, Sphere, WeightedFamily};
use crate::{Budget, Error, Result};

/// A list of nonzero vectors that are pairwise orthogonal and each null
/// (`v.v = 0`), and linearly independent.
#[derive(Clone, Debug)]
pub struct NullSystem {
    pub ambient: usize,
    pub vectors: Vec<Point>,
}

impl NullSystem {
    /// Re-verify every invariant from scratch.
    pub fn verify(&self, field: &Field) -> bool {
        if self.vectors.iter().any(|v| v.iter().all(|s| s.0 == 0)) {
            return false;
        }
        for (i, v) in self.vectors.iter().enumerate() {
            for w in &self.vectors[i..] {
                if field.dot(v, w).0 != 0 {
                    return false;
                }
            }
        }
        field.span(&self.vectors).dim() == self.vectors.len()
    }
}

/// Depth-first search for `k` mutually orthogonal null vectors in `F^m`,
/// scanning candidates in canonical element order. Vectors are chosen with
/// strictly increasing canonical index, so exhaustion really covers every
/// unordered system. Returns `None` when no system exists.
pub fn find_null_system(
    field: &Arc<Field>,
    m: usize,
    k: usize,
    budget: Budget,
) -> Result<Option<NullSystem>> {
    if m == 0 || k == 0 {
        return Ok(Some(NullSystem { ambient: m, vectors: Vec::new() }));
    }
    let len = budget.grid_len(field.order(), m)?;
    // Null nonzero vectors in canonical order.
    let candidates: Vec<Point> = (1..len)
        .map(|idx| field.point_at(idx, m))
        .filter(|v| field.norm(v).0 == 0)
        .collect();

    fn dfs(
        field: &Field,
        candidates: &[Point],
        start: usize,
        chosen: &mut Vec<Point>,
        k: usize,
    ) -> bool {
        if chosen.len() == k {
            return true;
        }
        // The span is fixed for the whole scan at this node.
        let span = if chosen.is_empty() { None } else { Some(field.span(chosen)) };
        for i in start..candidates.len() {
            let v = &candidates[i];
            if chosen.iter().any(|w| field.dot(v, w).0 != 0) {
                continue;
            }
            if let Some(span) = &span {
                if span.contains(field, v) {
                    continue;
                }
            }
            chosen.push(v.clone());
            if dfs(field, candidates, i + 1, chosen, k) {
                return true;
            }
            chosen.pop();
        }
        false
    }

    let mut chosen = Vec::new();
    if dfs(field, &candidates, 0, &mut chosen, k) {
        let sys = NullSystem { ambient: m, vectors: chosen };
        debug_assert!(sys.verify(field));
        Ok(Some(sys))
    } else {
        Ok(None)
    }
}

/// Dimension of a maximal subspace inside the zero sphere of `F^m`,
/// by the three-case formula: `(m-1)/2` for odd `m`; for even `m` it is
/// `m/2` when `eta(-1)^(m/2) = 1` and `(m-2)/2` otherwise.
pub fn isotropic_max_dim(field: &Field, m: usize) -> usize {
    if m % 2 == 1 {
        (m - 1) / 2
    } else {
        let eta_minus_one: i32 = if field.order() % 4 == 1 { 1 } else { -1 };
        let sign = if (m / 2) % 2 == 0 { 1 } else { eta_minus_one };
        if sign == 1 {
            m / 2
        } else {
            (m - 2) / 2
        }
    }
}

/// A maximal totally isotropic subspace of the zero sphere in `F^m`, found
/// by searching for a null system of the predicted dimension and spanning
/// it. Any basis of pairwise-orthogonal null vectors spans a subspace on
/// which the quadratic form vanishes identically.
pub fn max_isotropic_subspace(field: &Arc<Field>, m: usize, budget: Budget) -> Result<Subspace> {
    let target = isotropic_max_dim(field, m);
    if target == 0 {
        return Ok(Subspace::trivial(m));
    }
    let sys = find_null_system(field, m, target, budget)?.ok_or_else(|| {
        Error::Precondition(format!(
            "no null system of size {target} in F^{m} over q={}, contradicting the dimension formula",
            field.order()
        ))
    })?;
    Ok(field.span(&sys.vectors))
}

/// The subspace `Omega = H x F x {0}` inside the cone `C_n`, where `H` is a
/// maximal isotropic subspace of the zero sphere in `F^(n-2)`.
pub fn omega_subspace(field: &Arc<Field>, n: usize, budget: Budget) -> Result<Subspace> {
    if n < 3 {
        return Err(Error::DimensionMismatch { expected: 3, got: n });
    }
    let h = max_isotropic_subspace(field, n - 2, budget)?;
    let mut basis: Vec<Point> = h
        .basis()
        .iter()
        .map(|v| {
            let mut w = v.clone();
            w.push(field.zero());
            w.push(field.zero());
            w
        })
        .collect();
    let mut free = vec![field.zero(); n];
    free[n - 2] = field.one();
    basis.push(free);
    Ok(field.span(&basis))
}

/// A zero-incidence instance: a point set `P` and an unweighted sphere
/// family `S` with `I(P, S) = 0` and `|P| |S|` comparable to `q^(d+1)`.
#[derive(Clone, Debug)]
pub struct SharpInstance {
    pub d: usize,
    pub k: usize,
    pub case: ParityCase,
    /// Dimension of the block carrying the null-vector span.
    pub null_block_dim: usize,
    /// The span `B` of the null system, embedded in `F^d`.
    pub base: Subspace,
    pub points: Vec<Point>,
    pub spheres: Vec<Sphere>,
    /// Radii of the concentric spheres whose points make up `U`.
    pub chosen_radii: Vec<Scalar>,
    /// The complementary radii used for the sphere family.
    pub sphere_radii: Vec<Scalar>,
}

impl SharpInstance {
    pub fn family(&self) -> Result<WeightedFamily> {
        WeightedFamily::unit(self.d, self.spheres.clone())
    }

    /// Direct unweighted incidence count.
    pub fn incidence_count(&self, field: &Field) -> Result<u64> {
        let fam = self.family()?;
        let count = incidence_weighted(field, &self.points, &fam)?;
        Ok(count.re.round() as u64)
    }

    /// `|P| |S| / q^(d+1)`.
    pub fn size_product_ratio(&self, field: &Field) -> f64 {
        let q = field.order() as f64;
        (self.points.len() as f64) * (self.spheres.len() as f64) / q.powi(self.d as i32 + 1)
    }

    /// Closed-form sphere count `q^(m/2) (q-1)/2`.
    pub fn expected_sphere_count(&self, field: &Field) -> u64 {
        field.order().pow(self.null_block_dim as u32 / 2) * (field.order() - 1) / 2
    }

    /// Export in the incidence instance format.
    pub fn to_instance(&self, field: &Field) -> Result<crate::incidence::Instance> {
        let fam = self.family()?;
        Ok(crate::incidence::Instance::from_parts(field, &self.points, &fam))
    }
}

/// Dispatch on the parity case of `(d, q)` and build the `k`-th family.
pub fn sharp_family(field: &Arc<Field>, d: usize, k: usize, budget: Budget) -> Result<SharpInstance> {
    sharp_family_case(field, ParityCase::of(d, field.order()), d, k, budget)
}

/// Null-block dimension for each parity case. Larger `k` hands more of the
/// ambient space to the concentric-sphere block, shrinking the sphere family.
fn null_block_dim(case: ParityCase, d: usize, q: u64, k: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::Precondition("k must be at least 1".into()));
    }
    let fail = |msg: String| Err(Error::Precondition(msg));
    let m = match case {
        ParityCase::EvenNegative => {
            if d % 4 != 2 {
                return fail(format!("d = {d} is not 2 mod 4"));
            }
            if q % 4 != 3 {
                return fail(format!("q = {q} is not 3 mod 4"));
            }
            let m = d as i64 + 2 - 4 * k as i64;
            if m < 4 {
                return fail(format!("need d >= 4k + 2, got d = {d}, k = {k}"));
            }
            m as usize
        }
        ParityCase::EvenPositive => {
            if d % 2 != 0 || (d % 4 != 0 && q % 4 != 1) {
                return fail(format!("(d, q) = ({d}, {q}) is not in the positive even case"));
            }
            let m = d as i64 - 4 * k as i64;
            if m < 0 {
                return fail(format!("need d >= 4k, got d = {d}, k = {k}"));
            }
            m as usize
        }
        ParityCase::Odd => {
            if d % 2 == 0 {
                return fail(format!("d = {d} is even"));
            }
            let m = if q % 4 == 1 {
                d as i64 - 1 - 2 * k as i64
            } else if d % 4 == 1 {
                d as i64 - 1 - 4 * k as i64
            } else {
                d as i64 + 1 - 4 * k as i64
            };
            if m < 0 {
                return fail(format!("k = {k} too large for d = {d}, q = {q}"));
            }
            m as usize
        }
    };
    // Null systems of size m/2 need m = 0 mod 4 when -1 is a non-square.
    debug_assert!(m % 2 == 0 && (q % 4 == 1 || m % 4 == 0));
    Ok(m)
}

pub fn sharp_family_case(
    field: &Arc<Field>,
    case: ParityCase,
    d: usize,
    k: usize,
    budget: Budget,
) -> Result<SharpInstance> {
    let q = field.order();
    let m = null_block_dim(case, d, q, k)?;
    let u_dim = d - m;

    // Span of m/2 mutually orthogonal null vectors, embedded in the first
    // m coordinates. Every difference of two elements of B is null, so
    // points of P sit at distance ||u|| from every sphere center.
    let base = if m == 0 {
        Subspace::trivial(d)
    } else {
        let sys = find_null_system(field, m, m / 2, budget)?.ok_or_else(|| {
            Error::Precondition(format!("no null system of size {} in F^{m}", m / 2))
        })?;
        let embedded: Vec<Point> = sys
            .vectors
            .iter()
            .map(|v| {
                let mut w = v.clone();
                w.resize(d, field.zero());
                w
            })
            .collect();
        field.span(&embedded)
    };

    // First (q+1)/2 nonzero elements are the concentric radii of U; the
    // rest of the field (including 0) supplies the sphere radii.
    let chosen: Vec<Scalar> = (1..=(q + 1) / 2).map(|i| field.element(i)).collect();
    let sphere_radii: Vec<Scalar> = field
        .elements()
        .filter(|r| !chosen.contains(r))
        .collect();

    // U: all points of F^u on the chosen concentric spheres about 0.
    let u_len = budget.grid_len(q, u_dim)?;
    let mut u_points: Vec<Point> = Vec::new();
    for idx in 0..u_len {
        let pt = field.point_at(idx, u_dim);
        let norm = field.norm(&pt);
        if chosen.contains(&norm) {
            u_points.push(pt);
        }
    }

    let base_elements = base.elements(field);
    let mut points = Vec::with_capacity(base_elements.len() * u_points.len());
    for b in &base_elements {
        for u in &u_points {
            let mut p = b.clone();
            p[m..].copy_from_slice(u);
            points.push(p);
        }
    }

    let mut spheres = Vec::with_capacity(base_elements.len() * sphere_radii.len());
    for b in &base_elements {
        for &r in &sphere_radii {
            spheres.push(Sphere { center: b.clone(), radius: r });
        }
    }

    Ok(SharpInstance {
        d,
        k,
        case,
        null_block_dim: m,
        base,
        points,
        spheres,
        chosen_radii: chosen,
        sphere_radii,
    })
}
