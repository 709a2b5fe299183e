//! Dense linear-algebra helpers: exchange/permutation matrices, orthonormal
//! complements, small non-Hermitian complex eigenproblems, and pseudo-inverses
//! with conditioning information.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;
pub type RMatrix = DMatrix<f64>;
pub type RVector = DVector<f64>;

/// Relative singular-value cutoff below which a matrix counts as rank deficient.
pub const RANK_TOL: f64 = 1e-12;

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|x| C64::new(x, 0.0))
}

pub fn unit_phasor(theta: f64) -> C64 {
    C64::new(theta.cos(), theta.sin())
}

/// Left-multiplication by the exchange matrix: reverses the row order.
pub fn flip_rows(m: &CMatrix) -> CMatrix {
    let p = m.nrows();
    CMatrix::from_fn(p, m.ncols(), |i, j| m[(p - 1 - i, j)])
}

/// Right-multiplication by the exchange matrix: reverses the column order.
pub fn flip_cols(m: &CMatrix) -> CMatrix {
    let q = m.ncols();
    CMatrix::from_fn(m.nrows(), q, |i, j| m[(i, q - 1 - j)])
}

/// Dense exchange matrix (ones on the antidiagonal), mostly for tests.
pub fn exchange(n: usize) -> RMatrix {
    RMatrix::from_fn(n, n, |i, j| if i + j == n - 1 { 1.0 } else { 0.0 })
}

/// A permutation in gather form: `(P x)[i] = x[gather[i]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Perm {
    gather: Vec<usize>,
}

impl Perm {
    pub fn from_gather(gather: Vec<usize>) -> Self {
        debug_assert!({
            let mut seen = vec![false; gather.len()];
            gather.iter().all(|&g| {
                let fresh = g < seen.len() && !seen[g];
                if fresh {
                    seen[g] = true;
                }
                fresh
            })
        });
        Perm { gather }
    }

    pub fn identity(n: usize) -> Self {
        Perm { gather: (0..n).collect() }
    }

    pub fn len(&self) -> usize {
        self.gather.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gather.is_empty()
    }

    pub fn gather_indices(&self) -> &[usize] {
        &self.gather
    }

    /// Composition `self ∘ other`, i.e. `(self ∘ other) x = self (other x)`.
    pub fn compose(&self, other: &Perm) -> Perm {
        assert_eq!(self.len(), other.len());
        Perm { gather: self.gather.iter().map(|&i| other.gather[i]).collect() }
    }

    /// The inverse permutation (equals the transpose of the matrix form).
    pub fn inverse(&self) -> Perm {
        let mut inv = vec![0usize; self.len()];
        for (i, &g) in self.gather.iter().enumerate() {
            inv[g] = i;
        }
        Perm { gather: inv }
    }

    pub fn apply(&self, x: &CVector) -> CVector {
        assert_eq!(x.len(), self.len());
        CVector::from_iterator(self.len(), self.gather.iter().map(|&g| x[g]))
    }

    /// Row permutation `P m`.
    pub fn apply_rows(&self, m: &CMatrix) -> CMatrix {
        assert_eq!(m.nrows(), self.len());
        CMatrix::from_fn(self.len(), m.ncols(), |i, j| m[(self.gather[i], j)])
    }

    /// Two-sided action `P a P^H` (`P^H = P^T` for a permutation).
    pub fn conjugate(&self, a: &CMatrix) -> CMatrix {
        assert_eq!(a.nrows(), self.len());
        assert_eq!(a.ncols(), self.len());
        CMatrix::from_fn(self.len(), self.len(), |i, j| {
            a[(self.gather[i], self.gather[j])]
        })
    }

    /// `P a P^T` where the right factor is a transpose, not an adjoint.
    /// Identical to [`Perm::conjugate`]; kept for call-site clarity with
    /// symmetric (rather than Hermitian) operands.
    pub fn congruence_t(&self, a: &CMatrix) -> CMatrix {
        self.conjugate(a)
    }

    pub fn to_dense(&self) -> RMatrix {
        let n = self.len();
        let mut m = RMatrix::zeros(n, n);
        for (i, &g) in self.gather.iter().enumerate() {
            m[(i, g)] = 1.0;
        }
        m
    }
}

/// Orthonormal basis of the orthogonal complement of `span(u)`, where the
/// columns of `u` are already orthonormal. Householder-based, O(p²·d).
pub fn orthonormal_complement(u: &CMatrix) -> CMatrix {
    let p = u.nrows();
    let d = u.ncols();
    assert!(d <= p);
    // Householder vectors of the QR decomposition of u.
    let mut a = u.clone();
    let mut reflectors: Vec<CVector> = Vec::with_capacity(d);
    for k in 0..d {
        let mut v = CVector::zeros(p);
        for i in k..p {
            v[i] = a[(i, k)];
        }
        let xnorm = v.norm();
        if xnm_negligible(xnorm) {
            // Column already annihilated; use a trivial reflector.
            reflectors.push(CVector::zeros(p));
            continue;
        }
        let x0 = v[k];
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { C64::new(1.0, 0.0) };
        let alpha = -phase * xnorm;
        v[k] -= alpha;
        let vnorm = v.norm();
        if xnm_negligible(vnorm) {
            reflectors.push(CVector::zeros(p));
            continue;
        }
        v /= C64::new(vnorm, 0.0);
        // Apply H = I - 2 v v^H to the remaining columns of a.
        for j in k..d {
            let w: C64 = (k..p).map(|i| v[i].conj() * a[(i, j)]).sum();
            for i in k..p {
                let delta = v[i] * (w * 2.0);
                a[(i, j)] -= delta;
            }
        }
        reflectors.push(v);
    }
    // Complement = H_0 · H_1 ⋯ H_{d-1} applied to the trailing identity columns.
    let mut c = CMatrix::zeros(p, p - d);
    for j in 0..p - d {
        c[(d + j, j)] = C64::new(1.0, 0.0);
    }
    for k in (0..d).rev() {
        let v = &reflectors[k];
        if v.norm_squared() == 0.0 {
            continue;
        }
        for j in 0..p - d {
            let w: C64 = (k..p).map(|i| v[i].conj() * c[(i, j)]).sum();
            for i in k..p {
                let delta = v[i] * (w * 2.0);
                c[(i, j)] -= delta;
            }
        }
    }
    c
}

fn xnm_negligible(x: f64) -> bool {
    x < f64::MIN_POSITIVE * 1e4
}

/// Eigendecomposition of a general complex square matrix.
#[derive(Debug, Clone)]
pub struct Eig {
    /// Eigenvalues, in Schur order.
    pub values: CVector,
    /// Unit-norm right eigenvectors as columns, matching `values`.
    pub vectors: CMatrix,
}

/// Full eigendecomposition of a small dense complex matrix via the Schur form
/// plus back-substitution for the eigenvectors of the triangular factor.
pub fn eig(a: &CMatrix) -> Result<Eig> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "eig expects a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if n == 1 {
        return Ok(Eig {
            values: CVector::from_element(1, a[(0, 0)]),
            vectors: CMatrix::identity(1, 1),
        });
    }
    let schur = a.clone().try_schur(1e-14, 20_000).ok_or(Error::EigenFailure)?;
    let (q, t) = schur.unpack();
    let tnorm = t.norm().max(f64::MIN_POSITIVE);
    let smin = f64::EPSILON * tnorm;
    let mut vectors = CMatrix::zeros(n, n);
    let mut values = CVector::zeros(n);
    for k in 0..n {
        let lambda = t[(k, k)];
        values[k] = lambda;
        let mut y = CVector::zeros(n);
        y[k] = C64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let s: C64 = ((j + 1)..=k).map(|m| t[(j, m)] * y[m]).sum();
            let mut den = t[(j, j)] - lambda;
            if den.norm() < smin {
                den = C64::new(smin, 0.0);
            }
            y[j] = -s / den;
        }
        let mut v = &q * y;
        let vn = v.norm();
        if vn > 0.0 {
            v /= C64::new(vn, 0.0);
        }
        vectors.set_column(k, &v);
    }
    Ok(Eig { values, vectors })
}

/// Moore-Penrose pseudo-inverse together with the condition number
/// `σ_max / σ_min`. Fails when the matrix has fewer rows than columns or is
/// rank deficient relative to [`RANK_TOL`].
pub fn pinv_with_cond(a: &CMatrix) -> Result<(CMatrix, f64)> {
    let (p, q) = (a.nrows(), a.ncols());
    if p < q {
        return Err(Error::RankDeficient(format!(
            "{p}x{q} system has fewer rows than columns"
        )));
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let v_t = svd.v_t.as_ref().expect("svd with v_t");
    let s = &svd.singular_values;
    let smax = s[0];
    let smin = s[q - 1];
    if smax <= 0.0 || smin < RANK_TOL * smax {
        return Err(Error::RankDeficient(format!(
            "singular values span [{smin:.3e}, {smax:.3e}]"
        )));
    }
    // pinv = V Σ⁻¹ Uᴴ
    let mut vs = v_t.adjoint();
    for j in 0..q {
        let inv = C64::new(1.0 / s[j], 0.0);
        vs.column_mut(j).apply(|x| *x *= inv);
    }
    Ok((vs * u.adjoint(), smax / smin))
}

/// Real-valued pseudo-inverse with conditioning, same contract as
/// [`pinv_with_cond`].
pub fn pinv_with_cond_real(a: &RMatrix) -> Result<(RMatrix, f64)> {
    let (p, q) = (a.nrows(), a.ncols());
    if p < q {
        return Err(Error::RankDeficient(format!(
            "{p}x{q} system has fewer rows than columns"
        )));
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let v_t = svd.v_t.as_ref().expect("svd with v_t");
    let s = &svd.singular_values;
    let smax = s[0];
    let smin = s[q - 1];
    if smax <= 0.0 || smin < RANK_TOL * smax {
        return Err(Error::RankDeficient(format!(
            "singular values span [{smin:.3e}, {smax:.3e}]"
        )));
    }
    let mut vs = v_t.transpose();
    for j in 0..q {
        let inv = 1.0 / s[j];
        vs.column_mut(j).apply(|x| *x *= inv);
    }
    Ok((vs * u.transpose(), smax / smin))
}

/// Principal angles (radians, ascending) between the column spaces of `a`
/// and `b`. Inputs need not be orthonormal.
pub fn principal_angles(a: &CMatrix, b: &CMatrix) -> Vec<f64> {
    let qa = orthonormal_columns(a);
    let qb = orthonormal_columns(b);
    let m = qa.adjoint() * qb;
    let mut s: Vec<f64> = m.svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s.iter().map(|&x| x.clamp(-1.0, 1.0).acos()).collect()
}

fn orthonormal_columns(a: &CMatrix) -> CMatrix {
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("svd with u");
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > RANK_TOL * smax.max(f64::MIN_POSITIVE))
        .count();
    u.columns(0, rank).into_owned()
}

/// Largest entry magnitude of a complex matrix.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// splitmix64 step, used for small fixed pseudo-random constants.
pub(crate) fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn perm_roundtrip_and_compose() {
        let p = Perm::from_gather(vec![2, 0, 1]);
        let x = CVector::from_vec(vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)]);
        let y = p.apply(&x);
        assert_eq!(y[0], c(3.0, 0.0));
        let back = p.inverse().apply(&y);
        assert_eq!(back, x);
        let id = p.compose(&p.inverse());
        assert_eq!(id, Perm::identity(3));
        // dense form agrees with gather form
        let dense = to_complex(&p.to_dense());
        assert_abs_diff_eq!((dense * &x - y).norm(), 0.0);
    }

    #[test]
    fn complement_is_orthonormal_and_orthogonal() {
        let mut state = 7u64;
        let mut next = || (splitmix64(&mut state) as f64 / u64::MAX as f64) - 0.5;
        let a = CMatrix::from_fn(9, 3, |_, _| c(next(), next()));
        let u = a.svd(true, false).u.unwrap();
        let un = orthonormal_complement(&u);
        assert_eq!(un.shape(), (9, 6));
        assert_abs_diff_eq!(
            (un.adjoint() * &un - CMatrix::identity(6, 6)).norm(),
            0.0,
            epsilon = 1e-13
        );
        assert_abs_diff_eq!((u.adjoint() * &un).norm(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn eig_recovers_constructed_spectrum() {
        // Build A = T D T^{-1} with known eigenvalues.
        let t = CMatrix::from_row_slice(
            3,
            3,
            &[
                c(1.0, 0.2),
                c(0.3, -0.4),
                c(0.1, 0.0),
                c(-0.2, 0.5),
                c(1.1, 0.0),
                c(0.4, 0.3),
                c(0.0, -0.3),
                c(0.2, 0.1),
                c(0.9, -0.6),
            ],
        );
        let d = CMatrix::from_diagonal(&CVector::from_vec(vec![
            c(2.0, 1.0),
            c(-1.0, 0.5),
            c(0.3, -2.0),
        ]));
        let a = &t * d * t.clone().try_inverse().unwrap();
        let e = eig(&a).unwrap();
        for k in 0..3 {
            let residual = (&a * e.vectors.column(k) - e.vectors.column(k) * e.values[k]).norm();
            assert!(residual < 1e-10, "eigpair residual {residual:.3e}");
        }
        let mut got: Vec<f64> = e.values.iter().map(|z| z.re).collect();
        got.sort_by(f64::total_cmp);
        let mut want = [2.0, -1.0, 0.3];
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(want.iter()) {
            assert_abs_diff_eq!(g, w, epsilon = 1e-10);
        }
    }

    #[test]
    fn pinv_solves_least_squares() {
        let a = CMatrix::from_fn(5, 2, |i, j| c((i + j) as f64 + 1.0, i as f64 - j as f64));
        let (p, cond) = pinv_with_cond(&a).unwrap();
        assert!(cond >= 1.0);
        assert_abs_diff_eq!((&a * &p * &a - &a).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn pinv_rejects_rank_deficiency() {
        let mut a = CMatrix::zeros(4, 2);
        for i in 0..4 {
            a[(i, 0)] = c(1.0, 0.0);
            a[(i, 1)] = c(2.0, 0.0); // collinear columns
        }
        assert!(matches!(pinv_with_cond(&a), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn principal_angles_detect_shared_and_disjoint_spans() {
        let e1 = CMatrix::from_fn(4, 1, |i, _| if i == 0 { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let e2 = CMatrix::from_fn(4, 1, |i, _| if i == 1 { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let angles = principal_angles(&e1, &e1);
        assert!(angles[0] < 1e-12);
        let angles = principal_angles(&e1, &e2);
        assert_abs_diff_eq!(angles[0], std::f64::consts::FRAC_PI_2, epsilon = 1e-12);
    }
}
