//! Shift-invariance (ESPRIT-type) frequency estimators: the augmented
//! variants for strictly non-circular sources, in complex-valued and
//! real-valued (unitary) form, plus the non-augmented baselines.

use nalgebra::DMatrix;

use crate::array_model::{
    fast_real_stack, real_transform, transformed_selection, SamplingGrid, SelectionMatrix,
    SelectionSet,
};
use crate::error::{Error, Result};
use crate::linalg::{
    eig, flip_cols, flip_rows, orthonormal_complement, pinv_with_cond, pinv_with_cond_real,
    splitmix64, to_complex, C64, CMatrix, CVector, RMatrix, RVector,
};
use crate::signal_synth::augment;

/// Eigenvector-matrix condition number beyond which joint pairing is flagged.
const PAIRING_COND_LIMIT: f64 = 1e8;
/// Imaginary part of a nominally real eigenvalue that triggers a warning.
const REAL_EIG_RESIDUAL_WARN: f64 = 1e-6;

/// Truncated SVD of a data matrix, split into signal and noise subspaces.
#[derive(Debug, Clone)]
pub struct SubspaceDecomp {
    /// Dominant left singular vectors (`p × d`).
    pub u_s: CMatrix,
    /// Leading singular values, descending.
    pub sigma_s: RVector,
    /// Dominant right singular vectors (`q × d`).
    pub v_s: CMatrix,
    /// Orthonormal basis of the left complement (`p × (p - d)`).
    pub u_n: CMatrix,
}

/// Estimator output: paired frequency estimates plus numerical diagnostics.
#[derive(Debug, Clone)]
pub struct EstimationResult {
    /// `R × d` spatial frequencies, one column per source, columns paired
    /// across modes; each entry in `(-π, π]`.
    pub mu_hat: RMatrix,
    /// Per-mode invariance eigenvalues in the pairing order (`e^{jμ}` for the
    /// complex-valued estimators, `tan(μ/2)` for the real-valued ones).
    pub eigvals: Vec<CVector>,
    /// Largest imaginary part seen among nominally real eigenvalues.
    pub max_imag_residual: f64,
    /// Condition number of each per-mode least-squares system.
    pub ls_cond: Vec<f64>,
    /// Condition number of the joint eigenvector matrix.
    pub pairing_cond: f64,
    pub warnings: Vec<String>,
}

/// Truncated SVD with `d` dominant components and the orthogonal complement.
/// Fails when `d` exceeds the numerical rank (`σ_d / σ_1 < 1e-12`).
pub fn signal_subspace(x: &CMatrix, d: usize) -> Result<SubspaceDecomp> {
    let (p, q) = x.shape();
    if d == 0 || d > p.min(q) {
        return Err(Error::DimensionMismatch(format!(
            "cannot take a {d}-dimensional subspace of a {p}x{q} matrix"
        )));
    }
    let svd = x.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let v_t = svd.v_t.as_ref().expect("svd with v_t");
    let s = &svd.singular_values;
    if s[0] <= 0.0 || s[d - 1] < 1e-12 * s[0] {
        return Err(Error::RankDeficient(format!(
            "requested {d} components but sigma_{d}/sigma_1 = {:.3e}",
            if s[0] > 0.0 { s[d - 1] / s[0] } else { 0.0 }
        )));
    }
    let u_s = u.columns(0, d).into_owned();
    let v_s = v_t.rows(0, d).adjoint();
    let u_n = orthonormal_complement(&u_s);
    Ok(SubspaceDecomp {
        u_s,
        sigma_s: RVector::from_iterator(d, s.iter().take(d).copied()),
        v_s,
        u_n,
    })
}

/// Real-valued truncated SVD: `(U_s, σ_s, V_s)` of a real matrix.
pub fn signal_subspace_real(x: &RMatrix, d: usize) -> Result<(RMatrix, RVector, RMatrix)> {
    let (p, q) = x.shape();
    if d == 0 || d > p.min(q) {
        return Err(Error::DimensionMismatch(format!(
            "cannot take a {d}-dimensional subspace of a {p}x{q} matrix"
        )));
    }
    let svd = x.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let v_t = svd.v_t.as_ref().expect("svd with v_t");
    let s = &svd.singular_values;
    if s[0] <= 0.0 || s[d - 1] < 1e-12 * s[0] {
        return Err(Error::RankDeficient(format!(
            "requested {d} components but sigma_{d}/sigma_1 = {:.3e}",
            if s[0] > 0.0 { s[d - 1] / s[0] } else { 0.0 }
        )));
    }
    Ok((
        u.columns(0, d).into_owned(),
        RVector::from_iterator(d, s.iter().take(d).copied()),
        v_t.rows(0, d).transpose(),
    ))
}

/// Least-squares solution `Γ = (J1 U_s)⁺ (J2 U_s)` of one shift-invariance
/// equation, with the conditioning of `J1 U_s`.
pub fn ls_invariance(
    u_s: &CMatrix,
    j1: &SelectionMatrix,
    j2: &SelectionMatrix,
) -> Result<(CMatrix, f64)> {
    let a1 = j1.gather(u_s);
    let (pinv, cond) = pinv_with_cond(&a1).map_err(singular_invariance)?;
    Ok((pinv * j2.gather(u_s), cond))
}

/// Real-valued counterpart for dense transformed selection matrices.
pub fn ls_invariance_real(
    e_s: &RMatrix,
    k1: &RMatrix,
    k2: &RMatrix,
) -> Result<(RMatrix, f64)> {
    let a1 = k1 * e_s;
    let (pinv, cond) = pinv_with_cond_real(&a1).map_err(singular_invariance)?;
    Ok((pinv * (k2 * e_s), cond))
}

fn singular_invariance(e: Error) -> Error {
    match e {
        Error::RankDeficient(msg) => Error::SingularInvariance(msg),
        other => other,
    }
}

/// How to order the jointly paired eigenvalue columns deterministically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigOrder {
    /// By the phase of the first-mode eigenvalue (complex-valued estimators).
    Phase,
    /// By the real part of the first-mode eigenvalue (real-valued estimators).
    Value,
}

/// Joint eigendecomposition of the per-mode invariance matrices.
#[derive(Debug, Clone)]
pub struct JointEig {
    /// Per-mode eigenvalues, one vector per mode, columns paired.
    pub eigvals: Vec<CVector>,
    /// Shared eigenvector matrix.
    pub t: CMatrix,
    /// Its inverse.
    pub t_inv: CMatrix,
    /// Condition number of `t`.
    pub cond: f64,
    pub warnings: Vec<String>,
}

/// Pairs the per-mode eigenvalues through the eigenvectors of a fixed
/// random-weight combination `Σ_r w_r Γ^{(r)}`; exact whenever the inputs
/// commute, asymptotically exact otherwise.
pub fn joint_eig(gammas: &[CMatrix], order: EigOrder) -> Result<JointEig> {
    if gammas.is_empty() {
        return Err(Error::DimensionMismatch("no invariance matrices".into()));
    }
    let d = gammas[0].nrows();
    for g in gammas {
        if g.nrows() != d || g.ncols() != d {
            return Err(Error::DimensionMismatch(
                "invariance matrices must be square and equally sized".into(),
            ));
        }
    }
    let w = joint_weights(gammas.len());
    let mut sum = CMatrix::zeros(d, d);
    for (g, &wr) in gammas.iter().zip(w.iter()) {
        sum += g * C64::new(wr, 0.0);
    }
    let decomp = eig(&sum)?;
    let t = decomp.vectors;
    let svd = t.clone().svd(false, false);
    let smin = svd.singular_values[d - 1];
    let smax = svd.singular_values[0];
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let mut warnings = Vec::new();
    if cond > PAIRING_COND_LIMIT {
        warnings.push(format!(
            "joint eigenvector matrix is ill conditioned ({cond:.3e}); pairing may be unreliable"
        ));
    }
    let t_inv = t
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularInvariance("joint eigenvector matrix is singular".into()))?;
    let mut eigvals: Vec<CVector> = gammas
        .iter()
        .map(|g| (&t_inv * g * &t).diagonal())
        .collect();

    // Deterministic column order keyed on the first mode.
    let mut perm: Vec<usize> = (0..d).collect();
    match order {
        EigOrder::Phase => perm.sort_by(|&a, &b| eigvals[0][a].arg().total_cmp(&eigvals[0][b].arg())),
        EigOrder::Value => perm.sort_by(|&a, &b| eigvals[0][a].re.total_cmp(&eigvals[0][b].re)),
    }
    let reorder_cols = |m: &CMatrix| -> CMatrix {
        CMatrix::from_fn(m.nrows(), d, |i, j| m[(i, perm[j])])
    };
    let t = reorder_cols(&t);
    let t_inv = DMatrix::from_fn(d, d, |i, j| t_inv[(perm[i], j)]);
    for vals in eigvals.iter_mut() {
        *vals = CVector::from_iterator(d, perm.iter().map(|&p| vals[p]));
    }
    Ok(JointEig { eigvals, t, t_inv, cond, warnings })
}

/// Fixed pseudo-random unit-norm weights for the joint eigendecomposition.
fn joint_weights(r: usize) -> Vec<f64> {
    let mut state = 0x4E43_4553_5052_4954u64;
    let mut w: Vec<f64> = (0..r)
        .map(|_| 0.5 + (splitmix64(&mut state) >> 11) as f64 / (1u64 << 53) as f64)
        .collect();
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in w.iter_mut() {
        *x /= norm;
    }
    w
}

fn wrap_angle(mu: f64) -> f64 {
    if mu <= -std::f64::consts::PI {
        mu + 2.0 * std::f64::consts::PI
    } else {
        mu
    }
}

/// Source-count limit of the augmented estimators:
/// `min(min_r 2·M_r^{(sel)}·M/M_r, N)`.
pub fn nc_resolvability_limit(grid: &SamplingGrid, sel: &SelectionSet, n: usize) -> usize {
    let rows = (0..grid.ndims())
        .map(|r| 2 * sel.overlap(r) * grid.len() / grid.mode_len(r))
        .min()
        .unwrap_or(0);
    rows.min(n)
}

/// Source-count limit of the non-augmented estimators; unitary variants see
/// `2N` effective snapshots through forward-backward averaging.
pub fn resolvability_limit(
    grid: &SamplingGrid,
    sel: &SelectionSet,
    n: usize,
    forward_backward: bool,
) -> usize {
    let rows = (0..grid.ndims())
        .map(|r| sel.overlap(r) * grid.len() / grid.mode_len(r))
        .min()
        .unwrap_or(0);
    rows.min(if forward_backward { 2 * n } else { n })
}

fn check_resolvability(d: usize, limit: usize, what: &str) -> Result<()> {
    if d > limit {
        Err(Error::Resolvability(format!(
            "{what} resolves at most {limit} sources, {d} requested"
        )))
    } else {
        Ok(())
    }
}

fn check_input(x: &CMatrix, grid: &SamplingGrid, sel: &SelectionSet, d: usize) -> Result<()> {
    if x.nrows() != grid.len() {
        return Err(Error::DimensionMismatch(format!(
            "measurement has {} rows, grid has {} points",
            x.nrows(),
            grid.len()
        )));
    }
    if sel.ndims() != grid.ndims() {
        return Err(Error::DimensionMismatch(
            "selection set and grid dimensionality disagree".into(),
        ));
    }
    if d == 0 {
        return Err(Error::InvalidSources("source count must be positive".into()));
    }
    Ok(())
}

/// Complex-valued estimator for strictly non-circular sources: truncated SVD
/// of the augmented observation `[X; Π X*]`, per-mode least squares on the
/// augmented selection matrices, joint eigenvalues, `μ̂ = arg λ̂`.
pub fn nc_standard_esprit(
    x: &CMatrix,
    d: usize,
    grid: &SamplingGrid,
    sel: &SelectionSet,
) -> Result<EstimationResult> {
    check_input(x, grid, sel, d)?;
    check_resolvability(d, nc_resolvability_limit(grid, sel, x.ncols()), "augmented estimator")?;
    let xnc = augment(x);
    let sub = signal_subspace(&xnc, d)?;
    let mut gammas = Vec::with_capacity(grid.ndims());
    let mut ls_cond = Vec::with_capacity(grid.ndims());
    for r in 0..grid.ndims() {
        let m = sel.mode(r);
        let (g, cond) = ls_invariance(&sub.u_s, &m.j1_nc, &m.j2_nc)?;
        gammas.push(g);
        ls_cond.push(cond);
    }
    let je = joint_eig(&gammas, EigOrder::Phase)?;
    finish_phase(je, ls_cond, grid.ndims(), d)
}

/// Non-augmented complex-valued baseline (ordinary R-D shift invariance).
pub fn standard_esprit(
    x: &CMatrix,
    d: usize,
    grid: &SamplingGrid,
    sel: &SelectionSet,
) -> Result<EstimationResult> {
    check_input(x, grid, sel, d)?;
    check_resolvability(d, resolvability_limit(grid, sel, x.ncols(), false), "standard estimator")?;
    let sub = signal_subspace(x, d)?;
    let mut gammas = Vec::with_capacity(grid.ndims());
    let mut ls_cond = Vec::with_capacity(grid.ndims());
    for r in 0..grid.ndims() {
        let m = sel.mode(r);
        let (g, cond) = ls_invariance(&sub.u_s, &m.j1_eff, &m.j2_eff)?;
        gammas.push(g);
        ls_cond.push(cond);
    }
    let je = joint_eig(&gammas, EigOrder::Phase)?;
    finish_phase(je, ls_cond, grid.ndims(), d)
}

fn finish_phase(
    je: JointEig,
    ls_cond: Vec<f64>,
    ndims: usize,
    d: usize,
) -> Result<EstimationResult> {
    let mut mu_hat = RMatrix::zeros(ndims, d);
    for r in 0..ndims {
        for i in 0..d {
            mu_hat[(r, i)] = wrap_angle(je.eigvals[r][i].arg());
        }
    }
    if mu_hat.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite frequency estimate".into()));
    }
    Ok(EstimationResult {
        mu_hat,
        eigvals: je.eigvals,
        max_imag_residual: 0.0,
        ls_cond,
        pairing_cond: je.cond,
        warnings: je.warnings,
    })
}

/// Real-valued estimator for strictly non-circular sources: subspace of the
/// stacked observation `[Re X; Im X]`, least squares on the transformed
/// selection matrices, `μ̂ = 2·arctan ω̂`.
pub fn nc_unitary_esprit(
    x: &CMatrix,
    d: usize,
    grid: &SamplingGrid,
    sel: &SelectionSet,
) -> Result<EstimationResult> {
    check_input(x, grid, sel, d)?;
    check_resolvability(d, nc_resolvability_limit(grid, sel, x.ncols()), "augmented estimator")?;
    let stacked = fast_real_stack(x);
    let (e_s, _, _) = signal_subspace_real(&stacked, d)?;
    let mut upsilons = Vec::with_capacity(grid.ndims());
    let mut ls_cond = Vec::with_capacity(grid.ndims());
    for r in 0..grid.ndims() {
        let m = sel.mode(r);
        let (u, cond) = ls_invariance_real(&e_s, &m.k1, &m.k2)?;
        upsilons.push(to_complex(&u));
        ls_cond.push(cond);
    }
    let je = joint_eig(&upsilons, EigOrder::Value)?;
    finish_arctan(je, ls_cond, grid.ndims(), d)
}

/// Non-augmented real-valued baseline. Requires a centro-symmetric grid with
/// flip-compatible subarrays; anything else is an unsupported geometry.
pub fn unitary_esprit(
    x: &CMatrix,
    d: usize,
    grid: &SamplingGrid,
    sel: &SelectionSet,
) -> Result<EstimationResult> {
    check_input(x, grid, sel, d)?;
    if !grid.is_centro_symmetric() {
        return Err(Error::UnsupportedGeometry(
            "grid is not centro-symmetric; the non-augmented unitary estimator does not apply"
                .into(),
        ));
    }
    for r in 0..grid.ndims() {
        if !sel.mode(r).is_centro_symmetric_pair() {
            return Err(Error::UnsupportedGeometry(format!(
                "subarray pair of mode {r} is not flip-symmetric"
            )));
        }
    }
    check_resolvability(d, resolvability_limit(grid, sel, x.ncols(), true), "unitary estimator")?;
    // forward-backward averaging then the bijective real map
    let m = grid.len();
    let n = x.ncols();
    let mut fba = CMatrix::zeros(m, 2 * n);
    fba.view_mut((0, 0), (m, n)).copy_from(x);
    fba.view_mut((0, n), (m, n))
        .copy_from(&flip_cols(&flip_rows(&x.conjugate())));
    let t = real_transform(&fba)?;
    let (e_s, _, _) = signal_subspace_real(&t, d)?;
    let mut upsilons = Vec::with_capacity(grid.ndims());
    let mut ls_cond = Vec::with_capacity(grid.ndims());
    for r in 0..grid.ndims() {
        let (k1, k2) = transformed_selection(&sel.mode(r).j2_eff);
        let (u, cond) = ls_invariance_real(&e_s, &k1, &k2)?;
        upsilons.push(to_complex(&u));
        ls_cond.push(cond);
    }
    let je = joint_eig(&upsilons, EigOrder::Value)?;
    finish_arctan(je, ls_cond, grid.ndims(), d)
}

fn finish_arctan(
    je: JointEig,
    ls_cond: Vec<f64>,
    ndims: usize,
    d: usize,
) -> Result<EstimationResult> {
    let mut mu_hat = RMatrix::zeros(ndims, d);
    let mut residual = 0.0f64;
    for r in 0..ndims {
        for i in 0..d {
            let omega = je.eigvals[r][i];
            residual = residual.max(omega.im.abs());
            mu_hat[(r, i)] = 2.0 * omega.re.atan();
        }
    }
    if mu_hat.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite frequency estimate".into()));
    }
    let mut warnings = je.warnings;
    if residual > REAL_EIG_RESIDUAL_WARN {
        warnings.push(format!(
            "complex eigenvalue residual {residual:.3e} on the real-valued path"
        ));
    }
    Ok(EstimationResult {
        mu_hat,
        eigvals: je.eigvals,
        max_imag_residual: residual,
        ls_cond,
        pairing_cond: je.cond,
        warnings,
    })
}
