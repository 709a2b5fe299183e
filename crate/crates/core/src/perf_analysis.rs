//! First-order analytic performance of the augmented estimators: subspace
//! leakage under additive noise, the per-realization frequency error
//! expansion, and deterministic MSE predictions driven only by the noise
//! second-order statistics.
//!
//! All quantities are conditioned on a noise-free model (known steering
//! structure and symbol realization) and become exact in the high effective
//! SNR regime.

use nalgebra::DMatrix;

use crate::array_model::{
    augmented_steering, steering_matrix, SamplingGrid, SelectionSet, SourceParams,
};
use crate::error::{Error, Result};
use crate::estimators::{joint_eig, signal_subspace, EigOrder, SubspaceDecomp};
use crate::linalg::{C64, CMatrix, CVector, Perm, RMatrix};
use crate::matching::match_columns;

/// Commutation permutation `K_{M,N}` with `K · vec(A) = vec(Aᵀ)` for `M × N`
/// matrices `A`.
pub fn commutation(m: usize, n: usize) -> Perm {
    assert!(m >= 1 && n >= 1);
    Perm::from_gather((0..m * n).map(|p| (p / n) + (p % n) * m).collect())
}

/// Permutation `K̃` relating the vectorized augmented noise to the physical
/// one: `vec([N; Π_M N*]) = K̃ [vec(N); vec(N)*]`.
pub fn k_tilde(m: usize, n: usize) -> Perm {
    let l = m * n;
    let kmn = commutation(m, n);
    // I_N ⊗ Π_M as a gather
    let flip = Perm::from_gather(
        (0..l)
            .map(|p| (p / m) * m + (m - 1 - (p % m)))
            .collect(),
    );
    let lower = kmn.compose(&flip);
    let blk = block_diag(&kmn, &lower);
    commutation(2 * m, n).inverse().compose(&blk)
}

fn block_diag(a: &Perm, b: &Perm) -> Perm {
    let la = a.len();
    let mut gather = Vec::with_capacity(la + b.len());
    gather.extend_from_slice(a.gather_indices());
    gather.extend(b.gather_indices().iter().map(|&g| la + g));
    Perm::from_gather(gather)
}

/// Second-order statistics of the vectorized augmented noise
/// `n' = vec([N; Π N*])`.
#[derive(Debug, Clone)]
pub struct AugmentedNoiseStats {
    kind: StatsKind,
    ktilde: Perm,
    m: usize,
    n: usize,
}

#[derive(Debug, Clone)]
enum StatsKind {
    White(f64),
    General { rnc: CMatrix, cnc: CMatrix },
}

impl AugmentedNoiseStats {
    /// Circularly symmetric white physical noise of power `σ_n²`; the
    /// augmented statistics reduce to `R' = σ² I` and `C' = σ² (I_N ⊗ Π_{2M})`.
    pub fn circular_white(sigma2: f64, m: usize, n: usize) -> Result<Self> {
        if !(sigma2 >= 0.0) {
            return Err(Error::NotPsd(format!("negative noise power {sigma2}")));
        }
        Ok(AugmentedNoiseStats { kind: StatsKind::White(sigma2), ktilde: k_tilde(m, n), m, n })
    }

    pub fn white_sigma2(&self) -> Option<f64> {
        match self.kind {
            StatsKind::White(s) => Some(s),
            StatsKind::General { .. } => None,
        }
    }

    pub fn ktilde(&self) -> &Perm {
        &self.ktilde
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    /// Augmented covariance `R' = E{n' n'ᴴ}`, materialized densely.
    pub fn rnc(&self) -> CMatrix {
        match &self.kind {
            StatsKind::White(s) => CMatrix::identity(2 * self.m * self.n, 2 * self.m * self.n)
                * C64::new(*s, 0.0),
            StatsKind::General { rnc, .. } => rnc.clone(),
        }
    }

    /// Augmented pseudo-covariance `C' = E{n' n'ᵀ}`, materialized densely.
    pub fn cnc(&self) -> CMatrix {
        match &self.kind {
            StatsKind::White(s) => {
                let p = 2 * self.m;
                let l = p * self.n;
                CMatrix::from_fn(l, l, |i, j| {
                    if i / p == j / p && (i % p) + (j % p) == p - 1 {
                        C64::new(*s, 0.0)
                    } else {
                        C64::new(0.0, 0.0)
                    }
                })
            }
            StatsKind::General { cnc, .. } => cnc.clone(),
        }
    }
}

/// Assembles the augmented noise statistics from the physical `(R_nn, C_nn)`
/// pair of `vec(N)`:
/// `R' = K̃ [R C; C* R*] K̃ᴴ` and `C' = K̃ [C R; R* C*] K̃ᵀ`.
pub fn augment_noise_stats(
    rnn: &CMatrix,
    cnn: &CMatrix,
    m: usize,
    n: usize,
) -> Result<AugmentedNoiseStats> {
    let l = m * n;
    if rnn.nrows() != l || rnn.ncols() != l || cnn.nrows() != l || cnn.ncols() != l {
        return Err(Error::DimensionMismatch(format!(
            "noise statistics are {}x{} but M·N = {l}",
            rnn.nrows(),
            rnn.ncols()
        )));
    }
    let kt = k_tilde(m, n);
    let mut big_r = CMatrix::zeros(2 * l, 2 * l);
    big_r.view_mut((0, 0), (l, l)).copy_from(rnn);
    big_r.view_mut((0, l), (l, l)).copy_from(cnn);
    big_r.view_mut((l, 0), (l, l)).copy_from(&cnn.conjugate());
    big_r.view_mut((l, l), (l, l)).copy_from(&rnn.conjugate());
    let mut big_c = CMatrix::zeros(2 * l, 2 * l);
    big_c.view_mut((0, 0), (l, l)).copy_from(cnn);
    big_c.view_mut((0, l), (l, l)).copy_from(rnn);
    big_c.view_mut((l, 0), (l, l)).copy_from(&rnn.conjugate());
    big_c.view_mut((l, l), (l, l)).copy_from(&cnn.conjugate());
    Ok(AugmentedNoiseStats {
        kind: StatsKind::General {
            rnc: kt.conjugate(&big_r),
            cnc: kt.congruence_t(&big_c),
        },
        ktilde: kt,
        m,
        n,
    })
}

/// Noise-free model context: exact subspaces of the augmented observation and
/// the shared eigenstructure of the per-mode invariance matrices, with
/// columns aligned to the true source order.
#[derive(Debug, Clone)]
pub struct AnalyticContext {
    sub: SubspaceDecomp,
    /// `I - U_s U_sᴴ`, the noise-subspace projector.
    proj: CMatrix,
    /// Per-mode eigenvalues `λ_i^{(r)} = e^{jμ_i^{(r)}}`, true-source order.
    lambdas: Vec<CVector>,
    /// Shared eigenvector matrix (columns `q_i`, unit norm).
    q: CMatrix,
    /// Its inverse (rows `p_iᵀ`, `p_iᵀ q_i = 1`).
    p: CMatrix,
    /// Cached `(J̃1' U_s)⁺` per mode.
    pinv_j1u: Vec<CMatrix>,
    ndims: usize,
    count: usize,
}

impl AnalyticContext {
    /// Builds the context from the noise-free model `X₀' = A' S`.
    pub fn new(
        grid: &SamplingGrid,
        src: &SourceParams,
        symbols: &CMatrix,
        sel: &SelectionSet,
    ) -> Result<Self> {
        if symbols.nrows() != src.count() {
            return Err(Error::DimensionMismatch(format!(
                "{} symbol rows for {} sources",
                symbols.nrows(),
                src.count()
            )));
        }
        let d = src.count();
        let a = steering_matrix(grid, src)?;
        let anc = augmented_steering(&a, src.phi());
        let x0nc = &anc * symbols;
        let sub = signal_subspace(&x0nc, d)?;
        let mut gammas = Vec::with_capacity(grid.ndims());
        let mut pinv_j1u = Vec::with_capacity(grid.ndims());
        for r in 0..grid.ndims() {
            let mode = sel.mode(r);
            let a1 = mode.j1_nc.gather(&sub.u_s);
            let (pinv, _) = crate::linalg::pinv_with_cond(&a1)
                .map_err(|e| Error::SingularInvariance(e.to_string()))?;
            gammas.push(&pinv * mode.j2_nc.gather(&sub.u_s));
            pinv_j1u.push(pinv);
        }
        let je = joint_eig(&gammas, EigOrder::Phase)?;
        // Align eigencolumns with the true source order.
        let mut est_mu = RMatrix::zeros(grid.ndims(), d);
        for r in 0..grid.ndims() {
            for i in 0..d {
                est_mu[(r, i)] = je.eigvals[r][i].arg();
            }
        }
        let (perm, _) = match_columns(src.mu(), &est_mu);
        let q = CMatrix::from_fn(d, d, |i, j| je.t[(i, perm[j])]);
        let p = CMatrix::from_fn(d, d, |i, j| je.t_inv[(perm[i], j)]);
        let lambdas = je
            .eigvals
            .iter()
            .map(|v| CVector::from_iterator(d, perm.iter().map(|&k| v[k])))
            .collect();
        let proj = CMatrix::identity(2 * grid.len(), 2 * grid.len()) - &sub.u_s * sub.u_s.adjoint();
        Ok(AnalyticContext {
            sub,
            proj,
            lambdas,
            q,
            p,
            pinv_j1u,
            ndims: grid.ndims(),
            count: d,
        })
    }

    pub fn subspace(&self) -> &SubspaceDecomp {
        &self.sub
    }

    pub fn noise_projector(&self) -> &CMatrix {
        &self.proj
    }

    pub fn lambda(&self, r: usize, i: usize) -> C64 {
        self.lambdas[r][i]
    }

    pub fn eigenvectors(&self) -> &CMatrix {
        &self.q
    }

    pub fn ndims(&self) -> usize {
        self.ndims
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Row vector `wᵀ = p_iᵀ (J̃1' U_s)⁺` extended to the full augmented array
    /// through the selection pair: `uᵀ = wᵀ (J̃2'/λ - J̃1')`.
    fn error_functional(&self, sel: &SelectionSet, r: usize, i: usize) -> CVector {
        let mode = sel.mode(r);
        let p_row = self.p.row(i);
        let w = (p_row * &self.pinv_j1u[r]).transpose();
        let lam = self.lambdas[r][i];
        let mut u = mode.j2_nc.scatter(&w);
        u /= lam;
        u -= mode.j1_nc.scatter(&w);
        u
    }
}

/// First-order leakage of the noise into the signal subspace:
/// `ΔU_s = (I - U_s U_sᴴ) N' V_s Σ_s⁻¹` for an augmented noise realization.
pub fn subspace_perturbation(ctx: &AnalyticContext, nnc: &CMatrix) -> Result<CMatrix> {
    let p = ctx.sub.u_s.nrows();
    let q = ctx.sub.v_s.nrows();
    if nnc.nrows() != p || nnc.ncols() != q {
        return Err(Error::DimensionMismatch(format!(
            "noise realization is {}x{}, expected {p}x{q}",
            nnc.nrows(),
            nnc.ncols()
        )));
    }
    let mut t = &ctx.proj * nnc * &ctx.sub.v_s;
    for j in 0..ctx.count {
        let inv = C64::new(1.0 / ctx.sub.sigma_s[j], 0.0);
        t.column_mut(j).apply(|x| *x *= inv);
    }
    Ok(t)
}

/// First-order frequency errors `Δμ_i^{(r)} = Im{p_iᵀ (J̃1' U_s)⁺
/// (J̃2'/λ_i - J̃1') ΔU_s q_i}` for every mode and source, as an `R × d`
/// matrix.
pub fn error_expansion(
    ctx: &AnalyticContext,
    sel: &SelectionSet,
    du: &CMatrix,
) -> Result<RMatrix> {
    if du.nrows() != ctx.sub.u_s.nrows() || du.ncols() != ctx.count {
        return Err(Error::DimensionMismatch(format!(
            "subspace perturbation is {}x{}, expected {}x{}",
            du.nrows(),
            du.ncols(),
            ctx.sub.u_s.nrows(),
            ctx.count
        )));
    }
    let mut out = RMatrix::zeros(ctx.ndims, ctx.count);
    for r in 0..ctx.ndims {
        for i in 0..ctx.count {
            let u = ctx.error_functional(sel, r, i);
            let duq = du * ctx.q.column(i);
            let z: C64 = u.iter().zip(duq.iter()).map(|(a, b)| a * b).sum();
            out[(r, i)] = z.im;
        }
    }
    Ok(out)
}

/// Deterministic MSE prediction per mode and source. Dispatches to a
/// matrix-free evaluation for circularly symmetric white noise and to the
/// dense quadratic form otherwise; both routes agree to machine precision.
pub fn mse_predict(
    ctx: &AnalyticContext,
    sel: &SelectionSet,
    stats: &AugmentedNoiseStats,
) -> Result<RMatrix> {
    let p = ctx.sub.u_s.nrows();
    let n = ctx.sub.v_s.nrows();
    if stats.dims() != (p / 2, n) {
        return Err(Error::DimensionMismatch(format!(
            "noise statistics for M={}, N={} but model has M={}, N={}",
            stats.dims().0,
            stats.dims().1,
            p / 2,
            n
        )));
    }
    match stats.white_sigma2() {
        Some(sigma2) => mse_predict_white(ctx, sel, sigma2),
        None => mse_predict_dense(ctx, sel, &stats.rnc(), &stats.cnc()),
    }
}

/// Matrix-free white-noise evaluation of the MSE prediction.
pub fn mse_predict_white(
    ctx: &AnalyticContext,
    sel: &SelectionSet,
    sigma2: f64,
) -> Result<RMatrix> {
    let p = ctx.sub.u_s.nrows();
    let mut out = RMatrix::zeros(ctx.ndims, ctx.count);
    for r in 0..ctx.ndims {
        for i in 0..ctx.count {
            // s̃ = V_s Σ⁻¹ q_i,  ãᵀ = uᵀ (I - U_s U_sᴴ)
            let mut qi = ctx.q.column(i).into_owned();
            for k in 0..ctx.count {
                qi[k] /= C64::new(ctx.sub.sigma_s[k], 0.0);
            }
            let st = &ctx.sub.v_s * qi;
            let u = ctx.error_functional(sel, r, i);
            let at = ctx.proj.transpose() * &u;
            let t1 = sigma2 * st.norm_squared() * at.norm_squared();
            let st_sq: C64 = st.iter().map(|z| z * z).sum();
            let at_flip: C64 = (0..p).map(|k| at[k] * at[p - 1 - k]).sum();
            let t2 = st_sq * at_flip * sigma2;
            out[(r, i)] = finalize_mse(t1, t2.re)?;
        }
    }
    Ok(out)
}

/// Dense evaluation of the MSE quadratic form from explicit augmented noise
/// statistics `R'` and `C'`.
pub fn mse_predict_dense(
    ctx: &AnalyticContext,
    sel: &SelectionSet,
    rnc: &CMatrix,
    cnc: &CMatrix,
) -> Result<RMatrix> {
    let p = ctx.sub.u_s.nrows();
    let n = ctx.sub.v_s.nrows();
    let d = ctx.count;
    if rnc.nrows() != p * n || cnc.nrows() != p * n {
        return Err(Error::DimensionMismatch(format!(
            "augmented statistics are {}x{}, expected {}x{}",
            rnc.nrows(),
            rnc.ncols(),
            p * n,
            p * n
        )));
    }
    // W = (Σ_s⁻¹ V_sᵀ) ⊗ (U_n U_nᴴ), built densely.
    let st = DMatrix::from_fn(d, n, |k, t| ctx.sub.v_s[(t, k)] / C64::new(ctx.sub.sigma_s[k], 0.0));
    let w_mat = st.kronecker(&ctx.proj);
    let rt = rnc.transpose();
    let ct = cnc.transpose();
    let mut out = RMatrix::zeros(ctx.ndims, d);
    for r in 0..ctx.ndims {
        for i in 0..d {
            let b = ctx.error_functional(sel, r, i);
            let qi = ctx.q.column(i).into_owned();
            // r_i = q_i ⊗ b
            let mut ri = CVector::zeros(d * p);
            for a in 0..d {
                for k in 0..p {
                    ri[a * p + k] = qi[a] * b[k];
                }
            }
            let w = w_mat.transpose() * &ri;
            let t1c = (w.conjugate().transpose() * &rt * &w)[(0, 0)];
            if t1c.im.abs() > 1e-12 * t1c.norm().max(1e-300) {
                return Err(Error::Numerical(format!(
                    "MSE quadratic form has imaginary residual {:.3e}",
                    t1c.im
                )));
            }
            let t2c = (w.transpose() * &ct * &w)[(0, 0)];
            out[(r, i)] = finalize_mse(t1c.re, t2c.re)?;
        }
    }
    Ok(out)
}

fn finalize_mse(t1: f64, t2: f64) -> Result<f64> {
    let mse = 0.5 * (t1 - t2);
    if mse < -1e-15 {
        return Err(Error::Numerical(format!("negative MSE prediction {mse:.3e}")));
    }
    Ok(mse.max(0.0))
}

/// Scalar analytic RMSE aggregating [`mse_predict`] over all modes and
/// sources: square root of the mean squared error.
pub fn rmse_predict(
    ctx: &AnalyticContext,
    sel: &SelectionSet,
    stats: &AugmentedNoiseStats,
) -> Result<f64> {
    let mse = mse_predict(ctx, sel, stats)?;
    Ok((mse.sum() / (mse.nrows() * mse.ncols()) as f64).sqrt())
}
