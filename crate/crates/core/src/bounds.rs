//! Deterministic Cramér-Rao bounds and single-source closed forms: the full
//! bound for strictly non-circular sources, its single-source reduction, the
//! matching single-source MSE of the augmented estimators, the resulting
//! asymptotic efficiency, and the circular-source baseline bound.

use nalgebra::SymmetricEigen;

use crate::array_model::{mode_steering, steering_matrix, SamplingGrid, SourceParams};
use crate::error::{Error, Result};
use crate::linalg::{pinv_with_cond, unit_phasor, C64, CMatrix, RMatrix};

/// Condition-number guard on symmetric inversions inside the bounds.
const INV_COND_LIMIT: f64 = 1e12;

/// Partial derivatives of the steering matrix: `M × R·d`, block `r` holding
/// `∂a(μ_i)/∂μ_i^{(r)}` (a `j·k` factor applied in mode `r`).
pub fn derivative_matrix(grid: &SamplingGrid, src: &SourceParams) -> Result<CMatrix> {
    if grid.ndims() != src.ndims() {
        return Err(Error::DimensionMismatch(format!(
            "grid has {} modes, sources have {}",
            grid.ndims(),
            src.ndims()
        )));
    }
    let m = grid.len();
    let d = src.count();
    let r_dims = grid.ndims();
    let mut out = CMatrix::zeros(m, r_dims * d);
    for r in 0..r_dims {
        for i in 0..d {
            let mut col = CMatrix::from_element(1, 1, C64::new(1.0, 0.0));
            for l in 0..r_dims {
                let mut v = mode_steering(grid, l, src.mu()[(l, i)])?;
                if l == r {
                    for (k, &pos) in grid.mode_positions(l).iter().enumerate() {
                        v[k] *= C64::new(0.0, pos);
                    }
                }
                col = col.kronecker(&CMatrix::from_column_slice(v.len(), 1, v.as_slice()));
            }
            out.set_column(r * d + i, &col.column(0));
        }
    }
    Ok(out)
}

/// Real information-matrix building blocks of the non-circular bound.
#[derive(Debug, Clone)]
pub struct InfoTerms {
    /// `Re{Ψ* Aᴴ A Ψ}` (`d × d`).
    pub g0: RMatrix,
    /// `Im{Ψ* Aᴴ A Ψ}` (`d × d`).
    pub h0: RMatrix,
    /// `Re{(I_R ⊗ Ψ*) Dᴴ A Ψ}` (`Rd × d`).
    pub g1: RMatrix,
    /// `Im{(I_R ⊗ Ψ*) Dᴴ A Ψ}` (`Rd × d`).
    pub h1: RMatrix,
    /// `Re{(I_R ⊗ Ψ*) Dᴴ D (I_R ⊗ Ψ)}` (`Rd × Rd`).
    pub g2: RMatrix,
}

/// Evaluates the information-matrix blocks from a steering matrix, its
/// derivative matrix, and the rotation phases.
pub fn crb_info_terms(a: &CMatrix, d_mat: &CMatrix, phi: &[f64]) -> InfoTerms {
    let d = a.ncols();
    let r_dims = d_mat.ncols() / d;
    let rotate = |m: &CMatrix| -> CMatrix {
        // (I_R ⊗ Ψ*) on the left, Ψ on the right (block-wise for tall inputs)
        let mut out = m.clone();
        for blk in 0..out.nrows() / d {
            for i in 0..d {
                let tw = unit_phasor(phi[i]).conj();
                for j in 0..out.ncols() {
                    out[(blk * d + i, j)] *= tw;
                }
            }
        }
        for j in 0..out.ncols() {
            let tw = unit_phasor(phi[j % d]);
            for i in 0..out.nrows() {
                out[(i, j)] *= tw;
            }
        }
        out
    };
    let aha = rotate(&(a.adjoint() * a));
    let dha = rotate(&(d_mat.adjoint() * a));
    let dhd = rotate(&(d_mat.adjoint() * d_mat));
    let _ = r_dims;
    InfoTerms {
        g0: aha.map(|x| x.re),
        h0: aha.map(|x| x.im),
        g1: dha.map(|x| x.re),
        h1: dha.map(|x| x.im),
        g2: dhd.map(|x| x.re),
    }
}

/// Inputs of the full non-circular bound.
#[derive(Debug, Clone)]
pub struct CrbInputs {
    /// Steering matrix on the centroid-referenced grid.
    pub a: CMatrix,
    /// Derivative matrix on the same grid.
    pub d_mat: CMatrix,
    /// Rotation phases.
    pub phi: Vec<f64>,
    /// Real symbol covariance `S₀ S₀ᵀ / N` (empirical or model).
    pub r_s0: RMatrix,
    /// Noise power.
    pub sigma2: f64,
    /// Snapshot count.
    pub n: usize,
}

impl CrbInputs {
    /// Builds the inputs from a scenario. The grid is re-referenced to its
    /// centroid internally; the bound itself is invariant, the intermediate
    /// identities hold in this convention.
    pub fn new(
        grid: &SamplingGrid,
        src: &SourceParams,
        r_s0: RMatrix,
        sigma2: f64,
        n: usize,
    ) -> Result<Self> {
        let d = src.count();
        if r_s0.nrows() != d || r_s0.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "symbol covariance is {}x{} for {} sources",
                r_s0.nrows(),
                r_s0.ncols(),
                d
            )));
        }
        if !(sigma2 >= 0.0) || n == 0 {
            return Err(Error::Numerical("need sigma2 >= 0 and N >= 1".into()));
        }
        let centered = grid.centered();
        Ok(CrbInputs {
            a: steering_matrix(&centered, src)?,
            d_mat: derivative_matrix(&centered, src)?,
            phi: src.phi().to_vec(),
            r_s0,
            sigma2,
            n,
        })
    }
}

/// Hadamard product against the symbol covariance tiled to the shape of `x`
/// (both dimensions of `x` are multiples of `d`).
fn had_tile(x: &RMatrix, rs: &RMatrix) -> RMatrix {
    let d = rs.nrows();
    debug_assert_eq!(x.nrows() % d, 0);
    debug_assert_eq!(x.ncols() % d, 0);
    RMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * rs[(i % d, j % d)])
}

/// Symmetric inverse with a PSD/conditioning guard.
fn sym_inv(m: &RMatrix, what: &str) -> Result<RMatrix> {
    let sym = 0.5 * (m + m.transpose());
    let eig = SymmetricEigen::new(sym.clone());
    let lmax = eig.eigenvalues.amax();
    let lmin = eig.eigenvalues.min();
    if !(lmax > 0.0) || lmin <= 0.0 || lmax / lmin > INV_COND_LIMIT {
        return Err(Error::RankDeficient(format!(
            "{what}: eigenvalues span [{lmin:.3e}, {lmax:.3e}]"
        )));
    }
    let mut v = eig.eigenvectors.clone();
    for j in 0..v.ncols() {
        let inv = 1.0 / eig.eigenvalues[j];
        v.column_mut(j).apply(|x| *x *= inv);
    }
    Ok(&v * eig.eigenvectors.transpose())
}

/// Full deterministic bound for strictly non-circular sources:
/// `C' = (σ²/2N)·Re{J}⁻¹` with the six-term information matrix `J` assembled
/// from the blocks of [`crb_info_terms`] and the tiled symbol covariance.
pub fn nc_crb_full(inp: &CrbInputs) -> Result<RMatrix> {
    let terms = crb_info_terms(&inp.a, &inp.d_mat, &inp.phi);
    let rs = &inp.r_s0;
    let g0i = sym_inv(&terms.g0, "G0")?;

    let x1 = had_tile(&(&terms.g2 - &terms.g1 * &g0i * terms.g1.transpose()), rs);
    let x2 = had_tile(&(&terms.g1 * &g0i * &terms.h0), rs);
    let x3i = sym_inv(
        &had_tile(&(&terms.g0 - terms.h0.transpose() * &g0i * &terms.h0), rs),
        "G0 - H0' G0^-1 H0",
    )?;
    let x4 = had_tile(
        &(terms.h1.transpose() - terms.h0.transpose() * &g0i * terms.g1.transpose()),
        rs,
    );
    let x5 = had_tile(&terms.h1, rs);
    let x6i = sym_inv(&had_tile(&terms.g0, rs), "G0 ⊙ R")?;
    let x7 = had_tile(&(terms.h0.transpose() * &g0i * terms.g1.transpose()), rs);
    let x8 = had_tile(&(terms.h0.transpose() * &g0i * &terms.h0), rs);
    let x9 = had_tile(&terms.h1.transpose(), rs);

    let j = x1
        + &x2 * &x3i * &x4
        + &x5 * &x6i * &x7
        + &x5 * &x6i * &x8 * &x3i * &x7
        - &x5 * &x3i * &x9;

    let scale = j.norm().max(f64::MIN_POSITIVE);
    let asym = (&j - j.transpose()).norm();
    if asym > 1e-9 * scale {
        return Err(Error::Numerical(format!(
            "information matrix asymmetry {:.3e}",
            asym / scale
        )));
    }
    let j = 0.5 * (&j + j.transpose());
    let mut c = sym_inv(&j, "information matrix")
        .map_err(|_| Error::RankDeficient("singular information matrix".into()))?;
    c *= inp.sigma2 / (2.0 * inp.n as f64);
    // PSD sanity on the output
    let eig = SymmetricEigen::new(0.5 * (&c + c.transpose()));
    if eig.eigenvalues.min() < -1e-12 * eig.eigenvalues.amax() {
        return Err(Error::NotPsd("bound is not positive semidefinite".into()));
    }
    Ok(0.5 * (&c + c.transpose()))
}

/// Single-source reduction of the non-circular bound on an R-D uniform grid:
/// `C^(r) = (1/ρ̂) · 6 / (M (M_r² - 1))` per mode.
pub fn nc_crb_single(grid: &SamplingGrid, rho: f64) -> Result<Vec<f64>> {
    if !(rho > 0.0) {
        return Err(Error::Numerical(format!("effective SNR must be positive, got {rho}")));
    }
    let m = grid.len() as f64;
    Ok((0..grid.ndims())
        .map(|r| {
            let mr = grid.mode_len(r) as f64;
            6.0 / (rho * m * (mr * mr - 1.0))
        })
        .collect())
}

/// Single-source first-order MSE of the augmented estimators on an R-D
/// uniform grid: `(1/ρ̂) · M_r / (M (M_r - 1)²)` per mode.
pub fn single_source_mse(grid: &SamplingGrid, rho: f64) -> Result<Vec<f64>> {
    if !(rho > 0.0) {
        return Err(Error::Numerical(format!("effective SNR must be positive, got {rho}")));
    }
    let m = grid.len() as f64;
    Ok((0..grid.ndims())
        .map(|r| {
            let mr = grid.mode_len(r) as f64;
            mr / (rho * m * (mr - 1.0) * (mr - 1.0))
        })
        .collect())
}

/// High-SNR efficiency of the least-squares single-invariance estimators on a
/// 1-D uniform array: `η = 6(M-1) / (M(M+1))`.
pub fn asymptotic_efficiency_1d(m: usize) -> Result<f64> {
    if m < 2 {
        return Err(Error::InvalidGrid(format!("need at least 2 sensors, got {m}")));
    }
    let mf = m as f64;
    Ok(6.0 * (mf - 1.0) / (mf * (mf + 1.0)))
}

/// Deterministic bound for circular (unstructured) sources:
/// `(σ²/2N)·{Re[(Dᴴ P_A^⊥ D) ⊙ tile(R̂_Sᵀ)]}⁻¹` with `R̂_S = S Sᴴ / N`.
pub fn det_crb_circular(
    a: &CMatrix,
    d_mat: &CMatrix,
    r_s: &CMatrix,
    sigma2: f64,
    n: usize,
) -> Result<RMatrix> {
    let d = a.ncols();
    if r_s.nrows() != d || r_s.ncols() != d || d_mat.ncols() % d != 0 {
        return Err(Error::DimensionMismatch(
            "steering/derivative/symbol-covariance sizes disagree".into(),
        ));
    }
    if n == 0 {
        return Err(Error::Numerical("need N >= 1".into()));
    }
    let (pinv_a, _) = pinv_with_cond(a)?;
    let proj = CMatrix::identity(a.nrows(), a.nrows()) - a * pinv_a;
    let core = d_mat.adjoint() * proj * d_mat;
    let rst = r_s.transpose();
    let fisher = RMatrix::from_fn(core.nrows(), core.ncols(), |i, j| {
        (core[(i, j)] * rst[(i % d, j % d)]).re
    });
    let mut c = sym_inv(&fisher, "circular information matrix")?;
    c *= sigma2 / (2.0 * n as f64);
    Ok(0.5 * (&c + c.transpose()))
}
