//! Array geometry and steering-structure construction: multidimensional
//! sampling grids, steering vectors/matrices, the augmented (conjugate-stacked)
//! steering structure for strictly non-circular sources, subarray selection
//! matrices, and the sparse unitary transforms that map centro-Hermitian
//! matrices to real ones.
//!
//! Conventions used throughout the crate:
//! - Mode indices are 0-based.
//! - Rows of a measurement or steering matrix follow the lexicographic
//!   stacking of the grid with mode 0 as the slowest-varying index, matching
//!   the `I ⊗ J ⊗ I` structure of the effective selection matrices.
//! - Spatial frequencies are radians per unit sample offset, in `(-π, π]`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{flip_cols, flip_rows, unit_phasor, C64, CMatrix, CVector, RMatrix};

/// Absolute tolerance when pairing grid positions `(p, p + shift)`.
pub const PAIRING_TOL: f64 = 1e-9;
/// Relative centro-Hermitian tolerance for [`real_transform`].
pub const CENTRO_HERMITIAN_TOL: f64 = 1e-9;

/// Shift-invariant R-dimensional sampling grid given as the outer product of
/// one real sample-offset list per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingGrid {
    modes: Vec<Vec<f64>>,
}

impl SamplingGrid {
    /// Builds a grid from per-mode sample offsets. Every mode needs at least
    /// two strictly increasing positions.
    pub fn new(modes: Vec<Vec<f64>>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidGrid("no modes given".into()));
        }
        for (r, pos) in modes.iter().enumerate() {
            if pos.len() < 2 {
                return Err(Error::InvalidGrid(format!(
                    "mode {r} has {} positions, need at least 2",
                    pos.len()
                )));
            }
            if pos.windows(2).any(|w| !(w[1] > w[0])) || pos.iter().any(|p| !p.is_finite()) {
                return Err(Error::InvalidGrid(format!(
                    "mode {r} positions must be finite and strictly increasing"
                )));
            }
        }
        Ok(SamplingGrid { modes })
    }

    /// Uniform grid with `k = 0, 1, …, M_r - 1` in each mode.
    pub fn uniform(sizes: &[usize]) -> Result<Self> {
        SamplingGrid::new(
            sizes
                .iter()
                .map(|&m| (0..m).map(|k| k as f64).collect())
                .collect(),
        )
    }

    /// Number of modes `R`.
    pub fn ndims(&self) -> usize {
        self.modes.len()
    }

    /// Sensors in mode `r` (`M_r`).
    pub fn mode_len(&self, r: usize) -> usize {
        self.modes[r].len()
    }

    /// Total number of grid points `M = Π_r M_r`.
    pub fn len(&self) -> usize {
        self.modes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn mode_positions(&self, r: usize) -> &[f64] {
        &self.modes[r]
    }

    /// Grid translated so each mode has zero-sum positions (phase center at
    /// the array centroid). Estimation is invariant to this; closed-form
    /// bound reductions are stated for centered grids.
    pub fn centered(&self) -> SamplingGrid {
        SamplingGrid {
            modes: self
                .modes
                .iter()
                .map(|pos| {
                    let mean = pos.iter().sum::<f64>() / pos.len() as f64;
                    pos.iter().map(|p| p - mean).collect()
                })
                .collect(),
        }
    }

    /// True when every mode is symmetric about its centroid.
    pub fn is_centro_symmetric(&self) -> bool {
        self.modes.iter().all(|pos| {
            let m = pos.len();
            let span = (pos[m - 1] - pos[0]).abs().max(1.0);
            let sum = pos[0] + pos[m - 1];
            (0..m / 2 + 1).all(|i| (pos[i] + pos[m - 1 - i] - sum).abs() <= PAIRING_TOL * span)
        })
    }

    fn check_mode(&self, r: usize) -> Result<()> {
        if r >= self.ndims() {
            Err(Error::InvalidMode { index: r, dims: self.ndims() })
        } else {
            Ok(())
        }
    }
}

/// Source tuple: spatial frequencies per mode and the non-circularity
/// rotation phase of each source.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceParams {
    /// `R × d` matrix; entry `(r, i)` is the frequency of source `i` in mode `r`.
    mu: RMatrix,
    /// Rotation phases `φ_i`, radians.
    phi: Vec<f64>,
}

impl SourceParams {
    pub fn new(mu: RMatrix, phi: Vec<f64>) -> Result<Self> {
        let d = mu.ncols();
        if d == 0 {
            return Err(Error::InvalidSources("no sources".into()));
        }
        if phi.len() != d {
            return Err(Error::InvalidSources(format!(
                "{} phases for {} sources",
                phi.len(),
                d
            )));
        }
        if mu
            .iter()
            .any(|&x| !x.is_finite() || x <= -std::f64::consts::PI || x > std::f64::consts::PI)
        {
            return Err(Error::InvalidSources(
                "spatial frequencies must lie in (-pi, pi]".into(),
            ));
        }
        for i in 0..d {
            for j in i + 1..d {
                let sep = (mu.column(i) - mu.column(j)).amax();
                if sep < 1e-12 {
                    return Err(Error::InvalidSources(format!(
                        "sources {i} and {j} have identical frequency tuples"
                    )));
                }
            }
        }
        Ok(SourceParams { mu, phi })
    }

    /// Number of sources `d`.
    pub fn count(&self) -> usize {
        self.mu.ncols()
    }

    pub fn ndims(&self) -> usize {
        self.mu.nrows()
    }

    pub fn mu(&self) -> &RMatrix {
        &self.mu
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }
}

/// Sparse 0/1 row-selection matrix stored as the selected row index per
/// output row; `self.gather(m)` realizes `J · m` as a row gather.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionMatrix {
    rows: Vec<usize>,
    ncols: usize,
}

impl SelectionMatrix {
    pub fn new(rows: Vec<usize>, ncols: usize) -> Self {
        assert!(rows.iter().all(|&r| r < ncols));
        SelectionMatrix { rows, ncols }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn selected(&self) -> &[usize] {
        &self.rows
    }

    /// `J · m` as a row gather.
    pub fn gather<T: nalgebra::Scalar + Copy>(&self, m: &DMatrix<T>) -> DMatrix<T> {
        assert_eq!(m.nrows(), self.ncols);
        DMatrix::from_fn(self.rows.len(), m.ncols(), |i, j| m[(self.rows[i], j)])
    }

    /// `Jᵀ · v` as a scatter-add of a length-`nrows` vector into length `ncols`.
    pub fn scatter(&self, v: &CVector) -> CVector {
        assert_eq!(v.len(), self.rows.len());
        let mut out = CVector::zeros(self.ncols);
        for (i, &g) in self.rows.iter().enumerate() {
            out[g] += v[i];
        }
        out
    }

    pub fn to_dense(&self) -> RMatrix {
        let mut m = RMatrix::zeros(self.rows.len(), self.ncols);
        for (i, &g) in self.rows.iter().enumerate() {
            m[(i, g)] = 1.0;
        }
        m
    }

    /// `Π_p · J · Π_n`: the selection seen from the flipped array.
    pub fn flipped(&self) -> SelectionMatrix {
        let p = self.rows.len();
        SelectionMatrix {
            rows: (0..p)
                .map(|i| self.ncols - 1 - self.rows[p - 1 - i])
                .collect(),
            ncols: self.ncols,
        }
    }
}

/// Steering vector of mode `r`: element `m` equals `exp(j·k_m·μ)`.
pub fn mode_steering(grid: &SamplingGrid, r: usize, mu: f64) -> Result<CVector> {
    grid.check_mode(r)?;
    Ok(CVector::from_iterator(
        grid.mode_len(r),
        grid.mode_positions(r).iter().map(|&k| unit_phasor(k * mu)),
    ))
}

/// `M × d` steering matrix; column `i` is the R-fold Kronecker product of the
/// per-mode steering vectors of source `i`.
pub fn steering_matrix(grid: &SamplingGrid, src: &SourceParams) -> Result<CMatrix> {
    if grid.ndims() != src.ndims() {
        return Err(Error::DimensionMismatch(format!(
            "grid has {} modes, sources have {}",
            grid.ndims(),
            src.ndims()
        )));
    }
    let m = grid.len();
    let d = src.count();
    let mut a = CMatrix::zeros(m, d);
    for i in 0..d {
        let mut col = CMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        for r in 0..grid.ndims() {
            let ar = mode_steering(grid, r, src.mu()[(r, i)])?;
            col = col.kronecker(&CMatrix::from_column_slice(ar.len(), 1, ar.as_slice()));
        }
        a.set_column(i, &col.column(0));
    }
    Ok(a)
}

/// Augmented steering matrix `[A; Π_M A* Ψ*Ψ*]` with `Ψ = diag(e^{jφ_i})`.
/// The stacking virtually doubles the aperture for strictly non-circular
/// sources and is always centro-symmetric regardless of the physical grid.
pub fn augmented_steering(a: &CMatrix, phi: &[f64]) -> CMatrix {
    assert_eq!(a.ncols(), phi.len());
    let m = a.nrows();
    let d = a.ncols();
    let mut bottom = flip_rows(&a.conjugate());
    for i in 0..d {
        let twist = unit_phasor(-2.0 * phi[i]);
        bottom.column_mut(i).apply(|x| *x *= twist);
    }
    let mut out = CMatrix::zeros(2 * m, d);
    out.view_mut((0, 0), (m, d)).copy_from(a);
    out.view_mut((m, 0), (m, d)).copy_from(&bottom);
    out
}

/// Maximum-overlap subarray pair for mode `r`: `J1` selects every position
/// `p` with `p + shift` also on the mode grid (ascending), `J2` the shifted
/// partners. For a unit-spaced ULA and `shift = 1` this is the classic
/// `M_r - 1` overlap.
pub fn max_overlap_selection(
    grid: &SamplingGrid,
    r: usize,
    shift: f64,
) -> Result<(SelectionMatrix, SelectionMatrix)> {
    grid.check_mode(r)?;
    let pos = grid.mode_positions(r);
    let mut first = Vec::new();
    let mut second = Vec::new();
    for (i, &p) in pos.iter().enumerate() {
        let target = p + shift;
        // positions are strictly increasing; tolerance window lookup
        if let Some(k) = pos
            .iter()
            .position(|&q| (q - target).abs() <= PAIRING_TOL)
        {
            first.push(i);
            second.push(k);
        }
    }
    if first.is_empty() {
        return Err(Error::NotShiftInvariant { mode: r, shift });
    }
    let m_r = pos.len();
    Ok((
        SelectionMatrix::new(first, m_r),
        SelectionMatrix::new(second, m_r),
    ))
}

/// Effective R-dimensional selection `I ⊗ J ⊗ I` with identity factors of
/// sizes `Π_{l<r} M_l` and `Π_{l>r} M_l`.
pub fn effective_selection(
    jk: &SelectionMatrix,
    grid: &SamplingGrid,
    r: usize,
) -> Result<SelectionMatrix> {
    grid.check_mode(r)?;
    if jk.ncols() != grid.mode_len(r) {
        return Err(Error::DimensionMismatch(format!(
            "selection has {} columns, mode {} has {} positions",
            jk.ncols(),
            r,
            grid.mode_len(r)
        )));
    }
    let left: usize = (0..r).map(|l| grid.mode_len(l)).product();
    let right: usize = (r + 1..grid.ndims()).map(|l| grid.mode_len(l)).product();
    let m_r = grid.mode_len(r);
    let msel = jk.nrows();
    let mut rows = Vec::with_capacity(left * msel * right);
    for a in 0..left {
        for s in 0..msel {
            for b in 0..right {
                rows.push((a * m_r + jk.selected()[s]) * right + b);
            }
        }
    }
    Ok(SelectionMatrix::new(rows, grid.len()))
}

/// Selection pair for the conjugate-augmented model:
/// `J1' = blkdiag{J1, Π J2 Π}`, `J2' = blkdiag{J2, Π J1 Π}`.
///
/// Applies at the mode level (inputs over `M_r` columns) and, identically, at
/// the effective level (inputs over `M` columns) — the latter matches the
/// row stacking of `[X; Π_M X*]`.
pub fn nc_selection(
    j1: &SelectionMatrix,
    j2: &SelectionMatrix,
) -> (SelectionMatrix, SelectionMatrix) {
    assert_eq!(j1.ncols(), j2.ncols());
    assert_eq!(j1.nrows(), j2.nrows());
    let n = j1.ncols();
    let blk = |top: &SelectionMatrix, bottom: &SelectionMatrix| {
        let flipped = bottom.flipped();
        let mut rows = Vec::with_capacity(2 * top.nrows());
        rows.extend_from_slice(top.selected());
        rows.extend(flipped.selected().iter().map(|&g| n + g));
        SelectionMatrix::new(rows, 2 * n)
    };
    (blk(j1, j2), blk(j2, j1))
}

/// Sparse unitary left Π-real matrix `Q_n` (`Π_n Q_n* = Q_n`). Odd orders use
/// the center-row/center-column form; even orders drop that row and column.
pub fn pi_real_basis(n: usize) -> CMatrix {
    assert!(n >= 1);
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let h = n / 2;
    let mut q = CMatrix::zeros(n, n);
    for i in 0..h {
        q[(i, i)] = C64::new(inv_sqrt2, 0.0);
        q[(i, h + (n % 2) + i)] = C64::new(0.0, inv_sqrt2);
        q[(n - 1 - i, i)] = C64::new(inv_sqrt2, 0.0);
        q[(n - 1 - i, h + (n % 2) + i)] = C64::new(0.0, -inv_sqrt2);
    }
    if n % 2 == 1 {
        q[(h, h)] = C64::new(1.0, 0.0);
    }
    q
}

/// Bijective map from a centro-Hermitian matrix to a real one:
/// `φ(Z) = Q_p^H Z Q_q`. Rejects inputs whose centro-Hermitian residual
/// exceeds [`CENTRO_HERMITIAN_TOL`] (relative); the remaining imaginary part
/// is truncated.
pub fn real_transform(z: &CMatrix) -> Result<RMatrix> {
    let scale = z.norm();
    let residual = (flip_rows(&flip_cols(z).conjugate()) - z).norm();
    if residual > CENTRO_HERMITIAN_TOL * scale.max(1.0) {
        return Err(Error::NotCentroHermitian {
            residual: residual / scale.max(f64::MIN_POSITIVE),
        });
    }
    let w = pi_real_basis(z.nrows()).adjoint() * z * pi_real_basis(z.ncols());
    Ok(w.map(|x| x.re))
}

/// `[Re X; Im X]`: spans the same column space as the real transform of the
/// forward-backward-averaged augmented matrix, at a fraction of the cost.
pub fn fast_real_stack(x: &CMatrix) -> RMatrix {
    let (m, n) = x.shape();
    let mut out = RMatrix::zeros(2 * m, n);
    for j in 0..n {
        for i in 0..m {
            out[(i, j)] = x[(i, j)].re;
            out[(m + i, j)] = x[(i, j)].im;
        }
    }
    out
}

/// Real-valued selection pair `(K1, K2) = (2·Re{Q^H J2' Q}, 2·Im{Q^H J2' Q})`
/// for the transformed shift-invariance equations. Works for both the
/// augmented (`2M`-column) and the physical (`M`-column) selection.
pub fn transformed_selection(j2: &SelectionMatrix) -> (RMatrix, RMatrix) {
    let q_rows = pi_real_basis(j2.nrows());
    let q_cols = pi_real_basis(j2.ncols());
    let g = q_rows.adjoint() * j2.gather(&q_cols);
    (g.map(|x| 2.0 * x.re), g.map(|x| 2.0 * x.im))
}

/// Per-mode bundle of selection matrices used by the estimators.
#[derive(Debug, Clone)]
pub struct ModeSelection {
    /// Mode-level subarray selections over `M_r` columns.
    pub j1: SelectionMatrix,
    pub j2: SelectionMatrix,
    /// Effective selections over `M` columns.
    pub j1_eff: SelectionMatrix,
    pub j2_eff: SelectionMatrix,
    /// Augmented selections over `2M` columns.
    pub j1_nc: SelectionMatrix,
    pub j2_nc: SelectionMatrix,
    /// Real-valued transformed selections of the augmented pair.
    pub k1: RMatrix,
    pub k2: RMatrix,
}

impl ModeSelection {
    /// True when `Π J2 Π = J1`, i.e. the subarray pair is compatible with a
    /// centro-symmetric formulation (needed by the non-augmented unitary
    /// estimator).
    pub fn is_centro_symmetric_pair(&self) -> bool {
        self.j2.flipped() == self.j1
    }
}

/// All per-mode selection machinery for a grid.
#[derive(Debug, Clone)]
pub struct SelectionSet {
    modes: Vec<ModeSelection>,
}

impl SelectionSet {
    /// Maximum-overlap selection with unit shift in every mode.
    pub fn max_overlap(grid: &SamplingGrid) -> Result<Self> {
        Self::with_shifts(grid, &vec![1.0; grid.ndims()])
    }

    /// Maximum-overlap selection with a custom shift per mode.
    pub fn with_shifts(grid: &SamplingGrid, shifts: &[f64]) -> Result<Self> {
        if shifts.len() != grid.ndims() {
            return Err(Error::DimensionMismatch(format!(
                "{} shifts for {} modes",
                shifts.len(),
                grid.ndims()
            )));
        }
        let mut modes = Vec::with_capacity(grid.ndims());
        for r in 0..grid.ndims() {
            let (j1, j2) = max_overlap_selection(grid, r, shifts[r])?;
            let j1_eff = effective_selection(&j1, grid, r)?;
            let j2_eff = effective_selection(&j2, grid, r)?;
            let (j1_nc, j2_nc) = nc_selection(&j1_eff, &j2_eff);
            let (k1, k2) = transformed_selection(&j2_nc);
            modes.push(ModeSelection { j1, j2, j1_eff, j2_eff, j1_nc, j2_nc, k1, k2 });
        }
        Ok(SelectionSet { modes })
    }

    pub fn ndims(&self) -> usize {
        self.modes.len()
    }

    pub fn mode(&self, r: usize) -> &ModeSelection {
        &self.modes[r]
    }

    pub fn modes(&self) -> &[ModeSelection] {
        &self.modes
    }

    /// Subarray size `M_r^{(sel)}` of mode `r`.
    pub fn overlap(&self, r: usize) -> usize {
        self.modes[r].j1.nrows()
    }
}

/// Diagonal phase factor `Φ^(r) = diag(e^{jμ_i})` of mode `r`, for tests and
/// the analytic machinery.
pub fn mode_phase_factor(src: &SourceParams, r: usize) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(
        src.count(),
        (0..src.count()).map(|i| unit_phasor(src.mu()[(r, i)])),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::to_complex;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn fig3_grid() -> SamplingGrid {
        SamplingGrid::new(vec![vec![0.0, 1.0, 2.0, 4.0, 5.0], vec![0.0, 1.0, 3.0, 4.0]]).unwrap()
    }

    #[test]
    fn mode_steering_examples() {
        let ula3 = SamplingGrid::uniform(&[3]).unwrap();
        let v = mode_steering(&ula3, 0, 0.0).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!((v[i] - c(1.0, 0.0)).norm(), 0.0);
        }

        let ula4 = SamplingGrid::uniform(&[4]).unwrap();
        let v = mode_steering(&ula4, 0, FRAC_PI_2).unwrap();
        let want = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)];
        for i in 0..4 {
            assert_abs_diff_eq!((v[i] - want[i]).norm(), 0.0, epsilon = 1e-15);
        }

        let g = SamplingGrid::new(vec![vec![0.0, 1.0, 3.0, 4.0]]).unwrap();
        let v = mode_steering(&g, 0, 0.5).unwrap();
        for (i, &k) in [0.0, 1.0, 3.0, 4.0].iter().enumerate() {
            assert_abs_diff_eq!((v[i] - unit_phasor(0.5 * k)).norm(), 0.0);
        }
        // unit magnitude entries
        for x in v.iter() {
            assert_abs_diff_eq!(x.norm(), 1.0, epsilon = 1e-15);
        }

        assert!(matches!(
            mode_steering(&ula3, 1, 0.0),
            Err(Error::InvalidMode { .. })
        ));
    }

    #[test]
    fn steering_matrix_examples() {
        // R = 1 reduces to mode steering columns.
        let g = SamplingGrid::uniform(&[5]).unwrap();
        let src = SourceParams::new(RMatrix::from_row_slice(1, 2, &[0.3, -1.1]), vec![0.0, 0.0])
            .unwrap();
        let a = steering_matrix(&g, &src).unwrap();
        for (i, &mu) in [0.3, -1.1].iter().enumerate() {
            let v = mode_steering(&g, 0, mu).unwrap();
            assert_abs_diff_eq!((a.column(i) - v).norm(), 0.0);
        }

        // R = 2, 2x2 grid, zero frequencies: all-ones column.
        let g = SamplingGrid::uniform(&[2, 2]).unwrap();
        let src =
            SourceParams::new(RMatrix::from_row_slice(2, 1, &[0.0, 0.0]), vec![0.0]).unwrap();
        let a = steering_matrix(&g, &src).unwrap();
        assert_eq!(a.shape(), (4, 1));
        for x in a.iter() {
            assert_abs_diff_eq!((x - c(1.0, 0.0)).norm(), 0.0);
        }

        // R = 3 cubic grid: norm identity a^H a = M.
        let g = SamplingGrid::uniform(&[4, 4, 4]).unwrap();
        let src = SourceParams::new(
            RMatrix::from_row_slice(3, 2, &[0.0, 0.1, 0.0, 0.1, 0.0, 0.1]),
            vec![0.0, FRAC_PI_2],
        )
        .unwrap();
        let a = steering_matrix(&g, &src).unwrap();
        assert_eq!(a.shape(), (64, 2));
        for i in 0..2 {
            let g2 = a.column(i).adjoint() * a.column(i);
            assert_abs_diff_eq!(g2[(0, 0)].re, 64.0, epsilon = 1e-12);
        }

        // dimension mismatch
        let bad = SourceParams::new(RMatrix::from_row_slice(1, 1, &[0.1]), vec![0.0]).unwrap();
        assert!(steering_matrix(&g, &bad).is_err());
    }

    #[test]
    fn augmented_steering_examples() {
        // phi = 0, real A: bottom block is the flipped A.
        let a = to_complex(&RMatrix::from_row_slice(2, 1, &[1.0, -2.0]));
        let anc = augmented_steering(&a, &[0.0]);
        assert_abs_diff_eq!((anc.view((2, 0), (2, 1)) - flip_rows(&a)).norm(), 0.0);

        // d = 1, M = 2 expansion.
        let mu = 0.7;
        let phi = 0.4;
        let a = CMatrix::from_column_slice(2, 1, &[c(1.0, 0.0), unit_phasor(mu)]);
        let anc = augmented_steering(&a, &[phi]);
        let twist = unit_phasor(-2.0 * phi);
        assert_abs_diff_eq!((anc[(2, 0)] - twist * unit_phasor(-mu)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((anc[(3, 0)] - twist).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn augmented_steering_is_centro_symmetric() {
        // Π_{2M} A^{nc*} = A^{nc} ΨΨ on an asymmetric grid.
        let grid = fig3_grid();
        let src = SourceParams::new(
            RMatrix::from_row_slice(2, 3, &[0.25, 0.5, 0.75, 0.25, 0.5, 0.75]),
            vec![0.0, 0.9, 2.0],
        )
        .unwrap();
        let a = steering_matrix(&grid, &src).unwrap();
        let anc = augmented_steering(&a, src.phi());
        let lhs = flip_rows(&anc.conjugate());
        let mut rhs = anc.clone();
        for i in 0..3 {
            let tw = unit_phasor(2.0 * src.phi()[i]);
            rhs.column_mut(i).apply(|x| *x *= tw);
        }
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn max_overlap_examples() {
        let ula3 = SamplingGrid::uniform(&[3]).unwrap();
        let (j1, j2) = max_overlap_selection(&ula3, 0, 1.0).unwrap();
        assert_eq!(j1.selected(), &[0, 1]);
        assert_eq!(j2.selected(), &[1, 2]);
        assert_eq!(
            j1.to_dense(),
            RMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0])
        );
        assert_eq!(
            j2.to_dense(),
            RMatrix::from_row_slice(2, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0])
        );

        // Derived by enumerating all (p, p+1) pairs in the grid.
        let g = SamplingGrid::new(vec![vec![0.0, 1.0, 2.0, 4.0, 5.0]]).unwrap();
        let (j1, j2) = max_overlap_selection(&g, 0, 1.0).unwrap();
        assert_eq!(j1.selected(), &[0, 1, 3]); // positions {0, 1, 4}
        assert_eq!(j2.selected(), &[1, 2, 4]); // positions {1, 2, 5}

        let g = SamplingGrid::new(vec![vec![0.0, 1.0, 3.0, 4.0]]).unwrap();
        let (j1, j2) = max_overlap_selection(&g, 0, 1.0).unwrap();
        assert_eq!(j1.selected(), &[0, 2]); // positions {0, 3}
        assert_eq!(j2.selected(), &[1, 3]); // positions {1, 4}

        // no valid pair
        let g = SamplingGrid::new(vec![vec![0.0, 0.4, 1.1]]).unwrap();
        assert!(matches!(
            max_overlap_selection(&g, 0, 1.0),
            Err(Error::NotShiftInvariant { .. })
        ));
    }

    #[test]
    fn effective_selection_examples() {
        // R = 1: passthrough.
        let g = SamplingGrid::uniform(&[4]).unwrap();
        let (j1, _) = max_overlap_selection(&g, 0, 1.0).unwrap();
        let je = effective_selection(&j1, &g, 0).unwrap();
        assert_eq!(je, j1);

        // R = 2, r = 0, sizes (2, 3): J ⊗ I_3.
        let g = SamplingGrid::uniform(&[2, 3]).unwrap();
        let (j1, _) = max_overlap_selection(&g, 0, 1.0).unwrap();
        let je = effective_selection(&j1, &g, 0).unwrap();
        let dense = je.to_dense();
        let want = j1.to_dense().kronecker(&RMatrix::identity(3, 3));
        assert_eq!(dense, want);

        // R = 3 cube, middle mode: shape 48 x 64.
        let g = SamplingGrid::uniform(&[4, 4, 4]).unwrap();
        let (j1, _) = max_overlap_selection(&g, 1, 1.0).unwrap();
        let je = effective_selection(&j1, &g, 1).unwrap();
        assert_eq!((je.nrows(), je.ncols()), (48, 64));
    }

    #[test]
    fn nc_selection_examples() {
        // ULA max overlap: Π J2 Π = J1, so the blocks reduce to I_2 ⊗ Jk.
        let g = SamplingGrid::uniform(&[3]).unwrap();
        let (j1, j2) = max_overlap_selection(&g, 0, 1.0).unwrap();
        let (n1, n2) = nc_selection(&j1, &j2);
        let i2 = RMatrix::identity(2, 2);
        assert_eq!(n1.to_dense(), i2.kronecker(&j1.to_dense()));
        assert_eq!(n2.to_dense(), i2.kronecker(&j2.to_dense()));
        assert_eq!((n1.nrows(), n1.ncols()), (4, 6));

        // Asymmetric grid: blocks differ.
        let g = SamplingGrid::new(vec![vec![0.0, 1.0, 2.0, 4.0, 5.0]]).unwrap();
        let (j1, j2) = max_overlap_selection(&g, 0, 1.0).unwrap();
        let (n1, _) = nc_selection(&j1, &j2);
        let i2 = RMatrix::identity(2, 2);
        assert_ne!(n1.to_dense(), i2.kronecker(&j1.to_dense()));
    }

    /// Shift invariance of the physical and augmented steering structures on
    /// an arbitrary grid (Theorem-style identities, checked numerically).
    #[test]
    fn shift_invariance_on_fig3_grid() {
        let grid = fig3_grid();
        let src = SourceParams::new(
            RMatrix::from_row_slice(2, 3, &[0.41, -1.3, 2.2, 0.77, 0.13, -2.4]),
            vec![0.3, 1.1, -0.8],
        )
        .unwrap();
        let a = steering_matrix(&grid, &src).unwrap();
        let anc = augmented_steering(&a, src.phi());
        let sel = SelectionSet::max_overlap(&grid).unwrap();
        for r in 0..2 {
            let phase = mode_phase_factor(&src, r);
            let m = sel.mode(r);
            let lhs = m.j1_eff.gather(&a) * &phase;
            let rhs = m.j2_eff.gather(&a);
            assert!((lhs - rhs).norm() < 1e-10, "physical invariance, mode {r}");

            let lhs = m.j1_nc.gather(&anc) * &phase;
            let rhs = m.j2_nc.gather(&anc);
            assert!((lhs - rhs).norm() < 1e-12, "augmented invariance, mode {r}");
        }
    }

    #[test]
    fn pi_real_basis_examples() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let q2 = pi_real_basis(2);
        let want = CMatrix::from_row_slice(
            2,
            2,
            &[c(s, 0.0), c(0.0, s), c(s, 0.0), c(0.0, -s)],
        );
        assert_abs_diff_eq!((q2 - want).norm(), 0.0);

        let q3 = pi_real_basis(3);
        let want = CMatrix::from_row_slice(
            3,
            3,
            &[
                c(s, 0.0),
                c(0.0, 0.0),
                c(0.0, s),
                c(0.0, 0.0),
                c(1.0, 0.0),
                c(0.0, 0.0),
                c(s, 0.0),
                c(0.0, 0.0),
                c(0.0, -s),
            ],
        );
        assert_abs_diff_eq!((q3 - want).norm(), 0.0);

        for n in 1..10 {
            let q = pi_real_basis(n);
            let unitary = (q.adjoint() * &q - CMatrix::identity(n, n)).norm();
            assert!(unitary < 1e-14, "Q_{n} unitarity residual {unitary:.3e}");
            let pi_real = (flip_rows(&q.conjugate()) - &q).norm();
            assert!(pi_real < 1e-14, "Q_{n} left-pi-real residual {pi_real:.3e}");
        }
    }

    #[test]
    fn real_transform_examples() {
        // identity stays itself
        let z = CMatrix::identity(2, 2);
        let w = real_transform(&z).unwrap();
        assert_abs_diff_eq!((w - RMatrix::identity(2, 2)).norm(), 0.0, epsilon = 1e-14);

        // scalar expansion: X = [1 + 2j]
        let x = CMatrix::from_element(1, 1, c(1.0, 2.0));
        let xnc = crate::signal_synth::augment(&x);
        let z = crate::signal_synth::fba_augment(&xnc);
        let w = real_transform(&z).unwrap();
        let want = RMatrix::from_row_slice(2, 2, &[2.0, 0.0, 4.0, 0.0]);
        assert_abs_diff_eq!((w - want).norm(), 0.0, epsilon = 1e-14);

        // non-centro-Hermitian input is rejected
        let bad = CMatrix::from_row_slice(2, 2, &[c(1.0, 1.0), c(0.0, 0.0), c(0.0, 0.0), c(5.0, 0.0)]);
        assert!(matches!(
            real_transform(&bad),
            Err(Error::NotCentroHermitian { .. })
        ));
    }

    #[test]
    fn fast_real_stack_examples() {
        let x = CMatrix::zeros(3, 2);
        assert_eq!(fast_real_stack(&x), RMatrix::zeros(6, 2));

        let x = to_complex(&RMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let s = fast_real_stack(&x);
        assert_eq!(s.view((2, 0), (2, 2)).clone_owned(), RMatrix::zeros(2, 2));
    }

    #[test]
    fn transformed_selection_1d_ula_m2() {
        // Frozen from evaluating 2·Re/Im{Q_2^H J2' Q_4} by hand.
        let g = SamplingGrid::uniform(&[2]).unwrap();
        let sel = SelectionSet::max_overlap(&g).unwrap();
        let m = sel.mode(0);
        let k1_want = RMatrix::from_row_slice(2, 4, &[1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
        let k2_want = RMatrix::from_row_slice(2, 4, &[0.0, 0.0, -1.0, 1.0, 1.0, -1.0, 0.0, 0.0]);
        assert_abs_diff_eq!((&m.k1 - k1_want).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((&m.k2 - k2_want).norm(), 0.0, epsilon = 1e-14);

        // Independent oracle: dense evaluation of the defining formula.
        let q2 = pi_real_basis(2);
        let q4 = pi_real_basis(4);
        let dense = q2.adjoint() * to_complex(&m.j2_nc.to_dense()) * q4;
        assert_abs_diff_eq!((&m.k1 - dense.map(|x| 2.0 * x.re)).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((&m.k2 - dense.map(|x| 2.0 * x.im)).norm(), 0.0, epsilon = 1e-14);
    }

    /// `K1 = Q^H (J1' + J2') Q` and `K2 = j Q^H (J1' - J2') Q`, which relies on
    /// the augmented pair satisfying `Π J2' Π = J1'`.
    #[test]
    fn transformed_selection_sum_difference_identities() {
        for grid in [
            SamplingGrid::uniform(&[4]).unwrap(),
            SamplingGrid::uniform(&[3, 4]).unwrap(),
            fig3_grid(),
        ] {
            let sel = SelectionSet::max_overlap(&grid).unwrap();
            for r in 0..grid.ndims() {
                let m = sel.mode(r);
                let rows = m.j1_nc.nrows();
                let qp = pi_real_basis(rows);
                let q2m = pi_real_basis(2 * grid.len());
                let j1 = to_complex(&m.j1_nc.to_dense());
                let j2 = to_complex(&m.j2_nc.to_dense());
                let sum = qp.adjoint() * (&j1 + &j2) * &q2m;
                let diff = (qp.adjoint() * (&j1 - &j2) * &q2m).map(|x| x * c(0.0, 1.0));
                assert!((to_complex(&m.k1) - sum).norm() < 1e-12);
                assert!((to_complex(&m.k2) - diff).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn grid_centro_symmetry_detection() {
        assert!(SamplingGrid::uniform(&[4, 5]).unwrap().is_centro_symmetric());
        assert!(SamplingGrid::new(vec![vec![0.0, 1.0, 3.0, 4.0]])
            .unwrap()
            .is_centro_symmetric());
        assert!(!fig3_grid().is_centro_symmetric());
    }

    #[test]
    fn source_params_validation() {
        // frequencies outside (-pi, pi]
        assert!(SourceParams::new(RMatrix::from_row_slice(1, 1, &[PI + 0.1]), vec![0.0]).is_err());
        assert!(SourceParams::new(RMatrix::from_row_slice(1, 1, &[-PI]), vec![0.0]).is_err());
        // duplicate tuples
        assert!(SourceParams::new(
            RMatrix::from_row_slice(2, 2, &[0.1, 0.1, 0.2, 0.2]),
            vec![0.0, 1.0]
        )
        .is_err());
    }
}
