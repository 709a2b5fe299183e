//! Synthetic data generation: strictly non-circular source symbols, sensor
//! noise with prescribed second-order statistics, and the measurement-matrix
//! augmentations used by the estimators.

use nalgebra::SymmetricEigen;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{flip_cols, flip_rows, unit_phasor, C64, CMatrix, RMatrix, RVector};

/// Relative eigenvalue floor when repairing an almost-PSD matrix; anything
/// more negative is rejected.
const PSD_CLIP: f64 = 1e-12;

/// Sensor-noise model for one `M × N` measurement.
#[derive(Debug, Clone)]
pub enum NoiseModel {
    /// i.i.d. circularly symmetric complex Gaussian entries of variance `σ_n²`.
    CircularWhite { sigma2: f64 },
    /// Zero-mean noise with prescribed covariance `R_nn = E{n nᴴ}` and
    /// pseudo-covariance `C_nn = E{n nᵀ}` of `n = vec(N)`.
    General {
        rnn: CMatrix,
        cnn: CMatrix,
        /// Square root of the real-composite covariance, built once at
        /// construction.
        factor: RMatrix,
    },
}

impl NoiseModel {
    pub fn circular_white(sigma2: f64) -> Result<Self> {
        if !(sigma2 >= 0.0) {
            return Err(Error::NotPsd(format!("negative noise power {sigma2}")));
        }
        Ok(NoiseModel::CircularWhite { sigma2 })
    }

    /// Validates `(R_nn, C_nn)` as an augmented covariance and precomputes a
    /// sampling factor for the real composite `[Re n; Im n]`.
    pub fn general(rnn: CMatrix, cnn: CMatrix) -> Result<Self> {
        let l = rnn.nrows();
        if rnn.ncols() != l || cnn.nrows() != l || cnn.ncols() != l {
            return Err(Error::DimensionMismatch(
                "noise covariance matrices must be square and equally sized".into(),
            ));
        }
        let herm = (&rnn - rnn.adjoint()).norm();
        if herm > 1e-9 * rnn.norm().max(1.0) {
            return Err(Error::NotPsd("R_nn is not Hermitian".into()));
        }
        let sym = (&cnn - cnn.transpose()).norm();
        if sym > 1e-9 * cnn.norm().max(1.0) {
            return Err(Error::NotPsd("C_nn is not symmetric".into()));
        }
        // E{xxᵀ} = Re(R + C)/2, E{yyᵀ} = Re(R - C)/2, E{yxᵀ} = Im(R + C)/2,
        // E{xyᵀ} = Im(C - R)/2 for n = x + jy.
        let mut sigma = RMatrix::zeros(2 * l, 2 * l);
        for i in 0..l {
            for j in 0..l {
                let r = rnn[(i, j)];
                let c = cnn[(i, j)];
                sigma[(i, j)] = 0.5 * (r.re + c.re);
                sigma[(l + i, l + j)] = 0.5 * (r.re - c.re);
                sigma[(l + i, j)] = 0.5 * (r.im + c.im);
                sigma[(i, l + j)] = 0.5 * (c.im - r.im);
            }
        }
        let factor = psd_sqrt(&sigma, "augmented noise covariance")?;
        Ok(NoiseModel::General { rnn, cnn, factor })
    }
}

/// Symmetric square root with eigenvalue clipping at `-PSD_CLIP` relative.
fn psd_sqrt(sigma: &RMatrix, what: &str) -> Result<RMatrix> {
    let n = sigma.nrows();
    let sym = 0.5 * (sigma + sigma.transpose());
    let eig = SymmetricEigen::new(sym);
    let lmax = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    if eig.eigenvalues.iter().any(|&l| l < -PSD_CLIP * lmax) {
        return Err(Error::NotPsd(format!(
            "{what}: eigenvalue {:.3e} below tolerance",
            eig.eigenvalues.min()
        )));
    }
    let mut factor = eig.eigenvectors;
    for j in 0..n {
        let s = eig.eigenvalues[j].max(0.0).sqrt();
        factor.column_mut(j).apply(|x| *x *= s);
    }
    Ok(factor)
}

/// Strictly non-circular symbol model: `S = Ψ S₀` with real `S₀ = L G`,
/// `L` the factor of `diag(√powers) · correlation · diag(√powers)` and `G`
/// i.i.d. standard normal.
#[derive(Debug, Clone)]
pub struct SymbolModel {
    correlation: RMatrix,
    powers: RVector,
    phases: Vec<f64>,
    factor: RMatrix,
}

impl SymbolModel {
    pub fn new(correlation: RMatrix, powers: &[f64], phases: &[f64]) -> Result<Self> {
        let d = phases.len();
        if correlation.nrows() != d || correlation.ncols() != d || powers.len() != d {
            return Err(Error::DimensionMismatch(
                "correlation/powers/phases sizes disagree".into(),
            ));
        }
        if powers.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::InvalidSources("source powers must be positive".into()));
        }
        for i in 0..d {
            if (correlation[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::NotPsd("correlation diagonal must be 1".into()));
            }
            for j in 0..d {
                if correlation[(i, j)].abs() > 1.0 + 1e-12 {
                    return Err(Error::NotPsd("correlation entries must satisfy |rho| <= 1".into()));
                }
                if (correlation[(i, j)] - correlation[(j, i)]).abs() > 1e-12 {
                    return Err(Error::NotPsd("correlation must be symmetric".into()));
                }
            }
        }
        let mut cov = correlation.clone();
        for i in 0..d {
            for j in 0..d {
                cov[(i, j)] *= (powers[i] * powers[j]).sqrt();
            }
        }
        let factor = psd_sqrt(&cov, "symbol correlation")?;
        Ok(SymbolModel {
            correlation,
            powers: RVector::from_column_slice(powers),
            phases: phases.to_vec(),
            factor,
        })
    }

    /// Pairwise-correlated sources: 1 on the diagonal and `rho` elsewhere,
    /// unit power.
    pub fn pairwise(rho: f64, phases: &[f64]) -> Result<Self> {
        let d = phases.len();
        let corr = RMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { rho });
        SymbolModel::new(corr, &vec![1.0; d], phases)
    }

    /// Uncorrelated unit-power sources.
    pub fn uncorrelated(phases: &[f64]) -> Result<Self> {
        SymbolModel::pairwise(0.0, phases)
    }

    pub fn count(&self) -> usize {
        self.phases.len()
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn correlation(&self) -> &RMatrix {
        &self.correlation
    }

    /// Model symbol covariance `diag(√p) · correlation · diag(√p)`.
    pub fn covariance(&self) -> RMatrix {
        let d = self.count();
        RMatrix::from_fn(d, d, |i, j| {
            self.correlation[(i, j)] * (self.powers[i] * self.powers[j]).sqrt()
        })
    }
}

/// Draws a `d × N` strictly non-circular symbol matrix `S = Ψ S₀`. Row `i`
/// satisfies `Im{e^{-jφ_i} S_{i,:}} = 0` exactly.
pub fn gen_symbols<R: Rng + ?Sized>(model: &SymbolModel, n: usize, rng: &mut R) -> Result<CMatrix> {
    if n == 0 {
        return Err(Error::DimensionMismatch("need at least one snapshot".into()));
    }
    let d = model.count();
    let g = RMatrix::from_fn(d, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let s0 = &model.factor * g;
    let mut s = CMatrix::zeros(d, n);
    for i in 0..d {
        let phase = unit_phasor(model.phases[i]);
        for t in 0..n {
            s[(i, t)] = phase * s0[(i, t)];
        }
    }
    Ok(s)
}

/// Real symbol matrix `S₀ = Re{Ψᴴ S}` recovered from a strictly non-circular
/// `S`; exact up to one rounding of the unit phasor product.
pub fn derotated(s: &CMatrix, phases: &[f64]) -> RMatrix {
    assert_eq!(s.nrows(), phases.len());
    RMatrix::from_fn(s.nrows(), s.ncols(), |i, t| {
        (unit_phasor(phases[i]).conj() * s[(i, t)]).re
    })
}

/// Draws an `M × N` noise matrix from the model. The general branch samples
/// the real composite `[Re n; Im n]` through the precomputed factor.
pub fn gen_noise<R: Rng + ?Sized>(
    model: &NoiseModel,
    m: usize,
    n: usize,
    rng: &mut R,
) -> Result<CMatrix> {
    match model {
        NoiseModel::CircularWhite { sigma2 } => {
            if *sigma2 == 0.0 {
                return Ok(CMatrix::zeros(m, n));
            }
            let s = (sigma2 / 2.0).sqrt();
            Ok(CMatrix::from_fn(m, n, |_, _| {
                C64::new(
                    s * rng.sample::<f64, _>(StandardNormal),
                    s * rng.sample::<f64, _>(StandardNormal),
                )
            }))
        }
        NoiseModel::General { rnn, factor, .. } => {
            let l = m * n;
            if rnn.nrows() != l {
                return Err(Error::DimensionMismatch(format!(
                    "noise covariance is {}x{} but M·N = {}",
                    rnn.nrows(),
                    rnn.ncols(),
                    l
                )));
            }
            let g = RVector::from_fn(2 * l, |_, _| rng.sample::<f64, _>(StandardNormal));
            let z = factor * g;
            // column-major packing matches vec()
            Ok(CMatrix::from_fn(m, n, |i, j| {
                let k = j * m + i;
                C64::new(z[k], z[l + k])
            }))
        }
    }
}

/// `X = A S + N`.
pub fn synthesize(a: &CMatrix, s: &CMatrix, noise: &CMatrix) -> Result<CMatrix> {
    if a.ncols() != s.nrows() || noise.nrows() != a.nrows() || noise.ncols() != s.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{}, S is {}x{}, N is {}x{}",
            a.nrows(),
            a.ncols(),
            s.nrows(),
            s.ncols(),
            noise.nrows(),
            noise.ncols()
        )));
    }
    Ok(a * s + noise)
}

/// Augmented measurement matrix `[X; Π_M X*]`.
pub fn augment(x: &CMatrix) -> CMatrix {
    let (m, n) = x.shape();
    let mut out = CMatrix::zeros(2 * m, n);
    out.view_mut((0, 0), (m, n)).copy_from(x);
    out.view_mut((m, 0), (m, n)).copy_from(&flip_rows(&x.conjugate()));
    out
}

/// Forward-backward column augmentation `[X' , X' Π_N]` of an augmented
/// matrix; the result is centro-Hermitian.
pub fn fba_augment(xnc: &CMatrix) -> CMatrix {
    let (p, n) = xnc.shape();
    let mut out = CMatrix::zeros(p, 2 * n);
    out.view_mut((0, 0), (p, n)).copy_from(xnc);
    out.view_mut((0, n), (p, n)).copy_from(&flip_cols(xnc));
    out
}

/// Effective SNR `ρ̂ = ‖s‖² / σ_n²` of one source with symbol vector `s`.
pub fn effective_snr(s_norm_sq: f64, sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::ZeroNoisePower);
    }
    Ok(s_norm_sq / sigma2)
}

/// Average per-source effective SNR `‖S‖_F² / (d σ_n²)` of a symbol matrix.
pub fn effective_snr_matrix(s: &CMatrix, sigma2: f64) -> Result<f64> {
    effective_snr(s.norm_squared() / s.nrows() as f64, sigma2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array_model::{steering_matrix, augmented_steering, SamplingGrid, SourceParams};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn symbols_zero_phase_uncorrelated_are_real() {
        let model = SymbolModel::uncorrelated(&[0.0, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = gen_symbols(&model, 64, &mut rng).unwrap();
        assert_eq!(s.iter().map(|z| z.im.abs()).fold(0.0, f64::max), 0.0);
    }

    #[test]
    fn symbols_pairwise_correlation_converges() {
        let model = SymbolModel::pairwise(0.9, &[0.0, FRAC_PI_2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let s = gen_symbols(&model, n, &mut rng).unwrap();
        let s0 = derotated(&s, model.phases());
        let r = &s0 * s0.transpose() / n as f64;
        assert!((r[(0, 1)] - 0.9).abs() < 0.05, "sample correlation {}", r[(0, 1)]);
        assert!((r[(0, 0)] - 1.0).abs() < 0.05);
    }

    #[test]
    fn symbols_are_strictly_non_circular() {
        let model = SymbolModel::pairwise(0.5, &[0.3, -1.2, 2.4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = gen_symbols(&model, 17, &mut rng).unwrap();
        let mut residual = 0.0f64;
        for i in 0..3 {
            let back = unit_phasor(model.phases()[i]).conj();
            for t in 0..17 {
                residual = residual.max((back * s[(i, t)]).im.abs());
            }
        }
        assert_eq!(residual, 0.0);
    }

    #[test]
    fn correlation_must_be_psd() {
        // rho = -0.9 pairwise over 3 sources is indefinite.
        assert!(matches!(
            SymbolModel::pairwise(-0.9, &[0.0, 0.1, 0.2]),
            Err(Error::NotPsd(_))
        ));
    }

    #[test]
    fn white_noise_basics() {
        let model = NoiseModel::circular_white(0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z = gen_noise(&model, 3, 5, &mut rng).unwrap();
        assert_eq!(z.norm(), 0.0);

        // sample pseudo-covariance of circular noise decays like 1/sqrt(trials)
        let model = NoiseModel::circular_white(1.0).unwrap();
        let trials = 20_000;
        let mut acc = CMatrix::zeros(2, 2);
        for _ in 0..trials {
            let n = gen_noise(&model, 2, 1, &mut rng).unwrap();
            acc += &n * n.transpose();
        }
        acc /= C64::new(trials as f64, 0.0);
        assert!(crate::linalg::max_abs(&acc) < 5.0 / (trials as f64).sqrt() * 2.0);
    }

    #[test]
    fn fully_noncircular_real_noise_is_real() {
        // C_nn = R_nn = sigma^2 I forces purely real samples.
        let l = 6;
        let sigma2 = 0.7;
        let eye = CMatrix::identity(l, l) * c(sigma2, 0.0);
        let model = NoiseModel::general(eye.clone(), eye).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = gen_noise(&model, 3, 2, &mut rng).unwrap();
        assert_eq!(z.iter().map(|x| x.im.abs()).fold(0.0, f64::max), 0.0);
        assert!(z.norm() > 0.0);
    }

    #[test]
    fn general_noise_sample_statistics_converge() {
        // Structured construction n = F w + G w* gives a valid (R, C) pair.
        let l = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut draw = |rng: &mut ChaCha8Rng| {
            CMatrix::from_fn(l, l, |_, _| {
                C64::new(
                    rng.sample::<f64, _>(StandardNormal),
                    rng.sample::<f64, _>(StandardNormal),
                ) * 0.3
            })
        };
        let f = draw(&mut rng);
        let g = draw(&mut rng);
        let rnn = &f * f.adjoint() + &g * g.adjoint();
        let cnn = &f * g.transpose() + &g * f.transpose();
        let model = NoiseModel::general(rnn.clone(), cnn.clone()).unwrap();

        let trials = 10_000;
        let mut racc = CMatrix::zeros(l, l);
        let mut cacc = CMatrix::zeros(l, l);
        for _ in 0..trials {
            let z = gen_noise(&model, l, 1, &mut rng).unwrap();
            let v = z.column(0);
            racc += v * v.adjoint();
            cacc += v * v.transpose();
        }
        racc /= C64::new(trials as f64, 0.0);
        cacc /= C64::new(trials as f64, 0.0);
        let scale = rnn.diagonal().map(|x| x.re).max();
        let tol = 5.0 / (trials as f64).sqrt() * scale;
        assert!(crate::linalg::max_abs(&(racc - rnn)) < tol, "covariance mismatch");
        assert!(crate::linalg::max_abs(&(cacc - cnn)) < tol, "pseudo-covariance mismatch");
    }

    #[test]
    fn invalid_augmented_covariance_is_rejected() {
        // |C| > R is not a valid pair.
        let l = 3;
        let rnn = CMatrix::identity(l, l);
        let cnn = CMatrix::identity(l, l) * c(2.0, 0.0);
        assert!(matches!(NoiseModel::general(rnn, cnn), Err(Error::NotPsd(_))));
    }

    #[test]
    fn synthesize_and_augment_examples() {
        let grid = SamplingGrid::uniform(&[4, 4, 4]).unwrap();
        let src = SourceParams::new(
            RMatrix::from_row_slice(3, 2, &[0.0, 0.1, 0.0, 0.1, 0.0, 0.1]),
            vec![0.0, FRAC_PI_2],
        )
        .unwrap();
        let a = steering_matrix(&grid, &src).unwrap();
        let model = SymbolModel::pairwise(0.9, src.phi()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = gen_symbols(&model, 5, &mut rng).unwrap();
        let x = synthesize(&a, &s, &CMatrix::zeros(64, 5)).unwrap();
        assert_eq!(x.shape(), (64, 5));

        // noiseless augmented factorization X^{nc} = A^{nc} S
        let xnc = augment(&x);
        let anc = augmented_steering(&a, src.phi());
        assert!((xnc - &anc * &s).norm() < 1e-12 * anc.norm() * s.norm());

        // zero signal: X = N
        let nse = gen_noise(&NoiseModel::circular_white(1.0).unwrap(), 64, 5, &mut rng).unwrap();
        let x = synthesize(&a, &CMatrix::zeros(2, 5), &nse).unwrap();
        assert_abs_diff_eq!((x - nse).norm(), 0.0);

        // single point
        let x = CMatrix::from_element(1, 1, c(0.0, 1.0));
        let xnc = augment(&x);
        assert_eq!(xnc[(0, 0)], c(0.0, 1.0));
        assert_eq!(xnc[(1, 0)], c(0.0, -1.0));
    }

    #[test]
    fn fba_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = CMatrix::from_fn(3, 4, |_, _| {
            C64::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            )
        });
        let xnc = augment(&x);
        let z = fba_augment(&xnc);
        // centro-Hermitian
        let residual = (flip_rows(&flip_cols(&z).conjugate()) - &z).norm();
        assert!(residual < 1e-12 * z.norm());
        // duplicate column for N = 1
        let one = fba_augment(&augment(&x.columns(0, 1).into_owned()));
        assert_abs_diff_eq!((one.column(0) - one.column(1)).norm(), 0.0);
        // Gram identity G = 2 X' X'^H
        let gram = &z * z.adjoint();
        assert!((gram - (&xnc * xnc.adjoint()) * c(2.0, 0.0)).norm() < 1e-12 * z.norm_squared());
    }

    #[test]
    fn effective_snr_examples() {
        // unit power, N = 4, sigma^2 = 1e-4: 46 dB
        let rho = effective_snr(4.0, 1e-4).unwrap();
        assert_abs_diff_eq!(rho, 4.0e4);
        assert_abs_diff_eq!(10.0 * rho.log10(), 46.0, epsilon = 0.01);
        assert_abs_diff_eq!(effective_snr(0.0, 1.0).unwrap(), 0.0);
        // doubling N at fixed average power doubles rho
        assert_abs_diff_eq!(effective_snr(8.0, 1e-4).unwrap(), 2.0 * rho);
        assert!(matches!(effective_snr(1.0, 0.0), Err(Error::ZeroNoisePower)));
    }
}
