//! Frequency-domain estimation: segment FFTs, ensemble and correlogram PSD
//! estimators, regularized PSD inversion, and the bounded-variation Fourier
//! coefficient estimator with its convergence-rate check.

use nalgebra::DMatrix;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::model::{C64, FrequencyGrid, SpectralMatrixField};
use crate::simulate::{Layout, PanelMeta, TimeSeriesPanel};

/// Per-segment, per-node unitary DFT coefficients of a segmented panel.
#[derive(Debug, Clone)]
pub struct SpectralEnsemble {
    pub r: usize,
    pub n: usize,
    pub grid: FrequencyGrid,
    /// Flat layout `[segment][node][bin]`.
    coeffs: Vec<C64>,
}

impl SpectralEnsemble {
    #[inline]
    pub fn coeff(&self, segment: usize, node: usize, bin: usize) -> C64 {
        self.coeffs[(segment * self.n + node) * self.grid.num_bins + bin]
    }

    pub fn num_bins(&self) -> usize {
        self.grid.num_bins
    }

    /// Build directly from coefficient values (tests and synthetic ensembles).
    pub fn from_fn(
        r: usize,
        n: usize,
        grid: FrequencyGrid,
        mut f: impl FnMut(usize, usize, usize) -> C64,
    ) -> Self {
        let nb = grid.num_bins;
        let mut coeffs = Vec::with_capacity(r * n * nb);
        for seg in 0..r {
            for node in 0..n {
                for bin in 0..nb {
                    coeffs.push(f(seg, node, bin));
                }
            }
        }
        SpectralEnsemble { r, n, grid, coeffs }
    }
}

/// Maximum autocovariance lag used by the correlogram estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LagWindow {
    pub l: usize,
}

/// Unitary N-point DFT of every segment of every node.
pub fn segment_fft(panel: &TimeSeriesPanel) -> Result<SpectralEnsemble> {
    let (r, nb) = match panel.layout {
        Layout::Segmented { r, n } => (r, n),
        Layout::Streaming { .. } => {
            return Err(Error::argument(
                "segment_fft needs a segmented panel; resegment streaming data first",
            ))
        }
    };
    if !nb.is_power_of_two() {
        return Err(Error::argument(format!(
            "segment length {nb} is not a power of two"
        )));
    }
    let grid = FrequencyGrid::fft(nb)?;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(nb);
    let scale = 1.0 / (nb as f64).sqrt();
    let n = panel.n;
    let mut coeffs = vec![C64::ZERO; r * n * nb];
    let mut buf = vec![C64::ZERO; nb];
    for seg in 0..r {
        for node in 0..n {
            for t in 0..nb {
                buf[t] = C64::new(panel.get(seg, t, node), 0.0);
            }
            fft.process(&mut buf);
            let base = (seg * n + node) * nb;
            for k in 0..nb {
                coeffs[base + k] = buf[k].scale(scale);
            }
        }
    }
    Ok(SpectralEnsemble { r, n, grid, coeffs })
}

/// Inverse of [`segment_fft`]: reconstructs the time panel (real parts).
pub fn inverse_segment_fft(ens: &SpectralEnsemble) -> TimeSeriesPanel {
    let nb = ens.num_bins();
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(nb);
    let scale = 1.0 / (nb as f64).sqrt();
    let mut values = vec![0.0f64; ens.r * nb * ens.n];
    let mut buf = vec![C64::ZERO; nb];
    for seg in 0..ens.r {
        for node in 0..ens.n {
            for k in 0..nb {
                buf[k] = ens.coeff(seg, node, k);
            }
            ifft.process(&mut buf);
            for t in 0..nb {
                values[(seg * nb + t) * ens.n + node] = buf[t].re * scale;
            }
        }
    }
    TimeSeriesPanel {
        n: ens.n,
        layout: Layout::Segmented { r: ens.r, n: nb },
        values,
        meta: PanelMeta::default(),
    }
}

/// Ensemble PSD: `Phi(w_k) = (1/R) sum_r Xhat^r(w_k) Xhat^r(w_k)^*`,
/// Hermitian positive semidefinite by construction.
pub fn estimate_psd_ensemble(ens: &SpectralEnsemble) -> SpectralMatrixField {
    let n = ens.n;
    let nb = ens.num_bins();
    let mut values = vec![DMatrix::<C64>::zeros(n, n); nb];
    for seg in 0..ens.r {
        for k in 0..nb {
            for i in 0..n {
                let xi = ens.coeff(seg, i, k);
                for j in 0..n {
                    let xj = ens.coeff(seg, j, k);
                    values[k][(i, j)] += xi * xj.conj();
                }
            }
        }
    }
    let inv_r = 1.0 / ens.r as f64;
    for m in values.iter_mut() {
        *m = m.scale(inv_r);
    }
    SpectralMatrixField::new(n, values)
}

/// Correlogram PSD of a streaming panel:
/// `Rhat(k) = 1/(T-k) sum_t X(t+k) X^T(t)` for `|k| <= L`, then
/// `Phi(w) = sum_{k=-L}^{L} Rhat(k) e^{-jwk}`, Hermitianized.
pub fn estimate_psd_correlogram(
    panel: &TimeSeriesPanel,
    lag: LagWindow,
    grid: &FrequencyGrid,
) -> Result<SpectralMatrixField> {
    let t_len = match panel.layout {
        Layout::Streaming { t } => t,
        Layout::Segmented { .. } => {
            return Err(Error::argument(
                "correlogram estimator needs a streaming panel",
            ))
        }
    };
    if t_len <= lag.l {
        return Err(Error::argument(format!(
            "lag window {} needs more than {} samples",
            lag.l, t_len
        )));
    }
    let n = panel.n;
    // Rhat[k] for k = 0..=L.
    let mut rhat = vec![DMatrix::<f64>::zeros(n, n); lag.l + 1];
    for k in 0..=lag.l {
        let count = t_len - k;
        let mut acc = DMatrix::<f64>::zeros(n, n);
        for t in 0..count {
            for i in 0..n {
                let xi = panel.get(0, t + k, i);
                for j in 0..n {
                    acc[(i, j)] += xi * panel.get(0, t, j);
                }
            }
        }
        rhat[k] = acc.scale(1.0 / count as f64);
    }
    let mut values = Vec::with_capacity(grid.num_bins);
    for &w in &grid.bins {
        let mut phi = rhat[0].map(|v| C64::new(v, 0.0));
        for k in 1..=lag.l {
            let e_minus = C64::new(0.0, -w * k as f64).exp();
            let e_plus = e_minus.conj();
            let fwd = rhat[k].map(|v| C64::new(v, 0.0));
            phi += fwd.scale_c(e_minus) + fwd.transpose().scale_c(e_plus);
        }
        values.push((&phi + phi.adjoint()).scale(0.5));
    }
    Ok(SpectralMatrixField::new(n, values))
}

trait ScaleC {
    fn scale_c(&self, z: C64) -> Self;
}

impl ScaleC for DMatrix<C64> {
    fn scale_c(&self, z: C64) -> Self {
        self.map(|v| v * z)
    }
}

/// Default eigenvalue floor: `1e-8` times the largest diagonal power.
pub fn default_eigen_floor(field: &SpectralMatrixField) -> f64 {
    let max_diag = field
        .values
        .iter()
        .flat_map(|m| (0..field.n).map(move |i| m[(i, i)].re))
        .fold(0.0f64, f64::max);
    1e-8 * max_diag.max(f64::MIN_POSITIVE)
}

/// Per-bin inverse with ridge regularization: bins whose smallest eigenvalue
/// falls below `floor` get `floor * I` added before inversion and are flagged.
pub fn invert_psd(field: &SpectralMatrixField, floor: f64) -> SpectralMatrixField {
    let n = field.n;
    let mut values = Vec::with_capacity(field.num_bins());
    let mut flags = field.flags.clone();
    for (k, m) in field.values.iter().enumerate() {
        let herm = (m + m.adjoint()).scale(0.5);
        let mut eig = herm.clone().symmetric_eigen();
        let min_eig = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if min_eig < floor {
            if !flags.contains(&k) {
                flags.push(k);
            }
            let ridged = &herm + DMatrix::<C64>::identity(n, n).scale(floor);
            eig = ridged.symmetric_eigen();
        }
        let mut inv = DMatrix::<C64>::zeros(n, n);
        for (idx, &lam) in eig.eigenvalues.iter().enumerate() {
            let v = eig.eigenvectors.column(idx);
            let w = 1.0 / lam.max(floor.max(f64::MIN_POSITIVE));
            inv += (v * v.adjoint()).scale(w);
        }
        values.push((&inv + inv.adjoint()).scale(0.5));
    }
    flags.sort_unstable();
    flags.dedup();
    SpectralMatrixField {
        n,
        values,
        flags,
    }
}

/// Riemann-sum Fourier coefficient of a bounded-variation function sampled
/// on the grid: `(2 pi / N) sum_k f(2 pi k / N) e^{j 2 pi n k / N}` for
/// `|n| <= sqrt(N)`, zero outside the band.
pub fn fourier_coeff_bv(samples: &[C64], n: i64) -> C64 {
    let nb = samples.len();
    let band = (nb as f64).sqrt();
    if (n.unsigned_abs() as f64) > band {
        return C64::ZERO;
    }
    let mut acc = C64::ZERO;
    for (k, &f) in samples.iter().enumerate() {
        let phase = 2.0 * std::f64::consts::PI * n as f64 * k as f64 / nb as f64;
        acc += f * C64::new(0.0, phase).exp();
    }
    acc.scale(2.0 * std::f64::consts::PI / nb as f64)
}
