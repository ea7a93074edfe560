//! LDIM data model, well-posedness validation, and the closed-form spectral
//! algebra used as the analytic oracle throughout the test suites.
//!
//! The generative model per frequency bin is `X = H X + E` with `H_ii = 0`
//! and diagonal positive noise PSD, so `Phi_X = (I-H)^-1 Phi_E (I-H)^-*`.
//! Cross-PSD convention, fixed once for the whole crate:
//! `Phi_ab(w) = E[Xhat_a(w) Xhat_b(w)^*]`.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::CausalGraph;

pub type C64 = Complex<f64>;

/// Condition-number threshold certifying per-bin invertibility of (I-H).
pub const WELL_POSED_COND_LIMIT: f64 = 1e10;

/// Magnitude below which a transfer entry is a structural zero on analytic
/// specs. Discovery on sampled data uses statistical thresholds instead.
pub const EDGE_TOL_ANALYTIC: f64 = 1e-9;

/// Uniform angular frequency grid `w_k = 2 pi k / N`, `k = 0..N-1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub num_bins: usize,
    pub bins: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(num_bins: usize) -> Result<Self> {
        if num_bins < 2 {
            return Err(Error::structural("frequency grid needs at least 2 bins"));
        }
        let bins = (0..num_bins)
            .map(|k| 2.0 * std::f64::consts::PI * k as f64 / num_bins as f64)
            .collect();
        Ok(FrequencyGrid { num_bins, bins })
    }

    /// Grid for FFT-backed pipelines: bin count must be a power of two.
    pub fn fft(num_bins: usize) -> Result<Self> {
        if !num_bins.is_power_of_two() {
            return Err(Error::argument(format!(
                "FFT grid size {num_bins} is not a power of two"
            )));
        }
        Self::new(num_bins)
    }

    pub fn omega(&self, k: usize) -> f64 {
        self.bins[k]
    }
}

/// Complex transfer-function matrix per grid bin; entry `(v, u)` is the gain
/// of the influence `u -> v`. Diagonal entries are structurally zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrixField {
    pub n: usize,
    pub values: Vec<DMatrix<C64>>,
}

impl TransferMatrixField {
    pub fn zeros(n: usize, num_bins: usize) -> Self {
        TransferMatrixField {
            n,
            values: vec![DMatrix::zeros(n, n); num_bins],
        }
    }

    /// Build from a closure mapping `(bin, row, col)` to the entry value.
    pub fn from_fn(
        n: usize,
        grid: &FrequencyGrid,
        f: impl Fn(usize, usize, usize) -> C64,
    ) -> Self {
        let values = (0..grid.num_bins)
            .map(|k| DMatrix::from_fn(n, n, |r, c| if r == c { C64::ZERO } else { f(k, r, c) }))
            .collect();
        TransferMatrixField { n, values }
    }

    /// Lag-one couplings: `H_vu(w) = b[(v,u)] * exp(-j w)`.
    pub fn lag1(n: usize, grid: &FrequencyGrid, gains: &[(usize, usize, f64)]) -> Self {
        let mut field = Self::zeros(n, grid.num_bins);
        for (k, w) in grid.bins.iter().enumerate() {
            let z = C64::new(0.0, -w).exp();
            for &(v, u, b) in gains {
                field.values[k][(v, u)] = C64::new(b, 0.0) * z;
            }
        }
        field
    }

    pub fn num_bins(&self) -> usize {
        self.values.len()
    }
}

/// Per-node, per-bin noise spectral density; strictly positive everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisePsd {
    /// `diag[node][bin]`
    pub diag: Vec<Vec<f64>>,
}

impl NoisePsd {
    pub fn unit(n: usize, num_bins: usize) -> Self {
        NoisePsd {
            diag: vec![vec![1.0; num_bins]; n],
        }
    }

    pub fn constant(levels: &[f64], num_bins: usize) -> Self {
        NoisePsd {
            diag: levels.iter().map(|&v| vec![v; num_bins]).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }
}

/// The generative model: grid, transfer field, noise PSD, and the graph
/// derived from the transfer support.
#[derive(Debug, Clone)]
pub struct LdimSpec {
    pub grid: FrequencyGrid,
    pub h: TransferMatrixField,
    pub noise: NoisePsd,
    pub graph: CausalGraph,
}

impl LdimSpec {
    pub fn new(grid: FrequencyGrid, h: TransferMatrixField, noise: NoisePsd) -> Result<Self> {
        if h.num_bins() != grid.num_bins {
            return Err(Error::structural(format!(
                "transfer field has {} bins, grid has {}",
                h.num_bins(),
                grid.num_bins
            )));
        }
        if noise.n() != h.n {
            return Err(Error::structural(format!(
                "noise covers {} nodes, transfer covers {}",
                noise.n(),
                h.n
            )));
        }
        for (node, row) in noise.diag.iter().enumerate() {
            if row.len() != grid.num_bins {
                return Err(Error::structural(format!(
                    "noise row for node {node} has {} bins, grid has {}",
                    row.len(),
                    grid.num_bins
                )));
            }
        }
        let graph = graph_from_transfer(&h, EDGE_TOL_ANALYTIC)?;
        Ok(LdimSpec {
            grid,
            h,
            noise,
            graph,
        })
    }

    pub fn n(&self) -> usize {
        self.h.n
    }

    pub fn num_bins(&self) -> usize {
        self.grid.num_bins
    }

    pub fn noise_matrix(&self, bin: usize) -> DMatrix<C64> {
        DMatrix::from_fn(self.n(), self.n(), |r, c| {
            if r == c {
                C64::new(self.noise.diag[r][bin], 0.0)
            } else {
                C64::ZERO
            }
        })
    }
}

/// Hermitian matrix field over the grid: estimated or analytic cross-PSD.
/// `flags` lists bins that were ridge-regularized somewhere upstream.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMatrixField {
    pub n: usize,
    pub values: Vec<DMatrix<C64>>,
    pub flags: Vec<usize>,
}

impl SpectralMatrixField {
    pub fn new(n: usize, values: Vec<DMatrix<C64>>) -> Self {
        SpectralMatrixField {
            n,
            values,
            flags: Vec::new(),
        }
    }

    pub fn num_bins(&self) -> usize {
        self.values.len()
    }

    /// Largest relative Hermitian defect over all bins.
    pub fn hermitian_defect(&self) -> f64 {
        self.values
            .iter()
            .map(|m| {
                let scale = m.norm().max(1e-300);
                (m - m.adjoint()).norm() / scale
            })
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue at a bin (matrix assumed Hermitian).
    pub fn min_eigenvalue(&self, bin: usize) -> f64 {
        hermitian_eigenvalues(&self.values[bin])
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.n,
            "num_bins": self.num_bins(),
            "phi": self.values.iter().map(matrix_to_json).collect::<Vec<_>>(),
            "flags": self.flags,
        })
    }
}

/// Eigenvalues of a Hermitian complex matrix (real, unsorted).
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let herm = (m + m.adjoint()).scale(0.5);
    herm.symmetric_eigenvalues().iter().copied().collect()
}

fn matrix_to_json(m: &DMatrix<C64>) -> serde_json::Value {
    let rows: Vec<Vec<serde_json::Value>> = (0..m.nrows())
        .map(|r| {
            (0..m.ncols())
                .map(|c| serde_json::json!({"re": m[(r, c)].re, "im": m[(r, c)].im}))
                .collect()
        })
        .collect();
    serde_json::json!(rows)
}

/// Outcome of validating an [`LdimSpec`]: per-bin condition numbers of
/// `(I-H)` plus every invariant violation found.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub condition_numbers: Vec<f64>,
    /// `(bin, node)` pairs where `H_ii != 0`.
    pub diagonal_violations: Vec<(usize, usize)>,
    /// `(node, bin)` pairs where the noise PSD is not strictly positive.
    pub noise_violations: Vec<(usize, usize)>,
    /// Bins where `(I-H)` exceeds the conditioning limit.
    pub ill_conditioned_bins: Vec<usize>,
}

impl ValidationReport {
    pub fn passes(&self) -> bool {
        self.diagonal_violations.is_empty()
            && self.noise_violations.is_empty()
            && self.ill_conditioned_bins.is_empty()
    }
}

/// Condition number (2-norm) via singular values.
fn condition_number(m: &DMatrix<C64>) -> f64 {
    let svd = m.clone().svd(false, false);
    let max = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    let min = svd
        .singular_values
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b));
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Check structural invariants and the per-bin well-posedness certificate.
pub fn validate_ldim(spec: &LdimSpec) -> Result<ValidationReport> {
    let n = spec.n();
    for (k, h) in spec.h.values.iter().enumerate() {
        if h.nrows() != n || h.ncols() != n {
            return Err(Error::structural(format!(
                "transfer matrix at bin {k} is {}x{}, expected {n}x{n}",
                h.nrows(),
                h.ncols()
            )));
        }
    }

    let mut report = ValidationReport {
        condition_numbers: Vec::with_capacity(spec.num_bins()),
        diagonal_violations: Vec::new(),
        noise_violations: Vec::new(),
        ill_conditioned_bins: Vec::new(),
    };

    for (k, h) in spec.h.values.iter().enumerate() {
        for i in 0..n {
            if h[(i, i)].norm() > 0.0 {
                report.diagonal_violations.push((k, i));
            }
        }
        let a = DMatrix::identity(n, n) - h;
        let cond = condition_number(&a);
        if !(cond < WELL_POSED_COND_LIMIT) {
            report.ill_conditioned_bins.push(k);
        }
        report.condition_numbers.push(cond);
    }
    for (node, row) in spec.noise.diag.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            if !(v > 0.0) {
                report.noise_violations.push((node, k));
            }
        }
    }
    Ok(report)
}

/// Analytic cross-PSD of the model: `Phi(w) = (I-H)^-1 Phi_E (I-H)^-*`,
/// Hermitian positive definite per bin.
pub fn closed_form_psd(spec: &LdimSpec) -> Result<SpectralMatrixField> {
    let n = spec.n();
    let eye = DMatrix::<C64>::identity(n, n);
    let mut values = Vec::with_capacity(spec.num_bins());
    for (k, h) in spec.h.values.iter().enumerate() {
        let a = &eye - h;
        if condition_number(&a) >= WELL_POSED_COND_LIMIT {
            return Err(Error::Conditioning {
                bin: k,
                message: "(I-H) is near-singular".into(),
            });
        }
        let inv = a.clone().try_inverse().ok_or(Error::Conditioning {
            bin: k,
            message: "(I-H) is singular".into(),
        })?;
        let phi = &inv * spec.noise_matrix(k) * inv.adjoint();
        // Exact Hermitian symmetrization of rounding residue.
        values.push((&phi + phi.adjoint()).scale(0.5));
    }
    Ok(SpectralMatrixField::new(n, values))
}

/// Support graph of the transfer field: edge `u -> v` iff the max-bin
/// magnitude of `H_vu` exceeds `tol`.
pub fn graph_from_transfer(h: &TransferMatrixField, tol: f64) -> Result<CausalGraph> {
    if tol < 0.0 {
        return Err(Error::argument("tolerance must be nonnegative"));
    }
    let mut edges = Vec::new();
    for v in 0..h.n {
        for u in 0..h.n {
            if u == v {
                continue;
            }
            let max_mag = h
                .values
                .iter()
                .map(|m| m[(v, u)].norm())
                .fold(0.0f64, f64::max);
            if max_mag > tol {
                edges.push((u, v));
            }
        }
    }
    CausalGraph::new(h.n, edges)
}

// --- JSON schema for LdimSpec -------------------------------------------

#[derive(Serialize, Deserialize)]
struct ComplexJson {
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct LdimSpecJson {
    n: usize,
    num_bins: usize,
    h: Vec<Vec<Vec<ComplexJson>>>,
    noise: Vec<Vec<f64>>,
}

impl LdimSpec {
    pub fn to_json_string(&self) -> Result<String> {
        let doc = LdimSpecJson {
            n: self.n(),
            num_bins: self.num_bins(),
            h: self
                .h
                .values
                .iter()
                .map(|m| {
                    (0..m.nrows())
                        .map(|r| {
                            (0..m.ncols())
                                .map(|c| ComplexJson {
                                    re: m[(r, c)].re,
                                    im: m[(r, c)].im,
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect(),
            noise: self.noise.diag.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: LdimSpecJson = serde_json::from_str(text)?;
        let grid = FrequencyGrid::new(doc.num_bins)?;
        if doc.h.len() != doc.num_bins {
            return Err(Error::structural(format!(
                "h has {} bins, num_bins is {}",
                doc.h.len(),
                doc.num_bins
            )));
        }
        let values = doc
            .h
            .iter()
            .enumerate()
            .map(|(k, rows)| {
                if rows.len() != doc.n || rows.iter().any(|r| r.len() != doc.n) {
                    return Err(Error::structural(format!("bin {k} is not {0}x{0}", doc.n)));
                }
                Ok(DMatrix::from_fn(doc.n, doc.n, |r, c| {
                    C64::new(rows[r][c].re, rows[r][c].im)
                }))
            })
            .collect::<Result<Vec<_>>>()?;
        let h = TransferMatrixField { n: doc.n, values };
        let noise = NoisePsd { diag: doc.noise };
        LdimSpec::new(grid, h, noise)
    }
}

// --- Reference models used across the test suites ------------------------

/// Three-node model `x3 -> x2 -> x1` with an extra `x3 -> x1` link:
/// `x1 = b x2 + g x3 + e1`, `x2 = a x3 + e2`, `x3 = e3`, all lag-one.
pub fn sem2_spec(num_bins: usize, alpha: f64, beta: f64, gamma: f64) -> Result<LdimSpec> {
    let grid = FrequencyGrid::fft(num_bins)?;
    let h = TransferMatrixField::lag1(
        3,
        &grid,
        &[(0, 1, beta), (1, 2, alpha), (0, 2, gamma)],
    );
    let noise = NoisePsd::unit(3, num_bins);
    LdimSpec::new(grid, h, noise)
}

/// Chain `Z -> Y -> X` as nodes `0 -> 1 -> 2` with lag-one gains `b` then `a`.
pub fn sem1_spec(num_bins: usize, b: f64, a: f64) -> Result<LdimSpec> {
    let grid = FrequencyGrid::fft(num_bins)?;
    let h = TransferMatrixField::lag1(3, &grid, &[(1, 0, b), (2, 1, a)]);
    let noise = NoisePsd::unit(3, num_bins);
    LdimSpec::new(grid, h, noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn grid_spacing_and_bounds() {
        let g = FrequencyGrid::new(8).unwrap();
        assert_eq!(g.bins[0], 0.0);
        let step = 2.0 * std::f64::consts::PI / 8.0;
        for k in 1..8 {
            assert_relative_eq!(g.bins[k] - g.bins[k - 1], step, max_relative = 1e-15);
        }
        assert!(FrequencyGrid::new(1).is_err());
        assert!(FrequencyGrid::fft(12).is_err());
    }

    #[test]
    fn validate_identity_case() {
        let grid = FrequencyGrid::new(4).unwrap();
        let spec = LdimSpec::new(
            grid.clone(),
            TransferMatrixField::zeros(2, 4),
            NoisePsd::unit(2, 4),
        )
        .unwrap();
        let report = validate_ldim(&spec).unwrap();
        assert!(report.passes());
        for c in report.condition_numbers {
            assert_relative_eq!(c, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn validate_flags_diagonal_violation() {
        let grid = FrequencyGrid::new(4).unwrap();
        let mut h = TransferMatrixField::zeros(2, 4);
        h.values[2][(0, 0)] = C64::new(0.5, 0.0);
        let spec = LdimSpec {
            grid,
            noise: NoisePsd::unit(2, 4),
            graph: CausalGraph::empty(2),
            h,
        };
        let report = validate_ldim(&spec).unwrap();
        assert_eq!(report.diagonal_violations, vec![(2, 0)]);
        assert!(!report.passes());
    }

    #[test]
    fn validate_flags_singular_bin() {
        // H_12 = H_21 = 1 makes I - H singular: det = 1 - 1 = 0.
        let grid = FrequencyGrid::new(4).unwrap();
        let mut h = TransferMatrixField::zeros(2, 4);
        h.values[1][(0, 1)] = C64::new(1.0, 0.0);
        h.values[1][(1, 0)] = C64::new(1.0, 0.0);
        let spec = LdimSpec {
            grid,
            noise: NoisePsd::unit(2, 4),
            graph: CausalGraph::empty(2),
            h,
        };
        let report = validate_ldim(&spec).unwrap();
        assert_eq!(report.ill_conditioned_bins, vec![1]);
    }

    #[test]
    fn closed_form_identity_and_scaling() {
        let grid = FrequencyGrid::new(4).unwrap();
        let spec = LdimSpec::new(
            grid.clone(),
            TransferMatrixField::zeros(2, 4),
            NoisePsd::unit(2, 4),
        )
        .unwrap();
        let phi = closed_form_psd(&spec).unwrap();
        for m in &phi.values {
            assert!((m - DMatrix::<C64>::identity(2, 2)).norm() < 1e-14);
        }

        // Scaling the noise by c scales Phi by c.
        let scaled = LdimSpec::new(
            grid,
            TransferMatrixField::zeros(2, 4),
            NoisePsd::constant(&[3.0, 3.0], 4),
        )
        .unwrap();
        let phi_s = closed_form_psd(&scaled).unwrap();
        for (a, b) in phi.values.iter().zip(&phi_s.values) {
            assert!((a.scale(3.0) - b).norm() < 1e-12);
        }
    }

    #[test]
    fn closed_form_chain_hand_expansion() {
        // Static-gain chain 0 -> 1 -> 2 (Z -> Y -> X), unit noise:
        // Phi_Y = |b|^2 + 1, Phi_YZ = b.
        let grid = FrequencyGrid::new(4).unwrap();
        let b = 0.7;
        let a = 0.4;
        let h = TransferMatrixField::from_fn(3, &grid, |_, r, c| {
            if (r, c) == (1, 0) {
                C64::new(b, 0.0)
            } else if (r, c) == (2, 1) {
                C64::new(a, 0.0)
            } else {
                C64::ZERO
            }
        });
        let spec = LdimSpec::new(grid, h, NoisePsd::unit(3, 4)).unwrap();
        let phi = closed_form_psd(&spec).unwrap();
        for m in &phi.values {
            assert_relative_eq!(m[(1, 1)].re, b * b + 1.0, max_relative = 1e-12);
            assert_relative_eq!(m[(1, 0)].re, b, max_relative = 1e-12);
            assert!(m[(1, 0)].im.abs() < 1e-14);
        }
    }

    #[test]
    fn closed_form_inverse_identity() {
        // Phi^-1 = (I-H)^* Phi_E^-1 (I-H) to 1e-8 relative, every bin.
        let spec = sem2_spec(8, 0.5, 0.8, 0.3).unwrap();
        let phi = closed_form_psd(&spec).unwrap();
        let eye = DMatrix::<C64>::identity(3, 3);
        for (k, m) in phi.values.iter().enumerate() {
            let a = &eye - &spec.h.values[k];
            let direct = a.adjoint() * spec.noise_matrix(k).try_inverse().unwrap() * a;
            let inv = m.clone().try_inverse().unwrap();
            assert!((direct - inv).norm() / phi.values[k].norm() < 1e-8);
        }
    }

    #[test]
    fn psd_linearity_through_augmented_node() {
        // Add node y = alpha x0 + beta x1 (+ its own tiny noise) to a base
        // model; the cross-PSD to x2 must combine linearly, exactly.
        let base = sem2_spec(8, 0.5, 0.8, 0.3).unwrap();
        let grid = base.grid.clone();
        let (alpha, beta) = (0.9, -0.4);
        let h_aug = TransferMatrixField::from_fn(4, &grid, |k, r, c| {
            if r < 3 && c < 3 {
                base.h.values[k][(r, c)]
            } else if r == 3 && c == 0 {
                C64::new(alpha, 0.0)
            } else if r == 3 && c == 1 {
                C64::new(beta, 0.0)
            } else {
                C64::ZERO
            }
        });
        let mut noise = NoisePsd::unit(4, 8);
        noise.diag[3] = vec![1e-6; 8];
        let aug = LdimSpec::new(grid, h_aug, noise).unwrap();
        let phi = closed_form_psd(&aug).unwrap();
        for m in &phi.values {
            let lhs = m[(3, 2)];
            let rhs = C64::new(alpha, 0.0) * m[(0, 2)] + C64::new(beta, 0.0) * m[(1, 2)];
            assert!((lhs - rhs).norm() < 1e-10);
        }
    }

    #[test]
    fn transfer_support_graph() {
        let grid = FrequencyGrid::new(4).unwrap();
        let h = TransferMatrixField::zeros(3, 4);
        assert!(graph_from_transfer(&h, 0.0).unwrap().edges.is_empty());

        let mut h = TransferMatrixField::zeros(3, 4);
        h.values[2][(2, 0)] = C64::new(0.3, 0.0);
        let g = graph_from_transfer(&h, 0.1).unwrap();
        assert_eq!(g.edges, std::collections::BTreeSet::from([(0, 2)]));
        // Tolerance above every entry gives the empty graph.
        assert!(graph_from_transfer(&h, 0.5).unwrap().edges.is_empty());
    }

    #[test]
    fn graph_from_transfer_monotone_in_tol() {
        let spec = sem2_spec(8, 0.5, 0.8, 0.3).unwrap();
        let loose = graph_from_transfer(&spec.h, 1e-9).unwrap();
        let tight = graph_from_transfer(&spec.h, 0.6).unwrap();
        assert!(tight.edges.is_subset(&loose.edges));
    }

    #[test]
    fn spec_json_round_trip_bit_exact() {
        let spec = sem2_spec(8, 0.5123456789012345, -0.87, 0.3).unwrap();
        let text = spec.to_json_string().unwrap();
        let back = LdimSpec::from_json_str(&text).unwrap();
        assert_eq!(spec.h.values, back.h.values);
        assert_eq!(spec.noise.diag, back.noise.diag);
        assert_eq!(spec.graph, back.graph);
    }
}
