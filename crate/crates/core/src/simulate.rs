//! Synthetic panel generation: streaming AR simulation, exact circular
//! (frequency-drawn) simulation, restart-and-record sampling, and atomic
//! interventions.
//!
//! All randomness flows from one `u64` seed through per-segment ChaCha
//! streams, so output is deterministic and independent of scheduling.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::CausalGraph;
use crate::model::{C64, FrequencyGrid, LdimSpec, NoisePsd, TransferMatrixField};

/// Stability limit for the AR companion spectral radius.
pub const STABILITY_LIMIT: f64 = 1.0 - 1e-6;

/// Hard cap on streaming burn-in samples.
pub const MAX_BURN_IN: usize = 10_000;

fn ensure_pool() {
    use std::sync::Once;
    static INIT: Once = Once::new();
    INIT.call_once(|| {
        if let Ok(v) = std::env::var("SPECTRAL_CAUSAL_THREADS") {
            if let Ok(k) = v.parse::<usize>() {
                if k > 0 {
                    let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
                }
            }
        }
    });
}

/// Panel layout: one long run or independent fixed-length segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layout {
    Streaming { t: usize },
    Segmented { r: usize, n: usize },
}

/// Record of the forced sequence applied to one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionSpec {
    pub node: usize,
    pub sequence: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PanelMeta {
    pub seed: u64,
    pub generator: String,
    pub intervention: Option<InterventionSpec>,
    pub spec_hash: Option<String>,
}

/// Real-valued multichannel samples, streaming or segmented.
#[derive(Debug, Clone)]
pub struct TimeSeriesPanel {
    pub n: usize,
    pub layout: Layout,
    /// Row-major `[segment][t][node]`; streaming panels use one segment.
    pub values: Vec<f64>,
    pub meta: PanelMeta,
}

impl TimeSeriesPanel {
    pub fn segments(&self) -> usize {
        match self.layout {
            Layout::Streaming { .. } => 1,
            Layout::Segmented { r, .. } => r,
        }
    }

    pub fn segment_len(&self) -> usize {
        match self.layout {
            Layout::Streaming { t } => t,
            Layout::Segmented { n, .. } => n,
        }
    }

    #[inline]
    pub fn get(&self, segment: usize, t: usize, node: usize) -> f64 {
        self.values[(segment * self.segment_len() + t) * self.n + node]
    }

    pub fn total_samples(&self) -> usize {
        self.segments() * self.segment_len()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Chop a streaming panel into non-overlapping segments of length
    /// `n_per_segment`, discarding the remainder.
    pub fn resegment(&self, n_per_segment: usize) -> Result<TimeSeriesPanel> {
        let t = match self.layout {
            Layout::Streaming { t } => t,
            Layout::Segmented { .. } => {
                return Err(Error::argument("panel is already segmented"))
            }
        };
        let r = t / n_per_segment;
        if r == 0 {
            return Err(Error::argument(format!(
                "stream of {t} samples is shorter than one segment of {n_per_segment}"
            )));
        }
        let mut values = Vec::with_capacity(r * n_per_segment * self.n);
        values.extend_from_slice(&self.values[..r * n_per_segment * self.n]);
        Ok(TimeSeriesPanel {
            n: self.n,
            layout: Layout::Segmented {
                r,
                n: n_per_segment,
            },
            values,
            meta: self.meta.clone(),
        })
    }
}

/// AR generator: `X_i(t) + sum_k a_i(k) X_i(t-k) = sum_{j != i} b_ij X_j(t-1) + E_i(t)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArSpec {
    pub n: usize,
    /// Self-lag coefficients `a_i(1..=3)` per node.
    pub a: Vec<[f64; 3]>,
    /// Cross gains `b[i][j]` of the lag-one influence `j -> i`; zero diagonal.
    pub b: Vec<Vec<f64>>,
    /// Per-node innovation standard deviations.
    pub noise_std: Vec<f64>,
}

impl ArSpec {
    pub fn validate(&self) -> Result<()> {
        if self.a.len() != self.n || self.b.len() != self.n || self.noise_std.len() != self.n {
            return Err(Error::structural("ArSpec field lengths disagree with n"));
        }
        for (i, row) in self.b.iter().enumerate() {
            if row.len() != self.n {
                return Err(Error::structural(format!("b row {i} length != n")));
            }
            if row[i] != 0.0 {
                return Err(Error::structural(format!("b[{i}][{i}] must be zero")));
            }
        }
        if self.noise_std.iter().any(|s| *s < 0.0) {
            return Err(Error::structural("noise_std must be nonnegative"));
        }
        Ok(())
    }

    /// Support graph: edge `j -> i` wherever `b[i][j] != 0`.
    pub fn graph(&self) -> CausalGraph {
        let mut edges = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j && self.b[i][j] != 0.0 {
                    edges.push((j, i));
                }
            }
        }
        CausalGraph::new(self.n, edges).expect("validated spec")
    }

    /// Spectral radius of the 3n x 3n companion matrix.
    pub fn companion_spectral_radius(&self) -> f64 {
        let n = self.n;
        let mut m = DMatrix::<f64>::zeros(3 * n, 3 * n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m[(i, j)] = self.b[i][j];
                }
            }
            m[(i, i)] -= self.a[i][0];
            m[(i, n + i)] = -self.a[i][1];
            m[(i, 2 * n + i)] = -self.a[i][2];
        }
        for i in 0..2 * n {
            m[(n + i, i)] = 1.0;
        }
        m.complex_eigenvalues()
            .iter()
            .map(|e| e.norm())
            .fold(0.0, f64::max)
    }

    fn check_stable(&self) -> Result<f64> {
        self.validate()?;
        let radius = self.companion_spectral_radius();
        if radius >= STABILITY_LIMIT {
            return Err(Error::Stability {
                radius,
                limit: STABILITY_LIMIT,
            });
        }
        Ok(radius)
    }

    fn max_lag(&self) -> usize {
        let self_lag = (0..self.n)
            .map(|i| {
                self.a[i]
                    .iter()
                    .rposition(|&c| c != 0.0)
                    .map_or(0, |p| p + 1)
            })
            .max()
            .unwrap_or(0);
        let cross = if self
            .b
            .iter()
            .any(|row| row.iter().any(|&v| v != 0.0))
        {
            1
        } else {
            0
        };
        self_lag.max(cross)
    }

    /// Streaming burn-in: `10 * max_lag / (1 - radius)`, capped.
    pub fn burn_in(&self) -> usize {
        let radius = self.companion_spectral_radius();
        if radius >= 1.0 {
            return MAX_BURN_IN;
        }
        let raw = (10.0 * self.max_lag() as f64 / (1.0 - radius)).ceil() as usize;
        raw.min(MAX_BURN_IN)
    }

    /// Equivalent LDIM on a grid: `H_ij(w) = b_ij e^{-jw} / A_i(w)` with
    /// `A_i(w) = 1 + sum_k a_i(k) e^{-jwk}`, noise PSD `s_i^2 / |A_i(w)|^2`.
    pub fn to_ldim(&self, grid: &FrequencyGrid) -> Result<LdimSpec> {
        self.validate()?;
        let n = self.n;
        let num_bins = grid.num_bins;
        let mut h = TransferMatrixField::zeros(n, num_bins);
        let mut noise = vec![vec![0.0; num_bins]; n];
        for (k, &w) in grid.bins.iter().enumerate() {
            let z1 = C64::new(0.0, -w).exp();
            let z2 = C64::new(0.0, -2.0 * w).exp();
            let z3 = C64::new(0.0, -3.0 * w).exp();
            for i in 0..n {
                let ai = C64::new(1.0, 0.0)
                    + z1.scale(self.a[i][0])
                    + z2.scale(self.a[i][1])
                    + z3.scale(self.a[i][2]);
                for j in 0..n {
                    if i != j && self.b[i][j] != 0.0 {
                        h.values[k][(i, j)] = z1.scale(self.b[i][j]) / ai;
                    }
                }
                noise[i][k] = self.noise_std[i].powi(2) / ai.norm_sqr();
            }
        }
        LdimSpec::new(grid.clone(), h, NoisePsd { diag: noise })
    }
}

fn segment_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One AR run from zero initial conditions. Draws noise for every node at
/// every step (so interventions never desynchronize the stream), then
/// overrides the intervened node.
fn ar_run(
    spec: &ArSpec,
    length: usize,
    burn_in: usize,
    rng: &mut ChaCha8Rng,
    iv: Option<&InterventionSpec>,
) -> Vec<f64> {
    let n = spec.n;
    let total = burn_in + length;
    let mut hist = [vec![0.0f64; n], vec![0.0f64; n], vec![0.0f64; n]];
    let mut out = Vec::with_capacity(length * n);
    let mut x = vec![0.0f64; n];
    for t in 0..total {
        for i in 0..n {
            let e: f64 = rng.sample::<f64, _>(StandardNormal) * spec.noise_std[i];
            let mut v = e;
            for (k, h) in hist.iter().enumerate() {
                v -= spec.a[i][k] * h[i];
            }
            for j in 0..n {
                if j != i {
                    v += spec.b[i][j] * hist[0][j];
                }
            }
            x[i] = v;
        }
        if let Some(iv) = iv {
            x[iv.node] = iv.sequence[t % iv.sequence.len()];
        }
        if t >= burn_in {
            out.extend_from_slice(&x);
        }
        hist.rotate_right(1);
        hist[0].copy_from_slice(&x);
    }
    out
}

fn check_intervention(spec_n: usize, len: usize, iv: Option<&InterventionSpec>) -> Result<()> {
    if let Some(iv) = iv {
        if iv.node >= spec_n {
            return Err(Error::argument(format!(
                "intervention node {} out of range",
                iv.node
            )));
        }
        if iv.sequence.is_empty() || len % iv.sequence.len() != 0 {
            return Err(Error::argument(format!(
                "intervention sequence length {} does not divide the layout length {len}",
                iv.sequence.len()
            )));
        }
    }
    Ok(())
}

/// Streaming AR simulation with the default burn-in policy.
pub fn simulate_ar(spec: &ArSpec, t: usize, seed: u64) -> Result<TimeSeriesPanel> {
    simulate_ar_raw(spec, t, seed, spec.burn_in(), None)
}

pub fn simulate_ar_intervened(
    spec: &ArSpec,
    t: usize,
    seed: u64,
    iv: &InterventionSpec,
) -> Result<TimeSeriesPanel> {
    simulate_ar_raw(spec, t, seed, spec.burn_in(), Some(iv))
}

/// Streaming AR simulation with explicit burn-in (0 reproduces the raw
/// zero-initial-condition path used by restart-and-record).
pub fn simulate_ar_raw(
    spec: &ArSpec,
    t: usize,
    seed: u64,
    burn_in: usize,
    iv: Option<&InterventionSpec>,
) -> Result<TimeSeriesPanel> {
    spec.check_stable()?;
    check_intervention(spec.n, t, iv)?;
    let mut rng = segment_rng(seed, 0);
    let values = ar_run(spec, t, burn_in, &mut rng, iv);
    Ok(TimeSeriesPanel {
        n: spec.n,
        layout: Layout::Streaming { t },
        values,
        meta: PanelMeta {
            seed,
            generator: "ar".into(),
            intervention: iv.cloned(),
            spec_hash: None,
        },
    })
}

/// `R` independent zero-initial-condition segments of `N` samples each.
pub fn restart_and_record(
    spec: &ArSpec,
    r: usize,
    n_samples: usize,
    seed: u64,
) -> Result<TimeSeriesPanel> {
    restart_and_record_intervened(spec, r, n_samples, seed, None)
}

pub fn restart_and_record_intervened(
    spec: &ArSpec,
    r: usize,
    n_samples: usize,
    seed: u64,
    iv: Option<&InterventionSpec>,
) -> Result<TimeSeriesPanel> {
    spec.check_stable()?;
    check_intervention(spec.n, n_samples, iv)?;
    ensure_pool();
    let segments: Vec<Vec<f64>> = (0..r)
        .into_par_iter()
        .map(|seg| {
            let mut rng = segment_rng(seed, seg as u64);
            ar_run(spec, n_samples, 0, &mut rng, iv)
        })
        .collect();
    let mut values = Vec::with_capacity(r * n_samples * spec.n);
    for s in segments {
        values.extend_from_slice(&s);
    }
    Ok(TimeSeriesPanel {
        n: spec.n,
        layout: Layout::Segmented { r, n: n_samples },
        values,
        meta: PanelMeta {
            seed,
            generator: "restart".into(),
            intervention: iv.cloned(),
            spec_hash: None,
        },
    })
}

/// Exact realization of the circular model: noise DFT coefficients drawn
/// per bin as circular Gaussians with the spec's noise PSD (conjugate
/// symmetric so time samples are real), then `Xhat = (I-H)^{-1} Ehat` and a
/// unitary inverse DFT.
pub fn simulate_circular(spec: &LdimSpec, r: usize, seed: u64) -> Result<TimeSeriesPanel> {
    let n = spec.n();
    let nb = spec.num_bins();
    if nb % 2 != 0 {
        return Err(Error::argument("circular simulation needs an even bin count"));
    }
    // Realness requires H(N-k) = conj(H(k)) and matching noise PSD.
    for k in 1..nb / 2 {
        let diff = (spec.h.values[nb - k].map(|z| z.conj()) - &spec.h.values[k]).norm();
        if diff > 1e-9 * (1.0 + spec.h.values[k].norm()) {
            return Err(Error::argument(
                "transfer field is not conjugate-symmetric; time samples would be complex",
            ));
        }
        for i in 0..n {
            let a = spec.noise.diag[i][k];
            let b = spec.noise.diag[i][nb - k];
            if (a - b).abs() > 1e-9 * (1.0 + a.abs()) {
                return Err(Error::argument("noise PSD is not even in frequency"));
            }
        }
    }

    // Factor (I-H) once per bin.
    let eye = DMatrix::<C64>::identity(n, n);
    let lus: Vec<_> = spec
        .h
        .values
        .iter()
        .map(|h| (&eye - h).lu())
        .collect();
    for (k, lu) in lus.iter().enumerate() {
        if lu.determinant().norm() == 0.0 {
            return Err(Error::Conditioning {
                bin: k,
                message: "(I-H) is singular".into(),
            });
        }
    }

    ensure_pool();
    let inv_sqrt_n = 1.0 / (nb as f64).sqrt();
    let segments: Vec<Vec<f64>> = (0..r)
        .into_par_iter()
        .map(|seg| {
            let mut rng = segment_rng(seed, seg as u64);
            // Draw the noise spectrum with exact conjugate symmetry.
            let mut ehat = vec![vec![C64::ZERO; n]; nb];
            for i in 0..n {
                let g0: f64 = rng.sample(StandardNormal);
                ehat[0][i] = C64::new(g0 * spec.noise.diag[i][0].sqrt(), 0.0);
                let gh: f64 = rng.sample(StandardNormal);
                ehat[nb / 2][i] = C64::new(gh * spec.noise.diag[i][nb / 2].sqrt(), 0.0);
                for k in 1..nb / 2 {
                    let s = (spec.noise.diag[i][k] / 2.0).sqrt();
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    ehat[k][i] = C64::new(re * s, im * s);
                    ehat[nb - k][i] = ehat[k][i].conj();
                }
            }
            // Per-bin solve, then inverse unitary DFT.
            let mut xhat = vec![DMatrix::<C64>::zeros(n, 1); nb];
            for k in 0..nb {
                let e = DMatrix::<C64>::from_fn(n, 1, |row, _| ehat[k][row]);
                xhat[k] = lus[k].solve(&e).expect("checked nonsingular");
            }
            let mut out = vec![0.0f64; nb * n];
            for t in 0..nb {
                for i in 0..n {
                    let mut acc = C64::ZERO;
                    for k in 0..nb {
                        let phase = 2.0 * std::f64::consts::PI * (k * t % nb) as f64 / nb as f64;
                        acc += xhat[k][(i, 0)] * C64::new(0.0, phase).exp();
                    }
                    out[t * n + i] = acc.re * inv_sqrt_n;
                }
            }
            out
        })
        .collect();

    let mut values = Vec::with_capacity(r * nb * n);
    for s in segments {
        values.extend_from_slice(&s);
    }
    Ok(TimeSeriesPanel {
        n,
        layout: Layout::Segmented { r, n: nb },
        values,
        meta: PanelMeta {
            seed,
            generator: "circular".into(),
            intervention: None,
            spec_hash: None,
        },
    })
}

// --- CSV / meta I/O -------------------------------------------------------

/// Header `segment,t,node_0,...,node_{n-1}`; streaming panels write
/// segment 0 throughout.
pub fn write_panel_csv(panel: &TimeSeriesPanel, path: &std::path::Path) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(w, "segment,t")?;
    for i in 0..panel.n {
        write!(w, ",node_{i}")?;
    }
    writeln!(w)?;
    let len = panel.segment_len();
    for seg in 0..panel.segments() {
        for t in 0..len {
            write!(w, "{seg},{t}")?;
            for i in 0..panel.n {
                write!(w, ",{}", panel.get(seg, t, i))?;
            }
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_panel_csv(path: &std::path::Path) -> Result<TimeSeriesPanel> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::structural("empty panel CSV"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 3 || cols[0] != "segment" || cols[1] != "t" {
        return Err(Error::structural("panel CSV header must be segment,t,node_0,..."));
    }
    let n = cols.len() - 2;
    let mut values = Vec::new();
    let mut max_seg = 0usize;
    let mut rows = 0usize;
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n + 2 {
            return Err(Error::structural(format!(
                "row {} has {} fields, expected {}",
                lineno + 2,
                fields.len(),
                n + 2
            )));
        }
        let seg: usize = fields[0]
            .parse()
            .map_err(|_| Error::structural(format!("bad segment index on row {}", lineno + 2)))?;
        max_seg = max_seg.max(seg);
        for f in &fields[2..] {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::structural(format!("bad value on row {}", lineno + 2)))?;
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::structural("panel CSV has no data rows"));
    }
    let layout = if max_seg == 0 {
        Layout::Streaming { t: rows }
    } else {
        let r = max_seg + 1;
        if rows % r != 0 {
            return Err(Error::structural("segments have unequal lengths"));
        }
        Layout::Segmented { r, n: rows / r }
    };
    Ok(TimeSeriesPanel {
        n,
        layout,
        values,
        meta: PanelMeta::default(),
    })
}

pub fn write_panel_meta(meta: &PanelMeta, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(meta)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::sem2_spec;

    fn white_spec(n: usize) -> ArSpec {
        ArSpec {
            n,
            a: vec![[0.0; 3]; n],
            b: vec![vec![0.0; n]; n],
            noise_std: vec![1.0; n],
        }
    }

    #[test]
    fn white_noise_lag0_covariance() {
        let spec = white_spec(3);
        let panel = simulate_ar(&spec, 100_000, 42).unwrap();
        let t = panel.total_samples();
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for s in 0..t {
                    acc += panel.get(0, s, i) * panel.get(0, s, j);
                }
                let cov = acc / t as f64;
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (cov - expect).abs() < 0.05,
                    "cov[{i}][{j}] = {cov}"
                );
            }
        }
    }

    #[test]
    fn zero_noise_gives_zero_panel() {
        let mut spec = white_spec(2);
        spec.noise_std = vec![0.0, 0.0];
        spec.b[1][0] = 0.5;
        let panel = simulate_ar(&spec, 100, 1).unwrap();
        assert!(panel.values.iter().all(|&v| v == 0.0));
        let seg = restart_and_record(&spec, 5, 16, 1).unwrap();
        assert!(seg.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn same_seed_bit_identical() {
        let mut spec = white_spec(3);
        spec.a[0] = [-0.4, 0.1, 0.0];
        spec.b[1][0] = 0.5;
        let a = simulate_ar(&spec, 500, 7).unwrap();
        let b = simulate_ar(&spec, 500, 7).unwrap();
        assert_eq!(a.values, b.values);
        let c = simulate_ar(&spec, 500, 8).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn unstable_spec_rejected() {
        let mut spec = white_spec(1);
        spec.a[0] = [-1.01, 0.0, 0.0]; // X(t) = 1.01 X(t-1) + E
        match simulate_ar(&spec, 10, 0) {
            Err(Error::Stability { radius, .. }) => assert!(radius > 1.0),
            other => panic!("expected stability error, got {other:?}"),
        }
    }

    #[test]
    fn restart_single_segment_matches_raw_stream() {
        let mut spec = white_spec(2);
        spec.a[0] = [-0.3, 0.0, 0.0];
        spec.b[1][0] = 0.6;
        let seg = restart_and_record(&spec, 1, 64, 9).unwrap();
        let raw = simulate_ar_raw(&spec, 64, 9, 0, None).unwrap();
        assert_eq!(seg.values, raw.values);
    }

    #[test]
    fn restart_segments_uncorrelated() {
        let spec = white_spec(1);
        let r = 10_000;
        let panel = restart_and_record(&spec, r, 4, 3).unwrap();
        // correlation of X(0) between consecutive segments
        let xs: Vec<f64> = (0..r - 1).map(|s| panel.get(s, 0, 0)).collect();
        let ys: Vec<f64> = (1..r).map(|s| panel.get(s, 0, 0)).collect();
        let m = (r - 1) as f64;
        let corr: f64 = xs.iter().zip(&ys).map(|(a, b)| a * b).sum::<f64>() / m;
        assert!(corr.abs() < 3.0 / m.sqrt(), "corr = {corr}");
    }

    #[test]
    fn intervention_forces_exact_sequence() {
        let mut spec = white_spec(3);
        spec.b[1][0] = 0.5;
        spec.b[2][1] = 0.5;
        let seq: Vec<f64> = (0..16).map(|t| if t < 8 { 1.0 } else { 0.0 }).collect();
        let iv = InterventionSpec {
            node: 1,
            sequence: seq.clone(),
        };
        let panel = restart_and_record_intervened(&spec, 20, 16, 5, Some(&iv)).unwrap();
        for seg in 0..20 {
            for t in 0..16 {
                assert_eq!(panel.get(seg, t, 1), seq[t]);
            }
        }
        // Length must divide the layout.
        let bad = InterventionSpec {
            node: 1,
            sequence: vec![1.0; 5],
        };
        assert!(restart_and_record_intervened(&spec, 2, 16, 5, Some(&bad)).is_err());
    }

    #[test]
    fn do_on_source_with_natural_path_is_identity() {
        let mut spec = white_spec(2);
        spec.b[1][0] = 0.7;
        spec.a[1] = [-0.2, 0.0, 0.0];
        let natural = restart_and_record(&spec, 3, 32, 11).unwrap();
        // Node 0 is a source: forcing it to its own realized path must
        // reproduce the identical panel (noise draws stay aligned).
        for seg in 0..3 {
            let path: Vec<f64> = (0..32).map(|t| natural.get(seg, t, 0)).collect();
            let iv = InterventionSpec {
                node: 0,
                sequence: path,
            };
            let mut rng = segment_rng(11, seg as u64);
            let vals = ar_run(&spec, 32, 0, &mut rng, Some(&iv));
            for t in 0..32 {
                for node in 0..2 {
                    assert!((vals[t * 2 + node] - natural.get(seg, t, node)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn circular_zero_noise_zero_panel() {
        let mut spec = sem2_spec(8, 0.5, 0.8, 0.3).unwrap();
        for row in spec.noise.diag.iter_mut() {
            for v in row.iter_mut() {
                *v = 1e-300;
            }
        }
        let panel = simulate_circular(&spec, 4, 2).unwrap();
        assert!(panel.values.iter().all(|&v| v.abs() < 1e-140));
    }

    #[test]
    fn circular_panels_are_deterministic_and_real() {
        let spec = sem2_spec(16, 0.5, 0.8, 0.3).unwrap();
        let a = simulate_circular(&spec, 10, 77).unwrap();
        let b = simulate_circular(&spec, 10, 77).unwrap();
        assert_eq!(a.values, b.values);
        assert!(a.all_finite());
    }

    #[test]
    fn panel_csv_round_trip() {
        let mut spec = white_spec(2);
        spec.b[1][0] = 0.4;
        let panel = restart_and_record(&spec, 3, 8, 21).unwrap();
        let dir = std::env::temp_dir().join("spectral_causal_test_csv");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("panel.csv");
        write_panel_csv(&panel, &path).unwrap();
        let back = read_panel_csv(&path).unwrap();
        assert_eq!(back.n, 2);
        assert_eq!(back.layout, panel.layout);
        assert_eq!(back.values, panel.values);
    }
}
