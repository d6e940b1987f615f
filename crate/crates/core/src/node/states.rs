use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{DriveWaveform, NodeConfig};
use crate::error::{invalid, Error, Result};
use crate::signal::SampledSignal;

/// Virtual-node responses, one row per symbol, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl StateMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(invalid("states", "non-finite entry"));
        }
        Ok(Self { rows, cols, data })
    }

    /// Build from rows of equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(invalid("states", "ragged rows"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Keep a contiguous range of rows.
    pub fn slice_rows(&self, start: usize, end: usize) -> Self {
        Self {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }
}

/// Whether the node starts every symbol from the idle state (one symbol per
/// delay and no feedback term).
pub(crate) fn resets_at_symbols(drive: &DriveWaveform, nc: &NodeConfig) -> bool {
    drive.schedule.is_some_and(|s| s.method.one_per_delay()) && !nc.feedback_active()
}

/// Photoreceiver: first-order low-pass on the fine-grid intensity, sampled at
/// the end of every virtual-node slot that belongs to a symbol.
pub(crate) struct Detector {
    c: f64,
    y: f64,
    substeps: usize,
    n_nodes: usize,
    boundaries: Vec<usize>,
    symbol: usize,
    node: usize,
    next_sample: usize,
    out: Vec<f64>,
}

impl Detector {
    pub(crate) fn new(drive: &DriveWaveform, nc: &NodeConfig) -> Result<Self> {
        drive.check()?;
        let h = nc.theta() / nc.substeps as f64;
        let tau = 1.0 / (2.0 * std::f64::consts::PI * nc.detection_bandwidth_ghz * 1e9);
        let mut d = Self {
            c: 1.0 - (-h / tau).exp(),
            y: 0.0,
            substeps: nc.substeps,
            n_nodes: drive.n_nodes,
            boundaries: drive.symbol_boundaries.clone(),
            symbol: 0,
            node: 0,
            next_sample: usize::MAX,
            out: Vec::with_capacity(drive.symbols() * drive.n_nodes),
        };
        d.next_sample = d.sample_step();
        Ok(d)
    }

    fn sample_step(&self) -> usize {
        match self.boundaries.get(self.symbol) {
            Some(b) => (b + self.node + 1) * self.substeps - 1,
            None => usize::MAX,
        }
    }

    #[inline]
    pub(crate) fn push(&mut self, step: usize, intensity: f64, reset: bool) {
        if step == 0 || reset {
            self.y = intensity;
        } else {
            self.y += self.c * (intensity - self.y);
        }
        if step == self.next_sample {
            self.out.push(self.y);
            self.node += 1;
            if self.node == self.n_nodes {
                self.node = 0;
                self.symbol += 1;
            }
            self.next_sample = self.sample_step();
        }
    }

    pub(crate) fn into_clean(self) -> StateMatrix {
        let rows = self.out.len() / self.n_nodes.max(1);
        StateMatrix {
            rows,
            cols: self.n_nodes,
            data: self.out,
        }
    }
}

/// Add detection noise, average over `nc.averages` independent realizations
/// and clamp at zero.
pub(crate) fn finish_states(clean: StateMatrix, nc: &NodeConfig) -> Result<StateMatrix> {
    if clean.data.iter().any(|v| !v.is_finite()) {
        return Err(invalid("states", "non-finite detected intensity"));
    }
    let mean = if clean.data.is_empty() {
        0.0
    } else {
        clean.data.iter().sum::<f64>() / clean.data.len() as f64
    };
    let sigma = nc.detection_noise * mean;
    let mut data = clean.data;
    if sigma > 0.0 {
        let mut acc = vec![0.0; data.len()];
        for run in 0..nc.averages {
            let seed = nc
                .noise_seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(run as u64 + 1);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for (a, v) in acc.iter_mut().zip(&data) {
                let z: f64 = StandardNormal.sample(&mut rng);
                *a += v + sigma * z;
            }
        }
        let inv = 1.0 / nc.averages as f64;
        data = acc.into_iter().map(|a| a * inv).collect();
    }
    data.iter_mut().for_each(|v| *v = v.max(0.0));
    Ok(StateMatrix {
        rows: clean.rows,
        cols: clean.cols,
        data,
    })
}

/// Sample the node response once per virtual node. `intensity` is the fine
/// trace from [`super::simulate_laser`] for the same schedule.
pub fn extract_states(intensity: &SampledSignal, nc: &NodeConfig, schedule: &DriveWaveform) -> Result<StateMatrix> {
    nc.validate()?;
    let expected = schedule.values.len() * nc.substeps;
    if intensity.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            found: intensity.len(),
        });
    }
    let resets = resets_at_symbols(schedule, nc);
    let mut det = Detector::new(schedule, nc)?;
    let mut next = 0usize;
    for (i, &s) in intensity.samples.iter().enumerate() {
        let mut reset = false;
        if resets && next < schedule.symbol_boundaries.len() && i == schedule.symbol_boundaries[next] * nc.substeps {
            reset = true;
            next += 1;
        }
        det.push(i, s, reset);
    }
    finish_states(det.into_clean(), nc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn contiguous(symbols: usize, n: usize) -> DriveWaveform {
        DriveWaveform {
            values: vec![0.5; symbols * n],
            symbol_boundaries: (0..symbols).map(|k| k * n).collect(),
            n_nodes: n,
            schedule: None,
        }
    }

    fn constant(symbols: usize, n: usize, nc: &NodeConfig, c: f64) -> SampledSignal {
        SampledSignal::new(vec![c; symbols * n * nc.substeps], nc.substeps as f64 / nc.theta()).unwrap()
    }

    #[test]
    fn shape_is_symbols_by_nodes() {
        let nc = NodeConfig {
            detection_noise: 0.0,
            ..NodeConfig::default()
        };
        let d = contiguous(100, 20);
        let s = extract_states(&constant(100, 20, &nc, 2.5), &nc, &d).unwrap();
        assert_eq!((s.rows(), s.cols()), (100, 20));
        assert!(s.as_slice().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn length_mismatch_rejected() {
        let nc = NodeConfig::default();
        let d = contiguous(10, 20);
        let short = SampledSignal::new(vec![1.0; 10], 1.0).unwrap();
        assert!(matches!(extract_states(&short, &nc, &d), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn samples_at_slot_ends() {
        let nc = NodeConfig {
            detection_noise: 0.0,
            detection_bandwidth_ghz: 1e9, // effectively no filtering
            n_nodes: 2,
            substeps: 4,
            ..NodeConfig::default()
        };
        let d = contiguous(2, 2);
        let trace: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let s = extract_states(&SampledSignal::new(trace, 1.0).unwrap(), &nc, &d).unwrap();
        assert_eq!(s.as_slice(), &[3.0, 7.0, 11.0, 15.0]);
    }

    #[test]
    fn averaging_reduces_noise_by_root_n() {
        let sigma_rel = 0.01;
        let c = 100.0;
        let d = contiguous(50, 20);
        let spread = |averages: usize| {
            let mut dev = Vec::new();
            for seed in 0..100 {
                let nc = NodeConfig {
                    detection_noise: sigma_rel,
                    averages,
                    noise_seed: seed,
                    ..NodeConfig::default()
                };
                let s = extract_states(&constant(50, 20, &nc, c), &nc, &d).unwrap();
                dev.extend(s.as_slice().iter().map(|v| v - c));
            }
            (dev.iter().map(|v| v * v).sum::<f64>() / dev.len() as f64).sqrt()
        };
        let one = spread(1);
        let four = spread(4);
        assert!((one / (sigma_rel * c) - 1.0).abs() < 0.1, "{one}");
        assert!((four / (sigma_rel * c / 2.0) - 1.0).abs() < 0.1, "{four}");
    }

    #[test]
    fn entries_are_nonnegative() {
        let nc = NodeConfig {
            detection_noise: 5.0,
            ..NodeConfig::default()
        };
        let d = contiguous(20, 20);
        let s = extract_states(&constant(20, 20, &nc, 1.0), &nc, &d).unwrap();
        assert!(s.as_slice().iter().all(|&v| v >= 0.0));
    }
}
