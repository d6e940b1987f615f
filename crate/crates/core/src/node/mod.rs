//! The photonic processing node: an injection-driven semiconductor laser
//! with an optional delayed optical feedback loop.
//!
//! The input stream is masked ([`mask_symbols`]), laid out in time according
//! to an [`EncodingMethod`] ([`schedule_drive`]), injected into the response
//! laser ([`simulate_laser`]) and sampled once per virtual node
//! ([`extract_states`]). With the loop closed the node is a time-delay
//! reservoir; with the loop open it is an extreme learning machine.

mod laser;
mod mask;
mod states;

pub use laser::{run_node, simulate_laser};
pub use mask::{build_mask, mask_symbols, normalize_unit, Mask};
pub use states::{extract_states, StateMatrix};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// How masked symbols are placed relative to the delay loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EncodingMethod {
    /// One masked symbol per delay, loop closed.
    #[serde(alias = "a")]
    A,
    /// One masked symbol per delay, loop open.
    #[serde(alias = "b")]
    B,
    /// `floor(tau / tau_m)` masked symbols per delay, loop closed.
    #[serde(alias = "c")]
    C,
    /// Contiguous masked symbols, loop open.
    #[serde(alias = "d")]
    D,
}

impl EncodingMethod {
    /// Whether each symbol is padded to a full delay.
    pub fn one_per_delay(self) -> bool {
        matches!(self, EncodingMethod::A | EncodingMethod::B)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EncodingMethod::A => "A",
            EncodingMethod::B => "B",
            EncodingMethod::C => "C",
            EncodingMethod::D => "D",
        }
    }
}

impl std::fmt::Display for EncodingMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Single-mode rate-equation parameters of the response laser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaserParams {
    pub bias_current_ma: f64,
    pub threshold_current_ma: f64,
    pub linewidth_enhancement: f64,
    pub photon_lifetime_ps: f64,
    pub carrier_lifetime_ns: f64,
    /// Differential gain, 1/s per carrier.
    pub differential_gain: f64,
    /// Gain compression per photon.
    pub gain_saturation: f64,
    /// Injection coupling rate, 1/s.
    pub injection_coupling: f64,
    /// Feedback coupling rate at unit power ratio, 1/s. The field coupling
    /// is this value times the square root of the feedback ratio.
    pub feedback_coupling: f64,
    /// Fraction of spontaneous emission into the lasing mode.
    pub spontaneous_emission: f64,
    pub emission_wavelength_nm: f64,
}

impl Default for LaserParams {
    fn default() -> Self {
        Self {
            bias_current_ma: 10.1,
            threshold_current_ma: 10.2,
            linewidth_enhancement: 3.0,
            photon_lifetime_ps: 2.0,
            carrier_lifetime_ns: 2.0,
            differential_gain: 1.5e4,
            gain_saturation: 1e-7,
            injection_coupling: 2.5e11,
            feedback_coupling: 2.5e11,
            spontaneous_emission: 1e-6,
            emission_wavelength_nm: 1545.5,
        }
    }
}

impl LaserParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("photon_lifetime_ps", self.photon_lifetime_ps),
            ("carrier_lifetime_ns", self.carrier_lifetime_ns),
            ("differential_gain", self.differential_gain),
            ("threshold_current_ma", self.threshold_current_ma),
            ("emission_wavelength_nm", self.emission_wavelength_nm),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, "must be positive"));
            }
        }
        for (name, v) in [
            ("bias_current_ma", self.bias_current_ma),
            ("gain_saturation", self.gain_saturation),
            ("injection_coupling", self.injection_coupling),
            ("feedback_coupling", self.feedback_coupling),
            ("spontaneous_emission", self.spontaneous_emission),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(name, "must be >= 0"));
            }
        }
        if !self.linewidth_enhancement.is_finite() {
            return Err(invalid("linewidth_enhancement", "must be finite"));
        }
        if self.bias_current_ma >= self.threshold_current_ma {
            log::warn!(
                "bias {} mA is at or above threshold {} mA; the node is a lasing oscillator",
                self.bias_current_ma,
                self.threshold_current_ma
            );
        }
        Ok(())
    }

    pub(crate) fn photon_energy(&self) -> f64 {
        const H: f64 = 6.626_070_15e-34;
        const C: f64 = 299_792_458.0;
        H * C / (self.emission_wavelength_nm * 1e-9)
    }
}

/// Operating point and layout of the node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NodeConfig {
    pub theta_ps: f64,
    pub tau_ns: f64,
    pub n_nodes: usize,
    /// Drive minus response frequency, GHz.
    pub delta_f_ghz: f64,
    /// Feedback power re-entering the laser over the power it emits.
    pub feedback_ratio: f64,
    pub feedback_phase: f64,
    pub loop_closed: bool,
    pub encoding: EncodingMethod,
    pub injection_power_uw: f64,
    /// Depth of the field modulation of the injected light.
    pub modulation_depth: f64,
    pub drive_bandwidth_ghz: f64,
    pub detection_bandwidth_ghz: f64,
    /// Additive detection noise, standard deviation relative to the mean
    /// detected intensity.
    pub detection_noise: f64,
    pub averages: usize,
    /// Integration steps per virtual node.
    pub substeps: usize,
    pub mask_seed: u64,
    pub noise_seed: u64,
}

impl Default for NodeConfig {
    fn default() -> Self {
        Self {
            theta_ps: 62.5,
            tau_ns: 24.5,
            n_nodes: 20,
            delta_f_ghz: -12.0,
            feedback_ratio: 0.0,
            feedback_phase: 0.0,
            loop_closed: false,
            encoding: EncodingMethod::D,
            injection_power_uw: 96.0,
            modulation_depth: 0.8,
            drive_bandwidth_ghz: 20.0,
            detection_bandwidth_ghz: 40.0,
            detection_noise: 5e-3,
            averages: 1,
            substeps: 16,
            mask_seed: 1,
            noise_seed: 7,
        }
    }
}

impl NodeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_ps > 0.0) || !(self.tau_ns > 0.0) {
            return Err(invalid("theta_ps", "theta and tau must be positive"));
        }
        self.slots_per_delay()?;
        if self.n_nodes < 2 || self.n_nodes % 2 != 0 {
            return Err(invalid("n_nodes", "must be even and >= 2"));
        }
        if !(0.0..=1.0).contains(&self.feedback_ratio) {
            return Err(invalid("feedback_ratio", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.modulation_depth) {
            return Err(invalid("modulation_depth", "must lie in [0, 1]"));
        }
        if !(self.injection_power_uw >= 0.0) {
            return Err(invalid("injection_power_uw", "must be >= 0"));
        }
        if !(self.drive_bandwidth_ghz > 0.0 && self.detection_bandwidth_ghz > 0.0) {
            return Err(invalid("drive_bandwidth_ghz", "bandwidths must be positive"));
        }
        if !(self.detection_noise >= 0.0) {
            return Err(invalid("detection_noise", "must be >= 0"));
        }
        if self.averages == 0 {
            return Err(invalid("averages", "must be >= 1"));
        }
        if self.substeps == 0 {
            return Err(invalid("substeps", "must be >= 1"));
        }
        if self.encoding.one_per_delay() && self.n_nodes > self.slots_per_delay()? {
            return Err(invalid("n_nodes", "masked symbol longer than the delay"));
        }
        Ok(())
    }

    pub fn theta(&self) -> f64 {
        self.theta_ps * 1e-12
    }

    pub fn tau(&self) -> f64 {
        self.tau_ns * 1e-9
    }

    /// Virtual nodes along the whole delay, `tau / theta`.
    pub fn slots_per_delay(&self) -> Result<usize> {
        slots(self.tau(), self.theta())
    }

    /// Duration of one masked symbol, `N theta`.
    pub fn masked_symbol_duration(&self) -> f64 {
        self.n_nodes as f64 * self.theta()
    }

    /// The feedback term is present in the equations.
    pub fn feedback_active(&self) -> bool {
        self.loop_closed && self.feedback_ratio > 0.0
    }
}

fn slots(tau: f64, theta: f64) -> Result<usize> {
    let r = tau / theta;
    let n = r.round();
    if !(n >= 1.0) || (r - n).abs() > 1e-6 * r.max(1.0) {
        return Err(invalid("tau_ns", format!("delay must be an integer number of node slots, got {r}")));
    }
    Ok(n as usize)
}

/// Layout information attached by [`schedule_drive`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub method: EncodingMethod,
    pub slots_per_delay: usize,
    /// Masked symbols per delay (1 for A/B).
    pub symbols_per_delay: usize,
}

/// Drive values at node granularity, one per slot of duration theta.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveWaveform {
    pub values: Vec<f64>,
    /// First slot of every symbol.
    pub symbol_boundaries: Vec<usize>,
    pub n_nodes: usize,
    pub schedule: Option<Schedule>,
}

impl DriveWaveform {
    pub fn symbols(&self) -> usize {
        self.symbol_boundaries.len()
    }

    pub fn duration(&self, theta: f64) -> f64 {
        self.values.len() as f64 * theta
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("drive", "non-finite drive value"));
        }
        if self.symbol_boundaries.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("drive", "symbol boundaries must be strictly increasing"));
        }
        if let Some(&last) = self.symbol_boundaries.last() {
            if last + self.n_nodes > self.values.len() {
                return Err(invalid("drive", "last symbol runs past the end of the drive"));
            }
        }
        Ok(())
    }
}

/// Place masked symbols in time. Idle slots carry zero drive.
///
/// * A, B: each masked symbol starts a new delay and is padded to `tau`.
/// * C: `n = floor(tau / tau_m)` symbols are packed back to back, then the
///   group is padded to `tau`.
/// * D: symbols are contiguous.
pub fn schedule_drive(masked: &DriveWaveform, method: EncodingMethod, tau: f64, theta: f64) -> Result<DriveWaveform> {
    masked.check()?;
    let t_slots = slots(tau, theta)?;
    let n = masked.n_nodes;
    if n == 0 {
        return Err(invalid("n_nodes", "must be positive"));
    }
    let per_delay = match method {
        EncodingMethod::A | EncodingMethod::B => {
            if n > t_slots {
                return Err(invalid(
                    "tau_ns",
                    format!("masked symbol ({n} slots) longer than the delay ({t_slots} slots)"),
                ));
            }
            1
        }
        EncodingMethod::C => {
            let k = t_slots / n;
            if k == 0 {
                return Err(invalid("tau_ns", "no masked symbol fits in the delay"));
            }
            k
        }
        EncodingMethod::D => 0,
    };
    let s = masked.symbols();
    let symbol = |k: usize| {
        let b = masked.symbol_boundaries[k];
        &masked.values[b..b + n]
    };
    let (values, boundaries) = if method == EncodingMethod::D {
        let mut v = Vec::with_capacity(s * n);
        (0..s).for_each(|k| v.extend_from_slice(symbol(k)));
        (v, (0..s).map(|k| k * n).collect())
    } else {
        let groups = s.div_ceil(per_delay);
        let mut v = vec![0.0; groups * t_slots];
        let mut b = Vec::with_capacity(s);
        for k in 0..s {
            let start = (k / per_delay) * t_slots + (k % per_delay) * n;
            v[start..start + n].copy_from_slice(symbol(k));
            b.push(start);
        }
        (v, b)
    };
    Ok(DriveWaveform {
        values,
        symbol_boundaries: boundaries,
        n_nodes: n,
        schedule: Some(Schedule {
            method,
            slots_per_delay: t_slots,
            symbols_per_delay: per_delay.max(1),
        }),
    })
}
