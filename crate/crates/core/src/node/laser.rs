use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::states::{finish_states, Detector};
use super::{DriveWaveform, LaserParams, NodeConfig, StateMatrix};
use crate::error::{invalid, Error, Result};
use crate::signal::SampledSignal;

const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Intensity limit relative to the injected photon number.
const BLOWUP_FACTOR: f64 = 1e6;

/// Rate equations in the frame of the drive laser, photon-number units:
///
/// ```text
/// dE/dt = 1/2 (1 + i a) (G - 1/tp) E - i 2 pi df E + k a_inj(t) + kf e^{-i phi} E(t - tau)
/// dN/dt = I/q - N/tn - G |E|^2,        G = gn (N - N0) / (1 + eps |E|^2)
/// ```
///
/// `N0` follows from the threshold current: `N_th = I_th tn / q` and
/// `gn (N_th - N0) = 1/tp`.
#[derive(Debug, Clone)]
struct Model {
    alpha: f64,
    inv_tp: f64,
    inv_tn: f64,
    gn: f64,
    n0: f64,
    eps: f64,
    pump: f64,
    k_inj: f64,
    a_inj: f64,
    depth: f64,
    dw: f64,
    kf: Complex64,
    beta_sp: f64,
    h: f64,
    drive_decay_half: f64,
    drive_decay_full: f64,
    limit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct State {
    e: Complex64,
    n: f64,
    /// Electrical drive after the modulator bandwidth limit.
    u: f64,
}

impl Model {
    fn new(lp: &LaserParams, nc: &NodeConfig) -> Result<Self> {
        lp.validate()?;
        nc.validate()?;
        let tp = lp.photon_lifetime_ps * 1e-12;
        let tn = lp.carrier_lifetime_ns * 1e-9;
        let n_th = lp.threshold_current_ma * 1e-3 * tn / ELEMENTARY_CHARGE;
        let n0 = n_th - 1.0 / (lp.differential_gain * tp);
        let s_inj = nc.injection_power_uw * 1e-6 * tp / lp.photon_energy();
        let h = nc.theta() / nc.substeps as f64;
        let tau_d = 1.0 / (2.0 * std::f64::consts::PI * nc.drive_bandwidth_ghz * 1e9);
        let kf = if nc.feedback_active() {
            Complex64::from_polar(lp.feedback_coupling * nc.feedback_ratio.sqrt(), -nc.feedback_phase)
        } else {
            Complex64::new(0.0, 0.0)
        };
        Ok(Self {
            alpha: lp.linewidth_enhancement,
            inv_tp: 1.0 / tp,
            inv_tn: 1.0 / tn,
            gn: lp.differential_gain,
            n0,
            eps: lp.gain_saturation,
            pump: lp.bias_current_ma * 1e-3 / ELEMENTARY_CHARGE,
            k_inj: lp.injection_coupling,
            a_inj: s_inj.sqrt(),
            depth: nc.modulation_depth,
            dw: 2.0 * std::f64::consts::PI * nc.delta_f_ghz * 1e9,
            kf,
            beta_sp: lp.spontaneous_emission,
            h,
            drive_decay_half: (-0.5 * h / tau_d).exp(),
            drive_decay_full: (-h / tau_d).exp(),
            limit: BLOWUP_FACTOR * s_inj.max(1.0),
        })
    }

    #[inline]
    fn injected(&self, u: f64) -> f64 {
        self.a_inj * (1.0 - self.depth + 2.0 * self.depth * u)
    }

    #[inline]
    fn rhs(&self, e: Complex64, n: f64, ain: f64, efb: Complex64) -> (Complex64, f64) {
        let s = e.norm_sqr();
        let g = self.gn * (n - self.n0) / (1.0 + self.eps * s);
        let net = 0.5 * (g - self.inv_tp);
        let de = Complex64::new(net, self.alpha * net - self.dw) * e + self.k_inj * ain + self.kf * efb;
        let dn = self.pump - n * self.inv_tn - g * s;
        (de, dn)
    }

    /// One RK4 step with the drive relaxing exactly towards `target`.
    /// `fb` holds the delayed field at the start, middle and end of the step.
    #[inline]
    fn step(&self, st: State, target: f64, fb: [Complex64; 3]) -> State {
        let h = self.h;
        let u_mid = target + (st.u - target) * self.drive_decay_half;
        let u_end = target + (st.u - target) * self.drive_decay_full;
        let (a0, a1, a2) = (self.injected(st.u), self.injected(u_mid), self.injected(u_end));
        let (k1e, k1n) = self.rhs(st.e, st.n, a0, fb[0]);
        let (k2e, k2n) = self.rhs(st.e + k1e * (0.5 * h), st.n + k1n * 0.5 * h, a1, fb[1]);
        let (k3e, k3n) = self.rhs(st.e + k2e * (0.5 * h), st.n + k2n * 0.5 * h, a1, fb[1]);
        let (k4e, k4n) = self.rhs(st.e + k3e * h, st.n + k3n * h, a2, fb[2]);
        State {
            e: st.e + (k1e + k2e * 2.0 + k3e * 2.0 + k4e) * (h / 6.0),
            n: st.n + (k1n + 2.0 * k2n + 2.0 * k3n + k4n) * (h / 6.0),
            u: u_end,
        }
    }

    /// State reached after a long stretch of zero drive, starting from the
    /// solitary steady state. Noise-free and feedback-free.
    fn idle_state(&self, slots: usize, substeps: usize) -> State {
        let mut st = State {
            e: Complex64::new(0.0, 0.0),
            n: self.pump / self.inv_tn,
            u: 0.0,
        };
        let zero = [Complex64::new(0.0, 0.0); 3];
        for _ in 0..slots * substeps {
            st = self.step(st, 0.0, zero);
        }
        st
    }
}

/// Drives the integration slot by slot and hands every fine-grid intensity
/// sample to a sink.
pub(crate) struct Integrator {
    model: Model,
    substeps: usize,
    delay_steps: usize,
    history: Vec<Complex64>,
    reset_slots: Option<Vec<usize>>,
    idle: State,
    delta_f_ghz: f64,
    feedback_ratio: f64,
    noise_seed: u64,
}

impl Integrator {
    pub(crate) fn new(drive: &DriveWaveform, lp: &LaserParams, nc: &NodeConfig) -> Result<Self> {
        drive.check()?;
        if drive.n_nodes != nc.n_nodes {
            return Err(invalid(
                "n_nodes",
                format!("drive has {} nodes per symbol, config {}", drive.n_nodes, nc.n_nodes),
            ));
        }
        let model = Model::new(lp, nc)?;
        let t_slots = nc.slots_per_delay()?;
        let tn_slots = (10.0 * lp.carrier_lifetime_ns * 1e-9 / nc.theta()).ceil() as usize;
        let idle = model.idle_state(t_slots.max(tn_slots), nc.substeps);
        let delay_steps = t_slots * nc.substeps;
        let reset_slots = reset_points(drive, lp, nc);
        let history = if nc.feedback_active() {
            vec![idle.e; delay_steps + 1]
        } else {
            Vec::new()
        };
        Ok(Self {
            model,
            substeps: nc.substeps,
            delay_steps,
            history,
            reset_slots,
            idle,
            delta_f_ghz: nc.delta_f_ghz,
            feedback_ratio: nc.feedback_ratio,
            noise_seed: nc.noise_seed,
        })
    }

    #[cfg(test)]
    pub(crate) fn history_mut(&mut self) -> &mut Vec<Complex64> {
        &mut self.history
    }

    /// Integrate over the whole drive. The sink receives the global step
    /// index, the intensity at the end of that step, and whether the node was
    /// reset at the start of that step.
    pub(crate) fn run<F: FnMut(usize, f64, bool)>(&mut self, drive: &[f64], mut sink: F) -> Result<()> {
        let m = self.model.clone();
        let mut st = self.idle;
        let mut rng = ChaCha8Rng::seed_from_u64(self.noise_seed);
        let noise_on = m.beta_sp > 0.0;
        let feedback = m.kf != Complex64::new(0.0, 0.0);
        let d = self.delay_steps;
        let mut next_reset = 0usize;
        let mut step_index = 0usize;
        for (slot, &target) in drive.iter().enumerate() {
            let mut reset_now = false;
            if let Some(resets) = &self.reset_slots {
                if next_reset < resets.len() && resets[next_reset] == slot {
                    st = self.idle;
                    reset_now = true;
                    next_reset += 1;
                }
            }
            for sub in 0..self.substeps {
                let i = step_index;
                let fb = if feedback {
                    // E_k lives in history[k % (d + 1)]; E_{i-d} and E_{i+1-d} are needed
                    let e0 = self.history[(i + 1) % (d + 1)];
                    let e1 = self.history[(i + 2) % (d + 1)];
                    [e0, 0.5 * (e0 + e1), e1]
                } else {
                    [Complex64::new(0.0, 0.0); 3]
                };
                st = m.step(st, target, fb);
                if noise_on {
                    let amp = (m.beta_sp * st.n.max(0.0) * m.inv_tn * m.h * 0.5).sqrt();
                    let (xr, xi): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
                    st.e += Complex64::new(xr, xi) * amp;
                }
                let s = st.e.norm_sqr();
                if !s.is_finite() || s > m.limit || !st.n.is_finite() {
                    return Err(Error::Instability {
                        time_s: (i + 1) as f64 * m.h,
                        intensity: s,
                        limit: m.limit,
                        delta_f_ghz: self.delta_f_ghz,
                        feedback_ratio: self.feedback_ratio,
                    });
                }
                if feedback {
                    self.history[(i + 1) % (d + 1)] = st.e;
                }
                sink(i, s, reset_now && sub == 0);
                step_index += 1;
            }
        }
        Ok(())
    }
}

/// Slots at which the node is returned to its idle state. Only one-per-delay
/// layouts without feedback are reset: each symbol then meets a fully relaxed
/// laser.
fn reset_points(drive: &DriveWaveform, lp: &LaserParams, nc: &NodeConfig) -> Option<Vec<usize>> {
    let sched = drive.schedule?;
    if !sched.method.one_per_delay() || nc.feedback_active() {
        return None;
    }
    let idle = (sched.slots_per_delay - drive.n_nodes) as f64 * nc.theta();
    if idle < 5.0 * lp.carrier_lifetime_ns * 1e-9 {
        log::warn!(
            "idle padding of {:.2} ns is shorter than 5 carrier lifetimes; symbols are still treated as independent",
            idle * 1e9
        );
    }
    Some(drive.symbol_boundaries.clone())
}

/// Integrate the node over the drive and return `|E|^2` (photon number) on
/// the integration grid, `substeps` samples per virtual node. Sample `i` is
/// the intensity at the end of step `i`.
pub fn simulate_laser(drive: &DriveWaveform, lp: &LaserParams, nc: &NodeConfig) -> Result<SampledSignal> {
    let mut integ = Integrator::new(drive, lp, nc)?;
    let mut out = Vec::with_capacity(drive.values.len() * nc.substeps);
    integ.run(&drive.values, |_, s, _| out.push(s))?;
    SampledSignal::new(out, nc.substeps as f64 / nc.theta())
}

/// Integration and state extraction in one pass, without storing the fine
/// trace. Identical to `extract_states(simulate_laser(..))`.
pub fn run_node(drive: &DriveWaveform, lp: &LaserParams, nc: &NodeConfig) -> Result<StateMatrix> {
    let mut integ = Integrator::new(drive, lp, nc)?;
    let mut det = Detector::new(drive, nc)?;
    integ.run(&drive.values, |i, s, reset| det.push(i, s, reset))?;
    finish_states(det.into_clean(), nc)
}
