//! The ten acceptance criteria. Each test writes one PASS/FAIL line to
//! stderr (bypassing the harness capture) and then asserts. The tests take
//! a shared lock so runtimes are measured without contention.

use std::io::Write;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use photonic_link::benchmarks::{kk_receiver_pipeline, memory_capacity, KkConfig};
use photonic_link::channel::{propagate_ssmf, FiberParams, LinkConfig};
use photonic_link::experiment::{parse_config, run_file, RunOptions};
use photonic_link::link::{receive, simulate_link, transmit_and_propagate, LinkSeeds, Received};
use photonic_link::node::{
    build_mask, mask_symbols, run_node, schedule_drive, EncodingMethod, LaserParams, NodeConfig, StateMatrix,
};
use photonic_link::readout::{train_ridge, FeatureMatrix, SplitSpec};
use photonic_link::signal::{ComplexEnvelope, SampledSignal};
use photonic_link::task::{evaluate, node_states, Mode, ReadoutConfig};
use photonic_link::transmitter::{check_minimum_phase, TxConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|p| p.into_inner())
}

fn verdict(n: usize, name: &str, pass: bool, detail: &str) {
    let line = format!("[{}] criterion {n:>2} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

fn gaussian(t0: f64, fs: f64, n: usize, peak_w: f64) -> ComplexEnvelope {
    let samples = (0..n)
        .map(|i| {
            let t = (i as f64 - n as f64 / 2.0) / fs;
            Complex64::new(peak_w.sqrt() * (-t * t / (2.0 * t0 * t0)).exp(), 0.0)
        })
        .collect();
    ComplexEnvelope::new(samples, fs, 0.0).unwrap()
}

fn rms_width(e: &ComplexEnvelope) -> f64 {
    let p: Vec<f64> = e.samples.iter().map(|c| c.norm_sqr()).collect();
    let total: f64 = p.iter().sum();
    let t = |i: usize| i as f64 / e.sample_rate;
    let mean: f64 = p.iter().enumerate().map(|(i, w)| w * t(i)).sum::<f64>() / total;
    (p.iter().enumerate().map(|(i, w)| w * (t(i) - mean).powi(2)).sum::<f64>() / total).sqrt()
}

#[test]
fn c01_dispersion_oracle() {
    let _g = serial();
    let start = Instant::now();
    let (t0, beta2, length) = (10e-12, -21.7, 100.0);
    let input = gaussian(t0, 1e12, 16384, 1e-3);
    let fiber = FiberParams {
        length_km: length,
        beta2_ps2_per_km: beta2,
        gamma_per_w_km: 0.0,
        alpha_db_per_km: 0.0,
        step_km: 1.0,
        check_convergence: false,
    };
    let out = propagate_ssmf(&input, &fiber).unwrap();
    let elapsed = start.elapsed();
    let ld = (t0 * 1e12).powi(2) / beta2.abs();
    let expected = (1.0 + (length / ld).powi(2)).sqrt();
    let measured = rms_width(&out) / rms_width(&input);
    let rel = (measured / expected - 1.0).abs();
    verdict(
        1,
        "dispersion broadening",
        rel < 5e-3 && elapsed < Duration::from_secs(5),
        &format!("T1/T0 = {measured:.5} vs {expected:.5} (rel {rel:.2e}), {:.2} s", elapsed.as_secs_f64()),
    );
}

#[test]
fn c02_spm_oracle() {
    let _g = serial();
    let (gamma, p0, length) = (1.3, 10e-3, 100.0);
    let input = gaussian(20e-12, 1e12, 4096, p0);
    let fiber = FiberParams {
        length_km: length,
        beta2_ps2_per_km: 0.0,
        gamma_per_w_km: gamma,
        alpha_db_per_km: 0.0,
        step_km: 0.5,
        check_convergence: false,
    };
    let out = propagate_ssmf(&input, &fiber).unwrap();
    let peak = input.samples.len() / 2;
    let phase = (out.samples[peak] / input.samples[peak]).arg();
    let expected = gamma * p0 * length;
    let rel = (phase / expected - 1.0).abs();
    verdict(
        2,
        "self-phase modulation",
        rel < 5e-3,
        &format!("peak phase {phase:.6} rad vs {expected:.6} rad (rel {rel:.2e})"),
    );
}

/// Gauss-Jordan with partial pivoting on `(X'X + lambda I) w = X'y`.
fn normal_equations(x: &[Vec<f64>], y: &[f64], lambda: f64) -> Vec<f64> {
    let p = x[0].len();
    let mut a = vec![vec![0.0; p + 1]; p];
    for (row, &yi) in x.iter().zip(y) {
        for i in 0..p {
            for j in 0..p {
                a[i][j] += row[i] * row[j];
            }
            a[i][p] += row[i] * yi;
        }
    }
    for (i, r) in a.iter_mut().enumerate() {
        r[i] += lambda;
    }
    for c in 0..p {
        let piv = (c..p).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        let d = a[c][c];
        a[c].iter_mut().for_each(|v| *v /= d);
        for r in 0..p {
            if r != c {
                let f = a[r][c];
                let pivot_row = a[c].clone();
                a[r].iter_mut().zip(&pivot_row).for_each(|(v, pv)| *v -= f * pv);
            }
        }
    }
    a.iter().map(|r| r[p]).collect()
}

#[test]
fn c03_ridge_oracle() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x: Vec<Vec<f64>> = (0..50).map(|_| (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let y: Vec<f64> = (0..50).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let lambda = rng.gen_range(0.0..1.0);
        let model = train_ridge(&FeatureMatrix::from_rows(&x).unwrap(), &y, lambda).unwrap();
        let oracle = normal_equations(&x, &y, lambda);
        for (a, b) in model.weights.iter().zip(&oracle) {
            worst = worst.max((a - b).abs());
        }
    }
    verdict(3, "ridge regression", worst < 1e-8, &format!("max |dw| = {worst:.2e} over 100 problems"));
}

fn ideal_tx() -> TxConfig {
    TxConfig {
        dac_enob: f64::INFINITY,
        ..TxConfig::default()
    }
}

fn ideal_link(osnr: f64) -> LinkConfig {
    LinkConfig {
        target_osnr_db: osnr,
        adc_enob: f64::INFINITY,
        ..LinkConfig::default()
    }
}

#[test]
fn c04_kk_loopback() {
    let _g = serial();
    let split = SplitSpec::reduced();
    // 12 dB keeps the field minimum-phase after 100 km of dispersion
    let tx = TxConfig {
        cspr_db: 12.0,
        ..ideal_tx()
    };
    let seeds = LinkSeeds::from_seed(1);
    let b2b = FiberParams {
        length_km: 0.0,
        ..FiberParams::default()
    };
    let quiet = ideal_link(f64::INFINITY);
    let p0 = transmit_and_propagate(&tx, &b2b, &quiet, &split, &seeds).unwrap();
    let rx0 = receive(&p0, &tx, &quiet, &seeds).unwrap();
    let ber0 = kk_receiver_pipeline(&rx0.detected, &KkConfig::default(), &rx0.symbols, &rx0.split).unwrap();

    let linear = FiberParams {
        gamma_per_w_km: 0.0,
        ..FiberParams::default()
    };
    let noisy = ideal_link(35.0);
    let p100 = transmit_and_propagate(&tx, &linear, &noisy, &split, &seeds).unwrap();
    let winding = check_minimum_phase(&p0.field) + check_minimum_phase(&p100.field);
    let rx100 = receive(&p100, &tx, &noisy, &seeds).unwrap();
    let kk100 = KkConfig {
        cd_length: linear.length_km,
        cd_beta2: linear.beta2_ps2_per_km,
        ..KkConfig::default()
    };
    let ber100 = kk_receiver_pipeline(&rx100.detected, &kk100, &rx100.symbols, &rx100.split).unwrap();
    verdict(
        4,
        "KK loopback",
        winding == 0 && ber0.bit_errors == 0 && ber100.bit_errors == 0,
        &format!(
            "winding {winding}; 0 km noiseless {} / {} errors; 100 km linear, OSNR 35 dB, CD compensated {} / {} errors",
            ber0.bit_errors, ber0.bits, ber100.bit_errors, ber100.bits
        ),
    );
}

fn drive_states(x: &[f64], nc: &NodeConfig) -> StateMatrix {
    let mask = build_mask(nc.n_nodes, nc.mask_seed).unwrap();
    let masked = mask_symbols(&SampledSignal::new(x.to_vec(), 1.0).unwrap(), &mask).unwrap();
    let drive = schedule_drive(&masked, nc.encoding, nc.tau(), nc.theta()).unwrap();
    run_node(&drive, &LaserParams::default(), nc).unwrap()
}

#[test]
fn c05_elm_is_zero_feedback_tdrc() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x: Vec<f64> = (0..2 * 300).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mut identical = true;
    for method in [EncodingMethod::A, EncodingMethod::B, EncodingMethod::C, EncodingMethod::D] {
        let open = NodeConfig {
            encoding: method,
            loop_closed: false,
            feedback_ratio: 0.0,
            ..NodeConfig::default()
        };
        let closed = NodeConfig {
            loop_closed: true,
            ..open.clone()
        };
        identical &= drive_states(&x, &open) == drive_states(&x, &closed);
    }
    let signal = SampledSignal::new(x, 112e9).unwrap();
    let nc = NodeConfig::default();
    let lp = LaserParams::default();
    let elm = node_states(&signal, &Mode::Elm.node_config(&nc), &lp).unwrap();
    let tdrc = node_states(&signal, &Mode::Tdrc.node_config(&nc), &lp).unwrap();
    identical &= elm == tdrc;
    verdict(
        5,
        "open loop equals closed loop at zero feedback",
        identical,
        if identical {
            "state matrices bit-identical for encodings A-D and both modes"
        } else {
            "state matrices differ"
        },
    );
}

#[test]
fn c06_memory_capacity_ordering() {
    let _g = serial();
    let start = Instant::now();
    let lp = LaserParams::default();
    let (m_max, record) = (10, 5000);
    let results: Vec<(f64, f64)> = (1..=20u64)
        .into_par_iter()
        .map(|seed| {
            let base = NodeConfig {
                mask_seed: seed,
                noise_seed: seed,
                ..NodeConfig::default()
            };
            let closed = NodeConfig {
                encoding: EncodingMethod::A,
                loop_closed: true,
                feedback_ratio: 0.0035,
                ..base.clone()
            };
            let open = NodeConfig {
                encoding: EncodingMethod::D,
                loop_closed: false,
                ..base
            };
            let c = memory_capacity(&closed, &lp, m_max, record, seed).unwrap().mc;
            let o = memory_capacity(&open, &lp, m_max, record, seed).unwrap().mc;
            (c, o)
        })
        .collect();
    let elapsed = start.elapsed();
    let closed: Vec<f64> = results.iter().map(|r| r.0).collect();
    let open: Vec<f64> = results.iter().map(|r| r.1).collect();
    let (mc, mo) = (median(&closed), median(&open));
    let pass = mc - mo >= 0.2 && mo >= 1.0 && elapsed < Duration::from_secs(600);
    verdict(
        6,
        "memory capacity ordering",
        pass,
        &format!(
            "median MC closed (ratio 0.0035) {mc:.3}, open {mo:.3}, separation {:.3} (need >= 0.2, open >= 1), {:.0} s",
            mc - mo,
            elapsed.as_secs_f64()
        ),
    );
}

fn link_at(osnr: f64, seed: u64) -> Received {
    let link = LinkConfig {
        target_osnr_db: osnr,
        ..LinkConfig::default()
    };
    simulate_link(&TxConfig::default(), &FiberParams::default(), &link, &SplitSpec::reduced(), seed).unwrap()
}

fn log10_ber(mode: Mode, rx: &Received, n_nodes: usize, mask_seed: u64) -> f64 {
    let nc = NodeConfig {
        n_nodes,
        mask_seed,
        noise_seed: mask_seed,
        ..NodeConfig::default()
    };
    evaluate(mode, rx, &nc, &LaserParams::default(), &KkConfig::default(), &ReadoutConfig::default())
        .unwrap()
        .ber
        .log10_ber_or_bound()
}

#[test]
fn c07_end_to_end_trend() {
    let _g = serial();
    let start = Instant::now();
    let osnrs = [28.0, 32.0, 35.9];
    let seeds: Vec<u64> = (1..=5).collect();
    // [osnr][method] -> per-seed log10 BER; methods raw, ELM N=20, ELM N=24
    let grid: Vec<Vec<Vec<f64>>> = osnrs
        .iter()
        .map(|&osnr| {
            let per_seed: Vec<[f64; 3]> = seeds
                .par_iter()
                .map(|&s| {
                    let rx = link_at(osnr, s);
                    [
                        log10_ber(Mode::RawLr, &rx, 20, s),
                        log10_ber(Mode::Elm, &rx, 20, s),
                        log10_ber(Mode::Elm, &rx, 24, s),
                    ]
                })
                .collect();
            (0..3).map(|m| per_seed.iter().map(|r| r[m]).collect()).collect()
        })
        .collect();
    let elapsed = start.elapsed();
    let med: Vec<[f64; 3]> = grid.iter().map(|g| [median(&g[0]), median(&g[1]), median(&g[2])]).collect();
    let top = med[osnrs.len() - 1];
    let ordered = top[0] > top[1] && top[1] > top[2];
    let monotone = (0..3).all(|m| med.windows(2).all(|w| w[1][m] <= w[0][m]));
    let table: Vec<String> = osnrs
        .iter()
        .zip(&med)
        .map(|(o, m)| format!("{o} dB: raw {:.3} elm20 {:.3} elm24 {:.3}", m[0], m[1], m[2]))
        .collect();
    verdict(
        7,
        "end-to-end trend",
        ordered && monotone && elapsed < Duration::from_secs(3600),
        &format!(
            "median log10 BER [{}]; ordering {}, OSNR monotone {}, {:.0} s",
            table.join("; "),
            ordered,
            monotone,
            elapsed.as_secs_f64()
        ),
    );
}

/// Relative RMS change of row `k` after replacing symbol `k - lag`.
fn influence(nc: &NodeConfig, lag: usize) -> f64 {
    let (symbols, k) = (48, 40);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x: Vec<f64> = (0..2 * symbols).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mut y = x.clone();
    let j = k - lag;
    y[2 * j] = 1.0 - x[2 * j];
    y[2 * j + 1] = 1.0 - x[2 * j + 1];
    let (a, b) = (drive_states(&x, nc), drive_states(&y, nc));
    let diff: f64 = a.row(k).iter().zip(b.row(k)).map(|(p, q)| (p - q).powi(2)).sum();
    let norm: f64 = a.row(k).iter().map(|p| p * p).sum();
    (diff / norm).sqrt()
}

#[test]
fn c08_encoding_connectivity() {
    let _g = serial();
    let cfg = |encoding, loop_closed, feedback_ratio| NodeConfig {
        encoding,
        loop_closed,
        feedback_ratio,
        detection_noise: 0.0,
        ..NodeConfig::default()
    };
    let a_closed = influence(&cfg(EncodingMethod::A, true, 0.0011), 1);
    let b_open = influence(&cfg(EncodingMethod::B, false, 0.0), 1);
    let c_closed = influence(&cfg(EncodingMethod::C, true, 0.0035), 19);
    let d_open_far = influence(&cfg(EncodingMethod::D, false, 0.0), 19);
    let d_open_near = influence(&cfg(EncodingMethod::D, false, 0.0), 1);
    let pass = b_open == 0.0 && a_closed > 1e-2 && c_closed > 1e-2 && d_open_far < 1e-12 && d_open_near > 1e-2;
    verdict(
        8,
        "encoding connectivity",
        pass,
        &format!(
            "k-1 -> k: A closed {a_closed:.2e}, B open {b_open:.1e}; k-19 -> k: C closed {c_closed:.2e}, D open {d_open_far:.1e} (k-1: {d_open_near:.2e})"
        ),
    );
}

#[test]
fn c09_mask_sensitivity() {
    let _g = serial();
    let rx = link_at(35.9, 1);
    let bers: Vec<f64> = (1..=8u64).into_par_iter().map(|m| log10_ber(Mode::Elm, &rx, 20, m)).collect();
    let lo = bers.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = bers.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let shown: Vec<String> = bers.iter().map(|b| format!("{b:.3}")).collect();
    verdict(
        9,
        "mask sensitivity",
        hi - lo >= 0.2,
        &format!("log10 BER over 8 masks [{}], spread {:.3} (need >= 0.2)", shown.join(" "), hi - lo),
    );
}

#[test]
fn c10_determinism() {
    let _g = serial();
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("det.toml");
    let text = r#"mode = "elm"
seeds = [1, 2]

[split]
train = 1000
buffer = 50
test = 1000

[fiber]
length_km = 20.0

[readout]
max_taps = 9

[mc]
record = 5000

[[sweep]]
path = "node.mask_seed"
values = [1, 2]

[[sweep]]
path = "mode"
values = ["elm", "tdrc", "raw_lr"]
"#;
    parse_config(text).unwrap();
    std::fs::write(&config, text).unwrap();
    let run = |out: &str, threads| {
        let opts = RunOptions {
            threads: Some(threads),
            ..RunOptions::default()
        };
        std::fs::read(run_file(&config, &dir.path().join(out), &opts).unwrap()).unwrap()
    };
    let first = run("a", 2);
    let second = run("b", 1);
    let errors = String::from_utf8_lossy(&first).lines().skip(2).filter(|l| !l.ends_with(',')).count();
    verdict(
        10,
        "determinism",
        first == second && errors == 0,
        &format!("{} bytes, identical: {}, rows with errors: {errors}", first.len(), first == second),
    );
}
