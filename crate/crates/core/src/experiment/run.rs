use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{load_config, ExperimentConfig, SweepPoint};
use super::dump::write_dump;
use super::results::{fmt_value, write_results, ResultRow};
use crate::benchmarks::memory_capacity;
use crate::error::{Error, Result};
use crate::link::{receive, transmit_and_propagate, LinkSeeds, Propagated, Received};
use crate::task::{evaluate, Mode};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses all cores.
    pub threads: Option<usize>,
    /// Added to every configured seed.
    pub seed_offset: u64,
    /// Fill the `runtime_s` column. Off by default so that repeated runs
    /// produce identical files.
    pub timing: bool,
    /// Directory for per-point dumps when the config asks for them.
    pub dump_dir: Option<PathBuf>,
}

/// One unit of work: a grid point with a concrete seed.
struct Job {
    point: usize,
    seed: u64,
    swept: Vec<(String, String)>,
    config: ExperimentConfig,
}

impl Job {
    /// The link stages only depend on these sections; jobs that agree on
    /// them share the simulated record.
    fn propagate_key(&self) -> String {
        let c = &self.config;
        let key = (
            &c.tx,
            &c.fiber,
            c.link.launch_power_dbm,
            c.link.xpm_phase_std,
            c.split,
            self.seed,
        );
        format!("{key:?}")
    }

    fn receive_key(&self) -> String {
        format!("{:?}|{:?}", self.propagate_key(), self.config.link)
    }
}

fn expand_jobs(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<Job>> {
    let points: Vec<SweepPoint> = cfg.points()?;
    let mut jobs = Vec::with_capacity(points.len() * cfg.seeds.len());
    for p in points {
        for &s in &cfg.seeds {
            let seed = s.wrapping_add(opts.seed_offset);
            let mut config = p.config.clone();
            config.node.noise_seed = config.node.noise_seed.wrapping_add(seed);
            if config.mode == Mode::Kk {
                config.kk.cd_length = config.fiber.length_km;
                config.kk.cd_beta2 = config.fiber.beta2_ps2_per_km;
                config.kk.baud = config.tx.baud;
                config.kk.sideband = config.tx.sideband;
                config.kk.carrier_detune = config.tx.carrier_detune;
            }
            jobs.push(Job {
                point: p.index,
                seed,
                swept: p.assignments.iter().map(|(k, v)| (k.clone(), fmt_value(v))).collect(),
                config,
            });
        }
    }
    Ok(jobs)
}

/// Unique keys in first-appearance order.
fn unique<'a>(keys: impl Iterator<Item = (String, &'a Job)>) -> Vec<(String, &'a Job)> {
    let mut seen = std::collections::HashSet::new();
    keys.filter(|(k, _)| seen.insert(k.clone())).collect()
}

type Shared<T> = Arc<std::result::Result<T, String>>;

fn simulate_records(jobs: &[Job]) -> HashMap<String, Shared<Received>> {
    let prop_keys = unique(jobs.iter().map(|j| (j.propagate_key(), j)));
    log::info!("simulating {} transmitted record(s)", prop_keys.len());
    let propagated: HashMap<String, Shared<Propagated>> = prop_keys
        .par_iter()
        .map(|(k, j)| {
            let c = &j.config;
            let r = transmit_and_propagate(&c.tx, &c.fiber, &c.link, &c.split, &LinkSeeds::from_seed(j.seed));
            (k.clone(), Arc::new(r.map_err(|e| e.to_string())))
        })
        .collect();

    let rx_keys = unique(jobs.iter().map(|j| (j.receive_key(), j)));
    log::info!("detecting {} received record(s)", rx_keys.len());
    rx_keys
        .par_iter()
        .map(|(k, j)| {
            let c = &j.config;
            let r = match propagated[&j.propagate_key()].as_ref() {
                Ok(p) => receive(p, &c.tx, &c.link, &LinkSeeds::from_seed(j.seed)).map_err(|e| e.to_string()),
                Err(e) => Err(e.clone()),
            };
            (k.clone(), Arc::new(r))
        })
        .collect()
}

fn run_job(job: &Job, rx: &std::result::Result<Received, String>, opts: &RunOptions, dump: Option<&Path>) -> ResultRow {
    let start = Instant::now();
    let c = &job.config;
    let mut row = ResultRow {
        point: job.point,
        seed: job.seed,
        swept: job.swept.clone(),
        mode: c.mode.as_str().to_string(),
        mask_seed: c.node.mask_seed,
        ber: None,
        selected_taps: None,
        mc: None,
        runtime_s: None,
        error: None,
    };
    let outcome = rx.as_ref().map_err(Clone::clone).and_then(|rx| {
        if let Some(dir) = dump {
            let path = dir.join(format!("p{:05}_s{}.bin", job.point, job.seed));
            write_dump(&path, &rx.detected.samples).map_err(|e| e.to_string())?;
        }
        evaluate(c.mode, rx, &c.node, &c.laser, &c.kk, &c.readout).map_err(|e| e.to_string())
    });
    match outcome {
        Ok(o) => {
            row.ber = Some(o.ber);
            row.selected_taps = Some(o.taps);
        }
        Err(e) => row.error = Some(e),
    }
    if let (Some(mc), Mode::Tdrc | Mode::Elm) = (c.mc, c.mode) {
        match memory_capacity(&c.mode.node_config(&c.node), &c.laser, mc.m_max, mc.record, job.seed) {
            Ok(r) => row.mc = Some(r.mc),
            Err(e) if row.error.is_none() => row.error = Some(format!("memory capacity: {e}")),
            Err(_) => {}
        }
    }
    if opts.timing {
        row.runtime_s = Some(start.elapsed().as_secs_f64());
    }
    if let Some(e) = &row.error {
        log::warn!("point {} seed {}: {e}", job.point, job.seed);
    }
    row
}

/// Execute every (grid point, seed) pair. Rows come back sorted by point,
/// then by position in the seed list, regardless of completion order.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let jobs = expand_jobs(cfg, opts)?;
    let dump = if cfg.dump { opts.dump_dir.clone() } else { None };
    if let Some(d) = &dump {
        std::fs::create_dir_all(d)?;
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = opts.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Format(format!("thread pool: {e}")))?;
    log::info!("{} run(s) on {} thread(s)", jobs.len(), pool.current_num_threads());
    let done = std::sync::atomic::AtomicUsize::new(0);
    let rows = pool.install(|| {
        let records = simulate_records(&jobs);
        jobs.par_iter()
            .map(|j| {
                let row = run_job(j, &records[&j.receive_key()], opts, dump.as_deref());
                let n = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                log::info!("[{n}/{}] point {} seed {}", jobs.len(), j.point, j.seed);
                row
            })
            .collect::<Vec<_>>()
    });
    Ok(rows)
}

/// `<out>/<config stem>.csv`
pub fn results_path(config: &Path, out: &Path) -> PathBuf {
    let stem = config.file_stem().map_or_else(|| "results".into(), |s| s.to_string_lossy().into_owned());
    out.join(format!("{stem}.csv"))
}

/// Load, run and write the results file; returns its path.
pub fn run_file(config: &Path, out: &Path, opts: &RunOptions) -> Result<PathBuf> {
    let cfg = load_config(config)?;
    let path = results_path(config, out);
    let mut opts = opts.clone();
    if cfg.dump && opts.dump_dir.is_none() {
        opts.dump_dir = Some(path.with_extension("dumps"));
    }
    let rows = run_experiment(&cfg, &opts)?;
    write_results(&path, &rows)?;
    Ok(path)
}
