//! Declarative OSNR sweep through the experiment runner, followed by a
//! per-mode summary.

use photonic_link::experiment::{parse_config, read_results, run_experiment, summarize, write_results, RunOptions};

const CONFIG: &str = r#"
mode = "raw_lr"
seeds = [1, 2]

[split]
train = 8000
buffer = 500
test = 6000

[[sweep]]
path = "mode"
values = ["raw_lr", "kk", "elm"]

[[sweep]]
path = "link.target_osnr_db"
values = [26.0, 30.0, 35.9]
"#;

fn main() -> photonic_link::Result<()> {
    let cfg = parse_config(CONFIG)?;
    let rows = run_experiment(&cfg, &RunOptions::default())?;
    let dir = std::env::temp_dir().join("pam4link-osnr-sweep");
    let path = dir.join("osnr_sweep.csv");
    write_results(&path, &rows)?;
    println!("results in {}", path.display());

    let table = read_results(&path)?;
    let group = ["mode".to_string(), "link.target_osnr_db".to_string()];
    for s in summarize(&table, &group)? {
        println!("{:<7} {:>14}  median log10 BER {:.3}", s.key[0], s.key[1], s.median);
    }
    Ok(())
}
