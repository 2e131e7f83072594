//! Runs a small grid-size sweep from an inline TOML spec and prints the
//! per-cell seed summaries.
//!
//! ```text
//! cargo run --release --example sweep -- [out_dir]
//! ```

use kan_ecoc::experiment::{run_experiment, ExperimentKind, ExperimentSpec};

const SPEC: &str = r#"
grid_sizes = [3, 5]
spline_orders = [3]
hidden_dims = [[5]]
seeds = [0, 1, 2]

[train]
epochs = 80

[data.synth]
classes = 4
per_class = 120
dim = 6
separation = 3.0
"#;

fn main() -> kan_ecoc::Result<()> {
    let out = std::env::args().nth(1).map(std::path::PathBuf::from);
    let spec = ExperimentSpec::from_toml_str(SPEC)?;
    let res = run_experiment(&spec, ExperimentKind::Sweep, out.as_deref(), |r| {
        eprintln!("{} {} g={} seed={} {}", r.method, r.variant, r.grid, r.seed, r.status);
    })?;
    for s in &res.summaries {
        if let Some(sum) = &s.summary {
            println!(
                "{:7} g={} f1 {:.4} +/- {:.4} ({})",
                s.method.to_string(),
                s.cell.grid,
                sum.mean.f1,
                sum.std.f1,
                s.status()
            );
        }
    }
    if let Some(dir) = out {
        println!("results in {}", dir.display());
    }
    Ok(())
}
