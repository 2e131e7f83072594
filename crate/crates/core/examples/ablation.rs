//! Compares the three basis variants at a fixed grid, vanilla against ECOC.
//!
//! ```text
//! cargo run --release --example ablation -- [epochs]
//! ```

use kan_ecoc::experiment::{run_experiment, ExperimentKind, ExperimentSpec, Method};

fn main() -> kan_ecoc::Result<()> {
    let epochs: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(80);
    let spec = ExperimentSpec::from_toml_str(&format!(
        "grid_sizes = [5]\nhidden_dims = [[5]]\nseeds = [0, 1]\n[train]\nepochs = {epochs}\n\
         [data.synth]\nclasses = 4\nper_class = 120\ndim = 6\nseparation = 3.0\n"
    ))?;
    let res = run_experiment(&spec, ExperimentKind::Ablate, None, |_| {})?;
    println!("{:8} {:>8} {:>8}", "variant", "vanilla", "ecoc");
    for cell in spec.cells(ExperimentKind::Ablate) {
        let f1 = |m| {
            res.summary_for(m, &cell)
                .and_then(|s| s.summary.as_ref())
                .map_or(f64::NAN, |s| s.mean.f1)
        };
        println!(
            "{:8} {:8.4} {:8.4}",
            cell.variant.to_string(),
            f1(Method::Vanilla),
            f1(Method::Ecoc)
        );
    }
    Ok(())
}
