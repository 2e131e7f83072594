//! Builds the synthetic Gaussian-blob dataset, splits and normalizes it, and
//! writes the result as CSV.
//!
//! ```text
//! cargo run --example synth_dataset -- [out.csv]
//! ```

use kan_ecoc::data::{normalize_features, stratified_split, synth_blobs, write_csv_dataset};

fn main() -> kan_ecoc::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "blobs.csv".into());
    let ds = synth_blobs(8, 250, 16, 4.0, 1)?;
    println!(
        "{} samples, {} features, class counts {:?}",
        ds.len(),
        ds.dim(),
        ds.class_counts()
    );

    let (train, test) = stratified_split(&ds, 0.2, 0)?;
    println!("train {:?}", train.class_counts());
    println!("test  {:?}", test.class_counts());

    let (train, norm) = normalize_features(&train)?;
    let test = norm.apply(&test)?;
    let range = |m: &kan_ecoc::grad_engine::Matrix| {
        m.as_slice()
            .iter()
            .fold((f64::MAX, f64::MIN), |(lo, hi), v| (lo.min(*v), hi.max(*v)))
    };
    println!(
        "normalized train range {:?}, test range {:?}",
        range(&train.features),
        range(&test.features)
    );

    write_csv_dataset(&ds, std::path::Path::new(&out), "label")?;
    println!("wrote {out}");
    Ok(())
}
