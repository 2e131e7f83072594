//! Trains a vanilla KAN and a KAN-ECOC ensemble on the same synthetic split
//! and prints their test metrics.
//!
//! ```text
//! cargo run --release --example vanilla_vs_ecoc -- [seed] [epochs]
//! ```

use std::time::Instant;

use kan_ecoc::data::{normalize_features, stratified_split, synth_blobs};
use kan_ecoc::ecoc::{default_code_length, generate_coding_matrix};
use kan_ecoc::layers::{NetworkSpec, SplineGrid, Variant};
use kan_ecoc::metrics::evaluate;
use kan_ecoc::train::{predict_ecoc, predict_vanilla, train_ecoc, train_vanilla, TrainConfig};

fn main() -> kan_ecoc::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let epochs: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(100);

    let raw = synth_blobs(8, 250, 16, 4.0, 1)?;
    let (train, test) = stratified_split(&raw, 0.2, seed)?;
    let (train, norm) = normalize_features(&train)?;
    let test = norm.apply(&test)?;

    let spec = NetworkSpec::new(vec![5, 5], SplineGrid::new(5, 3)?, Variant::BSpline);
    let cfg = TrainConfig {
        epochs,
        seed,
        ..TrainConfig::default()
    };

    let t = Instant::now();
    let net = spec.build(train.dim(), train.num_classes, seed)?;
    let (net, history) = train_vanilla(net, &train, &cfg)?;
    let pred = predict_vanilla(&net, &test.features)?;
    let r = evaluate(&test.labels, &pred, test.num_classes)?;
    println!(
        "vanilla: acc {:.4} f1 {:.4} final loss {:.4} ({:.1}s)",
        r.accuracy,
        r.f1,
        history.last().unwrap(),
        t.elapsed().as_secs_f64()
    );

    let t = Instant::now();
    let m = generate_coding_matrix(8, default_code_length(8), seed)?;
    let (ensemble, _) = train_ecoc(&train, &cfg, &m, &spec)?;
    let pred = predict_ecoc(&ensemble, &test.features)?;
    let r = evaluate(&test.labels, &pred, test.num_classes)?;
    println!(
        "ecoc:    acc {:.4} f1 {:.4} d_min {} ({:.1}s)",
        r.accuracy,
        r.f1,
        m.min_distance(),
        t.elapsed().as_secs_f64()
    );
    Ok(())
}
