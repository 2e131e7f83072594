//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! ```text
//! cargo test --release --test acceptance            # everything
//! cargo test --release --test acceptance -- 3 7     # a subset
//! ```

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use common::*;
use kan_ecoc::ecoc::{decode_codeword, encode_label, generate_coding_matrix, Codeword};
use kan_ecoc::experiment::{run_experiment, DataSource, ExperimentKind, ExperimentSpec, Method, SynthParams};
use kan_ecoc::layers::{bspline_basis, KanLayer, SplineGrid, Variant};
use kan_ecoc::metrics::{weighted_metrics, ConfusionMatrix};
use kan_ecoc::rng::seeded;
use kan_ecoc::train::TrainConfig;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

type Criterion = (usize, &'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [Criterion; 7] = [
        (1, "gradient correctness", gradients),
        (2, "spline correctness", splines),
        (3, "ecoc codec", codec),
        (4, "surrogate experiment", surrogate),
        (5, "sweep and ablation structure", sweep_structure),
        (6, "determinism", determinism),
        (7, "metric identities", metric_identities),
    ];
    let mut failed = 0;
    for (n, name, f) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !out.pass {
            failed += 1;
        }
        println!(
            "criterion {n} {name}: {} ({}) [{:.1}s]",
            if out.pass { "PASS" } else { "FAIL" },
            out.detail,
            t.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn gradients() -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_case = String::new();
    let mut checks = 0;
    for (variant, g, s) in grad_configs() {
        for loss in [LossKind::CrossEntropy, LossKind::Bce] {
            for seed in 0..20 {
                let e = GradCase::new(variant, g, s, loss, seed).max_error();
                checks += 1;
                if e > worst {
                    worst = e;
                    worst_case = format!("{variant} g={g} s={s} {loss:?} seed={seed}");
                }
            }
        }
    }
    outcome(
        worst < 1e-4,
        format!("{checks} checks, max relative error {worst:.2e} at {worst_case}"),
    )
}

fn splines() -> Outcome {
    let mut pou = 0.0f64;
    let mut oracle = 0.0f64;
    let mut max_support = 0;
    let mut support_ok = true;
    for g in [3, 5, 10] {
        for s in [1, 2, 3] {
            let grid = SplineGrid::new(g, s).unwrap();
            let layer = KanLayer::zeros(1, 1, Variant::BSpline, grid, true).unwrap();
            for i in 0..1000 {
                // interior: [-1, 1)
                let x = -1.0 + 2.0 * (i as f64 + 0.5) / 1000.0;
                let b = bspline_basis(x, &grid).unwrap();
                pou = pou.max((b.iter().sum::<f64>() - 1.0).abs());
                let nz = b.iter().filter(|v| **v != 0.0).count();
                max_support = max_support.max(nz);
                support_ok &= nz <= s + 1;
                let o = oracle_all(x, g, s);
                for (a, e) in b.iter().zip(&o) {
                    oracle = oracle.max((a - e).abs());
                }
                for (a, e) in layer.basis_at(x).iter().zip(&o) {
                    oracle = oracle.max((a - e).abs());
                }
            }
        }
    }
    outcome(
        pou <= 1e-9 && support_ok && oracle <= 1e-12,
        format!("|sum-1| {pou:.1e}, max nonzeros {max_support}, oracle diff {oracle:.1e}"),
    )
}

fn codec() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    // decode(encode(c)) == c
    for k in 2..=10 {
        for seed in 0..10 {
            let m = generate_coding_matrix(k, 2 * k, seed).unwrap();
            for c in 0..k {
                ok &= decode_codeword(&encode_label(c, &m).unwrap(), &m).unwrap() == c;
            }
        }
    }
    notes.push(format!("round trip {}", if ok { "ok" } else { "broken" }));

    // every pattern of < ceil(d_min / 2) flips is corrected
    let mut flip_sets = 0u64;
    let mut flips_ok = true;
    for k in 2..=4 {
        for b in 2 * k..=10 {
            for seed in 0..5 {
                let m = generate_coding_matrix(k, b, seed).unwrap();
                let t = m.min_distance().div_ceil(2).saturating_sub(1);
                for mask in 0u32..(1 << b) {
                    if mask.count_ones() as usize > t {
                        continue;
                    }
                    for c in 0..k {
                        let bits: Vec<i8> = m
                            .row(c)
                            .iter()
                            .enumerate()
                            .map(|(j, &v)| if mask >> j & 1 == 1 { -v } else { v })
                            .collect();
                        flip_sets += 1;
                        flips_ok &= decode_codeword(&Codeword::new(bits).unwrap(), &m).unwrap() == c;
                    }
                }
            }
        }
    }
    ok &= flips_ok;
    notes.push(format!(
        "{flip_sets} flip patterns {}",
        if flips_ok { "corrected" } else { "NOT corrected" }
    ));

    // brute-force argmin on random codewords
    let m = generate_coding_matrix(8, 16, 0).unwrap();
    let mut rng = seeded(99);
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let bits: Vec<i8> = (0..16).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        let c = Codeword::new(bits).unwrap();
        if decode_codeword(&c, &m).unwrap() != brute_force_decode(&c, &m) {
            mismatches += 1;
        }
    }
    ok &= mismatches == 0;
    notes.push(format!("brute-force mismatches {mismatches}/10000"));

    // mean pairwise distance is about b / 2
    let mean = (0..10_000u64)
        .map(|s| generate_coding_matrix(8, 16, s).unwrap().mean_pairwise_distance())
        .sum::<f64>()
        / 10_000.0;
    ok &= (mean - 8.0).abs() <= 0.2;
    notes.push(format!("mean pairwise distance {mean:.4}"));

    outcome(ok, notes.join(", "))
}

fn surrogate_data() -> DataSource {
    DataSource::synth(SynthParams {
        classes: 8,
        per_class: 250,
        dim: 16,
        separation: 4.0,
        seed: 1,
    })
}

fn surrogate_spec(variants: Vec<Variant>, grids: Vec<usize>) -> ExperimentSpec {
    ExperimentSpec {
        methods: None,
        variants: Some(variants),
        grid_sizes: grids,
        spline_orders: vec![3],
        hidden_dims: vec![vec![5, 5]],
        seeds: (0..6).collect(),
        test_fraction: 0.2,
        use_base: true,
        code_length: None,
        train: TrainConfig {
            epochs: 100,
            learning_rate: 1e-3,
            ..TrainConfig::default()
        },
        data: surrogate_data(),
        parallel: false,
        record_wall_time: false,
    }
}

fn surrogate() -> Outcome {
    let spec = surrogate_spec(vec![Variant::BSpline], vec![5]);
    let res = run_experiment(&spec, ExperimentKind::Sweep, None, |_| {}).unwrap();
    let cell = &spec.cells(ExperimentKind::Sweep)[0];
    let acc = |m: Method| {
        let per: Vec<f64> = res
            .runs
            .iter()
            .filter(|r| r.method == m)
            .map(|r| r.metrics.as_ref().map_or(f64::NAN, |x| x.accuracy))
            .collect();
        let s = res.summary_for(m, cell).and_then(|s| s.summary).unwrap();
        (
            s.mean.accuracy,
            s.std.accuracy,
            per.iter().copied().fold(f64::INFINITY, f64::min),
        )
    };
    let (vm, vs, vmin) = acc(Method::Vanilla);
    let (em, es, emin) = acc(Method::Ecoc);
    outcome(
        res.failed_runs() == 0 && vm >= 0.90 && em >= 0.90 && em >= vm - 0.005,
        format!("vanilla {vm:.4}±{vs:.4} (min {vmin:.4}), ecoc {em:.4}±{es:.4} (min {emin:.4})"),
    )
}

fn sweep_structure() -> Outcome {
    // the full 27-cell grid at one epoch: row bookkeeping only
    let mut sweep = surrogate_spec(vec![Variant::BSpline], vec![3, 5, 10]);
    sweep.spline_orders = vec![1, 2, 3];
    sweep.hidden_dims = vec![vec![5], vec![5, 5], vec![5, 5, 5]];
    sweep.train.epochs = 1;
    let res = run_experiment(&sweep, ExperimentKind::Sweep, None, |_| {}).unwrap();
    let csv = res.to_csv_string().unwrap();
    let mut reader = csv::Reader::from_reader(csv.as_bytes());
    let (mut result_rows, mut summary_rows, mut finite) = (0, 0, true);
    for rec in reader.records() {
        let rec = rec.unwrap();
        if &rec[5] == "summary" {
            summary_rows += 1;
        } else {
            result_rows += 1;
        }
        finite &= rec[9].parse::<f64>().is_ok_and(f64::is_finite);
    }
    let sweep_ok = result_rows == 324 && summary_rows == 54 && finite;

    // the variant ablation at the full protocol
    let ablate = surrogate_spec(vec![Variant::Rbf, Variant::Rswaf], vec![3, 5, 10]);
    let res = run_experiment(&ablate, ExperimentKind::Ablate, None, |_| {}).unwrap();
    let mut pairs = Vec::new();
    for cell in ablate.cells(ExperimentKind::Ablate) {
        let f1 = |m| {
            res.summary_for(m, &cell)
                .and_then(|s| s.summary)
                .map_or(f64::NAN, |s| s.mean.f1)
        };
        let (v, e) = (f1(Method::Vanilla), f1(Method::Ecoc));
        pairs.push((format!("{}/{}", cell.variant, cell.grid), v, e, e >= v - 0.01));
    }
    let won = pairs.iter().filter(|p| p.3).count();
    let ablate_ok = res.runs.len() == 72 && res.failed_runs() == 0 && won >= 5;
    let table: Vec<String> = pairs.iter().map(|(c, v, e, _)| format!("{c} {v:.3}/{e:.3}")).collect();
    outcome(
        sweep_ok && ablate_ok,
        format!(
            "sweep {result_rows}+{summary_rows} rows, finite f1 {finite}; ablation {} rows, ecoc within 0.01 in {won}/6 pairs [{}]",
            res.runs.len(),
            table.join(", ")
        ),
    )
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kan-ecoc"))
}

fn run_ok(cmd: &mut Command) {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "{:?} failed: {}",
        cmd,
        String::from_utf8_lossy(&out.stderr)
    );
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                files.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    files
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let data = root.join("blobs.csv");
    let spec = root.join("sweep.toml");
    std::fs::write(
        &spec,
        format!(
            "grid_sizes = [3, 5]\nspline_orders = [2]\nhidden_dims = [[4]]\nseeds = [0, 1]\n\n\
             [train]\nepochs = 3\n\n[data]\npath = {:?}\n",
            data.to_str().unwrap()
        ),
    )
    .unwrap();
    let ablate = root.join("ablate.toml");
    std::fs::write(
        &ablate,
        format!(
            "variants = [\"rbf\", \"rswaf\"]\ngrid_sizes = [3]\nhidden_dims = [[4]]\nseeds = [0, 1]\n\n\
             [train]\nepochs = 3\n\n[data]\npath = {:?}\n",
            data.to_str().unwrap()
        ),
    )
    .unwrap();

    let mut checked = Vec::new();
    let mut all_equal = true;
    let round = |tag: &str| -> BTreeMap<String, Vec<u8>> {
        let dir = root.join(tag);
        std::fs::create_dir_all(&dir).unwrap();
        let synth_out = dir.join("synth.csv");
        run_ok(
            bin()
                .args([
                    "synth",
                    "--classes",
                    "4",
                    "--per-class",
                    "40",
                    "--dim",
                    "5",
                    "--seed",
                    "3",
                    "--out",
                ])
                .arg(&synth_out),
        );
        if !data.exists() {
            std::fs::copy(&synth_out, &data).unwrap();
        }
        for method in ["vanilla", "ecoc"] {
            run_ok(
                bin()
                    .args([
                        "train", "--method", method, "--epochs", "5", "--grid", "3", "--dims", "4", "--data",
                    ])
                    .arg(&data)
                    .arg("--out")
                    .arg(dir.join(format!("train_{method}"))),
            );
            run_ok(
                bin()
                    .args([
                        "train",
                        "--method",
                        method,
                        "--epochs",
                        "5",
                        "--grid",
                        "3",
                        "--dims",
                        "4",
                        "--parallel",
                        "--data",
                    ])
                    .arg(&data)
                    .arg("--out")
                    .arg(dir.join(format!("train_{method}_par")))
                    .env("KAN_ECOC_THREADS", "2"),
            );
            run_ok(
                bin()
                    .arg("eval")
                    .arg("--model")
                    .arg(dir.join(format!("train_{method}")))
                    .arg("--data")
                    .arg(&data)
                    .arg("--out")
                    .arg(dir.join(format!("eval_{method}.json"))),
            );
        }
        run_ok(
            bin()
                .arg("sweep")
                .arg(&spec)
                .arg("--out")
                .arg(dir.join("sweep"))
                .arg("--quiet"),
        );
        run_ok(
            bin()
                .arg("sweep")
                .arg(&spec)
                .arg("--out")
                .arg(dir.join("sweep_par"))
                .args(["--parallel", "--quiet"])
                .env("KAN_ECOC_THREADS", "2"),
        );
        run_ok(
            bin()
                .arg("ablate")
                .arg(&ablate)
                .arg("--out")
                .arg(dir.join("ablate"))
                .arg("--quiet"),
        );
        snapshot(&dir)
    };
    let a = round("a");
    let b = round("b");
    for (name, bytes) in &a {
        checked.push(name.clone());
        all_equal &= b.get(name) == Some(bytes);
    }
    all_equal &= a.len() == b.len();
    // parallel and serial runs agree too
    let serial_vs_parallel = a
        .iter()
        .filter_map(|(k, v)| k.strip_prefix("sweep/").map(|rest| (rest.to_string(), v)))
        .all(|(rest, v)| a.get(&format!("sweep_par/{rest}")) == Some(v))
        && ["vanilla", "ecoc"]
            .iter()
            .all(|m| a.get(&format!("train_{m}/metrics.json")) == a.get(&format!("train_{m}_par/metrics.json")));
    outcome(
        all_equal && serial_vs_parallel,
        format!(
            "{} files byte-identical across reruns: {all_equal}; parallel == serial: {serial_vs_parallel}",
            checked.len()
        ),
    )
}

fn metric_identities() -> Outcome {
    let mut rng = seeded(7);
    let mut exact = true;
    let mut oracle_gap = 0.0f64;
    for _ in 0..1000 {
        let k = rng.random_range(2..=10);
        let counts: Vec<Vec<u64>> = (0..k)
            .map(|_| {
                (0..k)
                    .map(|_| {
                        if rng.random_bool(0.3) {
                            0
                        } else {
                            rng.random_range(0..50)
                        }
                    })
                    .collect()
            })
            .collect();
        let c = ConfusionMatrix { counts };
        if c.total() == 0 {
            continue;
        }
        let r = weighted_metrics(&c).unwrap();
        exact &= r.recall == r.accuracy;
        // support-weighted mean of per-class recall, computed directly
        let n = c.total() as f64;
        let direct: f64 = (0..k)
            .map(|i| {
                let s: u64 = c.counts[i].iter().sum();
                if s == 0 {
                    0.0
                } else {
                    (s as f64 / n) * (c.counts[i][i] as f64 / s as f64)
                }
            })
            .sum();
        oracle_gap = oracle_gap.max((direct - r.recall).abs());
    }
    let hand = weighted_metrics(&ConfusionMatrix {
        counts: vec![vec![2, 0], vec![1, 1]],
    })
    .unwrap();
    let expect = [0.75, 0.8333, 0.75, 0.7333];
    let got = [hand.accuracy, hand.precision, hand.recall, hand.f1];
    let hand_ok = got.iter().zip(expect).all(|(g, e)| (g - e).abs() <= 1e-4);
    outcome(
        exact && oracle_gap < 1e-12 && hand_ok,
        format!(
            "recall == accuracy on all: {exact}, direct-formula gap {oracle_gap:.1e}, hand example {:.4}/{:.4}/{:.4}/{:.4}",
            got[0], got[1], got[2], got[3]
        ),
    )
}
