//! Prints the B-spline, Gaussian RBF and RSWAF basis values on a small grid,
//! one row per sample point.
//!
//! ```text
//! cargo run --example basis_functions -- [grid] [order]
//! ```

use kan_ecoc::layers::{bspline_basis, rbf_basis, rswaf_basis, SplineGrid};

fn row(label: &str, x: f64, values: &[f64]) {
    let cells: Vec<String> = values.iter().map(|v| format!("{v:6.3}")).collect();
    println!("{label:7} x={x:+.2} [{}]", cells.join(" "));
}

fn main() -> kan_ecoc::Result<()> {
    let mut args = std::env::args().skip(1);
    let g: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(5);
    let s: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(3);
    let grid = SplineGrid::new(g, s)?;
    let centers = grid.centers();
    let h = grid.center_spacing();

    println!("grid {g}, order {s}: {} basis functions", grid.num_basis());
    println!(
        "knots {:?}",
        grid.knots().iter().map(|k| (k * 1e4).round() / 1e4).collect::<Vec<_>>()
    );
    for i in 0..=8 {
        let x = -1.0 + 0.25 * i as f64;
        let b = bspline_basis(x, &grid)?;
        row("bspline", x, &b);
        println!("        sum {:.12}", b.iter().sum::<f64>());
        row("rbf", x, &rbf_basis(x, &centers, h)?);
        row("rswaf", x, &rswaf_basis(x, &centers, h)?);
    }
    Ok(())
}
