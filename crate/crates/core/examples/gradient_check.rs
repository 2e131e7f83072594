//! Compares analytic gradients of a small KAN against central differences
//! for every basis variant.
//!
//! ```text
//! cargo run --release --example gradient_check -- [eps]
//! ```

use kan_ecoc::grad_engine::{finite_difference_gradient, max_relative_error, Matrix};
use kan_ecoc::layers::{KanNetwork, NetworkSpec, SplineGrid, Variant};
use kan_ecoc::rng::seeded;
use kan_ecoc::train::cross_entropy_loss;
use rand::Rng;

fn loss(net: &KanNetwork, x: &Matrix, labels: &[usize]) -> f64 {
    cross_entropy_loss(&net.forward(x).unwrap(), labels).unwrap().0
}

fn main() -> kan_ecoc::Result<()> {
    let eps: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1e-5);
    let mut rng = seeded(3);
    let x = Matrix::from_vec(8, 4, (0..32).map(|_| rng.random_range(-0.9..0.9)).collect())?;
    let labels: Vec<usize> = (0..8).map(|i| i % 3).collect();

    for variant in [Variant::BSpline, Variant::Rbf, Variant::Rswaf] {
        let net = NetworkSpec::new(vec![5], SplineGrid::new(5, 3)?, variant).build(4, 3, 7)?;
        let (logits, cache) = net.forward_train(&x)?;
        let (_, up) = cross_entropy_loss(&logits, &labels)?;
        let (_, grads) = net.backward(&cache, &up)?;

        let mut worst = 0.0f64;
        for (li, g) in grads.iter().enumerate() {
            let num = finite_difference_gradient(
                |p| {
                    let mut n = net.clone();
                    *n.layers_mut()[li].spline_coeffs_mut() = p.clone();
                    loss(&n, &x, &labels)
                },
                net.layers()[li].spline_coeffs(),
                eps,
            )?;
            worst = worst.max(max_relative_error(&g.spline_coeffs, &num, 1e-6)?);
            let num = finite_difference_gradient(
                |p| {
                    let mut n = net.clone();
                    *n.layers_mut()[li].base_weights_mut() = p.clone();
                    loss(&n, &x, &labels)
                },
                net.layers()[li].base_weights(),
                eps,
            )?;
            worst = worst.max(max_relative_error(&g.base_weights, &num, 1e-6)?);
        }
        println!(
            "{:8} {} params, max relative error {worst:.2e}",
            variant.to_string(),
            net.num_parameters()
        );
    }
    Ok(())
}
