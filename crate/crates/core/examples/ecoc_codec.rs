//! Generates a coding matrix, encodes every class, corrupts codewords with
//! bit flips and decodes them back.
//!
//! ```text
//! cargo run --example ecoc_codec -- [classes] [seed]
//! ```

use kan_ecoc::ecoc::{decode_codeword, default_code_length, encode_label, generate_coding_matrix};

fn show(bits: &[i8]) -> String {
    bits.iter().map(|&b| if b > 0 { '+' } else { '-' }).collect()
}

fn main() -> kan_ecoc::Result<()> {
    let mut args = std::env::args().skip(1);
    let k: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(8);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let m = generate_coding_matrix(k, default_code_length(k), seed)?;
    println!(
        "k={k} b={} d_min={} mean distance {:.2}",
        m.code_length(),
        m.min_distance(),
        m.mean_pairwise_distance()
    );
    let correctable = m.min_distance().saturating_sub(1) / 2;
    println!("guaranteed to correct {correctable} flipped bit(s)");

    for c in 0..k {
        let word = encode_label(c, &m)?;
        let mut noisy = word.clone();
        for j in 0..correctable + 1 {
            noisy = noisy.flipped((c + 3 * j) % m.code_length());
        }
        let mut fixable = word.clone();
        for j in 0..correctable {
            fixable = fixable.flipped((c + 3 * j) % m.code_length());
        }
        println!(
            "class {c}: {}  {} flips -> {}  {} flips -> {}",
            show(word.bits()),
            correctable,
            decode_codeword(&fixable, &m)?,
            correctable + 1,
            decode_codeword(&noisy, &m)?
        );
    }
    Ok(())
}
