//! Truncated SVD of a two-index tensor: kept spectrum and discarded weight.

use std::f64::consts::PI;

use rtebd::tensor::{svd_truncate, Tensor, TruncationPolicy};

fn main() -> rtebd::Result<()> {
    // orthonormal cosine modes with singular values 1, 1/2, 1/4, ...
    let n = 6;
    let mode = |k: usize, x: usize| {
        let norm = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        norm * (PI * k as f64 * (2 * x + 1) as f64 / (2 * n) as f64).cos()
    };
    let t = Tensor::from_fn(vec![n, n], |i| {
        (0..n).map(|k| 0.5f64.powi(k as i32) * mode(k, i[0]) * mode(k, i[1])).sum::<f64>()
    });
    for chi in [1, 2, 4, 6] {
        let r = svd_truncate(&t, &[0], &[1], &TruncationPolicy::new(chi)?)?;
        let s: Vec<String> = r.s.iter().map(|x| format!("{x:.4}")).collect();
        println!("chi = {chi}: kept [{}], discarded weight {:.3e}", s.join(", "), r.discarded_weight);
    }
    Ok(())
}
