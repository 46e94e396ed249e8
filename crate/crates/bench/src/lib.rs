//! Fixed simulated tables shared by the benchmarks.

use hetop::{simulate, CategoryCountTable, GroupParams};

/// `G` groups with no DIF except a shifted group 0 and a dispersed group 1,
/// `K` evenly spaced thresholds and `n` respondents per group.
pub fn scenario(g: usize, k: usize, n: usize) -> CategoryCountTable {
    let mut mu = vec![0.0; g];
    mu[0] = 0.5;
    let mut log_scale = vec![0.0; g];
    log_scale[1] = 1.5f64.ln();
    let thresholds = (0..k).map(|i| -1.0 + 2.0 * i as f64 / (k.max(2) - 1) as f64).collect();
    let params = GroupParams::new(mu, log_scale, thresholds).expect("valid scenario");
    simulate::generate(&params, &vec![n; g], 42).expect("simulation succeeds")
}
