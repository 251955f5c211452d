//! Subdivided approximations of `I_(2,1)` and `I_(1,2)` must sum to
//! `ΔW¹ΔW²`. The zero-start Euler sums miss it by `Σ δW¹δW²`; the
//! Milstein correction closes the gap to rounding.

use itosim::iterint::experiments::{pairing_experiment, ranking_experiment, PairingConfig, RankingConfig};

fn main() -> itosim::Result<()> {
    let pairing = PairingConfig {
        paths: 1000,
        ..PairingConfig::default()
    };
    // On later intervals W² no longer starts at zero, which separates the two starts.
    let last = pairing.intervals - 1;
    println!("method      interval  n_K   mean |defect|");
    for row in pairing_experiment(&pairing, 11, 1)?.iter().filter(|r| r.interval == last) {
        println!("{:<11} {:>8} {:>4}   {:.3e}", row.method, row.interval, row.n_k, row.mean_abs_error);
    }

    let ranking = RankingConfig {
        paths: 300,
        ..RankingConfig::default()
    };
    println!("\nerror against the reference on a full path");
    for row in ranking_experiment(&ranking, 11, 1)? {
        println!("{:<13} n_K = {:>3}  {:.3e}", row.method, row.n_k, row.mean_abs_error);
    }
    Ok(())
}
