//! The four approximations of `I_(2,1)` on one interval, against a
//! finely subdivided reference.

use itosim::iterint::{
    em_ic0, em_kloeden, levy_fourier, milstein_l0, reference_oracle, DoubleIntegralMethod, IntegralPair,
};
use itosim::rng::{NormalStream, SeedPath};
use itosim::wiener::subdivide_interval;

fn main() -> itosim::Result<()> {
    let dt = 1.0 / 16.0;
    let (dw1, dw2) = (0.31, -0.12);
    let w2_start = 0.4;
    let fine = 4096;

    let subs = subdivide_interval(&[dw1, dw2], fine, dt / fine as f64, SeedPath::root(1, 0))?;
    let truth = reference_oracle(&subs[0], &subs[1])?;
    println!("reference: I21 = {:+.6}  I12 = {:+.6}  area = {:+.6}", truth.i21, truth.i12, truth.levy_area);

    for n in [8usize, 64, 512] {
        let coarse: Vec<Vec<f64>> = subs.iter().map(|s| s.chunks(fine / n).map(|c| c.iter().sum()).collect()).collect();
        // Kloeden's start value carries W² into the sum; subtract it back out.
        let kloeden = em_kloeden(&coarse[0], &coarse[1], w2_start)? - w2_start * dw1;
        println!(
            "n_K = {n:>3}: kloeden {:+.6}  ic0 {:+.6}  l0 {:+.6}",
            kloeden,
            em_ic0(&coarse[0], &coarse[1])?,
            milstein_l0(&coarse[0], &coarse[1])?
        );
    }

    let mut stream = NormalStream::at(&SeedPath::root(1, 1), 1);
    for p in [4, 32, 256] {
        let xi = (dw1 / dt.sqrt(), dw2 / dt.sqrt());
        let pair: IntegralPair = levy_fourier(xi, dt, p, &mut stream)?;
        println!("fourier p = {p:>3}: I21 = {:+.6} (independent area draw)", pair.i21);
    }

    let m = DoubleIntegralMethod::MilsteinL0 { n_k: 16 };
    println!("{} with resolution {}", m.label(), m.resolution());
    Ok(())
}
