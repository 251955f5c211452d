//! A user-defined system with two noise channels and commutative noise,
//! where Milstein needs no mixed integrals.

use std::sync::Arc;

use itosim::schemes::{euler_md, milstein_md, MultiSde, NoiseStructure};
use itosim::wiener::{TimeGrid, WienerTree};

/// `dX = μX dt + X(σ₁ dW¹ + σ₂ dW²)`.
struct TwoFactorGbm {
    mu: f64,
    sigma: [f64; 2],
}

impl MultiSde for TwoFactorGbm {
    fn dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        2
    }
    fn noise_structure(&self) -> NoiseStructure {
        NoiseStructure::Commutative
    }
    fn drift(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = self.mu * x[0];
    }
    fn diffusion(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = self.sigma[0] * x[0];
        out[1] = self.sigma[1] * x[0];
    }
    // L^{j1} b^{j2} = σ_{j1} σ_{j2} x
    fn milstein_coeffs(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        for j1 in 0..2 {
            for j2 in 0..2 {
                out[j1 * 2 + j2] = self.sigma[j1] * self.sigma[j2] * x[0];
            }
        }
    }
}

fn main() -> itosim::Result<()> {
    let sde = TwoFactorGbm {
        mu: 0.5,
        sigma: [0.4, 0.3],
    };
    let s2 = sde.sigma[0].powi(2) + sde.sigma[1].powi(2);
    for steps in [16, 64, 256, 1024] {
        let mut err = [0.0; 2];
        let paths = 500;
        for rep in 0..paths {
            let tree = Arc::new(WienerTree::uniform(5, rep, 2, TimeGrid::new(0.0, 1.0, steps)?, 2)?);
            let seg = tree.root();
            let exact = ((sde.mu - 0.5 * s2) + sde.sigma[0] * seg.total(0) + sde.sigma[1] * seg.total(1)).exp();
            err[0] += (euler_md(&sde, &[1.0], &seg)?.terminal()[0] - exact).abs();
            err[1] += (milstein_md(&sde, &[1.0], &seg, None)?.terminal()[0] - exact).abs();
        }
        println!(
            "steps {steps:>5}: euler {:.3e}  milstein {:.3e}",
            err[0] / paths as f64,
            err[1] / paths as f64
        );
    }
    Ok(())
}
