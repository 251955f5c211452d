//! Double Itô integrals over one step.
//!
//! Notation: for a channel pair `(1, 2)`,
//! `I_(1,2) = ∫∫ dW¹_s dW²_t` (inner integrator first), so
//! `I_(2,1) = ∫ (W²_t - W²_{t_n}) dW¹_t`. The subdivision methods all
//! approximate `I_(2,1)` by integrating the auxiliary system
//! `dY¹ = Y² dW¹, dY² = dW²` on a finer grid inside the step.

pub mod experiments;

use serde::{Deserialize, Serialize};

use crate::error::{config, Result, SimError};
use crate::rng::GaussianSource;

/// Approximation used for the mixed integrals `I_(j1,j2)`, `j1 != j2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DoubleIntegralMethod {
    /// Truncated Fourier expansion of the Brownian bridge with `p` terms.
    LevyFourier { p: usize },
    /// Euler subdivision started from `(0, W²_{t_n})`.
    EmKloeden { n_k: usize },
    /// Euler subdivision started from `(0, 0)`.
    EmIc0 { n_k: usize },
    /// Subdivision with the per-substep Milstein correction, Lévy area set to 0.
    MilsteinL0 { n_k: usize },
}

impl DoubleIntegralMethod {
    pub fn resolution(&self) -> usize {
        match *self {
            Self::LevyFourier { p } => p,
            Self::EmKloeden { n_k } | Self::EmIc0 { n_k } | Self::MilsteinL0 { n_k } => n_k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution() == 0 {
            return config(format!("{self:?}: resolution parameter must be >= 1"));
        }
        Ok(())
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::LevyFourier { .. } => "levy_fourier",
            Self::EmKloeden { .. } => "em_kloeden",
            Self::EmIc0 { .. } => "em_ic0",
            Self::MilsteinL0 { .. } => "milstein_l0",
        }
    }

    /// Same method with a different `p` or `n_K`.
    pub fn with_resolution(&self, n: usize) -> Self {
        match self {
            Self::LevyFourier { .. } => Self::LevyFourier { p: n },
            Self::EmKloeden { .. } => Self::EmKloeden { n_k: n },
            Self::EmIc0 { .. } => Self::EmIc0 { n_k: n },
            Self::MilsteinL0 { .. } => Self::MilsteinL0 { n_k: n },
        }
    }

    pub fn needs_subdivision(&self) -> bool {
        !matches!(self, Self::LevyFourier { .. })
    }
}

/// Approximations of `I_(1,2)` and `I_(2,1)` for one channel pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralPair {
    pub i12: f64,
    pub i21: f64,
    pub levy_area: f64,
}

impl IntegralPair {
    pub fn new(i12: f64, i21: f64) -> Self {
        Self {
            i12,
            i21,
            levy_area: i12 - i21,
        }
    }

    /// Completes `I_(2,1)` with `I_(1,2) = ΔW¹ΔW² - I_(2,1)`.
    pub fn from_i21(i21: f64, dw1: f64, dw2: f64) -> Self {
        Self::new(dw1 * dw2 - i21, i21)
    }

    pub fn from_i12(i12: f64, dw1: f64, dw2: f64) -> Self {
        Self::new(i12, dw1 * dw2 - i12)
    }
}

/// `I_(j,j) = ½((ΔW)² - Δ)`.
pub fn diagonal_exact(dw: f64, dt: f64) -> f64 {
    0.5 * (dw * dw - dt)
}

/// Joint draw of `(ΔW, ΔZ)` with `ΔZ = ∫∫ dW ds`: variances `Δ` and `Δ³/3`,
/// covariance `Δ²/2`.
pub fn sample_dw_dz<G: GaussianSource + ?Sized>(dt: f64, src: &mut G) -> (f64, f64) {
    let z1 = src.standard_normal();
    let z2 = src.standard_normal();
    let dw = dt.sqrt() * z1;
    let dz = 0.5 * dt.powf(1.5) * (z1 + z2 / 3f64.sqrt());
    (dw, dz)
}

/// `ρ_p = 1/12 - (1/2π²) Σ_{r<=p} 1/r²`, the variance of the truncated tail.
pub fn rho_p(p: usize) -> f64 {
    let s: f64 = (1..=p).map(|r| 1.0 / (r as f64 * r as f64)).sum();
    let rho = 1.0 / 12.0 - s / (2.0 * std::f64::consts::PI * std::f64::consts::PI);
    assert!(rho > -1e-15, "rho_p must be non-negative, got {rho}");
    rho.max(0.0)
}

/// Auxiliary standard normals for the Lévy–Fourier method: `μ_j`,
/// `ζ_{j,r}`, `η_{j,r}` for the two channels of a pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierDraws {
    pub mu: [f64; 2],
    pub zeta: [Vec<f64>; 2],
    pub eta: [Vec<f64>; 2],
}

impl FourierDraws {
    /// Draws `2(2p + 1)` normals in the order `μ₁, μ₂, ζ₁, η₁, ζ₂, η₂`.
    pub fn draw<G: GaussianSource + ?Sized>(p: usize, src: &mut G) -> Self {
        let mu = [src.standard_normal(), src.standard_normal()];
        let mut take = || {
            let mut v = vec![0.0; p];
            src.fill_standard_normal(&mut v);
            v
        };
        let zeta1 = take();
        let eta1 = take();
        let zeta2 = take();
        let eta2 = take();
        Self {
            mu,
            zeta: [zeta1, zeta2],
            eta: [eta1, eta2],
        }
    }

    pub fn terms(&self) -> usize {
        self.zeta[0].len()
    }

    pub fn zeros(p: usize) -> Self {
        Self {
            mu: [0.0; 2],
            zeta: [vec![0.0; p], vec![0.0; p]],
            eta: [vec![0.0; p], vec![0.0; p]],
        }
    }
}

/// `I^p_(1,2)` from `ξ_j = ΔW^j / √Δ` and the first `p` coefficients of `draws`.
pub fn levy_fourier_with(xi: (f64, f64), dt: f64, p: usize, draws: &FourierDraws) -> Result<IntegralPair> {
    if p == 0 {
        return config("Lévy–Fourier truncation p must be >= 1");
    }
    if draws.terms() < p {
        return config(format!("only {} Fourier terms drawn, need {p}", draws.terms()));
    }
    let (x1, x2) = xi;
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut series = 0.0;
    for r in 0..p {
        let term = draws.zeta[0][r] * (sqrt2 * x2 + draws.eta[1][r])
            - draws.zeta[1][r] * (sqrt2 * x1 + draws.eta[0][r]);
        series += term / (r + 1) as f64;
    }
    let i12 = dt * (0.5 * x1 * x2 + rho_p(p).sqrt() * (draws.mu[0] * x2 - draws.mu[1] * x1))
        + dt / (2.0 * std::f64::consts::PI) * series;
    let sqdt = dt.sqrt();
    Ok(IntegralPair::from_i12(i12, x1 * sqdt, x2 * sqdt))
}

/// Lévy–Fourier approximation with fresh auxiliary draws.
pub fn levy_fourier<G: GaussianSource + ?Sized>(xi: (f64, f64), dt: f64, p: usize, src: &mut G) -> Result<IntegralPair> {
    if p == 0 {
        return config("Lévy–Fourier truncation p must be >= 1");
    }
    let draws = FourierDraws::draw(p, src);
    levy_fourier_with(xi, dt, p, &draws)
}

fn check_lengths(sub1: &[f64], sub2: &[f64]) -> Result<()> {
    if sub1.len() != sub2.len() {
        return Err(SimError::Config(format!(
            "sub-increment channels differ in length ({} vs {})",
            sub1.len(),
            sub2.len()
        )));
    }
    Ok(())
}

/// Euler recursion `Y¹ += Y² δW¹, Y² += δW²` from `Y¹ = 0, Y² = w_start_2`.
pub fn em_kloeden(sub1: &[f64], sub2: &[f64], w_start_2: f64) -> Result<f64> {
    check_lengths(sub1, sub2)?;
    let (mut y1, mut y2) = (0.0, w_start_2);
    for (&d1, &d2) in sub1.iter().zip(sub2) {
        y1 += y2 * d1;
        y2 += d2;
    }
    Ok(y1)
}

/// Euler recursion from `Y¹ = Y² = 0`; approximates `I_(2,1)`.
pub fn em_ic0(sub1: &[f64], sub2: &[f64]) -> Result<f64> {
    em_kloeden(sub1, sub2, 0.0)
}

/// `Y¹ += Y² δW¹ + ½ δW¹ δW², Y² += δW²` from zero; approximates `I_(2,1)`.
pub fn milstein_l0(sub1: &[f64], sub2: &[f64]) -> Result<f64> {
    check_lengths(sub1, sub2)?;
    let (mut y1, mut y2) = (0.0, 0.0);
    for (&d1, &d2) in sub1.iter().zip(sub2) {
        y1 += y2 * d1 + 0.5 * d1 * d2;
        y2 += d2;
    }
    Ok(y1)
}

/// High-resolution reference for both mixed integrals: `milstein_l0` run in
/// both channel orders on a fine subdivision.
pub fn reference_oracle(sub1: &[f64], sub2: &[f64]) -> Result<IntegralPair> {
    let i21 = milstein_l0(sub1, sub2)?;
    let i12 = milstein_l0(sub2, sub1)?;
    Ok(IntegralPair::new(i12, i21))
}

/// `I_(2,1)` by a subdivision method from sub-increments; `w_start_2` is
/// only read by the Kloeden start.
pub fn subdivision_i21(method: &DoubleIntegralMethod, sub1: &[f64], sub2: &[f64], w_start_2: f64) -> Result<f64> {
    match method {
        DoubleIntegralMethod::EmKloeden { .. } => em_kloeden(sub1, sub2, w_start_2),
        DoubleIntegralMethod::EmIc0 { .. } => em_ic0(sub1, sub2),
        DoubleIntegralMethod::MilsteinL0 { .. } => milstein_l0(sub1, sub2),
        DoubleIntegralMethod::LevyFourier { .. } => config("Lévy–Fourier is not a subdivision method"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{NormalStream, SeedPath};

    struct Zeros;
    impl GaussianSource for Zeros {
        fn standard_normal(&mut self) -> f64 {
            0.0
        }
    }

    #[test]
    fn diagonal_values() {
        assert!((diagonal_exact(0.0, 0.1) + 0.05).abs() < 1e-15);
        assert!(diagonal_exact(0.1f64.sqrt(), 0.1).abs() < 1e-16);
        assert!((diagonal_exact(0.4, 0.0625) - 0.04875).abs() < 1e-15);
    }

    #[test]
    fn unrolled_recursions() {
        assert_eq!(em_kloeden(&[0.3], &[0.7], 1.5).unwrap(), 0.3 * 1.5);
        assert_eq!(em_ic0(&[0.3], &[0.7]).unwrap(), 0.0);
        let (a1, a2, b1, b2) = (0.2, -0.5, 0.3, 0.9);
        assert!((em_ic0(&[a1, a2], &[b1, b2]).unwrap() - b1 * a2).abs() < 1e-16);
        assert!((milstein_l0(&[0.4], &[-0.6]).unwrap() - 0.5 * 0.4 * -0.6).abs() < 1e-16);
        assert!(em_ic0(&[0.1], &[0.1, 0.2]).is_err());
        assert!(milstein_l0(&[0.1, 0.3], &[0.1]).is_err());
    }

    #[test]
    fn kloeden_with_zero_start_is_ic0() {
        let s1 = [0.1, -0.2, 0.05, 0.3];
        let s2 = [-0.4, 0.1, 0.2, 0.0];
        assert_eq!(em_kloeden(&s1, &s2, 0.0).unwrap(), em_ic0(&s1, &s2).unwrap());
    }

    #[test]
    fn fourier_all_zero() {
        let pair = levy_fourier((0.0, 0.0), 0.1, 8, &mut Zeros).unwrap();
        assert_eq!(pair.i12, 0.0);
        assert_eq!(pair.i21, 0.0);
        assert!(levy_fourier((0.0, 0.0), 0.1, 0, &mut Zeros).is_err());
    }

    #[test]
    fn fourier_area_is_antisymmetric() {
        let mut src = NormalStream::at(&SeedPath::root(4, 0), 1);
        let draws = FourierDraws::draw(6, &mut src);
        let swapped = FourierDraws {
            mu: [draws.mu[1], draws.mu[0]],
            zeta: [draws.zeta[1].clone(), draws.zeta[0].clone()],
            eta: [draws.eta[1].clone(), draws.eta[0].clone()],
        };
        let (x1, x2, dt) = (0.7, -1.3, 0.05);
        let a = levy_fourier_with((x1, x2), dt, 6, &draws).unwrap();
        let b = levy_fourier_with((x2, x1), dt, 6, &swapped).unwrap();
        let sym = dt * 0.5 * x1 * x2;
        assert!(((a.i12 - sym) + (b.i12 - sym)).abs() < 1e-15);
        assert!((a.i12 - b.i21).abs() < 1e-15);
    }

    #[test]
    fn rho_p_is_nonnegative_and_decreasing() {
        let mut prev = 1.0 / 12.0;
        for p in [1, 2, 4, 16, 256, 4096, 1 << 16] {
            let r = rho_p(p);
            assert!(r >= 0.0 && r < prev);
            prev = r;
        }
        assert!((rho_p(1) - (1.0 / 12.0 - 1.0 / (2.0 * std::f64::consts::PI.powi(2)))).abs() < 1e-16);
    }

    #[test]
    fn dw_dz_moments() {
        let mut src = NormalStream::at(&SeedPath::root(21, 0), 1);
        let n = 100_000;
        let dt = 0.5;
        let (mut sw, mut sz, mut sww, mut szz, mut swz) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let (w, z) = sample_dw_dz(dt, &mut src);
            sw += w;
            sz += z;
            sww += w * w;
            szz += z * z;
            swz += w * z;
        }
        let nf = n as f64;
        let vz = szz / nf - (sz / nf).powi(2);
        let cov = swz / nf - (sw / nf) * (sz / nf);
        let vw = sww / nf - (sw / nf).powi(2);
        assert!((vz / dt.powi(3) - 1.0 / 3.0).abs() < 0.05 / 3.0);
        assert!((cov / dt.powi(2) - 0.5).abs() < 0.025);
        assert!((vw / dt - 1.0).abs() < 0.05);
    }

    #[test]
    fn method_validation() {
        assert!(DoubleIntegralMethod::EmIc0 { n_k: 0 }.validate().is_err());
        assert!(DoubleIntegralMethod::LevyFourier { p: 3 }.validate().is_ok());
        assert!(!DoubleIntegralMethod::LevyFourier { p: 3 }.needs_subdivision());
    }
}
