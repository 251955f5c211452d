//! Black–Scholes, the generalized Heston model in decorrelated form, and
//! European option payoffs.

use serde::{Deserialize, Serialize};

use crate::error::{config, Result, SimError};
use crate::iterint::{diagonal_exact, DoubleIntegralMethod};
use crate::schemes::{mixed_pair, MultiSde, PathResult, ScalarSde};
use crate::wiener::WienerSegment;

/// `dX = rX dt + σX dW`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlackScholes {
    pub r: f64,
    pub sigma: f64,
    pub x0: f64,
}

impl BlackScholes {
    pub fn new(r: f64, sigma: f64, x0: f64) -> Result<Self> {
        let p = Self { r, sigma, x0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.r.is_finite() {
            return config(format!("Black–Scholes needs finite r and sigma >= 0, got r={} sigma={}", self.r, self.sigma));
        }
        if !(self.x0 > 0.0) {
            return config(format!("Black–Scholes needs x0 > 0, got {}", self.x0));
        }
        Ok(())
    }
}

impl Default for BlackScholes {
    fn default() -> Self {
        Self {
            r: 2.0,
            sigma: 1.0,
            x0: 1.0,
        }
    }
}

impl ScalarSde for BlackScholes {
    fn drift(&self, _t: f64, x: f64) -> f64 {
        self.r * x
    }

    fn diffusion(&self, _t: f64, x: f64) -> f64 {
        self.sigma * x
    }

    fn milstein_term(&self, _t: f64, x: f64) -> f64 {
        self.sigma * self.sigma * x
    }

    /// `X_t = X_0 exp(σW_t + (r − ½σ²)t)`, with `t` measured from the start.
    fn exact_solution(&self, t: f64, w: f64, x0: f64) -> Option<f64> {
        Some(x0 * (self.sigma * w + (self.r - 0.5 * self.sigma * self.sigma) * t).exp())
    }
}

/// Generalized Heston parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HestonParams {
    pub r: f64,
    pub theta: f64,
    pub kappa: f64,
    pub xi: f64,
    pub rho: f64,
    pub eta: f64,
    pub s0: f64,
    pub v0: f64,
}

impl Default for HestonParams {
    fn default() -> Self {
        Self {
            r: 0.04,
            theta: 0.07,
            kappa: 3.0,
            xi: 0.24,
            rho: 0.1,
            eta: 2.0 / 3.0,
            s0: 100.0,
            v0: 0.25,
        }
    }
}

impl HestonParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("kappa", self.kappa),
            ("theta", self.theta),
            ("s0", self.s0),
            ("v0", self.v0),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0)) {
            return config(format!("Heston {name} must be > 0, got {v}"));
        }
        if !(self.xi >= 0.0) {
            return config(format!("Heston xi must be >= 0, got {}", self.xi));
        }
        if !(self.rho.abs() < 1.0) {
            return config(format!("Heston needs |rho| < 1, got {}", self.rho));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return config(format!("Heston eta must lie in (0, 1], got {}", self.eta));
        }
        if !self.r.is_finite() {
            return config("Heston r must be finite");
        }
        Ok(())
    }

    pub fn initial_state(&self) -> [f64; 2] {
        [self.s0, self.v0]
    }

    fn rho_bar(&self) -> f64 {
        (1.0 - self.rho * self.rho).sqrt()
    }
}

/// How negative variance enters the coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceClamp {
    /// `v⁺ = max(v, 0)` in every coefficient; the raw `v` stays in the state.
    #[default]
    FullTruncation,
}

/// `v^e` for the clamped variance, with terms carrying a power of zero
/// variance set to 0 rather than blowing up for negative exponents.
fn vpow(v: f64, e: f64) -> f64 {
    if v > 0.0 {
        v.powf(e)
    } else if e == 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Heston system `(S, v)` driven by independent `W¹, W²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Heston {
    pub params: HestonParams,
    pub clamp: VarianceClamp,
}

pub fn make_heston(params: HestonParams, clamp: VarianceClamp) -> Result<Heston> {
    params.validate()?;
    Ok(Heston { params, clamp })
}

pub fn make_black_scholes(params: BlackScholes) -> Result<BlackScholes> {
    params.validate()?;
    Ok(params)
}

impl Heston {
    fn v_plus(&self, v: f64) -> f64 {
        match self.clamp {
            VarianceClamp::FullTruncation => v.max(0.0),
        }
    }
}

impl MultiSde for Heston {
    fn dim(&self) -> usize {
        2
    }

    fn noise_dim(&self) -> usize {
        2
    }

    fn drift(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        let p = &self.params;
        out[0] = p.r * x[0];
        out[1] = p.kappa * (p.theta - self.v_plus(x[1]));
    }

    fn diffusion(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        let p = &self.params;
        let v = self.v_plus(x[1]);
        let vol = p.xi * vpow(v, p.eta);
        out[0] = x[0] * v.sqrt();
        out[1] = 0.0;
        out[2] = p.rho * vol;
        out[3] = p.rho_bar() * vol;
    }

    fn milstein_coeffs(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        let p = &self.params;
        let (s, v) = (x[0], self.v_plus(x[1]));
        let rb = p.rho_bar();
        let half = vpow(v, p.eta - 0.5);
        let vv = p.eta * p.xi * p.xi * vpow(v, 2.0 * p.eta - 1.0);
        // [i][j1][j2] = L^{j1} b^{i,j2}
        out[0] = s * v + 0.5 * p.rho * p.xi * s * half;
        out[1] = 0.0;
        out[2] = 0.5 * rb * p.xi * s * half;
        out[3] = 0.0;
        out[4] = p.rho * p.rho * vv;
        out[5] = p.rho * rb * vv;
        out[6] = p.rho * rb * vv;
        out[7] = (1.0 - p.rho * p.rho) * vv;
    }

    fn clamped(&self, _t: f64, x: &[f64]) -> bool {
        x[1] < 0.0
    }
}

/// The three Heston discretizations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HestonScheme {
    Euler,
    Milstein1d,
    Milstein2d(DoubleIntegralMethod),
}

impl HestonScheme {
    pub fn label(&self) -> String {
        match self {
            Self::Euler => "euler".into(),
            Self::Milstein1d => "milstein_1d".into(),
            Self::Milstein2d(m) => format!("milstein_2d_{}", m.label()),
        }
    }
}

fn heston_path(
    h: &Heston,
    seg: &WienerSegment,
    mut step: impl FnMut(usize, f64, f64, f64, f64) -> Result<[f64; 2]>,
) -> Result<PathResult> {
    if seg.channels() != 2 {
        return config(format!("Heston needs 2 channels, segment has {}", seg.channels()));
    }
    let grid = *seg.grid();
    let mut states = Vec::with_capacity(grid.steps() + 1);
    let mut clamped_steps = Vec::new();
    let [mut s, mut v] = h.params.initial_state();
    states.push(vec![s, v]);
    for n in 0..grid.steps() {
        if v < 0.0 {
            clamped_steps.push(n);
        }
        let [s1, v1] = step(n, s, h.v_plus(v), seg.increment(0, n), seg.increment(1, n))?;
        // The drift acts on the clamped variance; the raw state carries the rest.
        let v1 = v1 + (v - h.v_plus(v));
        if !(s1.is_finite() && v1.is_finite()) {
            return Err(SimError::Divergence { step: n });
        }
        s = s1;
        v = v1;
        states.push(vec![s, v]);
    }
    Ok(PathResult {
        grid,
        states,
        clamped_steps,
    })
}

/// Euler–Maruyama on the decorrelated system.
pub fn heston_euler(params: &HestonParams, seg: &WienerSegment) -> Result<PathResult> {
    let h = make_heston(*params, VarianceClamp::FullTruncation)?;
    let p = h.params;
    let dt = seg.grid().dt();
    let rb = p.rho_bar();
    heston_path(&h, seg, |_, s, v, dw1, dw2| {
        let s1 = s + s * p.r * dt + s * v.sqrt() * dw1;
        let v1 = v + p.kappa * (p.theta - v) * dt + p.xi * vpow(v, p.eta) * (p.rho * dw1 + rb * dw2);
        Ok([s1, v1])
    })
}

/// Componentwise Milstein ignoring the cross dependence; the variance is
/// driven by `ΔW²` alone.
pub fn heston_milstein_1d(params: &HestonParams, seg: &WienerSegment) -> Result<PathResult> {
    let h = make_heston(*params, VarianceClamp::FullTruncation)?;
    let p = h.params;
    let dt = seg.grid().dt();
    heston_path(&h, seg, |_, s, v, dw1, dw2| {
        let s1 = s + s * p.r * dt + s * v.sqrt() * dw1 + s * v * diagonal_exact(dw1, dt);
        let v1 = v
            + p.kappa * (p.theta - v) * dt
            + p.xi * vpow(v, p.eta) * dw2
            + p.eta * p.xi * p.xi * vpow(v, 2.0 * p.eta - 1.0) * diagonal_exact(dw2, dt);
        Ok([s1, v1])
    })
}

/// Full two-dimensional Milstein with one `I_(2,1)` evaluation per step.
pub fn heston_milstein_2d(
    params: &HestonParams,
    seg: &WienerSegment,
    method: &DoubleIntegralMethod,
) -> Result<PathResult> {
    method.validate()?;
    let h = make_heston(*params, VarianceClamp::FullTruncation)?;
    let p = h.params;
    let dt = seg.grid().dt();
    let rb = p.rho_bar();
    let mut w2 = 0.0;
    heston_path(&h, seg, |n, s, v, dw1, dw2| {
        let i21 = mixed_pair(method, seg, n, (0, 1), 0, w2)?.i21;
        w2 += dw2;
        let half = vpow(v, p.eta - 0.5);
        let s1 = s + s * p.r * dt + s * v.sqrt() * dw1
            + 0.5 * rb * p.xi * s * half * i21
            + (0.5 * s * v + 0.25 * p.rho * p.xi * s * half) * (dw1 * dw1 - dt);
        let dv = p.rho * dw1 + rb * dw2;
        let v1 = v
            + p.kappa * (p.theta - v) * dt
            + p.xi * vpow(v, p.eta) * dv
            + 0.5 * p.eta * p.xi * p.xi * vpow(v, 2.0 * p.eta - 1.0) * (dv * dv - dt);
        Ok([s1, v1])
    })
}

pub fn simulate_heston(params: &HestonParams, seg: &WienerSegment, scheme: &HestonScheme) -> Result<PathResult> {
    match scheme {
        HestonScheme::Euler => heston_euler(params, seg),
        HestonScheme::Milstein1d => heston_milstein_1d(params, seg),
        HestonScheme::Milstein2d(m) => heston_milstein_2d(params, seg, m),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionKind {
    Call,
    Put,
}

/// European option with discounting at rate `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionSpec {
    pub kind: OptionKind,
    pub strike: f64,
    pub maturity: f64,
    pub r: f64,
}

impl OptionSpec {
    pub fn new(kind: OptionKind, strike: f64, maturity: f64, r: f64) -> Result<Self> {
        if !(strike > 0.0) || !(maturity > 0.0) {
            return config(format!("option needs K > 0 and T > 0, got K={strike} T={maturity}"));
        }
        Ok(Self {
            kind,
            strike,
            maturity,
            r,
        })
    }

    /// Discounted payoff of one terminal price.
    pub fn payoff(&self, s: f64) -> f64 {
        let intrinsic = match self.kind {
            OptionKind::Call => (s - self.strike).max(0.0),
            OptionKind::Put => (self.strike - s).max(0.0),
        };
        (-self.r * self.maturity).exp() * intrinsic
    }
}

/// `e^{−rT} · mean(payoff)`.
pub fn price_option(terminals: &[f64], spec: &OptionSpec) -> Result<f64> {
    if terminals.is_empty() {
        return Err(SimError::DegenerateData("no terminal prices to average".into()));
    }
    let sum = terminals.iter().fold(0.0, |acc, &s| acc + spec.payoff(s));
    Ok(sum / terminals.len() as f64)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::rng::SeedPath;
    use crate::schemes::{euler_md, euler_scalar, milstein_md};
    use crate::wiener::{generate_segment, TimeGrid, WienerTree};

    fn lb(h: &Heston, s: f64, v: f64) -> [f64; 8] {
        let mut out = [0.0; 8];
        h.milstein_coeffs(0.0, &[s, v], &mut out);
        out
    }

    #[test]
    fn bs_exact_solution_limits() {
        let bs = BlackScholes::new(0.3, 0.0, 2.0).unwrap();
        assert!((bs.exact_solution(1.5, 0.0, 2.0).unwrap() - 2.0 * (0.45f64).exp()).abs() < 1e-14);
        assert_eq!(BlackScholes::default().exact_solution(0.0, 0.0, 1.0), Some(1.0));
        assert!(BlackScholes::new(1.0, -0.1, 1.0).is_err());
        assert!(BlackScholes::new(1.0, 0.1, 0.0).is_err());
    }

    #[test]
    fn heston_validation() {
        assert!(make_heston(HestonParams::default(), VarianceClamp::FullTruncation).is_ok());
        for bad in [
            HestonParams { rho: 1.0, ..Default::default() },
            HestonParams { eta: 0.0, ..Default::default() },
            HestonParams { eta: 1.2, ..Default::default() },
            HestonParams { kappa: 0.0, ..Default::default() },
            HestonParams { v0: -0.1, ..Default::default() },
        ] {
            assert!(matches!(make_heston(bad, VarianceClamp::FullTruncation), Err(SimError::Config(_))));
        }
    }

    #[test]
    fn rho_zero_coefficients() {
        let p = HestonParams { rho: 0.0, ..Default::default() };
        let h = make_heston(p, VarianceClamp::FullTruncation).unwrap();
        let (s, v) = (90.0, 0.2);
        let c = lb(&h, s, v);
        assert!((c[2] - 0.5 * p.xi * s * v.powf(p.eta - 0.5)).abs() < 1e-12);
        assert_eq!(c[4], 0.0);
        assert_eq!(c[5], 0.0);
        assert_eq!(c[6], 0.0);
        assert!((c[7] - p.eta * p.xi * p.xi * v.powf(2.0 * p.eta - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn xi_zero_leaves_only_sv_term() {
        let h = make_heston(HestonParams { xi: 0.0, ..Default::default() }, VarianceClamp::FullTruncation).unwrap();
        let c = lb(&h, 80.0, 0.3);
        assert!((c[0] - 80.0 * 0.3).abs() < 1e-12);
        assert!(c[1..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn reference_parameters_start_unclamped() {
        let h = make_heston(HestonParams::default(), VarianceClamp::FullTruncation).unwrap();
        assert!(!h.clamped(0.0, &h.params.initial_state()));
    }

    #[test]
    fn combined_variance_correction_matches_four_terms() {
        let p = HestonParams::default();
        let h = make_heston(p, VarianceClamp::FullTruncation).unwrap();
        let (dw1, dw2, dt, v) = (0.13, -0.27, 0.05, 0.31);
        let c = lb(&h, 100.0, v);
        let i11 = diagonal_exact(dw1, dt);
        let i22 = diagonal_exact(dw2, dt);
        let (i12, i21) = (0.2 * dw1 * dw2, 0.8 * dw1 * dw2);
        let four = c[4] * i11 + c[5] * i12 + c[6] * i21 + c[7] * i22;
        let dv = p.rho * dw1 + p.rho_bar() * dw2;
        let combined = 0.5 * p.eta * p.xi * p.xi * v.powf(2.0 * p.eta - 1.0) * (dv * dv - dt);
        assert!((four - combined).abs() <= 1e-12 * combined.abs().max(1e-300));
    }

    #[test]
    fn euler_matches_generic_euler() {
        let p = HestonParams::default();
        let h = make_heston(p, VarianceClamp::FullTruncation).unwrap();
        let seg = generate_segment(SeedPath::root(11, 0), 2, TimeGrid::new(0.0, 1.0, 64).unwrap()).unwrap();
        let a = heston_euler(&p, &seg).unwrap();
        let b = euler_md(&h, &p.initial_state(), &seg).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            assert!((x[0] - y[0]).abs() < 1e-10 * x[0].abs());
            assert!((x[1] - y[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn milstein_2d_matches_generic_milstein() {
        let p = HestonParams::default();
        let h = make_heston(p, VarianceClamp::FullTruncation).unwrap();
        let tree = Arc::new(WienerTree::uniform(12, 3, 2, TimeGrid::new(0.0, 1.0, 16).unwrap(), 2).unwrap());
        let seg = tree.root();
        for m in [
            DoubleIntegralMethod::EmIc0 { n_k: 8 },
            DoubleIntegralMethod::MilsteinL0 { n_k: 16 },
            DoubleIntegralMethod::EmKloeden { n_k: 4 },
            DoubleIntegralMethod::LevyFourier { p: 8 },
        ] {
            let a = heston_milstein_2d(&p, &seg, &m).unwrap();
            let b = milstein_md(&h, &p.initial_state(), &seg, Some(&m)).unwrap();
            for (x, y) in a.states.iter().zip(&b.states) {
                assert!((x[0] - y[0]).abs() < 1e-10 * x[0].abs(), "{m:?}");
                assert!((x[1] - y[1]).abs() < 1e-12, "{m:?}");
            }
        }
    }

    #[test]
    fn xi_zero_two_d_equals_one_d() {
        let p = HestonParams { xi: 0.0, ..Default::default() };
        let tree = Arc::new(WienerTree::uniform(13, 0, 2, TimeGrid::new(0.0, 1.0, 32).unwrap(), 2).unwrap());
        let seg = tree.root();
        let a = heston_milstein_1d(&p, &seg).unwrap();
        let b = heston_milstein_2d(&p, &seg, &DoubleIntegralMethod::EmIc0 { n_k: 4 }).unwrap();
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn constant_variance_reduces_to_black_scholes() {
        let v0 = 0.09;
        let p = HestonParams {
            xi: 0.0,
            v0,
            theta: v0,
            ..Default::default()
        };
        let bs = BlackScholes::new(p.r, v0.sqrt(), p.s0).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 64).unwrap();
        let seg = generate_segment(SeedPath::root(14, 0), 2, grid).unwrap();
        let single = WienerSegment::from_increments(grid, vec![seg.channel(0).to_vec()]).unwrap();
        let h = heston_euler(&p, &seg).unwrap();
        let b = euler_scalar(&bs, p.s0, &single).unwrap();
        for (x, y) in h.states.iter().zip(&b.states) {
            assert_eq!(x[0], y[0]);
            assert_eq!(x[1], v0);
        }
    }

    #[test]
    fn clamp_events_recorded() {
        let p = HestonParams {
            xi: 3.0,
            eta: 1.0,
            v0: 0.01,
            theta: 0.01,
            ..Default::default()
        };
        let seg = generate_segment(SeedPath::root(15, 0), 2, TimeGrid::new(0.0, 1.0, 16).unwrap()).unwrap();
        let path = heston_euler(&p, &seg).unwrap();
        let negatives = path.states[..16].iter().filter(|x| x[1] < 0.0).count();
        assert_eq!(path.clamped_steps.len(), negatives);
    }

    #[test]
    fn option_prices() {
        let call = OptionSpec::new(OptionKind::Call, 100.0, 1.0, 0.05).unwrap();
        let put = OptionSpec { kind: OptionKind::Put, ..call };
        assert_eq!(price_option(&[100.0; 5], &call).unwrap(), 0.0);
        assert_eq!(price_option(&[100.0; 5], &put).unwrap(), 0.0);
        let s = [80.0, 95.0, 110.0, 130.0];
        let parity = price_option(&s, &call).unwrap() - price_option(&s, &put).unwrap();
        let mean: f64 = s.iter().map(|x| x - 100.0).sum::<f64>() / 4.0;
        assert!((parity - (-0.05f64).exp() * mean).abs() < 1e-12);
        assert!(matches!(price_option(&[], &call), Err(SimError::DegenerateData(_))));
        assert!(OptionSpec::new(OptionKind::Call, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn payoff_monotonicity() {
        let call = OptionSpec::new(OptionKind::Call, 100.0, 1.0, 0.02).unwrap();
        let put = OptionSpec { kind: OptionKind::Put, ..call };
        let xs: Vec<f64> = (0..50).map(|i| 60.0 + 2.0 * i as f64).collect();
        for w in xs.windows(2) {
            assert!(call.payoff(w[1]) >= call.payoff(w[0]));
            assert!(put.payoff(w[1]) <= put.payoff(w[0]));
        }
    }
}
