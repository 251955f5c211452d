//! Monte Carlo checks with oracles computed independently of the code under test.

use std::sync::Arc;

use itosim::convergence::{
    error_coupled_mse, error_coupled_strong, fit_rate, simulate_levels, Functional, Metric, Mode, SchemeChoice,
    ScalarSimulator, StudyConfig,
};
use itosim::iterint::{levy_fourier, milstein_l0, reference_oracle};
use itosim::models::{heston_euler, BlackScholes, HestonParams};
use itosim::rng::{NormalStream, SeedPath};
use itosim::wiener::{subdivide_interval, TimeGrid, WienerTree};

fn bs_study(base_dt: f64, levels: usize, replicates: usize, mode: Mode) -> StudyConfig {
    StudyConfig {
        t0: 0.0,
        t_end: 1.0,
        base_dt,
        k: 2,
        levels,
        replicates,
        metric: Metric::StrongAbs,
        functional: Functional::default(),
        mode,
        seed: 99,
        workers: 1,
    }
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

#[test]
fn euler_weak_order_against_known_mean() {
    let (r, sigma) = (1.0, 0.5);
    let bs = BlackScholes::new(r, sigma, 1.0).unwrap();
    let sim = ScalarSimulator::new(bs, 1.0, SchemeChoice::Euler).unwrap();
    let cfg = bs_study(0.5, 4, 100_000, Mode::Truth);
    let samples = simulate_levels(&sim, &cfg).unwrap();
    let target = r.exp();
    let pts: Vec<(f64, f64)> = samples
        .dts
        .iter()
        .enumerate()
        .map(|(l, &dt)| {
            let sum: f64 = samples.terminals.iter().flatten().map(|t| t[l][0]).sum();
            (dt, (sum / cfg.replicates as f64 - target).abs())
        })
        .collect();
    let slope = fit_rate(&pts).unwrap().slope;
    assert!((0.6..=1.4).contains(&slope), "weak slope {slope}, points {pts:?}");
}

#[test]
fn mse_exponent_is_twice_strong_exponent() {
    let cfg = bs_study(1.0 / 32.0, 5, 1000, Mode::Coupled);
    for (scheme, expected) in [(SchemeChoice::Euler, 1.0), (SchemeChoice::Milstein, 2.0)] {
        let sim = ScalarSimulator::new(BlackScholes::default(), 1.0, scheme).unwrap();
        let mse = error_coupled_mse(&sim, &cfg).unwrap().gamma();
        let strong = error_coupled_strong(&sim, &cfg).unwrap().gamma();
        assert!((mse - expected).abs() <= 0.3, "{scheme:?}: mse slope {mse}");
        assert!((mse - 2.0 * strong).abs() <= 0.3, "{scheme:?}: mse {mse} strong {strong}");
    }
}

/// Oracle at `n` and `2n` subdivisions of the same path differ in RMS by no
/// more than the sum of their predicted RMS errors `√(¼Δδ)`.
#[test]
fn oracle_self_consistency() {
    let dt = 1.0 / 16.0;
    let n = 256;
    let paths = 2000;
    let mut sq = 0.0;
    for p in 0..paths {
        let tree = Arc::new(WienerTree::uniform(3, p, 2, TimeGrid::new(0.0, dt, 1).unwrap(), 2).unwrap());
        let root = tree.root();
        let fine: Vec<Vec<f64>> = (0..2).map(|c| tree.descend(c, 0, 0, root.increment(c, 0), 9)).collect();
        let half: Vec<Vec<f64>> = fine.iter().map(|f| f.chunks(2).map(|c| c[0] + c[1]).collect()).collect();
        let a = milstein_l0(&fine[0], &fine[1]).unwrap();
        let b = milstein_l0(&half[0], &half[1]).unwrap();
        sq += (a - b).powi(2);
    }
    let rms = (sq / paths as f64).sqrt();
    let bound = (0.25 * dt * dt / n as f64).sqrt() * (1.0 + 0.5f64.sqrt());
    assert!(rms <= bound, "rms {rms} bound {bound}");
}

#[test]
fn oracle_conditional_mean_is_half_product() {
    let dt = 1.0 / 16.0;
    let (w1, w2) = (0.2, -0.15);
    let samples: Vec<(f64, f64)> = (0..10_000)
        .map(|i| {
            let subs = subdivide_interval(&[w1, w2], 512, dt / 512.0, SeedPath::root(8, i)).unwrap();
            let pair = reference_oracle(&subs[0], &subs[1]).unwrap();
            (pair.i12, pair.levy_area)
        })
        .collect();
    let i12: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let area: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let (m, sd) = mean_sd(&i12);
    let tol = 5.0 * sd / (i12.len() as f64).sqrt();
    assert!((m - 0.5 * w1 * w2).abs() <= tol, "mean {m} vs {}", 0.5 * w1 * w2);
    let (ma, sda) = mean_sd(&area);
    assert!(ma.abs() <= 5.0 * sda / (area.len() as f64).sqrt(), "area mean {ma}");
}

#[test]
fn levy_area_has_zero_mean() {
    let dt = 0.25;
    let mut stream = NormalStream::at(&SeedPath::root(12, 0), 1);
    let areas: Vec<f64> = (0..20_000)
        .map(|i| {
            let xi = (((i % 7) as f64 - 3.0) / 2.0, ((i % 5) as f64 - 2.0) / 2.0);
            levy_fourier(xi, dt, 16, &mut stream).unwrap().levy_area
        })
        .collect();
    let (m, sd) = mean_sd(&areas);
    assert!(m.abs() <= 5.0 * sd / (areas.len() as f64).sqrt(), "mean area {m}");
}

#[test]
fn heston_clamp_rate_is_small_at_reference_parameters() {
    let p = HestonParams::default();
    let grid = TimeGrid::new(0.0, 1.0, 8).unwrap();
    let mut clamped = 0;
    let mut steps = 0;
    for rep in 0..500 {
        let tree = Arc::new(WienerTree::uniform(17, rep, 2, grid, 2).unwrap());
        let path = heston_euler(&p, &tree.root()).unwrap();
        clamped += path.clamped_steps.len();
        steps += 8;
    }
    assert!((clamped as f64) < 0.01 * steps as f64, "{clamped} of {steps} steps clamped");
}
