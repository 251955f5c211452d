//! Coupled convergence rates of the Heston schemes for the asset price.

use itosim::convergence::{
    error_coupled_strong, Functional, HestonSimulator, IntegralRule, Metric, Mode, SchemeChoice, StudyConfig,
};
use itosim::iterint::DoubleIntegralMethod;
use itosim::models::HestonParams;

fn main() -> itosim::Result<()> {
    let params = HestonParams::default();
    let cfg = StudyConfig {
        t0: 0.0,
        t_end: 1.0,
        base_dt: 0.125,
        k: 2,
        levels: 4,
        replicates: 200,
        metric: Metric::StrongAbs,
        functional: Functional::Coordinate { index: 0 },
        mode: Mode::Coupled,
        seed: 3,
        workers: 1,
    };
    let rule = |method| SchemeChoice::Milstein2d {
        rule: IntegralRule::inverse_step(method, 1.0),
    };
    let schemes = [
        SchemeChoice::Euler,
        SchemeChoice::Milstein1d,
        rule(DoubleIntegralMethod::LevyFourier { p: 1 }),
        rule(DoubleIntegralMethod::EmIc0 { n_k: 1 }),
        rule(DoubleIntegralMethod::MilsteinL0 { n_k: 1 }),
    ];
    for scheme in schemes {
        let report = error_coupled_strong(&HestonSimulator::new(params, scheme)?, &cfg)?;
        println!(
            "{:<28} gamma = {:.3}  (excluded replicates: {})",
            scheme.label(),
            report.gamma(),
            report.divergent
        );
    }
    Ok(())
}
