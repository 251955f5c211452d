//! Strong convergence of Euler and Milstein for geometric Brownian motion,
//! measured against the closed-form solution.

use itosim::convergence::{run_study, Functional, Metric, Mode, ScalarSimulator, SchemeChoice, StudyConfig};
use itosim::models::BlackScholes;

fn main() -> itosim::Result<()> {
    let model = BlackScholes::default();
    let cfg = StudyConfig {
        t0: 0.0,
        t_end: 1.0,
        base_dt: 1.0 / 32.0,
        k: 2,
        levels: 6,
        replicates: 1000,
        metric: Metric::StrongAbs,
        functional: Functional::default(),
        mode: Mode::Truth,
        seed: 20240601,
        workers: 1,
    };
    for scheme in [SchemeChoice::Euler, SchemeChoice::Milstein] {
        let sim = ScalarSimulator::new(model, model.x0, scheme)?;
        let report = run_study(&sim, &cfg)?;
        println!("{:<9} gamma = {:.3}  logC = {:.3}", scheme.label(), report.gamma(), report.log_c());
        for (dt, err) in &report.points {
            println!("    dt = {dt:.6}  error = {err:.3e}");
        }
    }
    Ok(())
}
