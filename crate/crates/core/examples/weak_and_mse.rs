//! Weak and mean-square coupled rates alongside the strong rate.

use itosim::convergence::{
    error_coupled_mse, error_coupled_strong, error_coupled_weak, Functional, Metric, Mode, ScalarSimulator,
    SchemeChoice, StudyConfig,
};
use itosim::models::BlackScholes;

fn main() -> itosim::Result<()> {
    let model = BlackScholes::default();
    let cfg = StudyConfig {
        t0: 0.0,
        t_end: 1.0,
        base_dt: 1.0 / 32.0,
        k: 2,
        levels: 5,
        replicates: 2000,
        metric: Metric::StrongAbs,
        functional: Functional::default(),
        mode: Mode::Coupled,
        seed: 8,
        workers: 1,
    };
    println!("scheme     strong   weak    mse");
    for scheme in [SchemeChoice::Euler, SchemeChoice::Milstein] {
        let sim = ScalarSimulator::new(model, model.x0, scheme)?;
        println!(
            "{:<9} {:>6.3} {:>6.3} {:>6.3}",
            scheme.label(),
            error_coupled_strong(&sim, &cfg)?.gamma(),
            error_coupled_weak(&sim, &cfg)?.gamma(),
            error_coupled_mse(&sim, &cfg)?.gamma()
        );
    }
    Ok(())
}
