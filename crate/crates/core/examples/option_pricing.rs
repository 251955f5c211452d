//! European call and put under Heston, with put-call parity as a sanity check.

use std::sync::Arc;

use itosim::iterint::DoubleIntegralMethod;
use itosim::models::{price_option, simulate_heston, HestonParams, HestonScheme, OptionKind, OptionSpec};
use itosim::wiener::{TimeGrid, WienerTree};

fn main() -> itosim::Result<()> {
    let p = HestonParams::default();
    let (strike, maturity) = (100.0, 1.0);
    let steps = 64;
    let scheme = HestonScheme::Milstein2d(DoubleIntegralMethod::MilsteinL0 { n_k: 64 });

    let mut terminals = Vec::new();
    let mut clamped = 0;
    for rep in 0..4000 {
        let tree = Arc::new(WienerTree::uniform(42, rep, 2, TimeGrid::new(0.0, maturity, steps)?, 2)?);
        let path = simulate_heston(&p, &tree.root(), &scheme)?;
        clamped += path.clamped_steps.len();
        terminals.push(path.terminal()[0]);
    }
    let call = price_option(&terminals, &OptionSpec::new(OptionKind::Call, strike, maturity, p.r)?)?;
    let put = price_option(&terminals, &OptionSpec::new(OptionKind::Put, strike, maturity, p.r)?)?;
    let mean = terminals.iter().sum::<f64>() / terminals.len() as f64;
    let parity = mean * (-p.r * maturity).exp() - strike * (-p.r * maturity).exp();
    println!("{}: call {call:.4}  put {put:.4}", scheme.label());
    println!("call - put = {:.4}, discounted forward - K e^(-rT) = {parity:.4}", call - put);
    println!("variance clamped on {clamped} steps");
    Ok(())
}
