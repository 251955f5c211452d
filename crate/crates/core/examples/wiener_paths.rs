//! Coarse and refined views of one Brownian path.
//!
//! Run with `cargo run --example wiener_paths`.

use std::sync::Arc;

use itosim::wiener::{coarsen, TimeGrid, WienerTree};

fn main() -> itosim::Result<()> {
    let base = TimeGrid::new(0.0, 1.0, 4)?;
    let tree = Arc::new(WienerTree::uniform(7, 0, 2, base, 2)?);

    let fine = tree.segment(3);
    let back = coarsen(&fine, 8)?;
    for c in 0..2 {
        println!(
            "channel {c}: W(1) = {:+.6} on 4 steps, {:+.6} on 32 steps",
            tree.root().total(c),
            fine.total(c)
        );
        for (a, b) in tree.root().channel(c).iter().zip(back.channel(c)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    // Any single coarse increment can be refined on its own.
    let dw = tree.root().increment(0, 1);
    let pieces = tree.descend(0, 0, 1, dw, 3);
    println!("step 1 of channel 0: {dw:+.6} splits into {pieces:.4?}");

    let mut out = std::io::stdout().lock();
    coarsen(&fine, 4)?.write_csv(&mut out).expect("stdout");
    Ok(())
}
