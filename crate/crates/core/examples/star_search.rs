//! Localize a star in salt-and-pepper noise with the simulated block classifier.

use pbaloc::engine::{self, EngineConfig};
use pbaloc::geometry::{Dims, Point};
use pbaloc::oracles::{BlockTruthOracle, Oracle};
use pbaloc::scene::generate_star_scene;

fn main() -> pbaloc::Result<()> {
    let dims = Dims::new(400, 400)?;
    let scene = generate_star_scene(dims, Point::new(130, 270), 12, 0.2, 1)?;
    let mut oracle = BlockTruthOracle::new(&scene, 0.05, 0.75, 2)?;
    let res = engine::run(dims, &mut oracle, &EngineConfig { rng_seed: 3, ..Default::default() })?;

    for row in res.trace.iter().take(12) {
        println!(
            "t={:<3} {} split {:<3} {:<4} Q={} y={} eps={:.3} median ({},{})",
            row.t, row.axis, row.split_bin, row.side, row.q_blocks, row.y, row.epsilon, row.median_row, row.median_col
        );
    }
    println!("...");
    println!(
        "target {:?} estimate {:?} error {:.1} px, {} iterations, {} classifier calls, {:?}",
        scene.target_center(),
        res.center,
        res.center.distance(&scene.target_center()),
        res.iterations_used,
        oracle.stats().calls,
        res.status
    );
    Ok(())
}
