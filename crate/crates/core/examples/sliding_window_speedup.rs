//! Classifier calls: bisection search against a multi-scale sliding window.

use pbaloc::cli::{compare_rows, oracle_seed, ExperimentConfig};
use pbaloc::geometry::{Dims, Point};
use pbaloc::scene::generate_star_scene;

fn main() -> pbaloc::Result<()> {
    let dims = Dims::new(600, 800)?;
    println!("{:<12} {:>9} {:>9} {:>8} {:>8}", "center", "pba", "window", "speedup", "err px");
    for (s, center) in [Point::new(300, 400), Point::new(250, 520), Point::new(420, 310), Point::new(80, 700)].into_iter().enumerate() {
        let scene = generate_star_scene(dims, center, 12, 0.2, s as u64)?;
        let mut cfg = ExperimentConfig::default();
        cfg.engine.rng_seed = s as u64;
        cfg.oracle.seed = oracle_seed(s as u64);
        let (rows, _) = compare_rows(&cfg, &scene)?;
        println!(
            "{:<12} {:>9} {:>9} {:>7.1}x {:>8.1}",
            format!("{},{}", center.row, center.col),
            rows[0].calls,
            rows[1].calls,
            rows[0].speedup,
            rows[0].err_l2
        );
    }
    Ok(())
}
