//! Channel capacity and the MSE lower bound next to a simulated 2-D curve.

use pbaloc::analysis::{self, McConfig};

fn main() -> pbaloc::Result<()> {
    for eps in [0.0, 0.05, 0.1, 0.2, 0.3, 0.5] {
        println!("C({eps:.2}) = {:.4} bits", analysis::capacity(eps)?);
    }

    let cfg = McConfig { grid: 256, dims: 2, eps_true: 0.1, n_max: 60, trials: 200, seed: 0 };
    let rows = analysis::curve_rows(&analysis::run_mc(&cfg)?, &cfg)?;
    println!("\n{:>4} {:>12} {:>12}", "n", "mse", "bound");
    for r in rows.iter().step_by(6) {
        println!("{:>4} {:>12.3} {:>12.3e}", r.n, r.mse, r.bound);
    }
    Ok(())
}
