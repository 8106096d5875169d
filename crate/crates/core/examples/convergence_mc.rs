//! 1-D Monte Carlo convergence under a binary symmetric channel.

use pbaloc::analysis::{self, McConfig, DECAY_FIT_WINDOW};

fn main() -> pbaloc::Result<()> {
    for eps in [0.0, 0.05, 0.1, 0.2] {
        let cfg = McConfig { eps_true: eps, ..McConfig::default() };
        let curve = analysis::run_mc(&cfg)?;
        let rate = analysis::fit_decay_rate(&curve, DECAY_FIT_WINDOW);
        let within = (0..cfg.trials)
            .filter(|&i| analysis::run_trial(&cfg, i).map(|e| e[cfg.n_max] <= 4.0).unwrap_or(false))
            .count();
        println!(
            "eps {eps:.2}: mse(10) {:>9.2} mse(30) {:>8.2} mse(200) {:>7.2}  slope {:>8}  within 2 bins {within}/{}",
            curve.mse[10],
            curve.mse[30],
            curve.mse[200],
            rate.map(|r| format!("{r:.3}")).unwrap_or_else(|_| "n/a".into()),
            cfg.trials
        );
    }
    Ok(())
}
