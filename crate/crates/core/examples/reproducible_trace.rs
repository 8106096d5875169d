//! Write a trace CSV twice from the same seeds and check the data rows match.

use pbaloc::cli::{provenance_header, write_csv, ExperimentConfig, OracleKind};
use pbaloc::engine;
use pbaloc::geometry::{Dims, Point};
use pbaloc::oracles::BscOracle;

fn trace_csv(cfg: &ExperimentConfig) -> pbaloc::Result<String> {
    let mut oracle = BscOracle::new(cfg.scene.center, cfg.oracle.eps_true, cfg.oracle.seed)?;
    let res = engine::run(cfg.scene.dims, &mut oracle, &cfg.engine)?;
    let mut buf = Vec::new();
    write_csv(&mut buf, &provenance_header(cfg, "localize", cfg.engine.rng_seed), &res.trace)?;
    Ok(String::from_utf8(buf).expect("csv is utf-8"))
}

fn main() -> pbaloc::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.scene.dims = Dims::new(256, 256)?;
    cfg.scene.center = Point::new(100, 41);
    cfg.oracle.kind = OracleKind::Bsc;
    cfg.oracle.eps_true = 0.0;
    cfg.engine.rng_seed = 42;

    let a = trace_csv(&cfg)?;
    let b = trace_csv(&cfg)?;
    print!("{}", a.lines().take(10).map(|l| format!("{l}\n")).collect::<String>());
    println!("... {} lines, identical on rerun: {}", a.lines().count(), a == b);
    Ok(())
}
