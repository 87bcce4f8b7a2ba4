//! A short Monte Carlo run of each benchmark study, written to a
//! directory given as the first argument (default: a temporary one).

use regkit::experiments::{run, Experiment, ExperimentConfig};

fn main() -> regkit::Result<()> {
    let out = std::env::args().nth(1).map(std::path::PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("regkit-mc"));
    for which in [Experiment::DisturbedInput, Experiment::AtomicNoise] {
        let mut cfg = ExperimentConfig::for_experiment(which);
        cfg.runs = 4;
        cfg.seed = 42;
        cfg.subgradient_iters = 100;
        let report = run(&cfg)?;
        let dir = out.join(which.key());
        report.write_all(&dir)?;
        println!("{} -> {}", which.key(), dir.display());
        report.write_summary(std::io::stdout())?;
    }
    Ok(())
}
