//! Stationarity of both environments, the density-conservation test and
//! the CLI runner driven from code.

use driftlab::env::{density_conservation_test, DensityTest, EnvParams, LatticeWindow, Model};
use driftlab::experiment::{run_experiment, write_csv, ExperimentConfig};

fn main() -> driftlab::Result<()> {
    for model in [Model::Sep, Model::Pcrw] {
        let cfg = ExperimentConfig::parse(&format!(
            r#"{{"subcommand": "env-check", "model": "{model}", "rho": 0.4, "p_bullet": 0.8, "p_circ": 0.2,
                "n": 1, "reps": 4000, "seed": 1, "env_check": {{"t": 16, "interval": 10}}}}"#
        ))?;
        let out = run_experiment(&cfg);
        write_csv(&out.records, std::io::stdout().lock())?;
    }
    let dt = DensityTest {
        params: EnvParams::sep(0.5, 1.0)?,
        window: LatticeWindow::new(1_500)?,
        t: 300.0,
        mesh: 16,
        eps: 0.25,
        reps: 100,
        threshold: 0.05,
    };
    let r = density_conservation_test(&dt, 3)?;
    println!(
        "density conservation: {} of {} exceed, max deviation {:.2}, regime {}, passed {}",
        r.exceedances, r.reps, r.max_deviation, r.regime_ok, r.passed
    );
    Ok(())
}
