//! Sweep cost of OGL over every k against δ-TOGL over its δ grid, with a
//! dense ridge fit for contrast, on a 2000-atom dictionary.
//!
//! cargo run --release --example speed

use togl::bench::{oracle_select, sweep, ExperimentConfig, Grid, Task};

fn main() -> togl::Result<()> {
    let mut config = ExperimentConfig::sinc_default();
    config.task = Task::Sinc {
        m_train: 1000,
        m_test: 1000,
        n: 2000,
        sigmas: vec![0.1],
    };
    config.methods = togl::bench::parse_methods("ogl:max,dtogl:rand,ridge")?;
    config.k_max = 2000;
    config.lambda_grid = Grid::List(vec![1e-4]);
    config.seeds = 3;
    config.parallel = false;

    let result = sweep(&config)?;
    for method in ["ogl:max", "dtogl:rand", "ridge"] {
        println!("{method:>12}: {:.3} s total", result.total_seconds(method));
    }
    for o in oracle_select(&result.rows)? {
        println!(
            "{:>12}: best {} rmse {:.4} sparsity {:.1}",
            o.method, o.param, o.mean_test_rmse, o.mean_sparsity
        );
    }
    Ok(())
}
