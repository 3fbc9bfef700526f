//! Pure greedy learning, ridge and Lasso (FISTA) next to δ-TOGL.
//!
//! cargo run --release --example baselines

use togl::bench::{oracle_select, parse_methods, sweep, ExperimentConfig, Grid, Task};

fn main() -> togl::Result<()> {
    let mut config = ExperimentConfig::sinc_default();
    config.task = Task::Sinc {
        m_train: 1000,
        m_test: 1000,
        n: 300,
        sigmas: vec![0.1, 1.0],
    };
    config.methods = parse_methods("pgl,ridge,fista,dtogl:rand")?;
    config.lambda_grid = Grid::Log {
        lo: 1e-7,
        hi: 1e-1,
        count: 7,
    };
    config.seeds = 3;

    let result = sweep(&config)?;
    println!(
        "{:<11} {:>6} {:>28} {:>16} {:>9}",
        "method", "sigma", "best", "test rmse (se)", "sparsity"
    );
    for o in oracle_select(&result.rows)? {
        println!(
            "{:<11} {:>6} {:>28} {:>8.4} ({:.4}) {:>9.1}",
            o.method,
            o.sigma,
            o.param.to_string(),
            o.mean_test_rmse,
            o.se_test_rmse,
            o.mean_sparsity
        );
    }
    Ok(())
}
