//! δ-thresholding OGL: atoms kept and test error across the δ grid, for
//! index-order and random selection among active atoms.
//!
//! cargo run --release --example delta_togl

use togl::bench::{interquartile_range, parse_methods, sweep, ExperimentConfig, Grid, Task};

fn main() -> togl::Result<()> {
    let mut config = ExperimentConfig::sinc_default();
    config.task = Task::Sinc {
        m_train: 1000,
        m_test: 1000,
        n: 300,
        sigmas: vec![0.5],
    };
    config.methods = parse_methods("dtogl:first,dtogl:rand")?;
    config.delta_grid = Grid::Log {
        lo: 1e-4,
        hi: 0.5,
        count: 12,
    };
    config.seeds = 5;

    let rows = sweep(&config)?.rows;
    for method in ["dtogl:first", "dtogl:rand"] {
        println!("{method}");
        println!("{:>10} {:>10} {:>10} {:>14}", "delta", "rmse", "atoms", "stop");
        let mine: Vec<_> = rows.iter().filter(|r| r.method == method && r.seed == 0).collect();
        for r in &mine {
            println!(
                "{:>10.2e} {:>10.4} {:>10} {:>14}",
                r.param.magnitude(),
                r.test_rmse,
                r.sparsity,
                r.termination
            );
        }
        let errs: Vec<f64> = mine.iter().map(|r| r.test_rmse).collect();
        println!("interquartile range of test rmse: {:.4}\n", interquartile_range(&errs));
    }
    Ok(())
}
