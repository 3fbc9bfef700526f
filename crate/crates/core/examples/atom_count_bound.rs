//! Atoms selected by δ-TOGL against the shape δ⁻² log(1/δ), with the
//! constant fitted at the largest δ.
//!
//! cargo run --release --example atom_count_bound

use togl::bench::{atom_bound_shape, atom_count_bound, parse_methods, sweep, ExperimentConfig, Grid, Task};

fn main() -> togl::Result<()> {
    let deltas = vec![0.05, 0.1, 0.2, 0.4];
    let mut config = ExperimentConfig::sinc_default();
    config.task = Task::Sinc {
        m_train: 1000,
        m_test: 1000,
        n: 300,
        sigmas: vec![0.5],
    };
    config.methods = parse_methods("dtogl:max")?;
    config.delta_grid = Grid::List(deltas.clone());
    config.seeds = 20;

    let rows = sweep(&config)?.rows;
    let counts: Vec<(f64, usize)> = rows.iter().map(|r| (r.param.magnitude(), r.sparsity)).collect();
    let bound = atom_count_bound(&counts, 0.4)?;
    println!("C = {:.4}", bound.constant);
    println!("{:>6} {:>10} {:>10}", "delta", "max atoms", "bound");
    for d in deltas {
        let max = counts.iter().filter(|c| c.0 == d).map(|c| c.1).max().unwrap_or(0);
        println!("{d:>6} {max:>10} {:>10.1}", bound.constant * atom_bound_shape(d));
    }
    println!("violations: {}", bound.violations.len());
    Ok(())
}
