//! CSV pipeline: load a table, split it in half per seed, z-score, fit on
//! a dictionary centered at the training inputs, report in original units.
//!
//! Pass a CSV path whose last column is the target, or run without
//! arguments to use a generated table.
//!
//! cargo run --release --example real_data [-- data.csv]

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use togl::bench::{oracle_select, parse_methods, sweep, EtaMode, ExperimentConfig, Grid};
use togl::data::TargetColumn;

fn generated_table() -> std::io::Result<std::path::PathBuf> {
    let path = std::env::temp_dir().join("togl_real_data_example.csv");
    let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(f, "rooms,age,distance,price")?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..300 {
        let rooms: f64 = rng.random_range(3.0..9.0);
        let age: f64 = rng.random_range(0.0..100.0);
        let dist: f64 = rng.random_range(1.0..12.0);
        let price = 8.0 * rooms - 0.05 * age + 20.0 / dist + rng.random_range(-2.0..2.0);
        writeln!(f, "{rooms:.3},{age:.1},{dist:.3},{price:.2}")?;
    }
    Ok(path)
}

fn main() -> togl::Result<()> {
    let path = match std::env::args().nth(1) {
        Some(p) => p.into(),
        None => generated_table()?,
    };
    let mut config = ExperimentConfig::csv_default(&path, TargetColumn::Last);
    config.methods = parse_methods("ogl:max,dtogl:first,ridge,fista")?;
    config.k_max = 100;
    config.lambda_grid = Grid::Log {
        lo: 1e-6,
        hi: 1e-1,
        count: 6,
    };
    config.seeds = 5;

    println!("{}", path.display());
    for eta in [EtaMode::FromData, EtaMode::Fixed(1.0)] {
        config.eta = eta;
        println!("\nkernel width: {eta:?}");
        let result = sweep(&config)?;
        for o in oracle_select(&result.rows)? {
            println!(
                "{:<12} {:>24} rmse {:.4} ({:.4}) sparsity {:.1}",
                o.method,
                o.param.to_string(),
                o.mean_test_rmse,
                o.se_test_rmse,
                o.mean_sparsity
            );
        }
    }
    Ok(())
}
