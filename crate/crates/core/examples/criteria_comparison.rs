//! Oracle test error of the four OGL selection rules across noise levels.
//!
//! cargo run --release --example criteria_comparison

use togl::bench::{oracle_select, parse_methods, sweep, ExperimentConfig};

fn main() -> togl::Result<()> {
    let mut config = ExperimentConfig::sinc_default();
    config.methods = parse_methods("ogl:max,ogl:max2,ogl:max3,ogl:rand")?;
    config.k_max = 60;

    let result = sweep(&config)?;
    println!("{:<10} {:>6} {:>6} {:>18}", "method", "sigma", "k*", "test rmse (se)");
    for o in oracle_select(&result.rows)? {
        println!(
            "{:<10} {:>6} {:>6} {:>10.4} ({:.4})",
            o.method, o.sigma, o.param, o.mean_test_rmse, o.se_test_rmse
        );
    }
    Ok(())
}
