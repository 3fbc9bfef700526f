//! Orthogonal greedy learning on one noisy sinc sample: test error along
//! the path of selected atoms.
//!
//! cargo run --release --example sinc_ogl

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use togl::algorithms::fit_ogl;
use togl::bench::Problem;
use togl::greedy::Criterion;

fn main() -> togl::Result<()> {
    let mut data_rng = ChaCha8Rng::seed_from_u64(1);
    let mut dict_rng = ChaCha8Rng::seed_from_u64(2);
    let problem = Problem::sinc(1000, 1000, 300, 0.5, 1.0, true, &mut data_rng, &mut dict_rng)?;

    let trace = fit_ogl(
        &problem.train_design,
        &problem.y_train,
        &Criterion::max(),
        60,
        &mut data_rng,
    )?;
    let ks: Vec<usize> = [1, 2, 4, 6, 8, 10, 15, 20, 30, 45, 60]
        .into_iter()
        .filter(|&k| k <= trace.len())
        .collect();
    let scores = problem.score_path(&trace, &ks)?;
    println!("{:>4} {:>10} {:>10} {:>10}", "k", "train", "test", "‖r‖/‖y‖");
    for (&k, s) in ks.iter().zip(&scores) {
        let ratio = trace.residual_norms()[k - 1] / trace.target_norm();
        println!("{k:>4} {:>10.4} {:>10.4} {ratio:>10.4}", s.train_rmse, s.test_rmse);
    }
    println!("stopped after {} atoms: {}", trace.len(), trace.termination());
    Ok(())
}
