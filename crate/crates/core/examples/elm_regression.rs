//! Fits an ELM to a noisy 1-D function with least squares, ridge and
//! truncated TLS, then reports held-out RMSE.

use ledrx::elm::{rmse, ElmModel, TrainingSet};
use ledrx::numerics::RealMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dataset(n: usize, noise: f64, seed: u64) -> TrainingSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|&v| (3.0 * v).sin() + 0.3 * v * v + noise * rng.gen_range(-1.0..1.0))
        .collect();
    TrainingSet::new(RealMatrix::column_vector(&x), RealMatrix::column_vector(&y)).unwrap()
}

fn main() -> ledrx::Result<()> {
    let train = dataset(400, 0.05, 1);
    let test = dataset(1000, 0.0, 2);
    let model = ElmModel::new(1, 1, 60, 7)?;
    let fits = [
        ("least squares", model.train_ls(&train)?),
        ("ridge 1e-3", model.train_ridge(&train, 1e-3)?),
        ("truncated TLS", model.train_tls_truncated(&train)?.0),
    ];
    for (name, fitted) in &fits {
        let err = rmse(&fitted.predict_batch(&test.inputs)?, &test.targets)?;
        println!("{name:>14}: held-out RMSE {err:.4}");
    }
    Ok(())
}
