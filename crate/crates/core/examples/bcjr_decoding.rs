//! Encodes with the 171/133 code, sends BPSK over AWGN and decodes with the
//! BCJR, cross-checked against exhaustive MAP on a short frame.

use ledrx::coding::{bcjr_decode, ConvCode, LlrFrame, LlrKind};
use ledrx::verification::oracles::exhaustive_map;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn channel_llrs(bits: &[u8], sigma2: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    bits.iter()
        .map(|&b| {
            let s = if b == 0 { 1.0 } else { -1.0 };
            let w: f64 = rng.sample(StandardNormal);
            2.0 * (s + sigma2.sqrt() * w) / sigma2
        })
        .collect()
}

fn main() -> ledrx::Result<()> {
    let code = ConvCode::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);

    let info: Vec<u8> = (0..1024).map(|_| rng.gen_range(0..2)).collect();
    for snr_db in [0.0, 2.0, 4.0] {
        // Es/N0 per coded bit.
        let sigma2 = 10f64.powf(-snr_db / 10.0) / 2.0;
        let llrs = channel_llrs(&code.encode(&info), sigma2, &mut rng);
        let out = bcjr_decode(&LlrFrame::new(llrs, LlrKind::APriori), &code)?;
        let errors = out
            .info_decisions()
            .iter()
            .zip(&info)
            .filter(|(a, b)| a != b)
            .count();
        println!(
            "{snr_db} dB: {errors} of {} information bits in error",
            info.len()
        );
    }

    let short: Vec<u8> = (0..10).map(|_| rng.gen_range(0..2)).collect();
    let llrs = channel_llrs(&code.encode(&short), 0.8, &mut rng);
    let out = bcjr_decode(&LlrFrame::new(llrs.clone(), LlrKind::APriori), &code)?;
    let oracle = exhaustive_map(&llrs, &code);
    let gap = out
        .info_app
        .values
        .iter()
        .zip(&oracle.info_app)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("10-bit frame: max |BCJR - exhaustive MAP| = {gap:.2e}");
    Ok(())
}
