//! Four-state Gaussian HMM fitted to a regime-switching IV path.
//!
//! Run with `cargo run --release --example hmm_regimes`.

use ivnowcast::hmm::{fit_baum_welch, FitOptions};
use ivnowcast::{GaussianHmm, Regime};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let stay = 0.97;
    let truth = GaussianHmm {
        pi: vec![0.25; 4],
        trans: (0..4).map(|i| (0..4).map(|j| if i == j { stay } else { (1.0 - stay) / 3.0 }).collect()).collect(),
        means: vec![18.6, 22.3, 26.7, 35.3],
        variances: vec![1.4, 2.0, 3.2, 9.0],
    };
    let (states, iv) = truth.sample(1500, &mut ChaCha8Rng::seed_from_u64(3));

    let fit = fit_baum_welch(&iv, &FitOptions::default()).unwrap();
    println!("EM: {} iterations, converged {}", fit.log_likelihoods.len(), fit.converged);
    let model = fit.model.sorted_by_mean();
    for k in 0..4 {
        println!(
            "{:<10} mean {:>6.2}  sd {:>5.2}  stay {:.3}",
            Regime(k).name(4),
            model.means[k],
            model.variances[k].sqrt(),
            model.trans[k][k]
        );
    }
    let path = model.viterbi(&iv).unwrap();
    let hits = path.states.iter().zip(&states).filter(|(a, b)| a == b).count();
    println!("Viterbi agrees with the true path on {:.1}% of days", 100.0 * hits as f64 / iv.len() as f64);
}
