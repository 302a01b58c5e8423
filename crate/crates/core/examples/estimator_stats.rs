//! Bias and spread of the sphere-smoothing gradient estimator against the model gradient.

use lqgame::certify::policy_gradients;
use lqgame::rng::{Purpose, StreamKey};
use lqgame::zo::zo_gradient_with_stats;
use lqgame::{GainSide, LqGame, Mat};

fn main() {
    let game = LqGame::scalar_demo();
    let k = game.constant_gain(GainSide::K, &Mat::from_element(1, 1, 0.5)).unwrap();
    let l = game.zero_gain(GainSide::L);
    let exact = policy_gradients(&game, &k, &l).1.to_flat()[0];
    println!("model gradient in L: {exact:.5}");
    for (i, &samples) in [1_000usize, 10_000, 100_000].iter().enumerate() {
        for &r in &[0.2, 0.05] {
            let key = StreamKey::new(Purpose::Custom(100), i as u64, 0, 0);
            let est = zo_gradient_with_stats(&game, &k, &l, GainSide::L, r, samples, 7, key);
            let mean = est.mean.to_flat()[0];
            println!(
                "M={samples:>6} r={r:<4} estimate={mean:+.4} se={:.4} z={:+.2}",
                est.std_err[0],
                (mean - exact) / est.std_err[0]
            );
        }
    }
}
