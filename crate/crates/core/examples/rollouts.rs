//! Seeded rollouts: sample paths, Monte Carlo cost and covariance against the model.

use lqgame::certify::{best_response_l, objective, state_covariance};
use lqgame::rng::{Purpose, RngStream, StreamKey};
use lqgame::sim::{batch_mean_cost, batch_mean_covariance, rollout};
use lqgame::LqGame;

fn main() {
    let game = LqGame::benchmark();
    let k = game.benchmark_initial_gain();
    let l = best_response_l(&game, &k).l;

    let stream = RngStream::new(42, StreamKey::new(Purpose::Rollout, 0, 0, 0));
    let path = rollout(&game, &k, &l, &stream);
    for (h, x) in path.states.iter().enumerate() {
        println!("x_{h} = [{:+.4}, {:+.4}, {:+.4}]", x[0], x[1], x[2]);
    }
    println!("realized cost {:.4}", path.cost);

    let key = StreamKey::new(Purpose::Rollout, 1, 0, 0);
    let (mean, se) = batch_mean_cost(&game, &k, &l, 100_000, 42, key);
    println!("mean cost {mean:.4} +/- {se:.4}, model {:.4}", objective(&game, &k, &l));
    let est = batch_mean_covariance(&game, &k, &l, 100_000, 42, key);
    let exact = state_covariance(&game, &k, &l);
    println!(
        "covariance: |estimate - model| = {:.4}, lambda_min = {:.4} (gate at {:.4})",
        est.sigma.sub(&exact).norm(),
        est.lambda_min,
        est.threshold
    );
}
