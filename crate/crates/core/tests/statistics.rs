//! Monte Carlo checks of the simulator and the sphere sampler against
//! model-based quantities.
//!
//! Single-quantity checks use the 3-standard-error convention. Families of
//! coordinates use a Bonferroni-adjusted bound so that the family as a whole
//! keeps roughly the same false-alarm rate.

use lqgame::certify::{best_response_l, objective, state_covariance};
use lqgame::rng::{Purpose, RngStream, StreamKey};
use lqgame::sim::{batch_mean_cost, batch_sum, empirical_covariance, RolloutPlan};
use lqgame::zo::sample_unit_sphere;
use lqgame::{GainSide, LqGame};

/// |z| bound for families of up to ~100 coordinates: 3 standard errors,
/// Bonferroni-adjusted (two-sided 0.27% / 100 is about 4.4).
const FAMILY_Z: f64 = 4.5;

fn benchmark_pair() -> (LqGame, lqgame::StructuredGain, lqgame::StructuredGain) {
    let game = LqGame::benchmark();
    let k = game.benchmark_initial_gain();
    let l = best_response_l(&game, &k).l;
    (game, k, l)
}

#[test]
fn rollout_mean_cost_matches_objective() {
    let (game, k, l) = benchmark_pair();
    let key = StreamKey::new(Purpose::Custom(1), 0, 0, 0);
    let (mean, se) = batch_mean_cost(&game, &k, &l, 200_000, 11, key);
    let exact = objective(&game, &k, &l);
    assert!((mean - exact).abs() <= 3.0 * se, "mean {mean} vs {exact} (se {se})");
}

#[test]
fn scalar_rollout_mean_cost_matches_objective() {
    let game = LqGame::scalar_demo();
    let k = game.constant_gain(GainSide::K, &lqgame::Mat::from_element(1, 1, 0.5)).unwrap();
    let l = game.zero_gain(GainSide::L);
    let key = StreamKey::new(Purpose::Custom(2), 0, 0, 0);
    let (mean, se) = batch_mean_cost(&game, &k, &l, 400_000, 12, key);
    // Tr(P Sigma0) with P = diag(1 + 0.25 + 0.25, 1)
    assert!((objective(&game, &k, &l) - 2.5).abs() < 1e-12);
    assert!((mean - 2.5).abs() <= 3.0 * se, "mean {mean} (se {se})");
}

#[test]
fn averaged_covariance_matches_recursion() {
    let (game, k, l) = benchmark_pair();
    let plan = RolloutPlan::new(&game, &k, &l);
    let samples = 100_000;
    let exact = state_covariance(&game, &k, &l).flatten();
    let len = exact.len();
    let sums = batch_sum(samples, 2 * len, |i| {
        let stream = RngStream::new(13, StreamKey::new(Purpose::Custom(3), 0, 0, i as u64));
        let traj = plan.run(&game, &mut stream.rng(), stream.id());
        let v = empirical_covariance(&traj).flatten();
        let sq: Vec<f64> = v.iter().map(|x| x * x).collect();
        [v, sq].concat()
    });
    let n = samples as f64;
    let bound = FAMILY_Z;
    for i in 0..len {
        let mean = sums[i] / n;
        let var = (sums[len + i] / n - mean * mean).max(0.0) * n / (n - 1.0);
        let se = (var / n).sqrt();
        if se == 0.0 {
            assert!((mean - exact[i]).abs() < 1e-12);
            continue;
        }
        let z = (mean - exact[i]) / se;
        assert!(z.abs() <= bound, "entry {i}: mean {mean} vs {} (z = {z:.2})", exact[i]);
    }
}

#[test]
fn sphere_draws_have_isotropic_moments() {
    let game = LqGame::benchmark();
    let draws = 1_000_000;
    let d = game.zero_gain(GainSide::L).dim();
    // lanes: first moments, squares, and products of neighbouring coordinates
    let sums = batch_sum(draws, 3 * d, |i| {
        let stream = RngStream::new(14, StreamKey::new(Purpose::Custom(4), 0, 0, i as u64));
        let u = sample_unit_sphere(&game, GainSide::L, &mut stream.rng()).to_flat();
        let mut v = u.clone();
        v.extend(u.iter().map(|x| x * x));
        v.extend((0..d).map(|j| u[j] * u[(j + 1) % d]));
        v
    });
    let n = draws as f64;
    let bound = FAMILY_Z;
    // Var(u_i) = 1/d; Var(u_i^2) = 2(d-1)/(d^2(d+2)); Var(u_i u_j) = 1/(d(d+2))
    let df = d as f64;
    let se_first = (1.0 / df / n).sqrt();
    let se_square = (2.0 * (df - 1.0) / (df * df * (df + 2.0)) / n).sqrt();
    let se_cross = (1.0 / (df * (df + 2.0)) / n).sqrt();
    for j in 0..d {
        let z1 = (sums[j] / n) / se_first;
        let z2 = (sums[d + j] / n - 1.0 / df) / se_square;
        let z3 = (sums[2 * d + j] / n) / se_cross;
        assert!(z1.abs() <= bound, "mean of coordinate {j}: z = {z1:.2}");
        assert!(z2.abs() <= bound, "second moment of coordinate {j}: z = {z2:.2}");
        assert!(z3.abs() <= bound, "cross moment ({j}, {}): z = {z3:.2}", (j + 1) % d);
    }
}

#[test]
fn sphere_draws_are_unit_and_structured() {
    let game = LqGame::benchmark();
    let mut rng = RngStream::new(15, StreamKey::new(Purpose::Custom(5), 0, 0, 0)).rng();
    for _ in 0..1000 {
        let u = sample_unit_sphere(&game, GainSide::K, &mut rng);
        assert!((u.norm() - 1.0).abs() < 1e-12);
        let lifted = u.lift();
        let (rows, cols) = (u.rows_per_block(), u.state_dim());
        for (r, row) in lifted.row_iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                let on_diagonal_block = c / cols == r / rows && c < cols * u.horizon();
                if !on_diagonal_block {
                    assert_eq!(*v, 0.0);
                }
            }
        }
    }
}

#[test]
fn truncated_noise_respects_its_bound() {
    let game = LqGame::benchmark();
    let noise = game.noise();
    let stages = game.horizon() + 1;
    let mut rng = RngStream::new(16, StreamKey::new(Purpose::Custom(6), 0, 0, 0)).rng();
    let mut max_norm: f64 = 0.0;
    for j in 0..10_000_000 {
        max_norm = max_norm.max(noise.sample(j % stages, &mut rng).norm());
    }
    assert!(max_norm <= noise.bound(), "max |xi| = {max_norm} > bound {}", noise.bound());
}
