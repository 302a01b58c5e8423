//! Trajectory simulation and Monte Carlo batch statistics.
//!
//! Batches are split into fixed index chunks. Each chunk is summed with
//! compensated arithmetic and the chunk totals are combined by a pairwise tree in
//! index order, so batch results do not depend on the size of the thread pool.

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::certify::{closed_loop_blocks, stage_cost_blocks};
use crate::linalg::{lambda_min, pairwise_sum, BlockDiag, CompensatedSum, Mat};
use crate::model::{LqGame, StructuredGain};
use crate::rng::{RngStream, StreamKey};

/// Samples per reduction chunk.
pub const CHUNK: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    /// `x_0, ..., x_N`.
    pub states: Vec<DVector<f64>>,
    /// Realized cost `sum_h x_h' M_h x_h + x_N' Q_N x_N`.
    pub cost: f64,
    pub seed_id: u64,
}

/// Closed-loop matrices and stage costs for one gain pair, reused across rollouts.
#[derive(Clone, Debug)]
pub struct RolloutPlan {
    acl: Vec<Mat>,
    costs: Vec<Mat>,
}

impl RolloutPlan {
    pub fn new(game: &LqGame, k: &StructuredGain, l: &StructuredGain) -> Self {
        Self {
            acl: closed_loop_blocks(game, k, l),
            costs: stage_cost_blocks(game, k, l),
        }
    }

    /// Simulates one trajectory, drawing `x_0` and `xi_0..xi_{N-1}` from `rng`.
    pub fn run<R: Rng + ?Sized>(&self, game: &LqGame, rng: &mut R, seed_id: u64) -> Trajectory {
        let noise = game.noise();
        let n = self.acl.len();
        let mut scratch = DVector::zeros(noise.dim());
        let mut states = Vec::with_capacity(n + 1);
        let mut x = noise.sample(0, rng);
        let mut cost = 0.0;
        for h in 0..n {
            cost += quad(&self.costs[h], &x, &mut scratch);
            let mut next = DVector::zeros(x.len());
            noise.sample_into(h + 1, rng, &mut next);
            next.gemv(1.0, &self.acl[h], &x, 1.0);
            states.push(std::mem::replace(&mut x, next));
        }
        cost += quad(&self.costs[n], &x, &mut scratch);
        states.push(x);
        Trajectory {
            states,
            cost,
            seed_id,
        }
    }

    /// Realized cost of one trajectory; same draws as [`RolloutPlan::run`], no states kept.
    pub fn run_cost<R: Rng + ?Sized>(&self, game: &LqGame, rng: &mut R) -> f64 {
        let noise = game.noise();
        let n = self.acl.len();
        let mut scratch = DVector::zeros(noise.dim());
        let mut x = noise.sample(0, rng);
        let mut next = DVector::zeros(x.len());
        let mut cost = 0.0;
        for h in 0..n {
            cost += quad(&self.costs[h], &x, &mut scratch);
            noise.sample_into(h + 1, rng, &mut next);
            next.gemv(1.0, &self.acl[h], &x, 1.0);
            std::mem::swap(&mut x, &mut next);
        }
        cost + quad(&self.costs[n], &x, &mut scratch)
    }

    /// Simulates with a given initial state and noise sequence `xi_0..xi_{N-1}`.
    pub fn run_with_noise(&self, x0: &DVector<f64>, xi: &[DVector<f64>]) -> Trajectory {
        let n = self.acl.len();
        assert_eq!(xi.len(), n, "one noise vector per stage");
        let mut scratch = DVector::zeros(x0.len());
        let mut states = vec![x0.clone()];
        let mut cost = 0.0;
        for h in 0..n {
            cost += quad(&self.costs[h], &states[h], &mut scratch);
            let next = &self.acl[h] * &states[h] + &xi[h];
            states.push(next);
        }
        cost += quad(&self.costs[n], &states[n], &mut scratch);
        Trajectory {
            states,
            cost,
            seed_id: 0,
        }
    }
}

fn quad(m: &Mat, x: &DVector<f64>, scratch: &mut DVector<f64>) -> f64 {
    scratch.gemv(1.0, m, x, 0.0);
    x.dot(scratch)
}

/// One rollout under `(K, L)` driven by `stream`.
pub fn rollout(game: &LqGame, k: &StructuredGain, l: &StructuredGain, stream: &RngStream) -> Trajectory {
    RolloutPlan::new(game, k, l).run(game, &mut stream.rng(), stream.id())
}

/// `diag(x_0 x_0', ..., x_N x_N')`.
pub fn empirical_covariance(traj: &Trajectory) -> BlockDiag {
    BlockDiag::new(traj.states.iter().map(|x| x * x.transpose()).collect())
}

/// Sums `f(0) + ... + f(count - 1)` lane-wise with a reduction order fixed by `count`.
pub fn batch_sum<F>(count: usize, len: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> Vec<f64> + Sync,
{
    let chunks = count.div_ceil(CHUNK);
    let parts: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = CompensatedSum::new(len);
            for i in c * CHUNK..((c + 1) * CHUNK).min(count) {
                acc.add(&f(i));
            }
            acc.finish()
        })
        .collect();
    pairwise_sum(parts, len)
}

/// Batch covariance estimate and its invertibility diagnostic.
#[derive(Clone, Debug, Serialize)]
pub struct CovarianceEstimate {
    pub sigma: BlockDiag,
    pub samples: usize,
    pub lambda_min: f64,
    /// `phi / 2`, the level the estimate should stay above.
    pub threshold: f64,
    /// `lambda_min > threshold`.
    pub gate_ok: bool,
}

impl CovarianceEstimate {
    fn from_sigma(sigma: BlockDiag, samples: usize, phi: f64) -> Self {
        let lm = sigma.blocks.iter().map(lambda_min).fold(f64::INFINITY, f64::min);
        let threshold = phi / 2.0;
        Self {
            sigma,
            samples,
            lambda_min: lm,
            threshold,
            gate_ok: lm > threshold,
        }
    }
}

/// Mean of `samples` empirical covariances under `(K, L)`; sample `i` uses
/// stream `key.with_sample(i)`.
pub fn batch_mean_covariance(
    game: &LqGame,
    k: &StructuredGain,
    l: &StructuredGain,
    samples: usize,
    seed: u64,
    key: StreamKey,
) -> CovarianceEstimate {
    assert!(samples >= 1, "batch needs at least one sample");
    let plan = RolloutPlan::new(game, k, l);
    let count = game.horizon() + 1;
    let m = game.state_dim();
    let sum = batch_sum(samples, count * m * m, |i| {
        let stream = RngStream::new(seed, key.with_sample(i as u64));
        let traj = plan.run(game, &mut stream.rng(), stream.id());
        // empirical_covariance(&traj).flatten() without the intermediate blocks
        let mut flat = Vec::with_capacity(count * m * m);
        for x in &traj.states {
            for c in 0..m {
                flat.extend(x.iter().map(|r| r * x[c]));
            }
        }
        flat
    });
    let mean: Vec<f64> = sum.iter().map(|s| s / samples as f64).collect();
    let sigma = BlockDiag::from_flat(&mean, count, m);
    CovarianceEstimate::from_sigma(sigma, samples, game.noise().phi())
}

/// Sample mean and standard error of the realized cost over `samples` rollouts.
pub fn batch_mean_cost(
    game: &LqGame,
    k: &StructuredGain,
    l: &StructuredGain,
    samples: usize,
    seed: u64,
    key: StreamKey,
) -> (f64, f64) {
    assert!(samples >= 2, "standard error needs two samples");
    let plan = RolloutPlan::new(game, k, l);
    let sum = batch_sum(samples, 2, |i| {
        let stream = RngStream::new(seed, key.with_sample(i as u64));
        let c = plan.run_cost(game, &mut stream.rng());
        vec![c, c * c]
    });
    let n = samples as f64;
    let mean = sum[0] / n;
    let var = (sum[1] / n - mean * mean).max(0.0) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}
