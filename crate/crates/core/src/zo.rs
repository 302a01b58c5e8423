//! Model-free nested natural policy gradient with single-point zeroth-order
//! gradient estimates.
//!
//! The inner oracle ascends in `L` for `T_in` steps; the outer loop then takes
//! one descent step in `K` against the returned `L_t`. Both steps have the form
//! `gain ± tau * grad_est * Sigma_est^{-1}` where
//! `grad_est = (1/M) sum_i (d/r) cost_i U_i` and `Sigma_est` averages the
//! empirical covariances of independent unperturbed rollouts.

use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::certify::{best_response_l, objective, KhatAnchor};
use crate::error::{GameError, Result};
use crate::exact::{evaluate_iterate, update_mu};
use crate::linalg::{condition_estimate, solve_right_spd, BlockDiag};
use crate::model::{GainSide, LqGame, StructuredGain};
use crate::rng::{Purpose, RngStream, StreamKey};
use crate::sim::{batch_mean_covariance, batch_sum, RolloutPlan};
use crate::trace::{FailureReason, RunFailure, RunTrace, TraceKind, TraceRow};

/// Reaction when the batch covariance falls below `phi / 2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GatePolicy {
    /// Shift every block by `(phi/2 - lambda_min) I` and record a gate hit.
    #[default]
    Regularize,
    /// Redraw the batch once from fresh streams; fail if it is still too small.
    RejectAndResample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZoConfig {
    pub r1: f64,
    pub r2: f64,
    pub m1: usize,
    pub m2: usize,
    pub tau1: f64,
    pub tau2: f64,
    pub t_in: usize,
    /// Outer iteration budget `T`.
    pub iterations: usize,
    pub gate: GatePolicy,
    pub seed: u64,
    /// Nash value used for the diagnostic gap column.
    pub target_value: Option<f64>,
    /// Abort when the primal value exceeds this multiple of its initial value.
    pub divergence_factor: f64,
    /// Count inner-loop trajectories as if the oracle ran once per outer
    /// perturbation (`M2` times per iteration); reporting only.
    pub baseline_accounting: bool,
    /// Evaluate the model-based inner gap at every inner step (diagnostics).
    pub track_inner_gap: bool,
    pub record_wallclock: bool,
}

impl Default for ZoConfig {
    fn default() -> Self {
        Self {
            r1: 0.5,
            r2: 0.08,
            m1: 1_000_000,
            m2: 500_000,
            tau1: 0.04,
            tau2: 4.67e-4,
            t_in: 10,
            iterations: 60,
            gate: GatePolicy::Regularize,
            seed: 0,
            target_value: None,
            divergence_factor: 10.0,
            baseline_accounting: false,
            track_inner_gap: false,
            record_wallclock: false,
        }
    }
}

impl ZoConfig {
    /// Batch sizes small enough for a workstation: `M1 = M2 = 10^4`.
    pub fn desk_scale() -> Self {
        Self {
            m1: 10_000,
            m2: 10_000,
            ..Self::default()
        }
    }

    /// Sets `r2 = c / sqrt(T)`, the radius schedule of the convergence analysis.
    pub fn with_theory_radius(mut self, c: f64) -> Self {
        self.r2 = theory_radius(c, self.iterations);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("r1", self.r1),
            ("r2", self.r2),
            ("tau1", self.tau1),
            ("tau2", self.tau2),
            ("divergence_factor", self.divergence_factor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(GameError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.m1 == 0 || self.m2 == 0 {
            return Err(GameError::Config("batch sizes must be at least 1".into()));
        }
        Ok(())
    }
}

/// `c / sqrt(T)` (with `T` clamped to at least 1).
pub fn theory_radius(c: f64, iterations: usize) -> f64 {
    c / (iterations.max(1) as f64).sqrt()
}

/// Uniform draw from the unit Frobenius sphere of the structured subspace of `side`.
pub fn sample_unit_sphere<R: Rng + ?Sized>(game: &LqGame, side: GainSide, rng: &mut R) -> StructuredGain {
    let zero = game.zero_gain(side);
    loop {
        let z: Vec<f64> = (0..zero.dim()).map(|_| rng.sample(StandardNormal)).collect();
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            let unit: Vec<f64> = z.iter().map(|v| v / norm).collect();
            return zero.with_flat(&unit);
        }
    }
}

/// One estimator sample: the direction `U` and the realized cost at the perturbed pair.
pub fn zo_sample(
    game: &LqGame,
    k: &StructuredGain,
    l: &StructuredGain,
    side: GainSide,
    r: f64,
    stream: &RngStream,
) -> (StructuredGain, f64) {
    let mut rng = stream.rng();
    let u = sample_unit_sphere(game, side, &mut rng);
    let (kp, lp) = match side {
        GainSide::K => (k.axpy(r, &u), l.clone()),
        GainSide::L => (k.clone(), l.axpy(r, &u)),
    };
    let cost = RolloutPlan::new(game, &kp, &lp).run_cost(game, &mut rng);
    (u, cost)
}

/// Mean estimate with per-coordinate standard errors.
#[derive(Clone, Debug, Serialize)]
pub struct ZoEstimate {
    pub mean: StructuredGain,
    /// Standard error of each flattened coordinate of `mean`.
    pub std_err: Vec<f64>,
    pub samples: usize,
}

fn zo_sum(
    game: &LqGame,
    k: &StructuredGain,
    l: &StructuredGain,
    side: GainSide,
    r: f64,
    samples: usize,
    seed: u64,
    key: StreamKey,
    squares: bool,
) -> Vec<f64> {
    let d = game.zero_gain(side).dim();
    let scale = d as f64 / r;
    let lanes = if squares { 2 * d } else { d };
    batch_sum(samples, lanes, |i| {
        let stream = RngStream::new(seed, key.with_sample(i as u64));
        let (u, cost) = zo_sample(game, k, l, side, r, &stream);
        let mut v: Vec<f64> = u.to_flat().into_iter().map(|x| scale * cost * x).collect();
        if squares {
            let sq: Vec<f64> = v.iter().map(|x| x * x).collect();
            v.extend(sq);
        }
        v
    })
}

/// `(1/M) sum_i (d/r) G_xi_i(perturbed pair) U_i` for perturbations on `side`.
#[allow(clippy::too_many_arguments)]
pub fn zo_gradient(
    game: &LqGame,
    k: &StructuredGain,
    l: &StructuredGain,
    side: GainSide,
    r: f64,
    samples: usize,
    seed: u64,
    key: StreamKey,
) -> StructuredGain {
    assert!(samples >= 1 && r > 0.0);
    let sum = zo_sum(game, k, l, side, r, samples, seed, key, false);
    let mean: Vec<f64> = sum.iter().map(|s| s / samples as f64).collect();
    game.zero_gain(side).with_flat(&mean)
}

/// [`zo_gradient`] together with coordinate-wise standard errors.
#[allow(clippy::too_many_arguments)]
pub fn zo_gradient_with_stats(
    game: &LqGame,
    k: &StructuredGain,
    l: &StructuredGain,
    side: GainSide,
    r: f64,
    samples: usize,
    seed: u64,
    key: StreamKey,
) -> ZoEstimate {
    assert!(samples >= 2 && r > 0.0);
    let sum = zo_sum(game, k, l, side, r, samples, seed, key, true);
    let d = sum.len() / 2;
    let n = samples as f64;
    let mean: Vec<f64> = sum[..d].iter().map(|s| s / n).collect();
    let std_err = sum[d..]
        .iter()
        .zip(&mean)
        .map(|(sq, mu)| ((sq / n - mu * mu).max(0.0) * n / (n - 1.0) / n).sqrt())
        .collect();
    ZoEstimate {
        mean: game.zero_gain(side).with_flat(&mean),
        std_err,
        samples,
    }
}

/// Bit set in `StreamKey::inner` for the redrawn batch of the reject policy.
const RESAMPLE_BIT: u64 = 1 << 63;

/// Batch covariance after applying the gate policy; returns `(Sigma, gate hits, trajectories)`.
fn gated_covariance(
    game: &LqGame,
    k: &StructuredGain,
    l: &StructuredGain,
    samples: usize,
    seed: u64,
    key: StreamKey,
    policy: GatePolicy,
) -> Result<(BlockDiag, u64, u64)> {
    let est = batch_mean_covariance(game, k, l, samples, seed, key);
    if est.gate_ok {
        return Ok((est.sigma, 0, samples as u64));
    }
    match policy {
        GatePolicy::Regularize => {
            let shift = est.threshold - est.lambda_min;
            Ok((est.sigma.add_identity(shift), 1, samples as u64))
        }
        GatePolicy::RejectAndResample => {
            let retry_key = StreamKey {
                inner: key.inner | RESAMPLE_BIT,
                ..key
            };
            let again = batch_mean_covariance(game, k, l, samples, seed, retry_key);
            if again.gate_ok {
                Ok((again.sigma, 1, 2 * samples as u64))
            } else {
                Err(GameError::CovarianceGate {
                    lambda_min: again.lambda_min,
                    threshold: again.threshold,
                })
            }
        }
    }
}

/// `grad * Sigma^{-1}` stage by stage via Cholesky right-solves.
pub fn natural_direction(grad: &StructuredGain, sigma: &BlockDiag) -> Result<StructuredGain> {
    if grad.blocks().iter().any(|g| g.iter().any(|v| !v.is_finite())) {
        return Err(GameError::NonFiniteEstimate { what: "gradient" });
    }
    if sigma.blocks.iter().any(|s| s.iter().any(|v| !v.is_finite())) {
        return Err(GameError::NonFiniteEstimate { what: "state covariance" });
    }
    let mut blocks = Vec::with_capacity(grad.horizon());
    for (h, g) in grad.blocks().iter().enumerate() {
        let s = &sigma.blocks[h];
        let x = solve_right_spd(g, s).ok_or_else(|| GameError::Singular {
            stage: h,
            what: "estimated state covariance",
            condition: condition_estimate(s),
        })?;
        blocks.push(x);
    }
    Ok(grad.with_blocks(blocks))
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ZoInnerTrace {
    /// `G(K, L(K)) - G(K, L_k)` for `k = 0..=T_in`, when tracked and `K` is feasible.
    pub gaps: Vec<f64>,
    pub trajectories: u64,
    pub gate_hits: u64,
}

/// Inner zeroth-order ascent in `L` for fixed `K`; `outer` tags the stream addresses.
pub fn inner_zo_oracle(
    game: &LqGame,
    k: &StructuredGain,
    l0: &StructuredGain,
    config: &ZoConfig,
    outer: u64,
) -> Result<(StructuredGain, ZoInnerTrace)> {
    config.validate()?;
    let best = if config.track_inner_gap {
        let br = best_response_l(game, k);
        br.feasible.then(|| br.value(game))
    } else {
        None
    };
    let mut trace = ZoInnerTrace::default();
    let mut l = l0.clone();
    let record = |l: &StructuredGain, trace: &mut ZoInnerTrace| {
        if let Some(v) = best {
            trace.gaps.push(v - objective(game, k, l));
        }
    };
    record(&l, &mut trace);
    for it in 0..config.t_in as u64 {
        let grad = zo_gradient(
            game,
            k,
            &l,
            GainSide::L,
            config.r1,
            config.m1,
            config.seed,
            StreamKey::new(Purpose::InnerCost, outer, it, 0),
        );
        let (sigma, hits, used) = gated_covariance(
            game,
            k,
            &l,
            config.m1,
            config.seed,
            StreamKey::new(Purpose::InnerCovariance, outer, it, 0),
            config.gate,
        )?;
        let dir = natural_direction(&grad, &sigma)?;
        l = l.axpy(config.tau1, &dir);
        trace.trajectories += config.m1 as u64 + used;
        trace.gate_hits += hits;
        record(&l, &mut trace);
    }
    Ok((l, trace))
}

/// Outer zeroth-order descent from `k0` with one inner-oracle call per iteration.
///
/// The gap, `lambda_min(H)` and `K-hat` columns are model-based diagnostics; the
/// iterates themselves only use simulated costs and states.
pub fn outer_zo_npg(
    game: &LqGame,
    k0: &StructuredGain,
    config: &ZoConfig,
) -> std::result::Result<(StructuredGain, RunTrace), RunFailure> {
    let mut trace = RunTrace::new(TraceKind::ZerothOrder);
    let fail = |iteration, reason: FailureReason, trace| RunFailure {
        iteration,
        reason,
        trace,
    };
    if let Err(e) = config.validate() {
        return Err(fail(0, e.into(), trace));
    }
    let anchor = match KhatAnchor::new(game, k0) {
        Ok(a) => a,
        Err(e) => return Err(fail(0, e.into(), trace)),
    };
    let target = config.target_value.unwrap_or(f64::NAN);
    let start = Instant::now();
    let clock = |on: bool| if on { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };

    let mut k = k0.clone();
    let mut l = game.zero_gain(GainSide::L);
    let mut limit = f64::INFINITY;
    let (mut used_inner, mut used_outer, mut gate_hits) = (0u64, 0u64, 0u64);
    for t in 0..config.iterations {
        let status = match evaluate_iterate(game, &k, &anchor) {
            Ok(s) => s,
            Err(e) => return Err(fail(t, e.into(), trace)),
        };
        if t == 0 {
            limit = config.divergence_factor * status.value.abs();
        }
        if status.value > limit {
            let reason = FailureReason::Diverged {
                objective: status.value,
                limit,
            };
            return Err(fail(t, reason, trace));
        }
        let gap = status.value - target;
        update_mu(&mut trace.mu_hat, gap, status.primal_grad_sq);

        let tu = t as u64;
        let (l_t, inner) = match inner_zo_oracle(game, &k, &l, config, tu) {
            Ok(x) => x,
            Err(e) => return Err(fail(t, e.into(), trace)),
        };
        let step = (|| -> Result<(StructuredGain, u64, u64)> {
            let grad = zo_gradient(
                game,
                &k,
                &l_t,
                GainSide::K,
                config.r2,
                config.m2,
                config.seed,
                StreamKey::new(Purpose::OuterCost, tu, 0, 0),
            );
            let (sigma, hits, used) = gated_covariance(
                game,
                &k,
                &l_t,
                config.m2,
                config.seed,
                StreamKey::new(Purpose::OuterCovariance, tu, 0, 0),
                config.gate,
            )?;
            Ok((natural_direction(&grad, &sigma)?, hits, config.m2 as u64 + used))
        })();
        let (dir, hits, used) = match step {
            Ok(x) => x,
            Err(e) => return Err(fail(t, e.into(), trace)),
        };
        let inner_factor = if config.baseline_accounting {
            config.m2 as u64
        } else {
            1
        };
        used_inner += inner.trajectories * inner_factor;
        used_outer += used;
        gate_hits += inner.gate_hits + hits;
        trace.rows.push(TraceRow {
            t,
            objective_gap: gap,
            // reported as F = grad Sigma^{-1} / 2 to match the exact solver's scale
            frob_f: 0.5 * dir.norm(),
            lambda_min_h: status.lambda_min_h,
            in_khat: status.in_khat,
            wallclock_ms: clock(config.record_wallclock),
            samples_used_inner: used_inner,
            samples_used_outer: used_outer,
            covariance_gate_hits: gate_hits,
        });
        k = k.axpy(-config.tau2, &dir);
        l = l_t;
    }

    if let Ok(status) = evaluate_iterate(game, &k, &anchor) {
        trace.final_row = Some(TraceRow {
            t: config.iterations,
            objective_gap: status.value - target,
            frob_f: status.primal_grad_sq.sqrt(),
            lambda_min_h: status.lambda_min_h,
            in_khat: status.in_khat,
            wallclock_ms: clock(config.record_wallclock),
            samples_used_inner: used_inner,
            samples_used_outer: used_outer,
            covariance_gate_hits: gate_hits,
        });
    }
    Ok((k, trace))
}

/// Applies the `Regularize` gate: shifts all blocks so `lambda_min` reaches `threshold`.
pub fn regularized(sigma: &BlockDiag, threshold: f64) -> (BlockDiag, bool) {
    let lm = sigma.lambda_min();
    if lm > threshold {
        (sigma.clone(), false)
    } else {
        (sigma.add_identity(threshold - lm), true)
    }
}
