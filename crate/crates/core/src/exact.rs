//! Nested natural policy gradient with exact, model-based gradients.
//!
//! Inner loop: `L_{k+1} = L_k + tau1 E_{K, L_k}`.
//! Outer loop: `K_{t+1} = K_t - tau2 F_{K_t, L_t}` where `L_t` is the inner output.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::certify::{
    best_response_l, natural_gradients, objective, value_matrix, in_khat_set, KhatAnchor,
};
use crate::error::{GameError, Result};
use crate::model::{LqGame, StructuredGain};
use crate::trace::{FailureReason, RunFailure, RunTrace, TraceKind, TraceRow};

/// How the inner maximization is terminated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum InnerMode {
    /// Exactly `iterations` inner NPG steps.
    Fixed { iterations: usize },
    /// Iterate until `G(K, L(K)) - G(K, L_k) <= eps`.
    GapTolerance { eps: f64, max_iterations: usize },
    /// Use the best response `L(K)` directly (the `eps = 0` limit).
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExactSolverConfig {
    pub tau1: f64,
    pub tau2: f64,
    pub inner: InnerMode,
    /// Outer iteration budget `T`.
    pub iterations: usize,
    /// Stop once the recorded gap falls to this level (requires `target_value`).
    pub stop_gap: Option<f64>,
    /// Nash value `G*` used to report gaps.
    pub target_value: Option<f64>,
    /// Abort when the primal value exceeds this multiple of its initial value.
    pub divergence_factor: f64,
    pub record_wallclock: bool,
}

impl Default for ExactSolverConfig {
    fn default() -> Self {
        Self {
            tau1: 0.1,
            tau2: 4.67e-4,
            inner: InnerMode::GapTolerance {
                eps: 1e-4,
                max_iterations: 10_000,
            },
            iterations: 1000,
            stop_gap: None,
            target_value: None,
            divergence_factor: 10.0,
            record_wallclock: false,
        }
    }
}

impl ExactSolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau1 > 0.0 && self.tau2 > 0.0) {
            return Err(GameError::Config("stepsizes must be positive".into()));
        }
        if let InnerMode::GapTolerance { eps, .. } = self.inner {
            if !(eps > 0.0) {
                return Err(GameError::Config("inner gap tolerance must be positive".into()));
            }
        }
        if self.stop_gap.is_some() && self.target_value.is_none() {
            return Err(GameError::Config("stop_gap needs target_value".into()));
        }
        Ok(())
    }
}

/// Inner-loop gaps `G(K, L(K)) - G(K, L_k)`, one per visited iterate.
#[derive(Clone, Debug, Default, Serialize)]
pub struct InnerTrace {
    pub gaps: Vec<f64>,
    pub iterations: usize,
}

/// Runs the inner NPG ascent for fixed `K` starting from `l0`.
pub fn inner_npg_exact(
    game: &LqGame,
    k: &StructuredGain,
    l0: &StructuredGain,
    config: &ExactSolverConfig,
) -> Result<(StructuredGain, InnerTrace)> {
    let br = best_response_l(game, k);
    let best = if br.feasible { Some(br.value(game)) } else { None };
    let gap_at = |l: &StructuredGain| best.map_or(f64::NAN, |v| v - objective(game, k, l));
    let step = |l: &StructuredGain| {
        let p = value_matrix(game, k, l);
        let (_, e) = natural_gradients(game, k, l, &p);
        l.axpy(config.tau1, &e)
    };

    let mut l = l0.clone();
    let mut trace = InnerTrace::default();
    match config.inner {
        InnerMode::Exact => {
            if let Some(v) = br.h_violation {
                return Err(GameError::Infeasible {
                    stage: v.stage,
                    lambda_min: v.lambda_min,
                });
            }
            trace.gaps.push(0.0);
            return Ok((br.l, trace));
        }
        InnerMode::Fixed { iterations } => {
            trace.gaps.push(gap_at(&l));
            for _ in 0..iterations {
                l = step(&l);
                trace.gaps.push(gap_at(&l));
            }
            trace.iterations = iterations;
        }
        InnerMode::GapTolerance {
            eps,
            max_iterations,
        } => {
            if let Some(v) = br.h_violation {
                return Err(GameError::Infeasible {
                    stage: v.stage,
                    lambda_min: v.lambda_min,
                });
            }
            loop {
                let gap = gap_at(&l);
                trace.gaps.push(gap);
                if gap <= eps {
                    break;
                }
                if trace.iterations == max_iterations {
                    return Err(GameError::InnerNotConverged {
                        iterations: max_iterations,
                        tolerance: eps,
                        last_gap: gap,
                        gaps: trace.gaps,
                    });
                }
                l = step(&l);
                trace.iterations += 1;
            }
        }
    }
    Ok((l, trace))
}

/// Evaluation of one outer iterate: best response data, gap and `K-hat` membership.
pub(crate) struct IterateStatus {
    pub value: f64,
    pub lambda_min_h: f64,
    pub in_khat: bool,
    /// `|F_{K, L(K)}|_F^2`.
    pub primal_grad_sq: f64,
    pub best_l: StructuredGain,
}

pub(crate) fn evaluate_iterate(
    game: &LqGame,
    k: &StructuredGain,
    anchor: &KhatAnchor,
) -> std::result::Result<IterateStatus, GameError> {
    let br = best_response_l(game, k);
    if let Some(v) = br.h_violation {
        return Err(GameError::Infeasible {
            stage: v.stage,
            lambda_min: v.lambda_min,
        });
    }
    let (f, _) = natural_gradients(game, k, &br.l, &br.p);
    let khat = in_khat_set(game, k, anchor);
    Ok(IterateStatus {
        value: br.value(game),
        lambda_min_h: br.lambda_min_h,
        in_khat: khat.member,
        primal_grad_sq: f.norm_squared(),
        best_l: br.l,
    })
}

/// Updates the running estimate of the gradient-domination constant.
pub(crate) fn update_mu(mu: &mut Option<f64>, gap: f64, grad_sq: f64) {
    if gap.is_finite() && grad_sq > 1e-20 && gap > 0.0 {
        let ratio = gap / grad_sq;
        *mu = Some(mu.map_or(ratio, |m: f64| m.max(ratio)));
    }
}

/// Runs the outer NPG descent from `k0`, which must lie in the feasible set.
pub fn outer_npg_exact(
    game: &LqGame,
    k0: &StructuredGain,
    config: &ExactSolverConfig,
) -> std::result::Result<(StructuredGain, RunTrace), RunFailure> {
    let mut trace = RunTrace::new(TraceKind::Exact);
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
    let mut l = game.zero_gain(crate::GainSide::L);
    let mut limit = f64::INFINITY;
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

        let l_t = match config.inner {
            InnerMode::Exact => status.best_l.clone(),
            _ => match inner_npg_exact(game, &k, &l, config) {
                Ok((l_out, _)) => l_out,
                Err(e) => return Err(fail(t, e.into(), trace)),
            },
        };
        let p = value_matrix(game, &k, &l_t);
        let (f, _) = natural_gradients(game, &k, &l_t, &p);
        trace.rows.push(TraceRow {
            t,
            objective_gap: gap,
            frob_f: f.norm(),
            lambda_min_h: status.lambda_min_h,
            in_khat: status.in_khat,
            wallclock_ms: clock(config.record_wallclock),
            ..Default::default()
        });
        if config.stop_gap.is_some_and(|s| gap <= s) {
            return Ok((k, trace));
        }
        k = k.axpy(-config.tau2, &f);
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
            ..Default::default()
        });
    }
    Ok((k, trace))
}
