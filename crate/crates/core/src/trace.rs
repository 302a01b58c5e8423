//! Per-iteration run records shared by the exact and zeroth-order solvers.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::error::GameError;

/// Which solver produced a trace; selects the CSV schema.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceKind {
    Exact,
    ZerothOrder,
}

/// One outer iteration, evaluated at `K_t` before the update.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: usize,
    /// `G(K_t, L(K_t)) - G*` (NaN when `G*` is unknown or `K_t` is infeasible).
    pub objective_gap: f64,
    /// Norm of the natural gradient used by the update.
    pub frob_f: f64,
    /// `lambda_min(H_{K_t, L(K_t)})`.
    pub lambda_min_h: f64,
    pub in_khat: bool,
    pub wallclock_ms: f64,
    pub samples_used_inner: u64,
    pub samples_used_outer: u64,
    pub covariance_gate_hits: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunTrace {
    pub kind: TraceKind,
    pub rows: Vec<TraceRow>,
    /// State after the last update (`K_T`), when it could be evaluated.
    pub final_row: Option<TraceRow>,
    /// Running maximum of `gap / Tr(F' F)` along the trajectory.
    pub mu_hat: Option<f64>,
}

const EXACT_COLUMNS: [&str; 6] = [
    "t",
    "objective_gap",
    "frob_F",
    "lambda_min_H",
    "in_Khat",
    "wallclock_ms",
];

const ZO_EXTRA_COLUMNS: [&str; 3] = [
    "samples_used_inner",
    "samples_used_outer",
    "covariance_gate_hits",
];

/// 17 significant digits, enough to round-trip an `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

impl RunTrace {
    pub fn new(kind: TraceKind) -> Self {
        Self {
            kind,
            rows: Vec::new(),
            final_row: None,
            mu_hat: None,
        }
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.objective_gap).collect()
    }

    /// Gap after the final update, falling back to the last recorded row.
    pub fn last_gap(&self) -> Option<f64> {
        self.final_row
            .as_ref()
            .or(self.rows.last())
            .map(|r| r.objective_gap)
    }

    pub fn columns(&self) -> Vec<&'static str> {
        let mut cols = EXACT_COLUMNS.to_vec();
        if self.kind == TraceKind::ZerothOrder {
            cols.extend(ZO_EXTRA_COLUMNS);
        }
        cols
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.columns())?;
        for r in &self.rows {
            let mut rec = vec![
                r.t.to_string(),
                fmt_f64(r.objective_gap),
                fmt_f64(r.frob_f),
                fmt_f64(r.lambda_min_h),
                u8::from(r.in_khat).to_string(),
                fmt_f64(r.wallclock_ms),
            ];
            if self.kind == TraceKind::ZerothOrder {
                rec.push(r.samples_used_inner.to_string());
                rec.push(r.samples_used_outer.to_string());
                rec.push(r.covariance_gate_hits.to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory csv");
        String::from_utf8(buf).unwrap()
    }
}

#[derive(Debug, Error)]
pub enum FailureReason {
    #[error("objective {objective:.6e} exceeded the divergence limit {limit:.6e}")]
    Diverged { objective: f64, limit: f64 },
    #[error(transparent)]
    Game(#[from] GameError),
}

/// A run that stopped early; carries the partial trace.
#[derive(Debug, Error)]
#[error("run aborted at iteration {iteration}: {reason}")]
pub struct RunFailure {
    pub iteration: usize,
    pub reason: FailureReason,
    pub trace: RunTrace,
}

impl RunFailure {
    pub fn is_divergence(&self) -> bool {
        matches!(
            self.reason,
            FailureReason::Diverged { .. }
                | FailureReason::Game(GameError::Infeasible { .. } | GameError::NonFiniteEstimate { .. })
        )
    }
}
