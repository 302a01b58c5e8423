//! Model-based quantities: value matrices, state covariances, natural
//! gradients, the maximizer's best response and the Riccati Nash solution.
//!
//! Every computation runs stage by stage. Because the closed-loop compact
//! matrix is strictly block lower-triangular, the Lyapunov equations reduce to
//! one backward (value) and one forward (covariance) sweep.

use serde::Serialize;

use crate::error::{GameError, Result};
use crate::linalg::{self, lambda_min, solve_spd, sym, BlockDiag, Mat, PSD_TOL};
use crate::model::{GainSide, LqGame, StructuredGain};

/// Stationarity tolerance on `|F|_F` and `|E|_F` at the Nash gains.
pub const STATIONARITY_TOL: f64 = 1e-8;

/// `A_h - B_h K_h - D_h L_h` for every stage.
pub fn closed_loop_blocks(game: &LqGame, k: &StructuredGain, l: &StructuredGain) -> Vec<Mat> {
    game.stages()
        .iter()
        .enumerate()
        .map(|(h, s)| &s.a - &s.b * k.block(h) - &s.d * l.block(h))
        .collect()
}

/// `M_h = Q_h + K_h' Ru_h K_h - L_h' Rw_h L_h`; the last block is `Q_N`.
pub fn stage_cost_blocks(game: &LqGame, k: &StructuredGain, l: &StructuredGain) -> Vec<Mat> {
    let mut out: Vec<Mat> = game
        .stages()
        .iter()
        .enumerate()
        .map(|(h, s)| {
            let kh = k.block(h);
            let lh = l.block(h);
            &s.q + kh.transpose() * &s.ru * kh - lh.transpose() * &s.rw * lh
        })
        .collect();
    out.push(game.terminal_q().clone());
    out
}

/// `P_{K,L}` by the backward sweep `P_N = Q_N`, `P_h = M_h + Acl_h' P_{h+1} Acl_h`.
pub fn value_matrix(game: &LqGame, k: &StructuredGain, l: &StructuredGain) -> BlockDiag {
    let acl = closed_loop_blocks(game, k, l);
    let costs = stage_cost_blocks(game, k, l);
    let n = game.horizon();
    let mut blocks = vec![Mat::zeros(0, 0); n + 1];
    blocks[n] = costs[n].clone();
    for h in (0..n).rev() {
        blocks[h] = sym(&(&costs[h] + acl[h].transpose() * &blocks[h + 1] * &acl[h]));
    }
    BlockDiag::new(blocks)
}

/// `Sigma_{K,L}` by the forward sweep `Sigma_{h+1} = Acl_h Sigma_h Acl_h' + cov(xi_h)`.
pub fn state_covariance(game: &LqGame, k: &StructuredGain, l: &StructuredGain) -> BlockDiag {
    let acl = closed_loop_blocks(game, k, l);
    let cov = game.noise().covariance();
    let mut blocks = Vec::with_capacity(game.horizon() + 1);
    blocks.push(cov[0].clone());
    for (h, a) in acl.iter().enumerate() {
        let next = sym(&(a * &blocks[h] * a.transpose() + &cov[h + 1]));
        blocks.push(next);
    }
    BlockDiag::new(blocks)
}

/// `G(K, L) = Tr(P_{K,L} Sigma_0)`.
pub fn objective(game: &LqGame, k: &StructuredGain, l: &StructuredGain) -> f64 {
    value_matrix(game, k, l).trace_product(&game.noise().sigma0())
}

/// Natural gradients `(F, E)` evaluated with the value matrix `p` of `(K, L)`.
pub fn natural_gradients(
    game: &LqGame,
    k: &StructuredGain,
    l: &StructuredGain,
    p: &BlockDiag,
) -> (StructuredGain, StructuredGain) {
    let mut f = Vec::with_capacity(game.horizon());
    let mut e = Vec::with_capacity(game.horizon());
    for (h, s) in game.stages().iter().enumerate() {
        let pn = &p.blocks[h + 1];
        let (kh, lh) = (k.block(h), l.block(h));
        let btp = s.b.transpose() * pn;
        let dtp = s.d.transpose() * pn;
        f.push((&s.ru + &btp * &s.b) * kh - &btp * (&s.a - &s.d * lh));
        e.push((&dtp * &s.d - &s.rw) * lh - &dtp * (&s.a - &s.b * kh));
    }
    (
        game.gain_from_blocks(GainSide::K, f).unwrap(),
        game.gain_from_blocks(GainSide::L, e).unwrap(),
    )
}

/// Euclidean gradients `(2 F Sigma, 2 E Sigma)` restricted to the block pattern.
pub fn policy_gradients(
    game: &LqGame,
    k: &StructuredGain,
    l: &StructuredGain,
) -> (StructuredGain, StructuredGain) {
    let p = value_matrix(game, k, l);
    let sigma = state_covariance(game, k, l);
    let (f, e) = natural_gradients(game, k, l, &p);
    let times_sigma = |g: &StructuredGain| {
        let blocks = g
            .blocks()
            .iter()
            .enumerate()
            .map(|(h, b)| b * &sigma.blocks[h] * 2.0)
            .collect();
        game.gain_from_blocks(g.side(), blocks).unwrap()
    };
    (times_sigma(&f), times_sigma(&e))
}

/// `H_h = Rw_h - D_h' P_{h+1} D_h` for every stage.
pub fn disturbance_margin(game: &LqGame, p: &BlockDiag) -> Vec<Mat> {
    game.stages()
        .iter()
        .enumerate()
        .map(|(h, s)| sym(&(&s.rw - s.d.transpose() * &p.blocks[h + 1] * &s.d)))
        .collect()
}

/// Value matrix, covariance, natural gradients and disturbance margin at one gain pair.
#[derive(Clone, Debug, Serialize)]
pub struct ValueCertificate {
    pub p: BlockDiag,
    pub sigma: BlockDiag,
    pub f: StructuredGain,
    pub e: StructuredGain,
    pub h: Vec<Mat>,
    pub objective: f64,
}

impl ValueCertificate {
    pub fn compute(game: &LqGame, k: &StructuredGain, l: &StructuredGain) -> Self {
        let p = value_matrix(game, k, l);
        let sigma = state_covariance(game, k, l);
        let (f, e) = natural_gradients(game, k, l, &p);
        let h = disturbance_margin(game, &p);
        let objective = p.trace_product(&game.noise().sigma0());
        Self {
            p,
            sigma,
            f,
            e,
            h,
            objective,
        }
    }

    pub fn lambda_min_h(&self) -> f64 {
        self.h.iter().map(lambda_min).fold(f64::INFINITY, f64::min)
    }
}

/// Stage and eigenvalue that broke a definiteness requirement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StageViolation {
    pub stage: usize,
    pub lambda_min: f64,
}

/// Result of the maximizer's best-response recursion for a fixed `K`.
#[derive(Clone, Debug, Serialize)]
pub struct BestResponse {
    /// `L(K)`; stages below a violation are left at zero.
    pub l: StructuredGain,
    /// `P_{K, L(K)}`; stages below a violation are left at zero.
    pub p: BlockDiag,
    /// `H_h` at `P_{K, L(K)}` for the stages that were reached.
    pub h: Vec<Mat>,
    pub lambda_min_h: f64,
    pub lambda_min_p: f64,
    pub feasible: bool,
    /// First stage (walking backwards) where `H_h` failed to be positive definite.
    pub h_violation: Option<StageViolation>,
    /// First stage where `P_h` failed to be positive semidefinite.
    pub p_violation: Option<StageViolation>,
}

impl BestResponse {
    /// `Tr(P_{K,L(K)} Sigma_0)`; meaningful only when feasible.
    pub fn value(&self, game: &LqGame) -> f64 {
        self.p.trace_product(&game.noise().sigma0())
    }
}

/// `H_h` counts as positive definite when `lambda_min > PSD_TOL * |H_h|`.
fn h_is_pd(h: &Mat) -> (bool, f64) {
    let lm = lambda_min(h);
    (lm > PSD_TOL * h.norm(), lm)
}

fn p_is_psd(p: &Mat) -> (bool, f64) {
    let lm = lambda_min(p);
    (lm >= -PSD_TOL * (1.0 + p.norm()), lm)
}

/// Stage-wise best response `L(K)` and `P_{K, L(K)}`.
///
/// Backwards from `P_N = Q_N`: `H_h = Rw_h - D_h' P_{h+1} D_h`, and when it is
/// positive definite `L_h = -H_h^{-1} D_h' P_{h+1} (A_h - B_h K_h)` and
/// `P_h = Q_h + K_h' Ru_h K_h + A_K' (P + P D H^{-1} D' P) A_K`.
/// An indefinite `H_h` stops the sweep and marks the result infeasible.
pub fn best_response_l(game: &LqGame, k: &StructuredGain) -> BestResponse {
    let n = game.horizon();
    let m = game.state_dim();
    let nd = game.disturbance_dim();
    let mut l_blocks = vec![Mat::zeros(nd, m); n];
    let mut p_blocks = vec![Mat::zeros(m, m); n + 1];
    let mut h_blocks = vec![Mat::zeros(nd, nd); n];
    p_blocks[n] = game.terminal_q().clone();
    let (mut p_ok, mut lambda_min_p) = p_is_psd(&p_blocks[n]);
    let mut p_violation = (!p_ok).then_some(StageViolation {
        stage: n,
        lambda_min: lambda_min_p,
    });
    let mut lambda_min_h = f64::INFINITY;
    let mut h_violation = None;

    for h in (0..n).rev() {
        let s = game.stage(h);
        let pn = &p_blocks[h + 1];
        let hh = sym(&(&s.rw - s.d.transpose() * pn * &s.d));
        let (pd, lm) = h_is_pd(&hh);
        lambda_min_h = lambda_min_h.min(lm);
        h_blocks[h] = hh.clone();
        if !pd {
            h_violation = Some(StageViolation {
                stage: h,
                lambda_min: lm,
            });
            break;
        }
        let kh = k.block(h);
        let a_k = &s.a - &s.b * kh;
        let dtp = s.d.transpose() * pn;
        let Some(hinv_dtp) = solve_spd(&hh, &dtp) else {
            h_violation = Some(StageViolation {
                stage: h,
                lambda_min: lm,
            });
            break;
        };
        l_blocks[h] = -(&hinv_dtp * &a_k);
        let p_tilde = pn + dtp.transpose() * &hinv_dtp;
        let ph = sym(&(&s.q + kh.transpose() * &s.ru * kh + a_k.transpose() * p_tilde * &a_k));
        let (ok, lmp) = p_is_psd(&ph);
        lambda_min_p = lambda_min_p.min(lmp);
        if !ok && p_violation.is_none() {
            p_violation = Some(StageViolation {
                stage: h,
                lambda_min: lmp,
            });
        }
        p_ok &= ok;
        p_blocks[h] = ph;
    }

    BestResponse {
        l: game.gain_from_blocks(GainSide::L, l_blocks).unwrap(),
        p: BlockDiag::new(p_blocks),
        h: h_blocks,
        lambda_min_h,
        lambda_min_p,
        feasible: h_violation.is_none() && p_ok,
        h_violation,
        p_violation,
    }
}

/// Primal value `Phi(K) = G(K, L(K))`, or the violation that makes it undefined.
pub fn primal_value(game: &LqGame, k: &StructuredGain) -> Result<f64> {
    let br = best_response_l(game, k);
    if let Some(v) = br.h_violation {
        return Err(GameError::Infeasible {
            stage: v.stage,
            lambda_min: v.lambda_min,
        });
    }
    Ok(br.value(game))
}

/// Saddle point of the game from the generalized Riccati difference equation.
#[derive(Clone, Debug, Serialize)]
pub struct NashSolution {
    pub p_star: Vec<Mat>,
    pub k_star: StructuredGain,
    pub l_star: StructuredGain,
    pub value: f64,
    /// `min_h lambda_min(Rw_h - D_h' P*_{h+1} D_h)`.
    pub margin: f64,
}

/// Solves the Riccati recursion `P*_h = Q_h + A_h' P*_{h+1} Lambda_h^{-1} A_h`
/// with `Lambda_h = I + (B Ru^{-1} B' - D Rw^{-1} D') P*_{h+1}`.
///
/// The gains solve the stage first-order conditions `F = E = 0` by eliminating
/// `L_h` and are post-checked for stationarity.
pub fn solve_nash(game: &LqGame) -> Result<NashSolution> {
    let n = game.horizon();
    let m = game.state_dim();
    let mut p = vec![Mat::zeros(m, m); n + 1];
    p[n] = game.terminal_q().clone();
    let mut k_blocks = vec![Mat::zeros(game.control_dim(), m); n];
    let mut l_blocks = vec![Mat::zeros(game.disturbance_dim(), m); n];
    let mut margin = f64::INFINITY;

    for h in (0..n).rev() {
        let s = game.stage(h);
        let pn = p[h + 1].clone();
        let lm_p = lambda_min(&pn);
        if lm_p < -PSD_TOL * (1.0 + pn.norm()) {
            return Err(GameError::IndefiniteValue {
                stage: h + 1,
                lambda_min: lm_p,
            });
        }
        let hh = sym(&(&s.rw - s.d.transpose() * &pn * &s.d));
        let lm_h = lambda_min(&hh);
        if lm_h <= PSD_TOL * hh.norm() {
            return Err(GameError::Unbounded {
                stage: h,
                lambda_min: lm_h,
            });
        }
        margin = margin.min(lm_h);

        let ru_inv_bt = solve_spd(&s.ru, &s.b.transpose()).ok_or(GameError::Singular {
            stage: h,
            what: "Ru",
            condition: f64::INFINITY,
        })?;
        let rw_inv_dt = solve_spd(&s.rw, &s.d.transpose()).ok_or(GameError::Singular {
            stage: h,
            what: "Rw",
            condition: f64::INFINITY,
        })?;
        let lambda = Mat::identity(m, m) + (&s.b * ru_inv_bt - &s.d * rw_inv_dt) * &pn;
        let cond = linalg::condition_estimate(&lambda);
        let lu = lambda.lu();
        let lam_inv_a = match lu.solve(&s.a) {
            Some(x) if cond.is_finite() && cond < 1e14 => x,
            _ => {
                return Err(GameError::Singular {
                    stage: h,
                    what: "Lambda",
                    condition: cond,
                })
            }
        };
        p[h] = sym(&(game.q(h) + s.a.transpose() * &pn * lam_inv_a));

        // eliminate L: (Ru + B' Pt B) K = B' Pt A with Pt = P + P D H^{-1} D' P
        let dtp = s.d.transpose() * &pn;
        let hinv_dtp = solve_spd(&hh, &dtp).unwrap();
        let p_tilde = &pn + dtp.transpose() * &hinv_dtp;
        let btpt = s.b.transpose() * &p_tilde;
        let gk = &s.ru + &btpt * &s.b;
        let kh = solve_spd(&gk, &(&btpt * &s.a)).ok_or(GameError::Singular {
            stage: h,
            what: "Ru + B'PB",
            condition: linalg::condition_estimate(&gk),
        })?;
        l_blocks[h] = -(&hinv_dtp * (&s.a - &s.b * &kh));
        k_blocks[h] = kh;
    }
    let lm0 = lambda_min(&p[0]);
    if lm0 < -PSD_TOL * (1.0 + p[0].norm()) {
        return Err(GameError::IndefiniteValue {
            stage: 0,
            lambda_min: lm0,
        });
    }

    let k_star = game.gain_from_blocks(GainSide::K, k_blocks)?;
    let l_star = game.gain_from_blocks(GainSide::L, l_blocks)?;
    let value = BlockDiag::new(p.clone()).trace_product(&game.noise().sigma0());

    let pk = value_matrix(game, &k_star, &l_star);
    let (f, e) = natural_gradients(game, &k_star, &l_star, &pk);
    if f.norm() > STATIONARITY_TOL || e.norm() > STATIONARITY_TOL {
        return Err(GameError::NotStationary {
            frob_f: f.norm(),
            frob_e: e.norm(),
        });
    }

    Ok(NashSolution {
        p_star: p,
        k_star,
        l_star,
        value,
        margin,
    })
}

/// Membership of `K` in the set where the best response exists and `P_{K,L(K)} ⪰ 0`.
#[derive(Clone, Debug, Serialize)]
pub struct FeasibilityReport {
    pub member: bool,
    pub p_psd: bool,
    pub h_pd: bool,
    pub lambda_min_p: f64,
    pub lambda_min_h: f64,
    pub violating_stage: Option<usize>,
}

pub fn in_feasible_set(game: &LqGame, k: &StructuredGain) -> FeasibilityReport {
    let br = best_response_l(game, k);
    let h_pd = br.h_violation.is_none();
    let p_psd = h_pd && br.p_violation.is_none();
    FeasibilityReport {
        member: br.feasible,
        p_psd,
        h_pd,
        lambda_min_p: br.lambda_min_p,
        lambda_min_h: br.lambda_min_h,
        violating_stage: br
            .h_violation
            .or(br.p_violation)
            .map(|v| v.stage),
    }
}

/// Precomputed data about the initial gain `K_0` that defines the bounded set
/// `{K : 0 ⪯ P_{K,L(K)} ⪯ P_{K0,L(K0)} + lambda_min(H_0) / (2 |D|^2) I}`.
#[derive(Clone, Debug, Serialize)]
pub struct KhatAnchor {
    pub p0: BlockDiag,
    pub lambda_min_h0: f64,
    pub d_norm: f64,
    /// `lambda_min(H_0) / (2 |D|^2)`; infinite when `D = 0`.
    pub radius: f64,
}

impl KhatAnchor {
    pub fn new(game: &LqGame, k0: &StructuredGain) -> Result<Self> {
        let br = best_response_l(game, k0);
        if !br.feasible {
            let v = br.h_violation.or(br.p_violation).unwrap();
            return Err(GameError::Infeasible {
                stage: v.stage,
                lambda_min: v.lambda_min,
            });
        }
        let d_norm = game.disturbance_norm();
        let radius = if d_norm == 0.0 {
            f64::INFINITY
        } else {
            br.lambda_min_h / (2.0 * d_norm * d_norm)
        };
        Ok(Self {
            p0: br.p,
            lambda_min_h0: br.lambda_min_h,
            d_norm,
            radius,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KhatReport {
    pub member: bool,
    pub feasible: bool,
    /// `lambda_min(P_{K,L(K)})`.
    pub lower_slack: f64,
    /// `lambda_min(P_0 + radius I - P_{K,L(K)})`.
    pub upper_slack: f64,
}

pub fn in_khat_set(game: &LqGame, k: &StructuredGain, anchor: &KhatAnchor) -> KhatReport {
    let br = best_response_l(game, k);
    if br.h_violation.is_some() {
        return KhatReport {
            member: false,
            feasible: false,
            lower_slack: br.lambda_min_p,
            upper_slack: f64::NEG_INFINITY,
        };
    }
    let upper_slack = if anchor.radius.is_infinite() {
        f64::INFINITY
    } else {
        anchor.p0.add_identity(anchor.radius).sub(&br.p).lambda_min()
    };
    let tol = PSD_TOL * (1.0 + br.p.norm());
    KhatReport {
        member: br.feasible && br.lambda_min_p >= -tol && upper_slack >= -tol,
        feasible: br.feasible,
        lower_slack: br.lambda_min_p,
        upper_slack,
    }
}
