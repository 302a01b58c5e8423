//! Executable checks of the structural facts the solvers rely on.
//!
//! Each check produces a [`CheckReport`]; [`run_property_suite`] runs all of
//! them over randomly generated small instances. Reports are ordered by check
//! name and instance so a replay with the same seed is byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify::{
    best_response_l, in_feasible_set, in_khat_set, natural_gradients, objective, policy_gradients,
    solve_nash, state_covariance, value_matrix, KhatAnchor, NashSolution,
};
use crate::error::{GameError, Result};
use crate::linalg::{lambda_max, lambda_min, solve_spd, sym, BlockDiag, Mat};
use crate::model::{build_compact, GainSide, LqGame, NoiseModel, Stage, StructuredGain};
use crate::rng::{Purpose, RngStream, StreamKey};
use crate::sim::batch_mean_cost;
use crate::zo::sample_unit_sphere;

/// Largest `m (N + 1)` accepted by the dense oracle.
pub const DENSE_ORACLE_CAP: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub instance: String,
    pub pass: bool,
    pub margins: BTreeMap<String, f64>,
    pub tolerance: f64,
    pub seed: u64,
}

impl CheckReport {
    fn new(check: &str, instance: impl Into<String>, tolerance: f64, seed: u64) -> Self {
        Self {
            check: check.to_string(),
            instance: instance.into(),
            pass: false,
            margins: BTreeMap::new(),
            tolerance,
            seed,
        }
    }

    fn margin(mut self, name: &str, value: f64) -> Self {
        self.margins.insert(name.to_string(), value);
        self
    }

    fn pass(mut self, pass: bool) -> Self {
        self.pass = pass;
        self
    }
}

/// Central differences of `objective` over the in-pattern coordinates of `side`.
///
/// Coordinate `i` uses the step `step * (1 + |x_i|)`.
pub fn finite_diff_gradient(
    game: &LqGame,
    k: &StructuredGain,
    l: &StructuredGain,
    side: GainSide,
    step: f64,
) -> StructuredGain {
    assert!(step > 0.0);
    let base = match side {
        GainSide::K => k,
        GainSide::L => l,
    };
    let x = base.to_flat();
    let eval = |flat: &[f64]| {
        let g = base.with_flat(flat);
        match side {
            GainSide::K => objective(game, &g, l),
            GainSide::L => objective(game, k, &g),
        }
    };
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.clone();
    for i in 0..x.len() {
        let h = step * (1.0 + x[i].abs());
        probe[i] = x[i] + h;
        let up = eval(&probe);
        probe[i] = x[i] - h;
        let down = eval(&probe);
        probe[i] = x[i];
        grad[i] = (up - down) / (2.0 * h);
    }
    base.with_flat(&grad)
}

/// One-step descent check
/// `Phi(K') - Phi(K) <= tau2 * slack - (tau2 phi / 4) Tr(F' F)` with `F = F_{K, L}`.
pub fn check_descent(
    game: &LqGame,
    k: &StructuredGain,
    k_next: &StructuredGain,
    l: &StructuredGain,
    tau2: f64,
    slack: f64,
) -> CheckReport {
    let report = CheckReport::new("descent", "", 0.0, 0);
    let before = best_response_l(game, k);
    let after = best_response_l(game, k_next);
    if !(before.feasible && after.feasible) {
        return report
            .margin("feasible_before", f64::from(u8::from(before.feasible)))
            .margin("feasible_after", f64::from(u8::from(after.feasible)));
    }
    let (f, _) = natural_gradients(game, k, l, &value_matrix(game, k, l));
    let lhs = after.value(game) - before.value(game);
    let rhs = tau2 * slack - tau2 * game.noise().phi() / 4.0 * f.norm_squared();
    // rounding in the two values
    let tol = 1e-12 * (1.0 + before.value(game).abs());
    report
        .margin("lhs", lhs)
        .margin("rhs", rhs)
        .margin("slack_used", slack)
        .pass(lhs <= rhs + tol)
}

/// Gradient-domination ratio `(Phi(K) - G*) / Tr(F' F)` at `F = F_{K, L(K)}`.
pub fn check_gradient_domination(
    game: &LqGame,
    k: &StructuredGain,
    nash: &NashSolution,
    anchor: &KhatAnchor,
) -> CheckReport {
    const GAP_TOL: f64 = 1e-10;
    const NE_GAP: f64 = 1e-8;
    let report = CheckReport::new("gradient_domination", "", GAP_TOL, 0);
    let khat = in_khat_set(game, k, anchor);
    if !khat.member {
        return report.margin("in_khat", 0.0);
    }
    let br = best_response_l(game, k);
    let (f, _) = natural_gradients(game, k, &br.l, &br.p);
    let gap = br.value(game) - nash.value;
    let grad_sq = f.norm_squared();
    let report = report.margin("gap", gap).margin("grad_sq", grad_sq).margin("in_khat", 1.0);
    if grad_sq <= 1e-16 {
        // stationary: must be the equilibrium
        return report.pass(gap.abs() <= NE_GAP);
    }
    let ratio = gap / grad_sq;
    report.margin("ratio", ratio).pass(gap >= -GAP_TOL && ratio.is_finite())
}

/// Objective by dense compact algebra: `Tr(M X)` with
/// `X = sum_{j=0}^{N} A^j Sigma_0 (A')^j` for the nilpotent closed loop `A`.
pub fn brute_force_value_oracle(game: &LqGame, k: &StructuredGain, l: &StructuredGain) -> Result<f64> {
    let dim = game.state_dim() * (game.horizon() + 1);
    if dim > DENSE_ORACLE_CAP {
        return Err(GameError::TooLarge {
            dim,
            cap: DENSE_ORACLE_CAP,
        });
    }
    let ops = build_compact(game)?;
    let a = ops.closed_loop(k, l);
    let m = ops.stage_cost(k, l);
    let mut term = ops.sigma0.clone();
    let mut x = Mat::zeros(dim, dim);
    for _ in 0..=game.horizon() {
        x += &term;
        term = &a * term * a.transpose();
    }
    Ok((m * x).trace())
}

/// Dual Lyapunov identity `Tr(X V) = Tr(Y W)` where `X = sum (A')^j W A^j` and
/// `Y = sum A^j V (A')^j` for a nilpotent `A`; returns `(Tr(XV), Tr(YW))`.
pub fn dual_lyapunov_traces(a: &Mat, w: &Mat, v: &Mat) -> (f64, f64) {
    let n = a.nrows();
    let mut x = Mat::zeros(n, n);
    let mut y = Mat::zeros(n, n);
    let mut tx = w.clone();
    let mut ty = v.clone();
    for _ in 0..=n {
        x += &tx;
        y += &ty;
        tx = a.transpose() * tx * a;
        ty = a * ty * a.transpose();
    }
    ((x * v).trace(), (y * w).trace())
}

/// Right-hand side of the value-difference identity for a change `delta = K' - K`:
/// `sum_h Tr(Sigma'_h [2 delta_h' F_h + delta_h' (Ru_h + B_h' P_{h+1} B_h) delta_h])`,
/// with `P`, `F` at `(K, L)` and `Sigma'` at `(K', L)`.
pub fn value_difference_rhs(
    game: &LqGame,
    k: &StructuredGain,
    k_new: &StructuredGain,
    l: &StructuredGain,
) -> f64 {
    let p = value_matrix(game, k, l);
    let (f, _) = natural_gradients(game, k, l, &p);
    let sigma_new = state_covariance(game, k_new, l);
    game.stages()
        .iter()
        .enumerate()
        .map(|(h, s)| {
            let delta = k_new.block(h) - k.block(h);
            let curv = &s.ru + s.b.transpose() * &p.blocks[h + 1] * &s.b;
            let inner = delta.transpose() * f.block(h) * 2.0 + delta.transpose() * curv * &delta;
            (&sigma_new.blocks[h] * inner).trace()
        })
        .sum()
}

/// Size limits and tolerances of the property suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteOptions {
    pub instances: usize,
    pub max_state: usize,
    pub max_control: usize,
    pub max_disturbance: usize,
    pub max_horizon: usize,
    /// `(K, L)` pairs per instance for the best-response ordering check.
    pub ordering_pairs: usize,
    /// Random feasible points per instance for gradient checks.
    pub fd_points: usize,
    /// Instances that also get a Monte Carlo rollout check.
    pub mc_instances: usize,
    pub mc_rollouts: usize,
    pub fd_step: f64,
    pub fd_rel_tol: f64,
    pub identity_tol: f64,
    pub ordering_tol: f64,
    pub stationarity_tol: f64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            instances: 20,
            max_state: 3,
            max_control: 3,
            max_disturbance: 3,
            max_horizon: 4,
            ordering_pairs: 125,
            fd_points: 20,
            mc_instances: 10,
            mc_rollouts: 20_000,
            fd_step: 1e-5,
            fd_rel_tol: 1e-6,
            identity_tol: 1e-10,
            ordering_tol: 1e-9,
            stationarity_tol: 1e-8,
        }
    }
}

fn gaussian_mat<R: Rng>(rng: &mut R, r: usize, c: usize, scale: f64) -> Mat {
    Mat::from_fn(r, c, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

fn random_spd<R: Rng>(rng: &mut R, n: usize, floor: f64) -> Mat {
    let g = gaussian_mat(rng, n, n, 1.0);
    sym(&(&g * g.transpose() / n as f64 + Mat::identity(n, n) * floor))
}

/// A random instance with `Rw` scaled up until the Riccati solution exists.
pub fn random_instance<R: Rng>(rng: &mut R, opts: &SuiteOptions) -> (LqGame, NashSolution) {
    let m = rng.random_range(1..=opts.max_state);
    let d = rng.random_range(1..=opts.max_control);
    let w = rng.random_range(1..=opts.max_disturbance);
    let n = rng.random_range(1..=opts.max_horizon);
    let stages: Vec<Stage> = (0..n)
        .map(|_| Stage {
            a: gaussian_mat(rng, m, m, 0.6),
            b: gaussian_mat(rng, m, d, 0.5),
            d: gaussian_mat(rng, m, w, 0.5),
            q: random_spd(rng, m, 0.5),
            ru: random_spd(rng, d, 0.5),
            rw: random_spd(rng, w, 0.5),
        })
        .collect();
    let terminal_q = random_spd(rng, m, 0.5);
    let cov: Vec<Mat> = (0..=n).map(|_| random_spd(rng, m, 0.1) * 0.5).collect();
    let noise = NoiseModel::truncated_gaussian(cov).expect("random covariances are SPD");
    let mut shift = 1.0;
    loop {
        let st: Vec<Stage> = stages
            .iter()
            .map(|s| Stage {
                rw: &s.rw + Mat::identity(w, w) * shift,
                ..s.clone()
            })
            .collect();
        let game = LqGame::new(st, terminal_q.clone(), noise.clone()).expect("valid instance");
        if let Ok(ne) = solve_nash(&game) {
            return (game, ne);
        }
        shift *= 2.0;
    }
}

/// Random gain in the feasible set: `K*` plus a bounded random structured perturbation.
pub fn random_feasible_k<R: Rng>(rng: &mut R, game: &LqGame, nash: &NashSolution) -> StructuredGain {
    let mut radius = rng.random_range(0.05..0.6) * (1.0 + nash.k_star.norm());
    loop {
        let u = sample_unit_sphere(game, GainSide::K, rng);
        let k = nash.k_star.axpy(radius, &u);
        if in_feasible_set(game, &k).member {
            return k;
        }
        radius *= 0.5;
    }
}

fn random_l<R: Rng>(rng: &mut R, game: &LqGame, center: &StructuredGain) -> StructuredGain {
    let radius = rng.random_range(0.0..1.0) * (0.1 + center.norm());
    center.axpy(radius, &sample_unit_sphere(game, GainSide::L, rng))
}

fn describe(game: &LqGame, idx: usize) -> String {
    format!(
        "random#{idx:02}(m={},d={},n={},N={})",
        game.state_dim(),
        game.control_dim(),
        game.disturbance_dim(),
        game.horizon()
    )
}

fn rel_err(a: &StructuredGain, b: &StructuredGain) -> f64 {
    a.axpy(-1.0, b).norm() / a.norm().max(1.0)
}

fn instance_checks(idx: usize, seed: u64, opts: &SuiteOptions) -> Vec<CheckReport> {
    let mut rng = RngStream::new(seed, StreamKey::new(Purpose::Instance, idx as u64, 0, 0)).rng();
    let (game, nash) = random_instance(&mut rng, opts);
    let name = describe(&game, idx);
    let mut out = Vec::new();
    let new = |check: &str, tol: f64| CheckReport::new(check, name.clone(), tol, seed);

    // equilibrium stationarity
    let (f, e) = natural_gradients(&game, &nash.k_star, &nash.l_star, &value_matrix(&game, &nash.k_star, &nash.l_star));
    out.push(
        new("nash_stationarity", opts.stationarity_tol)
            .margin("frob_f", f.norm())
            .margin("frob_e", e.norm())
            .pass(f.norm() <= opts.stationarity_tol && e.norm() <= opts.stationarity_tol),
    );

    // best-response ordering P_{K,L} <= P_{K,L(K)}
    let mut worst_slack = f64::INFINITY;
    for _ in 0..opts.ordering_pairs {
        let k = random_feasible_k(&mut rng, &game, &nash);
        let br = best_response_l(&game, &k);
        let l = random_l(&mut rng, &game, &br.l);
        let p = value_matrix(&game, &k, &l);
        worst_slack = worst_slack.min(br.p.sub(&p).lambda_min());
    }
    out.push(
        new("best_response_ordering", opts.ordering_tol)
            .margin("min_eigen_slack", worst_slack)
            .margin("pairs", opts.ordering_pairs as f64)
            .pass(worst_slack >= -opts.ordering_tol),
    );

    // analytic vs finite-difference gradients, objective vs dense oracle,
    // and the value-difference identity at random feasible points
    let (mut fd_k, mut fd_l, mut oracle, mut vdiff) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..opts.fd_points {
        let k = random_feasible_k(&mut rng, &game, &nash);
        let l = random_l(&mut rng, &game, &best_response_l(&game, &k).l);
        let (gk, gl) = policy_gradients(&game, &k, &l);
        fd_k = fd_k.max(rel_err(&gk, &finite_diff_gradient(&game, &k, &l, GainSide::K, opts.fd_step)));
        fd_l = fd_l.max(rel_err(&gl, &finite_diff_gradient(&game, &k, &l, GainSide::L, opts.fd_step)));

        let g = objective(&game, &k, &l);
        let dense = brute_force_value_oracle(&game, &k, &l).expect("small instance");
        oracle = oracle.max((g - dense).abs() / g.abs().max(1.0));

        let k2 = random_feasible_k(&mut rng, &game, &nash);
        let lhs = objective(&game, &k2, &l) - g;
        let rhs = value_difference_rhs(&game, &k, &k2, &l);
        vdiff = vdiff.max((lhs - rhs).abs() / g.abs().max(1.0));
    }
    out.push(
        new("fd_gradient_k", opts.fd_rel_tol)
            .margin("max_rel_err", fd_k)
            .pass(fd_k <= opts.fd_rel_tol),
    );
    out.push(
        new("fd_gradient_l", opts.fd_rel_tol)
            .margin("max_rel_err", fd_l)
            .pass(fd_l <= opts.fd_rel_tol),
    );
    out.push(
        new("dense_value_oracle", opts.identity_tol)
            .margin("max_rel_err", oracle)
            .pass(oracle <= opts.identity_tol),
    );
    out.push(
        new("value_difference_identity", opts.identity_tol)
            .margin("max_rel_err", vdiff)
            .pass(vdiff <= opts.identity_tol),
    );

    // dual Lyapunov trace identity on the compact closed loop with random weights
    let ops = build_compact(&game).expect("valid");
    let k = random_feasible_k(&mut rng, &game, &nash);
    let l = random_l(&mut rng, &game, &nash.l_star);
    let a = ops.closed_loop(&k, &l);
    let dim = a.nrows();
    let wgt = random_spd(&mut rng, dim, 0.1);
    let v = random_spd(&mut rng, dim, 0.1);
    let (txv, tyw) = dual_lyapunov_traces(&a, &wgt, &v);
    let trace_err = (txv - tyw).abs() / txv.abs().max(1.0);
    out.push(
        new("trace_identity", opts.identity_tol)
            .margin("rel_err", trace_err)
            .pass(trace_err <= opts.identity_tol),
    );

    // gradient domination and exact descent around K*
    let anchor_k = random_feasible_k(&mut rng, &game, &nash);
    if let Ok(anchor) = KhatAnchor::new(&game, &anchor_k) {
        let mut worst = check_gradient_domination(&game, &anchor_k, &nash, &anchor);
        let mut mu_hat = worst.margins.get("ratio").copied().unwrap_or(0.0);
        for _ in 0..5 {
            let k = nash.k_star.axpy(rng.random_range(0.0..1.0), &anchor_k.axpy(-1.0, &nash.k_star));
            let rep = check_gradient_domination(&game, &k, &nash, &anchor);
            mu_hat = mu_hat.max(rep.margins.get("ratio").copied().unwrap_or(0.0));
            if !rep.pass && worst.pass {
                worst = rep;
            }
        }
        let mut rep = worst.margin("mu_hat", mu_hat);
        rep.instance = name.clone();
        rep.seed = seed;
        out.push(rep);

        let br = best_response_l(&game, &anchor_k);
        let p_tilde_curv = game
            .stages()
            .iter()
            .enumerate()
            .map(|(h, s)| {
                let pn = &br.p.blocks[h + 1];
                let hh = &s.rw - s.d.transpose() * pn * &s.d;
                let dtp = s.d.transpose() * pn;
                let pt = pn + dtp.transpose() * solve_spd(&hh, &dtp).expect("feasible");
                lambda_max(&(&s.ru + s.b.transpose() * pt * &s.b))
            })
            .fold(0.0, f64::max);
        let tau2 = 1.0 / (8.0 * p_tilde_curv);
        let (f, _) = natural_gradients(&game, &anchor_k, &br.l, &br.p);
        let next = anchor_k.axpy(-tau2, &f);
        let mut rep = check_descent(&game, &anchor_k, &next, &br.l, tau2, 0.0);
        rep.instance = name.clone();
        rep.seed = seed;
        out.push(rep.margin("tau2", tau2));
    }

    // Monte Carlo: mean realized cost vs the model-based objective (3 standard errors)
    if idx < opts.mc_instances {
        let k = random_feasible_k(&mut rng, &game, &nash);
        let l = random_l(&mut rng, &game, &best_response_l(&game, &k).l);
        let key = StreamKey::new(Purpose::Rollout, idx as u64, 0, 0);
        let (mean, se) = batch_mean_cost(&game, &k, &l, opts.mc_rollouts, seed, key);
        let z = (mean - objective(&game, &k, &l)).abs() / se;
        out.push(
            new("rollout_mean_cost", 3.0)
                .margin("z_score", z)
                .margin("std_err", se)
                .pass(z <= 3.0),
        );

        let mut worst = 0.0f64;
        let bound = game.noise().bound();
        let mut noise_rng = RngStream::new(seed, key.with_sample(u64::MAX)).rng();
        let mut x = DVector::zeros(game.state_dim());
        for i in 0..10_000 {
            game.noise().sample_into(i % (game.horizon() + 1), &mut noise_rng, &mut x);
            worst = worst.max(x.norm() / bound);
        }
        out.push(
            new("noise_bound", 1.0)
                .margin("max_norm_over_bound", worst)
                .pass(worst <= 1.0),
        );
    }
    out
}

/// A game with `Rw` too small: the suite expects every check to flag it infeasible.
pub fn adversarial_instance() -> LqGame {
    LqGame::scalar(1.0, 1.0, 0.5, 1.0, 1.0, 0.2)
}

fn adversarial_check(seed: u64) -> CheckReport {
    let game = adversarial_instance();
    let k = game.constant_gain(GainSide::K, &Mat::from_element(1, 1, 0.5)).expect("shape");
    let report = in_feasible_set(&game, &k);
    let nash_rejected = solve_nash(&game).is_err();
    CheckReport::new("expected_infeasible", "scalar(Rw=0.2)", 0.0, seed)
        .margin("lambda_min_h", report.lambda_min_h)
        .margin("nash_rejected", f64::from(u8::from(nash_rejected)))
        .pass(!report.member && nash_rejected)
}

/// Runs every check over `opts.instances` random instances derived from `seed`.
pub fn run_property_suite(seed: u64, opts: &SuiteOptions) -> Vec<CheckReport> {
    let mut reports: Vec<CheckReport> = (0..opts.instances)
        .into_par_iter()
        .flat_map_iter(|idx| instance_checks(idx, seed, opts))
        .collect();
    reports.push(adversarial_check(seed));
    reports.sort_by(|a, b| (&a.check, &a.instance).cmp(&(&b.check, &b.instance)));
    reports
}

pub fn all_pass(reports: &[CheckReport]) -> bool {
    reports.iter().all(|r| r.pass)
}

/// One JSON object per line.
pub fn to_json_lines(reports: &[CheckReport]) -> String {
    let mut out = String::new();
    for r in reports {
        out.push_str(&serde_json::to_string(r).expect("report serializes"));
        out.push('\n');
    }
    out
}

/// Per-check pass counts.
pub fn summary_table(reports: &[CheckReport]) -> String {
    let mut groups: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for r in reports {
        let e = groups.entry(&r.check).or_default();
        e.0 += 1;
        e.1 += usize::from(r.pass);
    }
    let mut out = format!("{:<28} {:>6} {:>6}  status\n", "check", "passed", "total");
    for (name, (total, passed)) in groups {
        let status = if passed == total { "ok" } else { "FAIL" };
        let _ = writeln!(out, "{name:<28} {passed:>6} {total:>6}  {status}");
    }
    out
}

/// Random nilpotent (strictly block lower-triangular) matrix, for identity tests.
pub fn random_nilpotent(rng: &mut ChaCha8Rng, blocks: usize, size: usize) -> Mat {
    let n = blocks * size;
    let mut a = Mat::zeros(n, n);
    for h in 1..blocks {
        for j in 0..h {
            let blk = gaussian_mat(rng, size, size, 0.7);
            a.view_mut((h * size, j * size), (size, size)).copy_from(&blk);
        }
    }
    a
}

/// Smallest eigenvalue of `P_{K,L(K)} - P_{K,L}` (the best-response ordering slack).
pub fn ordering_slack(game: &LqGame, k: &StructuredGain, l: &StructuredGain) -> f64 {
    let br = best_response_l(game, k);
    let p: BlockDiag = value_matrix(game, k, l);
    br.p.sub(&p).blocks.iter().map(lambda_min).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn s(v: f64) -> Mat {
        Mat::from_element(1, 1, v)
    }

    #[test]
    fn scalar_fd_gradients() {
        let game = LqGame::scalar_demo();
        let k = game.constant_gain(GainSide::K, &s(0.5)).unwrap();
        let l = game.zero_gain(GainSide::L);
        let gk = finite_diff_gradient(&game, &k, &l, GainSide::K, 1e-5);
        let gl = finite_diff_gradient(&game, &k, &l, GainSide::L, 1e-5);
        assert!(gk.block(0)[(0, 0)].abs() < 1e-9);
        // 2 E Sigma = 2 (-0.25) (1) at stage 0
        assert!((gl.block(0)[(0, 0)] + 0.5).abs() < 1e-9);
    }

    #[test]
    fn dense_oracle_scalar() {
        let game = LqGame::scalar_demo();
        let k = game.constant_gain(GainSide::K, &s(0.5)).unwrap();
        let v = brute_force_value_oracle(&game, &k, &game.zero_gain(GainSide::L)).unwrap();
        assert!((v - 2.5).abs() < 1e-14);
    }

    #[test]
    fn dense_oracle_rejects_large_instances() {
        let big = LqGame::time_invariant(
            30,
            Mat::identity(3, 3),
            Mat::identity(3, 1),
            Mat::identity(3, 1),
            Mat::identity(3, 3),
            Mat::identity(1, 1),
            Mat::identity(1, 1) * 5.0,
            NoiseModel::truncated_gaussian(vec![Mat::identity(3, 3); 31]).unwrap(),
        )
        .unwrap();
        let k = big.zero_gain(GainSide::K);
        let l = big.zero_gain(GainSide::L);
        assert!(matches!(
            brute_force_value_oracle(&big, &k, &l),
            Err(GameError::TooLarge { dim: 93, cap: 64 })
        ));
    }

    #[test]
    fn dual_traces_agree_on_nilpotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_nilpotent(&mut rng, 4, 2);
        let w = random_spd(&mut rng, 8, 0.1);
        let v = random_spd(&mut rng, 8, 0.1);
        let (x, y) = dual_lyapunov_traces(&a, &w, &v);
        assert!((x - y).abs() < 1e-10 * x.abs());
    }

    #[test]
    fn value_difference_scalar() {
        let game = LqGame::scalar_demo();
        let k = game.constant_gain(GainSide::K, &s(0.5)).unwrap();
        let k2 = game.constant_gain(GainSide::K, &s(0.2)).unwrap();
        let l = game.constant_gain(GainSide::L, &s(-0.1)).unwrap();
        let lhs = objective(&game, &k2, &l) - objective(&game, &k, &l);
        assert!((lhs - value_difference_rhs(&game, &k, &k2, &l)).abs() < 1e-13);
    }

    #[test]
    fn domination_at_nash_is_trivial() {
        let game = LqGame::benchmark();
        let ne = solve_nash(&game).unwrap();
        let anchor = KhatAnchor::new(&game, &ne.k_star).unwrap();
        let r = check_gradient_domination(&game, &ne.k_star, &ne, &anchor);
        assert!(r.pass);
        assert!(!r.margins.contains_key("ratio"));
    }

    #[test]
    fn zero_step_descent_reports_both_sides() {
        let game = LqGame::scalar_demo();
        let k = game.constant_gain(GainSide::K, &s(0.8)).unwrap();
        let l = best_response_l(&game, &k).l;
        let r = check_descent(&game, &k, &k, &l, 0.1, 0.0);
        assert_eq!(r.margins["lhs"], 0.0);
        assert!(r.margins["rhs"] < 0.0);
    }

    #[test]
    fn adversarial_case_is_flagged() {
        assert!(adversarial_check(0).pass);
    }

    #[test]
    fn small_suite_passes_and_replays() {
        let opts = SuiteOptions {
            instances: 3,
            ordering_pairs: 10,
            fd_points: 3,
            mc_instances: 1,
            mc_rollouts: 2000,
            ..SuiteOptions::default()
        };
        let a = run_property_suite(17, &opts);
        let b = run_property_suite(17, &opts);
        assert_eq!(to_json_lines(&a), to_json_lines(&b));
        assert!(all_pass(&a), "{}", summary_table(&a));
    }
}
