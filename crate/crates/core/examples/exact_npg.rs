//! Exact nested natural policy gradient on the benchmark, printed every 250 iterations.

use lqgame::certify::solve_nash;
use lqgame::exact::{outer_npg_exact, ExactSolverConfig, InnerMode};
use lqgame::LqGame;

fn main() {
    let game = LqGame::benchmark();
    let ne = solve_nash(&game).expect("benchmark is feasible");
    let cfg = ExactSolverConfig {
        inner: InnerMode::GapTolerance { eps: 1e-8, max_iterations: 10_000 },
        iterations: 2500,
        target_value: Some(ne.value),
        ..Default::default()
    };
    match outer_npg_exact(&game, &game.benchmark_initial_gain(), &cfg) {
        Ok((_, trace)) => {
            for row in trace.rows.iter().step_by(250).chain(trace.final_row.as_ref()) {
                println!(
                    "t={:>5} gap={:.3e} |F|={:.3e} lambda_min(H)={:.4} in K-hat={}",
                    row.t, row.objective_gap, row.frob_f, row.lambda_min_h, row.in_khat
                );
            }
            if let Some(mu) = trace.mu_hat {
                println!("empirical domination constant: {mu:.3e}");
            }
        }
        Err(f) => eprintln!("run aborted: {f}"),
    }
}
