//! Model-free nested NPG on the scalar demo game.
//!
//! The trace's gap column comes from the model and is never seen by the
//! algorithm, which only observes rollout costs and states.

use lqgame::certify::solve_nash;
use lqgame::zo::{outer_zo_npg, ZoConfig};
use lqgame::LqGame;

fn main() {
    let game = LqGame::scalar_demo();
    let ne = solve_nash(&game).expect("demo is feasible");
    let k0 = game.zero_gain(lqgame::GainSide::K);
    let cfg = ZoConfig {
        r1: 0.1,
        r2: 0.1,
        m1: 5_000,
        m2: 5_000,
        tau1: 0.2,
        tau2: 0.05,
        t_in: 10,
        iterations: 20,
        seed: 1,
        target_value: Some(ne.value),
        ..Default::default()
    };
    match outer_zo_npg(&game, &k0, &cfg) {
        Ok((k, trace)) => {
            for row in trace.rows.iter().chain(trace.final_row.as_ref()) {
                println!(
                    "t={:>2} gap={:.4e} trajectories={}",
                    row.t,
                    row.objective_gap,
                    row.samples_used_inner + row.samples_used_outer
                );
            }
            println!("K = {:.4} (Nash {:.4})", k.block(0)[(0, 0)], ne.k_star.block(0)[(0, 0)]);
        }
        Err(f) => eprintln!("run aborted: {f}"),
    }
}
