//! Best response of the maximizer, feasibility and the bounded sublevel set around a gain.

use lqgame::certify::{best_response_l, in_feasible_set, in_khat_set, primal_value, solve_nash, KhatAnchor};
use lqgame::{GainSide, LqGame};

fn main() -> lqgame::Result<()> {
    let game = LqGame::benchmark();
    let k0 = game.benchmark_initial_gain();
    let br = best_response_l(&game, &k0);
    let ne = solve_nash(&game)?;
    println!("Phi(K0) = {:.4}, gap to Nash = {:.4}", primal_value(&game, &k0)?, br.value(&game) - ne.value);
    println!("lambda_min(H) at K0 = {:.4}", br.lambda_min_h);

    let anchor = KhatAnchor::new(&game, &k0)?;
    println!("K-hat radius = {:.4}", anchor.radius);
    // walk from K0 along a fixed direction until the maximizer's problem breaks down
    let dir = game.constant_gain(GainSide::K, &lqgame::Mat::identity(3, 3))?;
    for step in [0.0, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 1.0] {
        let k = k0.axpy(-step, &dir);
        let feas = in_feasible_set(&game, &k);
        let khat = in_khat_set(&game, &k, &anchor);
        println!(
            "K0 - {step:>4} I: feasible={:<5} in K-hat={:<5} lambda_min(H)={:+.3}",
            feas.member, khat.member, feas.lambda_min_h
        );
    }
    Ok(())
}
