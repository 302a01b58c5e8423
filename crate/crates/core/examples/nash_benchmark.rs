//! Saddle point of the bundled benchmark from the Riccati recursion.

use lqgame::certify::{solve_nash, ValueCertificate};
use lqgame::LqGame;

fn main() -> lqgame::Result<()> {
    let game = LqGame::benchmark();
    let ne = solve_nash(&game)?;
    println!("value  = {:.6}", ne.value);
    println!("margin = {:.6}  (min eigenvalue of Rw - D'P*D)", ne.margin);
    for (h, k) in ne.k_star.blocks().iter().enumerate() {
        println!("K*_{h} = {k:.4}");
    }
    let cert = ValueCertificate::compute(&game, &ne.k_star, &ne.l_star);
    println!("|F| = {:.2e}, |E| = {:.2e} at the saddle point", cert.f.norm(), cert.e.norm());
    Ok(())
}
