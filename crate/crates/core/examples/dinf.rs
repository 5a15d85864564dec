//! Bracketing the ∞-Wasserstein distance between point sets and the
//! uniform measure.
//!
//! cargo run --release --example dinf

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use riesz_torus::torus::Configuration;
use riesz_torus::transport::{default_grid, dinf_estimate};

fn show(name: &str, c: &Configuration) -> riesz_torus::Result<()> {
    let m = default_grid(c.len(), c.dim())?;
    let b = dinf_estimate(c, m)?;
    println!("{name:<22} N={:<4} m={:<4} {:.5} <= d_inf <= {:.5}", c.len(), m, b.lower, b.upper);
    Ok(())
}

fn main() -> riesz_torus::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in [8, 32, 128] {
        show("equally spaced", &Configuration::equally_spaced(n, 0.0)?)?;
        println!("{:<22} exact 1/(2N) = {:.5}", "", 0.5 / n as f64);
    }
    show("random (d=1)", &Configuration::random(32, 1, &mut rng)?)?;
    show("lattice 8x8", &Configuration::lattice(8, 2)?.translated(&[1.0 / 16.0, 1.0 / 16.0])?)?;
    show("random (d=2)", &Configuration::random(64, 2, &mut rng)?)?;
    Ok(())
}
