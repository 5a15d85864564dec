//! Energy minimization on the circle (exact answer known) and on the
//! 2-torus, and the curve of minimal energies.
//!
//! cargo run --release --example minimize

use riesz_torus::minimize::{min_energy_curve, minimize_energy, InitKind, MinimizeOptions};
use riesz_torus::potential::{Ewald, RieszSpec};

fn main() -> riesz_torus::Result<()> {
    let log = Ewald::for_tolerance(&RieszSpec::new(1, 0.0)?, 1e-12)?;
    let opts = MinimizeOptions { init: InitKind::Random, restarts: 4, seed: 1, ..Default::default() };
    let r = minimize_energy(16, &log, &opts)?;
    let exact = -(16f64).ln() / 15.0;
    println!("d=1 s=0 N=16: E={:+.12} exact={exact:+.12} iters={} converged={}", r.energy, r.iterations, r.converged);
    let mut xs = r.config.canonicalized().flat().to_vec();
    xs.sort_by(f64::total_cmp);
    println!("  gaps: {:?}", xs.windows(2).map(|w| format!("{:.6}", w[1] - w[0])).collect::<Vec<_>>());

    let w = Ewald::for_tolerance(&RieszSpec::new(2, 1.0)?, 1e-10)?;
    let r = minimize_energy(36, &w, &MinimizeOptions::default())?;
    println!("\nd=2 s=1 N=36: E={:+.10} |∇E|_∞={:.1e} iters={}", r.energy, r.grad_norm, r.iterations);

    let curve = min_energy_curve(&w, &[9, 16, 25, 36, 49], &MinimizeOptions::default())?;
    println!("\nminimal energies, d=2 s=1");
    for row in &curve.rows {
        println!("  N={:<3} E={:+.8}", row.n, row.best_energy);
    }
    if let Some(f) = curve.fit {
        println!("  slope of ln(-E) vs ln N: {:.3} ± {:.3} (monotone: {})", f.slope, f.slope_stderr, curve.monotone);
    }
    Ok(())
}
