//! The periodic Riesz potential: closed form on the circle, a 2-d profile,
//! and the mollified potential at shrinking widths.
//!
//! cargo run --release --example potential

use std::f64::consts::PI;

use riesz_torus::potential::{Ewald, MollifiedPotential, PairPotential, RieszSpec};
use riesz_torus::torus::TorusPoint;

fn main() -> riesz_torus::Result<()> {
    let log = Ewald::for_tolerance(&RieszSpec::new(1, 0.0)?, 1e-12)?;
    println!("d=1 s=0: W(x) against -2 ln(2 sin πx)");
    for x in [0.05, 0.125, 0.25, 0.4, 0.5] {
        let w = log.value(&TorusPoint::new(vec![x]))?;
        let exact = -2.0 * (2.0 * (PI * x).sin()).ln();
        println!("  x={x:<6} W={w:>+.15} error={:.1e}", (w - exact).abs());
    }

    let spec = RieszSpec::new(2, 1.0)?;
    let w = Ewald::for_tolerance(&spec, 1e-12)?;
    println!("\nd=2 s=1 along the diagonal (a_s = {:.6})", spec.singular_coefficient()?);
    for t in [0.02, 0.05, 0.1, 0.25, 0.5] {
        let p = TorusPoint::new(vec![t, t]);
        let g = w.gradient(&p)?;
        println!("  x=({t}, {t}) W={:>+.10} ∇W=({:+.6}, {:+.6})", w.value(&p)?, g[0], g[1]);
    }

    println!("\nW^ε(0) and W^ε(0.3, 0.1) as ε shrinks");
    for eps in [0.2, 0.1, 0.05, 0.025] {
        let mp = MollifiedPotential::new(&w, eps)?;
        let far = mp.value(&TorusPoint::new(vec![0.3, 0.1]))?;
        println!("  ε={eps:<6} W^ε(0)={:>10.5} W^ε(x)={far:+.10}", mp.value_at_origin());
    }
    println!("  W(0.3, 0.1)      ={:+.10}", w.value(&TorusPoint::new(vec![0.3, 0.1]))?);
    Ok(())
}
