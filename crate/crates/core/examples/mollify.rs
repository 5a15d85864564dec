//! The mollifier ladder, the choice of ε for a configuration, the measured
//! transport distance of the smoothed measure, and the induction lemma on a
//! synthetic sequence.
//!
//! cargo run --release --example mollify

use riesz_torus::experiments::{mollify_config, mollify_setup, ExperimentKind, ExperimentSpec};
use riesz_torus::mollifier::lemma_ind_bound;
use riesz_torus::potential::Ewald;
use riesz_torus::torus::Configuration;

fn main() -> riesz_torus::Result<()> {
    let spec = ExperimentSpec::new(ExperimentKind::Theorem1Mollify, 1, 0.0);
    let ew = Ewald::for_tolerance(&spec.riesz()?, 1e-10)?;
    let setup = mollify_setup(&spec, &ew)?;
    let c = Configuration::equally_spaced(32, 0.0)?;
    let out = mollify_config(&c, &ew, &setup)?;
    let cert = &out.selection.certificate;
    println!("d=1 s=0 N=32, ladder A=N, M={}: K={} (uncapped {:?})", setup.depth.unwrap_or(0.0), cert.k, cert.uncapped_k);
    for r in &cert.per_k {
        println!("  k={} ε={:.3e} increment={:+.6} pair bound={:+.4}", r.k, r.eps, r.increment, r.bound);
    }
    println!("  chosen k={} ε={:.3e}", out.selection.chosen_k, out.selection.chosen_eps);
    println!("  d_inf(ρ, ρ_N) = {:.3e} on m={} (ε/2 = {:.3e})", out.transport.radius, out.transport.m, out.selection.chosen_eps / 2.0);

    let mut spec = ExperimentSpec::new(ExperimentKind::Theorem1Mollify, 2, 1.0);
    spec.lambda = Some(0.05);
    spec.a = Some(4.0);
    let ew = Ewald::for_tolerance(&spec.riesz()?, 1e-10)?;
    let setup = mollify_setup(&spec, &ew)?;
    let out = mollify_config(&Configuration::lattice(8, 2)?, &ew, &setup)?;
    println!("\nd=2 s=1 N=64 lattice, λ=0.05 A=4: ε={:.4} increment={:+.6} d_inf={:.4}", out.selection.chosen_eps, out.selection.increment, out.transport.radius);

    let sigmas: Vec<f64> = (1..=6).map(|k| 0.5f64.powi(k)).collect();
    let rep = lemma_ind_bound(&sigmas, 1.0, 1.5, 0.1, 16.0, 1.0)?;
    println!("\ninduction lemma: β={:.4} hypothesis holds={} bound holds={}", rep.beta, rep.satisfied, rep.bound_holds);
    Ok(())
}
