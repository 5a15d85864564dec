//! Discrete energies, the spectral form of the mollified energy, and the
//! point-deletion identity.
//!
//! cargo run --release --example energy

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use riesz_torus::energy::{deletion_average_check, diagonal_correction, discrete_energy};
use riesz_torus::potential::{Ewald, MollifiedPotential, RieszSpec};
use riesz_torus::torus::Configuration;

fn main() -> riesz_torus::Result<()> {
    let spec = RieszSpec::new(2, 1.0)?;
    let ew = Ewald::for_tolerance(&spec, 1e-12)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let lattice = Configuration::lattice(6, 2)?;
    let random = Configuration::random(36, 2, &mut rng)?;
    println!("E_36 lattice = {:+.12}", discrete_energy(&lattice, &ew)?.value);
    println!("E_36 random  = {:+.12}", discrete_energy(&random, &ew)?.value);

    let mp = MollifiedPotential::new(&ew, 0.1)?;
    let check = diagonal_correction(&random, &mp, 1e-10)?;
    println!("\nE^ε[ρ_N], ε = 0.1");
    println!("  spectral             {:+.12}", check.spectral);
    println!("  pairs + diagonal     {:+.12}", check.pairwise_plus_diagonal);
    println!("  discrepancy          {:.2e}", check.discrepancy);

    let del = deletion_average_check(&random, &ew)?;
    println!("\ndeletion average {:+.15}\nfull energy      {:+.15}\ngap {:.1e}", del.deletion_average, del.full_energy, del.gap);
    Ok(())
}
