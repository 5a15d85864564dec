use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::MollSchedule;
use crate::energy::pair_sum;
use crate::error::{Error, Result};
use crate::potential::{Ewald, MollifiedPotential, PairPotential};
use crate::sum::CompensatedSum;
use crate::torus::Configuration;

/// Pair energy split by ladder bin. Index 0 is `σ_0`, `1..=K` are `σ_k`
/// and `K + 1` is `σ_∞`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SigmaDecomp {
    pub sigma: Vec<f64>,
    pub sigma_eps: Option<Vec<f64>>,
    pub eps: Option<f64>,
    pub energy: f64,
    pub energy_eps: Option<f64>,
    /// `max{E_N, 1}`; the universal factor in front is not known.
    pub c_e: f64,
    /// Pair counts per bin (unordered pairs).
    pub counts: Vec<usize>,
    /// Whether every `σ_k`, `k >= 1`, is nonnegative.
    pub positive: bool,
}

impl SigmaDecomp {
    /// `σ_1..σ_K`.
    pub fn inner(&self) -> &[f64] {
        &self.sigma[1..self.sigma.len() - 1]
    }
}

pub(crate) fn binned<P: PairPotential + ?Sized>(config: &Configuration, sch: &MollSchedule, pot: &P) -> (Vec<f64>, Vec<usize>) {
    let n = config.len();
    let d = config.dim();
    let bins = sch.k + 2;
    let rows: Vec<(Vec<CompensatedSum>, Vec<usize>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = vec![CompensatedSum::new(); bins];
            let mut cnt = vec![0usize; bins];
            let mut dx = vec![0.0; d];
            for j in i + 1..n {
                config.displacement(i, j, &mut dx);
                let b = sch.bin(dx.iter().map(|c| c * c).sum::<f64>().sqrt());
                acc[b].add(pot.value_at(&dx));
                cnt[b] += 1;
            }
            (acc, cnt)
        })
        .collect();
    let scale = 1.0 / (n as f64 * (n as f64 - 1.0));
    let sigma = (0..bins).map(|b| rows.iter().map(|r| r.0[b].value()).collect::<CompensatedSum>().value() * scale).collect();
    let counts = (0..bins).map(|b| rows.iter().map(|r| r.1[b]).sum()).collect();
    (sigma, counts)
}

fn check_partition(sigma: &[f64], whole: f64, what: &str) -> Result<()> {
    let sum: f64 = sigma.iter().copied().collect::<CompensatedSum>().value();
    if whole.is_finite() && (sum - whole).abs() > 1e-10 * whole.abs().max(1.0) {
        return Err(Error::Consistency(format!("{what} bins sum to {sum:.15e}, pair sum is {whole:.15e}")));
    }
    Ok(())
}

pub fn sigma_decomposition(config: &Configuration, ewald: &Ewald, sch: &MollSchedule, mp: Option<&MollifiedPotential>) -> Result<SigmaDecomp> {
    let n = config.len();
    if n != sch.n {
        return Err(Error::Usage(format!("schedule built for N = {}, configuration has {n}", sch.n)));
    }
    let norm = 1.0 / (2.0 * n as f64 * (n as f64 - 1.0));
    let (sigma, counts) = binned(config, sch, ewald);
    let energy = pair_sum(config, ewald) * norm;
    check_partition(&sigma, energy, "W")?;
    let (sigma_eps, energy_eps) = match mp {
        Some(mp) => {
            let (se, _) = binned(config, sch, mp);
            let e = pair_sum(config, mp) * norm;
            check_partition(&se, e, "W^ε")?;
            (Some(se), Some(e))
        }
        None => (None, None),
    };
    let positive = sigma[1..].iter().all(|&v| v >= 0.0);
    Ok(SigmaDecomp { c_e: energy.max(1.0), sigma, sigma_eps, eps: mp.map(|m| m.eps()), energy, energy_eps, counts, positive })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mollifier::build_schedule;
    use crate::potential::RieszSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn equally_spaced_points_sit_in_the_top_bin() {
        let spec = RieszSpec::new(1, 0.0).unwrap();
        let ew = Ewald::for_tolerance(&spec, 1e-12).unwrap();
        let n = 32;
        let sch = build_schedule(n, &spec, 1.0, n as f64, Some(2.0)).unwrap();
        assert!(sch.half_indices[0] < 1.0 / n as f64);
        let c = Configuration::equally_spaced(n, 0.1).unwrap();
        let sd = sigma_decomposition(&c, &ew, &sch, None).unwrap();
        assert!((sd.sigma[0] - sd.energy).abs() < 1e-14);
        assert!(sd.sigma[1..].iter().all(|&v| v == 0.0));
        assert_eq!(sd.counts[0], n * (n - 1) / 2);
    }

    #[test]
    fn random_partition_reproduces_both_energies() {
        let spec = RieszSpec::new(2, 1.0).unwrap();
        let ew = Ewald::for_tolerance(&spec, 1e-12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = Configuration::random(400, 2, &mut rng).unwrap();
        let sch = build_schedule(400, &spec, 0.05, 4.0, None).unwrap();
        let mp = MollifiedPotential::new(&ew, sch.eps(1)).unwrap();
        let sd = sigma_decomposition(&c, &ew, &sch, Some(&mp)).unwrap();
        let total: f64 = sd.sigma.iter().sum();
        assert!((total - sd.energy).abs() < 1e-10);
        let total_eps: f64 = sd.sigma_eps.as_ref().unwrap().iter().sum();
        assert!((total_eps - sd.energy_eps.unwrap()).abs() < 1e-10);
        assert_eq!(sd.counts.iter().sum::<usize>(), 400 * 399 / 2);
        assert!(sd.counts[1] > 0);
    }
}
