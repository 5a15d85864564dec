use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::MollifierTable;
use crate::energy::{spectral_energy, EnergyReport};
use crate::error::{Error, Result};
use crate::potential::RieszSpec;
use crate::torus::{empirical_fourier, min_image, Configuration, SpectralMeasure};
use crate::transport::{bottleneck_radius, half_cell_diagonal};

/// `ρ = φ_ε * ρ_N` sampled at cell centers of an `m^d` grid. Only cells in
/// the support are stored; each atom's samples are rescaled so that it
/// carries mass exactly `1/N`.
#[derive(Clone, Debug)]
pub struct GridDensity {
    m: usize,
    d: usize,
    eps: f64,
    /// `(flat cell index, density)`, sorted by index.
    cells: Vec<(u64, f64)>,
    raw_mass: f64,
}

impl GridDensity {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn support(&self) -> &[(u64, f64)] {
        &self.cells
    }

    pub fn cell_volume(&self) -> f64 {
        (self.m as f64).powi(-(self.d as i32))
    }

    pub fn cell_center(&self, idx: u64) -> Vec<f64> {
        let m = self.m as u64;
        let mut out = vec![0.0; self.d];
        let mut rest = idx;
        for j in (0..self.d).rev() {
            out[j] = ((rest % m) as f64 + 0.5) / self.m as f64;
            rest /= m;
        }
        out
    }

    pub fn value(&self, idx: u64) -> f64 {
        self.cells.binary_search_by_key(&idx, |c| c.0).map_or(0.0, |i| self.cells[i].1)
    }

    /// Midpoint-rule mass; 1 up to rounding by construction.
    pub fn mass(&self) -> f64 {
        self.cells.iter().map(|c| c.1).sum::<f64>() * self.cell_volume()
    }

    /// Midpoint-rule mass before the per-atom rescaling.
    pub fn raw_mass(&self) -> f64 {
        self.raw_mass
    }

    /// The full grid, last axis fastest.
    pub fn to_dense(&self) -> Result<Vec<f64>> {
        let total = (self.m as u128).pow(self.d as u32);
        if total > 1 << 26 {
            return Err(Error::Usage(format!("grid of {total} cells is too large to materialize")));
        }
        let mut out = vec![0.0; total as usize];
        for &(i, v) in &self.cells {
            out[i as usize] = v;
        }
        Ok(out)
    }
}

/// Smallest power of two `m` with `m ε >= 8`.
pub fn rho_grid(eps: f64) -> usize {
    ((8.0 / eps).ceil() as usize).next_power_of_two()
}

pub fn build_rho(config: &Configuration, moll: &MollifierTable, eps: f64, m: usize) -> Result<GridDensity> {
    let d = config.dim();
    if moll.dim() != d {
        return Err(Error::Usage("mollifier and configuration dimensions differ".into()));
    }
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::Usage(format!("ε must lie in (0, 1/2), got {eps}")));
    }
    if (m as f64) * eps < 8.0 {
        return Err(Error::Resolution(format!("m ε = {} below 8; use m >= {}", m as f64 * eps, rho_grid(eps))));
    }
    let n = config.len() as f64;
    let mf = m as f64;
    let vol = mf.powi(-(d as i32));
    let reach = (0.5 * eps * mf).ceil() as i64 + 1;
    let mut acc: HashMap<u64, f64> = HashMap::new();
    let mut raw = 0.0;
    let mut local: Vec<(u64, f64)> = Vec::new();
    for p in config.points() {
        local.clear();
        let base: Vec<i64> = p.iter().map(|&x| (x * mf).floor() as i64).collect();
        let side = (2 * reach + 1) as usize;
        let mut offs = vec![0usize; d];
        for _ in 0..side.pow(d as u32) {
            let mut flat = 0u64;
            let mut r2 = 0.0;
            for j in 0..d {
                let c = base[j] + offs[j] as i64 - reach;
                let center = (c as f64 + 0.5) / mf;
                r2 += min_image(center - p[j]).powi(2);
                flat = flat * m as u64 + c.rem_euclid(m as i64) as u64;
            }
            let v = moll.phi_eps(r2.sqrt(), eps);
            if v > 0.0 {
                local.push((flat, v));
            }
            for j in (0..d).rev() {
                offs[j] += 1;
                if offs[j] < side {
                    break;
                }
                offs[j] = 0;
            }
        }
        let mass: f64 = local.iter().map(|c| c.1).sum::<f64>() * vol;
        if !(mass > 0.0) {
            return Err(Error::Resolution(format!("no cell center inside the support at ε = {eps}, m = {m}")));
        }
        raw += mass / n;
        let scale = 1.0 / (n * mass);
        for &(i, v) in &local {
            *acc.entry(i).or_insert(0.0) += v * scale;
        }
    }
    let mut cells: Vec<(u64, f64)> = acc.into_iter().filter(|c| c.1 >= 1e-300).collect();
    cells.sort_unstable_by_key(|c| c.0);
    Ok(GridDensity { m, d, eps, cells, raw_mass: raw })
}

/// `ρ̂(k) = ρ̂_N(k) φ̂(ε|k|)` on the box `|k|_∞ <= cutoff`.
pub fn mollified_fourier(config: &Configuration, moll: &MollifierTable, eps: f64, cutoff: usize) -> Result<SpectralMeasure> {
    Ok(empirical_fourier(config, cutoff)?.multiplied(|r| moll.phi_hat(eps * r)))
}

/// `E[φ_ε * ρ_N]` from the Fourier side.
pub fn rho_energy(config: &Configuration, spec: &RieszSpec, moll: &MollifierTable, eps: f64, cutoff: usize) -> Result<EnergyReport> {
    spectral_energy(&mollified_fourier(config, moll, eps, cutoff)?, spec)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeasuredTransport {
    pub eps: f64,
    pub m: usize,
    /// Bottleneck radius between the sampled cells and the atoms.
    pub radius: f64,
    pub disc_error: f64,
    /// `radius + disc_error`.
    pub certified: f64,
    /// `radius <= ε/2`.
    pub within_half_eps: bool,
}

/// `d_∞` between the sampled `ρ` and `ρ_N`, each atom demanding `1/N`.
pub fn measured_dinf(config: &Configuration, rho: &GridDensity) -> Result<MeasuredTransport> {
    let d = config.dim();
    let n = config.len();
    let mut centers = Vec::with_capacity(rho.cells.len() * d);
    let mut supply = Vec::with_capacity(rho.cells.len());
    let vol = rho.cell_volume();
    for &(i, v) in &rho.cells {
        centers.extend(rho.cell_center(i));
        supply.push(v * vol);
    }
    let radius = bottleneck_radius(&centers, &supply, config, &vec![1.0 / n as f64; n])?;
    let disc_error = half_cell_diagonal(rho.m, d);
    Ok(MeasuredTransport {
        eps: rho.eps,
        m: rho.m,
        radius,
        disc_error,
        certified: radius + disc_error,
        within_half_eps: radius <= 0.5 * rho.eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::diagonal_correction;
    use crate::potential::{Ewald, MollifiedPotential};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_atom_is_a_centered_bump() {
        let moll = MollifierTable::shared(2).unwrap();
        let c = Configuration::from_flat(2, vec![0.5 + 1.0 / 128.0, 0.5 + 1.0 / 128.0]).unwrap();
        let rho = build_rho(&c, &moll, 0.25, 64).unwrap();
        assert!((rho.mass() - 1.0).abs() < 1e-12);
        assert!((rho.raw_mass() - 1.0).abs() < 1e-3);
        let peak = rho.support().iter().max_by(|a, b| a.1.partial_cmp(&b.1).unwrap()).unwrap();
        assert_eq!(rho.cell_center(peak.0), vec![0.5 + 1.0 / 128.0; 2]);
        let dense = rho.to_dense().unwrap();
        assert_eq!(dense.len(), 64 * 64);
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let moll = MollifierTable::shared(1).unwrap();
        let c = Configuration::equally_spaced(4, 0.0).unwrap();
        assert!(matches!(build_rho(&c, &moll, 0.01, 512), Err(Error::Resolution(_))));
        assert_eq!(rho_grid(0.01), 1024);
    }

    #[test]
    fn wrapped_support_keeps_mass() {
        let moll = MollifierTable::shared(1).unwrap();
        let c = Configuration::from_flat(1, vec![0.999, 0.3]).unwrap();
        let rho = build_rho(&c, &moll, 0.1, 128).unwrap();
        assert!((rho.mass() - 1.0).abs() < 1e-12);
        assert!(rho.value(0) > 0.0 && rho.value(127) > 0.0);
    }

    #[test]
    fn spectral_energy_of_rho_matches_mollified_pairs() {
        let spec = RieszSpec::new(2, 1.0).unwrap();
        let ew = Ewald::for_tolerance(&spec, 1e-12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = Configuration::random(12, 2, &mut rng).unwrap();
        let eps = 0.2;
        let mp = MollifiedPotential::new(&ew, eps).unwrap();
        let diag = diagonal_correction(&c, &mp, 1e-9).unwrap();
        let cutoff = mp.spectral().cutoff_for(1e-9);
        let e = rho_energy(&c, &spec, mp.mollifier(), eps, cutoff).unwrap();
        assert!((e.value - diag.pairwise_plus_diagonal).abs() < 1e-6, "{} {}", e.value, diag.pairwise_plus_diagonal);
    }

    #[test]
    fn transport_stays_inside_half_eps() {
        let moll = MollifierTable::shared(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = Configuration::random(10, 2, &mut rng).unwrap();
        let eps = 0.15;
        let rho = build_rho(&c, &moll, eps, rho_grid(eps)).unwrap();
        let t = measured_dinf(&c, &rho).unwrap();
        assert!(t.within_half_eps, "{t:?}");
        assert!(t.radius > 0.25 * eps);
    }
}
