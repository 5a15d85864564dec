//! Discrete, spectral and mollified energies of particle configurations.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{Ewald, MollifiedPotential, PairPotential, RieszSpec};
use crate::sum::{compensated_sum, ordered_par_sum};
use crate::torus::{for_each_lattice_vector, Configuration, SpectralMeasure};

/// Largest tolerated gap between the two evaluations of `E^ε[ρ_N]`.
pub const DUAL_PATH_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyKind {
    Discrete,
    Spectral,
    MollifiedDiscrete,
    MollifiedContinuous,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnergyReport {
    pub kind: EnergyKind,
    /// `+inf` (serialized as `null`) for coincident points of a singular potential.
    pub value: f64,
    pub tail_bound: f64,
    pub eps: Option<f64>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub d: usize,
    pub s: f64,
}

fn check_pair(config: &Configuration, dim: usize) -> Result<()> {
    if config.dim() != dim {
        return Err(Error::Usage(format!("configuration has dimension {}, potential {dim}", config.dim())));
    }
    Ok(())
}

/// `Σ_{i≠j} W(x_i - x_j)`, accumulated row by row in index order.
pub fn pair_sum<P: PairPotential + ?Sized>(config: &Configuration, pot: &P) -> f64 {
    let n = config.len();
    let d = config.dim();
    let total = ordered_par_sum(n, |i| {
        let mut dx = vec![0.0; d];
        compensated_sum((i + 1..n).map(|j| {
            config.displacement(i, j, &mut dx);
            pot.value_at(&dx)
        }))
    });
    2.0 * total
}

/// The matrix `W(x_i - x_j)` with zero diagonal.
pub fn pair_matrix<P: PairPotential + ?Sized>(config: &Configuration, pot: &P) -> Vec<Vec<f64>> {
    let n = config.len();
    let d = config.dim();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut dx = vec![0.0; d];
            (i + 1..n)
                .map(|j| {
                    config.displacement(i, j, &mut dx);
                    pot.value_at(&dx)
                })
                .collect()
        })
        .collect();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for (off, &v) in upper[i].iter().enumerate() {
            let j = i + 1 + off;
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    m
}

fn normalized_pairs(n: usize, total: f64) -> f64 {
    total / (2.0 * n as f64 * (n as f64 - 1.0))
}

/// `E_N = (1/(2N(N-1))) Σ_{i≠j} W(x_i - x_j)`.
pub fn discrete_energy(config: &Configuration, ewald: &Ewald) -> Result<EnergyReport> {
    let spec = ewald.spec();
    check_pair(config, spec.dim())?;
    let n = config.len();
    if n < 2 {
        return Err(Error::Usage("discrete energy needs at least two points".into()));
    }
    Ok(EnergyReport {
        kind: EnergyKind::Discrete,
        value: normalized_pairs(n, pair_sum(config, ewald)),
        tail_bound: ewald.params().tol,
        eps: None,
        n: Some(n),
        d: spec.dim(),
        s: spec.s(),
    })
}

/// `E^ε_N`, the discrete energy with `W` replaced by `W^ε`.
pub fn mollified_discrete_energy(config: &Configuration, mp: &MollifiedPotential) -> Result<EnergyReport> {
    let spec = mp.spec();
    check_pair(config, spec.dim())?;
    let n = config.len();
    if n < 2 {
        return Err(Error::Usage("discrete energy needs at least two points".into()));
    }
    Ok(EnergyReport {
        kind: EnergyKind::MollifiedDiscrete,
        value: normalized_pairs(n, pair_sum(config, mp)),
        tail_bound: mp.ewald().params().tol,
        eps: Some(mp.eps()),
        n: Some(n),
        d: spec.dim(),
        s: spec.s(),
    })
}

/// `½ Σ_{k≠0} |k|^{s-d} |ρ̂(k)|²` over the stored box; the tail bound is the
/// contribution of the outermost stored shell.
pub fn spectral_energy(mu: &SpectralMeasure, spec: &RieszSpec) -> Result<EnergyReport> {
    if mu.dim() != spec.dim() {
        return Err(Error::Usage("measure and potential dimensions differ".into()));
    }
    let e = (spec.s() - spec.dim() as f64) / 2.0;
    let kc = mu.cutoff() as i64;
    let mut total = Vec::new();
    let mut shell = Vec::new();
    mu.for_each(|k, c| {
        let k2: i64 = k.iter().map(|v| v * v).sum();
        if k2 == 0 {
            return;
        }
        let term = 0.5 * (k2 as f64).powf(e) * c.norm_sqr();
        total.push(term);
        if k.iter().any(|v| v.abs() == kc) {
            shell.push(term);
        }
    });
    Ok(EnergyReport {
        kind: EnergyKind::Spectral,
        value: compensated_sum(total),
        tail_bound: compensated_sum(shell),
        eps: None,
        n: None,
        d: spec.dim(),
        s: spec.s(),
    })
}

/// `E^ε[ρ_N] = ½ Σ_{k≠0} |k|^{s-d} ψ̂(ε|k|) |ρ̂_N(k)|²`, truncated where the
/// `ψ̂` envelope makes the remainder smaller than `tol / 10`.
pub fn mollified_spectral_energy(config: &Configuration, mp: &MollifiedPotential, tol: f64) -> Result<EnergyReport> {
    let spec = mp.spec();
    check_pair(config, spec.dim())?;
    let sp = mp.spectral();
    let cutoff = sp.cutoff_for(tol);
    let moll = mp.mollifier();
    let eps = mp.eps();
    let value = half_space_sum(config, cutoff, |k2| {
        let r = (k2 as f64).sqrt();
        r.powf(spec.s() - spec.dim() as f64) * moll.psi_hat(eps * r)
    });
    Ok(EnergyReport {
        kind: EnergyKind::MollifiedContinuous,
        value,
        tail_bound: 0.5 * sp.tail_bound(cutoff),
        eps: Some(eps),
        n: Some(config.len()),
        d: spec.dim(),
        s: spec.s(),
    })
}

/// `½ Σ_{0<|k|<=K} m(|k|²) |ρ̂_N(k)|²` using `k ↔ -k` symmetry.
pub(crate) fn half_space_sum(config: &Configuration, cutoff: usize, weight: impl Fn(i64) -> f64 + Sync) -> f64 {
    let d = config.dim();
    let n = config.len();
    let kc = cutoff as i64;
    let side = 2 * cutoff + 1;
    // phases[(i * d + j) * side + k + K] = e^{-2πi k x_ij}
    let mut phases = vec![Complex64::new(1.0, 0.0); n * d * side];
    for (idx, &x) in config.flat().iter().enumerate() {
        let row = &mut phases[idx * side..(idx + 1) * side];
        let base = Complex64::from_polar(1.0, -2.0 * PI * x);
        let mut p = Complex64::new(1.0, 0.0);
        for m in 1..=cutoff {
            p = if m % 64 == 0 { Complex64::from_polar(1.0, -2.0 * PI * x * m as f64) } else { p * base };
            row[cutoff + m] = p;
            row[cutoff - m] = p.conj();
        }
    }
    // outer loop over the first coordinate keeps the parallel reduction ordered
    let firsts: Vec<i64> = (0..=kc).collect();
    let partial: Vec<f64> = firsts
        .par_iter()
        .map(|&k0| {
            let mut acc = Vec::new();
            let rest_cut = if d > 1 { kc } else { 0 };
            for_each_lattice_vector(d - 1, rest_cut, |rest| {
                let mut k2 = k0 * k0;
                for &c in rest {
                    k2 += c * c;
                }
                if k2 == 0 || k2 > kc * kc {
                    return;
                }
                if k0 == 0 && rest.iter().copied().find(|&c| c != 0).unwrap_or(0) < 0 {
                    return;
                }
                let mut rho = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    let base = i * d * side;
                    let mut e = phases[base + (k0 + kc) as usize];
                    for (j, &c) in rest.iter().enumerate() {
                        e *= phases[base + (j + 1) * side + (c + kc) as usize];
                    }
                    rho += e;
                }
                acc.push(weight(k2) * (rho / n as f64).norm_sqr());
            });
            compensated_sum(acc)
        })
        .collect();
    compensated_sum(partial)
}

/// `E^ε[ρ_N]` evaluated spectrally and as `E^ε_N` plus the diagonal terms.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiagonalCheck {
    pub spectral: f64,
    pub pairwise_plus_diagonal: f64,
    pub mollified_discrete: Option<f64>,
    pub w_eps_at_origin: f64,
    pub discrepancy: f64,
    pub tail_bound: f64,
}

/// Checks `E^ε[ρ_N] = E^ε_N + W^ε(0)/(2N) + (1/(2N²) - 1/(2N(N-1))) Σ_{i≠j} W^ε`.
pub fn diagonal_correction(config: &Configuration, mp: &MollifiedPotential, tol: f64) -> Result<DiagonalCheck> {
    let n = config.len() as f64;
    let spectral = mollified_spectral_energy(config, mp, tol)?;
    let w0 = mp.value_at_origin();
    let pairs = pair_sum(config, mp);
    let e_n = (config.len() >= 2).then(|| normalized_pairs(config.len(), pairs));
    let direct = w0 / (2.0 * n) + pairs / (2.0 * n * n);
    let discrepancy = (spectral.value - direct).abs();
    if discrepancy > DUAL_PATH_TOL {
        return Err(Error::Consistency(format!(
            "spectral {:.12e} and pairwise {:.12e} evaluations of E^ε[ρ_N] differ by {discrepancy:.3e}",
            spectral.value, direct
        )));
    }
    Ok(DiagonalCheck {
        spectral: spectral.value,
        pairwise_plus_diagonal: direct,
        mollified_discrete: e_n,
        w_eps_at_origin: w0,
        discrepancy,
        tail_bound: spectral.tail_bound,
    })
}

/// Row `i` holds `(1/(N(N-1))) Σ_{j≠i} ∇W(x_i - x_j)`, flattened row-major.
pub fn energy_gradient(config: &Configuration, ewald: &Ewald) -> Result<Vec<f64>> {
    let d = config.dim();
    check_pair(config, ewald.spec().dim())?;
    let n = config.len();
    if n < 2 {
        return Err(Error::Usage("gradient needs at least two points".into()));
    }
    let singular = ewald.spec().s() >= 0.0;
    // ∇W is odd, so each unordered pair is evaluated once and scattered to both rows
    let upper: Vec<Option<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut dx = vec![0.0; d];
            let mut g = vec![0.0; d];
            let mut out = Vec::with_capacity((n - i - 1) * d);
            for j in i + 1..n {
                config.displacement(i, j, &mut dx);
                if singular && dx.iter().all(|&v| v == 0.0) {
                    return None;
                }
                ewald.gradient_centered(&dx, &mut g);
                out.extend_from_slice(&g);
            }
            Some(out)
        })
        .collect();
    let mut acc = vec![0.0; n * d];
    for (i, row) in upper.into_iter().enumerate() {
        let row = row.ok_or(Error::Singular { s: ewald.spec().s() })?;
        for (off, g) in row.chunks_exact(d).enumerate() {
            let j = i + 1 + off;
            for c in 0..d {
                acc[i * d + c] += g[c];
                acc[j * d + c] -= g[c];
            }
        }
    }
    let scale = 1.0 / (n as f64 * (n as f64 - 1.0));
    acc.iter_mut().for_each(|v| *v *= scale);
    Ok(acc)
}

/// Both sides of `(1/(N+1)) Σ_i E_N(x without x_i) = E_{N+1}(x)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeletionReport {
    pub n_plus_one: usize,
    pub deletion_average: f64,
    pub full_energy: f64,
    pub gap: f64,
}

pub fn deletion_average_check(config: &Configuration, ewald: &Ewald) -> Result<DeletionReport> {
    let m = config.len();
    if m < 3 {
        return Err(Error::Usage("deletion identity needs at least three points".into()));
    }
    check_pair(config, ewald.spec().dim())?;
    let w = pair_matrix(config, ewald);
    let full = normalized_pairs(m, compensated_sum(w.iter().flatten().copied()));
    let sub: Vec<f64> = (0..m)
        .map(|del| {
            let terms = w
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != del)
                .flat_map(|(_, row)| row.iter().enumerate().filter(|(j, _)| *j != del).map(|(_, &v)| v));
            normalized_pairs(m - 1, compensated_sum(terms))
        })
        .collect();
    let avg = compensated_sum(sub) / m as f64;
    Ok(DeletionReport { n_plus_one: m, deletion_average: avg, full_energy: full, gap: (avg - full).abs() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ewald(d: usize, s: f64) -> Ewald {
        Ewald::for_tolerance(&RieszSpec::new(d, s).unwrap(), 1e-12).unwrap()
    }

    #[test]
    fn discrete_energy_examples() {
        let w = ewald(1, 0.0);
        let two = Configuration::from_flat(1, vec![0.0, 0.5]).unwrap();
        assert_relative_eq!(discrete_energy(&two, &w).unwrap().value, -(2f64.ln()), epsilon = 1e-11);
        for n in [4usize, 7, 16] {
            let c = Configuration::equally_spaced(n, 0.1).unwrap();
            let expected = -(n as f64).ln() / (n as f64 - 1.0);
            assert_relative_eq!(discrete_energy(&c, &w).unwrap().value, expected, epsilon = 1e-11);
        }
        let coincident = Configuration::from_flat(1, vec![0.2, 0.2, 0.7]).unwrap();
        assert!(discrete_energy(&coincident, &w).unwrap().value.is_infinite());
    }

    #[test]
    fn spectral_energy_examples() {
        let spec = RieszSpec::new(1, 0.0).unwrap();
        assert_eq!(spectral_energy(&SpectralMeasure::uniform(1, 5), &spec).unwrap().value, 0.0);
        let mu = SpectralMeasure::from_fn(1, 3, |k| match k[0] {
            0 => Complex64::new(1.0, 0.0),
            1 | -1 => Complex64::new(0.5, 0.0),
            _ => Complex64::new(0.0, 0.0),
        });
        assert_relative_eq!(spectral_energy(&mu, &spec).unwrap().value, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn mollified_spectral_energy_of_equally_spaced_points() {
        // only multiples of N survive: E = ½ Σ_{j≠0} |jN|^{-1} ψ̂(εjN)
        let w = ewald(1, 0.0);
        let (n, eps) = (8usize, 0.05);
        let mp = MollifiedPotential::new(&w, eps).unwrap();
        let c = Configuration::equally_spaced(n, 0.0).unwrap();
        let e = mollified_spectral_energy(&c, &mp, 1e-12).unwrap().value;
        let moll = mp.mollifier();
        let expected: f64 = (1..2000).map(|j| (j * n) as f64).map(|k| k.recip() * moll.psi_hat(eps * k)).sum();
        assert_relative_eq!(e, expected, epsilon = 1e-12);
        let check = diagonal_correction(&c, &mp, 1e-12).unwrap();
        assert!(check.discrepancy <= 1e-8, "{check:?}");
    }

    #[test]
    fn diagonal_identity_for_single_atom_and_random_sets() {
        let w = ewald(2, 1.0);
        let mp = MollifiedPotential::new(&w, 0.2).unwrap();
        let one = Configuration::from_flat(2, vec![0.3, 0.6]).unwrap();
        let c1 = diagonal_correction(&one, &mp, 1e-10).unwrap();
        assert_relative_eq!(c1.spectral, mp.value_at_origin() / 2.0, epsilon = 1e-8);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = Configuration::random(16, 2, &mut rng).unwrap();
        assert!(diagonal_correction(&c, &mp, 1e-10).unwrap().discrepancy <= 1e-6);
    }

    #[test]
    fn gradient_vanishes_on_lattice_and_matches_differences() {
        let w = ewald(1, 0.0);
        let g = energy_gradient(&Configuration::equally_spaced(9, 0.03).unwrap(), &w).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-8));

        let w = ewald(2, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = Configuration::random(7, 2, &mut rng).unwrap();
        let g = energy_gradient(&c, &w).unwrap();
        let sum: Vec<f64> = (0..2).map(|j| g.iter().skip(j).step_by(2).sum()).collect();
        assert!(sum.iter().all(|v| v.abs() < 1e-10));
        let v: Vec<f64> = (0..14).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h = 1e-5;
        let shift = |sign: f64| {
            let flat: Vec<f64> = c.flat().iter().zip(&v).map(|(x, dv)| x + sign * h * dv).collect();
            discrete_energy(&Configuration::from_flat(2, flat).unwrap(), &w).unwrap().value
        };
        let fd = (shift(1.0) - shift(-1.0)) / (2.0 * h);
        let dir: f64 = g.iter().zip(&v).map(|(a, b)| a * b).sum();
        assert!((fd - dir).abs() <= 1e-5, "{fd} vs {dir}");
    }

    #[test]
    fn deletion_identity_is_exact() {
        for (d, s, m) in [(1, 0.0, 3), (2, 1.0, 5)] {
            let w = ewald(d, s);
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let c = Configuration::random(m, d, &mut rng).unwrap();
            assert!(deletion_average_check(&c, &w).unwrap().gap <= 1e-10);
        }
        let w = ewald(1, 0.0);
        let sym = Configuration::equally_spaced(6, 0.0).unwrap();
        assert!(deletion_average_check(&sym, &w).unwrap().gap <= 1e-10);
    }

    #[test]
    fn report_serializes_with_expected_keys() {
        let w = ewald(1, 0.0);
        let r = discrete_energy(&Configuration::equally_spaced(4, 0.0).unwrap(), &w).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        for key in ["kind", "value", "tail_bound", "eps", "N", "d", "s"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["kind"], "discrete");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn energy_is_permutation_and_translation_invariant(seed in 0u64..10_000, shift in 0.0f64..1.0) {
            let w = ewald(1, 0.0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = Configuration::random(6, 1, &mut rng).unwrap();
            let e = discrete_energy(&c, &w).unwrap().value;
            let mut rev = c.flat().to_vec();
            rev.reverse();
            let p = Configuration::from_flat(1, rev).unwrap();
            prop_assert!((discrete_energy(&p, &w).unwrap().value - e).abs() <= 1e-12);
            let t = c.translated(&[shift]).unwrap();
            prop_assert!((discrete_energy(&t, &w).unwrap().value - e).abs() <= 1e-10);
        }

        #[test]
        fn mollified_quadratic_form_is_nonnegative(seed in 0u64..10_000) {
            let spec = RieszSpec::new(2, 0.5).unwrap();
            let moll = crate::mollifier::MollifierTable::shared(2).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mu = SpectralMeasure::from_fn(2, 6, |k| {
                if k.iter().all(|&c| c == 0) { Complex64::new(0.0, 0.0) } else { Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) }
            });
            let damped = mu.multiplied(|r| moll.psi_hat(0.1 * r).sqrt());
            prop_assert!(spectral_energy(&damped, &spec).unwrap().value >= 0.0);
        }
    }
}
