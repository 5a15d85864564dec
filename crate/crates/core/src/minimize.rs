//! Gradient descent for the discrete energy on the torus.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{discrete_energy, energy_gradient};
use crate::error::{Error, Result};
use crate::fit::{linear_fit, LineFit};
use crate::potential::Ewald;
use crate::torus::Configuration;

/// Pairs closer than this make a step unacceptable.
pub const COINCIDENCE_GUARD: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Lattice,
    Random,
    PerturbedLattice,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MinimizeOptions {
    pub max_iters: usize,
    /// First trial step, in units of the mean spacing `N^{-1/d}` per unit
    /// of gradient sup-norm.
    pub step0: f64,
    /// Backtracking factor applied to a rejected step.
    pub shrink: f64,
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo: f64,
    pub restarts: usize,
    pub seed: u64,
    pub gradient_tol: f64,
    pub init: InitKind,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            step0: 0.1,
            shrink: 0.5,
            armijo: 1e-4,
            restarts: 1,
            seed: 0,
            gradient_tol: 1e-7,
            init: InitKind::PerturbedLattice,
        }
    }
}

impl MinimizeOptions {
    fn validate(&self) -> Result<()> {
        if !(self.step0 > 0.0) || self.restarts == 0 || !(self.shrink > 0.0 && self.shrink < 1.0) || !(self.armijo > 0.0 && self.armijo < 1.0) {
            return Err(Error::Usage("need step0 > 0, restarts >= 1, shrink and armijo in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MinimizeResult {
    pub config: Configuration,
    pub energy: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub restarts_used: usize,
    pub converged: bool,
}

fn side_for(n: usize, d: usize) -> Option<usize> {
    let m = (n as f64).powf(1.0 / d as f64).round() as usize;
    (m.pow(d as u32) == n).then_some(m)
}

pub fn initial_config(n: usize, d: usize, init: InitKind, rng: &mut ChaCha8Rng) -> Result<Configuration> {
    let lattice = || {
        side_for(n, d).ok_or_else(|| Error::Usage(format!("lattice start needs N = m^d, got N = {n}, d = {d}")))
    };
    match init {
        InitKind::Random => Configuration::random(n, d, rng),
        InitKind::Lattice => {
            let m = lattice()?;
            Configuration::lattice(m, d)?.translated(&vec![0.5 / m as f64; d])
        }
        InitKind::PerturbedLattice => {
            let m = lattice()?;
            let base = Configuration::lattice(m, d)?;
            let amp = 0.1 / m as f64;
            Configuration::from_flat(d, base.flat().iter().map(|&c| c + 0.5 / m as f64 + amp * (2.0 * rng.gen::<f64>() - 1.0)).collect())
        }
    }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, b| a.max(b.abs()))
}

struct Descent {
    config: Configuration,
    energy: f64,
    grad_norm: f64,
    iterations: usize,
    converged: bool,
}

/// One descent run from `start`; `None` if the start is already degenerate.
fn descend(start: Configuration, ewald: &Ewald, opts: &MinimizeOptions) -> Option<Descent> {
    let n = start.len();
    let d = start.dim();
    let spacing = (n as f64).powf(-1.0 / d as f64);
    let max_move = 0.25 * spacing;
    let mut x = start;
    let mut e = discrete_energy(&x, ewald).ok()?.value;
    let mut g = energy_gradient(&x, ewald).ok()?;
    if !e.is_finite() {
        return None;
    }
    let mut t = opts.step0 * spacing / sup_norm(&g).max(f64::MIN_POSITIVE);
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut iterations = 0;
    let mut gnorm = sup_norm(&g);
    while iterations < opts.max_iters && gnorm > opts.gradient_tol {
        iterations += 1;
        // Barzilai-Borwein trial step, then Armijo backtracking
        if let Some((s, y)) = &prev {
            let sy: f64 = s.iter().zip(y).map(|(a, b)| a * b).sum();
            let ss: f64 = s.iter().map(|a| a * a).sum();
            if sy > 0.0 {
                t = ss / sy;
            } else {
                t *= 2.0;
            }
        }
        t = t.min(max_move / gnorm);
        let g2: f64 = g.iter().map(|v| v * v).sum();
        let mut accepted = None;
        for _ in 0..60 {
            let trial = Configuration::from_flat(d, x.flat().iter().zip(&g).map(|(a, b)| a - t * b).collect()).ok()?;
            if trial.min_separation() >= COINCIDENCE_GUARD {
                if let Ok(r) = discrete_energy(&trial, ewald) {
                    if r.value.is_finite() && r.value < e && r.value <= e - opts.armijo * t * g2 {
                        accepted = Some((trial, r.value));
                        break;
                    }
                }
            }
            t *= opts.shrink;
        }
        let Some((next, en)) = accepted else { break };
        let Ok(gn) = energy_gradient(&next, ewald) else { break };
        assert!(en <= e, "accepted step raised the energy");
        let step: Vec<f64> = g.iter().map(|v| -t * v).collect();
        let dy: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        prev = Some((step, dy));
        x = next;
        e = en;
        g = gn;
        gnorm = sup_norm(&g);
    }
    Some(Descent { config: x, energy: e, grad_norm: gnorm, iterations, converged: gnorm <= opts.gradient_tol })
}

/// Best of `opts.restarts` descents; restart `r` draws its start from seed `opts.seed + r`.
pub fn minimize_energy(n: usize, ewald: &Ewald, opts: &MinimizeOptions) -> Result<MinimizeResult> {
    opts.validate()?;
    if n < 2 {
        return Err(Error::Usage(format!("minimization needs N >= 2, got {n}")));
    }
    let d = ewald.spec().dim();
    let starts: Vec<Configuration> = (0..opts.restarts)
        .map(|r| initial_config(n, d, opts.init, &mut ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(r as u64))))
        .collect::<Result<_>>()?;
    minimize_from(starts, ewald, opts)
}

/// Descends from each supplied start and keeps the lowest energy, earliest start on ties.
pub fn minimize_from(starts: Vec<Configuration>, ewald: &Ewald, opts: &MinimizeOptions) -> Result<MinimizeResult> {
    opts.validate()?;
    let used = starts.len();
    let fallback = starts.first().cloned().ok_or_else(|| Error::Usage("no starting configuration".into()))?;
    let runs: Vec<Option<Descent>> = starts.into_par_iter().map(|s| descend(s, ewald, opts)).collect();
    let best = runs.into_iter().flatten().fold(None::<Descent>, |best, r| match best {
        Some(b) if b.energy <= r.energy => Some(b),
        _ => Some(r),
    });
    let Some(best) = best else {
        // every start had coincident points
        return Ok(MinimizeResult { config: fallback, energy: f64::INFINITY, grad_norm: f64::INFINITY, iterations: 0, restarts_used: used, converged: false });
    };
    let energy = discrete_energy(&best.config, ewald)?.value;
    debug_assert!((energy - best.energy).abs() <= 1e-10 * energy.abs().max(1.0));
    Ok(MinimizeResult {
        config: best.config,
        energy,
        grad_norm: best.grad_norm,
        iterations: best.iterations,
        restarts_used: used,
        converged: best.converged,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurveRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub best_energy: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnergyCurve {
    pub rows: Vec<CurveRow>,
    /// `min E_N` nondecreasing in `N` up to `1e-3`.
    pub monotone: bool,
    /// Slope of `ln(-E_N)` against `ln N`, or of `-(N-1) E_N` against `ln N` when `s = 0`.
    pub fit: Option<LineFit>,
}

pub fn min_energy_curve(ewald: &Ewald, n_list: &[usize], opts: &MinimizeOptions) -> Result<EnergyCurve> {
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Usage("N list must be increasing".into()));
    }
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let r = minimize_energy(n, ewald, opts)?;
        rows.push(CurveRow { n, best_energy: r.energy, converged: r.converged });
    }
    let monotone = rows.windows(2).all(|w| w[0].best_energy <= w[1].best_energy + 1e-3);
    let ln_n: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let fit = if ewald.spec().is_log() {
        linear_fit(&ln_n, &rows.iter().map(|r| -(r.n as f64 - 1.0) * r.best_energy).collect::<Vec<_>>()).ok()
    } else if rows.iter().all(|r| r.best_energy < 0.0) {
        linear_fit(&ln_n, &rows.iter().map(|r| (-r.best_energy).ln()).collect::<Vec<_>>()).ok()
    } else {
        None
    };
    Ok(EnergyCurve { rows, monotone, fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::RieszSpec;

    fn log_ewald() -> Ewald {
        Ewald::for_tolerance(&RieszSpec::new(1, 0.0).unwrap(), 1e-12).unwrap()
    }

    fn max_gap_error(c: &Configuration) -> f64 {
        let mut xs: Vec<f64> = c.flat().to_vec();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = xs.len();
        (0..n)
            .map(|i| {
                let gap = if i + 1 < n { xs[i + 1] - xs[i] } else { xs[0] + 1.0 - xs[n - 1] };
                (gap - 1.0 / n as f64).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn lattice_start_is_already_optimal_on_the_circle() {
        let r = minimize_energy(8, &log_ewald(), &MinimizeOptions { init: InitKind::Lattice, ..Default::default() }).unwrap();
        assert!((r.energy + 8f64.ln() / 7.0).abs() < 1e-6);
        assert!(r.converged);
    }

    #[test]
    fn random_starts_reach_equal_spacing() {
        let opts = MinimizeOptions { init: InitKind::Random, restarts: 8, seed: 3, ..Default::default() };
        let r = minimize_energy(8, &log_ewald(), &opts).unwrap();
        assert!((r.energy + 8f64.ln() / 7.0).abs() < 1e-5, "{}", r.energy);
        assert!(max_gap_error(&r.config) < 1e-4);
    }

    #[test]
    fn two_points_go_antipodal() {
        let opts = MinimizeOptions { init: InitKind::Random, seed: 1, ..Default::default() };
        let r = minimize_energy(2, &log_ewald(), &opts).unwrap();
        assert!((r.energy + 2f64.ln()).abs() < 1e-8, "{}", r.energy);
        assert!((r.config.distance(0, 1) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn translated_start_gives_same_energy_and_seeds_reproduce() {
        let ew = Ewald::for_tolerance(&RieszSpec::new(2, 1.0).unwrap(), 1e-10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let start = Configuration::random(12, 2, &mut rng).unwrap();
        let opts = MinimizeOptions { gradient_tol: 1e-9, ..Default::default() };
        let a = minimize_from(vec![start.clone()], &ew, &opts).unwrap();
        let b = minimize_from(vec![start.translated(&[0.3, 0.7]).unwrap()], &ew, &opts).unwrap();
        assert!((a.energy - b.energy).abs() < 1e-8, "{} {}", a.energy, b.energy);
        let c = minimize_from(vec![start], &ew, &opts).unwrap();
        assert_eq!(a.config, c.config);
    }

    #[test]
    fn coincident_start_reports_failure() {
        let start = Configuration::from_flat(1, vec![0.2, 0.2, 0.7]).unwrap();
        let r = minimize_from(vec![start], &log_ewald(), &MinimizeOptions::default()).unwrap();
        assert!(!r.converged && r.energy.is_infinite());
    }

    #[test]
    fn circle_curve_follows_log_law() {
        let opts = MinimizeOptions { init: InitKind::Random, restarts: 2, ..Default::default() };
        let curve = min_energy_curve(&log_ewald(), &[8, 16, 32], &opts).unwrap();
        for row in &curve.rows {
            let n = row.n as f64;
            assert!((-row.best_energy * (n - 1.0) - n.ln()).abs() < 1e-4);
        }
        assert!(curve.monotone);
        assert!((curve.fit.unwrap().slope - 1.0).abs() < 0.1);
    }
}
