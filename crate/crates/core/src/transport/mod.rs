//! Two-sided bounds on the ∞-Wasserstein distance between an empirical
//! measure and the uniform measure on the torus.

mod flow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::{distance_raw, Configuration};

pub use flow::FlowNetwork;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransportBound {
    #[serde(rename = "N")]
    pub n: usize,
    pub d: usize,
    pub m: usize,
    pub lower: f64,
    pub upper: f64,
    pub disc_error: f64,
}

/// Half diagonal `√d/(2m)` of a grid cell.
pub fn half_cell_diagonal(m: usize, d: usize) -> f64 {
    (d as f64).sqrt() / (2.0 * m as f64)
}

/// Centers of the `m^d` cells, row-major with the last axis fastest.
pub fn cell_centers(m: usize, d: usize) -> Vec<f64> {
    let total = m.pow(d as u32);
    let mut out = Vec::with_capacity(total * d);
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        out.extend(idx.iter().map(|&i| (i as f64 + 0.5) / m as f64));
        for j in (0..d).rev() {
            idx[j] += 1;
            if idx[j] < m {
                break;
            }
            idx[j] = 0;
        }
    }
    out
}

/// Largest distance from a cell center to its nearest particle, less the
/// half cell diagonal. Balls of radius `d_∞` around the particles cover the
/// torus, so this is a lower bound.
pub fn dinf_lower_empty_ball(config: &Configuration, m: usize) -> Result<f64> {
    if m < 8 {
        return Err(Error::Usage(format!("grid needs m >= 8, got {m}")));
    }
    let d = config.dim();
    let centers = cell_centers(m, d);
    let far = centers
        .par_chunks(d)
        .map(|c| config.points().map(|p| distance_raw(c, p)).fold(f64::INFINITY, f64::min))
        .reduce(|| 0.0, f64::max);
    Ok((far - half_cell_diagonal(m, d)).max(0.0))
}

/// Smallest `r` such that every cell can send its supply to particles within
/// distance `r` while each particle receives its demand, decided by max-flow
/// and binary search over the sorted distinct cell-particle distances.
pub fn bottleneck_radius(cells: &[f64], supply: &[f64], config: &Configuration, demand: &[f64]) -> Result<f64> {
    let d = config.dim();
    let n = config.len();
    if cells.len() != supply.len() * d || demand.len() != n {
        return Err(Error::Usage("supply and demand sizes do not match the grid and particles".into()));
    }
    let total: f64 = supply.iter().sum();
    let want: f64 = demand.iter().sum();
    if (total - want).abs() > 1e-9 * total.max(1.0) {
        return Err(Error::Usage(format!("supply {total} and demand {want} differ")));
    }
    let active: Vec<usize> = (0..supply.len()).filter(|&c| supply[c] > 0.0).collect();
    let dist: Vec<Vec<f64>> = active
        .par_iter()
        .map(|&c| config.points().map(|p| distance_raw(&cells[c * d..(c + 1) * d], p)).collect())
        .collect();

    let mut radii: Vec<f64> = dist.iter().flatten().copied().collect();
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    radii.dedup_by(|b, a| (*b - *a).abs() <= 1e-12);
    let floor = dist.iter().map(|row| row.iter().copied().fold(f64::INFINITY, f64::min)).fold(0.0, f64::max);

    let feasible = |r: f64| -> bool {
        let (s, t) = (0, 1 + active.len() + n);
        let mut g = FlowNetwork::new(t + 1);
        for (a, &c) in active.iter().enumerate() {
            g.add_edge(s, 1 + a, supply[c]);
            for (i, &dd) in dist[a].iter().enumerate() {
                if dd <= r + 1e-12 {
                    g.add_edge(1 + a, 1 + active.len() + i, supply[c]);
                }
            }
        }
        for (i, &w) in demand.iter().enumerate() {
            g.add_edge(1 + active.len() + i, t, w);
        }
        g.max_flow(s, t) >= total * (1.0 - 1e-9)
    };

    let mut lo = radii.partition_point(|&r| r < floor - 1e-12);
    let mut hi = radii.len() - 1;
    if !feasible(radii[hi]) {
        return Err(Error::Consistency("allocation infeasible at the largest radius".into()));
    }
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(radii[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    if hi > 0 && radii[hi - 1] >= floor - 1e-12 && feasible(radii[hi - 1]) {
        return Err(Error::Consistency("feasibility is not monotone in the radius".into()));
    }
    Ok(radii[hi])
}

/// Certified upper bound `r* + √d/(2m)` from the cell-to-particle allocation.
pub fn dinf_upper_matching(config: &Configuration, m: usize) -> Result<f64> {
    let d = config.dim();
    let n = config.len();
    let cells = m.pow(d as u32);
    if cells % n != 0 {
        return Err(Error::Usage(format!("N = {n} must divide m^d = {cells}; choose m with grid_for")));
    }
    let centers = cell_centers(m, d);
    let r = bottleneck_radius(&centers, &vec![1.0; cells], config, &vec![(cells / n) as f64; n])?;
    Ok(r + half_cell_diagonal(m, d))
}

pub fn dinf_estimate(config: &Configuration, m: usize) -> Result<TransportBound> {
    let lower = dinf_lower_empty_ball(config, m)?;
    let upper = dinf_upper_matching(config, m)?;
    let bound = TransportBound { n: config.len(), d: config.dim(), m, lower, upper, disc_error: half_cell_diagonal(m, config.dim()) };
    debug_assert!(bound.lower <= bound.upper + bound.disc_error);
    Ok(bound)
}

/// Smallest `m` in `[requested, 2 requested]` with `N | m^d`.
pub fn grid_for(n: usize, d: usize, requested: usize) -> Result<usize> {
    let requested = requested.max(8);
    (requested..=2 * requested)
        .find(|&m| (m as u128).pow(d as u32) % n as u128 == 0)
        .ok_or_else(|| Error::Usage(format!("no m in [{requested}, {}] has {n} dividing m^{d}", 2 * requested)))
}

/// Default resolution: about `4N` cells per axis in one dimension and
/// `8 N^{1/d}` otherwise, adjusted for divisibility.
pub fn default_grid(n: usize, d: usize) -> Result<usize> {
    let scale = if d == 1 { 4.0 } else { 8.0 };
    grid_for(n, d, (scale * (n as f64).powf(1.0 / d as f64)).round() as usize)
}
