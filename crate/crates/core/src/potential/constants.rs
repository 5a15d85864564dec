use serde::{Deserialize, Serialize};

use super::{Ewald, MollifiedPotential};
use crate::error::{Error, Result};

/// Sample constants for the upper bounds on `W^ε`:
/// `max W^ε <= C1 a_s ε^{-s}` (or `-a_0 ln ε + C1`),
/// `W^ε <= C2 W` (or `W + C2 a_0`) for `|x| <= 2ε`,
/// `W^ε <= W + C3 ε² a_s |x|^{-s-2}` for `|x| >= 2ε`,
/// and `|W - a_s|x|^{-s}| <= C1_star` (log: `|W + a_0 ln|x||`).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundConstants {
    pub d: usize,
    pub s: f64,
    pub eps: Vec<f64>,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    #[serde(rename = "C3")]
    pub c3: f64,
    #[serde(rename = "C1_star")]
    pub c1_star: f64,
    /// Per-ε values of the three ratios, in the order of `eps`.
    pub per_eps: Vec<[f64; 3]>,
    pub grid: SampleGrid,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleGrid {
    pub directions: Vec<Vec<f64>>,
    /// Radii as multiples of ε for the near-field bound.
    pub near_radii: Vec<f64>,
    /// Number of radii in `[2ε, 1/4]` for the far-field bound.
    pub far_radii: usize,
}

fn directions(d: usize) -> Vec<Vec<f64>> {
    let unit = |v: Vec<f64>| {
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        v.into_iter().map(|c| c / n).collect::<Vec<_>>()
    };
    match d {
        1 => vec![vec![1.0]],
        2 => vec![vec![1.0, 0.0], unit(vec![1.0, 0.4142135623730951]), unit(vec![1.0, 1.0])],
        _ => {
            let mut out = vec![unit(vec![1.0; d])];
            let mut e1 = vec![0.0; d];
            e1[0] = 1.0;
            out.push(e1);
            let mut e12 = vec![0.0; d];
            e12[0] = 1.0;
            e12[1] = 1.0;
            out.push(unit(e12));
            out
        }
    }
}

pub fn fit_w_bound_constants(ewald: &Ewald, eps_list: &[f64]) -> Result<BoundConstants> {
    let spec = ewald.spec();
    let d = spec.dim();
    let s = spec.s();
    let a = spec.singular_coefficient()?;
    if eps_list.is_empty() || eps_list.iter().any(|&e| !(e > 0.0 && e < 0.125)) {
        return Err(Error::Usage("ε list must be nonempty with 0 < ε < 1/8".into()));
    }
    let dirs = directions(d);
    let near_radii = vec![0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0];
    let far_count = 24;
    let at = |dir: &[f64], r: f64| dir.iter().map(|c| c * r).collect::<Vec<f64>>();

    let mut per_eps = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let mp = MollifiedPotential::new(ewald, eps)?;
        let mut wmax = mp.value_centered(&vec![0.0; d]);
        for dir in &dirs {
            for &r in &near_radii {
                wmax = wmax.max(mp.value_centered(&at(dir, r * eps)));
            }
        }
        let c1 = if spec.is_log() { wmax + a * eps.ln() } else { wmax / (a * eps.powf(-s)) };

        let mut c2 = f64::NEG_INFINITY;
        for dir in &dirs {
            for &r in &near_radii {
                let x = at(dir, r * eps);
                let (we, w) = (mp.value_centered(&x), ewald.value_centered(&x));
                let v = if spec.is_log() {
                    (we - w) / a
                } else if w > 0.0 {
                    we / w
                } else {
                    continue;
                };
                c2 = c2.max(v);
            }
        }

        let mut c3 = f64::NEG_INFINITY;
        let (lo, hi) = ((2.0 * eps).ln(), 0.25f64.ln());
        for dir in &dirs {
            for i in 0..far_count {
                let r = (lo + (hi - lo) * i as f64 / (far_count - 1) as f64).exp();
                let x = at(dir, r);
                let gap = mp.value_centered(&x) - ewald.value_centered(&x);
                c3 = c3.max(gap / (eps * eps * a * r.powf(-s - 2.0)));
            }
        }
        if !(c1.is_finite() && c2.is_finite() && c3.is_finite()) {
            return Err(Error::Consistency(format!("no finite bound constant at ε = {eps}")));
        }
        per_eps.push([c1, c2, c3]);
    }

    let mut c1_star = 0.0f64;
    for dir in &dirs {
        for i in 1..=64 {
            let r = 0.5 * i as f64 / 64.0;
            let x = at(dir, r);
            c1_star = c1_star.max((ewald.value_centered(&x) - spec.singular_part(r)?).abs());
        }
    }

    let fold = |j: usize| per_eps.iter().map(|v| v[j]).fold(f64::NEG_INFINITY, f64::max);
    Ok(BoundConstants {
        d,
        s,
        eps: eps_list.to_vec(),
        c1: fold(0),
        c2: fold(1),
        c3: fold(2),
        c1_star,
        per_eps,
        grid: SampleGrid { directions: dirs, near_radii, far_radii: far_count },
    })
}
