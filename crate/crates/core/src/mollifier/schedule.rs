use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::RieszSpec;

/// Smallest mollification radius the ladder may reach.
pub const EPS_FLOOR: f64 = 1e-12;

/// Geometric ladder `ε_k = ε_0 A^{-k}`, `k = 0..=K`, of candidate radii.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MollSchedule {
    #[serde(rename = "N")]
    pub n: usize,
    pub s: f64,
    pub lambda: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub eps0: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub eps_list: Vec<f64>,
    /// `ε_{k+1/2}` for `k = 0..=K`.
    pub half_indices: Vec<f64>,
    #[serde(rename = "M")]
    pub depth: Option<f64>,
    /// Stopping index the rule asks for when the floor cuts the ladder short.
    pub uncapped_k: Option<usize>,
}

impl MollSchedule {
    pub fn eps(&self, k: usize) -> f64 {
        self.eps_list[k]
    }

    /// `ε_{k-1/2}`; for `k = 0` this is `+∞`.
    pub fn half_below(&self, k: usize) -> f64 {
        if k == 0 {
            f64::INFINITY
        } else {
            self.half_indices[k - 1]
        }
    }

    /// Ladder bin of a pair at distance `r`: 0 for `r >= ε_{1/2}`, `k` for
    /// `ε_{k+1/2} <= r < ε_{k-1/2}` and `K + 1` below `ε_{K+1/2}`.
    pub fn bin(&self, r: f64) -> usize {
        self.half_indices.partition_point(|&h| r < h)
    }
}

pub fn build_schedule(n: usize, spec: &RieszSpec, lambda: f64, a: f64, depth: Option<f64>) -> Result<MollSchedule> {
    if n < 2 {
        return Err(Error::Usage(format!("schedule needs N >= 2, got {n}")));
    }
    let nf = n as f64;
    let s = spec.s();
    let (lambda, a, eps0, target) = if spec.is_log() {
        if s != 0.0 {
            return Err(Error::Unsupported(format!("the ladder is defined for 0 <= s < d, got s = {s}")));
        }
        let m = depth.ok_or_else(|| Error::Usage("s = 0 needs a depth constant M".into()))?;
        if !(m > 0.0) {
            return Err(Error::Usage(format!("depth constant must be positive, got {m}")));
        }
        if (a - nf).abs() > 1e-9 * nf {
            return Err(Error::Usage(format!("s = 0 uses A = N = {n}, got {a}")));
        }
        (1.0, nf, 1.0 / nf, nf * (-m * nf.ln() * nf.ln()).exp())
    } else {
        if !(s > 0.0 && s < spec.dim() as f64) {
            return Err(Error::Unsupported(format!("the ladder is defined for 0 <= s < d, got s = {s}")));
        }
        if !(lambda > 0.0) || !(a >= 4.0) {
            return Err(Error::Usage(format!("need λ > 0 and A >= 4, got λ = {lambda}, A = {a}")));
        }
        (lambda, a, nf.powf(-lambda), a * nf.powf(-1.0 / (2.0 * s)))
    };

    let at = |k: f64| eps0 * (-k * a.ln()).exp();
    let mut k = 0usize;
    while at(k as f64) > target {
        k += 1;
    }
    let wanted = k;
    let mut capped = None;
    while k > 0 && at(k as f64) < EPS_FLOOR * (1.0 - 1e-9) {
        k -= 1;
        capped = Some(wanted);
    }
    if k == 0 {
        return Err(Error::DegenerateSchedule(format!(
            "ε_0 = {eps0:.4e} already meets the stopping radius {target:.4e} for N = {n}; no candidates"
        )));
    }
    Ok(MollSchedule {
        n,
        s,
        lambda,
        a,
        eps0,
        k,
        eps_list: (0..=k).map(|j| at(j as f64)).collect(),
        half_indices: (0..=k).map(|j| at(j as f64 + 0.5)).collect(),
        depth: if spec.is_log() { depth } else { None },
        uncapped_k: capped,
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LambdaChoice {
    #[serde(rename = "A")]
    pub a: f64,
    pub beta: f64,
    pub lambda: f64,
}

/// Solves `-λ = (1/(4s) - λ) q` for `λ`.
pub fn lambda_from_ratio(q: f64, s: f64) -> f64 {
    q / (4.0 * s * (q - 1.0))
}

pub fn beta_for(c2: f64) -> Result<f64> {
    if !(c2 > 0.75) {
        return Err(Error::InvalidConstants(format!("C2 must exceed 3/4, got {c2}")));
    }
    Ok((c2 - 0.75) / (c2 - 0.5))
}

/// Exponent for a given ratio `A` and contraction `β`.
pub fn lambda_for(beta: f64, a: f64, s: f64) -> Result<f64> {
    if !(beta > 0.5 && beta < 1.0) {
        return Err(Error::InvalidConstants(format!("β = {beta} outside (1/2, 1)")));
    }
    let lambda = lambda_from_ratio(beta.ln() / a.ln(), s);
    if !(lambda > 0.0 && lambda < 1.0 / (4.0 * s)) {
        return Err(Error::InvalidConstants(format!("λ = {lambda} outside (0, 1/(4s))")));
    }
    Ok(lambda)
}

pub fn compute_lambda(spec: &RieszSpec, c1: f64, c2: f64, c3: f64) -> Result<LambdaChoice> {
    let s = spec.s();
    if spec.is_log() || !(s > 0.0 && s < spec.dim() as f64) {
        return Err(Error::Unsupported(format!("explicit λ needs 0 < s < d, got s = {s}")));
    }
    if !(c1 > 0.0 && c3 > 0.0) {
        return Err(Error::InvalidConstants(format!("C1 and C3 must be positive, got {c1}, {c3}")));
    }
    let beta = beta_for(c2)?;
    let a = 4f64.max(64.0 * c3).max((4.0 * c1).powf(2.0 / s));
    Ok(LambdaChoice { a, beta, lambda: lambda_for(beta, a, s)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn power_ladder_stops_at_first_crossing() {
        let spec = RieszSpec::new(2, 1.0).unwrap();
        let sch = build_schedule(10_000, &spec, 0.05, 16.0, None).unwrap();
        assert_relative_eq!(sch.eps0, 10f64.powf(-0.2), max_relative = 1e-14);
        let want = (0..).find(|&k| 10f64.powf(-0.2) * 16f64.powi(-k) <= 0.16).unwrap() as usize;
        assert_eq!(sch.k, want);
        let floor = 10_000f64.powf(-0.5);
        assert!(sch.eps(sch.k) >= floor && sch.eps(sch.k) <= 16.0 * floor);
        assert!(sch.k as f64 >= (0.25 - 0.05) * 10_000f64.ln() / 16f64.ln());
    }

    #[test]
    fn log_ladder_respects_floor() {
        let spec = RieszSpec::new(1, 0.0).unwrap();
        let sch = build_schedule(100, &spec, 1.0, 100.0, Some(2.0)).unwrap();
        assert_relative_eq!(sch.eps0, 0.01);
        assert_eq!(sch.a, 100.0);
        // the rule asks for 100^{-(k+1)} <= 100^{1 - 2 ln 100}, i.e. k = 8
        assert_eq!(sch.uncapped_k, Some(8));
        assert_eq!(sch.k, 5);
        assert!(sch.eps(sch.k) >= EPS_FLOOR * (1.0 - 1e-9));
        let deep = build_schedule(4, &spec, 1.0, 4.0, Some(2.0)).unwrap();
        assert_eq!((deep.k, deep.uncapped_k), (1, None));
        assert!(deep.eps(deep.k) >= (-2.0 * 4f64.ln().powi(2)).exp());
        assert!(matches!(build_schedule(4, &spec, 1.0, 4.0, Some(0.5)), Err(Error::DegenerateSchedule(_))));
    }

    #[test]
    fn empty_ladder_is_degenerate() {
        let spec = RieszSpec::new(2, 1.0).unwrap();
        assert!(matches!(build_schedule(16, &spec, 0.05, 4.0, None), Err(Error::DegenerateSchedule(_))));
        assert!(build_schedule(25, &spec, 0.05, 4.0, None).is_ok());
        assert!(matches!(build_schedule(100, &spec, 0.05, 3.0, None), Err(Error::Usage(_))));
    }

    #[test]
    fn lambda_examples() {
        assert_relative_eq!(lambda_from_ratio(-0.5, 1.0), 1.0 / 12.0, max_relative = 1e-15);
        assert_relative_eq!(beta_for(1.25).unwrap(), 2.0 / 3.0, max_relative = 1e-15);
        assert!(matches!(beta_for(0.75), Err(Error::InvalidConstants(_))));
        let l: Vec<f64> = [10.0, 100.0, 1000.0].iter().map(|&a| lambda_for(2.0 / 3.0, a, 1.0).unwrap()).collect();
        assert!(l[0] > l[1] && l[1] > l[2] && l[2] > 0.0);
        let spec = RieszSpec::new(2, 1.0).unwrap();
        let c = compute_lambda(&spec, 0.5, 1.25, 0.1).unwrap();
        assert_eq!(c.a, 6.4);
        assert!(compute_lambda(&RieszSpec::new(1, 0.0).unwrap(), 1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn bins_follow_half_indices() {
        let spec = RieszSpec::new(2, 1.0).unwrap();
        let sch = build_schedule(10_000, &spec, 0.05, 16.0, None).unwrap();
        assert_eq!(sch.bin(0.9), 0);
        assert_eq!(sch.bin(sch.half_indices[0]), 0);
        assert_eq!(sch.bin(sch.half_indices[0] * 0.999), 1);
        assert_eq!(sch.bin(0.0), sch.k + 1);
    }

    proptest! {
        #[test]
        fn lambda_solves_its_relation(c1 in 0.01f64..10.0, c2 in 0.8f64..20.0, c3 in 0.001f64..5.0, s in 0.1f64..1.9) {
            let spec = RieszSpec::new(2, s).unwrap();
            let Ok(c) = compute_lambda(&spec, c1, c2, c3) else { return Ok(()) };
            let q = c.beta.ln() / c.a.ln();
            prop_assert!((-c.lambda - (1.0 / (4.0 * s) - c.lambda) * q).abs() <= 1e-12);
            prop_assert!(c.beta > 0.5 && c.beta < 1.0 && c.a >= 4.0);
        }

        #[test]
        fn half_indices_are_geometric_means(n in 50usize..100_000, lambda in 0.01f64..0.2, a in 4.0f64..64.0) {
            let spec = RieszSpec::new(3, 1.5).unwrap();
            let Ok(sch) = build_schedule(n, &spec, lambda, a, None) else { return Ok(()) };
            for k in 0..sch.k {
                let g = (sch.eps_list[k] * sch.eps_list[k + 1]).sqrt();
                prop_assert!((sch.half_indices[k] - g).abs() <= 1e-12 * g);
            }
        }
    }
}
