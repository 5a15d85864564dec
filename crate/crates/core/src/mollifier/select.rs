use serde::{Deserialize, Serialize};

use super::sigma::binned;
use super::{sigma_decomposition, MollSchedule};
use crate::error::{Error, Result};
use crate::potential::{Ewald, MollifiedPotential, PairPotential};
use crate::sum::compensated_sum;
use crate::torus::Configuration;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub k: usize,
    pub eps: f64,
    /// `E^{ε_k}_N`, pairs only.
    #[serde(rename = "E_eps_N")]
    pub e_eps_n: f64,
    /// `E^{ε_k}[ρ_N] = E[φ_ε * ρ_N]`, diagonal included.
    #[serde(rename = "E_eps_rho")]
    pub e_eps_rho: f64,
    /// `E^{ε_k}_N - E_N`.
    pub pair_increment: f64,
    /// `E^{ε_k}[ρ_N] - E_N`.
    pub increment: f64,
    /// `σ_{l,ε_k}` for `l = 0, 1..K, ∞`.
    pub sigma_bins: Vec<f64>,
    /// The four case-wise terms of the pair increment bound: near bins, earlier
    /// bins, the diagonal bin and the (negative) later bins.
    pub bound_terms: [f64; 4],
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Certificate {
    #[serde(rename = "N")]
    pub n: usize,
    pub d: usize,
    pub s: f64,
    pub lambda: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub eps_list: Vec<f64>,
    pub per_k: Vec<CandidateRecord>,
    pub chosen_k: usize,
    pub increment: f64,
    #[serde(rename = "E_N")]
    pub e_n: f64,
    /// `σ_l` for `W`, same layout as `sigma_bins`.
    pub sigma: Vec<f64>,
    #[serde(rename = "C2")]
    pub c2: f64,
    #[serde(rename = "C3")]
    pub c3: f64,
    #[serde(rename = "C_E")]
    pub c_e: f64,
    /// Whether all `σ_k`, `k >= 1`, are nonnegative, the regime the bound terms assume.
    pub positive_regime: bool,
    #[serde(rename = "M")]
    pub depth: Option<f64>,
    /// Stopping index before the `ε` floor cut the ladder.
    pub uncapped_k: Option<usize>,
    pub note: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Selection {
    pub chosen_k: usize,
    pub chosen_eps: f64,
    #[serde(rename = "E_eps_N")]
    pub e_eps_n: f64,
    pub increment: f64,
    pub certificate: Certificate,
}

/// Case-wise upper bound for `E^{ε_k}_N - E_N`; `sigma` holds `σ_1..σ_K`.
/// In the logarithmic case each `σ_l` enters with weight `1/l`.
pub fn bound_terms(sigma: &[f64], k: usize, c_e: f64, a: f64, c2: f64, c3: f64, log: bool) -> [f64; 4] {
    let w = |l: usize| if log { sigma[l - 1] / l as f64 } else { sigma[l - 1] };
    let near = c_e * a.powf(-2.0 * (k as f64 - 0.5));
    let earlier = 2.0 * c3 * (1..k).map(|l| a.powf(-2.0 * ((k - l) as f64 - 0.5)) * w(l)).sum::<f64>();
    let own = if log { c2 * w(k) } else { (c2 - 1.0) * w(k) };
    let later_factor = if log { 1.0 / 16.0 } else { 0.5 };
    let later = -later_factor * (k + 1..=sigma.len()).map(w).sum::<f64>();
    [near, earlier, own, later]
}

/// Scans every candidate `ε_k`, `k = 1..=K`, and returns the one with the
/// smallest `E^{ε_k}[ρ_N] - E_N`.
pub fn select_epsilon(config: &Configuration, ewald: &Ewald, sch: &MollSchedule, c2: f64, c3: f64) -> Result<Selection> {
    let spec = ewald.spec();
    let n = config.len();
    let nf = n as f64;
    if !(c3 > 0.0) || !(c2 > 0.0) {
        return Err(Error::InvalidConstants(format!("need C2, C3 > 0, got {c2}, {c3}")));
    }
    let base = sigma_decomposition(config, ewald, sch, None)?;
    let e_n = base.energy;
    if !e_n.is_finite() {
        return Err(Error::Usage("configuration has coincident points; E_N is infinite".into()));
    }
    let mut per_k = Vec::with_capacity(sch.k);
    for k in 1..=sch.k {
        let eps = sch.eps(k);
        let mp = MollifiedPotential::new(ewald, eps)?;
        let (bins, _) = binned(config, sch, &mp);
        let e_eps_n = compensated_sum(bins.iter().copied());
        if !e_eps_n.is_finite() {
            return Err(Error::Consistency(format!("E^ε_N is not finite at ε = {eps:e}")));
        }
        let e_eps_rho = mp.value_at_origin() / (2.0 * nf) + e_eps_n * (nf - 1.0) / nf;
        let terms = bound_terms(base.inner(), k, base.c_e, sch.a, c2, c3, spec.is_log());
        per_k.push(CandidateRecord {
            k,
            eps,
            e_eps_n,
            e_eps_rho,
            pair_increment: e_eps_n - e_n,
            increment: e_eps_rho - e_n,
            sigma_bins: bins,
            bound_terms: terms,
            bound: terms.iter().sum(),
        });
    }
    let best = per_k
        .iter()
        .min_by(|a, b| a.increment.partial_cmp(&b.increment).unwrap())
        .expect("schedules have K >= 1");
    let (chosen_k, chosen_eps, e_eps_n, increment) = (best.k, best.eps, best.e_eps_n, best.increment);
    let certificate = Certificate {
        n,
        d: spec.dim(),
        s: spec.s(),
        lambda: sch.lambda,
        a: sch.a,
        k: sch.k,
        eps_list: sch.eps_list.clone(),
        per_k,
        chosen_k,
        increment,
        e_n,
        sigma: base.sigma.clone(),
        c2,
        c3,
        c_e: base.c_e,
        positive_regime: base.positive,
        depth: sch.depth,
        uncapped_k: sch.uncapped_k,
        note: "C_E is max{E_N, 1}; the bound terms omit an unspecified universal factor".into(),
    };
    Ok(Selection { chosen_k, chosen_eps, e_eps_n, increment, certificate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{diagonal_correction, mollified_discrete_energy};
    use crate::mollifier::build_schedule;
    use crate::potential::RieszSpec;

    #[test]
    fn scan_returns_the_minimum_and_matches_direct_energies() {
        let spec = RieszSpec::new(1, 0.0).unwrap();
        let ew = Ewald::for_tolerance(&spec, 1e-12).unwrap();
        let n = 16;
        let c = Configuration::equally_spaced(n, 0.03).unwrap();
        let sch = build_schedule(n, &spec, 1.0, n as f64, Some(2.0)).unwrap();
        let sel = select_epsilon(&c, &ew, &sch, 1.5, 1.0).unwrap();
        let cert = &sel.certificate;
        assert_eq!(cert.per_k.len(), sch.k);
        assert!(cert.per_k.iter().all(|r| r.increment >= sel.increment && r.e_eps_n.is_finite()));
        let mp = MollifiedPotential::new(&ew, sel.chosen_eps).unwrap();
        let direct = mollified_discrete_energy(&c, &mp).unwrap().value;
        assert!((direct - sel.e_eps_n).abs() < 1e-12);
        let diag = diagonal_correction(&c, &mp, 1e-10).unwrap();
        assert!((diag.spectral - cert.per_k[sel.chosen_k - 1].e_eps_rho).abs() < 1e-6);
        let json = serde_json::to_value(cert).unwrap();
        for key in ["N", "d", "s", "lambda", "A", "K", "eps_list", "per_k", "chosen_k", "increment"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        assert!(json["per_k"][0].get("E_eps_N").is_some() && json["per_k"][0].get("bound_terms").is_some());
    }

    #[test]
    fn single_candidate_is_taken() {
        let spec = RieszSpec::new(2, 1.0).unwrap();
        let ew = Ewald::for_tolerance(&spec, 1e-10).unwrap();
        let c = Configuration::lattice(5, 2).unwrap();
        let sch = build_schedule(25, &spec, 0.05, 4.0, None).unwrap();
        assert_eq!(sch.k, 1);
        let sel = select_epsilon(&c, &ew, &sch, 1.25, 0.5).unwrap();
        assert_eq!(sel.chosen_k, 1);
        assert!(sel.certificate.positive_regime);
    }

    #[test]
    fn bound_terms_layout() {
        let t = bound_terms(&[1.0, 2.0, 3.0], 2, 1.0, 4.0, 2.0, 1.0, false);
        assert!((t[0] - 4f64.powf(-3.0)).abs() < 1e-15);
        assert!((t[1] - 2.0 * 4f64.powf(-1.0)).abs() < 1e-15);
        assert_eq!((t[2], t[3]), (2.0, -1.5));
        let t = bound_terms(&[1.0, 2.0, 3.0], 2, 1.0, 4.0, 2.0, 1.0, true);
        assert_eq!((t[2], t[3]), (2.0, -1.0 / 16.0));
    }
}
