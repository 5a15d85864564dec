use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LemmaReport {
    pub beta: f64,
    /// `(4/α) C_E β^k` for `k = 1..=K`.
    pub bounds: Vec<f64>,
    /// Left side of the hypothesis for `k = 1..K-1`.
    pub hypothesis: Vec<f64>,
    /// Indices `k` (1-based) where the hypothesis fails.
    pub violations: Vec<usize>,
    pub satisfied: bool,
    /// Whether every `σ_k` sits below its bound.
    pub bound_holds: bool,
}

/// `C_E A^{-2(k-1/2)} + C3 Σ_{l<k} A^{-2(k-l-1/2)} σ_l + C2 σ_k - α Σ_{l>k} σ_l`
/// for `k = 1..K-1`; `sigmas[0]` is `σ_1`.
pub fn hypothesis_terms(sigmas: &[f64], c_e: f64, c2: f64, c3: f64, a: f64, alpha: f64) -> Vec<f64> {
    let kmax = sigmas.len();
    // suffix sums, so small tails do not cancel against the total
    let mut tails = vec![0.0; kmax + 1];
    for k in (0..kmax).rev() {
        tails[k] = tails[k + 1] + sigmas[k];
    }
    let mut out = Vec::with_capacity(kmax.saturating_sub(1));
    for k in 1..kmax {
        let tail = tails[k];
        let past: f64 = (1..k).map(|l| a.powf(-2.0 * ((k - l) as f64 - 0.5)) * sigmas[l - 1]).sum();
        out.push(c_e * a.powf(-2.0 * (k as f64 - 0.5)) + c3 * past + c2 * sigmas[k - 1] - alpha * tail);
    }
    out
}

pub fn lemma_ind_bound(sigmas: &[f64], c_e: f64, c2: f64, c3: f64, a: f64, alpha: f64) -> Result<LemmaReport> {
    if sigmas.iter().any(|&s| !(s >= 0.0)) {
        return Err(Error::Usage("σ_k must be nonnegative".into()));
    }
    if !(c_e > 0.0 && c2 > 0.0 && c3 > 0.0 && alpha > 0.0) {
        return Err(Error::InvalidConstants(format!("need C_E, C2, C3, α > 0, got {c_e}, {c2}, {c3}, {alpha}")));
    }
    let total: f64 = sigmas.iter().sum();
    if total > c_e * (1.0 + 1e-12) {
        return Err(Error::Usage(format!("Σσ_k = {total} exceeds C_E = {c_e}")));
    }
    let need = 4f64.max(16.0 * c3 / alpha);
    if a < need {
        return Err(Error::InvalidConstants(format!("A = {a} below max(4, 16 C3/α) = {need}")));
    }
    let beta = (c2 + alpha / 2.0) / (c2 + alpha);
    let bounds: Vec<f64> = (1..=sigmas.len()).map(|k| 4.0 / alpha * c_e * beta.powi(k as i32)).collect();
    let hypothesis = hypothesis_terms(sigmas, c_e, c2, c3, a, alpha);
    let violations: Vec<usize> = hypothesis.iter().enumerate().filter(|(_, &h)| h < 0.0).map(|(i, _)| i + 1).collect();
    let bound_holds = sigmas.iter().zip(&bounds).all(|(s, b)| s <= b);
    Ok(LemmaReport { beta, bounds, hypothesis, satisfied: violations.is_empty(), violations, bound_holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_sequence_is_trivial() {
        let r = lemma_ind_bound(&[0.0; 6], 1.0, 2.0, 1.0, 64.0, 0.5).unwrap();
        assert!(r.satisfied && r.bound_holds);
        assert!((r.beta - 2.25 / 2.5).abs() < 1e-15);
    }

    #[test]
    fn geometric_sequence_below_beta() {
        let (c_e, alpha, c2) = (3.0, 0.5, 2.0f64);
        let beta = (c2 + alpha / 2.0) / (c2 + alpha);
        let r0: f64 = 0.8 * beta;
        let sig: Vec<f64> = (1..=10).map(|k| c_e * (1.0 - r0) * r0.powi(k - 1)).collect();
        let rep = lemma_ind_bound(&sig, c_e, c2, 1.0, 64.0, alpha).unwrap();
        assert!(rep.satisfied);
        for (s, b) in sig.iter().zip(&rep.bounds) {
            assert!(s <= b);
        }
    }

    #[test]
    fn late_mass_is_flagged() {
        let mut sig = vec![0.0; 6];
        sig[5] = 1.0;
        let rep = lemma_ind_bound(&sig, 1.0, 2.0, 1.0, 64.0, 0.5).unwrap();
        assert!(!rep.satisfied);
        assert_eq!(rep.violations, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn preconditions() {
        assert!(matches!(lemma_ind_bound(&[0.5, 0.6], 1.0, 2.0, 1.0, 64.0, 0.5), Err(Error::Usage(_))));
        assert!(matches!(lemma_ind_bound(&[-0.1], 1.0, 2.0, 1.0, 64.0, 0.5), Err(Error::Usage(_))));
        assert!(matches!(lemma_ind_bound(&[0.1], 1.0, 2.0, 4.0, 64.0, 0.5), Err(Error::InvalidConstants(_))));
    }

    proptest! {
        #[test]
        fn hypothesis_implies_bound(raw in proptest::collection::vec(0.0f64..1.0, 1..14), decay in 0.05f64..1.0,
                                    c2 in 0.1f64..5.0, alpha in 0.05f64..1.0) {
            let sig: Vec<f64> = raw.iter().enumerate().map(|(k, x)| x * decay.powi(k as i32)).collect();
            let c_e = sig.iter().sum::<f64>().max(1e-3);
            let c3 = 1.0;
            let a = 16.0 * c3 / alpha;
            let rep = lemma_ind_bound(&sig, c_e, c2, c3, a, alpha).unwrap();
            if rep.satisfied {
                prop_assert!(rep.bound_holds, "{sig:?} {rep:?}");
            }
        }
    }
}
