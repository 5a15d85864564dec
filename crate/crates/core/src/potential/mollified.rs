use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

use super::{Ewald, PairPotential, RieszSpec};
use crate::error::{Error, Result};
use crate::mollifier::{angle_limit, MollifierTable};
use crate::special::{gamma, gauss_legendre_on, sphere_area, tanh_sinh_on, CubicTable};
use crate::torus::{min_image, TorusPoint};

/// Switch from the tabulated blur to its multipole series.
const NEAR_RANGE: f64 = 3.0;
const BLUR_STEP: f64 = 1.0 / 512.0;
const SMOOTH_STEP: f64 = 1.0 / 1024.0;

/// `B(u) = (g * ψ)(u e_1)` for `g = |·|^{-s}` or `g = ln|·|`, with a
/// far-field series `B(u) = g(u) + Σ_j b_j u^{-s-2j}` (log: `u^{-2j}`).
#[derive(Debug)]
struct SingularBlur {
    log: bool,
    s: f64,
    near: CubicTable,
    series: Vec<f64>,
}

impl SingularBlur {
    fn shared(spec: &RieszSpec, moll: &MollifierTable) -> Arc<Self> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, u64), Arc<SingularBlur>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let key = (spec.dim(), spec.s().to_bits());
        if let Some(b) = cache.lock().unwrap().get(&key) {
            return b.clone();
        }
        let b = Arc::new(Self::build(spec, moll));
        cache.lock().unwrap().insert(key, b.clone());
        b
    }

    fn build(spec: &RieszSpec, moll: &MollifierTable) -> Self {
        let d = spec.dim();
        let log = spec.is_log();
        let s = spec.s();
        let nodes = (NEAR_RANGE / BLUR_STEP).round() as usize + 3;
        let values = (0..nodes).map(|i| blur_direct(moll, log, s, i as f64 * BLUR_STEP)).collect();

        // Pizzetti: ∫ g(u e_1 - y) ψ(y) dy = Σ_j M_{2j} Δ^j g / (2^j j! d(d+2)…(d+2j-2))
        let df = d as f64;
        let mut series = Vec::with_capacity(moll.moment_count());
        let mut c = 1.0;
        // Δ^j g = lap * r^{p - 2j}
        let (mut lap, p) = if log { (1.0, 0.0) } else { (1.0, -s) };
        for j in 0..moll.moment_count() {
            if j > 0 {
                c /= 2.0 * j as f64 * (df + 2.0 * (j as f64 - 1.0));
                let q = p - 2.0 * (j as f64 - 1.0);
                lap *= if log && j == 1 { df - 2.0 } else { q * (q + df - 2.0) };
            }
            series.push(if log && j == 0 { 0.0 } else { c * moll.moment(j) * lap });
        }
        Self { log, s, near: CubicTable::from_values(0.0, BLUR_STEP, values), series }
    }

    fn far_ratio(&self, v: f64) -> f64 {
        let v2 = v * v;
        let mut acc = 0.0;
        for &b in self.series.iter().rev() {
            acc = acc * v2 + b;
        }
        acc
    }

    /// `B(u)` for the power case, `B_0(u)` for the log case.
    fn eval(&self, u: f64) -> f64 {
        if u <= NEAR_RANGE {
            self.near.eval(u)
        } else if self.log {
            u.ln() + self.far_ratio(1.0 / u)
        } else {
            u.powf(-self.s) * self.far_ratio(1.0 / u)
        }
    }
}

/// Polar quadrature of `∫ g(w) ψ(u e_1 - w) dw` around the singularity of `g`.
fn blur_direct(moll: &MollifierTable, log: bool, s: f64, u: f64) -> f64 {
    let d = moll.dim();
    let lo = (u - 1.0).max(0.0);
    tanh_sinh_on(6, lo, u + 1.0)
        .into_iter()
        .map(|(rho, w)| {
            let g = if log { rho.ln() } else { rho.powf(-s) };
            w * g * rho.powi(d as i32 - 1) * sphere_mean(moll, u, rho)
        })
        .sum()
}

/// `∫_{S^{d-1}} ψ(|u e_1 - ρθ|) dσ(θ)`.
fn sphere_mean(moll: &MollifierTable, u: f64, rho: f64) -> f64 {
    match moll.dim() {
        1 => moll.psi((u - rho).abs()) + moll.psi(u + rho),
        2 => {
            let th = angle_limit(u, rho, 1.0);
            if th <= 0.0 {
                return 0.0;
            }
            2.0 * gauss_legendre_on(96, 0.0, th)
                .iter()
                .map(|&(t, w)| w * moll.psi((u * u + rho * rho - 2.0 * u * rho * t.cos()).max(0.0).sqrt()))
                .sum::<f64>()
        }
        _ => {
            if u * rho < 1e-14 {
                return 4.0 * PI * moll.psi(u.max(rho));
            }
            let (a, b) = ((u - rho).abs(), (u + rho).min(1.0));
            if b <= a {
                return 0.0;
            }
            let g: f64 = gauss_legendre_on(48, a, b).iter().map(|&(q, w)| w * moll.psi(q) * q).sum();
            2.0 * PI * g / (u * rho)
        }
    }
}

/// `W^ε = W * ψ_ε`, evaluated by the same split as [`Ewald`]: the Fourier
/// part is damped by `ψ̂(ε|k|)`, and each real-space image is convolved with
/// `ψ_ε`. The singular closed form is blurred through a `(d, s)` table that
/// is independent of `ε`; the entire remainder is tabulated per `ε`.
#[derive(Clone, Debug)]
pub struct MollifiedPotential {
    ewald: Ewald,
    eps: f64,
    moll: Arc<MollifierTable>,
    blur: Option<Arc<SingularBlur>>,
    smooth: CubicTable,
    images: Vec<f64>,
    radius2: f64,
    wave_w: Vec<f64>,
    sing_coef: f64,
}

impl MollifiedPotential {
    pub fn new(ewald: &Ewald, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(Error::Usage(format!("mollification radius must lie in (0, 1/2), got {eps}")));
        }
        let spec = ewald.spec();
        let d = spec.dim();
        let moll = MollifierTable::shared(d)?;
        let kernel = ewald.kernel();
        let direct = kernel.is_direct();
        let blur = if direct { None } else { Some(SingularBlur::shared(spec, &moll)) };
        let a = spec.s() / 2.0;
        let sing_coef = if direct || spec.is_log() { 0.0 } else { gamma(a) * PI.powf(-a) };

        let rule = ball_rule(&moll, eps);
        let alpha = kernel.alpha();
        let r_max = ewald.real_radius() + 1.0;
        let nodes = (r_max / SMOOTH_STEP).ceil() as usize + 3;
        let values = (0..nodes)
            .map(|i| {
                let r = i as f64 * SMOOTH_STEP;
                rule.iter()
                    .map(|&(rho, cos_t, w)| {
                        let q2 = (r * r + rho * rho - 2.0 * r * rho * cos_t).max(0.0);
                        w * if direct { kernel.value(q2) } else { kernel.smooth(PI * q2 / alpha) }
                    })
                    .sum::<f64>()
            })
            .collect();

        let radius = ewald.real_radius() + eps;
        let box_r = (radius + 0.5).ceil() as i64;
        let mut images = Vec::new();
        crate::torus::for_each_lattice_vector(d, box_r, |n| {
            let gap: f64 = n.iter().map(|&c| ((c.abs() as f64) - 0.5).max(0.0).powi(2)).sum();
            if gap <= radius * radius {
                images.extend(n.iter().map(|&c| c as f64));
            }
        });

        let wave_w = ewald
            .waves()
            .map(|(k, w)| {
                let norm = k.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
                w * moll.psi_hat(eps * norm)
            })
            .collect();

        Ok(Self {
            ewald: ewald.clone(),
            eps,
            moll,
            blur,
            smooth: CubicTable::from_values(0.0, SMOOTH_STEP, values),
            images,
            radius2: radius * radius,
            wave_w,
            sing_coef,
        })
    }

    pub fn spec(&self) -> &RieszSpec {
        self.ewald.spec()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn mollifier(&self) -> &MollifierTable {
        &self.moll
    }

    pub fn ewald(&self) -> &Ewald {
        &self.ewald
    }

    /// `(S * ψ_ε)(r)` for the singular closed form `S` of the image kernel.
    fn blurred_singular(&self, r: f64) -> f64 {
        let Some(blur) = &self.blur else { return 0.0 };
        let u = r / self.eps;
        if blur.log {
            if u <= NEAR_RANGE {
                -PI.ln() - 2.0 * self.eps.ln() - 2.0 * blur.eval(u)
            } else {
                -PI.ln() - 2.0 * r.ln() - 2.0 * blur.far_ratio(1.0 / u)
            }
        } else if u <= NEAR_RANGE {
            self.sing_coef * self.eps.powf(-blur.s) * blur.eval(u)
        } else {
            self.sing_coef * r.powf(-blur.s) * blur.far_ratio(1.0 / u)
        }
    }

    /// `W^ε` at a displacement reduced to `[-1/2, 1/2)^d`.
    pub fn value_centered(&self, x: &[f64]) -> f64 {
        let d = x.len();
        let mut real = 0.0;
        for n in self.images.chunks_exact(d) {
            let r2: f64 = x.iter().zip(n).map(|(a, b)| (a + b).powi(2)).sum();
            if r2 <= self.radius2 {
                let r = r2.sqrt();
                real += self.blurred_singular(r) + self.smooth.eval(r);
            }
        }
        let mut four = 0.0;
        let kc = self.ewald.params().fourier_cutoff;
        let side = 2 * kc + 1;
        let mut phases = vec![Complex64::new(1.0, 0.0); d * side];
        for j in 0..d {
            let base = Complex64::from_polar(1.0, 2.0 * PI * x[j]);
            let mut p = Complex64::new(1.0, 0.0);
            for m in 1..=kc {
                p *= base;
                phases[j * side + kc + m] = p;
                phases[j * side + kc - m] = p.conj();
            }
        }
        for ((k, _), w) in self.ewald.waves().zip(&self.wave_w) {
            let mut e = phases[(k[0] + kc as i64) as usize];
            for j in 1..d {
                e *= phases[j * side + (k[j] + kc as i64) as usize];
            }
            four += w * e.re;
        }
        self.ewald.prefactor() * real + self.ewald.constant() + four
    }

    pub fn value(&self, x: &TorusPoint) -> Result<f64> {
        if x.dim() != self.spec().dim() {
            return Err(Error::Usage("dimension mismatch".into()));
        }
        Ok(self.value_centered(&x.centered()))
    }

    pub fn spectral(&self) -> MollifiedSpectral<'_> {
        MollifiedSpectral { spec: self.spec(), moll: &self.moll, eps: self.eps }
    }
}

impl PairPotential for MollifiedPotential {
    fn dim(&self) -> usize {
        self.spec().dim()
    }

    fn value_at(&self, dx: &[f64]) -> f64 {
        let c: Vec<f64> = dx.iter().map(|&v| min_image(v)).collect();
        self.value_centered(&c)
    }
}

/// Radial quadrature `(ρ, cos θ, weight)` for `∫ F(|r e_1 - εw|) ψ(w) dw`,
/// weights normalized to unit mass.
fn ball_rule(moll: &MollifierTable, eps: f64) -> Vec<(f64, f64, f64)> {
    let d = moll.dim();
    // the integrand varies on the scale of the split, so tiny ε needs few nodes
    let (nr, nt) = if eps < 0.02 { (24, 12) } else { (64, 48) };
    let mut rule = Vec::new();
    for (rho, wr) in gauss_legendre_on(nr, 0.0, 1.0) {
        let radial = wr * moll.psi(rho) * rho.powi(d as i32 - 1);
        match d {
            1 => {
                rule.push((eps * rho, 1.0, radial));
                rule.push((eps * rho, -1.0, radial));
            }
            2 => {
                for i in 0..=nt {
                    let t = PI * i as f64 / nt as f64;
                    let w = if i == 0 || i == nt { 0.5 } else { 1.0 };
                    rule.push((eps * rho, t.cos(), radial * w));
                }
            }
            _ => {
                for (c, wc) in gauss_legendre_on(nt, -1.0, 1.0) {
                    rule.push((eps * rho, c, radial * wc));
                }
            }
        }
    }
    let total: f64 = rule.iter().map(|r| r.2).sum();
    rule.iter_mut().for_each(|r| r.2 /= total);
    rule
}

/// Spectral evaluation `Σ_{0<|k|<=K} |k|^{s-d} ψ̂(ε|k|) cos 2πk·x` with a
/// tail bound from the `ψ̂` envelope.
pub struct MollifiedSpectral<'a> {
    spec: &'a RieszSpec,
    moll: &'a MollifierTable,
    eps: f64,
}

impl MollifiedSpectral<'_> {
    /// Bound on the omitted shells `|k| > cutoff` of `Σ |k|^{s-d} ψ̂(ε|k|)`.
    pub fn tail_bound(&self, cutoff: usize) -> f64 {
        spectral_tail(self.spec, self.moll, self.eps, cutoff)
    }

    /// Smallest cutoff whose tail bound is below `tol / 10`.
    pub fn cutoff_for(&self, tol: f64) -> usize {
        spectral_cutoff(self.spec, self.moll, self.eps, tol)
    }

    /// Returns `(value, tail_bound)`.
    pub fn value(&self, x: &TorusPoint, cutoff: usize, tol: f64) -> Result<(f64, f64)> {
        let tail = self.tail_bound(cutoff);
        if tail > tol {
            return Err(Error::Accuracy(format!("spectral tail {tail:.3e} above {tol:.3e} at cutoff {cutoff}")));
        }
        let d = self.spec.dim();
        let kc = cutoff as i64;
        let mut total = crate::sum::CompensatedSum::new();
        let e = (self.spec.s() - d as f64) / 2.0;
        let c = x.coords();
        crate::torus::for_each_lattice_vector(d, kc, |k| {
            let k2: i64 = k.iter().map(|v| v * v).sum();
            if k2 == 0 || k2 > kc * kc {
                return;
            }
            let phase: f64 = k.iter().zip(c).map(|(&kj, &xj)| kj as f64 * xj).sum();
            total.add((k2 as f64).powf(e) * self.moll.psi_hat(self.eps * (k2 as f64).sqrt()) * (2.0 * PI * phase).cos());
        });
        Ok((total.value(), tail))
    }
}

pub(crate) fn spectral_tail(spec: &RieszSpec, moll: &MollifierTable, eps: f64, cutoff: usize) -> f64 {
    let d = spec.dim() as f64;
    let area = sphere_area(spec.dim());
    let mut tail = 0.0;
    let mut r = cutoff.max(1) as f64;
    loop {
        // lattice points with |k| in (r, r+1] number at most area (r+1+√d/2)^{d-1} (1 + √d)
        let count = area * (r + 1.0 + d.sqrt() / 2.0).powf(d - 1.0) * (1.0 + d.sqrt());
        let term = count * r.powf(spec.s() - d) * moll.psi_hat_envelope(eps * r);
        tail += term;
        if term < 1e-30 * tail.max(1e-300) || term < 1e-300 {
            break;
        }
        r += 1.0;
    }
    tail
}

pub(crate) fn spectral_cutoff(spec: &RieszSpec, moll: &MollifierTable, eps: f64, tol: f64) -> usize {
    let mut k = 1usize;
    while spectral_tail(spec, moll, eps, k) * 10.0 > tol {
        k = (k as f64 * 1.1).ceil() as usize + 1;
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn setup(d: usize, s: f64) -> (RieszSpec, Ewald) {
        let spec = RieszSpec::new(d, s).unwrap();
        let ew = Ewald::for_tolerance(&spec, 1e-12).unwrap();
        (spec, ew)
    }

    #[test]
    fn blur_obeys_mean_value_theorems() {
        // ln|x| is harmonic in the plane, |x|^{-1} in space: radial averages
        // outside the support reproduce the point value
        let (spec, _) = setup(2, 0.0);
        let b = SingularBlur::shared(&spec, &MollifierTable::shared(2).unwrap());
        for &u in &[1.2, 2.0, 2.9, 3.0, 3.1, 10.0] {
            assert!((b.eval(u) - u.ln()).abs() <= 1e-10, "u={u}");
        }
        let (spec, _) = setup(3, 1.0);
        let b = SingularBlur::shared(&spec, &MollifierTable::shared(3).unwrap());
        for &u in &[1.01, 1.7, 2.99, 3.0, 3.2, 40.0] {
            assert_relative_eq!(b.eval(u), 1.0 / u, max_relative = 1e-10);
        }
    }

    #[test]
    fn blur_table_and_series_agree_at_the_switch() {
        for (d, s) in [(1, 0.0), (1, 0.5), (2, 1.0), (2, 0.5), (3, 2.0), (2, -1.0)] {
            let (spec, _) = setup(d, s);
            let moll = MollifierTable::shared(d).unwrap();
            let b = SingularBlur::shared(&spec, &moll);
            let u = NEAR_RANGE;
            let series = if b.log { u.ln() + b.far_ratio(1.0 / u) } else { u.powf(-s) * b.far_ratio(1.0 / u) };
            assert!((b.near.eval(u) - series).abs() <= 1e-10 * (1.0 + series.abs()), "d={d} s={s}");
        }
    }

    #[test]
    fn blur_at_origin_matches_radial_moment() {
        // B(0) = ∫ |y|^{-s} ψ(y) dy
        let (spec, _) = setup(1, 0.5);
        let moll = MollifierTable::shared(1).unwrap();
        let b = SingularBlur::shared(&spec, &moll);
        // substitute y = t² to remove the singularity
        let direct: f64 = 2.0 * gauss_legendre_on(200, 0.0, 1.0).iter().map(|&(t, w)| w * 2.0 * moll.psi(t * t)).sum::<f64>();
        assert_relative_eq!(b.eval(0.0), direct, max_relative = 1e-9);
    }

    #[test]
    fn mollified_matches_spectral_path() {
        for (d, s, eps) in [(1, 0.0, 0.2), (1, 0.0, 0.05), (2, 1.0, 0.2), (2, 0.0, 0.3), (3, 1.0, 0.25)] {
            let (_, ew) = setup(d, s);
            let mp = MollifiedPotential::new(&ew, eps).unwrap();
            let sp = mp.spectral();
            let kc = sp.cutoff_for(1e-9);
            for x in [vec![0.0; d], vec![0.013; d], vec![0.31; d], vec![0.5; d]] {
                let p = TorusPoint::new(x.clone());
                let (v, _) = sp.value(&p, kc, 1e-9).unwrap();
                let h = mp.value(&p).unwrap();
                assert!((v - h).abs() <= 1e-8 * (1.0 + v.abs()), "d={d} s={s} eps={eps} x={x:?}: {v} vs {h}");
            }
        }
    }

    #[test]
    fn mollified_approaches_potential_away_from_origin() {
        let (_, ew) = setup(2, 1.0);
        let x = TorusPoint::new(vec![0.3, 0.1]);
        let w = ew.value(&x).unwrap();
        let mut last = f64::INFINITY;
        for k in 3..=8 {
            let eps = 2f64.powi(-k);
            let gap = (MollifiedPotential::new(&ew, eps).unwrap().value(&x).unwrap() - w).abs();
            assert!(gap < last);
            last = gap;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn tiny_eps_is_finite_at_origin() {
        let (spec, ew) = setup(1, 0.0);
        let eps = 1e-10;
        let mp = MollifiedPotential::new(&ew, eps).unwrap();
        let v0 = mp.value_centered(&[0.0]);
        let a0 = spec.singular_coefficient().unwrap();
        assert!(v0.is_finite());
        assert!((v0 + a0 * eps.ln()).abs() < 10.0);
    }
}
