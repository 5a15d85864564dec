use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{PairPotential, RieszSpec};
use crate::error::{Error, Result};
use crate::special::{ein, gamma, gamma_q, lower_gamma_entire, sphere_area, upper_gamma, HermiteTable, EULER_GAMMA};
use crate::torus::{for_each_lattice_vector, min_image, TorusPoint};

const DEFAULT_SPLIT: f64 = 0.5;
const TABLE_STEP: f64 = 0.004;

/// Truncation parameters of the Ewald split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EwaldParams {
    /// Split point `α` of the heat-kernel integral.
    pub split: f64,
    /// Real-space image radius.
    pub real_cutoff: usize,
    /// Fourier radius.
    pub fourier_cutoff: usize,
    pub tol: f64,
}

impl EwaldParams {
    pub fn for_tolerance(spec: &RieszSpec, tol: f64) -> Result<Self> {
        Self::with_split(spec, DEFAULT_SPLIT, tol)
    }

    pub fn with_split(spec: &RieszSpec, split: f64, tol: f64) -> Result<Self> {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Error::Usage(format!("tolerance must lie in (0, 1), got {tol}")));
        }
        if !(split > 0.0 && split.is_finite()) {
            return Err(Error::Usage(format!("split must be positive, got {split}")));
        }
        let zc = -tol.ln() + 5.0;
        let params = Self {
            split,
            real_cutoff: (zc * split / PI).sqrt().ceil() as usize,
            fourier_cutoff: (zc / (PI * split)).sqrt().ceil() as usize,
            tol,
        };
        params.validate(spec)?;
        Ok(params)
    }

    /// Magnitude of the real-space shell at radius `r`.
    fn real_tail(&self, spec: &RieszSpec, r: f64) -> f64 {
        if r <= 0.0 {
            return f64::INFINITY;
        }
        let d = spec.dim() as f64;
        let a = spec.s() / 2.0;
        let nu = (d - spec.s()) / 2.0;
        let pref = PI.powf(nu) / gamma(nu);
        let z = PI * r * r / self.split;
        pref * 2.0 * sphere_area(spec.dim()) * (r + 1.0).powf(d - 1.0) * ((PI * r * r).powf(-a) * upper_gamma(a, z)).abs()
    }

    /// Smallest image radius, in steps of 1/16 up to `real_cutoff`, whose
    /// shell estimate is below the tolerance.
    pub fn image_radius(&self, spec: &RieszSpec) -> f64 {
        let top = self.real_cutoff as f64;
        (1..=16 * self.real_cutoff)
            .map(|i| i as f64 / 16.0)
            .find(|&r| self.real_tail(spec, r) <= self.tol)
            .unwrap_or(top)
    }

    fn wave_tail(&self, spec: &RieszSpec, k: f64) -> f64 {
        if k <= 0.0 {
            return f64::INFINITY;
        }
        let d = spec.dim() as f64;
        let nu = (d - spec.s()) / 2.0;
        2.0 * sphere_area(spec.dim()) * (k + 1.0).powf(d - 1.0) * k.powf(-2.0 * nu) * gamma_q(nu, PI * self.split * k * k)
    }

    /// Smallest Fourier radius, in steps of 1/16 up to `fourier_cutoff`, whose
    /// shell estimate is below the tolerance.
    pub fn wave_radius(&self, spec: &RieszSpec) -> f64 {
        (1..=16 * self.fourier_cutoff)
            .map(|i| i as f64 / 16.0)
            .find(|&k| self.wave_tail(spec, k) <= self.tol)
            .unwrap_or(self.fourier_cutoff as f64)
    }

    /// Magnitude of the first omitted real-space and Fourier shells.
    pub fn tail_estimates(&self, spec: &RieszSpec) -> (f64, f64) {
        (self.real_tail(spec, self.real_cutoff as f64), self.wave_tail(spec, self.fourier_cutoff as f64))
    }

    pub fn validate(&self, spec: &RieszSpec) -> Result<()> {
        let (real, fourier) = self.tail_estimates(spec);
        if real > self.tol || fourier > self.tol {
            return Err(Error::Accuracy(format!(
                "Ewald tails (real {real:.3e}, Fourier {fourier:.3e}) exceed tolerance {:.3e}",
                self.tol
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum KernelMode {
    /// `f = Γ(a)(πr²)^{-a} + T(z)`.
    Power,
    /// `f = -ln(πr²) + T(z)`.
    Log,
    /// Negative integer `a`; evaluated straight from `Γ(a, z)`.
    Direct,
}

/// Real-space image kernel `f(r) = (πr²)^{-a} Γ(a, πr²/α)`, written as a
/// singular closed form plus an entire function `T(z)` of `z = πr²/α`.
#[derive(Clone, Debug)]
pub(crate) struct RealKernel {
    a: f64,
    alpha: f64,
    mode: KernelMode,
    sing_coef: f64,
    /// `2a` when it is a small integer, for a `powf`-free `r2^{-a}`.
    twice_a: Option<i32>,
    t: Option<(HermiteTable, HermiteTable)>,
}

impl RealKernel {
    fn new(s: f64, alpha: f64, z_max: f64) -> Self {
        let a = s / 2.0;
        let mode = if a == 0.0 {
            KernelMode::Log
        } else if a < 0.0 && a.fract() == 0.0 {
            KernelMode::Direct
        } else {
            KernelMode::Power
        };
        let sing_coef = if mode == KernelMode::Power { gamma(a) * PI.powf(-a) } else { 0.0 };
        let twice_a = ((2.0 * a).fract() == 0.0 && (2.0 * a).abs() <= 16.0).then_some((2.0 * a) as i32);
        let mut kernel = Self { a, alpha, mode, sing_coef, twice_a, t: None };
        if mode != KernelMode::Direct {
            let nodes = (z_max / TABLE_STEP).ceil() as usize + 2;
            let mut t0 = Vec::with_capacity(nodes);
            let mut t1 = Vec::with_capacity(nodes);
            let mut t2 = Vec::with_capacity(nodes);
            for i in 0..nodes {
                let (v, d1, d2) = kernel.smooth_exact(i as f64 * TABLE_STEP);
                t0.push(v);
                t1.push(d1);
                t2.push(d2);
            }
            kernel.t = Some((
                HermiteTable::from_samples(0.0, TABLE_STEP, t0, t1.clone()),
                HermiteTable::from_samples(0.0, TABLE_STEP, t1, t2),
            ));
        }
        kernel
    }

    fn smooth_exact(&self, z: f64) -> (f64, f64, f64) {
        match self.mode {
            KernelMode::Log => {
                let (e, e1, e2) = ein(z);
                (-EULER_GAMMA + self.alpha.ln() + e, e1, e2)
            }
            _ => {
                let c = -self.alpha.powf(-self.a);
                let (f, f1, f2) = lower_gamma_entire(self.a, z);
                (c * f, c * f1, c * f2)
            }
        }
    }

    /// `T(z)`.
    pub(crate) fn smooth(&self, z: f64) -> f64 {
        match &self.t {
            Some((t, _)) if z <= t.end() => t.eval(z),
            _ => self.smooth_exact(z).0,
        }
    }

    /// `T'(z)`.
    pub(crate) fn smooth_deriv(&self, z: f64) -> f64 {
        match &self.t {
            Some((_, dt)) if z <= dt.end() => dt.eval(z),
            _ => self.smooth_exact(z).1,
        }
    }

    pub(crate) fn alpha(&self) -> f64 {
        self.alpha
    }

    pub(crate) fn is_direct(&self) -> bool {
        self.mode == KernelMode::Direct
    }

    /// `r2^{-a}`.
    #[inline]
    fn inv_pow(&self, r2: f64) -> f64 {
        match self.twice_a {
            Some(m) if m % 2 == 0 => r2.powi(-m / 2),
            Some(m) => r2.powi(-(m - 1) / 2) / r2.sqrt(),
            None => r2.powf(-self.a),
        }
    }

    /// `f(r)`; `+inf` at `r = 0` when `s >= 0`.
    pub(crate) fn value(&self, r2: f64) -> f64 {
        if r2 == 0.0 {
            return if self.a < 0.0 { -self.alpha.powf(-self.a) / self.a } else { f64::INFINITY };
        }
        let z = PI * r2 / self.alpha;
        match self.mode {
            KernelMode::Power => self.sing_coef * self.inv_pow(r2) + self.smooth(z),
            KernelMode::Log => -(PI * r2).ln() + self.smooth(z),
            KernelMode::Direct => (PI * r2).powf(-self.a) * upper_gamma(self.a, z),
        }
    }

    /// `f'(r) / r`, for `r > 0`.
    pub(crate) fn deriv_over_r(&self, r2: f64) -> f64 {
        let z = PI * r2 / self.alpha;
        match self.mode {
            KernelMode::Power => {
                -2.0 * self.a * self.sing_coef * self.inv_pow(r2) / r2 + self.smooth_deriv(z) * 2.0 * PI / self.alpha
            }
            KernelMode::Log => -2.0 / r2 + self.smooth_deriv(z) * 2.0 * PI / self.alpha,
            KernelMode::Direct => {
                (-2.0 * self.a * self.value(r2) - 2.0 * self.alpha.powf(-self.a) * (-z).exp()) / r2
            }
        }
    }
}

/// Prepared evaluator of `W_s` and `∇W_s` by Ewald splitting:
/// `W = C [Σ_n f(|x+n|) - α^ν/ν] + Σ_{k≠0} |k|^{-2ν} Q(ν, πα|k|²) cos 2πk·x`
/// with `ν = (d-s)/2`, `C = π^ν/Γ(ν)`.
#[derive(Clone, Debug)]
pub struct Ewald {
    spec: RieszSpec,
    params: EwaldParams,
    pref: f64,
    constant: f64,
    radius2: f64,
    kernel: RealKernel,
    images: Vec<f64>,
    wave_k: Vec<i64>,
    wave_w: Vec<f64>,
}

impl Ewald {
    pub fn new(spec: &RieszSpec, params: &EwaldParams) -> Result<Self> {
        params.validate(spec)?;
        let d = spec.dim();
        let nu = (d as f64 - spec.s()) / 2.0;
        let pref = PI.powf(nu) / gamma(nu);
        let alpha = params.split;
        let r = params.image_radius(spec);
        let kernel = RealKernel::new(spec.s(), alpha, PI * (r + 1.0).powi(2) / alpha);

        let box_r = (r + 0.5).ceil() as i64;
        let mut images = Vec::new();
        for_each_lattice_vector(d, box_r, |n| {
            let gap: f64 = n.iter().map(|&c| ((c.abs() as f64) - 0.5).max(0.0).powi(2)).sum();
            if gap <= r * r {
                images.extend(n.iter().map(|&c| c as f64));
            }
        });

        let kc = params.fourier_cutoff as i64;
        let kr = params.wave_radius(spec);
        let mut wave_k = Vec::new();
        let mut wave_w = Vec::new();
        for_each_lattice_vector(d, kc, |k| {
            let k2: i64 = k.iter().map(|c| c * c).sum();
            let first = k.iter().copied().find(|&c| c != 0);
            if k2 == 0 || k2 as f64 > kr * kr || first.unwrap_or(0) < 0 {
                return;
            }
            let k2 = k2 as f64;
            wave_k.extend_from_slice(k);
            wave_w.push(2.0 * k2.powf(-nu) * gamma_q(nu, PI * alpha * k2));
        });

        Ok(Self {
            spec: spec.clone(),
            params: params.clone(),
            pref,
            constant: -pref * alpha.powf(nu) / nu,
            radius2: r * r,
            kernel,
            images,
            wave_k,
            wave_w,
        })
    }

    pub fn for_tolerance(spec: &RieszSpec, tol: f64) -> Result<Self> {
        Self::new(spec, &EwaldParams::for_tolerance(spec, tol)?)
    }

    pub fn spec(&self) -> &RieszSpec {
        &self.spec
    }

    pub fn params(&self) -> &EwaldParams {
        &self.params
    }

    pub(crate) fn kernel(&self) -> &RealKernel {
        &self.kernel
    }

    pub(crate) fn prefactor(&self) -> f64 {
        self.pref
    }

    pub(crate) fn constant(&self) -> f64 {
        self.constant
    }

    pub(crate) fn real_radius(&self) -> f64 {
        self.radius2.sqrt()
    }

    pub(crate) fn images(&self) -> impl Iterator<Item = &[f64]> {
        self.images.chunks_exact(self.spec.dim())
    }

    /// Visits the half-space wave vectors with weights `2|k|^{-2ν}Q(ν, πα|k|²)`.
    pub(crate) fn waves(&self) -> impl Iterator<Item = (&[i64], f64)> {
        self.wave_k.chunks_exact(self.spec.dim()).zip(self.wave_w.iter().copied())
    }

    fn check(&self, x: &TorusPoint) -> Result<Vec<f64>> {
        if x.dim() != self.spec.dim() {
            return Err(Error::Usage(format!("point has dimension {}, potential {}", x.dim(), self.spec.dim())));
        }
        let c = x.centered();
        if self.spec.s() >= 0.0 && c.iter().all(|&v| v == 0.0) {
            return Err(Error::Singular { s: self.spec.s() });
        }
        Ok(c)
    }

    pub fn value(&self, x: &TorusPoint) -> Result<f64> {
        let c = self.check(x)?;
        Ok(self.value_centered(&c))
    }

    pub fn gradient(&self, x: &TorusPoint) -> Result<Vec<f64>> {
        let c = self.check(x)?;
        let mut g = vec![0.0; c.len()];
        self.gradient_centered(&c, &mut g);
        Ok(g)
    }

    /// `W(x) - a_s|x|^{-s}` (or `W(x) + a_0 ln|x|`), continuous at the origin.
    pub fn regular_part(&self, x: &TorusPoint) -> Result<f64> {
        self.spec.singular_coefficient()?;
        let c = x.centered();
        let mut real = 0.0;
        for n in self.images() {
            let r2: f64 = c.iter().zip(n).map(|(a, b)| (a + b).powi(2)).sum();
            if r2 > self.radius2 {
                continue;
            }
            if n.iter().all(|&v| v == 0.0) {
                let z = PI * r2 / self.kernel.alpha;
                real += self.kernel.smooth(z) - if self.spec.is_log() { PI.ln() } else { 0.0 };
            } else {
                real += self.kernel.value(r2);
            }
        }
        Ok(self.pref * real + self.constant + self.fourier(&c, None))
    }

    /// `W` at a displacement already reduced to `[-1/2, 1/2)^d`.
    pub fn value_centered(&self, x: &[f64]) -> f64 {
        let mut real = 0.0;
        for n in self.images() {
            let r2: f64 = x.iter().zip(n).map(|(a, b)| (a + b).powi(2)).sum();
            if r2 <= self.radius2 {
                real += self.kernel.value(r2);
            }
        }
        if real.is_infinite() {
            return real;
        }
        self.pref * real + self.constant + self.fourier(x, None)
    }

    /// `∇W` at a reduced displacement; the self image is skipped.
    pub fn gradient_centered(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|g| *g = 0.0);
        for n in self.images() {
            let r2: f64 = x.iter().zip(n).map(|(a, b)| (a + b).powi(2)).sum();
            if r2 == 0.0 || r2 > self.radius2 {
                continue;
            }
            let f = self.pref * self.kernel.deriv_over_r(r2);
            for j in 0..x.len() {
                out[j] += f * (x[j] + n[j]);
            }
        }
        self.fourier(x, Some(out));
    }

    /// Fourier part; adds its gradient into `grad` when given.
    fn fourier(&self, x: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let d = x.len();
        let kc = self.params.fourier_cutoff;
        let side = 2 * kc + 1;
        let mut phases = vec![Complex64::new(1.0, 0.0); d * side];
        for j in 0..d {
            let base = Complex64::from_polar(1.0, 2.0 * PI * x[j]);
            let row = &mut phases[j * side..(j + 1) * side];
            let mut p = Complex64::new(1.0, 0.0);
            for m in 1..=kc {
                p *= base;
                row[kc + m] = p;
                row[kc - m] = p.conj();
            }
        }
        let mut value = 0.0;
        for (k, w) in self.waves() {
            let mut e = phases[(k[0] + kc as i64) as usize];
            for j in 1..d {
                e *= phases[j * side + (k[j] + kc as i64) as usize];
            }
            value += w * e.re;
            if let Some(g) = grad.as_deref_mut() {
                for j in 0..d {
                    g[j] -= w * 2.0 * PI * k[j] as f64 * e.im;
                }
            }
        }
        value
    }
}

impl PairPotential for Ewald {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn value_at(&self, dx: &[f64]) -> f64 {
        let c: Vec<f64> = dx.iter().map(|&v| min_image(v)).collect();
        self.value_centered(&c)
    }
}

/// `Σ_{0 < |k|_∞ <= K} |k|^{s-d} cos 2πk·x`; converges absolutely only for `s < 0`.
pub fn direct_fourier_sum(spec: &RieszSpec, x: &TorusPoint, cutoff: usize) -> f64 {
    let c = x.coords();
    let e = (spec.s() - spec.dim() as f64) / 2.0;
    let mut total = crate::sum::CompensatedSum::new();
    for_each_lattice_vector(spec.dim(), cutoff as i64, |k| {
        let k2: i64 = k.iter().map(|v| v * v).sum();
        if k2 > 0 {
            let phase: f64 = k.iter().zip(c).map(|(&kj, &xj)| kj as f64 * xj).sum();
            total.add((k2 as f64).powf(e) * (2.0 * PI * phase).cos());
        }
    });
    total.value()
}
