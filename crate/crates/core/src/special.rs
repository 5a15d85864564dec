//! Special functions and quadrature rules used by the lattice sums.
//!
//! The complete gamma function comes from `statrs`; everything that depends
//! on the sign conventions of the Ewald split (incomplete gamma for negative
//! orders, the entire parts `Φ` and `Ein`) lives here.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

pub use statrs::function::gamma::{gamma, ln_gamma};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const SERIES_SWITCH: f64 = 1.5;
const MAX_ITER: usize = 2000;

/// Surface area of the unit sphere `S^{d-1}` in `R^d`.
pub fn sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

/// Regularized lower incomplete gamma `P(a, z)` for `a > 0`, `z >= 0`.
pub fn gamma_p(a: f64, z: f64) -> f64 {
    assert!(a > 0.0 && z >= 0.0);
    if z == 0.0 {
        return 0.0;
    }
    if z < a + 1.0 {
        gamma_p_series(a, z)
    } else {
        1.0 - gamma_q_cf(a, z)
    }
}

/// Regularized upper incomplete gamma `Q(a, z)` for `a > 0`, `z >= 0`.
pub fn gamma_q(a: f64, z: f64) -> f64 {
    assert!(a > 0.0 && z >= 0.0);
    if z == 0.0 {
        return 1.0;
    }
    if z < a + 1.0 {
        1.0 - gamma_p_series(a, z)
    } else {
        gamma_q_cf(a, z)
    }
}

fn gamma_p_series(a: f64, z: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= z / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    (a * z.ln() - z - ln_gamma(a)).exp() * sum
}

fn gamma_q_cf(a: f64, z: f64) -> f64 {
    (a * z.ln() - z - ln_gamma(a)).exp() * legendre_cf(a, z)
}

/// Continued fraction `Γ(a, z) e^{z} z^{-a}`, valid for every real `a` and `z > 0`.
/// Converges quickly once `z` exceeds about `max(a, 0) + 1`.
pub fn legendre_cf(a: f64, z: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = z + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Upper incomplete gamma `Γ(a, z)` for real `a` and `z > 0`.
pub fn upper_gamma(a: f64, z: f64) -> f64 {
    assert!(z > 0.0);
    if a == 0.0 {
        return exp_integral_e1(z);
    }
    if z >= SERIES_SWITCH.max(a + 1.0) {
        (-z + a * z.ln()).exp() * legendre_cf(a, z)
    } else if a < 0.0 {
        // Γ(a, z) = (Γ(a+1, z) - z^a e^{-z}) / a
        (upper_gamma(a + 1.0, z) - (a * z.ln() - z).exp()) / a
    } else {
        let (phi, _, _) = lower_gamma_entire(a, z);
        gamma(a) - z.powf(a) * phi
    }
}

/// Exponential integral `E_1(z)`, `z > 0`.
pub fn exp_integral_e1(z: f64) -> f64 {
    assert!(z > 0.0);
    if z >= SERIES_SWITCH {
        (-z).exp() * legendre_cf(0.0, z)
    } else {
        -EULER_GAMMA - z.ln() + ein(z).0
    }
}

/// `Φ(z) = z^{-a} γ(a, z) = Σ (-z)^n / (n! (a+n))` and its first two
/// derivatives. Entire in `z` for `a` not a non-positive integer.
pub fn lower_gamma_entire(a: f64, z: f64) -> (f64, f64, f64) {
    debug_assert!(a != 0.0 && !(a < 0.0 && a.fract() == 0.0));
    if z <= SERIES_SWITCH {
        let mut f = 0.0;
        let mut f1 = 0.0;
        let mut f2 = 0.0;
        // p = (-z)^n / n!
        let mut p = 1.0;
        for n in 0..MAX_ITER {
            let nf = n as f64;
            f += p / (a + nf);
            let next = p * (-z) / (nf + 1.0);
            f1 -= p / (a + nf + 1.0);
            f2 += p / (a + nf + 2.0);
            if p.abs() < 1e-18 && n > 4 {
                break;
            }
            p = next;
        }
        (f, f1, f2)
    } else {
        let e = (-z).exp();
        let f = z.powf(-a) * gamma(a) - e * legendre_cf(a, z);
        let f1 = (e - a * f) / z;
        let f2 = (-(a + 1.0) * f1 - e) / z;
        (f, f1, f2)
    }
}

/// `Ein(z) = Σ_{n≥1} (-1)^{n+1} z^n / (n n!) = E_1(z) + γ + ln z` and its
/// first two derivatives.
pub fn ein(z: f64) -> (f64, f64, f64) {
    if z <= SERIES_SWITCH {
        let mut f = 0.0;
        let mut f1 = 0.0;
        let mut f2 = 0.0;
        // p = (-1)^{n+1} z^{n-1} / n!, starting at n = 1
        let mut p = 1.0;
        for n in 1..MAX_ITER {
            let nf = n as f64;
            f += p * z / nf;
            f1 += p;
            // Ein'' = Σ_{n≥2} (-1)^{n+1} (n-1) z^{n-2} / n!
            let next = -p * z / (nf + 1.0);
            f2 += -p / (nf + 1.0) * nf;
            if p.abs() < 1e-18 && n > 4 {
                break;
            }
            p = next;
        }
        (f, f1, f2)
    } else {
        let e = (-z).exp();
        let f = e * legendre_cf(0.0, z) + EULER_GAMMA + z.ln();
        let f1 = (1.0 - e) / z;
        let f2 = (e * (1.0 + z) - 1.0) / (z * z);
        (f, f1, f2)
    }
}

/// Bessel function `J_0(x)` for `x >= 0`.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x < 8.0 {
        let q = -0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        for m in 1..60 {
            let mf = m as f64;
            term *= q / (mf * mf);
            sum += term;
            if term.abs() < 1e-18 {
                break;
            }
        }
        sum
    } else if x < 30.0 {
        // J0(x) = (1/π) ∫_0^π cos(x sin θ) dθ; trapezoid is spectrally accurate.
        let n = 64usize;
        let h = PI / n as f64;
        let mut s = 0.5 * (1.0 + 1.0);
        for j in 1..n {
            s += (x * (j as f64 * h).sin()).cos();
        }
        s / n as f64
    } else {
        let chi = x - PI / 4.0;
        let (mut p, mut q) = (0.0, 0.0);
        let mut t = 1.0f64;
        for k in 0..40usize {
            if k > 0 {
                let m = (2 * k - 1) as f64;
                let next = t * (-(m * m)) / (k as f64 * 8.0 * x);
                if next.abs() > t.abs() {
                    break;
                }
                t = next;
            }
            let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            if k % 2 == 0 {
                p += sign * t;
            } else {
                q += sign * t;
            }
            if t.abs() < 1e-17 {
                break;
            }
        }
        (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
    }
}

/// Radial Fourier kernel: `∫_{S^{d-1}} e^{i t ω_1} dω / |S^{d-1}|`.
pub fn radial_kernel(d: usize, t: f64) -> f64 {
    match d {
        1 => t.cos(),
        2 => bessel_j0(t),
        3 => {
            if t.abs() < 1e-4 {
                1.0 - t * t / 6.0 + t.powi(4) / 120.0
            } else {
                t.sin() / t
            }
        }
        _ => panic!("radial kernel implemented for d <= 3"),
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j as f64 + 1.0) * z * p2 - j as f64 * p3) / (j as f64 + 1.0);
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Process-wide cache of Gauss–Legendre rules on `[-1, 1]`.
pub fn gauss_rule(n: usize) -> Arc<(Vec<f64>, Vec<f64>)> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard.entry(n).or_insert_with(|| Arc::new(gauss_legendre(n))).clone()
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let rule = gauss_rule(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    rule.0.iter().zip(&rule.1).map(|(&xi, &wi)| (mid + half * xi, half * wi)).collect()
}

/// Tanh–sinh rule on `[a, b]`; tolerates integrable endpoint singularities.
pub fn tanh_sinh_on(level: u32, a: f64, b: f64) -> Vec<(f64, f64)> {
    let h = 1.0 / (1u64 << level) as f64;
    let half = 0.5 * (b - a);
    let mut out = Vec::new();
    let kmax = (4.0 / h) as i64;
    for k in -kmax..=kmax {
        let t = k as f64 * h;
        let u = 0.5 * PI * t.sinh();
        let x = u.tanh();
        let w = 0.5 * PI * t.cosh() / (u.cosh() * u.cosh());
        if w < 1e-300 {
            continue;
        }
        // distance to the nearer endpoint, computed without cancellation
        let one_minus = 1.0 / (u.exp() * u.cosh());
        let one_plus = 1.0 / ((-u).exp() * u.cosh());
        let node = if x > 0.0 { b - half * one_minus } else { a + half * one_plus };
        if node <= a || node >= b {
            continue;
        }
        out.push((node, h * half * w));
    }
    out
}

/// Uniform-grid table with cubic Hermite interpolation from values and
/// first derivatives.
#[derive(Clone, Debug)]
pub struct HermiteTable {
    start: f64,
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl HermiteTable {
    pub fn build(start: f64, end: f64, nodes: usize, f: impl Fn(f64) -> (f64, f64)) -> Self {
        assert!(nodes >= 2 && end > start);
        let step = (end - start) / (nodes - 1) as f64;
        let (values, slopes) = (0..nodes).map(|i| f(start + i as f64 * step)).unzip();
        Self { start, step, values, slopes }
    }

    pub fn from_samples(start: f64, step: f64, values: Vec<f64>, slopes: Vec<f64>) -> Self {
        assert!(values.len() >= 2 && values.len() == slopes.len() && step > 0.0);
        Self { start, step, values, slopes }
    }

    pub fn end(&self) -> f64 {
        self.start + self.step * (self.values.len() - 1) as f64
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = ((x - self.start) / self.step).max(0.0);
        let i = (t as usize).min(self.values.len() - 2);
        let u = t - i as f64;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * self.step, self.slopes[i + 1] * self.step);
        let u2 = u * u;
        let u3 = u2 * u;
        (2.0 * u3 - 3.0 * u2 + 1.0) * y0
            + (u3 - 2.0 * u2 + u) * m0
            + (-2.0 * u3 + 3.0 * u2) * y1
            + (u3 - u2) * m1
    }
}

/// Uniform-grid table with four-point Lagrange interpolation from values only.
#[derive(Clone, Debug)]
pub struct CubicTable {
    start: f64,
    step: f64,
    values: Vec<f64>,
}

impl CubicTable {
    pub fn from_values(start: f64, step: f64, values: Vec<f64>) -> Self {
        assert!(values.len() >= 4);
        Self { start, step, values }
    }

    pub fn build(start: f64, end: f64, nodes: usize, f: impl Fn(f64) -> f64) -> Self {
        let step = (end - start) / (nodes - 1) as f64;
        let values = (0..nodes).map(|i| f(start + i as f64 * step)).collect();
        Self::from_values(start, step, values)
    }

    pub fn end(&self) -> f64 {
        self.start + self.step * (self.values.len() - 1) as f64
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let t = ((x - self.start) / self.step).max(0.0);
        let i = (t as usize).clamp(1, n - 3);
        let u = t - i as f64;
        let (y0, y1, y2, y3) = (self.values[i - 1], self.values[i], self.values[i + 1], self.values[i + 2]);
        // Lagrange basis on nodes -1, 0, 1, 2
        let l0 = -u * (u - 1.0) * (u - 2.0) / 6.0;
        let l1 = (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0;
        let l2 = -(u + 1.0) * u * (u - 2.0) / 2.0;
        let l3 = (u + 1.0) * u * (u - 1.0) / 6.0;
        l0 * y0 + l1 * y1 + l2 * y2 + l3 * y3
    }
}
