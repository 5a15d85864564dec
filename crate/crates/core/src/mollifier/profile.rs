use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::special::{gauss_legendre_on, radial_kernel, sphere_area, CubicTable};

pub const DEFAULT_RESOLUTION: usize = 1024;
/// Largest tabulated frequency of `φ̂`.
pub const HAT_RANGE: f64 = 64.0;
const HAT_STEP: f64 = 1.0 / 512.0;
const HAT_NODES: usize = 384;
const MOMENTS: usize = 28;

fn bump(r: f64) -> f64 {
    let t = 2.0 * r;
    if t >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

/// The bump mollifier `φ` on `B(0, 1/2)`, `ψ = φ * φ` on `B(0, 1)` and their
/// radial Fourier transforms, all normalized to unit mass.
#[derive(Debug)]
pub struct MollifierTable {
    dim: usize,
    norm: f64,
    resolution: usize,
    psi: CubicTable,
    phi_hat: CubicTable,
    envelope: Vec<f64>,
    moments: Vec<f64>,
}

impl MollifierTable {
    pub fn build(dim: usize, resolution: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Unsupported(format!("mollifier tables are implemented for d <= 3, got {dim}")));
        }
        if resolution < 256 {
            return Err(Error::Usage(format!("mollifier resolution must be at least 256, got {resolution}")));
        }
        let area = sphere_area(dim);
        let mass: f64 = gauss_legendre_on(200, 0.0, 0.5).iter().map(|&(r, w)| w * bump(r) * r.powi(dim as i32 - 1)).sum();
        let norm = 1.0 / (area * mass);

        let mut table = Self {
            dim,
            norm,
            resolution,
            psi: CubicTable::from_values(0.0, 1.0, vec![0.0; 4]),
            phi_hat: CubicTable::from_values(0.0, 1.0, vec![0.0; 4]),
            envelope: Vec::new(),
            moments: Vec::new(),
        };

        let step = 1.0 / resolution as f64;
        let psi_vals: Vec<f64> = (0..=resolution + 2).map(|i| table.psi_direct(i as f64 * step)).collect();
        table.psi = CubicTable::from_values(0.0, step, psi_vals);

        // φ̂(η) = 2 ∫_0^{1/2} cos(2πηt) P(t) dt with P the projection of φ onto a line
        let nodes: Vec<(f64, f64)> =
            gauss_legendre_on(HAT_NODES, 0.0, 0.5).into_iter().map(|(t, w)| (t, 2.0 * w * table.projection(t))).collect();
        let hat_count = (HAT_RANGE / HAT_STEP).round() as usize + 3;
        let hat: Vec<f64> = (0..hat_count)
            .map(|i| {
                let eta = i as f64 * HAT_STEP;
                nodes.iter().map(|&(t, w)| w * (2.0 * PI * eta * t).cos()).sum()
            })
            .collect();
        let mut envelope = vec![0.0; hat_count];
        let mut running = 0.0f64;
        for i in (0..hat_count).rev() {
            running = running.max(hat[i] * hat[i]);
            envelope[i] = running;
        }
        table.phi_hat = CubicTable::from_values(0.0, HAT_STEP, hat);
        table.envelope = envelope;

        let gl = gauss_legendre_on(240, 0.0, 1.0);
        let psi_gl: Vec<f64> = gl.iter().map(|&(r, _)| table.psi_direct(r)).collect();
        table.moments = (0..MOMENTS)
            .map(|j| area * gl.iter().zip(&psi_gl).map(|(&(r, w), p)| w * p * r.powi((2 * j + dim - 1) as i32)).sum::<f64>())
            .collect();

        table.validate(&gl, &psi_gl)?;
        Ok(table)
    }

    /// Process-wide table at the default resolution.
    pub fn shared(dim: usize) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<MollifierTable>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(t) = cache.lock().unwrap().get(&dim) {
            return Ok(t.clone());
        }
        let t = Arc::new(Self::build(dim, DEFAULT_RESOLUTION)?);
        cache.lock().unwrap().insert(dim, t.clone());
        Ok(t)
    }

    fn validate(&self, gl: &[(f64, f64)], psi_gl: &[f64]) -> Result<()> {
        let area = sphere_area(self.dim);
        let phi_mass: f64 =
            area * gauss_legendre_on(160, 0.0, 0.5).iter().map(|&(r, w)| w * self.phi(r) * r.powi(self.dim as i32 - 1)).sum::<f64>();
        if (phi_mass - 1.0).abs() > 1e-10 {
            return Err(Error::Construction(format!("∫φ = {phi_mass}")));
        }
        if (self.moments[0] - 1.0).abs() > 1e-10 {
            return Err(Error::Construction(format!("∫ψ = {}", self.moments[0])));
        }
        let vals = self.psi.values();
        if vals.iter().any(|&v| v < -1e-14) || vals.windows(2).any(|w| w[1] > w[0] + 1e-12) {
            return Err(Error::Construction("ψ is not nonnegative and radially nonincreasing".into()));
        }
        for &eta in &[0.0, 0.37, 1.0, 2.5, 6.0, 13.0] {
            let from_psi: f64 = area
                * gl.iter()
                    .zip(psi_gl)
                    .map(|(&(r, w), p)| w * p * radial_kernel(self.dim, 2.0 * PI * eta * r) * r.powi(self.dim as i32 - 1))
                    .sum::<f64>();
            let sq = self.psi_hat(eta);
            if (from_psi - sq).abs() > 1e-8 {
                return Err(Error::Construction(format!("ψ̂({eta}) = {from_psi} but φ̂² = {sq}")));
            }
        }
        Ok(())
    }

    /// `∫_{R^{d-1}} φ(√(t² + |z|²)) dz`.
    fn projection(&self, t: f64) -> f64 {
        let top = (0.25 - t * t).max(0.0).sqrt();
        match self.dim {
            1 => self.phi(t),
            2 => 2.0 * gauss_legendre_on(128, 0.0, top).iter().map(|&(z, w)| w * self.phi((t * t + z * z).sqrt())).sum::<f64>(),
            _ => 2.0 * PI * gauss_legendre_on(128, 0.0, top).iter().map(|&(z, w)| w * z * self.phi((t * t + z * z).sqrt())).sum::<f64>(),
        }
    }

    /// `ψ(u) = ∫ φ(y) φ(u e_1 - y) dy` by quadrature.
    fn psi_direct(&self, u: f64) -> f64 {
        if u >= 1.0 {
            return 0.0;
        }
        match self.dim {
            1 => gauss_legendre_on(160, u - 0.5, 0.5).iter().map(|&(y, w)| w * self.phi(y.abs()) * self.phi((u - y).abs())).sum(),
            2 => {
                let lo = (u - 0.5).max(0.0);
                gauss_legendre_on(128, lo, 0.5)
                    .iter()
                    .map(|&(rho, w)| {
                        let th = angle_limit(u, rho, 0.5);
                        if th <= 0.0 {
                            return 0.0;
                        }
                        let inner: f64 = gauss_legendre_on(96, 0.0, th)
                            .iter()
                            .map(|&(t, wt)| wt * self.phi((u * u + rho * rho - 2.0 * u * rho * t.cos()).max(0.0).sqrt()))
                            .sum();
                        w * rho * self.phi(rho) * 2.0 * inner
                    })
                    .sum()
            }
            _ => {
                let lo = (u - 0.5).max(0.0);
                gauss_legendre_on(128, lo, 0.5)
                    .iter()
                    .map(|&(rho, w)| {
                        let inner = if u < 1e-12 {
                            4.0 * PI * self.phi(rho)
                        } else {
                            let (a, b) = ((u - rho).abs(), (u + rho).min(0.5));
                            if b <= a {
                                return 0.0;
                            }
                            let g: f64 = gauss_legendre_on(64, a, b).iter().map(|&(q, wq)| wq * self.phi(q) * q).sum();
                            2.0 * PI * g / (u * rho)
                        };
                        w * rho * rho * self.phi(rho) * inner
                    })
                    .sum()
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Radial profile of `φ`, zero for `r >= 1/2`.
    pub fn phi(&self, r: f64) -> f64 {
        self.norm * bump(r)
    }

    /// `φ_ε(r) = ε^{-d} φ(r/ε)`.
    pub fn phi_eps(&self, r: f64, eps: f64) -> f64 {
        self.phi(r / eps) / eps.powi(self.dim as i32)
    }

    /// Radial profile of `ψ`, zero for `r >= 1`.
    pub fn psi(&self, r: f64) -> f64 {
        if r >= 1.0 {
            0.0
        } else {
            self.psi.eval(r).max(0.0)
        }
    }

    /// `φ̂(η)`; zero beyond the tabulated range.
    pub fn phi_hat(&self, eta: f64) -> f64 {
        let eta = eta.abs();
        if eta > HAT_RANGE {
            0.0
        } else {
            self.phi_hat.eval(eta)
        }
    }

    /// `ψ̂ = φ̂²`.
    pub fn psi_hat(&self, eta: f64) -> f64 {
        let p = self.phi_hat(eta);
        p * p
    }

    /// Nonincreasing majorant of `ψ̂` on `[η, ∞)`; beyond the table it
    /// continues with the `exp(-√(8πη))` decay of the bump transform.
    pub fn psi_hat_envelope(&self, eta: f64) -> f64 {
        let eta = eta.abs();
        if eta <= HAT_RANGE {
            let i = (eta / HAT_STEP).floor() as usize;
            self.envelope[i.min(self.envelope.len() - 1)] * 1.01 + 1e-300
        } else {
            let end = *self.envelope.last().unwrap() * 1.01;
            end * (-((8.0 * PI * eta).sqrt() - (8.0 * PI * HAT_RANGE).sqrt())).exp()
        }
    }

    /// `∫ ψ(y) |y|^{2j} dy`.
    pub fn moment(&self, j: usize) -> f64 {
        self.moments[j]
    }

    pub fn moment_count(&self) -> usize {
        self.moments.len()
    }
}

/// Largest angle `θ ∈ [0, π]` with `|u e_1 - ρ e^{iθ}| <= radius`.
pub(crate) fn angle_limit(u: f64, rho: f64, radius: f64) -> f64 {
    if u * rho == 0.0 {
        return if u.max(rho) < radius { PI } else { 0.0 };
    }
    let c = (u * u + rho * rho - radius * radius) / (2.0 * u * rho);
    if c <= -1.0 {
        PI
    } else if c >= 1.0 {
        0.0
    } else {
        c.acos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn tables_are_normalized_and_supported() {
        for d in 1..=3 {
            let t = MollifierTable::shared(d).unwrap();
            assert!((t.moment(0) - 1.0).abs() <= 1e-10);
            assert!((t.psi_hat(0.0) - 1.0).abs() <= 1e-10);
            assert_eq!(t.psi(1.0), 0.0);
            assert_eq!(t.psi(1.3), 0.0);
            assert_eq!(t.phi(0.5), 0.0);
            assert!(t.psi(0.0) > t.psi(0.5) && t.psi(0.5) > t.psi(0.9));
        }
    }

    #[test]
    fn psi_table_matches_direct_convolution_between_nodes() {
        for d in 1..=3 {
            let t = MollifierTable::shared(d).unwrap();
            for &u in &[0.0013, 0.21, 0.4987, 0.777, 0.95] {
                let direct = t.psi_direct(u);
                assert!((t.psi(u) - direct).abs() <= 1e-8 * t.psi(0.0), "d={d} u={u}");
            }
        }
    }

    #[test]
    fn one_dimensional_hat_is_the_cosine_transform() {
        let t = MollifierTable::shared(1).unwrap();
        let eta = 0.75;
        let direct: f64 = gauss_legendre_on(400, -0.5, 0.5).iter().map(|&(x, w)| w * t.phi(x.abs()) * (2.0 * PI * eta * x).cos()).sum();
        assert_relative_eq!(t.phi_hat(eta), direct, epsilon = 1e-12);
        assert!(t.psi_hat_envelope(70.0) < 1e-14);
        assert!(t.psi_hat_envelope(3.0) >= t.psi_hat(5.0));
    }

    #[test]
    fn rejects_unsupported_dimension_and_low_resolution() {
        assert!(matches!(MollifierTable::build(4, 512), Err(Error::Unsupported(_))));
        assert!(matches!(MollifierTable::build(2, 100), Err(Error::Usage(_))));
    }
}
