//! Points on the flat torus `[0,1)^d`, particle configurations and the
//! Fourier coefficients of their empirical measures.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduces a coordinate to `[0, 1)`.
#[inline]
pub fn wrap(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Reduces a coordinate difference to the representative in `[-1/2, 1/2)`.
#[inline]
pub fn min_image(dx: f64) -> f64 {
    let r = dx - (dx + 0.5).floor();
    if r >= 0.5 {
        r - 1.0
    } else {
        r
    }
}

/// Length of the minimal-image representative of `x - y`.
#[inline]
pub fn distance_raw(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| min_image(a - b).powi(2)).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    coords: Vec<f64>,
}

impl TorusPoint {
    pub fn new(coords: impl Into<Vec<f64>>) -> Self {
        let mut coords = coords.into();
        assert!(!coords.is_empty(), "a torus point needs at least one coordinate");
        coords.iter_mut().for_each(|c| *c = wrap(*c));
        Self { coords }
    }

    pub fn origin(d: usize) -> Self {
        Self::new(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// `self - other` as a torus point.
    pub fn sub(&self, other: &TorusPoint) -> Result<TorusPoint> {
        check_dims(self.dim(), other.dim())?;
        Ok(TorusPoint::new(self.coords.iter().zip(&other.coords).map(|(a, b)| a - b).collect::<Vec<_>>()))
    }

    pub fn neg(&self) -> TorusPoint {
        TorusPoint::new(self.coords.iter().map(|c| -c).collect::<Vec<_>>())
    }

    /// Minimal-image representative in `[-1/2, 1/2)^d`.
    pub fn centered(&self) -> Vec<f64> {
        self.coords.iter().map(|&c| min_image(c)).collect()
    }
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Usage(format!("dimension mismatch: {a} vs {b}")));
    }
    Ok(())
}

pub fn torus_distance(x: &TorusPoint, y: &TorusPoint) -> Result<f64> {
    check_dims(x.dim(), y.dim())?;
    Ok(distance_raw(&x.coords, &y.coords))
}

/// `N` points on `[0,1)^d`, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    dim: usize,
    coords: Vec<f64>,
}

impl Configuration {
    pub fn from_flat(dim: usize, mut coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Usage("dimension must be positive".into()));
        }
        if coords.is_empty() || coords.len() % dim != 0 {
            return Err(Error::Usage(format!(
                "{} coordinates do not form points of dimension {dim}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Usage("non-finite coordinate".into()));
        }
        coords.iter_mut().for_each(|c| *c = wrap(*c));
        Ok(Self { dim, coords })
    }

    pub fn from_points(points: &[TorusPoint]) -> Result<Self> {
        let dim = points.first().ok_or_else(|| Error::Usage("empty configuration".into()))?.dim();
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            check_dims(dim, p.dim())?;
            coords.extend_from_slice(p.coords());
        }
        Self::from_flat(dim, coords)
    }

    /// The `m^d` points `(j_1/m, ..., j_d/m)`.
    pub fn lattice(m: usize, dim: usize) -> Result<Self> {
        if m == 0 || dim == 0 {
            return Err(Error::Usage("lattice needs m >= 1 and d >= 1".into()));
        }
        let n = m.pow(dim as u32);
        let mut coords = Vec::with_capacity(n * dim);
        for idx in 0..n {
            let mut rest = idx;
            let mut p = vec![0.0; dim];
            // last axis varies fastest
            for c in p.iter_mut().rev() {
                *c = (rest % m) as f64 / m as f64;
                rest /= m;
            }
            coords.extend(p);
        }
        Self::from_flat(dim, coords)
    }

    /// `n` equally spaced points on the circle, starting at `offset`.
    pub fn equally_spaced(n: usize, offset: f64) -> Result<Self> {
        Self::from_flat(1, (0..n).map(|j| offset + j as f64 / n as f64).collect())
    }

    pub fn random<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> Result<Self> {
        Self::from_flat(dim, (0..n * dim).map(|_| rng.gen::<f64>()).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn torus_point(&self, i: usize) -> TorusPoint {
        TorusPoint::new(self.point(i).to_vec())
    }

    pub fn flat(&self) -> &[f64] {
        &self.coords
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Minimal-image displacement `x_i - x_j` written into `out`.
    #[inline]
    pub fn displacement(&self, i: usize, j: usize, out: &mut [f64]) {
        let (a, b) = (self.point(i), self.point(j));
        for k in 0..self.dim {
            out[k] = min_image(a[k] - b[k]);
        }
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        distance_raw(self.point(i), self.point(j))
    }

    pub fn translated(&self, shift: &[f64]) -> Result<Self> {
        check_dims(self.dim, shift.len())?;
        let coords = self.coords.chunks_exact(self.dim).flat_map(|p| p.iter().zip(shift).map(|(a, b)| a + b)).collect();
        Self::from_flat(self.dim, coords)
    }

    /// Configuration with point `i` removed.
    pub fn without(&self, i: usize) -> Result<Self> {
        let coords = self.points().enumerate().filter(|(j, _)| *j != i).flat_map(|(_, p)| p.iter().copied()).collect();
        Self::from_flat(self.dim, coords)
    }

    /// Smallest pairwise distance, `+inf` for a single point.
    pub fn min_separation(&self) -> f64 {
        let n = self.len();
        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                best = best.min(self.distance(i, j));
            }
        }
        best
    }

    /// Gauge-fixed copy: first point moved to the origin, points sorted
    /// lexicographically.
    pub fn canonicalized(&self) -> Self {
        let first = self.point(0).to_vec();
        let mut pts: Vec<Vec<f64>> = self.points().map(|p| p.iter().zip(&first).map(|(a, b)| wrap(a - b)).collect()).collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Self { dim: self.dim, coords: pts.concat() }
    }

    /// Text form: header `d N`, then one point per line.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.dim, self.len());
        for p in self.points() {
            let line: Vec<String> = p.iter().map(|c| format!("{c:.17e}")).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Parse("missing header".into()))?;
        let mut it = header.split_whitespace();
        let parse_usize = |t: Option<&str>| -> Result<usize> {
            t.ok_or_else(|| Error::Parse("short header".into()))?
                .parse()
                .map_err(|e| Error::Parse(format!("bad header: {e}")))
        };
        let dim = parse_usize(it.next())?;
        let n = parse_usize(it.next())?;
        let mut coords = Vec::with_capacity(dim * n);
        for (row, line) in lines.enumerate() {
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", row + 2))))
                .collect::<Result<_>>()?;
            if vals.len() != dim {
                return Err(Error::Parse(format!("line {}: expected {dim} coordinates", row + 2)));
            }
            coords.extend(vals);
        }
        if coords.len() != dim * n {
            return Err(Error::Parse(format!("expected {n} points, found {}", coords.len() / dim.max(1))));
        }
        Self::from_flat(dim, coords)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Calls `f` for every `k` in the box `|k|_∞ <= cutoff` of `Z^d`.
pub fn for_each_lattice_vector(dim: usize, cutoff: i64, mut f: impl FnMut(&[i64])) {
    let side = (2 * cutoff + 1) as usize;
    let total = side.pow(dim as u32);
    let mut k = vec![0i64; dim];
    for idx in 0..total {
        let mut rest = idx;
        for c in k.iter_mut() {
            *c = (rest % side) as i64 - cutoff;
            rest /= side;
        }
        f(&k);
    }
}

/// Truncated Fourier coefficients on the box `|k|_∞ <= cutoff`.
#[derive(Clone, Debug)]
pub struct SpectralMeasure {
    dim: usize,
    cutoff: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralMeasure {
    pub fn from_fn(dim: usize, cutoff: usize, mut f: impl FnMut(&[i64]) -> Complex64) -> Self {
        let mut coeffs = Vec::with_capacity((2 * cutoff + 1).pow(dim as u32));
        for_each_lattice_vector(dim, cutoff as i64, |k| coeffs.push(f(k)));
        Self { dim, cutoff, coeffs }
    }

    /// Coefficients of the uniform measure.
    pub fn uniform(dim: usize, cutoff: usize) -> Self {
        Self::from_fn(dim, cutoff, |k| if k.iter().all(|&c| c == 0) { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    fn index(&self, k: &[i64]) -> Option<usize> {
        let side = 2 * self.cutoff as i64 + 1;
        let mut idx = 0i64;
        let mut stride = 1i64;
        for &c in k {
            if c.abs() > self.cutoff as i64 {
                return None;
            }
            idx += (c + self.cutoff as i64) * stride;
            stride *= side;
        }
        Some(idx as usize)
    }

    /// Coefficient at `k`; zero outside the stored box.
    pub fn coeff(&self, k: &[i64]) -> Complex64 {
        self.index(k).map_or(Complex64::new(0.0, 0.0), |i| self.coeffs[i])
    }

    /// Visits `(k, coeff)` for every stored lattice vector.
    pub fn for_each(&self, mut f: impl FnMut(&[i64], Complex64)) {
        let mut i = 0;
        for_each_lattice_vector(self.dim, self.cutoff as i64, |k| {
            f(k, self.coeffs[i]);
            i += 1;
        });
    }

    /// Pointwise product with a radial multiplier `m(|k|)`.
    pub fn multiplied(&self, m: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        let mut i = 0;
        for_each_lattice_vector(self.dim, self.cutoff as i64, |k| {
            let norm = k.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
            out.coeffs[i] *= m(norm);
            i += 1;
        });
        out
    }
}

/// Per-axis phase tables `e^{-2πi k x_j}` for `k in -K..=K`.
fn axis_phases(x: f64, cutoff: usize) -> Vec<Complex64> {
    let base = Complex64::from_polar(1.0, -2.0 * PI * x);
    let mut out = vec![Complex64::new(1.0, 0.0); 2 * cutoff + 1];
    let mut p = Complex64::new(1.0, 0.0);
    for k in 1..=cutoff {
        // recompute periodically to stop error growth in long recurrences
        p = if k % 64 == 0 { Complex64::from_polar(1.0, -2.0 * PI * x * k as f64) } else { p * base };
        out[cutoff + k] = p;
        out[cutoff - k] = p.conj();
    }
    out
}

/// `ρ̂_N(k) = (1/N) Σ_i exp(-2πi k·x_i)` on the box `|k|_∞ <= cutoff`.
pub fn empirical_fourier(config: &Configuration, cutoff: usize) -> Result<SpectralMeasure> {
    if cutoff == 0 {
        return Err(Error::Usage("Fourier cutoff must be at least 1".into()));
    }
    let d = config.dim();
    let side = 2 * cutoff + 1;
    let total = side.pow(d as u32);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); total];
    let n = config.len() as f64;
    for p in config.points() {
        let tables: Vec<Vec<Complex64>> = p.iter().map(|&x| axis_phases(x, cutoff)).collect();
        for (idx, c) in coeffs.iter_mut().enumerate() {
            let mut rest = idx;
            let mut v = Complex64::new(1.0, 0.0);
            for t in &tables {
                v *= t[rest % side];
                rest /= side;
            }
            *c += v;
        }
    }
    coeffs.iter_mut().for_each(|c| *c /= n);
    let origin = (total - 1) / 2;
    coeffs[origin] = Complex64::new(1.0, 0.0);
    Ok(SpectralMeasure { dim: d, cutoff, coeffs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pt(c: &[f64]) -> TorusPoint {
        TorusPoint::new(c.to_vec())
    }

    #[test]
    fn distance_examples() {
        assert_relative_eq!(torus_distance(&pt(&[0.0]), &pt(&[0.75])).unwrap(), 0.25);
        assert_relative_eq!(torus_distance(&pt(&[0.0, 0.0]), &pt(&[0.5, 0.5])).unwrap(), 0.5f64.sqrt(), epsilon = 1e-15);
        assert_eq!(torus_distance(&pt(&[0.3]), &pt(&[0.3])).unwrap(), 0.0);
        assert!(matches!(torus_distance(&pt(&[0.3]), &pt(&[0.3, 0.1])), Err(Error::Usage(_))));
    }

    #[test]
    fn coordinates_are_reduced() {
        let p = pt(&[1.25, -0.25, 3.0]);
        assert_eq!(p.coords(), &[0.25, 0.75, 0.0]);
        assert!(pt(&[-1e-18]).coords()[0] < 1.0);
    }

    #[test]
    fn lattice_examples() {
        assert_eq!(Configuration::lattice(2, 1).unwrap().flat(), &[0.0, 0.5]);
        let l = Configuration::lattice(2, 2).unwrap();
        assert_eq!(l.len(), 4);
        assert_eq!(l.flat(), &[0.0, 0.0, 0.0, 0.5, 0.5, 0.0, 0.5, 0.5]);
        let l3 = Configuration::lattice(3, 1).unwrap();
        assert_relative_eq!(l3.point(1)[0], 1.0 / 3.0);
        assert_relative_eq!(l3.point(2)[0], 2.0 / 3.0);
    }

    #[test]
    fn fourier_of_single_atom_at_origin() {
        let c = Configuration::from_flat(2, vec![0.0, 0.0]).unwrap();
        let mu = empirical_fourier(&c, 3).unwrap();
        mu.for_each(|_, v| assert_relative_eq!(v.re, 1.0, epsilon = 1e-15));
    }

    #[test]
    fn fourier_of_equally_spaced_points_matches_geometric_sums() {
        // Σ_j e^{-2πi k j/N} = N if N | k, else 0
        let n = 7;
        let c = Configuration::equally_spaced(n, 0.0).unwrap();
        let mu = empirical_fourier(&c, 10).unwrap();
        for k in -10i64..=10 {
            let expected = if k % n as i64 == 0 { 1.0 } else { 0.0 };
            let v = mu.coeff(&[k]);
            assert_relative_eq!(v.re, expected, epsilon = 1e-13);
            assert_relative_eq!(v.im, 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn text_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = Configuration::random(9, 3, &mut rng).unwrap();
        let back = Configuration::from_text(&c.to_text()).unwrap();
        for (a, b) in c.flat().iter().zip(back.flat()) {
            assert!((a - b).abs() <= 1e-15);
        }
        assert!(Configuration::from_text("2 2\n0.1 0.2\n").is_err());
    }

    proptest! {
        #[test]
        fn fourier_translation_covariance(seed in 0u64..1000, v0 in 0.0f64..1.0, v1 in 0.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = Configuration::random(6, 2, &mut rng).unwrap();
            let shifted = c.translated(&[v0, v1]).unwrap();
            let a = empirical_fourier(&c, 4).unwrap();
            let b = empirical_fourier(&shifted, 4).unwrap();
            let mut worst = 0.0f64;
            a.for_each(|k, ca| {
                let phase = Complex64::from_polar(1.0, -2.0 * PI * (k[0] as f64 * v0 + k[1] as f64 * v1));
                worst = worst.max((b.coeff(k) - ca * phase).norm());
                // Hermitian symmetry and normalization
                let neg: Vec<i64> = k.iter().map(|c| -c).collect();
                assert!((a.coeff(&neg) - ca.conj()).norm() <= 1e-12);
                assert!(ca.norm() <= 1.0 + 1e-12);
            });
            prop_assert!(worst <= 1e-12);
            prop_assert_eq!(a.coeff(&[0, 0]), Complex64::new(1.0, 0.0));
        }

        #[test]
        fn distance_is_shift_invariant_and_bounded(x in proptest::collection::vec(0.0f64..1.0, 3),
                                                   y in proptest::collection::vec(0.0f64..1.0, 3),
                                                   v in proptest::collection::vec(-2.0f64..2.0, 3)) {
            let d0 = distance_raw(&x, &y);
            let xs: Vec<f64> = x.iter().zip(&v).map(|(a, b)| wrap(a + b)).collect();
            let ys: Vec<f64> = y.iter().zip(&v).map(|(a, b)| wrap(a + b)).collect();
            prop_assert!((distance_raw(&xs, &ys) - d0).abs() <= 1e-12);
            prop_assert!(d0 <= 3f64.sqrt() / 2.0 + 1e-15);
            prop_assert!((distance_raw(&y, &x) - d0).abs() <= 1e-15);
        }
    }
}
