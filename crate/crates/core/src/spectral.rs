//! Periodic grids, discrete Fourier transforms, spectral differentiation and
//! two-thirds dealiasing.
//!
//! Normalization: the forward transform divides by the total point count, so
//! the zero-mode coefficient is the spatial mean. With that convention the
//! continuum L² norm over the box is recovered as
//! `‖f‖² = (L/N)^d Σ_x |f(x)|² = L^d Σ_k |f̂_k|²`.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(n, direction))
}

/// Uniform periodic grid on the box `[0, L)^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicGrid {
    dim: usize,
    n: usize,
    length: f64,
}

impl PeriodicGrid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per dimension must be a power of two >= 8, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("box length must be positive, got {length}")));
        }
        Ok(Self { dim, n, length })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Total number of grid points `N^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// Smallest nonzero wavenumber `2π/L`.
    pub fn fundamental(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Largest per-axis wavenumber `πN/L` (the Nyquist mode).
    pub fn nyquist(&self) -> f64 {
        PI * self.n as f64 / self.length
    }

    /// Per-axis wavenumber cutoff of the two-thirds rule.
    pub fn dealias_cutoff(&self) -> f64 {
        self.n as f64 / 3.0 * self.fundamental()
    }

    /// The same box sampled with twice as many points per dimension.
    pub fn refined(&self) -> Self {
        Self {
            n: self.n * 2,
            ..*self
        }
    }

    /// Signed integer frequency of storage position `i` along one axis; the
    /// Nyquist position `N/2` maps to `+N/2`.
    pub fn signed_mode(&self, i: usize) -> i64 {
        if i <= self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    fn position_of_mode(&self, m: i64) -> usize {
        m.rem_euclid(self.n as i64) as usize
    }

    /// Per-axis storage positions of a flat index (unused axes are 0).
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        let mut rest = idx;
        for axis in (0..self.dim).rev() {
            out[axis] = rest % self.n;
            rest /= self.n;
        }
        out
    }

    pub fn ravel(&self, pos: [usize; 3]) -> usize {
        (0..self.dim).fold(0, |acc, axis| acc * self.n + pos[axis])
    }

    /// Signed integer frequencies of a flat index.
    pub fn modes(&self, idx: usize) -> [i64; 3] {
        let pos = self.unravel(idx);
        let mut m = [0i64; 3];
        for axis in 0..self.dim {
            m[axis] = self.signed_mode(pos[axis]);
        }
        m
    }

    /// Wave vector `ξ = 2π m / L` of a flat index.
    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        let m = self.modes(idx);
        let k0 = self.fundamental();
        [m[0] as f64 * k0, m[1] as f64 * k0, m[2] as f64 * k0]
    }

    pub fn wavenumber(&self, idx: usize) -> f64 {
        let m = self.modes(idx);
        let m2: i64 = m.iter().map(|v| v * v).sum();
        (m2 as f64).sqrt() * self.fundamental()
    }

    /// `|ξ|` for every flat index.
    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.wavenumber(i)).collect()
    }

    /// Flat index of the mode `-m`.
    pub fn partner(&self, idx: usize) -> usize {
        let pos = self.unravel(idx);
        let mut p = [0usize; 3];
        for axis in 0..self.dim {
            p[axis] = (self.n - pos[axis]) % self.n;
        }
        self.ravel(p)
    }

    /// Physical coordinates of a flat index.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let pos = self.unravel(idx);
        let h = self.spacing();
        [pos[0] as f64 * h, pos[1] as f64 * h, pos[2] as f64 * h]
    }

    /// Samples `f` at every grid point.
    pub fn sample<F: Fn([f64; 3]) -> f64>(&self, f: F) -> RealField {
        RealField {
            grid: *self,
            values: (0..self.len()).map(|i| f(self.point(i))).collect(),
        }
    }

    pub fn zeros(&self) -> RealField {
        RealField {
            grid: *self,
            values: vec![0.0; self.len()],
        }
    }

    pub fn zeros_spectral(&self) -> SpectralField {
        SpectralField {
            grid: *self,
            coeffs: vec![Complex64::new(0.0, 0.0); self.len()],
        }
    }
}

/// Real samples on a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    pub grid: PeriodicGrid,
    pub values: Vec<f64>,
}

/// Fourier coefficients on a periodic grid, in FFT storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub grid: PeriodicGrid,
    pub coeffs: Vec<Complex64>,
}

impl RealField {
    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "field has {} samples, grid expects {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Continuum `L^p` norm by grid quadrature; `p = ∞` is the grid maximum.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.max_abs();
        }
        let dv = self.grid.cell_volume();
        if p == 2.0 {
            return (dv * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt();
        }
        (dv * self.values.iter().map(|v| v.abs().powf(p)).sum::<f64>()).powf(1.0 / p)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        }
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl SpectralField {
    /// Continuum L² norm via Parseval.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.volume() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Multiplies every coefficient by `m(|ξ|)`.
    pub fn radial_multiplier<F: Fn(f64) -> f64>(&self, m: F) -> Self {
        let grid = self.grid;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * m(grid.wavenumber(i)))
            .collect();
        Self { grid, coeffs }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            coeffs: self.coeffs.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect(),
        }
    }

    /// Largest deviation from Hermitian symmetry `f̂(-k) = conj(f̂(k))`.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.coeffs.len())
            .map(|i| (self.coeffs[self.grid.partner(i)] - self.coeffs[i].conj()).norm())
            .fold(0.0, f64::max)
    }
}

fn fft_nd(grid: &PeriodicGrid, data: &mut [Complex64], direction: FftDirection) {
    let n = grid.n;
    let fft = plan(n, direction);
    let total = data.len();
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    // last axis is contiguous
    fft.process_with_scratch(data, &mut scratch);
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..grid.dim.saturating_sub(1) {
        let stride = n.pow((grid.dim - 1 - axis) as u32);
        let block = stride * n;
        for start in (0..total).step_by(block) {
            for offset in 0..stride {
                let base = start + offset;
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + k * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (k, v) in line.iter().enumerate() {
                    data[base + k * stride] = *v;
                }
            }
        }
    }
}

/// Fourier coefficients of a real field; the zero mode equals the mean.
pub fn forward_transform(f: &RealField) -> SpectralField {
    let mut coeffs: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_nd(&f.grid, &mut coeffs, FftDirection::Forward);
    let scale = 1.0 / f.grid.len() as f64;
    for c in &mut coeffs {
        *c *= scale;
    }
    SpectralField {
        grid: f.grid,
        coeffs,
    }
}

/// Inverse of [`forward_transform`], keeping the real part.
pub fn inverse_transform(f: &SpectralField) -> RealField {
    let mut data = f.coeffs.clone();
    fft_nd(&f.grid, &mut data, FftDirection::Inverse);
    RealField {
        grid: f.grid,
        values: data.into_iter().map(|c| c.re).collect(),
    }
}

/// `∂^order f / ∂x_axis^order`, multiplying each coefficient by `(i ξ_axis)^order`.
///
/// For odd orders the Nyquist coefficient along `axis` is zeroed, since its
/// derivative has no real representative on the grid.
pub fn spectral_derivative(f: &SpectralField, axis: usize, order: u32) -> SpectralField {
    assert!(axis < f.grid.dim, "axis {axis} out of range");
    let grid = f.grid;
    let half = grid.n / 2;
    let k0 = grid.fundamental();
    let coeffs = f
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let pos = grid.unravel(i)[axis];
            if order % 2 == 1 && pos == half {
                return Complex64::new(0.0, 0.0);
            }
            let k = grid.signed_mode(pos) as f64 * k0;
            c * Complex64::new(0.0, k).powu(order)
        })
        .collect();
    SpectralField { grid, coeffs }
}

/// Returns true when every axis frequency of `idx` is within the two-thirds band.
pub fn within_dealias_band(grid: &PeriodicGrid, idx: usize) -> bool {
    let limit = grid.n as f64 / 3.0;
    grid.modes(idx)[..grid.dim].iter().all(|m| (*m as f64).abs() <= limit)
}

/// Zeroes every coefficient with some `|k_i| > N/3 · 2π/L`.
pub fn dealias(f: &SpectralField) -> SpectralField {
    let mut out = f.clone();
    dealias_in_place(&mut out);
    out
}

pub fn dealias_in_place(f: &mut SpectralField) {
    let grid = f.grid;
    for (i, c) in f.coeffs.iter_mut().enumerate() {
        if !within_dealias_band(&grid, i) {
            *c = Complex64::new(0.0, 0.0);
        }
    }
}

/// Zero-pads a spectrum onto the grid with twice the resolution. Nyquist
/// coefficients are split evenly between `+N/2` and `-N/2` so real fields
/// stay real.
pub fn refine(f: &SpectralField) -> SpectralField {
    let coarse = f.grid;
    let fine = coarse.refined();
    let half = (coarse.n / 2) as i64;
    let mut out = fine.zeros_spectral();
    for (i, c) in f.coeffs.iter().enumerate() {
        if c.norm_sqr() == 0.0 {
            continue;
        }
        let m = coarse.modes(i);
        let mut targets: Vec<([usize; 3], f64)> = vec![([0; 3], 1.0)];
        for axis in 0..coarse.dim {
            let images: Vec<(i64, f64)> = if m[axis] == half {
                vec![(half, 0.5), (-half, 0.5)]
            } else {
                vec![(m[axis], 1.0)]
            };
            targets = targets
                .into_iter()
                .flat_map(|(pos, w)| {
                    images.iter().map(move |&(mm, wm)| {
                        let mut p = pos;
                        p[axis] = fine.position_of_mode(mm);
                        (p, w * wm)
                    })
                })
                .collect();
        }
        for (pos, w) in targets {
            out.coeffs[fine.ravel(pos)] += c * w;
        }
    }
    out
}

/// Truncates a spectrum on a refined grid back onto `coarse`, dropping every
/// mode the coarse grid cannot represent below its Nyquist frequency.
pub fn restrict(f: &SpectralField, coarse: PeriodicGrid) -> SpectralField {
    let fine = f.grid;
    let half = (coarse.n / 2) as i64;
    let mut out = coarse.zeros_spectral();
    for (i, c) in f.coeffs.iter().enumerate() {
        let m = fine.modes(i);
        if m[..fine.dim].iter().all(|v| v.abs() < half) {
            let mut pos = [0usize; 3];
            for axis in 0..coarse.dim {
                pos[axis] = coarse.position_of_mode(m[axis]);
            }
            out.coeffs[coarse.ravel(pos)] = *c;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: PeriodicGrid, seed: u64) -> RealField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RealField {
            grid,
            values: (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect(),
        }
    }

    fn max_diff(a: &RealField, b: &RealField) -> f64 {
        a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(PeriodicGrid::new(1, 12, 1.0).is_err());
        assert!(PeriodicGrid::new(1, 4, 1.0).is_err());
        assert!(PeriodicGrid::new(4, 16, 1.0).is_err());
        assert!(PeriodicGrid::new(2, 16, 0.0).is_err());
    }

    #[test]
    fn wavenumber_span() {
        let g = PeriodicGrid::new(2, 16, 2.0 * PI * 4.0).unwrap();
        let ks = g.wavenumbers();
        assert_eq!(ks.iter().filter(|&&k| k == 0.0).count(), 1);
        let kmin = ks.iter().copied().filter(|&k| k > 0.0).fold(f64::INFINITY, f64::min);
        assert!((kmin - g.fundamental()).abs() < 1e-15);
        let axis_max = (0..16).map(|i| g.signed_mode(i)).max().unwrap();
        assert!((axis_max as f64 * g.fundamental() - g.nyquist()).abs() < 1e-12);
    }

    #[test]
    fn constant_transform() {
        let g = PeriodicGrid::new(2, 8, 3.0).unwrap();
        let f = g.sample(|_| 2.5);
        let s = forward_transform(&f);
        assert!((s.coeffs[0].re - 2.5).abs() < 1e-14);
        assert!(s.coeffs[1..].iter().all(|c| c.norm() < 1e-14));
    }

    #[test]
    fn single_harmonic() {
        let g = PeriodicGrid::new(1, 32, 2.0 * PI).unwrap();
        let f = g.sample(|x| (3.0 * x[0]).sin());
        let s = forward_transform(&f);
        assert!((s.coeffs[3].norm() - 0.5).abs() < 1e-14);
        assert!((s.coeffs[29] - s.coeffs[3].conj()).norm() < 1e-14);
        let others: f64 = s
            .coeffs
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != 3 && *i != 29)
            .map(|(_, c)| c.norm())
            .sum();
        assert!(others < 1e-13);
    }

    #[test]
    fn round_trip_random() {
        for dim in 1..=3 {
            let g = PeriodicGrid::new(dim, 16, 5.0).unwrap();
            let f = random_field(g, 7 + dim as u64);
            let back = inverse_transform(&forward_transform(&f));
            let rel = max_diff(&f, &back) / f.max_abs();
            assert!(rel < 1e-12, "dim {dim}: {rel}");
        }
    }

    #[test]
    fn derivative_of_sine() {
        let g = PeriodicGrid::new(1, 32, 2.0 * PI).unwrap();
        let f = g.sample(|x| (3.0 * x[0]).sin());
        let df = inverse_transform(&spectral_derivative(&forward_transform(&f), 0, 1));
        let exact = g.sample(|x| 3.0 * (3.0 * x[0]).cos());
        assert!(max_diff(&df, &exact) < 1e-10);
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let g = PeriodicGrid::new(2, 8, 1.0).unwrap();
        let f = g.sample(|_| -4.0);
        for axis in 0..2 {
            let d = spectral_derivative(&forward_transform(&f), axis, 2);
            assert!(d.coeffs.iter().all(|c| c.norm() == 0.0));
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        // centered differences of e^{cos x} converge at O(h^2) to the spectral derivative
        let errors: Vec<f64> = [64usize, 128, 256]
            .iter()
            .map(|&n| {
                let g = PeriodicGrid::new(1, n, 2.0 * PI).unwrap();
                let f = g.sample(|x| x[0].cos().exp());
                let spec = inverse_transform(&spectral_derivative(&forward_transform(&f), 0, 1));
                let h = g.spacing();
                (0..n)
                    .map(|i| {
                        let fd = (f.values[(i + 1) % n] - f.values[(i + n - 1) % n]) / (2.0 * h);
                        (fd - spec.values[i]).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        for w in errors.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.6..4.4).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn dealias_keeps_low_band() {
        let g = PeriodicGrid::new(1, 32, 2.0 * PI).unwrap();
        let f = g.sample(|x| (8.0 * x[0]).cos() + (3.0 * x[0]).sin());
        let s = forward_transform(&f);
        let d = dealias(&s);
        assert!(s.sub(&d).l2_norm() < 1e-14);
    }

    #[test]
    fn dealias_kills_nyquist() {
        let g = PeriodicGrid::new(1, 16, 2.0 * PI).unwrap();
        let f = g.sample(|x| (8.0 * x[0]).cos());
        let d = dealias(&forward_transform(&f));
        assert!(d.coeffs.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn dealiased_product_matches_fine_grid() {
        // sin(k1 x) sin(k2 x) = (cos((k1-k2)x) - cos((k1+k2)x)) / 2 with k1 + k2 above the cutoff
        let g = PeriodicGrid::new(1, 32, 2.0 * PI).unwrap();
        let (k1, k2) = (9.0, 10.0);
        let f1 = g.sample(|x| (k1 * x[0]).sin());
        let f2 = g.sample(|x| (k2 * x[0]).sin());
        let product = dealias(&forward_transform(&f1.mul(&f2)));

        let fine = g.refined();
        let p1 = fine.sample(|x| (k1 * x[0]).sin());
        let p2 = fine.sample(|x| (k2 * x[0]).sin());
        let exact = restrict(&dealias(&forward_transform(&p1.mul(&p2))), g);
        let exact = dealias(&exact);
        let err = product.sub(&exact).l2_norm();
        assert!(err < 1e-13, "{err}");
        // the undealiased coarse product is polluted by the aliased 19-mode
        let raw = forward_transform(&f1.mul(&f2));
        assert!(raw.sub(&exact).l2_norm() > 0.1);
    }

    #[test]
    fn refine_preserves_field() {
        let g = PeriodicGrid::new(2, 8, 2.0 * PI).unwrap();
        let f = random_field(g, 3);
        let s = forward_transform(&f);
        let r = refine(&s);
        let back = restrict(&r, g);
        // everything except the split Nyquist coefficients survives
        for (i, (a, b)) in s.coeffs.iter().zip(&back.coeffs).enumerate() {
            let m = g.modes(i);
            if m[..2].iter().all(|v| v.abs() < 4) {
                assert!((a - b).norm() < 1e-15);
            }
        }
        assert!((r.l2_norm() - s.l2_norm()).abs() / s.l2_norm() < 0.5);
        let fine_values = inverse_transform(&r);
        for i in 0..g.len() {
            let p = g.unravel(i);
            let j = r.grid.ravel([2 * p[0], 2 * p[1], 0]);
            assert!((fine_values.values[j] - f.values[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn hermitian_symmetry_of_real_fields() {
        let g = PeriodicGrid::new(3, 8, 1.0).unwrap();
        let s = forward_transform(&random_field(g, 11));
        assert!(s.hermitian_defect() < 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(100))]

            #[test]
            fn parseval(seed in any::<u64>(), dim in 1usize..=3) {
                let g = PeriodicGrid::new(dim, 8, 2.7).unwrap();
                let f = random_field(g, seed);
                let grid_norm = f.lp_norm(2.0);
                let coeff_norm = forward_transform(&f).l2_norm();
                prop_assert!((grid_norm - coeff_norm).abs() <= 1e-12 * grid_norm);
            }

            #[test]
            fn linearity(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
                let g = PeriodicGrid::new(2, 16, 1.0).unwrap();
                let f = random_field(g, seed);
                let h = random_field(g, seed.wrapping_add(1));
                let combo = forward_transform(&f.scaled(a).add(&h.scaled(b)));
                let sep = forward_transform(&f).scaled(a).add(&forward_transform(&h).scaled(b));
                let err = combo.sub(&sep).l2_norm();
                prop_assert!(err <= 1e-12 * (1.0 + combo.l2_norm()));
            }
        }
    }
}
