//! Seeded random fields with Gaussian Fourier coefficients.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::spectral::{inverse_transform, PeriodicGrid, RealField, SpectralField};

/// Coefficients `g_ξ |ξ|^exponent` on `k_lo ≤ |ξ| ≤ k_hi`, zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomFieldSpec {
    pub exponent: f64,
    pub k_lo: f64,
    pub k_hi: f64,
}

impl RandomFieldSpec {
    pub fn band(k_lo: f64, k_hi: f64) -> Self {
        Self {
            exponent: 0.0,
            k_lo,
            k_hi,
        }
    }

    pub fn with_exponent(mut self, exponent: f64) -> Self {
        self.exponent = exponent;
        self
    }

    /// Band covering the annulus `λ·[3/4, 8/3]`.
    pub fn annulus(lambda: f64) -> Self {
        Self::band(0.75 * lambda, 8.0 / 3.0 * lambda)
    }

    /// Band covering the ball `|ξ| ≤ (4/3)λ`.
    pub fn ball(lambda: f64) -> Self {
        Self::band(0.0, 4.0 / 3.0 * lambda)
    }
}

/// Symmetrizes `c_{-ξ} = conj(c_ξ)` so the physical field is real.
pub fn enforce_hermitian(f: &mut SpectralField) {
    let grid = f.grid;
    for i in 0..grid.len() {
        let p = grid.partner(i);
        if p == i {
            f.coeffs[i] = Complex64::new(f.coeffs[i].re, 0.0);
        } else if i < p {
            f.coeffs[p] = f.coeffs[i].conj();
        }
    }
}

pub fn random_spectrum<R: Rng + ?Sized>(
    grid: PeriodicGrid,
    spec: &RandomFieldSpec,
    rng: &mut R,
) -> Result<SpectralField> {
    if !(spec.k_lo >= 0.0 && spec.k_hi >= spec.k_lo) {
        return Err(Error::InvalidParameter(format!(
            "band [{}, {}] is empty",
            spec.k_lo, spec.k_hi
        )));
    }
    let mut f = grid.zeros_spectral();
    let mut any = false;
    for i in 0..grid.len() {
        let k = grid.wavenumber(i);
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        if k > 0.0 && k >= spec.k_lo && k <= spec.k_hi {
            f.coeffs[i] = Complex64::new(re, im) * k.powf(spec.exponent);
            any = true;
        }
    }
    if !any {
        return Err(Error::InvalidParameter(format!(
            "band [{}, {}] contains no grid modes",
            spec.k_lo, spec.k_hi
        )));
    }
    enforce_hermitian(&mut f);
    Ok(f)
}

pub fn random_field<R: Rng + ?Sized>(
    grid: PeriodicGrid,
    spec: &RandomFieldSpec,
    rng: &mut R,
) -> Result<RealField> {
    Ok(inverse_transform(&random_spectrum(grid, spec, rng)?))
}

/// `amplitude·cos(m·x)` for an integer mode vector `m`.
pub fn cosine_mode(grid: PeriodicGrid, m: [i64; 3], amplitude: f64) -> RealField {
    let k0 = grid.fundamental();
    grid.sample(|x| {
        let phase: f64 = (0..3).map(|a| m[a] as f64 * k0 * x[a]).sum();
        amplitude * phase.cos()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::forward_transform;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_spectrum_is_hermitian_and_band_limited() {
        let grid = PeriodicGrid::new(2, 16, 6.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = RandomFieldSpec::band(2.0, 5.0).with_exponent(-1.0);
        let f = random_spectrum(grid, &spec, &mut rng).unwrap();
        assert!(f.hermitian_defect() < 1e-15);
        for (i, c) in f.coeffs.iter().enumerate() {
            let k = grid.wavenumber(i);
            if !(2.0..=5.0).contains(&k) {
                assert_eq!(c.norm(), 0.0);
            }
        }
        let back = forward_transform(&inverse_transform(&f));
        assert!(back.sub(&f).l2_norm() < 1e-12 * f.l2_norm());
    }

    #[test]
    fn same_seed_same_field() {
        let grid = PeriodicGrid::new(1, 32, 1.0).unwrap();
        let spec = RandomFieldSpec::annulus(20.0);
        let a = random_field(grid, &spec, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = random_field(grid, &spec, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_band_rejected() {
        let grid = PeriodicGrid::new(1, 16, 1.0).unwrap();
        let spec = RandomFieldSpec::band(0.1, 0.2);
        assert!(random_spectrum(grid, &spec, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }
}
