//! Dyadic blocks and homogeneous Besov, Chemin-Lerner and hybrid norms.

mod cutoffs;

pub use cutoffs::{DyadicCutoffs, CHI_FLAT_END, CHI_SUPPORT_END};

use crate::error::{Error, Result};
use crate::spectral::{forward_transform, inverse_transform, PeriodicGrid, RealField, SpectralField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesovParams {
    pub s: f64,
    pub p: f64,
    pub r: f64,
}

impl BesovParams {
    pub fn new(s: f64, p: f64, r: f64) -> Result<Self> {
        if !(p >= 1.0) || !(r >= 1.0) || s.is_nan() {
            return Err(Error::InvalidParameter(format!(
                "Besov exponents need p, r in [1, inf], got p = {p}, r = {r}"
            )));
        }
        Ok(Self { s, p, r })
    }

    /// `Ḃ^s_{2,r}`.
    pub fn l2(s: f64, r: f64) -> Self {
        Self { s, p: 2.0, r }
    }
}

/// Threshold `j0`: low indices are `j ≤ j0`, high indices `j ≥ j0 − 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrequencySplit {
    pub j0: i32,
}

impl Default for FrequencySplit {
    fn default() -> Self {
        Self { j0: 0 }
    }
}

impl FrequencySplit {
    pub fn is_low(&self, j: i32) -> bool {
        j <= self.j0
    }

    pub fn is_high(&self, j: i32) -> bool {
        j >= self.j0 - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    All,
    Low(FrequencySplit),
    High(FrequencySplit),
}

impl Band {
    pub fn low() -> Self {
        Band::Low(FrequencySplit::default())
    }

    pub fn high() -> Self {
        Band::High(FrequencySplit::default())
    }

    pub fn contains(&self, j: i32) -> bool {
        match self {
            Band::All => true,
            Band::Low(s) => s.is_low(j),
            Band::High(s) => s.is_high(j),
        }
    }
}

/// Inclusive range of dyadic indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShellRange {
    pub lo: i32,
    pub hi: i32,
}

impl ShellRange {
    pub fn new(lo: i32, hi: i32) -> Self {
        Self { lo, hi }
    }

    fn lowest_touching(grid: &PeriodicGrid) -> i32 {
        // smallest j with 2^{-j} k_min < 8/3
        (3.0 * grid.fundamental() / 8.0).log2().floor() as i32 + 1
    }

    /// Shells whose annulus lies below the dealiasing radius `N/3` modes.
    pub fn resolvable(grid: &PeriodicGrid) -> Self {
        let hi = (grid.nyquist() / 3.0).log2().floor() as i32;
        Self::new(Self::lowest_touching(grid), hi)
    }

    /// Every shell that sees at least one grid mode.
    pub fn covering(grid: &PeriodicGrid) -> Self {
        let k_max = (grid.dim() as f64).sqrt() * grid.nyquist();
        let hi = (k_max / CHI_FLAT_END).log2().ceil() as i32 - 1;
        Self::new(Self::lowest_touching(grid), hi)
    }

    pub fn iter(&self) -> impl Iterator<Item = i32> {
        self.lo..=self.hi
    }

    pub fn contains(&self, j: i32) -> bool {
        (self.lo..=self.hi).contains(&j)
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1).max(0) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `Δ̇_j f = φ(2^{-j}D) f`.
pub fn dyadic_block(cutoffs: &DyadicCutoffs, f: &SpectralField, j: i32) -> SpectralField {
    f.radial_multiplier(|k| cutoffs.shell_weight(j, k))
}

/// `Ṡ_j f = χ(2^{-j}D) f`.
pub fn low_cutoff(cutoffs: &DyadicCutoffs, f: &SpectralField, j: i32) -> SpectralField {
    let scale = 2f64.powi(-j);
    f.radial_multiplier(|k| cutoffs.chi(k * scale))
}

/// `f^ℓ = Σ_{j ≤ j0 − 1} Δ̇_j f` (mean removed).
pub fn low_part(cutoffs: &DyadicCutoffs, f: &SpectralField, split: FrequencySplit) -> SpectralField {
    let scale = 2f64.powi(-split.j0);
    f.radial_multiplier(|k| if k > 0.0 { cutoffs.chi(k * scale) } else { 0.0 })
}

/// `f^h = f − mean − f^ℓ`.
pub fn high_part(cutoffs: &DyadicCutoffs, f: &SpectralField, split: FrequencySplit) -> SpectralField {
    let scale = 2f64.powi(-split.j0);
    f.radial_multiplier(|k| if k > 0.0 { 1.0 - cutoffs.chi(k * scale) } else { 0.0 })
}

const TRUNCATION_TOLERANCE: f64 = 1e-24;

/// Per-shell `‖Δ̇_j f‖_{L^p}` over a contiguous index range.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellNorms {
    pub range: ShellRange,
    pub values: Vec<f64>,
    /// True when some nonzero mode falls in a shell outside `range`.
    pub truncated: bool,
}

impl ShellNorms {
    pub fn get(&self, j: i32) -> f64 {
        if self.range.contains(j) {
            self.values[(j - self.range.lo) as usize]
        } else {
            0.0
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, f64)> + '_ {
        self.range.iter().zip(self.values.iter().copied())
    }

    /// `ℓ^r` norm of `2^{js}‖Δ̇_j f‖` over the shells in `band`.
    pub fn combine(&self, s: f64, r: f64, band: Band) -> f64 {
        lr_norm(
            self.iter()
                .filter(|(j, _)| band.contains(*j))
                .map(|(j, v)| 2f64.powf(j as f64 * s) * v),
            r,
        )
    }

    /// Two-exponent weighting: `2^{js}` for `j ≤ j0`, `2^{jt}` above.
    pub fn combine_hybrid(&self, s: f64, t: f64, j0: i32) -> f64 {
        self.iter()
            .map(|(j, v)| {
                let e = if j <= j0 { s } else { t };
                2f64.powf(j as f64 * e) * v
            })
            .sum()
    }
}

pub fn lr_norm<I: IntoIterator<Item = f64>>(values: I, r: f64) -> f64 {
    if r.is_infinite() {
        values.into_iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    } else if r == 1.0 {
        values.into_iter().map(f64::abs).sum()
    } else {
        values
            .into_iter()
            .map(|v| v.abs().powf(r))
            .sum::<f64>()
            .powf(1.0 / r)
    }
}

/// Shell norms of `f` in `L^p`. For `p = 2` this uses Parseval in one pass
/// over the spectrum; otherwise each block is transformed back.
pub fn shell_norms(cutoffs: &DyadicCutoffs, f: &SpectralField, p: f64, range: ShellRange) -> ShellNorms {
    let grid = f.grid;
    let mut inside = 0.0;
    let mut outside = 0.0;
    let mut sq = vec![0.0; range.len()];
    for (i, c) in f.coeffs.iter().enumerate() {
        let e = c.norm_sqr();
        if e == 0.0 {
            continue;
        }
        let k = grid.wavenumber(i);
        for j in cutoffs.shells_containing(k) {
            let w = cutoffs.shell_weight(j, k);
            if w <= 0.0 {
                continue;
            }
            if range.contains(j) {
                sq[(j - range.lo) as usize] += w * w * e;
                inside += w * w * e;
            } else {
                outside += w * w * e;
            }
        }
    }
    // roundoff-level content outside the range does not count as truncation
    let truncated = outside > TRUNCATION_TOLERANCE * (inside + outside);
    let values = if p == 2.0 {
        let vol = grid.volume();
        sq.into_iter().map(|v| (vol * v).sqrt()).collect()
    } else {
        range
            .iter()
            .map(|j| inverse_transform(&dyadic_block(cutoffs, f, j)).lp_norm(p))
            .collect()
    };
    ShellNorms {
        range,
        values,
        truncated,
    }
}

/// `‖f‖_{Ḃ^s_{p,r}}` restricted to `band`, over the resolvable shells of the grid.
pub fn besov_norm(cutoffs: &DyadicCutoffs, f: &RealField, params: BesovParams, band: Band) -> f64 {
    let spec = forward_transform(f);
    besov_norm_over(cutoffs, &spec, params, band, ShellRange::resolvable(&f.grid))
}

pub fn besov_norm_over(
    cutoffs: &DyadicCutoffs,
    f: &SpectralField,
    params: BesovParams,
    band: Band,
    range: ShellRange,
) -> f64 {
    shell_norms(cutoffs, f, params.p, range).combine(params.s, params.r, band)
}

/// `Σ_{j≤j0} 2^{js}‖Δ̇_j f‖_{L²} + Σ_{j>j0} 2^{jt}‖Δ̇_j f‖_{L²}`.
pub fn hybrid_norm(cutoffs: &DyadicCutoffs, f: &RealField, s: f64, t_exp: f64, j0: i32) -> f64 {
    let spec = forward_transform(f);
    shell_norms(cutoffs, &spec, 2.0, ShellRange::resolvable(&f.grid)).combine_hybrid(s, t_exp, j0)
}

/// Shell norms sampled in time.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellSeries {
    pub times: Vec<f64>,
    pub shells: Vec<ShellNorms>,
}

impl ShellSeries {
    pub fn new(times: Vec<f64>, shells: Vec<ShellNorms>) -> Result<Self> {
        if times.len() != shells.len() {
            return Err(Error::InvalidParameter(format!(
                "{} times but {} shell samples",
                times.len(),
                shells.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("sample times must increase".into()));
        }
        if let Some(first) = shells.first() {
            if shells.iter().any(|s| s.range != first.range) {
                return Err(Error::InvalidParameter("shell ranges differ between samples".into()));
            }
        }
        Ok(Self { times, shells })
    }

    pub fn from_fields(
        cutoffs: &DyadicCutoffs,
        times: Vec<f64>,
        fields: &[SpectralField],
        p: f64,
        range: ShellRange,
    ) -> Result<Self> {
        let shells = fields.iter().map(|f| shell_norms(cutoffs, f, p, range)).collect();
        Self::new(times, shells)
    }

    /// Prefix of the series with `t ≤ t_end`.
    pub fn until(&self, t_end: f64) -> Self {
        let n = self.times.iter().take_while(|&&t| t <= t_end).count();
        Self {
            times: self.times[..n].to_vec(),
            shells: self.shells[..n].to_vec(),
        }
    }

    /// `‖{2^{js} ‖w(t)Δ̇_j f‖_{L^ϱ_T(L^p)}}‖_{ℓ^r}` with a scalar time weight `w`.
    pub fn chemin_lerner<W: Fn(f64) -> f64>(
        &self,
        rho: f64,
        s: f64,
        r: f64,
        band: Band,
        weight: W,
    ) -> Result<f64> {
        if !(rho >= 1.0) {
            return Err(Error::InvalidParameter(format!("time exponent {rho} below 1")));
        }
        let n = self.times.len();
        if n == 0 || (rho.is_finite() && n < 2) {
            return Err(Error::InsufficientSamples(format!(
                "time norm with exponent {rho} needs at least 2 samples, got {n}"
            )));
        }
        let range = self.shells[0].range;
        let w: Vec<f64> = self.times.iter().map(|&t| weight(t)).collect();
        let per_shell = range.iter().enumerate().filter(|(_, j)| band.contains(*j)).map(|(idx, j)| {
            let g = |k: usize| w[k] * self.shells[k].values[idx];
            let time_norm = if rho.is_infinite() {
                (0..n).fold(0.0, |m: f64, k| m.max(g(k).abs()))
            } else {
                let integral: f64 = (1..n)
                    .map(|k| {
                        0.5 * (self.times[k] - self.times[k - 1])
                            * (g(k).abs().powf(rho) + g(k - 1).abs().powf(rho))
                    })
                    .sum();
                integral.powf(1.0 / rho)
            };
            2f64.powf(j as f64 * s) * time_norm
        });
        Ok(lr_norm(per_shell, r))
    }
}

/// `‖f‖_{L̃^ϱ_T(Ḃ^s_{p,r})}` over the resolvable shells of the grid.
impl ShellSeries {
    /// Running values of [`ShellSeries::chemin_lerner`] over `[t_0, t_k]` for every sample `k`.
    /// Finite time exponents give 0 at the first sample.
    pub fn chemin_lerner_curve<W: Fn(f64) -> f64>(
        &self,
        rho: f64,
        s: f64,
        r: f64,
        band: Band,
        weight: W,
    ) -> Result<Vec<f64>> {
        if !(rho >= 1.0) {
            return Err(Error::InvalidParameter(format!("time exponent {rho} below 1")));
        }
        let n = self.times.len();
        if n == 0 {
            return Ok(Vec::new());
        }
        let range = self.shells[0].range;
        let w: Vec<f64> = self.times.iter().map(|&t| weight(t)).collect();
        let shells: Vec<(usize, f64)> = range
            .iter()
            .enumerate()
            .filter(|(_, j)| band.contains(*j))
            .map(|(idx, j)| (idx, 2f64.powf(j as f64 * s)))
            .collect();
        let mut acc = vec![0.0f64; shells.len()];
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            for (slot, &(idx, _)) in acc.iter_mut().zip(&shells) {
                let g = |m: usize| (w[m] * self.shells[m].values[idx]).abs();
                if rho.is_infinite() {
                    *slot = slot.max(g(k));
                } else if k > 0 {
                    *slot += 0.5 * (self.times[k] - self.times[k - 1]) * (g(k).powf(rho) + g(k - 1).powf(rho));
                }
            }
            let per_shell = acc.iter().zip(&shells).map(|(a, (_, scale))| {
                let time_norm = if rho.is_infinite() { *a } else { a.powf(1.0 / rho) };
                scale * time_norm
            });
            out.push(lr_norm(per_shell, r));
        }
        Ok(out)
    }
}

pub fn chemin_lerner_norm(
    cutoffs: &DyadicCutoffs,
    times: &[f64],
    series: &[RealField],
    rho: f64,
    params: BesovParams,
    band: Band,
) -> Result<f64> {
    let Some(first) = series.first() else {
        return Err(Error::InsufficientSamples("empty time series".into()));
    };
    let range = ShellRange::resolvable(&first.grid);
    let spectra: Vec<SpectralField> = series.iter().map(forward_transform).collect();
    ShellSeries::from_fields(cutoffs, times.to_vec(), &spectra, params.p, range)?
        .chemin_lerner(rho, params.s, params.r, band, |_| 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random_fields::{random_spectrum, RandomFieldSpec};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn cut() -> DyadicCutoffs {
        DyadicCutoffs::build(1.0).unwrap()
    }

    fn sin16() -> RealField {
        PeriodicGrid::new(1, 128, 2.0 * PI).unwrap().sample(|x| (16.0 * x[0]).sin())
    }

    #[test]
    fn sin16_lives_in_two_shells() {
        let c = cut();
        let f = forward_transform(&sin16());
        let mut sum = f.grid.zeros_spectral();
        for j in -3..10 {
            let b = dyadic_block(&c, &f, j);
            if j == 3 || j == 4 {
                assert!(b.l2_norm() > 0.0);
                sum = sum.add(&b);
            } else {
                assert!(b.l2_norm() < 1e-14, "j = {j}");
            }
        }
        assert!(sum.sub(&f).l2_norm() < 1e-12);
    }

    #[test]
    fn constant_has_no_blocks() {
        let c = cut();
        let grid = PeriodicGrid::new(2, 16, 3.0).unwrap();
        let f = forward_transform(&grid.sample(|_| 2.5));
        for j in -5..5 {
            assert!(dyadic_block(&c, &f, j).l2_norm() < 1e-14);
        }
        assert!(low_cutoff(&c, &f, -5).sub(&f).l2_norm() < 1e-14);
    }

    #[test]
    fn blocks_telescope_to_mean_free_part() {
        let c = cut();
        for dim in 1..=3 {
            let grid = PeriodicGrid::new(dim, 16, 5.0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(dim as u64);
            let mut f = random_spectrum(grid, &RandomFieldSpec::band(0.0, 100.0), &mut rng).unwrap();
            f.coeffs[0] = 0.7.into();
            let mut sum = grid.zeros_spectral();
            for j in ShellRange::covering(&grid).iter() {
                sum = sum.add(&dyadic_block(&c, &f, j));
            }
            let mut mean_free = f.clone();
            mean_free.coeffs[0] = 0.0.into();
            assert!(sum.sub(&mean_free).l2_norm() < 1e-10 * f.l2_norm());
        }
    }

    #[test]
    fn low_cutoff_removes_sin16_at_j2() {
        let c = cut();
        let f = forward_transform(&sin16());
        assert!(low_cutoff(&c, &f, 2).l2_norm() < 1e-14);
        assert!(low_cutoff(&c, &f, 30).sub(&f).l2_norm() < 1e-14);
    }

    #[test]
    fn consecutive_low_cutoffs_differ_by_block() {
        let c = cut();
        let grid = PeriodicGrid::new(2, 32, 7.0).unwrap();
        let f = random_spectrum(grid, &RandomFieldSpec::band(0.0, 100.0), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        for j in -3..4 {
            let d = low_cutoff(&c, &f, j + 1).sub(&low_cutoff(&c, &f, j));
            assert!(d.sub(&dyadic_block(&c, &f, j)).l2_norm() < 1e-12 * f.l2_norm());
        }
    }

    #[test]
    fn besov_norm_of_sin16() {
        let c = cut();
        let f = sin16();
        let v = besov_norm(&c, &f, BesovParams::l2(0.0, 1.0), Band::All);
        let expect = PI.sqrt() * (c.phi(1.0) + c.phi(2.0));
        assert!((v - expect).abs() < 1e-12, "{v} vs {expect}");
        let z = f.scaled(0.0);
        assert_eq!(besov_norm(&c, &z, BesovParams::new(1.3, 3.0, f64::INFINITY).unwrap(), Band::All), 0.0);
    }

    #[test]
    fn grid_quadrature_matches_parseval() {
        let c = cut();
        let grid = PeriodicGrid::new(2, 32, 4.0).unwrap();
        let f = random_spectrum(grid, &RandomFieldSpec::band(0.0, 20.0), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let range = ShellRange::covering(&grid);
        let a = shell_norms(&c, &f, 2.0, range);
        for (j, v) in a.iter() {
            let q = inverse_transform(&dyadic_block(&c, &f, j)).lp_norm(2.0);
            assert!((v - q).abs() <= 1e-12 * (1.0 + q), "j = {j}");
        }
    }

    #[test]
    fn power_spectrum_gives_flat_weak_norm() {
        // |f̂| = |ξ|^β with β = σ1 − d/2 makes 2^{-jσ1}‖Δ̇_j f‖ shell independent
        let c = cut();
        let sigma1 = 0.5;
        let grid = PeriodicGrid::new(1, 8192, 2.0 * PI * 256.0).unwrap();
        let mut f = grid.zeros_spectral();
        for i in 0..grid.len() {
            let k = grid.wavenumber(i);
            if k > 0.0 {
                f.coeffs[i] = k.powf(sigma1 - 0.5).into();
            }
        }
        let norms = shell_norms(&c, &f, 2.0, ShellRange::new(-3, 2));
        let scaled: Vec<f64> = norms.iter().map(|(j, v)| 2f64.powf(-sigma1 * j as f64) * v).collect();
        let mean = scaled.iter().sum::<f64>() / scaled.len() as f64;
        for v in &scaled {
            assert!((v / mean - 1.0).abs() < 0.02, "{scaled:?}");
        }
    }

    #[test]
    fn hybrid_norm_cases() {
        let c = cut();
        let grid = PeriodicGrid::new(1, 256, 2.0 * PI * 8.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = inverse_transform(&random_spectrum(grid, &RandomFieldSpec::band(0.0, 20.0), &mut rng).unwrap());
        let h = hybrid_norm(&c, &f, 0.7, 0.7, 0);
        let b = besov_norm(&c, &f, BesovParams::l2(0.7, 1.0), Band::All);
        assert!((h - b).abs() < 1e-12 * b);
        assert_eq!(hybrid_norm(&c, &f.scaled(0.0), 1.0, 2.0, 0), 0.0);
        let low = inverse_transform(&random_spectrum(grid, &RandomFieldSpec::band(0.0, 0.7), &mut rng).unwrap());
        let h1 = hybrid_norm(&c, &low, 0.5, 1.0, 0);
        let h2 = hybrid_norm(&c, &low, 0.5, 7.0, 0);
        assert!((h1 - h2).abs() < 1e-10 * h1, "{h1} {h2}");
    }

    #[test]
    fn chemin_lerner_curve_matches_prefix_norms() {
        let c = cut();
        let grid = PeriodicGrid::new(1, 64, 20.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let times: Vec<f64> = (0..12).map(|i| 0.3 * i as f64 + 0.05 * (i * i) as f64).collect();
        let fields: Vec<SpectralField> = times
            .iter()
            .map(|_| random_spectrum(grid, &RandomFieldSpec::band(0.0, 8.0), &mut rng).unwrap())
            .collect();
        let series = ShellSeries::from_fields(&c, times.clone(), &fields, 2.0, ShellRange::resolvable(&grid)).unwrap();
        for rho in [1.0, 2.0, f64::INFINITY] {
            let curve = series.chemin_lerner_curve(rho, 0.7, 1.0, Band::low(), |t| (1.0 + t).powi(2)).unwrap();
            for k in 1..times.len() {
                let direct = series
                    .until(times[k])
                    .chemin_lerner(rho, 0.7, 1.0, Band::low(), |t| (1.0 + t).powi(2))
                    .unwrap();
                assert!((curve[k] - direct).abs() <= 1e-12 * direct, "{rho} {k}");
            }
        }
    }

    #[test]
    fn chemin_lerner_basic_cases() {
        let c = cut();
        let g = sin16().add(&PeriodicGrid::new(1, 128, 2.0 * PI).unwrap().sample(|x| (5.0 * x[0]).cos()));
        let params = BesovParams::l2(0.5, 1.0);
        let times: Vec<f64> = (0..50).map(|k| 0.2 * k as f64).collect();
        let constant: Vec<RealField> = times.iter().map(|_| g.clone()).collect();
        let cl = chemin_lerner_norm(&c, &times, &constant, f64::INFINITY, params, Band::All).unwrap();
        let b = besov_norm(&c, &g, params, Band::All);
        assert!((cl - b).abs() < 1e-12 * b);
        let decaying: Vec<RealField> = times.iter().map(|t| g.scaled((-t).exp())).collect();
        let cl = chemin_lerner_norm(&c, &times, &decaying, f64::INFINITY, params, Band::All).unwrap();
        assert!((cl - b).abs() < 1e-12 * b);
        assert!(chemin_lerner_norm(&c, &times[..1], &constant[..1], 2.0, params, Band::All).is_err());
    }

    #[test]
    fn chemin_lerner_dominates_time_first_norm() {
        let c = cut();
        let grid = PeriodicGrid::new(1, 64, 2.0 * PI * 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let range = ShellRange::resolvable(&grid);
        for _ in 0..20 {
            let times: Vec<f64> = (0..30).map(|k| 0.1 * k as f64).collect();
            let spectra: Vec<SpectralField> = times
                .iter()
                .map(|_| random_spectrum(grid, &RandomFieldSpec::band(0.0, 10.0), &mut rng).unwrap())
                .collect();
            let series = ShellSeries::from_fields(&c, times.clone(), &spectra, 2.0, range).unwrap();
            let tilde = series.chemin_lerner(2.0, 0.3, 1.0, Band::All, |_| 1.0).unwrap();
            let per_time: Vec<f64> = series.shells.iter().map(|s| s.combine(0.3, 1.0, Band::All)).collect();
            let plain = (1..times.len())
                .map(|k| 0.5 * (times[k] - times[k - 1]) * (per_time[k].powi(2) + per_time[k - 1].powi(2)))
                .sum::<f64>()
                .sqrt();
            assert!(tilde >= plain * (1.0 - 1e-12), "{tilde} < {plain}");
        }
    }

    #[test]
    fn low_part_bounded_by_low_norm() {
        let c = cut();
        let grid = PeriodicGrid::new(1, 256, 2.0 * PI * 16.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let range = ShellRange::covering(&grid);
        let split = FrequencySplit::default();
        for _ in 0..100 {
            let f = random_spectrum(grid, &RandomFieldSpec::band(0.0, 8.0), &mut rng).unwrap();
            for s in [-0.5, 0.0, 1.0] {
                let lp = besov_norm_over(&c, &low_part(&c, &f, split), BesovParams::l2(s, 1.0), Band::All, range);
                let low = besov_norm_over(&c, &f, BesovParams::l2(s, 1.0), Band::Low(split), range);
                let weaker = besov_norm_over(&c, &f, BesovParams::l2(s - 0.5, 1.0), Band::Low(split), range);
                assert!(lp <= 2.0 * low);
                assert!(low <= 2.0 * weaker);
            }
        }
    }

    #[test]
    fn low_and_high_parts_add_up() {
        let c = cut();
        let grid = PeriodicGrid::new(2, 32, 9.0).unwrap();
        let mut f = random_spectrum(grid, &RandomFieldSpec::band(0.0, 50.0), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        f.coeffs[0] = 0.0.into();
        let split = FrequencySplit { j0: 1 };
        let sum = low_part(&c, &f, split).add(&high_part(&c, &f, split));
        assert!(sum.sub(&f).l2_norm() < 1e-12 * f.l2_norm());
    }

    #[test]
    fn split_overlap() {
        let s = FrequencySplit { j0: 2 };
        let both: Vec<i32> = (-5..6).filter(|&j| s.is_low(j) && s.is_high(j)).collect();
        assert_eq!(both, vec![1, 2]);
    }

    #[test]
    fn resolvable_range_for_unit_box() {
        let grid = PeriodicGrid::new(1, 128, 2.0 * PI).unwrap();
        let r = ShellRange::resolvable(&grid);
        assert_eq!((r.lo, r.hi), (-1, 4));
        let f = forward_transform(&sin16());
        assert!(!shell_norms(&cut(), &f, 2.0, r).truncated);
        assert!(shell_norms(&cut(), &f, 2.0, ShellRange::new(-1, 3)).truncated);
    }

    #[test]
    fn lp_shell_norms_for_other_exponents() {
        let c = cut();
        let f = forward_transform(&sin16());
        let r = ShellRange::resolvable(&f.grid);
        let inf = shell_norms(&c, &f, f64::INFINITY, r);
        assert!((inf.get(3) - c.phi(2.0)).abs() < 1e-12);
        assert!((inf.get(4) - c.phi(1.0)).abs() < 1e-12);
    }

    #[test]
    fn bad_exponents_rejected() {
        assert!(BesovParams::new(0.0, 0.5, 1.0).is_err());
        assert!(BesovParams::new(0.0, 2.0, 0.0).is_err());
        assert!(BesovParams::new(0.0, f64::INFINITY, f64::INFINITY).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn norm_is_absolutely_homogeneous(seed in 0u64..1000, scale in -5.0f64..5.0, s in -1.0f64..2.0) {
            let c = cut();
            let grid = PeriodicGrid::new(1, 64, 10.0).unwrap();
            let f = inverse_transform(&random_spectrum(grid, &RandomFieldSpec::band(0.0, 15.0), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap());
            let p = BesovParams::l2(s, 1.0);
            let a = besov_norm(&c, &f.scaled(scale), p, Band::All);
            let b = scale.abs() * besov_norm(&c, &f, p, Band::All);
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b));
        }

        #[test]
        fn distant_blocks_are_orthogonal(seed in 0u64..1000, j in -2i32..3, gap in 2i32..5) {
            let c = cut();
            let grid = PeriodicGrid::new(2, 32, 8.0).unwrap();
            let f = random_spectrum(grid, &RandomFieldSpec::band(0.0, 30.0), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let both = dyadic_block(&c, &dyadic_block(&c, &f, j + gap), j);
            prop_assert!(both.l2_norm() <= 1e-12 * f.l2_norm());
        }
    }
}
