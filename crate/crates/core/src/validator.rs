//! Empirical checks of the Besov-space inequalities: Bernstein, interpolation,
//! products and the commutator with a dyadic block.
//!
//! Each check draws seeded random fields, evaluates the left-hand side and the
//! right-hand side without its unspecified constant, and reports the worst
//! ratio against a fixed budget.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::littlewood_paley::{dyadic_block, shell_norms, Band, BesovParams, DyadicCutoffs, ShellRange};
use crate::random_fields::{random_spectrum, RandomFieldSpec};
use crate::spectral::{forward_transform, inverse_transform, refine, PeriodicGrid, SpectralField};

pub const DEFAULT_BUDGET: f64 = 16.0;

#[derive(Debug, Clone, PartialEq)]
pub struct InequalityReport {
    pub name: String,
    pub trials: usize,
    pub worst_ratio: f64,
    pub budget: f64,
    /// Smallest ratio and its floor, for two-sided checks.
    pub lower: Option<(f64, f64)>,
    /// Largest `ℓ¹` sum of per-shell ratios (commutator only).
    pub summed_ratio: Option<f64>,
    pub pass: bool,
}

impl InequalityReport {
    fn finish(mut self) -> Self {
        let upper = self.worst_ratio <= self.budget;
        let lower = self.lower.is_none_or(|(m, floor)| m >= floor);
        let summed = self.summed_ratio.is_none_or(|s| s <= self.budget);
        self.pass = upper && lower && summed;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    Ball,
    Annulus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProductVariant {
    /// `‖fg‖_{Ḃ^s} ≲ ‖f‖_∞‖g‖_{Ḃ^s} + ‖g‖_∞‖f‖_{Ḃ^s}`, `s > 0`.
    Algebra,
    /// `‖fg‖_{Ḃ^{s1+s2−d/2}_{2,1}} ≲ ‖f‖_{Ḃ^{s1}_{2,1}}‖g‖_{Ḃ^{s2}_{2,1}}`.
    Summable,
    /// `‖fg‖_{Ḃ^{s1+s2−d/2}_{2,∞}} ≲ ‖f‖_{Ḃ^{s1}_{2,1}}‖g‖_{Ḃ^{s2}_{2,∞}}`.
    Endpoint,
}

impl ProductVariant {
    pub fn name(&self) -> &'static str {
        match self {
            ProductVariant::Algebra => "product-algebra",
            ProductVariant::Summable => "product-summable",
            ProductVariant::Endpoint => "product-endpoint",
        }
    }
}

/// Shared setup for all checks.
#[derive(Debug, Clone)]
pub struct Validator {
    pub cutoffs: DyadicCutoffs,
    pub grid: PeriodicGrid,
    pub seed: u64,
    pub budget: f64,
}

impl Validator {
    pub fn new(cutoffs: DyadicCutoffs, grid: PeriodicGrid, seed: u64) -> Self {
        Self {
            cutoffs,
            grid,
            seed,
            budget: DEFAULT_BUDGET,
        }
    }

    pub fn with_budget(mut self, budget: f64) -> Self {
        self.budget = budget;
        self
    }

    /// Independent stream per check and trial, derived from the master seed.
    fn trial_rng(&self, tag: u64, trial: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        rng.set_stream(trial as u64);
        rng
    }

    fn report(&self, name: String, trials: usize) -> InequalityReport {
        InequalityReport {
            name,
            trials,
            worst_ratio: 0.0,
            budget: self.budget,
            lower: None,
            summed_ratio: None,
            pass: false,
        }
    }

    /// Random coefficients on a random sub-band of the dealiased range,
    /// regenerated until nonzero.
    fn random_band_field(&self, rng: &mut ChaCha8Rng) -> Result<SpectralField> {
        let k0 = self.grid.fundamental();
        let k_max = self.grid.dealias_cutoff();
        loop {
            let hi = rng.random_range((4.0 * k0).min(k_max)..=k_max);
            let lo = rng.random_range(0.0..=0.5 * hi);
            let exponent = rng.random_range(-1.0..=1.0);
            let spec = RandomFieldSpec::band(lo, hi).with_exponent(exponent);
            if let Ok(f) = random_spectrum(self.grid, &spec, rng) {
                if f.l2_norm() > 0.0 {
                    return Ok(f);
                }
            }
        }
    }

    fn norm(&self, f: &SpectralField, s: f64, r: f64) -> f64 {
        shell_norms(&self.cutoffs, f, 2.0, ShellRange::covering(&f.grid)).combine(s, r, Band::All)
    }

    /// `‖|D|^k f‖_{L^b} / (λ^{k + d(1/a − 1/b)} ‖f‖_{L^a})` for `f` supported
    /// in the ball or annulus at scale `λ = 2^j`.
    pub fn check_bernstein(
        &self,
        trials: usize,
        k: u32,
        a_exp: f64,
        b_exp: f64,
        j: i32,
        support: Support,
    ) -> Result<InequalityReport> {
        if !(1.0 <= a_exp && a_exp <= b_exp) {
            return Err(Error::Constraint(format!(
                "Bernstein needs 1 <= a <= b, got a = {a_exp}, b = {b_exp}"
            )));
        }
        let lambda = 2f64.powi(j);
        let spec = match support {
            Support::Ball => RandomFieldSpec::ball(lambda),
            Support::Annulus => RandomFieldSpec::annulus(lambda),
        };
        if spec.k_hi > self.grid.dealias_cutoff() {
            return Err(Error::InvalidParameter(format!(
                "scale 2^{j} is not resolved on the grid"
            )));
        }
        let d = self.grid.dim() as f64;
        let inv = |p: f64| if p.is_infinite() { 0.0 } else { 1.0 / p };
        let scale = lambda.powf(k as f64 + d * (inv(a_exp) - inv(b_exp)));
        let name = format!("bernstein-{support:?}-k{k}").to_lowercase();
        let mut report = self.report(name, trials);
        if support == Support::Annulus {
            let (lo, hi) = if a_exp == 2.0 && b_exp == 2.0 {
                (0.75f64.powi(k as i32), (8.0f64 / 3.0).powi(k as i32))
            } else {
                (1.0 / self.budget, self.budget)
            };
            report.budget = hi;
            report.lower = Some((f64::INFINITY, lo));
        }
        for t in 0..trials {
            let mut rng = self.trial_rng(1, t);
            let f = loop {
                let f = random_spectrum(self.grid, &spec.with_exponent(rng.random_range(-1.0..=1.0)), &mut rng)?;
                if f.l2_norm() > 0.0 {
                    break f;
                }
            };
            let df = f.radial_multiplier(|xi| xi.powi(k as i32));
            let lhs = inverse_transform(&df).lp_norm(b_exp);
            let rhs = scale * inverse_transform(&f).lp_norm(a_exp);
            let ratio = lhs / rhs;
            report.worst_ratio = report.worst_ratio.max(ratio);
            if let Some((m, _)) = report.lower.as_mut() {
                *m = m.min(ratio);
            }
        }
        Ok(report.finish())
    }

    /// `‖f‖_{Ḃ^{θs1+(1−θ)s2}_{p,1}} / (‖f‖^θ_{Ḃ^{s1}_{p,∞}} ‖f‖^{1−θ}_{Ḃ^{s2}_{p,∞}})`.
    /// The budget is applied to the raw ratio, without the `1/(θ(1−θ)(s2−s1))` factor.
    pub fn check_interpolation(&self, trials: usize, s1: f64, s2: f64, theta: f64, p: f64) -> Result<InequalityReport> {
        if !(s1 < s2) || !(theta > 0.0 && theta < 1.0) {
            return Err(Error::Constraint(format!(
                "interpolation needs s1 < s2 and theta in (0,1), got s1 = {s1}, s2 = {s2}, theta = {theta}"
            )));
        }
        let mut report = self.report("interpolation".into(), trials);
        let range = ShellRange::covering(&self.grid);
        let s_mid = theta * s1 + (1.0 - theta) * s2;
        for t in 0..trials {
            let mut rng = self.trial_rng(2, t);
            let f = self.random_band_field(&mut rng)?;
            let shells = shell_norms(&self.cutoffs, &f, p, range);
            let lhs = shells.combine(s_mid, 1.0, Band::All);
            let rhs = shells.combine(s1, f64::INFINITY, Band::All).powf(theta)
                * shells.combine(s2, f64::INFINITY, Band::All).powf(1.0 - theta);
            report.worst_ratio = report.worst_ratio.max(lhs / rhs);
        }
        Ok(report.finish())
    }

    fn validate_product(&self, s1: f64, s2: f64, variant: ProductVariant) -> Result<()> {
        let dp = self.grid.dim() as f64 / 2.0;
        let ok = match variant {
            ProductVariant::Algebra => s1 > 0.0,
            ProductVariant::Summable => s1 <= dp && s2 <= dp && s1 + s2 > 0.0,
            ProductVariant::Endpoint => s1 <= dp && s2 < dp && s1 + s2 >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Constraint(format!(
                "{} does not admit s1 = {s1}, s2 = {s2} in dimension {}",
                variant.name(),
                self.grid.dim()
            )))
        }
    }

    /// Ratio of the product norm to the right-hand side for one pair; the
    /// product is formed on the refined grid so it is alias free.
    pub fn product_ratio(&self, f: &SpectralField, g: &SpectralField, s1: f64, s2: f64, variant: ProductVariant) -> Result<f64> {
        self.validate_product(s1, s2, variant)?;
        let (ff, gf) = (refine(f), refine(g));
        let (fx, gx) = (inverse_transform(&ff), inverse_transform(&gf));
        let fg = forward_transform(&fx.mul(&gx));
        let dp = self.grid.dim() as f64 / 2.0;
        let (lhs, rhs) = match variant {
            ProductVariant::Algebra => {
                let s = s1;
                (
                    self.norm(&fg, s, 1.0),
                    fx.max_abs() * self.norm(g, s, 1.0) + gx.max_abs() * self.norm(f, s, 1.0),
                )
            }
            ProductVariant::Summable => (
                self.norm(&fg, s1 + s2 - dp, 1.0),
                self.norm(f, s1, 1.0) * self.norm(g, s2, 1.0),
            ),
            ProductVariant::Endpoint => (
                self.norm(&fg, s1 + s2 - dp, f64::INFINITY),
                self.norm(f, s1, 1.0) * self.norm(g, s2, f64::INFINITY),
            ),
        };
        Ok(if lhs == 0.0 { 0.0 } else { lhs / rhs })
    }

    pub fn check_product(&self, trials: usize, s1: f64, s2: f64, variant: ProductVariant) -> Result<InequalityReport> {
        self.validate_product(s1, s2, variant)?;
        let mut report = self.report(variant.name().into(), trials);
        for t in 0..trials {
            let mut rng = self.trial_rng(3, t);
            let f = self.random_band_field(&mut rng)?;
            let g = self.random_band_field(&mut rng)?;
            let ratio = self.product_ratio(&f, &g, s1, s2, variant)?;
            report.worst_ratio = report.worst_ratio.max(ratio);
        }
        Ok(report.finish())
    }

    /// Per-shell ratios `2^{j(s+1)}‖[Δ̇_j, f]g‖_{L²} / (‖f‖_{Ḃ^{d/2+1}_{2,1}}‖g‖_{Ḃ^s_{2,1}})`.
    pub fn commutator_ratios(&self, f: &SpectralField, g: &SpectralField, s: f64) -> Result<Vec<(i32, f64)>> {
        let dp = self.grid.dim() as f64 / 2.0;
        if !(s > -dp - 1.0 && s <= dp) {
            return Err(Error::Constraint(format!(
                "commutator regularity {s} outside (-d/2 - 1, d/2]"
            )));
        }
        let rhs = self.norm(f, dp + 1.0, 1.0) * self.norm(g, s, 1.0);
        let (ff, gf) = (refine(f), refine(g));
        let fx = inverse_transform(&ff);
        let fg = forward_transform(&fx.mul(&inverse_transform(&gf)));
        let fine = ff.grid;
        let mut out = Vec::new();
        for j in ShellRange::covering(&fine).iter() {
            let a = inverse_transform(&dyadic_block(&self.cutoffs, &fg, j));
            let b = fx.mul(&inverse_transform(&dyadic_block(&self.cutoffs, &gf, j)));
            let lhs = a.sub(&b).lp_norm(2.0);
            let ratio = if lhs == 0.0 { 0.0 } else { 2f64.powf(j as f64 * (s + 1.0)) * lhs / rhs };
            out.push((j, ratio));
        }
        Ok(out)
    }

    /// Smooth `f` (low band) against rough `g` (full band).
    pub fn check_commutator(&self, trials: usize, s: f64) -> Result<InequalityReport> {
        let mut report = self.report("commutator".into(), trials);
        report.summed_ratio = Some(0.0);
        let k0 = self.grid.fundamental();
        let k_max = self.grid.dealias_cutoff();
        for t in 0..trials {
            let mut rng = self.trial_rng(4, t);
            let f_hi = rng.random_range((2.0 * k0).min(k_max)..=(0.25 * k_max).max(2.0 * k0));
            let f = random_spectrum(
                self.grid,
                &RandomFieldSpec::band(0.0, f_hi).with_exponent(rng.random_range(-2.0..=0.0)),
                &mut rng,
            )?;
            let g = self.random_band_field(&mut rng)?;
            let ratios = self.commutator_ratios(&f, &g, s)?;
            let worst = ratios.iter().fold(0.0f64, |m, (_, r)| m.max(*r));
            let sum: f64 = ratios.iter().map(|(_, r)| r).sum();
            report.worst_ratio = report.worst_ratio.max(worst);
            if let Some(acc) = report.summed_ratio.as_mut() {
                *acc = acc.max(sum);
            }
        }
        Ok(report.finish())
    }

    /// Norm helper exposed for callers building their own fields.
    pub fn besov(&self, f: &SpectralField, params: BesovParams) -> f64 {
        shell_norms(&self.cutoffs, f, params.p, ShellRange::covering(&f.grid)).combine(params.s, params.r, Band::All)
    }
}
