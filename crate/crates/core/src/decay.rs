//! Decay experiments: initial data with prescribed low-frequency regularity,
//! rate fits in linear and nonlinear mode, the damped-mode enhancement of the
//! velocity and the time-weighted functionals.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linear::{semigroup_besov_decay, DecayCurve, RadialProfile};
use crate::littlewood_paley::{shell_norms, Band, DyadicCutoffs, ShellNorms, ShellRange, ShellSeries};
use crate::random_fields::enforce_hermitian;
use crate::rates::{fit_rate, RateFit};
use crate::solver::{Solver, SolverConfig, SpectralState, TrajectoryRecord};
use crate::spectral::{inverse_transform, within_dealias_band, PeriodicGrid};

pub const LINEAR_STATE_TOLERANCE: f64 = 0.05;
pub const LINEAR_VELOCITY_TOLERANCE: f64 = 0.10;
pub const BOX_TOLERANCE: f64 = 0.15;

#[derive(Debug, Clone, PartialEq)]
pub struct InitialDataSpec {
    pub dim: usize,
    /// Low-frequency regularity: the data lie in `Ḃ^{−σ1}_{2,∞}`.
    pub sigma1: f64,
    pub amplitude: f64,
    /// Envelope exponent; `None` means the saturating choice `σ1 − d/2`.
    pub beta: Option<f64>,
    pub r_min: f64,
    pub r_max: f64,
    /// Gaussian roll-off radius of the envelope.
    pub r_cut: f64,
    pub seed: u64,
}

impl InitialDataSpec {
    pub fn new(dim: usize, sigma1: f64, amplitude: f64, seed: u64) -> Self {
        Self {
            dim,
            sigma1,
            amplitude,
            beta: None,
            r_min: 0.0,
            r_max: f64::INFINITY,
            r_cut: 1.0,
            seed,
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or(self.sigma1 - self.dim as f64 / 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::InvalidParameter(format!("dimension {} not in 1..=3", self.dim)));
        }
        let half = self.dim as f64 / 2.0;
        if !(self.sigma1 > -half && self.sigma1 <= half) {
            return Err(Error::Constraint(format!(
                "sigma1 = {} outside (-{half}, {half}]",
                self.sigma1
            )));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidParameter(format!("amplitude {} invalid", self.amplitude)));
        }
        if !(self.r_min >= 0.0 && self.r_max > self.r_min && self.r_cut > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "band [{}, {}] with roll-off {} invalid",
                self.r_min, self.r_max, self.r_cut
            )));
        }
        Ok(())
    }

    /// Extra constraints for the velocity enhancement: `d ≥ 2`, `σ1 ∈ (1 − d/2, d/2]`.
    pub fn validate_enhancement(&self) -> Result<()> {
        self.validate()?;
        let half = self.dim as f64 / 2.0;
        if self.dim < 2 || self.sigma1 <= 1.0 - half {
            return Err(Error::Constraint(format!(
                "velocity enhancement needs d >= 2 and sigma1 in ({}, {half}], got d = {}, sigma1 = {}",
                1.0 - half,
                self.dim,
                self.sigma1
            )));
        }
        Ok(())
    }

    pub fn envelope(&self, r: f64) -> f64 {
        if r <= 0.0 || r < self.r_min || r > self.r_max {
            0.0
        } else {
            r.powf(self.beta()) * (-(r / self.r_cut).powi(2)).exp()
        }
    }

    /// Whole-space profile with the same envelope, for linear-quadrature runs.
    pub fn profile(&self) -> Result<RadialProfile> {
        self.validate()?;
        if self.r_min > 0.0 || self.r_max.is_finite() {
            return Err(Error::InvalidParameter(
                "linear-quadrature runs use the unbanded envelope (r_min = 0, r_max = inf)".into(),
            ));
        }
        Ok(RadialProfile {
            beta: self.beta(),
            r_cut: self.r_cut,
            amplitudes: [self.amplitude; 3],
            r_hi: 30.0 * self.r_cut,
            ..RadialProfile::saturating(self.dim, self.sigma1)
        })
    }
}

/// Random-phase box data with coefficient modulus equal to the envelope
/// (velocity components share it as `1/√d` each), dealiased and scaled so
/// that the largest pointwise value over all fields equals the amplitude.
pub fn generate_initial_data(grid: PeriodicGrid, spec: &InitialDataSpec) -> Result<SpectralState> {
    spec.validate()?;
    if grid.dim() != spec.dim {
        return Err(Error::InvalidGrid(format!(
            "grid dimension {} differs from data dimension {}",
            grid.dim(),
            spec.dim
        )));
    }
    let half = (grid.n() / 2) as i64;
    let usable: Vec<bool> = (0..grid.len())
        .map(|i| {
            let k = grid.wavenumber(i);
            k > 0.0
                && spec.envelope(k) > 0.0
                && within_dealias_band(&grid, i)
                && !grid.modes(i)[..grid.dim()].contains(&half)
        })
        .collect();
    if !usable.iter().any(|&b| b) {
        return Err(Error::InvalidGrid(format!(
            "band [{}, {}] has no resolved modes on this grid",
            spec.r_min, spec.r_max
        )));
    }
    let mut state = SpectralState::zeros(grid);
    if spec.amplitude == 0.0 {
        return Ok(state);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let u_scale = 1.0 / (spec.dim as f64).sqrt();
    let mut fill = |f: &mut crate::spectral::SpectralField, scale: f64| {
        for i in 0..grid.len() {
            let phase: f64 = rng.random_range(0.0..2.0 * PI);
            if usable[i] {
                f.coeffs[i] = Complex64::from_polar(scale * spec.envelope(grid.wavenumber(i)), phase);
            }
        }
        enforce_hermitian(f);
    };
    fill(&mut state.a, 1.0);
    for c in state.u.iter_mut() {
        fill(c, u_scale);
    }
    fill(&mut state.theta, 1.0);
    let peak = state
        .components()
        .map(|c| inverse_transform(c).max_abs())
        .fold(0.0, f64::max);
    Ok(state.scaled(spec.amplitude / peak))
}

/// Per-shell `L²` norms of `a`, `u` (as a vector field) and `θ` along a trajectory.
#[derive(Debug, Clone)]
pub struct TrajectoryShells {
    pub dim: usize,
    pub a: ShellSeries,
    pub u: ShellSeries,
    pub theta: ShellSeries,
}

impl TrajectoryShells {
    pub fn new(cutoffs: &DyadicCutoffs, times: &[f64], snapshots: &[SpectralState]) -> Result<Self> {
        let Some(first) = snapshots.first() else {
            return Err(Error::InsufficientSamples("empty trajectory".into()));
        };
        let grid = first.grid();
        let range = ShellRange::covering(&grid);
        let mut a = Vec::with_capacity(snapshots.len());
        let mut u = Vec::with_capacity(snapshots.len());
        let mut theta = Vec::with_capacity(snapshots.len());
        for s in snapshots {
            a.push(shell_norms(cutoffs, &s.a, 2.0, range));
            theta.push(shell_norms(cutoffs, &s.theta, 2.0, range));
            let parts: Vec<ShellNorms> = s.u.iter().map(|c| shell_norms(cutoffs, c, 2.0, range)).collect();
            u.push(ShellNorms {
                range,
                values: (0..range.len())
                    .map(|k| parts.iter().map(|p| p.values[k].powi(2)).sum::<f64>().sqrt())
                    .collect(),
                truncated: parts.iter().any(|p| p.truncated),
            });
        }
        Ok(Self {
            dim: grid.dim(),
            a: ShellSeries::new(times.to_vec(), a)?,
            u: ShellSeries::new(times.to_vec(), u)?,
            theta: ShellSeries::new(times.to_vec(), theta)?,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.a.times
    }

    fn components(&self) -> [&ShellSeries; 3] {
        [&self.a, &self.u, &self.theta]
    }

    /// Sum over `(a, u, θ)` of a per-snapshot Besov functional.
    fn state_curve(&self, s: f64, r: f64, band: Band) -> Vec<f64> {
        (0..self.times().len())
            .map(|k| self.components().iter().map(|c| c.shells[k].combine(s, r, band)).sum())
            .collect()
    }

    fn u_curve(&self, s: f64, r: f64, band: Band) -> Vec<f64> {
        self.u.shells.iter().map(|sh| sh.combine(s, r, band)).collect()
    }

    /// `δ0 = ‖U0‖^ℓ_{Ḃ^{−σ1}_{2,∞}} + ‖U0‖^h_{Ḃ^{d/2+1}_{2,1}}`.
    pub fn delta0(&self, sigma1: f64) -> f64 {
        let dh = self.dim as f64 / 2.0;
        self.components()
            .iter()
            .map(|c| c.shells[0].combine(-sigma1, f64::INFINITY, Band::low()) + c.shells[0].combine(dh + 1.0, 1.0, Band::high()))
            .sum()
    }

    /// `X0 = ‖U0‖^ℓ_{Ḃ^{d/2}_{2,1}} + ‖U0‖^h_{Ḃ^{d/2+1}_{2,1}}`.
    pub fn x0(&self) -> f64 {
        let dh = self.dim as f64 / 2.0;
        self.components()
            .iter()
            .map(|c| c.shells[0].combine(dh, 1.0, Band::low()) + c.shells[0].combine(dh + 1.0, 1.0, Band::high()))
            .sum()
    }

    /// Decay curves in the layout of the linear-quadrature runs.
    pub fn decay_curve(&self, sigma1: f64, sigma: f64, profile_id: &str) -> DecayCurve {
        DecayCurve {
            dim: self.dim,
            sigma,
            sigma1,
            times: self.times().to_vec(),
            total: self.state_curve(sigma, 1.0, Band::All),
            u: self.u_curve(sigma, 1.0, Band::All),
            total_weak: self.state_curve(-sigma1, f64::INFINITY, Band::low()),
            u_weak: self.u_curve(-sigma1, f64::INFINITY, Band::low()),
            profile_id: profile_id.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    State,
    Velocity,
}

impl Component {
    pub fn name(&self) -> &'static str {
        match self {
            Component::State => "state",
            Component::Velocity => "u",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateTarget {
    pub sigma: f64,
    pub component: Component,
    pub predicted: f64,
    pub tolerance: f64,
}

impl RateTarget {
    /// Full state in `Ḃ^σ_{2,1}`: exponent `−(σ+σ1)/2` for `σ ∈ (−σ1, d/2]`.
    pub fn state(dim: usize, sigma1: f64, sigma: f64, tolerance: f64) -> Result<Self> {
        let half = dim as f64 / 2.0;
        if !(sigma > -sigma1 && sigma <= half) {
            return Err(Error::Constraint(format!(
                "state target needs sigma in (-{sigma1}, {half}], got {sigma}"
            )));
        }
        Ok(Self {
            sigma,
            component: Component::State,
            predicted: -(sigma + sigma1) / 2.0,
            tolerance,
        })
    }

    /// Velocity in `Ḃ^σ_{2,1}`: exponent `−(1+σ+σ1)/2` for `σ ∈ (−σ1, d/2 − 1]`, `d ≥ 2`.
    pub fn velocity(dim: usize, sigma1: f64, sigma: f64, tolerance: f64) -> Result<Self> {
        let half = dim as f64 / 2.0;
        if dim < 2 || sigma1 <= 1.0 - half || sigma1 > half {
            return Err(Error::Constraint(format!(
                "velocity target needs d >= 2 and sigma1 in ({}, {half}]",
                1.0 - half
            )));
        }
        if !(sigma > -sigma1 && sigma <= half - 1.0) {
            return Err(Error::Constraint(format!(
                "velocity target needs sigma in (-{sigma1}, {}], got {sigma}",
                half - 1.0
            )));
        }
        Ok(Self {
            sigma,
            component: Component::Velocity,
            predicted: -(1.0 + sigma + sigma1) / 2.0,
            tolerance,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetFit {
    pub target: RateTarget,
    pub fit: RateFit,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub enum ExperimentMode {
    LinearQuadrature { times: Vec<f64> },
    NonlinearBox { grid: PeriodicGrid, solver: SolverConfig },
}

impl ExperimentMode {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentMode::LinearQuadrature { .. } => "linear-quadrature",
            ExperimentMode::NonlinearBox { .. } => "nonlinear-box",
        }
    }
}

#[derive(Debug, Clone)]
pub struct DecayReport {
    pub dim: usize,
    pub sigma1: f64,
    pub mode: &'static str,
    pub fits: Vec<TargetFit>,
    pub delta0: f64,
    pub x0: f64,
    /// `max_t ‖U(t)‖^ℓ_{Ḃ^{−σ1}_{2,∞}} / δ0`.
    pub weak_bound: f64,
    /// Max over min of `‖U(t)‖^ℓ_{Ḃ^{−σ1}_{2,∞}}` along the run.
    pub weak_ratio: f64,
    pub curves: Vec<DecayCurve>,
}

impl DecayReport {
    pub fn passed(&self) -> bool {
        self.fits.iter().all(|f| f.pass)
    }
}

fn distinct_sigmas(targets: &[RateTarget]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for t in targets {
        if !out.contains(&t.sigma) {
            out.push(t.sigma);
        }
    }
    out
}

fn fit_targets(targets: &[RateTarget], curves: &[DecayCurve], window: (f64, f64)) -> Result<Vec<TargetFit>> {
    targets
        .iter()
        .map(|target| {
            let curve = curves
                .iter()
                .find(|c| c.sigma == target.sigma)
                .expect("a curve exists for every target sigma");
            let values = match target.component {
                Component::State => &curve.total,
                Component::Velocity => &curve.u,
            };
            let fit = fit_rate(&curve.times, values, window)?;
            Ok(TargetFit {
                target: *target,
                pass: fit.within(target.predicted, target.tolerance),
                fit,
            })
        })
        .collect()
}

fn max_over_min(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(0.0, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Runs the experiment and fits every target over `window`.
pub fn run_decay_experiment(
    cutoffs: &DyadicCutoffs,
    spec: &InitialDataSpec,
    targets: &[RateTarget],
    mode: &ExperimentMode,
    window: (f64, f64),
) -> Result<DecayReport> {
    spec.validate()?;
    let sigmas = distinct_sigmas(targets);
    let dh = spec.dim as f64 / 2.0;
    let (curves, delta0, x0) = match mode {
        ExperimentMode::LinearQuadrature { times } => {
            let profile = spec.profile()?;
            let curves = sigmas
                .iter()
                .map(|&s| semigroup_besov_decay(cutoffs, &profile, spec.sigma1, s, times))
                .collect::<Result<Vec<_>>>()?;
            // whole-space data: full-band norms at t = 0 stand in for the split ones
            let at0 = |s: f64| semigroup_besov_decay(cutoffs, &profile, spec.sigma1, s, &[0.0]);
            let top = at0(dh + 1.0)?;
            let delta0 = top.total_weak[0] + top.total[0];
            let x0 = at0(dh)?.total[0] + top.total[0];
            (curves, delta0, x0)
        }
        ExperimentMode::NonlinearBox { grid, solver } => {
            if window.1 > grid.length() / 2.0 {
                return Err(Error::Constraint(format!(
                    "box fit window ends at {} beyond L/2 = {}",
                    window.1,
                    grid.length() / 2.0
                )));
            }
            let data = generate_initial_data(*grid, spec)?;
            let run = Solver::new(*grid, solver.clone())?;
            let record = run.integrate(&data, 0.0, cutoffs, None)?;
            return box_decay_report(cutoffs, spec, targets, &record, window);
        }
    };
    assemble_report(spec, targets, mode.name(), curves, delta0, x0, window)
}

/// Decay report of an existing box trajectory started from `spec` data.
pub fn box_decay_report(
    cutoffs: &DyadicCutoffs,
    spec: &InitialDataSpec,
    targets: &[RateTarget],
    record: &TrajectoryRecord,
    window: (f64, f64),
) -> Result<DecayReport> {
    let grid = record.last().grid();
    if window.1 > grid.length() / 2.0 {
        return Err(Error::Constraint(format!(
            "box fit window ends at {} beyond L/2 = {}",
            window.1,
            grid.length() / 2.0
        )));
    }
    let shells = TrajectoryShells::new(cutoffs, &record.times, &record.snapshots)?;
    let id = format!("box-n{}-seed{}", grid.n(), spec.seed);
    let curves = distinct_sigmas(targets)
        .iter()
        .map(|&s| shells.decay_curve(spec.sigma1, s, &id))
        .collect();
    let (delta0, x0) = (shells.delta0(spec.sigma1), shells.x0());
    assemble_report(spec, targets, "nonlinear-box", curves, delta0, x0, window)
}

fn assemble_report(
    spec: &InitialDataSpec,
    targets: &[RateTarget],
    mode: &'static str,
    curves: Vec<DecayCurve>,
    delta0: f64,
    x0: f64,
    window: (f64, f64),
) -> Result<DecayReport> {
    let fits = fit_targets(targets, &curves, window)?;
    let (weak_bound, weak_ratio) = match curves.first() {
        Some(c) => (
            c.total_weak.iter().cloned().fold(0.0, f64::max) / delta0,
            max_over_min(&c.total_weak),
        ),
        None => (0.0, 1.0),
    };
    Ok(DecayReport {
        dim: spec.dim,
        sigma1: spec.sigma1,
        mode,
        fits,
        delta0,
        x0,
        weak_bound,
        weak_ratio,
        curves,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnhancementReport {
    /// `false` for diagnostic runs outside `d ≥ 2`, `σ1 ∈ (1 − d/2, d/2]`.
    pub in_enhancement_regime: bool,
    /// Relative Duhamel reconstruction error, when a trajectory was supplied.
    pub duhamel_error: Option<f64>,
    pub weak_fit: RateFit,
    pub weak_pass: bool,
    pub strong_fit: RateFit,
    pub strong_predicted: f64,
    pub strong_pass: bool,
    /// Max over min of the state's `Ḃ^{−σ1}_{2,∞}` norm.
    pub state_weak_ratio: f64,
}

impl EnhancementReport {
    pub fn passed(&self) -> bool {
        self.weak_pass && self.strong_pass
    }
}

/// Checks `‖u‖_{Ḃ^{−σ1}_{2,∞}}` decays at least like `(1+t)^{−1/2}` and
/// `‖u‖_{Ḃ^σ_{2,1}}` like `(1+t)^{−(1+σ+σ1)/2}` on an existing curve.
pub fn damped_mode_from_curve(
    curve: &DecayCurve,
    window: (f64, f64),
    weak_tolerance: f64,
    strong_tolerance: f64,
) -> Result<EnhancementReport> {
    let half = curve.dim as f64 / 2.0;
    let weak_fit = fit_rate(&curve.times, &curve.u_weak, window)?;
    let strong_fit = fit_rate(&curve.times, &curve.u, window)?;
    let strong_predicted = -(1.0 + curve.sigma + curve.sigma1) / 2.0;
    Ok(EnhancementReport {
        in_enhancement_regime: curve.dim >= 2 && curve.sigma1 > 1.0 - half && curve.sigma1 <= half,
        duhamel_error: None,
        weak_pass: weak_fit.exponent <= -0.5 + weak_tolerance,
        weak_fit,
        strong_pass: strong_fit.within(strong_predicted, strong_tolerance),
        strong_fit,
        strong_predicted,
        state_weak_ratio: max_over_min(&curve.total_weak),
    })
}

/// Largest snapshot spacing accepted by the Duhamel reconstruction.
pub const MAX_DUHAMEL_STRIDE: f64 = 0.25;

/// Rebuilds `u(t) = e^{−t}u0 + ∫₀ᵗ e^{−(t−τ)} F(τ) dτ` with
/// `F = −∇a − ∇θ − u·∇u − ((θ−a)/(1+a))∇a` from the stored snapshots,
/// integrating the piecewise-linear interpolant of `F` against the exact
/// kernel. Returns `max_k ‖u_rec(t_k) − u(t_k)‖ / max_k ‖u(t_k)‖`.
pub fn duhamel_defect(solver: &Solver, record: &TrajectoryRecord) -> Result<f64> {
    let times = &record.times;
    if times.len() < 2 {
        return Err(Error::StrideTooCoarse("Duhamel check needs at least two snapshots".into()));
    }
    let widest = times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if widest > MAX_DUHAMEL_STRIDE {
        return Err(Error::StrideTooCoarse(format!(
            "snapshot spacing {widest} exceeds {MAX_DUHAMEL_STRIDE}"
        )));
    }
    let forcing = |k: usize| -> Result<Vec<crate::spectral::SpectralField>> {
        let s = &record.snapshots[k];
        let rhs = solver.nonlinear_rhs(s, times[k])?;
        Ok(rhs.u.iter().zip(&s.u).map(|(du, u)| du.add(u)).collect())
    };
    let norm = |v: &[crate::spectral::SpectralField]| v.iter().map(|c| c.l2_norm().powi(2)).sum::<f64>().sqrt();
    let mut rec = record.snapshots[0].u.clone();
    let mut f_prev = forcing(0)?;
    let mut worst: f64 = 0.0;
    let mut scale = norm(&rec);
    for k in 1..times.len() {
        let h = times[k] - times[k - 1];
        let decay = (-h).exp();
        let w1 = (h - 1.0 + decay) / h;
        let w0 = (1.0 - decay) - w1;
        let f_next = forcing(k)?;
        for c in 0..rec.len() {
            rec[c] = rec[c]
                .scaled(decay)
                .add(&f_prev[c].scaled(w0))
                .add(&f_next[c].scaled(w1));
        }
        let actual = &record.snapshots[k].u;
        let diff: Vec<_> = rec.iter().zip(actual).map(|(r, a)| r.sub(a)).collect();
        worst = worst.max(norm(&diff));
        scale = scale.max(norm(actual));
        f_prev = f_next;
    }
    Ok(if scale > 0.0 { worst / scale } else { 0.0 })
}

/// Enhancement check on a box trajectory, including the Duhamel reconstruction.
pub fn damped_mode_check(
    cutoffs: &DyadicCutoffs,
    solver: &Solver,
    record: &TrajectoryRecord,
    sigma1: f64,
    sigma: f64,
    window: (f64, f64),
) -> Result<EnhancementReport> {
    let shells = TrajectoryShells::new(cutoffs, &record.times, &record.snapshots)?;
    let curve = shells.decay_curve(sigma1, sigma, "trajectory");
    let mut report = damped_mode_from_curve(&curve, window, LINEAR_STATE_TOLERANCE, BOX_TOLERANCE)?;
    report.duhamel_error = Some(duhamel_defect(solver, record)?);
    Ok(report)
}

/// `max_{t ≤ t_max} (1+t)^{1/2} ∫₀ᵗ e^{−(t−τ)} (1+τ)^{−1/2} dτ`, with the
/// integral advanced exactly for the piecewise-linear interpolant on step `h`.
pub fn convolution_bound(t_max: f64, h: f64) -> f64 {
    let f = |t: f64| (1.0 + t).powf(-0.5);
    let decay = (-h).exp();
    let w1 = (h - 1.0 + decay) / h;
    let w0 = (1.0 - decay) - w1;
    let steps = (t_max / h).ceil() as usize;
    let mut integral = 0.0;
    let mut worst: f64 = 0.0;
    for n in 1..=steps {
        let (t0, t1) = ((n - 1) as f64 * h, n as f64 * h);
        integral = decay * integral + w0 * f(t0) + w1 * f(t1);
        worst = worst.max(integral / f(t1));
    }
    worst
}

/// Running values of the time-weighted functional `X_M`, the low-frequency
/// functional `X_{L,σ1}` and the global functional `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalCurves {
    pub times: Vec<f64>,
    pub m_exp: f64,
    pub x_m: Vec<f64>,
    pub x_l: Vec<f64>,
    pub x: Vec<f64>,
    pub delta0: f64,
    pub x0: f64,
    /// `M − (d/2 + σ1)/2`.
    pub predicted_growth: f64,
    /// `None` when the window holds too few samples to fit.
    pub growth: Option<RateFit>,
}

impl FunctionalCurves {
    pub fn max_x_l_ratio(&self) -> f64 {
        if self.delta0 == 0.0 {
            return 0.0;
        }
        self.x_l.iter().cloned().fold(0.0, f64::max) / self.delta0
    }

    pub fn max_x_ratio(&self) -> f64 {
        if self.x0 == 0.0 {
            return 0.0;
        }
        self.x.iter().cloned().fold(0.0, f64::max) / self.x0
    }
}

fn sum_curves(parts: Vec<Vec<f64>>) -> Vec<f64> {
    let n = parts.first().map_or(0, Vec::len);
    (0..n).map(|k| parts.iter().map(|p| p[k]).sum()).collect()
}

/// Weighted energy pieces shared by `X_M` (weight `(1+τ)^M`) and `X` (weight 1).
fn energy_functional<W: Fn(f64) -> f64 + Copy>(sh: &TrajectoryShells, w: W) -> Result<Vec<f64>> {
    let dh = sh.dim as f64 / 2.0;
    let (lo, hi) = (Band::low(), Band::high());
    let inf = f64::INFINITY;
    let mut parts = Vec::new();
    for c in [&sh.a, &sh.u, &sh.theta] {
        parts.push(c.chemin_lerner_curve(inf, dh, 1.0, lo, w)?);
        parts.push(c.chemin_lerner_curve(inf, dh + 1.0, 1.0, hi, w)?);
    }
    for c in [&sh.a, &sh.theta] {
        parts.push(c.chemin_lerner_curve(2.0, dh + 1.0, 1.0, lo, w)?);
    }
    parts.push(sh.u.chemin_lerner_curve(2.0, dh, 1.0, lo, w)?);
    for c in [&sh.a, &sh.u] {
        parts.push(c.chemin_lerner_curve(2.0, dh + 1.0, 1.0, hi, w)?);
    }
    parts.push(sh.theta.chemin_lerner_curve(2.0, dh + 2.0, 1.0, hi, w)?);
    Ok(sum_curves(parts))
}

/// Assembles `X_M`, `X_{L,σ1}` and `X` from a trajectory by time quadrature
/// and fits the growth exponent of `X_M` over `window`.
pub fn time_weighted_functionals(
    cutoffs: &DyadicCutoffs,
    times: &[f64],
    snapshots: &[SpectralState],
    m_exp: f64,
    sigma1: f64,
    window: (f64, f64),
) -> Result<FunctionalCurves> {
    let sh = TrajectoryShells::new(cutoffs, times, snapshots)?;
    let dh = sh.dim as f64 / 2.0;
    let m_min = 1.0 + 0.5 * (dh + sigma1);
    if !(m_exp > m_min) {
        return Err(Error::Constraint(format!("M = {m_exp} must exceed {m_min}")));
    }
    let x_m = energy_functional(&sh, |t| (1.0 + t).powf(m_exp))?;
    let x = energy_functional(&sh, |_| 1.0)?;
    let lo = Band::low();
    let inf = f64::INFINITY;
    let one = |_: f64| 1.0;
    let x_l = sum_curves(vec![
        sh.a.chemin_lerner_curve(inf, -sigma1, inf, lo, one)?,
        sh.u.chemin_lerner_curve(inf, -sigma1, inf, lo, one)?,
        sh.theta.chemin_lerner_curve(inf, -sigma1, inf, lo, one)?,
        sh.a.chemin_lerner_curve(2.0, 1.0 - sigma1, inf, lo, one)?,
        sh.u.chemin_lerner_curve(2.0, -sigma1, inf, lo, one)?,
        sh.theta.chemin_lerner_curve(2.0, 1.0 - sigma1, inf, lo, one)?,
    ]);
    let growth = match fit_rate(times, &x_m, window) {
        Ok(f) => Some(f),
        Err(Error::InsufficientSamples(_)) | Err(Error::NonPositive { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(FunctionalCurves {
        times: times.to_vec(),
        m_exp,
        x_m,
        x_l,
        x,
        delta0: sh.delta0(sigma1),
        x0: sh.x0(),
        predicted_growth: m_exp - 0.5 * (dh + sigma1),
        growth,
    })
}
