//! One function per experiment kind. Each returns verdicts, text artifacts
//! and warnings; nothing here touches the clock, so equal configurations
//! give equal outcomes.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use eflab_core::decay::{
    box_decay_report, convolution_bound, damped_mode_check, damped_mode_from_curve, duhamel_defect,
    generate_initial_data, run_decay_experiment, time_weighted_functionals, DecayReport, ExperimentMode,
    InitialDataSpec, RateTarget, BOX_TOLERANCE, LINEAR_STATE_TOLERANCE, LINEAR_VELOCITY_TOLERANCE,
};
use eflab_core::linear::semigroup_besov_decay;
use eflab_core::littlewood_paley::{dyadic_block, shell_norms, DyadicCutoffs, FrequencySplit, ShellRange};
use eflab_core::lyapunov::{
    check_coercivity, lyapunov_residual, mode_energy_record, records_to_csv, Regime,
};
use eflab_core::random_fields::{random_spectrum, RandomFieldSpec};
use eflab_core::rates::log_times;
use eflab_core::solver::{
    linear_box_evolution, read_checkpoint, write_checkpoint, Solver, SolverConfig, SpectralState, TrajectoryRecord,
};
use eflab_core::spectral::{inverse_transform, PeriodicGrid, SpectralField};
use eflab_core::validator::{ProductVariant, Support, Validator};

use crate::config::{velocity_admissible, Experiment, RunConfig, SweepCase};
use crate::verdict::Verdict;
use crate::CliError;

/// Bounds of the exactness checks on the dyadic partition.
pub const PARTITION_TOLERANCE: f64 = 1e-12;
pub const TELESCOPING_TOLERANCE: f64 = 1e-10;
pub const DISJOINTNESS_TOLERANCE: f64 = 1e-12;
/// Relative drift of the total mass accepted over a box run.
pub const MASS_TOLERANCE: f64 = 1e-10;
/// Amplitude ratio of the two consistency runs and the accepted window on
/// the ratio of their deviations from the linear evolution.
pub const AMPLITUDE_STEP: f64 = 10.0;
pub const QUADRATIC_WINDOW: (f64, f64) = (50.0, 200.0);
pub const RICHARDSON_WINDOW: (f64, f64) = (3.5, 4.5);
pub const CONVOLUTION_CONSTANT: f64 = 3.0;
/// Slack on the exact coercivity bounds.
pub const ARITHMETIC_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub verdicts: Vec<Verdict>,
    /// `(file name, contents)` written next to the verdicts.
    pub artifacts: Vec<(String, String)>,
    /// Files already written into the run directory.
    pub written: Vec<String>,
    pub warnings: Vec<String>,
}

impl Outcome {
    fn extend(&mut self, other: Outcome) {
        self.verdicts.extend(other.verdicts);
        self.artifacts.extend(other.artifacts);
        self.written.extend(other.written);
        self.warnings.extend(other.warnings);
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }
}

/// Runs the configured experiment. `dir`, when given, receives binary
/// outputs such as checkpoints.
pub fn execute(config: &RunConfig, dir: Option<&Path>) -> Result<Outcome, CliError> {
    match config.experiment {
        Experiment::LpInspect => lp_inspect(config),
        Experiment::Validate => validate(config),
        Experiment::LinearDecay => linear_decay(config),
        Experiment::Sweep => sweep(config),
        Experiment::Simulate => simulate(config, dir),
        Experiment::DecayFit => decay_fit(config),
        Experiment::Lyapunov => lyapunov(config),
        Experiment::DampedMode => damped_mode(config),
    }
}

fn cutoffs(c: &RunConfig) -> Result<DyadicCutoffs, CliError> {
    Ok(DyadicCutoffs::build(c.f64("sharpness")?)?)
}

fn grid(c: &RunConfig, dim: usize) -> Result<PeriodicGrid, CliError> {
    Ok(PeriodicGrid::new(dim, c.usize("n")?, 2.0 * PI * c.f64("periods")?)?)
}

fn data_spec(c: &RunConfig, dim: usize, sigma1: f64) -> Result<InitialDataSpec, CliError> {
    Ok(InitialDataSpec {
        beta: c.opt_f64("beta")?,
        r_cut: c.f64("r_cut")?,
        ..InitialDataSpec::new(dim, sigma1, c.f64("amplitude")?, c.seed())
    })
}

fn solver_config(c: &RunConfig) -> Result<SolverConfig, CliError> {
    Ok(SolverConfig {
        dt: c.f64("dt")?,
        t_end: c.f64("t_end")?,
        cfl_safety: c.f64("cfl_safety")?,
        positivity_floor: c.f64("positivity_floor")?,
        dealias: true,
        eps0: c.opt_f64("eps0")?,
        snapshot_stride: c.usize("snapshot_stride")?,
        hook_stride: 0,
    })
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

// ---------------------------------------------------------------- lp-inspect

/// Largest deviation from 1 of `Σ_j φ(2^{−j} r)` over log-uniform radii in `[2^{−30}, 2^{30}]`.
pub fn partition_residual(cutoffs: &DyadicCutoffs, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| {
            let r = 2f64.powf(rng.random_range(-30.0..30.0));
            let sum: f64 = cutoffs.shells_containing(r).map(|j| cutoffs.shell_weight(j, r)).sum();
            (sum - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

/// `(telescoping error, disjointness error)` of one field with unit peak:
/// `max|Σ_j Δ̇_j f − (f − mean)|` and `max_{|j−j′|≥2} |⟨Δ̇_j f, Δ̇_{j′} f⟩| / ‖f‖²`.
pub fn block_exactness(cutoffs: &DyadicCutoffs, f: &SpectralField) -> (f64, f64) {
    let range = ShellRange::covering(&f.grid);
    let blocks: Vec<SpectralField> = range.iter().map(|j| dyadic_block(cutoffs, f, j)).collect();
    let mut sum = f.grid.zeros_spectral();
    for b in &blocks {
        sum = sum.add(b);
    }
    let mut mean_free = f.clone();
    mean_free.coeffs[0] = 0.0.into();
    let tele = inverse_transform(&sum).sub(&inverse_transform(&mean_free)).max_abs();
    let norm2 = f.l2_norm().powi(2);
    let mut disjoint: f64 = 0.0;
    for (i, bi) in blocks.iter().enumerate() {
        for bj in blocks.iter().skip(i + 2) {
            let dot: f64 = bi.coeffs.iter().zip(&bj.coeffs).map(|(x, y)| (x * y.conj()).re).sum();
            disjoint = disjoint.max(dot.abs() * f.grid.volume() / norm2);
        }
    }
    (tele, disjoint)
}

fn random_unit_field(grid: PeriodicGrid, seed: u64, trial: usize) -> Result<SpectralField, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    let spec = RandomFieldSpec::band(0.0, grid.nyquist()).with_exponent(rng.random_range(-1.0..=1.0));
    let mut f = random_spectrum(grid, &spec, &mut rng)?;
    f.coeffs[0] = rng.random_range(-1.0..=1.0f64).into();
    let peak = inverse_transform(&f).max_abs();
    Ok(f.scaled(1.0 / peak))
}

fn lp_inspect(c: &RunConfig) -> Result<Outcome, CliError> {
    let cut = cutoffs(c)?;
    let g = grid(c, c.dim())?;
    let seed = c.seed();
    let trials = c.usize("trials")?;
    let residual = partition_residual(&cut, c.usize("radii")?, seed);
    let errors = (0..trials)
        .into_par_iter()
        .map(|t| Ok(block_exactness(&cut, &random_unit_field(g, seed, t)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let tele = errors.iter().map(|e| e.0).fold(0.0, f64::max);
    let disjoint = errors.iter().map(|e| e.1).fold(0.0, f64::max);
    let mut shells = String::new();
    let _ = writeln!(shells, "# dim={} n={} length={} seed={seed} trial=0", g.dim(), g.n(), g.length());
    let _ = writeln!(shells, "j,l2_norm");
    if trials > 0 {
        let f = random_unit_field(g, seed, 0)?;
        for (j, v) in shell_norms(&cut, &f, 2.0, ShellRange::covering(&g)).iter() {
            let _ = writeln!(shells, "{j},{v:.12e}");
        }
    }
    Ok(Outcome {
        verdicts: vec![
            Verdict::at_most("lp.partition-of-unity", PARTITION_TOLERANCE, residual, 0.0),
            Verdict::at_most("lp.telescoping", TELESCOPING_TOLERANCE, tele, 0.0),
            Verdict::at_most("lp.shell-disjointness", DISJOINTNESS_TOLERANCE, disjoint, 0.0),
        ],
        artifacts: vec![
            ("cutoff.csv".into(), cut.tabulate(4.0, 401)),
            ("shells.csv".into(), shells),
        ],
        ..Outcome::default()
    })
}

// ------------------------------------------------------------------ validate

fn validate(c: &RunConfig) -> Result<Outcome, CliError> {
    let g = grid(c, c.dim())?;
    let v = Validator::new(cutoffs(c)?, g, c.seed()).with_budget(c.f64("budget")?);
    let trials = c.usize("trials")?;
    let dh = g.dim() as f64 / 2.0;
    // finest shell whose annulus [3/4, 8/3]·2^j fits under the dealiasing cutoff
    let j_top = (g.dealias_cutoff() * 3.0 / 8.0).log2().floor() as i32;
    type Check<'a> = Box<dyn Fn() -> eflab_core::Result<eflab_core::validator::InequalityReport> + Send + Sync + 'a>;
    let checks: Vec<Check> = vec![
        Box::new(|| v.check_bernstein(trials, 1, 2.0, 2.0, j_top, Support::Annulus)),
        Box::new(|| v.check_bernstein(trials, 2, 2.0, 2.0, j_top, Support::Annulus)),
        Box::new(|| v.check_interpolation(trials, 0.0, 1.0, 0.5, 2.0)),
        Box::new(|| v.check_product(trials, dh / 2.0, dh / 2.0, ProductVariant::Algebra)),
        Box::new(|| v.check_product(trials, dh / 2.0, dh / 2.0, ProductVariant::Summable)),
        Box::new(|| v.check_product(trials, dh, -dh / 2.0, ProductVariant::Endpoint)),
        Box::new(|| v.check_commutator(trials, 0.0)),
    ];
    let reports = checks.par_iter().map(|f| f()).collect::<eflab_core::Result<Vec<_>>>()?;
    let mut out = Outcome::default();
    let mut csv = String::from("# inequality ratios over random trials\nname,trials,worst_ratio,budget,min_ratio,floor,summed_ratio\n");
    for r in &reports {
        let name = format!("validate.{}", r.name);
        out.verdicts.push(Verdict::at_most(format!("{name}.upper"), r.budget, r.worst_ratio, 0.0));
        if let Some((m, floor)) = r.lower {
            out.verdicts.push(Verdict::at_least(format!("{name}.lower"), floor, m, 0.0));
        }
        if let Some(s) = r.summed_ratio {
            out.verdicts.push(Verdict::at_most(format!("{name}.summed"), r.budget, s, 0.0));
        }
        let (m, floor) = r.lower.map_or((String::new(), String::new()), |(m, f)| (fmt_num(m), fmt_num(f)));
        let _ = writeln!(
            csv,
            "{},{},{},{},{m},{floor},{}",
            r.name,
            r.trials,
            r.worst_ratio,
            r.budget,
            r.summed_ratio.map_or(String::new(), fmt_num)
        );
    }
    out.artifacts.push(("inequalities.csv".into(), csv));
    Ok(out)
}

// --------------------------------------------------------- linear-decay/sweep

fn rate_targets(dim: usize, sigma1: f64, sigmas: &[f64], state_tol: f64, u_tol: f64) -> Result<Vec<RateTarget>, CliError> {
    let mut targets = Vec::new();
    for &s in sigmas {
        targets.push(RateTarget::state(dim, sigma1, s, state_tol)?);
        if velocity_admissible(dim, sigma1, s) {
            targets.push(RateTarget::velocity(dim, sigma1, s, u_tol)?);
        }
    }
    Ok(targets)
}

fn decay_verdicts(prefix: &str, report: &DecayReport, bound: f64) -> Vec<Verdict> {
    let mut out: Vec<Verdict> = report
        .fits
        .iter()
        .map(|f| {
            Verdict::near(
                format!("{prefix}rate.{}.sigma={}", f.target.component.name(), f.target.sigma),
                f.target.predicted,
                f.fit.exponent,
                f.target.tolerance,
            )
        })
        .collect();
    out.push(Verdict::at_most(format!("{prefix}weak-norm.bounded"), bound, report.weak_bound, 0.0));
    out
}

fn decay_artifacts(prefix: &str, report: &DecayReport) -> Vec<(String, String)> {
    report
        .curves
        .iter()
        .map(|cv| (format!("{prefix}decay-sigma{}.csv", cv.sigma), cv.to_csv()))
        .collect()
}

fn linear_case(c: &RunConfig, case: &SweepCase, prefix: &str) -> Result<Outcome, CliError> {
    let spec = data_spec(c, case.dim, case.sigma1)?;
    let targets = rate_targets(
        case.dim,
        case.sigma1,
        &case.sigmas,
        LINEAR_STATE_TOLERANCE,
        LINEAR_VELOCITY_TOLERANCE,
    )?;
    let window = c.window();
    let times = log_times(c.f64("t_sample_min")?, window.1, c.usize("samples")?);
    let report = run_decay_experiment(
        &cutoffs(c)?,
        &spec,
        &targets,
        &ExperimentMode::LinearQuadrature { times },
        window,
    )?;
    Ok(Outcome {
        verdicts: decay_verdicts(prefix, &report, c.f64("bound")?),
        artifacts: decay_artifacts(prefix, &report),
        ..Outcome::default()
    })
}

fn linear_decay(c: &RunConfig) -> Result<Outcome, CliError> {
    let case = SweepCase {
        dim: c.dim(),
        sigma1: c.f64("sigma1")?,
        sigmas: c.f64_list("sigma")?,
    };
    linear_case(c, &case, "")
}

fn sweep(c: &RunConfig) -> Result<Outcome, CliError> {
    let cases = c.sweep_cases()?;
    let parts = cases
        .par_iter()
        .map(|case| linear_case(c, case, &format!("d{}.sigma1={}.", case.dim, case.sigma1)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Outcome::default();
    for p in parts {
        out.extend(p);
    }
    Ok(out)
}

// ------------------------------------------------------------------ simulate

fn mean(f: &SpectralField) -> f64 {
    f.coeffs[0].re
}

fn norms_csv(record: &TrajectoryRecord, header: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {header}");
    let _ = writeln!(out, "t,l2_a,l2_u,l2_theta,mean_a,min_1_plus_a,min_1_plus_theta");
    for (t, s) in record.times.iter().zip(&record.snapshots) {
        let u = s.u.iter().map(|f| f.l2_norm().powi(2)).sum::<f64>().sqrt();
        let _ = writeln!(
            out,
            "{t:.12e},{:.12e},{u:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            s.a.l2_norm(),
            s.theta.l2_norm(),
            mean(&s.a),
            1.0 + inverse_transform(&s.a).min(),
            1.0 + inverse_transform(&s.theta).min()
        );
    }
    out
}

/// Largest `|∫ρ(t) − ∫ρ(0)| / ∫ρ(0)` with `ρ = 1 + a`.
pub fn mass_drift(record: &TrajectoryRecord) -> f64 {
    let m0 = 1.0 + mean(&record.snapshots[0].a);
    record
        .snapshots
        .iter()
        .map(|s| (mean(&s.a) - mean(&record.snapshots[0].a)).abs() / m0)
        .fold(0.0, f64::max)
}

/// Measurements of the box solver against the exact linear evolution and
/// under time-step refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct Consistency {
    /// Deviations `‖U_nl(T) − e^{TL}U0‖` at amplitudes `A` and `A/10`.
    pub deviations: (f64, f64),
    pub deviation_ratio: f64,
    pub mass_drift: f64,
    /// `‖U_h − U_{h/2}‖ / ‖U_{h/2} − U_{h/4}‖` at time `T`.
    pub richardson: f64,
}

pub fn consistency(
    cutoffs: &DyadicCutoffs,
    grid: PeriodicGrid,
    spec: &InitialDataSpec,
    solver: &SolverConfig,
) -> Result<Consistency, CliError> {
    let run = |amp: f64, dt: f64| -> Result<(SpectralState, TrajectoryRecord), CliError> {
        let data = generate_initial_data(grid, &InitialDataSpec { amplitude: amp, ..spec.clone() })?;
        let cfg = SolverConfig {
            dt,
            snapshot_stride: 1,
            ..solver.clone()
        };
        let rec = Solver::new(grid, cfg)?.integrate(&data, 0.0, cutoffs, None)?;
        Ok((data, rec))
    };
    let deviation = |amp: f64| -> Result<(f64, f64), CliError> {
        let (data, rec) = run(amp, solver.dt)?;
        let lin = linear_box_evolution(&data, *rec.times.last().expect("endpoint stored"));
        Ok((rec.last().sub(&lin).l2_norm(), mass_drift(&rec)))
    };
    let amplitudes = [spec.amplitude, spec.amplitude / AMPLITUDE_STEP];
    let devs = amplitudes.par_iter().map(|&a| deviation(a)).collect::<Result<Vec<_>, _>>()?;
    let steps = [solver.dt, solver.dt / 2.0, solver.dt / 4.0];
    let finals = steps
        .par_iter()
        .map(|&dt| run(spec.amplitude, dt).map(|(_, r)| r.last().clone()))
        .collect::<Result<Vec<_>, _>>()?;
    let coarse = finals[0].sub(&finals[1]).l2_norm();
    let fine = finals[1].sub(&finals[2]).l2_norm();
    Ok(Consistency {
        deviations: (devs[0].0, devs[1].0),
        deviation_ratio: devs[0].0 / devs[1].0,
        mass_drift: devs[0].1.max(devs[1].1),
        richardson: coarse / fine,
    })
}

fn simulate(c: &RunConfig, dir: Option<&Path>) -> Result<Outcome, CliError> {
    let cut = cutoffs(c)?;
    let sc = solver_config(c)?;
    let resume = c.raw("resume");
    let (data, t0, g, spec) = if resume.is_empty() {
        let g = grid(c, c.dim())?;
        let spec = data_spec(c, c.dim(), c.f64("sigma1")?)?;
        (generate_initial_data(g, &spec)?, 0.0, g, Some(spec))
    } else {
        let (state, t, _) = read_checkpoint(Path::new(resume))?;
        let g = state.grid();
        (state, t, g, None)
    };
    let solver = Solver::new(g, sc.clone())?;
    let record = solver.integrate(&data, t0, &cut, None)?;
    let mut out = Outcome::default();
    let drift = mass_drift(&record);
    out.verdicts.push(Verdict::at_most("simulate.mass-drift", MASS_TOLERANCE, drift, 0.0));
    out.verdicts.push(Verdict::flag("simulate.finite", record.last().is_finite()));
    out.artifacts.push((
        "norms.csv".into(),
        norms_csv(
            &record,
            &format!("dim={} n={} length={} dt={} t0={t0}", g.dim(), g.n(), g.length(), solver.dt()),
        ),
    ));
    if let Some(dir) = dir {
        let path = dir.join("final.ckpt");
        write_checkpoint(&path, record.last(), *record.times.last().expect("endpoint"), &c.hash())?;
        out.written.push("final.ckpt".into());
        out.written.push("final.ckpt.meta".into());
    }
    if c.bool("consistency")? {
        match spec {
            Some(spec) => {
                let k = consistency(&cut, g, &spec, &sc)?;
                let (lo, hi) = QUADRATIC_WINDOW;
                out.verdicts.push(Verdict::within("simulate.quadratic-deviation-ratio", lo, hi, k.deviation_ratio));
                out.verdicts.push(Verdict::at_most("simulate.consistency-mass-drift", MASS_TOLERANCE, k.mass_drift, 0.0));
                let (lo, hi) = RICHARDSON_WINDOW;
                out.verdicts.push(Verdict::within("simulate.richardson-ratio", lo, hi, k.richardson));
            }
            None => out.warnings.push("consistency checks need generated data; skipped for a resumed run".into()),
        }
    }
    Ok(out)
}

// ----------------------------------------------------------------- decay-fit

fn functionals_csv(f: &eflab_core::decay::FunctionalCurves) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# M={} delta0={:.12e} X0={:.12e} predicted_growth={}",
        f.m_exp, f.delta0, f.x0, f.predicted_growth
    );
    let _ = writeln!(out, "t,X_M,X_L,X");
    for k in 0..f.times.len() {
        let _ = writeln!(out, "{:.12e},{:.12e},{:.12e},{:.12e}", f.times[k], f.x_m[k], f.x_l[k], f.x[k]);
    }
    out
}

fn decay_fit(c: &RunConfig) -> Result<Outcome, CliError> {
    let cut = cutoffs(c)?;
    let dim = c.dim();
    let sigma1 = c.f64("sigma1")?;
    let g = grid(c, dim)?;
    let spec = data_spec(c, dim, sigma1)?;
    let targets = rate_targets(dim, sigma1, &c.f64_list("sigma")?, BOX_TOLERANCE, BOX_TOLERANCE)?;
    let window = c.window();
    let data = generate_initial_data(g, &spec)?;
    let record = Solver::new(g, solver_config(c)?)?.integrate(&data, 0.0, &cut, None)?;
    let report = box_decay_report(&cut, &spec, &targets, &record, window)?;
    let bound = c.f64("bound")?;
    let mut out = Outcome {
        verdicts: decay_verdicts("", &report, bound),
        artifacts: decay_artifacts("", &report),
        ..Outcome::default()
    };
    if c.bool("functionals")? {
        let f = time_weighted_functionals(&cut, &record.times, &record.snapshots, c.f64("m_exp")?, sigma1, window)?;
        match f.growth {
            Some(fit) => out
                .verdicts
                .push(Verdict::near("functional.weighted-growth", f.predicted_growth, fit.exponent, 0.1)),
            None => out
                .warnings
                .push("fit window too short to measure the weighted functional growth".into()),
        }
        out.verdicts.push(Verdict::at_most("functional.low-frequency-bound", bound, f.max_x_l_ratio(), 0.0));
        out.verdicts.push(Verdict::at_most("functional.global-bound", bound, f.max_x_ratio(), 0.0));
        out.artifacts.push(("functionals.csv".into(), functionals_csv(&f)));
    }
    Ok(out)
}

// ------------------------------------------------------------------ lyapunov

fn lyapunov(c: &RunConfig) -> Result<Outcome, CliError> {
    let cut = cutoffs(c)?;
    let (eta1, eta2) = (c.f64("eta1")?, c.f64("eta2")?);
    let budget = c.f64("budget")?;
    let shells = c.i32_list("shells")?;
    let split = FrequencySplit::default();
    let mut out = Outcome::default();

    let cdim = c.usize("coercivity_dim")?;
    let trials = c.usize("trials")?;
    let seed = c.seed();
    let reports = shells
        .par_iter()
        .map(|&j| check_coercivity(&cut, cdim, j, eta1, eta2, trials, 0.1, seed))
        .collect::<eflab_core::Result<Vec<_>>>()?;
    let mut coer = String::from("# coercivity ratios over random shell states\nj,e1_min,e1_max,d1_min,d1_constant,e2_min,e2_max,d2_min,d2_max\n");
    let pair = |r: Option<(f64, f64)>| r.map_or((String::new(), String::new()), |(a, b)| (fmt_num(a), fmt_num(b)));
    for r in &reports {
        let p = format!("coercivity.j={}", r.j);
        if let Some((lo, hi)) = r.e1_range {
            out.verdicts.push(Verdict::at_least(format!("{p}.low-energy.lower"), r.e1_bounds.0, lo, ARITHMETIC_SLACK));
            out.verdicts.push(Verdict::at_most(format!("{p}.low-energy.upper"), r.e1_bounds.1, hi, ARITHMETIC_SLACK));
        }
        if let Some(m) = r.d1_min {
            out.verdicts.push(Verdict::at_least(
                format!("{p}.low-dissipation"),
                r.d1_constant,
                m,
                ARITHMETIC_SLACK * r.d1_constant,
            ));
        }
        let (elo, ehi) = eflab_core::lyapunov::EQUIVALENCE_RANGE;
        for (tag, range) in [("high-energy", r.e2_range), ("high-dissipation", r.d2_range)] {
            if let Some((lo, hi)) = range {
                out.verdicts.push(Verdict::at_least(format!("{p}.{tag}.lower"), elo, lo, 0.0));
                out.verdicts.push(Verdict::at_most(format!("{p}.{tag}.upper"), ehi, hi, 0.0));
            }
        }
        let (e1a, e1b) = pair(r.e1_range);
        let (e2a, e2b) = pair(r.e2_range);
        let (d2a, d2b) = pair(r.d2_range);
        let _ = writeln!(
            coer,
            "{},{e1a},{e1b},{},{},{e2a},{e2b},{d2a},{d2b}",
            r.j,
            r.d1_min.map_or(String::new(), fmt_num),
            r.d1_min.map_or(String::new(), |_| fmt_num(r.d1_constant))
        );
    }
    out.artifacts.push(("coercivity.csv".into(), coer));

    let g = grid(c, c.dim())?;
    let spec = data_spec(c, c.dim(), c.f64("sigma1")?)?;
    let solver = Solver::new(g, solver_config(c)?)?;
    let record = solver.integrate(&generate_initial_data(g, &spec)?, 0.0, &cut, None)?;
    let mut jobs = Vec::new();
    for &j in &shells {
        if split.is_low(j) {
            jobs.push((j, Regime::Low, eta1));
        }
        if split.is_high(j) {
            jobs.push((j, Regime::High, eta2));
        }
    }
    let residuals = jobs
        .par_iter()
        .map(|&(j, regime, eta)| lyapunov_residual(&cut, &solver, &record, j, regime, eta, budget))
        .collect::<eflab_core::Result<Vec<_>>>()?;
    let mut res = String::from("# shell residual ratios along the trajectory\nj,regime,worst_ratio,dissipation_ratio\n");
    for r in &residuals {
        out.verdicts.push(Verdict::at_most(
            format!("lyapunov.j={}.{}.residual", r.j, r.regime.name()),
            budget,
            r.worst_ratio,
            0.0,
        ));
        let _ = writeln!(res, "{},{},{},{}", r.j, r.regime.name(), r.worst_ratio, r.dissipation_ratio);
    }
    out.artifacts.push(("residuals.csv".into(), res));

    let records = record
        .times
        .par_iter()
        .zip(&record.snapshots)
        .map(|(&t, s)| {
            shells
                .iter()
                .map(|&j| mode_energy_record(&cut, s, t, j, eta1, eta2))
                .collect::<eflab_core::Result<Vec<_>>>()
        })
        .collect::<eflab_core::Result<Vec<_>>>()?;
    let flat: Vec<_> = records.into_iter().flatten().collect();
    let header = format!("# dim={} n={} length={} dt={}\n", g.dim(), g.n(), g.length(), solver.dt());
    out.artifacts.push(("energies.csv".into(), header + &records_to_csv(&flat)));
    Ok(out)
}

// --------------------------------------------------------------- damped-mode

fn damped_mode(c: &RunConfig) -> Result<Outcome, CliError> {
    let cut = cutoffs(c)?;
    let dim = c.dim();
    let sigma1 = c.f64("sigma1")?;
    let sigma = *c.f64_list("sigma")?.first().ok_or_else(|| CliError::Config("`sigma` lists no regularity".into()))?;
    let window = c.window();
    let spec = data_spec(c, dim, sigma1)?;
    let mut out = Outcome::default();
    if spec.validate_enhancement().is_err() {
        out.warnings.push(format!(
            "d = {dim}, σ₁ = {sigma1} lies outside d ≥ 2, σ₁ ∈ (1 − d/2, d/2]; diagnostic run only"
        ));
    }
    let report = if c.raw("mode") == "linear" {
        let times = log_times(c.f64("t_sample_min")?, window.1, c.usize("samples")?);
        let curve = semigroup_besov_decay(&cut, &spec.profile()?, sigma1, sigma, &times)?;
        out.artifacts.push((format!("damped-sigma{sigma}.csv"), curve.to_csv()));
        Some(damped_mode_from_curve(&curve, window, LINEAR_STATE_TOLERANCE, LINEAR_VELOCITY_TOLERANCE)?)
    } else {
        let g = grid(c, dim)?;
        let solver = Solver::new(g, solver_config(c)?)?;
        let record = solver.integrate(&generate_initial_data(g, &spec)?, 0.0, &cut, None)?;
        if window.1 <= *record.times.last().expect("endpoint") {
            Some(damped_mode_check(&cut, &solver, &record, sigma1, sigma, window)?)
        } else {
            let err = duhamel_defect(&solver, &record)?;
            out.verdicts.push(Verdict::at_most("damped.duhamel-error", c.f64("duhamel_tolerance")?, err, 0.0));
            out.warnings.push("fit window extends past the run; rate fits skipped".into());
            None
        }
    };
    if let Some(r) = report {
        if let Some(err) = r.duhamel_error {
            out.verdicts.push(Verdict::at_most("damped.duhamel-error", c.f64("duhamel_tolerance")?, err, 0.0));
        }
        out.verdicts.push(Verdict::at_most("damped.u-weak-rate", -0.5, r.weak_fit.exponent, LINEAR_STATE_TOLERANCE));
        let strong_tol = if c.raw("mode") == "linear" { LINEAR_VELOCITY_TOLERANCE } else { BOX_TOLERANCE };
        out.verdicts.push(Verdict::near(
            format!("damped.u-rate.sigma={sigma}"),
            r.strong_predicted,
            r.strong_fit.exponent,
            strong_tol,
        ));
        out.verdicts.push(Verdict::at_most("damped.state-weak-ratio", c.f64("bound")?, r.state_weak_ratio, 0.0));
    }
    let t_max = window.1;
    out.verdicts.push(Verdict::at_most(
        "damped.convolution-constant",
        CONVOLUTION_CONSTANT,
        convolution_bound(t_max, 0.01),
        0.0,
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(e: Experiment, text: &str) -> Outcome {
        execute(&RunConfig::from_text(e, text).unwrap(), None).unwrap()
    }

    #[test]
    fn lp_inspect_small() {
        let o = run(Experiment::LpInspect, "trials = 5\nradii = 1000\nn = 32");
        assert_eq!(o.verdicts.len(), 3);
        assert!(o.passed(), "{:?}", o.verdicts);
    }

    #[test]
    fn block_exactness_of_zero_mean_field() {
        let cut = DyadicCutoffs::build(1.0).unwrap();
        let g = PeriodicGrid::new(1, 64, 2.0 * PI).unwrap();
        let f = random_unit_field(g, 3, 0).unwrap();
        let (t, d) = block_exactness(&cut, &f);
        assert!(t < 1e-12 && d < 1e-14, "{t} {d}");
    }

    #[test]
    fn validate_reports_at_least_four_inequalities() {
        let o = run(Experiment::Validate, "trials = 10");
        let names: std::collections::BTreeSet<_> =
            o.verdicts.iter().map(|v| v.name.rsplit_once('.').unwrap().0.to_string()).collect();
        assert!(names.len() >= 4, "{names:?}");
        assert!(o.passed(), "{:?}", o.verdicts);
    }

    #[test]
    fn linear_decay_reports_classical_entries() {
        let o = run(Experiment::LinearDecay, "samples = 40");
        let predicted: Vec<f64> = o.verdicts.iter().map(|v| v.predicted).collect();
        assert!(predicted.contains(&-0.75) && predicted.contains(&-1.25), "{predicted:?}");
    }

    #[test]
    fn zero_amplitude_simulation_is_still() {
        let o = run(Experiment::Simulate, "amplitude = 0\nn = 32\nt_end = 0.2");
        assert!(o.passed(), "{:?}", o.verdicts);
    }

    #[test]
    fn damped_mode_flags_runs_outside_enhancement_regime() {
        let o = run(Experiment::DampedMode, "dim = 1\nsigma1 = 0.5\nsamples = 30\nt_fit_max = 1000");
        assert_eq!(o.warnings.len(), 1);
    }

    #[test]
    fn convolution_constant_is_moderate() {
        let c = convolution_bound(1e4, 0.01);
        assert!(c > 1.0 && c <= CONVOLUTION_CONSTANT, "{c}");
    }
}
