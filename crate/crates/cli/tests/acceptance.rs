//! Acceptance criteria 1 to 9. Each test prints one `PASS`/`FAIL` line on
//! stdout (bypassing the test harness capture) and then asserts.

use std::io::Write;
use std::time::{Duration, Instant};

use eflab_cli::experiments::execute;
use eflab_cli::run::{run, VERDICTS_FILE};
use eflab_cli::{Experiment, Outcome, RunConfig, Verdict};

fn outcome(e: Experiment, text: &str) -> (Outcome, Duration) {
    let config = RunConfig::from_text(e, text).expect("valid configuration");
    let start = Instant::now();
    let out = execute(&config, None).expect("experiment runs");
    (out, start.elapsed())
}

fn find<'a>(out: &'a Outcome, name: &str) -> &'a Verdict {
    out.verdicts
        .iter()
        .find(|v| v.name == name)
        .unwrap_or_else(|| panic!("no verdict `{name}` in {:?}", out.verdicts))
}

fn report(criterion: u32, title: &str, pass: bool, detail: String) {
    let line = format!(
        "{} criterion {criterion} ({title}): {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(line.as_bytes());
    let _ = stdout.flush();
    assert!(pass, "{line}");
}

fn show(v: &Verdict) -> String {
    format!("{} = {:.4} (target {:.4} ± {:.3})", v.name, v.measured, v.predicted, v.tolerance)
}

#[test]
fn criterion_1_classical_rates() {
    let (out, took) = outcome(
        Experiment::LinearDecay,
        "dim = 3\nsigma1 = 1.5\nsigma = 0\nt_fit_min = 100\nt_fit_max = 10000",
    );
    let state = find(&out, "rate.state.sigma=0");
    let u = find(&out, "rate.u.sigma=0");
    let pass = state.predicted == -0.75
        && state.tolerance == 0.05
        && u.predicted == -1.25
        && u.tolerance == 0.10
        && state.pass
        && u.pass
        && took < Duration::from_secs(120);
    report(1, "classical rates", pass, format!("{}; {}; {:.2?}", show(state), show(u), took));
}

#[test]
fn criterion_2_rate_matrix() {
    let (out, took) = outcome(Experiment::Sweep, "t_fit_min = 100\nt_fit_max = 10000");
    let rates: Vec<&Verdict> = out.verdicts.iter().filter(|v| v.name.contains(".rate.")).collect();
    let state = rates.iter().filter(|v| v.name.contains(".rate.state.")).count();
    let velocity = rates.iter().filter(|v| v.name.contains(".rate.u.")).count();
    let tolerances_ok = rates.iter().all(|v| {
        if v.name.contains(".rate.u.") {
            v.tolerance == 0.10
        } else {
            v.tolerance == 0.05
        }
    });
    let failed: Vec<String> = rates.iter().filter(|v| !v.pass).map(|v| show(v)).collect();
    let worst = rates
        .iter()
        .map(|v| (v.measured - v.predicted).abs())
        .fold(0.0, f64::max);
    // 3 dimensions × 2 values of σ1 × 2 values of σ
    let pass = state == 12 && velocity >= 4 && tolerances_ok && failed.is_empty() && took < Duration::from_secs(900);
    report(
        2,
        "rate matrix",
        pass,
        format!(
            "{state} state and {velocity} velocity fits, worst deviation {worst:.4}, {:.2?}{}",
            took,
            if failed.is_empty() { String::new() } else { format!("; failed {failed:?}") }
        ),
    );
}

#[test]
fn criterion_3_damped_mode() {
    let (out, _) = outcome(
        Experiment::DampedMode,
        "dim = 2\nsigma1 = 1\nsigma = 0\nmode = linear\nbound = 4",
    );
    let weak = find(&out, "damped.u-weak-rate");
    let ratio = find(&out, "damped.state-weak-ratio");
    let pass = weak.predicted == -0.5
        && weak.tolerance == 0.05
        && weak.pass
        && ratio.predicted == 4.0
        && ratio.pass
        && out.warnings.is_empty();
    report(3, "damped mode", pass, format!("{}; {}", show(weak), show(ratio)));
}

#[test]
fn criterion_4_littlewood_paley_exactness() {
    let (out, _) = outcome(Experiment::LpInspect, "radii = 10000\ntrials = 100");
    let unity = find(&out, "lp.partition-of-unity");
    let tele = find(&out, "lp.telescoping");
    let disjoint = find(&out, "lp.shell-disjointness");
    let pass = unity.predicted == 1e-12
        && tele.predicted == 1e-10
        && disjoint.predicted == 1e-12
        && unity.pass
        && tele.pass
        && disjoint.pass;
    report(
        4,
        "Littlewood-Paley exactness",
        pass,
        format!(
            "partition {:.2e}, telescoping {:.2e}, disjointness {:.2e}",
            unity.measured, tele.measured, disjoint.measured
        ),
    );
}

#[test]
fn criterion_5_coercivity() {
    let (out, _) = outcome(
        Experiment::Lyapunov,
        "trials = 1000\neta1 = 0.1\neta2 = 0.1\nshells = -4,-3,-2,-1,0,1,2,3,4",
    );
    let checks: Vec<&Verdict> = out.verdicts.iter().filter(|v| v.name.starts_with("coercivity.")).collect();
    let exact_slack_ok = checks
        .iter()
        .filter(|v| v.name.contains(".low-energy."))
        .all(|v| v.tolerance == 1e-12);
    let window_ok = checks
        .iter()
        .filter(|v| v.name.contains(".high-"))
        .all(|v| v.predicted == 0.125 || v.predicted == 8.0);
    let failed: Vec<String> = checks.iter().filter(|v| !v.pass).map(|v| show(v)).collect();
    let shells = checks
        .iter()
        .map(|v| v.name.split('.').nth(1).unwrap_or(""))
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    let pass = shells == 9 && exact_slack_ok && window_ok && failed.is_empty();
    report(
        5,
        "coercivity",
        pass,
        format!("{} checks over {shells} shells, 1000 states each{}", checks.len(), if failed.is_empty() {
            String::new()
        } else {
            format!("; failed {failed:?}")
        }),
    );
}

#[test]
fn criterion_6_inequality_validator() {
    let (out, _) = outcome(Experiment::Validate, "trials = 100\nbudget = 16\nseed = 0");
    let k1_hi = find(&out, "validate.bernstein-annulus-k1.upper");
    let k1_lo = find(&out, "validate.bernstein-annulus-k1.lower");
    let k2_hi = find(&out, "validate.bernstein-annulus-k2.upper");
    let k2_lo = find(&out, "validate.bernstein-annulus-k2.lower");
    let bern_ok = (k1_hi.predicted - 8.0 / 3.0).abs() < 1e-15
        && k1_lo.predicted == 0.75
        && (k2_hi.predicted - 64.0 / 9.0).abs() < 1e-14
        && k2_lo.predicted == 0.5625;
    let budgeted = [
        "validate.interpolation.upper",
        "validate.product-algebra.upper",
        "validate.product-summable.upper",
        "validate.product-endpoint.upper",
        "validate.commutator.upper",
        "validate.commutator.summed",
    ];
    let budget_ok = budgeted.iter().all(|n| find(&out, n).predicted == 16.0);
    let failed: Vec<String> = out.verdicts.iter().filter(|v| !v.pass).map(show).collect();
    let worst = budgeted.iter().map(|n| find(&out, n).measured).fold(0.0, f64::max);
    let pass = bern_ok && budget_ok && failed.is_empty();
    report(
        6,
        "inequality validator",
        pass,
        format!(
            "Bernstein k=1 in [{:.3}, {:.3}], k=2 in [{:.3}, {:.3}], worst budgeted ratio {worst:.3}{}",
            k1_lo.measured,
            k1_hi.measured,
            k2_lo.measured,
            k2_hi.measured,
            if failed.is_empty() { String::new() } else { format!("; failed {failed:?}") }
        ),
    );
}

#[test]
fn criterion_7_nonlinear_linear_consistency() {
    let (out, _) = outcome(
        Experiment::Simulate,
        "dim = 1\nn = 256\nperiods = 16\namplitude = 1e-3\ndt = 0.05\nt_end = 1\nconsistency = true",
    );
    let ratio = find(&out, "simulate.quadratic-deviation-ratio");
    let mass = find(&out, "simulate.consistency-mass-drift");
    let rich = find(&out, "simulate.richardson-ratio");
    let pass = ratio.predicted - ratio.tolerance == 50.0
        && ratio.predicted + ratio.tolerance == 200.0
        && mass.predicted == 1e-10
        && rich.predicted - rich.tolerance == 3.5
        && rich.predicted + rich.tolerance == 4.5
        && ratio.pass
        && mass.pass
        && rich.pass;
    report(
        7,
        "nonlinear-linear consistency",
        pass,
        format!(
            "deviation ratio {:.2}, mass drift {:.2e}, Richardson ratio {:.4}",
            ratio.measured, mass.measured, rich.measured
        ),
    );
}

#[test]
fn criterion_8_time_weighted_functional() {
    let (out, _) = outcome(Experiment::DecayFit, "dim = 1\nsigma1 = 0.5\nm_exp = 2\namplitude = 1e-4\nbound = 4");
    let growth = find(&out, "functional.weighted-growth");
    let low = find(&out, "functional.low-frequency-bound");
    let pass = growth.predicted == 1.5 && growth.tolerance == 0.1 && low.predicted == 4.0 && growth.pass && low.pass;
    report(8, "time-weighted functional", pass, format!("{}; {}", show(growth), show(low)));
}

#[test]
fn criterion_9_determinism() {
    let configs = [
        (Experiment::LpInspect, "trials = 20"),
        (Experiment::Validate, "trials = 20"),
        (Experiment::LinearDecay, ""),
        (Experiment::DampedMode, ""),
        (Experiment::Simulate, "consistency = true"),
        (Experiment::Lyapunov, "trials = 50"),
        (Experiment::DecayFit, ""),
        (Experiment::Sweep, ""),
    ];
    let roots = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let mut differing = Vec::new();
    for (e, text) in configs {
        let config = RunConfig::from_text(e, text).unwrap();
        let first = run(&config, roots[0].path()).unwrap();
        // second pass on one worker thread: scheduling must not matter
        let second = single.install(|| run(&config, roots[1].path())).unwrap();
        assert_eq!(first.config_hash, second.config_hash);
        for name in first.artifacts.iter().filter(|n| *n != "run.json") {
            let a = std::fs::read(first.directory.join(name)).unwrap();
            let b = std::fs::read(second.directory.join(name)).unwrap();
            if a != b {
                differing.push(format!("{e}/{name}"));
            }
        }
        let verdicts = std::fs::read_to_string(first.directory.join(VERDICTS_FILE)).unwrap();
        assert!(!verdicts.is_empty());
    }
    let pass = differing.is_empty();
    report(
        9,
        "determinism",
        pass,
        if pass {
            format!("{} experiments rerun, verdict and artifact files byte-identical", configs.len())
        } else {
            format!("differing files {differing:?}")
        },
    );
}
