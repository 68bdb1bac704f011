//! Run configuration: `key = value` files, flag overrides, per-experiment
//! defaults and range validation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Experiment {
    LpInspect,
    Validate,
    LinearDecay,
    Simulate,
    DecayFit,
    Lyapunov,
    DampedMode,
    Sweep,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::LpInspect,
        Experiment::Validate,
        Experiment::LinearDecay,
        Experiment::Simulate,
        Experiment::DecayFit,
        Experiment::Lyapunov,
        Experiment::DampedMode,
        Experiment::Sweep,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::LpInspect => "lp-inspect",
            Experiment::Validate => "validate",
            Experiment::LinearDecay => "linear-decay",
            Experiment::Simulate => "simulate",
            Experiment::DecayFit => "decay-fit",
            Experiment::Lyapunov => "lyapunov",
            Experiment::DampedMode => "damped-mode",
            Experiment::Sweep => "sweep",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }

    /// Keys whose defaults differ from the shared table.
    fn defaults(&self) -> &'static [(&'static str, &'static str)] {
        match self {
            Experiment::LpInspect => &[("dim", "2"), ("n", "64"), ("periods", "4")],
            Experiment::Validate => &[("n", "256"), ("periods", "8")],
            Experiment::LinearDecay => &[("dim", "3"), ("sigma1", "1.5")],
            Experiment::Simulate => &[("t_end", "1"), ("dt", "0.05")],
            Experiment::DecayFit => &[
                ("n", "2048"),
                ("periods", "256"),
                ("amplitude", "1e-4"),
                ("sigma", "0,0.5"),
                ("dt", "0.25"),
                ("t_end", "800"),
                ("t_fit_min", "30"),
                ("t_fit_max", "800"),
            ],
            Experiment::Lyapunov => &[
                ("n", "128"),
                ("amplitude", "0.05"),
                ("dt", "0.01"),
                ("t_end", "0.3"),
                ("trials", "1000"),
            ],
            Experiment::DampedMode => &[("dim", "2"), ("sigma1", "1")],
            Experiment::Sweep => &[],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Every accepted key with its shared default and a one-line description.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("seed", "0", "master seed for all random draws"),
    ("dim", "1", "spatial dimension d (1, 2 or 3)"),
    ("sigma1", "0.5", "low-frequency regularity: data in the negative Besov space of index -sigma1"),
    ("sigma", "0", "comma list of measured regularities"),
    ("amplitude", "1e-3", "peak size of the initial data"),
    ("beta", "", "envelope exponent; empty selects sigma1 - d/2"),
    ("r_cut", "1", "Gaussian roll-off radius of the initial envelope"),
    ("sharpness", "1", "transition sharpness of the dyadic cutoff"),
    ("n", "256", "grid points per axis"),
    ("periods", "16", "box length in units of 2*pi"),
    ("dt", "0.05", "time step"),
    ("t_end", "10", "final time of box runs"),
    ("cfl_safety", "0.5", "safety factor of the CFL guard"),
    ("positivity_floor", "0.1", "smallest accepted 1 + a and 1 + theta"),
    ("eps0", "", "smallness threshold on X0; empty disables the gate"),
    ("snapshot_stride", "1", "steps between stored snapshots"),
    ("t_sample_min", "1", "first sample time of linear curves"),
    ("samples", "60", "log-spaced sample times of linear curves"),
    ("t_fit_min", "100", "start of the rate-fit window"),
    ("t_fit_max", "10000", "end of the rate-fit window"),
    ("trials", "100", "random trials per check"),
    ("budget", "16", "largest accepted ratio for unquantified constants"),
    ("radii", "10000", "sampled radii for the partition-of-unity check"),
    ("eta1", "0.1", "cross-term weight of the low-frequency functional"),
    ("eta2", "0.1", "cross-term weight of the high-frequency functional"),
    ("shells", "-3,-2,-1,0,1,2,3", "comma list of shell indices"),
    ("coercivity_dim", "2", "lyapunov: dimension of the random coercivity states"),
    ("m_exp", "2", "time-weight exponent M of the weighted functional"),
    ("functionals", "true", "decay-fit: also assemble the time-weighted functionals"),
    ("bound", "4", "largest accepted ratio for monitored functional bounds"),
    ("consistency", "false", "simulate: compare against the linear oracle and time-step refinement"),
    ("resume", "", "simulate: checkpoint file to start from"),
    ("mode", "linear", "damped-mode: linear (quadrature) or box (trajectory)"),
    ("duhamel_tolerance", "1e-3", "damped-mode: relative Duhamel reconstruction error"),
    ("cases", "", "sweep: ';'-separated d:sigma1:sigma,... entries; empty selects the standard matrix"),
];

/// Resolved parameters, stored as canonical strings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub experiment: Experiment,
    values: BTreeMap<String, String>,
}

fn parse_lines(text: &str, origin: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("{origin}:{}: expected `key = value`, got `{raw}`", no + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn parse_override(s: &str) -> Result<(String, String), CliError> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{s}` is not KEY=VALUE")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

impl RunConfig {
    /// Defaults, then the file, then the overrides, in that order of precedence.
    pub fn build(
        experiment: Experiment,
        file: Option<&Path>,
        overrides: &[(String, String)],
    ) -> Result<Self, CliError> {
        let mut pairs = Vec::new();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            pairs.extend(parse_lines(&text, &path.display().to_string())?);
        }
        pairs.extend(overrides.iter().cloned());
        Self::from_pairs(experiment, &pairs)
    }

    pub fn from_text(experiment: Experiment, text: &str) -> Result<Self, CliError> {
        Self::from_pairs(experiment, &parse_lines(text, "<config>")?)
    }

    pub fn from_pairs(experiment: Experiment, pairs: &[(String, String)]) -> Result<Self, CliError> {
        let mut values: BTreeMap<String, String> =
            KEYS.iter().map(|(k, v, _)| (k.to_string(), v.to_string())).collect();
        for (k, v) in experiment.defaults() {
            values.insert(k.to_string(), v.to_string());
        }
        for (k, v) in pairs {
            if !values.contains_key(k) {
                return Err(CliError::Config(format!("unknown key `{k}`")));
            }
            values.insert(k.clone(), v.clone());
        }
        let config = Self { experiment, values };
        config.validate()?;
        Ok(config)
    }

    pub fn with(&self, key: &str, value: &str) -> Result<Self, CliError> {
        let mut pairs: Vec<(String, String)> = self.values.clone().into_iter().collect();
        pairs.push((key.to_string(), value.to_string()));
        Self::from_pairs(self.experiment, &pairs)
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("key {key} is declared"))
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        parse_f64(key, self.raw(key))
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        let v = self.raw(key);
        if v.is_empty() {
            Ok(None)
        } else {
            parse_f64(key, v).map(Some)
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize, CliError> {
        self.raw(key)
            .parse()
            .map_err(|_| CliError::Config(format!("`{key}` must be a non-negative integer, got `{}`", self.raw(key))))
    }

    pub fn u64(&self, key: &str) -> Result<u64, CliError> {
        self.raw(key)
            .parse()
            .map_err(|_| CliError::Config(format!("`{key}` must be a non-negative integer, got `{}`", self.raw(key))))
    }

    pub fn bool(&self, key: &str) -> Result<bool, CliError> {
        match self.raw(key) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            v => Err(CliError::Config(format!("`{key}` must be true or false, got `{v}`"))),
        }
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        split_list(self.raw(key), ',').map(|s| parse_f64(key, s)).collect()
    }

    pub fn i32_list(&self, key: &str) -> Result<Vec<i32>, CliError> {
        split_list(self.raw(key), ',')
            .map(|s| {
                s.parse()
                    .map_err(|_| CliError::Config(format!("`{key}` entries must be integers, got `{s}`")))
            })
            .collect()
    }

    pub fn seed(&self) -> u64 {
        self.u64("seed").expect("validated")
    }

    pub fn dim(&self) -> usize {
        self.usize("dim").expect("validated")
    }

    pub fn window(&self) -> (f64, f64) {
        (
            self.f64("t_fit_min").expect("validated"),
            self.f64("t_fit_max").expect("validated"),
        )
    }

    pub fn sweep_cases(&self) -> Result<Vec<SweepCase>, CliError> {
        let text = self.raw("cases");
        if text.is_empty() {
            return Ok(standard_matrix());
        }
        split_list(text, ';').map(SweepCase::parse).collect()
    }

    /// `key=value` lines in key order; the hashed identity of the run.
    pub fn canonical(&self) -> String {
        let mut out = format!("experiment={}\n", self.experiment);
        for (k, v) in &self.values {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    fn validate(&self) -> Result<(), CliError> {
        for key in [
            "amplitude", "r_cut", "sharpness", "periods", "dt", "t_end", "cfl_safety", "positivity_floor",
            "t_sample_min", "t_fit_min", "t_fit_max", "budget", "eta1", "eta2", "m_exp", "bound",
            "duhamel_tolerance",
        ] {
            self.f64(key)?;
        }
        for key in ["n", "snapshot_stride", "samples", "trials", "radii", "coercivity_dim"] {
            self.usize(key)?;
        }
        self.u64("seed")?;
        self.opt_f64("beta")?;
        self.opt_f64("eps0")?;
        self.bool("functionals")?;
        self.bool("consistency")?;
        self.i32_list("shells")?;
        let dim = self.usize("dim")?;
        if !(1..=3).contains(&dim) {
            return Err(range_error(format!("d = {dim} must be 1, 2 or 3")));
        }
        let half = dim as f64 / 2.0;
        let sigma1 = self.f64("sigma1")?;
        if !(sigma1 > -half && sigma1 <= half) {
            return Err(range_error(format!(
                "σ₁ = {sigma1} ∉ (−d/2, d/2] = ({}, {half}]",
                -half
            )));
        }
        let amplitude = self.f64("amplitude")?;
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(range_error(format!("amplitude = {amplitude} must be finite and >= 0")));
        }
        for key in ["eta1", "eta2"] {
            let eta = self.f64(key)?;
            if !(eta > 0.0 && eta < 1.0) {
                return Err(range_error(format!("{key} = {eta} ∉ (0, 1)")));
            }
        }
        let (t0, t1) = (self.f64("t_fit_min")?, self.f64("t_fit_max")?);
        if !(t0 >= 0.0 && t1 > t0) {
            return Err(range_error(format!("fit window [{t0}, {t1}] is empty")));
        }
        if self.raw("mode") != "linear" && self.raw("mode") != "box" {
            return Err(CliError::Config(format!("`mode` must be linear or box, got `{}`", self.raw("mode"))));
        }
        match self.experiment {
            Experiment::LinearDecay | Experiment::DecayFit => {
                let sigmas = self.f64_list("sigma")?;
                if sigmas.is_empty() {
                    return Err(CliError::Config("`sigma` lists no regularity".into()));
                }
                for s in sigmas {
                    check_sigma(dim, sigma1, s)?;
                }
            }
            Experiment::DampedMode => {
                for s in self.f64_list("sigma")? {
                    check_sigma(dim, sigma1, s)?;
                }
            }
            Experiment::Sweep => {
                self.sweep_cases()?;
            }
            _ => {}
        }
        if self.experiment == Experiment::DecayFit && self.bool("functionals")? {
            let m = self.f64("m_exp")?;
            let m_min = 1.0 + 0.5 * (half + sigma1);
            if !(m > m_min) {
                return Err(range_error(format!(
                    "M = {m} violates M > 1 + ½(d/2 + σ₁) = {m_min}"
                )));
            }
        }
        Ok(())
    }
}

fn range_error(msg: String) -> CliError {
    CliError::Config(msg)
}

fn split_list(text: &str, sep: char) -> impl Iterator<Item = &str> {
    text.split(sep).map(str::trim).filter(|s| !s.is_empty())
}

fn parse_f64(key: &str, v: &str) -> Result<f64, CliError> {
    v.parse()
        .map_err(|_| CliError::Config(format!("`{key}` must be a number, got `{v}`")))
}

/// `σ ∈ (−σ₁, d/2]`, the range of the state decay estimate.
pub fn check_sigma(dim: usize, sigma1: f64, sigma: f64) -> Result<(), CliError> {
    let half = dim as f64 / 2.0;
    if !(sigma > -sigma1 && sigma <= half) {
        return Err(range_error(format!(
            "σ = {sigma} ∉ (−σ₁, d/2] = ({}, {half}]",
            -sigma1
        )));
    }
    Ok(())
}

/// Velocity rates need `d ≥ 2`, `σ₁ ∈ (1 − d/2, d/2]` and `σ ≤ d/2 − 1`.
pub fn velocity_admissible(dim: usize, sigma1: f64, sigma: f64) -> bool {
    let half = dim as f64 / 2.0;
    dim >= 2 && sigma1 > 1.0 - half && sigma1 <= half && sigma > -sigma1 && sigma <= half - 1.0
}

/// One cell of the linear rate matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCase {
    pub dim: usize,
    pub sigma1: f64,
    pub sigmas: Vec<f64>,
}

impl SweepCase {
    fn parse(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::Config(format!("sweep case `{s}` is not d:sigma1:sigma[,sigma...]"));
        let mut parts = s.split(':');
        let dim: usize = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        let sigma1: f64 = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        let sigmas = split_list(parts.next().ok_or_else(bad)?, ',')
            .map(|x| x.parse().map_err(|_| bad()))
            .collect::<Result<Vec<f64>, _>>()?;
        if parts.next().is_some() || sigmas.is_empty() {
            return Err(bad());
        }
        if !(1..=3).contains(&dim) {
            return Err(range_error(format!("d = {dim} must be 1, 2 or 3")));
        }
        let half = dim as f64 / 2.0;
        if !(sigma1 > -half && sigma1 <= half) {
            return Err(range_error(format!(
                "σ₁ = {sigma1} ∉ (−d/2, d/2] = ({}, {half}]",
                -half
            )));
        }
        for &sg in &sigmas {
            check_sigma(dim, sigma1, sg)?;
        }
        Ok(Self { dim, sigma1, sigmas })
    }
}

/// Two admissible `σ₁` per dimension, two `σ` each; in `d ≥ 2` at least one
/// `σ` also admits the velocity rate.
pub fn standard_matrix() -> Vec<SweepCase> {
    let case = |dim, sigma1, sigmas: &[f64]| SweepCase {
        dim,
        sigma1,
        sigmas: sigmas.to_vec(),
    };
    vec![
        case(1, 0.5, &[0.0, 0.5]),
        case(1, 0.25, &[0.25, 0.5]),
        case(2, 1.0, &[0.0, 1.0]),
        case(2, 0.5, &[0.0, 0.5]),
        case(3, 1.5, &[0.0, 0.5]),
        case(3, 0.5, &[0.0, 0.5]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_linear_decay_config_is_accepted() {
        let c = RunConfig::from_text(Experiment::LinearDecay, "dim = 3\nsigma1 = 1.5\nsigma = 0\n").unwrap();
        assert_eq!(c.dim(), 3);
        assert_eq!(c.f64_list("sigma").unwrap(), vec![0.0]);
    }

    #[test]
    fn sigma_at_lower_endpoint_is_rejected() {
        let err = RunConfig::from_text(Experiment::LinearDecay, "dim=3\nsigma1=1.5\nsigma=-1.5").unwrap_err();
        assert!(err.to_string().contains("(−σ₁, d/2]"), "{err}");
    }

    #[test]
    fn weight_exponent_bound_is_enforced() {
        let err = RunConfig::from_text(Experiment::DecayFit, "dim=1\nsigma1=0.5\nm_exp=1").unwrap_err();
        assert!(err.to_string().contains("M > 1 + ½(d/2 + σ₁)"), "{err}");
        assert!(RunConfig::from_text(Experiment::DecayFit, "dim=1\nsigma1=0.5\nm_exp=1\nfunctionals=false").is_ok());
    }

    #[test]
    fn low_regularity_range_is_enforced() {
        let err = RunConfig::from_text(Experiment::Simulate, "dim=2\nsigma1=1.5").unwrap_err();
        assert!(err.to_string().contains("(−d/2, d/2]"), "{err}");
        assert!(RunConfig::from_text(Experiment::Simulate, "dim=2\nsigma1=-1").is_err());
    }

    #[test]
    fn unknown_keys_and_syntax_errors() {
        assert!(RunConfig::from_text(Experiment::Simulate, "colour = red").is_err());
        assert!(RunConfig::from_text(Experiment::Simulate, "dim 2").is_err());
        assert!(RunConfig::from_text(Experiment::Simulate, "dt = fast").is_err());
    }

    #[test]
    fn comments_and_precedence() {
        let c = RunConfig::from_text(Experiment::Simulate, "# run\ndt = 0.1  # coarse\n\ndt = 0.2").unwrap();
        assert_eq!(c.f64("dt").unwrap(), 0.2);
        let d = c.with("dt", "0.3").unwrap();
        assert_eq!(d.f64("dt").unwrap(), 0.3);
    }

    #[test]
    fn hash_tracks_effective_values() {
        let a = RunConfig::from_text(Experiment::Simulate, "").unwrap();
        let b = RunConfig::from_text(Experiment::Simulate, "dt = 0.05").unwrap();
        let c = RunConfig::from_text(Experiment::Simulate, "dt = 0.06").unwrap();
        let d = RunConfig::from_text(Experiment::LinearDecay, "dim=1\nsigma1=0.5").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_ne!(a.hash(), d.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn sweep_cases_parse_and_validate() {
        let c = RunConfig::from_text(Experiment::Sweep, "cases = 1:0.5:0,0.5; 3:1.5:0").unwrap();
        let cases = c.sweep_cases().unwrap();
        assert_eq!(cases.len(), 2);
        assert_eq!(cases[0].sigmas, vec![0.0, 0.5]);
        assert!(RunConfig::from_text(Experiment::Sweep, "cases = 1:0.5:-0.5").is_err());
        assert!(RunConfig::from_text(Experiment::Sweep, "cases = 1:0.5").is_err());
    }

    #[test]
    fn standard_matrix_is_admissible() {
        for case in standard_matrix() {
            assert_eq!(case.sigmas.len(), 2);
            for &s in &case.sigmas {
                check_sigma(case.dim, case.sigma1, s).unwrap();
            }
            if case.dim >= 2 {
                assert!(case.sigmas.iter().any(|&s| velocity_admissible(case.dim, case.sigma1, s)));
            }
        }
    }

    #[test]
    fn every_experiment_has_valid_defaults() {
        for e in Experiment::ALL {
            RunConfig::from_text(e, "").unwrap();
            assert_eq!(Experiment::parse(e.name()), Some(e));
        }
    }
}
