//! Pseudo-spectral integration of the full nonlinear system
//!
//! ```text
//! ∂t a + u·∇a + (1+a) div u = 0
//! ∂t u + ∇a + u + ∇θ + u·∇u + ((θ−a)/(1+a)) ∇a = 0
//! ∂t θ + (1+θ) div u + u·∇θ − (1/(1+a)) Δθ = 0
//! ```
//!
//! on a periodic box. The linear part is advanced exactly per Fourier mode and
//! the remainder by the second-order exponential Runge-Kutta scheme of Cox and
//! Matthews.

use std::collections::HashMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linear::{etd_operators, propagate_mode, EtdOperators, ModeState, SplitOperator};
use crate::spectral::{
    dealias_in_place, forward_transform, inverse_transform, spectral_derivative, PeriodicGrid, RealField,
    SpectralField,
};

/// Physical-space state `(a, u, θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateFields {
    pub a: RealField,
    pub u: Vec<RealField>,
    pub theta: RealField,
}

impl StateFields {
    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self {
            a: grid.zeros(),
            u: (0..grid.dim()).map(|_| grid.zeros()).collect(),
            theta: grid.zeros(),
        }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.a.grid
    }

    pub fn to_spectral(&self) -> SpectralState {
        SpectralState {
            a: forward_transform(&self.a),
            u: self.u.iter().map(forward_transform).collect(),
            theta: forward_transform(&self.theta),
        }
    }

    fn components(&self) -> impl Iterator<Item = &RealField> {
        std::iter::once(&self.a).chain(self.u.iter()).chain(std::iter::once(&self.theta))
    }

    pub fn is_finite(&self) -> bool {
        self.components().all(RealField::is_finite)
    }

    /// Largest pointwise velocity magnitude.
    pub fn max_speed(&self) -> f64 {
        let n = self.a.values.len();
        (0..n)
            .map(|i| self.u.iter().map(|c| c.values[i] * c.values[i]).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// Fourier-space state; the solver's working representation.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub a: SpectralField,
    pub u: Vec<SpectralField>,
    pub theta: SpectralField,
}

impl SpectralState {
    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self {
            a: grid.zeros_spectral(),
            u: (0..grid.dim()).map(|_| grid.zeros_spectral()).collect(),
            theta: grid.zeros_spectral(),
        }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.a.grid
    }

    pub fn to_physical(&self) -> StateFields {
        StateFields {
            a: inverse_transform(&self.a),
            u: self.u.iter().map(inverse_transform).collect(),
            theta: inverse_transform(&self.theta),
        }
    }

    pub fn components(&self) -> impl Iterator<Item = &SpectralField> {
        std::iter::once(&self.a).chain(self.u.iter()).chain(std::iter::once(&self.theta))
    }

    fn components_mut(&mut self) -> impl Iterator<Item = &mut SpectralField> {
        std::iter::once(&mut self.a)
            .chain(self.u.iter_mut())
            .chain(std::iter::once(&mut self.theta))
    }

    fn zip_map<F: Fn(Complex64, Complex64) -> Complex64>(&self, o: &Self, f: F) -> Self {
        let zip = |x: &SpectralField, y: &SpectralField| SpectralField {
            grid: x.grid,
            coeffs: x.coeffs.iter().zip(&y.coeffs).map(|(p, q)| f(*p, *q)).collect(),
        };
        Self {
            a: zip(&self.a, &o.a),
            u: self.u.iter().zip(&o.u).map(|(x, y)| zip(x, y)).collect(),
            theta: zip(&self.theta, &o.theta),
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        self.zip_map(o, |p, q| p + q)
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.zip_map(o, |p, q| p - q)
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.zip_map(self, |p, _| p * c)
    }

    /// `sqrt(‖a‖² + ‖u‖² + ‖θ‖²)` in `L²`.
    pub fn l2_norm(&self) -> f64 {
        self.components().map(|c| c.l2_norm().powi(2)).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.components().all(|c| c.coeffs.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    fn mode(&self, i: usize) -> ModeState {
        let mut u = [Complex64::from(0.0); 3];
        for (c, f) in self.u.iter().enumerate() {
            u[c] = f.coeffs[i];
        }
        ModeState {
            a: self.a.coeffs[i],
            u,
            theta: self.theta.coeffs[i],
        }
    }

    fn set_mode(&mut self, i: usize, m: &ModeState) {
        self.a.coeffs[i] = m.a;
        for (c, f) in self.u.iter_mut().enumerate() {
            f.coeffs[i] = m.u[c];
        }
        self.theta.coeffs[i] = m.theta;
    }

    /// Zeroes every coefficient on a Nyquist line, where odd derivatives are undefined.
    pub fn clear_nyquist(&mut self) {
        let grid = self.grid();
        let half = (grid.n() / 2) as i64;
        let dim = grid.dim();
        for c in self.components_mut() {
            for (i, z) in c.coeffs.iter_mut().enumerate() {
                if grid.modes(i)[..dim].contains(&half) {
                    *z = 0.0.into();
                }
            }
        }
    }

    pub fn dealias(&mut self) {
        for c in self.components_mut() {
            dealias_in_place(c);
        }
    }
}

/// Maps a per-mode operator over every Fourier mode.
fn apply_modes<F: Fn(usize) -> SplitOperator>(state: &SpectralState, op: F) -> SpectralState {
    let grid = state.grid();
    let mut out = state.clone();
    for i in 0..grid.len() {
        let xi = grid.wavevector(i);
        let m = op(i).apply(&xi, &state.mode(i));
        out.set_mode(i, &m);
    }
    out
}

/// Exact linear evolution of a box state over time `t`.
pub fn linear_box_evolution(state: &SpectralState, t: f64) -> SpectralState {
    let grid = state.grid();
    let mut out = state.clone();
    for i in 0..grid.len() {
        let xi = grid.wavevector(i);
        out.set_mode(i, &propagate_mode(&xi, t, &state.mode(i)));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub cfl_safety: f64,
    pub positivity_floor: f64,
    pub dealias: bool,
    /// Smallness threshold on the initial `X0`; `None` disables the check.
    pub eps0: Option<f64>,
    /// Steps between stored snapshots (0 stores only the endpoints).
    pub snapshot_stride: usize,
    /// Steps between hook invocations (0 disables hooks after the first call).
    pub hook_stride: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            t_end: 1.0,
            cfl_safety: 0.5,
            positivity_floor: 0.1,
            dealias: true,
            eps0: None,
            snapshot_stride: 0,
            hook_stride: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0) {
            return Err(Error::InvalidParameter(format!("T_end must be >= 0, got {}", self.t_end)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "cfl_safety must lie in (0, 1], got {}",
                self.cfl_safety
            )));
        }
        if !(self.positivity_floor > 0.0 && self.positivity_floor < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "positivity_floor must lie in (0, 1), got {}",
                self.positivity_floor
            )));
        }
        Ok(())
    }
}

/// Largest stable step: `safety · dx / (max|u| + max sqrt((1+θ)/(1+a)))`.
pub fn cfl_check(state: &StateFields, config: &SolverConfig) -> f64 {
    let dx = state.grid().spacing();
    let sound = state
        .a
        .values
        .iter()
        .zip(&state.theta.values)
        .map(|(a, th)| ((1.0 + th) / (1.0 + a)).max(0.0).sqrt())
        .fold(0.0, f64::max);
    config.cfl_safety * dx / (state.max_speed() + sound)
}

/// Solution samples produced by [`Solver::integrate`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub snapshots: Vec<SpectralState>,
    pub steps: usize,
    pub dt: f64,
}

impl TrajectoryRecord {
    pub fn last(&self) -> &SpectralState {
        self.snapshots.last().expect("trajectory has at least one snapshot")
    }
}

/// Called with the time and state at the configured hook stride.
pub type Hook<'a> = dyn FnMut(f64, &SpectralState) -> Result<()> + 'a;

pub struct Solver {
    grid: PeriodicGrid,
    config: SolverConfig,
    dt: f64,
    ops: Vec<EtdOperators>,
    op_index: Vec<usize>,
}

impl Solver {
    /// Prepares the per-wavenumber propagators for `config.dt`, adjusted
    /// down so that an integer number of steps reaches `t_end`.
    pub fn new(grid: PeriodicGrid, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let steps = if config.t_end > 0.0 {
            (config.t_end / config.dt - 1e-9).ceil().max(1.0)
        } else {
            1.0
        };
        let dt = if config.t_end > 0.0 { config.t_end / steps } else { config.dt };
        let mut keys: HashMap<i64, usize> = HashMap::new();
        let mut ops = Vec::new();
        let mut op_index = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let m2: i64 = grid.modes(i).iter().map(|m| m * m).sum();
            let idx = *keys.entry(m2).or_insert_with(|| {
                ops.push(etd_operators(grid.fundamental() * (m2 as f64).sqrt(), dt));
                ops.len() - 1
            });
            op_index.push(idx);
        }
        Ok(Self {
            grid,
            config,
            dt,
            ops,
            op_index,
        })
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    fn check_positivity(&self, phys: &StateFields, time: f64) -> Result<()> {
        let floor = self.config.positivity_floor;
        for (field, f) in [("a", &phys.a), ("theta", &phys.theta)] {
            let min = 1.0 + f.min();
            if min < floor {
                return Err(Error::PositivityViolation { time, field, min, floor });
            }
        }
        Ok(())
    }

    /// Tendency of the linear part: `(−div u, −∇a − u − ∇θ, −div u + Δθ)`.
    pub fn linear_rhs(&self, s: &SpectralState) -> SpectralState {
        let d = self.grid.dim();
        let div = (0..d)
            .map(|i| spectral_derivative(&s.u[i], i, 1))
            .reduce(|x, y| x.add(&y))
            .expect("dimension at least 1");
        let lap = s.theta.radial_multiplier(|k| -k * k);
        SpectralState {
            a: div.scaled(-1.0),
            u: (0..d)
                .map(|i| {
                    spectral_derivative(&s.a, i, 1)
                        .add(&spectral_derivative(&s.theta, i, 1))
                        .add(&s.u[i])
                        .scaled(-1.0)
                })
                .collect(),
            theta: lap.sub(&div),
        }
    }

    /// Nonlinear remainder, with quotients evaluated pointwise and products dealiased.
    pub fn nonlinear_part(&self, s: &SpectralState, time: f64) -> Result<SpectralState> {
        let d = self.grid.dim();
        let phys = s.to_physical();
        self.check_positivity(&phys, time)?;
        let grad = |f: &SpectralField, i: usize| inverse_transform(&spectral_derivative(f, i, 1));
        let grad_a: Vec<RealField> = (0..d).map(|i| grad(&s.a, i)).collect();
        let lap_theta = inverse_transform(&s.theta.radial_multiplier(|k| -k * k));

        let flux_div = |q: &RealField| {
            (0..d)
                .map(|i| spectral_derivative(&forward_transform(&q.mul(&phys.u[i])), i, 1))
                .reduce(|x, y| x.add(&y))
                .expect("dimension at least 1")
        };
        let mut na = flux_div(&phys.a).scaled(-1.0);
        let mut ntheta = flux_div(&phys.theta).scaled(-1.0);

        let quotient = RealField {
            grid: self.grid,
            values: phys
                .a
                .values
                .iter()
                .zip(&phys.theta.values)
                .map(|(a, th)| (th - a) / (1.0 + a))
                .collect(),
        };
        let diffusion_defect = RealField {
            grid: self.grid,
            values: phys
                .a
                .values
                .iter()
                .zip(&lap_theta.values)
                .map(|(a, l)| a / (1.0 + a) * l)
                .collect(),
        };
        ntheta = ntheta.sub(&forward_transform(&diffusion_defect));

        let mut nu = Vec::with_capacity(d);
        for i in 0..d {
            let mut acc = quotient.mul(&grad_a[i]);
            for j in 0..d {
                acc = acc.add(&phys.u[j].mul(&grad(&s.u[i], j)));
            }
            nu.push(forward_transform(&acc).scaled(-1.0));
        }
        if self.config.dealias {
            dealias_in_place(&mut na);
            dealias_in_place(&mut ntheta);
            nu.iter_mut().for_each(dealias_in_place);
        }
        let mut out = SpectralState {
            a: na,
            u: nu,
            theta: ntheta,
        };
        out.clear_nyquist();
        Ok(out)
    }

    /// Full tendency (linear plus nonlinear).
    pub fn nonlinear_rhs(&self, s: &SpectralState, time: f64) -> Result<SpectralState> {
        Ok(self.linear_rhs(s).add(&self.nonlinear_part(s, time)?))
    }

    fn apply(&self, s: &SpectralState, pick: fn(&EtdOperators) -> SplitOperator) -> SpectralState {
        apply_modes(s, |i| pick(&self.ops[self.op_index[i]]))
    }

    /// One ETDRK2 step of length `self.dt()` from time `time`.
    pub fn step(&self, s: &SpectralState, time: f64) -> Result<SpectralState> {
        let h = self.dt;
        let n0 = self.nonlinear_part(s, time)?;
        let stage = self
            .apply(s, |o| o.exp)
            .add(&self.apply(&n0, |o| o.phi1).scaled(h));
        let n1 = self.nonlinear_part(&stage, time + h)?;
        let next = stage.add(&self.apply(&n1.sub(&n0), |o| o.phi2).scaled(h));
        if !next.is_finite() {
            return Err(Error::NonFinite { time: time + h });
        }
        Ok(next)
    }

    /// Smallness proxy `X0 = ‖U‖^ℓ_{Ḃ^{d/2}_{2,1}} + ‖U‖^h_{Ḃ^{d/2+1}_{2,1}}` summed over components.
    pub fn smallness(&self, cutoffs: &crate::littlewood_paley::DyadicCutoffs, s: &SpectralState) -> f64 {
        use crate::littlewood_paley::{shell_norms, Band, ShellRange};
        let dh = self.grid.dim() as f64 / 2.0;
        let range = ShellRange::covering(&self.grid);
        s.components()
            .map(|c| {
                let sh = shell_norms(cutoffs, c, 2.0, range);
                sh.combine(dh, 1.0, Band::low()) + sh.combine(dh + 1.0, 1.0, Band::high())
            })
            .sum()
    }

    /// Integrates from `state0` at `t0` to `t0 + t_end`.
    pub fn integrate(
        &self,
        state0: &SpectralState,
        t0: f64,
        cutoffs: &crate::littlewood_paley::DyadicCutoffs,
        hook: Option<&mut Hook<'_>>,
    ) -> Result<TrajectoryRecord> {
        if state0.grid() != self.grid {
            return Err(Error::InvalidGrid("state grid differs from solver grid".into()));
        }
        if let Some(eps0) = self.config.eps0 {
            let x0 = self.smallness(cutoffs, state0);
            if x0 > eps0 {
                return Err(Error::NotSmall { x0, eps0 });
            }
        }
        self.check_positivity(&state0.to_physical(), t0)?;
        let mut state = state0.clone();
        state.clear_nyquist();
        if self.config.dealias {
            state.dealias();
        }
        let steps = if self.config.t_end > 0.0 {
            (self.config.t_end / self.dt).round() as usize
        } else {
            0
        };
        let mut hook = hook;
        let mut record = TrajectoryRecord {
            times: vec![t0],
            snapshots: vec![state.clone()],
            steps,
            dt: self.dt,
        };
        if let Some(h) = hook.as_mut() {
            h(t0, &state)?;
        }
        for n in 1..=steps {
            let t = t0 + (n - 1) as f64 * self.dt;
            state = self.step(&state, t)?;
            let t_new = t0 + n as f64 * self.dt;
            let stride = self.config.snapshot_stride;
            if (stride > 0 && n % stride == 0) || n == steps {
                record.times.push(t_new);
                record.snapshots.push(state.clone());
            }
            let hs = self.config.hook_stride;
            if hs > 0 && n % hs == 0 {
                if let Some(h) = hook.as_mut() {
                    h(t_new, &state)?;
                }
            }
        }
        Ok(record)
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".meta");
    PathBuf::from(p)
}

/// Writes `a, u_1..u_d, θ` as little-endian f64 plus a `key=value` sidecar.
pub fn write_checkpoint(path: &Path, state: &SpectralState, time: f64, config_hash: &str) -> Result<()> {
    let phys = state.to_physical();
    let grid = state.grid();
    let mut bytes = Vec::with_capacity(8 * grid.len() * (grid.dim() + 2));
    for f in phys.components() {
        for v in &f.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes)?;
    let mut meta = fs::File::create(sidecar(path))?;
    writeln!(meta, "format=eflab-checkpoint-1")?;
    writeln!(meta, "dim={}", grid.dim())?;
    writeln!(meta, "n={}", grid.n())?;
    writeln!(meta, "length={:e}", grid.length())?;
    writeln!(meta, "time={:e}", time)?;
    writeln!(meta, "config_hash={config_hash}")?;
    writeln!(meta, "fields=a,u,theta")?;
    Ok(())
}

/// Reads a checkpoint; returns the state, its time and the recorded config hash.
pub fn read_checkpoint(path: &Path) -> Result<(SpectralState, f64, String)> {
    let meta = fs::read_to_string(sidecar(path))?;
    let mut kv = HashMap::new();
    for line in meta.lines() {
        if let Some((k, v)) = line.split_once('=') {
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    let get = |k: &str| {
        kv.get(k)
            .cloned()
            .ok_or_else(|| Error::Checkpoint(format!("missing key {k}")))
    };
    let parse = |k: &str| -> Result<f64> {
        get(k)?
            .parse::<f64>()
            .map_err(|e| Error::Checkpoint(format!("bad {k}: {e}")))
    };
    let dim = parse("dim")? as usize;
    let n = parse("n")? as usize;
    let grid = PeriodicGrid::new(dim, n, parse("length")?)?;
    let time = parse("time")?;
    let hash = get("config_hash")?;
    let bytes = fs::read(path)?;
    let expect = 8 * grid.len() * (dim + 2);
    if bytes.len() != expect {
        return Err(Error::Checkpoint(format!("expected {expect} bytes, found {}", bytes.len())));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let field = |k: usize| RealField {
        grid,
        values: values[k * grid.len()..(k + 1) * grid.len()].to_vec(),
    };
    let phys = StateFields {
        a: field(0),
        u: (0..dim).map(|i| field(1 + i)).collect(),
        theta: field(dim + 1),
    };
    Ok((phys.to_spectral(), time, hash))
}
