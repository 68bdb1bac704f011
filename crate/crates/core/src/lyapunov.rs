//! Per-shell energy and dissipation functionals, their coercivity, the
//! commutator remainders of the localized system, and the shell-wise
//! Lyapunov inequality evaluated along trajectories.
//!
//! With `A = Δ̇_j a`, `U = Δ̇_j u`, `Θ = Δ̇_j θ`:
//!
//! ```text
//! E1 = ½‖(A,U,Θ)‖² + η1⟨∇A, U⟩
//! D1 = ‖U‖² + ‖∇Θ‖² + η1(‖∇A‖² − ‖div U‖² + ⟨U, ∇A⟩ + ⟨∇Θ, ∇A⟩)
//! E2 = ½(∫ w A² + ‖U‖² + ‖Θ‖²) + η2 2^{−2j}⟨∇A, U⟩,   w = (1+θ)/(1+a)²
//! D2 = ‖U‖² + ‖∇Θ‖² + η2 2^{−2j}(‖∇A‖² − ‖div U‖² + ⟨U, ∇A⟩ + ⟨∇Θ, ∇A⟩)
//! ```

use std::fmt::Write as _;

use nalgebra::{Matrix3, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::littlewood_paley::{dyadic_block, DyadicCutoffs, FrequencySplit};
use crate::solver::{Solver, SpectralState, TrajectoryRecord};
use crate::spectral::{
    forward_transform, inverse_transform, refine, spectral_derivative, PeriodicGrid, RealField, SpectralField,
};

pub const DEFAULT_ETA: f64 = 0.1;
pub const DEFAULT_BUDGET: f64 = 16.0;
/// Fraction of the dissipation credited on the left of the residual.
pub const DISSIPATION_SHARE: f64 = 0.5;
/// Largest accepted ratio of the time-differencing error estimate to `D`.
pub const DIFFERENCING_TOLERANCE: f64 = 0.1;

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter(format!("mixing parameter {eta} outside (0, 1)")));
    }
    Ok(())
}

/// Quadratic quantities of one shell, all `L²` on the box.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ShellQuadratics {
    pub a2: f64,
    pub u2: f64,
    pub theta2: f64,
    pub grad_a2: f64,
    pub grad_theta2: f64,
    pub div_u2: f64,
    /// `⟨∇A, U⟩`
    pub grad_a_u: f64,
    /// `⟨∇Θ, ∇A⟩`
    pub grad_theta_grad_a: f64,
}

impl ShellQuadratics {
    /// One pass over the modes; derivatives use the same Nyquist convention
    /// as the solver (odd derivatives vanish on the Nyquist line).
    pub fn of(cutoffs: &DyadicCutoffs, s: &SpectralState, j: i32) -> Self {
        let grid = s.grid();
        let d = grid.dim();
        let half = (grid.n() / 2) as i64;
        let vol = grid.volume();
        let mut q = Self::default();
        for i in 0..grid.len() {
            let w = cutoffs.shell_weight(j, grid.wavenumber(i));
            if w == 0.0 {
                continue;
            }
            let w2 = w * w;
            let modes = grid.modes(i);
            let mut xi = grid.wavevector(i);
            for axis in 0..d {
                if modes[axis] == half {
                    xi[axis] = 0.0;
                }
            }
            let k2: f64 = xi.iter().map(|x| x * x).sum();
            let a = s.a.coeffs[i];
            let th = s.theta.coeffs[i];
            q.a2 += w2 * a.norm_sqr();
            q.theta2 += w2 * th.norm_sqr();
            q.grad_a2 += w2 * k2 * a.norm_sqr();
            q.grad_theta2 += w2 * k2 * th.norm_sqr();
            q.grad_theta_grad_a += w2 * k2 * (th * a.conj()).re;
            let mut div = num_complex::Complex64::from(0.0);
            for c in 0..d {
                let u = s.u[c].coeffs[i];
                q.u2 += w2 * u.norm_sqr();
                // ∂_c A = iξ_c Â
                let da = num_complex::Complex64::new(0.0, xi[c]) * a;
                q.grad_a_u += w2 * (da * u.conj()).re;
                div += num_complex::Complex64::new(0.0, xi[c]) * u;
            }
            q.div_u2 += w2 * div.norm_sqr();
        }
        let scale = |x: &mut f64| *x *= vol;
        for x in [
            &mut q.a2,
            &mut q.u2,
            &mut q.theta2,
            &mut q.grad_a2,
            &mut q.grad_theta2,
            &mut q.div_u2,
            &mut q.grad_a_u,
            &mut q.grad_theta_grad_a,
        ] {
            scale(x);
        }
        q
    }

    pub fn total(&self) -> f64 {
        self.a2 + self.u2 + self.theta2
    }

    fn mixed_dissipation(&self) -> f64 {
        self.grad_a2 - self.div_u2 + self.grad_a_u + self.grad_theta_grad_a
    }
}

fn positivity(s: &SpectralState) -> Result<(RealField, RealField)> {
    let a = inverse_transform(&s.a);
    let th = inverse_transform(&s.theta);
    for (field, f) in [("a", &a), ("theta", &th)] {
        let min = 1.0 + f.min();
        if !(min > 0.0) {
            return Err(Error::PositivityViolation {
                time: f64::NAN,
                field,
                min,
                floor: 0.0,
            });
        }
    }
    Ok((a, th))
}

/// `(E1, D1)` for a shell `j ≤ j0`.
pub fn low_freq_functionals(cutoffs: &DyadicCutoffs, s: &SpectralState, j: i32, eta1: f64) -> Result<(f64, f64)> {
    check_eta(eta1)?;
    if !FrequencySplit::default().is_low(j) {
        return Err(Error::Constraint(format!("low-frequency functional needs j <= 0, got {j}")));
    }
    let q = ShellQuadratics::of(cutoffs, s, j);
    Ok(low_from(&q, eta1))
}

fn low_from(q: &ShellQuadratics, eta1: f64) -> (f64, f64) {
    (
        0.5 * q.total() + eta1 * q.grad_a_u,
        q.u2 + q.grad_theta2 + eta1 * q.mixed_dissipation(),
    )
}

/// `(E2, D2)` for a shell `j ≥ j0 − 1`.
pub fn high_freq_functionals(cutoffs: &DyadicCutoffs, s: &SpectralState, j: i32, eta2: f64) -> Result<(f64, f64)> {
    check_eta(eta2)?;
    if !FrequencySplit::default().is_high(j) {
        return Err(Error::Constraint(format!("high-frequency functional needs j >= -1, got {j}")));
    }
    let (a, th) = positivity(s)?;
    let q = ShellQuadratics::of(cutoffs, s, j);
    Ok(high_from(cutoffs, s, &a, &th, &q, j, eta2))
}

fn high_from(
    cutoffs: &DyadicCutoffs,
    s: &SpectralState,
    a: &RealField,
    th: &RealField,
    q: &ShellQuadratics,
    j: i32,
    eta2: f64,
) -> (f64, f64) {
    let block = inverse_transform(&dyadic_block(cutoffs, &s.a, j));
    let dv = a.grid.cell_volume();
    let weighted: f64 = block
        .values
        .iter()
        .zip(&a.values)
        .zip(&th.values)
        .map(|((b, a), t)| (1.0 + t) / (1.0 + a).powi(2) * b * b)
        .sum::<f64>()
        * dv;
    let mix = eta2 * 4f64.powi(-j);
    (
        0.5 * (weighted + q.u2 + q.theta2) + mix * q.grad_a_u,
        q.u2 + q.grad_theta2 + mix * q.mixed_dissipation(),
    )
}

/// Largest wavenumber in the support of shell `j`.
fn shell_top(j: i32) -> f64 {
    8.0 / 3.0 * 2f64.powi(j)
}

/// Bounds `(½ − η1/2, ½ + η1/2)` on `E1 / ‖(A,U,Θ)‖²`.
///
/// Per mode the ratio lies in `½ ± η1|ξ|/2`, so the bounds hold for every
/// state when the shell support stays inside `|ξ| ≤ 1`, that is `j ≤ −2`.
pub fn low_energy_bounds(eta1: f64) -> (f64, f64) {
    (0.5 - eta1 / 2.0, 0.5 + eta1 / 2.0)
}

/// Worst-case range of `E1 / ‖(A,U,Θ)‖²` over all states on shell `j`.
pub fn low_energy_bounds_exact(eta1: f64, j: i32) -> (f64, f64) {
    let k = shell_top(j);
    (0.5 - eta1 * k / 2.0, 0.5 + eta1 * k / 2.0)
}

/// Smallest eigenvalue of the per-mode dissipation form relative to
/// `2^{2j}(|Â|² + |Θ̂|²) + |Û|²` over the given wavenumbers.
///
/// Writing the longitudinal velocity as `i·v·ξ/|ξ|`, the form on real
/// `(A, v, Θ)` has matrix
/// `[[η k², η k/2, η k²/2], [η k/2, 1 − η k², 0], [η k²/2, 0, k²]]`;
/// transverse velocity contributes ratio 1.
pub fn low_dissipation_constant(eta1: f64, j: i32, dim: usize, wavenumbers: &[f64]) -> f64 {
    let r = 2f64.powi(j);
    let mut c = if dim >= 2 { 1.0 } else { f64::INFINITY };
    for &k in wavenumbers {
        let e = eta1;
        let q = Matrix3::new(
            e * k * k,
            e * k / 2.0,
            e * k * k / 2.0,
            e * k / 2.0,
            1.0 - e * k * k,
            0.0,
            e * k * k / 2.0,
            0.0,
            k * k,
        );
        let scale = Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0 / r, 1.0, 1.0 / r));
        let m = scale * q * scale;
        let ev = SymmetricEigen::new(m).eigenvalues.min();
        c = c.min(ev);
    }
    c
}

/// [`low_dissipation_constant`] over a dense sample of the continuous shell support.
pub fn low_dissipation_constant_continuum(eta1: f64, j: i32, dim: usize) -> f64 {
    let lo = 0.75 * 2f64.powi(j);
    let hi = shell_top(j);
    let ks: Vec<f64> = (0..=4096).map(|i| lo + (hi - lo) * i as f64 / 4096.0).collect();
    low_dissipation_constant(eta1, j, dim, &ks)
}

/// Commutator remainders of the localized system on the refined grid.
#[derive(Debug, Clone)]
pub struct Remainders {
    pub r1: RealField,
    pub r2: Vec<RealField>,
    pub r3: RealField,
}

impl Remainders {
    /// `(‖R̃¹‖, ‖R̃²‖, ‖R̃³‖)` in `L²`.
    pub fn norms(&self) -> [f64; 3] {
        [
            self.r1.lp_norm(2.0),
            self.r2.iter().map(|f| f.lp_norm(2.0).powi(2)).sum::<f64>().sqrt(),
            self.r3.lp_norm(2.0),
        ]
    }
}

/// Refined-grid physical fields needed by the remainders and bounds.
struct Fine {
    cutoffs: DyadicCutoffs,
    a: RealField,
    u: Vec<RealField>,
    theta: RealField,
    a_hat: SpectralField,
    u_hat: Vec<SpectralField>,
    theta_hat: SpectralField,
}

impl Fine {
    fn new(cutoffs: &DyadicCutoffs, s: &SpectralState) -> Result<Self> {
        positivity(s)?;
        let a_hat = refine(&s.a);
        let u_hat: Vec<SpectralField> = s.u.iter().map(refine).collect();
        let theta_hat = refine(&s.theta);
        Ok(Self {
            cutoffs: cutoffs.clone(),
            a: inverse_transform(&a_hat),
            u: u_hat.iter().map(inverse_transform).collect(),
            theta: inverse_transform(&theta_hat),
            a_hat,
            u_hat,
            theta_hat,
        })
    }

    fn dim(&self) -> usize {
        self.u.len()
    }

    fn deriv(&self, f: &SpectralField, axis: usize) -> RealField {
        inverse_transform(&spectral_derivative(f, axis, 1))
    }

    fn block(&self, f: &RealField, j: i32) -> RealField {
        inverse_transform(&dyadic_block(&self.cutoffs, &forward_transform(f), j))
    }

    /// `[Δ̇_j, f] g = Δ̇_j(fg) − f Δ̇_j g`
    fn commutator(&self, f: &RealField, g: &RealField, j: i32) -> RealField {
        self.block(&f.mul(g), j).sub(&f.mul(&self.block(g, j)))
    }

    fn pointwise<F: Fn(f64, f64) -> f64>(&self, f: F) -> RealField {
        RealField {
            grid: self.a.grid,
            values: self.a.values.iter().zip(&self.theta.values).map(|(a, t)| f(*a, *t)).collect(),
        }
    }

    fn remainders(&self, j: i32) -> Remainders {
        let d = self.dim();
        let grad_a: Vec<RealField> = (0..d).map(|i| self.deriv(&self.a_hat, i)).collect();
        let div_u = (0..d)
            .map(|i| self.deriv(&self.u_hat[i], i))
            .reduce(|x, y| x.add(&y))
            .expect("dimension at least 1");
        let mut r1 = self.commutator(&self.a, &div_u, j);
        for i in 0..d {
            r1 = r1.add(&self.commutator(&self.u[i], &grad_a[i], j));
        }
        let p = self.pointwise(|a, t| (1.0 + t) / (1.0 + a));
        let r2 = (0..d)
            .map(|i| {
                let mut acc = self.commutator(&p, &grad_a[i], j);
                for k in 0..d {
                    acc = acc.add(&self.commutator(&self.u[k], &self.deriv(&self.u_hat[i], k), j));
                }
                acc.scaled(-1.0)
            })
            .collect();
        let b = self.pointwise(|a, _| a / (1.0 + a));
        let lap = inverse_transform(&self.theta_hat.radial_multiplier(|k| -k * k));
        Remainders {
            r1: r1.scaled(-1.0),
            r2,
            r3: self.commutator(&b, &lap, j),
        }
    }
}

/// `R̃¹_j = −[Δ̇_j, 1+a] div u − [Δ̇_j, u]·∇a`,
/// `R̃²_j = −[Δ̇_j, u]·∇u − [Δ̇_j, (1+θ)/(1+a)]∇a`,
/// `R̃³_j = [Δ̇_j, a/(1+a)]Δθ`, with products formed on the refined grid.
pub fn commutator_remainders(cutoffs: &DyadicCutoffs, s: &SpectralState, j: i32) -> Result<Remainders> {
    Ok(Fine::new(cutoffs, s)?.remainders(j))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeEnergyRecord {
    pub t: f64,
    pub j: i32,
    pub e1: Option<f64>,
    pub d1: Option<f64>,
    pub e2: Option<f64>,
    pub d2: Option<f64>,
    pub eta1: f64,
    pub eta2: f64,
    pub remainder_norms: [f64; 3],
}

/// Evaluates every functional that applies to shell `j`.
pub fn mode_energy_record(
    cutoffs: &DyadicCutoffs,
    s: &SpectralState,
    t: f64,
    j: i32,
    eta1: f64,
    eta2: f64,
) -> Result<ModeEnergyRecord> {
    let split = FrequencySplit::default();
    let (e1, d1) = if split.is_low(j) {
        let (e, d) = low_freq_functionals(cutoffs, s, j, eta1)?;
        (Some(e), Some(d))
    } else {
        (None, None)
    };
    let (e2, d2) = if split.is_high(j) {
        let (e, d) = high_freq_functionals(cutoffs, s, j, eta2)?;
        (Some(e), Some(d))
    } else {
        (None, None)
    };
    Ok(ModeEnergyRecord {
        t,
        j,
        e1,
        d1,
        e2,
        d2,
        eta1,
        eta2,
        remainder_norms: commutator_remainders(cutoffs, s, j)?.norms(),
    })
}

pub fn records_to_csv(records: &[ModeEnergyRecord]) -> String {
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.12e}"));
    let mut out = String::from("t,j,E1,D1,E2,D2,eta1,eta2,R1,R2,R3\n");
    for r in records {
        let _ = writeln!(
            out,
            "{:.12e},{},{},{},{},{},{},{},{:.12e},{:.12e},{:.12e}",
            r.t,
            r.j,
            opt(r.e1),
            opt(r.d1),
            opt(r.e2),
            opt(r.d2),
            r.eta1,
            r.eta2,
            r.remainder_norms[0],
            r.remainder_norms[1],
            r.remainder_norms[2]
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Low,
    High,
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::Low => "low",
            Regime::High => "high",
        }
    }
}

fn l2(f: &RealField) -> f64 {
    f.lp_norm(2.0)
}

fn l2_vec(fs: &[RealField]) -> f64 {
    fs.iter().map(|f| l2(f).powi(2)).sum::<f64>().sqrt()
}

fn sup_vec(fs: &[RealField]) -> f64 {
    let n = fs[0].values.len();
    (0..n)
        .map(|i| fs.iter().map(|f| f.values[i] * f.values[i]).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Upper bound for the nonlinear part of `dE/dt + D` on shell `j`, built from
/// the norm products that close the shell energy estimates. `tendency` is the
/// full right side of the system at this state.
fn nonlinear_bound(
    fine: &Fine,
    q: &ShellQuadratics,
    tendency: &SpectralState,
    j: i32,
    regime: Regime,
    eta: f64,
) -> f64 {
    let d = fine.dim();
    let blk = |f: &RealField| fine.block(f, j);
    let grad_a: Vec<RealField> = (0..d).map(|i| fine.deriv(&fine.a_hat, i)).collect();
    let grad_t: Vec<RealField> = (0..d).map(|i| fine.deriv(&fine.theta_hat, i)).collect();
    let au: Vec<RealField> = fine.u.iter().map(|u| fine.a.mul(u)).collect();
    let ut: Vec<RealField> = fine.u.iter().map(|u| fine.theta.mul(u)).collect();
    let au_blk: Vec<RealField> = au.iter().map(blk).collect();
    let div_au_blk = l2(&(0..d)
        .map(|i| fine.deriv(&forward_transform(&au_blk[i]), i))
        .reduce(|x, y| x.add(&y))
        .expect("dimension at least 1"));
    let conv: Vec<RealField> = (0..d)
        .map(|i| {
            (0..d)
                .map(|k| fine.u[k].mul(&fine.deriv(&fine.u_hat[i], k)))
                .reduce(|x, y| x.add(&y))
                .expect("dimension at least 1")
        })
        .collect();
    let qf = fine.pointwise(|a, t| (t - a) / (1.0 + a));
    let q_grad_a: Vec<RealField> = grad_a.iter().map(|g| qf.mul(g)).collect();
    let conv_n = l2_vec(&conv.iter().map(blk).collect::<Vec<_>>());
    let qga_n = l2_vec(&q_grad_a.iter().map(blk).collect::<Vec<_>>());
    let ut_n = l2_vec(&ut.iter().map(blk).collect::<Vec<_>>());
    let (na, nu, nt) = (q.a2.sqrt(), q.u2.sqrt(), q.theta2.sqrt());
    let (nga, ngt, ndiv) = (q.grad_a2.sqrt(), q.grad_theta2.sqrt(), q.div_u2.sqrt());
    let b = fine.pointwise(|a, _| a / (1.0 + a));
    let grad_b: Vec<RealField> = (0..d).map(|i| fine.deriv(&forward_transform(&b), i)).collect();
    match regime {
        Regime::Low => {
            let b_grad_t = l2_vec(&grad_t.iter().map(|g| blk(&b.mul(g))).collect::<Vec<_>>());
            let gb_gt = (0..d)
                .map(|i| grad_b[i].mul(&grad_t[i]))
                .reduce(|x, y| x.add(&y))
                .expect("dimension at least 1");
            l2_vec(&au_blk) * nga
                + eta * div_au_blk * ndiv
                + (conv_n + qga_n) * (nu + eta * nga)
                + (ut_n + b_grad_t) * ngt
                + l2(&blk(&gb_gt)) * nt
        }
        Regime::High => {
            let w = fine.pointwise(|a, t| (1.0 + t) / (1.0 + a).powi(2));
            let p = fine.pointwise(|a, t| (1.0 + t) / (1.0 + a));
            let grad_p: Vec<RealField> = (0..d).map(|i| fine.deriv(&forward_transform(&p), i)).collect();
            let at = inverse_transform(&refine(&tendency.a));
            let tt = inverse_transform(&refine(&tendency.theta));
            let w_t = RealField {
                grid: fine.a.grid,
                values: (0..at.values.len())
                    .map(|i| {
                        let (a, t) = (fine.a.values[i], fine.theta.values[i]);
                        tt.values[i] / (1.0 + a).powi(2) - 2.0 * (1.0 + t) * at.values[i] / (1.0 + a).powi(3)
                    })
                    .collect(),
            };
            let div_wu = (0..d)
                .map(|i| fine.deriv(&forward_transform(&w.mul(&fine.u[i])), i))
                .reduce(|x, y| x.add(&y))
                .expect("dimension at least 1");
            let div_u = (0..d)
                .map(|i| fine.deriv(&fine.u_hat[i], i))
                .reduce(|x, y| x.add(&y))
                .expect("dimension at least 1");
            let [r1, r2, r3] = fine.remainders(j).norms();
            let mix = eta * 4f64.powi(-j);
            0.5 * w_t.max_abs() * na * na
                + sup_vec(&grad_p) * nu * na
                + 0.5 * div_wu.max_abs() * na * na
                + 0.5 * div_u.max_abs() * nu * nu
                + ut_n * ngt
                + sup_vec(&grad_b) * ngt * nt
                + b.max_abs() * ngt * ngt
                + r1 * w.max_abs() * na
                + r2 * nu
                + r3 * nt
                + mix * (div_au_blk * ndiv + conv_n * nga + qga_n * nga)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualSample {
    pub t: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub de_dt: f64,
    /// `dE/dt + c·D`
    pub left: f64,
    pub rhs: f64,
    /// `max(left, 0) / rhs`, with `0/0` read as 0.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub j: i32,
    pub regime: Regime,
    pub eta: f64,
    pub c: f64,
    pub budget: f64,
    pub samples: Vec<ResidualSample>,
    pub worst_ratio: f64,
    /// `max (dE/dt + c·D) / D` over samples with `D > 0`.
    pub dissipation_ratio: f64,
    pub pass: bool,
}

/// Evaluates `dE/dt + c·D` on shell `j` by centered differences of the
/// stored snapshots and compares it with the nonlinear bound.
pub fn lyapunov_residual(
    cutoffs: &DyadicCutoffs,
    solver: &Solver,
    record: &TrajectoryRecord,
    j: i32,
    regime: Regime,
    eta: f64,
    budget: f64,
) -> Result<ResidualReport> {
    check_eta(eta)?;
    let split = FrequencySplit::default();
    let ok = match regime {
        Regime::Low => split.is_low(j),
        Regime::High => split.is_high(j),
    };
    if !ok {
        return Err(Error::Constraint(format!("shell {j} outside the {} regime", regime.name())));
    }
    let times = &record.times;
    let n = times.len();
    if n < 5 {
        return Err(Error::StrideTooCoarse(format!(
            "centered differencing needs at least 5 snapshots, got {n}"
        )));
    }
    let h = times[1] - times[0];
    if times.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0)) {
        return Err(Error::InvalidParameter("snapshots must be equally spaced".into()));
    }
    let mut energy = Vec::with_capacity(n);
    let mut dissipation = Vec::with_capacity(n);
    let mut quads = Vec::with_capacity(n);
    for s in &record.snapshots {
        let q = ShellQuadratics::of(cutoffs, s, j);
        let (e, d) = match regime {
            Regime::Low => low_from(&q, eta),
            Regime::High => {
                let (a, th) = positivity(s)?;
                high_from(cutoffs, s, &a, &th, &q, j, eta)
            }
        };
        energy.push(e);
        dissipation.push(d);
        quads.push(q);
    }
    let c = DISSIPATION_SHARE;
    let mut samples = Vec::new();
    let mut worst: f64 = 0.0;
    let mut diss_ratio = f64::NEG_INFINITY;
    for k in 2..n - 2 {
        let d1 = (energy[k + 1] - energy[k - 1]) / (2.0 * h);
        let d2 = (energy[k + 2] - energy[k - 2]) / (4.0 * h);
        let err = (d2 - d1).abs() / 3.0;
        if err > DIFFERENCING_TOLERANCE * dissipation[k].abs() && err > 1e-300 {
            return Err(Error::StrideTooCoarse(format!(
                "time-differencing error {err:.3e} exceeds {DIFFERENCING_TOLERANCE} of D = {:.3e} at t = {}",
                dissipation[k], times[k]
            )));
        }
        let s = &record.snapshots[k];
        let fine = Fine::new(cutoffs, s)?;
        let tendency = solver.nonlinear_rhs(s, times[k])?;
        let rhs = nonlinear_bound(&fine, &quads[k], &tendency, j, regime, eta);
        let left = d1 + c * dissipation[k];
        let ratio = if left <= 0.0 {
            0.0
        } else if rhs > 0.0 {
            left / rhs
        } else {
            f64::INFINITY
        };
        worst = worst.max(ratio);
        if dissipation[k] > 0.0 {
            diss_ratio = diss_ratio.max(left / dissipation[k]);
        }
        samples.push(ResidualSample {
            t: times[k],
            energy: energy[k],
            dissipation: dissipation[k],
            de_dt: d1,
            left,
            rhs,
            ratio,
        });
    }
    Ok(ResidualReport {
        j,
        regime,
        eta,
        c,
        budget,
        samples,
        worst_ratio: worst,
        dissipation_ratio: if diss_ratio.is_finite() { diss_ratio } else { 0.0 },
        pass: worst <= budget,
    })
}

/// Measured coercivity ratios of one shell over random states.
#[derive(Debug, Clone, PartialEq)]
pub struct CoercivityReport {
    pub j: i32,
    pub trials: usize,
    pub eta1: f64,
    pub eta2: f64,
    /// `(min, max)` of `E1 / ‖(A,U,Θ)‖²`, for low shells.
    pub e1_range: Option<(f64, f64)>,
    pub e1_bounds: (f64, f64),
    /// `min D1 / (2^{2j}‖(A,Θ)‖² + ‖U‖²)` and the quadratic-form constant.
    pub d1_min: Option<f64>,
    pub d1_constant: f64,
    /// `(min, max)` of `E2 / ‖(A,U,Θ)‖²`, for high shells.
    pub e2_range: Option<(f64, f64)>,
    /// `(min, max)` of `D2 / (‖(A,U)‖² + 2^{2j}‖Θ‖²)`, for high shells.
    pub d2_range: Option<(f64, f64)>,
    pub pass: bool,
}

/// Range allowed for the measured high-frequency equivalence constants.
pub const EQUIVALENCE_RANGE: (f64, f64) = (0.125, 8.0);
const ARITHMETIC_SLACK: f64 = 1e-12;

/// Box on which shell `j` sits at mode radii `[6, 64/3]` of a 64-point grid.
pub fn coercivity_grid(dim: usize, j: i32) -> Result<PeriodicGrid> {
    PeriodicGrid::new(dim, 64, 2.0 * std::f64::consts::PI * 8.0 * 2f64.powi(-j))
}

fn random_shell_state(grid: PeriodicGrid, j: i32, amplitude: f64, rng: &mut ChaCha8Rng) -> SpectralState {
    let (lo, hi) = (0.75 * 2f64.powi(j), shell_top(j));
    let half = (grid.n() / 2) as i64;
    let mut s = SpectralState::zeros(grid);
    let mut fill = |f: &mut SpectralField| {
        for i in 0..grid.len() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let k = grid.wavenumber(i);
            if k >= lo && k <= hi && !grid.modes(i)[..grid.dim()].contains(&half) {
                f.coeffs[i] = num_complex::Complex64::new(re, im);
            }
        }
        crate::random_fields::enforce_hermitian(f);
        let m = inverse_transform(f).max_abs();
        if m > 0.0 {
            *f = f.scaled(amplitude / m);
        }
    };
    fill(&mut s.a);
    for c in s.u.iter_mut() {
        fill(c);
    }
    fill(&mut s.theta);
    s
}

/// Evaluates the coercivity statements of shell `j` on `trials` random states
/// of pointwise size `amplitude`.
pub fn check_coercivity(
    cutoffs: &DyadicCutoffs,
    dim: usize,
    j: i32,
    eta1: f64,
    eta2: f64,
    trials: usize,
    amplitude: f64,
    seed: u64,
) -> Result<CoercivityReport> {
    check_eta(eta1)?;
    check_eta(eta2)?;
    let grid = coercivity_grid(dim, j)?;
    let split = FrequencySplit::default();
    let low = split.is_low(j);
    let high = split.is_high(j);
    let ks: Vec<f64> = (0..grid.len())
        .map(|i| grid.wavenumber(i))
        .filter(|&k| cutoffs.shell_weight(j, k) > 0.0)
        .collect();
    let d1_constant = low_dissipation_constant(eta1, j, dim, &ks);
    let e1_bounds = low_energy_bounds(eta1);
    let r = 4f64.powi(j);
    let widen = |acc: Option<(f64, f64)>, x: f64| Some(acc.map_or((x, x), |(a, b)| (a.min(x), b.max(x))));
    let (mut e1_range, mut d1_min, mut e2_range, mut d2_range) = (None, None::<f64>, None, None);
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (j as i64 as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        rng.set_stream(t as u64);
        let s = random_shell_state(grid, j, amplitude, &mut rng);
        let q = ShellQuadratics::of(cutoffs, &s, j);
        let total = q.total();
        if total == 0.0 {
            continue;
        }
        if low {
            let (e1, d1) = low_from(&q, eta1);
            e1_range = widen(e1_range, e1 / total);
            let ratio = d1 / (r * (q.a2 + q.theta2) + q.u2);
            d1_min = Some(d1_min.map_or(ratio, |m| m.min(ratio)));
        }
        if high {
            let (a, th) = positivity(&s)?;
            let (e2, d2) = high_from(cutoffs, &s, &a, &th, &q, j, eta2);
            e2_range = widen(e2_range, e2 / total);
            d2_range = widen(d2_range, d2 / (q.a2 + q.u2 + r * q.theta2));
        }
    }
    let slack = |x: f64| ARITHMETIC_SLACK * x.abs().max(1.0);
    let e1_ok = e1_range.is_none_or(|(lo, hi)| lo >= e1_bounds.0 - slack(lo) && hi <= e1_bounds.1 + slack(hi));
    let d1_ok = d1_min.is_none_or(|m| d1_constant > 0.0 && m >= d1_constant * (1.0 - ARITHMETIC_SLACK));
    let within = |rg: Option<(f64, f64)>| {
        rg.is_none_or(|(lo, hi)| lo >= EQUIVALENCE_RANGE.0 && hi <= EQUIVALENCE_RANGE.1)
    };
    Ok(CoercivityReport {
        j,
        trials,
        eta1,
        eta2,
        e1_range,
        e1_bounds,
        d1_min,
        d1_constant,
        pass: e1_ok && d1_ok && within(e2_range) && within(d2_range),
        e2_range,
        d2_range,
    })
}
