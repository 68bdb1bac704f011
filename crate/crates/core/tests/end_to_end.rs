use eflab_core::linear::mode_propagator;
use eflab_core::littlewood_paley::{dyadic_block, DyadicCutoffs};
use eflab_core::random_fields::{cosine_mode, random_spectrum, RandomFieldSpec};
use eflab_core::rates::{fit_rate, log_times};
use eflab_core::solver::{linear_box_evolution, read_checkpoint, write_checkpoint, Solver, SolverConfig, SpectralState, StateFields};
use eflab_core::spectral::{inverse_transform, PeriodicGrid};
use nalgebra::DVector;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sound_wave(grid: PeriodicGrid, amplitude: f64) -> SpectralState {
    let mut u = vec![grid.zeros(); grid.dim()];
    u[0] = cosine_mode(grid, [2, 0, 0], 0.5 * amplitude);
    StateFields {
        a: cosine_mode(grid, [1, 0, 0], amplitude),
        u,
        theta: cosine_mode(grid, [3, 0, 0], -0.5 * amplitude),
    }
    .to_spectral()
}

fn solver(grid: PeriodicGrid, dt: f64, t_end: f64) -> Solver {
    Solver::new(
        grid,
        SolverConfig {
            dt,
            t_end,
            ..SolverConfig::default()
        },
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // Σ_j φ_j = 1 with at most two overlapping nonnegative weights, so
    // Σ_j φ_j² lies in [1/2, 1] and the block energies bracket ‖f‖².
    #[test]
    fn dyadic_blocks_reassemble_and_split_energy(seed in any::<u64>(), dim in 1usize..=2) {
        let grid = PeriodicGrid::new(dim, 32, 2.0 * std::f64::consts::PI * 4.0).unwrap();
        let cut = DyadicCutoffs::build(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_spectrum(grid, &RandomFieldSpec::band(0.2, grid.nyquist()), &mut rng).unwrap();
        let lo = grid.fundamental().log2().floor() as i32 - 1;
        let hi = (grid.nyquist() * 3.0f64.sqrt()).log2().ceil() as i32 + 1;
        let blocks: Vec<_> = (lo..=hi).map(|j| inverse_transform(&dyadic_block(&cut, &f, j))).collect();
        let whole = inverse_transform(&f);
        let mut sum = grid.zeros();
        for b in &blocks {
            sum = sum.add(b);
        }
        let err = sum.sub(&whole.map(|v| v - whole.mean())).max_abs();
        prop_assert!(err <= 1e-12 * whole.max_abs().max(1.0), "telescoping error {err}");
        let energy: f64 = blocks.iter().map(|b| b.lp_norm(2.0).powi(2)).sum();
        let ratio = energy / whole.lp_norm(2.0).powi(2);
        prop_assert!((0.5 - 1e-12..=1.0 + 1e-12).contains(&ratio), "energy ratio {ratio}");
    }

    // The linear symbol is skew plus dissipative: a contraction semigroup.
    #[test]
    fn linear_propagator_is_contracting_semigroup(
        xi in prop::collection::vec(-6.0f64..6.0, 1..=3),
        t in 0.0f64..3.0,
        s in 0.0f64..3.0,
        v in prop::collection::vec(-1.0f64..1.0, 5),
    ) {
        let n = xi.len() + 2;
        let pt = mode_propagator(&xi, t);
        let ps = mode_propagator(&xi, s);
        let pts = mode_propagator(&xi, t + s);
        let gap = (&pts - &pt * &ps).norm();
        prop_assert!(gap <= 1e-10 * pts.norm().max(1.0), "semigroup gap {gap}");
        let v = DVector::from_iterator(n, v.into_iter().take(n).map(Complex64::from));
        prop_assert!((&pt * &v).norm() <= v.norm() * (1.0 + 1e-12));
    }

    #[test]
    fn rate_fit_recovers_exact_power_laws(exponent in -3.0f64..0.0, prefactor in 0.01f64..100.0) {
        let times = log_times(1.0, 1e4, 60);
        let values: Vec<f64> = times.iter().map(|t| prefactor * (1.0 + t).powf(exponent)).collect();
        let fit = fit_rate(&times, &values, (10.0, 1e4)).unwrap();
        prop_assert!((fit.exponent - exponent).abs() < 1e-9);
        prop_assert!((fit.prefactor / prefactor - 1.0).abs() < 1e-8);
    }
}

#[test]
fn weak_solutions_deviate_quadratically_from_linear_flow() {
    let grid = PeriodicGrid::new(1, 64, 2.0 * std::f64::consts::PI * 4.0).unwrap();
    let cut = DyadicCutoffs::build(1.0).unwrap();
    let t_end = 0.5;
    let deviation = |amp: f64| {
        let s0 = sound_wave(grid, amp);
        let rec = solver(grid, 0.01, t_end).integrate(&s0, 0.0, &cut, None).unwrap();
        let mass0 = s0.to_physical().a.mean();
        let mass1 = rec.last().to_physical().a.mean();
        assert!((mass1 - mass0).abs() <= 1e-14, "mass drift {}", mass1 - mass0);
        rec.last().sub(&linear_box_evolution(&s0, t_end)).l2_norm()
    };
    let ratio = deviation(1e-3) / deviation(1e-4);
    assert!((50.0..=200.0).contains(&ratio), "deviation ratio {ratio}");
}

#[test]
fn checkpoint_restart_continues_the_trajectory() {
    let grid = PeriodicGrid::new(2, 16, 2.0 * std::f64::consts::PI * 2.0).unwrap();
    let cut = DyadicCutoffs::build(1.0).unwrap();
    let s0 = sound_wave(grid, 0.05);
    let whole = solver(grid, 0.02, 0.4).integrate(&s0, 0.0, &cut, None).unwrap();
    let first = solver(grid, 0.02, 0.2).integrate(&s0, 0.0, &cut, None).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("half.ckpt");
    write_checkpoint(&path, first.last(), 0.2, "hash").unwrap();
    let (restored, t, hash) = read_checkpoint(&path).unwrap();
    assert_eq!((t, hash.as_str()), (0.2, "hash"));

    let second = solver(grid, 0.02, 0.2).integrate(&restored, t, &cut, None).unwrap();
    let gap = second.last().sub(whole.last()).l2_norm();
    assert!(gap <= 1e-13 * whole.last().l2_norm(), "restart gap {gap}");
}
