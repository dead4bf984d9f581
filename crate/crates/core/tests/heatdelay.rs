use std::f64::consts::PI;

use delaykit::heatdelay::{
    fourier_coeffs, solve_fd_oracle, solve_fd_oracle_with, solve_spectral, solve_spectral_c1,
    HeatProblem, Normalization, SpectralConfig, Substeps,
};
use delaykit::ivpsolver::{solve_method_of_steps, DelaySystem};
use delaykit::{Error, Matrix, Vector};

fn grid(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| t0 + (t1 - t0) * i as f64 / (n - 1) as f64)
        .collect()
}

fn xs(n: usize) -> Vec<f64> {
    let mut v = grid(0.0, PI, n);
    *v.last_mut().unwrap() = PI;
    v
}

/// Composite Simpson with many intervals, independent of the Gauss rule.
fn simpson(f: impl Fn(f64) -> f64, n: usize) -> f64 {
    let h = PI / n as f64;
    let mut s = f(0.0) + f(PI);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn fourier_coefficients_examples() {
    let c = fourier_coeffs(|x| (3.0 * x).sin(), 8, 64);
    for (i, v) in c.iter().enumerate() {
        let expected = if i == 2 { 1.0 } else { 0.0 };
        assert!((v - expected).abs() < 1e-12, "n={} {v}", i + 1);
    }
    assert!(fourier_coeffs(|_| 0.0, 5, 64).iter().all(|v| *v == 0.0));

    let f = |x: f64| x * (PI - x);
    let c = fourier_coeffs(f, 20, 64);
    for (i, v) in c.iter().enumerate() {
        let n = (i + 1) as f64;
        let closed = if (i + 1) % 2 == 1 {
            8.0 / (PI * n.powi(3))
        } else {
            0.0
        };
        assert!((v - closed).abs() < 1e-10, "n={n}");
        let oracle = 2.0 / PI * simpson(|x| f(x) * (n * x).sin(), 20_000);
        assert!((v - oracle).abs() < 1e-10, "n={n}");
    }
}

#[test]
fn undelayed_single_mode_decays_exponentially() {
    for a in [1.0, 0.7] {
        let p = HeatProblem::new(a, 0.0, 1.0, |x, _| x.sin()).unwrap();
        let ts = grid(0.0, 2.0, 11);
        let xg = xs(17);
        let u = solve_spectral(&p, &SpectralConfig::default(), &xg, &ts).unwrap();
        for (it, t) in ts.iter().enumerate() {
            for (ix, x) in xg.iter().enumerate() {
                let exact = (-a * a * t).exp() * x.sin();
                assert!((u.value(it, ix) - exact).abs() < 1e-7);
            }
        }
    }
}

#[test]
fn delayed_single_mode_matches_scalar_oracle() {
    let (a, b, tau) = (1.0, 0.8, 1.0);
    let p = HeatProblem::new(a, b, tau, |x, _| (2.0 * x).sin()).unwrap();
    let ts = grid(0.0, 3.0, 31);
    let xg = vec![0.3, 1.1, 2.0];
    let u = solve_spectral(&p, &SpectralConfig::default(), &xg, &ts).unwrap();

    let sys = DelaySystem::with_constant_history(
        Matrix::scalar(-4.0 * a * a),
        Matrix::scalar(b),
        tau,
        Vector::from_slice(&[1.0]).unwrap(),
    )
    .unwrap();
    let c = solve_method_of_steps(&sys, 3.0, 1e-3).unwrap();
    for (it, &t) in ts.iter().enumerate() {
        let ct = c.value_at(t).unwrap().get(0);
        for (ix, x) in xg.iter().enumerate() {
            assert!(
                (u.value(it, ix) - ct * (2.0 * x).sin()).abs() < 1e-7,
                "t={t}"
            );
        }
    }
}

#[test]
fn boundary_values_are_exactly_zero() {
    let p = HeatProblem::new(1.0, 0.5, 1.0, |x, t| x * (PI - x) * (1.0 + t))
        .unwrap()
        .with_forcing(|x, t| x.sin() * t.cos());
    let u = solve_spectral(
        &p,
        &SpectralConfig::default(),
        &[0.0, 1.0, PI],
        &[0.0, 0.5, 1.7],
    )
    .unwrap();
    for it in 0..3 {
        assert_eq!(u.value(it, 0), 0.0);
        assert_eq!(u.value(it, 2), 0.0);
    }
}

#[test]
fn single_mode_data_excites_single_mode() {
    let p = HeatProblem::new(0.8, 0.6, 1.0, |x, t| (3.0 * x).sin() * (1.0 + t))
        .unwrap()
        .with_forcing(|x, t| (3.0 * x).sin() * t.cos());
    let cfg = SpectralConfig {
        n_modes: 16,
        ..SpectralConfig::default()
    };
    let u = solve_spectral(&p, &cfg, &[1.0], &grid(0.0, 2.0, 9)).unwrap();
    let coeffs = u.coefficients().unwrap();
    for c in coeffs {
        for (i, v) in c.iter().enumerate() {
            if i != 2 {
                assert!(v.abs() <= cfg.time_tol, "mode {}: {v}", i + 1);
            }
        }
    }
    assert!((coeffs[0][2] - 1.0).abs() < 1e-12);
}

#[test]
fn both_normalizations_agree() {
    let p = HeatProblem::new(1.0, 0.5, 1.0, |x, t| x * (PI - x) * (1.0 + t))
        .unwrap()
        .with_forcing(|x, t| x.sin() * t.cos());
    let base = SpectralConfig {
        n_modes: 24,
        ..SpectralConfig::default()
    };
    let ortho = SpectralConfig {
        normalization: Normalization::Orthonormal,
        ..base
    };
    let ts = grid(0.0, 2.0, 5);
    let xg = xs(9);
    let a = solve_spectral(&p, &base, &xg, &ts).unwrap();
    let b = solve_spectral(&p, &ortho, &xg, &ts).unwrap();
    assert!(a.max_diff(&b).unwrap() < 1e-12);
}

#[test]
fn derivative_route_matches_history_route() {
    let p = HeatProblem::new(0.9, 0.7, 1.0, |x, t| {
        x * (PI - x) * (1.0 + 0.5 * (2.0 * t).sin())
    })
    .unwrap()
    .with_history_time_derivative(|x, t| x * (PI - x) * (2.0 * t).cos())
    .with_forcing(|x, t| (2.0 * x).sin() * (1.0 + t));
    let cfg = SpectralConfig {
        n_modes: 32,
        ..SpectralConfig::default()
    };
    let ts = grid(0.0, 2.5, 11);
    let xg = xs(13);
    let a = solve_spectral(&p, &cfg, &xg, &ts).unwrap();
    let b = solve_spectral_c1(&p, &cfg, &xg, &ts).unwrap();
    let d = a.max_diff(&b).unwrap();
    assert!(d < 1e-7, "{d}");

    // the derivative route reproduces the history on [−τ, 0]
    let hist = solve_spectral_c1(&p, &cfg, &xg, &[-0.75, -0.25]).unwrap();
    let direct = solve_spectral(
        &HeatProblem::new(0.9, 0.0, 1.0, |x, _| x * (PI - x)).unwrap(),
        &cfg,
        &xg,
        &[0.0],
    )
    .unwrap();
    for (it, t) in [-0.75f64, -0.25].iter().enumerate() {
        let scale = 1.0 + 0.5 * (2.0 * t).sin();
        for ix in 0..xg.len() {
            assert!((hist.value(it, ix) - scale * direct.value(0, ix)).abs() < 1e-7);
        }
    }
}

#[test]
fn derivative_route_requires_derivative() {
    let p = HeatProblem::new(1.0, 0.5, 1.0, |x, _| x.sin()).unwrap();
    let r = solve_spectral_c1(&p, &SpectralConfig::default(), &[1.0], &[0.5]);
    assert!(matches!(r, Err(Error::Unsupported(_))));
}

#[test]
fn incompatible_history_is_rejected() {
    assert!(matches!(
        HeatProblem::new(1.0, 0.5, 1.0, |_, _| 1.0),
        Err(Error::Precondition(_))
    ));
}

fn fd_error_vs_exact(m: usize) -> f64 {
    let p = HeatProblem::new(1.0, 0.0, 1.0, |x, _| x.sin()).unwrap();
    let u = solve_fd_oracle(&p, m, 0.01, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    for (it, t) in u.ts().iter().enumerate() {
        for (ix, x) in u.xs().iter().enumerate() {
            worst = worst.max((u.value(it, ix) - (-t).exp() * x.sin()).abs());
        }
    }
    worst
}

#[test]
fn fd_oracle_is_second_order_in_space() {
    let (e1, e2) = (fd_error_vs_exact(20), fd_error_vs_exact(40));
    let ratio = e1 / e2;
    assert!((3.5..4.5).contains(&ratio), "{e1} {e2} {ratio}");
}

#[test]
fn fd_refinement_converges_to_spectral() {
    let p = HeatProblem::new(1.0, 0.5, 1.0, |x, t| x * (PI - x) * (1.0 + t))
        .unwrap()
        .with_forcing(|x, t| x.sin() * t.cos());
    let ts = grid(0.0, 2.0, 5);
    let mut errs = Vec::new();
    for m in [24, 49] {
        let fd = solve_fd_oracle(&p, m, 0.01, 2.0).unwrap();
        let sp = solve_spectral(&p, &SpectralConfig::default(), fd.xs(), &ts).unwrap();
        errs.push(sp.max_diff(&fd).unwrap());
    }
    let ratio = errs[0] / errs[1];
    assert!((3.5..4.5).contains(&ratio), "{errs:?} {ratio}");
}

#[test]
fn fd_and_spectral_agree_on_smooth_problems() {
    type F = fn(f64, f64) -> f64;
    let problems: [(f64, f64, F, Option<F>); 5] = [
        (
            1.0,
            0.5,
            |x, t| x * (PI - x) * (1.0 + t),
            Some(|x, t| x.sin() * t.cos()),
        ),
        (0.8, -0.4, |x, _| x.sin() + 0.5 * (2.0 * x).sin(), None),
        (
            1.2,
            0.3,
            |x, t| x * (PI - x) * (t * 2.0).cos(),
            Some(|x, t| x * (PI - x) * t),
        ),
        (
            0.6,
            0.9,
            |x, t| (3.0 * x).sin() * (1.0 - t),
            Some(|x, _| (x * (PI - x)).powi(2) / 10.0),
        ),
        (
            1.0,
            -0.7,
            |x, t| x.sin() * (t + 2.0),
            Some(|x, t| (2.0 * x).sin() * (-t).exp()),
        ),
    ];
    let m = 100;
    let dx = PI / (m + 1) as f64;
    // agreement bound max(1e-4, C·Δx²) with C = 1
    let bound = f64::max(1e-4, dx * dx);
    let ts = grid(0.0, 2.0, 5);
    for (i, (a, b, phi, psi)) in problems.into_iter().enumerate() {
        let mut p = HeatProblem::new(a, b, 1.0, phi).unwrap();
        if let Some(psi) = psi {
            p = p.with_forcing(psi);
        }
        let fd = solve_fd_oracle(&p, m, 0.01, 2.0).unwrap();
        let sp = solve_spectral(&p, &SpectralConfig::default(), fd.xs(), &ts).unwrap();
        let d = sp.max_diff(&fd).unwrap();
        assert!(d <= bound, "problem {i}: {d} > {bound}");
    }
}

#[test]
fn fd_without_substeps_diverges() {
    let p = HeatProblem::new(1.0, 0.5, 1.0, |x, _| x.sin()).unwrap();
    let r = solve_fd_oracle_with(&p, 100, 0.01, 2.0, Substeps::Fixed(1));
    assert!(matches!(r, Err(Error::Diverged { .. })));
    assert!(solve_fd_oracle(&p, 100, 0.01, 2.0).is_ok());
}

#[test]
fn fd_arguments_are_validated() {
    let p = HeatProblem::new(1.0, 0.5, 1.0, |x, _| x.sin()).unwrap();
    assert!(matches!(
        solve_fd_oracle(&p, 4, 0.01, 1.0),
        Err(Error::InvalidArgument(_))
    ));
    assert!(matches!(
        solve_fd_oracle(&p, 20, 0.3, 1.0),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn spectral_matches_fd_on_reference_problem() {
    let p = HeatProblem::new(1.0, 0.5, 1.0, |x, t| x * (PI - x) * (1.0 + t))
        .unwrap()
        .with_forcing(|x, t| x.sin() * t.cos());
    let fd = solve_fd_oracle(&p, 200, 1.0 / 400.0, 2.0).unwrap();
    let ts = grid(0.0, 2.0, 21);
    let sp = solve_spectral(&p, &SpectralConfig::default(), fd.xs(), &ts).unwrap();
    let d = sp.max_diff(&fd).unwrap();
    assert!(d < 5e-4, "{d}");
    assert!(sp.meta().coefficient_tail.unwrap() < 1e-4);
}
