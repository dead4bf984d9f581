use delaykit::ivpsolver::{
    solve_homogeneous, solve_homogeneous_c1, solve_method_of_steps, solve_nonhomogeneous,
    DelaySystem, FormulaOptions,
};
use delaykit::{expm, sampling, Error, Matrix, Vector};

fn scalar(v: f64) -> Matrix {
    Matrix::scalar(v)
}

fn vec1(v: f64) -> Vector {
    Vector::from_slice(&[v]).unwrap()
}

fn grid(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| t0 + (t1 - t0) * i as f64 / (n - 1) as f64)
        .collect()
}

/// u' = u(t−1), u ≡ 1 on [−1, 0].
fn pure_delay_system() -> DelaySystem {
    DelaySystem::with_constant_history(scalar(0.0), scalar(1.0), 1.0, vec1(1.0))
        .unwrap()
        .with_history_derivative(|_| vec1(0.0))
        .unwrap()
}

fn pure_delay_exact(t: f64) -> f64 {
    if t <= 1.0 {
        1.0 + t
    } else {
        1.0 + t + (t - 1.0).powi(2) / 2.0
    }
}

fn tight() -> FormulaOptions {
    FormulaOptions::with_tol(1e-12).unwrap()
}

#[test]
fn pure_delay_piecewise_polynomial_all_routes() {
    let sys = pure_delay_system();
    let ts = grid(0.0, 2.0, 21);
    let a = solve_homogeneous(&sys, &ts, &tight()).unwrap();
    let b = solve_homogeneous_c1(&sys, &ts, &tight()).unwrap();
    let c = solve_method_of_steps(&sys, 2.0, 0.01).unwrap();
    for (i, &t) in ts.iter().enumerate() {
        let exact = pure_delay_exact(t);
        assert!((a.values()[i].get(0) - exact).abs() < 1e-10, "t={t}");
        assert!((b.values()[i].get(0) - exact).abs() < 1e-10, "t={t}");
        assert!(
            (c.value_at(t).unwrap().get(0) - exact).abs() < 1e-8,
            "t={t}"
        );
    }
    assert!((a.values()[20].get(0) - 3.5).abs() < 1e-10);
}

#[test]
fn no_delay_coupling_reduces_to_matrix_exponential() {
    let a0 = Matrix::from_rows(&[vec![-0.4, 1.0], vec![-1.0, 0.2]]).unwrap();
    let x = Vector::from_slice(&[0.7, -1.3]).unwrap();
    let sys = DelaySystem::new(a0.clone(), Matrix::zeros(2), 0.5, move |t| {
        // history away from 0 must not matter
        if t == 0.0 {
            x.clone()
        } else {
            Vector::from_slice(&[5.0, 5.0]).unwrap()
        }
    })
    .unwrap();
    let ts = grid(0.0, 2.0, 9);
    let formula = solve_homogeneous(&sys, &ts, &tight()).unwrap();
    let x = Vector::from_slice(&[0.7, -1.3]).unwrap();
    for (i, &t) in ts.iter().enumerate() {
        let exact = expm(&a0, t).unwrap().mul_vec(&x);
        assert!(formula.values()[i].max_abs_diff(&exact) < 1e-10);
    }

    let sys =
        DelaySystem::with_constant_history(a0.clone(), Matrix::zeros(2), 1.0, x.clone()).unwrap();
    let steps = solve_method_of_steps(&sys, 2.0, 0.01).unwrap();
    for (t, v) in steps.times().iter().zip(steps.values()) {
        assert!(v.max_abs_diff(&expm(&a0, *t).unwrap().mul_vec(&x)) < 1e-8);
    }
}

#[test]
fn value_at_zero_is_history_exactly() {
    let mut rng = sampling::rng(11);
    for _ in 0..5 {
        let sys = sampling::system(&mut rng, 4, 1.0, false).unwrap();
        let u = solve_homogeneous(&sys, &[0.0, 0.5], &FormulaOptions::default()).unwrap();
        assert_eq!(u.values()[0], sys.history(0.0));
        let u = solve_method_of_steps(&sys, 0.5, 0.01).unwrap();
        assert_eq!(u.values()[0], sys.history(0.0));
    }
}

#[test]
fn random_three_by_three_matches_oracle() {
    let mut rng = sampling::rng(2024);
    let a0 = sampling::unit_matrix(&mut rng, 3);
    let a1 = sampling::unit_matrix(&mut rng, 3);
    let phi = sampling::Sinusoid::random(&mut rng, 3);
    let sys = DelaySystem::new(a0, a1, 1.0, move |t| phi.value(t)).unwrap();
    let ts = grid(0.0, 3.0, 31);
    let formula = solve_homogeneous(&sys, &ts, &FormulaOptions::default()).unwrap();
    let oracle = solve_method_of_steps(&sys, 3.0, 1.0 / 200.0).unwrap();
    let diff = formula.max_diff(&oracle).unwrap();
    assert!(diff < 1e-6, "{diff}");
}

#[test]
fn derivative_formula_matches_and_reproduces_history() {
    let mut rng = sampling::rng(5);
    for _ in 0..4 {
        let sys = sampling::system(&mut rng, 4, 1.0, false).unwrap();
        let ts = grid(0.0, 3.0, 16);
        let a = solve_homogeneous(&sys, &ts, &tight()).unwrap();
        let b = solve_homogeneous_c1(&sys, &ts, &tight()).unwrap();
        assert!(a.max_diff(&b).unwrap() < 1e-9);

        let hist = grid(-1.0, 0.0, 11);
        let h = solve_homogeneous_c1(&sys, &hist, &tight()).unwrap();
        for (t, v) in hist.iter().zip(h.values()) {
            assert!(v.max_abs_diff(&sys.history(*t)) < 1e-10, "t={t}");
        }
    }
}

#[test]
fn constant_history_derivative_formula_matches() {
    let a0 = Matrix::from_rows(&[vec![0.3, -0.5], vec![0.2, -0.1]]).unwrap();
    let a1 = Matrix::from_rows(&[vec![-0.6, 0.1], vec![0.4, 0.5]]).unwrap();
    let c = Vector::from_slice(&[1.0, -2.0]).unwrap();
    let sys = DelaySystem::with_constant_history(a0, a1, 0.7, c)
        .unwrap()
        .with_history_derivative(|_| Vector::zeros(2))
        .unwrap();
    let ts = grid(0.0, 2.1, 22);
    let a = solve_homogeneous(&sys, &ts, &tight()).unwrap();
    let b = solve_homogeneous_c1(&sys, &ts, &tight()).unwrap();
    assert!(a.max_diff(&b).unwrap() < 1e-9);
}

#[test]
fn derivative_formula_requires_derivative() {
    let sys = DelaySystem::with_constant_history(scalar(0.0), scalar(1.0), 1.0, vec1(1.0)).unwrap();
    let r = solve_homogeneous_c1(&sys, &[0.0, 1.0], &FormulaOptions::default());
    assert!(matches!(r, Err(Error::Unsupported(_))));
}

#[test]
fn forcing_routing_is_checked() {
    let plain = pure_delay_system();
    assert!(matches!(
        solve_nonhomogeneous(&plain, &[0.0], &FormulaOptions::default()),
        Err(Error::Precondition(_))
    ));
    let forced = plain.with_forcing(|_| vec1(0.0)).unwrap();
    assert!(matches!(
        solve_homogeneous(&forced, &[0.0], &FormulaOptions::default()),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn zero_forcing_equals_homogeneous() {
    let mut rng = sampling::rng(8);
    let sys = sampling::system(&mut rng, 3, 1.0, false).unwrap();
    let dim = sys.dim();
    let forced = sys
        .clone()
        .with_forcing(move |_| Vector::zeros(dim))
        .unwrap();
    let ts = grid(0.0, 3.0, 13);
    let a = solve_homogeneous(&sys, &ts, &tight()).unwrap();
    let b = solve_nonhomogeneous(&forced, &ts, &tight()).unwrap();
    assert!(a.max_diff(&b).unwrap() < 1e-14);
}

#[test]
fn constant_forcing_without_dynamics_is_linear() {
    let v = Vector::from_slice(&[0.5, -1.5]).unwrap();
    let phi0 = Vector::from_slice(&[2.0, 1.0]).unwrap();
    let vg = v.clone();
    let sys =
        DelaySystem::with_constant_history(Matrix::zeros(2), Matrix::zeros(2), 1.0, phi0.clone())
            .unwrap()
            .with_forcing(move |_| vg.clone())
            .unwrap();
    let ts = grid(0.0, 3.0, 7);
    let u = solve_nonhomogeneous(&sys, &ts, &tight()).unwrap();
    for (t, val) in ts.iter().zip(u.values()) {
        let mut exact = phi0.clone();
        exact.axpy(*t, &v);
        assert!(val.max_abs_diff(&exact) < 1e-12);
    }
}

#[test]
fn scalar_sine_forcing_matches_oracle() {
    let sys = DelaySystem::with_constant_history(scalar(-1.0), scalar(0.5), 1.0, vec1(1.0))
        .unwrap()
        .with_forcing(|t| vec1(t.sin()))
        .unwrap();
    let ts = grid(0.0, 3.0, 61);
    let formula = solve_nonhomogeneous(&sys, &ts, &FormulaOptions::default()).unwrap();
    let oracle = solve_method_of_steps(&sys, 3.0, 1.0 / 200.0).unwrap();
    let diff = formula.max_diff(&oracle).unwrap();
    assert!(diff < 1e-6, "{diff}");
}

#[test]
fn random_systems_formula_agrees_with_oracle() {
    let mut rng = sampling::rng(77);
    let ts = grid(0.0, 3.0, 31);
    for i in 0..20 {
        let sys = sampling::system(&mut rng, 4, 1.0, i % 2 == 1).unwrap();
        let formula = if sys.has_forcing() {
            solve_nonhomogeneous(&sys, &ts, &FormulaOptions::default()).unwrap()
        } else {
            solve_homogeneous(&sys, &ts, &FormulaOptions::default()).unwrap()
        };
        let oracle = solve_method_of_steps(&sys, 3.0, 1.0 / 200.0).unwrap();
        let diff = formula.max_diff(&oracle).unwrap();
        assert!(diff <= 1e-5, "system {i}: {diff}");
    }
}

#[test]
fn residual_of_formula_solution_is_small() {
    let mut rng = sampling::rng(99);
    let sys = sampling::system(&mut rng, 3, 1.0, true).unwrap();
    let h = 1e-3;
    let centres = [0.3, 0.75, 1.4, 1.9, 2.35, 2.8];
    let mut ts = Vec::new();
    for c in centres {
        ts.extend([c - 1.0 - h, c - 1.0, c - 1.0 + h, c - h, c, c + h]);
    }
    // keep only the non-negative lag points for the formula grid
    let mut pos: Vec<f64> = ts.iter().copied().filter(|t| *t >= 0.0).collect();
    pos.sort_by(f64::total_cmp);
    pos.dedup();
    let u = solve_nonhomogeneous(&sys, &pos, &tight()).unwrap();
    let at = |t: f64| -> Vector {
        if t < 0.0 {
            sys.history(t)
        } else {
            let i = pos.iter().position(|x| *x == t).unwrap();
            u.values()[i].clone()
        }
    };
    for c in centres {
        let du = (&at(c + h) - &at(c - h)).scale(0.5 / h);
        let rhs = &(&sys.a0().mul_vec(&at(c)) + &sys.a1().mul_vec(&at(c - 1.0)))
            + &sys.forcing(c).unwrap();
        let r = du.max_abs_diff(&rhs);
        assert!(r < 1e-4, "t={c}: {r}");
    }
}

#[test]
fn method_of_steps_is_fourth_order() {
    let sys = DelaySystem::new(scalar(-0.5), scalar(0.8), 1.0, |t| vec1(t.cos())).unwrap();
    let ts = grid(0.0, 3.0, 31);
    let reference =
        solve_homogeneous(&sys, &ts, &FormulaOptions::with_tol(1e-13).unwrap()).unwrap();
    let err = |h: f64| reference_error(&reference, &solve_method_of_steps(&sys, 3.0, h).unwrap());
    let (e1, e2, e3) = (err(0.1), err(0.05), err(0.025));
    let (r1, r2) = (e1 / e2, e2 / e3);
    assert!((12.0..20.0).contains(&r1), "{e1} {e2} ratio {r1}");
    assert!((12.0..20.0).contains(&r2), "{e2} {e3} ratio {r2}");
}

fn reference_error(reference: &delaykit::SolutionGrid, approx: &delaykit::SolutionGrid) -> f64 {
    // nodes only, so dense output does not enter the measurement
    let mut worst: f64 = 0.0;
    for (t, v) in approx.times().iter().zip(approx.values()) {
        if let Some(i) = reference.times().iter().position(|x| (x - t).abs() < 1e-12) {
            worst = worst.max(v.max_abs_diff(&reference.values()[i]));
        }
    }
    worst
}

#[test]
fn step_must_divide_delay() {
    let sys = pure_delay_system();
    assert!(matches!(
        solve_method_of_steps(&sys, 2.0, 0.3),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn grid_times_are_validated() {
    let sys = pure_delay_system();
    let opts = FormulaOptions::default();
    assert!(solve_homogeneous(&sys, &[-0.5, 1.0], &opts).is_err());
    assert!(solve_homogeneous(&sys, &[1.0, 0.5], &opts).is_err());
    assert!(solve_homogeneous_c1(&sys, &[-1.5], &opts).is_err());
}

#[test]
fn mismatched_history_dimension_is_rejected() {
    let r = DelaySystem::new(Matrix::identity(2), Matrix::identity(2), 1.0, |_| vec1(1.0));
    assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
}
