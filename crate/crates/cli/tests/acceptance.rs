//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::collections::HashMap;
use std::process::Command;

use delaykit::verify::{self, Check};

enum Bound {
    AtMost(f64),
    Above(f64),
}

struct Criterion {
    id: u32,
    title: &'static str,
    parts: Vec<(&'static str, Bound)>,
}

fn criteria() -> Vec<Criterion> {
    use Bound::*;
    vec![
        Criterion {
            id: 1,
            title: "defining ODE residual",
            parts: vec![
                ("defining_ode_residual_left", AtMost(1e-5)),
                ("defining_ode_residual_right", AtMost(1e-5)),
            ],
        },
        Criterion {
            id: 2,
            title: "cross-formula equivalence",
            parts: vec![("cross_formula_equivalence", AtMost(1e-7))],
        },
        Criterion {
            id: 3,
            title: "formula solvers vs method of steps",
            parts: vec![("ivp_oracle_agreement", AtMost(1e-5))],
        },
        Criterion {
            id: 4,
            title: "pure delay hand value u(2) = 3.5",
            parts: vec![("pure_delay_hand_value", AtMost(1e-6))],
        },
        Criterion {
            id: 5,
            title: "counterexample gap and closed form",
            parts: vec![
                ("counterexample_semigroup_gap", Above(0.01)),
                ("counterexample_closed_form", AtMost(1e-10)),
            ],
        },
        Criterion {
            id: 6,
            title: "coefficient table identities",
            parts: vec![
                ("qtable_recursion_vs_definition", AtMost(1e-12)),
                ("qtable_commuting_collapse", AtMost(1e-12)),
                ("qtable_row_sums", AtMost(1e-10)),
                ("qtable_upper_triangle", AtMost(0.0)),
            ],
        },
        Criterion {
            id: 7,
            title: "resolvent Neumann series",
            parts: vec![
                ("resolvent_neumann_residual", AtMost(1e-10)),
                ("resolvent_geometric_envelope", AtMost(1.0 + 1e-6)),
            ],
        },
        Criterion {
            id: 8,
            title: "uniform continuity bound",
            parts: vec![("continuity_bound_excess", AtMost(1e-8))],
        },
        Criterion {
            id: 9,
            title: "heat spectral vs finite differences",
            parts: vec![
                ("heat_spectral_vs_fd", AtMost(5e-4)),
                ("heat_undelayed_exact", AtMost(1e-6)),
            ],
        },
        Criterion {
            id: 10,
            title: "homogeneous formula routes agree",
            parts: vec![("formula_c1_equivalence", AtMost(1e-7))],
        },
    ]
}

fn verify_csv() -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_delaykit"))
        .args(["verify", "--format", "csv"])
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.code() != Some(0) {
        return Err(format!("exit status {:?}", out.status.code()));
    }
    Ok(out.stdout)
}

fn main() {
    let started = std::time::Instant::now();
    let checks: HashMap<&str, Check> = match verify::run_suite() {
        Ok(c) => c.into_iter().map(|c| (c.name, c)).collect(),
        Err(e) => {
            println!("FAIL suite did not run: {e}");
            std::process::exit(1);
        }
    };
    let mut failed = 0;
    for c in criteria() {
        let mut ok = true;
        let mut detail = Vec::new();
        for (name, bound) in &c.parts {
            let Some(check) = checks.get(name) else {
                ok = false;
                detail.push(format!("{name}: missing"));
                continue;
            };
            let m = check.measured;
            let (pass, text) = match bound {
                Bound::AtMost(t) => (m <= *t, format!("{name} = {m:.3e} <= {t:e}")),
                Bound::Above(t) => (m > *t, format!("{name} = {m:.3e} > {t:e}")),
            };
            ok &= pass;
            detail.push(text);
        }
        failed += usize::from(!ok);
        println!(
            "{} criterion {:>2} ({}): {}",
            if ok { "PASS" } else { "FAIL" },
            c.id,
            c.title,
            detail.join("; ")
        );
    }

    let determinism = verify_csv().and_then(|a| verify_csv().map(|b| (a, b)));
    let (ok, detail) = match determinism {
        Ok((a, b)) => (
            !a.is_empty() && a == b,
            format!("{} bytes, identical = {}", a.len(), a == b),
        ),
        Err(e) => (false, e),
    };
    failed += usize::from(!ok);
    println!(
        "{} criterion 11 (verify output is byte-identical across runs): {detail}",
        if ok { "PASS" } else { "FAIL" }
    );

    println!(
        "{} of 11 criteria passed in {:.1?}",
        11 - failed,
        started.elapsed()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
