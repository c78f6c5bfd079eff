//! Toy construction chain: base step and one inductive step.

use std::time::Instant;
use wander_core::construction::{construct, toy_schedule, ConstructionOptions, ConstructionState};
use wander_core::domain::DomainModel;
use wander_core::geometry::BoundaryCurve;

fn run(dm: DomainModel) -> ConstructionState {
    let t = Instant::now();
    let mut state = ConstructionState::new(dm, toy_schedule().unwrap(), ConstructionOptions::toy()).unwrap();
    let report = construct(&mut state, 2).unwrap();
    for (k, c) in &report.certificates {
        println!(
            "k={k} {:<22} pass={:<5} measured={:.4e} bound={:.4e}{}",
            c.id,
            c.pass,
            c.measured,
            c.bound,
            c.waiver.as_ref().map(|w| format!("  [waived: {w}]")).unwrap_or_default()
        );
    }
    for st in &state.stages {
        println!("stage {} fit residual {:.3e} window {:.3} ln I {:.3}", st.k, st.fit.residual_max, st.window_scale, st.integral.ln_value);
    }
    println!("elapsed {:?}", t.elapsed());
    state
}

fn assert_core(state: &ConstructionState) {
    let get = |k: usize, prefix: &str| -> Vec<_> {
        state.stages[k - 1].certificates.iter().filter(|c| c.id.starts_with(prefix)).cloned().collect()
    };
    for c in get(1, "S_c.i").into_iter().chain(get(1, "S_e")).chain(get(2, "S_a")).chain(get(2, "S_e")) {
        assert!(c.pass, "{} failed: {} vs {}", c.id, c.measured, c.bound);
    }
    for st in &state.stages {
        for c in &st.certificates {
            assert!(c.accepted(), "stage {} certificate {} neither passes nor is waived", st.k, c.id);
        }
    }
}

#[test]
fn toy_chain_on_disk() {
    let state = run(DomainModel::unit_disk(1.8, 2.0).unwrap());
    assert_core(&state);
}

#[test]
fn toy_chain_on_trefoil_perturbation() {
    let curve = BoundaryCurve::polar(|t| 1.0 + 0.01 * (3.0 * t).cos(), 256).unwrap();
    let dm = DomainModel::new(&curve, 1.0, 1.8, 2.0, 1e-12).unwrap();
    let state = run(dm);
    assert_core(&state);
}
