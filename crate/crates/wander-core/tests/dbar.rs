use std::time::Instant;
use wander_core::dbar::*;
use wander_core::geometry::ComplexGrid;
use wander_core::subharmonic::Weight;
use wander_core::{c64, C64};

fn closed_form(z: C64) -> C64 {
    if z.norm() <= 1.0 {
        z.conj()
    } else {
        1.0 / z
    }
}

#[test]
fn disk_indicator_matches_closed_form() {
    let t = Instant::now();
    let g = disk_indicator(512, 2.0).unwrap();
    let sol = solve_dbar_cauchy(&g).unwrap();
    let h = g.spacing;
    let mut worst: f64 = 0.0;
    let mut worst_all: f64 = 0.0;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let z = g.point(i, j);
            let e = (sol.beta.samples[g.index(i, j)] - closed_form(z)).norm();
            worst_all = worst_all.max(e);
            if (z.norm() - 1.0).abs() >= 2.0 * h {
                worst = worst.max(e);
            }
        }
    }
    assert!(worst <= 1e-3, "max error {worst:e} (all cells {worst_all:e})");
    assert!(sol.dbar_residual(2) <= 1e-3);
    // Off-grid points through direct summation.
    for z in [c64(0.3, -0.2), c64(2.7, 1.1), c64(-0.05, 0.61), c64(0.0, -3.5)] {
        assert!((sol.eval(z) - closed_form(z)).norm() < 1e-3, "{z}");
    }
    assert!(t.elapsed().as_secs_f64() < 60.0);
}

#[test]
fn projection_reduces_weighted_norm() {
    let g = disk_indicator(64, 2.0).unwrap();
    let sol = solve_dbar_cauchy(&g).unwrap();
    let u = Weight::Power { center: c64(0.0, 0.0), alpha: 0.5 };
    let min = project_minimal(&sol, &u, 8, 6.0, (24, 48)).unwrap();
    assert!(min.norm_after < min.norm_before);
    assert!(min.orthogonality < 1e-8);
    // Projecting the projected solution changes nothing further.
    let b = |z: C64| min.beta(z);
    let before = weighted_norm(&|z| sol.eval(z), &u, c64(0.0, 0.0), 6.0, (24, 48));
    let after = weighted_norm(&b, &u, c64(0.0, 0.0), 6.0, (24, 48));
    assert!(after < before);
    // Weighted inequality: both sides measured, margin reported.
    let mut i2 = 0.0;
    for (k, v) in g.samples.iter().enumerate() {
        let z = g.point(k % g.nx, k / g.nx);
        i2 += v.norm_sqr() * (-u.value(z)).exp() * g.spacing * g.spacing;
    }
    let i_value = (0.5 * i2).sqrt();
    assert!(i_value > 0.0 && after.is_finite());
    println!("weighted norm {after:.4e} vs integral bound {i_value:.4e} (margin {:.4e})", i_value - after);
}

#[test]
fn constant_is_projected_away() {
    let mut g = ComplexGrid::covering(-1.0, -1.0, 1.0, 1.0, 16, 16).unwrap();
    g.fill(|_| c64(0.0, 0.0));
    let sol = solve_dbar_cauchy(&g).unwrap();
    let zero = Weight::Constant { value: 0.0 };
    let min = project_minimal(&sol, &zero, 3, 2.0, (8, 16)).unwrap();
    assert!(min.coeffs.iter().all(|c| c.norm() < 1e-14));
}

#[test]
fn assembled_toy_satisfies_error_and_growth_bounds() {
    let chi = build_cutoff(vec![CutRegion::Disk { center: c64(0.0, 0.0), radius: 1.0 }], 0.25, Profile::Quintic).unwrap();
    let zero = Weight::Constant { value: 0.0 };
    let hmap = |_: C64| c64(1.0, 0.0);
    let mut g = ComplexGrid::covering(-1.5, -1.5, 1.5, 1.5, 128, 128).unwrap();
    g.fill(|z| chi.dbar(z) * hmap(z));
    let grid = g.clone();
    let sol = solve_dbar_cauchy(&g).unwrap();
    let rep = hormander_integral(&hmap, &chi, &zero, &grid).unwrap();
    let f = Assembled { chi: &chi, h: &hmap, correction: &sol };
    let fz = |z: C64| f.eval(z);
    let c = certify_error_bound("A1", &fz, &hmap, &chi, rep.value, &zero, c64(0.0, 0.0), 0.9).unwrap();
    assert!(c.pass, "{c:?}");
    let c = certify_growth_bound("A2", &fz, &hmap, rep.value, &zero, c64(5.0, 0.0));
    assert!(c.pass, "{c:?}");
    // Off the band F is holomorphic.
    let centers = [c64(0.2, 0.1), c64(2.0, 0.3), c64(-0.4, -2.2)];
    assert!(cauchy_riemann_residual(&fz, &centers, 1e-3) < 1e-3);
    let one = CutOff::constant(true);
    let zero_corr = solve_dbar_cauchy(&ComplexGrid::zeros(c64(0.0, 0.0), 1.0, 2, 2).unwrap()).unwrap();
    let id = |z: C64| z;
    let f = Assembled { chi: &one, h: &id, correction: &zero_corr };
    assert_eq!(f.eval(c64(0.3, 0.4)), c64(0.3, 0.4));
}
