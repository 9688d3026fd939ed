use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64 as C;
use proptest::prelude::*;
use spectral_transfer::asymptotics::{phi_growth_check, RaySampling};
use spectral_transfer::coefficient::Coefficient;
use spectral_transfer::numerics::csqrt;
use spectral_transfer::sturm_liouville::{
    eigenvalues, fourier_transform, orthogonal_measure, solve_fundamental, weyl_m, SlProblem,
};
use spectral_transfer::weyl::Gamma;

/// Values and derivatives of `sin w/w - cos w` and `cos w/w + sin w`,
/// `w = √z (x - 1)`, which solve `-y'' + 2y/(x-1)² = zy`.
fn inverse_square_basis(x: f64, z: C) -> [(C, C); 2] {
    let s = csqrt(z);
    let w = s * (x - 1.0);
    let (sn, cs) = (w.sin(), w.cos());
    let u1 = sn / w - cs;
    let du1 = s * (cs / w - sn / (w * w) + sn);
    let u2 = cs / w + sn;
    let du2 = s * (-sn / w - cs / (w * w) + cs);
    [(u1, du1), (u2, du2)]
}

/// Combination of the basis with value `y0` and derivative `y1` at 0.
fn with_initial(x: f64, z: C, y0: f64, y1: f64) -> (C, C) {
    let [(a0, da0), (b0, db0)] = inverse_square_basis(0.0, z);
    let det = a0 * db0 - b0 * da0;
    let ca = (y0 * db0 - y1 * b0) / det;
    let cb = (a0 * y1 - da0 * y0) / det;
    let [(a, da), (b, db)] = inverse_square_basis(x, z);
    (ca * a + cb * b, ca * da + cb * db)
}

#[test]
fn inverse_square_fundamental_system() {
    let p = SlProblem::neumann(1.0, Coefficient::function(|x| 2.0 / ((x - 1.0) * (x - 1.0)))).unwrap();
    let z = C::new(1.0, 1.0);
    let f = solve_fundamental(&p, z, 0.5).unwrap();
    let (phi, dphi) = with_initial(0.5, z, 1.0, 0.0);
    let (psi, dpsi) = with_initial(0.5, z, 0.0, 1.0);
    for (got, want) in [(f.phi, phi), (f.phi_prime, dphi), (f.psi, psi), (f.psi_prime, dpsi)] {
        assert!((got - want).norm() < 1e-8, "{got} vs {want}");
    }
}

#[test]
fn constant_potential_shifts_eigenvalues() {
    let p = SlProblem::neumann(1.0, Coefficient::Constant(5.0)).unwrap();
    let ev = eigenvalues(&p, 1.0, &Gamma::Infinity, 2).unwrap();
    for (k, l) in ev.iter().enumerate() {
        let s = (2 * k + 1) as f64 * FRAC_PI_2;
        assert!((l - s * s - 5.0).abs() < 1e-9, "{l}");
    }
}

#[test]
fn fourier_transform_examples() {
    let p = SlProblem::neumann(1.0, Coefficient::zero()).unwrap();
    assert_eq!(fourier_transform(&p, 1.0, |_| 0.0, 3.0).unwrap(), 0.0);
    assert!(fourier_transform(&p, 1.0, |_| 1.0, PI * PI).unwrap().abs() < 1e-12);
}

#[test]
fn parseval_for_a_smooth_potential() {
    // Parseval with y = x(1-x) holds for any potential once enough atoms are kept
    let p = SlProblem::new(1.0, Coefficient::expression("3*sin(2*x)").unwrap(), 1.2).unwrap();
    let m = orthogonal_measure(&p, 1.0, &Gamma::Real(0.7), 120).unwrap();
    let sum: f64 = m
        .atoms()
        .iter()
        .map(|&(l, w)| w * fourier_transform(&p, 1.0, |x| x * (1.0 - x), l).unwrap().powi(2))
        .sum();
    assert!((sum - 1.0 / 30.0).abs() < 1e-6, "{sum}");
}

#[test]
fn phi_growth_along_rays() {
    let free_mixed = SlProblem::new(1.0, Coefficient::zero(), FRAC_PI_4).unwrap();
    let ray = RaySampling::new(2.0, vec![1e2, 1e3, 1e4, 1e5]).unwrap();
    let r = phi_growth_check(&free_mixed, 1.0, &ray).unwrap();
    assert!((r[3] - 1.0).norm() < 1e-2, "{}", r[3]);

    let shifted = SlProblem::neumann(1.0, Coefficient::Constant(1.0)).unwrap();
    let ray = RaySampling::new(PI / 3.0, vec![1e2, 1e3, 1e4, 1e5]).unwrap();
    let r = phi_growth_check(&shifted, 1.0, &ray).unwrap();
    assert!((r[3] - 1.0).norm() < 2e-2, "{}", r[3]);
}

#[test]
fn free_phi_ratio_on_negative_axis() {
    let p = SlProblem::neumann(1.0, Coefficient::zero()).unwrap();
    let ray = RaySampling::new(PI - 1e-12, vec![1e1, 1e2, 1e3, 1e4]).unwrap();
    let r = phi_growth_check(&p, 1.0, &ray).unwrap();
    assert!((r[3] - 1.0).norm() < 1e-3);
}

fn piecewise() -> impl Strategy<Value = Coefficient> {
    (prop::collection::vec(0.05f64..0.95, 0..4), prop::collection::vec(-20.0f64..20.0, 5)).prop_map(|(mut b, v)| {
        b.sort_by(f64::total_cmp);
        b.dedup_by(|x, y| (*x - *y).abs() < 1e-3);
        let n = b.len() + 1;
        Coefficient::piecewise_constant(b, v[..n].to_vec()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn wronskian_is_one(
        q in piecewise(),
        alpha in 0.2f64..3.0,
        re in -50.0f64..50.0,
        im in 0.1f64..10.0,
        x in 0.0f64..1.0,
    ) {
        let p = SlProblem::new(1.0, q, alpha).unwrap();
        let f = solve_fundamental(&p, C::new(re, im), x).unwrap();
        let scale = (f.phi * f.psi_prime).norm() + (f.phi_prime * f.psi).norm();
        prop_assert!((f.wronskian() - 1.0).norm() <= 1e-9 * scale.max(1.0));
    }

    #[test]
    fn weyl_function_is_herglotz(
        q in piecewise(),
        gamma in prop::option::of(-5.0f64..5.0),
        re in -50.0f64..50.0,
        im in 0.01f64..10.0,
    ) {
        let p = SlProblem::neumann(1.0, q).unwrap();
        let g = gamma.map_or(Gamma::Infinity, Gamma::Real);
        prop_assert!(weyl_m(&p, 1.0, &g, C::new(re, im)).unwrap().im > 0.0);
        prop_assert!(weyl_m(&p, 1.0, &g, C::new(re, -im)).unwrap().im < 0.0);
    }

    #[test]
    fn measure_weights_are_positive(q in piecewise(), gamma in prop::option::of(-5.0f64..5.0)) {
        let p = SlProblem::neumann(1.0, q).unwrap();
        let g = gamma.map_or(Gamma::Infinity, Gamma::Real);
        let m = orthogonal_measure(&p, 1.0, &g, 40).unwrap();
        prop_assert!(m.atoms().iter().all(|a| a.1 > 0.0));
        prop_assert!(m.atoms().windows(2).all(|w| w[0].0 < w[1].0));
    }
}
