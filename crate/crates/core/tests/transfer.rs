use num_complex::Complex64 as C;
use proptest::prelude::*;
use spectral_transfer::closed_form::free_interval;
use spectral_transfer::coefficient::Coefficient;
use spectral_transfer::measure::{
    stieltjes_invert, stieltjes_transform, InversionOptions, SpectralMeasure, TailDescriptor,
};
use spectral_transfer::numerics::linspace;
use spectral_transfer::sturm_liouville::{orthogonal_measure, SlProblem};
use spectral_transfer::transfer::{
    compare_transfer, krein_kernel_matrix, laplace_bridge_residual, max_deviation, phi_from_measure, psd_verdict,
    PSD_TOL,
};
use spectral_transfer::weyl::{FnWeyl, Gamma};

fn free() -> SlProblem {
    SlProblem::neumann(1.0, Coefficient::zero()).unwrap()
}

#[test]
fn dirichlet_end_measure_reproduces_tanh() {
    // m_∞(-1) = tanh(1) from the closed-form atoms with the λ^{-1/2}/π tail
    let atoms = free_interval::dirichlet_atoms(4000);
    let l1 = atoms[atoms.len() - 1].0;
    let l0 = atoms[atoms.len() - 2].0;
    let tail = TailDescriptor::one_sided(-0.5, 1.0 / std::f64::consts::PI, l1 + 0.5 * (l1 - l0));
    let m = SpectralMeasure::new(atoms, None, Some(tail)).unwrap();
    let v = stieltjes_transform(&m, C::new(-1.0, 1e-12)).unwrap();
    assert!((v.re - 1f64.tanh()).abs() < 1e-6, "{v}");
}

#[test]
fn inversion_of_an_empty_interval() {
    let mu = SpectralMeasure::from_atoms(vec![(1.0, 2.0)]).unwrap();
    let r = stieltjes_invert(|z| stieltjes_transform(&mu, z).unwrap(), 2.0, 3.0, &InversionOptions::default()).unwrap();
    assert!(r.mass.abs() < 1e-6);
}

#[test]
fn transfer_is_independent_of_the_boundary_condition() {
    let grid = linspace(0.0, 2.0, 101);
    let phis: Vec<_> = [Gamma::Real(0.0), Gamma::Real(1.0), Gamma::Real(2.0), Gamma::Infinity]
        .iter()
        .map(|g| phi_from_measure(orthogonal_measure(&free(), 1.0, g, 4000).unwrap(), grid.clone(), 2.0).unwrap())
        .collect();
    for a in &phis {
        for b in &phis {
            assert!(max_deviation(a, b, 0.0, 2.0).unwrap().0 < 1e-3);
        }
    }
    let d = (phis[0].eval(3.0).unwrap() - phis[3].eval(3.0).unwrap()).norm();
    assert!((d - 4.0).abs() < 1e-2, "{d}");
}

#[test]
fn local_agreement_of_a_step_pair() {
    let grid = linspace(0.0, 2.0, 201);
    let phi = |q: Coefficient| {
        let p = SlProblem::neumann(1.0, q).unwrap();
        phi_from_measure(orthogonal_measure(&p, 1.0, &Gamma::Infinity, 4000).unwrap(), grid.clone(), 2.0).unwrap()
    };
    let f1 = phi(Coefficient::zero());
    let f2 = phi(Coefficient::step(0.5, 0.0, 5.0));
    let c = compare_transfer(&f1, &f2, 0.5, 1e-2).unwrap();
    assert!(c.locally_identical && c.max_abs_deviation < 1e-6);
    assert!(max_deviation(&f1, &f2, 1.0, 2.0).unwrap().0 > 0.01);
    assert!(!compare_transfer(&f1, &f2, 1.0, 1e-2).unwrap().locally_identical);
}

#[test]
fn laplace_bridge_for_the_free_interval() {
    let m = orthogonal_measure(&free(), 1.0, &Gamma::Infinity, 10_000).unwrap();
    let phi = phi_from_measure(m, linspace(0.0, 4.0, 3), 2.0).unwrap();
    let weyl = FnWeyl(|z| free_interval::weyl(&Gamma::Infinity, z));
    let r = laplace_bridge_residual(&phi, &weyl, &[10.0], 4.0).unwrap();
    assert!((r[0].weyl - 10f64.tanh() / 100.0).abs() < 1e-9);
    assert!(r[0].residual < 1e-6, "{:?}", r[0]);
}

fn atoms() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0f64..400.0, 0.01f64..3.0), 1..30)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn transfer_of_a_measure_is_positive_definite(atoms in atoms()) {
        let mu = SpectralMeasure::from_atoms(atoms).unwrap();
        let phi = phi_from_measure(mu, linspace(0.0, 2.0, 3), 2.0).unwrap();
        let v = psd_verdict(&krein_kernel_matrix(&phi, &linspace(0.0, 1.0, 50)).unwrap(), PSD_TOL);
        prop_assert!(v.is_psd, "{v:?}");
    }

    #[test]
    fn stieltjes_transform_is_herglotz(atoms in atoms(), re in -100.0f64..500.0, im in 1e-3f64..10.0) {
        let mu = SpectralMeasure::from_atoms(atoms).unwrap();
        prop_assert!(stieltjes_transform(&mu, C::new(re, im)).unwrap().im > 0.0);
    }

    #[test]
    fn inversion_round_trip(
        weights in prop::collection::vec(0.1f64..3.0, 1..6),
        shifts in prop::collection::vec(-0.5f64..0.5, 6),
    ) {
        let atoms: Vec<(f64, f64)> = weights
            .iter()
            .enumerate()
            .map(|(k, &w)| (2.0 * k as f64 + shifts[k], w))
            .collect();
        let mu = SpectralMeasure::from_atoms(atoms.clone()).unwrap();
        for (l, w) in atoms {
            let r = stieltjes_invert(
                |z| stieltjes_transform(&mu, z).unwrap(),
                l - 0.5,
                l + 0.5,
                &InversionOptions::default(),
            )
            .unwrap();
            prop_assert!((r.mass - w).abs() < 1e-3 * w);
        }
    }
}
