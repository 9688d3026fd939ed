use num_complex::Complex64 as C;
use proptest::prelude::*;
use spectral_transfer::canonical::{
    a_of_l, det2, extend_atoms, f_from_measure, l_of_a, localize_screw, potential_to_hamiltonian, screw_from_measure,
    screw_kernel_psd, symplectic_defect, trace_normalize, transfer_matrix_w, weyl_function_canonical,
    weyl_function_limit, Hamiltonian, SymmetricPotential,
};
use spectral_transfer::closed_form::{jump_hamiltonian, rotation, singular_diagonal};
use spectral_transfer::coefficient::Coefficient;
use spectral_transfer::measure::SpectralMeasure;
use spectral_transfer::numerics::linspace;
use spectral_transfer::transfer::{TransferFunction, PSD_TOL};
use spectral_transfer::weyl::Gamma;

fn rotation_h() -> Hamiltonian {
    Hamiltonian::constant(0.5, 0.0, 0.5, 2.0).unwrap()
}

fn singular_h() -> Hamiltonian {
    Hamiltonian::diagonal(
        Coefficient::function(|x| (x - 1.0) * (x - 1.0)),
        Coefficient::function(|x| 1.0 / ((x - 1.0) * (x - 1.0))),
        1.0,
    )
    .unwrap()
}

fn jump_h() -> Hamiltonian {
    Hamiltonian::diagonal(
        Coefficient::function_with_breaks(|x| if x < 1.0 { 0.0 } else { (x - 2.0) * (x - 2.0) }, vec![1.0]),
        Coefficient::function_with_breaks(|x| if x < 1.0 { 1.0 } else { 1.0 / ((x - 2.0) * (x - 2.0)) }, vec![1.0]),
        2.0,
    )
    .unwrap()
}

fn screw(atoms: &[(f64, f64)], beta: f64, grid: Vec<f64>) -> TransferFunction {
    screw_from_measure(extend_atoms(atoms, 10_000).unwrap(), beta, grid, 2.0).unwrap()
}

#[test]
fn weyl_functions_of_the_worked_systems() {
    let z = C::new(1.0, 1.0);
    let m = weyl_function_canonical(&rotation_h(), 2.0, &Gamma::Infinity, z).unwrap();
    assert!((m + z.cos() / z.sin()).norm() < 1e-10);
    let i = C::new(0.0, 1.0);
    let m = weyl_function_limit(&singular_h(), i, 1e-9).unwrap();
    assert!((m - singular_diagonal::weyl(i)).norm() < 1e-6, "{m}");
    let z = C::new(0.0, 2.0);
    let m = weyl_function_limit(&jump_h(), z, 1e-9).unwrap();
    assert!((m - jump_hamiltonian::weyl(z)).norm() < 1e-6, "{m}");
}

#[test]
fn screw_functions_from_closed_form_measures() {
    let g = screw(&rotation::atoms(&Gamma::Infinity, 200), 0.0, vec![1.0, 3.0]);
    assert!((g.values()[0].re + 1.0).abs() < 1e-3);
    assert!((g.values()[1].re + 5.0).abs() < 1e-3);
    let g = screw(&singular_diagonal::atoms(200), 0.0, vec![1.0]);
    assert!((g.values()[0].re + 0.5).abs() < 1e-3);
    let zero = SpectralMeasure::from_atoms(vec![(0.0, 1.0)]).unwrap();
    let g = screw_from_measure(zero, 0.0, vec![1.5], 2.0).unwrap();
    assert!((g.values()[0] - C::new(-1.125, 0.0)).norm() < 1e-14);
}

#[test]
fn f_functions() {
    let m = extend_atoms(&jump_hamiltonian::atoms(50), 10_000).unwrap();
    let f = f_from_measure(m, vec![0.0, 1.0, 3.0], 2.0).unwrap();
    for (v, want) in f.values().iter().zip([1.0, 0.0, 0.0]) {
        assert!((v - want).norm() < 1e-3, "{v}");
    }
    let three = SpectralMeasure::from_atoms(vec![(0.0, 3.0)]).unwrap();
    let f = f_from_measure(three, linspace(-2.0, 2.0, 5), 2.0).unwrap();
    assert!(f.values().iter().all(|v| (v - 3.0).norm() < 1e-14));
    let pair = SpectralMeasure::from_atoms(vec![(-1.0, 0.5), (1.0, 0.5)]).unwrap();
    let f = f_from_measure(pair, linspace(-2.0, 2.0, 9), 2.0).unwrap();
    for (t, v) in f.grid().iter().zip(f.values()) {
        assert!((v - t.cos()).norm() < 1e-14);
    }
}

#[test]
fn screw_localization() {
    let atoms = rotation::atoms(&Gamma::Infinity, 200);
    let grid = linspace(0.0, 2.0, 41);
    let g1 = screw(&atoms, 0.0, grid.clone());
    let g2 = screw(&atoms, 0.1, grid);
    let same = localize_screw(&g1, &g1, 1.0, 1e-9).unwrap();
    assert!(same.locally_identical && same.beta_hat == 0.0 && same.residual == 0.0);
    let fit = localize_screw(&g1, &g2, 1.0, 1e-9).unwrap();
    assert!((fit.beta_hat + 0.1).abs() < 1e-12 && fit.residual < 1e-12 && fit.locally_identical);
}

#[test]
fn screw_kernel_signs() {
    let half = TransferFunction::from_real_fn("-t^2/2", |t| -0.5 * t * t, linspace(-2.0, 2.0, 3), 2.0).unwrap();
    assert!(screw_kernel_psd(&half, &linspace(0.0, 1.0, 20), PSD_TOL).unwrap().is_psd);
    let square = TransferFunction::from_real_fn("t^2", |t| t * t, linspace(-4.0, 4.0, 3), 4.0).unwrap();
    let v = screw_kernel_psd(&square, &[1.0, 2.0], PSD_TOL).unwrap();
    assert!(v.min_eigenvalue < 0.0 && !v.is_psd);
    let g = screw(&singular_diagonal::atoms(200), 0.0, linspace(-2.0, 2.0, 3));
    assert!(screw_kernel_psd(&g, &linspace(-1.0, 1.0, 40), PSD_TOL).unwrap().is_psd);
}

#[test]
fn lengths_and_normalization() {
    let h = rotation_h();
    assert!((a_of_l(&h, 2.0).unwrap() - 1.0).abs() < 1e-12);
    assert!((l_of_a(&h, 0.5).unwrap() - 1.0).abs() < 1e-9);
    let flat = Hamiltonian::constant(1.0, 1.0, 1.0, 1.0).unwrap();
    assert_eq!(a_of_l(&flat, 1.0).unwrap(), 0.0);

    let n = trace_normalize(&Hamiltonian::constant(2.0, 0.0, 2.0, 1.0).unwrap(), 1.0, 64).unwrap();
    assert!((n.xi_of_x(0.25) - 1.0).abs() < 1e-12);
    assert!((n.hamiltonian.ell() - 4.0).abs() < 1e-12);
    assert!((n.hamiltonian.entries(2.0)[0] - 0.5).abs() < 1e-12);

    let n = trace_normalize(&singular_h(), 0.9, 400).unwrap();
    let xi = n.xi_of_x(0.5);
    assert!((a_of_l(&n.hamiltonian, xi).unwrap() - 0.5).abs() < 1e-6);
}

#[test]
fn zero_potential_system() {
    let zero = SymmetricPotential {
        v11: Coefficient::zero(),
        v12: Coefficient::zero(),
        v22: Coefficient::zero(),
    };
    let s = potential_to_hamiltonian(&zero, 1.0, 11).unwrap();
    for x in linspace(0.0, 1.0, 7) {
        let [a, b, d] = s.hamiltonian.entries(x);
        assert!((a - 1.0).abs() < 1e-14 && b.abs() < 1e-14 && (d - 1.0).abs() < 1e-14);
    }
}

fn piecewise(lo: f64, hi: f64) -> impl Strategy<Value = Coefficient> {
    (prop::collection::vec(0.05f64..0.95, 0..4), prop::collection::vec(lo..hi, 5)).prop_map(|(mut b, v)| {
        b.sort_by(f64::total_cmp);
        b.dedup_by(|x, y| (*x - *y).abs() < 1e-3);
        let n = b.len() + 1;
        Coefficient::piecewise_constant(b, v[..n].to_vec()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rotation_solution(re in -6.0f64..6.0, im in -2.0f64..2.0, x in 0.0f64..2.0) {
        let z = C::new(re, im);
        let w = transfer_matrix_w(&rotation_h(), x, z).unwrap();
        let want = rotation::transfer_matrix(x, z);
        for r in 0..2 {
            for c in 0..2 {
                prop_assert!((w[r][c] - want[r][c]).norm() < 1e-9);
            }
        }
        let wc = transfer_matrix_w(&rotation_h(), x, z.conj()).unwrap();
        prop_assert!((wc[0][1] - w[0][1].conj()).norm() < 1e-9);
    }

    #[test]
    fn unimodular_and_trivial_at_zero(
        h11 in piecewise(0.1, 3.0),
        h22 in piecewise(0.1, 3.0),
        x in 0.0f64..1.0,
        re in -10.0f64..10.0,
        im in -3.0f64..3.0,
    ) {
        let h = Hamiltonian::diagonal(h11, h22, 1.0).unwrap();
        let w = transfer_matrix_w(&h, x, C::new(re, im)).unwrap();
        let scale = (w[0][0] * w[1][1]).norm() + (w[0][1] * w[1][0]).norm();
        prop_assert!((det2(&w) - 1.0).norm() <= 1e-9 * scale.max(1.0));
        let w0 = transfer_matrix_w(&h, x, C::new(0.0, 0.0)).unwrap();
        prop_assert!((w0[0][0] - 1.0).norm() < 1e-14 && w0[0][1].norm() < 1e-14);
        prop_assert!(w0[1][0].norm() < 1e-14 && (w0[1][1] - 1.0).norm() < 1e-14);
    }

    #[test]
    fn potential_systems_are_symplectic(
        v11 in piecewise(-3.0, 3.0),
        v12 in piecewise(-3.0, 3.0),
        v22 in piecewise(-3.0, 3.0),
    ) {
        let v = SymmetricPotential { v11, v12, v22 };
        let s = potential_to_hamiltonian(&v, 1.0, 20).unwrap();
        for (x, u) in s.x.iter().zip(&s.u) {
            prop_assert!(symplectic_defect(u) < 1e-9);
            prop_assert!((s.hamiltonian.det(*x) - 1.0).abs() < 1e-9);
        }
    }
}
