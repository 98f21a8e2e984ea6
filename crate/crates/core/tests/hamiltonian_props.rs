use nalgebra::DMatrix;
use proptest::prelude::*;
use qwmem::hamiltonian::build_hamiltonian;
use qwmem::lattice::{CellKind, DeviceGrid, MaterialParams};
use qwmem::potential::{solve_potential, PotentialField, SolverParams};

fn material() -> impl Strategy<Value = MaterialParams> {
    (8.5f64..12.0, 5.0f64..8.4, 0.1f64..3.0).prop_map(|(eodi, em, t)| MaterialParams {
        eodi_ev: eodi,
        em_ev: em,
        hopping_ev: t,
        ..MaterialParams::default()
    })
}

fn case() -> impl Strategy<Value = (DeviceGrid, PotentialField)> {
    (3usize..9, 3usize..9, material()).prop_flat_map(|(nx, ny, params)| {
        (
            proptest::collection::vec(proptest::bool::weighted(0.4), nx * (ny - 2)),
            proptest::collection::vec(-4.5f64..4.5, nx * ny),
        )
            .prop_map(move |(mask, phi)| {
                let mut g = DeviceGrid::new(nx, ny, params).unwrap();
                for (k, &m) in mask.iter().enumerate() {
                    if m {
                        g.set_kind(k % nx, k / nx + 1, CellKind::MetalIon).unwrap();
                    }
                }
                (g, PotentialField::from_values(nx, ny, 1.0, phi))
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hamiltonian_is_hermitian((grid, phi) in case()) {
        let h = build_hamiltonian(&grid, &phi).unwrap();
        let n = h.n();
        let dense = h.to_dense();
        for r in 0..n {
            for c in 0..n {
                prop_assert_eq!(dense[r * n + c], dense[c * n + r].conj());
            }
        }
    }

    #[test]
    fn spectrum_lies_inside_gershgorin_bound((grid, phi) in case()) {
        let h = build_hamiltonian(&grid, &phi).unwrap();
        let n = h.n();
        let dense = h.to_dense();
        prop_assert!(dense.iter().all(|z| z.im == 0.0));
        let m = DMatrix::from_fn(n, n, |r, c| dense[r * n + c].re);
        let eig = m.symmetric_eigen().eigenvalues;

        let p = grid.params();
        let interior: Vec<f64> = (1..grid.ny() - 1)
            .flat_map(|j| (0..grid.nx()).map(move |i| (i, j)))
            .map(|(i, j)| phi.get(i, j))
            .collect();
        let (phi_lo, phi_hi) = interior
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let lo = p.eodi_ev.min(p.em_ev) + phi_lo - 4.0 * p.hopping_ev;
        let hi = p.eodi_ev.max(p.em_ev) + phi_hi + 4.0 * p.hopping_ev;
        for &e in eig.iter() {
            prop_assert!(e >= lo - 1e-9 && e <= hi + 1e-9, "{} outside [{}, {}]", e, lo, hi);
        }
    }

    #[test]
    fn metallizing_everything_keeps_the_sparsity_pattern((grid, phi) in case()) {
        let h = build_hamiltonian(&grid, &phi).unwrap();
        let mut all_metal = grid.clone();
        for j in 1..grid.ny() - 1 {
            for i in 0..grid.nx() {
                all_metal.set_kind(i, j, CellKind::MetalIon).unwrap();
            }
        }
        let hm = build_hamiltonian(&all_metal, &phi).unwrap();
        let pattern = |e: Vec<(usize, usize, num_complex::Complex64)>| {
            e.into_iter().map(|(r, c, _)| (r, c)).collect::<Vec<_>>()
        };
        prop_assert_eq!(pattern(h.entries()), pattern(hm.entries()));
    }

    #[test]
    fn contact_potentials_come_from_the_electrode_rows((grid, _phi) in case(), v in -4.5f64..4.5) {
        let phi = solve_potential(&grid, v, &SolverParams::default()).unwrap();
        let h = build_hamiltonian(&grid, &phi).unwrap();
        prop_assert_eq!(h.contact_potential(), [v, 0.0]);
    }
}

#[test]
fn onsite_energy_is_retention_plus_potential() {
    let mut grid = DeviceGrid::new(4, 6, MaterialParams::default()).unwrap();
    grid.set_kind(1, 3, CellKind::MetalIon).unwrap();
    let values: Vec<f64> = (0..24).map(|k| k as f64 * 0.1).collect();
    let phi = PotentialField::from_values(4, 6, 1.0, values.clone());
    let h = build_hamiltonian(&grid, &phi).unwrap();
    let p = grid.params();
    for j in 1..5 {
        for i in 0..4 {
            let base = if (i, j) == (1, 3) { p.em_ev } else { p.eodi_ev };
            let got = h.onsite()[h.site_index(i, j - 1)];
            assert!((got - (base + values[j * 4 + i])).abs() <= 1e-12);
        }
    }
}

#[test]
fn three_by_three_dielectric_block() {
    let params = MaterialParams {
        eodi_ev: 10.0,
        hopping_ev: 1.0,
        ..MaterialParams::default()
    };
    let grid = DeviceGrid::new(3, 5, params).unwrap();
    let h = build_hamiltonian(&grid, &PotentialField::zeros(3, 5)).unwrap();
    let dense = h.to_dense();
    assert_eq!(h.n(), 9);
    let diag = (0..9).filter(|&a| dense[a * 9 + a].re == 10.0).count();
    let off = (0..81).filter(|&k| k % 10 != 0 && dense[k].re == -1.0).count();
    let zeros = (0..81).filter(|&k| dense[k].norm() == 0.0).count();
    assert_eq!((diag, off, zeros), (9, 24, 81 - 9 - 24));
}
