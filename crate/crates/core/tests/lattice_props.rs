use std::collections::VecDeque;

use proptest::prelude::*;
use qwmem::lattice::{CellKind, DeviceGrid, MaterialParams};

fn grid_from_mask(nx: usize, ny: usize, mask: &[bool]) -> DeviceGrid {
    let mut g = DeviceGrid::new(nx, ny, MaterialParams::default()).unwrap();
    for j in 1..ny - 1 {
        for i in 0..nx {
            if mask[(j - 1) * nx + i] {
                g.set_kind(i, j, CellKind::MetalIon).unwrap();
            }
        }
    }
    g
}

// breadth-first search from every metal cell on the counter-side interior row
fn bfs_connected(nx: usize, ny: usize, mask: &[bool]) -> bool {
    let rows = ny - 2;
    let metal = |i: usize, r: usize| mask[r * nx + i];
    let mut seen = vec![false; nx * rows];
    let mut queue = VecDeque::new();
    for i in 0..nx {
        if metal(i, rows - 1) {
            seen[(rows - 1) * nx + i] = true;
            queue.push_back((i, rows - 1));
        }
    }
    while let Some((i, r)) = queue.pop_front() {
        if r == 0 {
            return true;
        }
        let mut next = vec![(i, r - 1)];
        if i > 0 {
            next.push((i - 1, r));
        }
        if i + 1 < nx {
            next.push((i + 1, r));
        }
        if r + 1 < rows {
            next.push((i, r + 1));
        }
        for (a, b) in next {
            if metal(a, b) && !seen[b * nx + a] {
                seen[b * nx + a] = true;
                queue.push_back((a, b));
            }
        }
    }
    false
}

fn masks() -> impl Strategy<Value = (usize, usize, Vec<bool>)> {
    (3usize..10, 3usize..10).prop_flat_map(|(nx, ny)| {
        (
            Just(nx),
            Just(ny),
            proptest::collection::vec(proptest::bool::weighted(0.55), nx * (ny - 2)),
        )
    })
}

proptest! {
    #[test]
    fn connectivity_matches_bfs((nx, ny, mask) in masks()) {
        let g = grid_from_mask(nx, ny, &mask);
        prop_assert_eq!(g.filament_connected(), bfs_connected(nx, ny, &mask));
    }

    #[test]
    fn adding_metal_never_disconnects((nx, ny, mask) in masks(), pick in any::<prop::sample::Index>()) {
        let mut g = grid_from_mask(nx, ny, &mask);
        let before = g.filament_connected();
        let k = pick.index(mask.len());
        g.set_kind(k % nx, k / nx + 1, CellKind::MetalIon).unwrap();
        prop_assert!(!before || g.filament_connected());
    }

    #[test]
    fn metal_fraction_is_mirror_invariant((nx, ny, mask) in masks()) {
        let mirrored: Vec<bool> = (0..mask.len())
            .map(|k| mask[(k / nx) * nx + (nx - 1 - k % nx)])
            .collect();
        let a = grid_from_mask(nx, ny, &mask);
        let b = grid_from_mask(nx, ny, &mirrored);
        prop_assert_eq!(a.metal_fraction(), b.metal_fraction());
        let count = mask.iter().filter(|&&m| m).count();
        prop_assert_eq!(a.metal_fraction(), count as f64 / mask.len() as f64);
    }

    #[test]
    fn snapshot_round_trip((nx, ny, mask) in masks()) {
        let g = grid_from_mask(nx, ny, &mask);
        let text = g.to_snapshot();
        let back = DeviceGrid::from_snapshot(&text, *g.params()).unwrap();
        prop_assert_eq!(&back, &g);
        prop_assert_eq!(back.to_snapshot(), text);
    }

    #[test]
    fn electrode_rows_are_immutable((nx, ny, mask) in masks(), i in 0usize..10) {
        let mut g = grid_from_mask(nx, ny, &mask);
        let i = i % nx;
        prop_assert!(g.set_kind(i, 0, CellKind::MetalIon).is_err());
        prop_assert!(g.set_kind(i, ny - 1, CellKind::Dielectric).is_err());
        prop_assert_eq!(g.kind(i, 0), CellKind::ActiveElectrode);
        prop_assert_eq!(g.kind(i, ny - 1), CellKind::CounterElectrode);
    }
}

#[test]
fn gap_in_column_breaks_filament() {
    let (nx, ny) = (7, 9);
    let mut mask = vec![false; nx * (ny - 2)];
    for r in 0..ny - 2 {
        mask[r * nx + 3] = true;
    }
    assert!(grid_from_mask(nx, ny, &mask).filament_connected());
    mask[4 * nx + 3] = false;
    assert!(!bfs_connected(nx, ny, &mask));
    assert!(!grid_from_mask(nx, ny, &mask).filament_connected());
}
