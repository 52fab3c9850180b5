use std::f64::consts::{LN_2, PI};

use gammaflow::chains::{Cell, CubicalGrid};
use gammaflow::coeffgroup::CostedNorm;
use gammaflow::fields::*;
use gammaflow::singset::*;
use gammaflow::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit(t: f64) -> [f64; 2] {
    [t.cos(), t.sin()]
}

fn wrap(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

fn edge_angle(u: [f64; 2], v: [f64; 2]) -> f64 {
    (u[0] * v[1] - u[1] * v[0]).atan2(u[0] * v[0] + u[1] * v[1])
}

/// Grid cell whose closed square contains `x`.
fn cell_of(grid: &CubicalGrid, x: [f64; 2]) -> Cell {
    let base = (0..2).map(|i| ((x[i] - grid.origin[i]) / grid.h).floor() as i64).collect();
    Cell { base, axes: vec![0, 1] }
}

#[test]
fn dipole_round_trip_on_random_specs() {
    let lat = Lattice::cell_centered(-1.0, 1.0, 128, 2).unwrap();
    let grid = offset_grid(&lat, lat.h, &[0, 0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut done = 0;
    while done < 50 {
        let mut pt = || [rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8)];
        let (a, b) = (pt(), pt());
        // Snapping is only defined away from grid lines: a vortex within a
        // small fraction of h of a line may sit in either neighbouring cell.
        let margin = |x: [f64; 2]| {
            (0..2)
                .map(|i| {
                    let t = (x[i] - grid.origin[i]) / grid.h;
                    (t - t.round()).abs()
                })
                .fold(f64::INFINITY, f64::min)
        };
        if margin(a) < 0.1 || margin(b) < 0.1 {
            continue;
        }
        let spec = DipoleSpec { singularities: vec![(a, 1), (b, -1)], boundary_degree: 0 };
        let f = match dipole_map(&spec, lat.clone(), Domain::unit_disk(), &BoundaryData::Degree { degree: 0 }, 1.9) {
            Ok(f) => f,
            Err(Error::Separation(_)) => continue,
            Err(e) => panic!("{e}"),
        };
        let t = extract_tp(&f, &grid).unwrap();
        assert_eq!(t.total_class(), 0);
        assert_eq!(t.per_cell_classes.len(), 2, "{a:?} {b:?}");
        let ca = cell_of(&grid, a);
        let cb = cell_of(&grid, b);
        assert_eq!(t.per_cell_classes[&ca].coords(), &[1]);
        assert_eq!(t.per_cell_classes[&cb].coords(), &[-1]);
        done += 1;
    }
}

fn three_vortex_field(n: usize) -> Field {
    let lat = Lattice::cell_centered(-1.0, 1.0, n, 2).unwrap();
    let spec = DipoleSpec {
        singularities: vec![([-0.41, 0.23], 1), ([0.33, 0.37], 1), ([0.12, -0.44], -1)],
        boundary_degree: 1,
    };
    dipole_map(&spec, lat, Domain::unit_disk(), &BoundaryData::Degree { degree: 1 }, 1.9).unwrap()
}

#[test]
fn total_class_equals_boundary_winding() {
    let f = three_vortex_field(64);
    let lat = f.lattice().clone();
    let m = 2;
    let grid = offset_grid(&lat, m as f64 * lat.h, &[1, 1]).unwrap();
    let t = extract_tp(&f, &grid).unwrap();
    let u = f.values();
    for (i0, i1, j0, j1) in [(0, 31, 0, 31), (2, 14, 5, 20), (16, 30, 10, 28), (5, 25, 2, 14), (10, 11, 10, 11)] {
        let inside: i64 = t
            .per_cell_classes
            .iter()
            .filter(|(c, _)| (i0..i1).contains(&c.base[0]) && (j0..j1).contains(&c.base[1]))
            .map(|(_, g)| g.coords()[0])
            .sum();
        // Counterclockwise loop of lattice nodes around the rectangle.
        let node = |i: usize, j: usize| lat.index(&[1 + i, 1 + j]);
        let (a0, a1, b0, b1) = (m * i0 as usize, m * i1 as usize, m * j0 as usize, m * j1 as usize);
        let mut ring = Vec::new();
        ring.extend((a0..a1).map(|i| node(i, b0)));
        ring.extend((b0..b1).map(|j| node(a1, j)));
        ring.extend((a0 + 1..=a1).rev().map(|i| node(i, b1)));
        ring.extend((b0 + 1..=b1).rev().map(|j| node(a0, j)));
        let w: f64 = (0..ring.len()).map(|q| edge_angle(u[ring[q]], u[ring[(q + 1) % ring.len()]])).sum();
        let winding = (w / (2.0 * PI)).round() as i64;
        assert!((w / (2.0 * PI) - winding as f64).abs() < 1e-9);
        assert_eq!(inside, winding, "rectangle {i0}..{i1} x {j0}..{j1}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn extraction_is_stable_under_small_perturbations(seed in any::<u64>(), frac in 0.0f64..0.099) {
        let f = three_vortex_field(32);
        let lat = f.lattice().clone();
        let grid = offset_grid(&lat, lat.h, &[0, 0]).unwrap();
        let u = f.values();
        let s = lat.strides();
        let mut gap = f64::INFINITY;
        for i in 0..lat.len() {
            let ix = lat.multi_index(i);
            for a in 0..2 {
                if ix[a] + 1 < lat.dims[a] {
                    gap = gap.min(PI - edge_angle(u[i], u[i + s[a]]).abs());
                }
            }
        }
        let eps = frac * gap;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<[f64; 2]> = (0..lat.len())
            .map(|i| if f.fixed()[i] { u[i] } else { unit(f.angle(i) + rng.gen_range(-eps..=eps)) })
            .collect();
        let mut g = f.clone();
        g.set_values(values).unwrap();
        prop_assert_eq!(extract_tp(&f, &grid).unwrap(), extract_tp(&g, &grid).unwrap());
    }
}

#[test]
fn constant_field_every_offset_admissible() {
    let lat = Lattice::cell_centered(-1.0, 1.0, 64, 2).unwrap();
    let f = Field::from_fn(lat, Domain::unit_disk(), 1.9, |_| unit(1.0)).unwrap();
    let sel = select_grid_offset(&f, 8.0 * f.lattice().h, 0.5, None, 64, 3).unwrap();
    assert!(sel.samples.len() >= MIN_OFFSET_SAMPLES);
    assert!(sel.samples.iter().all(|s| s.admissible));
    assert_eq!(sel.energy, 0.0);
    assert_eq!(sel.mean_plane, 0.0);
    assert!(sel.means_agree);
}

#[test]
fn radial_field_offset_and_mean_identity() {
    let lat = Lattice::cell_centered(-1.0, 1.0, 256, 2).unwrap();
    let f = Field::from_fn(lat, Domain::unit_disk(), 1.9, |x| [x[0], x[1]]).unwrap();
    let sel = select_grid_offset(&f, 1.0 / 16.0, 0.5, None, 256, 11).unwrap();
    assert_eq!(sel.samples.len(), 256);
    assert!(sel.inequalities.iter().all(|q| q.holds));
    assert!(sel.mean_error <= MEAN_TOL, "{}", sel.mean_error);
    assert!(sel.means_agree);
    let t = extract_tp(&f, &sel.grid).unwrap();
    assert_eq!(t.total_class(), 1);
    // Deterministic in the seed.
    let again = select_grid_offset(&f, 1.0 / 16.0, 0.5, None, 256, 11).unwrap();
    assert_eq!(again.offset, sel.offset);
}

#[test]
fn offsets_aligned_with_a_jump_line_are_rejected() {
    let lat = Lattice::new(vec![0.0, 0.0], 1.0 / 256.0, vec![257, 257]).unwrap();
    let dom = Domain::Box { lo: vec![-0.01, -0.01], hi: vec![1.01, 1.01] };
    let col = 100usize;
    let f = Field::from_fn(lat.clone(), dom, 1.9, |x| unit(if x[0] < (col as f64 + 0.5) / 256.0 { 0.0 } else { 2.0 })).unwrap();
    let h = 1.0 / 8.0;
    let m = 32;
    for ox in [col % m, (col + 1) % m] {
        let s = evaluate_offset(&f, h, 0.5, None, &[ox, 5]).unwrap();
        assert!(s.continuous);
        assert!(!s.admissible, "offset {ox} should be rejected");
        assert!(s.violated.iter().any(|v| v.contains("skeleton")), "{:?}", s.violated);
    }
    let sel = select_grid_offset(&f, h, 0.5, None, 64, 1).unwrap();
    assert!(![col % m, (col + 1) % m].contains(&sel.offset[0]));
}

#[test]
fn no_admissible_offset_reports_best_candidate() {
    // Antipodal values on neighbouring columns break continuity on every
    // grid line.
    let lat = Lattice::new(vec![0.0, 0.0], 1.0 / 16.0, vec![17, 17]).unwrap();
    let dom = Domain::Box { lo: vec![-0.01, -0.01], hi: vec![1.01, 1.01] };
    let f = Field::from_fn(lat, dom, 1.9, |x| unit(PI * (x[0] * 16.0).round())).unwrap();
    match select_grid_offset(&f, 1.0 / 8.0, 0.5, None, 64, 0) {
        Err(Error::NoAdmissibleOffset { best_offset, violated }) => {
            assert_eq!(best_offset.len(), 2);
            assert!(!violated.is_empty());
        }
        other => panic!("{other:?}"),
    }
}

fn centred_cube(p: f64, degree: f64) -> (Field, CubicalGrid) {
    let lat = Lattice::new(vec![-0.5, -0.5], 1.0 / 63.0, vec![64, 64]).unwrap();
    let dom = Domain::Box { lo: vec![-0.5, -0.5], hi: vec![0.5, 0.5] };
    let f = Field::from_fn(lat.clone(), dom, p, |x| unit(degree * x[1].atan2(x[0]))).unwrap();
    let g = offset_grid(&lat, 1.0, &[0, 0]).unwrap();
    (f, g)
}

#[test]
fn cube_bound_for_trivial_class() {
    let (f, g) = centred_cube(1.9, 0.0);
    let cell = Cell { base: vec![0, 0], axes: vec![0, 1] };
    let b = cube_lower_bound(&f, &g, &cell, 0.5, 5.0 / LN_2, &CostedNorm::circle(2.0).unwrap()).unwrap();
    assert_eq!(b.class, 0);
    assert_eq!(b.inequality.lhs, 0.0);
    assert!(b.inequality.holds);
}

#[test]
fn cube_bound_for_radial_field() {
    let (f, g) = centred_cube(1.9, 1.0);
    let cell = Cell { base: vec![0, 0], axes: vec![0, 1] };
    let norm = CostedNorm::circle(2.0).unwrap();
    let b = cube_lower_bound(&f, &g, &cell, 0.5, 5.0 / LN_2, &norm).unwrap();
    assert_eq!(b.class, 1);
    assert!((b.norm - 2.0 * PI).abs() < 1e-9);
    assert!(b.inequality.holds, "{:?}", b.inequality);
    assert!(b.inequality.slack > 0.0);
}

#[test]
fn cube_bound_for_degree_two_across_p() {
    let norm = CostedNorm::circle(2.0).unwrap();
    let cell = Cell { base: vec![0, 0], axes: vec![0, 1] };
    for p in [1.8, 1.9, 1.95] {
        let (f, g) = centred_cube(p, 2.0);
        let b = cube_lower_bound(&f, &g, &cell, 0.5, 5.0 / LN_2, &norm).unwrap();
        assert_eq!(b.class, 2);
        assert!(b.inequality.holds, "p={p}: {:?}", b.inequality);
    }
}

#[test]
fn mass_report_for_degree_one_minimiser() {
    let norm = CostedNorm::circle(2.0).unwrap();
    let lat = Lattice::cell_centered(-1.0, 1.0, 64, 2).unwrap();
    let mut masses = Vec::new();
    for p in [1.9, 1.95] {
        let f = Field::from_fn(lat.clone(), Domain::unit_disk(), p, |x| [x[0], x[1]]).unwrap();
        let m = minimize(&f, p, &field_descent_config()).unwrap();
        let sel = select_grid_offset(&m.field, 4.0 * lat.h, 0.5, None, 64, 5).unwrap();
        let t = extract_tp(&m.field, &sel.grid).unwrap();
        let r = mass_bound_report(&t, &m.field, 0.5, 0.1, 5.0 / LN_2, &norm).unwrap();
        assert!(r.inequality.holds, "{r:?}");
        assert!(r.skeleton_form.holds, "{r:?}");
        assert_eq!(r.regime_reached, r.c_r_delta < 1.0);
        masses.push(r.mass);
    }
    for m in masses {
        assert!((m - 2.0 * PI).abs() < 1e-9);
    }
}

#[test]
fn mass_factor_oracle() {
    for x in [0.01f64, 0.05, 0.1, 0.3] {
        assert!((mass_factor(2.0, 2.0 - x) - x.powf(-3.0 * x)).abs() < 1e-12);
    }
    assert!((mass_factor(2.0, 1.99) - 1.1482).abs() < 5e-5);
}

#[test]
fn constant_field_mass_report() {
    let lat = Lattice::cell_centered(-1.0, 1.0, 32, 2).unwrap();
    let f = Field::from_fn(lat.clone(), Domain::unit_disk(), 1.9, |_| unit(0.2)).unwrap();
    let g = offset_grid(&lat, 2.0 * lat.h, &[0, 0]).unwrap();
    let t = extract_tp(&f, &g).unwrap();
    let r = mass_bound_report(&t, &f, 0.5, 0.1, 5.0 / LN_2, &CostedNorm::circle(2.0).unwrap()).unwrap();
    assert_eq!(r.mass, 0.0);
    assert!(r.inequality.holds);
}

#[test]
fn three_dimensional_extraction_is_closed() {
    let lat = Lattice::cell_centered(-1.0, 1.0, 16, 3).unwrap();
    let dom = Domain::Box { lo: vec![-1.0; 3], hi: vec![1.0; 3] };
    // A tilted line through the origin.
    let f = Field::from_fn(lat.clone(), dom, 1.9, |x| {
        let t = (x[0] - 0.3 * x[1] - 0.037).atan2(x[2] + 0.2 * x[1] + 0.021);
        unit(t)
    })
    .unwrap();
    let g = offset_grid(&lat, lat.h, &[0, 0, 0]).unwrap();
    let t = extract_tp(&f, &g).unwrap();
    assert_eq!(t.chain.dim(), 1);
    assert!(!t.chain.is_zero());
    let json: serde_json::Value = serde_json::from_str(&t.to_json().unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
}
