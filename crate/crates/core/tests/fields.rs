use std::f64::consts::PI;

use gammaflow::chains::CubicalGrid;
use gammaflow::fields::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit(t: f64) -> [f64; 2] {
    [t.cos(), t.sin()]
}

fn disk_field(n: usize, p: f64, degree: i64) -> Field {
    let lat = Lattice::cell_centered(-1.0, 1.0, n, 2).unwrap();
    Field::from_fn(lat, Domain::unit_disk(), p, |x| unit(degree as f64 * x[1].atan2(x[0]))).unwrap()
}

#[test]
fn annulus_energy_matches_closed_form() {
    let lat = Lattice::cell_centered(-1.0, 1.0, 512, 2).unwrap();
    let dom = Domain::Annulus { center: [0.0, 0.0], inner: 0.25, outer: 1.0 };
    let f = Field::from_fn(lat, dom, 1.5, |x| [x[0], x[1]]).unwrap();
    let exact = 2.0 * PI * (1.0 - 0.25f64.sqrt()) / 0.5;
    assert!((exact - 2.0 * PI).abs() < 1e-12);
    let e = p_energy(&f, None);
    assert!((e / exact - 1.0).abs() < 0.02, "{e} vs {exact}");
}

#[test]
fn constant_boundary_minimises_to_zero() {
    let lat = Lattice::cell_centered(-1.0, 1.0, 32, 2).unwrap();
    let f = Field::from_fn(lat, Domain::unit_disk(), 1.8, |x| unit(0.4 + 0.3 * (5.0 * x[0]).sin() * (1.0 - x[0] * x[0] - x[1] * x[1]).max(0.0)))
        .unwrap();
    // Interior is perturbed, the boundary trace is the constant 0.4.
    let m = minimize(&f, 1.8, &field_descent_config()).unwrap();
    assert!(m.energy < 1e-8, "{}", m.energy);
    assert!(vortex_cells(&m.field).is_empty());
}

#[test]
fn degree_one_minimiser_energy() {
    let p = 1.9;
    let m = minimize(&disk_field(128, p, 1), p, &field_descent_config()).unwrap();
    let ratio = (2.0 - p) * m.energy / (2.0 * PI);
    assert!((ratio - 1.0).abs() < 0.10, "{ratio}");
    assert!(m.field.unit_defect() <= UNIT_TOL);
    assert!(m.report.energies.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
}

#[test]
fn degree_two_minimiser_splits() {
    let p = 1.9;
    let lat = Lattice::cell_centered(-1.0, 1.0, 64, 2).unwrap();
    let spec = DipoleSpec { singularities: vec![([-0.3, 0.05], 1), ([0.3, -0.05], 1)], boundary_degree: 2 };
    let f = dipole_map(&spec, lat, Domain::unit_disk(), &BoundaryData::Degree { degree: 2 }, p).unwrap();
    let m = minimize(&f, p, &field_descent_config()).unwrap();
    let v = vortex_cells(&m.field);
    assert_eq!(v.len(), 2, "{v:?}");
    assert!(v.iter().all(|c| c.1 == 1));
    let ratio = (2.0 - p) * m.energy / (4.0 * PI);
    assert!((ratio - 1.0).abs() < 0.15, "{ratio}");
}

#[test]
fn dipole_energy_limsup() {
    let spec = DipoleSpec { singularities: vec![([-0.4, 0.1], 1), ([0.35, -0.15], -1)], boundary_degree: 0 };
    for n in [64, 128] {
        let lat = Lattice::cell_centered(-1.0, 1.0, n, 2).unwrap();
        for p in [1.9, 1.95, 1.99] {
            let f = dipole_map(&spec, lat.clone(), Domain::unit_disk(), &BoundaryData::Degree { degree: 0 }, p).unwrap();
            let scaled = (2.0 - p) * p_energy(&f, None);
            assert!(scaled <= 4.0 * PI * 1.05, "n={n} p={p}: {scaled}");
        }
    }
}

#[test]
fn minimiser_is_independent_of_initialisation() {
    let p = 1.9;
    let base = disk_field(64, p, 1);
    let mut energies = Vec::new();
    for seed in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<[f64; 2]> = (0..base.values().len())
            .map(|i| if base.fixed()[i] { base.values()[i] } else { unit(base.angle(i) + rng.gen_range(-0.1..0.1)) })
            .collect();
        let mut f = base.clone();
        f.set_values(values).unwrap();
        energies.push(minimize(&f, p, &field_descent_config()).unwrap().energy);
    }
    let lo = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = energies.iter().cloned().fold(0.0, f64::max);
    assert!(hi / lo - 1.0 < 0.01, "{energies:?}");
}

#[test]
fn annealing_returns_every_exponent() {
    let ps = [1.8, 1.9, 1.95];
    let out = anneal(&disk_field(32, 1.9, 1), &ps, &field_descent_config()).unwrap();
    assert_eq!(out.len(), 3);
    for (m, p) in out.iter().zip(ps) {
        assert_eq!(m.field.p(), p);
        assert_eq!(vortex_cells(&m.field).len(), 1);
    }
}

#[test]
fn field_file_round_trip() {
    let f = disk_field(24, 1.7, 2);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.bin");
    write_field(&f, std::fs::File::create(&path).unwrap()).unwrap();
    let g = read_field(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(f, g);
}

#[test]
fn collapse_constants_stay_bounded_in_p() {
    let lat = Lattice::new(vec![0.0, 0.0], 1.0 / 64.0, vec![65, 65]).unwrap();
    let dom = Domain::Box { lo: vec![-0.01, -0.01], hi: vec![1.01, 1.01] };
    let grid = CubicalGrid::new(vec![0.0, 0.0], 1.0 / 16.0, vec![16, 16]).unwrap();
    let mut worst_e: f64 = 0.0;
    let mut worst_d: f64 = 0.0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes: Vec<(f64, f64, f64, f64)> = (0..4)
            .map(|_| (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(0.0..6.3), rng.gen_range(-1.0..1.0)))
            .collect();
        for p in [1.5, 1.75, 1.9, 1.99] {
            let f = Field::from_fn(lat.clone(), dom.clone(), p, |x| {
                unit(modes.iter().map(|m| m.3 * (m.0 * x[0] + m.1 * x[1] + m.2).sin()).sum())
            })
            .unwrap();
            let c = radial_collapse(&f, 2, &grid).unwrap();
            worst_e = worst_e.max(c.c_energy);
            worst_d = worst_d.max(c.c_distance);
        }
    }
    assert!(worst_d <= 10.0, "{worst_d}");
    assert!(worst_e <= 4.0, "{worst_e}");
}
