use std::f64::consts::TAU;

use gammaflow::chains::{
    cobordant, deform_to_grid, fill_small_cycle, flat_norm, plateau_minimize, Aabb, Cell, Chain,
    CubicalGrid, FlatMethod, Integrality, PolyChain,
};
use gammaflow::coeffgroup::{CoefficientGroup, CostTable, CostedNorm, Extension, GroupElement};
use gammaflow::Error;
use proptest::prelude::*;

fn z(d: i64) -> GroupElement {
    CoefficientGroup::integers().element(&[d]).unwrap()
}

/// `|g| = |g|_1` on the integers.
fn unit_norm() -> CostedNorm {
    let t = CostTable::new(
        CoefficientGroup::integers(),
        vec![(z(1), 1.0)],
        Extension::PowerLaw { exponent: 1.0, scale: 1.0 },
    )
    .unwrap();
    CostedNorm::new(t, 2.0).unwrap()
}

fn grid(d: usize, n: usize, h: f64) -> CubicalGrid {
    CubicalGrid::new(vec![0.0; d], h, vec![n; d]).unwrap()
}

fn edge(base: [i64; 2], axis: usize) -> Cell {
    Cell { base: base.to_vec(), axes: vec![axis] }
}

fn square(base: [i64; 2]) -> Cell {
    Cell { base: base.to_vec(), axes: vec![0, 1] }
}

fn chain(g: &CubicalGrid, dim: usize, cells: Vec<(Cell, i64)>) -> Chain {
    Chain::from_cells(
        g.clone(),
        dim,
        CoefficientGroup::integers(),
        cells.into_iter().map(|(c, v)| (c, z(v))),
    )
    .unwrap()
}

#[test]
fn mass_of_edges_scales_with_h() {
    let g = grid(2, 8, 0.5);
    let c = chain(&g, 1, (0..5).map(|i| (edge([i, 0], 0), 1)).collect());
    assert!((c.mass(&unit_norm(), None).unwrap() - 2.5).abs() < 1e-12);
    let e = Chain::zero(g, 1, CoefficientGroup::integers()).unwrap();
    assert_eq!(e.mass(&unit_norm(), None).unwrap(), 0.0);
}

#[test]
fn flat_norm_of_distant_dipole_keeps_the_points() {
    let g = grid(2, 6, 1.0);
    let s = chain(&g, 0, vec![(Cell::vertex(vec![1, 1]), 1), (Cell::vertex(vec![4, 1]), -1)]);
    let f = flat_norm(&s, &unit_norm(), None).unwrap();
    assert!((f.value - 2.0).abs() < 1e-12);
    assert!(f.q.unwrap().is_zero());
    assert_eq!(f.method, FlatMethod::MinCostFlow);
}

#[test]
fn flat_norm_of_square_boundary_is_the_square() {
    let g = grid(2, 3, 1.0);
    let q = chain(&g, 2, vec![(square([1, 1]), 1)]);
    let s = q.boundary().unwrap();
    let f = flat_norm(&s, &unit_norm(), None).unwrap();
    assert!((f.value - 1.0).abs() < 1e-12);
    assert!(f.p.is_zero());
    assert_eq!(f.q.unwrap(), q);
    assert_eq!(f.integrality, Integrality::Exact);
}

#[test]
fn flat_norm_of_zero_is_zero() {
    let g = grid(2, 3, 1.0);
    let s = Chain::zero(g, 1, CoefficientGroup::integers()).unwrap();
    assert_eq!(flat_norm(&s, &unit_norm(), None).unwrap().value, 0.0);
}

#[test]
fn relative_flat_norm_ignores_the_outside() {
    let g = grid(2, 6, 1.0);
    let s = chain(&g, 0, vec![(Cell::vertex(vec![1, 1]), 1), (Cell::vertex(vec![5, 5]), -1)]);
    let u = Aabb::new(vec![3.5, 3.5], vec![6.0, 6.0]).unwrap();
    let f = flat_norm(&s, &unit_norm(), Some(&u)).unwrap();
    // Only the point inside U is charged; moving it out costs an edge.
    assert!((f.value - 1.0).abs() < 1e-12);
    let full = flat_norm(&s, &unit_norm(), None).unwrap();
    assert!(f.value <= full.value);
}

#[test]
fn torsion_flat_norm_uses_exhaustive_search() {
    let z2 = CoefficientGroup::cyclic(2).unwrap();
    let one = z2.element(&[1]).unwrap();
    let t = CostTable::new(z2.clone(), vec![(one.clone(), 1.0)], Extension::None).unwrap();
    let n = CostedNorm::new(t, 2.0).unwrap();
    let g = grid(2, 3, 1.0);
    let q = Chain::from_cells(g.clone(), 2, z2.clone(), [(square([0, 0]), one.clone())]).unwrap();
    let s = q.boundary().unwrap();
    let f = flat_norm(&s, &n, None).unwrap();
    assert_eq!(f.method, FlatMethod::Exhaustive);
    assert!((f.value - 1.0).abs() < 1e-12);
    assert_eq!(f.p.add(&f.q.unwrap().boundary().unwrap()).unwrap(), s);
}

#[test]
fn points_with_equal_coefficients_are_cobordant() {
    let g = grid(2, 5, 1.0);
    let s1 = chain(&g, 0, vec![(Cell::vertex(vec![0, 0]), 1)]);
    let s2 = chain(&g, 0, vec![(Cell::vertex(vec![3, 4]), 1)]);
    let b = g.bounding_box();
    let c = cobordant(&s1, &s2, &b, &unit_norm()).unwrap();
    assert!(c.cobordant);
    let r = c.witness.unwrap();
    assert_eq!(r.boundary().unwrap(), s1.sub(&s2).unwrap());
    let s3 = chain(&g, 0, vec![(Cell::vertex(vec![3, 4]), 2)]);
    assert!(!cobordant(&s1, &s3, &b, &unit_norm()).unwrap().cobordant);
    let same = cobordant(&s1, &s1, &b, &unit_norm()).unwrap();
    assert!(same.cobordant && same.witness.unwrap().is_zero());
}

#[test]
fn one_cycles_are_cobordant_through_surfaces() {
    let g = grid(3, 3, 1.0);
    let sq = |z0: i64| Cell { base: vec![0, 0, z0], axes: vec![0, 1] };
    let a = Chain::from_cells(g.clone(), 2, CoefficientGroup::integers(), [(sq(0), z(1))]).unwrap();
    let b = Chain::from_cells(g.clone(), 2, CoefficientGroup::integers(), [(sq(2), z(1))]).unwrap();
    let c = cobordant(&a.boundary().unwrap(), &b.boundary().unwrap(), &g.bounding_box(), &unit_norm())
        .unwrap();
    assert!(c.cobordant);
    assert_eq!(
        c.witness.unwrap().boundary().unwrap(),
        a.boundary().unwrap().sub(&b.boundary().unwrap()).unwrap()
    );
}

#[test]
fn fill_two_by_two_patch() {
    let g = grid(2, 4, 0.5);
    let patch = chain(
        &g,
        2,
        vec![(square([1, 1]), 1), (square([2, 1]), 1), (square([1, 2]), 1), (square([2, 2]), 1)],
    );
    let p = patch.boundary().unwrap();
    let t = fill_small_cycle(&p, &unit_norm(), None).unwrap().unwrap();
    assert_eq!(t, patch);
    assert!((t.mass(&unit_norm(), None).unwrap() - 4.0 * 0.25).abs() < 1e-12);
    let zero = Chain::zero(g, 1, CoefficientGroup::integers()).unwrap();
    assert!(fill_small_cycle(&zero, &unit_norm(), None).unwrap().unwrap().is_zero());
}

#[test]
fn cycle_around_a_hole_does_not_fill() {
    let g = grid(2, 3, 1.0).with_holes(vec![square([1, 1])]).unwrap();
    let ring = Chain::from_cells(
        grid(2, 3, 1.0),
        2,
        CoefficientGroup::integers(),
        [(square([1, 1]), z(1))],
    )
    .unwrap()
    .boundary()
    .unwrap();
    let p = Chain::from_cells(g, 1, CoefficientGroup::integers(), ring.coeffs().clone()).unwrap();
    assert!(fill_small_cycle(&p, &unit_norm(), None).unwrap().is_none());
}

#[test]
fn filling_requires_a_cycle() {
    let g = grid(2, 3, 1.0);
    let p = chain(&g, 1, vec![(edge([0, 0], 0), 1)]);
    assert!(matches!(fill_small_cycle(&p, &unit_norm(), None), Err(Error::Precondition(_))));
}

#[test]
fn plateau_annihilates_a_dipole() {
    // A dipole bounds the path joining its points, so its class contains 0.
    let n = CostedNorm::circle(2.0).unwrap();
    let g = grid(2, 8, 1.0);
    let s0 = chain(&g, 0, vec![(Cell::vertex(vec![2, 3]), 1), (Cell::vertex(vec![6, 5]), -1)]);
    let r = plateau_minimize(&s0, &g.bounding_box(), &n).unwrap();
    assert!((r.initial_mass - 2.0 * TAU).abs() < 1e-9);
    assert!(r.chain.is_zero());
    assert!(r.mass <= r.initial_mass + 1e-12);
    let c = cobordant(&s0, &r.chain, &g.bounding_box(), &n).unwrap();
    assert!(c.cobordant);
}

#[test]
fn plateau_merges_parallel_points() {
    let n = CostedNorm::circle(2.0).unwrap();
    let g = grid(2, 6, 1.0);
    let s0 = chain(&g, 0, vec![(Cell::vertex(vec![1, 1]), 1), (Cell::vertex(vec![4, 4]), 1)]);
    let r = plateau_minimize(&s0, &g.bounding_box(), &n).unwrap();
    // |2| = 4 pi for p = 2 under the circle norm, no cheaper than two points.
    assert!((r.mass - r.initial_mass).abs() < 1e-9);
    assert_eq!(r.chain.total(), z(2));
}

#[test]
fn plateau_removes_boundaries() {
    let g = grid(2, 3, 1.0);
    let s0 = chain(&g, 2, vec![(square([0, 0]), 1)]).boundary().unwrap();
    let r = plateau_minimize(&s0, &g.bounding_box(), &unit_norm()).unwrap();
    assert!(r.chain.is_zero());
    assert_eq!(r.witness.boundary().unwrap(), s0.neg());
}

#[test]
fn deform_single_point() {
    let g = grid(2, 4, 1.0);
    let d = PolyChain { points: vec![(vec![1.2, 2.9], z(3))], ..Default::default() };
    let r = deform_to_grid(&d, &g, &unit_norm()).unwrap();
    assert_eq!(r.chain.get(&Cell::vertex(vec![1, 3])), z(3));
    assert!((r.chain.mass(&unit_norm(), None).unwrap() - 3.0).abs() < 1e-12);
}

#[test]
fn deform_rejects_four_dimensions() {
    let g = grid(4, 2, 1.0);
    let d = PolyChain::default();
    assert!(matches!(deform_to_grid(&d, &g, &unit_norm()), Err(Error::Unsupported(_))));
}

fn random_chain(g: &CubicalGrid, dim: usize, vals: &[i64]) -> Chain {
    let cells = g.cells(dim);
    Chain::from_cells(
        g.clone(),
        dim,
        CoefficientGroup::integers(),
        cells.into_iter().zip(vals).map(|(c, &v)| (c, z(v))),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn boundary_squares_to_zero(vals in prop::collection::vec(-3i64..=3, 200), n in 2usize..=4, dim in 2usize..=3) {
        let g = grid(3, n, 1.0);
        let c = random_chain(&g, dim, &vals);
        prop_assert!(c.boundary().unwrap().boundary().unwrap().is_zero());
    }

    #[test]
    fn flat_norm_axioms(a in prop::collection::vec(-2i64..=2, 24), b in prop::collection::vec(-2i64..=2, 24)) {
        let g = grid(2, 3, 1.0);
        let n = unit_norm();
        let s1 = random_chain(&g, 1, &a);
        let s2 = random_chain(&g, 1, &b);
        let f1 = flat_norm(&s1, &n, None).unwrap();
        let f2 = flat_norm(&s2, &n, None).unwrap();
        let f12 = flat_norm(&s1.add(&s2).unwrap(), &n, None).unwrap();
        let fneg = flat_norm(&s1.neg(), &n, None).unwrap();
        prop_assert_eq!(f1.integrality, Integrality::Exact);
        prop_assert!((f1.value == 0.0) == s1.is_zero());
        prop_assert!((fneg.value - f1.value).abs() <= 1e-9);
        prop_assert!(f12.value <= f1.value + f2.value + 1e-9);
        prop_assert!(f1.value <= s1.mass(&n, None).unwrap() + 1e-9);
        let rebuilt = f1.p.add(&f1.q.as_ref().unwrap().boundary().unwrap()).unwrap();
        prop_assert_eq!(rebuilt, s1);
    }

    #[test]
    fn flat_norm_of_boundary_at_most_mass(vals in prop::collection::vec(-2i64..=2, 9)) {
        let g = grid(2, 3, 1.0);
        let n = unit_norm();
        let q = random_chain(&g, 2, &vals);
        if let Ok(b) = q.boundary() {
            let f = flat_norm(&b, &n, None).unwrap();
            prop_assert!(f.value <= q.mass(&n, None).unwrap() + 1e-9);
        }
    }

    #[test]
    fn plateau_output_is_cobordant(vals in prop::collection::vec(-2i64..=2, 24)) {
        let g = grid(2, 3, 1.0);
        let n = unit_norm();
        let s = random_chain(&g, 1, &vals);
        let r = plateau_minimize(&s, &g.bounding_box(), &n).unwrap();
        prop_assert!(r.mass <= r.initial_mass + 1e-9);
        prop_assert_eq!(s.add(&r.witness.boundary().unwrap()).unwrap(), r.chain.clone());
        prop_assert!(cobordant(&s, &r.chain, &g.bounding_box(), &n).unwrap().cobordant);
    }

    #[test]
    fn lower_semicontinuity_along_shrinking_boundaries(vals in prop::collection::vec(-2i64..=2, 24), k in 1usize..5) {
        // S_i = S + dB_i with B_i supported on fewer and fewer squares.
        let g = grid(2, 3, 1.0);
        let n = unit_norm();
        let s = random_chain(&g, 1, &vals);
        let squares = g.cells(2);
        let mut masses = Vec::new();
        for i in 0..k {
            let b = Chain::from_cells(g.clone(), 2, CoefficientGroup::integers(),
                squares.iter().skip(i).take(k - i).map(|c| (c.clone(), z(1)))).unwrap();
            let si = s.add(&b.boundary().unwrap()).unwrap();
            let dist = flat_norm(&si.sub(&s).unwrap(), &n, None).unwrap().value;
            prop_assert!(dist <= b.mass(&n, None).unwrap() + 1e-9);
            masses.push(si.mass(&n, None).unwrap());
        }
        // The last term is S plus a single boundary, the limit is S itself;
        // the plateau minimum bounds the mass of every member from below.
        let min = plateau_minimize(&s, &g.bounding_box(), &n).unwrap().mass;
        prop_assert!(masses.iter().all(|&m| m + 1e-9 >= min));
    }
}
