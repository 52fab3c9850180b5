//! Pushing polyhedral 0- and 1-chains onto a cubical grid.
//!
//! Points snap to the nearest vertex. A segment becomes an edge path
//! between the snapped endpoints that greedily stays next to the segment,
//! so the path is at most `sqrt(d)` times longer than the segment plus a
//! snapping term of order `d h`.

use serde::{Deserialize, Serialize};

use super::{Cell, Chain, CubicalGrid};
use crate::coeffgroup::{CostedNorm, GroupElement};
use crate::error::{Error, Result};

/// Weighted points or weighted oriented segments in ambient coordinates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PolyChain {
    #[serde(default)]
    pub points: Vec<(Vec<f64>, GroupElement)>,
    #[serde(default)]
    pub segments: Vec<(Vec<f64>, Vec<f64>, GroupElement)>,
}

impl PolyChain {
    /// Chain dimension, or an error for mixed or empty data.
    pub fn dim(&self) -> Result<usize> {
        match (self.points.is_empty(), self.segments.is_empty()) {
            (false, true) => Ok(0),
            (true, false) => Ok(1),
            (true, true) => Ok(0),
            (false, false) => Err(Error::Unsupported(
                "points and segments cannot be mixed in one chain".into(),
            )),
        }
    }

    /// Euclidean mass.
    pub fn mass(&self, norm: &CostedNorm) -> Result<f64> {
        let mut m = 0.0;
        for (_, g) in &self.points {
            m += norm.norm(g)?;
        }
        for (a, b, g) in &self.segments {
            m += norm.norm(g)? * dist(a, b);
        }
        Ok(m)
    }

    /// Mass of the boundary of the segments (endpoint coefficients that do
    /// not cancel exactly).
    pub fn boundary_mass(&self, norm: &CostedNorm) -> Result<f64> {
        let group = norm.group();
        let mut ends: Vec<(Vec<f64>, GroupElement)> = Vec::new();
        for (a, b, g) in &self.segments {
            for (x, s) in [(b, 1), (a, -1)] {
                let gs = group.scale(s, g);
                match ends.iter_mut().find(|(y, _)| y == x) {
                    Some((_, acc)) => *acc = group.add(acc, &gs),
                    None => ends.push((x.clone(), gs)),
                }
            }
        }
        let mut m = 0.0;
        for (_, g) in &ends {
            m += norm.norm(g)?;
        }
        Ok(m)
    }
}

/// The deformed chain with the measured and guaranteed constants.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformResult {
    pub chain: Chain,
    /// Output mass over input mass (1 when both vanish).
    pub mass_ratio: f64,
    /// Output mass over `input mass + h * input boundary mass`.
    pub c_def: f64,
    /// The guaranteed bound on `c_def`, `sqrt(d)`.
    pub c_def_bound: f64,
    pub max_displacement: f64,
    /// `2 d h`.
    pub displacement_bound: f64,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Distance from `x` to the segment `[a, b]`.
fn dist_to_segment(x: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab: Vec<f64> = a.iter().zip(b).map(|(p, q)| q - p).collect();
    let len2: f64 = ab.iter().map(|v| v * v).sum();
    let t = if len2 == 0.0 {
        0.0
    } else {
        (x.iter().zip(a).zip(&ab).map(|((xi, ai), di)| (xi - ai) * di).sum::<f64>() / len2).clamp(0.0, 1.0)
    };
    let p: Vec<f64> = a.iter().zip(&ab).map(|(ai, di)| ai + t * di).collect();
    dist(x, &p)
}

fn vertex_position(grid: &CubicalGrid, v: &[i64]) -> Vec<f64> {
    grid.cell_lower(&Cell::vertex(v.to_vec()))
}

/// Deforms polyhedral data of dimension 0 or 1 onto `grid`.
pub fn deform_to_grid(data: &PolyChain, grid: &CubicalGrid, norm: &CostedNorm) -> Result<DeformResult> {
    let d = grid.dim();
    if d > 3 {
        return Err(Error::Unsupported(format!("ambient dimension {d} exceeds 3")));
    }
    let q = data.dim()?;
    let group = norm.group().clone();
    let bad_dim = data
        .points
        .iter()
        .map(|(x, _)| x.len())
        .chain(data.segments.iter().flat_map(|(a, b, _)| [a.len(), b.len()]))
        .any(|n| n != d);
    if bad_dim {
        return Err(Error::DimensionMismatch(format!("input points must have {d} coordinates")));
    }
    let mut chain = Chain::zero(grid.clone(), q, group.clone())?;
    let mut max_disp: f64 = 0.0;
    for (x, g) in &data.points {
        let v = grid.nearest_vertex(x);
        max_disp = max_disp.max(dist(x, &vertex_position(grid, &v)));
        chain.add_to(&Cell::vertex(v), g)?;
    }
    for (a, b, g) in &data.segments {
        let mut v = grid.nearest_vertex(a);
        let end = grid.nearest_vertex(b);
        max_disp = max_disp.max(dist_to_segment(&vertex_position(grid, &v), a, b));
        while v != end {
            let mut best: Option<(f64, usize, i64)> = None;
            for i in 0..d {
                if v[i] == end[i] {
                    continue;
                }
                let step = (end[i] - v[i]).signum();
                let mut w = v.clone();
                w[i] += step;
                let dd = dist_to_segment(&vertex_position(grid, &w), a, b);
                if best.is_none_or(|(bd, _, _)| dd < bd - 1e-12 * grid.h) {
                    best = Some((dd, i, step));
                }
            }
            let (dd, i, step) = best.expect("some axis differs");
            let base = if step > 0 { v.clone() } else {
                let mut w = v.clone();
                w[i] -= 1;
                w
            };
            let edge = Cell { base, axes: vec![i] };
            chain.add_to(&edge, &group.scale(step, g))?;
            v[i] += step;
            max_disp = max_disp.max(dd);
        }
    }
    let out = chain.mass(norm, None)?;
    let input = data.mass(norm)?;
    let bmass = data.boundary_mass(norm)?;
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else if num == 0.0 { 1.0 } else { f64::INFINITY };
    Ok(DeformResult {
        chain,
        mass_ratio: ratio(out, input),
        c_def: ratio(out, input + grid.h * bmass),
        c_def_bound: (d as f64).sqrt(),
        max_displacement: max_disp,
        displacement_bound: 2.0 * d as f64 * grid.h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffgroup::CoefficientGroup;

    fn setup() -> (CubicalGrid, CostedNorm) {
        let g = CubicalGrid::new(vec![0.0, 0.0], 1.0, vec![12, 12]).unwrap();
        let t = crate::coeffgroup::CostTable::new(
            CoefficientGroup::integers(),
            vec![(z(1), 1.0)],
            crate::coeffgroup::Extension::PowerLaw { exponent: 1.0, scale: 1.0 },
        )
        .unwrap();
        (g, CostedNorm::new(t, 2.0).unwrap())
    }

    fn z(d: i64) -> GroupElement {
        CoefficientGroup::integers().element(&[d]).unwrap()
    }

    #[test]
    fn diagonal_segment_becomes_two_edges() {
        let (g, n) = setup();
        let data = PolyChain {
            segments: vec![(vec![1.0, 1.0], vec![2.0, 2.0], z(1))],
            ..Default::default()
        };
        let r = deform_to_grid(&data, &g, &n).unwrap();
        assert_eq!(r.chain.coeffs().len(), 2);
        assert!((r.mass_ratio - 2f64.sqrt()).abs() < 1e-12);
        assert!(r.mass_ratio <= r.c_def_bound + 1e-12);
        let b = r.chain.boundary().unwrap();
        assert_eq!(b.get(&Cell::vertex(vec![2, 2])), z(1));
        assert_eq!(b.get(&Cell::vertex(vec![1, 1])), z(-1));
    }

    #[test]
    fn nearby_opposite_points_cancel() {
        let (g, n) = setup();
        let data = PolyChain {
            points: vec![(vec![3.1, 4.2], z(1)), (vec![2.8, 3.9], z(-1))],
            ..Default::default()
        };
        let r = deform_to_grid(&data, &g, &n).unwrap();
        assert!(r.chain.is_zero());
    }

    #[test]
    fn long_segment_stays_close() {
        let (g, n) = setup();
        let data = PolyChain {
            segments: vec![(vec![0.3, 0.2], vec![10.6, 7.1], z(2))],
            ..Default::default()
        };
        let r = deform_to_grid(&data, &g, &n).unwrap();
        assert!(r.max_displacement <= r.displacement_bound);
        assert!(r.c_def <= r.c_def_bound);
    }
}
