//! Fields with prescribed point singularities and boundary trace.
//!
//! The product `prod_i ((x - a_i) / |x - a_i|)^{d_i}` carries the
//! singularities. Its phase mismatch with the boundary trace has degree 0
//! around the fixed nodes, so it unwraps to a real function there, which is
//! extended harmonically inside and added to the phase.

use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{unit, Domain, Field, Lattice};
use crate::error::{Error, Result};

/// Dirichlet data on the fixed nodes, as a function of the polar angle
/// around the domain centre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryData {
    /// `((x - c) / |x - c|)^degree`.
    Degree { degree: i64 },
    /// Angles of the trace at equally spaced polar angles, starting at 0.
    Trace { angles: Vec<f64> },
}

impl BoundaryData {
    /// Winding number of the data.
    pub fn degree(&self) -> i64 {
        match self {
            BoundaryData::Degree { degree } => *degree,
            BoundaryData::Trace { angles } => {
                let n = angles.len();
                let w: f64 = (0..n).map(|i| wrap(angles[(i + 1) % n] - angles[i])).sum();
                (w / (2.0 * PI)).round() as i64
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let BoundaryData::Trace { angles } = self {
            if angles.len() < 3 || angles.iter().any(|a| !a.is_finite()) {
                return Err(Error::Validation("a boundary trace needs at least 3 finite samples".into()));
            }
        }
        Ok(())
    }

    /// Angle of the data at the point `x` seen from `center`.
    pub fn angle_at(&self, x: &[f64], center: [f64; 2]) -> f64 {
        let phi = (x[1] - center[1]).atan2(x[0] - center[0]);
        match self {
            BoundaryData::Degree { degree } => *degree as f64 * phi,
            BoundaryData::Trace { angles } => {
                let n = angles.len();
                let t = phi.rem_euclid(2.0 * PI) / (2.0 * PI) * n as f64;
                let i = (t.floor() as usize).min(n - 1);
                let frac = t - i as f64;
                angles[i] + frac * wrap(angles[(i + 1) % n] - angles[i])
            }
        }
    }
}

pub(crate) fn wrap(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(2.0 * PI) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

/// Point singularities with integer degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipoleSpec {
    pub singularities: Vec<([f64; 2], i64)>,
    pub boundary_degree: i64,
}

impl DipoleSpec {
    pub fn validate(&self) -> Result<()> {
        let total: i64 = self.singularities.iter().map(|s| s.1).sum();
        if total != self.boundary_degree {
            return Err(Error::Validation(format!(
                "degrees sum to {total} but the boundary degree is {}",
                self.boundary_degree
            )));
        }
        Ok(())
    }
}

fn domain_center(domain: &Domain) -> [f64; 2] {
    match domain {
        Domain::Disk { center, .. } | Domain::Annulus { center, .. } => *center,
        Domain::Box { lo, hi } => [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])],
    }
}

/// Builds the field of `spec` matching `boundary` on the fixed nodes.
pub fn dipole_map(spec: &DipoleSpec, lattice: Lattice, domain: Domain, boundary: &BoundaryData, p: f64) -> Result<Field> {
    spec.validate()?;
    boundary.validate()?;
    if lattice.dim() != 2 {
        return Err(Error::Unsupported("dipole maps are planar".into()));
    }
    if boundary.degree() != spec.boundary_degree {
        return Err(Error::Validation(format!(
            "boundary data has degree {} but the dipole layout expects {}",
            boundary.degree(),
            spec.boundary_degree
        )));
    }
    let h = lattice.h;
    let sing = &spec.singularities;
    for (i, (a, _)) in sing.iter().enumerate() {
        if domain.depth(a) < 4.0 * h {
            return Err(Error::Separation(format!(
                "singularity {i} at {a:?} lies within 4h of the boundary"
            )));
        }
        for (j, (b, _)) in sing.iter().enumerate().skip(i + 1) {
            if ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt() < 4.0 * h {
                return Err(Error::Separation(format!(
                    "singularities {i} at {a:?} and {j} at {b:?} are closer than 4h"
                )));
            }
        }
    }
    let center = domain_center(&domain);
    let n = lattice.len();
    let phase0: Vec<f64> = (0..n)
        .map(|i| {
            let x = lattice.position(i);
            sing.iter()
                .map(|(a, d)| *d as f64 * (x[1] - a[1]).atan2(x[0] - a[0]))
                .sum()
        })
        .collect();
    let fixed: Vec<bool> = (0..n).map(|i| !domain.contains(&lattice.position(i))).collect();
    let target: Vec<f64> = (0..n)
        .map(|i| if fixed[i] { boundary.angle_at(&lattice.position(i), center) } else { 0.0 })
        .collect();
    let neighbours = |i: usize| -> Vec<usize> {
        let m = lattice.multi_index(i);
        let mut out = Vec::with_capacity(4);
        for ax in 0..2 {
            if m[ax] > 0 {
                let mut k = m.clone();
                k[ax] -= 1;
                out.push(lattice.index(&k));
            }
            if m[ax] + 1 < lattice.dims[ax] {
                let mut k = m.clone();
                k[ax] += 1;
                out.push(lattice.index(&k));
            }
        }
        out
    };
    // Unwrap the mismatch over each connected set of fixed nodes.
    let mut psi = vec![0.0; n];
    let mut seen = vec![false; n];
    for start in 0..n {
        if !fixed[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        psi[start] = wrap(target[start] - phase0[start]);
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for j in neighbours(i) {
                if fixed[j] && !seen[j] {
                    seen[j] = true;
                    let mj = target[j] - phase0[j];
                    psi[j] = psi[i] + wrap(mj - psi[i]);
                    queue.push_back(j);
                }
            }
        }
    }
    harmonic_extension(&mut psi, &fixed, &neighbours)?;
    let values: Vec<[f64; 2]> = (0..n)
        .map(|i| if fixed[i] { unit(target[i]) } else { unit(phase0[i] + psi[i]) })
        .collect();
    Field::new(lattice, domain, values, fixed, p)
}

/// Solves the graph Laplace equation on free nodes by conjugate gradients.
fn harmonic_extension(psi: &mut [f64], fixed: &[bool], neighbours: &dyn Fn(usize) -> Vec<usize>) -> Result<()> {
    let free: Vec<usize> = (0..psi.len()).filter(|&i| !fixed[i]).collect();
    if free.is_empty() {
        return Ok(());
    }
    let mut pos = vec![usize::MAX; psi.len()];
    for (k, &i) in free.iter().enumerate() {
        pos[i] = k;
    }
    let nb: Vec<Vec<usize>> = free.iter().map(|&i| neighbours(i)).collect();
    let apply = |x: &[f64], out: &mut [f64]| {
        for (k, list) in nb.iter().enumerate() {
            let mut s = 0.0;
            for &j in list {
                s += x[k];
                if pos[j] != usize::MAX {
                    s -= x[pos[j]];
                }
            }
            out[k] = s;
        }
    };
    let b: Vec<f64> = nb
        .iter()
        .map(|list| list.iter().filter(|&&j| fixed[j]).map(|&j| psi[j]).sum())
        .collect();
    let m = free.len();
    let mut x = vec![0.0; m];
    let mut r = b.clone();
    let mut d = r.clone();
    let mut ad = vec![0.0; m];
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    for _ in 0..10 * m + 100 {
        if rr.sqrt() <= 1e-12 * bnorm.max(1e-300) {
            break;
        }
        apply(&d, &mut ad);
        let dad: f64 = d.iter().zip(&ad).map(|(a, b)| a * b).sum();
        if dad <= 0.0 {
            // Free nodes not connected to any fixed node.
            return Err(Error::Validation("free region has no boundary".into()));
        }
        let alpha = rr / dad;
        for k in 0..m {
            x[k] += alpha * d[k];
            r[k] -= alpha * ad[k];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rr_new / rr;
        rr = rr_new;
        for k in 0..m {
            d[k] = r[k] + beta * d[k];
        }
    }
    for (k, &i) in free.iter().enumerate() {
        psi[i] = x[k];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::vortex_cells;

    fn lat(n: usize) -> Lattice {
        Lattice::cell_centered(-1.0, 1.0, n, 2).unwrap()
    }

    #[test]
    fn single_vortex_matches_identity() {
        let spec = DipoleSpec { singularities: vec![([0.0, 0.0], 1)], boundary_degree: 1 };
        let f = dipole_map(&spec, lat(32), Domain::unit_disk(), &BoundaryData::Degree { degree: 1 }, 1.9).unwrap();
        for i in 0..f.values().len() {
            let x = f.lattice().position(i);
            let a = x[1].atan2(x[0]);
            assert!(wrap(f.angle(i) - a).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_spec_gives_constant() {
        let spec = DipoleSpec { singularities: vec![], boundary_degree: 0 };
        let f = dipole_map(&spec, lat(16), Domain::unit_disk(), &BoundaryData::Degree { degree: 0 }, 1.9).unwrap();
        assert!(f.values().iter().all(|v| (v[0] - 1.0).abs() < 1e-12));
    }

    #[test]
    fn dipole_pair_has_two_vortices() {
        let spec = DipoleSpec { singularities: vec![([-0.3, 0.1], 1), ([0.35, -0.2], -1)], boundary_degree: 0 };
        let f = dipole_map(&spec, lat(64), Domain::unit_disk(), &BoundaryData::Degree { degree: 0 }, 1.9).unwrap();
        let v = vortex_cells(&f);
        assert_eq!(v.len(), 2);
        assert_eq!(v.iter().map(|x| x.1).sum::<i64>(), 0);
    }

    #[test]
    fn close_pair_is_rejected() {
        let spec = DipoleSpec { singularities: vec![([0.0, 0.0], 1), ([0.05, 0.0], 1)], boundary_degree: 2 };
        let r = dipole_map(&spec, lat(64), Domain::unit_disk(), &BoundaryData::Degree { degree: 2 }, 1.9);
        assert!(matches!(r, Err(Error::Separation(_))));
    }

    #[test]
    fn trace_degree() {
        let angles: Vec<f64> = (0..40).map(|i| 2.0 * (i as f64) * 2.0 * PI / 40.0 + 0.1).collect();
        assert_eq!(BoundaryData::Trace { angles }.degree(), 2);
    }
}
