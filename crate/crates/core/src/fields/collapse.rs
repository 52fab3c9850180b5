//! Radial collapse of a field onto the boundaries of grid cells.
//!
//! Inside a cube `K` of half side `a` centred at `c`, the collapsed field is
//! `u(c + a (x - c) / |x - c|_inf)`, constant along rays from the centre.
//! On the cone over a face `F` its gradient at the face is
//! `(grad_T u, -(s . grad_T u) / a)` with `s` the tangential position, so
//! the energy over `K` is exactly
//! `a / (j - p) * sum_F int_F (|grad_T u|^2 + (s . grad_T u)^2 / a^2)^{p/2}`.

use super::{angle_between, gauss_legendre, grid_alignment, unit, EnergyKernel, Field};
use crate::chains::{Cell, CubicalGrid};
use crate::error::{Error, Result};

/// The collapsed field with both energy estimates and their measured
/// constants.
#[derive(Debug, Clone)]
pub struct Collapse {
    pub field: Field,
    pub j: usize,
    /// Half side of the grid cells, the length scale of both estimates.
    pub half_side: f64,
    /// Energy of the collapsed field on the collapsed cells.
    pub energy_collapsed: f64,
    /// Energy of the field on the union of the cells' boundaries.
    pub energy_skeleton: f64,
    /// Energy of the field on the union of the cells.
    pub energy_cells: f64,
    /// `energy_collapsed / (a / (j - p) * energy_skeleton)`.
    pub c_energy: f64,
    /// `int |u - u o Phi|^p` over the cells.
    pub lp_distance: f64,
    /// `a^p (a / (j - p) * energy_skeleton + energy_cells)`.
    pub distance_scale: f64,
    /// `lp_distance / distance_scale`.
    pub c_distance: f64,
}

struct Geometry<'a> {
    f: &'a Field,
    m: usize,
    offset: Vec<i64>,
    hf: f64,
}

impl Geometry<'_> {
    /// Lattice node at fine offset `t` along the cell's axes from its base.
    fn node(&self, cell: &Cell, t: &[usize]) -> Option<usize> {
        let lat = self.f.lattice();
        let mut ix = Vec::with_capacity(lat.dim());
        for i in 0..lat.dim() {
            let mut v = self.offset[i] + self.m as i64 * cell.base[i];
            if let Some(k) = cell.axes.iter().position(|&a| a == i) {
                v += t[k] as i64;
            }
            if v < 0 || v >= lat.dims[i] as i64 {
                return None;
            }
            ix.push(v as usize);
        }
        Some(lat.index(&ix))
    }

    fn theta(&self, cell: &Cell, t: &[usize]) -> f64 {
        self.f.angle(self.node(cell, t).expect("cell inside lattice"))
    }
}

/// Gradient of the unwrapped angle on a unit square from its corners
/// `[00, 10, 01, 11]`, in units of one fine spacing.
fn plaquette_gradient(u: [[f64; 2]; 4]) -> [f64; 2] {
    let d0 = angle_between(u[0], u[1]);
    let d1 = angle_between(u[0], u[2]);
    let t11 = d0 + angle_between(u[1], u[3]);
    [0.5 * (d0 + (t11 - d1)), 0.5 * (d1 + (t11 - d0))]
}

/// Collapses `f` radially in every `j`-cell of `grid` whose centre lies in
/// the domain. The grid must be aligned with the lattice and refine it by
/// an integer factor.
pub fn radial_collapse(f: &Field, j: usize, grid: &CubicalGrid) -> Result<Collapse> {
    let lat = f.lattice();
    let d = lat.dim();
    if !(2..=d).contains(&j) {
        return Err(Error::Parameter(format!("collapse dimension {j} must lie in 2..={d}")));
    }
    if grid.dim() != d {
        return Err(Error::DimensionMismatch("grid and lattice dimensions differ".into()));
    }
    let (m, offset) = grid_alignment(lat, grid)?;
    let geo = Geometry { f, m, offset, hf: lat.h };
    let p = f.p();
    let a = 0.5 * grid.h;
    let cells: Vec<Cell> = grid
        .cells(j)
        .into_iter()
        .filter(|c| f.domain().contains(&grid.cell_center(c)))
        .collect();
    for c in &cells {
        let far = vec![m; j];
        if geo.node(c, &vec![0; j]).is_none() || geo.node(c, &far).is_none() {
            return Err(Error::Validation(format!("grid cell {c:?} leaves the lattice")));
        }
    }
    let mut values = f.values().to_vec();
    let mut collapsed = 0.0;
    let mut lp_distance = 0.0;
    let mut faces_seen = std::collections::BTreeSet::new();
    let mut skeleton = 0.0;
    let mut fine_cells = std::collections::BTreeSet::new();
    let mut face_energy_cells = 0.0;
    for c in &cells {
        for (face, _) in c.faces() {
            // Position of the face inside c: which axis is fixed and on
            // which side.
            let (fixed_k, side) = c
                .axes
                .iter()
                .enumerate()
                .find(|(_, &ax)| !face.axes.contains(&ax))
                .map(|(k, &ax)| (k, usize::from(face.base[ax] != c.base[ax])))
                .expect("a face drops one axis");
            let tang: Vec<usize> = (0..j).filter(|&k| k != fixed_k).collect();
            let local = |s: &[usize]| -> Vec<usize> {
                let mut t = vec![0; j];
                t[fixed_k] = side * m;
                for (q, &k) in tang.iter().enumerate() {
                    t[k] = s[q];
                }
                t
            };
            let new_face = faces_seen.insert(face.clone());
            let half = m as f64 / 2.0;
            if j == 2 {
                for s in 0..m {
                    let delta = angle_between(
                        f.values()[geo.node(c, &local(&[s])).unwrap()],
                        f.values()[geo.node(c, &local(&[s + 1])).unwrap()],
                    );
                    let g = delta.abs() / geo.hf;
                    let lo = (s as f64 - half) * geo.hf;
                    let seg = gauss_legendre(lo, lo + geo.hf, 1, |x| (g * g * (1.0 + x * x / (a * a))).powf(0.5 * p));
                    collapsed += a / (j as f64 - p) * seg;
                    if new_face {
                        skeleton += geo.hf * g.powf(p);
                    }
                }
            } else {
                for s0 in 0..m {
                    for s1 in 0..m {
                        let corner = |e0: usize, e1: usize| f.values()[geo.node(c, &local(&[s0 + e0, s1 + e1])).unwrap()];
                        let g = plaquette_gradient([corner(0, 0), corner(1, 0), corner(0, 1), corner(1, 1)]);
                        let g = [g[0] / geo.hf, g[1] / geo.hf];
                        let lo0 = (s0 as f64 - half) * geo.hf;
                        let lo1 = (s1 as f64 - half) * geo.hf;
                        let gg = g[0] * g[0] + g[1] * g[1];
                        let integral = gauss_legendre(lo0, lo0 + geo.hf, 1, |x| {
                            gauss_legendre(lo1, lo1 + geo.hf, 1, |y| {
                                let sg = x * g[0] + y * g[1];
                                (gg + sg * sg / (a * a)).powf(0.5 * p)
                            })
                        });
                        collapsed += a / (j as f64 - p) * integral;
                        if new_face {
                            skeleton += geo.hf * geo.hf * gg.powf(0.5 * p);
                        }
                    }
                }
            }
        }
        // Interior nodes: replace by the value at the radial projection.
        if m >= 2 {
            let mut t = vec![1usize; j];
            'nodes: loop {
                let idx = geo.node(c, &t).unwrap();
                let orig = f.values()[idx];
                let proj = project(&geo, c, &t, j);
                values[idx] = proj;
                let chord2 = (orig[0] - proj[0]).powi(2) + (orig[1] - proj[1]).powi(2);
                lp_distance += geo.hf.powi(j as i32) * chord2.powf(0.5 * p);
                let mut k = 0;
                loop {
                    if k == j {
                        break 'nodes;
                    }
                    t[k] += 1;
                    if t[k] < m {
                        break;
                    }
                    t[k] = 1;
                    k += 1;
                }
            }
        }
        // Energy of u on the cell itself.
        if j == d {
            let mut t = vec![0usize; j];
            loop {
                fine_cells.insert(geo.node(c, &t).unwrap());
                let mut k = 0;
                while k < j {
                    t[k] += 1;
                    if t[k] < m {
                        break;
                    }
                    t[k] = 0;
                    k += 1;
                }
                if k == j {
                    break;
                }
            }
        } else {
            for s0 in 0..m {
                for s1 in 0..m {
                    let corner = |e0: usize, e1: usize| f.values()[geo.node(c, &[s0 + e0, s1 + e1]).unwrap()];
                    let g = plaquette_gradient([corner(0, 0), corner(1, 0), corner(0, 1), corner(1, 1)]);
                    let gg = (g[0] * g[0] + g[1] * g[1]) / (geo.hf * geo.hf);
                    face_energy_cells += geo.hf * geo.hf * gg.powf(0.5 * p);
                }
            }
        }
    }
    let energy_cells = if j == d {
        EnergyKernel::with_cells(f, p, fine_cells.into_iter().collect()).eval(f.values(), None)
    } else {
        face_energy_cells
    };
    let jp = j as f64 - p;
    let scale38 = a / jp * skeleton;
    let distance_scale = a.powf(p) * (scale38 + energy_cells);
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else if num == 0.0 { 0.0 } else { f64::INFINITY };
    let mut field = f.clone();
    field.values = values;
    Ok(Collapse {
        field,
        j,
        half_side: a,
        energy_collapsed: collapsed,
        energy_skeleton: skeleton,
        energy_cells,
        c_energy: ratio(collapsed, scale38),
        lp_distance,
        distance_scale,
        c_distance: ratio(lp_distance, distance_scale),
    })
}

/// Value of the collapsed field at the fine node `t` inside cell `c`.
fn project(geo: &Geometry, c: &Cell, t: &[usize], j: usize) -> [f64; 2] {
    let m = geo.m as f64;
    let half = 0.5 * m;
    let v: Vec<f64> = t.iter().map(|&x| x as f64 - half).collect();
    let n = v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if n == 0.0 {
        // The centre maps nowhere; any boundary value will do.
        let mut s = vec![0; j];
        s[0] = geo.m;
        return geo.f.values()[geo.node(c, &s).unwrap()];
    }
    let y: Vec<f64> = v.iter().map(|x| (half + half * x / n).clamp(0.0, m)).collect();
    // Snap the coordinate that reached the boundary exactly.
    let k = v.iter().position(|x| x.abs() == n).unwrap();
    let mut base = vec![0usize; j];
    let mut frac = vec![0.0; j];
    for i in 0..j {
        if i == k {
            base[i] = if v[i] > 0.0 { geo.m } else { 0 };
            continue;
        }
        let fl = y[i].floor().min(m - 1.0).max(0.0);
        base[i] = fl as usize;
        frac[i] = y[i] - fl;
    }
    let others: Vec<usize> = (0..j).filter(|&i| i != k).collect();
    let at = |e: &[usize]| -> f64 {
        let mut s = base.clone();
        for (q, &i) in others.iter().enumerate() {
            s[i] += e[q];
        }
        geo.theta(c, &s)
    };
    let theta = if others.len() == 1 {
        let i = others[0];
        let t0 = at(&[0]);
        let d = angle_between(unit(t0), unit(at(&[1])));
        t0 + frac[i] * d
    } else {
        let t00 = at(&[0, 0]);
        let t10 = t00 + angle_between(unit(t00), unit(at(&[1, 0])));
        let t01 = t00 + angle_between(unit(t00), unit(at(&[0, 1])));
        let t11 = t10 + angle_between(unit(t10), unit(at(&[1, 1])));
        let (x, y) = (frac[others[0]], frac[others[1]]);
        (1.0 - x) * (1.0 - y) * t00 + x * (1.0 - y) * t10 + (1.0 - x) * y * t01 + x * y * t11
    };
    unit(theta)
}

/// Collapse of a sampled loop onto a disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarCheck {
    /// Energy of the radial extension over the disk, by polar quadrature.
    pub collapsed: f64,
    /// `radius / (2 - p)` times the energy of the trace on the circle.
    pub predicted: f64,
}

/// Radially extends the piecewise geodesic loop through `angles` (equally
/// spaced in the polar angle) into the disk of radius `radius`, integrates
/// its energy in polar coordinates, and compares it with the one-dimensional
/// energy of the trace.
pub fn polar_collapse_check(angles: &[f64], radius: f64, p: f64) -> Result<PolarCheck> {
    if angles.len() < 3 || !(radius > 0.0) || !(p > 1.0 && p < 2.0) {
        return Err(Error::Parameter("need three samples, positive radius, p in (1, 2)".into()));
    }
    let n = angles.len();
    let dphi = 2.0 * std::f64::consts::PI / n as f64;
    // With r = radius * t^{1/(2-p)} the radial weight r^{1-p} dr becomes
    // radius^{2-p} / (2-p) dt.
    let radial = gauss_legendre(0.0, 1.0, 4, |_| radius.powf(2.0 - p) / (2.0 - p));
    let mut collapsed = 0.0;
    let mut trace = 0.0;
    for i in 0..n {
        let d = angle_between(unit(angles[i]), unit(angles[(i + 1) % n])).abs();
        let speed = d / dphi;
        collapsed += dphi * speed.powf(p) * radial;
        trace += radius * dphi * (d / (radius * dphi)).powf(p);
    }
    Ok(PolarCheck {
        collapsed,
        predicted: radius / (2.0 - p) * trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Domain, Lattice};

    fn setup(phase: impl Fn(&[f64]) -> f64) -> (Field, CubicalGrid) {
        // Lattice nodes at multiples of 1/32 on [0, 1].
        let lat = Lattice::new(vec![0.0, 0.0], 1.0 / 32.0, vec![33, 33]).unwrap();
        let dom = Domain::Box { lo: vec![-0.01, -0.01], hi: vec![1.01, 1.01] };
        let f = Field::from_fn(lat, dom, 1.7, |x| unit(phase(x))).unwrap();
        let g = CubicalGrid::new(vec![0.0, 0.0], 0.25, vec![4, 4]).unwrap();
        (f, g)
    }

    #[test]
    fn constant_on_cell_boundaries_is_unchanged() {
        let (f, g) = setup(|_| 0.3);
        let c = radial_collapse(&f, 2, &g).unwrap();
        assert_eq!(c.field.values(), f.values());
        assert_eq!(c.energy_collapsed, 0.0);
        assert_eq!(c.lp_distance, 0.0);
    }

    #[test]
    fn smooth_field_constants_are_moderate() {
        let (f, g) = setup(|x| 2.0 * x[0] + (3.0 * x[1]).sin());
        let c = radial_collapse(&f, 2, &g).unwrap();
        assert!(c.c_energy > 0.0 && c.c_energy <= 2.0 * 2f64.powf(0.85) + 1e-9);
        assert!(c.c_distance <= 10.0);
        assert!(c.field.unit_defect() <= 1e-12);
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let (f, g) = setup(|_| 0.0);
        assert!(radial_collapse(&f, 3, &g).is_err());
        assert!(radial_collapse(&f, 1, &g).is_err());
    }

    #[test]
    fn polar_model_is_an_equality() {
        let angles: Vec<f64> = (0..64).map(|i| i as f64 * 2.0 * std::f64::consts::PI / 64.0).collect();
        let r = polar_collapse_check(&angles, 0.3, 1.8).unwrap();
        assert!((r.collapsed / r.predicted - 1.0).abs() < 1e-12);
    }
}
