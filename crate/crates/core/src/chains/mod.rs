//! Cubical chains with coefficients in a [`CoefficientGroup`].
//!
//! A [`CubicalGrid`] is the cubical complex of a box subdivided into cubes of
//! side `h`, optionally punctured by removing cells together with all their
//! cofaces. A [`Chain`] is a finitely supported map from oriented cells to
//! group elements; orientations are canonicalised so that each cell is
//! stored with its axes in increasing order.

mod deform;
mod flat;
mod search;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::coeffgroup::{CoefficientGroup, CostedNorm, GroupElement};
use crate::error::{Error, Result};

pub use deform::{deform_to_grid, DeformResult, PolyChain};
pub use flat::{
    cobordant, fill_small_cycle, flat_norm, plateau_minimize, Cobordism, FlatDecomposition,
    FlatMethod, Integrality, PlateauResult,
};

/// Current version of the chain JSON schema.
pub const CHAIN_SCHEMA_VERSION: u32 = 1;

/// An axis-aligned box in ambient coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Aabb {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::Validation(format!("degenerate box {lo:?}..{hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }
}

/// An oriented elementary cube `base + [0,1]^axes`, in grid units.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub base: Vec<i64>,
    /// Spanning axes, strictly increasing.
    pub axes: Vec<usize>,
}

impl Cell {
    /// A cell spanned by `axes` in the given order; returns the canonical
    /// cell and the sign of the orientation change.
    pub fn oriented(base: Vec<i64>, mut axes: Vec<usize>) -> Result<(Self, i64)> {
        let mut sign = 1;
        for i in 0..axes.len() {
            for j in 0..axes.len() - 1 - i {
                if axes[j] > axes[j + 1] {
                    axes.swap(j, j + 1);
                    sign = -sign;
                }
            }
        }
        if axes.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation(format!("repeated axis in {axes:?}")));
        }
        if axes.iter().any(|&a| a >= base.len()) {
            return Err(Error::Validation(format!("axis out of range in {axes:?}")));
        }
        Ok((Self { base, axes }, sign))
    }

    pub fn vertex(base: Vec<i64>) -> Self {
        Self {
            base,
            axes: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    /// Codimension-one faces with their boundary signs.
    pub fn faces(&self) -> Vec<(Cell, i64)> {
        let mut out = Vec::with_capacity(2 * self.axes.len());
        for (i, &a) in self.axes.iter().enumerate() {
            let sign = if i % 2 == 0 { 1 } else { -1 };
            let mut axes = self.axes.clone();
            axes.remove(i);
            let mut up = self.base.clone();
            up[a] += 1;
            out.push((
                Cell {
                    base: up,
                    axes: axes.clone(),
                },
                sign,
            ));
            out.push((
                Cell {
                    base: self.base.clone(),
                    axes,
                },
                -sign,
            ));
        }
        out
    }

    /// Whether `self` lies in the closure of `other`.
    pub fn is_face_of(&self, other: &Cell) -> bool {
        if self.base.len() != other.base.len() {
            return false;
        }
        (0..self.base.len()).all(|i| {
            let mine = self.axes.contains(&i);
            let theirs = other.axes.contains(&i);
            match (mine, theirs) {
                (true, true) => self.base[i] == other.base[i],
                (true, false) => false,
                (false, true) => self.base[i] == other.base[i] || self.base[i] == other.base[i] + 1,
                (false, false) => self.base[i] == other.base[i],
            }
        })
    }
}

/// A cubical complex on a box of `extents[i]` cells of side `h` per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubicalGrid {
    pub origin: Vec<f64>,
    pub h: f64,
    pub extents: Vec<usize>,
    /// Removed cells; their cofaces are removed too.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub holes: Vec<Cell>,
}

impl CubicalGrid {
    pub fn new(origin: Vec<f64>, h: f64, extents: Vec<usize>) -> Result<Self> {
        if origin.len() != extents.len() || origin.is_empty() {
            return Err(Error::DimensionMismatch(
                "origin and extents must have the same positive length".into(),
            ));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Parameter(format!("grid spacing must be positive, got {h}")));
        }
        Ok(Self {
            origin,
            h,
            extents,
            holes: Vec::new(),
        })
    }

    pub fn with_holes(mut self, holes: Vec<Cell>) -> Result<Self> {
        for c in &holes {
            if c.base.len() != self.dim() || !self.in_bounds(c) {
                return Err(Error::Validation(format!("hole {c:?} is not a cell of the grid")));
            }
        }
        self.holes = holes;
        Ok(self)
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    fn in_bounds(&self, c: &Cell) -> bool {
        c.base.len() == self.dim()
            && (0..self.dim()).all(|i| {
                let top = c.base[i] + i64::from(c.axes.contains(&i));
                c.base[i] >= 0 && top <= self.extents[i] as i64
            })
    }

    /// Whether `c` is a cell of the (possibly punctured) complex.
    pub fn contains(&self, c: &Cell) -> bool {
        self.in_bounds(c) && !self.holes.iter().any(|h| h.is_face_of(c))
    }

    /// Same complex up to rounding of the geometric data.
    pub fn same_as(&self, other: &CubicalGrid) -> bool {
        let tol = 1e-9 * self.h;
        self.extents == other.extents
            && (self.h - other.h).abs() <= tol
            && self.origin.iter().zip(&other.origin).all(|(a, b)| (a - b).abs() <= tol)
            && self.holes == other.holes
    }

    /// All `q`-cells, in increasing order.
    pub fn cells(&self, q: usize) -> Vec<Cell> {
        self.cells_where(q, |_| true)
    }

    /// The `q`-cells contained in the closed box `region` (all if `None`).
    pub fn cells_within(&self, q: usize, region: Option<&Aabb>) -> Vec<Cell> {
        match region {
            None => self.cells(q),
            Some(r) => self.cells_where(q, |c| self.cell_inside_closed(c, r)),
        }
    }

    fn cells_where(&self, q: usize, keep: impl Fn(&Cell) -> bool) -> Vec<Cell> {
        let d = self.dim();
        let mut out = Vec::new();
        if q > d {
            return out;
        }
        for axes in subsets(d, q) {
            let mut base = vec![0i64; d];
            loop {
                let c = Cell {
                    base: base.clone(),
                    axes: axes.clone(),
                };
                if self.contains(&c) && keep(&c) {
                    out.push(c);
                }
                let mut i = 0;
                loop {
                    if i == d {
                        break;
                    }
                    base[i] += 1;
                    let lim = self.extents[i] as i64 - i64::from(axes.contains(&i));
                    if base[i] <= lim {
                        break;
                    }
                    base[i] = 0;
                    i += 1;
                }
                if i == d {
                    break;
                }
            }
        }
        out.sort();
        out
    }

    /// Lower corner of a cell in ambient coordinates.
    pub fn cell_lower(&self, c: &Cell) -> Vec<f64> {
        c.base
            .iter()
            .zip(&self.origin)
            .map(|(&b, o)| o + self.h * b as f64)
            .collect()
    }

    pub fn cell_center(&self, c: &Cell) -> Vec<f64> {
        let mut x = self.cell_lower(c);
        for &a in &c.axes {
            x[a] += 0.5 * self.h;
        }
        x
    }

    /// Whether the closed cell lies in the closed box.
    pub fn cell_inside_closed(&self, c: &Cell, r: &Aabb) -> bool {
        let tol = 1e-9 * self.h;
        let lo = self.cell_lower(c);
        (0..self.dim()).all(|i| {
            let top = lo[i] + if c.axes.contains(&i) { self.h } else { 0.0 };
            lo[i] >= r.lo[i] - tol && top <= r.hi[i] + tol
        })
    }

    /// Whether the relative interior of the cell meets the open box.
    pub fn cell_meets_open(&self, c: &Cell, r: &Aabb) -> bool {
        let tol = 1e-9 * self.h;
        let lo = self.cell_lower(c);
        (0..self.dim()).all(|i| {
            if c.axes.contains(&i) {
                lo[i] < r.hi[i] - tol && lo[i] + self.h > r.lo[i] + tol
            } else {
                lo[i] > r.lo[i] + tol && lo[i] < r.hi[i] - tol
            }
        })
    }

    /// The dual grid whose vertices are the centres of the top cells.
    pub fn dual(&self) -> Result<CubicalGrid> {
        if self.extents.iter().any(|&e| e == 0) {
            return Err(Error::Validation("grid has no top cells".into()));
        }
        CubicalGrid::new(
            self.origin.iter().map(|o| o + 0.5 * self.h).collect(),
            self.h,
            self.extents.iter().map(|e| e - 1).collect(),
        )
    }

    /// The open box spanned by the grid.
    pub fn bounding_box(&self) -> Aabb {
        Aabb {
            lo: self.origin.clone(),
            hi: self
                .origin
                .iter()
                .zip(&self.extents)
                .map(|(o, &e)| o + self.h * e as f64)
                .collect(),
        }
    }

    /// Nearest vertex to a point.
    pub fn nearest_vertex(&self, x: &[f64]) -> Vec<i64> {
        x.iter()
            .zip(&self.origin)
            .zip(&self.extents)
            .map(|((xi, o), &e)| (((xi - o) / self.h).round() as i64).clamp(0, e as i64))
            .collect()
    }
}

fn subsets(d: usize, q: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << d) {
        if mask.count_ones() as usize == q {
            out.push((0..d).filter(|i| mask & (1 << i) != 0).collect());
        }
    }
    out.sort();
    out
}

/// A `dim`-chain on a grid with coefficients in `group`.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    grid: CubicalGrid,
    dim: usize,
    group: CoefficientGroup,
    coeffs: BTreeMap<Cell, GroupElement>,
}

impl Chain {
    pub fn zero(grid: CubicalGrid, dim: usize, group: CoefficientGroup) -> Result<Self> {
        if dim > grid.dim() {
            return Err(Error::DimensionMismatch(format!(
                "a {dim}-chain cannot live in a {}-dimensional grid",
                grid.dim()
            )));
        }
        Ok(Self {
            grid,
            dim,
            group,
            coeffs: BTreeMap::new(),
        })
    }

    /// Builds a chain from (cell, coefficient) pairs; repeated cells add up.
    pub fn from_cells(
        grid: CubicalGrid,
        dim: usize,
        group: CoefficientGroup,
        cells: impl IntoIterator<Item = (Cell, GroupElement)>,
    ) -> Result<Self> {
        let mut c = Self::zero(grid, dim, group)?;
        for (cell, g) in cells {
            c.add_to(&cell, &g)?;
        }
        Ok(c)
    }

    /// Adds `g` to the coefficient of `cell`.
    pub fn add_to(&mut self, cell: &Cell, g: &GroupElement) -> Result<()> {
        if cell.dim() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "cell {cell:?} has dimension {}, chain has {}",
                cell.dim(),
                self.dim
            )));
        }
        if !self.grid.contains(cell) {
            return Err(Error::Validation(format!("cell {cell:?} is not in the grid")));
        }
        let g = self.group.element(g.coords())?;
        let cur = self.coeffs.get(cell).cloned().unwrap_or_else(|| self.group.zero());
        let sum = self.group.add(&cur, &g);
        if sum.is_zero() {
            self.coeffs.remove(cell);
        } else {
            self.coeffs.insert(cell.clone(), sum);
        }
        Ok(())
    }

    pub fn grid(&self) -> &CubicalGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn group(&self) -> &CoefficientGroup {
        &self.group
    }

    /// Nonzero coefficients.
    pub fn coeffs(&self) -> &BTreeMap<Cell, GroupElement> {
        &self.coeffs
    }

    pub fn get(&self, cell: &Cell) -> GroupElement {
        self.coeffs.get(cell).cloned().unwrap_or_else(|| self.group.zero())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn compatible(&self, other: &Chain) -> Result<()> {
        if self.dim != other.dim || self.group != other.group || !self.grid.same_as(&other.grid) {
            return Err(Error::DimensionMismatch(
                "chains differ in dimension, group or grid".into(),
            ));
        }
        Ok(())
    }

    pub fn add(&self, other: &Chain) -> Result<Chain> {
        self.compatible(other)?;
        let mut out = self.clone();
        for (c, g) in &other.coeffs {
            out.add_to(c, g)?;
        }
        Ok(out)
    }

    pub fn neg(&self) -> Chain {
        let mut out = self.clone();
        for g in out.coeffs.values_mut() {
            *g = self.group.neg(g);
        }
        out
    }

    pub fn sub(&self, other: &Chain) -> Result<Chain> {
        self.add(&other.neg())
    }

    /// The cubical boundary.
    pub fn boundary(&self) -> Result<Chain> {
        if self.dim == 0 {
            return Err(Error::ZeroChainBoundary);
        }
        let mut out = Chain::zero(self.grid.clone(), self.dim - 1, self.group.clone())?;
        for (c, g) in &self.coeffs {
            for (f, s) in c.faces() {
                out.add_to(&f, &self.group.scale(s, g))?;
            }
        }
        Ok(out)
    }

    /// `sum |g| h^dim` over cells meeting `region` (all cells if `None`).
    pub fn mass(&self, norm: &CostedNorm, region: Option<&Aabb>) -> Result<f64> {
        if norm.group() != &self.group {
            return Err(Error::Validation("norm and chain use different groups".into()));
        }
        let vol = self.grid.h.powi(self.dim as i32);
        let mut m = 0.0;
        for (c, g) in &self.coeffs {
            if region.is_none_or(|r| self.grid.cell_meets_open(c, r)) {
                m += norm.norm(g)? * vol;
            }
        }
        Ok(m)
    }

    /// The part of the chain on cells meeting the open box.
    pub fn restrict(&self, region: &Aabb) -> Chain {
        let mut out = self.clone();
        out.coeffs.retain(|c, _| self.grid.cell_meets_open(c, region));
        out
    }

    /// Sum of all coefficients (the augmentation of a 0-chain).
    pub fn total(&self) -> GroupElement {
        self.coeffs
            .values()
            .fold(self.group.zero(), |acc, g| self.group.add(&acc, g))
    }

    pub fn to_json(&self, norm_ref: Option<&str>) -> String {
        let doc = ChainJson {
            schema_version: CHAIN_SCHEMA_VERSION,
            grid: self.grid.clone(),
            dim: self.dim,
            group: self.group.clone(),
            cells: self
                .coeffs
                .iter()
                .map(|(c, g)| CellJson {
                    base: c.base.clone(),
                    axes: c.axes.clone(),
                    coeff: g.coords().to_vec(),
                })
                .collect(),
            norm_ref: norm_ref.map(str::to_string),
        };
        serde_json::to_string_pretty(&doc).expect("chain serialises")
    }

    /// Parses a chain document; returns the chain and its norm reference.
    pub fn from_json(s: &str) -> Result<(Chain, Option<String>)> {
        let doc: ChainJson = serde_json::from_str(s)?;
        if doc.schema_version != CHAIN_SCHEMA_VERSION {
            return Err(Error::Validation(format!(
                "unsupported chain schema version {}",
                doc.schema_version
            )));
        }
        let grid = CubicalGrid::new(doc.grid.origin, doc.grid.h, doc.grid.extents)?
            .with_holes(doc.grid.holes)?;
        let mut cells = Vec::new();
        for c in doc.cells {
            let (cell, sign) = Cell::oriented(c.base, c.axes)?;
            let g = doc.group.element(&c.coeff)?;
            cells.push((cell, doc.group.scale(sign, &g)));
        }
        Ok((Chain::from_cells(grid, doc.dim, doc.group, cells)?, doc.norm_ref))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellJson {
    base: Vec<i64>,
    axes: Vec<usize>,
    coeff: Vec<i64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChainJson {
    schema_version: u32,
    grid: CubicalGrid,
    dim: usize,
    #[serde(default = "CoefficientGroup::integers")]
    group: CoefficientGroup,
    cells: Vec<CellJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    norm_ref: Option<String>,
}

/// Resolves a named norm: `circle_p<p>` is the loop-energy norm of the
/// round circle at exponent `p`.
pub fn norm_from_ref(name: &str) -> Result<CostedNorm> {
    if let Some(p) = name.strip_prefix("circle_p") {
        let p: f64 = p
            .parse()
            .map_err(|_| Error::Validation(format!("bad exponent in norm reference {name:?}")))?;
        return CostedNorm::circle(p);
    }
    Err(Error::Validation(format!("unknown norm reference {name:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn grid2(n: usize) -> CubicalGrid {
        CubicalGrid::new(vec![0.0, 0.0], 1.0, vec![n, n]).unwrap()
    }

    fn z(d: i64) -> GroupElement {
        CoefficientGroup::integers().element(&[d]).unwrap()
    }

    #[test]
    fn edge_boundary() {
        let g = grid2(2);
        let e = Cell::oriented(vec![0, 0], vec![0]).unwrap().0;
        let c = Chain::from_cells(g, 1, CoefficientGroup::integers(), [(e, z(3))]).unwrap();
        let b = c.boundary().unwrap();
        assert_eq!(b.get(&Cell::vertex(vec![1, 0])), z(3));
        assert_eq!(b.get(&Cell::vertex(vec![0, 0])), z(-3));
    }

    #[test]
    fn boundary_of_boundary_vanishes() {
        let g = CubicalGrid::new(vec![0.0; 3], 0.5, vec![2, 2, 2]).unwrap();
        for q in 1..=3 {
            for cell in g.cells(q) {
                let c = Chain::from_cells(g.clone(), q, CoefficientGroup::integers(), [(cell, z(1))]).unwrap();
                let bb = c.boundary().unwrap();
                if q >= 2 {
                    assert!(bb.boundary().unwrap().is_zero());
                }
            }
        }
    }

    #[test]
    fn zero_chain_has_no_boundary() {
        let c = Chain::zero(grid2(1), 0, CoefficientGroup::integers()).unwrap();
        assert!(matches!(c.boundary(), Err(Error::ZeroChainBoundary)));
    }

    #[test]
    fn orientation_is_canonicalised() {
        let (c, s) = Cell::oriented(vec![0, 0], vec![1, 0]).unwrap();
        assert_eq!(c.axes, vec![0, 1]);
        assert_eq!(s, -1);
    }

    #[test]
    fn mass_with_circle_norm() {
        let g = grid2(3);
        let c = Chain::from_cells(
            g,
            0,
            CoefficientGroup::integers(),
            [(Cell::vertex(vec![1, 1]), z(2)), (Cell::vertex(vec![2, 1]), z(-1))],
        )
        .unwrap();
        let n = CostedNorm::circle(2.0).unwrap();
        assert!((c.mass(&n, None).unwrap() - 3.0 * TAU).abs() < 1e-12);
        let r = Aabb::new(vec![0.5, 0.5], vec![1.5, 1.5]).unwrap();
        assert!((c.mass(&n, Some(&r)).unwrap() - 2.0 * TAU).abs() < 1e-12);
    }

    #[test]
    fn holes_remove_cofaces() {
        let g = grid2(2).with_holes(vec![Cell::vertex(vec![1, 1])]).unwrap();
        assert_eq!(g.cells(2).len(), 0);
        assert_eq!(g.cells(1).len(), 8);
        assert_eq!(g.cells(0).len(), 8);
    }

    #[test]
    fn json_round_trip() {
        let g = grid2(3);
        let c = Chain::from_cells(
            g,
            1,
            CoefficientGroup::integers(),
            [(Cell::oriented(vec![0, 1], vec![1]).unwrap().0, z(2))],
        )
        .unwrap();
        let s = c.to_json(Some("circle_p2"));
        let (back, r) = Chain::from_json(&s).unwrap();
        assert_eq!(back, c);
        assert_eq!(r.as_deref(), Some("circle_p2"));
        assert!(norm_from_ref("circle_p1.9").is_ok());
    }

    #[test]
    fn dual_grid_geometry() {
        let g = grid2(4);
        let d = g.dual().unwrap();
        assert_eq!(d.extents, vec![3, 3]);
        assert_eq!(d.origin, vec![0.5, 0.5]);
    }
}
