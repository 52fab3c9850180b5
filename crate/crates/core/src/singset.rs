//! Singular chains of lattice fields.
//!
//! Given a cubical grid whose vertices are lattice nodes, each 2-cell `K`
//! carries the winding number of the field along `∂K`, and these classes,
//! placed on the dual cells, form the singular chain: dual vertices for
//! planar fields, dual edges in three dimensions. The module also selects
//! grid offsets by sampling and evaluates the cube and mass lower bounds
//! that control the chain.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chains::{Cell, Chain, CubicalGrid};
use crate::coeffgroup::{CoefficientGroup, CostedNorm, GroupElement};
use crate::error::{Error, Result};
use crate::fields::{angle_between, grid_alignment, plaquette_energy, EnergyKernel, Field, Lattice};
use crate::report::Inequality;

/// Codimension of the singular set for circle-valued maps.
pub const K: usize = 2;
/// Edges whose chord is at least `2 - ANTIPODAL_TOL` have no geodesic
/// interpolation.
pub const ANTIPODAL_TOL: f64 = 1e-12;
/// Fewest offsets drawn by [`select_grid_offset`].
pub const MIN_OFFSET_SAMPLES: usize = 64;
pub const SINGSET_SCHEMA_VERSION: u32 = 1;

/// The chain `T` of winding numbers on dual cells.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularChain {
    /// Lives on the dual of `source_grid`, in dimension `d - 2`.
    pub chain: Chain,
    pub source_grid: CubicalGrid,
    /// Nonzero classes of the counted 2-cells, including those on the outer
    /// faces of a three-dimensional grid, which have no dual edge.
    pub per_cell_classes: BTreeMap<Cell, GroupElement>,
}

#[derive(Serialize, Deserialize)]
struct ClassJson {
    base: Vec<i64>,
    axes: Vec<usize>,
    class: i64,
}

impl SingularChain {
    /// Sum of the classes of all counted cells.
    pub fn total_class(&self) -> i64 {
        self.per_cell_classes.values().map(|g| g.coords()[0]).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        let chain: serde_json::Value = serde_json::from_str(&self.chain.to_json(None))?;
        let classes: Vec<ClassJson> = self
            .per_cell_classes
            .iter()
            .map(|(c, g)| ClassJson { base: c.base.clone(), axes: c.axes.clone(), class: g.coords()[0] })
            .collect();
        let doc = serde_json::json!({
            "schema_version": SINGSET_SCHEMA_VERSION,
            "source_grid": self.source_grid,
            "classes": classes,
            "chain": chain,
        });
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

fn integer(d: i64) -> GroupElement {
    CoefficientGroup::integers().element(&[d]).expect("integers accept any coordinate")
}

/// Lattice nodes seen from an aligned grid.
struct Nodes<'a> {
    f: &'a Field,
    m: usize,
    offset: Vec<i64>,
}

impl<'a> Nodes<'a> {
    fn new(f: &'a Field, grid: &CubicalGrid) -> Result<Self> {
        let lat = f.lattice();
        let (m, offset) = grid_alignment(lat, grid)?;
        for i in 0..lat.dim() {
            let top = offset[i] + (m * grid.extents[i]) as i64;
            if offset[i] < 0 || top >= lat.dims[i] as i64 {
                return Err(Error::Validation(format!("grid leaves the lattice along axis {i}")));
            }
        }
        Ok(Self { f, m, offset })
    }

    /// Lattice index of the fine position `t` (in lattice steps) from the
    /// base vertex of `c`.
    fn at(&self, c: &Cell, t: &[(usize, usize)]) -> usize {
        let lat = self.f.lattice();
        let mut ix: Vec<usize> = (0..lat.dim())
            .map(|i| (self.offset[i] + self.m as i64 * c.base[i]) as usize)
            .collect();
        for &(axis, steps) in t {
            ix[axis] += steps;
        }
        lat.index(&ix)
    }

    /// Nodes along `∂K` for a 2-cell with axes `(i, j)`, counterclockwise in
    /// the `(i, j)` plane, starting at the base vertex.
    fn boundary_loop(&self, c: &Cell) -> Vec<usize> {
        let (i, j) = (c.axes[0], c.axes[1]);
        let m = self.m;
        let mut out = Vec::with_capacity(4 * m);
        for s in 0..m {
            out.push(self.at(c, &[(i, s)]));
        }
        for s in 0..m {
            out.push(self.at(c, &[(i, m), (j, s)]));
        }
        for s in 0..m {
            out.push(self.at(c, &[(i, m - s), (j, m)]));
        }
        for s in 0..m {
            out.push(self.at(c, &[(j, m - s)]));
        }
        out
    }

    /// Whether some node of the closed 2-cell lies in the domain.
    fn meets_domain(&self, c: &Cell) -> bool {
        let (i, j) = (c.axes[0], c.axes[1]);
        let lat = self.f.lattice();
        (0..=self.m).any(|s| {
            (0..=self.m).any(|t| self.f.domain().contains(&lat.position(self.at(c, &[(i, s), (j, t)]))))
        })
    }

    /// Winding number of the field along `∂c`.
    fn winding(&self, c: &Cell) -> Result<i64> {
        let u = self.f.values();
        let ring = self.boundary_loop(c);
        let mut w = 0.0;
        for k in 0..ring.len() {
            let (a, b) = (u[ring[k]], u[ring[(k + 1) % ring.len()]]);
            let chord2 = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
            if chord2.sqrt() >= 2.0 - ANTIPODAL_TOL {
                return Err(Error::GridTooCoarse { cell: c.base.clone() });
            }
            w += angle_between(a, b);
        }
        let d = (w / (2.0 * PI)).round();
        let residual = (w / (2.0 * PI) - d).abs();
        if residual >= 1e-9 {
            return Err(Error::Validation(format!("winding along {c:?} is not an integer (residual {residual:e})")));
        }
        Ok(d as i64)
    }
}

/// Orientation of the dual edge of a plaquette with axes `(i, j)` in
/// three dimensions: the normal completes `(i, j)` to a positive frame.
fn dual_sign(axes: &[usize]) -> i64 {
    match (axes[0], axes[1]) {
        (0, 2) => -1,
        _ => 1,
    }
}

/// The dual cell of a 2-cell, if it lies in the dual grid.
fn dual_cell(c: &Cell, grid: &CubicalGrid) -> Option<(Cell, i64)> {
    let d = grid.dim();
    if d == 2 {
        return Some((Cell::vertex(c.base.clone()), 1));
    }
    let l = (0..3).find(|a| !c.axes.contains(a)).expect("a plaquette misses one axis");
    if c.base[l] < 1 || c.base[l] > grid.extents[l] as i64 - 1 {
        return None;
    }
    let mut base = c.base.clone();
    base[l] -= 1;
    Some((Cell { base, axes: vec![l] }, dual_sign(&c.axes)))
}

/// Extracts the singular chain of `f` on `grid`, counting the 2-cells that
/// meet the domain.
pub fn extract_tp(f: &Field, grid: &CubicalGrid) -> Result<SingularChain> {
    let d = f.lattice().dim();
    if !(2..=3).contains(&d) {
        return Err(Error::Unsupported(format!("extraction in dimension {d}")));
    }
    let nodes = Nodes::new(f, grid)?;
    let dual = grid.dual()?;
    let mut chain = Chain::zero(dual, d - K, CoefficientGroup::integers())?;
    let mut classes = BTreeMap::new();
    let mut counted = BTreeSet::new();
    for c in grid.cells(K) {
        if !nodes.meets_domain(&c) {
            continue;
        }
        let w = nodes.winding(&c)?;
        counted.insert(c.clone());
        if w == 0 {
            continue;
        }
        if let Some((dc, sign)) = dual_cell(&c, grid) {
            chain.add_to(&dc, &integer(sign * w))?;
        }
        classes.insert(c, integer(w));
    }
    if d == 3 {
        check_closed(&chain, grid, &counted)?;
    }
    Ok(SingularChain { chain, source_grid: grid.clone(), per_cell_classes: classes })
}

/// In three dimensions the dual chain has no boundary at dual vertices whose
/// six faces are all counted and interior.
fn check_closed(chain: &Chain, grid: &CubicalGrid, counted: &BTreeSet<Cell>) -> Result<()> {
    if chain.is_zero() {
        return Ok(());
    }
    let b = chain.boundary()?;
    for (v, g) in b.coeffs() {
        if g.is_zero() {
            continue;
        }
        let interior = (0..3).all(|l| v.base[l] >= 1 && v.base[l] + 2 <= grid.extents[l] as i64);
        let all_counted = (0..3).all(|l| {
            let axes: Vec<usize> = (0..3).filter(|&a| a != l).collect();
            (0..2).all(|side| {
                let mut base = v.base.clone();
                base[l] += side;
                counted.contains(&Cell { base, axes: axes.clone() })
            })
        });
        if interior && all_counted {
            return Err(Error::Validation(format!("extracted chain has boundary {g} at dual vertex {:?}", v.base)));
        }
    }
    Ok(())
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `|grad u|^p` at every node, from centred angle differences (one-sided
/// at the edge of the lattice).
fn node_gradient_p(f: &Field) -> Vec<f64> {
    let lat = f.lattice();
    let u = f.values();
    let s = lat.strides();
    let p = f.p();
    (0..lat.len())
        .map(|i| {
            let ix = lat.multi_index(i);
            let mut g2 = 0.0;
            for a in 0..lat.dim() {
                let lo = if ix[a] > 0 { i - s[a] } else { i };
                let hi = if ix[a] + 1 < lat.dims[a] { i + s[a] } else { i };
                let steps = ((hi - lo) / s[a]) as f64;
                if steps > 0.0 {
                    let g = angle_between(u[lo], u[hi]) / (steps * lat.h);
                    g2 += g * g;
                }
            }
            g2.powf(0.5 * p)
        })
        .collect()
}

/// Grid with spacing `h` whose origin is the lattice node `offset`.
pub fn offset_grid(lat: &Lattice, h: f64, offset: &[usize]) -> Result<CubicalGrid> {
    let m = refinement(lat, h)?;
    if offset.len() != lat.dim() || offset.iter().any(|&o| o >= m) {
        return Err(Error::Parameter(format!("offset {offset:?} must have {} entries below {m}", lat.dim())));
    }
    let extents: Vec<usize> = (0..lat.dim()).map(|i| (lat.dims[i] - 1 - offset[i]) / m).collect();
    if extents.contains(&0) {
        return Err(Error::Parameter(format!("grid spacing {h} exceeds the lattice")));
    }
    let origin = (0..lat.dim()).map(|i| lat.origin[i] + offset[i] as f64 * lat.h).collect();
    CubicalGrid::new(origin, h, extents)
}

fn refinement(lat: &Lattice, h: f64) -> Result<usize> {
    let ratio = h / lat.h;
    let m = ratio.round();
    if m < 1.0 || (ratio - m).abs() > 1e-9 * ratio {
        return Err(Error::Parameter(format!("grid spacing {h} is not a multiple of the lattice spacing {}", lat.h)));
    }
    Ok(m as usize)
}

/// Energies of one grid offset, by nodal quadrature over the lattice box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetSample {
    pub offset: Vec<usize>,
    /// `h^n D_p(u, R_{k,L})`: the 2-cells whose duals are parallel to `L`.
    pub f_plane: f64,
    /// `h^{d-j} D_p(u, R_j)` for `j = 0..=d`.
    pub f_skeleton: Vec<f64>,
    /// No antipodal lattice edge on the 1-skeleton.
    pub continuous: bool,
    pub admissible: bool,
    pub violated: Vec<String>,
    /// Largest ratio of a left side to its bound.
    pub worst_ratio: f64,
}

/// Precomputed data shared by all offsets.
struct OffsetData {
    m: usize,
    h: f64,
    delta: f64,
    plane: Option<usize>,
    grad_p: Vec<f64>,
    energy: f64,
    /// `(node, axis)` of edges with antipodal ends.
    antipodal: Vec<(usize, usize)>,
}

impl OffsetData {
    fn new(f: &Field, h: f64, delta: f64, plane: Option<usize>) -> Result<Self> {
        let lat = f.lattice();
        let d = lat.dim();
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Parameter(format!("delta must lie in (0, 1), got {delta}")));
        }
        match (d, plane) {
            (2, None) => {}
            (3, Some(l)) if l < 3 => {}
            _ => {
                return Err(Error::Parameter(format!(
                    "the line L is given by an axis in three dimensions and omitted in two, got {plane:?}"
                )))
            }
        }
        let m = refinement(lat, h)?;
        let grad_p = node_gradient_p(f);
        let energy = lat.h.powi(d as i32) * grad_p.iter().sum::<f64>();
        let s = lat.strides();
        let u = f.values();
        let mut antipodal = Vec::new();
        for i in 0..lat.len() {
            let ix = lat.multi_index(i);
            for a in 0..d {
                if ix[a] + 1 < lat.dims[a] {
                    let (x, y) = (u[i], u[i + s[a]]);
                    if ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt() >= 2.0 - ANTIPODAL_TOL {
                        antipodal.push((i, a));
                    }
                }
            }
        }
        Ok(Self { m, h, delta, plane, grad_p, energy, antipodal })
    }

    /// `C_j = (1 + delta) d binom(d, j) / delta`, the constant of the
    /// skeleton bound given by the averaging argument.
    fn constant(&self, d: usize, j: usize) -> f64 {
        (1.0 + self.delta) * d as f64 * binomial(d, j) / self.delta
    }

    fn sample(&self, lat: &Lattice, offset: &[usize]) -> OffsetSample {
        let d = lat.dim();
        let n = d - K;
        let hf = lat.h;
        let on_plane = |ix: &[usize], a: usize| (ix[a] + self.m - offset[a]) % self.m == 0;
        let mut sums = vec![0.0; d + 1];
        let mut plane_sum = 0.0;
        for (i, g) in self.grad_p.iter().enumerate() {
            if *g == 0.0 {
                continue;
            }
            let ix = lat.multi_index(i);
            let z = (0..d).filter(|&a| on_plane(&ix, a)).count();
            for (j, s) in sums.iter_mut().enumerate() {
                *s += binomial(z, d - j) * g;
            }
            if self.plane.is_none_or(|l| on_plane(&ix, l)) {
                plane_sum += g;
            }
        }
        let f_skeleton: Vec<f64> = (0..=d)
            .map(|j| self.h.powi((d - j) as i32) * hf.powi(j as i32) * sums[j])
            .collect();
        let f_plane = self.h.powi(n as i32) * hf.powi(K as i32) * plane_sum;
        let continuous = self.antipodal.iter().all(|&(i, a)| {
            let ix = lat.multi_index(i);
            !(0..d).filter(|&b| b != a).all(|b| on_plane(&ix, b))
        });
        let mut violated = Vec::new();
        let mut worst: f64 = 0.0;
        let tol = 1e-12 * self.energy;
        let bound = (1.0 + self.delta) * self.energy;
        if f_plane > bound + tol {
            violated.push(format!("plane bound: {f_plane} > (1 + delta) D_p = {bound}"));
        }
        if bound > 0.0 {
            worst = worst.max(f_plane / bound);
        }
        for (j, fj) in f_skeleton.iter().enumerate() {
            let b = self.constant(d, j) * self.energy;
            if *fj > b + tol {
                violated.push(format!("skeleton bound j = {j}: {fj} > {b}"));
            }
            if b > 0.0 {
                worst = worst.max(fj / b);
            }
        }
        if !continuous {
            violated.push("antipodal edge on the 1-skeleton".into());
            worst = f64::INFINITY;
        }
        OffsetSample {
            offset: offset.to_vec(),
            f_plane,
            f_skeleton,
            continuous,
            admissible: violated.is_empty(),
            violated,
            worst_ratio: worst,
        }
    }
}

/// Evaluates the offset conditions for one offset.
pub fn evaluate_offset(f: &Field, h: f64, delta: f64, plane: Option<usize>, offset: &[usize]) -> Result<OffsetSample> {
    let data = OffsetData::new(f, h, delta, plane)?;
    offset_grid(f.lattice(), h, offset)?;
    Ok(data.sample(f.lattice(), offset))
}

/// The chosen offset with the sampled means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetSelection {
    pub seed: u64,
    pub h: f64,
    pub delta: f64,
    pub plane: Option<usize>,
    pub offset: Vec<usize>,
    pub grid: CubicalGrid,
    /// `D_p(u, U')` by nodal quadrature over the lattice box.
    pub energy: f64,
    /// Sample mean of `f_plane`; its expectation is `energy`.
    pub mean_plane: f64,
    /// Sample means of `f_skeleton`; their expectations are
    /// `binom(d, j) energy`.
    pub mean_skeleton: Vec<f64>,
    /// Largest relative deviation of the sample means from their
    /// expectations.
    pub mean_error: f64,
    /// `mean_error <= 0.05`.
    pub means_agree: bool,
    /// Constants `C_j` of the skeleton bounds.
    pub constants: Vec<f64>,
    pub inequalities: Vec<Inequality>,
    pub samples: Vec<OffsetSample>,
}

/// Relative tolerance for the sampled mean identities.
pub const MEAN_TOL: f64 = 0.05;

/// Draws `samples` (at least 64) lattice-node offsets for a grid of spacing
/// `h` and returns the first one satisfying the plane bound
/// `h^n D_p(u, R_{k,L}) <= (1 + delta) D_p(u, U')`, the skeleton bounds
/// `h^{d-j} D_p(u, R_j) <= C_j D_p(u, U')` and continuity on the
/// 1-skeleton.
pub fn select_grid_offset(
    f: &Field,
    h: f64,
    delta: f64,
    plane: Option<usize>,
    samples: usize,
    seed: u64,
) -> Result<OffsetSelection> {
    let data = OffsetData::new(f, h, delta, plane)?;
    let lat = f.lattice();
    let d = lat.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut drawn = Vec::with_capacity(samples.max(MIN_OFFSET_SAMPLES));
    for _ in 0..samples.max(MIN_OFFSET_SAMPLES) {
        let offset: Vec<usize> = (0..d).map(|_| rng.gen_range(0..data.m)).collect();
        drawn.push(data.sample(lat, &offset));
    }
    let count = drawn.len() as f64;
    let mean_plane = drawn.iter().map(|s| s.f_plane).sum::<f64>() / count;
    let mean_skeleton: Vec<f64> = (0..=d)
        .map(|j| drawn.iter().map(|s| s.f_skeleton[j]).sum::<f64>() / count)
        .collect();
    let rel = |got: f64, want: f64| if want > 0.0 { (got / want - 1.0).abs() } else { got.abs() };
    let mut mean_error = rel(mean_plane, data.energy);
    for (j, m) in mean_skeleton.iter().enumerate() {
        mean_error = mean_error.max(rel(*m, binomial(d, j) * data.energy));
    }
    let Some(chosen) = drawn.iter().find(|s| s.admissible) else {
        let best = drawn
            .iter()
            .min_by(|a, b| a.worst_ratio.total_cmp(&b.worst_ratio))
            .expect("at least one sample");
        return Err(Error::NoAdmissibleOffset {
            best_offset: best.offset.clone(),
            violated: best.violated.join("; "),
        });
    };
    let constants: Vec<f64> = (0..=d).map(|j| data.constant(d, j)).collect();
    let mut inequalities = vec![Inequality::new(
        "grid selection: plane bound h^n D_p(u, R_kL) <= (1 + delta) D_p(u, U')",
        chosen.f_plane,
        (1.0 + delta) * data.energy,
        1e-12,
    )];
    for j in 0..=d {
        inequalities.push(Inequality::new(
            format!("grid selection: skeleton bound h^(d-j) D_p(u, R_j) <= C_j D_p(u, U'), j = {j}"),
            chosen.f_skeleton[j],
            constants[j] * data.energy,
            1e-12,
        ));
    }
    Ok(OffsetSelection {
        seed,
        h,
        delta,
        plane,
        offset: chosen.offset.clone(),
        grid: offset_grid(lat, h, &chosen.offset)?,
        energy: data.energy,
        mean_plane,
        mean_skeleton,
        mean_error,
        means_agree: mean_error <= MEAN_TOL,
        constants,
        inequalities,
        samples: drawn,
    })
}

/// Both sides of the cube lower bound for one 2-cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeBound {
    pub class: i64,
    /// `|gamma|_k`.
    pub norm: f64,
    /// Edge length of the cell.
    pub h: f64,
    /// `D_p(u, K)`.
    pub energy_cell: f64,
    /// `D_p(u, ∂K)`.
    pub energy_boundary: f64,
    pub inequality: Inequality,
}

/// Evaluates `|g|/(k-p) - C |g| (log(|g|/r) + 1) <= h^{p-k} D_p(u, K) +
/// h^{1+p-k} r D_p(u, ∂K)` for the class `g` of `f` on `∂K`, with `|.|`
/// the norm `norm_k`. The boundary term carries the power of `h` that makes
/// the inequality scale invariant.
pub fn cube_lower_bound(
    f: &Field,
    grid: &CubicalGrid,
    cell: &Cell,
    r: f64,
    c: f64,
    norm_k: &CostedNorm,
) -> Result<CubeBound> {
    if cell.dim() != K || !grid.contains(cell) {
        return Err(Error::Parameter(format!("{cell:?} is not a 2-cell of the grid")));
    }
    if !(r > 0.0) {
        return Err(Error::Parameter(format!("collar r must be positive, got {r}")));
    }
    let nodes = Nodes::new(f, grid)?;
    let class = nodes.winding(cell)?;
    let p = f.p();
    let k = K as f64;
    let hf = f.lattice().h;
    let u = f.values();
    let (i, j) = (cell.axes[0], cell.axes[1]);
    let mut energy_cell = 0.0;
    for s in 0..nodes.m {
        for t in 0..nodes.m {
            let corner = |a: usize, b: usize| u[nodes.at(cell, &[(i, s + a), (j, t + b)])];
            energy_cell += plaquette_energy([corner(0, 0), corner(1, 0), corner(0, 1), corner(1, 1)], hf, p);
        }
    }
    let ring = nodes.boundary_loop(cell);
    let energy_boundary: f64 = (0..ring.len())
        .map(|q| hf * (angle_between(u[ring[q]], u[ring[(q + 1) % ring.len()]]).abs() / hf).powf(p))
        .sum();
    let norm = norm_k.norm(&integer(class))?;
    let lhs = if class == 0 { 0.0 } else { norm / (k - p) - c * norm * ((norm / r).ln() + 1.0) };
    let h = grid.h;
    let rhs = h.powf(p - k) * energy_cell + h.powf(1.0 + p - k) * r * energy_boundary;
    Ok(CubeBound {
        class,
        norm,
        h,
        energy_cell,
        energy_boundary,
        inequality: Inequality::exact("cube lower bound: class price against cell and boundary energy", lhs, rhs),
    })
}

/// Mass bound for an extracted chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassBoundReport {
    pub p: f64,
    pub k: usize,
    pub n: usize,
    pub delta: f64,
    pub r: f64,
    pub c: f64,
    /// `a(p) = (k/p)(3(p - k - n) - 1)`.
    pub a_p: f64,
    /// `c_{r,delta}(p) = C (k-p) (a(p) log(k-p) + log(delta^{-k/p} / r) + 1)`.
    pub c_r_delta: f64,
    /// `c_{r,delta}(p) < 1`; otherwise the bound says nothing.
    pub regime_reached: bool,
    /// `M_k(T)`.
    pub mass: f64,
    /// `(k-p)^{-3(k-p)}`.
    pub factor: f64,
    /// `D_p(u, U')` by nodal quadrature over the lattice box.
    pub energy: f64,
    /// `h^n D_p(u, R_k)` and `h^{n+1} D_p(u, R_{k-1})` on the chain's grid.
    pub f_k: f64,
    pub f_k_minus_1: f64,
    /// `(1 - c) M <= (k-p)^{1-3(k-p)} (f_k + r f_{k-1})`.
    pub skeleton_form: Inequality,
    /// `(1 - c) M <= (k-p)^{1-3(k-p)} (C_k + r C_{k-1}) D_p(u, U')`, whose
    /// right side is `delta^{-1} (1 + r)` times constants.
    pub inequality: Inequality,
}

/// `(k-p)^{-3(k-p)}`.
pub fn mass_factor(k: f64, p: f64) -> f64 {
    let x = k - p;
    (-3.0 * x * x.ln()).exp()
}

/// Reports the mass bound for `t` extracted from `f`. When
/// `c_{r,delta}(p) >= 1` the left side is not positive and the report says
/// the regime is not reached.
pub fn mass_bound_report(
    t: &SingularChain,
    f: &Field,
    delta: f64,
    r: f64,
    c: f64,
    norm_k: &CostedNorm,
) -> Result<MassBoundReport> {
    let lat = f.lattice();
    let d = lat.dim();
    let grid = &t.source_grid;
    let (m, offset) = grid_alignment(lat, grid)?;
    let offset: Vec<usize> = offset.iter().map(|o| o.rem_euclid(m as i64) as usize).collect();
    let plane = if d == 3 { Some(0) } else { None };
    let data = OffsetData::new(f, grid.h, delta, plane)?;
    let sample = data.sample(lat, &offset);
    let p = f.p();
    let k = K as f64;
    let n = d - K;
    let x = k - p;
    if !(x > 0.0) {
        return Err(Error::Parameter(format!("need p < k, got p = {p}")));
    }
    let a_p = k / p * (3.0 * (p - k - n as f64) - 1.0);
    let c_r_delta = c * x * (a_p * x.ln() + (delta.powf(-k / p) / r).ln() + 1.0);
    let mass = t.chain.mass(norm_k, None)?;
    let factor = mass_factor(k, p);
    let lhs = (1.0 - c_r_delta) * mass;
    let f_k = sample.f_skeleton[K];
    let f_k_minus_1 = sample.f_skeleton[K - 1];
    let scale = factor * x;
    Ok(MassBoundReport {
        p,
        k: K,
        n,
        delta,
        r,
        c,
        a_p,
        c_r_delta,
        regime_reached: c_r_delta < 1.0,
        mass,
        factor,
        energy: data.energy,
        f_k,
        f_k_minus_1,
        skeleton_form: Inequality::exact("mass bound through the skeleton energies", lhs, scale * (f_k + r * f_k_minus_1)),
        inequality: Inequality::exact(
            "mass bound for the extracted chain",
            lhs,
            scale * (data.constant(d, K) + r * data.constant(d, K - 1)) * data.energy,
        ),
    })
}

/// Cell energy of the whole lattice, the reference `D_p(u, U')` for
/// reports that use the lattice box as `U'`.
pub fn lattice_energy(f: &Field) -> f64 {
    let cells = f.lattice().cells();
    EnergyKernel::with_cells(f, f.p(), cells).eval(f.values(), None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Domain, Lattice};

    fn disk_field(n: usize, phase: impl Fn(&[f64]) -> f64) -> Field {
        let lat = Lattice::cell_centered(-1.0, 1.0, n, 2).unwrap();
        Field::from_fn(lat, Domain::unit_disk(), 1.9, |x| {
            let t = phase(x);
            [t.cos(), t.sin()]
        })
        .unwrap()
    }

    #[test]
    fn vortex_is_found_in_its_cell() {
        let f = disk_field(16, |x| x[1].atan2(x[0]));
        let g = offset_grid(f.lattice(), f.lattice().h, &[0, 0]).unwrap();
        let t = extract_tp(&f, &g).unwrap();
        assert_eq!(t.total_class(), 1);
        assert_eq!(t.per_cell_classes.len(), 1);
        let (cell, _) = t.per_cell_classes.iter().next().unwrap();
        let lo = g.cell_lower(cell);
        assert!(lo.iter().all(|&v| v < 0.0 && v + g.h > 0.0));
        assert_eq!(t.chain.total(), integer(1));
    }

    #[test]
    fn constant_field_has_zero_chain() {
        let f = disk_field(12, |_| 0.4);
        let g = offset_grid(f.lattice(), 2.0 * f.lattice().h, &[1, 0]).unwrap();
        assert!(extract_tp(&f, &g).unwrap().chain.is_zero());
    }

    #[test]
    fn antipodal_edge_is_rejected() {
        let f = disk_field(8, |x| if x[0] < 0.0 { 0.0 } else { PI });
        let g = offset_grid(f.lattice(), f.lattice().h, &[0, 0]).unwrap();
        assert!(matches!(extract_tp(&f, &g), Err(Error::GridTooCoarse { .. })));
    }

    #[test]
    fn three_dimensional_vortex_line() {
        let lat = Lattice::cell_centered(-1.0, 1.0, 8, 3).unwrap();
        let dom = Domain::Box { lo: vec![-1.0; 3], hi: vec![1.0; 3] };
        // A line along the y axis: winding in the (z, x) plane.
        let f = Field::from_fn(lat, dom, 1.9, |x| {
            let t = x[0].atan2(x[2]);
            [t.cos(), t.sin()]
        })
        .unwrap();
        let g = offset_grid(f.lattice(), f.lattice().h, &[0, 0, 0]).unwrap();
        let t = extract_tp(&f, &g).unwrap();
        assert_eq!(t.chain.dim(), 1);
        let coeffs = t.chain.coeffs();
        assert_eq!(coeffs.len(), 6);
        for (c, v) in coeffs {
            assert_eq!(c.axes, vec![1]);
            assert_eq!(*v, integer(1));
        }
    }

    #[test]
    fn mass_factor_at_one_hundredth() {
        let x: f64 = 0.01;
        let oracle = x.powf(-3.0 * x);
        assert!((mass_factor(2.0, 1.99) - oracle).abs() < 1e-14);
        assert!((mass_factor(2.0, 1.99) - 1.1482).abs() < 1e-4);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(3, 2), 3.0);
        assert_eq!(binomial(2, 3), 0.0);
        assert_eq!(binomial(3, 0), 1.0);
    }
}
