//! Flat norms, fillings, cobordisms and mass-minimising representatives.
//!
//! With a norm that is a weighted sum of absolute values of free
//! coordinates, every problem splits into one integer problem per
//! coordinate: a min-cost flow for 0-chains and a linear program otherwise,
//! followed by an integrality check. Torsion and non-separable norms go
//! through exact integer algebra or exhaustive search.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::search::Problem;
use super::{Aabb, Cell, Chain, CubicalGrid};
use crate::coeffgroup::{CostedNorm, GroupElement};
use crate::error::{Error, Result};
use crate::flow::{FlowNetwork, UNBOUNDED};
use crate::intlin::solve_integer;
use crate::lp::{self, LinearProgram, LpStatus};

/// Which solver produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlatMethod {
    MinCostFlow,
    LinearProgram,
    Exhaustive,
}

/// Whether the integer optimum was certified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum Integrality {
    Exact,
    /// The relaxation's optimum could not be rounded without loss.
    Flagged { lp_value: f64, rounded_value: f64 },
}

/// `S = P + dQ` realising the flat norm `M(P) + M(Q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatDecomposition {
    pub p: Chain,
    /// `None` for top-dimensional chains.
    pub q: Option<Chain>,
    pub value: f64,
    pub method: FlatMethod,
    pub integrality: Integrality,
}

type Scalar = BTreeMap<Cell, i64>;

fn coordinate(s: &Chain, i: usize) -> Scalar {
    s.coeffs()
        .iter()
        .filter(|(_, g)| g.coords()[i] != 0)
        .map(|(c, g)| (c.clone(), g.coords()[i]))
        .collect()
}

fn put_coordinate(chain: &mut Chain, i: usize, values: &Scalar) -> Result<()> {
    let r = chain.group().rank();
    for (c, &v) in values {
        if v != 0 {
            let mut e = vec![0; r];
            e[i] = v;
            let g = chain.group().element(&e)?;
            chain.add_to(c, &g)?;
        }
    }
    Ok(())
}

fn scalar_boundary(q: &Scalar) -> Scalar {
    let mut out = Scalar::new();
    for (c, &v) in q {
        for (f, s) in c.faces() {
            *out.entry(f).or_insert(0) += s * v;
        }
    }
    out.retain(|_, v| *v != 0);
    out
}

fn max_coeff(s: &Chain) -> i64 {
    s.coeffs()
        .values()
        .flat_map(|g| g.coords().iter().map(|c| c.abs()))
        .max()
        .unwrap_or(0)
}

fn check_group(s: &Chain, norm: &CostedNorm) -> Result<()> {
    if s.group() != norm.group() {
        return Err(Error::Validation("norm and chain use different groups".into()));
    }
    Ok(())
}

/// Min-cost flow on the vertex-edge graph of the grid restricted to
/// `within`. Solves `S = P + dQ` for a scalar 0-chain with `P` charged by
/// `vertex_cost` (no `P` at all when `None`) and `Q` by `edge_cost`.
fn flow_zero_chain(
    grid: &CubicalGrid,
    s: &Scalar,
    within: Option<&Aabb>,
    vertex_cost: Option<&dyn Fn(&Cell) -> f64>,
    edge_cost: &dyn Fn(&Cell) -> f64,
) -> Result<Option<(Scalar, Scalar)>> {
    let verts = grid.cells_within(0, within);
    let edges = grid.cells_within(1, within);
    let index: BTreeMap<&Cell, usize> = verts.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let n = verts.len();
    let mut net = FlowNetwork::new(n + 1);
    let mut supply = vec![0i64; n + 1];
    for (c, &v) in s {
        let Some(&i) = index.get(c) else {
            return Err(Error::Validation(format!("chain cell {c:?} lies outside the region")));
        };
        supply[i] += v;
    }
    let total: i64 = supply.iter().sum();
    match vertex_cost {
        Some(_) => supply[n] = -total,
        None if total != 0 => return Ok(None),
        None => {}
    }
    let mut edge_arcs = Vec::with_capacity(edges.len());
    for e in &edges {
        let a = index[&Cell::vertex(e.base.clone())];
        let mut top = e.base.clone();
        top[e.axes[0]] += 1;
        let b = index[&Cell::vertex(top)];
        let c = edge_cost(e);
        edge_arcs.push((net.add_arc(a, b, UNBOUNDED, c), net.add_arc(b, a, UNBOUNDED, c)));
    }
    let mut dump_arcs = Vec::new();
    if let Some(vc) = vertex_cost {
        for (i, v) in verts.iter().enumerate() {
            let c = vc(v);
            dump_arcs.push((net.add_arc(i, n, UNBOUNDED, c), net.add_arc(n, i, UNBOUNDED, c)));
        }
    }
    let sol = match net.min_cost_flow(&supply) {
        Ok(s) => s,
        Err(Error::Validation(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let mut p = Scalar::new();
    for (i, &(out, back)) in dump_arcs.iter().enumerate() {
        let v = sol.flow[out] - sol.flow[back];
        if v != 0 {
            p.insert(verts[i].clone(), v);
        }
    }
    let mut q = Scalar::new();
    for (k, &(fwd, back)) in edge_arcs.iter().enumerate() {
        let v = sol.flow[back] - sol.flow[fwd];
        if v != 0 {
            q.insert(edges[k].clone(), v);
        }
    }
    Ok(Some((p, q)))
}

struct LpOutcome {
    p: Scalar,
    q: Scalar,
    lp_value: f64,
    rounded_value: f64,
    exact: bool,
}

/// `min sum pc|P| + sum qc|Q|` subject to `P + dQ = S` on `p_cells`. A
/// `None` cost forbids `P` on that cell.
fn lp_chain(
    s: &Scalar,
    p_cells: &[(Cell, Option<f64>)],
    q_cells: &[(Cell, f64)],
) -> Result<Option<LpOutcome>> {
    let row: BTreeMap<&Cell, usize> = p_cells.iter().enumerate().map(|(i, (c, _))| (c, i)).collect();
    for c in s.keys() {
        if !row.contains_key(c) {
            return Err(Error::Validation(format!("chain cell {c:?} lies outside the region")));
        }
    }
    let mut p_var = vec![None; p_cells.len()];
    let mut nvar = 0;
    for (i, (_, cost)) in p_cells.iter().enumerate() {
        if cost.is_some() {
            p_var[i] = Some(nvar);
            nvar += 2;
        }
    }
    let q_base = nvar;
    nvar += 2 * q_cells.len();
    let mut prog = LinearProgram::new(nvar);
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); p_cells.len()];
    for (i, (_, cost)) in p_cells.iter().enumerate() {
        if let (Some(v), Some(c)) = (p_var[i], cost) {
            prog.cost[v] = *c;
            prog.cost[v + 1] = *c;
            rows[i].push((v, 1.0));
            rows[i].push((v + 1, -1.0));
        }
    }
    for (j, (c, cost)) in q_cells.iter().enumerate() {
        let v = q_base + 2 * j;
        prog.cost[v] = *cost;
        prog.cost[v + 1] = *cost;
        for (f, sign) in c.faces() {
            let Some(&r) = row.get(&f) else {
                return Err(Error::Validation(format!(
                    "face {f:?} of {c:?} is missing from the region"
                )));
            };
            rows[r].push((v, sign as f64));
            rows[r].push((v + 1, -(sign as f64)));
        }
    }
    for (i, r) in rows.into_iter().enumerate() {
        let rhs = s.get(&p_cells[i].0).copied().unwrap_or(0) as f64;
        prog.add_row(r, rhs);
    }
    let sol = lp::solve(&prog)?;
    match sol.status {
        LpStatus::Infeasible => return Ok(None),
        LpStatus::Unbounded => return Err(Error::Lp("flat norm relaxation is unbounded".into())),
        LpStatus::Optimal => {}
    }
    let mut q = Scalar::new();
    let mut frac = 0.0f64;
    for (j, (c, _)) in q_cells.iter().enumerate() {
        let v = sol.x[q_base + 2 * j] - sol.x[q_base + 2 * j + 1];
        let r = v.round();
        frac = frac.max((v - r).abs());
        if r != 0.0 {
            q.insert(c.clone(), r as i64);
        }
    }
    let dq = scalar_boundary(&q);
    let mut p = Scalar::new();
    let mut feasible = true;
    let mut rounded_value = 0.0;
    for (i, (c, cost)) in p_cells.iter().enumerate() {
        let v = s.get(c).copied().unwrap_or(0) - dq.get(c).copied().unwrap_or(0);
        if v != 0 {
            match cost {
                Some(w) => {
                    rounded_value += w * v.abs() as f64;
                    p.insert(c.clone(), v);
                }
                None => feasible = false,
            }
        }
        let _ = i;
    }
    for (j, (c, w)) in q_cells.iter().enumerate() {
        let _ = j;
        rounded_value += w * q.get(c).map_or(0, |v| v.abs()) as f64;
    }
    let exact = feasible
        && frac < 1e-6
        && (rounded_value - sol.objective).abs() <= 1e-7 * sol.objective.abs().max(1.0);
    if !feasible {
        rounded_value = f64::INFINITY;
    }
    Ok(Some(LpOutcome {
        p,
        q,
        lp_value: sol.objective,
        rounded_value,
        exact,
    }))
}

fn free_weights(s: &Chain, norm: &CostedNorm) -> Option<Vec<f64>> {
    norm.linear_weights(max_coeff(s).max(3))
}

/// The flat norm `F(S) = min M(P) + M(Q)` over `S = P + dQ` on the grid of
/// `S`. With `relative_to = Some(U)`, masses only count cells meeting the
/// open box `U`.
pub fn flat_norm(s: &Chain, norm: &CostedNorm, relative_to: Option<&Aabb>) -> Result<FlatDecomposition> {
    check_group(s, norm)?;
    let grid = s.grid();
    let q = s.dim();
    let h = grid.h;
    let top = q == grid.dim();
    let in_u = |c: &Cell| relative_to.is_none_or(|u| grid.cell_meets_open(c, u));
    if top {
        return Ok(FlatDecomposition {
            p: s.clone(),
            q: None,
            value: s.mass(norm, relative_to)?,
            method: FlatMethod::LinearProgram,
            integrality: Integrality::Exact,
        });
    }
    let mut p_chain = Chain::zero(grid.clone(), q, s.group().clone())?;
    let mut q_chain = Chain::zero(grid.clone(), q + 1, s.group().clone())?;
    if let Some(w) = free_weights(s, norm) {
        let mut method = FlatMethod::LinearProgram;
        let mut lp_total = 0.0;
        let mut rounded_total = 0.0;
        let mut exact = true;
        for (i, wi) in w.iter().enumerate() {
            let si = coordinate(s, i);
            if si.is_empty() {
                continue;
            }
            let (pi, qi) = if q == 0 {
                method = FlatMethod::MinCostFlow;
                let vc = |c: &Cell| if in_u(c) { *wi } else { 0.0 };
                let ec = |c: &Cell| if in_u(c) { wi * h } else { 0.0 };
                flow_zero_chain(grid, &si, None, Some(&vc), &ec)?
                    .ok_or_else(|| Error::Validation("flow problem infeasible".into()))?
            } else {
                let pq = h.powi(q as i32);
                let qq = h.powi(q as i32 + 1);
                let p_cells: Vec<(Cell, Option<f64>)> = grid
                    .cells(q)
                    .into_iter()
                    .map(|c| {
                        let w = if in_u(&c) { wi * pq } else { 0.0 };
                        (c, Some(w))
                    })
                    .collect();
                let q_cells: Vec<(Cell, f64)> = grid
                    .cells(q + 1)
                    .into_iter()
                    .map(|c| {
                        let w = if in_u(&c) { wi * qq } else { 0.0 };
                        (c, w)
                    })
                    .collect();
                let out = lp_chain(&si, &p_cells, &q_cells)?
                    .ok_or_else(|| Error::Lp("flat norm relaxation infeasible".into()))?;
                lp_total += out.lp_value;
                rounded_total += out.rounded_value;
                exact &= out.exact;
                (out.p, out.q)
            };
            put_coordinate(&mut p_chain, i, &pi)?;
            put_coordinate(&mut q_chain, i, &qi)?;
        }
        let value = p_chain.mass(norm, relative_to)? + q_chain.mass(norm, relative_to)?;
        let integrality = if exact {
            Integrality::Exact
        } else {
            Integrality::Flagged {
                lp_value: lp_total,
                rounded_value: rounded_total,
            }
        };
        return Ok(FlatDecomposition {
            p: p_chain,
            q: Some(q_chain),
            value,
            method,
            integrality,
        });
    }
    // Exhaustive path. Without a relative region the optimum may be taken
    // inside the bounding box of the support, since clamping onto that box
    // is cellular and does not increase mass.
    let region = match relative_to {
        Some(_) => None,
        None => support_box(s),
    };
    let pw = h.powi(q as i32);
    let qw = h.powi(q as i32 + 1);
    let p_cells: Vec<(Cell, f64)> = grid
        .cells_within(q, region.as_ref())
        .into_iter()
        .map(|c| {
            let w = if in_u(&c) { pw } else { 0.0 };
            (c, w)
        })
        .collect();
    let q_cells: Vec<(Cell, f64)> = grid
        .cells_within(q + 1, region.as_ref())
        .into_iter()
        .map(|c| {
            let w = if in_u(&c) { qw } else { 0.0 };
            (c, w)
        })
        .collect();
    let mass = s.mass(norm, relative_to)?;
    let candidates = candidate_set(norm, mass / qw, s)?;
    let pr = Problem {
        group: s.group(),
        norm,
        p_cells,
        q_cells: q_cells.clone(),
        candidates,
        s: s.coeffs().clone(),
    };
    let sol = pr.solve()?;
    for ((c, _), g) in q_cells.iter().zip(&sol.q) {
        if !g.is_zero() {
            q_chain.add_to(c, g)?;
        }
    }
    let p_chain = s.sub(&q_chain.boundary()?)?;
    let value = p_chain.mass(norm, relative_to)? + q_chain.mass(norm, relative_to)?;
    Ok(FlatDecomposition {
        p: p_chain,
        q: Some(q_chain),
        value,
        method: FlatMethod::Exhaustive,
        integrality: Integrality::Exact,
    })
}

/// Closed box spanned by the cells of the support.
fn support_box(s: &Chain) -> Option<Aabb> {
    let grid = s.grid();
    let d = grid.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for c in s.coeffs().keys() {
        let l = grid.cell_lower(c);
        for i in 0..d {
            lo[i] = lo[i].min(l[i]);
            let t = l[i] + if c.axes.contains(&i) { grid.h } else { 0.0 };
            hi[i] = hi[i].max(t);
        }
    }
    if lo[0].is_infinite() {
        return None;
    }
    Some(Aabb { lo, hi })
}

/// Coefficients worth trying for a free cell: the whole group if finite,
/// otherwise the norm ball of the given radius (at least every support
/// coefficient).
fn candidate_set(norm: &CostedNorm, radius: f64, s: &Chain) -> Result<Vec<GroupElement>> {
    if let Some(all) = norm.group().elements() {
        return Ok(all);
    }
    let mut r = radius;
    for g in s.coeffs().values() {
        r = r.max(norm.norm(g)?);
    }
    Ok(norm.ball(r * (1.0 + 1e-12)))
}

/// Result of [`cobordant`].
#[derive(Debug, Clone, PartialEq)]
pub struct Cobordism {
    pub cobordant: bool,
    /// `R` with `dR = S1 - S2`, supported in the box.
    pub witness: Option<Chain>,
}

/// Whether `S1 - S2 = dR` for a chain `R` supported in the closed box.
pub fn cobordant(s1: &Chain, s2: &Chain, within: &Aabb, norm: &CostedNorm) -> Result<Cobordism> {
    check_group(s1, norm)?;
    let diff = s1.sub(s2)?;
    let grid = diff.grid().clone();
    let q = diff.dim();
    let group = diff.group().clone();
    if q == grid.dim() {
        return Ok(Cobordism {
            cobordant: diff.is_zero(),
            witness: None,
        });
    }
    let zero = Chain::zero(grid.clone(), q + 1, group.clone())?;
    if diff.is_zero() {
        return Ok(Cobordism {
            cobordant: true,
            witness: Some(zero),
        });
    }
    if diff.coeffs().keys().any(|c| !grid.cell_inside_closed(c, within)) {
        return Ok(Cobordism {
            cobordant: false,
            witness: None,
        });
    }
    match solve_boundary_equation(&diff, Some(within), norm)? {
        Some(r) => Ok(Cobordism {
            cobordant: true,
            witness: Some(r),
        }),
        None => Ok(Cobordism {
            cobordant: false,
            witness: None,
        }),
    }
}

/// Finds `R` inside `within` with `dR = D`, preferring small mass.
fn solve_boundary_equation(d: &Chain, within: Option<&Aabb>, norm: &CostedNorm) -> Result<Option<Chain>> {
    let grid = d.grid();
    let q = d.dim();
    let group = d.group();
    let h = grid.h;
    if q == 0 {
        return tree_filling(d, within);
    }
    let mut r = Chain::zero(grid.clone(), q + 1, group.clone())?;
    let weights = free_weights(d, norm);
    let rows = grid.cells_within(q, within);
    let cols = grid.cells_within(q + 1, within);
    for i in 0..group.rank() {
        let di = coordinate(d, i);
        if di.is_empty() {
            continue;
        }
        let free = i < group.free_rank;
        if free {
            let w = weights.as_ref().map_or(1.0, |w| w[i]);
            let p_cells: Vec<(Cell, Option<f64>)> = rows.iter().map(|c| (c.clone(), None)).collect();
            let q_cells: Vec<(Cell, f64)> =
                cols.iter().map(|c| (c.clone(), w * h.powi(q as i32 + 1))).collect();
            match lp_chain(&di, &p_cells, &q_cells)? {
                None => return Ok(None),
                Some(out) if out.exact => {
                    put_coordinate(&mut r, i, &out.q)?;
                    continue;
                }
                Some(_) => {}
            }
        }
        let modulus = if free { None } else { Some(group.torsion[i - group.free_rank]) };
        match integer_filling(&di, &rows, &cols, modulus)? {
            Some(sol) => put_coordinate(&mut r, i, &sol)?,
            None => return Ok(None),
        }
    }
    Ok(Some(r))
}

/// Exact integer (or modular) solution of `dR = D` by diagonalisation.
fn integer_filling(d: &Scalar, rows: &[Cell], cols: &[Cell], modulus: Option<i64>) -> Result<Option<Scalar>> {
    let extra = if modulus.is_some() { rows.len() } else { 0 };
    let ncols = cols.len() + extra;
    if rows.len().saturating_mul(ncols) > 4_000_000 {
        return Err(Error::TooLarge(format!(
            "boundary system of {} x {ncols} is too large for exact elimination",
            rows.len()
        )));
    }
    let index: BTreeMap<&Cell, usize> = rows.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let mut a = vec![vec![0i64; ncols]; rows.len()];
    for (j, c) in cols.iter().enumerate() {
        for (f, s) in c.faces() {
            if let Some(&i) = index.get(&f) {
                a[i][j] += s;
            }
        }
    }
    if let Some(m) = modulus {
        for (i, row) in a.iter_mut().enumerate() {
            row[cols.len() + i] = m;
        }
    }
    let b: Vec<i64> = rows.iter().map(|c| d.get(c).copied().unwrap_or(0)).collect();
    Ok(solve_integer(&a, &b)?.map(|x| {
        cols.iter()
            .zip(&x)
            .filter(|(_, &v)| v != 0)
            .map(|(c, &v)| (c.clone(), v))
            .collect()
    }))
}

/// Fills a 0-chain by pushing coefficients along a breadth-first spanning
/// forest of the edges inside `within`. Works for every coefficient group.
fn tree_filling(d: &Chain, within: Option<&Aabb>) -> Result<Option<Chain>> {
    let grid = d.grid();
    let group = d.group();
    let verts = grid.cells_within(0, within);
    let edges = grid.cells_within(1, within);
    let index: BTreeMap<&Cell, usize> = verts.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); verts.len()];
    for (k, e) in edges.iter().enumerate() {
        let a = index[&Cell::vertex(e.base.clone())];
        let mut top = e.base.clone();
        top[e.axes[0]] += 1;
        let b = index[&Cell::vertex(top)];
        adj[a].push((b, k));
        adj[b].push((a, k));
    }
    let mut val: Vec<GroupElement> = vec![group.zero(); verts.len()];
    for (c, g) in d.coeffs() {
        let Some(&i) = index.get(c) else { return Ok(None) };
        val[i] = g.clone();
    }
    let mut r = Chain::zero(grid.clone(), 1, group.clone())?;
    let mut seen = vec![false; verts.len()];
    for root in 0..verts.len() {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut order = vec![root];
        let mut parent = vec![None; 0];
        parent.resize(verts.len(), None);
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &(v, k) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = Some((u, k));
                    order.push(v);
                    queue.push_back(v);
                }
            }
        }
        for &v in order.iter().rev() {
            if let Some((u, k)) = parent[v] {
                let g = std::mem::replace(&mut val[v], group.zero());
                if g.is_zero() {
                    continue;
                }
                // An edge from a to b has boundary b - a.
                let e = &edges[k];
                let v_is_top = verts[v].base != e.base;
                let coeff = if v_is_top { g.clone() } else { group.neg(&g) };
                r.add_to(e, &coeff)?;
                val[u] = group.add(&val[u], &g);
            }
        }
        if !val[root].is_zero() {
            return Ok(None);
        }
    }
    Ok(Some(r))
}

/// A minimal-mass filling `T` with `dT = P` of a cycle `P`, or `None` if
/// `P` bounds nothing in the region.
pub fn fill_small_cycle(p: &Chain, norm: &CostedNorm, within: Option<&Aabb>) -> Result<Option<Chain>> {
    check_group(p, norm)?;
    let grid = p.grid();
    let q = p.dim();
    if q >= 1 && !p.boundary()?.is_zero() {
        return Err(Error::Precondition("the chain to fill is not a cycle".into()));
    }
    if q == grid.dim() {
        // There are no cells of higher dimension to fill with.
        return Ok(None);
    }
    if p.is_zero() {
        return Ok(Some(Chain::zero(grid.clone(), q + 1, p.group().clone())?));
    }
    if q == 0 {
        if let Some(w) = free_weights(p, norm) {
            let mut t = Chain::zero(grid.clone(), 1, p.group().clone())?;
            for (i, wi) in w.iter().enumerate() {
                let si = coordinate(p, i);
                if si.is_empty() {
                    continue;
                }
                let ec = |_: &Cell| wi * grid.h;
                match flow_zero_chain(grid, &si, within, None, &ec)? {
                    Some((_, qi)) => put_coordinate(&mut t, i, &qi)?,
                    None => return Ok(None),
                }
            }
            return Ok(Some(t));
        }
    }
    solve_boundary_equation(p, within, norm)
}

/// Result of [`plateau_minimize`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauResult {
    /// `S0 + dR` of least mass.
    pub chain: Chain,
    pub witness: Chain,
    pub mass: f64,
    pub initial_mass: f64,
}

/// Minimises `M(S0 + dR)` over `(q+1)`-chains `R` in the closed box.
pub fn plateau_minimize(s0: &Chain, within: &Aabb, norm: &CostedNorm) -> Result<PlateauResult> {
    check_group(s0, norm)?;
    let grid = s0.grid();
    let q = s0.dim();
    let group = s0.group().clone();
    let h = grid.h;
    let initial_mass = s0.mass(norm, None)?;
    if q == grid.dim() {
        return Err(Error::DimensionMismatch(
            "top-dimensional chains have no cobordisms".into(),
        ));
    }
    let mut witness = Chain::zero(grid.clone(), q + 1, group.clone())?;
    // Coefficients on cells outside the box cannot move.
    let inside: Chain = {
        let mut c = Chain::zero(grid.clone(), q, group.clone())?;
        for (cell, g) in s0.coeffs() {
            if grid.cell_inside_closed(cell, within) {
                c.add_to(cell, g)?;
            }
        }
        c
    };
    if let Some(w) = free_weights(s0, norm) {
        for (i, wi) in w.iter().enumerate() {
            let si = coordinate(&inside, i);
            if si.is_empty() {
                continue;
            }
            let ri = if q == 0 {
                // A tiny edge cost picks the shortest witness among optima.
                let vc = |_: &Cell| *wi;
                let ec = |_: &Cell| wi * h * 1e-6;
                let (_, qi) = flow_zero_chain(grid, &si, Some(within), Some(&vc), &ec)?
                    .ok_or_else(|| Error::Validation("flow problem infeasible".into()))?;
                qi
            } else {
                let pw = wi * h.powi(q as i32);
                let p_cells: Vec<(Cell, Option<f64>)> = grid
                    .cells_within(q, Some(within))
                    .into_iter()
                    .map(|c| (c, Some(pw)))
                    .collect();
                let q_cells: Vec<(Cell, f64)> = grid
                    .cells_within(q + 1, Some(within))
                    .into_iter()
                    .map(|c| (c, 0.0))
                    .collect();
                let out = lp_chain(&si, &p_cells, &q_cells)?
                    .ok_or_else(|| Error::Lp("plateau relaxation infeasible".into()))?;
                if !out.exact {
                    return Err(Error::Lp(format!(
                        "plateau relaxation optimum {} could not be rounded ({})",
                        out.lp_value, out.rounded_value
                    )));
                }
                out.q
            };
            // S0 = X + dQ, so X = S0 + dR with R = -Q.
            let neg: Scalar = ri.into_iter().map(|(c, v)| (c, -v)).collect();
            put_coordinate(&mut witness, i, &neg)?;
        }
    } else {
        let p_cells: Vec<(Cell, f64)> = grid
            .cells_within(q, Some(within))
            .into_iter()
            .map(|c| (c, h.powi(q as i32)))
            .collect();
        let q_cells: Vec<(Cell, f64)> = grid
            .cells_within(q + 1, Some(within))
            .into_iter()
            .map(|c| (c, 0.0))
            .collect();
        let candidates = candidate_set(norm, 0.0, s0)?;
        let pr = Problem {
            group: &group,
            norm,
            p_cells,
            q_cells: q_cells.clone(),
            candidates,
            s: inside.coeffs().clone(),
        };
        let sol = pr.solve()?;
        for ((c, _), g) in q_cells.iter().zip(&sol.q) {
            if !g.is_zero() {
                witness.add_to(c, &group.neg(g))?;
            }
        }
    }
    let chain = s0.add(&witness.boundary()?)?;
    let mass = chain.mass(norm, None)?;
    Ok(PlateauResult {
        chain,
        witness,
        mass,
        initial_mass,
    })
}
