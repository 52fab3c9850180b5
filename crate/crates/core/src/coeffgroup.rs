//! Finitely generated abelian coefficient groups `Z^a x Z_q1 x ... x Z_qb`,
//! cost tables on them and the decomposition norm they induce.
//!
//! The decomposition norm of `s` is the cheapest way of writing `s` as a sum
//! of elements whose cost is known, i.e. a shortest path from `0` to `s` in
//! the Cayley graph of the group whose edges are weighted by the cost table.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intlin::solve_integer;

/// Relative slack used when comparing path lengths for ties.
const TIE_TOL: f64 = 1e-12;

/// A group `Z^free_rank x Z_torsion[0] x ...`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CoefficientGroup {
    pub free_rank: usize,
    /// Orders of the cyclic torsion factors, each at least 2.
    pub torsion: Vec<i64>,
}

/// An element in canonical coordinates: free coordinates first, torsion
/// coordinates reduced into `0..q`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupElement(Vec<i64>);

impl GroupElement {
    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }
}

impl std::fmt::Display for GroupElement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl CoefficientGroup {
    pub fn new(free_rank: usize, torsion: Vec<i64>) -> Result<Self> {
        if let Some(q) = torsion.iter().find(|&&q| q < 2) {
            return Err(Error::Parameter(format!(
                "torsion orders must be at least 2, got {q}"
            )));
        }
        Ok(Self { free_rank, torsion })
    }

    /// The integers.
    pub fn integers() -> Self {
        Self {
            free_rank: 1,
            torsion: Vec::new(),
        }
    }

    pub fn cyclic(q: i64) -> Result<Self> {
        Self::new(0, vec![q])
    }

    /// Number of coordinates of an element.
    pub fn rank(&self) -> usize {
        self.free_rank + self.torsion.len()
    }

    pub fn is_trivial(&self) -> bool {
        self.rank() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.free_rank == 0
    }

    pub fn order(&self) -> Option<u64> {
        if !self.is_finite() {
            return None;
        }
        Some(self.torsion.iter().map(|&q| q as u64).product())
    }

    pub fn zero(&self) -> GroupElement {
        GroupElement(vec![0; self.rank()])
    }

    /// Builds an element, reducing torsion coordinates.
    pub fn element(&self, coords: &[i64]) -> Result<GroupElement> {
        if coords.len() != self.rank() {
            return Err(Error::DimensionMismatch(format!(
                "group has {} coordinates, element has {}",
                self.rank(),
                coords.len()
            )));
        }
        Ok(self.reduce(coords.to_vec()))
    }

    fn reduce(&self, mut c: Vec<i64>) -> GroupElement {
        for (i, q) in self.torsion.iter().enumerate() {
            let k = self.free_rank + i;
            c[k] = c[k].rem_euclid(*q);
        }
        GroupElement(c)
    }

    pub fn add(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        self.reduce(a.0.iter().zip(&b.0).map(|(x, y)| x + y).collect())
    }

    pub fn neg(&self, a: &GroupElement) -> GroupElement {
        self.reduce(a.0.iter().map(|x| -x).collect())
    }

    pub fn sub(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        self.add(a, &self.neg(b))
    }

    /// `m * a`.
    pub fn scale(&self, m: i64, a: &GroupElement) -> GroupElement {
        self.reduce(a.0.iter().map(|x| m * x).collect())
    }

    /// The free part of an element (torsion coordinates set to zero).
    pub fn free_part(&self, a: &GroupElement) -> GroupElement {
        let mut c = a.0.clone();
        for x in c.iter_mut().skip(self.free_rank) {
            *x = 0;
        }
        GroupElement(c)
    }

    /// Unit vectors, one per coordinate.
    pub fn generators(&self) -> Vec<GroupElement> {
        (0..self.rank())
            .map(|i| {
                let mut c = vec![0; self.rank()];
                c[i] = 1;
                GroupElement(c)
            })
            .collect()
    }

    /// All elements of a finite group, in lexicographic order.
    pub fn elements(&self) -> Option<Vec<GroupElement>> {
        let order = self.order()?;
        let mut out = Vec::with_capacity(order as usize);
        let mut c = vec![0i64; self.rank()];
        loop {
            out.push(GroupElement(c.clone()));
            let mut i = self.rank();
            loop {
                if i == 0 {
                    return Some(out);
                }
                i -= 1;
                c[i] += 1;
                if c[i] < self.torsion[i] {
                    break;
                }
                c[i] = 0;
            }
        }
    }

    fn check(&self, a: &GroupElement) -> Result<()> {
        if a.0.len() != self.rank() {
            return Err(Error::DimensionMismatch(format!(
                "group has {} coordinates, element {} has {}",
                self.rank(),
                a,
                a.0.len()
            )));
        }
        Ok(())
    }
}

/// How costs are assigned to free elements that are not listed explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Extension {
    /// Only listed elements have a cost.
    None,
    /// `E(g) = scale * |g|_1^exponent` for every nonzero torsion-free `g`
    /// that is not listed.
    PowerLaw { exponent: f64, scale: f64 },
}

/// A cost function `E` on a finite support plus an optional extension rule.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTable {
    group: CoefficientGroup,
    entries: BTreeMap<GroupElement, f64>,
    extension: Extension,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostEntryJson {
    elem: Vec<i64>,
    value: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostTableJson {
    free_rank: usize,
    #[serde(default)]
    torsion: Vec<i64>,
    cost: Vec<CostEntryJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    extension: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scale: Option<f64>,
}

impl CostTable {
    /// Validates and symmetrises a cost table. A listed `g` without a listed
    /// `-g` gets the same cost for `-g`; two listed values that disagree are
    /// rejected. Costs of nonzero elements must be positive and finite.
    pub fn new(
        group: CoefficientGroup,
        entries: impl IntoIterator<Item = (GroupElement, f64)>,
        extension: Extension,
    ) -> Result<Self> {
        let mut map: BTreeMap<GroupElement, f64> = BTreeMap::new();
        for (g, v) in entries {
            group.check(&g)?;
            let g = group.reduce(g.0);
            if g.is_zero() {
                if v != 0.0 {
                    return Err(Error::Validation(format!(
                        "cost of the zero element must be 0, got {v}"
                    )));
                }
                continue;
            }
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!(
                    "cost of {g} must be positive and finite, got {v}"
                )));
            }
            if let Some(old) = map.insert(g.clone(), v) {
                if old != v {
                    return Err(Error::Validation(format!(
                        "element {g} listed twice with costs {old} and {v}"
                    )));
                }
            }
        }
        let listed: Vec<(GroupElement, f64)> = map.iter().map(|(g, v)| (g.clone(), *v)).collect();
        for (g, v) in listed {
            let ng = group.neg(&g);
            match map.get(&ng) {
                Some(&w) if (w - v).abs() > TIE_TOL * v.abs().max(1.0) => {
                    return Err(Error::Validation(format!(
                        "cost table is not symmetric: E({g}) = {v} but E({ng}) = {w}"
                    )));
                }
                Some(_) => {}
                None => {
                    map.insert(ng, v);
                }
            }
        }
        if let Extension::PowerLaw { exponent, scale } = extension {
            if group.free_rank == 0 {
                return Err(Error::Validation(
                    "a power-law extension needs a free factor".into(),
                ));
            }
            if !(exponent > 0.0 && exponent.is_finite() && scale > 0.0 && scale.is_finite()) {
                return Err(Error::Validation(format!(
                    "power-law extension needs positive exponent and scale, got {exponent}, {scale}"
                )));
            }
        }
        Ok(Self {
            group,
            entries: map,
            extension,
        })
    }

    pub fn group(&self) -> &CoefficientGroup {
        &self.group
    }

    pub fn extension(&self) -> &Extension {
        &self.extension
    }

    /// Listed (symmetrised) entries.
    pub fn entries(&self) -> &BTreeMap<GroupElement, f64> {
        &self.entries
    }

    /// `E(g)`, or `None` when `g` has no cost.
    pub fn cost(&self, g: &GroupElement) -> Option<f64> {
        if g.is_zero() {
            return Some(0.0);
        }
        if let Some(v) = self.entries.get(g) {
            return Some(*v);
        }
        match self.extension {
            Extension::None => None,
            Extension::PowerLaw { exponent, scale } => {
                let c = g.coords();
                if c[self.group.free_rank..].iter().any(|&x| x != 0) {
                    return None;
                }
                let l1: i64 = c[..self.group.free_rank].iter().map(|x| x.abs()).sum();
                Some(scale * (l1 as f64).powf(exponent))
            }
        }
    }

    /// Smallest cost of a nonzero element.
    pub fn min_cost(&self) -> Option<f64> {
        let listed = self.entries.values().copied().fold(f64::INFINITY, f64::min);
        let ext = match self.extension {
            Extension::None => f64::INFINITY,
            Extension::PowerLaw { scale, .. } => scale,
        };
        let m = listed.min(ext);
        m.is_finite().then_some(m)
    }

    /// Every nonzero element whose cost is at most `bound`, with its cost.
    pub fn candidates(&self, bound: f64) -> Vec<(GroupElement, f64)> {
        let mut out: BTreeMap<GroupElement, f64> = self
            .entries
            .iter()
            .filter(|(_, &v)| v <= bound)
            .map(|(g, v)| (g.clone(), *v))
            .collect();
        if let Extension::PowerLaw { exponent, scale } = self.extension {
            if bound >= scale {
                let radius = (bound / scale).powf(1.0 / exponent).floor() as i64;
                let a = self.group.free_rank;
                let mut c = vec![-radius; a];
                loop {
                    let l1: i64 = c.iter().map(|x| x.abs()).sum();
                    if l1 > 0 && l1 <= radius {
                        let mut full = c.clone();
                        full.resize(self.group.rank(), 0);
                        let g = GroupElement(full);
                        if !out.contains_key(&g) {
                            if let Some(v) = self.cost(&g) {
                                if v <= bound {
                                    out.insert(g, v);
                                }
                            }
                        }
                    }
                    let mut i = 0;
                    loop {
                        if i == a {
                            return out.into_iter().collect();
                        }
                        c[i] += 1;
                        if c[i] <= radius {
                            break;
                        }
                        c[i] = -radius;
                        i += 1;
                    }
                }
            }
        }
        out.into_iter().collect()
    }

    /// Parses the JSON form
    /// `{"free_rank":1,"torsion":[],"cost":[{"elem":[1],"value":6.28}],"extension":"power_law","exponent":1.5}`.
    /// A power-law extension without `scale` takes the cost of the first
    /// free unit vector.
    pub fn from_json(s: &str) -> Result<Self> {
        let raw: CostTableJson = serde_json::from_str(s)?;
        let group = CoefficientGroup::new(raw.free_rank, raw.torsion)?;
        let mut entries = Vec::new();
        for e in &raw.cost {
            entries.push((group.element(&e.elem)?, e.value));
        }
        let extension = match raw.extension.as_deref() {
            None | Some("none") => Extension::None,
            Some("power_law") => {
                let exponent = raw.exponent.ok_or_else(|| {
                    Error::Validation("power_law extension needs an exponent".into())
                })?;
                let scale = match raw.scale {
                    Some(s) => s,
                    None => {
                        if group.free_rank == 0 {
                            return Err(Error::Validation(
                                "a power-law extension needs a free factor".into(),
                            ));
                        }
                        let unit = group.generators().remove(0);
                        let neg = group.neg(&unit);
                        raw.cost
                            .iter()
                            .find(|e| {
                                group.element(&e.elem).is_ok_and(|g| g == unit || g == neg)
                            })
                            .map(|e| e.value)
                            .ok_or_else(|| {
                                Error::Validation(
                                    "power_law extension needs a scale or a listed unit cost"
                                        .into(),
                                )
                            })?
                    }
                };
                Extension::PowerLaw { exponent, scale }
            }
            Some(other) => {
                return Err(Error::Validation(format!("unknown extension rule {other:?}")))
            }
        };
        Self::new(group, entries, extension)
    }

    pub fn to_json(&self) -> String {
        let (extension, exponent, scale) = match self.extension {
            Extension::None => (None, None, None),
            Extension::PowerLaw { exponent, scale } => {
                (Some("power_law".to_string()), Some(exponent), Some(scale))
            }
        };
        let raw = CostTableJson {
            free_rank: self.group.free_rank,
            torsion: self.group.torsion.clone(),
            cost: self
                .entries
                .iter()
                .map(|(g, v)| CostEntryJson {
                    elem: g.0.clone(),
                    value: *v,
                })
                .collect(),
            extension,
            exponent,
            scale,
        };
        serde_json::to_string_pretty(&raw).expect("cost table serialises")
    }

    /// An upper bound on `|sigma|` from some integer combination of the
    /// cost-carrying generators, or an error if `sigma` is not generated.
    fn upper_bound(&self, sigma: &GroupElement) -> Result<f64> {
        if let Some(v) = self.cost(sigma) {
            return Ok(v);
        }
        let mut gens: Vec<(GroupElement, f64)> = self
            .entries
            .iter()
            .map(|(g, v)| (g.clone(), *v))
            .collect();
        if let Extension::PowerLaw { .. } = self.extension {
            for g in self.group.generators().into_iter().take(self.group.free_rank) {
                let v = self.cost(&g).expect("extension covers free units");
                gens.push((g, v));
            }
        }
        let r = self.group.rank();
        let ncols = gens.len() + self.group.torsion.len();
        let mut a = vec![vec![0i64; ncols]; r];
        for (j, (g, _)) in gens.iter().enumerate() {
            for i in 0..r {
                a[i][j] = g.0[i];
            }
        }
        for (t, q) in self.group.torsion.iter().enumerate() {
            a[self.group.free_rank + t][gens.len() + t] = *q;
        }
        let x = solve_integer(&a, &sigma.0)?.ok_or_else(|| Error::Unreachable(sigma.to_string()))?;
        Ok(gens
            .iter()
            .zip(&x)
            .map(|((_, v), m)| v * m.unsigned_abs() as f64)
            .sum())
    }
}

/// A decomposition `sigma = sum of summands` realising the norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub value: f64,
    /// Summands sorted ascending; the lexicographically smallest list among
    /// optimal decompositions.
    pub summands: Vec<GroupElement>,
}

#[derive(PartialEq)]
struct HeapItem(f64, GroupElement);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

fn lex_less(a: &[GroupElement], b: &[GroupElement]) -> bool {
    a < b
}

fn ties(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Dijkstra from `0` over elements with distance at most `cutoff`, stopping
/// early once `target` is settled.
fn dijkstra(
    table: &CostTable,
    cutoff: f64,
    target: Option<&GroupElement>,
) -> HashMap<GroupElement, Decomposition> {
    let cands = table.candidates(cutoff * (1.0 + TIE_TOL));
    let zero = table.group.zero();
    let mut label: HashMap<GroupElement, Decomposition> = HashMap::new();
    let mut done: HashMap<GroupElement, Decomposition> = HashMap::new();
    label.insert(
        zero.clone(),
        Decomposition {
            value: 0.0,
            summands: Vec::new(),
        },
    );
    let mut heap = BinaryHeap::new();
    heap.push(HeapItem(0.0, zero));
    while let Some(HeapItem(d, x)) = heap.pop() {
        if done.contains_key(&x) {
            continue;
        }
        let Some(lab) = label.get(&x) else { continue };
        if lab.value < d && !ties(lab.value, d) {
            continue;
        }
        let lab = lab.clone();
        done.insert(x.clone(), lab.clone());
        if target == Some(&x) {
            break;
        }
        for (g, c) in &cands {
            let nd = lab.value + c;
            if nd > cutoff * (1.0 + TIE_TOL) + TIE_TOL {
                continue;
            }
            let y = table.group.add(&x, g);
            if done.contains_key(&y) {
                continue;
            }
            let better = match label.get(&y) {
                None => true,
                Some(old) => {
                    if ties(nd, old.value) {
                        let mut s = lab.summands.clone();
                        let pos = s.partition_point(|e| e < g);
                        s.insert(pos, g.clone());
                        lex_less(&s, &old.summands)
                    } else {
                        nd < old.value
                    }
                }
            };
            if better {
                let mut s = lab.summands.clone();
                let pos = s.partition_point(|e| e < g);
                s.insert(pos, g.clone());
                label.insert(
                    y.clone(),
                    Decomposition {
                        value: nd,
                        summands: s,
                    },
                );
                heap.push(HeapItem(nd, y));
            }
        }
    }
    done
}

/// The decomposition norm `|sigma|` with an optimal decomposition.
pub fn decomposition_norm(table: &CostTable, sigma: &GroupElement) -> Result<Decomposition> {
    table.group.check(sigma)?;
    let sigma = table.group.reduce(sigma.0.clone());
    if sigma.is_zero() {
        return Ok(Decomposition {
            value: 0.0,
            summands: Vec::new(),
        });
    }
    let bound = table.upper_bound(&sigma)?;
    let mut done = dijkstra(table, bound, Some(&sigma));
    done.remove(&sigma)
        .ok_or_else(|| Error::Unreachable(sigma.to_string()))
}

/// The norm gap: the smallest norm of a nonzero element.
pub fn norm_gap(table: &CostTable) -> Result<f64> {
    if table.group.is_trivial() {
        return Err(Error::TrivialGroup);
    }
    let m = table.min_cost().ok_or_else(|| {
        Error::Validation("cost table assigns no cost to any nonzero element".into())
    })?;
    // |g| <= E(g) and every path has length at least the cheapest edge.
    let mut best = f64::INFINITY;
    for (g, _) in table.candidates(m) {
        best = best.min(decomposition_norm(table, &g)?.value);
    }
    Ok(best)
}

/// A cost table together with its exponent, norm gap and a cache of norms.
#[derive(Debug, Clone)]
pub struct CostedNorm {
    table: CostTable,
    p: f64,
    alpha: f64,
    cache: HashMap<GroupElement, Decomposition>,
}

/// Free coordinates up to this magnitude are cached for infinite groups.
const CACHE_RADIUS: i64 = 3;
/// Finite groups up to this order are cached completely.
const CACHE_FINITE: u64 = 4096;

impl CostedNorm {
    /// Builds the norm and eagerly caches norms of small elements.
    pub fn new(table: CostTable, p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::Parameter(format!("exponent must be positive, got {p}")));
        }
        let alpha = norm_gap(&table)?;
        let mut cache = HashMap::new();
        let group = table.group.clone();
        let small: Vec<GroupElement> = match group.order() {
            Some(n) if n <= CACHE_FINITE => group.elements().unwrap_or_default(),
            Some(_) => Vec::new(),
            None if group.rank() <= 2 => {
                let mut out = Vec::new();
                let ranges: Vec<Vec<i64>> = (0..group.rank())
                    .map(|i| {
                        if i < group.free_rank {
                            (-CACHE_RADIUS..=CACHE_RADIUS).collect()
                        } else {
                            (0..group.torsion[i - group.free_rank]).collect()
                        }
                    })
                    .collect();
                let mut idx = vec![0usize; ranges.len()];
                'outer: loop {
                    out.push(GroupElement(
                        idx.iter().zip(&ranges).map(|(&i, r)| r[i]).collect(),
                    ));
                    for k in 0..idx.len() {
                        idx[k] += 1;
                        if idx[k] < ranges[k].len() {
                            continue 'outer;
                        }
                        idx[k] = 0;
                    }
                    break;
                }
                out
            }
            None => Vec::new(),
        };
        for g in small {
            if let Ok(d) = decomposition_norm(&table, &g) {
                cache.insert(g, d);
            }
        }
        Ok(Self {
            table,
            p,
            alpha,
            cache,
        })
    }

    /// The loop-energy norm on `Z` for the round circle: `|d| = 2 pi |d|`,
    /// from the cost `E_p(d) = 2 pi |d|^p`.
    pub fn circle(p: f64) -> Result<Self> {
        let two_pi = std::f64::consts::TAU;
        let group = CoefficientGroup::integers();
        let table = CostTable::new(
            group.clone(),
            [(group.element(&[1])?, two_pi)],
            Extension::PowerLaw {
                exponent: p,
                scale: two_pi,
            },
        )?;
        Self::new(table, p)
    }

    pub fn table(&self) -> &CostTable {
        &self.table
    }

    pub fn group(&self) -> &CoefficientGroup {
        &self.table.group
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// The norm gap.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn decompose(&self, g: &GroupElement) -> Result<Decomposition> {
        if let Some(d) = self.cache.get(g) {
            return Ok(d.clone());
        }
        decomposition_norm(&self.table, g)
    }

    pub fn norm(&self, g: &GroupElement) -> Result<f64> {
        Ok(self.decompose(g)?.value)
    }

    /// All elements with norm at most `radius`.
    pub fn ball(&self, radius: f64) -> Vec<GroupElement> {
        let mut v: Vec<GroupElement> = dijkstra(&self.table, radius, None).into_keys().collect();
        v.sort();
        v
    }

    /// If the group is torsion free and the norm is `sum_i w_i |g_i|` on
    /// elements with coordinates up to `reach`, returns the weights `w_i`.
    pub fn linear_weights(&self, reach: i64) -> Option<Vec<f64>> {
        let group = self.group();
        if !group.torsion.is_empty() || group.free_rank == 0 {
            return None;
        }
        let a = group.free_rank;
        let mut w = Vec::with_capacity(a);
        for g in group.generators() {
            w.push(self.norm(&g).ok()?);
        }
        // Probe every element in a small box, plus multiples of the axes.
        let r = reach.clamp(1, 3);
        let mut probes: Vec<Vec<i64>> = Vec::new();
        let mut c = vec![-r; a];
        loop {
            probes.push(c.clone());
            let mut i = 0;
            loop {
                if i == a {
                    break;
                }
                c[i] += 1;
                if c[i] <= r {
                    break;
                }
                c[i] = -r;
                i += 1;
            }
            if i == a {
                break;
            }
        }
        for i in 0..a {
            let mut e = vec![0; a];
            e[i] = reach.max(1);
            probes.push(e);
        }
        for c in probes {
            let g = GroupElement(c.clone());
            let expect: f64 = c.iter().zip(&w).map(|(x, wi)| x.abs() as f64 * wi).sum();
            let got = self.norm(&g).ok()?;
            if !ties(got, expect) && (got - expect).abs() > 1e-9 * expect.max(1.0) {
                return None;
            }
        }
        Some(w)
    }
}

/// Outcome of comparing the norms of one class at two exponents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PqComparison {
    /// `f(p, q) = (p - k + 1) / (q - k + 1)`.
    pub f_pq: f64,
    pub norm_p: f64,
    pub norm_q: f64,
    /// `lambda |sigma|_q^f`.
    pub lower: f64,
    /// `|sigma|_q / lambda`.
    pub upper: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

/// Checks `lambda |s|_q^f <= |s|_p <= |s|_q / lambda` for `k - 1 < p < q`.
pub fn pq_comparison_bounds(
    norm_p: &CostedNorm,
    norm_q: &CostedNorm,
    sigma: &GroupElement,
    lambda: f64,
    k: f64,
) -> Result<PqComparison> {
    let (p, q) = (norm_p.p(), norm_q.p());
    if !(p < q) {
        return Err(Error::Parameter(format!("need p < q, got p = {p}, q = {q}")));
    }
    if !(p > k - 1.0) {
        return Err(Error::Parameter(format!("need p > k - 1, got p = {p}, k = {k}")));
    }
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::Parameter(format!("lambda must lie in (0, 1], got {lambda}")));
    }
    if norm_p.group() != norm_q.group() {
        return Err(Error::Validation("norms live on different groups".into()));
    }
    let f_pq = (p - k + 1.0) / (q - k + 1.0);
    let np = norm_p.norm(sigma)?;
    let nq = norm_q.norm(sigma)?;
    let lower = lambda * nq.powf(f_pq);
    let upper = nq / lambda;
    let slack = 1e-12 * np.max(1.0);
    Ok(PqComparison {
        f_pq,
        norm_p: np,
        norm_q: nq,
        lower,
        upper,
        lower_ok: lower <= np + slack,
        upper_ok: np <= upper + slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{PI, TAU};

    fn z() -> CoefficientGroup {
        CoefficientGroup::integers()
    }

    fn el(g: &CoefficientGroup, c: &[i64]) -> GroupElement {
        g.element(c).unwrap()
    }

    #[test]
    fn power_law_norm_on_integers() {
        let g = z();
        let t = CostTable::new(
            g.clone(),
            [(el(&g, &[1]), TAU)],
            Extension::PowerLaw {
                exponent: 1.5,
                scale: TAU,
            },
        )
        .unwrap();
        let d = decomposition_norm(&t, &el(&g, &[3])).unwrap();
        assert_relative_eq!(d.value, 6.0 * PI, max_relative = 1e-12);
        assert_eq!(d.summands, vec![el(&g, &[1]); 3]);
        assert_relative_eq!(norm_gap(&t).unwrap(), TAU, max_relative = 1e-12);
    }

    #[test]
    fn z2_single_generator() {
        let g = CoefficientGroup::cyclic(2).unwrap();
        let t = CostTable::new(g.clone(), [(el(&g, &[1]), 1.0)], Extension::None).unwrap();
        assert_eq!(decomposition_norm(&t, &el(&g, &[1])).unwrap().value, 1.0);
        assert_eq!(decomposition_norm(&t, &el(&g, &[0])).unwrap().value, 0.0);
        assert_eq!(norm_gap(&t).unwrap(), 1.0);
    }

    #[test]
    fn z3_cheaper_two_step_path() {
        let g = CoefficientGroup::cyclic(3).unwrap();
        let t = CostTable::new(
            g.clone(),
            [(el(&g, &[1]), 1.0), (el(&g, &[2]), 3.0)],
            Extension::None,
        );
        // E(2) = 3 but E(-1) = E(2) must match E(1) = 1: the table is not symmetric.
        assert!(matches!(t, Err(Error::Validation(_))));
        let t = CostTable::new(g.clone(), [(el(&g, &[1]), 1.0)], Extension::None).unwrap();
        assert_eq!(decomposition_norm(&t, &el(&g, &[2])).unwrap().value, 1.0);
    }

    #[test]
    fn z_cheaper_as_sum_of_singles() {
        let g = z();
        let t = CostTable::new(g.clone(), [(el(&g, &[1]), 1.0), (el(&g, &[2]), 3.0)], Extension::None)
            .unwrap();
        let d = decomposition_norm(&t, &el(&g, &[2])).unwrap();
        assert_eq!(d.value, 2.0);
        assert_eq!(d.summands, vec![el(&g, &[1]), el(&g, &[1])]);
    }

    #[test]
    fn unreachable_element_is_reported() {
        let g = z();
        let t = CostTable::new(g.clone(), [(el(&g, &[2]), 1.0)], Extension::None).unwrap();
        assert!(matches!(
            decomposition_norm(&t, &el(&g, &[3])),
            Err(Error::Unreachable(_))
        ));
        assert_eq!(decomposition_norm(&t, &el(&g, &[4])).unwrap().value, 2.0);
    }

    #[test]
    fn trivial_group_has_no_gap() {
        let g = CoefficientGroup::new(0, vec![]).unwrap();
        let t = CostTable::new(g, [], Extension::None).unwrap();
        assert!(matches!(norm_gap(&t), Err(Error::TrivialGroup)));
    }

    #[test]
    fn asymmetric_table_rejected() {
        let g = z();
        let t = CostTable::new(g.clone(), [(el(&g, &[1]), 1.0), (el(&g, &[-1]), 2.0)], Extension::None);
        assert!(matches!(t, Err(Error::Validation(_))));
    }

    #[test]
    fn ties_break_lexicographically() {
        let g = z();
        // 2 = 1 + 1 and 2 = 2 + 0, both cost 2.
        let t = CostTable::new(g.clone(), [(el(&g, &[1]), 1.0), (el(&g, &[2]), 2.0)], Extension::None)
            .unwrap();
        let d = decomposition_norm(&t, &el(&g, &[2])).unwrap();
        assert_eq!(d.value, 2.0);
        assert_eq!(d.summands, vec![el(&g, &[1]), el(&g, &[1])]);
    }

    #[test]
    fn json_round_trip() {
        let s = r#"{"free_rank":1,"torsion":[],"cost":[{"elem":[1],"value":6.5}],"extension":"power_law","exponent":1.5}"#;
        let t = CostTable::from_json(s).unwrap();
        assert_eq!(
            t.extension(),
            &Extension::PowerLaw {
                exponent: 1.5,
                scale: 6.5
            }
        );
        let back = CostTable::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
        assert!(CostTable::from_json(r#"{"free_rank":1,"cost":[],"bogus":1}"#).is_err());
    }

    #[test]
    fn circle_norm_is_linear() {
        let n = CostedNorm::circle(1.9).unwrap();
        assert_eq!(n.linear_weights(4), Some(vec![TAU]));
        assert_relative_eq!(n.norm(&el(&z(), &[-5])).unwrap(), 10.0 * PI, max_relative = 1e-12);
    }

    #[test]
    fn comparison_bounds_for_circle_norms() {
        let np = CostedNorm::circle(1.9).unwrap();
        let nq = CostedNorm::circle(2.0).unwrap();
        for d in 1..=4 {
            let c = pq_comparison_bounds(&np, &nq, &el(&z(), &[d]), 0.9, 2.0).unwrap();
            assert!(c.lower_ok && c.upper_ok, "{c:?}");
        }
    }

    #[test]
    fn mixed_group_elements() {
        let g = CoefficientGroup::new(1, vec![2, 3]).unwrap();
        let a = el(&g, &[1, 1, 2]);
        let b = el(&g, &[-1, 1, 2]);
        assert_eq!(g.add(&a, &b), el(&g, &[0, 0, 1]));
        assert_eq!(g.neg(&a), el(&g, &[-1, 1, 1]));
        let fin = CoefficientGroup::new(0, vec![2, 3]).unwrap();
        assert_eq!(fin.elements().unwrap().len(), 6);
    }
}
