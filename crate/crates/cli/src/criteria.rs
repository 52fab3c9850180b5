//! The acceptance criteria as functions returning a pass/fail outcome.
//!
//! Each criterion runs at its stated tolerance. Criteria 2, 3, 4 and 7 read
//! the two reference sweeps produced by [`reference_sweeps`].

use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use anyhow::Result;
use gammaflow::ballconstruct::{
    annulus_bound, ball_construction, BallDomain, EventKind, Singularity, SingularityConfig, BALL_TOL,
};
use gammaflow::chains::{flat_norm, Cell, Chain, CubicalGrid, FlatMethod, Integrality};
use gammaflow::coeffgroup::{decomposition_norm, norm_gap, CoefficientGroup, CostTable, CostedNorm, Extension, GroupElement};
use gammaflow::fields::{p_energy, polar_collapse_check, radial_collapse, unit, Domain, Field, Lattice};
use gammaflow::loopmin::{check_gradient_bound, converging_norms, loop_descent_config, minimize_circle_loop, EnergyMode, LoopTarget};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::pipeline::{gamma_run, GammaRunResult};

/// Result of one criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    /// Wall time of timed criteria; kept out of the report so that reports
    /// are reproducible.
    #[serde(skip)]
    pub elapsed: Option<Duration>,
}

impl CriterionOutcome {
    fn new(id: u32, name: &str, passed: bool, detail: String) -> Self {
        Self { id, name: name.into(), passed, detail, elapsed: None }
    }

    fn timed(mut self, elapsed: Duration) -> Self {
        self.elapsed = Some(elapsed);
        self
    }

    fn error(id: u32, name: &str, e: anyhow::Error) -> Self {
        Self::new(id, name, false, format!("error: {e:#}"))
    }

    /// `criterion <id> [PASS|FAIL] <name>: <detail> (<seconds>)`.
    pub fn line(&self) -> String {
        let time = self.elapsed.map(|t| format!(" ({:.2}s)", t.as_secs_f64())).unwrap_or_default();
        format!(
            "criterion {:>2} [{}] {}: {}{time}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

fn integer(d: i64) -> GroupElement {
    CoefficientGroup::integers().element(&[d]).expect("integers accept one coordinate")
}

/// 1. Radial identity: `(2-p) D_p(x/|x|) = 2 pi` in closed form for every
/// `p`, and within 2% for the lattice energy at `h = 1/256`, `p = 1.9`, in
/// under a second.
pub fn criterion_1() -> CriterionOutcome {
    const NAME: &str = "radial identity";
    let start = Instant::now();
    let mut worst_closed: f64 = 0.0;
    for i in 1..100 {
        let p = 1.0 + i as f64 / 100.0;
        // D_p = 2 pi int_0^1 r^{1-p} dr, and the integral is 1/(2-p).
        let integral = 1.0 / (2.0 - p);
        worst_closed = worst_closed.max(((2.0 - p) * TAU * integral - TAU).abs());
    }
    let p = 1.9;
    let run = || -> Result<f64> {
        let lat = Lattice::cell_centered(-1.0, 1.0, 512, 2)?;
        let f = Field::from_fn(lat, Domain::unit_disk(), p, |x| [x[0], x[1]])?;
        Ok((2.0 - p) * p_energy(&f, None))
    };
    match run() {
        Ok(scaled) => {
            let elapsed = start.elapsed();
            let rel = (scaled / TAU - 1.0).abs();
            let passed = worst_closed <= 1e-12 && rel <= 0.02 && elapsed < Duration::from_secs(1);
            CriterionOutcome::new(
                1,
                NAME,
                passed,
                format!(
                    "closed form error {worst_closed:.1e}; lattice (2-p)D_p = {scaled:.5} vs 2pi, relative error {rel:.4} <= 0.02; under 1s: {}",
                    elapsed < Duration::from_secs(1)
                ),
            )
            .timed(elapsed)
        }
        Err(e) => CriterionOutcome::error(1, NAME, e),
    }
}

/// Exponents of the reference sweeps.
pub const SWEEP_P: [f64; 4] = [1.7, 1.8, 1.9, 1.95];

/// Configuration of the reference sweep for Dirichlet data of degree
/// `degree` on the unit disk, 128 x 128 lattice.
pub fn reference_config(degree: i64) -> RunConfig {
    let text = format!(
        "[domain]\nkind = \"disk\"\nradius = 1.0\ncollar = 0.5\n\n[boundary]\ndegree = {degree}\n\n\
         [sweep]\np_list = [1.7, 1.8, 1.9, 1.95]\nseed = 0\n\n[grid]\nn = 128\npolicy = \"fixed\"\nh = 0.0625\n\n\
         [output]\ndir = \"out\"\nprefix = \"degree{degree}\"\n"
    );
    RunConfig::from_toml(&text, None).expect("reference configuration is valid")
}

/// The degree-1 and degree-2 sweeps with their total running time.
pub struct ReferenceSweeps {
    pub degree1: GammaRunResult,
    pub degree2: GammaRunResult,
    pub elapsed: Duration,
}

pub fn reference_sweeps() -> Result<ReferenceSweeps> {
    let start = Instant::now();
    let degree1 = gamma_run(&reference_config(1))?;
    let degree2 = gamma_run(&reference_config(2))?;
    Ok(ReferenceSweeps { degree1, degree2, elapsed: start.elapsed() })
}

/// 2. The extrapolated `(2-p) D_p` is within 10% of `2 pi` for degree 1 and
/// within 15% of `4 pi` for degree 2, in under five minutes.
pub fn criterion_2(s: &ReferenceSweeps) -> CriterionOutcome {
    const NAME: &str = "gamma limit of the energies";
    let check = |r: &GammaRunResult, tol: f64| -> (bool, String) {
        match &r.extrapolation {
            Some(x) => (
                x.relative_error <= tol,
                format!(
                    "degree {}: intercept {:.4} vs {:.4} (error {:.4} <= {tol}, residual {:.2e})",
                    r.degree, x.intercept, x.target, x.relative_error, x.residual
                ),
            ),
            None => (false, format!("degree {}: no extrapolation ({:?})", r.degree, r.errors)),
        }
    };
    let (a, da) = check(&s.degree1, 0.10);
    let (b, db) = check(&s.degree2, 0.15);
    let fast = s.elapsed < Duration::from_secs(300);
    CriterionOutcome::new(
        2,
        NAME,
        a && b && fast,
        format!("{da}; {db}; under 300s: {fast}"),
    )
    .timed(s.elapsed)
}

/// 3. Along each sweep `F_U(T_1.9 - T_1.95) <= F_U(T_1.7 - T_1.95)` and the
/// terminal distance is at most `0.1 M(T_1.95)`.
pub fn criterion_3(s: &ReferenceSweeps) -> CriterionOutcome {
    const NAME: &str = "flat convergence of the singular chains";
    let check = |r: &GammaRunResult| -> (bool, String) {
        let d = |p: f64| r.row(p).and_then(|row| row.flat_dist_to_limit);
        let (Some(d17), Some(d19), Some(t)) = (d(1.7), d(1.9), &r.flat_trend) else {
            return (false, format!("degree {}: distances missing ({:?})", r.degree, r.errors));
        };
        let terminal = t.terminal.unwrap_or(f64::INFINITY);
        (
            d19 <= d17 && terminal <= 0.1 * t.limit_mass,
            format!(
                "degree {}: F(T_1.9 - T_1.95) = {d19:.4} <= F(T_1.7 - T_1.95) = {d17:.4}, terminal {terminal:.4} <= 0.1 M = {:.4}",
                r.degree,
                0.1 * t.limit_mass
            ),
        )
    };
    let (a, da) = check(&s.degree1);
    let (b, db) = check(&s.degree2);
    CriterionOutcome::new(3, NAME, a && b, format!("{da}; {db}"))
}

/// 4. The Plateau problem of the limit chain has mass `2 pi |deg|` and the
/// minimiser is cobordant to the limit.
pub fn criterion_4(s: &ReferenceSweeps) -> CriterionOutcome {
    const NAME: &str = "plateau problem of the limit";
    let check = |r: &GammaRunResult| -> (bool, String) {
        let want = TAU * r.degree.abs() as f64;
        match &r.plateau {
            Some(pl) => (
                pl.exact && pl.cobordant && (pl.target - want).abs() <= 1e-12 * want,
                format!(
                    "degree {}: mass {} vs {want} (exact: {}), cobordant: {}",
                    r.degree, pl.mass, pl.exact, pl.cobordant
                ),
            ),
            None => (false, format!("degree {}: no plateau result ({:?})", r.degree, r.errors)),
        }
    };
    let (a, da) = check(&s.degree1);
    let (b, db) = check(&s.degree2);
    CriterionOutcome::new(4, NAME, a && b, format!("{da}; {db}"))
}

/// 5. `annulus_bound` equals the model energy for degree one to `1e-9` on
/// 20 random `(a, b, p)` and is strictly smaller for degrees 2 and 3.
pub fn criterion_5() -> CriterionOutcome {
    const NAME: &str = "annulus sharpness";
    let run = || -> Result<(bool, String)> {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut worst: f64 = 0.0;
        let mut strict = true;
        for _ in 0..20 {
            let a: f64 = rng.gen_range(0.0..0.9);
            let b: f64 = rng.gen_range(a + 0.01..1.0);
            let p: f64 = rng.gen_range(1.05..1.99);
            let norm = CostedNorm::circle(p)?;
            let shell = (b.powf(2.0 - p) - a.powf(2.0 - p)) / (2.0 - p);
            let model = TAU * shell;
            let bound = annulus_bound(&integer(1), a, b, 2.0, &norm)?;
            worst = worst.max((bound - model).abs() / model.max(1.0));
            for d in [2i64, 3] {
                let model = TAU * (d as f64).powf(p) * shell;
                strict &= annulus_bound(&integer(d), a, b, 2.0, &norm)? < model;
            }
        }
        Ok((worst <= 1e-9 && strict, format!("degree one worst relative gap {worst:.1e} <= 1e-9; degrees 2, 3 strict: {strict}")))
    };
    match run() {
        Ok((passed, detail)) => CriterionOutcome::new(5, NAME, passed, detail),
        Err(e) => CriterionOutcome::error(5, NAME, e),
    }
}

/// Seeded configuration of `n` class-one singularities in the disk of
/// radius 0.49, collar 0.5.
pub fn random_ball_config(seed: u64, n: usize) -> SingularityConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let singularities = (0..n)
        .map(|_| {
            let r = 0.49 * rng.gen::<f64>().sqrt();
            let t = rng.gen_range(0.0..TAU);
            Singularity { point: vec![r * t.cos(), r * t.sin()], class: vec![1] }
        })
        .collect();
    SingularityConfig {
        domain: BallDomain::Disk { center: vec![0.0, 0.0], radius: 1.0 },
        collar: 0.5,
        singularities,
        boundary_class: vec![n as i64],
        target: "circle".into(),
    }
}

/// 6. Properties (i)-(v) of the ball construction hold on 100 seeded
/// configurations of at most 10 singularities, in under 10 seconds.
pub fn criterion_6() -> CriterionOutcome {
    const NAME: &str = "ball construction properties";
    let start = Instant::now();
    let p = 1.95;
    let mut failures = Vec::new();
    for seed in 0..100u64 {
        let n = 1 + (seed as usize % 10);
        let cfg = random_ball_config(seed, n);
        let tau = cfg.collar / (8.0 * TAU * n as f64);
        match ball_construction(&cfg, tau, p) {
            Ok(c) => {
                let monotone = c
                    .events
                    .iter()
                    .filter(|e| e.kind == EventKind::Amalgamation)
                    .all(|e| e.credit_after >= e.credit_before * (1.0 - BALL_TOL));
                if !(c.all_properties_hold() && monotone) {
                    let bad: Vec<&str> = c.properties.iter().filter(|q| !q.holds).map(|q| q.id.as_str()).collect();
                    failures.push(format!("seed {seed}: {bad:?}, credit monotone {monotone}"));
                }
            }
            Err(e) => failures.push(format!("seed {seed}: {e}")),
        }
    }
    let elapsed = start.elapsed();
    CriterionOutcome::new(
        6,
        NAME,
        failures.is_empty() && elapsed < Duration::from_secs(10),
        format!("{} of 100 configurations failed {failures:?}; under 10s: {}", failures.len(), elapsed < Duration::from_secs(10)),
    )
    .timed(elapsed)
}

/// 7. Every minimiser of the reference sweeps with `p >= 1.9` has energy
/// at least `bound_p` at `r` equal to the collar width.
pub fn criterion_7(s: &ReferenceSweeps) -> CriterionOutcome {
    const NAME: &str = "certificate consistency";
    let mut passed = true;
    let mut parts = Vec::new();
    for r in [&s.degree1, &s.degree2] {
        for row in r.rows.iter().filter(|row| row.p >= 1.9) {
            match (&row.lower_bound, row.energy) {
                (Some(ineq), Some(e)) => {
                    passed &= ineq.rhs >= ineq.lhs;
                    parts.push(format!("degree {} p {}: {:.3} <= {e:.3}", r.degree, row.p, ineq.lhs));
                }
                _ => {
                    passed = false;
                    parts.push(format!("degree {} p {}: missing ({:?})", r.degree, row.p, row.errors));
                }
            }
        }
    }
    CriterionOutcome::new(7, NAME, passed && !parts.is_empty(), parts.join("; "))
}

/// Exhaustive flat norm of a 1-chain on a planar grid with few squares,
/// for a norm with weight `w` per unit coefficient: depth-first search over
/// integer square coefficients, pruned by the mass spent so far.
pub fn exhaustive_flat_norm(s: &Chain, w: f64) -> f64 {
    let grid = s.grid();
    let h = grid.h;
    let squares = grid.cells(2);
    let edges = grid.cells(1);
    // Coefficient of S and incident squares with signs, per edge.
    let mut incident: Vec<Vec<(usize, i64)>> = vec![Vec::new(); edges.len()];
    for (qi, q) in squares.iter().enumerate() {
        for (f, sign) in q.faces() {
            let ei = edges.iter().position(|e| *e == f).expect("face of a grid square is a grid edge");
            incident[ei].push((qi, sign));
        }
    }
    let s_coeff: Vec<i64> = edges.iter().map(|e| s.get(e).coords()[0]).collect();
    // Edges whose cost is known once squares 0..=i are assigned.
    let mut finalise: Vec<Vec<usize>> = vec![Vec::new(); squares.len()];
    let mut free_edges = Vec::new();
    for (ei, inc) in incident.iter().enumerate() {
        match inc.iter().map(|x| x.0).max() {
            Some(last) => finalise[last].push(ei),
            None => free_edges.push(ei),
        }
    }
    let edge_w = w * h;
    let square_w = w * h * h;
    let base: f64 = free_edges.iter().map(|&e| edge_w * s_coeff[e].abs() as f64).sum();
    let mass_s: f64 = s_coeff.iter().map(|c| edge_w * c.abs() as f64).sum();

    struct Search<'a> {
        incident: &'a [Vec<(usize, i64)>],
        finalise: &'a [Vec<usize>],
        s_coeff: &'a [i64],
        edge_w: f64,
        square_w: f64,
        q: Vec<i64>,
        best: f64,
    }
    impl Search<'_> {
        fn go(&mut self, i: usize, spent: f64) {
            if spent >= self.best {
                return;
            }
            if i == self.q.len() {
                self.best = spent;
                return;
            }
            let bound = ((self.best - spent) / self.square_w).ceil() as i64;
            let mut values = vec![0i64];
            for v in 1..=bound {
                values.push(v);
                values.push(-v);
            }
            for v in values {
                self.q[i] = v;
                let mut cost = spent + self.square_w * v.abs() as f64;
                for &e in &self.finalise[i] {
                    let dq: i64 = self.incident[e].iter().map(|&(qi, sg)| sg * self.q[qi]).sum();
                    cost += self.edge_w * (self.s_coeff[e] - dq).abs() as f64;
                }
                self.go(i + 1, cost);
            }
            self.q[i] = 0;
        }
    }
    let mut search = Search {
        incident: &incident,
        finalise: &finalise,
        s_coeff: &s_coeff,
        edge_w,
        square_w,
        q: vec![0; squares.len()],
        best: mass_s * (1.0 + 1e-12) + 1e-12,
    };
    search.go(0, base);
    search.best.min(mass_s)
}

/// Random 1-chain with coefficients in `[-2, 2]` on a 2 x 2 planar grid:
/// sometimes a boundary plus noise, sometimes noise alone.
pub fn random_flat_case(rng: &mut ChaCha8Rng) -> Result<Chain> {
    let h = if rng.gen_bool(0.5) { 1.0 } else { 0.5 };
    let grid = CubicalGrid::new(vec![0.0, 0.0], h, vec![2, 2])?;
    let z = CoefficientGroup::integers();
    let mut q = Chain::zero(grid.clone(), 2, z.clone())?;
    if rng.gen_bool(0.6) {
        for c in grid.cells(2) {
            q.add_to(&c, &integer(rng.gen_range(-1..=1)))?;
        }
    }
    let mut s = q.boundary()?;
    let edges: Vec<Cell> = grid.cells(1);
    let mut out = Chain::zero(grid.clone(), 1, z)?;
    for e in &edges {
        let mut v = s.get(e).coords()[0];
        if rng.gen_bool(0.4) {
            v += rng.gen_range(-2..=2);
        }
        let v = v.clamp(-2, 2);
        if v != 0 {
            out.add_to(e, &integer(v))?;
        }
    }
    s = out;
    Ok(s)
}

/// 8. The LP flat norm equals the exhaustive integer optimum on 200 sampled
/// integer 1-chains over planar complexes of 25 cells.
pub fn criterion_8() -> CriterionOutcome {
    const NAME: &str = "flat norm oracle";
    let run = || -> Result<(bool, String)> {
        let norm = CostedNorm::circle(2.0)?;
        let w = norm.norm(&integer(1))?;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut mismatches = Vec::new();
        let mut worst: f64 = 0.0;
        for case in 0..200 {
            let s = random_flat_case(&mut rng)?;
            let lp = flat_norm(&s, &norm, None)?;
            let oracle = exhaustive_flat_norm(&s, w);
            let gap = (lp.value - oracle).abs() / oracle.max(1.0);
            worst = worst.max(gap);
            let via_lp = lp.method == FlatMethod::LinearProgram && lp.integrality == Integrality::Exact;
            if gap > 1e-9 || !via_lp {
                mismatches.push(format!("case {case}: {} vs {oracle} ({:?})", lp.value, lp.method));
            }
        }
        Ok((
            mismatches.is_empty(),
            format!("{} mismatches of 200 {mismatches:?}; worst relative gap {worst:.1e}", mismatches.len()),
        ))
    };
    match run() {
        Ok((passed, detail)) => CriterionOutcome::new(8, NAME, passed, detail),
        Err(e) => CriterionOutcome::error(8, NAME, e),
    }
}

/// Norms of every element by relaxing `d(x + g) <= d(x) + E(g)` over all
/// elements and listed costs until nothing changes; infinite means
/// unreachable.
pub fn brute_force_norms(table: &CostTable) -> Vec<(GroupElement, f64)> {
    let group = table.group();
    let elements = group.elements().expect("finite group");
    let index = |g: &GroupElement| elements.iter().position(|e| e == g).expect("element of the group");
    let mut d = vec![f64::INFINITY; elements.len()];
    d[index(&group.zero())] = 0.0;
    loop {
        let mut changed = false;
        for (xi, x) in elements.iter().enumerate() {
            if !d[xi].is_finite() {
                continue;
            }
            for (g, c) in table.entries() {
                let yi = index(&group.add(x, g));
                if d[xi] + c < d[yi] {
                    d[yi] = d[xi] + c;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    elements.into_iter().zip(d).collect()
}

/// A random finite group with at most 24 elements and a cost table of
/// dyadic costs, so that every sum of costs is exact.
pub fn random_table(rng: &mut ChaCha8Rng) -> Result<CostTable> {
    let group = if rng.gen_bool(0.5) {
        CoefficientGroup::cyclic(rng.gen_range(2..=24))?
    } else {
        let a = rng.gen_range(2..=4);
        let b = rng.gen_range(2..=24 / a);
        CoefficientGroup::new(0, vec![a, b])?
    };
    let elements = group.elements().expect("finite group");
    let mut entries = Vec::new();
    for g in elements.iter().filter(|g| !g.is_zero()) {
        // One draw per pair {g, -g}.
        if group.neg(g) < *g {
            continue;
        }
        if rng.gen_bool(0.35) {
            let c = rng.gen_range(16..=256) as f64 / 64.0;
            entries.push((g.clone(), c));
            entries.push((group.neg(g), c));
        }
    }
    if entries.is_empty() {
        entries.push((group.generators()[0].clone(), 1.0));
    }
    Ok(CostTable::new(group, entries, Extension::None)?)
}

/// 9. On 100 random cost tables the norm axioms hold exactly, the gap is
/// positive, and `decomposition_norm` matches brute force.
pub fn criterion_9() -> CriterionOutcome {
    const NAME: &str = "norm axioms and gap";
    let run = || -> Result<(bool, String)> {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut failures = Vec::new();
        for t in 0..100 {
            let table = random_table(&mut rng)?;
            let group = table.group().clone();
            let oracle = brute_force_norms(&table);
            let mut norms = Vec::new();
            for (g, want) in &oracle {
                match decomposition_norm(&table, g) {
                    Ok(dec) => {
                        if dec.value != *want {
                            failures.push(format!("table {t}: |{g}| = {} but brute force gives {want}", dec.value));
                        }
                        let sum = dec.summands.iter().fold(group.zero(), |a, s| group.add(&a, s));
                        if sum != *g {
                            failures.push(format!("table {t}: decomposition of {g} sums to {sum}"));
                        }
                        norms.push((g.clone(), dec.value));
                    }
                    Err(gammaflow::Error::Unreachable(_)) if want.is_infinite() => {}
                    Err(e) => failures.push(format!("table {t}: {g}: {e}")),
                }
            }
            let norm_of = |g: &GroupElement| norms.iter().find(|(h, _)| h == g).map(|x| x.1);
            for (g, v) in &norms {
                if (*v == 0.0) != g.is_zero() {
                    failures.push(format!("table {t}: definiteness fails at {g}"));
                }
                if norm_of(&group.neg(g)) != Some(*v) {
                    failures.push(format!("table {t}: symmetry fails at {g}"));
                }
                for (h, w) in &norms {
                    if let Some(s) = norm_of(&group.add(g, h)) {
                        if s > v + w {
                            failures.push(format!("table {t}: triangle fails at {g}, {h}"));
                        }
                    }
                }
            }
            let gap = norm_gap(&table)?;
            let want = norms.iter().filter(|(g, _)| !g.is_zero()).map(|x| x.1).fold(f64::INFINITY, f64::min);
            if !(gap > 0.0 && gap == want) {
                failures.push(format!("table {t}: gap {gap} vs {want}"));
            }
        }
        Ok((failures.is_empty(), format!("{} failures over 100 tables {failures:?}", failures.len())))
    };
    match run() {
        Ok((passed, detail)) => CriterionOutcome::new(9, NAME, passed, detail),
        Err(e) => CriterionOutcome::error(9, NAME, e),
    }
}

/// 10. Numerical `|sigma|_1.99` from 256-sample loops agrees with `|sigma|_2`
/// within 1% for the classes 1, 2 and 3.
pub fn criterion_10() -> CriterionOutcome {
    const NAME: &str = "norm convergence as p tends to 2";
    let run = || -> Result<(bool, String)> {
        let exact = CostedNorm::circle(2.0)?;
        let mut passed = true;
        let mut parts = Vec::new();
        for d in 1..=3 {
            let sigma = integer(d);
            let row = &converging_norms(&LoopTarget::Circle, &sigma, &[1.99], 2.0, EnergyMode::Numeric { m: 256 })?[0];
            let want = exact.norm(&sigma)?;
            let rel = (row.norm / want - 1.0).abs();
            passed &= rel <= 0.01;
            parts.push(format!("|{d}|_1.99 = {:.5} vs |{d}|_2 = {want:.5} ({rel:.1e})", row.norm));
        }
        Ok((passed, parts.join("; ")))
    };
    match run() {
        Ok((passed, detail)) => CriterionOutcome::new(10, NAME, passed, detail),
        Err(e) => CriterionOutcome::error(10, NAME, e),
    }
}

/// 11. The ratio `||g'||_inf / ||g'||_p^(1/alpha)` over minimising loops of
/// degree at most 3 stays within a factor 2 across `p` in {1.5, 2, 3}.
pub fn criterion_11() -> CriterionOutcome {
    const NAME: &str = "p-uniform gradient bound on minimising loops";
    let run = || -> Result<(bool, String)> {
        let mut passed = true;
        let mut parts = Vec::new();
        for d in 1..=3i64 {
            let mut ratios = Vec::new();
            for p in [1.5, 2.0, 3.0] {
                let m = minimize_circle_loop(d, p, 128, d as u64, &loop_descent_config())?;
                ratios.push(check_gradient_bound(&m.discrete_loop, 1.5)?.ratio);
            }
            let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = ratios.iter().cloned().fold(0.0, f64::max);
            let band = hi / lo;
            passed &= band <= 2.0;
            parts.push(format!("degree {d}: ratios {ratios:.4?}, band {band:.2} <= 2"));
        }
        Ok((passed, parts.join("; ")))
    };
    match run() {
        Ok((passed, detail)) => CriterionOutcome::new(11, NAME, passed, detail),
        Err(e) => CriterionOutcome::error(11, NAME, e),
    }
}

/// 12. Radial collapse on 20 seeded smooth fields has measured constants at
/// most 10, and the polar model computation matches its prediction to
/// `1e-9`.
pub fn criterion_12() -> CriterionOutcome {
    const NAME: &str = "radial collapse estimates";
    let run = || -> Result<(bool, String)> {
        let lat = Lattice::new(vec![0.0, 0.0], 1.0 / 64.0, vec![65, 65])?;
        let dom = Domain::Box { lo: vec![-0.01, -0.01], hi: vec![1.01, 1.01] };
        let grid = CubicalGrid::new(vec![0.0, 0.0], 1.0 / 16.0, vec![16, 16])?;
        let mut worst_e: f64 = 0.0;
        let mut worst_d: f64 = 0.0;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let modes: Vec<[f64; 4]> = (0..4)
                .map(|_| [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(0.0..6.3), rng.gen_range(-1.0..1.0)])
                .collect();
            let p = [1.5, 1.75, 1.9, 1.99][seed as usize % 4];
            let f = Field::from_fn(lat.clone(), dom.clone(), p, |x| {
                unit(modes.iter().map(|m| m[3] * (m[0] * x[0] + m[1] * x[1] + m[2]).sin()).sum())
            })?;
            let c = radial_collapse(&f, 2, &grid)?;
            worst_e = worst_e.max(c.c_energy);
            worst_d = worst_d.max(c.c_distance);
        }
        let mut worst_polar: f64 = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let n = rng.gen_range(16..64);
            let a = rng.gen_range(-1.0..1.0);
            let k = rng.gen_range(1..4) as f64;
            let deg = rng.gen_range(-2..=2) as f64;
            let angles: Vec<f64> = (0..n)
                .map(|i| {
                    let t = TAU * i as f64 / n as f64;
                    deg * t + a * (k * t).sin()
                })
                .collect();
            let pc = polar_collapse_check(&angles, rng.gen_range(0.1..1.0), rng.gen_range(1.1..1.99))?;
            worst_polar = worst_polar.max((pc.collapsed - pc.predicted).abs() / pc.predicted.max(1.0));
        }
        Ok((
            worst_e <= 10.0 && worst_d <= 10.0 && worst_polar <= 1e-9,
            format!("energy constant {worst_e:.3} <= 10, distance constant {worst_d:.3} <= 10, polar relative gap {worst_polar:.1e} <= 1e-9"),
        ))
    };
    match run() {
        Ok((passed, detail)) => CriterionOutcome::new(12, NAME, passed, detail),
        Err(e) => CriterionOutcome::error(12, NAME, e),
    }
}

/// Runs all twelve criteria in order. `sweeps` errors are reported on the
/// criteria that need them.
pub fn all_criteria() -> Vec<CriterionOutcome> {
    let mut out = vec![criterion_1()];
    match reference_sweeps() {
        Ok(s) => {
            out.push(criterion_2(&s));
            out.push(criterion_3(&s));
            out.push(criterion_4(&s));
            out.push(criterion_5());
            out.push(criterion_6());
            out.push(criterion_7(&s));
        }
        Err(e) => {
            let msg = format!("{e:#}");
            for (id, name) in [(2, "gamma limit of the energies"), (3, "flat convergence of the singular chains"), (4, "plateau problem of the limit")] {
                out.push(CriterionOutcome::new(id, name, false, format!("sweep failed: {msg}")));
            }
            out.push(criterion_5());
            out.push(criterion_6());
            out.push(CriterionOutcome::new(7, "certificate consistency", false, format!("sweep failed: {msg}")));
        }
    }
    out.extend([criterion_8(), criterion_9(), criterion_10(), criterion_11(), criterion_12()]);
    out
}
