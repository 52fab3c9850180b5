//! Ball-construction lower bounds for point singularities.
//!
//! The energy of a map outside a few points is bounded below by growing balls
//! around the points with nonzero class and merging them when they touch.
//! Every ball carries a credit, a lower bound on the energy inside it built
//! from annulus estimates, and the final collection certifies
//! `|sigma|_p / (k - p) - C |sigma|_p log(|sigma|_p / (alpha_p r))`.
//!
//! Growth is synchronised by a parameter `t`: a ball of class `g` created
//! with radius `rho` has radius `max(rho, t |g|_p)`. Two balls that touch
//! are replaced by the ball of radius `rho_1 + rho_2` centred at the
//! radius-weighted mean of the centres, which contains both and keeps the
//! total credit target `sum rad B / t * Lambda(t)` unchanged.

use serde::{Deserialize, Serialize};

use crate::chains::norm_from_ref;
use crate::coeffgroup::{CostedNorm, GroupElement};
use crate::error::{Error, Result};
use crate::report::Inequality;

/// Relative slack for touching, disjointness and credit comparisons.
pub const BALL_TOL: f64 = 1e-12;
pub const BALL_SCHEMA_VERSION: u32 = 1;

/// `Lambda_p(s) = (alpha s)^{k-p} / (k-p)`.
pub fn lambda_p(s: f64, alpha: f64, k: f64, p: f64) -> Result<f64> {
    if !(p < k) {
        return Err(Error::Parameter(format!("need p < k, got p = {p}, k = {k}")));
    }
    if !(s >= 0.0) || !(alpha > 0.0) {
        return Err(Error::Parameter(format!("need s >= 0 and alpha > 0, got s = {s}, alpha = {alpha}")));
    }
    Ok((alpha * s).powf(k - p) / (k - p))
}

/// Lower bound for the energy on the shell `a < |x| < b` of a map whose
/// class on the spheres is `sigma`: `|sigma|_p (Lambda(b/|sigma|_p) -
/// Lambda(a/|sigma|_p))`, and 0 when `sigma` is trivial.
pub fn annulus_bound(sigma: &GroupElement, a: f64, b: f64, k: f64, norm: &CostedNorm) -> Result<f64> {
    if !(0.0 <= a && a < b) {
        return Err(Error::Parameter(format!("need 0 <= a < b, got a = {a}, b = {b}")));
    }
    let p = norm.p();
    if !(p > k - 1.0) {
        return Err(Error::Parameter(format!("need p > k - 1, got p = {p}")));
    }
    let n = norm.norm(sigma)?;
    if n == 0.0 {
        return Ok(0.0);
    }
    let alpha = norm.alpha();
    Ok(n * (lambda_p(b / n, alpha, k, p)? - lambda_p(a / n, alpha, k, p)?))
}

/// The region holding the singularities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BallDomain {
    Disk { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl BallDomain {
    pub fn dim(&self) -> usize {
        match self {
            BallDomain::Disk { center, .. } => center.len(),
            BallDomain::Box { lo, .. } => lo.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            BallDomain::Disk { center, radius } => !center.is_empty() && *radius > 0.0,
            BallDomain::Box { lo, hi } => !lo.is_empty() && lo.len() == hi.len() && lo.iter().zip(hi).all(|(a, b)| a < b),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(format!("degenerate domain {self:?}")))
        }
    }

    /// Distance from `x` to the boundary, positive inside.
    pub fn depth(&self, x: &[f64]) -> f64 {
        match self {
            BallDomain::Disk { center, radius } => radius - dist(x, center),
            BallDomain::Box { lo, hi } => x
                .iter()
                .zip(lo)
                .zip(hi)
                .map(|((v, a), b)| (v - a).min(b - v))
                .fold(f64::INFINITY, f64::min),
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Singularity {
    pub point: Vec<f64>,
    pub class: Vec<i64>,
}

/// Point singularities in a domain with a collar of width `collar`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingularityConfig {
    pub domain: BallDomain,
    pub collar: f64,
    pub singularities: Vec<Singularity>,
    pub boundary_class: Vec<i64>,
    /// Target of the norm, completed with the exponent: `"circle"` gives
    /// the norm `circle_p<p>`.
    #[serde(default = "default_target")]
    pub target: String,
}

fn default_target() -> String {
    "circle".into()
}

impl SingularityConfig {
    pub fn norm_at(&self, p: f64) -> Result<CostedNorm> {
        norm_from_ref(&format!("{}_p{p}", self.target))
    }

    /// Checks the invariants against `norm`'s group.
    pub fn validate(&self, norm: &CostedNorm) -> Result<()> {
        self.domain.validate()?;
        if !(self.collar > 0.0 && self.collar <= 0.5) {
            return Err(Error::Validation(format!("collar must lie in (0, 1/2], got {}", self.collar)));
        }
        let group = norm.group();
        let k = self.domain.dim();
        let mut total = group.zero();
        for (i, s) in self.singularities.iter().enumerate() {
            if s.point.len() != k {
                return Err(Error::DimensionMismatch(format!("singularity {i} is not a point of R^{k}")));
            }
            let depth = self.domain.depth(&s.point);
            if !(depth > self.collar) {
                return Err(Error::Validation(format!(
                    "singularity {i} at {:?} lies within the collar (distance {depth} to the boundary)",
                    s.point
                )));
            }
            for (j, t) in self.singularities.iter().enumerate().take(i) {
                if s.point == t.point {
                    return Err(Error::Validation(format!("singularities {j} and {i} coincide")));
                }
            }
            total = group.add(&total, &group.element(&s.class)?);
        }
        let boundary = group.element(&self.boundary_class)?;
        if total != boundary {
            return Err(Error::Validation(format!(
                "classes sum to {total} but the boundary class is {boundary}"
            )));
        }
        Ok(())
    }
}

/// One ball of the collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
    pub class: Vec<i64>,
    pub class_norm: f64,
    /// Accumulated lower bound for the energy inside the ball.
    pub credit: f64,
    /// Indices of the singularities inside.
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Start,
    Expansion,
    Amalgamation,
    Stop,
}

/// A step of the growth process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallEvent {
    pub kind: EventKind,
    /// Growth parameter at the event.
    pub t: f64,
    pub balls: usize,
    /// `sum rad B / t * Lambda(t)` before and after the event.
    pub credit_before: f64,
    pub credit_after: f64,
}

/// A checked property of the final collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub id: String,
    pub description: String,
    pub holds: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallCollection {
    pub schema_version: u32,
    pub p: f64,
    pub k: usize,
    pub tau: f64,
    pub collar: f64,
    pub alpha: f64,
    pub boundary_norm: f64,
    pub balls: Vec<Ball>,
    /// `min rad B / |class B|_p` over balls with nonzero class.
    pub s: f64,
    pub events: Vec<BallEvent>,
    pub properties: Vec<PropertyCheck>,
    /// Sum of the credits, a lower bound for the energy of any map with
    /// these singularities.
    pub total_credit: f64,
    /// Whether `total_credit <= |boundary|_p / (k - p)`. Otherwise no map
    /// with these singularities has energy below `|boundary|_p / (k - p)`
    /// and the lemma's regime is not reached, so property failures are not
    /// violations.
    pub in_regime: bool,
}

impl BallCollection {
    pub fn all_properties_hold(&self) -> bool {
        self.properties.iter().all(|p| p.holds)
    }
}

struct Growing {
    center: Vec<f64>,
    rho: f64,
    class: GroupElement,
    norm: f64,
    credit: f64,
    radius: f64,
    members: Vec<usize>,
}

impl Growing {
    fn radius_at(&self, t: f64) -> f64 {
        if self.norm > 0.0 {
            self.rho.max(t * self.norm)
        } else {
            self.rho
        }
    }
}

/// Smallest `t' >= t` with `sum_i max(rho_i, t' a_i) >= target`, where
/// every term is nondecreasing and piecewise linear.
fn first_reach(terms: &[(f64, f64)], target: f64, t: f64) -> Option<f64> {
    let value = |x: f64| terms.iter().map(|&(rho, a)| if a > 0.0 { rho.max(x * a) } else { rho }).sum::<f64>();
    if value(t) >= target {
        return Some(t);
    }
    let mut breaks: Vec<f64> = terms
        .iter()
        .filter(|&&(_, a)| a > 0.0)
        .map(|&(rho, a)| rho / a)
        .filter(|&b| b > t)
        .collect();
    breaks.sort_by(f64::total_cmp);
    breaks.push(f64::INFINITY);
    let mut lo = t;
    for hi in breaks {
        let slope: f64 = terms.iter().filter(|&&(rho, a)| a > 0.0 && rho / a <= lo).map(|&(_, a)| a).sum();
        if slope > 0.0 {
            let root = lo + (target - value(lo)) / slope;
            if root <= hi {
                return Some(root);
            }
        }
        lo = hi;
    }
    None
}

fn touching(a: &Growing, b: &Growing) -> bool {
    let sum = a.radius + b.radius;
    dist(&a.center, &b.center) <= sum * (1.0 + BALL_TOL)
}

/// Runs the growth process up to `t = tau` at exponent `p`.
pub fn ball_construction(cfg: &SingularityConfig, tau: f64, p: f64) -> Result<BallCollection> {
    let norm = cfg.norm_at(p)?;
    cfg.validate(&norm)?;
    let k = cfg.domain.dim();
    let kf = k as f64;
    if !(p > kf - 1.0 && p < kf) {
        return Err(Error::Parameter(format!("p must lie in ({}, {k}), got {p}", k - 1)));
    }
    if !(tau > 0.0) {
        return Err(Error::Parameter(format!("tau must be positive, got {tau}")));
    }
    let group = norm.group().clone();
    let alpha = norm.alpha();
    let boundary_norm = norm.norm(&group.element(&cfg.boundary_class)?)?;
    let r = cfg.collar;
    // Hypothesis on tau, with the star norm read as the p-norm.
    if 4.0 * tau * boundary_norm > r {
        return Err(Error::Hypothesis(format!(
            "4 tau |boundary|_p = {} exceeds the collar r = {r}",
            4.0 * tau * boundary_norm
        )));
    }
    let lhs = (alpha * tau / 2.0).powf(kf - p);
    if !(lhs > 0.5) {
        return Err(Error::Hypothesis(format!("(alpha_p tau / 2)^(k-p) = {lhs} is not above 1/2")));
    }
    let lam = |s: f64| lambda_p(s, alpha, kf, p);

    let mut balls: Vec<Growing> = Vec::new();
    for (i, s) in cfg.singularities.iter().enumerate() {
        let class = group.element(&s.class)?;
        let n = norm.norm(&class)?;
        if n > 0.0 {
            balls.push(Growing {
                center: s.point.clone(),
                rho: 0.0,
                class,
                norm: n,
                credit: 0.0,
                radius: 0.0,
                members: vec![i],
            });
        }
    }
    // Initial scale: disjoint balls well inside the domain.
    let mut t0 = tau / 4.0;
    for (i, a) in balls.iter().enumerate() {
        t0 = t0.min(0.5 * cfg.domain.depth(&a.center) / a.norm);
        for b in &balls[..i] {
            t0 = t0.min(0.5 * dist(&a.center, &b.center) / (a.norm + b.norm));
        }
    }
    let mut t = t0;
    for b in &mut balls {
        b.radius = t * b.norm;
        b.credit = b.norm * lam(t)?;
    }
    let target = |balls: &[Growing], t: f64| -> Result<f64> { Ok(balls.iter().map(|b| b.radius).sum::<f64>() / t * lam(t)?) };
    let mut events = vec![BallEvent {
        kind: EventKind::Start,
        t,
        balls: balls.len(),
        credit_before: target(&balls, t)?,
        credit_after: target(&balls, t)?,
    }];

    while t < tau && !balls.is_empty() {
        // Next tangency, next contact with the boundary, or tau.
        let mut next = tau;
        for (i, a) in balls.iter().enumerate() {
            let depth = cfg.domain.depth(&a.center);
            if let Some(x) = first_reach(&[(a.rho, a.norm)], depth, t) {
                next = next.min(x);
            }
            for b in &balls[..i] {
                let d = dist(&a.center, &b.center);
                if let Some(x) = first_reach(&[(a.rho, a.norm), (b.rho, b.norm)], d, t) {
                    next = next.min(x);
                }
            }
        }
        let before = target(&balls, t)?;
        for b in &mut balls {
            let new_radius = b.radius_at(next);
            if new_radius > b.radius {
                b.credit += annulus_bound(&b.class, b.radius, new_radius, kf, &norm)?;
                b.radius = new_radius;
            }
        }
        t = next;
        events.push(BallEvent {
            kind: EventKind::Expansion,
            t,
            balls: balls.len(),
            credit_before: before,
            credit_after: target(&balls, t)?,
        });
        // Merge touching pairs until none are left.
        loop {
            let pair = (0..balls.len())
                .flat_map(|i| (0..i).map(move |j| (i, j)))
                .find(|&(i, j)| touching(&balls[i], &balls[j]));
            let Some((i, j)) = pair else { break };
            let before = target(&balls, t)?;
            let b = balls.swap_remove(i);
            let a = balls.swap_remove(j);
            let rho = a.radius + b.radius;
            let center: Vec<f64> = a
                .center
                .iter()
                .zip(&b.center)
                .map(|(x, y)| (a.radius * x + b.radius * y) / rho)
                .collect();
            let class = group.add(&a.class, &b.class);
            let n = norm.norm(&class)?;
            let mut members = a.members;
            members.extend(b.members);
            members.sort_unstable();
            balls.push(Growing {
                center,
                rho,
                class,
                norm: n,
                credit: a.credit + b.credit,
                radius: rho,
                members,
            });
            let after = target(&balls, t)?;
            if after < before * (1.0 - BALL_TOL) {
                return Err(Error::Validation(format!(
                    "credit dropped from {before} to {after} at an amalgamation"
                )));
            }
            events.push(BallEvent { kind: EventKind::Amalgamation, t, balls: balls.len(), credit_before: before, credit_after: after });
        }
        for b in &balls {
            let depth = cfg.domain.depth(&b.center);
            if b.radius >= depth * (1.0 - BALL_TOL) {
                return Err(Error::CollarTooThin(format!(
                    "ball of radius {} at {:?} reaches the boundary at t = {t} (distance {depth})",
                    b.radius, b.center
                )));
            }
        }
    }
    let s = balls
        .iter()
        .filter(|b| b.norm > 0.0)
        .map(|b| b.radius / b.norm)
        .fold(f64::INFINITY, f64::min);
    let s = if s.is_finite() { s } else { tau };
    events.push(BallEvent {
        kind: EventKind::Stop,
        t,
        balls: balls.len(),
        credit_before: target(&balls, t.max(t0))?,
        credit_after: target(&balls, t.max(t0))?,
    });
    let out_balls: Vec<Ball> = balls
        .iter()
        .map(|b| Ball {
            center: b.center.clone(),
            radius: b.radius,
            class: b.class.coords().to_vec(),
            class_norm: b.norm,
            credit: b.credit,
            members: b.members.clone(),
        })
        .collect();
    let total_credit: f64 = out_balls.iter().map(|b| b.credit).sum();
    let in_regime = total_credit <= boundary_norm / (kf - p) * (1.0 + BALL_TOL);
    let properties = check_properties(cfg, &norm, &out_balls, s, tau, boundary_norm, &lam)?;
    Ok(BallCollection {
        schema_version: BALL_SCHEMA_VERSION,
        p,
        k,
        tau,
        collar: r,
        alpha,
        boundary_norm,
        balls: out_balls,
        s,
        events,
        properties,
        total_credit,
        in_regime,
    })
}

fn check_properties(
    cfg: &SingularityConfig,
    norm: &CostedNorm,
    balls: &[Ball],
    s: f64,
    tau: f64,
    boundary_norm: f64,
    lam: &dyn Fn(f64) -> Result<f64>,
) -> Result<Vec<PropertyCheck>> {
    let group = norm.group();
    let inside = |b: &Ball, x: &[f64]| dist(&b.center, x) <= b.radius * (1.0 + BALL_TOL);
    let mut out = Vec::new();

    let mut uncovered = Vec::new();
    for (i, sing) in cfg.singularities.iter().enumerate() {
        if !group.element(&sing.class)?.is_zero() && !balls.iter().any(|b| inside(b, &sing.point)) {
            uncovered.push(i);
        }
    }
    let empty: Vec<usize> = (0..balls.len())
        .filter(|&j| {
            balls[j].class_norm > 0.0
                && !cfg
                    .singularities
                    .iter()
                    .any(|sg| !group.element(&sg.class).map(|g| g.is_zero()).unwrap_or(true) && inside(&balls[j], &sg.point))
        })
        .collect();
    out.push(PropertyCheck {
        id: "i".into(),
        description: "balls cover the nontrivial singularities and each nontrivial ball meets one".into(),
        holds: uncovered.is_empty() && empty.is_empty(),
        detail: format!("uncovered singularities {uncovered:?}, empty balls {empty:?}"),
    });

    let mut worst_overlap: f64 = 0.0;
    for (i, a) in balls.iter().enumerate() {
        for b in &balls[..i] {
            let over = a.radius + b.radius - dist(&a.center, &b.center);
            worst_overlap = worst_overlap.max(over / (a.radius + b.radius).max(1.0));
        }
    }
    let worst_depth = balls
        .iter()
        .map(|b| cfg.domain.depth(&b.center) - b.radius)
        .fold(f64::INFINITY, f64::min);
    out.push(PropertyCheck {
        id: "ii".into(),
        description: "balls lie strictly inside the domain with disjoint interiors".into(),
        holds: worst_overlap <= BALL_TOL && (balls.is_empty() || worst_depth > 0.0),
        detail: format!("largest relative overlap {worst_overlap:e}, smallest clearance {worst_depth}"),
    });

    let l = lam(s)?;
    let mut worst_credit = f64::INFINITY;
    for b in balls {
        let need = b.radius / s * l;
        worst_credit = worst_credit.min(b.credit - need * (1.0 - BALL_TOL));
    }
    out.push(PropertyCheck {
        id: "iii".into(),
        description: "every ball's credit is at least rad B / s * Lambda_p(s)".into(),
        holds: worst_credit >= 0.0,
        detail: format!("smallest credit surplus {worst_credit}"),
    });

    out.push(PropertyCheck {
        id: "iv".into(),
        description: "tau / 2 <= s <= tau".into(),
        holds: tau / 2.0 <= s && s <= tau * (1.0 + BALL_TOL),
        detail: format!("s = {s}, tau = {tau}"),
    });

    let radii: f64 = balls.iter().map(|b| b.radius).sum();
    let v = Inequality::new("sum of radii against 2 tau |boundary|_p", radii, 2.0 * tau * boundary_norm, BALL_TOL);
    out.push(PropertyCheck {
        id: "v".into(),
        description: "sum of radii is at most 2 tau |boundary class|_p".into(),
        holds: v.holds,
        detail: format!("{} <= {}", v.lhs, v.rhs),
    });
    Ok(out)
}

/// Both lower bounds for a boundary class `sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundCertificate {
    pub schema_version: u32,
    pub p: f64,
    pub k: usize,
    pub r: f64,
    pub sigma: Vec<i64>,
    pub sigma_norm_p: f64,
    pub sigma_norm_k: f64,
    pub alpha_p: f64,
    /// `|sigma|_p / (k-p) - C_p |sigma|_p log(|sigma|_p / (alpha_p r))`.
    pub bound_p: f64,
    /// `|sigma|_k / (k-p) - C_k |sigma|_k (log(|sigma|_k / r) + 1)`.
    pub bound_k: f64,
    pub c_p: f64,
    pub c_k: f64,
    /// `bound_p <= 0` for a nontrivial class: the certificate says nothing.
    pub vacuous: bool,
    /// `tau = r / (8 |sigma|_p)` when `(16 |sigma|_p / (alpha_p r))^{k-p} <
    /// 2`, the case where the ball construction is needed.
    pub tau: Option<f64>,
}

/// The constant in the bound at exponent `p`.
pub const C_P: f64 = 5.0 / std::f64::consts::LN_2;

/// Evaluates both bounds. `norm_p` is at exponent `p`, `norm_k` at `k`.
pub fn lower_bound_certificate(
    sigma: &GroupElement,
    k: usize,
    r: f64,
    norm_p: &CostedNorm,
    norm_k: &CostedNorm,
    c_k: f64,
) -> Result<LowerBoundCertificate> {
    if !(r > 0.0 && r <= 0.5) {
        return Err(Error::Parameter(format!("r must lie in (0, 1/2], got {r}")));
    }
    let p = norm_p.p();
    let kf = k as f64;
    if !(p > kf - 1.0 && p < kf) {
        return Err(Error::Parameter(format!("p must lie in ({}, {k}), got {p}", k - 1)));
    }
    let np = norm_p.norm(sigma)?;
    let nk = norm_k.norm(sigma)?;
    let alpha = norm_p.alpha();
    let x = kf - p;
    let (bound_p, bound_k) = if sigma.is_zero() {
        (0.0, 0.0)
    } else {
        (np / x - C_P * np * (np / (alpha * r)).ln(), nk / x - c_k * nk * ((nk / r).ln() + 1.0))
    };
    let tau = (!sigma.is_zero() && (16.0 * np / (alpha * r)).powf(x) < 2.0).then(|| r / (8.0 * np));
    Ok(LowerBoundCertificate {
        schema_version: BALL_SCHEMA_VERSION,
        p,
        k,
        r,
        sigma: sigma.coords().to_vec(),
        sigma_norm_p: np,
        sigma_norm_k: nk,
        alpha_p: alpha,
        bound_p,
        bound_k,
        c_p: C_P,
        c_k,
        vacuous: !sigma.is_zero() && bound_p <= 0.0,
        tau,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffgroup::CoefficientGroup;
    use std::f64::consts::{PI, TAU};

    fn z(d: i64) -> GroupElement {
        CoefficientGroup::integers().element(&[d]).unwrap()
    }

    fn disk_config(points: Vec<([f64; 2], i64)>) -> SingularityConfig {
        let total = points.iter().map(|p| p.1).sum();
        SingularityConfig {
            domain: BallDomain::Disk { center: vec![0.0, 0.0], radius: 1.0 },
            collar: 0.5,
            singularities: points.into_iter().map(|(x, d)| Singularity { point: x.to_vec(), class: vec![d] }).collect(),
            boundary_class: vec![total],
            target: "circle".into(),
        }
    }

    #[test]
    fn lambda_values() {
        assert_eq!(lambda_p(0.0, TAU, 2.0, 1.5).unwrap(), 0.0);
        assert!((lambda_p(1.0, TAU, 2.0, 1.5).unwrap() - 5.0133).abs() < 1e-4);
        assert!((lambda_p(1.0 / TAU, TAU, 2.0, 1.7).unwrap() - 1.0 / 0.3).abs() < 1e-12);
        assert!(lambda_p(1.0, TAU, 2.0, 2.0).is_err());
    }

    #[test]
    fn annulus_bound_values() {
        let norm = CostedNorm::circle(1.5).unwrap();
        assert_eq!(annulus_bound(&z(0), 0.5, 1.0, 2.0, &norm).unwrap(), 0.0);
        let v = annulus_bound(&z(1), 0.5, 1.0, 2.0, &norm).unwrap();
        assert!((v - 3.6806).abs() < 1e-4);
        assert!((v - TAU * (1.0 - 0.5f64.sqrt()) / 0.5).abs() < 1e-12);
        assert!(annulus_bound(&z(1), 1.0, 1.0, 2.0, &norm).is_err());
    }

    #[test]
    fn single_singularity() {
        let cfg = disk_config(vec![([0.1, 0.0], 1)]);
        let tau = 0.5 / (8.0 * TAU);
        let c = ball_construction(&cfg, tau, 1.95).unwrap();
        assert_eq!(c.balls.len(), 1);
        assert_eq!(c.balls[0].center, vec![0.1, 0.0]);
        assert_eq!(c.balls[0].class, vec![1]);
        assert!(c.s >= tau / 2.0 && c.s <= tau);
        assert!(c.all_properties_hold(), "{:?}", c.properties);
        assert!(c.in_regime);
    }

    #[test]
    fn close_pair_merges() {
        let cfg = disk_config(vec![([0.0, 0.0], 1), ([0.0001, 0.0], 1)]);
        let tau = 0.5 / (8.0 * 2.0 * TAU);
        let c = ball_construction(&cfg, tau, 1.95).unwrap();
        assert_eq!(c.balls.len(), 1);
        assert_eq!(c.balls[0].class, vec![2]);
        assert!(c.events.iter().any(|e| e.kind == EventKind::Amalgamation));
        assert!(c.all_properties_hold(), "{:?}", c.properties);
    }

    #[test]
    fn hypothesis_failures_are_named() {
        let cfg = disk_config(vec![([0.0, 0.0], 1)]);
        match ball_construction(&cfg, 1.0, 1.95) {
            Err(Error::Hypothesis(m)) => assert!(m.contains("4 tau")),
            other => panic!("{other:?}"),
        }
        match ball_construction(&cfg, 1e-9, 1.95) {
            Err(Error::Hypothesis(m)) => assert!(m.contains("1/2")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn certificate_values() {
        let c = lower_bound_certificate(&z(1), 2, 0.5, &CostedNorm::circle(1.99).unwrap(), &CostedNorm::circle(2.0).unwrap(), C_P)
            .unwrap();
        assert!((c.bound_p - 596.90).abs() < 0.01, "{}", c.bound_p);
        assert!(!c.vacuous);
        let c = lower_bound_certificate(&z(1), 2, 0.5, &CostedNorm::circle(1.5).unwrap(), &CostedNorm::circle(2.0).unwrap(), C_P)
            .unwrap();
        assert!((c.bound_p - (4.0 * PI - 5.0 * TAU)).abs() < 1e-9);
        assert!(c.vacuous);
        let c = lower_bound_certificate(&z(0), 2, 0.5, &CostedNorm::circle(1.9).unwrap(), &CostedNorm::circle(2.0).unwrap(), C_P)
            .unwrap();
        assert_eq!((c.bound_p, c.bound_k, c.vacuous), (0.0, 0.0, false));
        assert!(lower_bound_certificate(&z(1), 2, 0.7, &CostedNorm::circle(1.9).unwrap(), &CostedNorm::circle(2.0).unwrap(), C_P)
            .is_err());
    }

    #[test]
    fn first_reach_piecewise() {
        // max(1, 2t) + max(0, t) reaches 4 at t = 4/3.
        let x = first_reach(&[(1.0, 2.0), (0.0, 1.0)], 4.0, 0.1).unwrap();
        assert!((x - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(first_reach(&[(1.0, 0.0)], 2.0, 0.0), None);
    }
}
