//! Minimal p-energies of loops in a free homotopy class.
//!
//! Loops are parametrised over a circle of length `2 pi`, so a constant-speed
//! loop of degree `d` into the unit circle has energy `2 pi |d|^p`. Targets
//! other than the round circle are modelled by the length of the shortest
//! closed geodesic in each class, with energy `(2 pi)^(1-p) l^p`.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coeffgroup::{CoefficientGroup, CostTable, CostedNorm, Extension, GroupElement};
use crate::error::{Error, Result};
use crate::optim::{minimize, DescentConfig, DescentReport, Objective};

/// Gradient norm below which a discrete loop counts as a critical point.
pub const MINIMIZER_GRAD_TOL: f64 = 1e-8;

/// The target manifold, through its loop energies.
#[derive(Debug, Clone, PartialEq)]
pub enum LoopTarget {
    /// The unit circle; classes are degrees in `Z`.
    Circle,
    /// A target described by the length of the shortest closed geodesic in
    /// each class.
    LengthModel {
        group: CoefficientGroup,
        lengths: BTreeMap<GroupElement, f64>,
    },
}

impl LoopTarget {
    /// Validates a length model: positive lengths, symmetric under `-`.
    pub fn length_model(
        group: CoefficientGroup,
        lengths: impl IntoIterator<Item = (GroupElement, f64)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (g, l) in lengths {
            if g.is_zero() {
                continue;
            }
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Validation(format!("geodesic length of {g} must be positive")));
            }
            map.insert(g, l);
        }
        for (g, l) in map.clone() {
            let ng = group.neg(&g);
            match map.get(&ng) {
                Some(&m) if m != l => {
                    return Err(Error::Validation(format!(
                        "geodesic lengths of {g} and {ng} differ"
                    )))
                }
                Some(_) => {}
                None => {
                    map.insert(ng, l);
                }
            }
        }
        Ok(Self::LengthModel {
            group,
            lengths: map,
        })
    }

    pub fn group(&self) -> CoefficientGroup {
        match self {
            Self::Circle => CoefficientGroup::integers(),
            Self::LengthModel { group, .. } => group.clone(),
        }
    }
}

fn check_supercritical(p: f64) -> Result<()> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::SubcriticalExponent(p));
    }
    Ok(())
}

/// The minimal loop energy `E_p(sigma)` in closed form.
pub fn energy_ep(target: &LoopTarget, sigma: &GroupElement, p: f64) -> Result<f64> {
    check_supercritical(p)?;
    if sigma.is_zero() {
        return Ok(0.0);
    }
    match target {
        LoopTarget::Circle => {
            let [d] = sigma.coords() else {
                return Err(Error::DimensionMismatch("circle classes are integers".into()));
            };
            Ok(TAU * (d.abs() as f64).powf(p))
        }
        LoopTarget::LengthModel { lengths, .. } => {
            let l = lengths
                .get(sigma)
                .ok_or_else(|| Error::Unreachable(sigma.to_string()))?;
            Ok(TAU.powf(1.0 - p) * l.powf(p))
        }
    }
}

/// The cost table `g -> E_p(g)` of a target.
pub fn cost_table(target: &LoopTarget, p: f64) -> Result<CostTable> {
    check_supercritical(p)?;
    match target {
        LoopTarget::Circle => {
            let g = CoefficientGroup::integers();
            CostTable::new(
                g.clone(),
                [(g.element(&[1])?, TAU)],
                Extension::PowerLaw {
                    exponent: p,
                    scale: TAU,
                },
            )
        }
        LoopTarget::LengthModel { group, lengths } => {
            let mut entries = Vec::new();
            for g in lengths.keys() {
                entries.push((g.clone(), energy_ep(target, g, p)?));
            }
            CostTable::new(group.clone(), entries, Extension::None)
        }
    }
}

/// Samples of a closed loop in the unit circle, `samples[m]` identified
/// with `samples[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteLoop {
    pub samples: Vec<[f64; 2]>,
    pub degree: i64,
    pub p: f64,
}

fn wrap(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(TAU) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

impl DiscreteLoop {
    pub fn from_angles(theta: &[f64], p: f64) -> Result<Self> {
        if theta.len() < 8 {
            return Err(Error::Parameter(format!(
                "a loop needs at least 8 samples, got {}",
                theta.len()
            )));
        }
        let samples: Vec<[f64; 2]> = theta.iter().map(|t| [t.cos(), t.sin()]).collect();
        let degree = winding(&samples);
        Ok(Self { samples, degree, p })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Parameter step `2 pi / m`.
    pub fn dt(&self) -> f64 {
        TAU / self.len() as f64
    }

    /// `sum |g_{i+1} - g_i|^p / dt^(p-1)`.
    pub fn energy(&self) -> f64 {
        let dt = self.dt();
        let m = self.len();
        (0..m)
            .map(|i| chord(self.samples[i], self.samples[(i + 1) % m]).powf(self.p))
            .sum::<f64>()
            / dt.powf(self.p - 1.0)
    }

    /// Norm of the gradient of [`Self::energy`] with respect to the sample
    /// angles.
    pub fn grad_norm(&self) -> f64 {
        let theta: Vec<f64> = self.samples.iter().map(|s| s[1].atan2(s[0])).collect();
        let obj = LoopObjective {
            degree: 0,
            p: self.p,
            m: self.len(),
        };
        // Re-lift so that the closing difference carries the winding.
        let mut lifted = theta.clone();
        for i in 1..lifted.len() {
            lifted[i] = lifted[i - 1] + wrap(theta[i] - theta[i - 1]);
        }
        let obj = LoopObjective {
            degree: self.degree,
            ..obj
        };
        let mut g = vec![0.0; lifted.len()];
        obj.value_grad(&lifted, &mut g);
        g.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

fn chord(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn winding(samples: &[[f64; 2]]) -> i64 {
    let m = samples.len();
    let total: f64 = (0..m)
        .map(|i| {
            let (a, b) = (samples[i], samples[(i + 1) % m]);
            wrap(b[1].atan2(b[0]) - a[1].atan2(a[0]))
        })
        .sum();
    (total / TAU).round() as i64
}

/// Discrete loop energy as a function of lifted sample angles.
struct LoopObjective {
    degree: i64,
    p: f64,
    m: usize,
}

impl LoopObjective {
    fn delta(&self, x: &[f64], i: usize) -> f64 {
        if i + 1 < self.m {
            x[i + 1] - x[i]
        } else {
            x[0] + TAU * self.degree as f64 - x[i]
        }
    }
}

impl Objective for LoopObjective {
    fn dim(&self) -> usize {
        self.m
    }

    fn value_grad(&self, x: &[f64], g: &mut [f64]) -> f64 {
        let dt = TAU / self.m as f64;
        let scale = dt.powf(1.0 - self.p);
        g.iter_mut().for_each(|v| *v = 0.0);
        let mut e = 0.0;
        for i in 0..self.m {
            let d = self.delta(x, i);
            let c = 2.0 * (0.5 * d).sin().abs();
            if c == 0.0 {
                continue;
            }
            e += c.powf(self.p);
            // d/dd of (2|sin(d/2)|)^p.
            let de = self.p * c.powf(self.p - 1.0) * (0.5 * d).cos() * d.signum() * scale;
            let j = (i + 1) % self.m;
            g[j] += de;
            g[i] -= de;
        }
        e * scale
    }

    fn admissible(&self, x: &[f64]) -> bool {
        (0..self.m).all(|i| self.delta(x, i).abs() < PI)
    }
}

impl LoopObjective {
    /// Newton step `H^-1 g` with the rotation gauge fixed by `dx_0 = 0`, or
    /// `None` if the Hessian is not positive on the differences.
    fn newton_step(&self, x: &[f64], g: &[f64]) -> Option<Vec<f64>> {
        let m = self.m;
        let p = self.p;
        let scale = (TAU / m as f64).powf(1.0 - p);
        let mut f2 = vec![0.0; m];
        for (i, v) in f2.iter_mut().enumerate() {
            let d = self.delta(x, i);
            let c = 2.0 * (0.5 * d).sin().abs();
            if c < 1e-8 {
                return None;
            }
            let cs = (0.5 * d).cos();
            *v = scale * (p * (p - 1.0) * c.powf(p - 2.0) * cs * cs - 0.25 * p * c.powf(p));
            if !(*v > 0.0) {
                return None;
            }
        }
        // Reduced system on nodes 1..m.
        let n = m - 1;
        let mut a = vec![vec![0.0; n + 1]; n];
        for j in 1..m {
            let r = j - 1;
            let prev = f2[j - 1];
            let next = f2[j];
            a[r][r] = prev + next;
            if j + 1 < m {
                a[r][r + 1] = -next;
            }
            if j >= 2 {
                a[r][r - 1] = -prev;
            }
            a[r][n] = g[j];
        }
        for c in 0..n {
            let piv = (c..n).max_by(|&i, &k| a[i][c].abs().total_cmp(&a[k][c].abs()))?;
            a.swap(c, piv);
            let d = a[c][c];
            if d.abs() < 1e-300 {
                return None;
            }
            for r in c + 1..n {
                let f = a[r][c] / d;
                if f != 0.0 {
                    for k in c..=n {
                        a[r][k] -= f * a[c][k];
                    }
                }
            }
        }
        let mut sol = vec![0.0; m];
        for c in (0..n).rev() {
            let mut v = a[c][n];
            for k in c + 1..n {
                v -= a[c][k] * sol[k + 1];
            }
            sol[c + 1] = v / a[c][c];
        }
        Some(sol)
    }

    /// Newton iterations from a near-minimiser, accepted while they shrink
    /// the gradient without raising the energy beyond rounding.
    fn polish(&self, report: &mut DescentReport, grad_tol: f64) {
        let mut g = vec![0.0; self.m];
        let mut gt = vec![0.0; self.m];
        let mut e = self.value_grad(&report.x, &mut g);
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        for _ in 0..30 {
            let gn = norm(&g);
            if gn <= grad_tol {
                break;
            }
            let Some(step) = self.newton_step(&report.x, &g) else { break };
            let mut t = 1.0;
            let mut done = false;
            for _ in 0..30 {
                let xt: Vec<f64> = report.x.iter().zip(&step).map(|(a, b)| a - t * b).collect();
                if self.admissible(&xt) {
                    let et = self.value_grad(&xt, &mut gt);
                    if et <= e + crate::optim::ROUNDING_SLACK * e.abs().max(1.0) && norm(&gt) < gn {
                        report.x = xt;
                        e = et;
                        std::mem::swap(&mut g, &mut gt);
                        report.energies.push(e);
                        report.iterations += 1;
                        done = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !done {
                break;
            }
        }
        report.energy = e;
        report.grad_norm = norm(&g);
        if report.grad_norm <= grad_tol {
            report.reason = crate::optim::StopReason::Gradient;
        }
    }
}

/// Result of minimising the discrete loop energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopMinimization {
    pub discrete_loop: DiscreteLoop,
    pub energy: f64,
    pub report: DescentReport,
}

/// Descent settings used for loops.
pub fn loop_descent_config() -> DescentConfig {
    DescentConfig {
        max_iter: 20_000,
        grad_tol: 1e-11,
        ..DescentConfig::default()
    }
}

/// Minimises the discrete energy over degree-`degree` loops with `m`
/// samples, starting from a seeded perturbation of the constant-speed loop.
pub fn minimize_circle_loop(
    degree: i64,
    p: f64,
    m: usize,
    seed: u64,
    cfg: &DescentConfig,
) -> Result<LoopMinimization> {
    check_supercritical(p)?;
    if m < 8 {
        return Err(Error::Parameter(format!("a loop needs at least 8 samples, got {m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.3..0.3)).collect();
    let phase: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..TAU)).collect();
    let x0: Vec<f64> = (0..m)
        .map(|i| {
            let t = TAU * i as f64 / m as f64;
            let wiggle: f64 = (0..3)
                .map(|k| amp[k] / (k + 1) as f64 * ((k + 1) as f64 * t + phase[k]).sin())
                .sum();
            degree as f64 * t + wiggle
        })
        .collect();
    let obj = LoopObjective { degree, p, m };
    if !obj.admissible(&x0) {
        return Err(Error::Parameter(format!(
            "{m} samples cannot resolve a degree {degree} loop"
        )));
    }
    let mut report = minimize(&obj, &x0, cfg);
    obj.polish(&mut report, cfg.grad_tol);
    let discrete_loop = DiscreteLoop {
        samples: report.x.iter().map(|t| [t.cos(), t.sin()]).collect(),
        degree,
        p,
    };
    Ok(LoopMinimization {
        energy: report.energy,
        discrete_loop,
        report,
    })
}

/// Minimal discrete energy of degree-`degree` loops with `m` samples.
pub fn energy_ep_numeric(degree: i64, p: f64, m: usize) -> Result<f64> {
    Ok(minimize_circle_loop(degree, p, m, 0, &loop_descent_config())?.energy)
}

/// The quantities of the sup-norm gradient bound on a minimising loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBound {
    /// Discrete sup norm of the difference quotient.
    pub lhs: f64,
    /// `||g'||_{L^p}`, unnormalised.
    pub lp_norm: f64,
    /// `1 - 1/p`.
    pub alpha: f64,
    /// `||g'||_{L^p}^(1/alpha)`.
    pub rhs_without_c: f64,
    pub ratio: f64,
}

/// Evaluates `||g'||_inf <= C ||g'||_p^(1/alpha)` without the constant.
pub fn check_gradient_bound(lp: &DiscreteLoop, p0: f64) -> Result<GradientBound> {
    check_supercritical(p0)?;
    if lp.p < p0 {
        return Err(Error::Parameter(format!(
            "loop exponent {} lies below p0 = {p0}",
            lp.p
        )));
    }
    let gn = lp.grad_norm();
    if !(gn < MINIMIZER_GRAD_TOL) {
        return Err(Error::NotMinimizer(gn));
    }
    let m = lp.len();
    let dt = lp.dt();
    let lhs = (0..m)
        .map(|i| chord(lp.samples[i], lp.samples[(i + 1) % m]) / dt)
        .fold(0.0, f64::max);
    let lp_norm = lp.energy().powf(1.0 / lp.p);
    let alpha = 1.0 - 1.0 / lp.p;
    let rhs = lp_norm.powf(1.0 / alpha);
    let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
    Ok(GradientBound {
        lhs,
        lp_norm,
        alpha,
        rhs_without_c: rhs,
        ratio,
    })
}

/// How loop energies are evaluated when building norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EnergyMode {
    ClosedForm,
    /// Discrete minimisation with the given number of samples (circle only).
    Numeric { m: usize },
}

/// One row of [`converging_norms`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormRow {
    pub p: f64,
    pub energy: f64,
    pub norm: f64,
    pub alpha: f64,
}

/// Builds the norm induced by `E_p` at every exponent of `p_list`.
pub fn costed_norm(target: &LoopTarget, p: f64, mode: EnergyMode, max_class: i64) -> Result<CostedNorm> {
    match (mode, target) {
        (EnergyMode::ClosedForm, _) => CostedNorm::new(cost_table(target, p)?, p),
        (EnergyMode::Numeric { m }, LoopTarget::Circle) => {
            let g = CoefficientGroup::integers();
            let mut entries = Vec::new();
            for d in 1..=max_class.max(1) {
                entries.push((g.element(&[d])?, energy_ep_numeric(d, p, m)?));
            }
            CostedNorm::new(CostTable::new(g, entries, Extension::None)?, p)
        }
        (EnergyMode::Numeric { .. }, LoopTarget::LengthModel { .. }) => Err(Error::Unsupported(
            "numeric loop energies are only available for the circle".into(),
        )),
    }
}

/// `|sigma|_p` for every `p` in `p_list`, which must lie in `(k-1, k]`.
pub fn converging_norms(
    target: &LoopTarget,
    sigma: &GroupElement,
    p_list: &[f64],
    k: f64,
    mode: EnergyMode,
) -> Result<Vec<NormRow>> {
    let max_class = sigma.coords().iter().map(|c| c.abs()).max().unwrap_or(1);
    let mut rows = Vec::new();
    for &p in p_list {
        if !(p > k - 1.0 && p <= k) {
            return Err(Error::Parameter(format!("p = {p} lies outside (k-1, k]")));
        }
        let norm = costed_norm(target, p, mode, max_class)?;
        rows.push(NormRow {
            p,
            energy: match mode {
                EnergyMode::ClosedForm if !sigma.is_zero() => {
                    energy_ep(target, sigma, p).unwrap_or(f64::NAN)
                }
                _ => norm.table().cost(sigma).unwrap_or(f64::NAN),
            },
            norm: norm.norm(sigma)?,
            alpha: norm.alpha(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn zel(d: i64) -> GroupElement {
        CoefficientGroup::integers().element(&[d]).unwrap()
    }

    #[test]
    fn closed_form_circle() {
        let e = energy_ep(&LoopTarget::Circle, &zel(2), 1.5).unwrap();
        assert_relative_eq!(e, TAU * 2f64.powf(1.5), max_relative = 1e-14);
        assert_relative_eq!(e, 17.7715, max_relative = 1e-5);
        assert_eq!(energy_ep(&LoopTarget::Circle, &zel(0), 1.5).unwrap(), 0.0);
        assert!(matches!(
            energy_ep(&LoopTarget::Circle, &zel(1), 1.0),
            Err(Error::SubcriticalExponent(_))
        ));
    }

    #[test]
    fn length_model_unit_geodesic() {
        let g = CoefficientGroup::integers();
        let t = LoopTarget::length_model(g, [(zel(1), TAU)]).unwrap();
        assert_relative_eq!(energy_ep(&t, &zel(1), 2.0).unwrap(), TAU, max_relative = 1e-14);
        assert_relative_eq!(energy_ep(&t, &zel(-1), 2.0).unwrap(), TAU, max_relative = 1e-14);
    }

    #[test]
    fn descent_matches_closed_form() {
        for &(d, p) in &[(1, 1.25), (2, 1.5), (3, 2.0), (4, 3.0), (-2, 1.9)] {
            let r = minimize_circle_loop(d, p, 256, 7, &loop_descent_config()).unwrap();
            let exact = TAU * (d.abs() as f64).powf(p);
            assert!((r.energy - exact).abs() <= 0.01 * exact, "d={d} p={p}: {} vs {exact}", r.energy);
            assert!(r.report.energies.windows(2).all(|w| w[1] <= w[0] * (1.0 + crate::optim::ROUNDING_SLACK)));
            assert_eq!(r.discrete_loop.degree, d);
        }
    }

    #[test]
    fn refinement_changes_little() {
        let a = energy_ep_numeric(3, 1.7, 128).unwrap();
        let b = energy_ep_numeric(3, 1.7, 256).unwrap();
        assert!((a - b).abs() < 0.005 * b);
    }

    #[test]
    fn gradient_bound_unit_loop() {
        let r = minimize_circle_loop(1, 2.0, 256, 1, &loop_descent_config()).unwrap();
        eprintln!("{:?} {} {}", r.report.reason, r.report.grad_norm, r.report.iterations);
        let b = check_gradient_bound(&r.discrete_loop, 1.5).unwrap();
        assert_relative_eq!(b.lhs, 1.0, max_relative = 1e-3);
        assert_relative_eq!(b.lp_norm, TAU.sqrt(), max_relative = 1e-3);
        assert_relative_eq!(b.rhs_without_c, TAU, max_relative = 1e-3);
        assert_relative_eq!(b.ratio, 0.159, max_relative = 2e-3);
    }

    #[test]
    fn gradient_bound_constant_loop() {
        let lp = DiscreteLoop::from_angles(&[0.3; 16], 2.0).unwrap();
        let b = check_gradient_bound(&lp, 1.5).unwrap();
        assert_eq!(b.lhs, 0.0);
        assert_eq!(b.ratio, 0.0);
    }

    #[test]
    fn gradient_bound_rejects_non_minimizer() {
        let theta: Vec<f64> = (0..64).map(|i| {
            let t = TAU * i as f64 / 64.0;
            t + 0.3 * t.sin()
        }).collect();
        let lp = DiscreteLoop::from_angles(&theta, 2.0).unwrap();
        assert!(matches!(check_gradient_bound(&lp, 1.5), Err(Error::NotMinimizer(_))));
    }

    #[test]
    fn converging_norms_circle() {
        let rows = converging_norms(&LoopTarget::Circle, &zel(5), &[1.5, 1.9, 1.99, 2.0], 2.0, EnergyMode::ClosedForm)
            .unwrap();
        for r in &rows {
            assert_relative_eq!(r.norm, 10.0 * PI, max_relative = 1e-12);
        }
        let rows = converging_norms(&LoopTarget::Circle, &zel(0), &[1.5, 2.0], 2.0, EnergyMode::ClosedForm).unwrap();
        assert!(rows.iter().all(|r| r.norm == 0.0));
    }

    #[test]
    fn length_model_double_geodesic() {
        let g = CoefficientGroup::integers();
        let t = LoopTarget::length_model(g, [(zel(1), 1.0), (zel(2), 1.5)]).unwrap();
        let rows = converging_norms(&t, &zel(2), &[1.9, 2.0], 2.0, EnergyMode::ClosedForm).unwrap();
        // Two single loops beat the double geodesic: 2/(2 pi) < 2.25/(2 pi).
        assert_relative_eq!(rows[1].norm, 1.0 / PI, max_relative = 1e-12);
        let single = TAU.powf(1.0 - 1.9);
        let double = TAU.powf(1.0 - 1.9) * 1.5f64.powf(1.9);
        assert_relative_eq!(rows[0].norm, (2.0 * single).min(double), max_relative = 1e-12);
    }
}
