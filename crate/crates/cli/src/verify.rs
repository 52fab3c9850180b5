//! The verification suite: named property checks of every module plus the
//! acceptance criteria, collected into one JSON report.

use std::f64::consts::{PI, TAU};

use anyhow::{ensure, Result};
use gammaflow::ballconstruct::{ball_construction, lower_bound_certificate, BallDomain, Singularity, SingularityConfig, C_P};
use gammaflow::chains::{cobordant, flat_norm, plateau_minimize, Aabb, Cell, Chain, CubicalGrid};
use gammaflow::coeffgroup::{
    decomposition_norm, norm_gap, pq_comparison_bounds, CoefficientGroup, CostTable, CostedNorm, Extension, GroupElement,
};
use gammaflow::fields::{
    minimize, p_energy, read_field, vortex_cells, write_field, field_descent_config, Domain, Field, Lattice,
};
use gammaflow::loopmin::{energy_ep, energy_ep_numeric, LoopTarget};
use gammaflow::singset::{extract_tp, mass_factor, select_grid_offset};
use serde::{Deserialize, Serialize};

use crate::criteria::{all_criteria, random_ball_config, CriterionOutcome};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub checks: Vec<CheckOutcome>,
    pub criteria: Vec<CriterionOutcome>,
    pub checks_passed: usize,
    pub criteria_passed: usize,
    pub passed: bool,
}

type CheckFn = fn() -> Result<String>;

fn z(d: i64) -> GroupElement {
    CoefficientGroup::integers().element(&[d]).expect("integer element")
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn power_table(p: f64) -> Result<CostTable> {
    let g = CoefficientGroup::integers();
    Ok(CostTable::new(g, [], Extension::PowerLaw { exponent: p, scale: TAU })?)
}

fn grid2(n: usize, h: f64) -> Result<CubicalGrid> {
    Ok(CubicalGrid::new(vec![0.0, 0.0], h, vec![n, n])?)
}

fn points(grid: &CubicalGrid, pts: &[([i64; 2], i64)]) -> Result<Chain> {
    Ok(Chain::from_cells(
        grid.clone(),
        0,
        CoefficientGroup::integers(),
        pts.iter().map(|(b, c)| (Cell::vertex(b.to_vec()), z(*c))),
    )?)
}

fn radial_field(n: usize, p: f64, degree: i64) -> Result<Field> {
    let lat = Lattice::cell_centered(-1.0, 1.0, n, 2)?;
    Ok(Field::from_fn(lat, Domain::unit_disk(), p, |x| {
        let t = degree as f64 * x[1].atan2(x[0]);
        [t.cos(), t.sin()]
    })?)
}

/// Every named check, in report order.
pub fn checks() -> Vec<(&'static str, CheckFn)> {
    vec![
        ("coeffgroup.decomposition_of_three", || {
            let d = decomposition_norm(&power_table(1.5)?, &z(3))?;
            ensure!(close(d.value, 6.0 * PI, 1e-12) && d.summands == vec![z(1); 3], "{d:?}");
            Ok(format!("|3| = {} via (1,1,1)", d.value))
        }),
        ("coeffgroup.decomposition_of_minus_two", || {
            let d = decomposition_norm(&power_table(1.5)?, &z(-2))?;
            ensure!(close(d.value, 4.0 * PI, 1e-12) && d.summands == vec![z(-1); 2], "{d:?}");
            Ok(format!("|-2| = {}", d.value))
        }),
        ("coeffgroup.norm_gap", || {
            let a = norm_gap(&power_table(1.5)?)?;
            ensure!(close(a, TAU, 1e-12), "{a}");
            Ok(format!("alpha = {a}"))
        }),
        ("coeffgroup.asymmetric_table_rejected", || {
            let text = r#"{"free_rank":1,"cost":[{"elem":[1],"value":1.0},{"elem":[-1],"value":2.0}]}"#;
            match CostTable::from_json(text) {
                Err(e) => {
                    let msg = e.to_string();
                    ensure!(msg.contains("not symmetric") && msg.contains('1'), "{msg}");
                    Ok(msg)
                }
                Ok(_) => anyhow::bail!("asymmetric table accepted"),
            }
        }),
        ("coeffgroup.unreachable_element", || {
            let g = CoefficientGroup::integers();
            let t = CostTable::new(g.clone(), [(g.element(&[2])?, 1.0)], Extension::None)?;
            match decomposition_norm(&t, &z(3)) {
                Err(gammaflow::Error::Unreachable(s)) => Ok(format!("unreachable {s}")),
                other => anyhow::bail!("expected unreachable, got {other:?}"),
            }
        }),
        ("coeffgroup.table_json_round_trip", || {
            let t = power_table(1.9)?;
            let back = CostTable::from_json(&t.to_json())?;
            ensure!(back == t, "round trip changed the table");
            Ok("identical".into())
        }),
        ("coeffgroup.pq_comparison", || {
            let np = CostedNorm::circle(1.9)?;
            let nq = CostedNorm::circle(2.0)?;
            let c = pq_comparison_bounds(&np, &nq, &z(3), 0.9, 2.0)?;
            ensure!(c.lower_ok && c.upper_ok, "{c:?}");
            Ok("both comparison bounds hold for the class 3".into())
        }),
        ("loopmin.closed_form_energy", || {
            let e = energy_ep(&LoopTarget::Circle, &z(2), 1.5)?;
            ensure!(close(e, TAU * 2f64.powf(1.5), 1e-12), "{e}");
            Ok(format!("E_1.5(2) = {e}"))
        }),
        ("loopmin.numeric_energy", || {
            let e = energy_ep_numeric(1, 1.9, 128)?;
            ensure!(close(e, TAU, 1e-3) && e <= TAU + 1e-12, "{e}");
            Ok(format!("numeric E_1.9(1) = {e}"))
        }),
        ("loopmin.circle_norm_is_linear", || {
            for p in [1.5, 1.9, 1.99, 2.0] {
                let n = CostedNorm::circle(p)?.norm(&z(5))?;
                ensure!(close(n, 10.0 * PI, 1e-12), "p = {p}: {n}");
            }
            Ok("|5|_p = 10 pi for p in {1.5, 1.9, 1.99, 2}".into())
        }),
        ("chains.boundary_of_boundary", || {
            let g = CubicalGrid::new(vec![0.0; 3], 1.0, vec![3, 3, 3])?;
            let mut c = Chain::zero(g.clone(), 2, CoefficientGroup::integers())?;
            for (i, cell) in g.cells(2).into_iter().enumerate() {
                c.add_to(&cell, &z((i as i64 % 5) - 2))?;
            }
            ensure!(c.boundary()?.boundary()?.is_zero(), "dd != 0");
            Ok("dd = 0 on a 3 x 3 x 3 grid".into())
        }),
        ("chains.flat_norm_of_a_near_dipole", || {
            let g = grid2(6, 1.0)?;
            let s = points(&g, &[([1, 1], 1), ([2, 1], -1)])?;
            let f = flat_norm(&s, &CostedNorm::circle(2.0)?, None)?;
            ensure!(close(f.value, TAU, 1e-12), "{}", f.value);
            Ok(format!("joined by one edge: {}", f.value))
        }),
        ("chains.flat_norm_keeps_distant_points", || {
            let g = grid2(8, 1.0)?;
            let s = points(&g, &[([0, 0], 1), ([3, 0], -1)])?;
            let f = flat_norm(&s, &CostedNorm::circle(2.0)?, None)?;
            ensure!(close(f.value, 2.0 * TAU, 1e-12), "{}", f.value);
            Ok(format!("value {}", f.value))
        }),
        ("chains.relative_flat_norm_ignores_outside", || {
            let g = grid2(8, 1.0)?;
            let s = points(&g, &[([7, 7], 1)])?;
            let u = Aabb::new(vec![0.0, 0.0], vec![3.0, 3.0])?;
            let f = flat_norm(&s, &CostedNorm::circle(2.0)?, Some(&u))?;
            ensure!(f.value == 0.0, "{}", f.value);
            Ok("a point outside U costs nothing".into())
        }),
        ("chains.points_cobordant", || {
            let g = grid2(4, 1.0)?;
            let u = g.bounding_box();
            let n = CostedNorm::circle(2.0)?;
            let a = points(&g, &[([0, 0], 1)])?;
            let b = points(&g, &[([3, 2], 1)])?;
            let c = points(&g, &[([3, 2], 2)])?;
            ensure!(cobordant(&a, &b, &u, &n)?.cobordant && !cobordant(&a, &c, &u, &n)?.cobordant);
            Ok("equal totals cobordant, different totals not".into())
        }),
        ("chains.plateau_annihilates_a_dipole", || {
            let g = grid2(6, 1.0)?;
            let s = points(&g, &[([1, 1], 1), ([4, 3], -1)])?;
            let r = plateau_minimize(&s, &g.bounding_box(), &CostedNorm::circle(2.0)?)?;
            ensure!(r.mass == 0.0 && r.chain.is_zero(), "{}", r.mass);
            Ok(format!("mass {} -> 0", r.initial_mass))
        }),
        ("chains.json_round_trip", || {
            let g = grid2(4, 0.25)?;
            let s = points(&g, &[([1, 2], 3), ([2, 2], -1)])?;
            let (back, norm) = Chain::from_json(&s.to_json(Some("circle_p2")))?;
            ensure!(back == s && norm.as_deref() == Some("circle_p2"));
            Ok("chain and norm reference preserved".into())
        }),
        ("fields.constant_field_has_no_energy", || {
            let lat = Lattice::cell_centered(-1.0, 1.0, 16, 2)?;
            let f = Field::from_fn(lat, Domain::unit_disk(), 1.7, |_| [0.0, 1.0])?;
            ensure!(p_energy(&f, None) == 0.0);
            Ok("zero".into())
        }),
        ("fields.vortex_detection", || {
            let v = vortex_cells(&radial_field(32, 1.8, 2)?);
            ensure!(v.iter().map(|c| c.1).sum::<i64>() == 2, "{v:?}");
            Ok(format!("{} vortex cells, total degree 2", v.len()))
        }),
        ("fields.file_round_trip", || {
            let f = radial_field(16, 1.7, 1)?;
            let mut buf = Vec::new();
            write_field(&f, &mut buf)?;
            ensure!(read_field(buf.as_slice())? == f);
            Ok(format!("{} bytes", buf.len()))
        }),
        ("fields.minimiser_energy_drops", || {
            let f = radial_field(32, 1.8, 1)?;
            let before = p_energy(&f, None);
            let m = minimize(&f, 1.8, &field_descent_config())?;
            ensure!(m.converged && m.energy <= before, "{} -> {}", before, m.energy);
            Ok(format!("{before:.4} -> {:.4}", m.energy))
        }),
        ("singset.radial_field_extracts_one_point", || {
            let f = radial_field(64, 1.9, 1)?;
            let sel = select_grid_offset(&f, 4.0 * f.lattice().h, 0.5, None, 64, 0)?;
            let t = extract_tp(&f, &sel.grid)?;
            ensure!(t.total_class() == 1 && t.chain.coeffs().len() == 1, "{:?}", t.per_cell_classes);
            Ok(format!("offset {:?}", sel.offset))
        }),
        ("singset.offset_means_agree", || {
            let f = radial_field(64, 1.9, 1)?;
            let sel = select_grid_offset(&f, 4.0 * f.lattice().h, 0.5, None, 256, 3)?;
            ensure!(sel.means_agree, "mean error {}", sel.mean_error);
            Ok(format!("mean error {:.4}", sel.mean_error))
        }),
        ("singset.mass_factor", || {
            let v = mass_factor(2.0, 1.99);
            ensure!((v - 0.01f64.powf(-0.03)).abs() < 1e-14);
            Ok(format!("{v:.4}"))
        }),
        ("ballconstruct.single_singularity", || {
            let cfg = random_ball_config(0, 1);
            let c = ball_construction(&cfg, cfg.collar / (8.0 * TAU), 1.99)?;
            ensure!(c.balls.len() == 1 && c.balls[0].class == vec![1] && c.all_properties_hold());
            Ok(format!("s = {}", c.s))
        }),
        ("ballconstruct.collar_too_thin", || {
            let cfg = SingularityConfig {
                domain: BallDomain::Disk { center: vec![0.0, 0.0], radius: 1.0 },
                collar: 0.05,
                singularities: vec![
                    Singularity { point: vec![0.0, 0.0], class: vec![3] },
                    Singularity { point: vec![0.93, 0.0], class: vec![-3] },
                ],
                boundary_class: vec![0],
                target: "circle".into(),
            };
            match ball_construction(&cfg, 0.2, 1.9999) {
                Err(gammaflow::Error::CollarTooThin(m)) => Ok(m),
                other => anyhow::bail!("expected collar too thin, got {:?}", other.map(|c| c.s)),
            }
        }),
        ("ballconstruct.certificate_value", || {
            let c = lower_bound_certificate(&z(1), 2, 0.5, &CostedNorm::circle(1.99)?, &CostedNorm::circle(2.0)?, C_P)?;
            let want = TAU / 0.01 - C_P * TAU * 2f64.ln();
            ensure!(close(c.bound_p, want, 1e-9) && (c.bound_p - 596.90).abs() < 0.01, "{}", c.bound_p);
            Ok(format!("bound_p = {:.2}", c.bound_p))
        }),
        ("ballconstruct.certificate_vacuous", || {
            let c = lower_bound_certificate(&z(1), 2, 0.5, &CostedNorm::circle(1.5)?, &CostedNorm::circle(2.0)?, C_P)?;
            ensure!(c.vacuous && c.bound_p < 0.0, "{}", c.bound_p);
            Ok(format!("bound_p = {:.2}, vacuous", c.bound_p))
        }),
        ("ballconstruct.certificate_zero_class", || {
            let c = lower_bound_certificate(&z(0), 2, 0.5, &CostedNorm::circle(1.9)?, &CostedNorm::circle(2.0)?, C_P)?;
            ensure!(c.bound_p == 0.0 && c.bound_k == 0.0 && !c.vacuous);
            Ok("no obstruction".into())
        }),
        ("ballconstruct.deterministic_json", || {
            let cfg = random_ball_config(42, 7);
            let tau = cfg.collar / (8.0 * TAU * 7.0);
            let a = serde_json::to_string(&ball_construction(&cfg, tau, 1.95)?)?;
            let b = serde_json::to_string(&ball_construction(&cfg, tau, 1.95)?)?;
            ensure!(a == b);
            Ok(format!("{} bytes, identical", a.len()))
        }),
        ("cli.config_rejects_unknown_keys", || {
            let text = "[domain]\nkind = \"disk\"\nradius = 1.0\ncolour = 1\n[boundary]\ndegree = 1\n[sweep]\np_list = [1.9]\n";
            ensure!(crate::config::RunConfig::from_toml(text, None).is_err());
            Ok("unknown key rejected".into())
        }),
    ]
}

/// Runs every check; `with_criteria` adds the acceptance criteria.
pub fn verify_suite(with_criteria: bool) -> VerifyReport {
    let checks: Vec<CheckOutcome> = checks()
        .into_iter()
        .map(|(name, f)| {
            let (passed, detail) = match std::panic::catch_unwind(f) {
                Ok(Ok(d)) => (true, d),
                Ok(Err(e)) => (false, format!("{e:#}")),
                Err(_) => (false, "panicked".into()),
            };
            CheckOutcome { name: name.into(), passed, detail }
        })
        .collect();
    let criteria = if with_criteria { all_criteria() } else { Vec::new() };
    let checks_passed = checks.iter().filter(|c| c.passed).count();
    let criteria_passed = criteria.iter().filter(|c| c.passed).count();
    VerifyReport {
        schema_version: REPORT_SCHEMA_VERSION,
        passed: checks_passed == checks.len() && criteria_passed == criteria.len(),
        checks,
        criteria,
        checks_passed,
        criteria_passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_checks_pass() {
        let r = verify_suite(false);
        assert!(r.checks.len() >= 30, "{}", r.checks.len());
        let failed: Vec<_> = r.checks.iter().filter(|c| !c.passed).collect();
        assert!(failed.is_empty(), "{failed:#?}");
        let names: std::collections::BTreeSet<_> = r.checks.iter().map(|c| &c.name).collect();
        assert_eq!(names.len(), r.checks.len());
    }

    #[test]
    fn report_is_reproducible() {
        let a = serde_json::to_string(&verify_suite(false)).unwrap();
        let b = serde_json::to_string(&verify_suite(false)).unwrap();
        assert_eq!(a, b);
    }
}
