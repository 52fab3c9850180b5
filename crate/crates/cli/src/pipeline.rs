//! The p-sweep: solve, extract, compare in the flat norm, solve the Plateau
//! problem of the limit, and write the bundle.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use gammaflow::ballconstruct::{lower_bound_certificate, LowerBoundCertificate, C_P};
use gammaflow::chains::{cobordant, flat_norm, plateau_minimize, Aabb, Chain};
use gammaflow::coeffgroup::{CoefficientGroup, CostedNorm, GroupElement};
use gammaflow::fields::{field_descent_config, minimize, vortex_cells, write_field, Field, Minimized};
use gammaflow::report::Inequality;
use gammaflow::singset::{extract_tp, select_grid_offset, SingularChain};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// Exponent of the warm-up solve that starts every sweep.
pub const WARM_UP_P: f64 = 1.99;

/// Norm used for masses and flat distances of extracted chains.
pub const LIMIT_NORM: &str = "circle_p2";

/// Relative tolerance of the exact Plateau mass comparison, which only
/// absorbs floating point summation.
pub const PLATEAU_TOL: f64 = 1e-9;

/// One minimised exponent of a sweep.
#[derive(Debug, Clone)]
pub struct Solved {
    pub p: f64,
    pub outcome: std::result::Result<Minimized, String>,
}

/// Anneals the configured field: a warm-up solve at [`WARM_UP_P`], then the
/// exponents in decreasing order, each started from the last minimiser that
/// was obtained. A failing exponent is recorded and skipped. The result is
/// sorted by `p` ascending.
pub fn solve_sweep(cfg: &RunConfig) -> Result<Vec<Solved>> {
    let ps = cfg.sorted_p();
    let start = cfg.initial_field(ps[ps.len() - 1])?;
    let dcfg = field_descent_config();
    let mut current = minimize(&start, WARM_UP_P, &dcfg)?.field;
    let mut out = Vec::with_capacity(ps.len());
    for &p in ps.iter().rev() {
        let outcome = minimize(&current, p, &dcfg).map_err(|e| e.to_string());
        if let Ok(m) = &outcome {
            current = m.field.clone();
        }
        out.push(Solved { p, outcome });
    }
    out.reverse();
    Ok(out)
}

/// One row of the sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: f64,
    /// Spacing of the grid the row's chain was extracted on.
    pub h: Option<f64>,
    /// The spacing `(2-p)^3` of the grid guideline, for reference.
    pub guideline_h: f64,
    #[serde(rename = "D_p")]
    pub energy: Option<f64>,
    /// `(2-p) D_p`.
    pub scaled_energy: Option<f64>,
    pub chain_file: Option<String>,
    /// `F_U(T_p - T_limit)`, both extracted on the common grid.
    pub flat_dist_to_limit: Option<f64>,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
    pub stop_reason: Option<String>,
    pub vortices: Option<Vec<i64>>,
    pub offset: Option<Vec<usize>>,
    pub total_class: Option<i64>,
    /// `M(T_p)` on the common grid.
    pub mass: Option<f64>,
    pub certificate: Option<LowerBoundCertificate>,
    /// `bound_p <= D_p`.
    pub lower_bound: Option<Inequality>,
    pub errors: Vec<String>,
}

/// Linear fit of `(2-p) D_p` against `2-p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub exponents: Vec<f64>,
    pub slope: f64,
    /// The fitted value at `p = 2`.
    pub intercept: f64,
    /// Root mean square residual of the fit.
    pub residual: f64,
    /// `|degree|_2`.
    pub target: f64,
    pub relative_error: f64,
}

/// Behaviour of the flat distances to the limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatTrend {
    /// Distances do not increase as `p` grows.
    pub monotone: bool,
    /// The distance of the exponent next to the limit.
    pub terminal: Option<f64>,
    /// `M(T_limit)`.
    pub limit_mass: f64,
    /// `terminal <= 0.1 M(T_limit)`.
    pub terminal_small: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauReport {
    pub mass: f64,
    pub initial_mass: f64,
    /// The decomposition norm of the limit's total class.
    pub target: f64,
    pub exact: bool,
    pub cobordant: bool,
}

/// Everything a sweep produces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GammaRunResult {
    pub schema_version: u32,
    pub config: RunConfig,
    pub degree: i64,
    pub lattice_h: f64,
    pub common_h: f64,
    pub common_offset: Option<Vec<usize>>,
    pub rows: Vec<SweepRow>,
    pub extrapolation: Option<Extrapolation>,
    pub limit_p: Option<f64>,
    pub flat_trend: Option<FlatTrend>,
    pub plateau: Option<PlateauReport>,
    pub all_converged: bool,
    pub errors: Vec<String>,
    #[serde(skip)]
    pub row_chains: Vec<Option<SingularChain>>,
    #[serde(skip)]
    pub limit_chain: Option<Chain>,
    #[serde(skip)]
    pub plateau_chain: Option<Chain>,
    #[serde(skip)]
    pub fields: Vec<Option<Field>>,
}

impl GammaRunResult {
    pub fn plateau_mass(&self) -> Option<f64> {
        self.plateau.as_ref().map(|p| p.mass)
    }

    pub fn row(&self, p: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.p == p)
    }
}

fn integer(d: i64) -> GroupElement {
    CoefficientGroup::integers().element(&[d]).expect("integers accept one coordinate")
}

/// Least squares line through `(x, y)`; returns slope, intercept and the
/// root mean square residual.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    (slope, intercept, (rss / n).sqrt())
}

fn chain_file_name(prefix: &str, p: f64) -> String {
    format!("{prefix}_T_p{p}.json")
}

/// Runs the whole sweep without touching the file system.
pub fn gamma_run(cfg: &RunConfig) -> Result<GammaRunResult> {
    let degree = cfg.boundary_data()?.degree();
    let region: Aabb = cfg.region()?;
    let hf = cfg.lattice()?.h;
    let solved = solve_sweep(cfg)?;
    let norm2 = CostedNorm::circle(2.0)?;
    let sigma = integer(degree);
    let delta = cfg.grid.delta;
    let samples = cfg.grid.offset_samples;
    let seed = cfg.sweep.seed;
    let mut errors = Vec::new();

    let mut rows = Vec::with_capacity(solved.len());
    let mut row_chains = Vec::with_capacity(solved.len());
    let mut fields = Vec::with_capacity(solved.len());
    for s in &solved {
        let mut row = SweepRow {
            p: s.p,
            h: None,
            guideline_h: (2.0 - s.p).powi(3),
            energy: None,
            scaled_energy: None,
            chain_file: None,
            flat_dist_to_limit: None,
            converged: None,
            iterations: None,
            stop_reason: None,
            vortices: None,
            offset: None,
            total_class: None,
            mass: None,
            certificate: None,
            lower_bound: None,
            errors: Vec::new(),
        };
        let mut chain = None;
        match &s.outcome {
            Err(e) => row.errors.push(format!("minimisation: {e}")),
            Ok(m) => {
                row.energy = Some(m.energy);
                row.scaled_energy = Some((2.0 - s.p) * m.energy);
                row.converged = Some(m.converged);
                row.iterations = Some(m.report.iterations);
                row.stop_reason = Some(format!("{:?}", m.report.reason));
                row.vortices = Some(vortex_cells(&m.field).into_iter().map(|v| v.1).collect());
                let h = cfg.grid_h(s.p, hf);
                row.h = Some(h);
                match select_grid_offset(&m.field, h, delta, None, samples, seed)
                    .and_then(|sel| Ok((sel.offset.clone(), extract_tp(&m.field, &sel.grid)?)))
                {
                    Ok((offset, t)) => {
                        row.offset = Some(offset);
                        row.total_class = Some(t.total_class());
                        row.chain_file = Some(chain_file_name(&cfg.output.prefix, s.p));
                        chain = Some(t);
                    }
                    Err(e) => row.errors.push(format!("extraction: {e}")),
                }
                let r = cfg.domain.collar;
                match CostedNorm::circle(s.p)
                    .and_then(|np| lower_bound_certificate(&sigma, 2, r, &np, &norm2, C_P))
                {
                    Ok(c) => {
                        row.lower_bound = Some(Inequality::exact(
                            "energy lower bound from the ball construction at the collar width",
                            c.bound_p,
                            m.energy,
                        ));
                        row.certificate = Some(c);
                    }
                    Err(e) => row.errors.push(format!("certificate: {e}")),
                }
            }
        }
        fields.push(s.outcome.as_ref().ok().map(|m| m.field.clone()));
        rows.push(row);
        row_chains.push(chain);
    }
    let all_converged = rows.iter().all(|r| r.converged == Some(true));

    // Fit over the three finest exponents that produced an energy.
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.scaled_energy.map(|y| (r.p, y)))
        .collect();
    let tail = &pts[pts.len().saturating_sub(3)..];
    let extrapolation = if tail.len() >= 2 {
        let x: Vec<f64> = tail.iter().map(|t| 2.0 - t.0).collect();
        let y: Vec<f64> = tail.iter().map(|t| t.1).collect();
        let (slope, intercept, residual) = linear_fit(&x, &y);
        let target = norm2.norm(&sigma)?;
        let relative_error = if target > 0.0 { (intercept / target - 1.0).abs() } else { intercept.abs() };
        Some(Extrapolation {
            exponents: tail.iter().map(|t| t.0).collect(),
            slope,
            intercept,
            residual,
            target,
            relative_error,
        })
    } else {
        errors.push("fewer than two exponents solved; no extrapolation".into());
        None
    };

    // Common grid, chosen on the finest minimiser.
    let common_h = cfg.grid_h(rows.last().map_or(2.0, |r| r.p), hf);
    let finest = fields.iter().rposition(|f| f.is_some());
    let mut common_offset = None;
    let mut common: Vec<Option<Chain>> = vec![None; rows.len()];
    let mut limit_p = None;
    match finest {
        None => errors.push("no exponent was solved".into()),
        Some(li) => match select_grid_offset(fields[li].as_ref().expect("solved"), common_h, delta, None, samples, seed) {
            Err(e) => errors.push(format!("common grid: {e}")),
            Ok(sel) => {
                common_offset = Some(sel.offset.clone());
                limit_p = Some(rows[li].p);
                for (i, f) in fields.iter().enumerate() {
                    let Some(f) = f else { continue };
                    match extract_tp(f, &sel.grid) {
                        Ok(t) => common[i] = Some(t.chain),
                        Err(e) => rows[i].errors.push(format!("extraction on the common grid: {e}")),
                    }
                }
            }
        },
    }

    let mut limit_chain = None;
    let mut flat_trend = None;
    let mut plateau = None;
    let mut plateau_chain = None;
    if let Some(li) = finest.filter(|&li| common[li].is_some()) {
        let limit = common[li].clone().expect("checked");
        for (i, t) in common.iter().enumerate() {
            let Some(t) = t else { continue };
            match t.mass(&norm2, None) {
                Ok(m) => rows[i].mass = Some(m),
                Err(e) => rows[i].errors.push(format!("mass: {e}")),
            }
            match t.sub(&limit).and_then(|d| flat_norm(&d, &norm2, Some(&region))) {
                Ok(f) => rows[i].flat_dist_to_limit = Some(f.value),
                Err(e) => rows[i].errors.push(format!("flat distance: {e}")),
            }
        }
        let limit_mass = limit.mass(&norm2, None)?;
        let dists: Vec<f64> = rows[..li].iter().filter_map(|r| r.flat_dist_to_limit).collect();
        let terminal = rows[..li].iter().rev().find_map(|r| r.flat_dist_to_limit);
        flat_trend = Some(FlatTrend {
            monotone: dists.windows(2).all(|w| w[1] <= w[0]),
            terminal,
            limit_mass,
            terminal_small: terminal.is_some_and(|t| t <= 0.1 * limit_mass),
        });
        match plateau_minimize(&limit, &region, &norm2) {
            Ok(pr) => {
                let target = norm2.norm(&limit.total())?;
                let exact = (pr.mass - target).abs() <= PLATEAU_TOL * target.max(1.0);
                let cob = cobordant(&limit, &pr.chain, &region, &norm2)?.cobordant;
                plateau = Some(PlateauReport { mass: pr.mass, initial_mass: pr.initial_mass, target, exact, cobordant: cob });
                plateau_chain = Some(pr.chain);
            }
            Err(e) => errors.push(format!("plateau: {e}")),
        }
        limit_chain = Some(limit);
    }

    Ok(GammaRunResult {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        degree,
        lattice_h: hf,
        common_h,
        common_offset,
        rows,
        extrapolation,
        limit_p,
        flat_trend,
        plateau,
        all_converged,
        errors,
        row_chains,
        limit_chain,
        plateau_chain,
        fields,
    })
}

/// Columns of the sweep CSV, in order.
pub const CSV_COLUMNS: [&str; 6] = ["p", "h", "D_p", "scaled_energy", "chain_file", "flat_dist_to_limit"];

#[derive(Serialize)]
struct CsvRow<'a> {
    p: f64,
    h: Option<f64>,
    #[serde(rename = "D_p")]
    energy: Option<f64>,
    scaled_energy: Option<f64>,
    chain_file: Option<&'a str>,
    flat_dist_to_limit: Option<f64>,
}

/// Writes the CSV table, the JSON bundle and the chain files into the
/// configured output directory. Returns the written paths.
pub fn write_bundle(res: &GammaRunResult, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let prefix = &res.config.output.prefix;
    let mut written = Vec::new();
    let csv_path = dir.join(format!("{prefix}_sweep.csv"));
    let mut w = csv::Writer::from_path(&csv_path)?;
    for r in &res.rows {
        w.serialize(CsvRow {
            p: r.p,
            h: r.h,
            energy: r.energy,
            scaled_energy: r.scaled_energy,
            chain_file: r.chain_file.as_deref(),
            flat_dist_to_limit: r.flat_dist_to_limit,
        })?;
    }
    w.flush()?;
    written.push(csv_path);
    for (r, t) in res.rows.iter().zip(&res.row_chains) {
        if let (Some(name), Some(t)) = (&r.chain_file, t) {
            let path = dir.join(name);
            std::fs::write(&path, t.to_json()?)?;
            written.push(path);
        }
    }
    if let Some(c) = &res.limit_chain {
        let path = dir.join(format!("{prefix}_limit.json"));
        std::fs::write(&path, c.to_json(Some(LIMIT_NORM)))?;
        written.push(path);
    }
    if let Some(c) = &res.plateau_chain {
        let path = dir.join(format!("{prefix}_plateau.json"));
        std::fs::write(&path, c.to_json(Some(LIMIT_NORM)))?;
        written.push(path);
    }
    let json_path = dir.join(format!("{prefix}_gamma.json"));
    std::fs::write(&json_path, serde_json::to_string_pretty(res)?)?;
    written.push(json_path);
    Ok(written)
}

/// One row of the `solve` summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRow {
    pub p: f64,
    pub field_file: Option<String>,
    pub energy: Option<f64>,
    pub scaled_energy: Option<f64>,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
    pub stop_reason: Option<String>,
    pub vortices: Vec<i64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub schema_version: u32,
    pub config: RunConfig,
    pub rows: Vec<SolveRow>,
    pub all_converged: bool,
}

/// Solves the sweep and writes one field file per exponent plus a summary.
pub fn solve_to_dir(cfg: &RunConfig, dir: &Path) -> Result<SolveSummary> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let prefix = &cfg.output.prefix;
    let mut rows = Vec::new();
    for s in solve_sweep(cfg)? {
        let row = match &s.outcome {
            Ok(m) => {
                let name = format!("{prefix}_p{}.field", s.p);
                let file = std::fs::File::create(dir.join(&name))?;
                write_field(&m.field, std::io::BufWriter::new(file))?;
                SolveRow {
                    p: s.p,
                    field_file: Some(name),
                    energy: Some(m.energy),
                    scaled_energy: Some((2.0 - s.p) * m.energy),
                    converged: Some(m.converged),
                    iterations: Some(m.report.iterations),
                    stop_reason: Some(format!("{:?}", m.report.reason)),
                    vortices: vortex_cells(&m.field).into_iter().map(|v| v.1).collect(),
                    error: None,
                }
            }
            Err(e) => SolveRow {
                p: s.p,
                field_file: None,
                energy: None,
                scaled_energy: None,
                converged: None,
                iterations: None,
                stop_reason: None,
                vortices: Vec::new(),
                error: Some(e.clone()),
            },
        };
        rows.push(row);
    }
    let all_converged = rows.iter().all(|r| r.converged == Some(true));
    let summary = SolveSummary { schema_version: SCHEMA_VERSION, config: cfg.clone(), rows, all_converged };
    std::fs::write(dir.join(format!("{prefix}_solve.json")), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_a_line() {
        let (s, i, r) = linear_fit(&[0.05, 0.1, 0.2], &[6.5, 7.0, 8.0]);
        assert!((s - 10.0).abs() < 1e-12 && (i - 6.0).abs() < 1e-12 && r < 1e-12);
    }

    #[test]
    fn degree_zero_sweep_is_trivial() {
        let cfg = RunConfig::from_toml(
            "[domain]\nkind = \"disk\"\nradius = 1.0\n[boundary]\ndegree = 0\n[sweep]\np_list = [1.8, 1.9]\n[grid]\nn = 32\n",
            None,
        )
        .unwrap();
        let res = gamma_run(&cfg).unwrap();
        assert!(res.all_converged, "{:?}", res.rows.iter().map(|r| (&r.stop_reason, r.iterations, r.energy, &r.errors)).collect::<Vec<_>>());
        for r in &res.rows {
            assert!(r.energy.unwrap() < 1e-6);
            assert_eq!(r.total_class, Some(0));
            assert_eq!(r.flat_dist_to_limit, Some(0.0));
        }
        assert!(res.limit_chain.as_ref().unwrap().is_zero());
        assert_eq!(res.plateau_mass(), Some(0.0));
        assert!(res.extrapolation.as_ref().unwrap().intercept.abs() < 1e-6);
    }
}
