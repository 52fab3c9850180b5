use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use gammaflow::ballconstruct::{ball_construction, lower_bound_certificate, SingularityConfig, BALL_SCHEMA_VERSION, C_P};
use gammaflow::chains::{flat_norm, norm_from_ref, plateau_minimize, Aabb, Chain};
use gammaflow::coeffgroup::{CoefficientGroup, CostTable, CostedNorm};
use gammaflow::fields::read_field;
use gammaflow::loopmin::{costed_norm, energy_ep, EnergyMode, LoopTarget};
use gammaflow::singset::{extract_tp, select_grid_offset};
use gammaflow_cli::config::{ConfigError, RunConfig};
use gammaflow_cli::pipeline::{gamma_run, solve_to_dir, write_bundle, LIMIT_NORM, SCHEMA_VERSION};
use gammaflow_cli::verify::verify_suite;
use gammaflow_cli::{exit_code, NonConvergence, EXIT_CHECKS_FAILED, EXIT_OK};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "gammaflow", version, about = "p-energies of circle-valued maps and their singular chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// Closed-form loop energies.
    Closed,
    /// Minimised discrete loops.
    Numeric,
}

#[derive(Subcommand)]
enum Command {
    /// Norm table of a loop target, or validation of a cost table file.
    NormTable {
        #[arg(long, default_value = "circle")]
        target: String,
        /// Comma separated exponents.
        #[arg(long, value_delimiter = ',', default_value = "2")]
        p: Vec<f64>,
        /// Class range `a..b`, inclusive.
        #[arg(long, default_value = "-3..3", allow_hyphen_values = true)]
        classes: String,
        #[arg(long, value_enum, default_value = "closed")]
        mode: Mode,
        /// Samples per loop in numeric mode.
        #[arg(long, default_value_t = 256)]
        m: usize,
        /// Validate this cost table and list the norms of its listed elements.
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Minimise the configured sweep and write one field file per exponent.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `[output] dir`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Extract the singular chain of a field file.
    Extract {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Require a three-dimensional field.
        #[arg(long)]
        ambient3: bool,
        /// Grid spacing; defaults to four lattice spacings.
        #[arg(long)]
        h: Option<f64>,
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the grid selection report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Flat norm of a chain file.
    Flatnorm {
        #[arg(long)]
        chain: PathBuf,
        /// Box `lo_1,..,lo_d,hi_1,..,hi_d` for the relative flat norm.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        relative_box: Option<Vec<f64>>,
        /// Norm reference when the chain file has none.
        #[arg(long)]
        norm: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Least-mass chain cobordant to a chain file.
    Plateau {
        #[arg(long)]
        chain: PathBuf,
        /// Box `lo_1,..,lo_d,hi_1,..,hi_d`; defaults to the grid.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        within: Option<Vec<f64>>,
        #[arg(long)]
        norm: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ball construction and lower-bound certificate for singularity data.
    Ball {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        p: f64,
        /// Constant of the bound at the critical exponent.
        #[arg(long, default_value_t = C_P)]
        ck: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full sweep: solve, extract, flat distances, Plateau problem.
    GammaRun {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run the property checks and acceptance criteria.
    Verify {
        /// Skip the acceptance criteria.
        #[arg(long)]
        checks_only: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)?)
}

fn parse_range(s: &str) -> Result<(i64, i64)> {
    let (a, b) = s.split_once("..").ok_or_else(|| ConfigError(format!("class range {s:?} is not a..b")))?;
    let a: i64 = a.trim().parse().map_err(|_| ConfigError(format!("bad class range {s:?}")))?;
    let b: i64 = b.trim().parse().map_err(|_| ConfigError(format!("bad class range {s:?}")))?;
    if a > b {
        bail!(ConfigError(format!("empty class range {s:?}")));
    }
    Ok((a, b))
}

fn parse_box(v: &[f64], dim: usize) -> Result<Aabb> {
    if v.len() != 2 * dim {
        bail!(ConfigError(format!("a box in dimension {dim} needs {} numbers, got {}", 2 * dim, v.len())));
    }
    Ok(Aabb::new(v[..dim].to_vec(), v[dim..].to_vec())?)
}

fn read_chain(path: &Path, norm: Option<&str>) -> Result<(Chain, CostedNorm, String)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let (chain, stored) = Chain::from_json(&text)?;
    let name = norm.map(str::to_string).or(stored).unwrap_or_else(|| LIMIT_NORM.to_string());
    Ok((chain, norm_from_ref(&name)?, name))
}

#[derive(Serialize)]
struct NormRowCsv {
    p: f64,
    class: String,
    #[serde(rename = "E_p")]
    energy: Option<f64>,
    norm_p: f64,
    alpha_p: f64,
}

fn norm_table(
    target: &str,
    ps: &[f64],
    classes: &str,
    mode: Mode,
    m: usize,
    table: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if let Some(path) = table {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let t = CostTable::from_json(&text)?;
        for &p in ps {
            let norm = CostedNorm::new(t.clone(), p)?;
            for (g, e) in t.entries() {
                w.serialize(NormRowCsv {
                    p,
                    class: g.to_string(),
                    energy: Some(*e),
                    norm_p: norm.norm(g)?,
                    alpha_p: norm.alpha(),
                })?;
            }
        }
    } else {
        if target != "circle" {
            bail!(ConfigError(format!("unknown target {target:?}; only \"circle\" is built in")));
        }
        let (a, b) = parse_range(classes)?;
        let group = CoefficientGroup::integers();
        let max_class = a.abs().max(b.abs()).max(1);
        for &p in ps {
            let energy_mode = match mode {
                Mode::Closed => EnergyMode::ClosedForm,
                Mode::Numeric => EnergyMode::Numeric { m },
            };
            let norm = costed_norm(&LoopTarget::Circle, p, energy_mode, max_class)?;
            for d in a..=b {
                let g = group.element(&[d])?;
                let energy = match mode {
                    Mode::Closed => Some(energy_ep(&LoopTarget::Circle, &g, p)?),
                    Mode::Numeric if d == 0 => Some(0.0),
                    Mode::Numeric => norm.table().cost(&g),
                };
                w.serialize(NormRowCsv { p, class: d.to_string(), energy, norm_p: norm.norm(&g)?, alpha_p: norm.alpha() })?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("csv: {e}"))?;
    emit(out, &String::from_utf8(bytes)?)
}

fn solve(config: &Path, out_dir: Option<PathBuf>) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let dir = out_dir.unwrap_or_else(|| cfg.output.dir.clone());
    let summary = solve_to_dir(&cfg, &dir)?;
    for r in &summary.rows {
        match (&r.energy, &r.error) {
            (Some(e), _) => println!(
                "p = {}: D_p = {e:.6}, (2-p) D_p = {:.6}, {} ({})",
                r.p,
                r.scaled_energy.unwrap_or(f64::NAN),
                r.field_file.as_deref().unwrap_or("-"),
                r.stop_reason.as_deref().unwrap_or("-")
            ),
            (None, Some(err)) => println!("p = {}: failed: {err}", r.p),
            (None, None) => println!("p = {}: no result", r.p),
        }
    }
    if !summary.all_converged {
        bail!(NonConvergence("some exponent reached the iteration cap".into()));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn extract(
    field: &Path,
    out: &Path,
    ambient3: bool,
    h: Option<f64>,
    delta: f64,
    samples: usize,
    seed: u64,
    report: Option<&Path>,
) -> Result<()> {
    let file = fs::File::open(field).with_context(|| format!("opening {}", field.display()))?;
    let f = read_field(std::io::BufReader::new(file))?;
    let d = f.lattice().dim();
    if ambient3 != (d == 3) {
        bail!(ConfigError(format!(
            "field has dimension {d}; pass --ambient3 exactly for three-dimensional fields"
        )));
    }
    let h = h.unwrap_or(4.0 * f.lattice().h);
    let plane = (d == 3).then_some(0);
    let sel = select_grid_offset(&f, h, delta, plane, samples, seed)?;
    let t = extract_tp(&f, &sel.grid)?;
    fs::write(out, t.to_json()?).with_context(|| format!("writing {}", out.display()))?;
    if let Some(path) = report {
        fs::write(path, json(&sel)?)?;
    }
    println!(
        "offset {:?}, {} singular cells, total class {}",
        sel.offset,
        t.per_cell_classes.len(),
        t.total_class()
    );
    Ok(())
}

#[derive(Serialize)]
struct FlatReport {
    schema_version: u32,
    norm_ref: String,
    value: f64,
    method: gammaflow::chains::FlatMethod,
    integrality: gammaflow::chains::Integrality,
    relative_box: Option<Aabb>,
    p: serde_json::Value,
    q: Option<serde_json::Value>,
}

fn flatnorm(chain: &Path, relative_box: Option<Vec<f64>>, norm: Option<&str>, out: Option<&Path>) -> Result<()> {
    let (s, n, name) = read_chain(chain, norm)?;
    let region = relative_box.map(|v| parse_box(&v, s.grid().dim())).transpose()?;
    let f = flat_norm(&s, &n, region.as_ref())?;
    let report = FlatReport {
        schema_version: SCHEMA_VERSION,
        value: f.value,
        method: f.method,
        integrality: f.integrality,
        relative_box: region,
        p: serde_json::from_str(&f.p.to_json(Some(&name)))?,
        q: f.q.map(|q| serde_json::from_str(&q.to_json(Some(&name)))).transpose()?,
        norm_ref: name,
    };
    emit(out, &json(&report)?)
}

#[derive(Serialize)]
struct PlateauOut {
    schema_version: u32,
    norm_ref: String,
    mass: f64,
    initial_mass: f64,
    within: Aabb,
    chain: serde_json::Value,
}

fn plateau(chain: &Path, within: Option<Vec<f64>>, norm: Option<&str>, out: Option<&Path>) -> Result<()> {
    let (s, n, name) = read_chain(chain, norm)?;
    let within = match within {
        Some(v) => parse_box(&v, s.grid().dim())?,
        None => s.grid().bounding_box(),
    };
    let r = plateau_minimize(&s, &within, &n)?;
    let report = PlateauOut {
        schema_version: SCHEMA_VERSION,
        mass: r.mass,
        initial_mass: r.initial_mass,
        within,
        chain: serde_json::from_str(&r.chain.to_json(Some(&name)))?,
        norm_ref: name,
    };
    emit(out, &json(&report)?)
}

fn ball(config: &Path, tau: f64, p: f64, ck: f64, out: Option<&Path>) -> Result<()> {
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let cfg: SingularityConfig = serde_json::from_str(&text)?;
    let collection = ball_construction(&cfg, tau, p)?;
    let k = cfg.domain.dim();
    let norm_p = cfg.norm_at(p)?;
    let norm_k = cfg.norm_at(k as f64)?;
    let sigma = norm_p.group().element(&cfg.boundary_class)?;
    let certificate = lower_bound_certificate(&sigma, k, cfg.collar, &norm_p, &norm_k, ck)?;
    let doc = serde_json::json!({
        "schema_version": BALL_SCHEMA_VERSION,
        "collection": collection,
        "certificate": certificate,
    });
    emit(out, &json(&doc)?)
}

fn gamma(config: &Path, out_dir: Option<PathBuf>) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let dir = out_dir.unwrap_or_else(|| cfg.output.dir.clone());
    let res = gamma_run(&cfg)?;
    let written = write_bundle(&res, &dir)?;
    for r in &res.rows {
        println!(
            "p = {}: D_p = {}, (2-p) D_p = {}, flat distance to limit = {}{}",
            r.p,
            r.energy.map_or("-".into(), |e| format!("{e:.6}")),
            r.scaled_energy.map_or("-".into(), |e| format!("{e:.6}")),
            r.flat_dist_to_limit.map_or("-".into(), |e| format!("{e:.6}")),
            if r.errors.is_empty() { String::new() } else { format!(" [{}]", r.errors.join("; ")) }
        );
    }
    if let Some(x) = &res.extrapolation {
        println!(
            "extrapolated (2-p) D_p at p = 2: {:.6} (target {:.6}, residual {:.2e})",
            x.intercept, x.target, x.residual
        );
    }
    if let Some(pl) = &res.plateau {
        println!("plateau mass {:.6} (target {:.6}, cobordant {})", pl.mass, pl.target, pl.cobordant);
    }
    println!("wrote {} files to {}", written.len(), dir.display());
    if !res.all_converged {
        bail!(NonConvergence("some exponent reached the iteration cap".into()));
    }
    Ok(())
}

fn verify(checks_only: bool, out: Option<&Path>) -> Result<bool> {
    let report = verify_suite(!checks_only);
    for c in &report.checks {
        println!("check [{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    for c in &report.criteria {
        println!("{}", c.line());
    }
    println!(
        "{}/{} checks, {}/{} criteria passed",
        report.checks_passed,
        report.checks.len(),
        report.criteria_passed,
        report.criteria.len()
    );
    if let Some(path) = out {
        fs::write(path, json(&report)?)?;
    }
    Ok(report.passed)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::NormTable { target, p, classes, mode, m, table, out } => {
            norm_table(&target, &p, &classes, mode, m, table.as_deref(), out.as_deref())?
        }
        Command::Solve { config, out_dir } => solve(&config, out_dir)?,
        Command::Extract { field, out, ambient3, h, delta, samples, seed, report } => {
            extract(&field, &out, ambient3, h, delta, samples, seed, report.as_deref())?
        }
        Command::Flatnorm { chain, relative_box, norm, out } => {
            flatnorm(&chain, relative_box, norm.as_deref(), out.as_deref())?
        }
        Command::Plateau { chain, within, norm, out } => plateau(&chain, within, norm.as_deref(), out.as_deref())?,
        Command::Ball { config, tau, p, ck, out } => ball(&config, tau, p, ck, out.as_deref())?,
        Command::GammaRun { config, out_dir } => gamma(&config, out_dir)?,
        Command::Verify { checks_only, out } => {
            if !verify(checks_only, out.as_deref())? {
                return Ok(EXIT_CHECKS_FAILED);
            }
        }
    }
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::TAU;

    use gammaflow_cli::{EXIT_NONCONVERGENCE, EXIT_VALIDATION};

    use super::*;

    /// Parses and runs a command line, returning the exit code and the
    /// error message, if any.
    fn call(args: &[&str]) -> (u8, String) {
        let cli = Cli::try_parse_from(std::iter::once("gammaflow").chain(args.iter().copied())).unwrap();
        match run(cli) {
            Ok(code) => (code, String::new()),
            Err(e) => (exit_code(&e), format!("{e:#}")),
        }
    }

    fn path(p: &Path) -> &str {
        p.to_str().unwrap()
    }

    const SMALL: &str = "[domain]\nkind = \"disk\"\nradius = 1.0\n\n[boundary]\ndegree = 1\n\n[sweep]\np_list = [1.8, 1.9]\n\n[grid]\nn = 32\n";

    #[test]
    fn norm_table_circle_csv() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("norms.csv");
        let (code, _) = call(&["norm-table", "--p", "1.5,1.9", "--classes", "-1..2", "--out", path(&out)]);
        assert_eq!(code, EXIT_OK);
        let mut r = csv::Reader::from_path(&out).unwrap();
        assert_eq!(r.headers().unwrap(), vec!["p", "class", "E_p", "norm_p", "alpha_p"]);
        let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
        assert_eq!(rows.len(), 8);
        for row in &rows {
            let d: f64 = row[1].parse().unwrap();
            let norm: f64 = row[3].parse().unwrap();
            assert!((norm - TAU * d.abs()).abs() < 1e-9, "{row:?}");
            assert!((row[4].parse::<f64>().unwrap() - TAU).abs() < 1e-9);
        }
    }

    #[test]
    fn asymmetric_table_is_rejected_by_name() {
        let dir = tempfile::tempdir().unwrap();
        let table = dir.path().join("table.json");
        fs::write(
            &table,
            r#"{"free_rank":0,"torsion":[5],"cost":[{"elem":[1],"value":1.0},{"elem":[4],"value":2.0}]}"#,
        )
        .unwrap();
        let (code, msg) = call(&["norm-table", "--table", path(&table)]);
        assert_eq!(code, EXIT_VALIDATION);
        assert!(msg.contains("not symmetric"), "{msg}");
    }

    #[test]
    fn bad_configs_exit_with_validation_code() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("bad.toml");
        fs::write(&cfg, SMALL.replace("radius = 1.0", "radius = 1.0\nradios = 1.0")).unwrap();
        let (code, msg) = call(&["gamma-run", "--config", path(&cfg)]);
        assert_eq!(code, EXIT_VALIDATION);
        assert!(msg.contains("radios"), "{msg}");
        let (code, _) = call(&["solve", "--config", path(&dir.path().join("missing.toml"))]);
        assert_eq!(code, EXIT_VALIDATION);
        let (code, _) = call(&["norm-table", "--classes", "3..1"]);
        assert_eq!(code, EXIT_VALIDATION);
    }

    #[test]
    fn gamma_run_is_deterministic_and_chains_feed_the_other_commands() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.toml");
        fs::write(&cfg, SMALL).unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        for out in [&a, &b] {
            let (code, msg) = call(&["gamma-run", "--config", path(&cfg), "--out-dir", path(out)]);
            assert!(code == EXIT_OK || code == EXIT_NONCONVERGENCE, "{code}: {msg}");
        }
        let mut names: Vec<String> =
            fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
        names.sort();
        for f in ["run_sweep.csv", "run_gamma.json", "run_limit.json", "run_plateau.json", "run_T_p1.9.json"] {
            assert!(names.iter().any(|n| n == f), "{f} missing from {names:?}");
        }
        for n in &names {
            assert_eq!(fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap(), "{n} differs");
        }
        let csv = fs::read_to_string(a.join("run_sweep.csv")).unwrap();
        assert_eq!(csv.lines().next().unwrap(), gammaflow_cli::pipeline::CSV_COLUMNS.join(","));

        let limit = a.join("run_limit.json");
        let flat = dir.path().join("flat.json");
        assert_eq!(call(&["flatnorm", "--chain", path(&limit), "--out", path(&flat)]).0, EXIT_OK);
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&flat).unwrap()).unwrap();
        // A single vortex: the flat norm is the mass of one unit point.
        assert!((v["value"].as_f64().unwrap() - TAU).abs() < 1e-9, "{v}");
        assert_eq!(v["schema_version"], SCHEMA_VERSION);

        let rel = dir.path().join("rel.json");
        let (code, msg) =
            call(&["flatnorm", "--chain", path(&limit), "--relative-box", "-1,-1,1,1", "--out", path(&rel)]);
        assert_eq!(code, EXIT_OK, "{msg}");
        let (code, _) = call(&["flatnorm", "--chain", path(&limit), "--relative-box", "0,1"]);
        assert_eq!(code, EXIT_VALIDATION);

        let plateau = dir.path().join("plateau.json");
        assert_eq!(call(&["plateau", "--chain", path(&limit), "--out", path(&plateau)]).0, EXIT_OK);
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&plateau).unwrap()).unwrap();
        assert!((v["mass"].as_f64().unwrap() - TAU).abs() < 1e-9, "{v}");
    }

    #[test]
    fn solve_then_extract() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.toml");
        fs::write(&cfg, SMALL.replace("[1.8, 1.9]", "[1.9]")).unwrap();
        let (code, msg) = call(&["solve", "--config", path(&cfg), "--out-dir", path(dir.path())]);
        assert!(code == EXIT_OK || code == EXIT_NONCONVERGENCE, "{code}: {msg}");
        let field = dir.path().join("run_p1.9.field");
        let chain = dir.path().join("t.json");
        let report = dir.path().join("offset.json");
        let (code, msg) = call(&[
            "extract",
            "--field",
            path(&field),
            "--out",
            path(&chain),
            "--report",
            path(&report),
        ]);
        assert_eq!(code, EXIT_OK, "{msg}");
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&chain).unwrap()).unwrap();
        assert!(v.is_object());
        assert!(report.exists());
        assert_eq!(call(&["extract", "--field", path(&field), "--out", path(&chain), "--ambient3"]).0, EXIT_VALIDATION);
    }

    #[test]
    fn ball_reports_collection_and_certificate() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("balls.json");
        let sc = gammaflow_cli::criteria::random_ball_config(3, 4);
        fs::write(&cfg, serde_json::to_string(&sc).unwrap()).unwrap();
        let out = dir.path().join("out.json");
        let (code, msg) = call(&["ball", "--config", path(&cfg), "--tau", "0.001", "--p", "1.9", "--out", path(&out)]);
        assert_eq!(code, EXIT_OK, "{msg}");
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
        assert!(v["collection"].is_object() && v["certificate"].is_object(), "{v}");
        assert!(v["schema_version"].is_number());
        let (code, _) = call(&["ball", "--config", path(&cfg), "--tau=-1", "--p", "1.9"]);
        assert_eq!(code, EXIT_VALIDATION);
    }
}
