//! Run configuration read from TOML.
//!
//! ```toml
//! [domain]
//! kind = "disk"        # disk | annulus | box
//! center = [0.0, 0.0]
//! radius = 1.0
//! collar = 0.5
//!
//! [boundary]
//! degree = 1           # or trace = [...] or trace_file = "trace.json"
//!
//! [sweep]
//! p_list = [1.7, 1.8, 1.9, 1.95]
//! seed = 0
//!
//! [grid]
//! n = 128
//! policy = "fixed"     # fixed | guideline
//! h = 0.0625
//!
//! [output]
//! dir = "out"
//! prefix = "run"
//! ```
//!
//! Unknown keys anywhere are errors.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gammaflow::chains::Aabb;
use gammaflow::fields::{dipole_map, unit, BoundaryData, DipoleSpec, Domain, Field, Lattice};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSection,
    pub boundary: BoundarySection,
    pub sweep: SweepSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Disk,
    Annulus,
    Box,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub kind: DomainKind,
    #[serde(default)]
    pub center: Option<[f64; 2]>,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub inner: Option<f64>,
    #[serde(default)]
    pub outer: Option<f64>,
    #[serde(default)]
    pub lo: Option<[f64; 2]>,
    #[serde(default)]
    pub hi: Option<[f64; 2]>,
    /// Width of the collar used for the lower-bound certificates.
    #[serde(default = "default_collar")]
    pub collar: f64,
}

fn default_collar() -> f64 {
    0.5
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySection {
    #[serde(default)]
    pub degree: Option<i64>,
    /// Trace angles at equally spaced polar angles.
    #[serde(default)]
    pub trace: Option<Vec<f64>>,
    /// JSON array of trace angles, relative to the config file.
    #[serde(default)]
    pub trace_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub p_list: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridPolicy {
    /// Every row is extracted on a grid of spacing `h`.
    Fixed,
    /// Row `p` uses the largest multiple of the lattice spacing not above
    /// `(2-p)^3`, and at least the lattice spacing.
    Guideline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Lattice nodes along the longer side of the domain's bounding box.
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_policy")]
    pub policy: GridPolicy,
    /// Extraction grid spacing; defaults to four lattice spacings.
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_samples")]
    pub offset_samples: usize,
}

fn default_n() -> usize {
    128
}
fn default_policy() -> GridPolicy {
    GridPolicy::Fixed
}
fn default_delta() -> f64 {
    0.5
}
fn default_samples() -> usize {
    64
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            n: default_n(),
            policy: default_policy(),
            h: None,
            delta: default_delta(),
            offset_samples: default_samples(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_prefix")]
    pub prefix: String,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_prefix() -> String {
    "run".into()
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: default_dir(), prefix: default_prefix() }
    }
}

/// A configuration error, reported with exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("invalid configuration: {0}")]
pub struct ConfigError(pub String);

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

impl RunConfig {
    /// Parses and validates; `base` resolves a relative `trace_file`.
    pub fn from_toml(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        if let (Some(base), Some(tf)) = (base, cfg.boundary.trace_file.as_mut()) {
            if tf.is_relative() {
                *tf = base.join(&*tf);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text, path.parent())
    }

    pub fn validate(&self) -> Result<()> {
        self.domain()?;
        let b = &self.boundary;
        let given = [b.degree.is_some(), b.trace.is_some(), b.trace_file.is_some()];
        if given.iter().filter(|&&g| g).count() != 1 {
            bail!(invalid("[boundary] needs exactly one of degree, trace, trace_file"));
        }
        if self.sweep.p_list.is_empty() {
            bail!(invalid("[sweep] p_list is empty"));
        }
        for &p in &self.sweep.p_list {
            if !(p > 1.0 && p < 2.0) {
                bail!(invalid(format!("p = {p} lies outside (1, 2)")));
            }
        }
        let mut sorted = self.sweep.p_list.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            bail!(invalid("[sweep] p_list repeats an exponent"));
        }
        if self.grid.n < 8 {
            bail!(invalid("[grid] n must be at least 8"));
        }
        if let Some(h) = self.grid.h {
            if !(h > 0.0 && h.is_finite()) {
                bail!(invalid(format!("[grid] h must be positive, got {h}")));
            }
        }
        if !(self.grid.delta > 0.0) {
            bail!(invalid("[grid] delta must be positive"));
        }
        if !(self.domain.collar > 0.0 && self.domain.collar <= 0.5) {
            bail!(invalid(format!("[domain] collar must lie in (0, 1/2], got {}", self.domain.collar)));
        }
        if self.output.prefix.is_empty() || self.output.prefix.contains(['/', '\\']) {
            bail!(invalid("[output] prefix must be a plain file name stem"));
        }
        Ok(())
    }

    /// The domain described by `[domain]`.
    pub fn domain(&self) -> Result<Domain> {
        let d = &self.domain;
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| invalid(format!("[domain] {:?} needs {name}", d.kind)));
        let dom = match d.kind {
            DomainKind::Disk => {
                Domain::Disk { center: d.center.unwrap_or([0.0, 0.0]), radius: need(d.radius, "radius")? }
            }
            DomainKind::Annulus => Domain::Annulus {
                center: d.center.unwrap_or([0.0, 0.0]),
                inner: need(d.inner, "inner")?,
                outer: need(d.outer, "outer")?,
            },
            DomainKind::Box => {
                let (Some(lo), Some(hi)) = (d.lo, d.hi) else {
                    bail!(invalid("[domain] box needs lo and hi"));
                };
                Domain::Box { lo: lo.to_vec(), hi: hi.to_vec() }
            }
        };
        dom.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(dom)
    }

    /// The box `U` used for relative flat norms and Plateau problems.
    pub fn region(&self) -> Result<Aabb> {
        Ok(self.domain()?.bounds())
    }

    pub fn boundary_data(&self) -> Result<BoundaryData> {
        let b = &self.boundary;
        let data = if let Some(degree) = b.degree {
            BoundaryData::Degree { degree }
        } else if let Some(angles) = &b.trace {
            BoundaryData::Trace { angles: angles.clone() }
        } else {
            let path = b.trace_file.as_ref().expect("validated");
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let angles: Vec<f64> = serde_json::from_str(&text)
                .map_err(|e| invalid(format!("trace file {}: {e}", path.display())))?;
            BoundaryData::Trace { angles }
        };
        data.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(data)
    }

    /// Cell-centred lattice over the domain's bounding box with `n` nodes
    /// along its longer side. Box domains get one extra layer of nodes on
    /// each side, which carry the Dirichlet data.
    pub fn lattice(&self) -> Result<Lattice> {
        let dom = self.domain()?;
        let b = dom.bounds();
        let side = (0..2).map(|i| b.hi[i] - b.lo[i]).fold(0.0, f64::max);
        let h = side / self.grid.n as f64;
        let pad = usize::from(matches!(dom, Domain::Box { .. }));
        let dims: Vec<usize> = (0..2).map(|i| ((b.hi[i] - b.lo[i]) / h).round() as usize + 2 * pad).collect();
        let origin: Vec<f64> = (0..2).map(|i| b.lo[i] + 0.5 * h - pad as f64 * h).collect();
        Ok(Lattice::new(origin, h, dims)?)
    }

    /// Extraction grid spacing for the exponent `p`.
    pub fn grid_h(&self, p: f64, hf: f64) -> f64 {
        match self.grid.policy {
            GridPolicy::Fixed => self.grid.h.unwrap_or(4.0 * hf),
            GridPolicy::Guideline => guideline_h(p, hf),
        }
    }

    /// Initial field at exponent `p`. Disk and box domains start from
    /// `|degree|` unit vortices of the degree's sign placed near the centre;
    /// an annulus starts from the boundary data extended along rays. Free
    /// angles get a seeded perturbation of at most 0.05.
    pub fn initial_field(&self, p: f64) -> Result<Field> {
        let dom = self.domain()?;
        let lat = self.lattice()?;
        let data = self.boundary_data()?;
        let degree = data.degree();
        let (center, scale) = match &dom {
            Domain::Disk { center, radius } => (*center, *radius),
            Domain::Annulus { center, outer, .. } => (*center, *outer),
            Domain::Box { lo, hi } => {
                ([0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])], 0.5 * (hi[0] - lo[0]).min(hi[1] - lo[1]))
            }
        };
        let mut f = match dom {
            Domain::Annulus { .. } => Field::from_fn(lat, dom, p, |x| unit(data.angle_at(x, center)))?,
            _ => {
                let n = degree.unsigned_abs() as usize;
                let sign = degree.signum();
                // Off-lattice positions so no vortex starts on a grid line.
                let singularities = match n {
                    0 => Vec::new(),
                    1 => vec![([center[0] + 0.0137 * scale, center[1] + 0.0071 * scale], sign)],
                    _ => (0..n)
                        .map(|j| {
                            let t = 0.1 + std::f64::consts::TAU * j as f64 / n as f64;
                            ([center[0] + 0.3 * scale * t.cos(), center[1] + 0.3 * scale * t.sin()], sign)
                        })
                        .collect(),
                };
                let spec = DipoleSpec { singularities, boundary_degree: degree };
                dipole_map(&spec, lat, dom, &data, p)?
            }
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.sweep.seed);
        let values: Vec<[f64; 2]> = (0..f.values().len())
            .map(|i| if f.fixed()[i] { f.values()[i] } else { unit(f.angle(i) + rng.gen_range(-0.05..0.05)) })
            .collect();
        f.set_values(values)?;
        Ok(f)
    }

    /// `p_list` in ascending order.
    pub fn sorted_p(&self) -> Vec<f64> {
        let mut ps = self.sweep.p_list.clone();
        ps.sort_by(f64::total_cmp);
        ps
    }
}

/// Largest multiple of `hf` not above `(2-p)^3`, and at least `hf`.
pub fn guideline_h(p: f64, hf: f64) -> f64 {
    let target = (2.0 - p).powi(3);
    let m = (target / hf * (1.0 + 1e-12)).floor().max(1.0);
    m * hf
}

#[cfg(test)]
mod tests {
    use super::*;

    const DISK: &str = r#"
[domain]
kind = "disk"
radius = 1.0

[boundary]
degree = 1

[sweep]
p_list = [1.9, 1.7]

[grid]
n = 32
"#;

    #[test]
    fn parses_and_fills_defaults() {
        let cfg = RunConfig::from_toml(DISK, None).unwrap();
        assert_eq!(cfg.domain.collar, 0.5);
        assert_eq!(cfg.grid.policy, GridPolicy::Fixed);
        assert_eq!(cfg.sorted_p(), vec![1.7, 1.9]);
        let lat = cfg.lattice().unwrap();
        assert_eq!(lat.dims, vec![32, 32]);
        assert!((lat.h - 1.0 / 16.0).abs() < 1e-15);
        assert_eq!(cfg.grid_h(1.9, lat.h), 0.25);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = DISK.replace("radius = 1.0", "radius = 1.0\nradios = 2.0");
        let err = RunConfig::from_toml(&bad, None).unwrap_err();
        assert!(err.downcast_ref::<ConfigError>().is_some());
        assert!(err.to_string().contains("radios"), "{err}");
        let bad = DISK.replace("[grid]", "[grid]\nspacing = 1");
        assert!(RunConfig::from_toml(&bad, None).is_err());
    }

    #[test]
    fn boundary_needs_exactly_one_source() {
        let both = DISK.replace("degree = 1", "degree = 1\ntrace = [0.0, 1.0, 2.0]");
        assert!(RunConfig::from_toml(&both, None).is_err());
        let none = DISK.replace("degree = 1", "");
        assert!(RunConfig::from_toml(&none, None).is_err());
    }

    #[test]
    fn p_outside_range_is_rejected() {
        assert!(RunConfig::from_toml(&DISK.replace("1.7]", "2.0]"), None).is_err());
    }

    #[test]
    fn guideline_spacing() {
        let hf = 1.0 / 64.0;
        // (0.3)^3 = 0.027 holds one lattice spacing.
        assert_eq!(guideline_h(1.7, hf), hf);
        assert_eq!(guideline_h(1.95, hf), hf);
        assert_eq!(guideline_h(1.4, hf), 13.0 * hf);
    }

    #[test]
    fn initial_field_winds_once() {
        let cfg = RunConfig::from_toml(DISK, None).unwrap();
        let f = cfg.initial_field(1.9).unwrap();
        let v = gammaflow::fields::vortex_cells(&f);
        assert_eq!(v.iter().map(|c| c.1).sum::<i64>(), 1);
    }

    #[test]
    fn box_lattice_is_padded() {
        let text = DISK.replace("kind = \"disk\"\nradius = 1.0", "kind = \"box\"\nlo = [0.0, 0.0]\nhi = [2.0, 1.0]");
        let cfg = RunConfig::from_toml(&text, None).unwrap();
        let lat = cfg.lattice().unwrap();
        assert_eq!(lat.dims, vec![34, 18]);
        let f = cfg.initial_field(1.8).unwrap();
        assert!(f.fixed().iter().any(|&b| b));
        assert!(f.fixed().iter().any(|&b| !b));
    }
}
