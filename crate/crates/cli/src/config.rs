//! TOML experiment configuration.
//!
//! Every section is optional at parse time; each subcommand checks for the
//! sections it needs. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use pwiener::capacity::{CapacityConfig, SolverConfig};
use pwiener::geometry::{DomainSpec, Point};
use pwiener::pde::{BoundaryDatum, SchemeConfig, TimeAxis};
use pwiener::wiener::RadiusSearch;
use pwiener::StructureParams;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub params: ParamsSection,
    pub domain: Option<DomainSpec>,
    /// Boundary point; defaults to the domain anchor.
    pub x_o: Option<Vec<f64>>,
    pub t_o: Option<f64>,
    #[serde(default)]
    pub capacity: CapacitySection,
    #[serde(default)]
    pub profile: ProfileSection,
    pub pde: Option<PdeSection>,
    pub cascade: Option<CascadeSection>,
    #[serde(default)]
    pub probes: ProbesSection,
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub p: f64,
    pub dim: usize,
    #[serde(default = "two")]
    pub gamma_1: f64,
    #[serde(default = "two")]
    pub gamma_2: f64,
    /// Overrides for the derived constants.
    pub gamma: Option<f64>,
    pub bar_gamma: Option<f64>,
    pub nu: Option<f64>,
}

fn two() -> f64 {
    2.0
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapacitySection {
    pub cells_per_rho: usize,
    pub max_iter: usize,
    pub tol_rel_energy: f64,
    pub weight_floor: f64,
    /// Radii for the `capacity` subcommand.
    pub radii: Vec<f64>,
}

impl Default for CapacitySection {
    fn default() -> Self {
        let c = CapacityConfig::default();
        CapacitySection {
            cells_per_rho: c.cells_per_rho,
            max_iter: c.solver.max_iter,
            tol_rel_energy: c.solver.tol_rel_energy,
            weight_floor: c.solver.weight_floor,
            radii: Vec::new(),
        }
    }
}

/// A number, or the string `"auto"`.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum AutoOr {
    Value(f64),
    Auto(AutoTag),
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoTag {
    Auto,
}

impl AutoOr {
    pub fn value(self) -> Option<f64> {
        match self {
            AutoOr::Value(v) => Some(v),
            AutoOr::Auto(_) => None,
        }
    }
}

impl Default for AutoOr {
    fn default() -> Self {
        AutoOr::Auto(AutoTag::Auto)
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileSection {
    pub r_o: AutoOr,
    pub epsilon: f64,
    pub depth: usize,
    pub c_bar: AutoOr,
    pub search: RadiusSearch,
    /// Window for the divergence heuristic.
    pub window: usize,
    pub slope_tol: f64,
}

impl Default for ProfileSection {
    fn default() -> Self {
        ProfileSection {
            r_o: AutoOr::default(),
            epsilon: 0.5,
            depth: 4,
            c_bar: AutoOr::default(),
            search: RadiusSearch::default(),
            window: 8,
            slope_tol: 0.05,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PdeSection {
    /// Half edge of the computational box, centred at `x_o`.
    #[serde(default = "one")]
    pub half_edge: f64,
    pub h: f64,
    pub time: TimeAxis,
    pub datum: DatumConfig,
    #[serde(default = "pde_tol")]
    pub tol_rel_energy: f64,
    #[serde(default = "pde_iter")]
    pub max_iter: usize,
    /// Time indices to write as snapshots; the last level when empty.
    #[serde(default)]
    pub snapshots: Vec<usize>,
}

fn one() -> f64 {
    1.0
}

fn pde_tol() -> f64 {
    SchemeConfig::default().solver.tol_rel_energy
}

fn pde_iter() -> usize {
    SchemeConfig::default().solver.max_iter
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatumConfig {
    Constant {
        value: f64,
    },
    Linear {
        coeffs: Vec<f64>,
        #[serde(default)]
        rate: f64,
        #[serde(default)]
        offset: f64,
    },
    RadialPower {
        center: Vec<f64>,
        exponent: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `min(cap, dist(x, E^c) / scale)` for the configured domain.
    DistanceRamp {
        scale: f64,
        #[serde(default = "one")]
        cap: f64,
    },
    Barenblatt {
        #[serde(default = "one")]
        t_shift: f64,
    },
    Sum {
        parts: Vec<DatumConfig>,
    },
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeSection {
    #[serde(default = "one")]
    pub mu_o: f64,
    /// Defaults to `profile.epsilon`.
    pub epsilon: Option<f64>,
    #[serde(default = "one")]
    pub r_o: f64,
    #[serde(default)]
    pub c_bar: AutoOr,
    /// Explicit densities `δ_i`; takes precedence over `generator`.
    pub deltas: Option<Vec<f64>>,
    pub generator: Option<GeneratorConfig>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorConfig {
    Diverging { depth: usize, delta_min: f64 },
    NoisyConstant { depth: usize, level: f64, noise: f64 },
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbesSection {
    /// Number of dyadic radii `R_o/2, R_o/4, …` for the oscillation fit.
    pub radii: usize,
    /// Time samples for the lateral oscillation of `g`.
    pub time_samples: usize,
    /// Fixed `ω_o`; measured over `Q_{R_o}` when absent.
    pub omega_o: Option<f64>,
    pub harnack: Vec<HarnackRequest>,
    pub spreading: Vec<SpreadingRequest>,
}

impl Default for ProbesSection {
    fn default() -> Self {
        ProbesSection { radii: 4, time_samples: 33, omega_o: None, harnack: Vec::new(), spreading: Vec::new() }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct HarnackRequest {
    pub y: Vec<f64>,
    pub s: f64,
    pub rho: f64,
    #[serde(default = "one")]
    pub c: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SpreadingRequest {
    pub y: Vec<f64>,
    pub rho: f64,
    pub t_bar: f64,
    pub k: f64,
    pub horizon: Option<f64>,
}

/// Parsed configuration together with its source text.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub text: String,
    pub cfg: ExperimentConfig,
}

pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg = parse(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    Ok(LoadedConfig { text, cfg })
}

pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(CliError::Config(format!(
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            cfg.schema_version
        )));
    }
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn structure_params(&self) -> Result<StructureParams, CliError> {
        let s = &self.params;
        let mut params =
            StructureParams::with_gammas(s.p, s.dim, s.gamma_1, s.gamma_2).map_err(config_err("params"))?;
        if let Some(g) = s.gamma {
            params.constants.gamma = g;
            params.constants.gamma_3 = 1.0 / g;
        }
        if let Some(b) = s.bar_gamma {
            params.constants.bar_gamma = b;
        }
        if let Some(nu) = s.nu {
            params.constants.nu = nu;
        }
        params.validate().map_err(config_err("params"))?;
        Ok(params)
    }

    pub fn domain(&self) -> Result<&DomainSpec, CliError> {
        let d = self.domain.as_ref().ok_or_else(|| missing("domain"))?;
        if d.dim() != self.params.dim {
            return Err(CliError::Config(format!(
                "domain has dimension {} but params.dim = {}",
                d.dim(),
                self.params.dim
            )));
        }
        Ok(d)
    }

    pub fn x_o(&self) -> Result<Point, CliError> {
        let domain = self.domain()?;
        match &self.x_o {
            Some(x) if x.len() != domain.dim() => {
                Err(CliError::Config(format!("x_o has {} coordinates, expected {}", x.len(), domain.dim())))
            }
            Some(x) => Ok(Point::new(x)),
            None => Ok(domain.anchor().clone()),
        }
    }

    pub fn t_o(&self) -> Result<f64, CliError> {
        match self.t_o {
            Some(t) if t > 0.0 => Ok(t),
            Some(t) => Err(CliError::Config(format!("t_o must be positive, got {t}"))),
            None => Err(missing("t_o")),
        }
    }

    pub fn capacity_config(&self) -> Result<CapacityConfig, CliError> {
        let c = &self.capacity;
        let cfg = CapacityConfig {
            cells_per_rho: c.cells_per_rho,
            solver: SolverConfig {
                max_iter: c.max_iter,
                tol_rel_energy: c.tol_rel_energy,
                weight_floor: c.weight_floor,
            },
        };
        cfg.validate().map_err(config_err("capacity"))?;
        Ok(cfg)
    }

    pub fn pde(&self) -> Result<&PdeSection, CliError> {
        self.pde.as_ref().ok_or_else(|| missing("pde"))
    }

    pub fn scheme_config(&self) -> Result<SchemeConfig, CliError> {
        let pde = self.pde()?;
        let cfg = SchemeConfig {
            solver: SolverConfig {
                max_iter: pde.max_iter,
                tol_rel_energy: pde.tol_rel_energy,
                weight_floor: self.capacity.weight_floor,
            },
        };
        cfg.solver.validate().map_err(config_err("pde"))?;
        Ok(cfg)
    }

    pub fn datum(&self, d: &DatumConfig) -> Result<BoundaryDatum, CliError> {
        let dim = self.params.dim;
        let check_len = |v: &[f64], what: &str| {
            if v.len() == dim {
                Ok(())
            } else {
                Err(CliError::Config(format!("pde.datum.{what} needs {dim} coordinates")))
            }
        };
        Ok(match d {
            DatumConfig::Constant { value } => BoundaryDatum::Constant(*value),
            DatumConfig::Linear { coeffs, rate, offset } => {
                check_len(coeffs, "coeffs")?;
                BoundaryDatum::Linear { coeffs: coeffs.clone(), rate: *rate, offset: *offset }
            }
            DatumConfig::RadialPower { center, exponent, scale } => {
                check_len(center, "center")?;
                if !(*exponent > 0.0) {
                    return Err(CliError::Config("pde.datum.exponent must be positive".into()));
                }
                BoundaryDatum::RadialPower { center: Point::new(center), exponent: *exponent, scale: *scale }
            }
            DatumConfig::DistanceRamp { scale, cap } => {
                if !(*scale > 0.0) {
                    return Err(CliError::Config("pde.datum.scale must be positive".into()));
                }
                BoundaryDatum::DistanceRamp { domain: self.domain()?.clone(), scale: *scale, cap: *cap }
            }
            DatumConfig::Barenblatt { t_shift } => {
                if !(*t_shift > 0.0) {
                    return Err(CliError::Config("pde.datum.t_shift must be positive".into()));
                }
                BoundaryDatum::Barenblatt { p: self.params.p, t_shift: *t_shift }
            }
            DatumConfig::Sum { parts } => {
                BoundaryDatum::Sum(parts.iter().map(|q| self.datum(q)).collect::<Result<_, _>>()?)
            }
        })
    }
}

fn missing(section: &str) -> CliError {
    CliError::Config(format!("missing `{section}` in the configuration"))
}

fn config_err(section: &'static str) -> impl Fn(pwiener::Error) -> CliError {
    move |e| CliError::Config(format!("[{section}] {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
[params]
p = 3.0
dim = 2
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse(MINIMAL).unwrap();
        assert_eq!(cfg.capacity.cells_per_rho, 16);
        assert_eq!(cfg.profile.r_o, AutoOr::default());
        assert_eq!(cfg.probes.radii, 4);
        assert!(cfg.structure_params().is_ok());
    }

    #[test]
    fn unknown_keys_report_their_line() {
        let text = format!("{MINIMAL}bogus = 1\n");
        let err = parse(&text).unwrap_err().to_string();
        assert!(err.contains("bogus") && err.contains("line 6"), "{err}");
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        let text = MINIMAL.replace("schema_version = 1", "schema_version = 2");
        assert!(matches!(parse(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn auto_or_number() {
        let text = format!("{MINIMAL}[profile]\nr_o = 0.5\nc_bar = \"auto\"\n");
        let cfg = parse(&text).unwrap();
        assert_eq!(cfg.profile.r_o.value(), Some(0.5));
        assert_eq!(cfg.profile.c_bar.value(), None);
    }

    #[test]
    fn domain_and_datum_tables() {
        let text = format!(
            "t_o = 1.0\n{MINIMAL}[domain]\nkind = \"slit\"\nparams = [0, 0, 1, 0]\nanchor = [0, 0]\n\
             [pde]\nh = 0.125\ntime = {{ kind = \"uniform\", t_end = 1.0, steps = 4 }}\n\
             datum = {{ kind = \"sum\", parts = [{{ kind = \"constant\", value = 1.0 }}, {{ kind = \"distance_ramp\", scale = 0.5 }}] }}\n"
        );
        let cfg = parse(&text).unwrap();
        let datum = cfg.datum(&cfg.pde().unwrap().datum).unwrap();
        assert_eq!(datum.eval(&[0.0, 0.5], 0.0), 2.0);
        assert_eq!(cfg.x_o().unwrap(), Point::origin(2));
    }
}
