//! Configuration-driven run setup: strict TOML schema with [geometry],
//! [bc], [solver], [run] sections, named presets, and environment
//! overrides (SURFNS_* variables).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GeometryKind, GeometrySpec};
use crate::helmholtz::PoissonMethod;
use crate::stokes::BoundaryCondition;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    /// disk | spherical-cap | cylinder
    pub kind: String,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub theta_max: Option<f64>,
    #[serde(default)]
    pub height: Option<f64>,
    pub n1: usize,
    pub n2: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcConfig {
    /// navier-slip | perfect-slip
    pub mode: String,
    #[serde(default)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// spectral | cg
    #[serde(default = "default_poisson")]
    pub poisson: String,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_eigen_tol")]
    pub eigen_tol: f64,
    /// worker threads (0 = available parallelism)
    #[serde(default)]
    pub threads: usize,
}

fn default_poisson() -> String {
    "spectral".to_string()
}
fn default_tol() -> f64 {
    1e-10
}
fn default_eigen_tol() -> f64 {
    1e-8
}
fn default_mu() -> f64 {
    1.0
}
fn default_dt() -> f64 {
    1e-2
}
fn default_cfl() -> f64 {
    0.5
}
fn default_true() -> bool {
    true
}
fn default_sample_every() -> usize {
    1
}
fn default_k() -> usize {
    10
}
fn default_amplitude() -> f64 {
    1.0
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            poisson: default_poisson(),
            tol: default_tol(),
            eigen_tol: default_eigen_tol(),
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mu_s: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default = "default_cfl")]
    pub c_cfl: f64,
    #[serde(default = "default_true")]
    pub adaptive_dt: bool,
    #[serde(default = "default_true")]
    pub advection: bool,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    /// zero | rotation | random-div-free | rotation-plus-random | from-file
    #[serde(default)]
    pub initial: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default)]
    pub rotation_amplitude: Option<f64>,
    #[serde(default)]
    pub remove_killing: bool,
    #[serde(default)]
    pub stop_dist: Option<f64>,
    #[serde(default)]
    pub field_file: Option<String>,
    /// eigenpair count for the eigens task
    #[serde(default = "default_k")]
    pub k: usize,
    /// VTK snapshot cadence in samples (0 = none)
    #[serde(default)]
    pub vtk_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mu_s: default_mu(),
            dt: default_dt(),
            t_end: None,
            c_cfl: default_cfl(),
            adaptive_dt: true,
            advection: true,
            sample_every: 1,
            initial: None,
            seed: 0,
            amplitude: 1.0,
            rotation_amplitude: None,
            remove_killing: false,
            stop_dist: None,
            field_file: None,
            k: 10,
            vtk_every: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub geometry: GeometryConfig,
    pub bc: BcConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub run: Option<RunConfig>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry_spec()?;
        self.boundary_condition()?;
        match self.solver.poisson.as_str() {
            "spectral" | "cg" => {}
            other => {
                return Err(Error::Config(format!(
                    "solver.poisson must be 'spectral' or 'cg', got '{other}'"
                )))
            }
        }
        if let Some(run) = &self.run {
            if !(run.mu_s > 0.0) {
                return Err(Error::Config("run.mu_s must be positive".into()));
            }
            if !(run.dt > 0.0) {
                return Err(Error::Config("run.dt must be positive".into()));
            }
            if let Some(t) = run.t_end {
                if !(t > 0.0) {
                    return Err(Error::Config("run.t_end must be positive".into()));
                }
            }
            if let Some(init) = &run.initial {
                match init.as_str() {
                    "zero" | "rotation" | "random-div-free" | "rotation-plus-random"
                    | "from-file" => {}
                    other => {
                        return Err(Error::Config(format!(
                            "run.initial '{other}' is not a known initial condition"
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    pub fn geometry_spec(&self) -> Result<GeometrySpec> {
        let g = &self.geometry;
        let kind = match g.kind.as_str() {
            "disk" => GeometryKind::Disk {
                radius: g.radius.ok_or_else(|| {
                    Error::Config("geometry.radius is required for kind = 'disk'".into())
                })?,
            },
            "spherical-cap" => GeometryKind::SphericalCap {
                theta_max: g.theta_max.ok_or_else(|| {
                    Error::Config(
                        "geometry.theta_max is required for kind = 'spherical-cap'".into(),
                    )
                })?,
            },
            "cylinder" => GeometryKind::Cylinder {
                radius: g.radius.ok_or_else(|| {
                    Error::Config("geometry.radius is required for kind = 'cylinder'".into())
                })?,
                height: g.height.ok_or_else(|| {
                    Error::Config("geometry.height is required for kind = 'cylinder'".into())
                })?,
            },
            other => {
                return Err(Error::Config(format!(
                    "geometry.kind '{other}' is not one of disk | spherical-cap | cylinder"
                )))
            }
        };
        let spec = GeometrySpec {
            kind,
            resolution: (g.n1, g.n2),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn boundary_condition(&self) -> Result<BoundaryCondition> {
        match self.bc.mode.as_str() {
            "navier-slip" => Ok(BoundaryCondition::NavierSlip {
                alpha: self.bc.alpha.unwrap_or(0.0),
            }),
            "perfect-slip" => {
                if self.bc.alpha.is_some() {
                    return Err(Error::Config(
                        "bc.alpha is not accepted for perfect-slip".into(),
                    ));
                }
                Ok(BoundaryCondition::PerfectSlip)
            }
            other => Err(Error::Config(format!(
                "bc.mode '{other}' is not one of navier-slip | perfect-slip"
            ))),
        }
    }

    pub fn poisson_method(&self) -> PoissonMethod {
        match self.solver.poisson.as_str() {
            "cg" => PoissonMethod::Cg,
            _ => PoissonMethod::Spectral,
        }
    }

    /// Apply SURFNS_SEED / SURFNS_THREADS environment overrides.
    pub fn apply_env(&mut self) {
        if let Ok(v) = std::env::var("SURFNS_SEED") {
            if let Ok(seed) = v.parse() {
                if let Some(run) = &mut self.run {
                    run.seed = seed;
                }
            }
        }
        if let Ok(v) = std::env::var("SURFNS_THREADS") {
            if let Ok(t) = v.parse() {
                self.solver.threads = t;
            }
        }
    }
}

/// Named presets from the worked examples.
pub fn preset(name: &str) -> Result<Config> {
    let text = match name {
        // friction spins the fluid down to rest
        "hemisphere-spindown" => {
            r#"
[geometry]
kind = "spherical-cap"
theta_max = 1.5707963267948966
n1 = 64
n2 = 64

[bc]
mode = "navier-slip"
alpha = 1.0

[run]
mu_s = 1.0
initial = "random-div-free"
seed = 1
amplitude = 1.0
"#
        }
        // pure slip: the limit is a rigid rotation
        "hemisphere-freeslip" => {
            r#"
[geometry]
kind = "spherical-cap"
theta_max = 1.5707963267948966
n1 = 64
n2 = 64

[bc]
mode = "navier-slip"
alpha = 0.0

[run]
mu_s = 1.0
initial = "rotation-plus-random"
rotation_amplitude = 0.3
seed = 1
amplitude = 1.0
"#
        }
        "disk-freeslip" => {
            r#"
[geometry]
kind = "disk"
radius = 1.0
n1 = 64
n2 = 64

[bc]
mode = "navier-slip"
alpha = 0.0

[run]
mu_s = 1.0
initial = "rotation-plus-random"
rotation_amplitude = 0.3
seed = 1
amplitude = 1.0
"#
        }
        "disk-spindown" => {
            r#"
[geometry]
kind = "disk"
radius = 1.0
n1 = 64
n2 = 64

[bc]
mode = "navier-slip"
alpha = 1.0

[run]
mu_s = 1.0
initial = "random-div-free"
seed = 1
amplitude = 1.0
"#
        }
        "cylinder-freeslip" => {
            r#"
[geometry]
kind = "cylinder"
radius = 1.0
height = 1.0
n1 = 64
n2 = 64

[bc]
mode = "navier-slip"
alpha = 0.0

[run]
mu_s = 1.0
initial = "rotation-plus-random"
rotation_amplitude = 0.3
seed = 1
amplitude = 1.0
"#
        }
        "cylinder-spindown" => {
            r#"
[geometry]
kind = "cylinder"
radius = 1.0
height = 1.0
n1 = 64
n2 = 64

[bc]
mode = "navier-slip"
alpha = 1.0

[run]
mu_s = 1.0
initial = "random-div-free"
seed = 1
amplitude = 1.0
"#
        }
        other => {
            return Err(Error::Config(format!(
                "unknown preset '{other}' (try hemisphere-spindown, hemisphere-freeslip, \
                 disk-freeslip, disk-spindown, cylinder-freeslip, cylinder-spindown)"
            )))
        }
    };
    Config::parse(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_resolve() {
        let c = preset("hemisphere-spindown").unwrap();
        assert!(matches!(
            c.boundary_condition().unwrap(),
            BoundaryCondition::NavierSlip { alpha } if alpha == 1.0
        ));
        let c = preset("hemisphere-freeslip").unwrap();
        assert!(matches!(
            c.boundary_condition().unwrap(),
            BoundaryCondition::NavierSlip { alpha } if alpha == 0.0
        ));
        assert!(preset("no-such").is_err());
    }

    #[test]
    fn unknown_keys_are_fatal() {
        let bad = r#"
[geometry]
kind = "disk"
radius = 1.0
n1 = 16
n2 = 16
typo_key = 3

[bc]
mode = "navier-slip"
"#;
        assert!(Config::parse(bad).is_err());
    }

    #[test]
    fn empty_config_reports_missing_sections() {
        let err = Config::parse("").unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("geometry"), "{msg}");
    }

    #[test]
    fn semantic_errors_name_the_key() {
        let bad = r#"
[geometry]
kind = "disk"
n1 = 16
n2 = 16

[bc]
mode = "navier-slip"
"#;
        let err = Config::parse(bad).unwrap_err();
        assert!(format!("{err}").contains("geometry.radius"));
    }
}
