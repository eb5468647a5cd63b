//! Run configuration: one TOML file, validated before any compute, with
//! dotted-path overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::FitOptions;
use crate::potential::{load_tabulated, PotentialModel, SurrogateParams, SystemParams};
use crate::propagator::{GaussianSpec, PropagationSpec};
use crate::stationary::PhaseOptions;
use crate::window::SolverOptions;

/// Where U(R) comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialConfig {
    Surrogate(SurrogateParams),
    /// Two-column "R_fm U_MeV" table.
    Table { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketConfig {
    pub r0_fm: f64,
    pub sigma_fm: f64,
    pub e0_mev: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub r_max_fm: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationConfig {
    pub dt_s: f64,
    pub tolerance: f64,
    pub max_steps: usize,
    /// Snapshot radii 𝓡 for the outbound body of the packet; the first one
    /// feeds the spectra.
    pub stop_radius_fm: Vec<f64>,
}

/// Survey spectrum on the propagation grid, then fine spectra around its peak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub survey_epsilon_mev: f64,
    pub survey_e_lo_mev: f64,
    pub survey_e_hi_mev: f64,
    pub epsilon_mev: f64,
    /// Extended grids for the fine spectra.
    pub analysis_r_max_fm: Vec<f64>,
    /// Fine range: survey peak ± this many survey FWHM.
    pub fine_span_fwhm: f64,
    #[serde(default)]
    pub solver: SolverOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Fit window half-width in sampled FWHM.
    pub window_fwhm: f64,
    pub background: bool,
    pub max_iter: usize,
    /// Peaks count above this multiple of the median density.
    pub peak_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationaryConfig {
    pub step_fm: f64,
    pub r_match_fm: f64,
    pub e_lo_mev: f64,
    pub e_hi_mev: f64,
    pub scan_points: usize,
    pub pole_orders: (usize, usize),
    /// S-matrix samples cover E_R ± this many phase-shift widths.
    pub pole_span_widths: f64,
    pub pole_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemParams,
    pub potential: PotentialConfig,
    pub j_values: Vec<u32>,
    pub packet: PacketConfig,
    pub grid: GridConfig,
    pub propagation: PropagationConfig,
    pub window: WindowConfig,
    pub fit: FitConfig,
    pub stationary: StationaryConfig,
    pub output_dir: PathBuf,
    /// Only used by synthetic-noise checks.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemParams::default(),
            potential: PotentialConfig::Surrogate(SurrogateParams::carbon12()),
            j_values: vec![0, 2, 4],
            packet: PacketConfig {
                r0_fm: 400.0,
                sigma_fm: 10.0,
                e0_mev: 6.0,
            },
            grid: GridConfig {
                r_max_fm: 1000.0,
                n_points: 2048,
            },
            propagation: PropagationConfig {
                dt_s: 1e-22,
                tolerance: 1e-15,
                max_steps: 100_000,
                stop_radius_fm: vec![25.0],
            },
            window: WindowConfig {
                survey_epsilon_mev: 0.025,
                survey_e_lo_mev: 3.5,
                survey_e_hi_mev: 7.5,
                epsilon_mev: 0.001,
                analysis_r_max_fm: vec![1000.0, 3000.0, 7000.0],
                fine_span_fwhm: 5.0,
                solver: SolverOptions::default(),
            },
            fit: FitConfig {
                window_fwhm: 5.0,
                background: false,
                max_iter: 200,
                peak_factor: 3.0,
            },
            stationary: StationaryConfig {
                step_fm: 0.01,
                r_match_fm: 25.0,
                e_lo_mev: 3.5,
                e_hi_mev: 7.0,
                scan_points: 36,
                pole_orders: (4, 4),
                pole_span_widths: 2.0,
                pole_samples: 41,
            },
            output_dir: PathBuf::from("wpres-out"),
            seed: 1,
        }
    }
}

fn cfg_err(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(cfg_err(field, format!("must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| cfg_err(&toml_error_path(&e), e.message().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Read `path` (or defaults when `None`), apply `key=value` overrides and validate.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| {
                if e.kind() == std::io::ErrorKind::NotFound {
                    Error::MissingArtifact(p.to_path_buf())
                } else {
                    Error::Io(e)
                }
            })?,
            None => Self::default().to_toml(),
        };
        let mut value: toml::Table = toml::from_str(&text).map_err(|e| cfg_err(&toml_error_path(&e), e.message()))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let text = toml::to_string(&value).expect("table serializes");
        let cfg = Self::from_toml(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate().map_err(|e| cfg_err("system", e.to_string()))?;
        match &self.potential {
            PotentialConfig::Surrogate(s) => s.validate().map_err(|e| cfg_err("potential", e.to_string()))?,
            PotentialConfig::Table { path } => {
                if path.as_os_str().is_empty() {
                    return Err(cfg_err("potential.path", "empty path"));
                }
            }
        }
        if self.j_values.is_empty() {
            return Err(cfg_err("j_values", "no partial waves requested"));
        }
        let p = &self.packet;
        positive("packet.r0_fm", p.r0_fm)?;
        positive("packet.sigma_fm", p.sigma_fm)?;
        positive("packet.e0_mev", p.e0_mev)?;
        positive("grid.r_max_fm", self.grid.r_max_fm)?;
        if self.grid.n_points < 2 {
            return Err(cfg_err("grid.n_points", "need at least two points"));
        }
        if p.r0_fm >= self.grid.r_max_fm {
            return Err(cfg_err("packet.r0_fm", "packet centre lies outside the grid"));
        }
        let pr = &self.propagation;
        positive("propagation.dt_s", pr.dt_s)?;
        if !(pr.tolerance > 0.0 && pr.tolerance <= 1e-8) {
            return Err(cfg_err("propagation.tolerance", "must lie in (0, 1e-8]"));
        }
        if pr.max_steps == 0 {
            return Err(cfg_err("propagation.max_steps", "must be positive"));
        }
        if pr.stop_radius_fm.is_empty() {
            return Err(cfg_err("propagation.stop_radius_fm", "no snapshot radius"));
        }
        for (i, &r) in pr.stop_radius_fm.iter().enumerate() {
            positive(&format!("propagation.stop_radius_fm[{i}]"), r)?;
        }
        let w = &self.window;
        positive("window.survey_epsilon_mev", w.survey_epsilon_mev)?;
        positive("window.epsilon_mev", w.epsilon_mev)?;
        positive("window.survey_e_lo_mev", w.survey_e_lo_mev)?;
        if !(w.survey_e_hi_mev > w.survey_e_lo_mev + 2.0 * w.survey_epsilon_mev) {
            return Err(cfg_err("window.survey_e_hi_mev", "range holds no survey bin"));
        }
        positive("window.fine_span_fwhm", w.fine_span_fwhm)?;
        for (i, &r) in w.analysis_r_max_fm.iter().enumerate() {
            if !(r >= self.grid.r_max_fm) {
                return Err(cfg_err(
                    &format!("window.analysis_r_max_fm[{i}]"),
                    format!("{r} fm is smaller than the propagation grid"),
                ));
            }
        }
        if !(w.solver.tolerance > 0.0) || w.solver.restart == 0 || w.solver.preconditioner_order == 0 {
            return Err(cfg_err("window.solver", "tolerance, restart and preconditioner order must be positive"));
        }
        positive("fit.window_fwhm", self.fit.window_fwhm)?;
        positive("fit.peak_factor", self.fit.peak_factor)?;
        if self.fit.max_iter == 0 {
            return Err(cfg_err("fit.max_iter", "must be positive"));
        }
        let s = &self.stationary;
        positive("stationary.step_fm", s.step_fm)?;
        positive("stationary.r_match_fm", s.r_match_fm)?;
        positive("stationary.e_lo_mev", s.e_lo_mev)?;
        if !(s.e_hi_mev > s.e_lo_mev) {
            return Err(cfg_err("stationary.e_hi_mev", "must exceed e_lo_mev"));
        }
        if s.scan_points < 2 {
            return Err(cfg_err("stationary.scan_points", "need at least two"));
        }
        positive("stationary.pole_span_widths", s.pole_span_widths)?;
        let (l, m) = s.pole_orders;
        if s.pole_samples < l + m + 3 {
            return Err(cfg_err("stationary.pole_samples", format!("need at least {} for orders ({l}, {m})", l + m + 3)));
        }
        Ok(())
    }

    pub fn potential_model(&self) -> Result<PotentialModel> {
        match &self.potential {
            PotentialConfig::Surrogate(s) => Ok(PotentialModel::Surrogate(*s)),
            PotentialConfig::Table { path } => load_tabulated(path),
        }
    }

    pub fn packet_spec(&self) -> Result<GaussianSpec> {
        GaussianSpec::from_energy(self.packet.r0_fm, self.packet.sigma_fm, self.packet.e0_mev, &self.system)
    }

    pub fn propagation_spec(&self) -> PropagationSpec {
        PropagationSpec {
            dt: self.propagation.dt_s,
            tolerance: self.propagation.tolerance,
            max_steps: self.propagation.max_steps,
        }
    }

    pub fn phase_options(&self) -> PhaseOptions {
        PhaseOptions {
            step: self.stationary.step_fm,
            r_match: self.stationary.r_match_fm,
        }
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            background: self.fit.background,
            init: None,
            max_iter: self.fit.max_iter,
        }
    }
}

fn toml_error_path(e: &toml::de::Error) -> String {
    // toml reports the offending key in its message; the span is enough context
    e.span().map(|s| format!("byte {}..{}", s.start, s.end)).unwrap_or_else(|| "<root>".into())
}

/// Apply one `dotted.key=value` override; the value is read as a TOML literal
/// and falls back to a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| cfg_err(assignment, "override must look like key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let mut cur = table;
    for (i, part) in parts.iter().enumerate() {
        if i + 1 == parts.len() {
            cur.insert(part.to_string(), value);
            return Ok(());
        }
        cur = match cur.get_mut(*part) {
            Some(toml::Value::Table(t)) => t,
            _ => return Err(cfg_err(&parts[..=i].join("."), "no such section")),
        };
    }
    Err(cfg_err(key, "empty key"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn zero_time_step_rejected_with_field() {
        let err = RunConfig::load(None, &["propagation.dt_s=0".into()]).unwrap_err();
        match err {
            Error::Config { field, .. } => assert_eq!(field, "propagation.dt_s"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let c = RunConfig::load(
            None,
            &["window.analysis_r_max_fm=[3000.0]".into(), "j_values=[4]".into(), "output_dir=out".into()],
        )
        .unwrap();
        assert_eq!(c.window.analysis_r_max_fm, vec![3000.0]);
        assert_eq!(c.j_values, vec![4]);
        assert_eq!(c.output_dir, PathBuf::from("out"));
        assert!(RunConfig::load(None, &["nosuch.key=1".into()]).is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut t = RunConfig::default().to_toml();
        t.push_str("\n[extra]\nx = 1\n");
        assert!(RunConfig::from_toml(&t).is_err());
    }
}
