//! Run configuration of the estimation pipeline.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::{AngularSpreadMethod, Tolerances};
use crate::constellation::{TimeGrid, WalkerSpec};
use crate::error::{Error, Result};
use crate::scenario::Scenario;

/// Frequency range the parameter tables are specified for, GHz.
pub const FREQ_RANGE_GHZ: (f64, f64) = (2.0, 40.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Propagate,
    Links,
    Environment,
    Extract,
    Fit,
    Resimulate,
    Compare,
}

impl Stage {
    pub const ALL: [Stage; 7] =
        [Stage::Propagate, Stage::Links, Stage::Environment, Stage::Extract, Stage::Fit, Stage::Resimulate, Stage::Compare];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Propagate => "propagate",
            Stage::Links => "links",
            Stage::Environment => "environment",
            Stage::Extract => "extract",
            Stage::Fit => "fit",
            Stage::Resimulate => "resimulate",
            Stage::Compare => "compare",
        }
    }

    /// Comma-separated stage names, or `all`.
    pub fn parse_list(s: &str) -> Result<Vec<Stage>> {
        if s.trim().eq_ignore_ascii_case("all") {
            return Ok(Stage::ALL.to_vec());
        }
        let mut v: Vec<Stage> = s.split(',').map(|x| x.trim().parse()).collect::<Result<_>>()?;
        v.sort();
        v.dedup();
        Ok(v)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown stage {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShellConfig {
    pub total: u32,
    pub planes: u32,
    pub phasing: u32,
    pub altitude_km: f64,
    pub inc_deg: f64,
}

impl ShellConfig {
    pub fn spec(&self) -> WalkerSpec {
        WalkerSpec {
            total: self.total,
            planes: self.planes,
            phasing: self.phasing,
            altitude_km: self.altitude_km,
            inclination: self.inc_deg.to_radians(),
        }
    }
}

fn reference_shells() -> Vec<ShellConfig> {
    WalkerSpec::reference_shells()
        .iter()
        .map(|w| ShellConfig {
            total: w.total,
            planes: w.planes,
            phasing: w.phasing,
            altitude_km: w.altitude_km,
            inc_deg: w.inclination.to_degrees().round(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TerminalConfig {
    pub count: usize,
    pub lat_limit_deg: f64,
    /// Defaults to a value derived from the run seed.
    pub seed: Option<u64>,
}

impl Default for TerminalConfig {
    fn default() -> Self {
        Self { count: 1000, lat_limit_deg: 53.0, seed: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkConfig {
    pub min_elev_deg: f64,
    pub t_start_s: f64,
    pub t_end_s: f64,
    pub t_step_s: f64,
    pub max_per_terminal: Option<usize>,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self { min_elev_deg: 10.0, t_start_s: 0.0, t_end_s: 86400.0, t_step_s: 30.0, max_per_terminal: Some(10) }
    }
}

impl LinkConfig {
    pub fn grid(&self) -> TimeGrid {
        TimeGrid { start: self.t_start_s, end: self.t_end_s, step: self.t_step_s }
    }
}

/// Terminal for which per-satellite pass tables are written.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PassTerminal {
    pub lon_deg: f64,
    pub lat_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Walker-Delta shells; ignored when `elements_file` is set.
    pub shells: Vec<ShellConfig>,
    /// One extra shell, appended to `shells`.
    pub walker: Option<ShellConfig>,
    /// JSON array of element records replacing the shells.
    pub elements_file: Option<PathBuf>,
    pub terminals: TerminalConfig,
    pub links: LinkConfig,
    pub pass_terminal: Option<PassTerminal>,
    pub scenarios: Vec<Scenario>,
    pub frequencies_ghz: Vec<f64>,
    pub out: PathBuf,
    /// Parameter database replacing the bundled one.
    pub params: Option<PathBuf>,
    pub stages: Vec<Stage>,
    pub emit_plotdata: bool,
    pub angular_spread: AngularSpreadMethod,
    pub tolerances: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            shells: reference_shells(),
            walker: None,
            elements_file: None,
            terminals: TerminalConfig::default(),
            links: LinkConfig::default(),
            pass_terminal: None,
            scenarios: vec![Scenario::DenseUrban, Scenario::Rural],
            frequencies_ghz: vec![2.0, 20.0],
            out: PathBuf::from("out"),
            params: None,
            stages: Stage::ALL.to_vec(),
            emit_plotdata: false,
            angular_spread: AngularSpreadMethod::default(),
            tolerances: Tolerances::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn all_shells(&self) -> Vec<ShellConfig> {
        self.shells.iter().copied().chain(self.walker).collect()
    }

    pub fn terminal_seed(&self) -> u64 {
        self.terminals.seed.unwrap_or_else(|| crate::rng::stream_seed(self.seed, &[0x7465_726d]))
    }

    /// Checks every field; frequencies outside the table range only warn.
    pub fn validate(&self) -> Result<()> {
        if self.elements_file.is_none() {
            let shells = self.all_shells();
            if shells.is_empty() {
                return Err(Error::Config("no shells and no elements file".into()));
            }
            for s in &shells {
                s.spec().validate()?;
            }
        }
        if self.terminals.count == 0 {
            return Err(Error::Config("terminals.count must be positive".into()));
        }
        if !(self.terminals.lat_limit_deg > 0.0 && self.terminals.lat_limit_deg <= 90.0) {
            return Err(Error::Config(format!("terminals.lat_limit_deg {}", self.terminals.lat_limit_deg)));
        }
        if !(0.0..90.0).contains(&self.links.min_elev_deg) {
            return Err(Error::Config(format!("links.min_elev_deg {}", self.links.min_elev_deg)));
        }
        self.links.grid().times()?;
        if self.links.max_per_terminal == Some(0) {
            return Err(Error::Config("links.max_per_terminal must be positive".into()));
        }
        if self.scenarios.is_empty() {
            return Err(Error::Config("no scenarios".into()));
        }
        if self.frequencies_ghz.is_empty() {
            return Err(Error::Config("no frequencies".into()));
        }
        for &f in &self.frequencies_ghz {
            if !(f > 0.0) || !f.is_finite() {
                return Err(Error::Config(format!("frequency {f} GHz")));
            }
            if f < FREQ_RANGE_GHZ.0 || f > FREQ_RANGE_GHZ.1 {
                log::warn!("frequency {f} GHz is outside the {}-{} GHz range of the parameter tables", FREQ_RANGE_GHZ.0, FREQ_RANGE_GHZ.1);
            }
        }
        let mut f = self.frequencies_ghz.clone();
        f.sort_by(f64::total_cmp);
        f.dedup();
        if f.len() != self.frequencies_ghz.len() {
            return Err(Error::Config("duplicate frequencies".into()));
        }
        if !(self.tolerances.db_units >= 0.0 && self.tolerances.log_units >= 0.0) {
            return Err(Error::Config("negative tolerance".into()));
        }
        if let Some(p) = &self.pass_terminal {
            if !(-90.0..=90.0).contains(&p.lat_deg) || !p.lon_deg.is_finite() {
                return Err(Error::Config(format!("pass_terminal {p:?}")));
            }
        }
        Ok(())
    }

    /// Pretty JSON with every default filled in.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_round_trip() {
        let c = RunConfig::from_json_str("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        c.validate().unwrap();
        assert_eq!(c.all_shells().len(), 3);
        assert_eq!(c.all_shells()[1].altitude_km, 2000.0);
        let back = RunConfig::from_json_str(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_config() {
        let c = RunConfig::from_json_str(
            r#"{"seed": 7, "shells": [], "walker": {"total": 60, "planes": 6, "phasing": 1, "altitude_km": 550, "inc_deg": 53},
                "terminals": {"count": 10}, "links": {"t_step_s": 60}, "scenarios": ["Urban"], "stages": ["propagate", "links"]}"#,
        )
        .unwrap();
        c.validate().unwrap();
        assert_eq!(c.all_shells().len(), 1);
        assert_eq!(c.terminals.lat_limit_deg, 53.0);
        assert_eq!(c.links.t_end_s, 86400.0);
        assert_eq!(c.stages, vec![Stage::Propagate, Stage::Links]);
    }

    #[test]
    fn rejects() {
        assert!(matches!(RunConfig::from_json_str(r#"{"sead": 1}"#), Err(Error::Config(_))));
        let bad = |f: &dyn Fn(&mut RunConfig)| {
            let mut c = RunConfig::default();
            f(&mut c);
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{c:?}");
        };
        bad(&|c| c.terminals.count = 0);
        bad(&|c| c.frequencies_ghz = vec![]);
        bad(&|c| c.frequencies_ghz = vec![2.0, 2.0]);
        bad(&|c| c.links.t_step_s = 0.0);
        bad(&|c| c.shells[0].phasing = 6);
        bad(&|c| c.scenarios.clear());
        // out of range frequency only warns
        let c = RunConfig { frequencies_ghz: vec![1.0, 60.0], ..Default::default() };
        c.validate().unwrap();
    }

    #[test]
    fn stage_lists() {
        assert_eq!(Stage::parse_list("all").unwrap().len(), 7);
        assert_eq!(Stage::parse_list("fit, extract").unwrap(), vec![Stage::Extract, Stage::Fit]);
        assert!(Stage::parse_list("fit,plot").is_err());
    }
}
