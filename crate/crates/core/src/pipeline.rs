//! File-based estimation pipeline: propagate, links, environment, extract,
//! fit, resimulate, compare. Every stage reads its inputs from the output
//! directory, so stages can be rerun one at a time.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;

use crate::analysis::{self, ComparisonReport, FitResult, ResimOptions};
use crate::config::{RunConfig, Stage};
use crate::constellation::{self, LinkOptions, LinkSample};
use crate::environment::{self, PathSet, ScenarioParams};
use crate::error::{Error, Result};
use crate::frames::{self, TerminalLocation};
use crate::io;
use crate::lsp::{Covariates, Lsp, LspSample, ParameterDatabase, ParameterSet};
use crate::orbit::{EarthConstants, OrbitalElements, Propagator};
use crate::rng;
use crate::scenario::{LinkState, Scenario};

const ENVIRONMENT_STREAM: u64 = 0x0065_6e76;
const RESIM_STREAM: u64 = 0x0072_6573;

pub const CONFIG_FILE: &str = "config.json";
pub const TERMINALS_FILE: &str = "terminals.csv";
pub const LINKS_FILE: &str = "links.csv";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const SF_SAMPLES_FILE: &str = "samples-sf.csv";
pub const FIT_REPORT_FILE: &str = "fit-report.json";
pub const FITTED_PARAMS_FILE: &str = "fitted-params.json";
pub const RESIM_SAMPLES_FILE: &str = "resim-samples.csv";
pub const RESIM_REPORT_FILE: &str = "resim-fit-report.json";
pub const RESIM_PARAMS_FILE: &str = "resim-params.json";
pub const COMPARISON_FILE: &str = "comparison.csv";
pub const CLOSURE_FILE: &str = "closure.csv";
pub const COMPARISON_TABLE_FILE: &str = "comparison.txt";

/// Gated comparison rows outside tolerance, per stage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub failures: Vec<String>,
}

pub struct Pipeline {
    cfg: RunConfig,
    db: ParameterDatabase,
    constants: EarthConstants<f64>,
}

fn fitted_name(s: Scenario) -> String {
    format!("{}Fit", s.name())
}

fn resim_name(s: Scenario) -> String {
    format!("{}Refit", s.name())
}

fn freq_label(f: f64) -> String {
    format!("{f}").replace('.', "p")
}

impl Pipeline {
    /// Validates `cfg` and loads the parameter database.
    pub fn new(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let db = match &cfg.params {
            Some(p) => ParameterDatabase::from_path(p).map_err(|e| Error::Config(format!("parameters {}: {e}", p.display())))?,
            None => ParameterDatabase::bundled(),
        };
        for s in &cfg.scenarios {
            db.base(*s).map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(Self { cfg, db, constants: EarthConstants::standard() })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.cfg.out.join(rel)
    }

    fn paths_file(&self, s: Scenario, state: LinkState, f: f64) -> PathBuf {
        self.path(&format!("paths/{}_{}_{}GHz.csv", s.name(), state.name(), freq_label(f)))
    }

    /// Writes the configuration with every default filled in.
    pub fn write_config(&self) -> Result<()> {
        let mut w = io::create(&self.path(CONFIG_FILE))?;
        w.write_all(self.cfg.to_json()?.as_bytes())?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    /// Runs the configured stages in order.
    pub fn run(&self) -> Result<RunReport> {
        let mut report = RunReport::default();
        for stage in Stage::ALL.into_iter().filter(|s| self.cfg.stages.contains(s)) {
            report.failures.extend(self.run_stage(stage)?.failures);
        }
        Ok(report)
    }

    pub fn run_stage(&self, stage: Stage) -> Result<RunReport> {
        log::info!("stage {stage}");
        match stage {
            Stage::Propagate => self.propagate(),
            Stage::Links => self.links(),
            Stage::Environment => self.environment(),
            Stage::Extract => self.extract(),
            Stage::Fit => self.fit(),
            Stage::Resimulate => self.resimulate(),
            Stage::Compare => return self.compare(),
        }?;
        Ok(RunReport::default())
    }

    /// Satellites from the elements file or the Walker shells, in shell order.
    pub fn satellites(&self) -> Result<Vec<OrbitalElements<f64>>> {
        match &self.cfg.elements_file {
            Some(p) => io::read_elements(p)?.iter().map(|r| r.elements()).collect(),
            None => {
                let mut out = Vec::new();
                for s in self.cfg.all_shells() {
                    out.extend(constellation::walker_delta(&s.spec())?);
                }
                Ok(out)
            }
        }
    }

    fn times(&self) -> Result<Vec<f64>> {
        self.cfg.links.grid().times()
    }

    fn propagate(&self) -> Result<()> {
        let sats = self.satellites()?;
        let times = self.times()?;
        let width = sats.len().to_string().len().max(4);
        let pass_terminal = match &self.cfg.pass_terminal {
            Some(p) => Some(TerminalLocation::from_degrees(p.lon_deg, p.lat_deg).map_err(|e| Error::Config(e.to_string()))?),
            None => None,
        };
        sats.par_iter().enumerate().try_for_each(|(k, el)| -> Result<()> {
            let prop = Propagator::new(*el, self.constants)?;
            let rows: Vec<io::TrackRow> = times.iter().map(|&t| Ok(io::TrackRow::new(t, &prop.state_at(t)?))).collect::<Result<_>>()?;
            let mut w = io::create(&self.path(&format!("tracks/sat_{k:0width$}.csv")))?;
            io::write_track(&mut w, &rows)?;
            if let Some(u) = &pass_terminal {
                let mut pass = Vec::new();
                for &t in &times {
                    let m = frames::mt_state(&prop, t, u)?;
                    if m.elevation >= self.cfg.links.min_elev_deg.to_radians() {
                        pass.push(io::PassRow::new(t, &m));
                    }
                }
                if !pass.is_empty() {
                    io::write_pass(io::create(&self.path(&format!("passes/sat_{k:0width$}.csv")))?, &pass)?;
                }
            }
            Ok(())
        })
    }

    fn links(&self) -> Result<()> {
        let sats = self.satellites()?;
        let times = self.times()?;
        let terminals = constellation::sample_terminals(
            self.cfg.terminals.count,
            self.cfg.terminals.lat_limit_deg.to_radians(),
            &mut rng::stream(self.cfg.terminal_seed(), &[]),
        )?;
        let opts = LinkOptions {
            min_elevation: self.cfg.links.min_elev_deg.to_radians(),
            max_per_terminal: self.cfg.links.max_per_terminal,
            seed: self.cfg.seed,
        };
        let links = constellation::enumerate_links(&sats, &self.constants, &terminals, &times, &opts)?;
        log::info!("{} links for {} terminals and {} satellites", links.len(), terminals.len(), sats.len());
        io::write_terminals(io::create(&self.path(TERMINALS_FILE))?, &terminals)?;
        io::write_links(io::create(&self.path(LINKS_FILE))?, &links)?;
        Ok(())
    }

    fn read_links(&self) -> Result<Vec<io::LinkRow>> {
        let rows = io::read_links(io::open(&self.path(LINKS_FILE))?, LINKS_FILE)?;
        if rows.is_empty() {
            return Err(Error::format(LINKS_FILE, "no links"));
        }
        Ok(rows)
    }

    /// Link geometry rebuilt from the link table, the terminal table and the
    /// constellation. Distances and elevations are the tabulated ones.
    fn link_samples(&self) -> Result<Vec<LinkSample>> {
        let rows = self.read_links()?;
        let terminals = io::read_terminals(io::open(&self.path(TERMINALS_FILE))?, TERMINALS_FILE)?;
        let props: Vec<Propagator<f64>> =
            self.satellites()?.into_iter().map(|el| Propagator::new(el, self.constants)).collect::<Result<_>>()?;
        rows.par_iter()
            .map(|r| {
                let (Some(u), Some(prop)) = (terminals.get(r.term_id), props.get(r.sat_id)) else {
                    return Err(Error::format(LINKS_FILE, format!("unknown terminal {} or satellite {}", r.term_id, r.sat_id)));
                };
                let mt = frames::mt_state(prop, r.t_s, u)?;
                if (mt.elevation.to_degrees() - r.elev_deg).abs() > 1e-6 {
                    return Err(Error::format(
                        LINKS_FILE,
                        format!("link {:?} does not match the constellation (elevation {} vs {})", r.key(), mt.elevation.to_degrees(), r.elev_deg),
                    ));
                }
                Ok(LinkSample {
                    term_id: r.term_id,
                    sat_id: r.sat_id,
                    time: r.t_s,
                    terminal: *u,
                    mt_state: mt,
                    distance: r.dist_m,
                    elevation: r.elev_deg.to_radians(),
                })
            })
            .collect()
    }

    fn environment(&self) -> Result<()> {
        let links = self.link_samples()?;
        let freqs = &self.cfg.frequencies_ghz;
        for &s in &self.cfg.scenarios {
            let params = self.db.base(s)?;
            let sc = ScenarioParams::table(s);
            let per_link: Vec<Vec<environment::LinkPaths>> = links
                .par_iter()
                .map(|l| {
                    let mut r = rng::stream(self.cfg.seed, &[ENVIRONMENT_STREAM, s.index() as u64, l.term_id as u64, l.sat_id as u64, l.time.to_bits()]);
                    environment::synthesize_link(l, &sc, params, freqs, &mut r)
                })
                .collect::<Result<_>>()?;
            for (k, &f) in freqs.iter().enumerate() {
                for state in LinkState::ALL {
                    let sets: Vec<PathSet> = per_link
                        .iter()
                        .map(|lp| match state {
                            LinkState::Los => lp[k].los.clone(),
                            LinkState::Nlos => lp[k].nlos.clone(),
                        })
                        .collect();
                    io::write_paths(io::create(&self.paths_file(s, state, f))?, &sets)?;
                }
            }
        }
        Ok(())
    }

    fn extract(&self) -> Result<()> {
        let rows = self.read_links()?;
        let cov: HashMap<(usize, usize, u64), (f64, f64)> =
            rows.iter().map(|r| ((r.term_id, r.sat_id, r.t_s.to_bits()), (r.dist_m, r.elev_deg.to_radians()))).collect();
        let mut samples = Vec::new();
        for &s in &self.cfg.scenarios {
            for &f in &self.cfg.frequencies_ghz {
                for state in LinkState::ALL {
                    let path = self.paths_file(s, state, f);
                    let name = path.display().to_string();
                    let sets = io::read_paths(io::open(&path)?, &name, |k| {
                        cov.get(&(k.term_id, k.sat_id, k.time.to_bits())).map(|&(distance, elevation)| Covariates { distance, freq_ghz: f, elevation })
                    })?;
                    samples.extend(analysis::extract_all(&sets, s, self.cfg.angular_spread)?);
                }
            }
        }
        io::write_samples(io::create(&self.path(SAMPLES_FILE))?, &samples)?;
        Ok(())
    }

    fn read_samples(&self, file: &str) -> Result<Vec<LspSample>> {
        let s = io::read_samples(io::open(&self.path(file))?, file)?;
        if s.is_empty() {
            return Err(Error::format(file, "no samples"));
        }
        Ok(s)
    }

    /// Database of `sets` with the correlations of their scenarios.
    fn database(&self, sets: Vec<ParameterSet>) -> ParameterDatabase {
        let correlations = sets
            .iter()
            .filter_map(|p| self.db.correlations.get(&p.scenario).map(|c| (p.scenario, *c)))
            .collect();
        ParameterDatabase { version: self.db.version, sets, correlations }
    }

    fn fit_all(&self, samples: &[LspSample], name: fn(Scenario) -> String) -> Result<(Vec<ParameterSet>, Vec<FitResult>)> {
        let mut sets = Vec::new();
        let mut fits = Vec::new();
        for &s in &self.cfg.scenarios {
            let subset: Vec<LspSample> = samples.iter().filter(|x| x.scenario == s).copied().collect();
            if subset.is_empty() {
                return Err(Error::InvalidInput(format!("no {s} samples to fit")));
            }
            let (set, f) = analysis::fit_scenario(&subset, self.db.base(s)?, &name(s))?;
            sets.push(set);
            fits.extend(f);
        }
        Ok((sets, fits))
    }

    fn write_json<T: serde::Serialize + ?Sized>(&self, file: &str, v: &T) -> Result<()> {
        let mut w = io::create(&self.path(file))?;
        serde_json::to_writer_pretty(&mut w, v)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    fn write_params(&self, file: &str, sets: Vec<ParameterSet>) -> Result<()> {
        let mut w = io::create(&self.path(file))?;
        w.write_all(self.database(sets).to_json()?.as_bytes())?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    fn read_params(&self, file: &str) -> Result<ParameterDatabase> {
        ParameterDatabase::from_path(&self.path(file))
    }

    fn fit(&self) -> Result<()> {
        let mut samples = self.read_samples(SAMPLES_FILE)?;
        let (sets, fits) = self.fit_all(&samples, fitted_name)?;
        for s in samples.iter_mut() {
            let set = sets.iter().find(|p| p.scenario == s.scenario).expect("fitted every configured scenario");
            analysis::fill_shadow_fading(std::slice::from_mut(s), set)?;
        }
        self.write_json(FIT_REPORT_FILE, &fits)?;
        io::write_samples(io::create(&self.path(SF_SAMPLES_FILE))?, &samples)?;
        if self.cfg.emit_plotdata {
            self.plotdata(&samples, &sets)?;
        }
        self.write_params(FITTED_PARAMS_FILE, sets)
    }

    /// Per scenario, state and LSP: sample and model means in 10° elevation
    /// bins.
    fn plotdata(&self, samples: &[LspSample], sets: &[ParameterSet]) -> Result<()> {
        for set in sets {
            for state in LinkState::ALL {
                for (lsp, c) in &set.state(state).lsps {
                    let mut bins: BTreeMap<usize, (usize, f64, f64)> = BTreeMap::new();
                    for x in samples.iter().filter(|x| x.scenario == set.scenario && x.state == state) {
                        let Some(v) = x.values.get(*lsp).filter(|v| v.is_finite()) else { continue };
                        let b = ((x.cov.elevation.to_degrees() / 10.0) as usize).min(8);
                        let e = bins.entry(b).or_default();
                        e.0 += 1;
                        e.1 += v;
                        e.2 += c.eval_mean(x.cov.distance, x.cov.freq_ghz, x.cov.elevation)?;
                    }
                    let file = format!("plotdata/{}_{}_{}.csv", set.scenario.name(), state.name(), lsp.name());
                    let mut w = csv::Writer::from_writer(io::create(&self.path(&file))?);
                    w.write_record(["elev_lo_deg", "elev_hi_deg", "n", "sample_mean", "model_mean"])?;
                    for (b, (n, sum, model)) in bins {
                        let lo = b as f64 * 10.0;
                        w.write_record([lo.to_string(), (lo + 10.0).to_string(), n.to_string(), (sum / n as f64).to_string(), (model / n as f64).to_string()])?;
                    }
                    w.flush()?;
                }
            }
        }
        Ok(())
    }

    fn resimulate(&self) -> Result<()> {
        let fitted = self.read_params(FITTED_PARAMS_FILE)?;
        let links = self.read_samples(SAMPLES_FILE)?;
        let opts = ResimOptions { seed: rng::stream_seed(self.cfg.seed, &[RESIM_STREAM]), method: self.cfg.angular_spread };
        let mut out = Vec::new();
        for &s in &self.cfg.scenarios {
            let set = fitted.set(&fitted_name(s))?;
            let subset: Vec<LspSample> = links.iter().filter(|x| x.scenario == s).copied().collect();
            let corr = [&fitted.correlation(s, LinkState::Los), &fitted.correlation(s, LinkState::Nlos)];
            out.extend(analysis::resimulate(set, corr, &subset, &opts)?);
        }
        let (sets, fits) = self.fit_all(&out, resim_name)?;
        io::write_samples(io::create(&self.path(RESIM_SAMPLES_FILE))?, &out)?;
        self.write_json(RESIM_REPORT_FILE, &fits)?;
        self.write_params(RESIM_PARAMS_FILE, sets)
    }

    fn compare(&self) -> Result<RunReport> {
        let fitted = self.read_params(FITTED_PARAMS_FILE)?;
        let resim = match self.path(RESIM_PARAMS_FILE).exists() {
            true => Some(self.read_params(RESIM_PARAMS_FILE)?),
            false => {
                log::warn!("{RESIM_PARAMS_FILE} not found; closure comparison skipped");
                None
            }
        };
        let tol = &self.cfg.tolerances;
        let mut against_tables = ComparisonReport::default();
        let mut closure = ComparisonReport::default();
        for &s in &self.cfg.scenarios {
            let f = fitted.set(&fitted_name(s))?;
            against_tables.extend(analysis::compare(f, self.db.base(s)?, tol));
            if let Some(r) = &resim {
                closure.extend(analysis::compare(r.set(&resim_name(s))?, f, tol));
            }
        }
        against_tables.write_csv(io::create(&self.path(COMPARISON_FILE))?)?;
        let mut text = format!("fitted vs reference tables\n{}", against_tables.table());
        if resim.is_some() {
            closure.write_csv(io::create(&self.path(CLOSURE_FILE))?)?;
            text.push_str(&format!("\nresimulated vs fitted\n{}", closure.table()));
        }
        io::create(&self.path(COMPARISON_TABLE_FILE))?.write_all(text.as_bytes())?;

        let describe = |what: &str, r: &analysis::Comparison| {
            format!("{what}: {} {} {} {} delta {:.4} exceeds {}", r.scenario, r.state, r.lsp, r.coeff, r.delta, r.tolerance)
        };
        let mut failures: Vec<String> = against_tables.failures().iter().map(|r| describe("tables", r)).collect();
        failures.extend(closure.failures().iter().map(|r| describe("closure", r)));
        for f in &failures {
            log::warn!("{f}");
        }
        Ok(RunReport { failures })
    }
}

/// Convenience for callers that only need the LSP set a run fitted.
pub fn fitted_set(db: &ParameterDatabase, scenario: Scenario) -> Result<&ParameterSet> {
    db.set(&fitted_name(scenario))
}

/// The LSPs a fitted set carries for `state`.
pub fn fitted_lsps(set: &ParameterSet, state: LinkState) -> Vec<Lsp> {
    set.state(state).lsps.keys().copied().collect()
}
