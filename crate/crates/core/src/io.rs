//! File formats shared by the pipeline stages. Angles are written in degrees,
//! floats in shortest round-trip form.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constellation::LinkSample;
use crate::environment::{Path as PropagationPath, PathSet};
use crate::error::{Error, Result};
use crate::frames::{MtFrameState, TerminalLocation};
use crate::lsp::{Covariates, LinkKey, LspSample, LspValues};
use crate::orbit::{OrbitState, OrbitalElements};
use crate::scenario::{LinkState, Scenario};

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::format(path.display().to_string(), e.to_string()))
}

fn write_rows<W: Write, T: Serialize>(w: W, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(r: R, name: &str, header: &[&str]) -> Result<Vec<T>> {
    let mut rd = csv::Reader::from_reader(r);
    let got: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if got != header {
        return Err(Error::format(name, format!("header {:?}, expected {:?}", got.join(","), header.join(","))));
    }
    rd.deserialize().map(|r| r.map_err(|e| Error::format(name, e.to_string()))).collect()
}

/// Element file record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementRecord {
    pub name: String,
    pub a_km: f64,
    pub e: f64,
    pub inc_deg: f64,
    pub raan_deg: f64,
    pub argp_deg: f64,
    pub nu_deg: f64,
    #[serde(default)]
    pub epoch_s: f64,
}

impl ElementRecord {
    pub fn from_elements(name: String, el: &OrbitalElements<f64>) -> Self {
        Self {
            name,
            a_km: el.semi_major_axis,
            e: el.eccentricity,
            inc_deg: el.inclination.to_degrees(),
            raan_deg: el.raan.to_degrees(),
            argp_deg: el.arg_perigee.to_degrees(),
            nu_deg: el.true_anomaly.to_degrees(),
            epoch_s: el.epoch,
        }
    }

    pub fn elements(&self) -> Result<OrbitalElements<f64>> {
        OrbitalElements::new(
            self.a_km,
            self.e,
            self.inc_deg.to_radians(),
            self.raan_deg.to_radians(),
            self.argp_deg.to_radians(),
            self.nu_deg.to_radians(),
            self.epoch_s,
        )
        .map_err(|e| Error::Config(format!("satellite {}: {e}", self.name)))
    }
}

pub fn read_elements(path: &Path) -> Result<Vec<ElementRecord>> {
    let recs: Vec<ElementRecord> =
        serde_json::from_reader(open(path)?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if recs.is_empty() {
        return Err(Error::Config(format!("{}: no satellites", path.display())));
    }
    Ok(recs)
}

pub const TRACK_HEADER: [&str; 7] = ["t_s", "lat_deg", "lon_deg", "radius_km", "x_i_km", "y_i_km", "z_i_km"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackRow {
    pub t_s: f64,
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub radius_km: f64,
    pub x_i_km: f64,
    pub y_i_km: f64,
    pub z_i_km: f64,
}

impl TrackRow {
    pub fn new(t: f64, s: &OrbitState<f64>) -> Self {
        Self {
            t_s: t,
            lat_deg: s.geo.lat.to_degrees(),
            lon_deg: s.geo.lon.to_degrees(),
            radius_km: s.geo.radius,
            x_i_km: s.inertial.x,
            y_i_km: s.inertial.y,
            z_i_km: s.inertial.z,
        }
    }
}

pub fn write_track<W: Write>(w: W, rows: &[TrackRow]) -> Result<()> {
    write_rows(w, rows)
}

pub fn read_track<R: Read>(r: R, name: &str) -> Result<Vec<TrackRow>> {
    read_rows(r, name, &TRACK_HEADER)
}

pub const PASS_HEADER: [&str; 8] = ["t_s", "x_q_km", "y_q_km", "z_q_km", "elev_deg", "bank_deg", "heading_deg", "tilt_deg"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassRow {
    pub t_s: f64,
    pub x_q_km: f64,
    pub y_q_km: f64,
    pub z_q_km: f64,
    pub elev_deg: f64,
    pub bank_deg: f64,
    pub heading_deg: f64,
    pub tilt_deg: f64,
}

impl PassRow {
    pub fn new(t: f64, m: &MtFrameState<f64>) -> Self {
        Self {
            t_s: t,
            x_q_km: m.x,
            y_q_km: m.y,
            z_q_km: m.z,
            elev_deg: m.elevation.to_degrees(),
            bank_deg: m.bank.to_degrees(),
            heading_deg: m.heading.to_degrees(),
            tilt_deg: m.tilt.to_degrees(),
        }
    }
}

pub fn write_pass<W: Write>(w: W, rows: &[PassRow]) -> Result<()> {
    write_rows(w, rows)
}

pub const TERMINAL_HEADER: [&str; 3] = ["term_id", "lon_deg", "lat_deg"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminalRow {
    pub term_id: usize,
    pub lon_deg: f64,
    pub lat_deg: f64,
}

pub fn write_terminals<W: Write>(w: W, terminals: &[TerminalLocation<f64>]) -> Result<()> {
    write_rows(
        w,
        terminals.iter().enumerate().map(|(term_id, t)| TerminalRow { term_id, lon_deg: t.lon.to_degrees(), lat_deg: t.lat.to_degrees() }),
    )
}

/// Terminal locations indexed by `term_id`, which must run 0, 1, 2, ...
pub fn read_terminals<R: Read>(r: R, name: &str) -> Result<Vec<TerminalLocation<f64>>> {
    let rows: Vec<TerminalRow> = read_rows(r, name, &TERMINAL_HEADER)?;
    rows.iter()
        .enumerate()
        .map(|(k, row)| {
            if row.term_id != k {
                return Err(Error::format(name, format!("term_id {} at row {k}", row.term_id)));
            }
            TerminalLocation::from_degrees(row.lon_deg, row.lat_deg)
        })
        .collect()
}

pub const LINK_HEADER: [&str; 6] = ["term_id", "sat_id", "t_s", "elev_deg", "dist_m", "heading_deg"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkRow {
    pub term_id: usize,
    pub sat_id: usize,
    pub t_s: f64,
    pub elev_deg: f64,
    pub dist_m: f64,
    pub heading_deg: f64,
}

impl LinkRow {
    pub fn new(l: &LinkSample) -> Self {
        Self {
            term_id: l.term_id,
            sat_id: l.sat_id,
            t_s: l.time,
            elev_deg: l.elevation.to_degrees(),
            dist_m: l.distance,
            heading_deg: l.mt_state.heading.to_degrees(),
        }
    }

    pub fn key(&self) -> LinkKey {
        LinkKey { term_id: self.term_id, sat_id: self.sat_id, time: self.t_s }
    }
}

pub fn write_links<W: Write>(w: W, links: &[LinkSample]) -> Result<()> {
    write_rows(w, links.iter().map(LinkRow::new))
}

pub fn read_links<R: Read>(r: R, name: &str) -> Result<Vec<LinkRow>> {
    read_rows(r, name, &LINK_HEADER)
}

pub const PATH_HEADER: [&str; 12] = [
    "term_id", "sat_id", "t_s", "path_idx", "is_los", "delay_s", "power_db", "aoa_az_deg", "aoa_el_deg", "aod_az_deg", "aod_el_deg", "xpr_db",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct PathRow {
    term_id: usize,
    sat_id: usize,
    t_s: f64,
    path_idx: usize,
    is_los: u8,
    delay_s: f64,
    power_db: f64,
    aoa_az_deg: f64,
    aoa_el_deg: f64,
    aod_az_deg: f64,
    aod_el_deg: f64,
    xpr_db: f64,
}

pub fn write_paths<W: Write>(w: W, sets: &[PathSet]) -> Result<()> {
    let rows = sets.iter().flat_map(|ps| {
        ps.paths.iter().enumerate().map(move |(k, p)| PathRow {
            term_id: ps.key.term_id,
            sat_id: ps.key.sat_id,
            t_s: ps.key.time,
            path_idx: k,
            is_los: u8::from(p.is_los),
            delay_s: p.delay,
            power_db: 10.0 * p.power.log10(),
            aoa_az_deg: p.aoa_az.to_degrees(),
            aoa_el_deg: p.aoa_el.to_degrees(),
            aod_az_deg: p.aod_az.to_degrees(),
            aod_el_deg: p.aod_el.to_degrees(),
            xpr_db: p.xpr,
        })
    });
    write_rows(w, rows)
}

/// Path sets in file order. Consecutive rows with the same link key form one
/// set; covariates come from `cov`, looked up by key.
pub fn read_paths<R: Read>(r: R, name: &str, cov: impl Fn(&LinkKey) -> Option<Covariates>) -> Result<Vec<PathSet>> {
    let rows: Vec<PathRow> = read_rows(r, name, &PATH_HEADER)?;
    let mut out: Vec<PathSet> = Vec::new();
    for row in rows {
        let key = LinkKey { term_id: row.term_id, sat_id: row.sat_id, time: row.t_s };
        let path = PropagationPath {
            delay: row.delay_s,
            power: 10f64.powf(row.power_db / 10.0),
            aoa_az: row.aoa_az_deg.to_radians(),
            aoa_el: row.aoa_el_deg.to_radians(),
            aod_az: row.aod_az_deg.to_radians(),
            aod_el: row.aod_el_deg.to_radians(),
            xpr: row.xpr_db,
            is_los: row.is_los != 0,
        };
        match out.last_mut() {
            Some(ps) if ps.key == key && row.path_idx == ps.paths.len() => ps.paths.push(path),
            _ => {
                if row.path_idx != 0 {
                    return Err(Error::format(name, format!("path_idx {} starts a new link", row.path_idx)));
                }
                let c = cov(&key).ok_or_else(|| Error::format(name, format!("link {key:?} is not in the link table")))?;
                out.push(PathSet { key, cov: c, paths: vec![path] });
            }
        }
    }
    Ok(out)
}

pub const SAMPLE_HEADER: [&str; 17] = [
    "scenario", "state", "term_id", "sat_id", "t_s", "freq_ghz", "dist_m", "elev_deg", "pl_db", "sf_db", "kf_db", "ds_log10_s",
    "asa_log10_deg", "asd_log10_deg", "esa_log10_deg", "esd_log10_deg", "xpr_db",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct SampleRow {
    scenario: Scenario,
    state: LinkState,
    term_id: usize,
    sat_id: usize,
    t_s: f64,
    freq_ghz: f64,
    dist_m: f64,
    elev_deg: f64,
    pl_db: f64,
    sf_db: Option<f64>,
    kf_db: Option<f64>,
    ds_log10_s: f64,
    asa_log10_deg: f64,
    asd_log10_deg: f64,
    esa_log10_deg: f64,
    esd_log10_deg: f64,
    xpr_db: f64,
}

pub fn write_samples<W: Write>(w: W, samples: &[LspSample]) -> Result<()> {
    write_rows(
        w,
        samples.iter().map(|s| SampleRow {
            scenario: s.scenario,
            state: s.state,
            term_id: s.key.term_id,
            sat_id: s.key.sat_id,
            t_s: s.key.time,
            freq_ghz: s.cov.freq_ghz,
            dist_m: s.cov.distance,
            elev_deg: s.cov.elevation.to_degrees(),
            pl_db: s.values.pl,
            sf_db: s.values.sf,
            kf_db: s.values.kf,
            ds_log10_s: s.values.ds,
            asa_log10_deg: s.values.asa,
            asd_log10_deg: s.values.asd,
            esa_log10_deg: s.values.esa,
            esd_log10_deg: s.values.esd,
            xpr_db: s.values.xpr,
        }),
    )
}

pub fn read_samples<R: Read>(r: R, name: &str) -> Result<Vec<LspSample>> {
    let rows: Vec<SampleRow> = read_rows(r, name, &SAMPLE_HEADER)?;
    Ok(rows
        .into_iter()
        .map(|r| LspSample {
            key: LinkKey { term_id: r.term_id, sat_id: r.sat_id, time: r.t_s },
            scenario: r.scenario,
            state: r.state,
            cov: Covariates { distance: r.dist_m, freq_ghz: r.freq_ghz, elevation: r.elev_deg.to_radians() },
            values: LspValues {
                pl: r.pl_db,
                sf: r.sf_db,
                kf: r.kf_db,
                ds: r.ds_log10_s,
                asa: r.asa_log10_deg,
                asd: r.asd_log10_deg,
                esa: r.esa_log10_deg,
                esd: r.esd_log10_deg,
                xpr: r.xpr_db,
            },
        })
        .collect())
}
