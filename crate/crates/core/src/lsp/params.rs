//! Parameter database: per-scenario LSP coefficients, cluster metadata and
//! inter-parameter correlations.
//!
//! The on-disk JSON keeps the layout of the published tables: one array per
//! table row with one entry per `Set/STATE` column, `null` for cells that
//! are not applicable, and the correlation matrices with LOS values in the
//! upper triangle and NLOS values in the lower triangle.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::SMatrix;
use serde::{Deserialize, Serialize};

use super::{Lsp, LspCoefficients};
use crate::error::{Error, Result};
use crate::scenario::{LinkState, Scenario};

const BUNDLED: &str = include_str!("../../data/parameters.json");
const FORMAT: &str = "ntn-gscm-parameters";

/// Coefficients and cluster metadata for one scenario and link state.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StateParams {
    pub lsps: BTreeMap<Lsp, LspCoefficients<f64>>,
    /// Number of clusters `L`.
    pub clusters: Option<u32>,
    /// Delay factor `r_DS`.
    pub delay_factor: Option<f64>,
    /// Per-cluster delay spread `(μ, γ)`, ns.
    pub cluster_ds: Option<(f64, f64)>,
    /// deg
    pub cluster_asa: Option<f64>,
    /// deg
    pub cluster_esa: Option<f64>,
    /// Fields copied from the base scenario because the set leaves them open.
    pub inherited: Vec<String>,
}

impl StateParams {
    pub fn coeffs(&self, lsp: Lsp) -> Result<&LspCoefficients<f64>> {
        self.lsps.get(&lsp).ok_or_else(|| Error::Parameters(format!("no {lsp} coefficients")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub name: String,
    pub scenario: Scenario,
    pub los: StateParams,
    pub nlos: StateParams,
}

impl ParameterSet {
    pub fn state(&self, state: LinkState) -> &StateParams {
        match state {
            LinkState::Los => &self.los,
            LinkState::Nlos => &self.nlos,
        }
    }

    pub fn state_mut(&mut self, state: LinkState) -> &mut StateParams {
        match state {
            LinkState::Los => &mut self.los,
            LinkState::Nlos => &mut self.nlos,
        }
    }
}

/// Symmetric 7×7 correlation over [`Lsp::CORRELATED`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub values: [[f64; 7]; 7],
}

impl CorrelationMatrix {
    pub fn identity() -> Self {
        let mut values = [[0.0; 7]; 7];
        for (i, row) in values.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Self { values }
    }

    pub fn get(&self, a: Lsp, b: Lsp) -> Option<f64> {
        let i = Lsp::CORRELATED.iter().position(|l| *l == a)?;
        let j = Lsp::CORRELATED.iter().position(|l| *l == b)?;
        Some(self.values[i][j])
    }

    fn matrix(&self) -> SMatrix<f64, 7, 7> {
        SMatrix::from_fn(|i, j| self.values[i][j])
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix().symmetric_eigen().eigenvalues.min()
    }

    /// Nearest correlation matrix by eigenvalue clipping; the flag reports
    /// whether clipping was needed.
    pub fn repaired(&self) -> (CorrelationMatrix, bool) {
        let eig = self.matrix().symmetric_eigen();
        if eig.eigenvalues.min() >= 0.0 {
            return (*self, false);
        }
        let clipped = eig.eigenvalues.map(|v| v.max(0.0));
        let m = eig.eigenvectors * SMatrix::<f64, 7, 7>::from_diagonal(&clipped) * eig.eigenvectors.transpose();
        let mut values = [[0.0; 7]; 7];
        for (i, row) in values.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                let scale = (m[(i, i)] * m[(j, j)]).sqrt();
                *v = if scale > 0.0 { m[(i, j)] / scale } else if i == j { 1.0 } else { 0.0 };
            }
        }
        (CorrelationMatrix { values }, true)
    }

    /// Symmetric square root of the repaired matrix.
    pub fn sqrt(&self) -> [[f64; 7]; 7] {
        let (c, clipped) = self.repaired();
        if clipped {
            log::warn!("correlation matrix is not positive semi-definite; negative eigenvalues clipped");
        }
        let eig = c.matrix().symmetric_eigen();
        let root = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        let m = eig.eigenvectors * SMatrix::<f64, 7, 7>::from_diagonal(&root) * eig.eigenvectors.transpose();
        let mut out = [[0.0; 7]; 7];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = m[(i, j)];
            }
        }
        out
    }

    fn validate(&self, what: &str) -> Result<()> {
        for i in 0..7 {
            if self.values[i][i] != 1.0 {
                return Err(Error::Parameters(format!("{what}: diagonal entry {i} is not 1")));
            }
            for j in 0..7 {
                let v = self.values[i][j];
                if !(v.abs() <= 1.0) || v != self.values[j][i] {
                    return Err(Error::Parameters(format!("{what}: entry ({i}, {j}) = {v}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterDatabase {
    pub version: u32,
    /// In file column order.
    pub sets: Vec<ParameterSet>,
    pub correlations: BTreeMap<Scenario, (CorrelationMatrix, CorrelationMatrix)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawDatabase {
    format: String,
    version: u32,
    columns: Vec<String>,
    table3: BTreeMap<String, Vec<Option<f64>>>,
    correlation_order: Vec<String>,
    table4: RawCorrelations,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawCorrelations {
    layout: String,
    matrices: BTreeMap<String, Vec<Vec<Option<f64>>>>,
}

fn row_prefix(lsp: Lsp, coeff: &str) -> &'static str {
    match (lsp, coeff) {
        (Lsp::Pl, "sig" | "del" | "bet" | "lambda") => "SF",
        _ => lsp.name(),
    }
}

const COEFFS: [&str; 8] = ["mu", "eps", "gam", "alp", "sig", "del", "bet", "lambda"];

impl ParameterDatabase {
    /// The bundled tables.
    pub fn bundled() -> Self {
        Self::from_json_str(BUNDLED).expect("bundled parameter file is valid")
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text).map_err(|e| match e {
            Error::Json(j) => Error::format(path.display().to_string(), j.to_string()),
            other => other,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: RawDatabase = serde_json::from_str(text)?;
        if raw.format != FORMAT {
            return Err(Error::Parameters(format!("unexpected format tag {:?}", raw.format)));
        }
        let order: Vec<Lsp> = raw.correlation_order.iter().map(|s| if s == "SF" { Ok(Lsp::Pl) } else { s.parse() }).collect::<Result<_>>()?;
        if order != Lsp::CORRELATED {
            return Err(Error::Parameters(format!("correlation order {:?}", raw.correlation_order)));
        }
        for (key, row) in &raw.table3 {
            if row.len() != raw.columns.len() {
                return Err(Error::Parameters(format!("row {key} has {} entries for {} columns", row.len(), raw.columns.len())));
            }
        }

        let mut columns: Vec<(String, LinkState, StateParams)> = Vec::new();
        for (c, label) in raw.columns.iter().enumerate() {
            let (set, state) = label
                .split_once('/')
                .ok_or_else(|| Error::Parameters(format!("column {label:?} is not Set/STATE")))?;
            let state: LinkState = state.parse()?;
            columns.push((set.to_string(), state, state_from_column(&raw.table3, c, label)?));
        }

        let mut sets: Vec<ParameterSet> = Vec::new();
        for (name, state, params) in &columns {
            let scenario = Scenario::ALL
                .into_iter()
                .filter(|s| name.starts_with(s.name()))
                .max_by_key(|s| s.name().len())
                .ok_or_else(|| Error::Parameters(format!("set {name:?} does not name a scenario")))?;
            let idx = match sets.iter().position(|s| &s.name == name) {
                Some(i) => i,
                None => {
                    sets.push(ParameterSet {
                        name: name.clone(),
                        scenario,
                        los: StateParams::default(),
                        nlos: StateParams::default(),
                    });
                    sets.len() - 1
                }
            };
            *sets[idx].state_mut(*state) = params.clone();
        }

        // Open cells of derived sets fall back to the base scenario.
        let bases: Vec<ParameterSet> = sets.iter().filter(|s| s.name == s.scenario.name()).cloned().collect();
        for set in sets.iter_mut().filter(|s| s.name != s.scenario.name()) {
            let Some(base) = bases.iter().find(|b| b.scenario == set.scenario) else { continue };
            for state in LinkState::ALL {
                inherit(set.state_mut(state), base.state(state));
            }
        }
        for set in &sets {
            for state in LinkState::ALL {
                let p = set.state(state);
                for (lsp, c) in &p.lsps {
                    if c.lambda.is_some_and(|l| !(l > 0.0)) {
                        return Err(Error::Parameters(format!("{}/{state} {lsp}: decorrelation distance {:?}", set.name, c.lambda)));
                    }
                    if c.sig < 0.0 {
                        log::warn!("{}/{state} {lsp}: negative sig {}; spreads are clamped at 0", set.name, c.sig);
                    }
                }
                if !p.lsps.contains_key(&Lsp::Pl) {
                    return Err(Error::Parameters(format!("{}/{state} has no PL coefficients", set.name)));
                }
            }
        }

        let mut correlations = BTreeMap::new();
        for (name, m) in &raw.table4.matrices {
            let scenario: Scenario = name.parse()?;
            if m.len() != 7 || m.iter().any(|r| r.len() != 7) {
                return Err(Error::Parameters(format!("correlation matrix {name} is not 7x7")));
            }
            let mut los = CorrelationMatrix::identity();
            let mut nlos = CorrelationMatrix::identity();
            for i in 0..7 {
                for j in 0..7 {
                    let v = m[i][j].unwrap_or(0.0);
                    if j > i {
                        los.values[i][j] = v;
                        los.values[j][i] = v;
                    } else if i > j {
                        nlos.values[i][j] = v;
                        nlos.values[j][i] = v;
                    }
                }
            }
            los.validate(&format!("{name} LOS"))?;
            nlos.validate(&format!("{name} NLOS"))?;
            correlations.insert(scenario, (los, nlos));
        }

        Ok(Self { version: raw.version, sets, correlations })
    }

    pub fn set(&self, name: &str) -> Result<&ParameterSet> {
        self.sets.iter().find(|s| s.name == name).ok_or_else(|| Error::Parameters(format!("no parameter set {name:?}")))
    }

    pub fn base(&self, scenario: Scenario) -> Result<&ParameterSet> {
        self.set(scenario.name())
    }

    /// Correlations of the set's scenario; identity when the file has none.
    pub fn correlation(&self, scenario: Scenario, state: LinkState) -> CorrelationMatrix {
        match (self.correlations.get(&scenario), state) {
            (Some((los, _)), LinkState::Los) => *los,
            (Some((_, nlos)), LinkState::Nlos) => *nlos,
            (None, _) => {
                log::warn!("no correlation table for {scenario}; using identity");
                CorrelationMatrix::identity()
            }
        }
    }

    /// Serializes in the on-disk row layout.
    pub fn to_json(&self) -> Result<String> {
        let mut columns = Vec::new();
        let mut table3: BTreeMap<String, Vec<Option<f64>>> = BTreeMap::new();
        let mut push = |key: String, v: Option<f64>, col: usize| {
            let row = table3.entry(key).or_default();
            row.resize(col, None);
            row.push(v);
        };
        for set in &self.sets {
            for state in LinkState::ALL {
                let col = columns.len();
                columns.push(format!("{}/{}", set.name, state));
                let p = set.state(state);
                for lsp in Lsp::ALL {
                    let terms = lsp.terms();
                    let c = p.lsps.get(&lsp);
                    let present = [true, terms.eps, terms.gam, terms.alp, true, terms.del, terms.bet, true];
                    for (k, name) in COEFFS.iter().enumerate() {
                        if !present[k] {
                            continue;
                        }
                        let v = c.and_then(|c| match *name {
                            "mu" => Some(c.mu),
                            "eps" => Some(c.eps),
                            "gam" => Some(c.gam),
                            "alp" => Some(c.alp),
                            "sig" => Some(c.sig),
                            "del" => Some(c.del),
                            "bet" => Some(c.bet),
                            _ => c.lambda,
                        });
                        push(format!("{}_{}", row_prefix(lsp, name), name), v, col);
                    }
                }
                push("L".into(), p.clusters.map(f64::from), col);
                push("r_DS".into(), p.delay_factor, col);
                push("cDS_mu".into(), p.cluster_ds.map(|c| c.0), col);
                push("cDS_gam".into(), p.cluster_ds.map(|c| c.1), col);
                push("cASA".into(), p.cluster_asa, col);
                push("cESA".into(), p.cluster_esa, col);
            }
        }
        for row in table3.values_mut() {
            row.resize(columns.len(), None);
        }
        let mut matrices = BTreeMap::new();
        for (s, (los, nlos)) in &self.correlations {
            let m: Vec<Vec<Option<f64>>> = (0..7)
                .map(|i| (0..7).map(|j| Some(if j >= i { los.values[i][j] } else { nlos.values[i][j] })).collect())
                .collect();
            matrices.insert(s.name().to_string(), m);
        }
        let raw = RawDatabase {
            format: FORMAT.into(),
            version: self.version,
            columns,
            table3,
            correlation_order: ["DS", "KF", "SF", "ASD", "ASA", "ESD", "ESA"].map(String::from).to_vec(),
            table4: RawCorrelations { layout: "upper triangle LOS, lower triangle NLOS".into(), matrices },
        };
        Ok(serde_json::to_string_pretty(&raw)?)
    }
}

fn state_from_column(table: &BTreeMap<String, Vec<Option<f64>>>, c: usize, label: &str) -> Result<StateParams> {
    let cell = |key: &str| table.get(key).and_then(|row| row[c]);
    let mut p = StateParams::default();
    for lsp in Lsp::ALL {
        let Some(mu) = cell(&format!("{}_mu", lsp.name())) else { continue };
        let mut coeff = LspCoefficients { mu, ..Default::default() };
        for name in &COEFFS[1..] {
            let key = format!("{}_{}", row_prefix(lsp, name), name);
            let v = cell(&key);
            if v.is_none() && table.contains_key(&key) && *name != "lambda" {
                return Err(Error::Parameters(format!("{label}: {key} is empty while {}_mu is set", lsp.name())));
            }
            let v0 = v.unwrap_or(0.0);
            match *name {
                "eps" => coeff.eps = v0,
                "gam" => coeff.gam = v0,
                "alp" => coeff.alp = v0,
                "sig" => coeff.sig = v0,
                "del" => coeff.del = v0,
                "bet" => coeff.bet = v0,
                _ => coeff.lambda = v,
            }
        }
        p.lsps.insert(lsp, coeff);
    }
    p.clusters = match cell("L") {
        Some(v) if v >= 1.0 && v.fract() == 0.0 => Some(v as u32),
        Some(v) => return Err(Error::Parameters(format!("{label}: cluster count {v}"))),
        None => None,
    };
    p.delay_factor = cell("r_DS");
    p.cluster_ds = cell("cDS_mu").zip(cell("cDS_gam"));
    p.cluster_asa = cell("cASA");
    p.cluster_esa = cell("cESA");
    Ok(p)
}

fn inherit(p: &mut StateParams, base: &StateParams) {
    for (lsp, c) in p.lsps.iter_mut() {
        if c.lambda.is_none() {
            if let Some(l) = base.lsps.get(lsp).and_then(|b| b.lambda) {
                c.lambda = Some(l);
                p.inherited.push(format!("{}_lambda", row_prefix(*lsp, "lambda")));
            }
        }
    }
    let mut fill = |field: &mut Option<f64>, from: Option<f64>, name: &str| {
        if field.is_none() && from.is_some() {
            *field = from;
            p.inherited.push(name.to_string());
        }
    };
    let mut r = p.delay_factor;
    fill(&mut r, base.delay_factor, "r_DS");
    let mut asa = p.cluster_asa;
    fill(&mut asa, base.cluster_asa, "cASA");
    let mut esa = p.cluster_esa;
    fill(&mut esa, base.cluster_esa, "cESA");
    p.delay_factor = r;
    p.cluster_asa = asa;
    p.cluster_esa = esa;
    if p.cluster_ds.is_none() && base.cluster_ds.is_some() {
        p.cluster_ds = base.cluster_ds;
        p.inherited.push("cDS".into());
    }
    if p.clusters.is_none() && base.clusters.is_some() {
        p.clusters = base.clusters;
        p.inherited.push("L".into());
    }
    if !p.inherited.is_empty() {
        log::debug!("inherited from base scenario: {:?}", p.inherited);
    }
}
