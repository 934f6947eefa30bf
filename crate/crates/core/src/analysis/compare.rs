//! Coefficient-by-coefficient comparison of two parameter sets.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lsp::{Lsp, ParameterSet};
use crate::scenario::{LinkState, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// For every coefficient of the log10-valued LSPs (DS and the angular
    /// spreads), dex.
    pub log_units: f64,
    /// For every coefficient of PL, KF and XPR, dB or dB per decade.
    pub db_units: f64,
    /// `(lsp, coefficient)` pairs whose failures count against the run.
    pub gated: Vec<(Lsp, String)>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            log_units: 0.15,
            db_units: 1.5,
            gated: vec![(Lsp::Ds, "mu".into()), (Lsp::Kf, "mu".into()), (Lsp::Pl, "gam".into())],
        }
    }
}

impl Tolerances {
    pub fn for_lsp(&self, lsp: Lsp) -> f64 {
        match lsp {
            Lsp::Pl | Lsp::Kf | Lsp::Xpr => self.db_units,
            _ => self.log_units,
        }
    }

    pub fn is_gated(&self, lsp: Lsp, coeff: &str) -> bool {
        self.gated.iter().any(|(l, c)| *l == lsp && c == coeff)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub scenario: Scenario,
    pub state: LinkState,
    pub lsp: Lsp,
    pub coeff: String,
    pub fitted: f64,
    pub reference: f64,
    /// `fitted − reference`
    pub delta: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub gated: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<Comparison>,
    /// Coefficients present on one side only.
    pub missing: Vec<String>,
}

/// Coefficients of `lsp` that the parameter tables carry.
fn carried(lsp: Lsp) -> Vec<&'static str> {
    let t = lsp.terms();
    let mut out = vec!["mu"];
    out.extend([(t.eps, "eps"), (t.gam, "gam"), (t.alp, "alp")].iter().filter(|x| x.0).map(|x| x.1));
    out.push("sig");
    out.extend([(t.del, "del"), (t.bet, "bet")].iter().filter(|x| x.0).map(|x| x.1));
    out
}

/// Compares every carried coefficient of `fitted` against `reference`.
pub fn compare(fitted: &ParameterSet, reference: &ParameterSet, tol: &Tolerances) -> ComparisonReport {
    let mut report = ComparisonReport::default();
    for state in LinkState::ALL {
        let (f, r) = (fitted.state(state), reference.state(state));
        for lsp in Lsp::ALL {
            let (fc, rc) = match (f.lsps.get(&lsp), r.lsps.get(&lsp)) {
                (Some(a), Some(b)) => (a, b),
                (None, None) => continue,
                (a, _) => {
                    let side = if a.is_some() { &reference.name } else { &fitted.name };
                    report.missing.push(format!("{}/{state}/{lsp} absent from {side}", fitted.scenario));
                    continue;
                }
            };
            let (fv, rv) = (fc.named(), rc.named());
            for name in carried(lsp) {
                let pick = |v: &[(&str, f64); 7]| v.iter().find(|x| x.0 == name).map(|x| x.1).expect("known coefficient");
                let (a, b) = (pick(&fv), pick(&rv));
                let tolerance = tol.for_lsp(lsp);
                let delta = a - b;
                report.rows.push(Comparison {
                    scenario: fitted.scenario,
                    state,
                    lsp,
                    coeff: name.to_string(),
                    fitted: a,
                    reference: b,
                    delta,
                    tolerance,
                    pass: delta.abs() <= tolerance + 1e-9,
                    gated: tol.is_gated(lsp, name),
                });
            }
        }
    }
    for m in &report.missing {
        log::warn!("comparison: {m}");
    }
    report
}

impl ComparisonReport {
    pub fn extend(&mut self, other: ComparisonReport) {
        self.rows.extend(other.rows);
        self.missing.extend(other.missing);
    }

    /// Gated rows outside tolerance.
    pub fn failures(&self) -> Vec<&Comparison> {
        self.rows.iter().filter(|r| r.gated && !r.pass).collect()
    }

    pub fn row(&self, state: LinkState, lsp: Lsp, coeff: &str) -> Option<&Comparison> {
        self.rows.iter().find(|r| r.state == state && r.lsp == lsp && r.coeff == coeff)
    }

    /// `scenario,state,lsp,coeff,fitted,reference,delta,pass`
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["scenario", "state", "lsp", "coeff", "fitted", "reference", "delta", "pass"])?;
        for r in &self.rows {
            out.write_record([
                r.scenario.name().to_string(),
                r.state.name().to_string(),
                r.lsp.name().to_string(),
                r.coeff.clone(),
                r.fitted.to_string(),
                r.reference.to_string(),
                r.delta.to_string(),
                r.pass.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Aligned text table; gated rows are starred.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<11} {:<5} {:<4} {:<5} {:>10} {:>10} {:>8}  result", "scenario", "state", "lsp", "coeff", "fitted", "reference", "delta");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<11} {:<5} {:<4} {:<5} {:>10.3} {:>10.3} {:>8.3}  {}{}",
                r.scenario.name(),
                r.state.name(),
                r.lsp.name(),
                r.coeff,
                r.fitted,
                r.reference,
                r.delta,
                if r.pass { "pass" } else { "FAIL" },
                if r.gated { " *" } else { "" }
            );
        }
        for m in &self.missing {
            let _ = writeln!(s, "missing: {m}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lsp::ParameterDatabase;

    #[test]
    fn identical_tables_pass() {
        let db = ParameterDatabase::bundled();
        let set = db.base(Scenario::Suburban).unwrap();
        let r = compare(set, set, &Tolerances::default());
        assert!(r.rows.iter().all(|x| x.pass && x.delta == 0.0));
        assert!(r.missing.is_empty());
        // 8 LSPs in LOS, 7 in NLOS
        let per_state = |s| r.rows.iter().filter(|x| x.state == s).count();
        assert_eq!(per_state(LinkState::Los), carried(Lsp::Kf).len() + per_state(LinkState::Nlos));
        assert_eq!(r.rows.iter().filter(|x| x.lsp == Lsp::Pl && x.state == LinkState::Nlos).count(), 7);
    }

    #[test]
    fn one_perturbed_coefficient() {
        let db = ParameterDatabase::bundled();
        let set = db.base(Scenario::Rural).unwrap();
        let mut other = set.clone();
        other.nlos.lsps.get_mut(&Lsp::Ds).unwrap().mu += 0.2;
        let r = compare(&other, set, &Tolerances::default());
        let bad: Vec<&Comparison> = r.rows.iter().filter(|x| !x.pass).collect();
        assert_eq!(bad.len(), 1);
        assert_eq!((bad[0].state, bad[0].lsp, bad[0].coeff.as_str()), (LinkState::Nlos, Lsp::Ds, "mu"));
        assert!((bad[0].delta - 0.2).abs() < 1e-12);
        assert_eq!(r.failures().len(), 1);
    }

    #[test]
    fn missing_rows_are_listed() {
        let db = ParameterDatabase::bundled();
        let set = db.base(Scenario::Urban).unwrap();
        let mut other = set.clone();
        other.los.lsps.remove(&Lsp::Xpr);
        let r = compare(&other, set, &Tolerances::default());
        assert_eq!(r.missing.len(), 1);
        assert!(r.missing[0].contains("XPR"));
    }

    #[test]
    fn csv_header() {
        let db = ParameterDatabase::bundled();
        let set = db.base(Scenario::Urban).unwrap();
        let mut buf = Vec::new();
        compare(set, set, &Tolerances::default()).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("scenario,state,lsp,coeff,fitted,reference,delta,pass\nUrban,LOS,PL,mu,32.45,32.45,0,true\n"));
    }
}
