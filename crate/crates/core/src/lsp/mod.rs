//! Multilinear large-scale-parameter model, parameter tables, correlated
//! fields and LSP sampling.
//!
//! Every LSP follows
//! `V = μ + ε·log10 d + γ·log10 f + α·log10 α + X·(σ + δ·log10 f + β·log10 α)`
//! with `d` in m, `f` in GHz, the elevation `α` in rad and `X ~ N(0, 1)`.

pub mod field;
pub mod params;
pub mod sample;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use field::correlated_field;
pub use params::{CorrelationMatrix, ParameterDatabase, ParameterSet, StateParams};
pub use sample::{Covariates, LinkKey, LspMixer, LspSample, LspValues};

/// The eight modelled large-scale parameters. The shadow-fading rows of the
/// parameter table are the random part of `Pl`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Lsp {
    #[serde(rename = "PL")]
    Pl,
    #[serde(rename = "KF")]
    Kf,
    #[serde(rename = "DS")]
    Ds,
    #[serde(rename = "ASA")]
    Asa,
    #[serde(rename = "ASD")]
    Asd,
    #[serde(rename = "ESA")]
    Esa,
    #[serde(rename = "ESD")]
    Esd,
    #[serde(rename = "XPR")]
    Xpr,
}

impl Lsp {
    pub const ALL: [Lsp; 8] = [Lsp::Pl, Lsp::Kf, Lsp::Ds, Lsp::Asa, Lsp::Asd, Lsp::Esa, Lsp::Esd, Lsp::Xpr];

    /// Order of the inter-parameter correlation matrix: DS, KF, SF, ASD, ASA,
    /// ESD, ESA.
    pub const CORRELATED: [Lsp; 7] = [Lsp::Ds, Lsp::Kf, Lsp::Pl, Lsp::Asd, Lsp::Asa, Lsp::Esd, Lsp::Esa];

    pub fn name(self) -> &'static str {
        match self {
            Lsp::Pl => "PL",
            Lsp::Kf => "KF",
            Lsp::Ds => "DS",
            Lsp::Asa => "ASA",
            Lsp::Asd => "ASD",
            Lsp::Esa => "ESA",
            Lsp::Esd => "ESD",
            Lsp::Xpr => "XPR",
        }
    }

    /// Model terms carried by the parameter table for this LSP.
    pub fn terms(self) -> Terms {
        let t = |eps, gam, alp, del, bet| Terms { eps, gam, alp, del, bet };
        match self {
            Lsp::Pl => t(true, true, true, true, true),
            Lsp::Kf => t(false, true, true, true, true),
            Lsp::Ds | Lsp::Asa | Lsp::Esa => t(false, true, true, false, false),
            Lsp::Asd | Lsp::Esd => t(true, true, true, false, false),
            Lsp::Xpr => t(false, false, true, false, true),
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Lsp::Pl | Lsp::Kf | Lsp::Xpr => "dB",
            Lsp::Ds => "log10(s)",
            _ => "log10(deg)",
        }
    }
}

impl fmt::Display for Lsp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Lsp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Lsp::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown LSP {s:?}")))
    }
}

/// Which optional regressors a model uses. `μ` and `σ` are always present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Terms {
    pub eps: bool,
    pub gam: bool,
    pub alp: bool,
    pub del: bool,
    pub bet: bool,
}

impl Terms {
    pub const FULL: Terms = Terms { eps: true, gam: true, alp: true, del: true, bet: true };
}

/// Coefficients of one LSP for one scenario and link state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LspCoefficients<T> {
    pub mu: T,
    pub eps: T,
    pub gam: T,
    pub alp: T,
    pub sig: T,
    pub del: T,
    pub bet: T,
    /// Decorrelation distance, m.
    pub lambda: Option<T>,
}

impl<T: Scalar> LspCoefficients<T> {
    /// Mean `μ + ε·log10 d + γ·log10 f + α·log10 α`.
    pub fn eval_mean(&self, d: T, f: T, alpha: T) -> Result<T> {
        check_covariates(d, f, alpha)?;
        Ok(self.mu + self.eps * d.log10() + self.gam * f.log10() + self.alp * alpha.log10())
    }

    /// Standard deviation `max(0, σ + δ·log10 f + β·log10 α)`.
    pub fn eval_std(&self, f: T, alpha: T) -> T {
        let s = self.sig + self.del * f.log10() + self.bet * alpha.log10();
        if s < T::zero() {
            log::debug!("negative LSP spread {s} clamped to 0 (f = {f}, alpha = {alpha})");
            T::zero()
        } else {
            s
        }
    }

    /// `eval_mean + eval_std·x`.
    pub fn eval(&self, d: T, f: T, alpha: T, x: T) -> Result<T> {
        Ok(self.eval_mean(d, f, alpha)? + self.eval_std(f, alpha) * x)
    }

    pub fn map<U>(&self, g: impl Fn(T) -> U) -> LspCoefficients<U> {
        LspCoefficients {
            mu: g(self.mu),
            eps: g(self.eps),
            gam: g(self.gam),
            alp: g(self.alp),
            sig: g(self.sig),
            del: g(self.del),
            bet: g(self.bet),
            lambda: self.lambda.map(&g),
        }
    }

    /// `(name, value)` for the seven model coefficients.
    pub fn named(&self) -> [(&'static str, T); 7] {
        [
            ("mu", self.mu),
            ("eps", self.eps),
            ("gam", self.gam),
            ("alp", self.alp),
            ("sig", self.sig),
            ("del", self.del),
            ("bet", self.bet),
        ]
    }
}

fn check_covariates<T: Scalar>(d: T, f: T, alpha: T) -> Result<()> {
    if !(d > T::zero()) || !(f > T::zero()) || !(alpha > T::zero()) || alpha > T::FRAC_PI_2() + T::epsilon() {
        return Err(Error::InvalidInput(format!("LSP covariates d = {d}, f = {f}, alpha = {alpha}")));
    }
    Ok(())
}
