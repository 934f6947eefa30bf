//! Delay spread, angular spreads, K-factor and per-link LSP extraction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::PathSet;
use crate::error::{Error, Result};
use crate::lsp::{LspSample, LspValues};
use crate::scalar::{wrap_angle, Scalar};
use crate::scenario::{LinkState, Scenario};

/// Angle of a path that a spread is computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AngleKind {
    AoaAz,
    AodAz,
    AoaEl,
    AodEl,
}

/// How the power-weighted spread of a set of angles is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AngularSpreadMethod {
    /// RMS of the angles wrapped about the power-weighted circular mean.
    #[default]
    WrappedRms,
    /// `sqrt(-2 ln R)` with `R` the mean resultant length.
    CircularStd,
}

fn power_check<T: Scalar>(powers: &[T]) -> Result<T> {
    if powers.is_empty() {
        return Err(Error::InvalidInput("empty path set".into()));
    }
    if powers.iter().any(|p| *p < T::zero() || !p.is_finite()) {
        return Err(Error::InvalidInput("negative or non-finite path power".into()));
    }
    let total = powers.iter().fold(T::zero(), |a, p| a + *p);
    if !(total > T::zero()) {
        return Err(Error::ZeroPower);
    }
    Ok(total)
}

/// RMS spread of `delays` weighted by linear `powers`.
pub fn delay_spread_of<T: Scalar>(delays: &[T], powers: &[T]) -> Result<T> {
    if delays.len() != powers.len() {
        return Err(Error::InvalidInput("delays and powers differ in length".into()));
    }
    let total = power_check(powers)?;
    // moments about the first delay keep the subtraction well conditioned
    let t0 = delays[0];
    let (mut m1, mut m2) = (T::zero(), T::zero());
    for (t, p) in delays.iter().zip(powers) {
        let dt = *t - t0;
        m1 = m1 + *p * dt;
        m2 = m2 + *p * dt * dt;
    }
    let (m1, m2) = (m1 / total, m2 / total);
    Ok((m2 - m1 * m1).max(T::zero()).sqrt())
}

/// Spread of `angles` (rad) weighted by `powers`, in rad.
pub fn angular_spread_of<T: Scalar>(angles: &[T], powers: &[T], method: AngularSpreadMethod) -> Result<T> {
    if angles.len() != powers.len() {
        return Err(Error::InvalidInput("angles and powers differ in length".into()));
    }
    let total = power_check(powers)?;
    let (mut c, mut s) = (T::zero(), T::zero());
    for (a, p) in angles.iter().zip(powers) {
        c = c + *p * a.cos();
        s = s + *p * a.sin();
    }
    match method {
        AngularSpreadMethod::CircularStd => {
            let r = (c.hypot(s) / total).min(T::one());
            Ok((-T::lit(2.0) * r.ln()).max(T::zero()).sqrt())
        }
        AngularSpreadMethod::WrappedRms => {
            // With no preferred direction the mean is arbitrary; zero is as good as any.
            let mean = if c.hypot(s) > T::epsilon() * total { s.atan2(c) } else { T::zero() };
            let mut m2 = T::zero();
            for (a, p) in angles.iter().zip(powers) {
                let d = wrap_angle(*a - mean);
                m2 = m2 + *p * d * d;
            }
            Ok((m2 / total).sqrt())
        }
    }
}

/// RMS delay spread of a path set, s.
pub fn rms_delay_spread(ps: &PathSet) -> Result<f64> {
    let delays: Vec<f64> = ps.paths.iter().map(|p| p.delay).collect();
    let powers: Vec<f64> = ps.paths.iter().map(|p| p.power).collect();
    delay_spread_of(&delays, &powers)
}

/// Angular spread of a path set, degrees.
pub fn angular_spread(ps: &PathSet, which: AngleKind, method: AngularSpreadMethod) -> Result<f64> {
    let angles: Vec<f64> = ps
        .paths
        .iter()
        .map(|p| match which {
            AngleKind::AoaAz => p.aoa_az,
            AngleKind::AodAz => p.aod_az,
            AngleKind::AoaEl => p.aoa_el,
            AngleKind::AodEl => p.aod_el,
        })
        .collect();
    let powers: Vec<f64> = ps.paths.iter().map(|p| p.power).collect();
    Ok(angular_spread_of(&angles, &powers, method)?.to_degrees())
}

/// Direct-to-scattered power ratio, dB.
pub fn k_factor(ps: &PathSet) -> Result<f64> {
    let los: f64 = ps.paths.iter().filter(|p| p.is_los).map(|p| p.power).sum();
    if !ps.paths.iter().any(|p| p.is_los) {
        return Err(Error::MissingLos);
    }
    let nlos: f64 = ps.paths.iter().filter(|p| !p.is_los).map(|p| p.power).sum();
    if !(nlos > 0.0) {
        return if los > 0.0 { Ok(f64::INFINITY) } else { Err(Error::ZeroPower) };
    }
    Ok(10.0 * (los / nlos).log10())
}

/// LSPs of one link. The state follows from the presence of a LOS path; the
/// shadow fading stays unset until the path-loss regression is known.
pub fn extract(ps: &PathSet, scenario: Scenario, method: AngularSpreadMethod) -> Result<LspSample> {
    let total = ps.total_power();
    if !(total > 0.0) {
        return Err(Error::ZeroPower);
    }
    let (state, kf) = match ps.los() {
        Some(_) => (LinkState::Los, Some(k_factor(ps)?)),
        None => (LinkState::Nlos, None),
    };
    let spread = |k| angular_spread(ps, k, method).map(f64::log10);
    let xpr = ps.paths.iter().map(|p| p.xpr).sum::<f64>() / ps.paths.len() as f64;
    Ok(LspSample {
        key: ps.key,
        scenario,
        state,
        cov: ps.cov,
        values: LspValues {
            pl: -10.0 * total.log10(),
            sf: None,
            kf,
            ds: rms_delay_spread(ps)?.log10(),
            asa: spread(AngleKind::AoaAz)?,
            asd: spread(AngleKind::AodAz)?,
            esa: spread(AngleKind::AoaEl)?,
            esd: spread(AngleKind::AodEl)?,
            xpr,
        },
    })
}

/// [`extract`] over many links, in input order.
pub fn extract_all(sets: &[PathSet], scenario: Scenario, method: AngularSpreadMethod) -> Result<Vec<LspSample>> {
    if sets.is_empty() {
        return Err(Error::InvalidInput("no path sets to extract".into()));
    }
    sets.par_iter().map(|ps| extract(ps, scenario, method)).collect()
}
