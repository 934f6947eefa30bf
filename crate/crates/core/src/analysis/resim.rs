//! Cluster-level path sets drawn from fitted parameters, for checking that
//! extraction and fitting close on themselves.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::extract::{angular_spread_of, delay_spread_of, extract, AngularSpreadMethod};
use crate::environment::{Path, PathSet, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::lsp::{CorrelationMatrix, Covariates, LinkKey, LspMixer, LspSample, ParameterSet, StateParams};
use crate::rng;
use crate::scenario::LinkState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResimOptions {
    pub seed: u64,
    pub method: AngularSpreadMethod,
}

/// Scale `c` with `spread(c·offsets)` equal to `target` (rad), by bracketing
/// and bisection. Targets beyond the largest reachable spread get the
/// widest scale tried.
fn angle_scale(offsets: &[f64], powers: &[f64], target: f64, method: AngularSpreadMethod) -> Result<f64> {
    let spread = |c: f64| -> Result<f64> {
        let a: Vec<f64> = offsets.iter().map(|o| c * o).collect();
        angular_spread_of(&a, powers, method)
    };
    let unit = spread(1.0)?;
    if !(target > 0.0) || !(unit > 0.0) {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, target / unit);
    let (mut best, mut best_s) = (0.0, 0.0);
    let mut bracketed = false;
    for _ in 0..40 {
        let s = spread(hi)?;
        if s > best_s {
            best = hi;
            best_s = s;
        }
        if s >= target {
            bracketed = true;
            break;
        }
        lo = hi;
        hi *= 1.5;
    }
    if !bracketed {
        log::debug!("angular spread {target:.4} rad not reachable; using {best_s:.4} rad");
        return Ok(best);
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if spread(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One synthetic path set for a link in `state`. LOS sets carry `L − 1`
/// clusters plus the direct path, NLOS sets `L` clusters. Delays and angles
/// are rescaled so that the extracted spreads equal the drawn ones; the LOS
/// power follows the drawn K-factor and the total power the drawn path loss.
pub fn resimulate_link<R: Rng + ?Sized>(
    p: &StateParams,
    state: LinkState,
    mixer: &LspMixer,
    key: LinkKey,
    cov: Covariates,
    method: AngularSpreadMethod,
    rng: &mut R,
) -> Result<PathSet> {
    let v = mixer.draw(p, state, &cov, rng)?;
    let l = p.clusters.ok_or_else(|| Error::Parameters("cluster count L is missing".into()))? as usize;
    let r_ds = p.delay_factor.ok_or_else(|| Error::Parameters("delay factor r_DS is missing".into()))?;
    let is_los = state == LinkState::Los;
    let n = if is_los { l.saturating_sub(1).max(1) } else { l.max(1) };
    let ds = 10f64.powf(v.ds);

    let mut tau: Vec<f64> = (0..n).map(|_| -r_ds * ds * (1.0 - rng.random::<f64>()).ln()).collect();
    tau.sort_by(f64::total_cmp);
    let t0 = tau[0];
    tau.iter_mut().for_each(|t| *t -= t0);
    let mut pw: Vec<f64> = tau.iter().map(|t| (-t * (r_ds - 1.0) / (r_ds * ds)).exp()).collect();
    let sum: f64 = pw.iter().sum();
    let (los_share, nlos_share) = match v.kf {
        Some(kf) if is_los => {
            let k = 10f64.powf(kf / 10.0);
            (k / (1.0 + k), 1.0 / (1.0 + k))
        }
        _ => (0.0, 1.0),
    };
    pw.iter_mut().for_each(|x| *x *= nlos_share / sum);
    if is_los {
        tau.insert(0, 0.0);
        pw.insert(0, los_share);
    }
    let total = 10f64.powf(-v.pl / 10.0);
    pw.iter_mut().for_each(|x| *x *= total);

    let have = delay_spread_of(&tau, &pw)?;
    if have > 0.0 {
        tau.iter_mut().for_each(|t| *t *= ds / have);
    }

    let m = tau.len();
    let first = usize::from(is_los);
    let mut angles = [0.0; 4].map(|_| vec![0.0; m]);
    // arrival azimuth, departure azimuth, arrival elevation, departure elevation
    let targets = [v.asa, v.asd, v.esa, v.esd].map(|x| 10f64.powf(x).to_radians());
    for (k, a) in angles.iter_mut().enumerate() {
        let offsets: Vec<f64> = (0..m).map(|i| if i < first { 0.0 } else { rng.sample(StandardNormal) }).collect();
        let c = angle_scale(&offsets, &pw, targets[k], method)?;
        for (x, o) in a.iter_mut().zip(&offsets) {
            *x = c * o;
        }
    }
    let base_az = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let delay0 = cov.distance / SPEED_OF_LIGHT;
    let paths = (0..m)
        .map(|i| Path {
            delay: delay0 + tau[i],
            power: pw[i],
            aoa_az: base_az + angles[0][i],
            aod_az: angles[1][i],
            aoa_el: cov.elevation + angles[2][i],
            aod_el: angles[3][i],
            xpr: v.xpr,
            is_los: is_los && i == 0,
        })
        .collect();
    Ok(PathSet { key, cov, paths })
}

/// Resimulates every link of `links` from `fitted` and extracts the LSPs
/// again. Each link has its own random stream, so the result does not
/// depend on the thread count.
pub fn resimulate(
    fitted: &ParameterSet,
    correlations: [&CorrelationMatrix; 2],
    links: &[LspSample],
    opts: &ResimOptions,
) -> Result<Vec<LspSample>> {
    let mixers = correlations.map(LspMixer::new);
    links
        .par_iter()
        .map(|s| {
            let (p, mixer) = match s.state {
                LinkState::Los => (&fitted.los, &mixers[0]),
                LinkState::Nlos => (&fitted.nlos, &mixers[1]),
            };
            let [a, b, c] = s.key.stream_parts();
            let mut r = rng::stream(opts.seed, &[a, b, c, s.cov.freq_ghz.to_bits(), s.state as u64]);
            let ps = resimulate_link(p, s.state, mixer, s.key, s.cov, opts.method, &mut r)?;
            extract(&ps, fitted.scenario, opts.method)
        })
        .collect()
}
