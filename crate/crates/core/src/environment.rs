//! Single-bounce scattering environment around the terminal and the
//! resulting per-link path sets.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::constellation::LinkSample;
use crate::error::{Error, Result};
use crate::frames::{cross, dot, norm, scale, sub, Vec3};
use crate::lsp::{Covariates, LinkKey, Lsp, LspCoefficients, ParameterSet};
use crate::scenario::Scenario;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Terminal antenna height above ground, m.
pub const TERMINAL_HEIGHT: f64 = 1.5;

/// Smallest XPR spread used when the model spread turns negative, dB.
pub const XPR_STD_FLOOR: f64 = 0.5;

const MAX_REJECTIONS: usize = 1_000_000;

/// Normal distribution truncated to `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedNormal {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

impl TruncatedNormal {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        for _ in 0..MAX_REJECTIONS {
            let x = self.mean + self.std * rng.sample::<f64, _>(StandardNormal);
            if x >= self.min && x <= self.max {
                return Ok(x);
            }
        }
        Err(Error::NoConvergence { solver: "truncated normal rejection", iterations: MAX_REJECTIONS })
    }
}

/// Scatterer statistics of one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub scenario: Scenario,
    pub n_paths: usize,
    /// Horizontal terminal–scatterer distance, m.
    pub distance: TruncatedNormal,
    /// Scatterer height above ground, m.
    pub height: TruncatedNormal,
}

impl ScenarioParams {
    pub fn table(scenario: Scenario) -> Self {
        let tn = |min, max, mean, std| TruncatedNormal { min, max, mean, std };
        let (n_paths, distance, height) = match scenario {
            Scenario::DenseUrban => (10, tn(0.1, 100.0, 40.0, 30.0), tn(0.0, 60.0, 2.0, 18.0)),
            Scenario::Urban => (10, tn(0.1, 200.0, 50.0, 35.0), tn(0.0, 30.0, 2.0, 9.0)),
            Scenario::Suburban => (8, tn(0.1, 500.0, 65.0, 50.0), tn(0.0, 8.0, 1.5, 1.5)),
            Scenario::Rural => (6, tn(0.1, 3500.0, 300.0, 200.0), tn(0.0, 8.0, 1.5, 1.5)),
        };
        Self { scenario, n_paths, distance, height }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    /// rad, east towards north
    pub azimuth: f64,
    /// m
    pub distance: f64,
    /// m above ground
    pub height: f64,
}

impl Scatterer {
    /// Position relative to the terminal antenna, m.
    pub fn position(&self) -> Vec3<f64> {
        let (s, c) = self.azimuth.sin_cos();
        [self.distance * c, self.distance * s, self.height - TERMINAL_HEIGHT]
    }
}

pub fn draw_scatterers<R: Rng + ?Sized>(sc: &ScenarioParams, rng: &mut R) -> Result<Vec<Scatterer>> {
    let pi = std::f64::consts::PI;
    (0..sc.n_paths)
        .map(|_| {
            let azimuth = rng.random_range(-pi..pi);
            let distance = sc.distance.sample(rng)?;
            let height = sc.height.sample(rng)?;
            Ok(Scatterer { azimuth, distance, height })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Path {
    /// s
    pub delay: f64,
    /// Linear power gain.
    pub power: f64,
    /// Arrival at the terminal, rad.
    pub aoa_az: f64,
    pub aoa_el: f64,
    /// Departure at the satellite, rad, relative to the satellite–terminal
    /// line.
    pub aod_az: f64,
    pub aod_el: f64,
    /// dB
    pub xpr: f64,
    pub is_los: bool,
}

/// Paths of one link at one frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    pub key: LinkKey,
    pub cov: Covariates,
    pub paths: Vec<Path>,
}

impl PathSet {
    pub fn los(&self) -> Option<&Path> {
        self.paths.iter().find(|p| p.is_los)
    }

    pub fn total_power(&self) -> f64 {
        self.paths.iter().map(|p| p.power).sum()
    }
}

/// Free-space loss `32.45 + 20·log10 d + 20·log10 f`, with `d` in m and `f`
/// in GHz.
pub fn fspl(distance_m: f64, f_ghz: f64) -> f64 {
    32.45 + 20.0 * distance_m.log10() + 20.0 * f_ghz.log10()
}

/// Axes of the departure frame at the satellite: boresight towards the
/// terminal, a horizontal axis and the completing axis.
fn departure_frame(sat: &Vec3<f64>) -> [Vec3<f64>; 3] {
    let b = scale(sat, -1.0 / norm(sat));
    let h = cross(&[0.0, 0.0, 1.0], &b);
    let hn = norm(&h);
    let h = if hn > 1e-12 { scale(&h, 1.0 / hn) } else { [1.0, 0.0, 0.0] };
    [b, h, cross(&b, &h)]
}

/// NLOS paths via single bounces on `scatterers`; powers are left equal and
/// normalized to 1 until [`assign_nlos_powers`].
pub fn geometry_paths(link: &LinkSample, scatterers: &[Scatterer], f_ghz: f64) -> Result<PathSet> {
    if link.mt_state.z <= 0.0 {
        return Err(Error::InvalidInput("satellite below the horizon".into()));
    }
    if scatterers.is_empty() {
        return Err(Error::InvalidInput("no scatterers".into()));
    }
    let sat = scale(&link.mt_state.position(), 1000.0);
    let d = norm(&sat);
    let [b, eh, ev] = departure_frame(&sat);
    let n = scatterers.len() as f64;
    let paths = scatterers
        .iter()
        .map(|sc| {
            let s = sc.position();
            let s_len = norm(&s);
            let back = norm(&sub(&sat, &s));
            // |sat - s| - |sat| without cancellation
            let excess = (dot(&s, &s) - 2.0 * dot(&sat, &s)) / (back + d);
            let wb = dot(&s, &b) + d;
            let wh = dot(&s, &eh);
            let wv = dot(&s, &ev);
            Path {
                delay: (d + s_len + excess) / SPEED_OF_LIGHT,
                power: 1.0 / n,
                aoa_az: s[1].atan2(s[0]),
                aoa_el: s[2].atan2(s[0].hypot(s[1])),
                aod_az: wh.atan2(wb),
                aod_el: wv.atan2(wb.hypot(wh)),
                xpr: 0.0,
                is_los: false,
            }
        })
        .collect();
    Ok(PathSet {
        key: LinkKey { term_id: link.term_id, sat_id: link.sat_id, time: link.time },
        cov: Covariates { distance: link.distance, freq_ghz: f_ghz, elevation: link.elevation },
        paths,
    })
}

/// Splits `-(PL_NLOS + sf_db)` equally over the NLOS paths.
pub fn assign_nlos_powers(ps: &mut PathSet, pl: &LspCoefficients<f64>, sf_db: f64) -> Result<()> {
    let n = ps.paths.iter().filter(|p| !p.is_los).count();
    if n == 0 {
        return Err(Error::InvalidInput("no NLOS paths".into()));
    }
    let c = &ps.cov;
    let total_db = -(pl.eval_mean(c.distance, c.freq_ghz, c.elevation)? + sf_db);
    let each = 10f64.powf(total_db / 10.0) / n as f64;
    for p in ps.paths.iter_mut().filter(|p| !p.is_los) {
        p.power = each;
    }
    Ok(())
}

/// Copy of `ps` with a free-space direct path prepended.
pub fn add_los(ps: &PathSet, link: &LinkSample) -> PathSet {
    let q = link.mt_state.position();
    let los = Path {
        delay: ps.cov.distance / SPEED_OF_LIGHT,
        power: 10f64.powf(-fspl(ps.cov.distance, ps.cov.freq_ghz) / 10.0),
        aoa_az: q[1].atan2(q[0]),
        aoa_el: link.elevation,
        aod_az: 0.0,
        aod_el: 0.0,
        xpr: 0.0,
        is_los: true,
    };
    let mut out = ps.clone();
    out.paths.insert(0, los);
    out
}

/// Mean and spread of the per-path XPR, dB.
pub fn xpr_distribution(c: &LspCoefficients<f64>, cov: &Covariates) -> Result<(f64, f64)> {
    let mean = c.eval_mean(cov.distance, cov.freq_ghz, cov.elevation)?;
    let raw = c.sig + c.del * cov.freq_ghz.log10() + c.bet * cov.elevation.log10();
    let std = if raw < 0.0 {
        log::warn!("XPR spread {raw:.3} dB at elevation {:.2} deg clamped to {XPR_STD_FLOOR} dB", cov.elevation.to_degrees());
        XPR_STD_FLOOR
    } else {
        raw
    };
    Ok((mean, std))
}

pub fn draw_xpr<R: Rng + ?Sized>(ps: &mut PathSet, c: &LspCoefficients<f64>, rng: &mut R) -> Result<()> {
    let (mean, std) = xpr_distribution(c, &ps.cov)?;
    for p in ps.paths.iter_mut() {
        p.xpr = mean + std * rng.sample::<f64, _>(StandardNormal);
    }
    Ok(())
}

/// NLOS and LOS path sets of one link at one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkPaths {
    pub nlos: PathSet,
    pub los: PathSet,
}

/// Builds one drop around the link's terminal and the path sets for every
/// frequency. The scatterers and the shadow-fading deviate are shared by all
/// frequencies.
pub fn synthesize_link<R: Rng + ?Sized>(
    link: &LinkSample,
    sc: &ScenarioParams,
    params: &ParameterSet,
    freqs_ghz: &[f64],
    rng: &mut R,
) -> Result<Vec<LinkPaths>> {
    let scatterers = draw_scatterers(sc, rng)?;
    let x_sf: f64 = rng.sample(StandardNormal);
    let pl = params.nlos.coeffs(Lsp::Pl)?;
    let xpr_nlos = params.nlos.coeffs(Lsp::Xpr)?;
    let xpr_los = params.los.coeffs(Lsp::Xpr)?;
    freqs_ghz
        .iter()
        .map(|&f| {
            let mut nlos = geometry_paths(link, &scatterers, f)?;
            let sf = pl.eval_std(f, link.elevation) * x_sf;
            assign_nlos_powers(&mut nlos, pl, sf)?;
            let mut los = add_los(&nlos, link);
            draw_xpr(&mut nlos, xpr_nlos, rng)?;
            draw_xpr(&mut los, xpr_los, rng)?;
            Ok(LinkPaths { nlos, los })
        })
        .collect()
}
