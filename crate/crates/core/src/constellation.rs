//! Walker-Delta constellations, terminal drops and visible-link enumeration.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{self, MtFrameState, TerminalLocation, ORIENTATION_DT};
use crate::orbit::{EarthConstants, OrbitalElements, Propagator};
use crate::rng;

/// Links below this elevation are never produced, whatever the configured
/// cutoff; `log10 α` is the regression covariate and diverges towards 0.
pub const ELEVATION_FLOOR: f64 = 0.5 * std::f64::consts::PI / 180.0;

/// Default terminal latitude limit, rad.
pub const TERMINAL_LAT_LIMIT: f64 = 53.0 * std::f64::consts::PI / 180.0;

/// Walker-Delta pattern `inc: T/P/F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkerSpec {
    pub total: u32,
    pub planes: u32,
    pub phasing: u32,
    pub altitude_km: f64,
    /// rad
    pub inclination: f64,
}

impl WalkerSpec {
    /// The three shells of the reference study with T=60, P=6, F=1.
    pub fn reference_shells() -> [WalkerSpec; 3] {
        [(550.0, 53.0), (2000.0, 61.0), (20200.0, 63.0)].map(|(alt, inc)| WalkerSpec {
            total: 60,
            planes: 6,
            phasing: 1,
            altitude_km: alt,
            inclination: f64::to_radians(inc),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.total == 0 || self.planes == 0 {
            return Err(Error::Config("walker pattern needs at least one plane and satellite".into()));
        }
        if self.total % self.planes != 0 {
            return Err(Error::Config(format!(
                "walker total {} is not divisible by {} planes",
                self.total, self.planes
            )));
        }
        if self.phasing >= self.planes {
            return Err(Error::Config(format!("walker phasing {} must be below planes {}", self.phasing, self.planes)));
        }
        if !(self.altitude_km > 0.0) || !self.inclination.is_finite() {
            return Err(Error::Config(format!("walker altitude {} km / inclination {}", self.altitude_km, self.inclination)));
        }
        Ok(())
    }
}

/// Circular orbits of a Walker-Delta pattern, plane-major.
pub fn walker_delta(spec: &WalkerSpec) -> Result<Vec<OrbitalElements<f64>>> {
    spec.validate()?;
    let tau = std::f64::consts::TAU;
    let per_plane = spec.total / spec.planes;
    let mut out = Vec::with_capacity(spec.total as usize);
    for p in 0..spec.planes {
        let raan = tau * p as f64 / spec.planes as f64;
        let offset = tau * (spec.phasing * p) as f64 / spec.total as f64;
        for s in 0..per_plane {
            let anomaly = tau * s as f64 / per_plane as f64 + offset;
            out.push(OrbitalElements::circular(spec.altitude_km, spec.inclination, raan, anomaly)?);
        }
    }
    Ok(out)
}

/// Terminals with uniform longitude and area-uniform latitude within
/// `±lat_limit`.
pub fn sample_terminals<R: Rng + ?Sized>(n: usize, lat_limit: f64, rng: &mut R) -> Result<Vec<TerminalLocation<f64>>> {
    if n == 0 {
        return Err(Error::Config("terminal count must be positive".into()));
    }
    if !(lat_limit > 0.0 && lat_limit <= std::f64::consts::FRAC_PI_2) {
        return Err(Error::Config(format!("terminal latitude limit {lat_limit} rad")));
    }
    let s = lat_limit.sin();
    let pi = std::f64::consts::PI;
    (0..n)
        .map(|_| {
            let lon = rng.random_range(-pi..pi);
            let lat = (rng.random_range(-1.0..1.0) * s).asin();
            TerminalLocation::new(lon, lat)
        })
        .collect()
}

/// Closed-form slant range (km) to a satellite at altitude `h` seen at
/// elevation `alpha` from a point at radius `r`.
pub fn slant_range(r: f64, h: f64, alpha: f64) -> f64 {
    let s = alpha.sin();
    -r * s + (r * r * s * s + h * h + 2.0 * r * h).sqrt()
}

/// Uniform time grid `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self { start: 0.0, end: 86400.0, step: 30.0 }
    }
}

impl TimeGrid {
    pub fn times(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !(self.end >= self.start) || !self.start.is_finite() || !self.end.is_finite() {
            return Err(Error::Config(format!("time grid {:?}", self)));
        }
        let n = ((self.end - self.start) / self.step).ceil() as usize;
        Ok((0..n).map(|k| self.start + k as f64 * self.step).filter(|t| *t < self.end).collect())
    }
}

/// One visible satellite–terminal geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSample {
    pub term_id: usize,
    pub sat_id: usize,
    /// s
    pub time: f64,
    pub terminal: TerminalLocation<f64>,
    pub mt_state: MtFrameState<f64>,
    /// m
    pub distance: f64,
    /// rad
    pub elevation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkOptions {
    /// rad
    pub min_elevation: f64,
    /// Keeps a seeded uniform subsample of at most this many links per
    /// terminal.
    pub max_per_terminal: Option<usize>,
    pub seed: u64,
}

impl Default for LinkOptions {
    fn default() -> Self {
        Self { min_elevation: 10f64.to_radians(), max_per_terminal: None, seed: 0 }
    }
}

/// All (terminal, satellite, time) triples with the satellite above the
/// cutoff, ordered by terminal, time and satellite.
pub fn enumerate_links(
    satellites: &[OrbitalElements<f64>],
    constants: &EarthConstants<f64>,
    terminals: &[TerminalLocation<f64>],
    times: &[f64],
    opts: &LinkOptions,
) -> Result<Vec<LinkSample>> {
    if opts.min_elevation < 0.0 || opts.min_elevation.is_nan() {
        return Err(Error::Config(format!("minimum elevation {}", opts.min_elevation)));
    }
    let cutoff = opts.min_elevation.max(ELEVATION_FLOOR);

    // Rotating-frame positions at t and t + Δt for every satellite.
    let tracks: Vec<Vec<([f64; 3], [f64; 3])>> = satellites
        .par_iter()
        .map(|el| {
            let prop = Propagator::new(*el, *constants)?;
            times
                .iter()
                .map(|&t| Ok((prop.rotating_position(t)?, prop.rotating_position(t + ORIENTATION_DT)?)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let per_terminal: Vec<Vec<LinkSample>> = terminals
        .par_iter()
        .enumerate()
        .map(|(term_id, u)| {
            let mut rng = rng::terminal_stream(opts.seed, term_id);
            let rot = frames::rotation_to_mt_frame(u);
            let uc = u.cartesian();
            let mut kept: Vec<(usize, usize)> = Vec::new();
            let mut seen = 0usize;
            for k in 0..times.len() {
                for (sat_id, track) in tracks.iter().enumerate() {
                    let q = frames::mat_vec(&rot, &frames::sub(&track[k].0, &uc));
                    if q[2] <= 0.0 || q[2].atan2(q[0].hypot(q[1])) < cutoff {
                        continue;
                    }
                    match opts.max_per_terminal {
                        Some(cap) if kept.len() >= cap => {
                            let j = rng.random_range(0..=seen);
                            if j < cap {
                                kept[j] = (k, sat_id);
                            }
                        }
                        _ => kept.push((k, sat_id)),
                    }
                    seen += 1;
                }
            }
            kept.sort_unstable();
            kept.into_iter()
                .map(|(k, sat_id)| {
                    let (r0, r1) = tracks[sat_id][k];
                    let mt = frames::mt_state_from_positions(&r0, &r1, u)?;
                    Ok(LinkSample {
                        term_id,
                        sat_id,
                        time: times[k],
                        terminal: *u,
                        mt_state: mt,
                        distance: mt.range() * 1000.0,
                        elevation: mt.elevation,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let links: Vec<LinkSample> = per_terminal.into_iter().flatten().collect();
    if links.is_empty() {
        log::warn!("no visible links above {:.2} deg", cutoff.to_degrees());
    }
    Ok(links)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn deg(x: f64) -> f64 {
        x.to_degrees()
    }

    #[test]
    fn walker_examples() {
        let sats = walker_delta(&WalkerSpec { total: 4, planes: 2, phasing: 0, altitude_km: 550.0, inclination: 0.9 }).unwrap();
        let got: Vec<(f64, f64)> = sats.iter().map(|e| (deg(e.raan).rem_euclid(360.0), deg(e.true_anomaly).rem_euclid(360.0))).collect();
        let want = [(0.0, 0.0), (0.0, 180.0), (180.0, 0.0), (180.0, 180.0)];
        for (g, w) in got.iter().zip(want) {
            assert!((g.0 - w.0).abs() < 1e-9 && (g.1 - w.1).abs() < 1e-9, "{g:?}");
        }

        let sats = walker_delta(&WalkerSpec { total: 6, planes: 3, phasing: 1, altitude_km: 550.0, inclination: 0.9 }).unwrap();
        for p in 0..2 {
            let step = sats[2 * (p + 1)].true_anomaly - sats[2 * p].true_anomaly;
            assert!((step - PI / 3.0).abs() < 1e-12);
        }
        for el in &sats {
            assert_eq!(el.semi_major_axis, sats[0].semi_major_axis);
            assert_eq!(el.eccentricity, 0.0);
            assert_eq!(el.inclination, 0.9);
        }

        let bad = WalkerSpec { total: 5, planes: 2, phasing: 0, altitude_km: 550.0, inclination: 0.9 };
        assert!(walker_delta(&bad).is_err());
    }

    #[test]
    fn reference_shells() {
        let shells = WalkerSpec::reference_shells();
        let got: Vec<(f64, f64)> = shells.iter().map(|s| (s.altitude_km, deg(s.inclination))).collect();
        for (g, w) in got.iter().zip([(550.0, 53.0), (2000.0, 61.0), (20200.0, 63.0)]) {
            assert_eq!(g.0, w.0);
            assert!((g.1 - w.1).abs() < 1e-12);
        }
    }

    #[test]
    fn terminal_latitudes() {
        let mut r = rng::stream(3, &[]);
        let t = sample_terminals(100_000, TERMINAL_LAT_LIMIT, &mut r).unwrap();
        let max = t.iter().map(|u| u.lat.abs()).fold(0.0, f64::max);
        assert!(max <= TERMINAL_LAT_LIMIT);
        let frac = t.iter().filter(|u| u.lat.abs() < 26.5f64.to_radians()).count() as f64 / t.len() as f64;
        let want = 26.5f64.to_radians().sin() / TERMINAL_LAT_LIMIT.sin();
        assert!((frac - want).abs() < 0.01, "{frac} vs {want}");
        assert!(t.iter().all(|u| u.lon >= -PI && u.lon < PI));

        let again = sample_terminals(100_000, TERMINAL_LAT_LIMIT, &mut rng::stream(3, &[])).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn slant_range_oracle() {
        let re = EarthConstants::<f64>::standard().radius;
        assert!((slant_range(re, 550.0, PI / 2.0) - 550.0).abs() < 1e-9);
        // law of cosines on the Earth-centre triangle
        let alpha = 10f64.to_radians();
        let d = slant_range(re, 550.0, alpha);
        let central = (re * alpha.cos() / (re + 550.0)).acos() - alpha;
        let law = (re * re + (re + 550.0).powi(2) - 2.0 * re * (re + 550.0) * central.cos()).sqrt();
        assert!((d - law).abs() < 1e-6);
        assert!((d - 1815.652).abs() < 1e-3, "{d}");
    }

    #[test]
    fn time_grid() {
        let g = TimeGrid::default().times().unwrap();
        assert_eq!(g.len(), 2880);
        assert_eq!(g[1], 30.0);
        assert_eq!(*g.last().unwrap(), 86370.0);
        assert!(TimeGrid { start: 0.0, end: 1.0, step: 0.0 }.times().is_err());
    }

    fn overhead_setup() -> (OrbitalElements<f64>, EarthConstants<f64>, TerminalLocation<f64>) {
        let c = EarthConstants::standard();
        let el = OrbitalElements::circular(550.0, 53f64.to_radians(), 0.4, 0.2).unwrap();
        let g = Propagator::new(el, c).unwrap().state_at(0.0).unwrap().geo;
        (el, c, TerminalLocation::new(g.lon, g.lat).unwrap())
    }

    #[test]
    fn zenith_pass() {
        let (el, c, u) = overhead_setup();
        let times: Vec<f64> = (-300..=300).map(|k| k as f64).collect();
        let links = enumerate_links(&[el], &c, &[u], &times, &LinkOptions::default()).unwrap();
        let closest = links.iter().min_by(|a, b| a.distance.total_cmp(&b.distance)).unwrap();
        assert_eq!(closest.time, 0.0);
        assert!((closest.distance - 550_000.0).abs() < 1e-3);
        assert!((closest.elevation - PI / 2.0).abs() < 1e-9);

        // Distance agrees with the spherical slant-range identity everywhere.
        for l in &links {
            let d = slant_range(c.radius, 550.0, l.elevation) * 1000.0;
            assert!((l.distance - d).abs() < 1e-3, "{} vs {d}", l.distance);
            assert!(l.elevation >= 10f64.to_radians());
        }
        assert!(links.windows(2).all(|w| w[0].time < w[1].time));
    }

    #[test]
    fn never_visible() {
        let c = EarthConstants::standard();
        let el = OrbitalElements::circular(550.0, 0.0, 0.0, 0.0).unwrap();
        let u = TerminalLocation::from_degrees(10.0, 60.0).unwrap();
        let times = TimeGrid { start: 0.0, end: 20000.0, step: 20.0 }.times().unwrap();
        let opts = LinkOptions { min_elevation: 0.0, ..Default::default() };
        assert!(enumerate_links(&[el], &c, &[u], &times, &opts).unwrap().is_empty());
    }

    #[test]
    fn cap_and_determinism() {
        let c = EarthConstants::standard();
        let sats = walker_delta(&WalkerSpec::reference_shells()[0]).unwrap();
        let terms = sample_terminals(6, TERMINAL_LAT_LIMIT, &mut rng::stream(1, &[])).unwrap();
        let times = TimeGrid { start: 0.0, end: 21600.0, step: 60.0 }.times().unwrap();
        let opts = LinkOptions { max_per_terminal: Some(25), seed: 99, ..Default::default() };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| enumerate_links(&sats, &c, &terms, &times, &opts).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a, b);
        for t in 0..terms.len() {
            assert!(a.iter().filter(|l| l.term_id == t).count() <= 25);
        }
        let full = enumerate_links(&sats, &c, &terms, &times, &LinkOptions::default()).unwrap();
        assert!(full.len() > a.len());
        assert!(a.iter().all(|l| full.contains(l)));
    }
}
