//! Keplerian orbit propagation with secular J2 drift of the node and perigee.
//!
//! Angles are radians, distances km, times seconds. Times passed to
//! [`propagate`] are simulation seconds: the orbit is advanced by
//! `t - epoch`, while the Earth rotation angle is `ω_e · t` (the prime
//! meridian coincides with the vernal equinox at `t = 0`).
//!
//! The orbital radius uses `a(1−e²)/(1+e·cos ν)`, the conic equation that
//! puts perigee at `a(1−e)` and apogee at `a(1+e)`. The variant
//! form `a(1−e)²/(1+e·cos ν)` misplaces both apsides for `e > 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{wrap_angle, Scalar};

/// Earth constants for orbit prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarthConstants<T> {
    /// Equatorial radius R_e, km.
    pub radius: T,
    /// Mass M_e, kg.
    pub mass: T,
    /// Sidereal rotation period T_e, s.
    pub rotation_period: T,
    /// Angular rotation rate ω_e, rad/s.
    pub rotation_rate: T,
    /// Gravitational constant G, km³/s²/kg.
    pub gravitational_constant: T,
    /// Oblateness harmonic J2.
    pub j2: T,
}

impl<T: Scalar> EarthConstants<T> {
    pub fn standard() -> Self {
        Self {
            radius: T::lit(6378.137),
            mass: T::lit(5.9722e24),
            rotation_period: T::lit(86164.09054),
            rotation_rate: T::lit(7.29211585453e-5),
            gravitational_constant: T::lit(6.67408e-20),
            j2: T::lit(0.001082636),
        }
    }

    /// Same constants with the J2 perturbation switched off.
    pub fn without_j2(mut self) -> Self {
        self.j2 = T::zero();
        self
    }

    /// Non-rotating Earth (useful for isolating orbit geometry).
    pub fn without_rotation(mut self) -> Self {
        self.rotation_rate = T::zero();
        self
    }

    /// Standard gravitational parameter G·M_e, km³/s².
    pub fn mu(&self) -> T {
        self.gravitational_constant * self.mass
    }
}

impl<T: Scalar> Default for EarthConstants<T> {
    fn default() -> Self {
        Self::standard()
    }
}

/// Classical elements at the reference epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitalElements<T> {
    /// Semi-major axis a, km.
    pub semi_major_axis: T,
    /// Eccentricity e in [0, 1).
    pub eccentricity: T,
    /// Inclination ι, rad.
    pub inclination: T,
    /// Longitude of the ascending node Ω₀ at epoch, rad.
    pub raan: T,
    /// Argument of perigee ω₀ at epoch, rad.
    pub arg_perigee: T,
    /// True anomaly ν₀ at epoch, rad.
    pub true_anomaly: T,
    /// Reference time, simulation seconds.
    pub epoch: T,
}

impl<T: Scalar> OrbitalElements<T> {
    /// Builds and validates elements against the standard Earth radius.
    /// Angles are wrapped to `[-π, π)` (inclination is kept as given).
    pub fn new(
        semi_major_axis: T,
        eccentricity: T,
        inclination: T,
        raan: T,
        arg_perigee: T,
        true_anomaly: T,
        epoch: T,
    ) -> Result<Self> {
        let el = Self {
            semi_major_axis,
            eccentricity,
            inclination,
            raan: wrap_angle(raan),
            arg_perigee: wrap_angle(arg_perigee),
            true_anomaly: wrap_angle(true_anomaly),
            epoch,
        };
        el.validate(&EarthConstants::standard())?;
        Ok(el)
    }

    /// Circular orbit at `altitude` km above the surface.
    pub fn circular(altitude: T, inclination: T, raan: T, anomaly: T) -> Result<Self> {
        let c = EarthConstants::<T>::standard();
        Self::new(c.radius + altitude, T::zero(), inclination, raan, T::zero(), anomaly, T::zero())
    }

    /// Elements from apogee and perigee radii, via a = (R_a+R_p)/2 and
    /// e = (R_a−R_p)/(R_a+R_p).
    pub fn from_apsides(
        apogee: T,
        perigee: T,
        inclination: T,
        raan: T,
        arg_perigee: T,
        true_anomaly: T,
    ) -> Result<Self> {
        if apogee < perigee {
            return Err(Error::InvalidElements(format!("apogee {apogee} below perigee {perigee}")));
        }
        let sum = apogee + perigee;
        Self::new(
            sum / T::lit(2.0),
            (apogee - perigee) / sum,
            inclination,
            raan,
            arg_perigee,
            true_anomaly,
            T::zero(),
        )
    }

    pub fn validate(&self, c: &EarthConstants<T>) -> Result<()> {
        let vals = [
            self.semi_major_axis,
            self.eccentricity,
            self.inclination,
            self.raan,
            self.arg_perigee,
            self.true_anomaly,
            self.epoch,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidElements("non-finite element".into()));
        }
        if !(self.eccentricity >= T::zero() && self.eccentricity < T::one()) {
            return Err(Error::InvalidElements(format!(
                "eccentricity {} outside [0, 1)",
                self.eccentricity
            )));
        }
        if self.perigee_radius() <= c.radius {
            return Err(Error::InvalidElements(format!(
                "perigee radius {} km not above Earth radius {} km",
                self.perigee_radius(),
                c.radius
            )));
        }
        Ok(())
    }

    pub fn apogee_radius(&self) -> T {
        self.semi_major_axis * (T::one() + self.eccentricity)
    }

    pub fn perigee_radius(&self) -> T {
        self.semi_major_axis * (T::one() - self.eccentricity)
    }
}

/// Position in the non-rotating geocentric frame, km.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InertialState<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> InertialState<T> {
    pub fn norm(&self) -> T {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

/// Geographic position in the Earth-rotating frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoState<T> {
    /// Latitude θ_r in [−π/2, π/2].
    pub lat: T,
    /// Longitude φ_r in [−π, π), Earth rotation removed.
    pub lon: T,
    /// Geocentric radius, km.
    pub radius: T,
}

impl<T: Scalar> GeoState<T> {
    /// Cartesian position in the rotating frame, km.
    pub fn to_cartesian(&self) -> [T; 3] {
        crate::frames::sph_to_cart(self.lon, self.lat, self.radius)
    }
}

/// Secularly perturbed mean motion n̄ (rad/s) and the J2 factor p̄.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecularRates<T> {
    pub mean_motion: T,
    pub j2_factor: T,
}

impl<T: Scalar> SecularRates<T> {
    /// Node drift dΩ/dt, rad/s.
    pub fn node_rate(&self, inclination: T) -> T {
        -self.mean_motion * self.j2_factor * inclination.cos()
    }

    /// Perigee drift dω/dt, rad/s.
    pub fn perigee_rate(&self, inclination: T) -> T {
        let s = inclination.sin();
        self.mean_motion * self.j2_factor * (T::lit(2.0) - T::lit(2.5) * s * s)
    }
}

pub fn secular_rates<T: Scalar>(el: &OrbitalElements<T>, c: &EarthConstants<T>) -> SecularRates<T> {
    let a = el.semi_major_axis;
    let e2 = el.eccentricity * el.eccentricity;
    let one_m_e2 = T::one() - e2;
    let j2_factor =
        T::lit(3.0) * c.j2 * c.radius * c.radius / (T::lit(2.0) * a * a * one_m_e2 * one_m_e2);
    let s = el.inclination.sin();
    let kepler = (c.mu() / (a * a * a)).sqrt();
    let mean_motion =
        kepler * (T::one() + j2_factor * (T::one() - T::lit(1.5) * s * s) * one_m_e2.sqrt());
    SecularRates { mean_motion, j2_factor }
}

/// Node longitude Ω(t) and argument of perigee ω(t), both wrapped to `[-π, π)`.
/// `t` is seconds since epoch and may be negative.
pub fn perturbed_node_perigee<T: Scalar>(
    el: &OrbitalElements<T>,
    rates: &SecularRates<T>,
    t: T,
) -> (T, T) {
    let raan = el.raan + t * rates.node_rate(el.inclination);
    let argp = el.arg_perigee + t * rates.perigee_rate(el.inclination);
    (wrap_angle(raan), wrap_angle(argp))
}

const KEPLER_MAX_ITER: usize = 50;

/// Solves Kepler's equation `E − e·sin E = M` for any real `M`.
///
/// The whole revolutions of `M` are carried through unchanged so that
/// `E` stays in the same revolution as `M`.
pub fn solve_kepler<T: Scalar>(mean_anomaly: T, e: T) -> Result<T> {
    if !(e >= T::zero() && e < T::one()) {
        return Err(Error::InvalidInput(format!("eccentricity {e} outside [0, 1)")));
    }
    if !mean_anomaly.is_finite() {
        return Err(Error::InvalidInput("non-finite mean anomaly".into()));
    }
    if e == T::zero() {
        return Ok(mean_anomaly);
    }
    let two_pi = T::TAU();
    let revs = (mean_anomaly / two_pi).floor();
    let m = mean_anomaly - revs * two_pi;
    let base = revs * two_pi;
    let tol = T::solver_tolerance();

    let mut ecc = if e > T::lit(0.8) { T::PI() } else { m };
    for _ in 0..KEPLER_MAX_ITER {
        let f = ecc - e * ecc.sin() - m;
        let df = T::one() - e * ecc.cos();
        let step = f / df;
        ecc = ecc - step;
        if step.abs() < tol {
            return Ok(base + ecc);
        }
    }

    // |E − M| ≤ e brackets the root.
    let (mut lo, mut hi) = (m - e, m + e);
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        let f = mid - e * mid.sin() - m;
        if f.abs() < tol || (hi - lo) < tol {
            return Ok(base + mid);
        }
        if f > T::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(Error::NoConvergence { solver: "kepler", iterations: KEPLER_MAX_ITER + 200 })
}

/// Eccentric anomaly `E(t)` from `E₀`: `E − e sin E = E₀ − e sin E₀ + n̄·t`.
pub fn solve_eccentric_anomaly<T: Scalar>(e0: T, e: T, mean_motion: T, t: T) -> Result<T> {
    let m = e0 - e * e0.sin() + mean_motion * t;
    solve_kepler(m, e)
}

fn half_angle_beta<T: Scalar>(e: T) -> T {
    e / (T::one() + (T::one() - e * e).sqrt())
}

/// True anomaly from eccentric anomaly, `tan(ν/2) = √((1+e)/(1−e))·tan(E/2)`.
///
/// Evaluated as `ν = E + 2·atan2(β sin E, 1 − β cos E)`, which keeps `ν`
/// in the same revolution as `E` and is exact for `e = 0`.
pub fn true_from_eccentric<T: Scalar>(ecc_anomaly: T, e: T) -> T {
    let b = half_angle_beta(e);
    let two = T::lit(2.0);
    ecc_anomaly + two * (b * ecc_anomaly.sin()).atan2(T::one() - b * ecc_anomaly.cos())
}

/// Inverse of [`true_from_eccentric`].
pub fn eccentric_from_true<T: Scalar>(true_anomaly: T, e: T) -> T {
    let b = half_angle_beta(e);
    let two = T::lit(2.0);
    true_anomaly - two * (b * true_anomaly.sin()).atan2(T::one() + b * true_anomaly.cos())
}

/// Geocentric distance at true anomaly `nu`, km.
pub fn orbital_radius<T: Scalar>(el: &OrbitalElements<T>, nu: T) -> T {
    let e = el.eccentricity;
    el.semi_major_axis * (T::one() - e * e) / (T::one() + e * nu.cos())
}

/// Position from the rotation chain Rz(Ω)·Rx(ι)·Rz(ω+ν) applied to (R, 0, 0).
pub fn inertial_position<T: Scalar>(raan: T, arg_perigee: T, nu: T, inc: T, r: T) -> InertialState<T> {
    let u = arg_perigee + nu;
    let (su, cu) = u.sin_cos();
    let (so, co) = raan.sin_cos();
    let (si, ci) = inc.sin_cos();
    InertialState {
        x: r * (cu * co - su * so * ci),
        y: r * (cu * so + su * co * ci),
        z: r * su * si,
    }
}

/// Latitude/longitude in the rotating frame at simulation time `t`.
/// At the poles the longitude is reported as 0.
pub fn rotating_geographic<T: Scalar>(s: &InertialState<T>, t: T, c: &EarthConstants<T>) -> Result<GeoState<T>> {
    let radius = s.norm();
    if !(radius > T::zero()) {
        return Err(Error::Degenerate("zero-norm inertial position".into()));
    }
    let rho = s.x.hypot(s.y);
    let lat = s.z.atan2(rho);
    let lon = if rho == T::zero() {
        T::zero()
    } else {
        wrap_angle(s.y.atan2(s.x) - c.rotation_rate * t)
    };
    Ok(GeoState { lat, lon, radius })
}

/// Full state of a satellite at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitState<T> {
    pub raan: T,
    pub arg_perigee: T,
    pub eccentric_anomaly: T,
    pub true_anomaly: T,
    pub radius: T,
    pub inertial: InertialState<T>,
    pub geo: GeoState<T>,
}

/// Orbit bound to a set of constants, with the epoch-dependent quantities
/// precomputed.
#[derive(Debug, Clone, Copy)]
pub struct Propagator<T> {
    elements: OrbitalElements<T>,
    constants: EarthConstants<T>,
    rates: SecularRates<T>,
    e0: T,
}

impl<T: Scalar> Propagator<T> {
    pub fn new(elements: OrbitalElements<T>, constants: EarthConstants<T>) -> Result<Self> {
        elements.validate(&constants)?;
        let rates = secular_rates(&elements, &constants);
        let e0 = eccentric_from_true(elements.true_anomaly, elements.eccentricity);
        Ok(Self { elements, constants, rates, e0 })
    }

    pub fn elements(&self) -> &OrbitalElements<T> {
        &self.elements
    }

    pub fn constants(&self) -> &EarthConstants<T> {
        &self.constants
    }

    pub fn rates(&self) -> &SecularRates<T> {
        &self.rates
    }

    pub fn state_at(&self, t: T) -> Result<OrbitState<T>> {
        if !t.is_finite() {
            return Err(Error::InvalidInput("non-finite propagation time".into()));
        }
        let el = &self.elements;
        let dt = t - el.epoch;
        let (raan, argp) = perturbed_node_perigee(el, &self.rates, dt);
        let ecc = solve_eccentric_anomaly(self.e0, el.eccentricity, self.rates.mean_motion, dt)?;
        let nu = if dt == T::zero() { el.true_anomaly } else { true_from_eccentric(ecc, el.eccentricity) };
        let radius = orbital_radius(el, nu);
        let inertial = inertial_position(raan, argp, nu, el.inclination, radius);
        let geo = rotating_geographic(&inertial, t, &self.constants)?;
        Ok(OrbitState { raan, arg_perigee: argp, eccentric_anomaly: ecc, true_anomaly: nu, radius, inertial, geo })
    }

    /// Satellite position in the rotating Cartesian frame at time `t`, km.
    pub fn rotating_position(&self, t: T) -> Result<[T; 3]> {
        Ok(self.state_at(t)?.geo.to_cartesian())
    }
}

/// Geographic track at the requested simulation times.
pub fn propagate<T: Scalar>(
    el: &OrbitalElements<T>,
    times: &[T],
    c: &EarthConstants<T>,
) -> Result<Vec<GeoState<T>>> {
    let prop = Propagator::new(*el, *c)?;
    times.iter().map(|&t| prop.state_at(t).map(|s| s.geo)).collect()
}
