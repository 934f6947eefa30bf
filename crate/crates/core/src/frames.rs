//! Terminal-centric East-North-Up frame and satellite attitude angles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orbit::Propagator;
use crate::scalar::Scalar;

pub type Vec3<T> = [T; 3];
pub type Mat3<T> = [[T; 3]; 3];

/// Step used to difference the satellite track into a direction of travel, s.
pub const ORIENTATION_DT: f64 = 1e-3;

/// Reference point of the tangential plane. Positions are on a sphere of
/// radius `radius` (km); antenna height above ground is handled by the
/// propagation environment, not here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminalLocation<T> {
    /// Longitude φ_u, rad.
    pub lon: T,
    /// Latitude θ_u, rad.
    pub lat: T,
    /// km
    pub radius: T,
}

impl<T: Scalar> TerminalLocation<T> {
    /// Terminal on the standard Earth sphere.
    pub fn new(lon: T, lat: T) -> Result<Self> {
        let half_pi = T::FRAC_PI_2();
        if !(lat >= -half_pi && lat <= half_pi) || !lon.is_finite() {
            return Err(Error::InvalidInput(format!("terminal latitude {lat} / longitude {lon}")));
        }
        Ok(Self { lon, lat, radius: crate::orbit::EarthConstants::<T>::standard().radius })
    }

    pub fn from_degrees(lon_deg: T, lat_deg: T) -> Result<Self> {
        Self::new(lon_deg.to_radians(), lat_deg.to_radians())
    }

    pub fn cartesian(&self) -> Vec3<T> {
        sph_to_cart(self.lon, self.lat, self.radius)
    }
}

/// Satellite position and attitude as seen from a terminal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MtFrameState<T> {
    /// East, km.
    pub x: T,
    /// North, km.
    pub y: T,
    /// Up, km.
    pub z: T,
    pub elevation: T,
    pub bank: T,
    pub heading: T,
    pub tilt: T,
}

impl<T: Scalar> MtFrameState<T> {
    pub fn position(&self) -> Vec3<T> {
        [self.x, self.y, self.z]
    }

    /// Straight-line distance terminal–satellite, km.
    pub fn range(&self) -> T {
        norm(&self.position())
    }

    /// Azimuth of the satellite, rad from east towards north.
    pub fn azimuth(&self) -> T {
        self.y.atan2(self.x)
    }

    pub fn is_visible(&self) -> bool {
        self.z > T::zero()
    }
}

pub fn sph_to_cart<T: Scalar>(phi: T, theta: T, r: T) -> Vec3<T> {
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    [r * cp * ct, r * sp * ct, r * st]
}

/// Inverse of [`sph_to_cart`]: `(phi, theta, r)`.
pub fn cart_to_sph<T: Scalar>(v: &Vec3<T>) -> (T, T, T) {
    let rho = v[0].hypot(v[1]);
    (v[1].atan2(v[0]), v[2].atan2(rho), norm(v))
}

/// Rotation from the geographic Cartesian frame to East-North-Up at `u`.
pub fn rotation_to_mt_frame<T: Scalar>(u: &TerminalLocation<T>) -> Mat3<T> {
    let (sp, cp) = u.lon.sin_cos();
    let (st, ct) = u.lat.sin_cos();
    [
        [-sp, cp, T::zero()],
        [-st * cp, -st * sp, ct],
        [ct * cp, ct * sp, st],
    ]
}

/// Satellite position (rotating frame, km) expressed in the terminal frame.
pub fn to_mt_frame<T: Scalar>(sat: &Vec3<T>, u: &TerminalLocation<T>) -> Vec3<T> {
    let uc = u.cartesian();
    let d = [sat[0] - uc[0], sat[1] - uc[1], sat[2] - uc[2]];
    mat_vec(&rotation_to_mt_frame(u), &d)
}

/// Elevation of a terminal-frame position; the satellite is visible iff `z > 0`.
pub fn elevation<T: Scalar>(q: &Vec3<T>) -> Result<T> {
    if q.iter().all(|c| *c == T::zero()) {
        return Err(Error::Degenerate("satellite coincides with terminal".into()));
    }
    Ok(q[2].atan2(q[0].hypot(q[1])))
}

/// Bank, heading and tilt from two rotating-frame positions `dt` apart.
///
/// The heading is undefined when the direction of travel is vertical in the
/// terminal frame; 0 is returned in that case and the tilt carries the
/// information.
pub fn orientation<T: Scalar>(
    sat_t: &Vec3<T>,
    sat_t_dt: &Vec3<T>,
    u: &TerminalLocation<T>,
) -> Result<(T, T, T)> {
    let d = sub(sat_t_dt, sat_t);
    let d_len = norm(&d);
    let r_len = norm(sat_t);
    if !(d_len > T::zero()) || !(r_len > T::zero()) {
        return Err(Error::Degenerate("zero-length direction of travel".into()));
    }
    let d_hat = scale(&d, T::one() / d_len);
    let r_hat = scale(sat_t, T::one() / r_len);
    let uc = u.cartesian();
    let u_hat = scale(&uc, T::one() / norm(&uc));

    let bank = clamp_unit(dot(&u_hat, &cross(&r_hat, &d_hat))).asin();
    let dq = mat_vec(&rotation_to_mt_frame(u), &d_hat);
    let horiz = dq[0].hypot(dq[1]);
    let heading = if horiz <= T::epsilon() { T::zero() } else { dq[1].atan2(dq[0]) };
    let tilt = dq[2].atan2(horiz);
    Ok((bank, heading, tilt))
}

/// Terminal-frame position, elevation and attitude of a propagated satellite.
pub fn mt_state<T: Scalar>(prop: &Propagator<T>, t: T, u: &TerminalLocation<T>) -> Result<MtFrameState<T>> {
    let r0 = prop.rotating_position(t)?;
    let r1 = prop.rotating_position(t + T::lit(ORIENTATION_DT))?;
    mt_state_from_positions(&r0, &r1, u)
}

/// As [`mt_state`] but from precomputed rotating-frame positions at `t` and
/// `t + ORIENTATION_DT`.
pub fn mt_state_from_positions<T: Scalar>(
    r0: &Vec3<T>,
    r1: &Vec3<T>,
    u: &TerminalLocation<T>,
) -> Result<MtFrameState<T>> {
    let q = to_mt_frame(r0, u);
    let elevation = elevation(&q)?;
    let (bank, heading, tilt) = orientation(r0, r1, u)?;
    Ok(MtFrameState { x: q[0], y: q[1], z: q[2], elevation, bank, heading, tilt })
}

fn clamp_unit<T: Scalar>(x: T) -> T {
    x.max(-T::one()).min(T::one())
}

pub(crate) fn mat_vec<T: Scalar>(m: &Mat3<T>, v: &Vec3<T>) -> Vec3<T> {
    [dot(&m[0], v), dot(&m[1], v), dot(&m[2], v)]
}

#[cfg(test)]
pub(crate) fn transpose<T: Scalar>(m: &Mat3<T>) -> Mat3<T> {
    [
        [m[0][0], m[1][0], m[2][0]],
        [m[0][1], m[1][1], m[2][1]],
        [m[0][2], m[1][2], m[2][2]],
    ]
}

pub(crate) fn dot<T: Scalar>(a: &Vec3<T>, b: &Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross<T: Scalar>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn sub<T: Scalar>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn scale<T: Scalar>(a: &Vec3<T>, k: T) -> Vec3<T> {
    [a[0] * k, a[1] * k, a[2] * k]
}

pub(crate) fn norm<T: Scalar>(a: &Vec3<T>) -> T {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbit::{secular_rates, EarthConstants, OrbitalElements};
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    const RE: f64 = 6378.137;

    fn det(m: &Mat3<f64>) -> f64 {
        dot(&m[0], &cross(&m[1], &m[2]))
    }

    #[test]
    fn sph_examples() {
        assert_eq!(sph_to_cart(0.0, 0.0, RE), [RE, 0.0, 0.0]);
        let v = sph_to_cart(FRAC_PI_2, 0.0, 1.0);
        assert!(v[0].abs() < 1e-16 && (v[1] - 1.0).abs() < 1e-16 && v[2] == 0.0);
        let (phi, theta, r): (f64, f64, f64) = cart_to_sph(&sph_to_cart(0.3, 0.5, 7000.0));
        assert!((phi - 0.3).abs() < 1e-12 && (theta - 0.5).abs() < 1e-12 && (r - 7000.0).abs() < 1e-9);
    }

    #[test]
    fn rotation_examples() {
        let u = TerminalLocation::new(0.0, 0.0).unwrap();
        let m = rotation_to_mt_frame(&u);
        let expected = [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]];
        for (row, want) in m.iter().zip(&expected) {
            for (a, b) in row.iter().zip(want) {
                assert_eq!(f64::abs(*a), *b);
            }
        }
        let pole = TerminalLocation::new(0.0, FRAC_PI_2).unwrap();
        let m = rotation_to_mt_frame(&pole);
        assert!(m[2][0].abs() < 1e-16 && m[2][1] == 0.0 && m[2][2] == 1.0);
    }

    #[test]
    fn zenith_and_coincident() {
        let u = TerminalLocation::from_degrees(13.4, 52.5).unwrap();
        let sat = sph_to_cart(u.lon, u.lat, RE + 600.0);
        let q = to_mt_frame(&sat, &u);
        assert!(q[0].abs() < 1e-9 && q[1].abs() < 1e-9 && (q[2] - 600.0).abs() < 1e-9);
        assert_eq!(elevation(&[0.0, 0.0, 600.0]).unwrap(), FRAC_PI_2);
        let q = to_mt_frame(&u.cartesian(), &u);
        assert_eq!(q, [0.0, 0.0, 0.0]);
        assert!(elevation(&q).is_err());
    }

    #[test]
    fn small_eastward_displacement() {
        let u = TerminalLocation::new(0.0, 0.0).unwrap();
        let eps = 1e-4;
        let q = to_mt_frame(&sph_to_cart(eps, 0.0, RE), &u);
        assert!((q[0] - RE * eps.sin()).abs() < 1e-9);
        assert!(q[1].abs() < 1e-12);
        assert!(q[2] < 0.0);
        assert!((q[2] + RE * eps * eps / 2.0).abs() < 1e-6);
    }

    #[test]
    fn elevation_examples() {
        assert!((elevation(&[100.0, 0.0, 100.0]).unwrap() - FRAC_PI_4).abs() < 1e-15);
        let a = elevation(&[100.0, 0.0, -5.0]).unwrap();
        assert!((a - (-5.0f64 / 100.0).atan()).abs() < 1e-15);
        assert!((a + 0.04996).abs() < 1e-5);
    }

    fn nadir_terminal(prop: &Propagator<f64>, t: f64) -> TerminalLocation<f64> {
        let g = prop.state_at(t).unwrap().geo;
        TerminalLocation::new(g.lon, g.lat).unwrap()
    }

    #[test]
    fn equatorial_prograde_at_nadir() {
        let prop = Propagator::new(OrbitalElements::circular(550.0, 0.0, 0.0, 0.3).unwrap(), EarthConstants::standard()).unwrap();
        for t in [0.0, 400.0, 2500.0] {
            let u = nadir_terminal(&prop, t);
            let s = mt_state(&prop, t, &u).unwrap();
            assert!(s.bank.abs() < 1e-12, "{}", s.bank);
            assert!(s.heading.abs() < 1e-9, "{}", s.heading);
            assert!(s.tilt.abs() < 1e-6, "{}", s.tilt);
        }
    }

    #[test]
    fn equatorial_retrograde_heads_west() {
        let prop = Propagator::new(OrbitalElements::circular(550.0, PI, 0.0, 0.3).unwrap(), EarthConstants::standard()).unwrap();
        let u = nadir_terminal(&prop, 100.0);
        let s = mt_state(&prop, 100.0, &u).unwrap();
        assert!((s.heading.abs() - PI).abs() < 1e-9, "{}", s.heading);
    }

    #[test]
    fn polar_ascending_heads_north() {
        // Earth rotation adds a westward rate ω_e to the apparent motion; the
        // along-track rate is n̄ plus the perigee drift.
        let c = EarthConstants::standard();
        let el = OrbitalElements::circular(550.0, FRAC_PI_2, 0.0, 0.0).unwrap();
        let prop = Propagator::new(el, c).unwrap();
        let u = nadir_terminal(&prop, 0.0);
        let s = mt_state(&prop, 0.0, &u).unwrap();
        let rates = secular_rates(&el, &c);
        let along = rates.mean_motion + rates.perigee_rate(el.inclination);
        let want = along.atan2(-c.rotation_rate);
        assert!((s.heading - want).abs() < 1e-6, "{} vs {want}", s.heading);

        let still = c.without_rotation();
        let prop = Propagator::new(el, still).unwrap();
        let s = mt_state(&prop, 0.0, &nadir_terminal(&prop, 0.0)).unwrap();
        assert!((s.heading - FRAC_PI_2).abs() < 1e-9, "{}", s.heading);
    }

    #[test]
    fn vertical_motion_heading_convention() {
        let u = TerminalLocation::new(0.0, 0.0).unwrap();
        let r0 = [RE + 500.0, 0.0, 0.0];
        let r1 = [RE + 501.0, 0.0, 0.0];
        let (_, heading, tilt) = orientation(&r0, &r1, &u).unwrap();
        assert_eq!(heading, 0.0);
        assert!((tilt - FRAC_PI_2).abs() < 1e-12);
        assert!(orientation(&r0, &r0, &u).is_err());
    }

    #[test]
    fn pass_is_continuous() {
        let c = EarthConstants::standard();
        let prop = Propagator::new(OrbitalElements::circular(550.0, 53f64.to_radians(), 0.0, 0.0).unwrap(), c).unwrap();
        let u = TerminalLocation::from_degrees(20.0, 30.0).unwrap();
        let mut prev: Option<MtFrameState<f64>> = None;
        let mut visible = 0;
        for k in 0..86400 {
            let s = mt_state(&prop, k as f64, &u).unwrap();
            if !s.is_visible() {
                prev = None;
                continue;
            }
            visible += 1;
            if let Some(p) = prev {
                for (a, b) in [(s.bank, p.bank), (s.tilt, p.tilt), (s.elevation, p.elevation)] {
                    assert!((a - b).abs() < 1f64.to_radians());
                }
                let dh = crate::scalar::wrap_angle(s.heading - p.heading);
                assert!(dh.abs() < 1f64.to_radians());
            }
            prev = Some(s);
        }
        assert!(visible > 0);
    }

    #[test]
    fn f32_frame() {
        let u = TerminalLocation::<f32>::from_degrees(10.0, 45.0).unwrap();
        let m = rotation_to_mt_frame(&u);
        let sat = sph_to_cart(u.lon, u.lat, u.radius + 550.0);
        let q = mat_vec(&m, &sub(&sat, &u.cartesian()));
        assert!((q[2] - 550.0).abs() < 1e-2);
    }

    proptest! {
        #[test]
        fn orthonormal(lon in -PI..PI, lat in -FRAC_PI_2..FRAC_PI_2) {
            let m = rotation_to_mt_frame(&TerminalLocation::new(lon, lat).unwrap());
            for i in 0..3 {
                for j in 0..3 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((dot(&m[i], &m[j]) - want).abs() < 1e-12);
                }
            }
            prop_assert!((det(&m) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn round_trip_and_rigid(lon in -PI..PI, lat in -FRAC_PI_2..FRAC_PI_2,
                                 x in -5e4..5e4f64, y in -5e4..5e4f64, z in -5e4..5e4f64) {
            let u = TerminalLocation::new(lon, lat).unwrap();
            let m = rotation_to_mt_frame(&u);
            let v = [x, y, z];
            let back = mat_vec(&transpose(&m), &mat_vec(&m, &v));
            for k in 0..3 {
                prop_assert!((back[k] - v[k]).abs() < 1e-12 * (1.0 + norm(&v)));
            }
            let q = to_mt_frame(&v, &u);
            let d = norm(&sub(&v, &u.cartesian()));
            prop_assert!((norm(&q) - d).abs() < 1e-9 * (1.0 + d));
        }

        #[test]
        fn elevation_sign_matches_visibility(x in -1e4..1e4f64, y in -1e4..1e4f64, z in -1e4..1e4f64) {
            prop_assume!(z != 0.0);
            let a = elevation(&[x, y, z]).unwrap();
            prop_assert_eq!(a > 0.0, z > 0.0);
        }
    }
}
