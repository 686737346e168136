//! Two-body helpers: state vectors at a given radius and elements from states.

use nalgebra::{Rotation3, Vector3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Elements {
    pub a_km: f64,
    pub e: f64,
    pub i_deg: f64,
}

/// Osculating (a, e, i); `None` when the orbit is unbound.
pub fn elements_from_state(r: &Vector3<f64>, v: &Vector3<f64>, mu: f64) -> Option<Elements> {
    let rn = r.norm();
    let energy = 0.5 * v.norm_squared() - mu / rn;
    if energy >= 0.0 {
        return None;
    }
    let h = r.cross(v);
    let e_vec = v.cross(&h) / mu - r / rn;
    let e = e_vec.norm();
    if e >= 1.0 {
        return None;
    }
    let i = (h.z / h.norm()).clamp(-1.0, 1.0).acos();
    Some(Elements {
        a_km: -mu / (2.0 * energy),
        e,
        i_deg: i.to_degrees(),
    })
}

/// True anomaly (0..=π) at which an orbit passes radius `r`, with the
/// radius clamped into the apsidal range.
pub fn true_anomaly_at_radius(a: f64, e: f64, r: f64) -> f64 {
    if e <= 0.0 {
        return 0.0;
    }
    let p = a * (1.0 - e * e);
    ((p / r - 1.0) / e).clamp(-1.0, 1.0).acos()
}

/// Inertial position and velocity at true anomaly `nu` for the given
/// angles (radians).
pub fn state_at(a: f64, e: f64, inc: f64, raan: f64, argp: f64, nu: f64, mu: f64) -> (Vector3<f64>, Vector3<f64>) {
    let p = a * (1.0 - e * e);
    let r = p / (1.0 + e * nu.cos());
    let k = (mu / p).sqrt();
    let r_pf = Vector3::new(r * nu.cos(), r * nu.sin(), 0.0);
    let v_pf = Vector3::new(-k * nu.sin(), k * (e + nu.cos()), 0.0);
    let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), raan)
        * Rotation3::from_axis_angle(&Vector3::x_axis(), inc)
        * Rotation3::from_axis_angle(&Vector3::z_axis(), argp);
    (rot * r_pf, rot * v_pf)
}

/// Mean anomaly as a function of true anomaly on `[0, π]`; `g(π) = π`.
pub fn mean_anomaly(theta: f64, e: f64) -> f64 {
    let half = 0.5 * theta;
    let ecc_anom = 2.0 * ((1.0 - e).sqrt() * half.sin()).atan2((1.0 + e).sqrt() * half.cos());
    ecc_anom - e * (1.0 - e * e).sqrt() * theta.sin() / (1.0 + e * theta.cos())
}

/// Eccentric anomaly for mean anomaly `m` (radians), e < 1.
pub fn eccentric_anomaly(m: f64, e: f64) -> f64 {
    let mut ea = if e < 0.8 { m } else { std::f64::consts::PI };
    for _ in 0..50 {
        let f = ea - e * ea.sin() - m;
        let step = f / (1.0 - e * ea.cos());
        ea -= step;
        if step.abs() < 1e-14 {
            break;
        }
    }
    ea
}
