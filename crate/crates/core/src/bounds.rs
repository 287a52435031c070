//! Cloning bounds: scalar maps from Bob-side distances to lower bounds on
//! the fidelity between Eve's conditional z-basis states.
//!
//! The scalar maps (`f_theta`, `g_alpha`, `f2_phi`) take already-normalised
//! arguments; dividing observed distances by `|cos α|`/`|cos β|` and the
//! associated range checks happen in the `fidelity_bound_*` wrappers.

use serde::{Deserialize, Serialize};

use crate::error::{domain_err, Error, Result};
use crate::source::{OverlapCharacterization, QubitSourceAngles};

/// Round-off allowance at the edge of a domain.
const EDGE_TOL: f64 = 1e-12;
/// Allowance when a normalised distance overshoots 1.
const NORMALISED_TOL: f64 = 1e-9;

/// Lower bounds on the Bob-side trace distances certified by the observed
/// error rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DisturbanceBounds {
    pub z_lower: f64,
    pub x_lower: f64,
}

impl DisturbanceBounds {
    pub fn from_error_rates(delta_z: f64, delta_x: f64) -> Result<Self> {
        Ok(Self {
            z_lower: helstrom_lower(delta_z)?,
            x_lower: helstrom_lower(delta_x)?,
        })
    }
}

fn unit_interval(name: &str, x: f64) -> Result<f64> {
    if x.is_nan() || !(-EDGE_TOL..=1.0 + EDGE_TOL).contains(&x) {
        return domain_err(format!("{name} = {x} outside [0, 1]"));
    }
    Ok(x.clamp(0.0, 1.0))
}

fn sqrt_checked(x: f64) -> Result<f64> {
    if x < -EDGE_TOL {
        return domain_err(format!("negative radicand {x}"));
    }
    Ok(x.max(0.0).sqrt())
}

/// `√(1 − x²)` for `x ∈ [0, 1]`.
fn co(x: f64) -> f64 {
    ((1.0 - x) * (1.0 + x)).max(0.0).sqrt()
}

/// Helstrom: an error rate `δ` certifies a trace distance of at least `|1 − 2δ|`.
pub fn helstrom_lower(delta: f64) -> Result<f64> {
    let delta = unit_interval("error rate", delta)?;
    Ok((1.0 - 2.0 * delta).abs())
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta <= std::f64::consts::FRAC_PI_2 + EDGE_TOL) {
        return domain_err(format!("angle {theta} outside (0, π/2]"));
    }
    Ok(())
}

/// `f_θ(v) = |sin θ| v − |cos θ| √(1 − v²)` above `v = |cos θ|`, zero below.
pub fn f_theta(theta: f64, v: f64) -> Result<f64> {
    check_theta(theta)?;
    f_angle(theta, v)
}

/// Same map without the `(0, π/2]` restriction, used with the basis angle
/// `φ ∈ (0, π)` through absolute values.
pub(crate) fn f_angle(angle: f64, v: f64) -> Result<f64> {
    let v = unit_interval("v", v)?;
    let (s, c) = (angle.sin().abs(), angle.cos().abs());
    if v <= c {
        return Ok(0.0);
    }
    Ok((s * v - c * co(v)).clamp(0.0, 1.0))
}

/// `g_α(x) = (1 + |sin α|) x − |sin α|` above `x = 2|sin α|/(1 + |sin α|)`,
/// `|sin α|` below.
pub fn g_alpha(alpha: f64, x: f64) -> Result<f64> {
    if !alpha.is_finite() {
        return domain_err("α must be finite");
    }
    let x = unit_interval("x", x)?;
    let s = alpha.sin().abs();
    let knee = 2.0 * s / (1.0 + s);
    if x <= knee {
        Ok(s)
    } else {
        Ok(((1.0 + s) * x - s).min(1.0))
    }
}

/// `F ≥ f_θ(D(σ_B, σ′_B))` for an arbitrary source.
pub fn fidelity_bound_arbitrary(theta: &OverlapCharacterization, x_lower: f64) -> Result<f64> {
    match theta.theta() {
        Some(t) => f_theta(t, x_lower),
        None => Err(Error::CertificationUnavailable(format!(
            "√2·Δ = {:.12} ≤ 1: no overlap angle, the f_θ bound does not apply",
            std::f64::consts::SQRT_2 * theta.delta
        ))),
    }
}

/// Divides a distance by `|cos angle|`, tolerating overshoot up to 1e-9.
fn normalise(name: &str, distance: f64, angle: f64) -> Result<f64> {
    let distance = unit_interval(name, distance)?;
    let c = angle.cos().abs();
    if c <= EDGE_TOL {
        return Err(Error::DegenerateSource(format!(
            "|cos| of the {name} basis angle vanishes: the basis states coincide"
        )));
    }
    let r = distance / c;
    if r > 1.0 + NORMALISED_TOL {
        return domain_err(format!(
            "{name} distance {distance} exceeds |cos| = {c} of its basis angle"
        ));
    }
    Ok(r.min(1.0))
}

/// `F ≥ g_α ∘ f_φ(D(σ_B, σ′_B)/|cos β|)` for a qubit source.
pub fn fidelity_bound_qubit(angles: &QubitSourceAngles, x_lower: f64) -> Result<f64> {
    let v = normalise("x-basis", x_lower, angles.beta_angle)?;
    g_alpha(angles.alpha_angle, f_angle(angles.phi_angle, v)?)
}

/// `q(z, v) = z v − √((1 − z²)(1 − v²))`
pub fn q_zv(z: f64, v: f64) -> f64 {
    z * v - co(z) * co(v)
}

/// Two-sided bound for a qubit source and a two-dimensional detector.
///
/// Uses `h_φ(z, v)`, defined by
/// `|sin φ| √(1 − h²) = √(1 − v²) + |cos φ| √(1 − z²)`, wherever
/// `q(z, v) ≥ |cos φ|` and `f_φ(v)` elsewhere.
pub fn f2_phi(phi: f64, z: f64, v: f64) -> Result<f64> {
    let z = unit_interval("z", z)?;
    let v = unit_interval("v", v)?;
    let (s, c) = (phi.sin().abs(), phi.cos().abs());
    if !phi.is_finite() || s <= EDGE_TOL {
        return Err(Error::DegenerateSource(
            "sin φ = 0: the bases share an axis".into(),
        ));
    }
    if q_zv(z, v) >= c {
        let ratio = (co(v) + c * co(z)) / s;
        sqrt_checked(1.0 - ratio * ratio).map(|h| h.min(1.0))
    } else {
        f_angle(phi, v)
    }
}

/// `F ≥ g_α ∘ f⁽²⁾_φ(D(ρ_B, ρ′_B)/|cos α|, D(σ_B, σ′_B)/|cos β|)`.
pub fn fidelity_bound_qubit_dim2(
    angles: &QubitSourceAngles,
    z_lower: f64,
    x_lower: f64,
) -> Result<f64> {
    let z = normalise("z-basis", z_lower, angles.alpha_angle)?;
    let v = normalise("x-basis", x_lower, angles.beta_angle)?;
    g_alpha(angles.alpha_angle, f2_phi(angles.phi_angle, z, v)?)
}

/// `D_E² + D_B² ≤ 1`, with 1e-9 slack.
pub fn fuchs_relation_check(d_e: f64, d_b: f64) -> bool {
    d_e * d_e + d_b * d_b <= 1.0 + 1e-9
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_3, FRAC_PI_4};

    #[test]
    fn helstrom_examples() {
        assert_eq!(helstrom_lower(0.0).unwrap(), 1.0);
        assert_eq!(helstrom_lower(0.5).unwrap(), 0.0);
        assert!((helstrom_lower(0.05).unwrap() - 0.9).abs() < 1e-15);
        assert!(matches!(helstrom_lower(1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn f_theta_examples() {
        for v in [0.0, 0.3, 0.77, 1.0] {
            assert!((f_theta(FRAC_PI_2, v).unwrap() - v).abs() < 1e-15);
        }
        let c = FRAC_PI_3.cos();
        assert_eq!(f_theta(FRAC_PI_3, c).unwrap(), 0.0);
        let want = 0.9 * 3f64.sqrt() / 2.0 - 0.5 * 0.19f64.sqrt();
        assert!((f_theta(FRAC_PI_3, 0.9).unwrap() - want).abs() < 1e-15);
        assert!((want - 0.5615).abs() < 1e-4);
        assert!(f_theta(0.0, 0.5).is_err());
        assert!(f_theta(2.0, 0.5).is_err());
        assert!(f_theta(1.0, 1.1).is_err());
        // round-off at the edge is tolerated
        assert!((f_theta(1.0, 1.0 + 1e-13).unwrap() - 1f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn g_alpha_examples() {
        for x in [0.0, 0.25, 0.5, 1.0] {
            assert_eq!(g_alpha(0.0, x).unwrap(), x);
        }
        for a in [0.1, 0.7, 1.3] {
            assert!((g_alpha(a, 1.0).unwrap() - 1.0).abs() < 1e-15);
        }
        let a = 0.2f64.asin();
        // knee at 0.4 / 1.2 = 1/3 < 0.5 → 1.2·0.5 − 0.2
        assert!((g_alpha(a, 0.5).unwrap() - 0.4).abs() < 1e-15);
        assert!((g_alpha(a, 0.2).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn arbitrary_bound_examples() {
        let ideal = OverlapCharacterization::from_theta(FRAC_PI_2).unwrap();
        assert!((fidelity_bound_arbitrary(&ideal, 1.0).unwrap() - 1.0).abs() < 1e-15);
        let none = OverlapCharacterization::from_delta(0.5);
        assert!(matches!(
            fidelity_bound_arbitrary(&none, 1.0),
            Err(Error::CertificationUnavailable(_))
        ));
        let q = OverlapCharacterization::from_theta(FRAC_PI_4).unwrap();
        let want = FRAC_1_SQRT_2 * 0.95 - FRAC_1_SQRT_2 * (1.0f64 - 0.95 * 0.95).sqrt();
        assert!((fidelity_bound_arbitrary(&q, 0.95).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn qubit_bound_examples() {
        let phi = 1.1;
        let plain = QubitSourceAngles::new(0.0, 0.0, phi).unwrap();
        for d in [0.2, 0.6, 0.95] {
            let a = fidelity_bound_qubit(&plain, d).unwrap();
            let b = f_theta(phi, d).unwrap();
            assert!((a - b).abs() < 1e-15);
        }
        let ang = QubitSourceAngles::new(0.3, 0.2, 1.0).unwrap();
        assert!((fidelity_bound_qubit(&ang, 0.0).unwrap() - 0.3f64.sin()).abs() < 1e-15);

        let ang = QubitSourceAngles::new(0.1, 0.15, FRAC_PI_2).unwrap();
        let d = 1.0 - 2.0 * 0.01;
        let want = g_alpha(0.1, d / 0.15f64.cos()).unwrap();
        assert!((fidelity_bound_qubit(&ang, d).unwrap() - want).abs() < 1e-15);

        let degenerate = QubitSourceAngles::new(0.1, FRAC_PI_2, 1.0).unwrap();
        assert!(matches!(
            fidelity_bound_qubit(&degenerate, 0.1),
            Err(Error::DegenerateSource(_))
        ));
        // distance slightly above |cos β| is clamped, far above rejected
        let ang = QubitSourceAngles::new(0.1, 0.3, 1.0).unwrap();
        let c = 0.3f64.cos();
        assert!(fidelity_bound_qubit(&ang, c + 1e-10).is_ok());
        assert!(fidelity_bound_qubit(&ang, c + 1e-3).is_err());
    }

    #[test]
    fn f2_examples() {
        for phi in [0.4, 1.0, FRAC_PI_2, 2.5] {
            assert!((f2_phi(phi, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        }
        // q < |cos φ| falls back to f_φ
        let (z, v, phi) = (0.3, 0.8, 1.0f64);
        assert!(q_zv(z, v) < phi.cos());
        assert_eq!(f2_phi(phi, z, v).unwrap(), f_theta(phi, v).unwrap());
        // φ = π/2, z = v = 0.9 → q = 0.62 and h = √(1 − 0.19)
        let h = f2_phi(FRAC_PI_2, 0.9, 0.9).unwrap();
        assert!((h - 0.81f64.sqrt()).abs() < 1e-12);
        assert!((h - 0.9).abs() < 1e-12);
        assert!(matches!(
            f2_phi(0.0, 0.5, 0.5),
            Err(Error::DegenerateSource(_))
        ));
    }

    #[test]
    fn dim2_bound_examples() {
        let ang = QubitSourceAngles::new(0.2, 0.3, 1.2).unwrap();
        let dz = ang.alpha_angle.cos();
        let dx = ang.beta_angle.cos();
        assert!((fidelity_bound_qubit_dim2(&ang, dz, dx).unwrap() - 1.0).abs() < 1e-12);
        for d in [0.1, 0.5, 0.9] {
            let x = d * dx;
            let a = fidelity_bound_qubit_dim2(&ang, 0.0, x).unwrap();
            let b = fidelity_bound_qubit(&ang, x).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn fuchs_examples() {
        assert!(fuchs_relation_check(0.0, 1.0));
        assert!(!fuchs_relation_check(1.0, 1.0));
        assert!(fuchs_relation_check(FRAC_1_SQRT_2, FRAC_1_SQRT_2));
    }
}
