//! Asymptotic secret keyrates under collective attacks.
//!
//! Every certified variant has the Devetak-Winter shape
//! `r = H(Z|E)_lower − h(δz)`, where the conditional-entropy lower bound
//! comes from a fidelity lower bound through
//! `h(p) − h(½ + ½√(ε² + (1 − ε²) F²))`. Error-correction leakage is
//! taken to be exactly `h(δz)` (no inefficiency factor).

use serde::Serialize;

use crate::bounds::{
    fidelity_bound_arbitrary, fidelity_bound_qubit, fidelity_bound_qubit_dim2, helstrom_lower,
};
use crate::error::{domain_err, Error, Result};
use crate::quantum::binary_entropy;
use crate::source::{OverlapCharacterization, QubitSourceAngles, ThetaAngle};

/// Observed bit error rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ObservedStats {
    pub delta_z: f64,
    pub delta_x: f64,
}

impl ObservedStats {
    pub fn new(delta_z: f64, delta_x: f64) -> Result<Self> {
        for (name, d) in [("deltaZ", delta_z), ("deltaX", delta_x)] {
            if d.is_nan() || !(0.0..=1.0).contains(&d) {
                return domain_err(format!("{name} = {d} outside [0, 1]"));
            }
        }
        Ok(Self { delta_z, delta_x })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KeyrateVariant {
    ArbitraryTheta,
    Qubit,
    QubitDim2,
    UncertaintyComparison,
    Minentropy,
}

impl KeyrateVariant {
    pub fn name(self) -> &'static str {
        match self {
            KeyrateVariant::ArbitraryTheta => "arbitrary-theta",
            KeyrateVariant::Qubit => "qubit",
            KeyrateVariant::QubitDim2 => "qubit-dim2",
            KeyrateVariant::UncertaintyComparison => "uncertainty-comparison",
            KeyrateVariant::Minentropy => "minentropy",
        }
    }
}

impl std::str::FromStr for KeyrateVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "arbitrary-theta" | "arbitrary" | "theta" => KeyrateVariant::ArbitraryTheta,
            "qubit" => KeyrateVariant::Qubit,
            "qubit-dim2" => KeyrateVariant::QubitDim2,
            "uncertainty-comparison" | "uncertainty" => KeyrateVariant::UncertaintyComparison,
            "minentropy" => KeyrateVariant::Minentropy,
            other => return domain_err(format!("unknown keyrate variant '{other}'")),
        })
    }
}

/// Inputs a rate was computed from.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct KeyrateInputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<ThetaAngle>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angles: Option<QubitSourceAngles>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<ObservedStats>,
    pub epsilon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_distance_upper: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct KeyrateReport {
    pub variant: KeyrateVariant,
    /// Unfloored; negative means no key.
    pub rate: f64,
    pub positive: bool,
    /// Fidelity lower bound the rate was computed from. For the
    /// uncertainty comparison and the min-entropy rate this is the value
    /// implied by the inputs (`|sin θ|·D` and `√(1 − D²)` respectively).
    pub fidelity_bound: f64,
    /// False for comparison values that this model does not certify.
    pub certifying: bool,
    pub inputs: KeyrateInputs,
}

impl KeyrateReport {
    fn new(
        variant: KeyrateVariant,
        rate: f64,
        fidelity_bound: f64,
        certifying: bool,
        inputs: KeyrateInputs,
    ) -> Self {
        Self {
            variant,
            rate,
            positive: rate > 0.0,
            fidelity_bound,
            certifying,
            inputs,
        }
    }
}

fn check_bias(epsilon: f64) -> Result<()> {
    if epsilon.is_nan() || epsilon.abs() >= 1.0 {
        return domain_err(format!("bias ε = {epsilon} must satisfy |ε| < 1"));
    }
    Ok(())
}

/// `H(Z|E) ≥ h(p) − h(½ + ½√(ε² + (1 − ε²) F²))` with `p = (1 + ε)/2`.
pub fn entropy_bound_from_fidelity(fidelity: f64, epsilon: f64) -> Result<f64> {
    check_bias(epsilon)?;
    if fidelity.is_nan() || !(-1e-12..=1.0 + 1e-12).contains(&fidelity) {
        return domain_err(format!("fidelity {fidelity} outside [0, 1]"));
    }
    let f = fidelity.clamp(0.0, 1.0);
    let p = (1.0 + epsilon) / 2.0;
    if epsilon == 0.0 {
        return Ok(1.0 - binary_entropy(0.5 + 0.5 * f)?);
    }
    let e2 = epsilon * epsilon;
    let root = (e2 + (1.0 - e2) * f * f).sqrt().min(1.0);
    Ok(binary_entropy(p)? - binary_entropy(0.5 + 0.5 * root)?)
}

fn rate_from_fidelity(f: f64, stats: &ObservedStats, epsilon: f64) -> Result<f64> {
    Ok(entropy_bound_from_fidelity(f, epsilon)? - binary_entropy(stats.delta_z)?)
}

pub fn keyrate_arbitrary(
    theta: &OverlapCharacterization,
    stats: &ObservedStats,
    epsilon: f64,
) -> Result<KeyrateReport> {
    check_bias(epsilon)?;
    let f = fidelity_bound_arbitrary(theta, helstrom_lower(stats.delta_x)?)?;
    let rate = rate_from_fidelity(f, stats, epsilon)?;
    Ok(KeyrateReport::new(
        KeyrateVariant::ArbitraryTheta,
        rate,
        f,
        true,
        KeyrateInputs {
            theta: Some(theta.theta_angle),
            delta: Some(theta.delta),
            angles: None,
            stats: Some(*stats),
            epsilon,
            trace_distance_upper: None,
        },
    ))
}

pub fn keyrate_qubit(
    angles: &QubitSourceAngles,
    stats: &ObservedStats,
    epsilon: f64,
) -> Result<KeyrateReport> {
    check_bias(epsilon)?;
    let f = fidelity_bound_qubit(angles, helstrom_lower(stats.delta_x)?)?;
    let rate = rate_from_fidelity(f, stats, epsilon)?;
    Ok(KeyrateReport::new(
        KeyrateVariant::Qubit,
        rate,
        f,
        true,
        KeyrateInputs {
            theta: None,
            delta: None,
            angles: Some(*angles),
            stats: Some(*stats),
            epsilon,
            trace_distance_upper: None,
        },
    ))
}

pub fn keyrate_qubit_dim2(
    angles: &QubitSourceAngles,
    stats: &ObservedStats,
    epsilon: f64,
) -> Result<KeyrateReport> {
    check_bias(epsilon)?;
    let f = fidelity_bound_qubit_dim2(
        angles,
        helstrom_lower(stats.delta_z)?,
        helstrom_lower(stats.delta_x)?,
    )?;
    let rate = rate_from_fidelity(f, stats, epsilon)?;
    Ok(KeyrateReport::new(
        KeyrateVariant::QubitDim2,
        rate,
        f,
        true,
        KeyrateInputs {
            theta: None,
            delta: None,
            angles: Some(*angles),
            stats: Some(*stats),
            epsilon,
            trace_distance_upper: None,
        },
    ))
}

/// `1 − log₂(1 + |cos θ|) − h(δx) − h(δz)`, reported for comparison only.
///
/// The rate is only meaningful for basis-independent sources; the report
/// is always marked non-certifying.
pub fn keyrate_uncertainty_comparison(theta: f64, stats: &ObservedStats) -> Result<KeyrateReport> {
    if !(theta > 0.0 && theta <= std::f64::consts::FRAC_PI_2 + 1e-12) {
        return domain_err(format!("angle {theta} outside (0, π/2]"));
    }
    let c = theta.cos().abs();
    let rate =
        1.0 - (1.0 + c).log2() - binary_entropy(stats.delta_x)? - binary_entropy(stats.delta_z)?;
    let implied = crate::bounds::f_theta(
        theta.min(std::f64::consts::FRAC_PI_2),
        helstrom_lower(stats.delta_x)?,
    )?;
    Ok(KeyrateReport::new(
        KeyrateVariant::UncertaintyComparison,
        rate,
        implied,
        false,
        KeyrateInputs {
            theta: Some(ThetaAngle::Applicable(theta)),
            delta: None,
            angles: None,
            stats: Some(*stats),
            epsilon: 0.0,
            trace_distance_upper: None,
        },
    ))
}

/// Unsmoothed min-entropy `1 − log₂(1 + D)` from an upper bound on
/// `D(ρ_E, ρ′_E)`.
pub fn minentropy_rate(d_e_upper: f64) -> Result<f64> {
    if d_e_upper.is_nan() || !(0.0..=1.0).contains(&d_e_upper) {
        return domain_err(format!("trace distance bound {d_e_upper} outside [0, 1]"));
    }
    Ok(1.0 - (1.0 + d_e_upper).log2())
}

/// `D ≤ √(1 − F²)`: trace-distance upper bound implied by a fidelity lower bound.
pub fn trace_distance_upper_from_fidelity(f_lower: f64) -> Result<f64> {
    if f_lower.is_nan() || !(-1e-12..=1.0 + 1e-12).contains(&f_lower) {
        return domain_err(format!("fidelity {f_lower} outside [0, 1]"));
    }
    let f = f_lower.clamp(0.0, 1.0);
    Ok(((1.0 - f) * (1.0 + f)).sqrt())
}

pub fn minentropy_report(d_e_upper: f64) -> Result<KeyrateReport> {
    let rate = minentropy_rate(d_e_upper)?;
    Ok(KeyrateReport::new(
        KeyrateVariant::Minentropy,
        rate,
        trace_distance_upper_from_fidelity(d_e_upper)?,
        true,
        KeyrateInputs {
            theta: None,
            delta: None,
            angles: None,
            stats: None,
            epsilon: 0.0,
            trace_distance_upper: Some(d_e_upper),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn h(x: f64) -> f64 {
        binary_entropy(x).unwrap()
    }

    fn stats(z: f64, x: f64) -> ObservedStats {
        ObservedStats::new(z, x).unwrap()
    }

    #[test]
    fn entropy_bound_examples() {
        for eps in [0.0, 0.2, -0.4, 0.6] {
            let p = (1.0 + eps) / 2.0;
            assert!((entropy_bound_from_fidelity(1.0, eps).unwrap() - h(p)).abs() < 1e-12);
        }
        assert_eq!(entropy_bound_from_fidelity(0.0, 0.0).unwrap(), 0.0);
        let v = entropy_bound_from_fidelity(0.9, 0.0).unwrap();
        assert!((v - (1.0 - h(0.95))).abs() < 1e-15);
        assert!((v - 0.7136).abs() < 1e-4);
        assert!(entropy_bound_from_fidelity(0.5, 1.0).is_err());
        assert!(entropy_bound_from_fidelity(0.5, -1.0).is_err());
    }

    #[test]
    fn arbitrary_examples() {
        let ideal = OverlapCharacterization::from_theta(FRAC_PI_2).unwrap();
        let r = keyrate_arbitrary(&ideal, &stats(0.0, 0.0), 0.0).unwrap();
        assert!((r.rate - 1.0).abs() < 1e-15);
        let r = keyrate_arbitrary(&ideal, &stats(0.05, 0.05), 0.0).unwrap();
        assert!((r.rate - (1.0 - 2.0 * h(0.05))).abs() < 1e-12);
        assert!((r.rate - 0.42721).abs() < 1e-5);

        let bad = OverlapCharacterization::from_delta(0.6);
        assert!(matches!(
            keyrate_arbitrary(&bad, &stats(0.0, 0.0), 0.0),
            Err(Error::CertificationUnavailable(_))
        ));
    }

    #[test]
    fn shor_preskill_threshold_near_eleven_percent() {
        // bisection on 1 − 2h(δ) over [0, 0.5]
        let ideal = OverlapCharacterization::from_theta(FRAC_PI_2).unwrap();
        let r = |d: f64| keyrate_arbitrary(&ideal, &stats(d, d), 0.0).unwrap().rate;
        let (mut lo, mut hi) = (0.0, 0.5);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if r(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo - 0.110028).abs() < 1e-5, "{lo}");
    }

    #[test]
    fn qubit_examples() {
        let phi = 1.0;
        let ang = QubitSourceAngles::new(0.0, 0.0, phi).unwrap();
        let th = OverlapCharacterization::from_theta(phi).unwrap();
        for (z, x) in [(0.01, 0.02), (0.05, 0.03)] {
            let a = keyrate_qubit(&ang, &stats(z, x), 0.0).unwrap().rate;
            let b = keyrate_arbitrary(&th, &stats(z, x), 0.0).unwrap().rate;
            assert!((a - b).abs() < 1e-14);
        }
        let ang = QubitSourceAngles::new(0.1, 0.2, 1.3).unwrap();
        let dx = (1.0 - 0.2f64.cos()) / 2.0;
        let r = keyrate_qubit(&ang, &stats(0.0, dx), 0.0).unwrap();
        let want = crate::bounds::g_alpha(0.1, crate::bounds::f_theta(1.3, 1.0).unwrap()).unwrap();
        assert!((r.fidelity_bound - want).abs() < 1e-12);
    }

    #[test]
    fn dim2_examples() {
        let ang = QubitSourceAngles::new(0.15, 0.1, 1.2).unwrap();
        let dz = (1.0 - 0.15f64.cos()) / 2.0;
        let dx = (1.0 - 0.1f64.cos()) / 2.0;
        let r = keyrate_qubit_dim2(&ang, &stats(dz, dx), 0.0).unwrap();
        assert!((r.rate - (1.0 - h(dz))).abs() < 1e-9);
        let r = keyrate_qubit_dim2(&QubitSourceAngles::ideal(), &stats(0.0, 0.0), 0.0).unwrap();
        assert!((r.rate - 1.0).abs() < 1e-15);
    }

    #[test]
    fn uncertainty_examples() {
        let r = keyrate_uncertainty_comparison(FRAC_PI_2, &stats(0.03, 0.04)).unwrap();
        assert!((r.rate - (1.0 - h(0.03) - h(0.04))).abs() < 1e-12);
        assert!(!r.certifying);
        let r = keyrate_uncertainty_comparison(FRAC_PI_4, &stats(0.0, 0.0)).unwrap();
        let want = 1.0 - (1.0 + std::f64::consts::FRAC_1_SQRT_2).log2();
        assert!((r.rate - want).abs() < 1e-15);
        assert!((r.rate - 0.2284).abs() < 1e-4);
    }

    #[test]
    fn minentropy_examples() {
        assert_eq!(minentropy_rate(0.0).unwrap(), 1.0);
        assert_eq!(minentropy_rate(1.0).unwrap(), 0.0);
        let d = trace_distance_upper_from_fidelity(0.9).unwrap();
        let r = minentropy_rate(d).unwrap();
        assert!((r - (1.0 - (1.0 + 0.19f64.sqrt()).log2())).abs() < 1e-15);
        assert!((r - 0.47805).abs() < 1e-5);
        assert!(minentropy_rate(1.5).is_err());
    }

    #[test]
    fn variant_names_round_trip() {
        for v in [
            KeyrateVariant::ArbitraryTheta,
            KeyrateVariant::Qubit,
            KeyrateVariant::QubitDim2,
            KeyrateVariant::UncertaintyComparison,
            KeyrateVariant::Minentropy,
        ] {
            assert_eq!(v.name().parse::<KeyrateVariant>().unwrap(), v);
            assert_eq!(
                serde_json::to_string(&v).unwrap(),
                format!("\"{}\"", v.name())
            );
        }
    }
}
