//! Alice's source: the four emitted states and the parameters extracted
//! from them.
//!
//! Two characterisation levels are supported. Any source of dimension
//! `d ≥ 2` has a basis-overlap quantity `Δ` and, when `√2·Δ > 1`, an
//! overlap angle `θ`. A qubit source additionally has the angles
//! `(α, β, φ)`: the non-orthogonality within each basis and the Bloch
//! angle between the bases.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{dim_err, domain_err, Error, Result};
use crate::linalg::{c64, ComplexMatrix, C64};
use crate::optim::NelderMead;
use crate::quantum::PureState;

/// Norm tolerance applied to kets read from files.
pub const FILE_NORM_TOL: f64 = 1e-6;
/// Margin below which `√2·Δ` is treated as not exceeding one.
pub const BOUNDARY_TOL: f64 = 1e-12;
/// Grid points over the remaining relative phase in the `Δ` maximisation.
pub const DELTA_GRID: usize = 720;

/// The four emitted kets and the probability of `|α>` within the z basis.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceSpec {
    pub alpha: PureState,
    pub alpha_prime: PureState,
    pub beta: PureState,
    pub beta_prime: PureState,
    pub p_z: f64,
}

impl SourceSpec {
    pub fn new(
        alpha: PureState,
        alpha_prime: PureState,
        beta: PureState,
        beta_prime: PureState,
        p_z: f64,
    ) -> Result<Self> {
        let d = alpha.dim();
        if d < 2 {
            return dim_err("source states need dimension at least 2");
        }
        for (name, s) in [
            ("alphaPrime", &alpha_prime),
            ("beta", &beta),
            ("betaPrime", &beta_prime),
        ] {
            if s.dim() != d {
                return dim_err(format!(
                    "ket {name} has dimension {}, expected {d}",
                    s.dim()
                ));
            }
        }
        if !(p_z > 0.0 && p_z < 1.0) {
            return Err(Error::Validation(format!("pZ = {p_z} must lie in (0, 1)")));
        }
        Ok(Self {
            alpha,
            alpha_prime,
            beta,
            beta_prime,
            p_z,
        })
    }

    /// `|0>, |1>, |+>, |->` with unbiased z-basis emission.
    pub fn ideal_bb84() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self::new(
            PureState::basis(2, 0),
            PureState::basis(2, 1),
            PureState::from_real(&[h, h]).expect("unit"),
            PureState::from_real(&[h, -h]).expect("unit"),
            0.5,
        )
        .expect("ideal source is valid")
    }

    pub fn dim(&self) -> usize {
        self.alpha.dim()
    }

    /// Bias `ε = 2 p_z − 1`.
    pub fn bias(&self) -> f64 {
        2.0 * self.p_z - 1.0
    }

    pub fn with_p_z(&self, p_z: f64) -> Result<Self> {
        Self::new(
            self.alpha.clone(),
            self.alpha_prime.clone(),
            self.beta.clone(),
            self.beta_prime.clone(),
            p_z,
        )
    }

    pub fn kets(&self) -> [&PureState; 4] {
        [&self.alpha, &self.alpha_prime, &self.beta, &self.beta_prime]
    }

    /// Applies the same unitary to all four kets.
    pub fn transformed(&self, u: &ComplexMatrix) -> Result<Self> {
        let map = |s: &PureState| -> Result<PureState> {
            PureState::with_tolerance(u.apply(s.amplitudes())?, 1e-9)
        };
        Self::new(
            map(&self.alpha)?,
            map(&self.alpha_prime)?,
            map(&self.beta)?,
            map(&self.beta_prime)?,
            self.p_z,
        )
    }

    /// `(<α|β>, <α′|β>, <α|β′>, <α′|β′>)`
    pub fn cross_overlaps(&self) -> [C64; 4] {
        [
            self.alpha.overlap(&self.beta),
            self.alpha_prime.overlap(&self.beta),
            self.alpha.overlap(&self.beta_prime),
            self.alpha_prime.overlap(&self.beta_prime),
        ]
    }
}

/// Qubit-source angles in radians: `|sin α| = |<α|α′>|`,
/// `|sin β| = |<β|β′>|`, and `φ` the Bloch angle between the bases.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QubitSourceAngles {
    pub alpha_angle: f64,
    pub beta_angle: f64,
    pub phi_angle: f64,
}

impl QubitSourceAngles {
    pub fn new(alpha_angle: f64, beta_angle: f64, phi_angle: f64) -> Result<Self> {
        if ![alpha_angle, beta_angle, phi_angle]
            .iter()
            .all(|a| a.is_finite())
        {
            return domain_err("angles must be finite");
        }
        Ok(Self {
            alpha_angle,
            beta_angle,
            phi_angle,
        })
    }

    pub fn ideal() -> Self {
        Self {
            alpha_angle: 0.0,
            beta_angle: 0.0,
            phi_angle: FRAC_PI_2,
        }
    }
}

/// Overlap angle, or the marker that `√2·Δ ≤ 1` and no angle exists.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ThetaAngle {
    Applicable(f64),
    Inapplicable,
}

impl ThetaAngle {
    pub fn value(self) -> Option<f64> {
        match self {
            ThetaAngle::Applicable(t) => Some(t),
            ThetaAngle::Inapplicable => None,
        }
    }
}

impl Serialize for ThetaAngle {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ThetaAngle::Applicable(t) => s.serialize_f64(*t),
            ThetaAngle::Inapplicable => s.serialize_str("inapplicable"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct OverlapCharacterization {
    pub delta: f64,
    pub theta_angle: ThetaAngle,
}

impl OverlapCharacterization {
    /// Characterisation with a given angle, bypassing `Δ` extraction.
    pub fn from_theta(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= FRAC_PI_2 + 1e-12) {
            return domain_err(format!("overlap angle {theta} outside (0, π/2]"));
        }
        let theta = theta.min(FRAC_PI_2);
        Ok(Self {
            delta: ((1.0 + theta.sin()) / 2.0).sqrt(),
            theta_angle: ThetaAngle::Applicable(theta),
        })
    }

    pub fn from_delta(delta: f64) -> Self {
        // sin θ = 2Δ² − 1; values within rounding of the boundary give no bound
        let s = 2.0 * delta * delta - 1.0;
        let theta_angle = if s > BOUNDARY_TOL {
            let s = s.min(1.0);
            ThetaAngle::Applicable(s.asin())
        } else {
            ThetaAngle::Inapplicable
        };
        Self { delta, theta_angle }
    }

    pub fn theta(&self) -> Option<f64> {
        self.theta_angle.value()
    }
}

#[cfg(test)]
fn delta_objective(c: &[C64; 4], a_prime: f64, b: f64, b_prime: f64) -> f64 {
    // per-ket phases (0, a', b, b'): t1 = b, t2 = b - a', t3 = b', t4 = b' - a'
    let e = |t: f64| C64::from_polar(1.0, t);
    let s = c[0] * e(b) + c[1] * e(b - a_prime) + c[2] * e(b_prime) - c[3] * e(b_prime - a_prime);
    s.norm() / (2.0 * SQRT_2)
}

/// `delta_objective` with `b` and `b′` chosen optimally: the two halves of
/// the sum are aligned, leaving only `a′`.
fn delta_profile(c: &[C64; 4], a_prime: f64) -> f64 {
    let e = C64::from_polar(1.0, -a_prime);
    ((c[0] + c[1] * e).norm() + (c[2] - c[3] * e).norm()) / (2.0 * SQRT_2)
}

/// Basis-overlap quantity `Δ`, maximised over the ket phase conventions.
///
/// Only the relative phase of `|α′>` survives the maximisation over the x
/// phases; it is scanned on [`DELTA_GRID`] points and refined with
/// Nelder-Mead.
pub fn compute_delta(src: &SourceSpec) -> f64 {
    let c = src.cross_overlaps();
    let step = 2.0 * PI / DELTA_GRID as f64;
    let (best, arg) = (0..DELTA_GRID)
        .map(|i| {
            let a = i as f64 * step;
            (delta_profile(&c, a), a)
        })
        .fold(
            (f64::NEG_INFINITY, 0.0),
            |m, p| if p.0 > m.0 { p } else { m },
        );
    let nm = NelderMead {
        max_evals: 2_000,
        initial_step: step / 2.0,
        f_tol: 1e-17,
        x_tol: 1e-12,
    };
    let refined = nm.minimize(|x| -delta_profile(&c, x[0]), &[arg]);
    best.max(-refined.value)
}

pub fn compute_theta(src: &SourceSpec) -> OverlapCharacterization {
    OverlapCharacterization::from_delta(compute_delta(src))
}

/// Bloch vector of a qubit ket.
pub fn bloch_vector(s: &PureState) -> Result<[f64; 3]> {
    if s.dim() != 2 {
        return dim_err(format!(
            "Bloch vector needs a qubit, got dimension {}",
            s.dim()
        ));
    }
    let a = s.amplitudes()[0];
    let b = s.amplitudes()[1];
    let ab = a.conj() * b;
    Ok([2.0 * ab.re, 2.0 * ab.im, a.norm_sqr() - b.norm_sqr()])
}

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

fn unit3(a: [f64; 3]) -> [f64; 3] {
    let n = norm3(a);
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Unit Bloch directions of a qubit source: `z ∝ ρ − ρ′`, `v ∝ σ − σ′` and
/// `x` completing `v = cos φ z + sin φ x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QubitFrame {
    pub z: [f64; 3],
    pub x: [f64; 3],
    pub v: [f64; 3],
    pub angles: QubitSourceAngles,
}

impl QubitFrame {
    /// Standard frame of the computational basis with angle `φ` between bases.
    pub fn standard(phi: f64) -> Self {
        Self {
            z: [0.0, 0.0, 1.0],
            x: [1.0, 0.0, 0.0],
            v: [phi.sin(), 0.0, phi.cos()],
            angles: QubitSourceAngles {
                alpha_angle: 0.0,
                beta_angle: 0.0,
                phi_angle: phi,
            },
        }
    }

    pub fn pauli_z(&self) -> ComplexMatrix {
        pauli_along(self.z)
    }

    pub fn pauli_x(&self) -> ComplexMatrix {
        pauli_along(self.x)
    }

    pub fn pauli_v(&self) -> ComplexMatrix {
        pauli_along(self.v)
    }
}

/// `n·σ` for a real 3-vector `n`.
pub fn pauli_along(n: [f64; 3]) -> ComplexMatrix {
    ComplexMatrix::from_rows(&[
        vec![c64(n[2], 0.0), c64(n[0], -n[1])],
        vec![c64(n[0], n[1]), c64(-n[2], 0.0)],
    ])
    .expect("2x2")
}

const DEGENERATE_TOL: f64 = 1e-12;

pub fn qubit_frame(src: &SourceSpec) -> Result<QubitFrame> {
    if src.dim() != 2 {
        return dim_err(format!(
            "qubit angles need a two-dimensional source, got d = {}",
            src.dim()
        ));
    }
    let dz = sub3(bloch_vector(&src.alpha)?, bloch_vector(&src.alpha_prime)?);
    let dv = sub3(bloch_vector(&src.beta)?, bloch_vector(&src.beta_prime)?);
    if norm3(dz) < DEGENERATE_TOL {
        return Err(Error::DegenerateSource(
            "ρ = ρ′: z-basis states coincide".into(),
        ));
    }
    if norm3(dv) < DEGENERATE_TOL {
        return Err(Error::DegenerateSource(
            "σ = σ′: x-basis states coincide".into(),
        ));
    }
    let z = unit3(dz);
    let v = unit3(dv);
    let cos_phi = dot3(z, v).clamp(-1.0, 1.0);
    let perp = sub3(v, [cos_phi * z[0], cos_phi * z[1], cos_phi * z[2]]);
    let sin_phi = norm3(perp);
    if sin_phi < DEGENERATE_TOL {
        return Err(Error::DegenerateSource(
            "the two bases share a Bloch axis (sin φ = 0)".into(),
        ));
    }
    let x = unit3(perp);
    let phi = sin_phi.atan2(cos_phi);
    let alpha = src.alpha.overlap(&src.alpha_prime).norm().min(1.0).asin();
    let beta = src.beta.overlap(&src.beta_prime).norm().min(1.0).asin();
    Ok(QubitFrame {
        z,
        x,
        v,
        angles: QubitSourceAngles {
            alpha_angle: alpha,
            beta_angle: beta,
            phi_angle: phi,
        },
    })
}

pub fn extract_qubit_angles(src: &SourceSpec) -> Result<QubitSourceAngles> {
    Ok(qubit_frame(src)?.angles)
}

/// Qubit source with the given angles.
///
/// The z pair is `cos(α/2)|0> + sin(α/2)|1>`, `sin(α/2)|0> + cos(α/2)|1>`;
/// the x pair is the same construction with `β`, rotated about the Bloch
/// y axis by `φ`.
pub fn build_qubit_source(angles: QubitSourceAngles, p_z: f64) -> Result<SourceSpec> {
    let pair = |a: f64| -> [[f64; 2]; 2] {
        let (s, c) = (a / 2.0).sin_cos();
        [[c, s], [s, c]]
    };
    let [al, alp] = pair(angles.alpha_angle);
    let [be, bep] = pair(angles.beta_angle);
    let (s, c) = (angles.phi_angle / 2.0).sin_cos();
    let ry = |v: [f64; 2]| [c * v[0] - s * v[1], s * v[0] + c * v[1]];
    SourceSpec::new(
        PureState::normalized(vec![c64(al[0], 0.0), c64(al[1], 0.0)])?,
        PureState::normalized(vec![c64(alp[0], 0.0), c64(alp[1], 0.0)])?,
        PureState::normalized(ry(be).iter().map(|&x| c64(x, 0.0)).collect())?,
        PureState::normalized(ry(bep).iter().map(|&x| c64(x, 0.0)).collect())?,
        p_z,
    )
}

/// Everything the attack laboratory needs to know about a source,
/// computed once.
#[derive(Clone, Debug)]
pub struct SourceProfile {
    pub source: SourceSpec,
    pub overlap: OverlapCharacterization,
    pub qubit: Option<QubitFrame>,
}

impl SourceProfile {
    pub fn new(source: &SourceSpec) -> Self {
        let overlap = compute_theta(source);
        let qubit = qubit_frame(source).ok();
        Self {
            source: source.clone(),
            overlap,
            qubit,
        }
    }

    /// Both bases orthogonal and mutually unbiased, `Δ = 1`.
    pub fn is_ideal(&self) -> bool {
        self.overlap.delta >= 1.0 - 1e-9
    }
}

// ---------------------------------------------------------------------------
// File format

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct SourceFile {
    dim: usize,
    alpha: Vec<[f64; 2]>,
    alpha_prime: Vec<[f64; 2]>,
    beta: Vec<[f64; 2]>,
    beta_prime: Vec<[f64; 2]>,
    p_z: f64,
}

fn ket_from_pairs(name: &str, dim: usize, pairs: &[[f64; 2]]) -> Result<PureState> {
    if pairs.len() != dim {
        return Err(Error::Validation(format!(
            "ket {name} has {} amplitudes but dim is {dim}",
            pairs.len()
        )));
    }
    let amps: Vec<C64> = pairs.iter().map(|p| c64(p[0], p[1])).collect();
    PureState::with_tolerance(amps, FILE_NORM_TOL)
        .map_err(|e| Error::Validation(format!("ket {name}: {e}")))
}

fn ket_to_pairs(s: &PureState) -> Vec<[f64; 2]> {
    s.amplitudes().iter().map(|z| [z.re, z.im]).collect()
}

pub fn source_from_json(text: &str) -> Result<SourceSpec> {
    let f: SourceFile =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("source file: {e}")))?;
    if f.dim < 2 {
        return Err(Error::Validation(format!(
            "dim = {} must be at least 2",
            f.dim
        )));
    }
    SourceSpec::new(
        ket_from_pairs("alpha", f.dim, &f.alpha)?,
        ket_from_pairs("alphaPrime", f.dim, &f.alpha_prime)?,
        ket_from_pairs("beta", f.dim, &f.beta)?,
        ket_from_pairs("betaPrime", f.dim, &f.beta_prime)?,
        f.p_z,
    )
}

pub fn source_to_json(src: &SourceSpec) -> String {
    let f = SourceFile {
        dim: src.dim(),
        alpha: ket_to_pairs(&src.alpha),
        alpha_prime: ket_to_pairs(&src.alpha_prime),
        beta: ket_to_pairs(&src.beta),
        beta_prime: ket_to_pairs(&src.beta_prime),
        p_z: src.p_z,
    };
    serde_json::to_string_pretty(&f).expect("plain data serialises")
}

pub fn load_source(path: impl AsRef<Path>) -> Result<SourceSpec> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    source_from_json(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn save_source(src: &SourceSpec, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, source_to_json(src) + "\n")?;
    Ok(())
}
