//! Monte Carlo BB84 runs through a fixed attack channel.
//!
//! Round `r` of a run with seed `s` draws its randomness from ChaCha8
//! seeded with `s` (via `seed_from_u64`) on stream `r`, so any split of
//! the rounds across threads gives the same counts. Keyrates are the
//! asymptotic formulas evaluated at the empirical error rates; no
//! finite-statistics correction is applied.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{apply_attack, AttackIsometry};
use crate::error::{dim_err, domain_err, Error, Result};
use crate::keyrate::{keyrate_arbitrary, keyrate_qubit, KeyrateReport, ObservedStats};
use crate::linalg::{c64, hermitian_eigen, ComplexMatrix, C64};
use crate::quantum::positive_projector;
use crate::source::{SourceProfile, SourceSpec};

/// Eigenvalues of an effect must lie in `[0, 1]` up to this.
pub const EFFECT_TOL: f64 = 1e-10;
/// Rounds handed to one parallel work item.
const CHUNK: usize = 1 << 14;

pub const KEYRATE_LABEL: &str = "asymptotic-at-empirical";

/// Effects for outcome 0 of Bob's z and x measurements.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectorSpec {
    z_effect: ComplexMatrix,
    x_effect: ComplexMatrix,
}

fn check_effect(name: &str, e: &ComplexMatrix) -> Result<()> {
    e.require_square(name)?;
    if !e.is_hermitian(EFFECT_TOL) {
        return Err(Error::Validation(format!("{name} is not Hermitian")));
    }
    let eig = hermitian_eigen(e)?;
    let (lo, hi) = (eig.values[0], eig.values[eig.values.len() - 1]);
    if lo < -EFFECT_TOL || hi > 1.0 + EFFECT_TOL {
        return Err(Error::Validation(format!(
            "{name} has eigenvalues in [{lo:.3e}, {hi:.3e}], outside [0, 1]"
        )));
    }
    Ok(())
}

impl DetectorSpec {
    pub fn new(z_effect: ComplexMatrix, x_effect: ComplexMatrix) -> Result<Self> {
        check_effect("z effect", &z_effect)?;
        check_effect("x effect", &x_effect)?;
        if z_effect.rows() != x_effect.rows() {
            return dim_err("z and x effects act on different spaces");
        }
        Ok(Self { z_effect, x_effect })
    }

    /// `|0⟩⟨0|` and `|+⟩⟨+|` on the first two levels of Bob's space.
    pub fn computational(dim_b: usize) -> Result<Self> {
        if dim_b < 2 {
            return dim_err("computational detectors need dimB ≥ 2");
        }
        let mut z = ComplexMatrix::zeros(dim_b, dim_b);
        z[(0, 0)] = c64(1.0, 0.0);
        let mut x = ComplexMatrix::zeros(dim_b, dim_b);
        for i in 0..2 {
            for j in 0..2 {
                x[(i, j)] = c64(0.5, 0.0);
            }
        }
        Self::new(z, x)
    }

    /// Helstrom measurements for the Bob-side states of each basis: the
    /// projector onto the positive part of `ρ_B − ρ′_B` (resp. `σ_B − σ′_B`).
    pub fn helstrom(src: &SourceSpec, attack: &AttackIsometry) -> Result<Self> {
        let a = apply_attack(src, attack)?;
        let z = positive_projector(&(&a.bob(0)? - &a.bob(1)?))?;
        let x = positive_projector(&(&a.bob(2)? - &a.bob(3)?))?;
        Self::new(z, x)
    }

    pub fn dim(&self) -> usize {
        self.z_effect.rows()
    }

    pub fn z_effect(&self) -> &ComplexMatrix {
        &self.z_effect
    }

    pub fn x_effect(&self) -> &ComplexMatrix {
        &self.x_effect
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct DetectorFile {
    dim_b: usize,
    z_effect: Vec<Vec<[f64; 2]>>,
    x_effect: Vec<Vec<[f64; 2]>>,
}

fn matrix_from_pairs(name: &str, dim: usize, rows: &[Vec<[f64; 2]>]) -> Result<ComplexMatrix> {
    let rows: Vec<Vec<C64>> = rows
        .iter()
        .map(|r| r.iter().map(|p| c64(p[0], p[1])).collect())
        .collect();
    let m =
        ComplexMatrix::from_rows(&rows).map_err(|e| Error::Validation(format!("{name}: {e}")))?;
    if m.rows() != dim || m.cols() != dim {
        return Err(Error::Validation(format!(
            "{name} is {}x{} but dimB = {dim}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(m)
}

fn matrix_to_pairs(m: &ComplexMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.rows())
        .map(|i| m.row(i).iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

pub fn detector_from_json(text: &str) -> Result<DetectorSpec> {
    let f: DetectorFile =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("detector file: {e}")))?;
    DetectorSpec::new(
        matrix_from_pairs("zEffect", f.dim_b, &f.z_effect)?,
        matrix_from_pairs("xEffect", f.dim_b, &f.x_effect)?,
    )
}

pub fn detector_to_json(det: &DetectorSpec) -> String {
    let f = DetectorFile {
        dim_b: det.dim(),
        z_effect: matrix_to_pairs(&det.z_effect),
        x_effect: matrix_to_pairs(&det.x_effect),
    };
    serde_json::to_string_pretty(&f).expect("plain data serialises")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunConfig {
    pub rounds: u64,
    /// Probability that either party picks the z basis.
    pub basis_prob_z: f64,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(rounds: u64, basis_prob_z: f64, seed: u64) -> Result<Self> {
        if rounds == 0 {
            return domain_err("a run needs at least one round");
        }
        if !(basis_prob_z > 0.0 && basis_prob_z < 1.0) {
            return domain_err(format!("basis probability {basis_prob_z} outside (0, 1)"));
        }
        Ok(Self {
            rounds,
            basis_prob_z,
            seed,
        })
    }
}

/// Probability that Bob's outcome disagrees with Alice's bit, for each of
/// the four emitted states.
#[derive(Clone, Copy, Debug, PartialEq)]
struct ErrorProbabilities([f64; 4]);

fn error_probabilities(
    src: &SourceSpec,
    attack: &AttackIsometry,
    det: &DetectorSpec,
) -> Result<ErrorProbabilities> {
    if det.dim() != attack.label().dim_b {
        return dim_err(format!(
            "detector acts on dimension {} but Bob's system has dimension {}",
            det.dim(),
            attack.label().dim_b
        ));
    }
    let a = apply_attack(src, attack)?;
    let p0 = |e: &ComplexMatrix, which: usize| -> Result<f64> {
        let t = (e * &a.bob(which)?).trace().re;
        Ok(t.clamp(0.0, 1.0))
    };
    Ok(ErrorProbabilities([
        1.0 - p0(&det.z_effect, 0)?,
        p0(&det.z_effect, 1)?,
        1.0 - p0(&det.x_effect, 2)?,
        p0(&det.x_effect, 3)?,
    ]))
}

/// Exact z and x error rates of the channel.
pub fn theoretical_rates(
    src: &SourceSpec,
    attack: &AttackIsometry,
    det: &DetectorSpec,
) -> Result<(f64, f64)> {
    let e = error_probabilities(src, attack, det)?.0;
    let dz = src.p_z * e[0] + (1.0 - src.p_z) * e[1];
    let dx = 0.5 * (e[2] + e[3]);
    Ok((dz, dx))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct Counts {
    sifted_z: u64,
    sifted_x: u64,
    errors_z: u64,
    errors_x: u64,
}

impl Counts {
    fn add(self, o: Self) -> Self {
        Self {
            sifted_z: self.sifted_z + o.sifted_z,
            sifted_x: self.sifted_x + o.sifted_x,
            errors_z: self.errors_z + o.errors_z,
            errors_x: self.errors_x + o.errors_x,
        }
    }
}

fn run_rounds(
    base: &ChaCha8Rng,
    range: std::ops::Range<u64>,
    cfg: &RunConfig,
    p_z: f64,
    e: &ErrorProbabilities,
) -> Counts {
    let mut c = Counts::default();
    let mut rng = base.clone();
    for r in range {
        rng.set_stream(r);
        rng.set_word_pos(0);
        let alice_z = rng.random::<f64>() < cfg.basis_prob_z;
        let bob_z = rng.random::<f64>() < cfg.basis_prob_z;
        let bit_one = if alice_z {
            rng.random::<f64>() >= p_z
        } else {
            rng.random::<f64>() >= 0.5
        };
        let u: f64 = rng.random();
        if alice_z != bob_z {
            continue;
        }
        let k = 2 * usize::from(!alice_z) + usize::from(bit_one);
        let error = u < e.0[k];
        if alice_z {
            c.sifted_z += 1;
            c.errors_z += u64::from(error);
        } else {
            c.sifted_x += 1;
            c.errors_x += u64::from(error);
        }
    }
    c
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunResult {
    pub rounds: u64,
    pub seed: u64,
    pub basis_prob_z: f64,
    pub sifted_z: u64,
    pub sifted_x: u64,
    pub errors_z: u64,
    pub errors_x: u64,
    /// `None` when no round was sifted in that basis.
    pub empirical_delta_z: Option<f64>,
    pub empirical_delta_x: Option<f64>,
    pub theoretical_delta_z: f64,
    pub theoretical_delta_x: f64,
    pub keyrate_label: &'static str,
    pub keyrate_at_empirical: Option<KeyrateReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keyrate_note: Option<String>,
}

/// Certified keyrate for a source at given error rates: the `θ` bound when
/// the source has an overlap angle, otherwise the qubit bound.
pub fn keyrate_for_source(profile: &SourceProfile, stats: &ObservedStats) -> Result<KeyrateReport> {
    let eps = profile.source.bias();
    if profile.overlap.theta().is_some() {
        return keyrate_arbitrary(&profile.overlap, stats, eps);
    }
    match &profile.qubit {
        Some(frame) => keyrate_qubit(&frame.angles, stats, eps),
        None => Err(Error::CertificationUnavailable(
            "source has neither an overlap angle nor a qubit frame".into(),
        )),
    }
}

pub fn simulate(
    src: &SourceSpec,
    attack: &AttackIsometry,
    det: &DetectorSpec,
    cfg: &RunConfig,
) -> Result<RunResult> {
    simulate_with_profile(&SourceProfile::new(src), attack, det, cfg)
}

/// As [`simulate`], reusing a precomputed source profile.
pub fn simulate_with_profile(
    profile: &SourceProfile,
    attack: &AttackIsometry,
    det: &DetectorSpec,
    cfg: &RunConfig,
) -> Result<RunResult> {
    let src = &profile.source;
    let e = error_probabilities(src, attack, det)?;
    let (tz, tx) = theoretical_rates(src, attack, det)?;
    let base = ChaCha8Rng::seed_from_u64(cfg.seed);
    let chunks = cfg.rounds.div_ceil(CHUNK as u64);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|i| {
            let lo = i * CHUNK as u64;
            let hi = (lo + CHUNK as u64).min(cfg.rounds);
            run_rounds(&base, lo..hi, cfg, src.p_z, &e)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Counts::default(), Counts::add);

    let rate = |err: u64, n: u64| (n > 0).then(|| err as f64 / n as f64);
    let dz = rate(counts.errors_z, counts.sifted_z);
    let dx = rate(counts.errors_x, counts.sifted_x);
    let (keyrate, note) = match (dz, dx) {
        (Some(z), Some(x)) => {
            match ObservedStats::new(z, x).and_then(|s| keyrate_for_source(profile, &s)) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            }
        }
        _ => (None, Some("no sifted rounds in one of the bases".into())),
    };
    Ok(RunResult {
        rounds: cfg.rounds,
        seed: cfg.seed,
        basis_prob_z: cfg.basis_prob_z,
        sifted_z: counts.sifted_z,
        sifted_x: counts.sifted_x,
        errors_z: counts.errors_z,
        errors_x: counts.errors_x,
        empirical_delta_z: dz,
        empirical_delta_x: dx,
        theoretical_delta_z: tz,
        theoretical_delta_x: tx,
        keyrate_label: KEYRATE_LABEL,
        keyrate_at_empirical: keyrate,
        keyrate_note: note,
    })
}
