//! Quantum-information primitives: states, distances, entropies, partial
//! traces and random isometries.
//!
//! All logarithms are base 2. Eigenvalues in `[-1e-9, 0)` are treated as
//! round-off and clamped to zero before square roots and logarithms.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, domain_err, Error, Result};
use crate::linalg::{
    hermitian_eigen, inner, norm, orthonormalize_columns, singular_values, ComplexMatrix, C64,
};

/// Eigenvalues below `-NEG_EIGEN_TOL` make an operator invalid as a state.
pub const NEG_EIGEN_TOL: f64 = 1e-9;
pub const TRACE_TOL: f64 = 1e-9;
pub const HERMITIAN_TOL: f64 = 1e-9;
/// Norm tolerance of a [`PureState`].
pub const STATE_NORM_TOL: f64 = 1e-12;

/// A unit vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState(Vec<C64>);

impl PureState {
    /// Accepts amplitudes whose norm is within [`STATE_NORM_TOL`] of one.
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        Self::with_tolerance(amplitudes, STATE_NORM_TOL)
    }

    /// Accepts amplitudes within `tol` of unit norm, renormalising any
    /// deviation larger than [`STATE_NORM_TOL`].
    pub fn with_tolerance(amplitudes: Vec<C64>, tol: f64) -> Result<Self> {
        if amplitudes.is_empty() {
            return dim_err("a state needs at least one amplitude");
        }
        if amplitudes
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::Validation("non-finite amplitude".into()));
        }
        let n = norm(&amplitudes);
        if (n - 1.0).abs() > tol {
            return Err(Error::Validation(format!("state norm is {n}, expected 1")));
        }
        if (n - 1.0).abs() > STATE_NORM_TOL {
            Ok(Self(amplitudes.into_iter().map(|z| z / n).collect()))
        } else {
            Ok(Self(amplitudes))
        }
    }

    /// Normalises arbitrary nonzero amplitudes.
    pub fn normalized(amplitudes: Vec<C64>) -> Result<Self> {
        let n = norm(&amplitudes);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Validation("cannot normalise a zero vector".into()));
        }
        Ok(Self(amplitudes.into_iter().map(|z| z / n).collect()))
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::new(amplitudes.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Computational basis vector `|k>` in dimension `dim`.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = vec![C64::new(0.0, 0.0); dim];
        v[k] = C64::new(1.0, 0.0);
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.0
    }

    /// `<self|other>`
    pub fn overlap(&self, other: &Self) -> C64 {
        inner(&self.0, &other.0)
    }

    pub fn density(&self) -> ComplexMatrix {
        ComplexMatrix::outer(&self.0, &self.0)
    }

    pub fn with_phase(&self, phase: f64) -> Self {
        let p = C64::from_polar(1.0, phase);
        Self(self.0.iter().map(|z| z * p).collect())
    }

    /// Matrix `A` with `Tr_keep'[|ψ><ψ|] = A A†` on the kept factor.
    ///
    /// For `keep = E` this is the `dimE × dimB` reshaping of the amplitudes,
    /// for `keep = B` the `dimB × dimE` one.
    pub fn factor(&self, label: BipartiteLabel, keep: Subsystem) -> Result<ComplexMatrix> {
        label.check_dim(self.dim())?;
        let (db, de) = (label.dim_b, label.dim_e);
        Ok(match keep {
            Subsystem::B => ComplexMatrix::from_fn(db, de, |b, e| self.0[b * de + e]),
            Subsystem::E => ComplexMatrix::from_fn(de, db, |e, b| self.0[b * de + e]),
        })
    }
}

/// Factorisation `H_B ⊗ H_E`; joint index is `b * dim_e + e`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BipartiteLabel {
    pub dim_b: usize,
    pub dim_e: usize,
}

impl BipartiteLabel {
    pub fn new(dim_b: usize, dim_e: usize) -> Result<Self> {
        if dim_b == 0 || dim_e == 0 {
            return dim_err(format!(
                "subsystem dimensions must be positive, got dimB={dim_b}, dimE={dim_e}"
            ));
        }
        Ok(Self { dim_b, dim_e })
    }

    pub fn total(&self) -> usize {
        self.dim_b * self.dim_e
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.total() {
            return dim_err(format!(
                "operator of dimension {n} does not factor as {}x{}",
                self.dim_b, self.dim_e
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subsystem {
    B,
    E,
}

/// Sum of singular values.
pub fn trace_norm(m: &ComplexMatrix) -> Result<f64> {
    m.require_square("trace-norm input")?;
    Ok(singular_values(m)?.iter().sum())
}

fn validate_unit_trace(m: &ComplexMatrix, what: &str) -> Result<()> {
    m.require_square(what)?;
    if !m.is_hermitian(HERMITIAN_TOL) {
        return Err(Error::Validation(format!("{what} is not Hermitian")));
    }
    let tr = m.trace();
    if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
        return Err(Error::Validation(format!(
            "{what} has trace {}, expected 1",
            tr.re
        )));
    }
    Ok(())
}

fn same_dim(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<()> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return dim_err(format!(
            "operands are {}x{} and {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        ));
    }
    Ok(())
}

/// Spectrum of a density operator with round-off negatives clamped to zero.
pub fn density_spectrum(m: &ComplexMatrix) -> Result<Vec<f64>> {
    let e = hermitian_eigen(m)?;
    clamp_spectrum(e.values)
}

fn clamp_spectrum(values: Vec<f64>) -> Result<Vec<f64>> {
    values
        .into_iter()
        .map(|l| {
            if l < -NEG_EIGEN_TOL {
                Err(Error::Validation(format!(
                    "operator has negative eigenvalue {l}"
                )))
            } else {
                Ok(l.max(0.0))
            }
        })
        .collect()
}

/// Hermitian square root of a positive semidefinite operator.
pub fn psd_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let e = hermitian_eigen(m)?;
    clamp_spectrum(e.values.clone())?;
    Ok(e.map_values(|l| l.max(0.0).sqrt()))
}

/// `D(A, B) = ½‖A − B‖₁`
pub fn trace_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    same_dim(a, b)?;
    validate_unit_trace(a, "first operand")?;
    validate_unit_trace(b, "second operand")?;
    Ok(half_trace_norm_hermitian(&(a - b))?.min(1.0))
}

/// `½‖M‖₁` for Hermitian `M`, from its eigenvalues.
pub fn half_trace_norm_hermitian(m: &ComplexMatrix) -> Result<f64> {
    let e = hermitian_eigen(m)?;
    Ok(0.5 * e.values.iter().map(|l| l.abs()).sum::<f64>())
}

/// `F(A, B) = ‖√A √B‖₁`
pub fn fidelity(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    same_dim(a, b)?;
    validate_unit_trace(a, "first operand")?;
    validate_unit_trace(b, "second operand")?;
    let sa = psd_sqrt(a)?;
    let sb = psd_sqrt(b)?;
    Ok(trace_norm(&(&sa * &sb))?.min(1.0))
}

/// Fidelity of `A A†` and `B B†` given the factors, `‖A† B‖₁`.
///
/// This is Uhlmann's maximal overlap of purifications and avoids square
/// roots of nearly-zero eigenvalues, so it stays accurate for low-rank
/// operators.
pub fn fidelity_of_factors(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    if a.rows() != b.rows() {
        return dim_err("factors act on different spaces");
    }
    let m = &a.adjoint() * b;
    Ok(singular_values(&m)?.iter().sum::<f64>().min(1.0))
}

pub fn partial_trace(
    m: &ComplexMatrix,
    label: BipartiteLabel,
    keep: Subsystem,
) -> Result<ComplexMatrix> {
    m.require_square("partial-trace input")?;
    label.check_dim(m.rows())?;
    let (db, de) = (label.dim_b, label.dim_e);
    Ok(match keep {
        Subsystem::B => ComplexMatrix::from_fn(db, db, |b, bp| {
            (0..de).map(|e| m[(b * de + e, bp * de + e)]).sum()
        }),
        Subsystem::E => ComplexMatrix::from_fn(de, de, |e, ep| {
            (0..db).map(|b| m[(b * de + e, b * de + ep)]).sum()
        }),
    })
}

/// `-Σ λ log₂ λ` over a spectrum, with `0 log 0 = 0`.
pub fn spectrum_entropy(values: &[f64]) -> f64 {
    values
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| -l * l.log2())
        .sum::<f64>()
        .max(0.0)
}

pub fn von_neumann_entropy(a: &ComplexMatrix) -> Result<f64> {
    validate_unit_trace(a, "entropy input")?;
    Ok(spectrum_entropy(&density_spectrum(a)?))
}

/// Binary entropy in bits. Arguments within 1e-12 outside `[0, 1]` are
/// clamped.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(-1e-12..=1.0 + 1e-12).contains(&x) || x.is_nan() {
        return domain_err(format!("binary entropy argument {x} outside [0, 1]"));
    }
    let x = x.clamp(0.0, 1.0);
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2() - (1.0 - x) * (1.0 - x).log2())
}

/// Hermitian unitary `P − Q` from the sign of `M`'s spectrum, so that
/// `½ Tr[U M] = ½‖M‖₁`. Zero eigenvalues go to `P`.
pub fn optimal_distinguishing_unitary(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    m.require_square("distinguishing-unitary input")?;
    if !m.is_hermitian(HERMITIAN_TOL) {
        return Err(Error::Validation(
            "distinguishing unitary needs a Hermitian operator".into(),
        ));
    }
    let e = hermitian_eigen(m)?;
    Ok(e.map_values(|l| if l >= 0.0 { 1.0 } else { -1.0 }))
}

/// Projector onto the nonnegative eigenspace of a Hermitian operator.
pub fn positive_projector(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let u = optimal_distinguishing_unitary(m)?;
    let id = ComplexMatrix::identity(m.rows());
    Ok((&u + &id).scale_real(0.5))
}

/// Haar-distributed isometry `C^dim_in → C^dim_out`, deterministic in `seed`.
///
/// Sampled as the Q factor (positive-diagonal convention) of a complex
/// Ginibre matrix drawn from ChaCha20 seeded with `seed`.
pub fn haar_random_isometry(dim_in: usize, dim_out: usize, seed: u64) -> Result<ComplexMatrix> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    random_isometry(&mut rng, dim_in, dim_out)
}

pub fn random_isometry<R: rand::Rng + ?Sized>(
    rng: &mut R,
    dim_in: usize,
    dim_out: usize,
) -> Result<ComplexMatrix> {
    if dim_out < dim_in {
        return dim_err(format!(
            "an isometry cannot map dimension {dim_in} into {dim_out}"
        ));
    }
    if dim_in == 0 {
        return dim_err("isometry input dimension must be positive");
    }
    loop {
        let g = ginibre(rng, dim_out, dim_in);
        // Rank deficiency has probability zero; resample if it happens.
        if let Ok(q) = orthonormalize_columns(&g) {
            return Ok(q);
        }
    }
}

pub(crate) fn ginibre<R: rand::Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Random full-rank density matrix `G G† / Tr` with Ginibre `G`.
pub fn random_density_matrix<R: rand::Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    random_density_matrix_of_rank(rng, dim, dim)
}

pub fn random_density_matrix_of_rank<R: rand::Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    rank: usize,
) -> ComplexMatrix {
    let g = ginibre(rng, dim, rank.max(1));
    let m = &g * &g.adjoint();
    let tr = m.trace().re;
    m.scale_real(1.0 / tr).hermitian_part()
}
