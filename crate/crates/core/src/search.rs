//! Local searches over collective attacks.
//!
//! An attack is parameterised by a raw complex `(dimB·dimE) × d` matrix
//! whose columns are orthonormalised before use, so the optimiser works on
//! an unconstrained real domain. Restarts are independent, each drawing
//! from its own ChaCha8 stream `(seed, restart)`, and are merged by best
//! objective with ties going to the lowest restart index, so results do not
//! depend on thread count or scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::attack::{
    bob_norms, diagnostics_for, disturbance_and_entropy, disturbance_and_fidelity, zvx_slack,
    zvx_slack_rounded, AttackDiagnostics, AttackIsometry, BobNorms,
};
use crate::error::{domain_err, Error, Result};
use crate::linalg::{c64, orthonormalize_columns, ComplexMatrix};
use crate::optim::NelderMead;
use crate::quantum::BipartiteLabel;
use crate::source::{pauli_along, SourceProfile, SourceSpec};

/// Width of the band around the target disturbance that counts as feasible.
pub const CONSTRAINT_BAND: f64 = 1e-3;
/// Penalty weight of the first stage.
pub const BASE_WEIGHT: f64 = 10.0;
pub const MIN_RESTARTS: usize = 20;

/// Penalty weights and bands of the refinement stages that follow the
/// weight-10 stage. The narrower band keeps the quadratic penalty's
/// equilibrium inside the feasible band.
const REFINE_STAGES: [(f64, f64); 3] = [(1e3, 8e-4), (1e5, 8e-4), (1e7, 8e-4)];
/// Fraction of a restart's budget spent in the first stage.
const FIRST_STAGE_SHARE: f64 = 0.4;
const REFINE_STEP: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SearchConfig {
    pub dim_b: usize,
    pub dim_e: usize,
    /// Total objective evaluations across all restarts.
    pub budget: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl SearchConfig {
    pub fn new(dim_e: usize, budget: usize, seed: u64) -> Self {
        Self {
            dim_b: 2,
            dim_e,
            budget,
            restarts: MIN_RESTARTS,
            seed,
        }
    }

    pub fn with_dim_b(self, dim_b: usize) -> Self {
        Self { dim_b, ..self }
    }

    pub fn with_restarts(self, restarts: usize) -> Self {
        Self { restarts, ..self }
    }

    fn validate(&self) -> Result<BipartiteLabel> {
        let label = BipartiteLabel::new(self.dim_b, self.dim_e)?;
        if self.restarts == 0 {
            return domain_err("at least one restart is needed");
        }
        if self.budget < self.restarts * 10 {
            return domain_err(format!(
                "budget {} too small for {} restarts",
                self.budget, self.restarts
            ));
        }
        Ok(label)
    }

    fn per_restart(&self) -> usize {
        self.budget / self.restarts
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchObjective {
    Fidelity,
    ConditionalEntropy,
}

/// Best attack found by a constrained search.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SearchFinding {
    pub objective_kind: SearchObjective,
    pub seed: u64,
    pub budget: usize,
    pub evaluations: usize,
    pub restarts: usize,
    pub best_restart: usize,
    pub target: f64,
    /// Unpenalised objective at the reported attack.
    pub objective: f64,
    /// `max(0, |D(σ_B, σ′_B) − target| − band)`; zero when feasible.
    pub constraint_residual: f64,
    pub feasible: bool,
    pub diagnostics: AttackDiagnostics,
    pub attack: AttackIsometry,
}

/// Raw parameters → isometry; `None` if the columns are dependent.
fn isometry_from_params(p: &[f64], label: BipartiteLabel, d: usize) -> Option<AttackIsometry> {
    let n = label.total();
    let raw = ComplexMatrix::from_fn(n, d, |r, c| {
        let k = 2 * (r * d + c);
        c64(p[k], p[k + 1])
    });
    let q = orthonormalize_columns(&raw).ok()?;
    AttackIsometry::new(q, label).ok()
}

fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

fn random_params(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

struct RestartOutcome {
    feasible: bool,
    objective: f64,
    residual: f64,
    params: Vec<f64>,
    evals: usize,
}

impl RestartOutcome {
    /// Feasible beats infeasible; then lower objective (feasible) or lower
    /// residual (infeasible).
    fn better_than(&self, other: &Self) -> bool {
        match (self.feasible, other.feasible) {
            (true, false) => true,
            (false, true) => false,
            (true, true) => self.objective < other.objective,
            (false, false) => (self.residual, self.objective) < (other.residual, other.objective),
        }
    }
}

fn pick_best(outcomes: Vec<RestartOutcome>) -> (usize, RestartOutcome, usize) {
    let evals = outcomes.iter().map(|o| o.evals).sum();
    let mut best: Option<(usize, RestartOutcome)> = None;
    for (i, o) in outcomes.into_iter().enumerate() {
        match &best {
            Some((_, b)) if !o.better_than(b) => {}
            _ => best = Some((i, o)),
        }
    }
    let (i, o) = best.expect("at least one restart");
    (i, o, evals)
}

fn constrained_restart(
    eval: &(dyn Fn(&AttackIsometry) -> Option<(f64, f64)> + Sync),
    label: BipartiteLabel,
    d: usize,
    target: f64,
    budget: usize,
    mut rng: ChaCha8Rng,
) -> RestartOutcome {
    let len = 2 * label.total() * d;
    let mut x = random_params(&mut rng, len);

    // best feasible point over every evaluation of the restart
    let mut best_feasible: Option<(f64, Vec<f64>)> = None;
    let mut last = (f64::INFINITY, f64::INFINITY);
    let mut total_evals = 0;

    let mut run_stage = |x0: &[f64], weight: f64, band: f64, evals: usize, step: f64| {
        let nm = NelderMead {
            max_evals: evals.max(1),
            initial_step: step,
            ..NelderMead::default()
        };
        let m = nm.minimize(
            |p| match isometry_from_params(p, label, d).and_then(|a| eval(&a)) {
                Some((dist, obj)) => {
                    let miss = (dist - target).abs();
                    if miss <= CONSTRAINT_BAND
                        && best_feasible.as_ref().is_none_or(|(b, _)| obj < *b)
                    {
                        best_feasible = Some((obj, p.to_vec()));
                    }
                    let over = (miss - band).max(0.0);
                    obj + weight * over * over
                }
                None => f64::INFINITY,
            },
            x0,
        );
        total_evals += m.evals;
        m.x
    };

    let first = ((budget as f64) * FIRST_STAGE_SHARE) as usize;
    x = run_stage(
        &x,
        BASE_WEIGHT,
        CONSTRAINT_BAND,
        first,
        NelderMead::default().initial_step,
    );
    let rest = (budget - first) / REFINE_STAGES.len();
    for (w, band) in REFINE_STAGES {
        x = run_stage(&x, w, band, rest, REFINE_STEP);
    }

    if let Some((obj, p)) = best_feasible {
        return RestartOutcome {
            feasible: true,
            objective: obj,
            residual: 0.0,
            params: p,
            evals: total_evals,
        };
    }
    if let Some((dist, obj)) = isometry_from_params(&x, label, d).and_then(|a| eval(&a)) {
        last = (dist, obj);
    }
    RestartOutcome {
        feasible: false,
        objective: last.1,
        residual: ((last.0 - target).abs() - CONSTRAINT_BAND).max(0.0),
        params: x,
        evals: total_evals,
    }
}

fn constrained_search(
    src: &SourceSpec,
    target: f64,
    cfg: &SearchConfig,
    kind: SearchObjective,
) -> Result<SearchFinding> {
    if target.is_nan() || !(0.0..=1.0).contains(&target) {
        return domain_err(format!("target disturbance {target} outside [0, 1]"));
    }
    let label = cfg.validate()?;
    let d = src.dim();
    let eval = |a: &AttackIsometry| -> Option<(f64, f64)> {
        match kind {
            SearchObjective::Fidelity => disturbance_and_fidelity(src, a).ok(),
            SearchObjective::ConditionalEntropy => disturbance_and_entropy(src, a).ok(),
        }
    };
    let per = cfg.per_restart();
    let outcomes: Vec<RestartOutcome> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| constrained_restart(&eval, label, d, target, per, restart_rng(cfg.seed, r)))
        .collect();
    let (best_restart, best, evaluations) = pick_best(outcomes);
    let attack = isometry_from_params(&best.params, label, d)
        .ok_or_else(|| Error::Numerical("best search point does not give an isometry".into()))?;
    let diagnostics = diagnostics_for(&SourceProfile::new(src), &attack)?;
    Ok(SearchFinding {
        objective_kind: kind,
        seed: cfg.seed,
        budget: cfg.budget,
        evaluations,
        restarts: cfg.restarts,
        best_restart,
        target,
        objective: best.objective,
        constraint_residual: best.residual,
        feasible: best.feasible,
        diagnostics,
        attack,
    })
}

/// Minimises `F(ρ_E, ρ′_E)` over attacks with `D(σ_B, σ′_B)` within the
/// band around `target`.
pub fn minimize_fidelity(
    src: &SourceSpec,
    target: f64,
    cfg: &SearchConfig,
) -> Result<SearchFinding> {
    constrained_search(src, target, cfg, SearchObjective::Fidelity)
}

/// Minimises `H(Z|E)` over attacks with `D(σ_B, σ′_B)` within the band
/// around `target`.
pub fn minimize_conditional_entropy(
    src: &SourceSpec,
    target: f64,
    cfg: &SearchConfig,
) -> Result<SearchFinding> {
    constrained_search(src, target, cfg, SearchObjective::ConditionalEntropy)
}

/// Most violating attack found for the zvx norm inequality.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ZvxFinding {
    pub phi: f64,
    pub dim_b: usize,
    pub dim_e: usize,
    pub seed: u64,
    pub budget: usize,
    pub evaluations: usize,
    /// Largest violation found; positive means the inequality fails.
    pub margin: f64,
    pub violation_found: bool,
    pub norms: BobNorms,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackIsometry>,
}

/// Violations at or below this are treated as round-off.
pub const ZVX_TOL: f64 = 1e-9;

/// Source-space Paulis `Z`, `X` and `V = cos φ Z + sin φ X`.
fn zxv_operators(phi: f64) -> [ComplexMatrix; 3] {
    [
        pauli_along([0.0, 0.0, 1.0]),
        pauli_along([1.0, 0.0, 0.0]),
        pauli_along([phi.sin(), 0.0, phi.cos()]),
    ]
}

fn zvx_violation(
    ops: &[ComplexMatrix; 3],
    phi: f64,
    a: &AttackIsometry,
) -> Option<(f64, BobNorms)> {
    let n = bob_norms(&ops[0], &ops[1], &ops[2], a).ok()?;
    Some((-zvx_slack(phi, &n), n))
}

/// Violation as reported, with the norm round-off allowance.
fn zvx_reported(ops: &[ComplexMatrix; 3], phi: f64, a: &AttackIsometry) -> Option<(f64, BobNorms)> {
    let n = bob_norms(&ops[0], &ops[1], &ops[2], a).ok()?;
    Some((-zvx_slack_rounded(phi, &n), n))
}

fn check_phi(phi: f64) -> Result<()> {
    if !phi.is_finite() || phi.sin().abs() < 1e-12 {
        return Err(Error::DegenerateSource(format!(
            "φ = {phi}: the bases share an axis"
        )));
    }
    Ok(())
}

/// Searches attacks with a `dimB`-dimensional detector for the largest
/// violation of
/// `√(1 − v²) ≥ |sin φ| √(1 − x²) − |cos φ| √(1 − z²)`.
pub fn break_zvx_search(phi: f64, cfg: &SearchConfig) -> Result<ZvxFinding> {
    check_phi(phi)?;
    let label = cfg.validate()?;
    if cfg.dim_b < 3 {
        return domain_err(format!(
            "the inequality is a theorem for dimB = 2; the search needs dimB ≥ 3, got {}",
            cfg.dim_b
        ));
    }
    let ops = zxv_operators(phi);
    let len = 2 * label.total() * 2;
    let per = cfg.per_restart();
    let outcomes: Vec<(f64, Vec<f64>, usize)> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = restart_rng(cfg.seed, r);
            let x0 = random_params(&mut rng, len);
            let m = NelderMead::with_budget(per).minimize(
                |p| match isometry_from_params(p, label, 2)
                    .and_then(|a| zvx_violation(&ops, phi, &a))
                {
                    Some((v, _)) => -v,
                    None => f64::INFINITY,
                },
                &x0,
            );
            (-m.value, m.x, m.evals)
        })
        .collect();
    let evaluations = outcomes.iter().map(|o| o.2).sum();
    let mut best = 0;
    for (i, o) in outcomes.iter().enumerate() {
        if o.0 > outcomes[best].0 {
            best = i;
        }
    }
    let attack = isometry_from_params(&outcomes[best].1, label, 2)
        .ok_or_else(|| Error::Numerical("best search point does not give an isometry".into()))?;
    let (margin, norms) = zvx_reported(&ops, phi, &attack)
        .ok_or_else(|| Error::Numerical("could not evaluate the best attack".into()))?;
    Ok(ZvxFinding {
        phi,
        dim_b: cfg.dim_b,
        dim_e: cfg.dim_e,
        seed: cfg.seed,
        budget: cfg.budget,
        evaluations,
        margin,
        violation_found: margin > ZVX_TOL,
        norms,
        attack: Some(attack),
    })
}

/// Largest zvx violation over `samples` Haar-random attacks with a
/// two-dimensional detector and `dimE` cycling through `1..=max_dim_e`.
pub fn zvx_control(phi: f64, samples: usize, max_dim_e: usize, seed: u64) -> Result<ZvxFinding> {
    check_phi(phi)?;
    if samples == 0 || max_dim_e == 0 {
        return domain_err("control run needs at least one sample and dimE ≥ 1");
    }
    let ops = zxv_operators(phi);
    let results: Vec<(f64, BobNorms, usize)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let dim_e = 1 + i % max_dim_e;
            let label = BipartiteLabel::new(2, dim_e)?;
            let s = seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(i as u64);
            let a = AttackIsometry::haar_random(2, label, s)?;
            let (v, n) = zvx_reported(&ops, phi, &a)
                .ok_or_else(|| Error::Numerical("zvx evaluation failed".into()))?;
            Ok((v, n, dim_e))
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.0 > results[best].0 {
            best = i;
        }
    }
    let (margin, norms, dim_e) = results[best];
    Ok(ZvxFinding {
        phi,
        dim_b: 2,
        dim_e,
        seed,
        budget: samples,
        evaluations: samples,
        margin,
        violation_found: margin > ZVX_TOL,
        norms,
        attack: None,
    })
}
