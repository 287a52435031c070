use std::f64::consts::FRAC_PI_3;

use qkdlab::attack::{build_tightness_attack, AttackIsometry};
use qkdlab::keyrate::ObservedStats;
use qkdlab::quantum::BipartiteLabel;
use qkdlab::sim::{
    keyrate_for_source, simulate_with_profile, theoretical_rates, DetectorSpec, RunConfig,
};
use qkdlab::source::{SourceProfile, SourceSpec};

/// Mean |rate(empirical) − rate(theoretical)| over a few seeds.
fn mean_gap(profile: &SourceProfile, att: &AttackIsometry, det: &DetectorSpec, rounds: u64) -> f64 {
    let (tz, tx) = theoretical_rates(&profile.source, att, det).unwrap();
    let exact = keyrate_for_source(profile, &ObservedStats::new(tz, tx).unwrap())
        .unwrap()
        .rate;
    let seeds = 0..12u64;
    let n = seeds.end as f64;
    seeds
        .map(|seed| {
            let cfg = RunConfig::new(rounds, 0.5, seed).unwrap();
            let r = simulate_with_profile(profile, att, det, &cfg).unwrap();
            (r.keyrate_at_empirical.unwrap().rate - exact).abs()
        })
        .sum::<f64>()
        / n
}

#[test]
fn empirical_keyrate_approaches_theoretical() {
    let (src, att) = build_tightness_attack(FRAC_PI_3, 0.2).unwrap();
    let noisy = AttackIsometry::haar_random(2, BipartiteLabel::new(2, 2).unwrap(), 4).unwrap();
    let ideal = SourceSpec::ideal_bb84();
    for (src, att) in [(&src, &att), (&ideal, &noisy)] {
        let profile = SourceProfile::new(src);
        let det = DetectorSpec::helstrom(src, att).unwrap();
        let coarse = mean_gap(&profile, att, &det, 2_000);
        let fine = mean_gap(&profile, att, &det, 200_000);
        assert!(
            fine < coarse / 3.0,
            "gap {coarse} at 2e3 rounds, {fine} at 2e5"
        );
    }
}

#[test]
fn error_counts_are_binomially_spread() {
    // z-scores of 40 seeds at 1e4 rounds should look standard normal
    let (src, att) = build_tightness_attack(FRAC_PI_3, 0.4).unwrap();
    let det = DetectorSpec::computational(2).unwrap();
    let profile = SourceProfile::new(&src);
    let (tz, _) = theoretical_rates(&src, &att, &det).unwrap();
    let z: Vec<f64> = (0..40u64)
        .map(|seed| {
            let r = simulate_with_profile(
                &profile,
                &att,
                &det,
                &RunConfig::new(10_000, 0.5, seed).unwrap(),
            )
            .unwrap();
            let n = r.sifted_z as f64;
            (r.errors_z as f64 - n * tz) / (n * tz * (1.0 - tz)).sqrt()
        })
        .collect();
    let mean = z.iter().sum::<f64>() / z.len() as f64;
    let var = z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (z.len() - 1) as f64;
    assert!(mean.abs() < 4.0 / (z.len() as f64).sqrt(), "mean z {mean}");
    assert!((0.4..2.0).contains(&var), "var z {var}");
}
