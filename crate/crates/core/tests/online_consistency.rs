use imr_core::{
    check_bound_condition, imr_repair, repair_multi_segment, repair_single, LabeledSeries,
    OnlinePrefixModel, RepairConfig, TimeSeries,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

fn prefix_instance(rng: &mut ChaCha8Rng) -> (TimeSeries, LabeledSeries, usize) {
    let obs = Normal::new(10.0, 2.0).unwrap();
    let unit = Normal::new(0.0, 1.0).unwrap();
    loop {
        let n = rng.random_range(8..=40);
        let ell = rng.random_range(2..=n / 2);
        let x: Vec<f64> = (0..n).map(|_| rng.sample(obs)).collect();
        let labels =
            LabeledSeries::from_pairs((0..ell).map(|i| (i, x[i] + rng.sample(unit)))).unwrap();
        let x = TimeSeries::new(x).unwrap();
        if check_bound_condition(&x, &labels, ell).unwrap() {
            return (x, labels, ell);
        }
    }
}

#[test]
fn closed_form_matches_iterative_prefix() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..40 {
        let (x, labels, ell) = prefix_instance(&mut rng);
        let cfg = RepairConfig::new(1, 1e-6).with_max_iterations(2_000_000);
        let it = imr_repair(&x, &labels, &cfg).unwrap();
        assert!(it.converged, "case {case}");
        assert!(
            it.phi_trace.iter().all(|p| p.phi()[0].abs() < 1.0),
            "case {case}"
        );
        let model = OnlinePrefixModel::fit(&x, &labels, ell).unwrap();
        let closed = repair_single(&x, &model).unwrap();
        for (a, b) in closed.iter().zip(&it.values) {
            assert!((a - b).abs() < 1e-3, "case {case}: {a} vs {b}");
        }
    }
}

#[test]
fn two_segment_closed_form_matches_iterative() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let obs = Normal::new(10.0, 2.0).unwrap();
    let unit = Normal::new(0.0, 1.0).unwrap();
    for case in 0..30 {
        let x: Vec<f64> = (0..8).map(|_| rng.sample(obs)).collect();
        // segments (1..=3) and (6) in 1-based terms
        let labels =
            LabeledSeries::from_pairs([0, 1, 2, 5].map(|i| (i, x[i] + rng.sample(unit)))).unwrap();
        let x = TimeSeries::new(x).unwrap();
        let closed = repair_multi_segment(&x, &labels, 1e-12).unwrap();
        let cfg = RepairConfig::new(1, 1e-6).with_max_iterations(2_000_000);
        let it = imr_repair(&x, &labels, &cfg).unwrap();
        if !it.converged {
            continue;
        }
        for (a, b) in closed.values.iter().zip(&it.values) {
            assert!((a - b).abs() < 1e-3, "case {case}: {a} vs {b}");
        }
    }
}
