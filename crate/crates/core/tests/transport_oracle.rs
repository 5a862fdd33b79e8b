use aigcbias::lexicon::Scheme;
use aigcbias::transport::{emd_lp, total_variation, wasserstein_01, zero_one_cost, Distribution};
use proptest::prelude::*;

fn simplex(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, m).prop_filter_map("all-zero weights", |w| {
        let s: f64 = w.iter().sum();
        (s > 1e-6).then(|| w.iter().map(|x| x / s).collect())
    })
}

fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..=6).prop_flat_map(|m| (simplex(m), simplex(m)))
}

proptest! {
    #[test]
    fn total_variation_is_the_zero_one_optimum((p, q) in pair()) {
        let lp = emd_lp(&p, &q, &zero_one_cost(p.len())).unwrap();
        prop_assert!((lp - total_variation(&p, &q)).abs() < 1e-9);
    }

    #[test]
    fn three_groups_reduce_to_largest_gap(p in simplex(3), q in simplex(3)) {
        let w = wasserstein_01(
            &Distribution::new(Scheme::Race, p.clone()).unwrap(),
            &Distribution::new(Scheme::Race, q.clone()).unwrap(),
        ).unwrap();
        let max = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!((w - max).abs() < 1e-15);
    }
}

#[test]
fn worked_examples() {
    let d = |s, p: &[f64]| Distribution::new(s, p.to_vec()).unwrap();
    let w2 = wasserstein_01(&d(Scheme::Gender, &[0.75, 0.25]), &d(Scheme::Gender, &[0.5, 0.5])).unwrap();
    assert_eq!(w2, 0.25);
    let w3 = wasserstein_01(&d(Scheme::Race, &[0.3, 0.2, 0.5]), &d(Scheme::Race, &[0.6, 0.2, 0.2])).unwrap();
    assert!((w3 - 0.3).abs() < 1e-15);
}
