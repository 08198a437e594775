mod common;

use proptest::prelude::*;
use topicdrift::divergence::{jsd, jsd_series, kl_divergence, yearly_distributions, ProbVector};

fn pv(v: &[f64]) -> ProbVector {
    ProbVector::new(v.to_vec()).unwrap()
}

/// Entropy form `H(m) − (H(p) + H(q)) / 2`, independent of the KL sum used
/// by the library.
fn jsd_entropy_form(p: &[f64], q: &[f64]) -> f64 {
    let h = |v: &[f64]| -v.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>() / std::f64::consts::LN_2;
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| (a + b) / 2.0).collect();
    h(&m) - (h(p) + h(q)) / 2.0
}

#[test]
fn kl_point_mass_against_uniform_is_one_bit() {
    assert_eq!(kl_divergence(&pv(&[1.0, 0.0]), &pv(&[0.5, 0.5])).unwrap(), 1.0);
}

#[test]
fn kl_outside_support_is_infinite() {
    assert_eq!(kl_divergence(&pv(&[0.5, 0.5]), &pv(&[1.0, 0.0])).unwrap(), f64::INFINITY);
}

#[test]
fn jsd_disjoint_support_is_one_bit() {
    assert_eq!(jsd(&pv(&[1.0, 0.0]), &pv(&[0.0, 1.0])).unwrap(), 1.0);
}

#[test]
fn jsd_matches_high_precision_value() {
    // 40-digit evaluation of H(m) − (H(p) + H(q)) / 2 in arbitrary precision
    const EXPECTED: f64 = 0.048_794_940_695_398_532_581;
    let got = jsd(&pv(&[0.5, 0.5]), &pv(&[0.25, 0.75])).unwrap();
    assert!((got - EXPECTED).abs() <= 1e-12, "{got}");
    assert!((jsd_entropy_form(&[0.5, 0.5], &[0.25, 0.75]) - EXPECTED).abs() <= 1e-12);
}

#[test]
fn length_mismatch_is_error() {
    assert!(jsd(&pv(&[1.0]), &pv(&[0.5, 0.5])).is_err());
}

#[test]
fn yearly_jsd_series_matches_pairwise_calls() {
    let mut rng = common::rng(5);
    let mut mix = Vec::new();
    let mut years = Vec::new();
    for y in 0..20 {
        for _ in 0..3 {
            mix.extend(common::dirichlet(&[1.0; 4], &mut rng));
            years.push(1800 + 2 * y);
        }
    }
    let theta = ndarray::Array2::from_shape_vec((60, 4), mix).unwrap();
    let series = yearly_distributions(theta.view(), &years).unwrap();
    let js = jsd_series(&series).unwrap();
    assert_eq!(js.values.len(), 19);
    for (i, v) in js.values.iter().enumerate() {
        assert_eq!(*v, jsd(&series.distributions[i], &series.distributions[i + 1]).unwrap());
    }
}

fn distribution(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, len).prop_filter_map("nonzero mass", |v| {
        let s: f64 = v.iter().sum();
        (s > 1e-6).then(|| v.into_iter().map(|x| x / s).collect())
    })
}

fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..12).prop_flat_map(|n| (distribution(n), distribution(n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn jsd_symmetric_bounded_and_zero_iff_equal((p, q) in pair()) {
        let (pp, qq) = (pv(&p), pv(&q));
        let a = jsd(&pp, &qq).unwrap();
        let b = jsd(&qq, &pp).unwrap();
        prop_assert!((a - b).abs() <= 1e-15);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(jsd(&pp, &pp).unwrap() <= 1e-9);
        let l1: f64 = p.iter().zip(&q).map(|(x, y)| (x - y).abs()).sum();
        if l1 > 1e-3 {
            prop_assert!(a > 0.0, "distinct distributions gave jsd 0");
        }
        prop_assert!((a - jsd_entropy_form(&p, &q)).abs() <= 1e-9);
    }
}
