mod common;

use ndarray::Array2;
use proptest::prelude::*;
use topicdrift::align::{align, normalize, parse_series, AlignOptions, ExternalSeries, LoadOptions, Normalization};
use topicdrift::divergence::{yearly_distributions, yearly_distributions_weighted};

fn random_theta(n: usize, k: usize, seed: u64) -> Array2<f64> {
    let mut rng = common::rng(seed);
    let mut theta = Array2::zeros((n, k));
    for d in 0..n {
        for (t, x) in common::dirichlet(&vec![0.7; k], &mut rng).into_iter().enumerate() {
            theta[[d, t]] = x;
        }
    }
    theta
}

#[test]
fn yearly_mean_matches_brute_force() {
    let theta = random_theta(80, 6, 3);
    let years: Vec<i32> = (0..80).map(|d| if d < 50 { 1789 } else { 1790 + (d % 3) as i32 }).collect();
    let series = yearly_distributions(theta.view(), &years).unwrap();
    assert_eq!(series.years, vec![1789, 1790, 1791, 1792]);
    assert_eq!(series.doc_counts[0], 50);
    for (y, year) in series.years.iter().enumerate() {
        let members: Vec<usize> = (0..80).filter(|&d| years[d] == *year).collect();
        for t in 0..6 {
            // reverse order accumulation as an independent recount
            let mean = members.iter().rev().map(|&d| theta[[d, t]]).sum::<f64>() / members.len() as f64;
            assert!((series.distributions[y].as_slice()[t] - mean).abs() <= 1e-12);
        }
    }
}

#[test]
fn token_weighted_mean_matches_brute_force() {
    let theta = random_theta(30, 4, 4);
    let years: Vec<i32> = (0..30).map(|d| 1800 + (d % 2) as i32).collect();
    let weights: Vec<f64> = (0..30).map(|d| 50.0 + 7.0 * d as f64).collect();
    let series = yearly_distributions_weighted(theta.view(), &years, &weights).unwrap();
    for (y, year) in series.years.iter().enumerate() {
        let members: Vec<usize> = (0..30).filter(|&d| years[d] == *year).collect();
        let total: f64 = members.iter().map(|&d| weights[d]).sum();
        for t in 0..4 {
            let mean = members.iter().map(|&d| weights[d] * theta[[d, t]]).sum::<f64>() / total;
            assert!((series.distributions[y].as_slice()[t] - mean).abs() <= 1e-12);
        }
    }
}

#[test]
fn three_row_series_loads_and_interpolates_exactly() {
    let ext = parse_series("year,gdppc\n1700,1000\n1750,1100\n1800,1300\n", &LoadOptions::default()).unwrap();
    assert_eq!(ext.points, vec![(1700, 1000.0), (1750, 1100.0), (1800, 1300.0)]);
    let topic: Vec<(i32, f64)> = (1700..=1800).map(|y| (y, (y - 1700) as f64 / 100.0)).collect();
    let opts = AlignOptions { normalization: Normalization::None, interpolate: true };
    let overlay = align(&topic, &ext, &opts).unwrap();
    assert_eq!(overlay.years.len(), 101);
    for (i, &year) in overlay.years.iter().enumerate() {
        match year {
            1700 => assert_eq!(overlay.external_values[i], 1000.0),
            1750 => assert_eq!(overlay.external_values[i], 1100.0),
            1800 => assert_eq!(overlay.external_values[i], 1300.0),
            1725 => assert_eq!(overlay.external_values[i], 1050.0),
            1775 => assert_eq!(overlay.external_values[i], 1200.0),
            _ => {}
        }
        assert_eq!(overlay.interpolated[i], ![1700, 1750, 1800].contains(&year));
    }
}

#[test]
fn without_interpolation_only_shared_years_remain() {
    let ext = ExternalSeries { name: "x".into(), unit: "u".into(), points: vec![(1700, 1.0), (1710, 2.0), (1900, 4.0)] };
    let topic: Vec<(i32, f64)> = (1700..=1720).map(|y| (y, 0.5)).collect();
    let overlay = align(&topic, &ext, &AlignOptions::default()).unwrap();
    assert_eq!(overlay.years, vec![1700, 1710]);
    assert!(overlay.topic_degenerate);
    assert_eq!(overlay.topic_values, vec![0.0, 0.0]);
    assert_eq!(overlay.external_values, vec![0.0, 1.0]);
}

proptest! {
    #[test]
    fn min_max_of_monotone_series_hits_zero_and_one(start in -1e6f64..1e6, steps in prop::collection::vec(1e-3f64..1e3, 1..50)) {
        let mut values = vec![start];
        for s in &steps {
            values.push(values.last().unwrap() + s);
        }
        let (norm, degenerate) = normalize(&values, Normalization::MinMax);
        prop_assert!(!degenerate);
        prop_assert_eq!(norm[0], 0.0);
        prop_assert_eq!(*norm.last().unwrap(), 1.0);
        prop_assert!(norm.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn z_score_has_zero_mean_unit_variance(values in prop::collection::vec(-1e3f64..1e3, 2..60)) {
        let (z, degenerate) = normalize(&values, Normalization::ZScore);
        prop_assume!(!degenerate);
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        prop_assert!(mean.abs() < 1e-9);
        prop_assert!((var - 1.0).abs() < 1e-9);
    }
}

#[test]
fn country_extract_matches_independent_line_count() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/sample/external_series.csv");
    let opts = LoadOptions { filter: Some(("country".into(), "France".into())), ..LoadOptions::default() };
    let series = topicdrift::align::load_series(&path, &opts).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let expected: Vec<i32> = text
        .lines()
        .skip(1)
        .filter_map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0] == "France" && !f[2].is_empty()).then(|| f[1].parse().unwrap())
        })
        .collect();
    assert_eq!(series.points.iter().map(|p| p.0).collect::<Vec<_>>(), expected);
    assert_eq!(series.points.first().unwrap().0, 1700);
    assert_eq!(series.points.last().unwrap().0, 1900);
    assert!(expected.len() < 21, "gaps expected");
}
