mod common;

use std::time::Instant;

use common::WORDS_PER_TOPIC;
use ndarray::Array2;
use topicdrift::corpus::DocTermMatrix;
use topicdrift::lda::{fit_lda, fit_lda_observed, perplexity, LdaConfig};
use topicdrift::model::match_topics;

fn config(k: usize, seed: u64) -> LdaConfig {
    LdaConfig { alpha: 0.5, seed, ..LdaConfig::with_topics(k) }
}

/// Generating topic-word matrix of the disjoint corpus.
fn true_phi(k: usize) -> Array2<f64> {
    let mut phi = Array2::zeros((k, k * WORDS_PER_TOPIC));
    for t in 0..k {
        for w in 0..WORDS_PER_TOPIC {
            phi[[t, t * WORDS_PER_TOPIC + w]] = 1.0 / WORDS_PER_TOPIC as f64;
        }
    }
    phi
}

/// Mean over true topics of the mass the matched fitted topic puts on that
/// topic's vocabulary block.
fn recovered_mass(phi: &Array2<f64>, k: usize) -> f64 {
    let matching = match_topics(true_phi(k).view(), phi.view());
    let mut total = 0.0;
    for (t, &fitted) in matching.iter().enumerate() {
        total += (0..WORDS_PER_TOPIC).map(|w| phi[[fitted, t * WORDS_PER_TOPIC + w]]).sum::<f64>();
    }
    total / k as f64
}

#[test]
fn recovers_two_disjoint_topics() {
    let started = Instant::now();
    let (matrix, _) = common::disjoint_topic_corpus(200, 2, 100, 7);
    let mut violations = Vec::new();
    let mut sweeps = 0;
    let model = fit_lda_observed(&matrix, &config(2, 1), |sweep, state| {
        sweeps = sweep;
        if let Err(e) = state.check_conservation() {
            violations.push((sweep, e));
        }
    })
    .unwrap();
    assert_eq!(sweeps, 1000);
    assert!(violations.is_empty(), "{violations:?}");
    let mass = recovered_mass(&model.phi, 2);
    assert!(mass >= 0.9, "mean mass on correct vocabulary {mass}");
    assert!(started.elapsed().as_secs() < 30, "{:?}", started.elapsed());
}

#[test]
fn same_seed_is_bitwise_reproducible() {
    let (matrix, _) = common::disjoint_topic_corpus(60, 2, 50, 3);
    let cfg = LdaConfig { iterations: 200, burn_in: 100, ..config(2, 99) };
    let a = fit_lda(&matrix, &cfg).unwrap();
    let b = fit_lda(&matrix, &cfg).unwrap();
    let bits = |m: &Array2<f64>| m.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.theta), bits(&b.theta));
    assert_eq!(bits(&a.phi), bits(&b.phi));
    let c = fit_lda(&matrix, &LdaConfig { seed: 100, ..cfg }).unwrap();
    assert_ne!(bits(&a.theta), bits(&c.theta));
}

#[test]
fn two_topics_beat_one_on_perplexity() {
    let (matrix, _) = common::disjoint_topic_corpus(100, 2, 80, 5);
    let short = |k| LdaConfig { iterations: 300, burn_in: 150, ..config(k, 2) };
    let p1 = perplexity(&fit_lda(&matrix, &short(1)).unwrap(), &matrix).unwrap();
    let p2 = perplexity(&fit_lda(&matrix, &short(2)).unwrap(), &matrix).unwrap();
    assert!(p2 < p1, "K=2 {p2} vs K=1 {p1}");
}

/// Reordering the documents and mapping the rows back gives the same topics
/// up to relabeling.
#[test]
fn document_order_is_exchangeable() {
    let (matrix, _) = common::disjoint_topic_corpus(150, 2, 80, 9);
    let n = matrix.n_docs();
    let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
    let permuted = DocTermMatrix::from_rows(
        perm.iter().map(|&d| matrix.row(d).to_vec()).collect(),
        matrix.terms().to_vec(),
        perm.iter().map(|&d| matrix.doc_ids()[d].clone()).collect(),
        perm.iter().map(|&d| matrix.doc_years()[d]).collect(),
    );
    let cfg = LdaConfig { iterations: 400, burn_in: 200, ..config(2, 4) };
    let a = fit_lda(&matrix, &cfg).unwrap();
    let b = fit_lda(&permuted, &cfg).unwrap();
    let relabel = match_topics(a.phi.view(), b.phi.view());

    // dominant topic of each document, compared after undoing both permutations
    let dominant = |row: ndarray::ArrayView1<f64>| (0..row.len()).max_by(|&i, &j| row[i].total_cmp(&row[j])).unwrap();
    let mut agree = 0;
    for (pos, &d) in perm.iter().enumerate() {
        if relabel[dominant(a.theta.row(d))] == dominant(b.theta.row(pos)) {
            agree += 1;
        }
    }
    let rate = agree as f64 / n as f64;
    assert!(rate >= 0.95, "agreement {rate}");
}
