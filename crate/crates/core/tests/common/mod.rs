#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use topicdrift::corpus::DocTermMatrix;

pub const WORDS_PER_TOPIC: usize = 50;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn dirichlet(alpha: &[f64], rng: &mut impl Rng) -> Vec<f64> {
    let draws: Vec<f64> = alpha.iter().map(|&a| Gamma::new(a, 1.0).unwrap().sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|x| x / total).collect()
}

pub fn term_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("w{i:03}")).collect()
}

/// Documents drawn from `k` topics with disjoint, uniform 50-word
/// vocabularies: topic `t` owns terms `50t..50(t+1)`. Returns the matrix and
/// the generating doc-topic mixtures.
pub fn disjoint_topic_corpus(n_docs: usize, k: usize, doc_len: usize, seed: u64) -> (DocTermMatrix, Vec<Vec<f64>>) {
    let mut rng = rng(seed);
    let mut rows = Vec::with_capacity(n_docs);
    let mut mixtures = Vec::with_capacity(n_docs);
    for _ in 0..n_docs {
        let theta = dirichlet(&vec![0.5; k], &mut rng);
        let mut row = Vec::with_capacity(doc_len);
        for _ in 0..doc_len {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut topic = k - 1;
            for (t, &p) in theta.iter().enumerate() {
                acc += p;
                if u < acc {
                    topic = t;
                    break;
                }
            }
            row.push((topic * WORDS_PER_TOPIC + rng.random_range(0..WORDS_PER_TOPIC), 1));
        }
        rows.push(row);
        mixtures.push(theta);
    }
    let ids = (0..n_docs).map(|d| format!("d{d:04}")).collect();
    let years = (0..n_docs).map(|d| 1700 + (d % 50) as i32).collect();
    (DocTermMatrix::from_rows(rows, term_names(k * WORDS_PER_TOPIC), ids, years), mixtures)
}
