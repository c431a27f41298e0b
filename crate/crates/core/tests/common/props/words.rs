use rand::Rng;
use rand_chacha::ChaCha8Rng;

use pwrules::matrix::Matrix;
use pwrules::words::{
    build_attention_graph, louvain, modularity, segment, word_embedding, EdgeThreshold, SegmentConfig,
};

use super::{check, ensure, PropOutcome, CASES};
use crate::common::random_matrix;

const SUITE: &str = "words";
const AMINO: &[u8] = b"ACDEFGHIKLMNPQRSTVWY";

/// Sequence plus attention; half the cases have planted blocks.
fn protein(rng: &mut ChaCha8Rng) -> (String, Matrix) {
    let n = rng.random_range(8..=80);
    let seq: String = (0..n)
        .map(|_| AMINO[rng.random_range(0..AMINO.len())] as char)
        .collect();
    let block = rng.random_range(3..=12);
    let planted = rng.random_bool(0.5);
    let mut attn = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let base: f64 = rng.random_range(0.0..1.0);
            attn[(i, j)] = if planted && i / block == j / block {
                1.0 + base
            } else {
                base * 0.3
            };
        }
    }
    (seq, attn)
}

pub fn suite() -> Vec<PropOutcome> {
    vec![
        check(
            SUITE,
            "louvain modularity is at least the singleton partition's",
            CASES,
            |rng| {
                let (_, attn) = protein(rng);
                let g = build_attention_graph(&attn, EdgeThreshold::default()).map_err(|e| e.to_string())?;
                let labels = louvain(&g, rng.random());
                let singletons: Vec<usize> = (0..g.node_count()).collect();
                let (q, q0) = (modularity(&g, &labels), modularity(&g, &singletons));
                ensure(q >= q0 - 1e-12, || format!("Q {q} below singleton {q0}"))
            },
        ),
        check(SUITE, "segment is deterministic", CASES, |rng| {
            let (seq, attn) = protein(rng);
            let seed = rng.random();
            let a = segment("p", &seq, &attn, seed, &SegmentConfig::default()).map_err(|e| e.to_string())?;
            let b = segment("p", &seq, &attn, seed, &SegmentConfig::default()).map_err(|e| e.to_string())?;
            ensure(a == b, || "two runs differ".into())
        }),
        check(SUITE, "word keys spell the residues at their positions", CASES, |rng| {
            let (seq, attn) = protein(rng);
            let config = SegmentConfig {
                min_len: 1,
                ..SegmentConfig::default()
            };
            let letters: Vec<char> = seq.chars().collect();
            for w in segment("p", &seq, &attn, rng.random(), &config).map_err(|e| e.to_string())? {
                let spelled: String = w.positions.iter().map(|&p| letters[p]).collect();
                ensure(spelled == w.key, || format!("{} vs {spelled}", w.key))?;
                ensure(w.positions.windows(2).all(|p| p[0] < p[1]), || {
                    "positions not increasing".into()
                })?;
            }
            Ok(())
        }),
        check(
            SUITE,
            "word embedding lies in its residues' bounding box",
            CASES,
            |rng| {
                let (seq, attn) = protein(rng);
                let dim = rng.random_range(1..=16);
                let emb = random_matrix(seq.len(), dim, 2.0, rng);
                let config = SegmentConfig {
                    min_len: 1,
                    ..SegmentConfig::default()
                };
                for w in segment("p", &seq, &attn, rng.random(), &config).map_err(|e| e.to_string())? {
                    let v = word_embedding(&w, &emb).map_err(|e| e.to_string())?;
                    for (c, x) in v.iter().enumerate() {
                        let col = w.positions.iter().map(|&p| emb[(p, c)]);
                        let lo = col.clone().fold(f64::INFINITY, f64::min);
                        let hi = col.fold(f64::NEG_INFINITY, f64::max);
                        ensure(lo - 1e-12 <= *x && *x <= hi + 1e-12, || {
                            format!("dim {c}: {x} outside [{lo}, {hi}]")
                        })?;
                    }
                }
                Ok(())
            },
        ),
    ]
}
