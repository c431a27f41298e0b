//! Synthetic data with one planted rule.
//!
//! Proteins are concatenations of short words drawn from a background pool;
//! half of them also carry a designated word. Ligands are chains of two or
//! three ring blocks joined by single bonds; a designated ring occurs only in
//! ligands that are active on the carrier proteins. The attention matrix of
//! each protein is 1 inside a word and below 0.2 elsewhere, and residue
//! embeddings are per-letter vectors plus small noise, so segmentation and
//! pooling recover the words exactly.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chem::{canonical_key, parse_smiles};
use crate::dataset::{AffinityRecord, AffinityType, ProteinRecord, Source};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const PLANTED_WORD: &str = "DTGADWK";
/// Morpholine: contains none of the background rings.
pub const PLANTED_FRAGMENT: &str = "C1COCCN1";

const AMINO: &[u8] = b"ACDEFGHIKLMNPQRSTVWY";

/// Ring blocks as (terminal, internal) templates; `{d}` is the ring-closure
/// digit, `{s}` the next block. The first atom bonds to the previous block.
const BACKGROUND_RINGS: &[(&str, &str)] = &[
    ("c{d}ccccc{d}", "c{d}ccc(-{s})cc{d}"),
    ("c{d}ccncc{d}", "c{d}ccc(-{s})nc{d}"),
    ("c{d}ccsc{d}", "c{d}cc(-{s})sc{d}"),
    ("C{d}CCCCC{d}", "C{d}CCC({s})CC{d}"),
    ("C{d}CCNCC{d}", "C{d}CC({s})NCC{d}"),
    ("c{d}ccoc{d}", "c{d}cc(-{s})oc{d}"),
    ("c{d}cnccn{d}", "c{d}cnc(-{s})cn{d}"),
    ("c{d}cncnc{d}", "c{d}cc(-{s})ncn{d}"),
    ("C{d}CCOC{d}", "C{d}CC({s})OC{d}"),
    ("c{d}cc[nH]c{d}", "c{d}cc(-{s})[nH]c{d}"),
];
const PLANTED_RING: (&str, &str) = ("N{d}CCOCC{d}", "C{d}CN({s})CCO{d}");
/// Takes the planted ring's place in screening decoys.
const DECOY_RING: (&str, &str) = ("C{d}CCCC{d}", "C{d}CC({s})CC{d}");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_proteins: usize,
    pub n_planted: usize,
    pub n_ligands: usize,
    pub n_planted_ligands: usize,
    pub words_per_protein: usize,
    pub background_words: usize,
    pub embed_dim: usize,
    pub screen_actives: usize,
    pub decoys_per_active: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_proteins: 60,
            n_planted: 30,
            n_ligands: 200,
            n_planted_ligands: 40,
            words_per_protein: 5,
            background_words: 10,
            embed_dim: 16,
            screen_actives: 20,
            decoys_per_active: 20,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthProtein {
    pub record: ProteinRecord,
    pub attention: Matrix,
    pub residue_embeddings: Matrix,
    pub planted: bool,
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub proteins: Vec<SynthProtein>,
    /// (ligand id, SMILES).
    pub ligands: Vec<(String, String)>,
    pub affinities: Vec<AffinityRecord>,
    /// A carrier protein that is in neither the affinity data nor the
    /// training set, used as the screening target.
    pub query: SynthProtein,
    /// (molecule id, SMILES) in shuffled order.
    pub screening_library: Vec<(String, String)>,
    pub screening_actives: Vec<String>,
    pub planted_word: String,
    pub planted_fragment: String,
}

fn random_word(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len)
        .map(|_| *AMINO.choose(rng).expect("non-empty") as char)
        .collect()
}

fn letter_vectors(rng: &mut ChaCha8Rng, dim: usize) -> Vec<Vec<f64>> {
    (0..AMINO.len())
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

fn build_protein(
    id: &str,
    words: &[String],
    letters: &[Vec<f64>],
    rng: &mut ChaCha8Rng,
    planted: bool,
) -> Result<SynthProtein> {
    let sequence: String = words.concat();
    let n = sequence.len();
    let mut attn = Matrix::zeros(n, n);
    let mut block = Vec::with_capacity(n);
    for (w, word) in words.iter().enumerate() {
        block.extend(std::iter::repeat_n(w, word.len()));
    }
    for i in 0..n {
        for j in 0..n {
            attn[(i, j)] = if block[i] == block[j] {
                1.0
            } else {
                rng.random_range(0.0..0.2)
            };
        }
    }
    let dim = letters[0].len();
    let mut emb = Matrix::zeros(n, dim);
    for (i, c) in sequence.bytes().enumerate() {
        let l = AMINO.iter().position(|&a| a == c).expect("amino letter");
        for k in 0..dim {
            emb[(i, k)] = letters[l][k] + rng.random_range(-0.05..0.05);
        }
    }
    Ok(SynthProtein {
        record: ProteinRecord {
            protein_id: id.to_string(),
            sequence,
        },
        attention: attn,
        residue_embeddings: emb,
        planted,
    })
}

fn assemble(blocks: &[(&str, &str)]) -> String {
    let mut s = String::from("{s}");
    for (depth, (terminal, internal)) in blocks.iter().enumerate() {
        let t = if depth + 1 == blocks.len() { terminal } else { internal };
        let part = t.replace("{d}", &(depth + 1).to_string());
        s = s.replacen("{s}", &part, 1);
    }
    s
}

fn ligand_blocks(
    rng: &mut ChaCha8Rng,
    special: Option<(&'static str, &'static str)>,
    n_background: usize,
) -> Vec<(&'static str, &'static str)> {
    let mut blocks: Vec<(&str, &str)> = BACKGROUND_RINGS.choose_multiple(rng, n_background).copied().collect();
    if let Some(s) = special {
        blocks.push(s);
    }
    blocks.shuffle(rng);
    blocks
}

/// Distinct ligands (by canonical key) drawn until `n` are collected.
fn distinct_ligands(
    rng: &mut ChaCha8Rng,
    n: usize,
    special: Option<(&'static str, &'static str)>,
    seen: &mut BTreeSet<String>,
) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut attempts = 0;
    while out.len() < n {
        attempts += 1;
        if attempts > 100 * n + 1000 {
            return Err(Error::Value(format!("cannot draw {n} distinct synthetic ligands")));
        }
        let n_bg = if special.is_some() {
            rng.random_range(1..=2)
        } else {
            rng.random_range(2..=3)
        };
        let smiles = assemble(&ligand_blocks(rng, special, n_bg));
        let key = canonical_key(&parse_smiles(&smiles)?);
        if seen.insert(key) {
            out.push(smiles);
        }
    }
    Ok(out)
}

fn record(protein: &str, smiles: &str, active: bool, rng: &mut ChaCha8Rng) -> AffinityRecord {
    AffinityRecord {
        protein_id: protein.to_string(),
        smiles: smiles.to_string(),
        affinity_type: AffinityType::Ki,
        value_nm: if active {
            rng.random_range(10.0..1000.0)
        } else {
            rng.random_range(20_000.0..100_000.0)
        },
        source: Source::Bindingdb,
    }
}

pub fn generate(config: &SynthConfig) -> Result<SynthDataset> {
    if config.n_planted > config.n_proteins || config.n_planted_ligands > config.n_ligands {
        return Err(Error::Value("planted counts exceed totals".into()));
    }
    if config.words_per_protein < 2 || config.background_words < config.words_per_protein {
        return Err(Error::Value(
            "need at least 2 words per protein and enough background words".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let letters = letter_vectors(&mut rng, config.embed_dim);
    let mut pool: BTreeSet<String> = BTreeSet::new();
    while pool.len() < config.background_words {
        let len = rng.random_range(6..=8);
        let w = random_word(&mut rng, len);
        if w != PLANTED_WORD {
            pool.insert(w);
        }
    }
    let pool: Vec<String> = pool.into_iter().collect();

    let make_protein = |id: &str, planted: bool, rng: &mut ChaCha8Rng| {
        let n_bg = if planted {
            config.words_per_protein - 1
        } else {
            config.words_per_protein
        };
        let mut words: Vec<String> = pool.choose_multiple(rng, n_bg).cloned().collect();
        if planted {
            words.push(PLANTED_WORD.to_string());
        }
        words.shuffle(rng);
        build_protein(id, &words, &letters, rng, planted)
    };
    let mut planted_flags: Vec<bool> = (0..config.n_proteins).map(|i| i < config.n_planted).collect();
    planted_flags.shuffle(&mut rng);
    let proteins: Vec<SynthProtein> = planted_flags
        .iter()
        .enumerate()
        .map(|(i, &p)| make_protein(&format!("P{:03}", i + 1), p, &mut rng))
        .collect::<Result<_>>()?;
    let query = make_protein("Q001", true, &mut rng)?;

    let mut seen = BTreeSet::new();
    let planted_ligs = distinct_ligands(&mut rng, config.n_planted_ligands, Some(PLANTED_RING), &mut seen)?;
    let other_ligs = distinct_ligands(&mut rng, config.n_ligands - config.n_planted_ligands, None, &mut seen)?;
    let mut ligands: Vec<(String, String)> = Vec::with_capacity(config.n_ligands);
    for (i, s) in planted_ligs.iter().chain(&other_ligs).enumerate() {
        ligands.push((format!("L{:03}", i + 1), s.clone()));
    }

    // Carriers: 8 planted-ring actives, 2 other actives, 2 other inactives.
    // Others: 4 planted-ring inactives, 4 other actives, 4 other inactives.
    let mut affinities = Vec::new();
    for p in &proteins {
        let pid = &p.record.protein_id;
        let (n_pa, n_pi, n_oa, n_oi) = if p.planted { (8, 0, 2, 2) } else { (0, 4, 4, 4) };
        let mut planted_pick: Vec<&String> = planted_ligs.choose_multiple(&mut rng, n_pa + n_pi).collect();
        let other_pick: Vec<&String> = other_ligs.choose_multiple(&mut rng, n_oa + n_oi).collect();
        for (k, s) in planted_pick.drain(..).enumerate() {
            affinities.push(record(pid, s, k < n_pa, &mut rng));
        }
        for (k, s) in other_pick.into_iter().enumerate() {
            affinities.push(record(pid, s, k < n_oa, &mut rng));
        }
    }
    affinities.shuffle(&mut rng);

    // Screening library: actives carry the planted ring plus two or three
    // background rings; decoys swap the planted ring for a ring outside the corpus.
    let mut screen_seen = BTreeSet::new();
    let screen_actives = distinct_screen(&mut rng, config.screen_actives, PLANTED_RING, &mut screen_seen)?;
    let screen_decoys = distinct_screen(
        &mut rng,
        config.screen_actives * config.decoys_per_active,
        DECOY_RING,
        &mut screen_seen,
    )?;
    // Ids carry no class information: they are assigned after a shuffle so
    // score ties broken by id do not favour either class.
    let mut pool: Vec<(String, bool)> = screen_actives
        .into_iter()
        .map(|s| (s, true))
        .chain(screen_decoys.into_iter().map(|s| (s, false)))
        .collect();
    pool.shuffle(&mut rng);
    let mut screening_library = Vec::with_capacity(pool.len());
    let mut actives = Vec::new();
    for (i, (s, active)) in pool.into_iter().enumerate() {
        let id = format!("M{:04}", i + 1);
        if active {
            actives.push(id.clone());
        }
        screening_library.push((id, s));
    }

    Ok(SynthDataset {
        proteins,
        ligands,
        affinities,
        query,
        screening_library,
        screening_actives: actives,
        planted_word: PLANTED_WORD.to_string(),
        planted_fragment: canonical_key(&parse_smiles(PLANTED_FRAGMENT)?),
    })
}

fn distinct_screen(
    rng: &mut ChaCha8Rng,
    n: usize,
    special: (&'static str, &'static str),
    seen: &mut BTreeSet<String>,
) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut attempts = 0;
    while out.len() < n {
        attempts += 1;
        if attempts > 100 * n + 1000 {
            return Err(Error::Value(format!("cannot draw {n} distinct screening molecules")));
        }
        let n_bg = rng.random_range(2..=3);
        let smiles = assemble(&ligand_blocks(rng, Some(special), n_bg));
        let key = canonical_key(&parse_smiles(&smiles)?);
        if seen.insert(key) {
            out.push(smiles);
        }
    }
    Ok(out)
}
