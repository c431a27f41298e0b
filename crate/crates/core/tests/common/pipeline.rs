//! The planted-rule pipeline run in process: synthetic data through
//! labels, training, attribution, rules and screening.

use std::collections::{BTreeMap, HashMap, HashSet};

use pwrules::attribution::{IgConfig, RuleRecord};
use pwrules::chem::{canonical_key, parse_smiles, Molecule};
use pwrules::dataset::{dedup_all, ingest, label_matrix, split, DedupPolicy, Interaction, SplitMode, SplitSpec};
use pwrules::fragment::{build_library, DefaultCutRules, FragmentLibrary, LibraryConfig};
use pwrules::model::{build_samples, train, ModelConfig, TrainConfig, TrainOutcome, ValidationSet};
use pwrules::pipeline::{embed_words, extract_rules_for, group_words, merge_labels, word_keys, word_matrices};
use pwrules::rulebase::{
    annotate_accuracy, filter_rules, predict_privileged, Aggregation, FragmentPrediction, ReferenceIndex, RuleDb,
};
use pwrules::screening::{
    metric_report, rank_results, score_fragments, screen, MetricReport, Orientation, DEFAULT_CAP,
};
use pwrules::synth::{generate, SynthConfig, SynthDataset};
use pwrules::words::{build_dictionary, filter_words, segment, SegmentConfig};

pub struct PlantedRun {
    pub data: SynthDataset,
    pub library: FragmentLibrary,
    /// Library id of the planted fragment.
    pub planted_id: String,
    /// Filtered word keys per protein, in segmentation order.
    pub words: BTreeMap<String, Vec<String>>,
    pub query_words: Vec<String>,
    pub outcome: TrainOutcome,
    /// Validation MCC of the planted fragment column alone at the selected
    /// checkpoint.
    pub planted_val_mcc: Option<f64>,
    pub raw_rules: Vec<RuleRecord>,
    pub db: RuleDb,
    pub predictions: Vec<FragmentPrediction>,
    /// (molecule id, PWScore) best first.
    pub ranking: Vec<(String, f64)>,
    pub metrics: MetricReport,
}

impl PlantedRun {
    /// Rules for the planted fragment, best first.
    pub fn planted_rules(&self) -> Vec<&RuleRecord> {
        let mut r: Vec<&RuleRecord> = self.db.for_fragment(&self.planted_id).collect();
        r.sort_by(|a, b| b.rule_score.total_cmp(&a.rule_score).then_with(|| a.word.cmp(&b.word)));
        r
    }

    pub fn planted_rule_is_top(&self) -> bool {
        self.planted_rules()
            .first()
            .is_some_and(|r| r.word == self.data.planted_word)
    }

    /// Byte serialization of every stage output, for determinism checks.
    pub fn fingerprint(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.library.write_jsonl(&mut out).unwrap();
        out.extend(serde_json::to_vec(&self.words).unwrap());
        out.extend(serde_json::to_vec(&self.query_words).unwrap());
        out.extend(format!("{:?}\n", self.outcome.log).bytes());
        for v in self.outcome.model.params() {
            out.extend(v.to_le_bytes());
        }
        for r in &self.raw_rules {
            out.extend(serde_json::to_vec(r).unwrap());
        }
        self.db.write(&mut out).unwrap();
        out.extend(serde_json::to_vec(&self.predictions).unwrap());
        for (id, s) in &self.ranking {
            out.extend(id.bytes());
            out.extend(s.to_le_bytes());
        }
        out
    }
}

/// Desk-scale schedule: the library defaults assume far more data.
pub fn train_config() -> TrainConfig {
    TrainConfig {
        lr: 3e-3,
        batch_size: 8,
        max_epochs: 200,
        patience: 60,
        ..TrainConfig::default()
    }
}

pub fn run_planted(seed: u64) -> PlantedRun {
    run_planted_with(seed, &train_config())
}

pub fn run_planted_with(seed: u64, tc: &TrainConfig) -> PlantedRun {
    let data = generate(&SynthConfig {
        seed,
        ..SynthConfig::default()
    })
    .expect("synthetic data");
    let seg = SegmentConfig::default();

    let sequences: HashMap<String, String> = data
        .proteins
        .iter()
        .map(|p| (p.record.protein_id.clone(), p.record.sequence.clone()))
        .collect();
    let report = ingest(data.affinities.clone(), &sequences).expect("ingest");
    assert!(
        report.rejected.is_empty(),
        "synthetic records rejected: {:?}",
        report.rejected
    );
    let records = dedup_all(&report.records, DedupPolicy::SourceFirst);

    let ligands: Vec<Molecule> = records
        .iter()
        .map(|r| r.smiles.as_str())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .map(|s| parse_smiles(s).expect("canonical SMILES parses"))
        .collect();
    let library = build_library(&ligands, &LibraryConfig::default(), &DefaultCutRules::default()).expect("library");
    let planted_id = library
        .fragments()
        .iter()
        .find(|f| canonical_key(&parse_smiles(&f.smiles).unwrap()) == data.planted_fragment)
        .map(|f| f.fragment_id.clone())
        .expect("planted fragment in library");

    let interactions: Vec<Interaction> = records.iter().map(Interaction::from).collect();
    let pairs: Vec<(String, String)> = interactions
        .iter()
        .map(|i| (i.protein_id.clone(), i.smiles.clone()))
        .collect();
    let splits = split(&pairs, &SplitSpec::new(SplitMode::NovelProtein, seed)).expect("split");
    let subset = |name: &str| -> Vec<Interaction> {
        splits
            .get(name)
            .unwrap()
            .iter()
            .map(|&i| interactions[i].clone())
            .collect()
    };
    let train_labels = label_matrix(&subset("train"), &library, 1).expect("train labels");
    let val_labels = label_matrix(&subset("val"), &library, 1).expect("val labels");

    let mut words = Vec::new();
    let mut residues = HashMap::new();
    for p in &data.proteins {
        let w = segment(&p.record.protein_id, &p.record.sequence, &p.attention, seed, &seg).expect("segment");
        words.extend(w);
        residues.insert(p.record.protein_id.clone(), p.residue_embeddings.clone());
    }
    let dict = build_dictionary(&words, 2);
    let words = filter_words(&words, &dict);
    let embeddings = embed_words(&words, &residues).expect("word embeddings");
    let groups = group_words(&words, &embeddings).expect("grouping");
    let matrices = word_matrices(&groups);

    let dim = data.proteins[0].residue_embeddings.cols();
    let mut mc = ModelConfig::new(dim, library.len());
    mc.seed = seed;
    let train_samples = build_samples(&train_labels, &matrices, dim, mc.max_words);
    let val_samples = build_samples(&val_labels, &matrices, dim, mc.max_words);
    let outcome = train(
        &mc,
        tc,
        &train_samples,
        &[ValidationSet {
            name: "val".into(),
            samples: val_samples.clone(),
        }],
    )
    .expect("training");
    let planted_col = library.index_of(&planted_id).unwrap();
    let planted_val_mcc = column_mcc(&outcome, &val_samples, planted_col);

    let reference = merge_labels(&[&train_labels, &val_labels]).unwrap();
    let mut raw_rules =
        extract_rules_for(&outcome.model, &groups, &reference, mc.max_words, &IgConfig::default()).expect("rules");
    raw_rules.sort_by(|a, b| {
        (&a.fragment_id, &a.word)
            .cmp(&(&b.fragment_id, &b.word))
            .then(a.rule_score.total_cmp(&b.rule_score))
    });
    let words = word_keys(&groups);
    let index = ReferenceIndex::new(&words, &reference);
    let mut rules = raw_rules.clone();
    annotate_accuracy(&mut rules, &index);
    let db = RuleDb::new(filter_rules(rules));

    let q = &data.query;
    let query_words: Vec<String> = segment(&q.record.protein_id, &q.record.sequence, &q.attention, seed, &seg)
        .expect("segment query")
        .into_iter()
        .map(|w| w.key)
        .collect();
    let predictions = predict_privileged(&query_words, &db, Aggregation::Joint, 0.5);
    let scored = score_fragments(&predictions, &library).expect("scoring");
    let molecules: Vec<(String, Molecule)> = data
        .screening_library
        .iter()
        .map(|(id, s)| (id.clone(), parse_smiles(s).expect("screening SMILES")))
        .collect();
    let mut results = screen(&molecules, &scored, &library, DEFAULT_CAP).expect("screening");
    rank_results(&mut results);
    let ranking: Vec<(String, f64)> = results.iter().map(|r| (r.molecule_id.clone(), r.pwscore)).collect();
    let actives: HashSet<String> = data.screening_actives.iter().cloned().collect();
    let metrics = metric_report(&ranking, &actives, Orientation::Higher, None).expect("metrics");

    PlantedRun {
        data,
        library,
        planted_id,
        words,
        query_words,
        outcome,
        planted_val_mcc,
        raw_rules,
        db,
        predictions,
        ranking,
        metrics,
    }
}

fn column_mcc(outcome: &TrainOutcome, samples: &[pwrules::model::Sample], col: usize) -> Option<f64> {
    let filtered: Vec<_> = samples
        .iter()
        .filter_map(|s| {
            let labels: Vec<(usize, bool)> = s.labels.iter().copied().filter(|&(c, _)| c == col).collect();
            (!labels.is_empty()).then(|| pwrules::model::Sample { labels, ..s.clone() })
        })
        .collect();
    pwrules::model::evaluate_mcc(&outcome.model, &filtered, 0.5)
        .ok()
        .flatten()
}

#[allow(unused)]
pub fn summary(run: &PlantedRun) -> BTreeMap<&'static str, String> {
    let top: Vec<String> = run
        .planted_rules()
        .iter()
        .take(3)
        .map(|r| format!("{}:{:.3}", r.word, r.rule_score))
        .collect();
    BTreeMap::from([
        ("best_epoch", run.outcome.best_epoch.to_string()),
        ("best_score", format!("{:.3}", run.outcome.best_score)),
        ("planted_val_mcc", format!("{:?}", run.planted_val_mcc)),
        ("raw_rules", run.raw_rules.len().to_string()),
        ("db_rules", run.db.len().to_string()),
        ("planted_top", top.join(",")),
        ("ef_5pct", format!("{:.2}", run.metrics.ef_5pct)),
        ("library", run.library.len().to_string()),
    ])
}
