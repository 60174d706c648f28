use std::collections::BTreeSet;

use proptest::prelude::*;
use scene_forge::datasets::{
    load_corpus, load_trials, parse_corpus, parse_usages, sample_corpus, sample_trial_set,
    save_corpus, save_trials, synthetic_separable_corpus, IngestFormat, SceneTypedCorpus,
    CORPUS_HEADER, TRIALS_PER_KEYWORD,
};

/// Builds corpus TSV with `sizes[k][t]` sentences for keyword k, type t.
fn corpus_tsv(sizes: &[Vec<usize>]) -> String {
    let mut out = format!("{CORPUS_HEADER}\n");
    for (k, types) in sizes.iter().enumerate() {
        let kw = format!("kw{}", (b'a' + k as u8) as char);
        for (t, n) in types.iter().enumerate() {
            for s in 0..*n {
                out.push_str(&format!(
                    "{kw}\ttype{t}\t{kw}-{t}-{s}\tA {kw} appears in sentence {s} of type {t}.\n"
                ));
            }
        }
    }
    out
}

fn corpus_strategy() -> impl Strategy<Value = SceneTypedCorpus> {
    proptest::collection::vec(proptest::collection::vec(4usize..8, 2..=4), 1..=4).prop_map(
        |sizes| {
            let (corpus, _) = parse_corpus(&corpus_tsv(&sizes), false).unwrap();
            corpus
        },
    )
}

#[test]
fn synthetic_corpus_has_full_shape() {
    let c = synthetic_separable_corpus();
    assert_eq!(c.keywords.len(), 26);
    assert_eq!(c.len(), 520);
    assert!(c.shape_problems().is_empty());
    let trials = sample_trial_set(&c, TRIALS_PER_KEYWORD, 7).unwrap();
    assert_eq!(trials.len(), 104);
}

#[test]
fn sample_corpus_loads_leniently() {
    let (c, warnings) = sample_corpus();
    assert_eq!(c.len(), 15);
    assert_eq!(c.keyword_names(), ["bathroom", "fire", "raccoon"]);
    assert!(!warnings.is_empty(), "partial sample should warn about shape");
    assert!(parse_corpus(scene_forge::datasets::SAMPLE_CORPUS_TSV, true).is_err());
}

#[test]
fn lenient_parse_skips_bad_rows() {
    let text = format!(
        "{CORPUS_HEADER}\nfire\tscene1\tf1\tThe fire crackled.\nfire\tscene1\tf2\tno keyword here\nbroken row\n"
    );
    let (c, warnings) = parse_corpus(&text, false).unwrap();
    assert_eq!(c.len(), 1);
    assert!(warnings.iter().any(|w| w.starts_with("line 3:")));
    assert!(warnings.iter().any(|w| w.starts_with("line 4:")));
    assert!(parse_corpus(&text, true).is_err());
}

#[test]
fn trials_survive_jsonl_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trials.jsonl");
    let trials = sample_trial_set(&synthetic_separable_corpus(), TRIALS_PER_KEYWORD, 11).unwrap();
    save_trials(&trials, &path).unwrap();
    assert_eq!(load_trials(&path).unwrap(), trials);
}

#[test]
fn dwug_ingestion_reads_every_row() {
    let mut text = String::from("lemma\tidentifier\tcontext\tindexes_target_token\n");
    for i in 0..120 {
        let context = format!("Usage {i}: the plane landed on runway {i}.");
        let start = context.find("plane").unwrap();
        text.push_str(&format!("plane_nn\tu{i}\t{context}\t{start}:{}\n", start + 5));
    }
    let report = parse_usages(&text, IngestFormat::DwugLike).unwrap();
    assert!(report.errors.is_empty(), "{:?}", report.errors);
    assert_eq!(report.instances.len(), 120);
    assert!(report.instances.iter().all(|i| i.keyword_lemma == "plane"));
    assert!(report.instances.iter().all(|i| i.target_expression == "plane"));
}

#[test]
fn dwug_offset_mismatch_is_a_row_error() {
    let text = "lemma\tidentifier\tcontext\tindexes_target_token\ttarget\n\
                plane_nn\tu1\tThe plane landed.\t4:9\tplane\n\
                plane_nn\tu2\tThe plane landed.\t0:3\tplane\n\
                plane_nn\tu3\tThe plane landed.\t40:45\tplane\n";
    let report = parse_usages(text, IngestFormat::DwugLike).unwrap();
    assert_eq!(report.instances.len(), 1);
    let lines: Vec<usize> = report.errors.iter().map(|e| e.line).collect();
    assert_eq!(lines, [3, 4]);
}

#[test]
fn plain_tsv_ingestion() {
    let text = "instance_id\tkeyword\tsentence\n\
                a\tcrow\tTwo crows sat on the wire.\n\
                b\tcrow\tNothing relevant here.\n";
    let report = parse_usages(text, IngestFormat::PlainTsv).unwrap();
    assert_eq!(report.instances.len(), 1);
    assert_eq!(report.instances[0].target_expression, "crows");
    assert_eq!(report.errors.len(), 1);
    assert_eq!(report.errors[0].line, 3);
}

#[test]
fn missing_header_column_fails_the_file() {
    let text = "lemma\tcontext\nplane\tThe plane.\n";
    assert!(parse_usages(text, IngestFormat::DwugLike).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampled_trials_hold_invariants(corpus in corpus_strategy(), seed in any::<u64>()) {
        let per_keyword = 2;
        let trials = sample_trial_set(&corpus, per_keyword, seed).unwrap();
        prop_assert_eq!(trials.len(), corpus.keywords.len() * per_keyword);
        for t in &trials {
            prop_assert!(t.check().is_ok(), "{:?}", t.check());
            let ids: BTreeSet<&str> = t.candidates.iter().map(|c| c.instance_id.as_str()).collect();
            prop_assert_eq!(ids.len(), 5);
        }
        for kw in corpus.keyword_names() {
            let pairs: BTreeSet<(&str, &str)> = trials
                .iter()
                .filter(|t| t.keyword == kw)
                .map(|t| (t.base_scene_type.as_str(), t.odd_scene_type.as_str()))
                .collect();
            prop_assert_eq!(pairs.len(), per_keyword);
        }
        prop_assert_eq!(&trials, &sample_trial_set(&corpus, per_keyword, seed).unwrap());
    }

    #[test]
    fn corpus_save_load_identity(corpus in corpus_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.tsv");
        save_corpus(&corpus, &path).unwrap();
        let (back, _) = load_corpus(&path, false).unwrap();
        prop_assert_eq!(back, corpus);
    }
}
