//! Acceptance checks, one line per criterion. Exits nonzero if any fails.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, Output};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scene_forge::datasets::{sample_trial_set, synthetic_separable_corpus, TRIALS_PER_KEYWORD};
use scene_forge::embedding::{build_condition_text, serialize_component, EmbeddingVector, ReprCondition};
use scene_forge::evaluation::report::failure_table;
use scene_forge::evaluation::{
    binomial_test_one_sided, full_agreement_ratio, gwet_ac1, mann_whitney_u, predict_odd,
    preference_report, MwuMode, PreferenceJudgment, RatingsMatrix, Reason, Schema,
};
use scene_forge::generation::{
    default_examples, parse_atomic, Clock, GenerationConfig, GenerationError, Generator,
    ScriptedChatProvider, API_KEY_ENV,
};
use scene_forge::scene::{parse_scene, validate_scene, Source, UsageInstance};
use scene_forge::Dimension;
use scene_forge_service::{
    build_manifest, router, spawn, Annotator, AppState, Manifest, ManifestItem, SessionSpec, Store,
};
use serde_json::{json, Value};

const BIN: &str = env!("CARGO_BIN_EXE_scene-forge");
const WHISKEY: &str = "The man sat alone at the kitchen table, drinking whiskey late at night.";
const WHISKEY_SCENE: &str = include_str!("../../core/assets/fixtures/scene/whiskey.txt");
const WHISKEY_ATOMIC: &str = include_str!("../../core/assets/fixtures/atomic/whiskey.txt");

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

fn whiskey() -> UsageInstance {
    UsageInstance::locate("whiskey-1", WHISKEY, "whiskey", Source::Other).unwrap()
}

fn cli(args: &[&str], dir: &std::path::Path) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

// ---- statistics oracles ----

/// Pa from within-item pair agreement, Pe from mean per-item proportions.
fn ac1_oracle(counts: &[Vec<usize>]) -> f64 {
    let q = counts[0].len();
    let m = counts.len() as f64;
    let mut pa = 0.0;
    let mut pi = vec![0.0; q];
    for row in counts {
        let n: usize = row.iter().sum();
        let agree: usize = row.iter().map(|c| c * c.saturating_sub(1)).sum();
        pa += agree as f64 / (n * (n - 1)) as f64;
        for (k, c) in row.iter().enumerate() {
            pi[k] += *c as f64 / n as f64 / m;
        }
    }
    pa /= m;
    let pe = pi.iter().map(|p| p * (1.0 - p)).sum::<f64>() / (q - 1) as f64;
    (pa - pe) / (1.0 - pe)
}

fn statistics_oracles() -> Check {
    let counts = vec![vec![3, 0], vec![2, 1], vec![0, 3], vec![1, 2]];
    let m = RatingsMatrix::from_counts(2, &counts).map_err(|e| e.to_string())?;
    let ac1 = gwet_ac1(&m).map_err(|e| e.to_string())?;
    let oracle = ac1_oracle(&counts);
    ensure!((oracle - 1.0 / 3.0).abs() < 1e-12, "oracle itself gave {oracle}");
    ensure!((ac1 - 0.333333).abs() <= 1e-6 && (ac1 - oracle).abs() <= 1e-9, "AC1 {ac1}");
    let perfect = RatingsMatrix::from_counts(2, &[vec![3, 0], vec![0, 3]]).unwrap();
    let p = gwet_ac1(&perfect).map_err(|e| e.to_string())?;
    ensure!(p == 1.0, "perfect-agreement AC1 {p}");
    let fa = full_agreement_ratio(&m).map_err(|e| e.to_string())?;
    ensure!(fa == 0.5, "full agreement {fa}");

    let dir = tempfile::tempdir().unwrap();
    let mut tsv = String::from("item\trater\tcategory\n");
    for (i, row) in counts.iter().enumerate() {
        let mut r = 0;
        for (cat, n) in row.iter().enumerate() {
            for _ in 0..*n {
                tsv.push_str(&format!("i{i}\tr{r}\t{cat}\n"));
                r += 1;
            }
        }
    }
    std::fs::write(dir.path().join("r.tsv"), tsv).unwrap();
    let out = cli(&["iaa", "--ratings", "r.tsv", "--categories", "2"], dir.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    ensure!(out.status.success(), "iaa exited {:?}", out.status);
    ensure!(
        stdout.lines().any(|l| l.starts_with("Gwet's AC1") && l.trim_end().ends_with("0.3333")),
        "iaa printed:\n{stdout}"
    );
    Ok(format!("AC1 {ac1:.9} (tol 1e-9), perfect {p}, full agreement {fa}, `iaa` prints 0.3333"))
}

// ---- exact tests ----

fn brute_force_tails(n_x: usize, n_y: usize, u: f64) -> (f64, f64) {
    let n = n_x + n_y;
    let (mut total, mut ge, mut le) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n_x {
            continue;
        }
        let rank_sum: usize = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| i + 1).sum();
        let this_u = (rank_sum - n_x * (n_x + 1) / 2) as f64;
        total += 1;
        ge += u64::from(this_u >= u);
        le += u64::from(this_u <= u);
    }
    (ge as f64 / total as f64, le as f64 / total as f64)
}

fn exact_tests() -> Check {
    let start = Instant::now();
    let p44 = binomial_test_one_sided(4, 4, 0.5).map_err(|e| e.to_string())?;
    ensure!(p44 == 0.0625, "binomial(4,4) = {p44}");
    let p = binomial_test_one_sided(329, 360, 0.5).map_err(|e| e.to_string())?;
    ensure!(p < 1e-3, "binomial(329,360) = {p}");

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut cases = 0;
    for n_x in 1..=5 {
        for n_y in 1..=5 {
            for _ in 0..24 {
                let mut vals: Vec<f64> = (0..n_x + n_y).map(|v| v as f64 * 0.5).collect();
                vals.shuffle(&mut rng);
                let (x, y) = vals.split_at(n_x);
                let r = mann_whitney_u(x, y, MwuMode::Exact).map_err(|e| e.to_string())?;
                ensure!(r.method == MwuMode::Exact, "fell back to {:?}", r.method);
                let (ge, le) = brute_force_tails(n_x, n_y, r.u_x);
                ensure!(
                    (r.p_greater - ge).abs() < 1e-12 && (r.p_less - le).abs() < 1e-12,
                    "x={x:?} y={y:?}: got ({}, {}), enumeration ({ge}, {le})",
                    r.p_greater,
                    r.p_less
                );
                cases += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!(
        "binomial(4,4) = {p44}, binomial(329,360) = {p:.3e}, {cases} MWU cases match enumeration, {:.2}s",
        elapsed.as_secs_f64()
    ))
}

// ---- odd-one-out ----

fn odd_one_out() -> Check {
    let fixture: Vec<EmbeddingVector> = [(1.0, 0.0), (0.8, 0.6), (0.6, 0.8), (0.9, 0.436), (-0.6, 0.8)]
        .iter()
        .map(|(a, b)| EmbeddingVector::normalized(vec![*a, *b]))
        .collect();
    let odd = predict_odd(&fixture).map_err(|e| e.to_string())?;
    ensure!(odd == 4, "predict_odd gave {odd}");

    let trials = sample_trial_set(&synthetic_separable_corpus(), TRIALS_PER_KEYWORD, 42).unwrap();
    ensure!(trials.len() == 104, "{} trials", trials.len());

    let dir = tempfile::tempdir().unwrap();
    let args = ["--seed", "42", "odd-eval", "--synthetic", "--condition", "all"];
    let start = Instant::now();
    let first = cli(&args, dir.path());
    let elapsed = start.elapsed();
    let second = cli(&args, dir.path());
    ensure!(first.status.success(), "odd-eval exited {:?}", first.status);
    ensure!(first.stdout == second.stdout, "reruns differ");
    let mut json_args = args.to_vec();
    json_args.extend(["--format", "json"]);
    let report: Value = serde_json::from_slice(&cli(&json_args, dir.path()).stdout).map_err(|e| e.to_string())?;
    let results = report["results"].as_array().ok_or("no results")?;
    ensure!(results.len() == 6, "{} conditions", results.len());
    for r in results {
        ensure!(r["trials"] == 104 && r["accuracy"] == 1.0, "condition {}: {r}", r["condition"]);
    }
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!(
        "predict_odd -> 4; accuracy 1.000 on 104 trials for all 6 conditions, byte-identical rerun, {:.2}s",
        elapsed.as_secs_f64()
    ))
}

// ---- serialization ----

fn serialization_goldens() -> Check {
    let items: Vec<String> = ["loneliness", "resignation", "introspection"].map(String::from).to_vec();
    let s = serialize_component(Dimension::EvokedEmotions, &items);
    ensure!(s == "evoked emotions: loneliness, resignation, introspection.", "got {s:?}");

    let inst = whiskey();
    let profile = parse_scene(WHISKEY_SCENE, &inst).map_err(|e| e.to_string())?.expression_profile;
    let ev = "engaged events: PersonX drinks it, It is consumed alone at ObjectY.";
    let pr = "generalizable properties: Often associated with solitude and reflection, can signify coping mechanisms during difficult times.";
    let em = "evoked emotions: melancholy, loneliness.";
    let goldens = [
        (ReprCondition::Text, WHISKEY.to_string()),
        (ReprCondition::TextEvent, format!("{WHISKEY} {ev}")),
        (ReprCondition::TextProperty, format!("{WHISKEY} {pr}")),
        (ReprCondition::TextEmotion, format!("{WHISKEY} {em}")),
        (ReprCondition::TextScene, format!("{WHISKEY} {ev} {pr} {em}")),
        (ReprCondition::SceneOnly, format!("{ev} {pr} {em}")),
    ];
    for (cond, want) in &goldens {
        let got = build_condition_text(*cond, &inst, Some(&profile)).map_err(|e| e.to_string())?;
        ensure!(&got == want, "{}: {got:?}", cond.name());
    }
    Ok("component golden and 6 whiskey condition strings byte-exact".into())
}

// ---- generation ----

fn generator(provider: Arc<ScriptedChatProvider>, repairs: u32) -> Generator {
    let config = GenerationConfig {
        max_repair_attempts: repairs,
        ..GenerationConfig::default()
    };
    Generator::new(provider, config)
        .unwrap()
        .with_clock(Clock::Fixed(Default::default()))
        .with_retry_base(Duration::ZERO)
}

fn few_shot_instance(input: &str, id: &str) -> UsageInstance {
    let (sentence, lemma) = input.trim().rsplit_once("\n\nKeyword: ").unwrap();
    UsageInstance::locate(id, sentence.replace("**", ""), lemma.trim(), Source::Other).unwrap()
}

fn generation_robustness() -> Check {
    let provider = Arc::new(ScriptedChatProvider::texts(["I cannot do that.", WHISKEY_SCENE]));
    let out = generator(provider.clone(), 2)
        .generate_scene(&whiskey(), &default_examples())
        .map_err(|e| e.to_string())?;
    ensure!(out.attempts == 2, "attempts {}", out.attempts);

    let provider = Arc::new(ScriptedChatProvider::texts(["nope", "still nope", "never"]));
    match generator(provider, 1).generate_scene(&whiskey(), &default_examples()) {
        Err(GenerationError::GenerationFailed { attempts: 2, .. }) => {}
        other => return Err(format!("exhausted repairs gave {other:?}")),
    }

    let crow_in = include_str!("../../core/assets/few_shot/crow.input.txt");
    let fixtures = [
        ("crow", crow_in, include_str!("../../core/assets/few_shot/crow.output.txt")),
        (
            "rain",
            include_str!("../../core/assets/few_shot/rain.input.txt"),
            include_str!("../../core/assets/few_shot/rain.output.txt"),
        ),
        (
            "rose",
            include_str!("../../core/assets/few_shot/rose.input.txt"),
            include_str!("../../core/assets/few_shot/rose.output.txt"),
        ),
        ("crow-fixture", crow_in, include_str!("../../core/assets/fixtures/scene/crow.txt")),
    ];
    let mut checked = 0;
    let mut all: Vec<(String, UsageInstance, &str)> = fixtures
        .iter()
        .map(|(name, input, output)| (name.to_string(), few_shot_instance(input, name), *output))
        .collect();
    all.push(("whiskey".into(), whiskey(), WHISKEY_SCENE));
    for (name, inst, raw) in &all {
        let scene = parse_scene(raw, inst).map_err(|e| format!("{name}: {e}"))?;
        let again = parse_scene(&scene.render(), inst).map_err(|e| format!("{name} rendered: {e}"))?;
        ensure!(again == scene, "{name}: render/parse round trip differs");
        let report = validate_scene(&scene);
        ensure!(report.errors.is_empty(), "{name}: {:?}", report.errors);
        checked += 1;
    }
    parse_atomic(WHISKEY_ATOMIC).map_err(|e| format!("atomic fixture: {e}"))?;
    Ok(format!(
        "repair succeeds with attempts=2, exhausted repairs fail cleanly, {checked} bundled scenes round-trip with 0 errors"
    ))
}

// ---- live smoke ----

fn live_smoke() -> Option<Check> {
    if std::env::var(API_KEY_ENV).map_or(true, |k| k.trim().is_empty()) {
        return None;
    }
    Some((|| {
        let dir = tempfile::tempdir().unwrap();
        let out = cli(&["--provider", "live", "generate", "--sample", "--out", "scenes"], dir.path());
        let stdout = String::from_utf8_lossy(&out.stdout).to_string();
        let line = stdout.lines().find(|l| l.starts_with("scenes: ")).ok_or(format!("generate printed:\n{stdout}"))?;
        let (ok, n) = line["scenes: ".len()..]
            .split_whitespace()
            .next()
            .and_then(|f| f.split_once('/'))
            .and_then(|(a, b)| Some((a.parse::<f64>().ok()?, b.parse::<f64>().ok()?)))
            .ok_or(format!("unparseable summary {line:?}"))?;
        ensure!(n > 0.0 && ok / n >= 0.95, "only {ok}/{n} parse-valid");

        // A user-supplied full corpus gets the chance-level check; otherwise
        // the sample corpus only supports one trial per keyword.
        let corpus = std::env::var("SCENE_FORGE_CORPUS").ok();
        let mut args = vec!["--provider", "live", "--seed", "1", "odd-eval", "--scenes", "scenes", "--format", "json"];
        match &corpus {
            Some(path) => args.extend(["--input", path.as_str()]),
            None => args.extend(["--sample", "--per-keyword", "1"]),
        }
        if std::env::var("SCENE_FORGE_LIVE_EMBEDDER").as_deref() != Ok("http") {
            args.extend(["--embedder", "hashbag"]);
        }
        let out = cli(&args, dir.path());
        let report: Value = serde_json::from_slice(&out.stdout)
            .map_err(|e| format!("odd-eval: {e}; stderr: {}", String::from_utf8_lossy(&out.stderr)))?;
        let results = report["results"].as_array().ok_or("no results")?;
        ensure!(results.len() == 6, "{} conditions", results.len());
        let accs: Vec<f64> = results.iter().filter_map(|r| r["accuracy"].as_f64()).collect();
        if corpus.is_some() {
            ensure!(accs.iter().all(|a| *a >= 0.2), "below chance: {accs:?}");
        }
        Ok(format!("{ok}/{n} scenes parse-valid; six-condition sweep accuracies {accs:?}"))
    })())
}

// ---- report fidelity ----

fn j(dim: Dimension, n: usize, preferred: Schema, rating: u8, reasons: &[Reason]) -> PreferenceJudgment {
    PreferenceJudgment {
        item_id: format!("{}-{n}", dim.key()),
        dimension: dim,
        annotator_id: format!("ann{}", n % 3),
        preferred,
        rating,
        reasons: reasons.iter().copied().collect(),
        other_text: reasons.contains(&Reason::Other).then(|| "other".into()),
        elicitation_text: "free text".into(),
        blinding: Schema::Scene,
    }
}

fn thirty_judgments() -> Vec<PreferenceJudgment> {
    use Reason::*;
    use Schema::*;
    let ev = Dimension::EngagedEvents;
    let pr = Dimension::GeneralizableProperties;
    let em = Dimension::EvokedEmotions;
    let mut rows: Vec<(Dimension, Schema, u8, Vec<Reason>)> = Vec::new();
    for r in [5, 5, 4, 4, 5, 3, 5, 4] {
        rows.push((ev, Scene, r, if r < 5 { vec![LacksInfo] } else { vec![] }));
    }
    rows.push((ev, Atomic, 3, vec![Verbose, FalseInfo]));
    rows.push((ev, Atomic, 2, vec![Verbose]));
    rows.push((ev, Atomic, 4, vec![LacksInfo, Verbose]));
    rows.push((ev, Atomic, 3, vec![FalseInfo]));
    for r in [5, 4, 5, 5, 4, 5] {
        rows.push((pr, Scene, r, if r < 5 { vec![Verbose] } else { vec![] }));
    }
    rows.push((pr, Atomic, 2, vec![Irrelevant]));
    rows.push((pr, Atomic, 3, vec![Irrelevant, Verbose]));
    rows.push((pr, Atomic, 2, vec![Other]));
    rows.push((pr, Atomic, 4, vec![LacksInfo]));
    for r in [5, 5, 4, 3] {
        rows.push((em, Scene, r, if r < 5 { vec![HardToUnderstand] } else { vec![] }));
    }
    rows.push((em, Atomic, 3, vec![NotApplicable]));
    rows.push((em, Atomic, 4, vec![NotApplicable, Verbose]));
    rows.push((em, Atomic, 2, vec![FalseInfo]));
    rows.push((em, Atomic, 4, vec![NotApplicable]));
    rows.into_iter()
        .enumerate()
        .map(|(n, (d, s, r, reasons))| j(d, n, s, r, &reasons))
        .collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-12
}

fn report_fidelity() -> Check {
    use Reason::*;
    let js = thirty_judgments();
    ensure!(js.len() == 30, "{} judgments", js.len());
    for x in &js {
        x.validate().map_err(|e| format!("{}: {e}", x.item_id))?;
    }
    let report = preference_report(&js, None);
    ensure!(report.dimensions.len() == 3, "{} dimension rows", report.dimensions.len());
    // (n, scene count, scene mean, scene population variance, atomic mean, atomic variance)
    let expected: [(usize, usize, f64, f64, f64, f64); 3] = [
        (12, 8, 35.0 / 8.0, 3.875 / 8.0, 3.0, 0.5),
        (10, 6, 28.0 / 6.0, (4.0 / 36.0) * 4.0 / 6.0 + (16.0 / 36.0) * 2.0 / 6.0, 11.0 / 4.0, 0.6875),
        (8, 4, 17.0 / 4.0, 0.6875, 13.0 / 4.0, 0.6875),
    ];
    for (d, (n, k, sm, sv, am, av)) in report.dimensions.iter().zip(expected) {
        let name = d.dimension.key();
        ensure!(d.n == n && d.scene_preferred == k, "{name}: n {} scene {}", d.n, d.scene_preferred);
        ensure!(close(d.preference_rate, k as f64 / n as f64), "{name}: rate {}", d.preference_rate);
        let s = d.scene_rating.ok_or("no scene ratings")?;
        let a = d.atomic_rating.ok_or("no atomic ratings")?;
        ensure!(close(s.mean, sm) && close(s.sd, sv.sqrt()), "{name}: scene {s:?}");
        ensure!(close(a.mean, am) && close(a.sd, av.sqrt()), "{name}: atomic {a:?}");
    }
    let want: [&[(Reason, f64)]; 3] = [
        &[(Verbose, 75.0), (FalseInfo, 50.0), (LacksInfo, 25.0), (Irrelevant, 0.0)],
        &[(Irrelevant, 50.0), (Verbose, 25.0), (Other, 25.0), (LacksInfo, 25.0)],
        &[(NotApplicable, 75.0), (Verbose, 25.0), (FalseInfo, 25.0)],
    ];
    for (d, w) in report.dimensions.iter().zip(want) {
        for (reason, pct) in w {
            let got = d.failure_breakdown.get(reason).copied();
            ensure!(got == Some(*pct), "{} {}: {got:?}", d.dimension.key(), reason.key());
        }
    }
    let events_sum: f64 = report.dimensions[0].failure_breakdown.values().sum();
    ensure!(close(events_sum, 150.0), "events reasons sum {events_sum}");
    ensure!(
        !report.dimensions[0].failure_breakdown.contains_key(&NotApplicable),
        "not applicable listed for events"
    );
    let table = failure_table(&report);
    let events_row = table.lines().find(|l| l.starts_with("Engaged Events")).ok_or("no events row")?;
    ensure!(
        ["25%", "50%", "75%"].iter().all(|p| events_row.contains(p)),
        "failure table:\n{table}"
    );
    let overall = report.overall.ok_or("no overall row")?;
    ensure!(overall.n == 30 && overall.scene_preferred == 18, "overall {overall:?}");
    Ok("30 judgments: rates, means, SDs and reason percentages exact; events reasons sum to 150%".into())
}

// ---- service protocol ----

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder().http_status_as_error(false).build().into()
}

fn get(url: &str) -> Result<(u16, Value), String> {
    let mut r = agent().get(url).call().map_err(|e| e.to_string())?;
    Ok((r.status().as_u16(), r.body_mut().read_json().map_err(|e| e.to_string())?))
}

fn post(url: &str, body: &Value) -> Result<(u16, Value), String> {
    let mut r = agent().post(url).send_json(body).map_err(|e| e.to_string())?;
    let status = r.status().as_u16();
    let text = r.body_mut().read_to_string().map_err(|e| e.to_string())?;
    Ok((status, serde_json::from_str(&text).unwrap_or(Value::String(text))))
}

fn start(m: Manifest, dir: &std::path::Path) -> String {
    let (store, _) = Store::open(dir).unwrap();
    let state = Arc::new(AppState::new(m, store).unwrap());
    let addr = spawn(SocketAddr::from(([127, 0, 0, 1], 0)), router(state, None)).unwrap();
    format!("http://{addr}")
}

fn service_protocol() -> Check {
    let inst = whiskey();
    let scene = parse_scene(WHISKEY_SCENE, &inst).unwrap();
    let (atomic, _) = parse_atomic(WHISKEY_ATOMIC).unwrap();
    let annotators = ["s1", "s2"].map(|a| Annotator {
        annotator_id: a.into(),
        group: "g".into(),
    });
    let (m, _) = build_manifest(
        5,
        std::slice::from_ref(&inst),
        &BTreeMap::from([(inst.instance_id.clone(), scene.expression_profile)]),
        &BTreeMap::from([(inst.instance_id.clone(), atomic)]),
        vec![],
        &annotators,
    );
    let dir = tempfile::tempdir().unwrap();
    let base = start(m, dir.path());
    let submit = |session: &str, body: &Value| post(&format!("{base}/api/session/{session}/judgment"), body);
    for step in 1..=3 {
        let (status, next) = get(&format!("{base}/api/session/s1/next"))?;
        ensure!(status == 200 && next["status"] == "item" && next["position"] == step, "next: {next}");
        ensure!(!next.to_string().contains("blinding"), "blinding leaked: {next}");
        let body = json!({"item_id": next["item_id"], "elicitation_text": "drinking alone", "preferred": "B", "rating": 5});
        let (status, ack) = submit("s1", &body)?;
        ensure!(status == 200 && ack["remaining"] == 3 - step, "submit: {status} {ack}");
    }
    let (_, done) = get(&format!("{base}/api/session/s1/next"))?;
    ensure!(done["status"] == "done", "after three items: {done}");

    let events = format!("{}:engaged_events", inst.instance_id);
    let no_reason = json!({"item_id": events, "elicitation_text": "x", "preferred": "A", "rating": 4});
    let (status, body) = submit("s2", &no_reason)?;
    ensure!(status == 422 && body["rule"] == "reasons_required", "rating 4 without reason: {status} {body}");
    let mut na = no_reason.clone();
    na["reasons"] = json!(["not_applicable"]);
    let (status, body) = submit("s2", &na)?;
    ensure!(status == 422 && body["rule"] == "not_applicable_emotions_only", "not_applicable on events: {status} {body}");

    let items: Vec<ManifestItem> = (0..1000)
        .map(|i| ManifestItem {
            item_id: format!("item-{i}"),
            instance: inst.clone(),
            dimension: Dimension::ALL[i % 3],
            scene_text: "scene side".into(),
            atomic_text: "atomic side".into(),
        })
        .collect();
    let ids = items.iter().map(|i| i.item_id.clone()).collect();
    let big = Manifest {
        seed: 99,
        items,
        trials: vec![],
        sessions: vec![SessionSpec {
            session_id: "big".into(),
            annotator_id: "big".into(),
            group: "g".into(),
            seed: None,
            items: ids,
            trials: vec![],
        }],
    };
    let dir = tempfile::tempdir().unwrap();
    let base = start(big, dir.path());
    let mut scene_first = 0;
    let mut seen = 0;
    loop {
        let (_, next) = get(&format!("{base}/api/session/big/next"))?;
        if next["status"] != "item" {
            break;
        }
        seen += 1;
        scene_first += usize::from(next["profile_a_text"] == "scene side");
        let body = json!({"item_id": next["item_id"], "elicitation_text": "x", "preferred": "A", "rating": 5});
        let (status, ack) = post(&format!("{base}/api/session/big/judgment"), &body)?;
        ensure!(status == 200, "big session submit: {ack}");
    }
    ensure!(seen == 1000, "served {seen} items");
    let freq = scene_first as f64 / 1000.0;
    ensure!((freq - 0.5).abs() <= 0.05, "scene shown as A in {freq}");
    Ok(format!(
        "3-item HTTP session completed; both invalid submissions rejected (422); scene-as-A frequency {freq:.3} over 1000 items"
    ))
}

fn run(name: &str, f: impl FnOnce() -> Check) -> bool {
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .map_or_else(|| "panicked".into(), |m| format!("panicked: {m}")))
    });
    match result {
        Ok(detail) => {
            println!("[PASS] {name}: {detail}");
            true
        }
        Err(detail) => {
            println!("[FAIL] {name}: {detail}");
            false
        }
    }
}

fn main() {
    let mut ok = true;
    ok &= run("statistics oracles", statistics_oracles);
    ok &= run("exact tests", exact_tests);
    ok &= run("odd-one-out correctness", odd_one_out);
    ok &= run("serialization goldens", serialization_goldens);
    ok &= run("generation robustness", generation_robustness);
    match live_smoke() {
        None => println!("[SKIP] live pipeline smoke: {API_KEY_ENV} not set"),
        Some(result) => ok &= run("live pipeline smoke", || result),
    }
    ok &= run("report fidelity", report_fidelity);
    ok &= run("service protocol", service_protocol);
    if !ok {
        std::process::exit(1);
    }
}
