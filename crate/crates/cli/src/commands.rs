use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use scene_forge::datasets::{load_trials, sample_trial_set, trials_to_jsonl, OddOneOutTrial};
use scene_forge::embedding::{
    build_condition_text, write_vectors, EmbeddingProvider, HashBagEmbedder, HttpEmbedder,
    ReprCondition,
};
use scene_forge::evaluation::report::{
    failure_table, human_agreement_table, odd_eval_table, preference_agreement_table,
    preference_table, render_table,
};
use scene_forge::evaluation::{
    full_agreement_ratio, gwet_ac1, human_agreement_report, preference_report, run_odd_eval,
    OddChoice, OddEvalResult, PreferenceJudgment, RatingsMatrix, SceneStore,
};
use scene_forge::generation::{
    default_examples, ChatProvider, Clock, FixtureChatProvider, Generator, HttpChatProvider,
    ResponseCache, API_KEY_ENV,
};
use scene_forge::scene::UsageInstance;
use scene_forge_service::{Annotator, AppState, Manifest, Store};
use serde::Serialize;

use crate::config::{ProviderKind, RunConfig, DEFAULT_CACHE_DIR};
use crate::inputs::{
    load_instances, read_atomic_profiles, read_jsonl, read_scenes, read_text, write_atomic,
    write_atomic_profile, write_scene, AtomicRecord,
};
use crate::{CliError, EmbedderKind, GlobalArgs, InputArgs, ReportFormat};

/// Per-item failures; a non-empty list makes the process exit nonzero.
#[derive(Debug, Default)]
pub struct Outcome {
    pub failures: Vec<String>,
}

pub struct Context {
    cfg: RunConfig,
    seed: Option<u64>,
    provider: ProviderKind,
    cache_dir: Option<PathBuf>,
    fixtures: Option<PathBuf>,
    max_in_flight: usize,
}

impl Context {
    pub fn new(g: &GlobalArgs) -> Result<Self, CliError> {
        let cfg = match &g.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let provider = g.provider.or(cfg.provider).unwrap_or(ProviderKind::Mock);
        let cache_dir = if g.no_cache {
            None
        } else {
            g.cache_dir.clone().or_else(|| cfg.cache_dir.clone()).or_else(|| {
                (provider == ProviderKind::Live).then(|| PathBuf::from(DEFAULT_CACHE_DIR))
            })
        };
        Ok(Self {
            seed: g.seed.or(cfg.seed),
            provider,
            cache_dir,
            fixtures: g.fixtures.clone().or_else(|| cfg.fixtures_dir.clone()),
            max_in_flight: g.max_in_flight.or(cfg.max_in_flight).unwrap_or(4),
            cfg,
        })
    }

    fn require_seed(&self, what: &str) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Usage(format!("{what} needs a seed (--seed or `seed` in the config)")))
    }

    fn seed_text(&self) -> String {
        self.seed.map_or_else(|| "none".into(), |s| s.to_string())
    }

    fn chat(&self) -> Result<Arc<dyn ChatProvider>, CliError> {
        Ok(match self.provider {
            ProviderKind::Mock => {
                let mut p = FixtureChatProvider::bundled();
                if let Some(dir) = &self.fixtures {
                    p = p.extend_from_dir(dir).map_err(|e| CliError::io(dir, e))?;
                }
                Arc::new(p)
            }
            ProviderKind::Live => Arc::new(HttpChatProvider::from_env(self.cfg.chat.endpoint.clone())?),
        })
    }

    fn generator(&self) -> Result<Generator, CliError> {
        let mut g = Generator::new(self.chat()?, self.cfg.generation.clone())?
            .with_max_in_flight(self.max_in_flight);
        if self.provider == ProviderKind::Mock {
            g = g.with_clock(Clock::Fixed(Default::default()));
        }
        if let Some(dir) = &self.cache_dir {
            g = g.with_cache(ResponseCache::new(dir));
        }
        Ok(g)
    }

    fn embedder(&self, kind: Option<EmbedderKind>) -> Box<dyn EmbeddingProvider> {
        let kind = kind.unwrap_or(match self.provider {
            ProviderKind::Mock => EmbedderKind::Hashbag,
            ProviderKind::Live => EmbedderKind::Http,
        });
        match kind {
            EmbedderKind::Hashbag => Box::new(HashBagEmbedder::default()),
            EmbedderKind::Http => {
                let e = &self.cfg.embedding;
                let mut http = HttpEmbedder::new(e.endpoint.clone(), e.model.clone(), e.dim)
                    .with_batch_size(e.batch_size);
                if let Ok(key) = std::env::var(API_KEY_ENV) {
                    http = http.with_api_key(key);
                }
                Box::new(http)
            }
        }
    }

    fn header(&self, command: &str, extra: &[(&str, String)]) -> String {
        let mut h = format!(
            "# scene-forge {command} | seed {} | provider {}",
            self.seed_text(),
            self.provider.name()
        );
        for (k, v) in extra {
            let _ = write!(h, " | {k} {v}");
        }
        h.push('\n');
        h
    }
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes") + "\n"
}

fn parse_conditions(list: &str) -> Result<Vec<ReprCondition>, CliError> {
    if list.trim().eq_ignore_ascii_case("all") {
        return Ok(ReprCondition::ALL.to_vec());
    }
    list.split(',')
        .map(|s| s.parse().map_err(CliError::Usage))
        .collect()
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn generate(ctx: &Context, input: &InputArgs, out: &Path) -> Result<Outcome, CliError> {
    let loaded = load_instances(input)?;
    warn_all(&loaded.warnings);
    let g = ctx.generator()?;
    ensure_dir(out)?;
    let mut outcome = Outcome::default();
    let mut ok = 0;
    let results = g.generate_scenes(&loaded.instances, &default_examples());
    for (inst, r) in loaded.instances.iter().zip(results) {
        match r {
            Ok(generated) => {
                write_scene(out, &generated.value)?;
                ok += 1;
            }
            Err(e) => outcome.failures.push(format!("{}: {e}", inst.instance_id)),
        }
    }
    let n = loaded.instances.len();
    println!(
        "{}scenes: {ok}/{n} parse-valid ({:.1}%) written to {}",
        ctx.header("generate", &[("model", g.config().model_id.clone())]),
        percent(ok, n),
        out.display()
    );
    Ok(outcome)
}

fn percent(k: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        100.0 * k as f64 / n as f64
    }
}

pub fn atomic(ctx: &Context, input: &InputArgs, out: &Path) -> Result<Outcome, CliError> {
    let loaded = load_instances(input)?;
    warn_all(&loaded.warnings);
    let g = ctx.generator()?;
    ensure_dir(out)?;
    let mut outcome = Outcome::default();
    let mut ok = 0;
    for (inst, r) in loaded.instances.iter().zip(g.generate_atomic_profiles(&loaded.instances)) {
        match r {
            Ok(generated) => {
                write_atomic_profile(
                    out,
                    &AtomicRecord {
                        instance_id: inst.instance_id.clone(),
                        profile: generated.value,
                    },
                )?;
                ok += 1;
            }
            Err(e) => outcome.failures.push(format!("{}: {e}", inst.instance_id)),
        }
    }
    let n = loaded.instances.len();
    println!(
        "{}atomic profiles: {ok}/{n} parse-valid ({:.1}%) written to {}",
        ctx.header("atomic", &[("model", g.config().model_id.clone())]),
        percent(ok, n),
        out.display()
    );
    Ok(outcome)
}

pub fn embed(
    ctx: &Context,
    input: &InputArgs,
    scenes_dir: Option<&Path>,
    condition: &str,
    embedder: Option<EmbedderKind>,
    out: &Path,
) -> Result<Outcome, CliError> {
    let condition: ReprCondition = condition.parse().map_err(CliError::Usage)?;
    let loaded = load_instances(input)?;
    warn_all(&loaded.warnings);
    let scenes = match scenes_dir {
        Some(dir) => read_scenes(dir)?,
        None if condition == ReprCondition::Text => SceneStore::new(),
        None => return Err(CliError::Usage(format!("condition {} needs --scenes", condition.name()))),
    };
    let mut outcome = Outcome::default();
    let mut ids = Vec::new();
    let mut texts = Vec::new();
    for inst in &loaded.instances {
        let profile = scenes.get(&inst.instance_id).map(|s| &s.expression_profile);
        match build_condition_text(condition, inst, profile) {
            Ok(t) => {
                ids.push(inst.instance_id.clone());
                texts.push(t);
            }
            Err(e) => outcome.failures.push(format!("{}: {e}", inst.instance_id)),
        }
    }
    let provider = ctx.embedder(embedder);
    let vectors = provider.embed_batch(&texts)?;
    let mut tmp = out.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    write_vectors(&tmp, &provider.id(), &vectors)?;
    fs::rename(&tmp, out).map_err(|e| CliError::io(out, e))?;
    let mut ids_path = out.as_os_str().to_owned();
    ids_path.push(".ids");
    write_atomic(Path::new(&ids_path), (ids.join("\n") + "\n").as_bytes())?;
    println!(
        "{}vectors: {} x {} written to {}",
        ctx.header(
            "embed",
            &[("condition", condition.name().to_string()), ("embedder", provider.id())]
        ),
        vectors.len(),
        provider.dim(),
        out.display()
    );
    Ok(outcome)
}

pub struct OddEvalArgs<'a> {
    pub input: &'a InputArgs,
    pub trials: Option<&'a Path>,
    pub per_keyword: usize,
    pub scenes: Option<&'a Path>,
    pub condition: &'a str,
    pub embedder: Option<EmbedderKind>,
    pub format: ReportFormat,
    pub out: Option<&'a Path>,
}

#[derive(Serialize)]
struct ConditionSummary {
    condition: ReprCondition,
    title: &'static str,
    trials: usize,
    correct: usize,
    accuracy: f64,
}

#[derive(Serialize)]
struct OddEvalReport {
    seed: Option<u64>,
    provider: &'static str,
    embedder: String,
    trials: usize,
    results: Vec<ConditionSummary>,
}

fn unique_candidates(trials: &[OddOneOutTrial]) -> Vec<UsageInstance> {
    let mut seen = BTreeSet::new();
    trials
        .iter()
        .flat_map(|t| &t.candidates)
        .filter(|c| seen.insert(c.instance_id.clone()))
        .cloned()
        .collect()
}

pub fn odd_eval(ctx: &Context, args: &OddEvalArgs) -> Result<Outcome, CliError> {
    let conditions = parse_conditions(args.condition)?;
    let trials = match args.trials {
        Some(path) => load_trials(path)?,
        None => {
            let loaded = load_instances(args.input)?;
            warn_all(&loaded.warnings);
            let corpus = loaded
                .corpus
                .ok_or_else(|| CliError::Usage("sampling trials needs a corpus-format input".into()))?;
            sample_trial_set(&corpus, args.per_keyword, ctx.require_seed("sampling trials")?)?
        }
    };
    let mut outcome = Outcome::default();
    let mut scenes = match args.scenes {
        Some(dir) => read_scenes(dir)?,
        None => SceneStore::new(),
    };
    if conditions.iter().any(|c| *c != ReprCondition::Text) {
        let missing: Vec<UsageInstance> = unique_candidates(&trials)
            .into_iter()
            .filter(|c| !scenes.contains_key(&c.instance_id))
            .collect();
        if !missing.is_empty() {
            let g = ctx.generator()?;
            for (inst, r) in missing.iter().zip(g.generate_scenes(&missing, &default_examples())) {
                match r {
                    Ok(generated) => {
                        scenes.insert(inst.instance_id.clone(), generated.value);
                    }
                    Err(e) => outcome.failures.push(format!("{}: {e}", inst.instance_id)),
                }
            }
        }
    }
    let embedder = ctx.embedder(args.embedder);
    let mut results: Vec<OddEvalResult> = Vec::new();
    for cond in conditions {
        match run_odd_eval(&trials, cond, &scenes, embedder.as_ref()) {
            Ok(r) => results.push(r),
            Err(e) => outcome.failures.push(format!("condition {}: {e}", cond.name())),
        }
    }
    let text = match args.format {
        ReportFormat::Table => {
            ctx.header(
                "odd-eval",
                &[("embedder", embedder.id()), ("trials", trials.len().to_string())],
            ) + &odd_eval_table(&results)
        }
        ReportFormat::Json => to_json(&OddEvalReport {
            seed: ctx.seed,
            provider: ctx.provider.name(),
            embedder: embedder.id(),
            trials: trials.len(),
            results: results
                .iter()
                .map(|r| ConditionSummary {
                    condition: r.condition,
                    title: r.condition.title(),
                    trials: r.records.len(),
                    correct: r.correct(),
                    accuracy: r.accuracy,
                })
                .collect(),
        }),
    };
    emit(&text, args.out)?;
    Ok(outcome)
}

fn manifest_groups(path: Option<&Path>) -> Result<Option<BTreeMap<String, String>>, CliError> {
    path.map(|p| Manifest::load(p).map(|m| m.groups()))
        .transpose()
        .map_err(CliError::from)
}

pub fn iaa_choices(
    ctx: &Context,
    choices: &Path,
    trials: &Path,
    manifest: Option<&Path>,
    format: ReportFormat,
    out: Option<&Path>,
) -> Result<Outcome, CliError> {
    let choices: Vec<OddChoice> = read_jsonl(choices)?;
    let trials = load_trials(trials)?;
    let groups = manifest_groups(manifest)?;
    let report = human_agreement_report(&choices, &trials, groups.as_ref())?;
    let text = match format {
        ReportFormat::Table => {
            ctx.header("iaa", &[("choices", choices.len().to_string())]) + &human_agreement_table(&report)
        }
        ReportFormat::Json => to_json(&report),
    };
    emit(&text, out)?;
    Ok(Outcome::default())
}

#[derive(Serialize)]
struct RatingsSummary {
    categories: usize,
    items: usize,
    multi_rated_items: usize,
    raters: usize,
    full_agreement: f64,
    gwet_ac1: f64,
}

/// Rows `item<TAB>rater<TAB>category`; a non-numeric first row is a header.
fn parse_ratings(text: &str, categories: usize) -> Result<RatingsMatrix, CliError> {
    let mut m = RatingsMatrix::new(categories)?;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        let bad = |msg: String| CliError::Usage(format!("ratings line {}: {msg}", i + 1));
        if fields.len() != 3 {
            return Err(bad(format!("expected 3 tab-separated fields, found {}", fields.len())));
        }
        let category = match fields[2].parse::<usize>() {
            Ok(c) => c,
            Err(_) if i == 0 => continue,
            Err(_) => return Err(bad(format!("category {:?} is not an index", fields[2]))),
        };
        m.add(fields[0], fields[1], category).map_err(|e| bad(e.to_string()))?;
    }
    Ok(m)
}

pub fn iaa_ratings(
    ctx: &Context,
    ratings: &Path,
    categories: usize,
    format: ReportFormat,
    out: Option<&Path>,
) -> Result<Outcome, CliError> {
    let m = parse_ratings(&read_text(ratings)?, categories)?;
    let raters: BTreeSet<&String> = m.items.values().flat_map(|r| r.keys()).collect();
    let summary = RatingsSummary {
        categories,
        items: m.items.len(),
        multi_rated_items: m.items.values().filter(|r| r.len() >= 2).count(),
        raters: raters.len(),
        full_agreement: full_agreement_ratio(&m)?,
        gwet_ac1: gwet_ac1(&m)?,
    };
    let text = match format {
        ReportFormat::Table => {
            let rows = vec![
                vec!["Items".into(), summary.items.to_string()],
                vec!["Multi-rated items".into(), summary.multi_rated_items.to_string()],
                vec!["Raters".into(), summary.raters.to_string()],
                vec!["Categories".into(), categories.to_string()],
                vec!["Full Agreement".into(), format!("{:.2}%", 100.0 * summary.full_agreement)],
                vec!["Gwet's AC1".into(), format!("{:.4}", summary.gwet_ac1)],
            ];
            ctx.header("iaa", &[]) + &render_table(&["Metric".into(), "Value".into()], &rows)
        }
        ReportFormat::Json => to_json(&summary),
    };
    emit(&text, out)?;
    Ok(Outcome::default())
}

pub fn stats(
    ctx: &Context,
    judgments: &Path,
    manifest: Option<&Path>,
    format: ReportFormat,
    out: Option<&Path>,
) -> Result<Outcome, CliError> {
    let all: Vec<PreferenceJudgment> = read_jsonl(judgments)?;
    let mut outcome = Outcome::default();
    let valid: Vec<PreferenceJudgment> = all
        .into_iter()
        .filter(|j| match j.validate() {
            Ok(()) => true,
            Err(e) => {
                outcome
                    .failures
                    .push(format!("judgment {} by {}: {e}", j.item_id, j.annotator_id));
                false
            }
        })
        .collect();
    let groups = manifest_groups(manifest)?;
    let report = preference_report(&valid, groups.as_ref());
    let text = match format {
        ReportFormat::Table => format!(
            "{}\nPreference and ratings\n{}\nFailure reasons among ATOMIC-preferred cases\n{}\nAgreement on the preferred schema\n{}",
            ctx.header("stats", &[("judgments", valid.len().to_string())]),
            preference_table(&report),
            failure_table(&report),
            preference_agreement_table(&report),
        ),
        ReportFormat::Json => to_json(&report),
    };
    emit(&text, out)?;
    Ok(outcome)
}

pub fn sample_trials(
    ctx: &Context,
    input: &InputArgs,
    per_keyword: usize,
    keywords: &[String],
    out: &Path,
) -> Result<Outcome, CliError> {
    let seed = ctx.require_seed("sample-trials")?;
    let loaded = load_instances(input)?;
    warn_all(&loaded.warnings);
    let mut corpus = loaded
        .corpus
        .ok_or_else(|| CliError::Usage("sample-trials needs a corpus-format input".into()))?;
    if !keywords.is_empty() {
        let keep: Vec<&str> = keywords.iter().map(String::as_str).collect();
        if let Some(missing) = keep.iter().find(|k| !corpus.keywords.contains_key(**k)) {
            return Err(scene_forge::datasets::DatasetError::UnknownKeyword(missing.to_string()).into());
        }
        corpus.retain_keywords(&keep);
    }
    let trials = sample_trial_set(&corpus, per_keyword, seed)?;
    let header = ctx.header(
        "sample-trials",
        &[
            ("keywords", corpus.keywords.len().to_string()),
            ("per_keyword", per_keyword.to_string()),
        ],
    );
    write_atomic(out, (header.clone() + &trials_to_jsonl(&trials)).as_bytes())?;
    println!("{header}trials: {} written to {}", trials.len(), out.display());
    Ok(Outcome::default())
}

pub fn build_manifest(
    ctx: &Context,
    input: &InputArgs,
    scenes: &Path,
    atomic: &Path,
    trials: Option<&Path>,
    annotators: &[String],
    out: &Path,
) -> Result<Outcome, CliError> {
    let seed = ctx.require_seed("build-manifest")?;
    let loaded = load_instances(input)?;
    warn_all(&loaded.warnings);
    let scenes: BTreeMap<_, _> = read_scenes(scenes)?
        .into_iter()
        .map(|(id, s)| (id, s.expression_profile))
        .collect();
    let atomic = read_atomic_profiles(atomic)?;
    let trials = match trials {
        Some(p) => load_trials(p)?,
        None => Vec::new(),
    };
    let annotators = annotators
        .iter()
        .map(|a| {
            let (id, group) = a
                .split_once(':')
                .ok_or_else(|| CliError::Usage(format!("annotator {a:?} is not of the form id:group")))?;
            Ok(Annotator {
                annotator_id: id.trim().into(),
                group: group.trim().into(),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let (manifest, skipped) =
        scene_forge_service::build_manifest(seed, &loaded.instances, &scenes, &atomic, trials, &annotators);
    manifest.check()?;
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    write_atomic(out, text.as_bytes())?;
    println!(
        "{}manifest: {} items, {} trials, {} sessions written to {}",
        ctx.header("build-manifest", &[]),
        manifest.items.len(),
        manifest.trials.len(),
        manifest.sessions.len(),
        out.display()
    );
    Ok(Outcome {
        failures: skipped
            .into_iter()
            .map(|id| format!("{id}: missing scene or atomic profile"))
            .collect(),
    })
}

pub fn serve(manifest: &Path, data_dir: &Path, addr: SocketAddr, static_dir: Option<&Path>) -> Result<Outcome, CliError> {
    let manifest = Manifest::load(manifest)?;
    let (store, warnings) = Store::open(data_dir)?;
    warn_all(&warnings);
    let state = Arc::new(AppState::new(manifest, store)?);
    eprintln!("listening on http://{addr} (data in {})", data_dir.display());
    scene_forge_service::serve_blocking(addr, scene_forge_service::router(state, static_dir))
        .map_err(|e| CliError::io(data_dir, e))?;
    Ok(Outcome::default())
}
