//! Stage-by-stage pipeline over a run directory. Each stage writes its
//! outputs and a `manifest.txt` with the hashes of what it read and wrote;
//! a stage whose parameters and inputs are unchanged is skipped.
//!
//! ```text
//! <run>/sim/               events.csv seasons.csv players.csv
//! <run>/vocab/             vocab.txt cardinality.txt
//! <run>/ingest/            corpus/ stat_spec.txt standardizer.csv
//! <run>/windows/<role>/    windows.csv
//! <run>/train/<role>/      config.txt metrics.csv heldout.txt checkpoints/
//! <run>/embed/<role>/      forms.csv
//! <run>/cluster/<role>/    assignments.csv dendrogram_{form,stat}.csv metrics.csv pca/
//! <run>/report/<role>/     timeline_{form,stat}.{csv,svg} switch_rates.csv
//! ```

mod manifest;

pub use manifest::{list_files, sha256_file, sha256_text, Manifest, TOOL_VERSION};

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;
use thiserror::Error;

use crate::analytics::{
    assignments_csv, compare_clusterings, game_start_forms, parse_assignments_csv, stat_baseline_vectors,
    switch_rates, timeline_report, ward_cluster, write_atomic, ClusterAssignment, Method,
};
use crate::dataset::{
    extract_all_windows, split_cutoff, split_of, windows_from_csv, windows_to_csv, FeatureStore, Geometry, Split,
};
use crate::gamestate::{enumerate_legal_deltas, simulate_corpus, DeltaVocabulary, SimConfig};
use crate::ingest::{load_seasons, parse_pitch_csv, reconstruct_games, replay_and_tokenize, write_pitch_csv, Corpus, Role};
use crate::model::{evaluate_heldout, load_checkpoint, train, ModelConfig, TrainConfig, TrainData};
use crate::stats::{StatEngine, StatSpec, Standardizer};

/// Errors with their own exit behaviour or wording.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Usage(String),
    #[error("stage `{stage}` needs `{needs}` to have run first")]
    MissingStage { stage: String, needs: String },
    #[error("stale manifest: {file} changed since stage `{stage}` wrote it; rerun `{stage}`")]
    StaleManifest { stage: String, file: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Desk,
    Paper,
}

impl Preset {
    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Desk => "desk",
            Preset::Paper => "paper",
        }
    }

    pub fn parse(s: &str) -> Option<Preset> {
        match s {
            "desk" => Some(Preset::Desk),
            "paper" => Some(Preset::Paper),
            _ => None,
        }
    }

    pub fn stat_spec(self) -> StatSpec {
        match self {
            Preset::Desk => StatSpec::desk(),
            Preset::Paper => StatSpec::paper(),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything a stage needs to know; overrides left as `None` take the
/// preset value.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub out: PathBuf,
    pub preset: Preset,
    pub seed: u64,
    pub role: Role,
    pub games: usize,
    /// Directory holding `events.csv` (and optionally `seasons.csv`) to
    /// ingest instead of the simulated corpus.
    pub input: Option<PathBuf>,
    pub k: usize,
    pub pca_dim: usize,
    pub train_fraction: f64,
    pub tau: Option<f64>,
    pub lambda: Option<f64>,
    pub stride: Option<usize>,
    pub max_len: Option<usize>,
    pub steps: Option<usize>,
}

impl RunConfig {
    pub fn new(out: impl Into<PathBuf>) -> RunConfig {
        RunConfig {
            out: out.into(),
            preset: Preset::Desk,
            seed: 7,
            role: Role::Batter,
            games: 240,
            input: None,
            k: 16,
            pca_dim: 32,
            train_fraction: 0.8,
            tau: None,
            lambda: None,
            stride: None,
            max_len: None,
            steps: None,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Usage(m.to_string()));
        if self.games == 0 {
            return bad("--games must be at least 1");
        }
        if self.k == 0 {
            return bad("--k must be at least 1");
        }
        if self.pca_dim == 0 {
            return bad("--pca-dim must be at least 1");
        }
        if self.stride == Some(0) {
            return bad("--stride must be at least 1");
        }
        if self.steps == Some(0) {
            return bad("--steps must be at least 1");
        }
        if self.tau.is_some_and(|t| t <= 0.0 || !t.is_finite()) {
            return bad("--tau must be positive");
        }
        if self.lambda.is_some_and(|l| l < 0.0 || !l.is_finite()) {
            return bad("--lambda must be non-negative");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train fraction must be in (0, 1)");
        }
        if let Some(input) = &self.input {
            if !input.join("events.csv").is_file() {
                return Err(PipelineError::Usage(format!(
                    "--input {} has no events.csv",
                    input.display()
                )));
            }
        }
        Ok(())
    }

    pub fn stride(&self) -> usize {
        self.stride.unwrap_or(Geometry::of(self.role).default_stride)
    }

    pub fn max_len(&self) -> usize {
        self.max_len.unwrap_or(Geometry::of(self.role).default_max_len)
    }

    pub fn model_config(&self, vocab_size: usize, supplemental_dim: usize) -> ModelConfig {
        let mut cfg = match self.preset {
            Preset::Desk => ModelConfig::desk(self.role, vocab_size, supplemental_dim),
            Preset::Paper => ModelConfig::paper(self.role, vocab_size, supplemental_dim),
        };
        cfg.max_len = self.max_len();
        cfg
    }

    pub fn train_config(&self) -> TrainConfig {
        let mut tc = match self.preset {
            Preset::Desk => TrainConfig::desk(self.seed),
            Preset::Paper => TrainConfig::paper(self.role, self.seed),
        };
        if let Some(t) = self.tau {
            tc.tau = t;
        }
        if let Some(l) = self.lambda {
            tc.lambda = l;
        }
        if let Some(s) = self.steps {
            tc.total_steps = s;
            if tc.warmup_steps >= s {
                tc.warmup_steps = s / 10;
            }
        }
        tc
    }

    fn stage_dir(&self, stage: Stage) -> PathBuf {
        self.out.join(stage.rel_dir(self.role))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Simulate,
    Vocab,
    Ingest,
    Windows,
    Train,
    Embed,
    Cluster,
    Report,
}

impl Stage {
    pub fn command(self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::Vocab => "vocab",
            Stage::Ingest => "ingest",
            Stage::Windows => "windows",
            Stage::Train => "train",
            Stage::Embed => "embed",
            Stage::Cluster => "cluster",
            Stage::Report => "report",
        }
    }

    fn rel_dir(self, role: Role) -> String {
        match self {
            Stage::Simulate => "sim".into(),
            Stage::Vocab => "vocab".into(),
            Stage::Ingest => "ingest".into(),
            s => format!("{}/{}", s.command(), role),
        }
    }
}

/// Whether a stage did work or found its outputs current.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageStatus {
    Ran,
    UpToDate,
}

fn rel(run: &Path, p: &Path) -> String {
    p.strip_prefix(run).unwrap_or(p).to_string_lossy().replace('\\', "/")
}

/// Check prerequisites, skip if current, otherwise run `body` and record
/// the manifest. `body` returns the files it produced.
fn run_stage(
    rc: &RunConfig,
    stage: Stage,
    prereqs: &[Stage],
    external: &[PathBuf],
    mut params: BTreeMap<String, String>,
    body: impl FnOnce(&Path) -> Result<Vec<PathBuf>>,
) -> Result<StageStatus> {
    let run = &rc.out;
    let dir = rc.stage_dir(stage);
    let mut inputs = BTreeMap::new();
    for &p in prereqs {
        let m = Manifest::load(&rc.stage_dir(p).join("manifest.txt"))?.ok_or_else(|| PipelineError::MissingStage {
            stage: stage.command().into(),
            needs: p.command().into(),
        })?;
        if let Some(file) = m.changed_output(run)? {
            return Err(PipelineError::StaleManifest {
                stage: p.command().into(),
                file,
            }
            .into());
        }
        inputs.extend(m.outputs);
    }
    for f in external {
        inputs.insert(format!("external:{}", f.display()), sha256_file(f)?);
    }
    params.insert("stage".into(), stage.command().into());
    params.insert("tool_version".into(), TOOL_VERSION.into());

    let manifest_path = dir.join("manifest.txt");
    if let Some(old) = Manifest::load(&manifest_path)? {
        if old.params == params && old.inputs == inputs && old.changed_output(run)?.is_none() {
            info!("{}: up to date", stage.command());
            return Ok(StageStatus::UpToDate);
        }
    }
    if manifest_path.exists() {
        fs::remove_file(&manifest_path)?;
    }
    fs::create_dir_all(&dir)?;
    info!("{}: running", stage.command());
    let produced = body(&dir)?;
    let mut outputs = BTreeMap::new();
    for f in produced {
        outputs.insert(rel(run, &f), sha256_file(&f)?);
    }
    Manifest {
        params,
        inputs,
        outputs,
    }
    .save(&manifest_path)?;
    Ok(StageStatus::Ran)
}

fn base_params(rc: &RunConfig) -> BTreeMap<String, String> {
    BTreeMap::from([
        ("seed".to_string(), rc.seed.to_string()),
        ("preset".to_string(), rc.preset.to_string()),
    ])
}

fn role_params(rc: &RunConfig) -> BTreeMap<String, String> {
    let mut p = base_params(rc);
    p.insert("role".into(), rc.role.to_string());
    p
}

pub fn cmd_simulate(rc: &RunConfig) -> Result<StageStatus> {
    rc.validate()?;
    let mut params = base_params(rc);
    params.insert("games".into(), rc.games.to_string());
    run_stage(rc, Stage::Simulate, &[], &[], params, |dir| {
        let sim = simulate_corpus(&SimConfig::new(rc.seed, rc.games));
        let events = dir.join("events.csv");
        write_pitch_csv(&events, &sim.events)?;
        let seasons = dir.join("seasons.csv");
        crate::ingest::save_seasons(&seasons, &sim.seasons)?;
        let mut players = String::from("player_id,role,team,archetype\n");
        for p in &sim.players {
            players.push_str(&format!("{},{},{},{}\n", p.player_id, p.role, p.team, p.archetype));
        }
        let truth = dir.join("players.csv");
        write_atomic(&truth, players.as_bytes())?;
        info!("simulated {} games, {} pitches", rc.games, sim.events.len());
        Ok(vec![events, seasons, truth])
    })
}

pub fn cmd_vocab(rc: &RunConfig) -> Result<StageStatus> {
    run_stage(rc, Stage::Vocab, &[], &[], BTreeMap::new(), |dir| {
        let vocab = enumerate_legal_deltas();
        let a = dir.join("vocab.txt");
        write_atomic(&a, vocab.to_text().as_bytes())?;
        let b = dir.join("cardinality.txt");
        write_atomic(&b, vocab.cardinality_report().as_bytes())?;
        info!("{} delta tokens (reference vocabulary: 325)", vocab.n_deltas());
        Ok(vec![a, b])
    })
}

fn load_vocab(rc: &RunConfig) -> Result<DeltaVocabulary> {
    let text = fs::read_to_string(rc.stage_dir(Stage::Vocab).join("vocab.txt"))?;
    Ok(DeltaVocabulary::from_text(&text)?)
}

pub fn cmd_ingest(rc: &RunConfig) -> Result<StageStatus> {
    rc.validate()?;
    let (prereqs, external, src) = match &rc.input {
        Some(dir) => {
            let mut ext = vec![dir.join("events.csv")];
            if dir.join("seasons.csv").is_file() {
                ext.push(dir.join("seasons.csv"));
            }
            (vec![Stage::Vocab], ext, dir.clone())
        }
        None => (vec![Stage::Vocab, Stage::Simulate], vec![], rc.stage_dir(Stage::Simulate)),
    };
    let mut params = base_params(rc);
    params.insert("train_fraction".into(), rc.train_fraction.to_string());
    run_stage(rc, Stage::Ingest, &prereqs, &external, params, |dir| {
        let vocab = load_vocab(rc)?;
        let parsed = parse_pitch_csv(&src.join("events.csv"))?;
        let mut corpus = reconstruct_games(parsed.events)?;
        if src.join("seasons.csv").is_file() {
            corpus.seasons = load_seasons(&src.join("seasons.csv"))?;
        }
        let illegal = replay_and_tokenize(&mut corpus, &vocab);
        info!(
            "{} games, {} rejected rows, {} sequence gaps, {} illegal transitions",
            corpus.games.len(),
            parsed.errors.len(),
            corpus.gaps.len(),
            illegal.len()
        );
        if corpus.games.is_empty() {
            bail!("no games to ingest");
        }
        let cdir = dir.join("corpus");
        corpus.save(&cdir, &illegal, &parsed.errors)?;

        let spec = rc.preset.stat_spec();
        let cutoff = split_cutoff(&corpus, rc.train_fraction);
        let mut engine = StatEngine::new(&corpus, spec.clone());
        engine.fit_standardizer(&corpus, |g| corpus.game_index(g).is_some_and(|i| i < cutoff))?;
        let spec_path = dir.join("stat_spec.txt");
        write_atomic(&spec_path, spec.to_text().as_bytes())?;
        let std_path = dir.join("standardizer.csv");
        let std = engine.standardizer().context("no training at-bats to standardize on")?;
        write_atomic(&std_path, std.to_csv().as_bytes())?;
        let mut out = list_files(&cdir)?;
        out.extend([spec_path, std_path]);
        Ok(out)
    })
}

/// Corpus, statistics engine and features as ingested.
pub struct Loaded {
    pub corpus: Corpus,
    pub engine: StatEngine,
    pub vocab: DeltaVocabulary,
}

pub fn load_ingested(rc: &RunConfig) -> Result<Loaded> {
    let dir = rc.stage_dir(Stage::Ingest);
    let corpus = Corpus::load(&dir.join("corpus"))?;
    let spec = StatSpec::from_text(&fs::read_to_string(dir.join("stat_spec.txt"))?)?;
    let mut engine = StatEngine::new(&corpus, spec);
    engine.set_standardizer(Standardizer::from_csv(&fs::read_to_string(dir.join("standardizer.csv"))?)?);
    Ok(Loaded {
        corpus,
        engine,
        vocab: load_vocab(rc)?,
    })
}

fn stadium_slots(rc: &RunConfig) -> usize {
    rc.model_config(3, 0).n_stadiums
}

pub fn cmd_windows(rc: &RunConfig) -> Result<StageStatus> {
    rc.validate()?;
    let mut params = role_params(rc);
    params.insert("stride".into(), rc.stride().to_string());
    params.insert("train_fraction".into(), rc.train_fraction.to_string());
    run_stage(rc, Stage::Windows, &[Stage::Ingest], &[], params, |dir| {
        let l = load_ingested(rc)?;
        let cutoff = split_cutoff(&l.corpus, rc.train_fraction);
        let all = extract_all_windows(&l.corpus, rc.role, rc.stride());
        let n_all = all.len();
        let kept: Vec<_> = all
            .into_iter()
            .filter_map(|w| split_of(&w, cutoff).map(|s| (w, s)))
            .collect();
        let n_train = kept.iter().filter(|(_, s)| *s == Split::Train).count();
        info!(
            "{n_all} {} windows: {n_train} train, {} held out, {} straddle the split",
            rc.role,
            kept.len() - n_train,
            n_all - kept.len()
        );
        let path = dir.join("windows.csv");
        write_atomic(&path, windows_to_csv(&l.corpus, &kept).as_bytes())?;
        Ok(vec![path])
    })
}

/// Model and optimizer settings the train stage would use, as echoed
/// before training.
pub fn train_config_echo(rc: &RunConfig, vocab_size: usize, supplemental_dim: usize) -> String {
    let cfg = rc.model_config(vocab_size, supplemental_dim);
    let tc = rc.train_config();
    let mut s = format!("preset={}\nrole={}\n", rc.preset, rc.role);
    s.push_str(&format!("config_hash={}\n", cfg.hash()));
    for line in cfg.to_text().lines() {
        s.push_str(&format!("model.{line}\n"));
    }
    for line in tc.to_text().lines() {
        s.push_str(&format!("train.{line}\n"));
    }
    s
}

/// Vocabulary size and supplemental width of the ingested corpus, for
/// echoing the training config without building features.
pub fn ingested_dims(rc: &RunConfig) -> Result<(usize, usize)> {
    let dir = rc.stage_dir(Stage::Ingest);
    let spec = StatSpec::from_text(&fs::read_to_string(dir.join("stat_spec.txt")).map_err(|_| {
        PipelineError::MissingStage {
            stage: "train".into(),
            needs: "ingest".into(),
        }
    })?)?;
    Ok((load_vocab(rc)?.len(), 2 * spec.total_len()))
}

pub fn cmd_train(rc: &RunConfig) -> Result<StageStatus> {
    rc.validate()?;
    let (vocab_size, sup) = ingested_dims(rc)?;
    let echo = train_config_echo(rc, vocab_size, sup);
    let mut params = role_params(rc);
    params.insert("config_hash".into(), rc.model_config(vocab_size, sup).hash());
    params.insert("train_config_hash".into(), sha256_text(&rc.train_config().to_text()));
    params.insert("max_len".into(), rc.max_len().to_string());
    run_stage(rc, Stage::Train, &[Stage::Ingest, Stage::Windows], &[], params, |dir| {
        let l = load_ingested(rc)?;
        let features = FeatureStore::build(&l.corpus, &l.engine, stadium_slots(rc))?;
        let text = fs::read_to_string(rc.stage_dir(Stage::Windows).join("windows.csv"))?;
        let windows = windows_from_csv(&l.corpus, &text)?;
        let (mut tr, mut he) = (Vec::new(), Vec::new());
        for (w, s) in windows {
            match s {
                Split::Train => tr.push(w),
                Split::Heldout => he.push(w),
            }
        }
        let cfg = rc.model_config(l.vocab.len(), features.supplemental_dim());
        let tc = rc.train_config();
        let data = TrainData {
            corpus: &l.corpus,
            features: &features,
            train: tr,
            heldout: he,
            max_len: rc.max_len(),
        };

        // A checkpoint left by an interrupted run with identical settings
        // is resumed; anything else starts over.
        let key = sha256_text(&format!("{echo}{text}"));
        let key_path = dir.join("train_key.txt");
        let ckpt_root = dir.join("checkpoints");
        let resume = fs::read_to_string(&key_path).ok().as_deref() == Some(key.as_str())
            && ckpt_root.join("latest").is_file();
        if !resume && ckpt_root.exists() {
            fs::remove_dir_all(&ckpt_root)?;
        }
        write_atomic(&key_path, key.as_bytes())?;
        let config_path = dir.join("config.txt");
        write_atomic(&config_path, echo.as_bytes())?;
        let outcome = train(&cfg, &tc, &data, dir, resume.then_some(ckpt_root.as_path()))?;
        let ev = evaluate_heldout(&cfg, &outcome.params, &data, &tc)?;
        let chance_retrieval = 1.0 / (2 * tc.batch_windows - 1) as f64;
        let observed = crate::ingest::token_histogram(&l.corpus).len();
        let report = format!(
            "heldout_masked_acc={}\nheldout_retrieval_acc={}\nheldout_mgm_loss={}\nheldout_con_loss={}\nobserved_vocab={observed}\nchance_masked_acc={}\nchance_retrieval_acc={chance_retrieval}\n",
            ev.masked_acc(),
            ev.retrieval_acc,
            ev.mgm,
            ev.contrastive,
            1.0 / observed.max(1) as f64,
        );
        info!(
            "held out: masked acc {:.4}, retrieval {:.4}",
            ev.masked_acc(),
            ev.retrieval_acc
        );
        let heldout = dir.join("heldout.txt");
        write_atomic(&heldout, report.as_bytes())?;
        let mut out = vec![config_path, dir.join("metrics.csv"), heldout];
        out.extend(
            list_files(&outcome.checkpoint)?
                .into_iter()
                .filter(|f| f.parent().is_some_and(|d| d.ends_with("params")) || f.ends_with("manifest.txt")),
        );
        out.push(ckpt_root.join("latest"));
        Ok(out)
    })
}

pub fn cmd_embed(rc: &RunConfig) -> Result<StageStatus> {
    rc.validate()?;
    run_stage(rc, Stage::Embed, &[Stage::Ingest, Stage::Train], &[], role_params(rc), |dir| {
        let l = load_ingested(rc)?;
        let features = FeatureStore::build(&l.corpus, &l.engine, stadium_slots(rc))?;
        let ck = load_checkpoint(&rc.stage_dir(Stage::Train).join("checkpoints"))?;
        let expected = rc.model_config(l.vocab.len(), features.supplemental_dim());
        let forms = game_start_forms(&l.corpus, &features, &ck, &expected, rc.role)?;
        if forms.is_empty() {
            bail!("no starter has enough history for a game-start view");
        }
        let mut s = String::from("player_id,game_pk,source_first,source_last");
        for i in 0..ck.config.form_dim {
            s.push_str(&format!(",e{i}"));
        }
        s.push('\n');
        let at = |r: &crate::ingest::AtBatRef| {
            format!("{}:{}", l.corpus.games[r.game].game_pk, l.corpus.at_bat(*r).ab_number)
        };
        for f in &forms {
            s.push_str(&format!(
                "{},{},{},{}",
                f.player_id,
                f.game_pk,
                at(&f.source[0]),
                at(f.source.last().unwrap())
            ));
            for v in &f.embedding {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        let path = dir.join("forms.csv");
        write_atomic(&path, s.as_bytes())?;
        info!("{} game-start forms", forms.len());
        Ok(vec![path])
    })
}

/// Keys and vectors of a `forms.csv`.
pub fn read_forms(path: &Path) -> Result<(Vec<(u32, u64)>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut keys = Vec::new();
    let mut x = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || anyhow::anyhow!("{}: bad row {}", path.display(), i + 1);
        if f.len() < 5 {
            return Err(bad());
        }
        keys.push((f[0].parse().map_err(|_| bad())?, f[1].parse().map_err(|_| bad())?));
        x.push(
            f[4..]
                .iter()
                .map(|v| v.parse::<f32>().map(f64::from).map_err(|_| bad()))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    Ok((keys, x))
}

pub fn cmd_cluster(rc: &RunConfig) -> Result<StageStatus> {
    rc.validate()?;
    let mut params = role_params(rc);
    params.insert("k".into(), rc.k.to_string());
    params.insert("pca_dim".into(), rc.pca_dim.to_string());
    run_stage(rc, Stage::Cluster, &[Stage::Ingest, Stage::Embed], &[], params, |dir| {
        let (keys, x) = read_forms(&rc.stage_dir(Stage::Embed).join("forms.csv"))?;
        if rc.k > keys.len() {
            return Err(PipelineError::Usage(format!("--k {} exceeds the {} game-start forms", rc.k, keys.len())).into());
        }
        let (dend_form, labels_form) = ward_cluster(&x, rc.k)?;
        let form = ClusterAssignment::from_labels(Method::Form, rc.k, &keys, &labels_form);

        let l = load_ingested(rc)?;
        let (z, pca) = stat_baseline_vectors(&l.corpus, &l.engine, &keys, rc.role, rc.pca_dim)?;
        let (dend_stat, labels_stat) = ward_cluster(&z, rc.k)?;
        let stat = ClusterAssignment::from_labels(Method::Stat, rc.k, &keys, &labels_stat);
        let agree = compare_clusterings(&form, &stat)?;
        info!("form vs stat clusters: ARI {:.4}, NMI {:.4}", agree.ari, agree.nmi);

        let assignments = dir.join("assignments.csv");
        write_atomic(&assignments, assignments_csv(&[&form, &stat]).as_bytes())?;
        let df = dir.join("dendrogram_form.csv");
        write_atomic(&df, dend_form.to_csv().as_bytes())?;
        let ds = dir.join("dendrogram_stat.csv");
        write_atomic(&ds, dend_stat.to_csv().as_bytes())?;
        let metrics = dir.join("metrics.csv");
        let text = format!(
            "metric,value\nn,{}\nk,{}\nstat_pca_dim,{}\nari_form_stat,{}\nnmi_form_stat,{}\n",
            agree.n,
            rc.k,
            pca.k(),
            agree.ari,
            agree.nmi
        );
        write_atomic(&metrics, text.as_bytes())?;
        let pdir = dir.join("pca");
        pca.save(&pdir)?;
        let mut out = vec![assignments, df, ds, metrics];
        out.extend(list_files(&pdir)?);
        Ok(out)
    })
}

pub fn cmd_report(rc: &RunConfig) -> Result<StageStatus> {
    rc.validate()?;
    run_stage(rc, Stage::Report, &[Stage::Cluster], &[], role_params(rc), |dir| {
        let text = fs::read_to_string(rc.stage_dir(Stage::Cluster).join("assignments.csv"))?;
        let all = parse_assignments_csv(&text)?;
        let mut out = Vec::new();
        let mut rates: BTreeMap<u32, Vec<String>> = BTreeMap::new();
        let mut header = String::from("player_id");
        for a in &all {
            let files = timeline_report(a, &[], dir, &format!("timeline_{}", a.method))?;
            out.extend([files.csv, files.svg]);
            header.push_str(&format!(",{}_switch_rate", a.method));
            for (p, r) in switch_rates(a) {
                rates.entry(p).or_default().push(r.to_string());
            }
        }
        let mut s = format!("{header}\n");
        for (p, r) in rates {
            s.push_str(&format!("{p},{}\n", r.join(",")));
        }
        let path = dir.join("switch_rates.csv");
        write_atomic(&path, s.as_bytes())?;
        out.push(path);
        Ok(out)
    })
}

/// Every stage in order for the configured role.
pub fn cmd_pipeline(rc: &RunConfig) -> Result<Vec<(Stage, StageStatus)>> {
    rc.validate()?;
    let mut done = Vec::new();
    if rc.input.is_none() {
        done.push((Stage::Simulate, cmd_simulate(rc)?));
    }
    done.push((Stage::Vocab, cmd_vocab(rc)?));
    done.push((Stage::Ingest, cmd_ingest(rc)?));
    done.push((Stage::Windows, cmd_windows(rc)?));
    done.push((Stage::Train, cmd_train(rc)?));
    done.push((Stage::Embed, cmd_embed(rc)?));
    done.push((Stage::Cluster, cmd_cluster(rc)?));
    done.push((Stage::Report, cmd_report(rc)?));
    Ok(done)
}

/// Output directory of a stage for this run.
pub fn stage_dir(rc: &RunConfig, stage: Stage) -> PathBuf {
    rc.stage_dir(stage)
}
