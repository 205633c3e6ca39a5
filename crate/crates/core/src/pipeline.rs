//! Commands behind the `resumetune` binary. Each works inside one output
//! directory, holds a lock file while running, and writes a manifest
//! sufficient to reproduce it.
//!
//! Directory layout under `out_dir`:
//!
//! ```text
//! parsed/<stem>.json      canonical record per ingested resume
//! parsed/index.json       content digest per ingested file
//! parsed/failures.json    failures from the latest ingest
//! real.jsonl              ingested records with their text
//! synthetic.jsonl         generated records with their text
//! dataset/                bundle.jsonl, {train,val,test}.jsonl,
//!                         lora_config.json, manifest.json
//! eval/                   report.{txt,json,csv}, runs.json
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, OpenOptions};
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::dataset::{
    emit_lora_config, merge, read_jsonl, write_source_records, BundleManifest, DatasetBundle, Provenance,
    SourceRecord, Split, DEFAULT_RATIOS,
};
use crate::error::{GatewayError, PipelineError};
use crate::evaluator::{
    compare, evaluate_model, improvements, read_rows_csv, test_samples, AggregateReport, Comparison, EvalOptions,
    Improvement, ModelTag, ReportRow, RunManifest, TestSample, Thresholds,
};
use crate::instruction::INSTRUCTION_VERSION;
use crate::llm_gateway::mock::{Reply, ScriptedClient};
use crate::llm_gateway::{
    CompletionClient, EmbeddingProvider, EndpointConfig, HttpCompletionClient, OfflineEmbedder, RemoteEmbedder,
    ResumeParser,
};
use crate::normalize::SkillAliasMap;
use crate::schema::canonical_string;
use crate::synth::{builtin_profiles, generate_batch, load_profiles, SynthBatchSpec};

/// Endpoint URL that answers every parse request with the reference record
/// of the matching test sample. Useful for checking the harness itself.
pub const ECHO_ENDPOINT: &str = "mock://echo";

pub const LOCK_FILE: &str = ".resumetune.lock";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub label: String,
    pub model_id: String,
    pub tag: ModelTag,
    #[serde(default)]
    pub params: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint_url: Option<String>,
}

impl ModelSpec {
    pub fn new(model_id: &str, tag: ModelTag) -> Self {
        Self {
            label: model_id.to_owned(),
            model_id: model_id.to_owned(),
            tag,
            params: String::new(),
            endpoint_url: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub ratios: [f64; 3],
    pub stratify: bool,
    pub alias_map: Option<PathBuf>,
    pub profiles_dir: Option<PathBuf>,
    pub synth_count: usize,
    pub endpoint_url: Option<String>,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub max_parallel_requests: usize,
    pub transcript_dir: Option<PathBuf>,
    pub models: Vec<ModelSpec>,
    pub embedding_url: Option<String>,
    pub embedding_model: String,
    pub embedding_dimension: usize,
    pub base_model_id: String,
    pub thresholds: Thresholds,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input_dir: None,
            out_dir: PathBuf::from("out"),
            seed: 42,
            ratios: DEFAULT_RATIOS,
            stratify: false,
            alias_map: None,
            profiles_dir: None,
            synth_count: 100,
            endpoint_url: None,
            timeout_secs: 120.0,
            max_retries: 3,
            max_parallel_requests: 4,
            transcript_dir: None,
            models: Vec::new(),
            embedding_url: None,
            embedding_model: "text-embedding".into(),
            embedding_dimension: 1024,
            base_model_id: "microsoft/phi-4".into(),
            thresholds: Thresholds::default(),
        }
    }
}

fn merge_values(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge_values(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl PipelineConfig {
    /// Overlay a TOML config file; keys present in the file win over the
    /// current values.
    pub fn overlay_toml(self, text: &str) -> Result<Self, PipelineError> {
        let file: toml::Table = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        let mut merged = serde_json::to_value(&self).expect("config serializes");
        let over = serde_json::to_value(file).map_err(|e| PipelineError::Config(e.to_string()))?;
        merge_values(&mut merged, over);
        serde_json::from_value(merged).map_err(|e| PipelineError::Config(format!("config file: {e}")))
    }

    pub fn overlay_file(self, path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        self.overlay_toml(&text)
    }

    /// Every referenced input path must exist.
    pub fn validate(&self) -> Result<(), PipelineError> {
        for (what, path) in [
            ("input dir", &self.input_dir),
            ("alias map", &self.alias_map),
            ("profiles dir", &self.profiles_dir),
        ] {
            if let Some(p) = path {
                if !p.exists() {
                    return Err(PipelineError::Config(format!("{what} {} does not exist", p.display())));
                }
            }
        }
        if self.max_parallel_requests == 0 {
            return Err(PipelineError::Config("max_parallel_requests must be at least 1".into()));
        }
        Ok(())
    }

    pub fn aliases(&self) -> Result<SkillAliasMap, PipelineError> {
        Ok(match &self.alias_map {
            Some(path) => SkillAliasMap::from_file(path)?,
            None => SkillAliasMap::builtin(),
        })
    }

    pub fn endpoint(&self, url: Option<&str>, model_id: &str) -> Result<EndpointConfig, PipelineError> {
        let url = url
            .or(self.endpoint_url.as_deref())
            .ok_or_else(|| PipelineError::Config("no endpoint URL: pass --endpoint-url or set endpoint_url".into()))?;
        let mut cfg = EndpointConfig::new(url, model_id);
        cfg.timeout_secs = self.timeout_secs;
        cfg.max_retries = self.max_retries;
        cfg.max_parallel_requests = self.max_parallel_requests;
        cfg.transcript_dir = self.transcript_dir.clone();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn embedder(&self) -> Result<Box<dyn EmbeddingProvider>, PipelineError> {
        Ok(match &self.embedding_url {
            Some(url) => {
                let cfg = self.endpoint(Some(url), &self.embedding_model)?;
                Box::new(RemoteEmbedder::new(cfg, self.embedding_dimension)?)
            }
            None => Box::new(OfflineEmbedder::new(self.embedding_dimension)?),
        })
    }
}

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct WorkdirLock {
    path: PathBuf,
}

impl WorkdirLock {
    pub fn acquire(dir: &Path) -> Result<Self, PipelineError> {
        fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == ErrorKind::AlreadyExists => Err(PipelineError::Config(format!(
                "{} is locked by another command; delete {} if that command is no longer running",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(PipelineError::io(&path, e)),
        }
    }
}

impl Drop for WorkdirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializes");
    text.push('\n');
    write_text(path, &text)
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| PipelineError::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| PipelineError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestFailure {
    pub file: String,
    pub reason: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_response: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestManifest {
    pub instruction_version: String,
    pub model_id: String,
    pub files: usize,
    pub parsed: usize,
    pub skipped: usize,
    pub failed: usize,
    pub inputs_digest: String,
}

/// Parse every `*.txt` file in `input_dir`. Files whose content digest is
/// unchanged since the last successful parse are skipped; failures are
/// listed in `parsed/failures.json` and never stop the run.
pub fn cmd_ingest(input_dir: &Path, out_dir: &Path, parser: &ResumeParser) -> Result<IngestManifest, PipelineError> {
    let mut files: Vec<PathBuf> = fs::read_dir(input_dir)
        .map_err(|e| PipelineError::io(input_dir, e))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "txt"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(PipelineError::Data(format!("no .txt resumes in {}", input_dir.display())));
    }

    let parsed_dir = out_dir.join("parsed");
    fs::create_dir_all(&parsed_dir).map_err(|e| PipelineError::io(&parsed_dir, e))?;
    let index_path = parsed_dir.join("index.json");
    let old_index: BTreeMap<String, String> = if index_path.exists() {
        read_json(&index_path)?
    } else {
        BTreeMap::new()
    };

    let mut index = BTreeMap::new();
    let mut failures = Vec::new();
    let mut real = Vec::new();
    let (mut parsed, mut skipped, mut endpoint_failures) = (0, 0, 0);
    for path in &files {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_owned();
        let file = path.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_owned();
        let json_path = parsed_dir.join(format!("{stem}.json"));
        let fail = |reason: String, raw_response| IngestFailure {
            file: file.clone(),
            reason,
            raw_response,
        };
        let bytes = match fs::read(path) {
            Ok(b) => b,
            Err(e) => {
                failures.push(fail(format!("unreadable: {e}"), None));
                continue;
            }
        };
        let Ok(text) = String::from_utf8(bytes.clone()) else {
            failures.push(fail("not valid UTF-8".into(), None));
            continue;
        };
        let digest = sha256_hex(&bytes);
        let record = if old_index.get(&stem) == Some(&digest) && json_path.exists() {
            skipped += 1;
            read_json(&json_path)?
        } else {
            match parser.parse_resume(&text) {
                Ok(result) => {
                    parsed += 1;
                    write_text(&json_path, &(canonical_string(&result.record) + "\n"))?;
                    result.record
                }
                Err(e) => {
                    if !matches!(e, GatewayError::Extraction { .. } | GatewayError::Config(_)) {
                        endpoint_failures += 1;
                    }
                    log::warn!("{file}: {e}");
                    let _ = fs::remove_file(&json_path);
                    failures.push(fail(e.to_string(), e.raw_response().map(str::to_owned)));
                    continue;
                }
            }
        };
        index.insert(stem.clone(), digest);
        real.push(SourceRecord {
            source_id: stem,
            provenance: Provenance::Real,
            raw_text: text,
            record,
        });
    }

    write_json(&index_path, &index)?;
    write_json(&parsed_dir.join("failures.json"), &failures)?;
    write_source_records(&out_dir.join("real.jsonl"), &real)?;
    let mut inputs = Sha256::new();
    for (stem, digest) in &index {
        inputs.update(format!("{stem}\0{digest}\n"));
    }
    let manifest = IngestManifest {
        instruction_version: INSTRUCTION_VERSION.into(),
        model_id: parser.model_id().to_owned(),
        files: files.len(),
        parsed,
        skipped,
        failed: failures.len(),
        inputs_digest: hex::encode(inputs.finalize()),
    };
    write_json(&out_dir.join("ingest_manifest.json"), &manifest)?;
    let attempted = files.len() - skipped;
    if attempted > 0 && endpoint_failures == attempted {
        return Err(PipelineError::Endpoint(format!(
            "all {attempted} parse request(s) failed; see {}",
            parsed_dir.join("failures.json").display()
        )));
    }
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub seed: u64,
    pub count: usize,
    pub departments: BTreeMap<String, usize>,
    pub profiles: Vec<String>,
    pub records_digest: String,
}

/// Generate `count` template resumes into `synthetic.jsonl`.
pub fn cmd_synth(out_dir: &Path, spec: &SynthBatchSpec) -> Result<SynthManifest, PipelineError> {
    let records = generate_batch(spec)?;
    let path = out_dir.join("synthetic.jsonl");
    fs::create_dir_all(out_dir).map_err(|e| PipelineError::io(out_dir, e))?;
    write_source_records(&path, &records)?;
    let bytes = fs::read(&path).map_err(|e| PipelineError::io(&path, e))?;
    let manifest = SynthManifest {
        seed: spec.seed,
        count: records.len(),
        departments: crate::dataset::department_counts(&records),
        profiles: spec.profiles.iter().map(|p| p.profile.department.clone()).collect(),
        records_digest: sha256_hex(&bytes),
    };
    write_json(&out_dir.join("synth_manifest.json"), &manifest)?;
    Ok(manifest)
}

pub fn synth_spec(cfg: &PipelineConfig) -> Result<SynthBatchSpec, PipelineError> {
    let profiles = match &cfg.profiles_dir {
        Some(dir) => load_profiles(dir)?,
        None => builtin_profiles(),
    };
    Ok(SynthBatchSpec {
        count: cfg.synth_count,
        seed: cfg.seed,
        profiles,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildManifest {
    #[serde(flatten)]
    pub bundle: BundleManifest,
    pub inputs_digest: String,
    pub tool_version: String,
}

fn read_optional(path: &Path) -> Result<(Vec<SourceRecord>, Vec<u8>), PipelineError> {
    if !path.exists() {
        return Ok((Vec::new(), Vec::new()));
    }
    let bytes = fs::read(path).map_err(|e| PipelineError::io(path, e))?;
    Ok((read_jsonl(path)?, bytes))
}

/// Merge, normalize, split and export the records in `out_dir`.
pub fn cmd_build(out_dir: &Path, cfg: &PipelineConfig) -> Result<BuildManifest, PipelineError> {
    let (real, real_bytes) = read_optional(&out_dir.join("real.jsonl"))?;
    let (synthetic, synth_bytes) = read_optional(&out_dir.join("synthetic.jsonl"))?;
    if real.is_empty() && synthetic.is_empty() {
        return Err(PipelineError::Data(format!(
            "no records in {}: run `resumetune ingest` or `resumetune synth` first",
            out_dir.display()
        )));
    }
    let mut bundle = merge(real, synthetic)?;
    let report = bundle.normalize(&cfg.aliases()?);
    if !report.unparseable_dates.is_empty() {
        log::warn!("{} date(s) could not be normalized", report.unparseable_dates.len());
    }
    let bundle = bundle.split(cfg.seed, cfg.ratios, cfg.stratify)?;

    let dir = out_dir.join("dataset");
    fs::create_dir_all(&dir).map_err(|e| PipelineError::io(&dir, e))?;
    bundle.save(&dir.join("bundle.jsonl"))?;
    for split in Split::ALL {
        bundle.export_instruction_file(split, &dir.join(format!("{}.jsonl", split.as_str())))?;
    }
    emit_lora_config(&cfg.base_model_id).write(&dir.join("lora_config.json"))?;
    let mut inputs = Sha256::new();
    inputs.update(&real_bytes);
    inputs.update([0]);
    inputs.update(&synth_bytes);
    let manifest = BuildManifest {
        bundle: bundle.manifest(&report)?,
        inputs_digest: hex::encode(inputs.finalize()),
        tool_version: env!("CARGO_PKG_VERSION").into(),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// The built bundle and its manifest.
pub fn load_dataset(out_dir: &Path) -> Result<(DatasetBundle, BuildManifest), PipelineError> {
    let dir = out_dir.join("dataset");
    let bundle_path = dir.join("bundle.jsonl");
    if !bundle_path.exists() {
        return Err(PipelineError::Data(format!(
            "no dataset in {}: run `resumetune build` first",
            dir.display()
        )));
    }
    Ok((DatasetBundle::load(&bundle_path)?, read_json(&dir.join("manifest.json"))?))
}

/// Replies to each test sample's text with its reference record.
pub fn echo_client(samples: &[TestSample]) -> ScriptedClient {
    let script: HashMap<String, Reply> = samples
        .iter()
        .map(|s| (s.raw_text.clone(), Reply::Text(canonical_string(&s.reference))))
        .collect();
    ScriptedClient::keyed(script, Reply::Fail("no reference for this text".into()))
}

/// A model to evaluate: its identity plus a ready parser.
pub struct EvalModel {
    pub spec: ModelSpec,
    pub parser: ResumeParser,
    pub endpoint_digest: String,
}

/// Build a parser per configured model. [`ECHO_ENDPOINT`] gets the echo client.
pub fn eval_models(cfg: &PipelineConfig, samples: &[TestSample]) -> Result<Vec<EvalModel>, PipelineError> {
    if cfg.models.is_empty() {
        return Err(PipelineError::Config("no models: pass --model or add [[models]] to the config".into()));
    }
    let aliases = cfg.aliases()?;
    cfg.models
        .iter()
        .map(|spec| {
            let endpoint = cfg.endpoint(spec.endpoint_url.as_deref(), &spec.model_id)?;
            let client: Arc<dyn CompletionClient> = if endpoint.base_url == ECHO_ENDPOINT {
                Arc::new(echo_client(samples))
            } else {
                Arc::new(HttpCompletionClient::new(endpoint.clone())?)
            };
            Ok(EvalModel {
                spec: spec.clone(),
                parser: ResumeParser::new(client, &spec.model_id, aliases.clone()),
                endpoint_digest: endpoint.digest(),
            })
        })
        .collect()
}

/// Evaluate every model on the test split and write `eval/report.*` plus
/// `eval/runs.json`. Unmet thresholds fail after the reports are written.
pub fn cmd_evaluate(
    out_dir: &Path,
    models: &[EvalModel],
    provider: &dyn EmbeddingProvider,
    max_parallel: usize,
    thresholds: &Thresholds,
) -> Result<AggregateReport, PipelineError> {
    let (bundle, manifest) = load_dataset(out_dir)?;
    let samples = test_samples(&bundle)?;
    let mut runs = Vec::with_capacity(models.len());
    let mut manifests = Vec::with_capacity(models.len());
    for m in models {
        let run_manifest = RunManifest::new(
            &m.spec.label,
            m.spec.tag,
            &m.endpoint_digest,
            &manifest.bundle.records_digest,
            manifest.bundle.seed,
        );
        let opts = EvalOptions {
            model_label: m.spec.label.clone(),
            parameter_count_label: m.spec.params.clone(),
            tag: m.spec.tag,
            max_parallel,
            run_id: Some(run_manifest.run_id.clone()),
        };
        log::info!("evaluating {} on {} samples", m.spec.label, samples.len());
        runs.push(evaluate_model(&samples, &m.parser, provider, &opts)?);
        manifests.push(run_manifest);
    }
    let report = AggregateReport::from_runs(&runs)?;
    let dir = out_dir.join("eval");
    fs::create_dir_all(&dir).map_err(|e| PipelineError::io(&dir, e))?;
    report.write_files(&dir)?;
    write_json(&dir.join("runs.json"), &manifests)?;
    let unmet: Vec<String> = runs.iter().flat_map(|r| thresholds.unmet(&r.row)).collect();
    if !unmet.is_empty() {
        return Err(PipelineError::Threshold(unmet));
    }
    Ok(report)
}

/// Rows from CSV tables or earlier `report.json` files.
pub fn load_rows(paths: &[PathBuf]) -> Result<Vec<ReportRow>, PipelineError> {
    let mut rows = Vec::new();
    for path in paths {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        if path.extension().is_some_and(|x| x == "csv") {
            rows.extend(read_rows_csv(&text)?);
        } else {
            let report = AggregateReport::from_json(&text)
                .map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))?;
            rows.extend(report.comparison.rows.into_iter().map(|r| r.row));
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonOutput {
    pub comparison: Comparison,
    pub improvements: Vec<Improvement>,
}

impl ComparisonOutput {
    pub fn render_text(&self) -> String {
        let mut out = self.comparison.render_text();
        if !self.improvements.is_empty() {
            out.push_str("\nFine-tuned vs base (relative change)\n");
            for imp in &self.improvements {
                out.push_str("  ");
                out.push_str(&imp.render());
                out.push('\n');
            }
        }
        out
    }
}

/// Compare rows and, when `out_dir` is given, write `comparison.{txt,json,csv}`.
pub fn cmd_compare(paths: &[PathBuf], out_dir: Option<&Path>) -> Result<ComparisonOutput, PipelineError> {
    let rows = load_rows(paths)?;
    let output = ComparisonOutput {
        comparison: compare(&rows)?,
        improvements: improvements(&rows),
    };
    if let Some(dir) = out_dir {
        write_text(&dir.join("comparison.txt"), &output.render_text())?;
        write_json(&dir.join("comparison.json"), &output)?;
        write_text(&dir.join("comparison.csv"), &output.comparison.render_csv())?;
    }
    Ok(output)
}
