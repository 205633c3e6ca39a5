//! Run a parser over a test split, average per-sample scores into report
//! rows, and render comparison tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{DatasetBundle, SourceRecord, Split};
use crate::error::EvalError;
use crate::instruction::INSTRUCTION_VERSION;
use crate::llm_gateway::{EmbeddingProvider, ResumeParser};
use crate::metrics::{score_sample, SampleScore, METRIC_SUITE_VERSION};
use crate::schema::ResumeRecord;

/// One `(raw_text, reference)` pair from the test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSample {
    pub source_id: String,
    pub raw_text: String,
    pub reference: ResumeRecord,
}

impl From<&SourceRecord> for TestSample {
    fn from(r: &SourceRecord) -> Self {
        Self {
            source_id: r.source_id.clone(),
            raw_text: r.raw_text.clone(),
            reference: r.record.clone(),
        }
    }
}

/// Test-split members in `source_id` order.
pub fn test_samples(bundle: &DatasetBundle) -> Result<Vec<TestSample>, EvalError> {
    let samples: Vec<TestSample> = bundle.members(Split::Test)?.into_iter().map(TestSample::from).collect();
    if samples.is_empty() {
        return Err(EvalError::EmptyTestSplit);
    }
    Ok(samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelTag {
    #[serde(rename = "fine-tuned")]
    FineTuned,
    #[serde(rename = "base")]
    Base,
}

impl ModelTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelTag::FineTuned => "fine-tuned",
            ModelTag::Base => "base",
        }
    }

    fn heading(self) -> &'static str {
        match self {
            ModelTag::FineTuned => "Fine-tuned models",
            ModelTag::Base => "Base models",
        }
    }
}

impl std::str::FromStr for ModelTag {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fine-tuned" | "finetuned" | "ft" => Ok(ModelTag::FineTuned),
            "base" => Ok(ModelTag::Base),
            other => Err(EvalError::Config(format!("unknown model tag '{other}'"))),
        }
    }
}

/// Round half away from zero to two decimals. The small bias keeps values
/// such as 27.725 (stored as 27.72499...) on the upper side.
pub fn round2(x: f64) -> f64 {
    x.signum() * ((x.abs() * 100.0 + 0.5 + 1e-9).floor() / 100.0)
}

fn pct(mean: f64) -> f64 {
    round2(mean * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Em,
    F1,
    Bleu,
    Rouge,
    Overall,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Em, Metric::F1, Metric::Bleu, Metric::Rouge, Metric::Overall];

    pub fn header(self) -> &'static str {
        match self {
            Metric::Em => "EM (%)",
            Metric::F1 => "F1 (%)",
            Metric::Bleu => "BLEU (%)",
            Metric::Rouge => "ROUGE (%)",
            Metric::Overall => "Overall (%)",
        }
    }

    fn key(self) -> &'static str {
        match self {
            Metric::Em => "em",
            Metric::F1 => "f1",
            Metric::Bleu => "bleu",
            Metric::Rouge => "rouge",
            Metric::Overall => "overall",
        }
    }
}

/// One model's aggregate scores, in percent with two decimals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model_label: String,
    pub parameter_count_label: String,
    pub tag: ModelTag,
    pub em: f64,
    pub f1: f64,
    pub bleu: f64,
    pub rouge: f64,
    pub overall: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_id: Option<String>,
}

impl ReportRow {
    /// A row from already-published percentages; Overall is their mean.
    pub fn from_percentages(
        model_label: &str,
        parameter_count_label: &str,
        tag: ModelTag,
        [em, f1, bleu, rouge]: [f64; 4],
    ) -> Self {
        Self {
            model_label: model_label.to_owned(),
            parameter_count_label: parameter_count_label.to_owned(),
            tag,
            em,
            f1,
            bleu,
            rouge,
            overall: round2((em + f1 + bleu + rouge) / 4.0),
            run_id: None,
        }
    }

    pub fn value(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Em => self.em,
            Metric::F1 => self.f1,
            Metric::Bleu => self.bleu,
            Metric::Rouge => self.rouge,
            Metric::Overall => self.overall,
        }
    }
}

/// Per-sample outcome. Failed parses carry the error text and score zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub model_label: String,
    pub tag: ModelTag,
    pub source_id: String,
    pub score: SampleScore,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub model_label: String,
    pub parameter_count_label: String,
    pub tag: ModelTag,
    pub max_parallel: usize,
    pub run_id: Option<String>,
}

impl EvalOptions {
    pub fn new(model_label: impl Into<String>, tag: ModelTag) -> Self {
        Self {
            model_label: model_label.into(),
            parameter_count_label: String::new(),
            tag,
            max_parallel: 4,
            run_id: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRun {
    pub row: ReportRow,
    pub samples: Vec<SampleRow>,
}

impl ModelRun {
    pub fn failures(&self) -> impl Iterator<Item = &SampleRow> {
        self.samples.iter().filter(|s| s.failure.is_some())
    }
}

fn score_one(sample: &TestSample, parser: &ResumeParser, provider: &dyn EmbeddingProvider) -> (SampleScore, Option<String>) {
    let result = parser
        .parse_resume(&sample.raw_text)
        .and_then(|parsed| score_sample(&sample.reference, &parsed.record, provider));
    match result {
        Ok(score) => (score, None),
        Err(e) => {
            log::warn!("sample {} failed: {e}", sample.source_id);
            (SampleScore::zero(), Some(e.to_string()))
        }
    }
}

/// Parse every sample, score it against its reference, and average.
///
/// Samples are processed by up to `max_parallel` workers, but the averages
/// are accumulated in `source_id` order, so the result is bit-identical
/// regardless of input order or scheduling. Endpoint and extraction
/// failures never abort the run: the sample scores zero and is flagged.
pub fn evaluate_model(
    samples: &[TestSample],
    parser: &ResumeParser,
    provider: &dyn EmbeddingProvider,
    opts: &EvalOptions,
) -> Result<ModelRun, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::EmptyTestSplit);
    }
    if opts.max_parallel == 0 {
        return Err(EvalError::Config("max_parallel must be at least 1".into()));
    }
    let mut ordered: Vec<&TestSample> = samples.iter().collect();
    ordered.sort_by(|a, b| a.source_id.cmp(&b.source_id));
    if let Some(w) = ordered.windows(2).find(|w| w[0].source_id == w[1].source_id) {
        return Err(EvalError::DuplicateSample(w[0].source_id.clone()));
    }

    let next = AtomicUsize::new(0);
    let workers = opts.max_parallel.min(ordered.len());
    let mut outcomes: Vec<Option<(SampleScore, Option<String>)>> = vec![None; ordered.len()];
    thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(sample) = ordered.get(i) else { break };
                        done.push((i, score_one(sample, parser, provider)));
                    }
                    done
                })
            })
            .collect();
        for h in handles {
            for (i, outcome) in h.join().expect("evaluation worker panicked") {
                outcomes[i] = Some(outcome);
            }
        }
    });

    let mut sums = [0.0; 5];
    let mut rows = Vec::with_capacity(ordered.len());
    for (sample, outcome) in ordered.iter().zip(outcomes) {
        let (score, failure) = outcome.expect("every sample is scored");
        for (acc, v) in sums.iter_mut().zip(score.components()) {
            *acc += v;
        }
        rows.push(SampleRow {
            model_label: opts.model_label.clone(),
            tag: opts.tag,
            source_id: sample.source_id.clone(),
            score,
            failure,
        });
    }
    let n = ordered.len() as f64;
    let [em, f1, bleu, rouge, overall] = sums.map(|s| s / n);
    Ok(ModelRun {
        row: ReportRow {
            model_label: opts.model_label.clone(),
            parameter_count_label: opts.parameter_count_label.clone(),
            tag: opts.tag,
            em: pct(em),
            f1: pct(f1),
            bleu: pct(bleu),
            rouge: pct(rouge),
            overall: pct(overall),
            run_id: opts.run_id.clone(),
        },
        samples: rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparedRow {
    #[serde(flatten)]
    pub row: ReportRow,
    /// Columns in which this row holds the highest value.
    pub best: Vec<Metric>,
}

/// Rows grouped fine-tuned first, then base, with per-column maxima flagged
/// across all rows. Ties flag every tied row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparedRow>,
}

pub fn compare(rows: &[ReportRow]) -> Result<Comparison, EvalError> {
    if rows.is_empty() {
        return Err(EvalError::NoRows);
    }
    let max: BTreeMap<Metric, f64> = Metric::ALL
        .iter()
        .map(|&m| (m, rows.iter().map(|r| r.value(m)).fold(f64::NEG_INFINITY, f64::max)))
        .collect();
    let mut grouped: Vec<&ReportRow> = rows.iter().collect();
    grouped.sort_by_key(|r| r.tag);
    Ok(Comparison {
        rows: grouped
            .into_iter()
            .map(|r| ComparedRow {
                row: r.clone(),
                best: Metric::ALL.into_iter().filter(|m| r.value(*m) == max[m]).collect(),
            })
            .collect(),
    })
}

impl Comparison {
    pub fn is_best(&self, model_label: &str, tag: ModelTag, metric: Metric) -> bool {
        self.rows
            .iter()
            .any(|r| r.row.model_label == model_label && r.row.tag == tag && r.best.contains(&metric))
    }

    pub fn render_text(&self) -> String {
        let cell = |r: &ComparedRow, m: Metric| {
            let flag = if r.best.contains(&m) { "*" } else { "" };
            format!("{:.2}{flag}", r.row.value(m))
        };
        let label_w = self.rows.iter().map(|r| r.row.model_label.len()).max().unwrap_or(0).max(5);
        let params_w = self
            .rows
            .iter()
            .map(|r| r.row.parameter_count_label.len())
            .max()
            .unwrap_or(0)
            .max(6);
        let mut out = String::new();
        let mut current = None;
        for r in &self.rows {
            if current != Some(r.row.tag) {
                if current.is_some() {
                    out.push('\n');
                }
                current = Some(r.row.tag);
                let _ = writeln!(out, "{}", r.row.tag.heading());
                let _ = write!(out, "{:<label_w$}  {:<params_w$}", "Model", "Params");
                for m in Metric::ALL {
                    let _ = write!(out, "  {:>11}", m.header());
                }
                out.push('\n');
            }
            let _ = write!(out, "{:<label_w$}  {:<params_w$}", r.row.model_label, r.row.parameter_count_label);
            for m in Metric::ALL {
                let _ = write!(out, "  {:>11}", cell(r, m));
            }
            out.push('\n');
        }
        out.push_str("\n* highest value in column\n");
        out
    }

    pub fn render_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let mut header = vec!["model", "params", "tag"];
        header.extend(Metric::ALL.map(Metric::key));
        header.push("best");
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![
                r.row.model_label.clone(),
                r.row.parameter_count_label.clone(),
                r.row.tag.as_str().to_owned(),
            ];
            rec.extend(Metric::ALL.map(|m| format!("{:.2}", r.row.value(m))));
            rec.push(r.best.iter().map(|m| m.key()).collect::<Vec<_>>().join(";"));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

/// Comparison table plus per-sample scores for every evaluated model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub comparison: Comparison,
    pub samples: Vec<SampleRow>,
}

impl AggregateReport {
    pub fn from_runs(runs: &[ModelRun]) -> Result<Self, EvalError> {
        let rows: Vec<ReportRow> = runs.iter().map(|r| r.row.clone()).collect();
        Ok(Self {
            comparison: compare(&rows)?,
            samples: runs.iter().flat_map(|r| r.samples.iter().cloned()).collect(),
        })
    }

    pub fn failures(&self) -> impl Iterator<Item = &SampleRow> {
        self.samples.iter().filter(|s| s.failure.is_some())
    }

    pub fn render_text(&self) -> String {
        let mut out = self.comparison.render_text();
        let failures: Vec<&SampleRow> = self.failures().collect();
        if !failures.is_empty() {
            let _ = writeln!(out, "\nFailed samples (scored 0): {}", failures.len());
            for f in failures {
                let _ = writeln!(
                    out,
                    "  {} [{}] {}: {}",
                    f.model_label,
                    f.tag.as_str(),
                    f.source_id,
                    f.failure.as_deref().unwrap_or("")
                );
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Write `report.txt`, `report.json` and `report.csv` into `dir`.
    pub fn write_files(&self, dir: &Path) -> Result<(), EvalError> {
        for (name, body) in [
            ("report.txt", self.render_text()),
            ("report.json", self.to_json()),
            ("report.csv", self.comparison.render_csv()),
        ] {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|source| EvalError::Io { path, source })?;
        }
        Ok(())
    }
}

/// Relative change of a fine-tuned row over its base, in percent.
/// `None` marks a metric whose base value is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub model_label: String,
    pub em: Option<f64>,
    pub f1: Option<f64>,
    pub bleu: Option<f64>,
    pub rouge: Option<f64>,
    pub overall: Option<f64>,
}

impl Improvement {
    pub fn value(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Em => self.em,
            Metric::F1 => self.f1,
            Metric::Bleu => self.bleu,
            Metric::Rouge => self.rouge,
            Metric::Overall => self.overall,
        }
    }

    pub fn render(&self) -> String {
        let parts: Vec<String> = Metric::ALL
            .iter()
            .map(|&m| match self.value(m) {
                Some(v) => format!("{} {v:+.2}%", m.key()),
                None => format!("{} undefined", m.key()),
            })
            .collect();
        format!("{}: {}", self.model_label, parts.join(", "))
    }
}

pub fn improvement(fine_tuned: &ReportRow, base: &ReportRow) -> Result<Improvement, EvalError> {
    if fine_tuned.model_label != base.model_label {
        return Err(EvalError::FamilyMismatch {
            fine_tuned: fine_tuned.model_label.clone(),
            base: base.model_label.clone(),
        });
    }
    let change = |m: Metric| {
        let b = base.value(m);
        (b != 0.0).then(|| round2(100.0 * (fine_tuned.value(m) - b) / b))
    };
    Ok(Improvement {
        model_label: fine_tuned.model_label.clone(),
        em: change(Metric::Em),
        f1: change(Metric::F1),
        bleu: change(Metric::Bleu),
        rouge: change(Metric::Rouge),
        overall: change(Metric::Overall),
    })
}

/// Improvements for every label that has both a fine-tuned and a base row.
pub fn improvements(rows: &[ReportRow]) -> Vec<Improvement> {
    let mut out = Vec::new();
    for ft in rows.iter().filter(|r| r.tag == ModelTag::FineTuned) {
        if let Some(base) = rows.iter().find(|r| r.tag == ModelTag::Base && r.model_label == ft.model_label) {
            out.extend(improvement(ft, base).ok());
        }
    }
    out
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    model: String,
    #[serde(default)]
    params: String,
    tag: String,
    em: f64,
    f1: f64,
    bleu: f64,
    rouge: f64,
    #[serde(default)]
    overall: Option<f64>,
}

/// Read rows from CSV with columns `model,params,tag,em,f1,bleu,rouge[,overall]`.
pub fn read_rows_csv(text: &str) -> Result<Vec<ReportRow>, EvalError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in reader.deserialize::<CsvRow>() {
        let rec = rec.map_err(|e| EvalError::Config(format!("bad row: {e}")))?;
        let mut row = ReportRow::from_percentages(
            &rec.model,
            &rec.params,
            rec.tag.parse()?,
            [rec.em, rec.f1, rec.bleu, rec.rouge],
        );
        if let Some(o) = rec.overall {
            row.overall = o;
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Optional minimum percentages; any unmet one fails the run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub em: Option<f64>,
    pub f1: Option<f64>,
    pub bleu: Option<f64>,
    pub rouge: Option<f64>,
    pub overall: Option<f64>,
}

impl Thresholds {
    fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Em => self.em,
            Metric::F1 => self.f1,
            Metric::Bleu => self.bleu,
            Metric::Rouge => self.rouge,
            Metric::Overall => self.overall,
        }
    }

    /// Human-readable descriptions of every unmet threshold.
    pub fn unmet(&self, row: &ReportRow) -> Vec<String> {
        Metric::ALL
            .iter()
            .filter_map(|&m| {
                let min = self.get(m)?;
                let got = row.value(m);
                (got < min).then(|| format!("{} [{}] {} {got:.2} < {min:.2}", row.model_label, row.tag.as_str(), m.key()))
            })
            .collect()
    }
}

/// Everything needed to trace a report row back to its inputs. Only
/// `timestamp` varies between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub model_label: String,
    pub tag: ModelTag,
    pub endpoint_digest: String,
    pub dataset_digest: String,
    pub seed: u64,
    pub metric_suite_version: String,
    pub instruction_version: String,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(model_label: &str, tag: ModelTag, endpoint_digest: &str, dataset_digest: &str, seed: u64) -> Self {
        let mut h = Sha256::new();
        for part in [
            model_label,
            tag.as_str(),
            endpoint_digest,
            dataset_digest,
            &seed.to_string(),
            METRIC_SUITE_VERSION,
            INSTRUCTION_VERSION,
        ] {
            h.update(part.as_bytes());
            h.update([0]);
        }
        Self {
            run_id: hex::encode(&h.finalize()[..8]),
            model_label: model_label.to_owned(),
            tag,
            endpoint_digest: endpoint_digest.to_owned(),
            dataset_digest: dataset_digest.to_owned(),
            seed,
            metric_suite_version: METRIC_SUITE_VERSION.to_owned(),
            instruction_version: INSTRUCTION_VERSION.to_owned(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }
}
