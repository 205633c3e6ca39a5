//! Hybrid dataset assembly: merge real and synthetic records, normalize,
//! split into train/val/test, and export fine-tuning artifacts.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::DatasetError;
use crate::instruction::{INSTRUCTION_VERSION, PARSING_INSTRUCTION};
use crate::normalize::{normalize_record, NormalizationReport, SkillAliasMap};
use crate::schema::{canonical_bytes, canonical_string, validate, ResumeRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Real,
    Synthetic,
}

/// A structured record paired with the unstructured text it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceRecord {
    pub source_id: String,
    pub provenance: Provenance,
    pub raw_text: String,
    pub record: ResumeRecord,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

pub const DEFAULT_RATIOS: [f64; 3] = [0.8, 0.1, 0.1];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeStats {
    pub real_in: usize,
    pub synthetic_in: usize,
    pub duplicates_removed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub seed: u64,
    pub ratios: [f64; 3],
    pub stratified: bool,
}

/// Records ordered by `source_id`, plus the split assignment once made.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    records: Vec<SourceRecord>,
    assignment: Option<BTreeMap<String, Split>>,
    pub merge_stats: MergeStats,
    pub split_info: Option<SplitInfo>,
}

fn check_inputs(records: &[SourceRecord]) -> Result<(), DatasetError> {
    let mut ids = HashSet::new();
    for r in records {
        if !ids.insert(r.source_id.as_str()) {
            return Err(DatasetError::DuplicateSourceId(r.source_id.clone()));
        }
        if r.raw_text.trim().is_empty() {
            return Err(DatasetError::EmptyRawText(r.source_id.clone()));
        }
        let violations = validate(&r.record);
        if !violations.is_empty() {
            return Err(DatasetError::InvalidRecord {
                source_id: r.source_id.clone(),
                violations,
            });
        }
    }
    Ok(())
}

/// Union of real and synthetic records. Records with identical canonical
/// bytes collapse onto the smallest `source_id`, so the result does not
/// depend on argument order.
pub fn merge(real: Vec<SourceRecord>, synthetic: Vec<SourceRecord>) -> Result<DatasetBundle, DatasetError> {
    check_inputs(&real)?;
    check_inputs(&synthetic)?;
    let stats_in = (real.len(), synthetic.len());

    let tagged = real
        .into_iter()
        .map(|r| (Provenance::Real, r))
        .chain(synthetic.into_iter().map(|r| (Provenance::Synthetic, r)));
    let mut by_id: BTreeMap<String, SourceRecord> = BTreeMap::new();
    let mut duplicates = 0;
    for (provenance, mut r) in tagged {
        r.provenance = provenance;
        match by_id.get(&r.source_id) {
            Some(existing) if existing.record == r.record && existing.raw_text == r.raw_text => {
                duplicates += 1;
            }
            Some(_) => return Err(DatasetError::SourceIdCollision(r.source_id)),
            None => {
                by_id.insert(r.source_id.clone(), r);
            }
        }
    }

    // BTreeMap iteration is in source_id order, so the first id seen for a
    // given content is the smallest.
    let mut seen: HashSet<Vec<u8>> = HashSet::new();
    let mut records = Vec::with_capacity(by_id.len());
    for r in by_id.into_values() {
        if seen.insert(canonical_bytes(&r.record)) {
            records.push(r);
        } else {
            duplicates += 1;
        }
    }
    if duplicates > 0 {
        log::info!("merge removed {duplicates} duplicate record(s)");
    }
    Ok(DatasetBundle {
        records,
        assignment: None,
        merge_stats: MergeStats {
            real_in: stats_in.0,
            synthetic_in: stats_in.1,
            duplicates_removed: duplicates,
        },
        split_info: None,
    })
}

/// `(train, val, test)` sizes: val and test are floored, train gets the rest.
pub fn split_sizes(n: usize, ratios: [f64; 3]) -> (usize, usize, usize) {
    // The epsilon keeps e.g. 0.1 * 70 = 7.000000000000001 and
    // 0.1 * 30 = 2.9999999999999996-style products on the right integer.
    let floor = |r: f64| ((r * n as f64) + 1e-9).floor() as usize;
    let val = floor(ratios[1]);
    let test = floor(ratios[2]);
    (n - val - test, val, test)
}

fn check_ratios(ratios: [f64; 3]) -> Result<(), DatasetError> {
    let sum: f64 = ratios.iter().sum();
    if ratios.iter().any(|r| !(*r > 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(DatasetError::BadRatios(ratios));
    }
    Ok(())
}

impl DatasetBundle {
    pub fn records(&self) -> &[SourceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_split(&self) -> bool {
        self.assignment.is_some()
    }

    pub fn split_of(&self, source_id: &str) -> Option<Split> {
        self.assignment.as_ref()?.get(source_id).copied()
    }

    /// Normalize every record in place; the report aggregates all records
    /// with paths prefixed by `source_id`.
    pub fn normalize(&mut self, aliases: &SkillAliasMap) -> NormalizationReport {
        let mut total = NormalizationReport::default();
        for r in &mut self.records {
            let (record, report) = normalize_record(&r.record, aliases);
            r.record = record;
            total.absorb(&r.source_id, report);
        }
        total
    }

    /// Seeded shuffle, then the first `floor(test·N)` records go to test,
    /// the next `floor(val·N)` to val and the rest to train. With
    /// `stratify`, records are first interleaved by department so every
    /// prefix of the order holds each department in proportion.
    pub fn split(mut self, seed: u64, ratios: [f64; 3], stratify: bool) -> Result<Self, DatasetError> {
        check_ratios(ratios)?;
        if self.records.is_empty() {
            return Err(DatasetError::Empty);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let order: Vec<usize> = if stratify {
            let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, r) in self.records.iter().enumerate() {
                groups.entry(r.record.department.as_str()).or_default().push(i);
            }
            let mut keyed = Vec::with_capacity(self.records.len());
            for (rank, members) in groups.values_mut().enumerate() {
                members.shuffle(&mut rng);
                let n = members.len() as f64;
                for (j, &idx) in members.iter().enumerate() {
                    keyed.push(((j as f64 + 0.5) / n, rank, idx));
                }
            }
            keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            keyed.into_iter().map(|(_, _, idx)| idx).collect()
        } else {
            let mut order: Vec<usize> = (0..self.records.len()).collect();
            order.shuffle(&mut rng);
            order
        };

        let (_, val, test) = split_sizes(order.len(), ratios);
        let assignment = order
            .iter()
            .enumerate()
            .map(|(pos, &idx)| {
                let split = if pos < test {
                    Split::Test
                } else if pos < test + val {
                    Split::Val
                } else {
                    Split::Train
                };
                (self.records[idx].source_id.clone(), split)
            })
            .collect();
        self.assignment = Some(assignment);
        self.split_info = Some(SplitInfo {
            seed,
            ratios,
            stratified: stratify,
        });
        Ok(self)
    }

    /// Members of one split in `source_id` order.
    pub fn members(&self, split: Split) -> Result<Vec<&SourceRecord>, DatasetError> {
        let assignment = self.assignment.as_ref().ok_or(DatasetError::NotSplit)?;
        Ok(self
            .records
            .iter()
            .filter(|r| assignment.get(&r.source_id) == Some(&split))
            .collect())
    }

    pub fn split_counts(&self) -> Result<BTreeMap<Split, usize>, DatasetError> {
        let mut counts: BTreeMap<Split, usize> = Split::ALL.iter().map(|s| (*s, 0)).collect();
        for r in &self.records {
            let split = self.split_of(&r.source_id).ok_or(DatasetError::NotSplit)?;
            *counts.entry(split).or_default() += 1;
        }
        Ok(counts)
    }

    /// Hash of every record's canonical bytes and split, in order.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for r in &self.records {
            h.update(r.source_id.as_bytes());
            h.update([0]);
            h.update(canonical_bytes(&r.record));
            h.update([0]);
            if let Some(split) = self.split_of(&r.source_id) {
                h.update(split.as_str().as_bytes());
            }
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    /// One instruction example per line for `split`; returns the line count.
    pub fn export_instruction_jsonl(&self, split: Split, mut out: impl Write) -> Result<usize, DatasetError> {
        let members = self.members(split)?;
        let io = |source| DatasetError::Io {
            path: split.as_str().into(),
            source,
        };
        for r in &members {
            let line = serde_json::to_string(&InstructionExample::for_record(r)).expect("serializes");
            out.write_all(line.as_bytes()).map_err(io)?;
            out.write_all(b"\n").map_err(io)?;
        }
        out.flush().map_err(io)?;
        Ok(members.len())
    }

    pub fn export_instruction_file(&self, split: Split, path: &Path) -> Result<usize, DatasetError> {
        let io = |source| DatasetError::Io {
            path: path.to_owned(),
            source,
        };
        let file = File::create(path).map_err(io)?;
        self.export_instruction_jsonl(split, BufWriter::new(file))
    }

    pub fn manifest(&self, normalization: &NormalizationReport) -> Result<BundleManifest, DatasetError> {
        let info = self.split_info.clone().ok_or(DatasetError::NotSplit)?;
        let counts = self.split_counts()?;
        let real = self.records.iter().filter(|r| r.provenance == Provenance::Real).count();
        Ok(BundleManifest {
            instruction_version: INSTRUCTION_VERSION.to_owned(),
            seed: info.seed,
            ratios: info.ratios,
            stratified: info.stratified,
            total: self.records.len(),
            real,
            synthetic: self.records.len() - real,
            train: counts[&Split::Train],
            val: counts[&Split::Val],
            test: counts[&Split::Test],
            merge: self.merge_stats,
            normalization: NormalizationCounts {
                dates_rewritten: normalization.dates_rewritten,
                skills_unified: normalization.skills_unified,
                placeholders_inserted: normalization.placeholders_inserted,
                date_ranges_reordered: normalization.date_ranges_reordered,
                unparseable_dates: normalization.unparseable_dates.len(),
            },
            records_digest: self.digest(),
        })
    }

    /// Write every record with its split as JSON lines.
    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        let io = |source| DatasetError::Io {
            path: path.to_owned(),
            source,
        };
        let mut out = BufWriter::new(File::create(path).map_err(io)?);
        for r in &self.records {
            let line = BundleLine {
                source_id: &r.source_id,
                provenance: r.provenance,
                split: self.split_of(&r.source_id),
                raw_text: &r.raw_text,
                record: &r.record,
            };
            serde_json::to_writer(&mut out, &line).expect("serializes");
            out.write_all(b"\n").map_err(io)?;
        }
        out.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let lines: Vec<OwnedBundleLine> = read_jsonl(path)?;
        let mut assignment = BTreeMap::new();
        let mut records = Vec::with_capacity(lines.len());
        for l in lines {
            if let Some(split) = l.split {
                assignment.insert(l.source_id.clone(), split);
            }
            records.push(SourceRecord {
                source_id: l.source_id,
                provenance: l.provenance,
                raw_text: l.raw_text,
                record: l.record,
            });
        }
        records.sort_by(|a, b| a.source_id.cmp(&b.source_id));
        let is_split = !records.is_empty() && assignment.len() == records.len();
        Ok(Self {
            records,
            assignment: is_split.then_some(assignment),
            merge_stats: MergeStats::default(),
            split_info: None,
        })
    }
}

#[derive(Serialize)]
struct BundleLine<'a> {
    source_id: &'a str,
    provenance: Provenance,
    #[serde(skip_serializing_if = "Option::is_none")]
    split: Option<Split>,
    raw_text: &'a str,
    record: &'a ResumeRecord,
}

#[derive(Deserialize)]
struct OwnedBundleLine {
    source_id: String,
    provenance: Provenance,
    #[serde(default)]
    split: Option<Split>,
    raw_text: String,
    record: ResumeRecord,
}

/// Read a JSON-lines file, reporting the 1-based line of the first bad line.
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let file = File::open(path).map_err(|source| DatasetError::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| DatasetError::Io {
            path: path.to_owned(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| DatasetError::Format {
            path: path.to_owned(),
            line: i + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_source_records(path: &Path, records: &[SourceRecord]) -> Result<(), DatasetError> {
    let io = |source| DatasetError::Io {
        path: path.to_owned(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    for r in records {
        serde_json::to_writer(&mut out, r).expect("serializes");
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// One supervised fine-tuning example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionExample {
    pub instruction: String,
    pub input: String,
    pub output: String,
}

impl InstructionExample {
    pub fn for_record(r: &SourceRecord) -> Self {
        Self {
            instruction: PARSING_INSTRUCTION.to_owned(),
            input: r.raw_text.clone(),
            output: canonical_string(&r.record),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationCounts {
    pub dates_rewritten: usize,
    pub skills_unified: usize,
    pub placeholders_inserted: usize,
    pub date_ranges_reordered: usize,
    pub unparseable_dates: usize,
}

/// Provenance record written next to the exported splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub instruction_version: String,
    pub seed: u64,
    pub ratios: [f64; 3],
    pub stratified: bool,
    pub total: usize,
    pub real: usize,
    pub synthetic: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub merge: MergeStats,
    pub normalization: NormalizationCounts,
    pub records_digest: String,
}

/// LoRA hyperparameters consumed by the training launcher.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraTrainingConfig {
    pub base_model_id: String,
    pub r: u32,
    pub alpha: u32,
    pub target_modules: Vec<String>,
    pub batch_size: u32,
    pub learning_rate: f64,
    pub max_steps: u32,
    pub warmup_steps: u32,
}

impl LoraTrainingConfig {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let fail = |m: &str| Err(DatasetError::InvalidLoraConfig(m.to_owned()));
        if self.r == 0 {
            return fail("r must be positive");
        }
        if self.alpha == 0 {
            return fail("alpha must be positive");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1");
        }
        if !(self.learning_rate > 0.0) {
            return fail("learning_rate must be positive");
        }
        if self.warmup_steps > self.max_steps {
            return fail("warmup_steps exceeds max_steps");
        }
        if self.target_modules.is_empty() {
            return fail("no target modules");
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<(), DatasetError> {
        self.validate()?;
        let mut text = serde_json::to_string_pretty(self).expect("serializes");
        text.push('\n');
        fs::write(path, text).map_err(|source| DatasetError::Io {
            path: path.to_owned(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self, DatasetError> {
        let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.to_owned(),
            source,
        })?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| DatasetError::Format {
            path: path.to_owned(),
            line: e.line(),
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// rank 16, alpha 16, q/k/v/o projections, batch 8, lr 5e-5, 200 steps, 5 warmup.
pub fn emit_lora_config(base_model_id: &str) -> LoraTrainingConfig {
    LoraTrainingConfig {
        base_model_id: base_model_id.to_owned(),
        r: 16,
        alpha: 16,
        target_modules: ["q_proj", "k_proj", "v_proj", "o_proj"].map(String::from).to_vec(),
        batch_size: 8,
        learning_rate: 5e-5,
        max_steps: 200,
        warmup_steps: 5,
    }
}

/// Group records by department, for reporting.
pub fn department_counts(records: &[SourceRecord]) -> BTreeMap<String, usize> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for r in records {
        *counts.entry(r.record.department.as_str()).or_default() += 1;
    }
    counts.into_iter().map(|(k, v)| (k.to_owned(), v)).collect()
}
