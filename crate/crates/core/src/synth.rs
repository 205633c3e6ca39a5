//! Seeded synthetic resume generation.
//!
//! Every record is generated from its own ChaCha8 stream: the batch seed
//! is the key and the record index is the stream id, so a batch can be
//! produced in parallel and any single record regenerated in isolation.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Provenance, SourceRecord};
use crate::error::SynthError;
use crate::instruction::SYNTH_PROMPT_TEMPLATE;
use crate::llm_gateway::{extract_record, ChatRequest, CompletionClient};
use crate::normalize::{normalize_record, SkillAliasMap};
use crate::schema::{EducationEntry, ExperienceEntry, ResumeRecord, PRESENT};

/// Inclusive `[low, high]` count range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRange(pub usize, pub usize);

impl CountRange {
    pub fn low(&self) -> usize {
        self.0
    }

    pub fn high(&self) -> usize {
        self.1
    }
}

fn default_degrees() -> Vec<String> {
    ["BSc", "BA", "MSc", "MBA"].map(String::from).to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthProfile {
    pub department: String,
    pub name_pool: Vec<String>,
    pub company_pool: Vec<String>,
    pub institution_pool: Vec<String>,
    pub skill_pool: Vec<String>,
    pub title_pool: Vec<String>,
    #[serde(default = "default_degrees")]
    pub degree_pool: Vec<String>,
    pub experience_count_range: CountRange,
    pub skill_count_range: CountRange,
}

impl SynthProfile {
    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |reason: String| SynthError::InvalidProfile {
            department: self.department.clone(),
            reason,
        };
        if self.department.trim().is_empty() {
            return Err(fail("department is empty".into()));
        }
        let pools = [
            ("name_pool", &self.name_pool),
            ("company_pool", &self.company_pool),
            ("institution_pool", &self.institution_pool),
            ("skill_pool", &self.skill_pool),
            ("title_pool", &self.title_pool),
            ("degree_pool", &self.degree_pool),
        ];
        for (label, pool) in pools {
            if pool.is_empty() {
                return Err(fail(format!("{label} is empty")));
            }
            if pool.iter().any(|v| v.trim().is_empty()) {
                return Err(fail(format!("{label} contains an empty entry")));
            }
        }
        let distinct: HashSet<&String> = self.skill_pool.iter().collect();
        if distinct.len() != self.skill_pool.len() {
            return Err(fail("skill_pool contains duplicates".into()));
        }
        for (label, r) in [
            ("experience_count_range", self.experience_count_range),
            ("skill_count_range", self.skill_count_range),
        ] {
            if r.low() > r.high() {
                return Err(fail(format!("{label} has low > high")));
            }
        }
        if self.skill_count_range.high() > self.skill_pool.len() {
            return Err(fail("skill_count_range exceeds skill_pool size".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedProfile {
    #[serde(flatten)]
    pub profile: SynthProfile,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthBatchSpec {
    pub count: usize,
    pub seed: u64,
    pub profiles: Vec<WeightedProfile>,
}

impl SynthBatchSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.count == 0 {
            return Err(SynthError::InvalidSpec("count must be at least 1".into()));
        }
        if self.profiles.is_empty() {
            return Err(SynthError::InvalidSpec("no profiles".into()));
        }
        for p in &self.profiles {
            if !(p.weight > 0.0 && p.weight.is_finite()) {
                return Err(SynthError::InvalidSpec(format!(
                    "profile '{}' has non-positive weight {}",
                    p.profile.department, p.weight
                )));
            }
            p.profile.validate()?;
        }
        Ok(())
    }
}

const BUILTIN_PROFILES: [&str; 4] = [
    include_str!("../profiles/healthcare.json"),
    include_str!("../profiles/human_resources.json"),
    include_str!("../profiles/information_technology.json"),
    include_str!("../profiles/public_relations.json"),
];

/// Profiles for Healthcare, Human Resources, Information Technology and
/// Public Relations, weighted equally.
pub fn builtin_profiles() -> Vec<WeightedProfile> {
    BUILTIN_PROFILES
        .iter()
        .map(|text| serde_json::from_str(text).expect("shipped profile parses"))
        .collect()
}

/// Every `*.json` file in `dir`, in file-name order.
pub fn load_profiles(dir: &Path) -> Result<Vec<WeightedProfile>, SynthError> {
    let io = |path: &Path, e: String| SynthError::ProfileFile {
        path: path.to_owned(),
        reason: e,
    };
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| io(dir, e.to_string()))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut out = Vec::with_capacity(paths.len());
    for path in paths {
        let text = fs::read_to_string(&path).map_err(|e| io(&path, e.to_string()))?;
        let p: WeightedProfile = serde_json::from_str(&text).map_err(|e| io(&path, e.to_string()))?;
        p.profile.validate()?;
        out.push(p);
    }
    if out.is_empty() {
        return Err(io(dir, "no profile files".into()));
    }
    Ok(out)
}

/// Months since year 0, for date arithmetic.
fn month_index(year: i32, month: u32) -> i32 {
    year * 12 + month as i32 - 1
}

fn format_month(index: i32) -> String {
    format!("{:04}-{:02}", index.div_euclid(12), index.rem_euclid(12) + 1)
}

fn email_for(name: &str, domain: &str) -> String {
    let local: Vec<String> = name
        .split_whitespace()
        .map(|part| part.chars().filter(char::is_ascii_alphanumeric).collect::<String>().to_lowercase())
        .filter(|p| !p.is_empty())
        .collect();
    format!("{}@{domain}", local.join("."))
}

/// One template resume. The record is born canonical: dates are already
/// `YYYY-MM`/`present` and entries run most recent first without overlap.
pub fn generate_resume(profile: &SynthProfile, rng: &mut impl Rng) -> ResumeRecord {
    let name = profile.name_pool.choose(rng).expect("validated").clone();
    let phone = format!("+1-555-{:03}-{:04}", rng.gen_range(100..1000), rng.gen_range(0..10000));

    let k = rng.gen_range(profile.skill_count_range.low()..=profile.skill_count_range.high());
    let skills: Vec<String> = profile.skill_pool.choose_multiple(rng, k).cloned().collect();

    let n_jobs = rng.gen_range(profile.experience_count_range.low()..=profile.experience_count_range.high());
    let career_start = month_index(rng.gen_range(2000..=2012), rng.gen_range(1..=12));
    let mut cursor = career_start;
    let mut experience = Vec::with_capacity(n_jobs);
    for i in 0..n_jobs {
        let start = cursor;
        let end = start + rng.gen_range(6..=48);
        cursor = end + rng.gen_range(0..=3);
        let title = profile.title_pool.choose(rng).expect("validated").clone();
        let company = profile.company_pool.choose(rng).expect("validated").clone();
        let ongoing = i + 1 == n_jobs && rng.gen_bool(0.5);
        let description = match skills.choose_multiple(rng, 2).collect::<Vec<_>>()[..] {
            [a, b] => format!("{title} at {company}, working with {a} and {b}."),
            [a] => format!("{title} at {company}, working with {a}."),
            _ => format!("{title} at {company}."),
        };
        experience.push(ExperienceEntry {
            title,
            company,
            start_date: format_month(start),
            end_date: if ongoing { PRESENT.to_owned() } else { format_month(end) },
            description,
        });
    }
    experience.reverse();

    let education = vec![EducationEntry {
        degree: profile.degree_pool.choose(rng).expect("validated").clone(),
        institution: profile.institution_pool.choose(rng).expect("validated").clone(),
        end_date: format_month(career_start - rng.gen_range(1..=6)),
    }];

    ResumeRecord {
        email: email_for(&name, "example.com"),
        name,
        phone,
        skills,
        experience,
        education,
        department: profile.department.clone(),
    }
}

const MONTH_ABBR: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];

/// `2020-01` → `Jan 2020`, `present` → `Present`; anything else verbatim.
fn display_date(date: &str) -> String {
    if date == PRESENT {
        return "Present".into();
    }
    match date.split_once('-') {
        Some((y, m)) => match m.parse::<usize>() {
            Ok(m @ 1..=12) => format!("{} {y}", MONTH_ABBR[m - 1]),
            _ => date.to_owned(),
        },
        None => date.to_owned(),
    }
}

/// Plain-text resume rendering of a record, the training input paired
/// with the record as target.
pub fn render_plain_text(record: &ResumeRecord) -> String {
    let mut out = String::new();
    out.push_str(&record.name);
    out.push('\n');
    let contact: Vec<&str> = [record.email.as_str(), record.phone.as_str()]
        .into_iter()
        .filter(|s| !s.is_empty())
        .collect();
    if !contact.is_empty() {
        out.push_str(&contact.join(" | "));
        out.push('\n');
    }
    if !record.department.is_empty() {
        out.push_str(&format!("Field: {}\n", record.department));
    }
    if !record.skills.is_empty() {
        out.push_str(&format!("\nSkills: {}\n", record.skills.join(", ")));
    }
    if !record.experience.is_empty() {
        out.push_str("\nExperience\n");
        for e in &record.experience {
            out.push_str(&format!(
                "{}, {} ({} - {})\n",
                e.title,
                e.company,
                display_date(&e.start_date),
                display_date(&e.end_date)
            ));
            if !e.description.is_empty() {
                out.push_str(&format!("  {}\n", e.description));
            }
        }
    }
    if !record.education.is_empty() {
        out.push_str("\nEducation\n");
        for e in &record.education {
            if e.end_date.is_empty() {
                out.push_str(&format!("{}, {}\n", e.degree, e.institution));
            } else {
                out.push_str(&format!("{}, {} ({})\n", e.degree, e.institution, display_date(&e.end_date)));
            }
        }
    }
    out
}

pub fn record_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn synthetic_source_id(seed: u64, index: usize) -> String {
    format!("synth-{seed}-{index:06}")
}

/// `spec.count` records, each tagged synthetic with its rendered text.
pub fn generate_batch(spec: &SynthBatchSpec) -> Result<Vec<SourceRecord>, SynthError> {
    spec.validate()?;
    let weights = WeightedIndex::new(spec.profiles.iter().map(|p| p.weight))
        .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    Ok((0..spec.count)
        .into_par_iter()
        .map(|i| {
            let mut rng = record_rng(spec.seed, i as u64);
            let profile = &spec.profiles[weights.sample(&mut rng)].profile;
            let record = generate_resume(profile, &mut rng);
            SourceRecord {
                source_id: synthetic_source_id(spec.seed, i),
                provenance: Provenance::Synthetic,
                raw_text: render_plain_text(&record),
                record,
            }
        })
        .collect())
}

/// Ask a completion endpoint for a resume in `department`.
pub fn generate_via_llm(
    prompt_template: &str,
    department: &str,
    client: &dyn CompletionClient,
    model_id: &str,
    aliases: &SkillAliasMap,
) -> Result<ResumeRecord, SynthError> {
    let prompt = prompt_template.replace("{department}", department);
    let mut request = ChatRequest::new(
        model_id,
        "You write synthetic resumes as strict JSON.",
        prompt,
    );
    request.temperature = 0.7;
    let raw = client.complete(&request)?;
    let (record, repairs) = extract_record(&raw)?;
    if !repairs.is_empty() {
        log::debug!("synthetic resume for {department} needed repairs {repairs:?}");
    }
    Ok(normalize_record(&record, aliases).0)
}

/// [`generate_via_llm`] with the shipped prompt.
pub fn generate_via_llm_default(
    department: &str,
    client: &dyn CompletionClient,
    model_id: &str,
    aliases: &SkillAliasMap,
) -> Result<ResumeRecord, SynthError> {
    generate_via_llm(SYNTH_PROMPT_TEMPLATE, department, client, model_id, aliases)
}
