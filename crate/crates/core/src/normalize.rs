//! Field normalization: date standardization, skill terminology
//! unification and placeholder filling for missing values.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::AliasError;
use crate::schema::{is_concrete_date, ResumeRecord, PRESENT};

pub const NAME_PLACEHOLDER: &str = "John Doe";
pub const DEPARTMENT_PLACEHOLDER: &str = "Unknown";

/// Default alias map shipped with the crate.
pub const DEFAULT_ALIASES: &str = include_str!("../config/skill_aliases.json");

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NormalizedDate {
    Canonical(String),
    Unparseable,
}

impl NormalizedDate {
    pub fn canonical(&self) -> Option<&str> {
        match self {
            NormalizedDate::Canonical(s) => Some(s),
            NormalizedDate::Unparseable => None,
        }
    }
}

const MONTHS: [&str; 12] = [
    "january", "february", "march", "april", "may", "june", "july", "august", "september",
    "october", "november", "december",
];

fn month_number(word: &str) -> Option<u32> {
    if word == "sept" {
        return Some(9);
    }
    MONTHS
        .iter()
        .position(|m| *m == word || (word.len() == 3 && m.starts_with(word)))
        .map(|i| i as u32 + 1)
}

fn patterns() -> &'static [Regex; 4] {
    static PATTERNS: OnceLock<[Regex; 4]> = OnceLock::new();
    PATTERNS.get_or_init(|| {
        [
            Regex::new(r"^(\d{4})$").unwrap(),
            Regex::new(r"^(\d{4})-(\d{1,2})$").unwrap(),
            Regex::new(r"^(\d{1,2})/(\d{4})$").unwrap(),
            Regex::new(r"^([a-z]+)\s+(\d{4})$").unwrap(),
        ]
    })
}

fn year_month(year: &str, month: u32) -> NormalizedDate {
    if (1..=12).contains(&month) {
        NormalizedDate::Canonical(format!("{year}-{month:02}"))
    } else {
        NormalizedDate::Unparseable
    }
}

/// Map a free-form resume date onto `YYYY-MM`, `YYYY` or `present`.
///
/// Accepted: `MonthName YYYY`, `Mon YYYY`, `MM/YYYY`, `YYYY-MM`, `YYYY` and
/// the tokens `present`, `current`, `now` (any case). Everything else is
/// [`NormalizedDate::Unparseable`].
pub fn normalize_date(raw: &str) -> NormalizedDate {
    let s = raw.trim().to_lowercase();
    if matches!(s.as_str(), "present" | "current" | "now") {
        return NormalizedDate::Canonical(PRESENT.to_owned());
    }
    let [year, iso, slash, named] = patterns();
    if year.is_match(&s) {
        return NormalizedDate::Canonical(s);
    }
    if let Some(c) = iso.captures(&s) {
        return year_month(&c[1], c[2].parse().unwrap_or(0));
    }
    if let Some(c) = slash.captures(&s) {
        return year_month(&c[2], c[1].parse().unwrap_or(0));
    }
    if let Some(c) = named.captures(&s) {
        if let Some(m) = month_number(&c[1]) {
            return year_month(&c[2], m);
        }
    }
    NormalizedDate::Unparseable
}

/// Case-insensitive alias → canonical skill mapping without chains.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SkillAliasMap {
    entries: BTreeMap<String, String>,
}

fn fold(s: &str) -> String {
    s.trim().to_lowercase()
}

impl SkillAliasMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I, A, C>(pairs: I) -> Result<Self, AliasError>
    where
        I: IntoIterator<Item = (A, C)>,
        A: AsRef<str>,
        C: AsRef<str>,
    {
        let mut entries = BTreeMap::new();
        for (alias, canonical) in pairs {
            let key = fold(alias.as_ref());
            let canonical = canonical.as_ref().trim().to_owned();
            if key.is_empty() || canonical.is_empty() {
                return Err(AliasError::Empty);
            }
            match entries.get(&key) {
                Some(existing) if *existing != canonical => return Err(AliasError::Conflict(key)),
                _ => {
                    entries.insert(key, canonical);
                }
            }
        }
        for (alias, canonical) in &entries {
            if let Some(next) = entries.get(&fold(canonical)) {
                if next != canonical {
                    return Err(AliasError::Chain {
                        alias: alias.clone(),
                        canonical: canonical.clone(),
                        next: next.clone(),
                    });
                }
            }
        }
        Ok(Self { entries })
    }

    /// Parse the on-disk format: a JSON object of alias → canonical strings.
    pub fn from_json(text: &str) -> Result<Self, AliasError> {
        let map: BTreeMap<String, String> =
            serde_json::from_str(text).map_err(|e| AliasError::Format(e.to_string()))?;
        Self::from_pairs(map)
    }

    pub fn from_file(path: &Path) -> Result<Self, AliasError> {
        let text = std::fs::read_to_string(path).map_err(|source| AliasError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn builtin() -> Self {
        Self::from_json(DEFAULT_ALIASES).expect("shipped alias map is valid")
    }

    pub fn lookup(&self, skill: &str) -> Option<&str> {
        self.entries.get(&fold(skill)).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(a, c)| (a.as_str(), c.as_str()))
    }
}

/// Per-record (or aggregated) account of what normalization changed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationReport {
    pub dates_rewritten: usize,
    pub skills_unified: usize,
    pub placeholders_inserted: usize,
    /// Experience entries whose start and end dates were swapped because
    /// normalization revealed an inverted range.
    pub date_ranges_reordered: usize,
    pub unparseable_dates: Vec<(String, String)>,
}

impl NormalizationReport {
    pub fn rewrites(&self) -> usize {
        self.dates_rewritten
            + self.skills_unified
            + self.placeholders_inserted
            + self.date_ranges_reordered
    }

    /// Fold another report in, prefixing its paths with `scope`.
    pub fn absorb(&mut self, scope: &str, other: NormalizationReport) {
        self.dates_rewritten += other.dates_rewritten;
        self.skills_unified += other.skills_unified;
        self.placeholders_inserted += other.placeholders_inserted;
        self.date_ranges_reordered += other.date_ranges_reordered;
        self.unparseable_dates.extend(
            other
                .unparseable_dates
                .into_iter()
                .map(|(path, raw)| (format!("{scope}/{path}"), raw)),
        );
    }
}

fn unify_counting(skills: &[String], aliases: &SkillAliasMap) -> (Vec<String>, usize) {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(skills.len());
    let mut changed = 0;
    for skill in skills {
        let trimmed = skill.trim();
        let unified = aliases.lookup(trimmed).unwrap_or(trimmed);
        if unified.is_empty() || !seen.insert(unified.to_owned()) {
            changed += 1;
            continue;
        }
        if unified != skill {
            changed += 1;
        }
        out.push(unified.to_owned());
    }
    (out, changed)
}

/// Trim, alias-replace and de-duplicate (first occurrence wins).
pub fn unify_skills(skills: &[String], aliases: &SkillAliasMap) -> Vec<String> {
    unify_counting(skills, aliases).0
}

/// Insert placeholders for an empty name and department.
pub fn fill_missing(record: &ResumeRecord) -> (ResumeRecord, NormalizationReport) {
    let mut out = record.clone();
    let mut report = NormalizationReport::default();
    if out.name.trim().is_empty() {
        out.name = NAME_PLACEHOLDER.to_owned();
        report.placeholders_inserted += 1;
    }
    if out.department.trim().is_empty() {
        out.department = DEPARTMENT_PLACEHOLDER.to_owned();
        report.placeholders_inserted += 1;
    }
    (out, report)
}

fn normalize_field(value: &mut String, path: String, report: &mut NormalizationReport) {
    if value.trim().is_empty() {
        return;
    }
    match normalize_date(value) {
        NormalizedDate::Canonical(c) => {
            if c != *value {
                *value = c;
                report.dates_rewritten += 1;
            }
        }
        NormalizedDate::Unparseable => report.unparseable_dates.push((path, value.clone())),
    }
}

/// Dates, then skills, then placeholders. Idempotent.
pub fn normalize_record(
    record: &ResumeRecord,
    aliases: &SkillAliasMap,
) -> (ResumeRecord, NormalizationReport) {
    let mut out = record.clone();
    let mut report = NormalizationReport::default();

    for (i, e) in out.experience.iter_mut().enumerate() {
        normalize_field(&mut e.start_date, format!("experience[{i}].start_date"), &mut report);
        normalize_field(&mut e.end_date, format!("experience[{i}].end_date"), &mut report);
        if is_concrete_date(&e.start_date)
            && is_concrete_date(&e.end_date)
            && e.start_date > e.end_date
        {
            std::mem::swap(&mut e.start_date, &mut e.end_date);
            report.date_ranges_reordered += 1;
        }
    }
    for (i, e) in out.education.iter_mut().enumerate() {
        normalize_field(&mut e.end_date, format!("education[{i}].end_date"), &mut report);
    }

    let (skills, unified) = unify_counting(&out.skills, aliases);
    out.skills = skills;
    report.skills_unified = unified;

    let (filled, fill_report) = fill_missing(&out);
    report.placeholders_inserted = fill_report.placeholders_inserted;
    (filled, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{validate, EducationEntry, ExperienceEntry};

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn date_examples() {
        assert_eq!(normalize_date("Jan 2020").canonical(), Some("2020-01"));
        assert_eq!(normalize_date("present").canonical(), Some("present"));
        assert_eq!(normalize_date("03/2019").canonical(), Some("2019-03"));
        assert_eq!(normalize_date("sometime ago"), NormalizedDate::Unparseable);
    }

    #[test]
    fn out_of_range_months_are_unparseable() {
        for raw in ["13/2020", "2020-00", "0/2020", "Foo 2020", "Janu 2020", "20201", ""] {
            assert_eq!(normalize_date(raw), NormalizedDate::Unparseable, "{raw}");
        }
    }

    #[test]
    fn alias_replaces_then_dedupes() {
        let map = SkillAliasMap::from_pairs([("JS", "JavaScript")]).unwrap();
        assert_eq!(unify_skills(&s(&["JS", "JavaScript"]), &map), s(&["JavaScript"]));
        assert_eq!(unify_skills(&[], &map), Vec::<String>::new());
        assert_eq!(unify_skills(&s(&["Rust"]), &SkillAliasMap::new()), s(&["Rust"]));
    }

    #[test]
    fn unknown_skills_keep_their_surface_form() {
        let map = SkillAliasMap::from_pairs([("js", "JavaScript")]).unwrap();
        assert_eq!(
            unify_skills(&s(&[" rust ", "js", "Rust", ""]), &map),
            s(&["rust", "JavaScript", "Rust"])
        );
    }

    #[test]
    fn alias_chains_and_conflicts_are_rejected() {
        let err = SkillAliasMap::from_pairs([("js", "ecmascript"), ("ecmascript", "JavaScript")]);
        assert!(matches!(err, Err(AliasError::Chain { .. })));
        let err = SkillAliasMap::from_pairs([("JS", "JavaScript"), ("js", "Jscript")]);
        assert!(matches!(err, Err(AliasError::Conflict(_))));
        // A canonical that maps to itself is allowed.
        assert!(SkillAliasMap::from_pairs([("javascript", "JavaScript"), ("js", "JavaScript")]).is_ok());
        assert!(SkillAliasMap::from_json("[1,2]").is_err());
    }

    #[test]
    fn builtin_map_is_idempotent() {
        let map = SkillAliasMap::builtin();
        assert!(!map.is_empty());
        for (_, canonical) in map.iter() {
            let once = unify_skills(&[canonical.to_owned()], &map);
            assert_eq!(once, vec![canonical.to_owned()]);
        }
    }

    #[test]
    fn fill_missing_examples() {
        let r = ResumeRecord {
            department: "IT".into(),
            ..Default::default()
        };
        let (out, rep) = fill_missing(&r);
        assert_eq!(out.name, NAME_PLACEHOLDER);
        assert_eq!(rep.placeholders_inserted, 1);

        let (out, rep) = fill_missing(&ResumeRecord::default());
        assert_eq!(out.department, DEPARTMENT_PLACEHOLDER);
        assert_eq!(rep.placeholders_inserted, 2);

        let full = ResumeRecord {
            name: "Ann".into(),
            department: "HR".into(),
            ..Default::default()
        };
        let (out, rep) = fill_missing(&full);
        assert_eq!(out, full);
        assert_eq!(rep.placeholders_inserted, 0);
    }

    fn messy() -> ResumeRecord {
        ResumeRecord {
            name: String::new(),
            email: "x@y.z".into(),
            phone: String::new(),
            skills: s(&["js", "Python"]),
            experience: vec![ExperienceEntry {
                title: "Dev".into(),
                company: "Co".into(),
                start_date: "Jan 2020".into(),
                end_date: "present".into(),
                description: String::new(),
            }],
            education: vec![EducationEntry {
                degree: "BSc".into(),
                institution: "Uni".into(),
                end_date: "circa 2010".into(),
            }],
            department: "IT".into(),
        }
    }

    #[test]
    fn normalize_record_composes_all_steps() {
        let map = SkillAliasMap::from_pairs([("js", "JavaScript")]).unwrap();
        let (out, rep) = normalize_record(&messy(), &map);
        assert_eq!(out.experience[0].start_date, "2020-01");
        assert_eq!(out.experience[0].end_date, "present");
        assert_eq!(out.skills, s(&["JavaScript", "Python"]));
        assert_eq!(out.name, NAME_PLACEHOLDER);
        assert_eq!(out.education[0].end_date, "circa 2010");
        assert_eq!(rep.dates_rewritten, 1);
        assert_eq!(rep.skills_unified, 1);
        assert_eq!(rep.placeholders_inserted, 1);
        assert_eq!(
            rep.unparseable_dates,
            vec![("education[0].end_date".to_owned(), "circa 2010".to_owned())]
        );
        assert!(validate(&out).is_empty());

        let (again, rep2) = normalize_record(&out, &map);
        assert_eq!(again, out);
        assert_eq!(rep2.rewrites(), 0);
    }

    #[test]
    fn inverted_range_is_reordered() {
        let mut r = messy();
        r.experience[0].start_date = "Mar 2021".into();
        r.experience[0].end_date = "02/2019".into();
        let (out, rep) = normalize_record(&r, &SkillAliasMap::new());
        assert_eq!(out.experience[0].start_date, "2019-02");
        assert_eq!(out.experience[0].end_date, "2021-03");
        assert_eq!(rep.date_ranges_reordered, 1);
        assert!(validate(&out).is_empty());
    }
}
