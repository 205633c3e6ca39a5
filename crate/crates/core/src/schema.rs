//! The standardized resume record, its validation rules, canonical JSON
//! encoding and the leaf-path flattening shared by every metric.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::SchemaError;

/// JSON Schema document describing [`ResumeRecord`].
pub const JSON_SCHEMA: &str = include_str!("../schema/resume_record.schema.json");

/// Top-level keys in schema order.
pub const TOP_LEVEL_KEYS: [&str; 7] = [
    "name",
    "email",
    "phone",
    "skills",
    "experience",
    "education",
    "department",
];

pub const EXPERIENCE_KEYS: [&str; 5] = ["title", "company", "start_date", "end_date", "description"];
pub const EDUCATION_KEYS: [&str; 3] = ["degree", "institution", "end_date"];

/// Token used for an ongoing position's end date.
pub const PRESENT: &str = "present";

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResumeRecord {
    pub name: String,
    pub email: String,
    pub phone: String,
    pub skills: Vec<String>,
    pub experience: Vec<ExperienceEntry>,
    pub education: Vec<EducationEntry>,
    pub department: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExperienceEntry {
    pub title: String,
    pub company: String,
    pub start_date: String,
    pub end_date: String,
    pub description: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EducationEntry {
    pub degree: String,
    pub institution: String,
    pub end_date: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    MissingKey,
    WrongType,
    EmptySkill,
    DuplicateSkill,
    DateOrder,
    EmptyDegree,
    EmptyInstitution,
    NotAnObject,
    InvalidJson,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::MissingKey => "missing_key",
            Rule::WrongType => "wrong_type",
            Rule::EmptySkill => "empty_skill",
            Rule::DuplicateSkill => "duplicate_skill",
            Rule::DateOrder => "date_order",
            Rule::EmptyDegree => "empty_degree",
            Rule::EmptyInstitution => "empty_institution",
            Rule::NotAnObject => "not_an_object",
            Rule::InvalidJson => "invalid_json",
        }
    }
}

/// One broken invariant, located by leaf path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub rule: Rule,
}

impl Violation {
    fn new(path: impl Into<String>, rule: Rule) -> Self {
        Self {
            path: path.into(),
            rule,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = if self.path.is_empty() { "$" } else { &self.path };
        write!(f, "{}: {}", path, self.rule.as_str())
    }
}

/// True for `YYYY` and `YYYY-MM`.
pub fn is_concrete_date(s: &str) -> bool {
    let b = s.as_bytes();
    match b.len() {
        4 => b.iter().all(u8::is_ascii_digit),
        7 => {
            b[..4].iter().all(u8::is_ascii_digit)
                && b[4] == b'-'
                && b[5..].iter().all(u8::is_ascii_digit)
        }
        _ => false,
    }
}

/// Content invariants of an already-deserialized record.
pub fn validate(record: &ResumeRecord) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut seen = HashSet::new();
    for (i, skill) in record.skills.iter().enumerate() {
        let path = format!("skills[{i}]");
        if skill.trim().is_empty() {
            out.push(Violation::new(path, Rule::EmptySkill));
        } else if !seen.insert(skill.as_str()) {
            out.push(Violation::new(path, Rule::DuplicateSkill));
        }
    }

    for (i, e) in record.experience.iter().enumerate() {
        if is_concrete_date(&e.start_date)
            && is_concrete_date(&e.end_date)
            && e.start_date > e.end_date
        {
            out.push(Violation::new(format!("experience[{i}].end_date"), Rule::DateOrder));
        }
    }

    for (i, e) in record.education.iter().enumerate() {
        if e.degree.trim().is_empty() {
            out.push(Violation::new(format!("education[{i}].degree"), Rule::EmptyDegree));
        }
        if e.institution.trim().is_empty() {
            out.push(Violation::new(
                format!("education[{i}].institution"),
                Rule::EmptyInstitution,
            ));
        }
    }
    out
}

fn check_string(obj: &serde_json::Map<String, Value>, key: &str, prefix: &str, out: &mut Vec<Violation>) {
    let path = format!("{prefix}{key}");
    match obj.get(key) {
        None => out.push(Violation::new(path, Rule::MissingKey)),
        Some(Value::String(_)) => {}
        Some(_) => out.push(Violation::new(path, Rule::WrongType)),
    }
}

fn check_entries(
    obj: &serde_json::Map<String, Value>,
    key: &str,
    fields: &[&str],
    out: &mut Vec<Violation>,
) {
    match obj.get(key) {
        None => out.push(Violation::new(key, Rule::MissingKey)),
        Some(Value::Array(items)) => {
            for (i, item) in items.iter().enumerate() {
                let prefix = format!("{key}[{i}].");
                match item {
                    Value::Object(entry) => {
                        for field in fields {
                            check_string(entry, field, &prefix, out);
                        }
                    }
                    _ => out.push(Violation::new(format!("{key}[{i}]"), Rule::WrongType)),
                }
            }
        }
        Some(_) => out.push(Violation::new(key, Rule::WrongType)),
    }
}

/// Structural plus content validation of a JSON document that claims to be
/// a [`ResumeRecord`]. Unknown keys are ignored.
pub fn validate_value(value: &Value) -> Vec<Violation> {
    let Value::Object(obj) = value else {
        return vec![Violation::new("", Rule::NotAnObject)];
    };
    let mut out = Vec::new();
    for key in TOP_LEVEL_KEYS {
        match key {
            "skills" => match obj.get(key) {
                None => out.push(Violation::new(key, Rule::MissingKey)),
                Some(Value::Array(items)) => {
                    for (i, item) in items.iter().enumerate() {
                        if !item.is_string() {
                            out.push(Violation::new(format!("skills[{i}]"), Rule::WrongType));
                        }
                    }
                }
                Some(_) => out.push(Violation::new(key, Rule::WrongType)),
            },
            "experience" => check_entries(obj, key, &EXPERIENCE_KEYS, &mut out),
            "education" => check_entries(obj, key, &EDUCATION_KEYS, &mut out),
            _ => check_string(obj, key, "", &mut out),
        }
    }
    if !out.is_empty() {
        return out;
    }
    match serde_json::from_value::<ResumeRecord>(value.clone()) {
        Ok(record) => validate(&record),
        Err(_) => vec![Violation::new("", Rule::WrongType)],
    }
}

/// Parse JSON text into a record, rejecting anything that does not validate.
pub fn parse_record(text: &str) -> Result<ResumeRecord, SchemaError> {
    let value: Value = serde_json::from_str(text).map_err(|e| SchemaError::Json(e.to_string()))?;
    let violations = validate_value(&value);
    if !violations.is_empty() {
        return Err(SchemaError::Violations(violations));
    }
    serde_json::from_value(value).map_err(|e| SchemaError::Json(e.to_string()))
}

/// Compact JSON with keys in schema order. Fails on records with violations.
pub fn canonical_serialize(record: &ResumeRecord) -> Result<Vec<u8>, SchemaError> {
    let violations = validate(record);
    if !violations.is_empty() {
        return Err(SchemaError::Violations(violations));
    }
    Ok(canonical_bytes(record))
}

/// Canonical bytes without the validation gate; used for digests and dedup keys.
pub(crate) fn canonical_bytes(record: &ResumeRecord) -> Vec<u8> {
    serde_json::to_vec(record).expect("record serialization is infallible")
}

pub(crate) fn canonical_string(record: &ResumeRecord) -> String {
    serde_json::to_string(record).expect("record serialization is infallible")
}

/// Ordered `(path, value)` leaves of a record.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlatView {
    pub pairs: Vec<(String, String)>,
}

impl FlatView {
    /// Flatten without the validation gate. Metrics score predictions with
    /// this so a malformed prediction still gets a score.
    pub fn of(record: &ResumeRecord) -> Self {
        let mut pairs = Vec::with_capacity(
            4 + record.skills.len() + 5 * record.experience.len() + 3 * record.education.len(),
        );
        pairs.push(("name".to_owned(), record.name.clone()));
        pairs.push(("email".to_owned(), record.email.clone()));
        pairs.push(("phone".to_owned(), record.phone.clone()));
        for (i, skill) in record.skills.iter().enumerate() {
            pairs.push((format!("skills[{i}]"), skill.clone()));
        }
        for (i, e) in record.experience.iter().enumerate() {
            let values = [&e.title, &e.company, &e.start_date, &e.end_date, &e.description];
            for (key, value) in EXPERIENCE_KEYS.iter().zip(values) {
                pairs.push((format!("experience[{i}].{key}"), value.clone()));
            }
        }
        for (i, e) in record.education.iter().enumerate() {
            let values = [&e.degree, &e.institution, &e.end_date];
            for (key, value) in EDUCATION_KEYS.iter().zip(values) {
                pairs.push((format!("education[{i}].{key}"), value.clone()));
            }
        }
        pairs.push(("department".to_owned(), record.department.clone()));
        Self { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn get(&self, path: &str) -> Option<&str> {
        self.pairs
            .iter()
            .find(|(p, _)| p == path)
            .map(|(_, v)| v.as_str())
    }

    /// Newline-joined `path: value` lines; the text every text metric sees.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, (path, value)) in self.pairs.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(path);
            out.push_str(": ");
            out.push_str(value);
        }
        out
    }
}

/// Validating flatten.
pub fn flatten(record: &ResumeRecord) -> Result<FlatView, SchemaError> {
    let violations = validate(record);
    if !violations.is_empty() {
        return Err(SchemaError::Violations(violations));
    }
    Ok(FlatView::of(record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn full() -> ResumeRecord {
        ResumeRecord {
            name: "Ann Lee".into(),
            email: "ann@example.com".into(),
            phone: "+1 555 0100".into(),
            skills: vec!["Python".into(), "SQL".into()],
            experience: vec![ExperienceEntry {
                title: "Analyst".into(),
                company: "Acme".into(),
                start_date: "2019-03".into(),
                end_date: PRESENT.into(),
                description: "Reporting".into(),
            }],
            education: vec![EducationEntry {
                degree: "BSc".into(),
                institution: "State University".into(),
                end_date: "2018".into(),
            }],
            department: "Information Technology".into(),
        }
    }

    #[test]
    fn well_formed_record_has_no_violations() {
        assert!(validate(&full()).is_empty());
        let value = serde_json::to_value(full()).unwrap();
        assert!(validate_value(&value).is_empty());
    }

    #[test]
    fn missing_department_is_one_violation() {
        let mut value = serde_json::to_value(full()).unwrap();
        value.as_object_mut().unwrap().remove("department");
        let v = validate_value(&value);
        assert_eq!(v, vec![Violation::new("department", Rule::MissingKey)]);
    }

    #[test]
    fn duplicate_skill_is_one_violation() {
        let mut r = full();
        r.skills = vec!["Python".into(), "Python".into()];
        let v = validate(&r);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::DuplicateSkill);
        assert_eq!(v[0].path, "skills[1]");
    }

    #[test]
    fn empty_skill_and_inverted_dates_and_blank_education() {
        let mut r = full();
        r.skills.push("  ".into());
        r.experience[0].start_date = "2021-05".into();
        r.experience[0].end_date = "2020".into();
        r.education[0].institution.clear();
        let rules: Vec<Rule> = validate(&r).into_iter().map(|v| v.rule).collect();
        assert_eq!(rules, vec![Rule::EmptySkill, Rule::DateOrder, Rule::EmptyInstitution]);
    }

    #[test]
    fn non_concrete_dates_are_not_order_checked() {
        let mut r = full();
        r.experience[0].start_date = "sometime".into();
        r.experience[0].end_date = "2001".into();
        assert!(validate(&r).is_empty());
    }

    #[test]
    fn structural_type_errors_are_reported_by_path() {
        let value = json!({
            "name": 3, "email": "", "phone": "", "skills": ["a", 1],
            "experience": [{"title": "t", "company": "c", "start_date": "", "end_date": ""}],
            "education": "none", "department": ""
        });
        let v = validate_value(&value);
        let paths: Vec<&str> = v.iter().map(|v| v.path.as_str()).collect();
        assert_eq!(
            paths,
            vec!["name", "skills[1]", "experience[0].description", "education"]
        );
        assert_eq!(validate_value(&json!([1])), vec![Violation::new("", Rule::NotAnObject)]);
    }

    #[test]
    fn flatten_begins_in_schema_order() {
        let r = ResumeRecord {
            name: "A".into(),
            ..Default::default()
        };
        let flat = flatten(&r).unwrap();
        let paths: Vec<&str> = flat.pairs.iter().map(|(p, _)| p.as_str()).collect();
        assert_eq!(paths, vec!["name", "email", "phone", "department"]);
        assert_eq!(flat.pairs[0], ("name".into(), "A".into()));
        assert_eq!(flat.pairs[1], ("email".into(), String::new()));
    }

    #[test]
    fn flatten_counts_leaves() {
        // 4 scalars + 2 skills + 5 fields of one experience entry.
        let mut r = full();
        r.education.clear();
        assert_eq!(flatten(&r).unwrap().len(), 4 + 2 + 5);
        assert_eq!(flatten(&full()).unwrap().len(), 4 + 2 + 5 + 3);
        assert_eq!(flatten(&full()).unwrap(), flatten(&full()).unwrap());
    }

    #[test]
    fn flatten_rejects_invalid_records() {
        let mut r = full();
        r.skills = vec!["x".into(), "x".into()];
        assert!(matches!(flatten(&r), Err(SchemaError::Violations(_))));
        assert!(canonical_serialize(&r).is_err());
    }

    #[test]
    fn render_is_path_value_lines() {
        let r = ResumeRecord {
            name: "A".into(),
            skills: vec!["Go".into()],
            ..Default::default()
        };
        assert_eq!(
            FlatView::of(&r).render(),
            "name: A\nemail: \nphone: \nskills[0]: Go\ndepartment: "
        );
    }

    #[test]
    fn key_order_of_input_does_not_change_bytes() {
        let a = r#"{"name":"A","email":"a@b.c","phone":"1","skills":["x"],"experience":[],"education":[],"department":"IT"}"#;
        let b = r#"{"department":"IT","skills":["x"],"education":[],"phone":"1","experience":[],"email":"a@b.c","name":"A"}"#;
        let ra = parse_record(a).unwrap();
        let rb = parse_record(b).unwrap();
        assert_eq!(canonical_serialize(&ra).unwrap(), canonical_serialize(&rb).unwrap());
        assert_eq!(canonical_serialize(&ra).unwrap(), a.as_bytes());
    }

    #[test]
    fn serialize_round_trips() {
        let bytes = canonical_serialize(&full()).unwrap();
        assert_eq!(bytes, canonical_serialize(&full()).unwrap());
        let back = parse_record(std::str::from_utf8(&bytes).unwrap()).unwrap();
        assert_eq!(back, full());
    }

    #[test]
    fn shipped_json_schema_lists_the_seven_keys() {
        let doc: Value = serde_json::from_str(JSON_SCHEMA).unwrap();
        let required: Vec<&str> = doc["required"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_str().unwrap())
            .collect();
        assert_eq!(required, TOP_LEVEL_KEYS);
        let props = doc["properties"].as_object().unwrap();
        let ordered: Vec<&str> = props.keys().map(String::as_str).collect();
        let mut expected = TOP_LEVEL_KEYS.to_vec();
        expected.sort_unstable();
        let mut got = ordered.clone();
        got.sort_unstable();
        assert_eq!(got, expected);
    }

    #[test]
    fn concrete_date_shapes() {
        assert!(is_concrete_date("2020"));
        assert!(is_concrete_date("2020-01"));
        assert!(!is_concrete_date("present"));
        assert!(!is_concrete_date("2020-1"));
        assert!(!is_concrete_date(""));
    }
}
