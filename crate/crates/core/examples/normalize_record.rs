// Canonicalize dates, unify skill aliases and fill placeholders.
//
//     cargo run --example normalize_record

use resumetune::normalize::{normalize_date, normalize_record, SkillAliasMap};
use resumetune::{ExperienceEntry, ResumeRecord};

fn main() {
    for raw in ["Sept 2021", "03/2019", "2019-3", "Present", "Q3 2020"] {
        println!("{raw:>10} -> {:?}", normalize_date(raw));
    }

    let messy = ResumeRecord {
        name: String::new(),
        skills: vec!["js".into(), "JavaScript".into(), "k8s".into(), "Payroll".into()],
        experience: vec![ExperienceEntry {
            title: "Platform Engineer".into(),
            company: "Contoso".into(),
            start_date: "Jan 2020".into(),
            end_date: "current".into(),
            description: String::new(),
        }],
        ..Default::default()
    };
    let aliases = SkillAliasMap::builtin();
    let (clean, report) = normalize_record(&messy, &aliases);
    println!("\n{}", serde_json::to_string_pretty(&clean).unwrap());
    println!(
        "dates rewritten {}, skills unified {}, placeholders {}",
        report.dates_rewritten, report.skills_unified, report.placeholders_inserted
    );
    assert_eq!(normalize_record(&clean, &aliases).0, clean);
}
