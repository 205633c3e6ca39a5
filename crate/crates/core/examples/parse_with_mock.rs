// Parse resume text through a scripted completion client. The reply is
// wrapped in prose and a code fence, which the extractor repairs.
//
//     cargo run --example parse_with_mock

use std::sync::Arc;

use resumetune::llm_gateway::mock::ScriptedClient;
use resumetune::llm_gateway::ResumeParser;
use resumetune::normalize::SkillAliasMap;

const REPLY: &str = r#"Here is the parsed resume:
```json
{"name": "Marcus Lee", "email": "marcus@example.com", "phone": "",
 "skills": ["HRIS", "payroll", "Recruiting"],
 "experience": [{"title": "HR Generalist", "company": "Fabrikam", "start_date": "Mar 2018",
                 "end_date": "Present", "description": "Ran onboarding for 40 hires a year."}],
 "education": [], "department": "Human Resources"}
```
Let me know if you need anything else."#;

fn main() {
    let client = Arc::new(ScriptedClient::always(REPLY));
    let parser = ResumeParser::new(client.clone(), "mock-model", SkillAliasMap::builtin());
    let result = parser
        .parse_resume("Marcus Lee\nHR Generalist, Fabrikam, Mar 2018 - Present")
        .expect("reply contains a valid record");

    println!("repairs: {:?}", result.repairs_applied);
    println!("{}", serde_json::to_string_pretty(&result.record).unwrap());
    println!("dates rewritten: {}", result.normalization.dates_rewritten);

    let broken = ResumeParser::new(
        Arc::new(ScriptedClient::always("I could not find a resume.")),
        "mock-model",
        SkillAliasMap::builtin(),
    );
    let err = broken.parse_resume("???").unwrap_err();
    println!("\nfailure: {err}\nraw: {:?}", err.raw_response());
}
