// Parse a resume through a real OpenAI-compatible endpoint.
//
//     RESUMETUNE_ENDPOINT=http://localhost:8000/v1 RESUMETUNE_MODEL=my-model \
//     RESUMETUNE_API_KEY=... cargo run --example http_endpoint -- resume.txt
//
// Without RESUMETUNE_ENDPOINT it prints the request it would send.

use std::sync::Arc;

use resumetune::llm_gateway::{EndpointConfig, HttpCompletionClient, ResumeParser};
use resumetune::normalize::SkillAliasMap;

fn main() {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path).expect("readable resume"),
        None => "Jordan Smith\njordan@example.com\nSkills: Rust, k8s\nSRE at Initech, 2020 - present".into(),
    };
    let model = std::env::var("RESUMETUNE_MODEL").unwrap_or_else(|_| "my-model".into());
    let Ok(url) = std::env::var("RESUMETUNE_ENDPOINT") else {
        let parser = ResumeParser::new(
            Arc::new(resumetune::llm_gateway::mock::ScriptedClient::always("")),
            &model,
            SkillAliasMap::builtin(),
        );
        println!("RESUMETUNE_ENDPOINT not set; request body would be:");
        println!("{}", serde_json::to_string_pretty(&parser.request_for(&text)).unwrap());
        return;
    };
    let mut config = EndpointConfig::new(url, &model);
    config.max_retries = 2;
    let client = HttpCompletionClient::new(config).expect("valid endpoint config");
    let parser = ResumeParser::new(Arc::new(client), &model, SkillAliasMap::builtin());
    match parser.parse_resume(&text) {
        Ok(r) => println!("{}", serde_json::to_string_pretty(&r.record).unwrap()),
        Err(e) => eprintln!("parse failed: {e}"),
    }
}
