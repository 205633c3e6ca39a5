// Evaluate two mocked models on a test split and print the report.
//
//     cargo run --example evaluate_mock

use std::collections::HashMap;
use std::sync::Arc;

use resumetune::evaluator::{evaluate_model, AggregateReport, EvalOptions, ModelTag, TestSample};
use resumetune::llm_gateway::mock::{Reply, ScriptedClient};
use resumetune::llm_gateway::{OfflineEmbedder, ResumeParser};
use resumetune::normalize::SkillAliasMap;
use resumetune::synth::{builtin_profiles, generate_batch, SynthBatchSpec};

fn main() {
    let samples: Vec<TestSample> = generate_batch(&SynthBatchSpec {
        count: 20,
        seed: 3,
        profiles: builtin_profiles(),
    })
    .unwrap()
    .iter()
    .map(TestSample::from)
    .collect();

    // One model answers with the reference; the other drops experience
    // descriptions and times out on every fifth resume.
    let echo: HashMap<String, Reply> = samples
        .iter()
        .map(|s| (s.raw_text.clone(), Reply::Text(serde_json::to_string(&s.reference).unwrap())))
        .collect();
    let sloppy: HashMap<String, Reply> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if i % 5 == 0 {
                return (s.raw_text.clone(), Reply::Fail("timed out".into()));
            }
            let mut r = s.reference.clone();
            r.experience.iter_mut().for_each(|e| e.description.clear());
            (s.raw_text.clone(), Reply::Text(serde_json::to_string(&r).unwrap()))
        })
        .collect();

    let embedder = OfflineEmbedder::default();
    let mut runs = Vec::new();
    for (label, tag, script) in [("echo", ModelTag::FineTuned, echo), ("sloppy", ModelTag::Base, sloppy)] {
        let client = ScriptedClient::keyed(script, Reply::Fail("unscripted".into()));
        let parser = ResumeParser::new(Arc::new(client), label, SkillAliasMap::builtin());
        let mut opts = EvalOptions::new(label, tag);
        opts.parameter_count_label = "mock".into();
        runs.push(evaluate_model(&samples, &parser, &embedder, &opts).unwrap());
    }
    let report = AggregateReport::from_runs(&runs).unwrap();
    print!("{}", report.render_text());
    println!("\n{}", report.comparison.render_csv());
}
