// Merge real and synthetic records, normalize, split 80/10/10 and export
// instruction-tuning JSONL plus the LoRA training config.
//
//     cargo run --example build_dataset

use resumetune::dataset::{emit_lora_config, merge, Provenance, SourceRecord, Split, DEFAULT_RATIOS};
use resumetune::normalize::SkillAliasMap;
use resumetune::synth::{builtin_profiles, generate_batch, SynthBatchSpec};
use resumetune::ResumeRecord;

fn main() {
    let real: Vec<SourceRecord> = (0..12)
        .map(|i| SourceRecord {
            source_id: format!("real-{i:03}"),
            provenance: Provenance::Real,
            raw_text: format!("Candidate {i}\nSkills: k8s, node"),
            record: ResumeRecord {
                name: format!("Candidate {i}"),
                skills: vec!["k8s".into(), "node".into()],
                department: "Information Technology".into(),
                ..Default::default()
            },
        })
        .collect();
    let synthetic = generate_batch(&SynthBatchSpec {
        count: 38,
        seed: 11,
        profiles: builtin_profiles(),
    })
    .unwrap();

    let mut bundle = merge(real, synthetic).expect("inputs are valid");
    let report = bundle.normalize(&SkillAliasMap::builtin());
    let bundle = bundle.split(11, DEFAULT_RATIOS, true).expect("ratios are valid");
    println!("{} records, {} rewrites during normalization", bundle.len(), report.rewrites());
    for (split, n) in bundle.split_counts().unwrap() {
        println!("  {:<5} {n}", split.as_str());
    }

    let dir = tempfile::tempdir().unwrap();
    for split in Split::ALL {
        let path = dir.path().join(format!("{}.jsonl", split.as_str()));
        let lines = bundle.export_instruction_file(split, &path).unwrap();
        println!("wrote {lines} lines to {}", path.display());
    }
    let lora = emit_lora_config("microsoft/phi-4");
    lora.write(&dir.path().join("lora_config.json")).unwrap();
    println!("{}", serde_json::to_string_pretty(&lora).unwrap());

    let manifest = bundle.manifest(&report).unwrap();
    println!("records digest {}", manifest.records_digest);
}
