// Generate a seeded synthetic corpus from the shipped department profiles.
//
//     cargo run --example synth_corpus

use resumetune::dataset::department_counts;
use resumetune::synth::{builtin_profiles, generate_batch, SynthBatchSpec};

fn main() {
    let spec = SynthBatchSpec {
        count: 200,
        seed: 7,
        profiles: builtin_profiles(),
    };
    let records = generate_batch(&spec).expect("valid spec");
    for (dept, n) in department_counts(&records) {
        println!("{dept:<26} {n}");
    }

    let first = &records[0];
    println!("\n{} ({})\n{}", first.source_id, first.record.department, first.raw_text);

    // Same seed, same corpus.
    assert_eq!(generate_batch(&spec).unwrap(), records);
}
