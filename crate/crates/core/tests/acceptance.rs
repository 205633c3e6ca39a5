//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any failed.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resumetune::dataset::{emit_lora_config, merge, LoraTrainingConfig, Provenance, SourceRecord, Split, DEFAULT_RATIOS};
use resumetune::evaluator::{test_samples, AggregateReport, Metric, ModelTag, Thresholds};
use resumetune::llm_gateway::mock::{Reply, ScriptedClient};
use resumetune::llm_gateway::{OfflineEmbedder, ResumeParser};
use resumetune::metrics::{
    bleu4_smoothed, exact_match, levenshtein_ratio, porter, rouge_combined, rouge_scores, score_sample, semantic_f1,
    tokenize,
};
use resumetune::normalize::{normalize_date, normalize_record, NormalizedDate, SkillAliasMap};
use resumetune::pipeline::{
    cmd_build, cmd_compare, cmd_evaluate, cmd_synth, echo_client, load_dataset, synth_spec, EvalModel, ModelSpec,
    PipelineConfig,
};
use resumetune::{EducationEntry, ExperienceEntry, ResumeRecord};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- oracles

/// Edit distance straight from the recursive definition, memoized over a
/// table shared by every pair of strings. Strings are ids into a trie of
/// all words over {a,b,c} up to length 8, so `parent[i]` is `i` without
/// its last letter.
struct EditOracle {
    parent: Vec<u32>,
    last: Vec<u8>,
    len: Vec<u8>,
    words: Vec<String>,
    memo: Vec<u8>,
}

impl EditOracle {
    fn new(alphabet: &[u8], max_len: usize) -> Self {
        let (mut parent, mut last, mut len, mut words) = (vec![0], vec![0], vec![0], vec![String::new()]);
        let mut frontier = vec![0usize];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for &p in &frontier {
                for &c in alphabet {
                    let id = words.len();
                    parent.push(p as u32);
                    last.push(c);
                    len.push(len[p] + 1);
                    words.push(format!("{}{}", words[p], c as char));
                    next.push(id);
                }
            }
            frontier = next;
        }
        let n = words.len();
        Self {
            parent,
            last,
            len,
            words,
            memo: vec![u8::MAX; n * n],
        }
    }

    fn d(&mut self, i: usize, j: usize) -> u8 {
        let n = self.words.len();
        if self.memo[i * n + j] != u8::MAX {
            return self.memo[i * n + j];
        }
        let v = if self.len[i] == 0 {
            self.len[j]
        } else if self.len[j] == 0 {
            self.len[i]
        } else {
            let (pi, pj) = (self.parent[i] as usize, self.parent[j] as usize);
            let sub = self.d(pi, pj) + u8::from(self.last[i] != self.last[j]);
            let del = self.d(pi, j) + 1;
            let ins = self.d(i, pj) + 1;
            sub.min(del).min(ins)
        };
        self.memo[i * n + j] = v;
        v
    }
}

fn levenshtein_exhaustive() -> Outcome {
    let start = Instant::now();
    let mut oracle = EditOracle::new(b"abc", 8);
    let n = oracle.words.len();
    let mut mismatches = 0u64;
    for i in 0..n {
        for j in 0..n {
            let d = oracle.d(i, j) as f64;
            let longest = oracle.len[i].max(oracle.len[j]) as f64;
            let expected = if longest == 0.0 { 1.0 } else { 1.0 - d / longest };
            if levenshtein_ratio(&oracle.words[i], &oracle.words[j]) != expected {
                mismatches += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        mismatches == 0 && secs < 60.0,
        format!("{} pairs, {mismatches} mismatches, {secs:.1}s", n * n),
    )
}

fn bleu_fixture() -> Outcome {
    let got = bleu4_smoothed(&tokenize("a b c d e"), &tokenize("a b c d e f g"));
    // Geometric mean of the stated modified precisions with BP = 1.
    let derived = (5.0f64 / 7.0 * 4.0 / 6.0 * 3.0 / 5.0 * 2.0 / 4.0).powf(0.25);
    check(
        (got - 0.5907).abs() <= 1e-3,
        format!(
            "got {got:.6}, target 0.5907 +/- 1e-3; the stated precisions 5/7, 4/6, 3/5, 2/4 with BP = 1 give {derived:.6} \
             (implementation matches that derivation: {})",
            (got - derived).abs() < 1e-12
        ),
    )
}

const PORTER_CASES: [(&str, &str); 82] = [
    ("caresses", "caress"), ("ponies", "poni"), ("ties", "ti"), ("caress", "caress"), ("cats", "cat"),
    ("feed", "feed"), ("agreed", "agre"), ("plastered", "plaster"), ("bled", "bled"), ("motoring", "motor"),
    ("sing", "sing"), ("conflated", "conflat"), ("troubled", "troubl"), ("sized", "size"), ("hopping", "hop"),
    ("tanned", "tan"), ("falling", "fall"), ("hissing", "hiss"), ("fizzed", "fizz"), ("failing", "fail"),
    ("filing", "file"), ("happy", "happi"), ("sky", "sky"), ("relational", "relat"), ("conditional", "condit"),
    ("rational", "ration"), ("valenci", "valenc"), ("hesitanci", "hesit"), ("digitizer", "digit"),
    ("conformabli", "conform"), ("radicalli", "radic"), ("differentli", "differ"), ("vileli", "vile"),
    ("analogousli", "analog"), ("vietnamization", "vietnam"), ("predication", "predic"), ("operator", "oper"),
    ("feudalism", "feudal"), ("decisiveness", "decis"), ("hopefulness", "hope"), ("callousness", "callous"),
    ("formaliti", "formal"), ("sensitiviti", "sensit"), ("sensibiliti", "sensibl"), ("triplicate", "triplic"),
    ("formative", "form"), ("formalize", "formal"), ("electriciti", "electr"), ("electrical", "electr"),
    ("hopeful", "hope"), ("goodness", "good"), ("revival", "reviv"), ("allowance", "allow"),
    ("inference", "infer"), ("airliner", "airlin"), ("gyroscopic", "gyroscop"), ("adjustable", "adjust"),
    ("defensible", "defens"), ("irritant", "irrit"), ("replacement", "replac"), ("adjustment", "adjust"),
    ("dependent", "depend"), ("adoption", "adopt"), ("homologou", "homolog"), ("communism", "commun"),
    ("activate", "activ"), ("angulariti", "angular"), ("homologous", "homolog"), ("effective", "effect"),
    ("bowdlerize", "bowdler"), ("probate", "probat"), ("rate", "rate"), ("cease", "ceas"),
    ("controll", "control"), ("roll", "roll"), ("generalizations", "gener"), ("oscillators", "oscil"),
    ("running", "run"), ("run", "run"), ("engineering", "engin"), ("managed", "manag"), ("skills", "skill"),
];

fn rouge_fixture() -> Outcome {
    let s = rouge_scores(&tokenize("the cat sat"), &tokenize("the cat"));
    let combined = rouge_combined(&tokenize("the cat sat"), &tokenize("the cat"));
    let stem_misses: Vec<String> = PORTER_CASES
        .iter()
        .filter(|(w, want)| porter::stem(w) != *want)
        .map(|(w, want)| format!("{w}->{} (want {want})", porter::stem(w)))
        .collect();
    let components_ok =
        (s.rouge1 - 0.8).abs() < 1e-4 && (s.rouge2 - 0.6667).abs() < 1e-4 && (s.rouge_l - 0.8).abs() < 1e-4;
    check(
        (combined - 0.7556).abs() <= 1e-3 && components_ok && stem_misses.is_empty(),
        format!(
            "combined {combined:.4} (R1 {:.4}, R2 {:.4}, RL {:.4}); Porter {}/{} words{}",
            s.rouge1,
            s.rouge2,
            s.rouge_l,
            PORTER_CASES.len() - stem_misses.len(),
            PORTER_CASES.len(),
            if stem_misses.is_empty() { String::new() } else { format!(" misses: {}", stem_misses.join(", ")) }
        ),
    )
}

// ------------------------------------------------------- random records

const WORDS: [&str; 16] = [
    "alpha", "Bravo", "charlie", "Delta", "echo", "data", "nurse", "payroll", "Python", "k8s", "js", "ehr",
    "relations", "media", "Onboarding", "sql",
];

fn word(rng: &mut ChaCha8Rng) -> String {
    WORDS.choose(rng).unwrap().to_string()
}

fn phrase(rng: &mut ChaCha8Rng, max: usize) -> String {
    let n = rng.gen_range(0..=max);
    (0..n).map(|_| word(rng)).collect::<Vec<_>>().join(" ")
}

const MESSY_DATES: [&str; 16] = [
    "Jan 2020", "january 2019", "03/2018", "2017-3", "2016", "Present", "now", "CURRENT", "Sept 2021", "2015-11",
    "12/2014", "", "someday", "13/2020", "2022-00", "Dec 2013",
];

fn random_record(rng: &mut ChaCha8Rng, messy: bool) -> ResumeRecord {
    let date = |rng: &mut ChaCha8Rng| {
        if messy {
            MESSY_DATES.choose(rng).unwrap().to_string()
        } else {
            format!("{}-{:02}", rng.gen_range(1990..2025), rng.gen_range(1..=12))
        }
    };
    let mut skills: Vec<String> = (0..rng.gen_range(0..6)).map(|_| word(rng)).collect();
    if messy {
        for s in &mut skills {
            if rng.gen_bool(0.3) {
                *s = s.to_uppercase();
            }
        }
    } else {
        let mut seen = BTreeSet::new();
        skills.retain(|s| seen.insert(s.clone()));
    }
    ResumeRecord {
        name: if rng.gen_bool(0.2) { String::new() } else { phrase(rng, 3) },
        email: format!("{}@example.com", word(rng).to_lowercase()),
        phone: format!("+1-555-{:03}-{:04}", rng.gen_range(0..1000), rng.gen_range(0..10000)),
        skills,
        experience: (0..rng.gen_range(0..4))
            .map(|_| ExperienceEntry {
                title: phrase(rng, 3),
                company: phrase(rng, 2),
                start_date: date(rng),
                end_date: date(rng),
                description: phrase(rng, 12),
            })
            .collect(),
        education: (0..rng.gen_range(0..3))
            .map(|_| EducationEntry {
                degree: phrase(rng, 2),
                institution: phrase(rng, 3),
                end_date: date(rng),
            })
            .collect(),
        department: if rng.gen_bool(0.2) { String::new() } else { phrase(rng, 2) },
    }
}

fn identity_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let embedder = OfflineEmbedder::default();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let r = random_record(&mut rng, false);
        let s = score_sample(&r, &r, &embedder).map_err(|e| e.to_string())?;
        let direct = [
            exact_match(&r, &r),
            semantic_f1(&r, &r, &embedder).map_err(|e| e.to_string())?,
        ];
        for v in s.components().into_iter().chain(direct) {
            worst = worst.max((v - 1.0).abs());
        }
    }
    check(worst <= 1e-9, format!("100 records, max |score - 1| = {worst:.2e}"))
}

fn record(id: String, i: usize) -> SourceRecord {
    SourceRecord {
        source_id: id,
        provenance: Provenance::Synthetic,
        raw_text: format!("resume {i}"),
        record: ResumeRecord {
            name: format!("Person {i}"),
            department: "IT".into(),
            ..Default::default()
        },
    }
}

fn split_law() -> Outcome {
    let mut runs = 0;
    for n in 1..=200usize {
        let ids: Vec<String> = (0..n).map(|i| format!("r{i:04}")).collect();
        for seed in 0..10u64 {
            let records = ids.iter().enumerate().map(|(i, id)| record(id.clone(), i)).collect();
            let bundle = merge(records, vec![])
                .and_then(|b| b.split(seed, DEFAULT_RATIOS, false))
                .map_err(|e| e.to_string())?;
            let mut seen = BTreeSet::new();
            let mut sizes = HashMap::new();
            for split in Split::ALL {
                let members = bundle.members(split).map_err(|e| e.to_string())?;
                sizes.insert(split, members.len());
                for m in members {
                    if !seen.insert(m.source_id.clone()) {
                        return Err(format!("N={n} seed={seed}: {} in two splits", m.source_id));
                    }
                }
            }
            if seen.len() != n || seen.iter().ne(ids.iter()) {
                return Err(format!("N={n} seed={seed}: not exhaustive"));
            }
            // Integer floor of N/10, computed without floating point.
            if sizes[&Split::Val] != n / 10 || sizes[&Split::Test] != n / 10 {
                return Err(format!("N={n} seed={seed}: sizes {sizes:?}"));
            }
            runs += 1;
        }
    }
    Ok(format!("{runs} splits disjoint, exhaustive, |val| = |test| = floor(N/10)"))
}

const DATE_TABLE: [(&str, Option<&str>); 24] = [
    ("Jan 2020", Some("2020-01")),
    ("January 2020", Some("2020-01")),
    ("january 2020", Some("2020-01")),
    ("JAN 2020", Some("2020-01")),
    ("Sept 2021", Some("2021-09")),
    ("Sep 2021", Some("2021-09")),
    ("December 1999", Some("1999-12")),
    ("03/2019", Some("2019-03")),
    ("3/2019", Some("2019-03")),
    ("12/2014", Some("2014-12")),
    ("2019-3", Some("2019-03")),
    ("2019-03", Some("2019-03")),
    ("2018", Some("2018")),
    ("  2018 ", Some("2018")),
    ("Present", Some("present")),
    ("present", Some("present")),
    ("Current", Some("present")),
    ("now", Some("present")),
    ("13/2020", None),
    ("2022-00", None),
    ("someday", None),
    ("Q3 2020", None),
    ("20200", None),
    ("Janvier 2020", None),
];

fn normalization_idempotence() -> Outcome {
    let aliases = SkillAliasMap::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut rewrites = 0;
    for i in 0..1000 {
        let r = random_record(&mut rng, true);
        let (once, report) = normalize_record(&r, &aliases);
        rewrites += report.rewrites();
        let (twice, second) = normalize_record(&once, &aliases);
        if twice != once || second.rewrites() != 0 {
            return Err(format!("record {i} not idempotent: {once:?} vs {twice:?}"));
        }
    }
    let mut misses = Vec::new();
    for (raw, want) in DATE_TABLE {
        let got = normalize_date(raw);
        let ok = match (want, &got) {
            (Some(w), NormalizedDate::Canonical(c)) => c == w,
            (None, NormalizedDate::Unparseable) => true,
            _ => false,
        };
        if !ok {
            misses.push(format!("{raw:?} -> {got:?}"));
        }
    }
    check(
        misses.is_empty(),
        format!(
            "1000 records idempotent ({rewrites} first-pass rewrites); date table {}/{}{}",
            DATE_TABLE.len() - misses.len(),
            DATE_TABLE.len(),
            if misses.is_empty() { String::new() } else { format!(" misses: {}", misses.join(", ")) }
        ),
    )
}

// ------------------------------------------------------------ pipeline

fn build(dir: &Path, count: usize, seed: u64) -> Result<PipelineConfig, String> {
    let cfg = PipelineConfig {
        out_dir: dir.to_owned(),
        seed,
        synth_count: count,
        ..Default::default()
    };
    cmd_synth(dir, &synth_spec(&cfg).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    cmd_build(dir, &cfg).map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn model(label: &str, client: ScriptedClient) -> EvalModel {
    EvalModel {
        spec: ModelSpec::new(label, ModelTag::FineTuned),
        parser: ResumeParser::new(Arc::new(client), label, SkillAliasMap::builtin()),
        endpoint_digest: format!("mock:{label}"),
    }
}

fn end_to_end_mock() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    build(dir.path(), 500, 5)?;
    let (bundle, _) = load_dataset(dir.path()).map_err(|e| e.to_string())?;
    let samples = test_samples(&bundle).map_err(|e| e.to_string())?;
    let embedder = OfflineEmbedder::default();

    let perfect = cmd_evaluate(dir.path(), &[model("echo", echo_client(&samples))], &embedder, 4, &Thresholds::default())
        .map_err(|e| e.to_string())?;
    let row = &perfect.comparison.rows[0].row;
    let all_100 = Metric::ALL.iter().all(|m| row.value(*m) == 100.0);

    let failing: HashMap<String, Reply> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let reply = if i < 10 {
                Reply::Fail("injected failure".into())
            } else {
                Reply::Text(serde_json::to_string(&s.reference).unwrap())
            };
            (s.raw_text.clone(), reply)
        })
        .collect();
    let partial = cmd_evaluate(
        dir.path(),
        &[model("flaky", ScriptedClient::keyed(failing, Reply::Fail("unscripted".into())))],
        &embedder,
        4,
        &Thresholds::default(),
    )
    .map_err(|e| e.to_string())?;
    let em = partial.comparison.rows[0].row.em;
    let failures = partial.failures().count();
    check(
        samples.len() == 50 && all_100 && (em - 80.0).abs() <= 0.01 && failures == 10,
        format!(
            "{} test samples; echo row {:?}; 10/50 failing EM {em:.2} with {failures} flagged failures",
            samples.len(),
            Metric::ALL.map(|m| row.value(m))
        ),
    )
}

fn lora_config() -> Outcome {
    let cfg = emit_lora_config("microsoft/phi-4");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("lora_config.json");
    cfg.write(&path).map_err(|e| e.to_string())?;
    let back = LoraTrainingConfig::read(&path).map_err(|e| e.to_string())?;
    let ok = back == cfg
        && cfg.r == 16
        && cfg.alpha == 16
        && cfg.target_modules == ["q_proj", "k_proj", "v_proj", "o_proj"]
        && cfg.batch_size == 8
        && cfg.learning_rate == 5e-5
        && cfg.max_steps == 200
        && cfg.warmup_steps == 5;
    check(
        ok,
        format!(
            "r={} alpha={} modules={:?} batch={} lr={} steps={} warmup={}",
            cfg.r, cfg.alpha, cfg.target_modules, cfg.batch_size, cfg.learning_rate, cfg.max_steps, cfg.warmup_steps
        ),
    )
}

fn report_fixture() -> Outcome {
    let csv = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/published_rows.csv");
    let out = cmd_compare(&[csv], None).map_err(|e| e.to_string())?;
    let phi = out
        .improvements
        .iter()
        .find(|i| i.model_label == "Phi-4")
        .ok_or("no Phi-4 improvement row")?;
    let (f1, bleu) = (phi.f1.unwrap_or(f64::NAN), phi.bleu.unwrap_or(f64::NAN));
    // Independent arithmetic on the published percentages.
    let f1_oracle = (90.62 - 70.95) / 70.95 * 100.0;
    let bleu_oracle = (47.58 - 19.62) / 19.62 * 100.0;
    let flagged = out.comparison.is_best("Phi-4", ModelTag::FineTuned, Metric::F1);
    check(
        (f1 - 27.72).abs() < 0.005
            && (bleu - 142.51).abs() < 0.005
            && (f1 - f1_oracle).abs() < 0.005
            && (bleu - bleu_oracle).abs() < 0.005
            && flagged,
        format!("Phi-4 F1 {f1:+.2}% BLEU {bleu:+.2}%; F1 90.62 flagged best: {flagged}"),
    )
}

fn lossy_client(samples: &[resumetune::evaluator::TestSample]) -> ScriptedClient {
    let script = samples
        .iter()
        .map(|s| {
            let mut p = s.reference.clone();
            p.skills.truncate(1);
            for e in &mut p.experience {
                e.description.clear();
            }
            (s.raw_text.clone(), Reply::Text(serde_json::to_string(&p).unwrap()))
        })
        .collect();
    ScriptedClient::keyed(script, Reply::Fail("unscripted".into()))
}

fn full_run(dir: &Path) -> Result<(), String> {
    build(dir, 100, 17)?;
    let (bundle, _) = load_dataset(dir).map_err(|e| e.to_string())?;
    let samples = test_samples(&bundle).map_err(|e| e.to_string())?;
    let models = [model("echo", echo_client(&samples)), model("lossy", lossy_client(&samples))];
    cmd_evaluate(dir, &models, &OfflineEmbedder::default(), 3, &Thresholds::default()).map_err(|e| e.to_string())?;
    Ok(())
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_owned()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap().flatten() {
            let p = entry.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_owned());
            }
        }
    }
    out.sort();
    out
}

fn without_timestamps(text: &str) -> String {
    text.lines().filter(|l| !l.contains("\"timestamp\"")).collect::<Vec<_>>().join("\n")
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    full_run(a.path())?;
    full_run(b.path())?;
    let files = files_under(a.path());
    if files != files_under(b.path()) {
        return Err("runs produced different file sets".into());
    }
    let mut differing = Vec::new();
    for f in &files {
        let (x, y) = (fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
        let same = if f.ends_with("runs.json") {
            without_timestamps(&String::from_utf8_lossy(&x)) == without_timestamps(&String::from_utf8_lossy(&y))
        } else {
            x == y
        };
        if !same {
            differing.push(f.display().to_string());
        }
    }
    let report = fs::read_to_string(a.path().join("eval/report.json")).unwrap();
    let parsed = AggregateReport::from_json(&report).map_err(|e| e.to_string())?;
    check(
        differing.is_empty() && parsed.comparison.rows.len() == 2,
        format!(
            "{} files byte-identical (run timestamps excluded){}",
            files.len() - differing.len(),
            if differing.is_empty() { String::new() } else { format!("; differ: {}", differing.join(", ")) }
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("levenshtein-oracle", levenshtein_exhaustive),
        ("bleu-fixture", bleu_fixture),
        ("rouge-fixture", rouge_fixture),
        ("identity-suite", identity_suite),
        ("split-law", split_law),
        ("normalization-idempotence", normalization_idempotence),
        ("end-to-end-mock", end_to_end_mock),
        ("lora-config", lora_config),
        ("report-fixture", report_fixture),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
