// Score a predicted record against a reference with every metric.
//
//     cargo run --example score_records

use resumetune::llm_gateway::OfflineEmbedder;
use resumetune::metrics::{rouge_scores, score_sample, tokenize};
use resumetune::{ExperienceEntry, FlatView, ResumeRecord};

fn main() {
    let reference = ResumeRecord {
        name: "Priya Raman".into(),
        email: "priya.raman@example.com".into(),
        phone: "+1-555-201-3344".into(),
        skills: vec!["Python".into(), "SQL".into(), "Tableau".into()],
        experience: vec![ExperienceEntry {
            title: "Data Analyst".into(),
            company: "Northwind Health".into(),
            start_date: "2019-04".into(),
            end_date: "present".into(),
            description: "Built weekly reporting dashboards for clinical operations.".into(),
        }],
        education: vec![],
        department: "Information Technology".into(),
    };
    let mut predicted = reference.clone();
    predicted.phone.clear();
    predicted.skills.pop();
    predicted.experience[0].description = "Built reporting dashboards for operations.".into();

    println!("reference rendering:\n{}\n", FlatView::of(&reference).render());

    let score = score_sample(&reference, &predicted, &OfflineEmbedder::default()).expect("offline embedder");
    println!("EM      {:.4}", score.em);
    println!("F1      {:.4}", score.f1_sem);
    println!("BLEU    {:.4}", score.bleu);
    println!("ROUGE   {:.4}", score.rouge);
    println!("Overall {:.4}", score.overall);

    let r = rouge_scores(
        &tokenize(&FlatView::of(&reference).render()),
        &tokenize(&FlatView::of(&predicted).render()),
    );
    println!("ROUGE-1 {:.4}  ROUGE-2 {:.4}  ROUGE-L {:.4}", r.rouge1, r.rouge2, r.rouge_l);
}
