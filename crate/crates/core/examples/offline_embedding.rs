// Trigram-hash embeddings and cosine similarity, no network needed.
//
//     cargo run --example offline_embedding

use resumetune::llm_gateway::{cosine, EmbeddingProvider, OfflineEmbedder};

fn main() {
    let embedder = OfflineEmbedder::new(256).unwrap();
    let texts = [
        "skills[0]: Python\nskills[1]: SQL",
        "skills[0]: Python\nskills[1]: PostgreSQL",
        "department: Public Relations",
    ];
    let vectors: Vec<_> = texts.iter().map(|t| embedder.embed(t).unwrap()).collect();
    println!("{}", embedder.describe());
    for i in 0..texts.len() {
        for j in i + 1..texts.len() {
            println!("cos({i}, {j}) = {:.4}", cosine(&vectors[i], &vectors[j]));
        }
    }
}
