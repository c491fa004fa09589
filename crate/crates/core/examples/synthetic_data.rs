//! Writes the synthetic corpora and mock knowledge base.
//!
//! Usage: `cargo run -p cfprobe --example synthetic_data -- [OUT_DIR]`

use std::path::PathBuf;

use cfprobe::eval::dataset_to_jsonl;
use cfprobe::synthetic::{standard_corpus, FACTUAL_NAME, HALLUCINATIONS_NAME, TRUTHFULQA_NAME};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("data"));
    std::fs::create_dir_all(&out)?;
    let corpus = standard_corpus(0);
    for (name, examples) in [
        (TRUTHFULQA_NAME, &corpus.truthfulqa),
        (FACTUAL_NAME, &corpus.factual),
        (HALLUCINATIONS_NAME, &corpus.hallucinations),
    ] {
        std::fs::write(out.join(format!("{name}.jsonl")), dataset_to_jsonl(examples))?;
    }
    corpus.kb.save(&out.join("mock_kb.jsonl"))?;
    println!("wrote {}", out.display());
    Ok(())
}
