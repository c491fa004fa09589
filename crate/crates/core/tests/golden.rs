//! Detect report for a fixed document, knowledge base and seed.
//! Set `UPDATE_GOLDEN=1` to rewrite the expected file.

mod common;

use cfprobe::Pipeline;
use common::{fixture, golden, mock_config};

fn render(parallel: usize) -> String {
    let text = std::fs::read_to_string(fixture("sample_document.txt")).unwrap();
    let p = Pipeline::new(mock_config(fixture("sample_kb.jsonl"), 7, parallel)).unwrap();
    serde_json::to_string_pretty(&p.run_detect("sample_document", &text)).unwrap() + "\n"
}

#[test]
fn detect_matches_golden() {
    let path = golden("detect_seed7.json");
    let report = render(4);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &report).unwrap();
    }
    let expected = std::fs::read_to_string(&path).expect("golden file present; run with UPDATE_GOLDEN=1");
    assert_eq!(report, expected);
    assert_eq!(render(1), expected);
}
