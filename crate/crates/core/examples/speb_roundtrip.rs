// Build a small embedding set by hand, write it as SPEB and as JSONL, and read both back.

use socioprobe::embstore::{read_dataset, write_dataset, EmbeddingDataset, EmbeddingRecord, LabelSchema};

pub fn run_example(dir: &std::path::Path) -> Result<EmbeddingDataset, Box<dyn std::error::Error>> {
    let schema = LabelSchema::new(["negative", "positive"])?;
    let mut dataset = EmbeddingDataset::empty(schema, 2, 3)?;
    dataset.push(EmbeddingRecord::new("review-1", 1, vec![vec![0.1, 0.2, 0.3], vec![1.0, -1.0, 0.5]])?)?;
    dataset.push(EmbeddingRecord::new("review-2", 0, vec![vec![-0.4, 0.0, 0.9], vec![0.0, 0.25, -2.0]])?)?;

    let speb = dir.join("reviews.speb");
    let jsonl = dir.join("reviews.jsonl");
    write_dataset(&dataset, &speb)?;
    write_dataset(&dataset, &jsonl)?;
    let from_speb = read_dataset(&speb)?;
    let from_jsonl = read_dataset(&jsonl)?;
    assert_eq!(from_speb, dataset);
    assert_eq!(from_jsonl, dataset);

    println!("{} bytes of SPEB for {} records", std::fs::metadata(&speb)?.len(), from_speb.len());
    for record in from_speb.records() {
        let label = from_speb.schema().name(record.label).unwrap_or("?");
        println!("{} [{label}] last layer {:?}", record.id, record.layer(from_speb.num_layers() - 1));
    }
    Ok(from_speb)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("socioprobe-speb-example");
    std::fs::create_dir_all(&dir)?;
    run_example(&dir)?;
    Ok(())
}
