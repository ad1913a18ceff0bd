// Turning user ages into the two-class age task: under 35 is young, over 45
// is old, and everyone in between is left out. Also draws a fixed-size
// subsample of a larger labeled set.

use socioprobe::embstore::{age_schema, bin_age, subsample, AgeBin, EmbeddingDataset, EmbeddingRecord};

pub fn run_example(ages: &[i64], sample: usize) -> Result<EmbeddingDataset, Box<dyn std::error::Error>> {
    let mut dataset = EmbeddingDataset::empty(age_schema(), 1, 2)?;
    let mut excluded = 0;
    for (i, &age) in ages.iter().enumerate() {
        match bin_age(age)? {
            AgeBin::Excluded => excluded += 1,
            bin => {
                let label = bin.class_index().expect("young and old have a class");
                let features = vec![vec![age as f32 / 100.0, (i % 7) as f32]];
                dataset.push(EmbeddingRecord::new(format!("user-{i}"), label, features)?)?;
            }
        }
    }
    println!("{} users kept, {excluded} between 35 and 45 dropped, counts {:?}", dataset.len(), dataset.class_counts());
    let sampled = subsample(&dataset, sample.min(dataset.len()), 0)?;
    println!("subsample of {}: counts {:?}", sampled.len(), sampled.class_counts());
    Ok(sampled)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ages: Vec<i64> = (0..500).map(|i| 18 + (i * 37) % 60).collect();
    run_example(&ages, 200)?;
    Ok(())
}
