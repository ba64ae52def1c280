//! Write a small training set and read it back.

use fsra::harness::dataset::{export_dataset, DatasetReader};
use fsra::SystemConfig;

fn main() -> fsra::Result<()> {
    let config = SystemConfig {
        n_devices: 30,
        n_slots: 3,
        n_antennas_complex: 8,
        activation_prob: 0.1,
        ..Default::default()
    };
    let path = std::env::temp_dir().join("fsra-example-dataset.jsonl");
    export_dataset(&config, 100, &path)?;

    let reader = DatasetReader::open(&path)?;
    let header = reader.header().clone();
    println!("{}: {header:?}", path.display());
    let mut ones = 0usize;
    let mut records = 0usize;
    for record in reader {
        let record = record?;
        ones += record.s.iter().map(|&b| b as usize).sum::<usize>();
        records += 1;
    }
    let entries = records * header.n_devices * header.n_slots;
    println!(
        "{records} records, label density {:.4} (entry prior {:.4})",
        ones as f64 / entries as f64,
        header.entry_prior
    );
    Ok(())
}
