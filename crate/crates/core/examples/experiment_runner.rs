//! Runs a configured experiment, writes its tables, and replays the report.
use glab::experiments::{replay, run_experiment, ExperimentConfig};

fn main() -> glab::Result<()> {
    let dir = std::env::temp_dir().join("glab-example-run");
    let config = ExperimentConfig::from_json(&format!(
        r#"{{"experiment": "volume_radius", "parameters": {{"n": 3, "m_list": [8, 32, 128]}}, "seed": 17, "output_dir": {:?}}}"#,
        dir
    ))?;
    let report = run_experiment(&config)?;
    for b in &report.bands {
        println!("{}: {:.4} in [{:?}, {:?}] -> {}", b.metric, b.value, b.min, b.max, b.pass);
    }
    println!("artifacts in {}: {:?}", dir.display(), report.artifacts);
    println!("replays identically: {}", replay(&report)?);
    Ok(())
}
