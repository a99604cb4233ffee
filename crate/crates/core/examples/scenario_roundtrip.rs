//! Generate an instance, write it to JSON, read it back and fingerprint it.

use noma_mec::scenario::{fingerprint, generate, load, save, ScenarioSpec};

fn main() -> anyhow::Result<()> {
    let instance = generate(&ScenarioSpec::default().with_seed(3))?;
    let path = std::env::temp_dir().join("noma_mec_seed3.json");
    save(&instance, &path)?;
    let back = load(&path)?;
    assert_eq!(back, instance);
    println!("{} groups written to {}", back.num_groups(), path.display());
    println!("sha256 {}", fingerprint(&back));
    match back.validate() {
        Ok(warnings) => println!("valid, {} warnings", warnings.len()),
        Err(e) => println!("{e}"),
    }
    Ok(())
}
