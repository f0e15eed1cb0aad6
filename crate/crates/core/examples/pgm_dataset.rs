// Writes a small synthetic face set to disk as PGM files plus a manifest,
// reads it back and prints a per-class histogram.
//
// ```bash
// cargo run --example pgm_dataset
// ```

use std::collections::BTreeMap;

use ocon::imageio::{generate_synthetic, load_manifest, parse_pgm, write_dataset, Role};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("ocon-pgm-dataset-{}", std::process::id()));
    let samples = generate_synthetic(4, 5, 3, 24, 7)?;
    let (manifest_path, _) = write_dataset(&samples, &dir)?;
    println!("wrote {} images, manifest at {}", samples.len(), manifest_path.display());

    let (manifest, loaded) = load_manifest(&manifest_path)?;
    assert_eq!(loaded, samples);
    let mut histogram: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for s in &loaded {
        let entry = histogram.entry(s.class_id).or_default();
        match s.role {
            Role::Train => entry.0 += 1,
            Role::Test => entry.1 += 1,
        }
    }
    for (class_id, (train, test)) in &histogram {
        println!("class {class_id}: {train} train, {test} test");
    }

    // The same image through the ASCII variant of the format.
    let first = &loaded[0].image;
    let mut ascii = format!("P2\n# converted\n{} {}\n255\n", first.width(), first.height());
    for row in first.pixels().chunks(first.width()) {
        let line: Vec<String> = row.iter().map(u8::to_string).collect();
        ascii.push_str(&line.join(" "));
        ascii.push('\n');
    }
    assert_eq!(&parse_pgm(ascii.as_bytes())?, first);

    let small = first.downsample(2)?;
    println!(
        "{} is {}x{}, downsampled by 2 to {}x{}",
        manifest.records[0].path.display(),
        first.width(),
        first.height(),
        small.width(),
        small.height()
    );
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
