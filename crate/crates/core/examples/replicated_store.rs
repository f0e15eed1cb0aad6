// Persists a model to two replica directories, then loses one, corrupts the
// other and shows what loading reports at each step.
//
// ```bash
// cargo run --example replicated_store
// ```

use ocon::mlp::{init_weights, Topology};
use ocon::parallel::{class_file_name, decode_class_model, load, load_with_report, persist};
use ocon::{ClassModel, Error, WeightStore};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let base = std::env::temp_dir().join(format!("ocon-store-{}", std::process::id()));
    let roots = [base.join("node-a"), base.join("node-b")];
    let store = WeightStore::new(roots.clone())?;

    let model = ClassModel::new(3, init_weights(&Topology::new(vec![40, 20, 1])?, 9), None)?;
    let report = persist(&model, &store)?;
    for path in &report.written {
        println!("wrote {}", path.display());
    }
    let file = class_file_name(3);
    let text = std::fs::read_to_string(roots[0].join(&file))?;
    println!("header: {}", text.lines().next().unwrap_or_default());
    println!("footer: {}", text.lines().last().unwrap_or_default());

    std::fs::remove_dir_all(&roots[0])?;
    let (loaded, skipped) = load_with_report(3, &store)?;
    assert!(loaded.same_parameters(&model));
    println!("node-a gone: loaded from node-b after skipping {} replica(s)", skipped.len());

    let path = roots[1].join(&file);
    let mut bytes = std::fs::read(&path)?;
    let at = bytes.len() / 2;
    bytes[at] = if bytes[at] == b'7' { b'8' } else { b'7' };
    std::fs::write(&path, &bytes)?;
    if let Err(e) = decode_class_model(&bytes, &path) {
        println!("node-b corrupted: {e}");
    }
    match load(3, &store) {
        Err(Error::WeightsUnavailable(id)) => println!("no valid replica left: class {id} is unavailable"),
        other => panic!("unexpected result {other:?}"),
    }

    std::fs::remove_dir_all(&base)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
