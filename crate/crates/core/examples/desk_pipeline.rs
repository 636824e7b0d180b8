//! Runs every stage on the bundled desk case and prints the final report.
//!
//! ```text
//! cargo run --release --example desk_pipeline [OUT_DIR]
//! ```

use std::path::{Path, PathBuf};

use rvc_gep::pipeline::Pipeline;

fn main() -> rvc_gep::Result<()> {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/desk/run.toml");
    let out = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("rvcgep-desk"));
    let pipeline = Pipeline::open(&config, &[], Some(out.clone()), None)?;
    for report in pipeline.run_all()? {
        for note in &report.notes {
            println!("[{}] {note}", report.stage);
        }
    }
    let text = std::fs::read_to_string(out.join("report/report.txt")).expect("report written");
    println!("\n{text}");
    println!("artifacts in {}", out.display());
    Ok(())
}
