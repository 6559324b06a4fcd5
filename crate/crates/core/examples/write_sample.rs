//! Regenerates `data/sample_log.json`.
//!
//!     cargo run -p rasterkit-core --example write_sample -- data/sample_log.json

use rasterkit_core::io::{sample_log, save_log};

fn main() {
    let path = std::env::args().nth(1).unwrap_or_else(|| "data/sample_log.json".into());
    save_log(&sample_log(), path.as_ref()).expect("write sample log");
    println!("wrote {path}");
}
