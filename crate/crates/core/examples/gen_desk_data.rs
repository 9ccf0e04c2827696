//! Regenerates the bundled desk-scale inputs under `data/`.
//!
//! cargo run --example gen_desk_data -- [out_dir]

use std::path::PathBuf;

use sociopol::population::synthetic::{synthetic_follow_graph, synthetic_profiles, to_adult_csv, to_edge_list};

fn main() -> std::io::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("data"));
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("adult_sample.csv"), to_adult_csv(&synthetic_profiles(2000, 20240601)))?;
    std::fs::write(out.join("follow_graph.txt"), to_edge_list(&synthetic_follow_graph(600, 6, 0.3, 20240602)))?;
    println!("wrote {}", out.display());
    Ok(())
}
