use std::path::{Path, PathBuf};

use tenfos_core::Result;

use crate::config::Config;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Directory holding pipeline artifacts (fit and/or infer outputs).
    #[arg(long)]
    pub dir: PathBuf,
}

pub fn run(args: Args, _cfg: &Config) -> Result<()> {
    let dir = &args.dir;
    let mut found = false;

    for (label, file) in [
        ("model", "model.meta.txt"),
        ("fit", "fit.meta.txt"),
        ("chain", "chain.meta.txt"),
        ("inference", "infer.meta.txt"),
    ] {
        if let Some(text) = read_if_present(&dir.join(file)) {
            found = true;
            println!("[{label}] {file}");
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                println!("  {line}");
            }
        }
    }

    if let Some(text) = read_if_present(&dir.join("cv.csv")) {
        found = true;
        println!("[rank selection] cv.csv");
        let mut best: Option<(String, f64)> = None;
        for line in text.lines().skip(1) {
            let mut fields = line.split(',');
            let (Some(rank), Some(err)) = (fields.next(), fields.next()) else {
                continue;
            };
            if let Ok(e) = err.parse::<f64>() {
                println!("  rank {rank}: mean error {e:.6e}");
                if best.as_ref().is_none_or(|(_, b)| e < *b) {
                    best = Some((rank.to_string(), e));
                }
            }
        }
        if let Some((rank, err)) = best {
            println!("  best: rank {rank} ({err:.6e})");
        }
    }

    if let Some(text) = read_if_present(&dir.join("clusters.csv")) {
        found = true;
        let n = text.lines().count().saturating_sub(1);
        println!("[clusters] clusters.csv: {n} clusters");
        for line in text.lines().skip(1).take(10) {
            println!("  {line}");
        }
    }

    if !found {
        println!("no pipeline artifacts found in {}", dir.display());
    }
    Ok(())
}

fn read_if_present(path: &Path) -> Option<String> {
    std::fs::read_to_string(path).ok()
}
