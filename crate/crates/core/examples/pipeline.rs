//! The full command sequence, driven through the library's CLI layer:
//! generate, train, evaluate, run the baseline and build the report.

use clap::Parser;
use precision_bandit::cli::{run, Cli};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::temp_dir().join("pbandit-pipeline-example");
    let root = root.to_str().ok_or("non-UTF-8 temp dir")?;
    for args in [
        "gen --profile ci --n-train 10 --n-test 10 --seed 1",
        "train --profile ci --episodes 10 --weights W2 --seed 1",
        "eval --profile ci --weights W2",
        "baseline --profile ci --weights W2",
        "report",
    ] {
        println!("$ pbandit {args}");
        let argv = ["pbandit", "--out-root", root].into_iter().chain(args.split_whitespace());
        run(Cli::try_parse_from(argv)?)?;
    }
    let md = std::fs::read_to_string(format!("{root}/report/report.md"))?;
    println!("\n{md}");
    Ok(())
}
