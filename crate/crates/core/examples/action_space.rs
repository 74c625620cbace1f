//! The monotone action space and its subsampling.

use precision_bandit::actionspace::{action_cost_bits, default_formats, enumerate_actions, multiset_count, subsample};

fn main() {
    let formats = default_formats();
    let space = enumerate_actions(&formats).expect("ordered formats");
    println!(
        "{} formats: {} of {} tuples are monotone (C(m+3, 4) = {})",
        formats.len(),
        space.len(),
        formats.len().pow(4),
        multiset_count(formats.len(), 4)
    );
    for (i, a) in space.actions().iter().enumerate() {
        println!("  {i:>2} {a:<22} {} bits", action_cost_bits(a));
    }

    let quarter = subsample(&space, 0.25, 3).expect("fraction in (0,1]");
    println!("\nseeded quarter ({} actions):", quarter.len());
    for a in quarter.actions() {
        println!("  {a}");
    }
}
