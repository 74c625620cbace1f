//! Rounding to the emulated formats and their parameters.

use precision_bandit::fpemu::{round_to, round_with, Arith, Format, Subnormals};

fn main() {
    println!("{:<6} {:>3} {:>12} {:>12} {:>12}", "format", "t", "u", "x_min", "x_max");
    for f in Format::ALL {
        println!(
            "{:<6} {:>3} {:>12.3e} {:>12.3e} {:>12.3e}",
            f,
            f.significand_bits(),
            f.unit_roundoff(),
            f.x_min(),
            f.x_max()
        );
    }

    let x = std::f64::consts::PI;
    println!("\npi rounded:");
    for f in Format::ALL {
        let r = round_to(x, f);
        println!("  {f:<5} {r:<22} rel. error {:.2e}", ((r - x) / x).abs());
    }

    // 1 + u is a tie and goes to the even neighbour, 1
    let u = Format::Bf16.unit_roundoff();
    println!("\nbf16: 1 + u -> {}, 1 + 1.5u -> {}", round_to(1.0 + u, Format::Bf16), round_to(1.0 + 1.5 * u, Format::Bf16));

    // overflow and underflow
    println!("fp16: 70000 -> {}", round_to(70000.0, Format::Fp16));
    let tiny = 1e-6;
    println!(
        "fp16: 1e-6 -> {:e} (gradual), {:e} (flush)",
        round_with(tiny, Format::Fp16, Subnormals::Gradual),
        round_with(tiny, Format::Fp16, Subnormals::FlushToZero)
    );

    // every operation is rounded: summing 0.1 in bf16 stalls
    let ar = Arith::from(Format::Bf16);
    let mut s = 0.0;
    for _ in 0..1000 {
        s = ar.add(s, 0.1);
    }
    println!("sum of 1000 x 0.1 in bf16: {s}");
}
