//! Software emulation of reduced-precision floating-point formats.
//!
//! Every value is stored as an `f64`. A format is enforced by rounding the
//! exact (double precision) result of each elementary operation to the
//! target lattice with round-to-nearest, ties-to-even.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::kernels::DenseMatrix;

/// An emulated floating-point format.
///
/// The derived ordering is by significand bits, with FP16 placed before
/// TF32 (same precision, narrower exponent range).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Bf16,
    Fp16,
    Tf32,
    Fp32,
    Fp64,
}

impl Format {
    pub const ALL: [Format; 5] = [
        Format::Bf16,
        Format::Fp16,
        Format::Tf32,
        Format::Fp32,
        Format::Fp64,
    ];

    /// Significand bits including the implicit leading bit.
    pub const fn significand_bits(self) -> u32 {
        match self {
            Format::Bf16 => 8,
            Format::Fp16 | Format::Tf32 => 11,
            Format::Fp32 => 24,
            Format::Fp64 => 53,
        }
    }

    /// Exponent of the smallest positive normalized number.
    pub const fn e_min(self) -> i32 {
        match self {
            Format::Fp16 => -14,
            Format::Bf16 | Format::Tf32 | Format::Fp32 => -126,
            Format::Fp64 => -1022,
        }
    }

    /// Exponent of the largest finite number.
    pub const fn e_max(self) -> i32 {
        match self {
            Format::Fp16 => 15,
            Format::Bf16 | Format::Tf32 | Format::Fp32 => 127,
            Format::Fp64 => 1023,
        }
    }

    /// Unit roundoff `2^-t`.
    pub fn unit_roundoff(self) -> f64 {
        pow2(-(self.significand_bits() as i32))
    }

    /// Smallest positive normalized value.
    pub fn x_min(self) -> f64 {
        pow2(self.e_min())
    }

    /// Smallest positive subnormal value.
    pub fn x_min_subnormal(self) -> f64 {
        pow2(self.e_min() + 1 - self.significand_bits() as i32)
    }

    /// Largest finite value `(2 - 2^(1-t)) * 2^e_max`.
    pub fn x_max(self) -> f64 {
        let t = self.significand_bits() as i32;
        // Written as a sum of two powers of two so FP64 does not overflow.
        pow2(self.e_max()) + (pow2(self.e_max()) - pow2(self.e_max() + 1 - t))
    }

    pub const fn name(self) -> &'static str {
        match self {
            Format::Bf16 => "bf16",
            Format::Fp16 => "fp16",
            Format::Tf32 => "tf32",
            Format::Fp32 => "fp32",
            Format::Fp64 => "fp64",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Format::ALL
            .into_iter()
            .find(|f| f.name() == lower)
            .ok_or_else(|| Error::UnknownFormat(s.to_string()))
    }
}

/// Handling of results below the normalized range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subnormals {
    /// Round into the subnormal lattice; flush below the smallest subnormal.
    #[default]
    Gradual,
    /// Flush anything below `x_min` to signed zero.
    FlushToZero,
}

/// A format together with its underflow behaviour. All emulated kernels take
/// one of these; a bare [`Format`] converts with gradual underflow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arith {
    pub format: Format,
    pub subnormals: Subnormals,
}

impl Arith {
    pub const fn new(format: Format, subnormals: Subnormals) -> Self {
        Self { format, subnormals }
    }

    #[inline]
    pub fn round(self, x: f64) -> f64 {
        round_with(x, self.format, self.subnormals)
    }

    #[inline]
    pub fn add(self, a: f64, b: f64) -> f64 {
        self.round(a + b)
    }

    #[inline]
    pub fn sub(self, a: f64, b: f64) -> f64 {
        self.round(a - b)
    }

    #[inline]
    pub fn mul(self, a: f64, b: f64) -> f64 {
        self.round(a * b)
    }

    #[inline]
    pub fn div(self, a: f64, b: f64) -> f64 {
        self.round(a / b)
    }

    #[inline]
    pub fn sqrt(self, a: f64) -> f64 {
        self.round(a.sqrt())
    }

    pub fn unit_roundoff(self) -> f64 {
        self.format.unit_roundoff()
    }
}

impl From<Format> for Arith {
    fn from(format: Format) -> Self {
        Arith::new(format, Subnormals::Gradual)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Rounds `x` to the nearest value of `fmt` (ties to even, gradual underflow).
#[inline]
pub fn round_to(x: f64, fmt: Format) -> f64 {
    round_with(x, fmt, Subnormals::Gradual)
}

/// Rounds `x` to `fmt` with an explicit underflow mode.
pub fn round_with(x: f64, fmt: Format, subnormals: Subnormals) -> f64 {
    if fmt == Format::Fp64 || !x.is_finite() || x == 0.0 {
        return x;
    }
    let t = fmt.significand_bits();
    if x.abs() < fmt.x_min() {
        return match subnormals {
            Subnormals::FlushToZero => 0.0f64.copysign(x),
            Subnormals::Gradual => {
                // Fixed spacing below x_min. Scaling by a power of two is exact.
                let q = fmt.x_min_subnormal();
                let r = (x / q).round_ties_even() * q;
                if r == 0.0 {
                    0.0f64.copysign(x)
                } else {
                    r
                }
            }
        };
    }
    // Normal range of the target: drop the low 53 - t significand bits with
    // round-half-even. A carry into the exponent field is the correct result.
    let shift = 53 - t;
    let bits = x.to_bits();
    let half_minus_one = (1u64 << (shift - 1)) - 1;
    let lsb = (bits >> shift) & 1;
    let rounded = (bits + half_minus_one + lsb) & !((1u64 << shift) - 1);
    let r = f64::from_bits(rounded);
    if r.abs() > fmt.x_max() {
        f64::INFINITY.copysign(x)
    } else {
        r
    }
}

/// `fl(a op b)`: the exact double result rounded once to `fmt`.
pub fn rounded_binop(op: BinOp, a: f64, b: f64, fmt: impl Into<Arith>) -> f64 {
    let ar = fmt.into();
    match op {
        BinOp::Add => ar.add(a, b),
        BinOp::Sub => ar.sub(a, b),
        BinOp::Mul => ar.mul(a, b),
        BinOp::Div => ar.div(a, b),
    }
}

pub fn quantize_vector(v: &[f64], fmt: impl Into<Arith>) -> Vec<f64> {
    let ar = fmt.into();
    v.iter().map(|&x| ar.round(x)).collect()
}

pub fn quantize_matrix(a: &DenseMatrix, fmt: impl Into<Arith>) -> DenseMatrix {
    let ar = fmt.into();
    a.map(|x| ar.round(x))
}

fn pow2(e: i32) -> f64 {
    // powi is exact for powers of two in range; split to reach subnormals.
    if e >= -1022 {
        2f64.powi(e)
    } else {
        2f64.powi(e + 200) * 2f64.powi(-200)
    }
}
