//! Exact summation of `f64` values.
//!
//! Every finite double is an integer multiple of 2⁻¹⁰⁷⁴, so a wide enough
//! fixed-point integer holds any finite sum with no rounding at all. The
//! result is therefore independent of the order in which terms and partial
//! sums are combined, which makes ensemble averages bitwise reproducible
//! across worker counts and checkpoint boundaries.

use serde::{Deserialize, Serialize};

const LIMB_BITS: u32 = 32;
const LIMB_MASK: i64 = (1 << LIMB_BITS) - 1;
/// Bit 0 of limb 0 has weight 2⁻¹⁰⁷⁴; 68 limbs reach past 2¹⁰²⁴ with room for carries.
const LIMBS: usize = 68;
const MIN_EXP: i32 = -1074;
/// Each addition puts less than 2³² into a limb, so this many additions can
/// never overflow an `i64` limb before carries are propagated.
const ADDS_BEFORE_CARRY: u32 = 1 << 30;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "Packed", try_from = "Packed")]
pub struct ExactSum {
    limbs: Vec<i64>,
    pending: u32,
    /// Set once a non-finite value has been added.
    poisoned: bool,
}

impl Default for ExactSum {
    fn default() -> Self {
        ExactSum::new()
    }
}

/// Equal when the represented sums are equal, whatever the carry state.
impl PartialEq for ExactSum {
    fn eq(&self, other: &Self) -> bool {
        let (mut a, mut b) = (self.clone(), other.clone());
        a.carry();
        b.carry();
        a.limbs == b.limbs && a.poisoned == b.poisoned
    }
}

impl Eq for ExactSum {}

impl ExactSum {
    pub fn new() -> Self {
        ExactSum {
            limbs: vec![0; LIMBS],
            pending: 0,
            poisoned: false,
        }
    }

    pub fn add(&mut self, x: f64) {
        if !x.is_finite() {
            self.poisoned = true;
            return;
        }
        if x == 0.0 {
            return;
        }
        let bits = x.to_bits();
        let negative = bits >> 63 == 1;
        let raw_exp = ((bits >> 52) & 0x7ff) as i32;
        let frac = bits & ((1u64 << 52) - 1);
        let (mantissa, exp) = if raw_exp == 0 {
            (frac, MIN_EXP)
        } else {
            (frac | (1u64 << 52), raw_exp - 1075)
        };
        let pos = (exp - MIN_EXP) as u32;
        let limb = (pos / LIMB_BITS) as usize;
        let shifted = (mantissa as u128) << (pos % LIMB_BITS);
        for k in 0..3 {
            let part = ((shifted >> (k * LIMB_BITS)) as i64) & LIMB_MASK;
            if part != 0 {
                self.limbs[limb + k as usize] += if negative { -part } else { part };
            }
        }
        self.pending += 1;
        if self.pending >= ADDS_BEFORE_CARRY {
            self.carry();
        }
    }

    pub fn merge(&mut self, other: &ExactSum) {
        self.carry();
        let mut o = other.clone();
        o.carry();
        for (a, b) in self.limbs.iter_mut().zip(o.limbs.iter()) {
            *a += *b;
        }
        self.poisoned |= o.poisoned;
        self.pending = 1;
        self.carry();
    }

    /// Bring every limb below the top into `[0, 2³²)`.
    fn carry(&mut self) {
        for k in 0..LIMBS - 1 {
            let c = self.limbs[k] >> LIMB_BITS;
            self.limbs[k] -= c << LIMB_BITS;
            self.limbs[k + 1] += c;
        }
        self.pending = 0;
    }

    /// The sum rounded to `f64` (within one ulp of the exact value).
    pub fn value(&self) -> f64 {
        if self.poisoned {
            return f64::NAN;
        }
        let mut s = self.clone();
        s.carry();
        let negative = s.limbs[LIMBS - 1] < 0;
        if negative {
            for l in s.limbs.iter_mut() {
                *l = -*l;
            }
            s.carry();
        }
        let Some(top) = s.limbs.iter().rposition(|&l| l != 0) else {
            return 0.0;
        };
        let lo = top.saturating_sub(2);
        let mut v = 0.0;
        for k in (lo..=top).rev() {
            let exp = (k as i32) * LIMB_BITS as i32 + MIN_EXP;
            v += s.limbs[k] as f64 * pow2(exp);
        }
        if negative {
            -v
        } else {
            v
        }
    }
}

/// Serialized form: carried limbs with the zero runs at both ends dropped.
#[derive(Serialize, Deserialize)]
struct Packed {
    offset: usize,
    limbs: Vec<i64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    poisoned: bool,
}

impl From<ExactSum> for Packed {
    fn from(mut s: ExactSum) -> Self {
        s.carry();
        let first = s.limbs.iter().position(|&l| l != 0);
        let (offset, limbs) = match first {
            Some(lo) => {
                let hi = s.limbs.iter().rposition(|&l| l != 0).unwrap_or(lo);
                (lo, s.limbs[lo..=hi].to_vec())
            }
            None => (0, Vec::new()),
        };
        Packed {
            offset,
            limbs,
            poisoned: s.poisoned,
        }
    }
}

impl TryFrom<Packed> for ExactSum {
    type Error = String;

    fn try_from(p: Packed) -> Result<Self, String> {
        if p.offset + p.limbs.len() > LIMBS {
            return Err(format!("{} limbs at offset {} exceed {LIMBS}", p.limbs.len(), p.offset));
        }
        let mut s = ExactSum::new();
        s.limbs[p.offset..p.offset + p.limbs.len()].copy_from_slice(&p.limbs);
        s.poisoned = p.poisoned;
        s.pending = 1;
        s.carry();
        Ok(s)
    }
}

/// Exact 2^e for e in the double range, including subnormals.
fn pow2(e: i32) -> f64 {
    if e >= 1024 {
        f64::INFINITY
    } else if e >= -1022 {
        f64::from_bits(((e + 1023) as u64) << 52)
    } else {
        f64::from_bits(1u64 << (e - MIN_EXP))
    }
}
