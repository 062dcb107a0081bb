//! Fixed-width bit vectors over the three-valued domain `{0, 1, X}`.
//!
//! A [`Word`] stores up to [`MAX_WIDTH`] bits as a value mask and an unknown
//! mask. Bits set in the unknown mask are `X` and their value bit is always
//! kept at zero, so two words with the same logical content compare equal.
//!
//! Bitwise operators follow Kleene logic (`0 & X = 0`, `1 | X = 1`).
//! Arithmetic, shifts and comparisons are pessimistic: a single unknown
//! operand bit makes the whole result unknown.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Widest vector the interpreter supports.
pub const MAX_WIDTH: u32 = 128;

#[inline]
fn mask(width: u32) -> u128 {
    if width >= 128 {
        u128::MAX
    } else {
        (1u128 << width) - 1
    }
}

/// One bit of a [`Word`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bit {
    Zero,
    One,
    X,
}

impl Bit {
    pub fn to_char(self) -> char {
        match self {
            Bit::Zero => '0',
            Bit::One => '1',
            Bit::X => 'x',
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Word {
    width: u32,
    value: u128,
    unknown: u128,
}

impl Word {
    /// A fully defined word. Bits of `value` above `width` are dropped.
    pub fn new(width: u32, value: u128) -> Self {
        Self::from_parts(width, value, 0)
    }

    pub fn from_parts(width: u32, value: u128, unknown: u128) -> Self {
        assert!(
            (1..=MAX_WIDTH).contains(&width),
            "word width {width} outside 1..={MAX_WIDTH}"
        );
        let m = mask(width);
        let unknown = unknown & m;
        Word {
            width,
            value: value & m & !unknown,
            unknown,
        }
    }

    pub fn zero(width: u32) -> Self {
        Self::new(width, 0)
    }

    pub fn ones(width: u32) -> Self {
        Self::new(width, u128::MAX)
    }

    pub fn all_x(width: u32) -> Self {
        Self::from_parts(width, 0, u128::MAX)
    }

    pub fn from_bool(b: bool) -> Self {
        Self::new(1, b as u128)
    }

    fn from_bit(b: Bit) -> Self {
        match b {
            Bit::Zero => Self::new(1, 0),
            Bit::One => Self::new(1, 1),
            Bit::X => Self::all_x(1),
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    /// The value bits; unknown positions read as zero.
    pub fn raw_value(&self) -> u128 {
        self.value
    }

    pub fn unknown_mask(&self) -> u128 {
        self.unknown
    }

    /// The integer value, if no bit is unknown.
    pub fn value(&self) -> Option<u128> {
        (self.unknown == 0).then_some(self.value)
    }

    pub fn is_defined(&self) -> bool {
        self.unknown == 0
    }

    pub fn has_x(&self) -> bool {
        self.unknown != 0
    }

    pub fn bit(&self, i: u32) -> Bit {
        if i >= self.width {
            Bit::Zero
        } else if (self.unknown >> i) & 1 == 1 {
            Bit::X
        } else if (self.value >> i) & 1 == 1 {
            Bit::One
        } else {
            Bit::Zero
        }
    }

    /// Zero-extends or truncates to `width`.
    pub fn resize(&self, width: u32) -> Word {
        Word::from_parts(width, self.value, self.unknown)
    }

    // Kleene bitwise logic.

    pub fn and(&self, other: &Word) -> Word {
        let w = self.width.max(other.width);
        let (a, b) = (self.resize(w), other.resize(w));
        let zero_a = !a.value & !a.unknown;
        let zero_b = !b.value & !b.unknown;
        let known_zero = zero_a | zero_b;
        let unknown = (a.unknown | b.unknown) & !known_zero;
        Word::from_parts(w, a.value & b.value, unknown)
    }

    pub fn or(&self, other: &Word) -> Word {
        let w = self.width.max(other.width);
        let (a, b) = (self.resize(w), other.resize(w));
        let known_one = a.value | b.value;
        let unknown = (a.unknown | b.unknown) & !known_one;
        Word::from_parts(w, known_one, unknown)
    }

    pub fn xor(&self, other: &Word) -> Word {
        let w = self.width.max(other.width);
        let (a, b) = (self.resize(w), other.resize(w));
        Word::from_parts(w, a.value ^ b.value, a.unknown | b.unknown)
    }

    pub fn not(&self) -> Word {
        Word::from_parts(self.width, !self.value, self.unknown)
    }

    // Pessimistic arithmetic: any unknown operand bit poisons the result.

    fn arith(&self, other: &Word, f: impl Fn(u128, u128) -> u128) -> Word {
        let w = self.width.max(other.width);
        if self.has_x() || other.has_x() {
            return Word::all_x(w);
        }
        Word::new(w, f(self.value, other.value))
    }

    pub fn add(&self, other: &Word) -> Word {
        self.arith(other, u128::wrapping_add)
    }

    pub fn sub(&self, other: &Word) -> Word {
        self.arith(other, u128::wrapping_sub)
    }

    pub fn mul(&self, other: &Word) -> Word {
        self.arith(other, u128::wrapping_mul)
    }

    pub fn neg(&self) -> Word {
        if self.has_x() {
            return Word::all_x(self.width);
        }
        Word::new(self.width, self.value.wrapping_neg())
    }

    /// Logical shift left; result keeps `self`'s width.
    pub fn shl(&self, amount: &Word) -> Word {
        match (self.value(), amount.value()) {
            (Some(v), Some(n)) if n < self.width as u128 => Word::new(self.width, v << n),
            (Some(_), Some(_)) => Word::zero(self.width),
            _ => Word::all_x(self.width),
        }
    }

    pub fn shr(&self, amount: &Word) -> Word {
        match (self.value(), amount.value()) {
            (Some(v), Some(n)) if n < self.width as u128 => Word::new(self.width, v >> n),
            (Some(_), Some(_)) => Word::zero(self.width),
            _ => Word::all_x(self.width),
        }
    }

    fn compare(&self, other: &Word, f: impl Fn(u128, u128) -> bool) -> Word {
        match (self.value(), other.value()) {
            (Some(a), Some(b)) => Word::from_bool(f(a, b)),
            _ => Word::all_x(1),
        }
    }

    pub fn eq_(&self, other: &Word) -> Word {
        self.compare(other, |a, b| a == b)
    }

    pub fn ne_(&self, other: &Word) -> Word {
        self.compare(other, |a, b| a != b)
    }

    pub fn lt(&self, other: &Word) -> Word {
        self.compare(other, |a, b| a < b)
    }

    pub fn le(&self, other: &Word) -> Word {
        self.compare(other, |a, b| a <= b)
    }

    pub fn gt(&self, other: &Word) -> Word {
        self.compare(other, |a, b| a > b)
    }

    pub fn ge(&self, other: &Word) -> Word {
        self.compare(other, |a, b| a >= b)
    }

    /// Reduction to a truth value: any known one is true, all known zeros is
    /// false, otherwise unknown.
    pub fn truth(&self) -> Bit {
        if self.value != 0 {
            Bit::One
        } else if self.unknown == 0 {
            Bit::Zero
        } else {
            Bit::X
        }
    }

    pub fn logical_not(&self) -> Word {
        Word::from_bit(match self.truth() {
            Bit::Zero => Bit::One,
            Bit::One => Bit::Zero,
            Bit::X => Bit::X,
        })
    }

    pub fn logical_and(&self, other: &Word) -> Word {
        Word::from_bit(self.truth()).and(&Word::from_bit(other.truth()))
    }

    pub fn logical_or(&self, other: &Word) -> Word {
        Word::from_bit(self.truth()).or(&Word::from_bit(other.truth()))
    }

    pub fn reduce_and(&self) -> Word {
        let m = mask(self.width);
        let zeros = !self.value & !self.unknown & m;
        if zeros != 0 {
            Word::new(1, 0)
        } else if self.unknown != 0 {
            Word::all_x(1)
        } else {
            Word::new(1, 1)
        }
    }

    pub fn reduce_or(&self) -> Word {
        Word::from_bit(self.truth())
    }

    pub fn reduce_xor(&self) -> Word {
        if self.has_x() {
            Word::all_x(1)
        } else {
            Word::new(1, (self.value.count_ones() & 1) as u128)
        }
    }

    /// Bitwise merge of two alternatives: agreeing bits survive, the rest
    /// become unknown. Used when a condition is unknown.
    pub fn merge(&self, other: &Word) -> Word {
        let w = self.width.max(other.width);
        let (a, b) = (self.resize(w), other.resize(w));
        let differ = (a.value ^ b.value) | a.unknown | b.unknown;
        Word::from_parts(w, a.value, differ)
    }

    /// `{self, low}`
    pub fn concat(&self, low: &Word) -> Word {
        let w = self.width + low.width;
        assert!(w <= MAX_WIDTH, "concatenation wider than {MAX_WIDTH} bits");
        Word::from_parts(
            w,
            (self.value << low.width) | low.value,
            (self.unknown << low.width) | low.unknown,
        )
    }

    /// Bits `msb..=lsb`. Bits past the top read as unknown.
    pub fn slice(&self, msb: u32, lsb: u32) -> Word {
        let w = msb - lsb + 1;
        if lsb >= self.width {
            return Word::all_x(w);
        }
        let mut out = Word::from_parts(w, self.value >> lsb, self.unknown >> lsb);
        if msb >= self.width {
            let valid = self.width - lsb;
            let over = mask(w) & !mask(valid);
            out = Word::from_parts(w, out.value, out.unknown | over);
        }
        out
    }

    /// Returns `self` with bits `msb..=lsb` replaced by `bits`.
    pub fn with_slice(&self, msb: u32, lsb: u32, bits: &Word) -> Word {
        if lsb >= self.width {
            return *self;
        }
        let msb = msb.min(self.width - 1);
        let w = msb - lsb + 1;
        let field = mask(w) << lsb;
        let b = bits.resize(w);
        Word::from_parts(
            self.width,
            (self.value & !field) | (b.value << lsb),
            (self.unknown & !field) | (b.unknown << lsb),
        )
    }

    /// MSB-first string of `0`, `1` and `x`.
    pub fn to_bit_string(&self) -> String {
        (0..self.width)
            .rev()
            .map(|i| self.bit(i).to_char())
            .collect()
    }

    /// Parses an MSB-first string of `0`, `1`, `x`/`X`/`z`/`Z`/`?`.
    pub fn from_bit_string(s: &str) -> Option<Word> {
        let width = s.len() as u32;
        if width == 0 || width > MAX_WIDTH {
            return None;
        }
        let (mut value, mut unknown) = (0u128, 0u128);
        for c in s.chars() {
            value <<= 1;
            unknown <<= 1;
            match c {
                '0' => {}
                '1' => value |= 1,
                'x' | 'X' | 'z' | 'Z' | '?' => unknown |= 1,
                _ => return None,
            }
        }
        Some(Word::from_parts(width, value, unknown))
    }

    /// Canonical lowercase-hex form: `<w>'h<value>` or, when any bit is
    /// unknown, `<w>'h<value>/x<unknown>`.
    pub fn to_hex(&self) -> String {
        if self.unknown == 0 {
            format!("{}'h{:x}", self.width, self.value)
        } else {
            format!("{}'h{:x}/x{:x}", self.width, self.value, self.unknown)
        }
    }

    pub fn from_hex(s: &str) -> Option<Word> {
        let (w, rest) = s.split_once("'h")?;
        let width: u32 = w.parse().ok()?;
        if !(1..=MAX_WIDTH).contains(&width) {
            return None;
        }
        let (v, x) = match rest.split_once("/x") {
            Some((v, x)) => (v, x),
            None => (rest, "0"),
        };
        let value = u128::from_str_radix(v, 16).ok()?;
        let unknown = u128::from_str_radix(x, 16).ok()?;
        Some(Word::from_parts(width, value, unknown))
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}'b{}", self.width, self.to_bit_string())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value() {
            Some(v) => write!(f, "{}'d{}", self.width, v),
            None => write!(f, "{}'b{}", self.width, self.to_bit_string()),
        }
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Word::from_hex(&s).ok_or_else(|| serde::de::Error::custom(format!("bad word `{s}`")))
    }
}
