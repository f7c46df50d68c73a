//! Exact INT8 reference arithmetic and nibble slicing.
//!
//! Operands are sign-magnitude bytes: a sign plus an 8-bit magnitude split into
//! a most significant nibble (MSN) and a least significant nibble (LSN). Every
//! INT4 product inherits the sign of its parent INT8 product, which keeps the
//! radix recomposition `256*hh + 16*hl + ll` exact.

use std::fmt;
use std::ops::{Add, AddAssign};

use rand::Rng;

use crate::error::{Error, Result};

pub const MAX_MAGNITUDE: i32 = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn as_i64(self) -> i64 {
        match self {
            Sign::Positive => 1,
            Sign::Negative => -1,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
        }
    }
}

impl std::ops::Mul for Sign {
    type Output = Sign;
    fn mul(self, rhs: Sign) -> Sign {
        if self == rhs {
            Sign::Positive
        } else {
            Sign::Negative
        }
    }
}

/// A sign-magnitude byte split into two nibbles. Zero is always positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SlicedInt8 {
    sign: Sign,
    msn: u8,
    lsn: u8,
}

impl SlicedInt8 {
    pub const ZERO: SlicedInt8 = SlicedInt8 {
        sign: Sign::Positive,
        msn: 0,
        lsn: 0,
    };

    /// Builds from explicit parts, rejecting nibbles above 15 and negative zero.
    pub fn from_parts(sign: Sign, msn: u8, lsn: u8) -> Result<Self> {
        if msn > 15 || lsn > 15 {
            return Err(Error::Input(format!("nibble out of range: msn={msn}, lsn={lsn}")));
        }
        if sign == Sign::Negative && msn == 0 && lsn == 0 {
            return Err(Error::Input("negative zero is not canonical".into()));
        }
        Ok(SlicedInt8 { sign, msn, lsn })
    }

    pub fn sign(self) -> Sign {
        self.sign
    }

    pub fn msn(self) -> u8 {
        self.msn
    }

    pub fn lsn(self) -> u8 {
        self.lsn
    }

    pub fn magnitude(self) -> u8 {
        16 * self.msn + self.lsn
    }

    pub fn value(self) -> i32 {
        self.sign.as_i64() as i32 * self.magnitude() as i32
    }

    pub fn negate(self) -> Self {
        if self.magnitude() == 0 {
            self
        } else {
            SlicedInt8 {
                sign: self.sign.flip(),
                ..self
            }
        }
    }
}

impl TryFrom<i32> for SlicedInt8 {
    type Error = Error;
    fn try_from(value: i32) -> Result<Self> {
        slice(value)
    }
}

impl fmt::Display for SlicedInt8 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// Splits a signed value in `[-255, 255]` into sign, MSN and LSN.
pub fn slice(value: i32) -> Result<SlicedInt8> {
    if value.abs() > MAX_MAGNITUDE {
        return Err(Error::Range(value as i64));
    }
    let sign = if value < 0 { Sign::Negative } else { Sign::Positive };
    let mag = value.unsigned_abs() as u8;
    Ok(SlicedInt8 {
        sign,
        msn: mag >> 4,
        lsn: mag & 0x0f,
    })
}

/// Slices a whole vector, failing on the first out-of-range element.
pub fn slice_all(values: &[i32]) -> Result<Vec<SlicedInt8>> {
    values.iter().map(|&v| slice(v)).collect()
}

/// Draws a uniformly random operand in `[-255, 255]`.
pub fn random_operand<R: Rng + ?Sized>(rng: &mut R) -> SlicedInt8 {
    let v = rng.random_range(-MAX_MAGNITUDE..=MAX_MAGNITUDE);
    slice(v).expect("sampled inside range")
}

pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<SlicedInt8> {
    (0..len).map(|_| random_operand(rng)).collect()
}

fn check_lengths(a: &[SlicedInt8], b: &[SlicedInt8]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "vector lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Exact dot product, straight schoolbook loop over the signed values.
pub fn oracle_dot(a: &[SlicedInt8], b: &[SlicedInt8]) -> Result<i64> {
    check_lengths(a, b)?;
    let mut acc = 0i64;
    for i in 0..a.len() {
        acc += a[i].value() as i64 * b[i].value() as i64;
    }
    Ok(acc)
}

/// The three radix-position partial sums of a sliced dot product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct PartialSums {
    /// MSN x MSN terms (weight 16^2).
    pub s_hh: i64,
    /// Cross terms MSN x LSN + LSN x MSN (weight 16^1).
    pub s_hl: i64,
    /// LSN x LSN terms (weight 16^0).
    pub s_ll: i64,
}

impl PartialSums {
    pub fn new(s_hh: i64, s_hl: i64, s_ll: i64) -> Self {
        PartialSums { s_hh, s_hl, s_ll }
    }

    /// Checks the magnitude bounds implied by a vector of `len` nibble products.
    pub fn within_bounds(&self, len: usize) -> bool {
        let unit = 225 * len as i64;
        self.s_hh.abs() <= unit && self.s_hl.abs() <= 2 * unit && self.s_ll.abs() <= unit
    }
}

impl Add for PartialSums {
    type Output = PartialSums;
    fn add(self, rhs: PartialSums) -> PartialSums {
        PartialSums {
            s_hh: self.s_hh + rhs.s_hh,
            s_hl: self.s_hl + rhs.s_hl,
            s_ll: self.s_ll + rhs.s_ll,
        }
    }
}

impl AddAssign for PartialSums {
    fn add_assign(&mut self, rhs: PartialSums) {
        *self = *self + rhs;
    }
}

/// Accumulates the four nibble products per element into three radix lanes.
pub fn sliced_partials(a: &[SlicedInt8], b: &[SlicedInt8]) -> Result<PartialSums> {
    check_lengths(a, b)?;
    let mut p = PartialSums::default();
    for (x, y) in a.iter().zip(b) {
        let s = (x.sign * y.sign).as_i64();
        let (xh, xl, yh, yl) = (x.msn as i64, x.lsn as i64, y.msn as i64, y.lsn as i64);
        p.s_hh += s * xh * yh;
        p.s_hl += s * (xh * yl + xl * yh);
        p.s_ll += s * xl * yl;
    }
    Ok(p)
}

/// Applies the radix weights 16^2, 16^1, 16^0 and sums.
pub fn recompose(p: PartialSums) -> i64 {
    256 * p.s_hh + 16 * p.s_hl + p.s_ll
}

/// Dense row-major matrix of sliced operands.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<SlicedInt8>,
}

impl IntMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<SlicedInt8>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("matrix dims must be positive, got {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} elements, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(IntMatrix { rows, cols, data })
    }

    pub fn from_values(rows: usize, cols: usize, values: &[i32]) -> Result<Self> {
        Self::new(rows, cols, slice_all(values)?)
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut data = vec![SlicedInt8::ZERO; n * n];
        let one = slice(1)?;
        for i in 0..n {
            data[i * n + i] = one;
        }
        Self::new(n, n, data)
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, random_vector(rng, rows * cols))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> SlicedInt8 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[SlicedInt8] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<SlicedInt8> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> IntMatrix {
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            data.extend((0..self.rows).map(|r| self.get(r, c)));
        }
        IntMatrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn elements(&self) -> &[SlicedInt8] {
        &self.data
    }
}
