//! Arithmetic in the binary extension fields GF(2^m), m ∈ {1, 2, 4, 8}.
//!
//! Elements are stored as `u8`. Addition is XOR. Multiplication and
//! inversion go through tables that are evaluated at compile time, so a
//! [`Field`] is a plain `Copy` handle with no runtime initialisation and no
//! shared mutable state.
//!
//! Reduction polynomials (fixed, so that every implementation agrees on the
//! generated coefficients):
//!
//! | m | polynomial            | hex   |
//! |---|-----------------------|-------|
//! | 1 | x + 1                 | 0x3   |
//! | 2 | x² + x + 1            | 0x7   |
//! | 4 | x⁴ + x + 1            | 0x13  |
//! | 8 | x⁸ + x⁴ + x³ + x + 1  | 0x11b |

use core::fmt;

use crate::error::{Error, Result};

/// Carry-less multiply followed by reduction modulo `poly` (degree `m`).
pub const fn poly_mul(a: u8, b: u8, m: u32, poly: u32) -> u8 {
    let mut acc: u32 = 0;
    let mut i = 0;
    while i < 8 {
        if (b >> i) & 1 == 1 {
            acc ^= (a as u32) << i;
        }
        i += 1;
    }
    let mut bit = 15i32;
    while bit >= m as i32 {
        if (acc >> bit) & 1 == 1 {
            acc ^= poly << (bit as u32 - m);
        }
        bit -= 1;
    }
    acc as u8
}

const fn build_mul<const N: usize>(m: u32, poly: u32) -> [u8; N] {
    let q = 1usize << m;
    let mut table = [0u8; N];
    // exp/log over the generator found by search keeps the const loop short
    // for GF(256); the small fields are filled directly.
    if m < 8 {
        let mut a = 0;
        while a < q {
            let mut b = 0;
            while b < q {
                table[a * q + b] = poly_mul(a as u8, b as u8, m, poly);
                b += 1;
            }
            a += 1;
        }
        return table;
    }
    let mut exp = [0u8; 512];
    let mut log = [0u16; 256];
    // 3 generates the multiplicative group of GF(2^8)/0x11b.
    let mut x: u8 = 1;
    let mut i = 0;
    while i < 255 {
        exp[i] = x;
        exp[i + 255] = x;
        log[x as usize] = i as u16;
        x = poly_mul(x, 3, m, poly);
        i += 1;
    }
    let mut a = 1;
    while a < 256 {
        let la = log[a] as usize;
        let mut b = 1;
        while b < 256 {
            table[a * 256 + b] = exp[la + log[b] as usize];
            b += 1;
        }
        a += 1;
    }
    table
}

const fn build_inv<const Q: usize, const N: usize>(mul: &[u8; N]) -> [u8; Q] {
    let mut inv = [0u8; Q];
    let mut a = 1;
    while a < Q {
        let mut b = 1;
        while b < Q {
            if mul[a * Q + b] == 1 {
                inv[a] = b as u8;
                break;
            }
            b += 1;
        }
        a += 1;
    }
    inv
}

static MUL1: [u8; 4] = build_mul::<4>(1, 0x3);
static MUL2: [u8; 16] = build_mul::<16>(2, 0x7);
static MUL4: [u8; 256] = build_mul::<256>(4, 0x13);
static MUL8: [u8; 65536] = build_mul::<65536>(8, 0x11b);
static INV1: [u8; 2] = build_inv::<2, 4>(&MUL1);
static INV2: [u8; 4] = build_inv::<4, 16>(&MUL2);
static INV4: [u8; 16] = build_inv::<16, 256>(&MUL4);
static INV8: [u8; 256] = build_inv::<256, 65536>(&MUL8);

/// A finite field GF(2^m).
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Field {
    bits: u8,
    mul: &'static [u8],
    inv: &'static [u8],
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF({})", self.order())
    }
}

impl Field {
    /// The field with `2^bits` elements.
    pub fn new(bits: u8) -> Result<Self> {
        let (mul, inv): (&'static [u8], &'static [u8]) = match bits {
            1 => (&MUL1, &INV1),
            2 => (&MUL2, &INV2),
            4 => (&MUL4, &INV4),
            8 => (&MUL8, &INV8),
            _ => return Err(Error::UnsupportedField(1u32 << bits.min(31))),
        };
        Ok(Field { bits, mul, inv })
    }

    /// The field of order `q` (must be 2, 4, 16 or 256).
    pub fn with_order(q: u32) -> Result<Self> {
        match q {
            2 => Self::new(1),
            4 => Self::new(2),
            16 => Self::new(4),
            256 => Self::new(8),
            _ => Err(Error::UnsupportedField(q)),
        }
    }

    pub fn gf256() -> Self {
        Field { bits: 8, mul: &MUL8, inv: &INV8 }
    }

    pub fn gf2() -> Self {
        Field { bits: 1, mul: &MUL1, inv: &INV1 }
    }

    #[inline]
    pub fn bits(&self) -> u8 {
        self.bits
    }

    /// Field size `q`.
    #[inline]
    pub fn order(&self) -> u32 {
        1u32 << self.bits
    }

    /// The reduction polynomial, including the leading term.
    pub fn polynomial(&self) -> u32 {
        match self.bits {
            1 => 0x3,
            2 => 0x7,
            4 => 0x13,
            _ => 0x11b,
        }
    }

    #[inline]
    pub fn mask(&self) -> u8 {
        (self.order() - 1) as u8
    }

    #[inline]
    pub fn contains(&self, a: u8) -> bool {
        (a as u32) < self.order()
    }

    #[inline]
    pub fn add(&self, a: u8, b: u8) -> u8 {
        a ^ b
    }

    #[inline]
    pub fn mul(&self, a: u8, b: u8) -> u8 {
        self.mul[((a as usize) << self.bits) | b as usize]
    }

    /// Multiplicative inverse; zero has none.
    #[inline]
    pub fn inv(&self, a: u8) -> Result<u8> {
        if a == 0 {
            Err(Error::ZeroInverse)
        } else {
            Ok(self.inv[a as usize])
        }
    }

    #[inline]
    pub fn div(&self, a: u8, b: u8) -> Result<u8> {
        Ok(self.mul(a, self.inv(b)?))
    }

    /// Multiplication row for a fixed left operand: `row[b] = c·b`.
    #[inline]
    pub fn mul_row(&self, c: u8) -> &'static [u8] {
        let q = self.order() as usize;
        let start = c as usize * q;
        &self.mul[start..start + q]
    }

    /// `dst[i] += c·src[i]`.
    #[inline]
    pub fn axpy(&self, dst: &mut [u8], c: u8, src: &[u8]) {
        debug_assert_eq!(dst.len(), src.len());
        match c {
            0 => {}
            1 => dst.iter_mut().zip(src).for_each(|(d, s)| *d ^= *s),
            _ => {
                let row = self.mul_row(c);
                dst.iter_mut().zip(src).for_each(|(d, s)| *d ^= row[*s as usize]);
            }
        }
    }

    /// `v[i] = c·v[i]`.
    #[inline]
    pub fn scale(&self, v: &mut [u8], c: u8) {
        if c == 1 {
            return;
        }
        let row = self.mul_row(c);
        v.iter_mut().for_each(|x| *x = row[*x as usize]);
    }

    pub fn dot(&self, a: &[u8], b: &[u8]) -> u8 {
        a.iter().zip(b).fold(0u8, |acc, (x, y)| acc ^ self.mul(*x, *y))
    }
}

/// The four elementary operations, for callers that dispatch on an opcode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldOp {
    Add,
    Mul,
    Inv,
    Div,
}

impl Field {
    /// Apply `op`; `Inv` ignores `b`.
    pub fn apply(&self, a: u8, b: u8, op: FieldOp) -> Result<u8> {
        if !self.contains(a) || !self.contains(b) {
            return Err(Error::InvalidElement(if self.contains(a) { b } else { a }));
        }
        match op {
            FieldOp::Add => Ok(self.add(a, b)),
            FieldOp::Mul => Ok(self.mul(a, b)),
            FieldOp::Inv => self.inv(a),
            FieldOp::Div => self.div(a, b),
        }
    }
}
