//! Arithmetic in GF(2^8) and GF(2^16).
//!
//! Elements are stored as `u16` for both fields. Multiplication goes through
//! log/antilog tables built once per field; the primitive element is always
//! `x` (0x02).
//!
//! | field     | reduction polynomial          | mask    |
//! |-----------|-------------------------------|---------|
//! | GF(2^8)   | x^8 + x^4 + x^3 + x^2 + 1     | 0x11D   |
//! | GF(2^16)  | x^16 + x^12 + x^3 + x + 1     | 0x1100B |
//!
//! Encoded DNA depends on these choices, so they are part of the wire format.

use std::sync::OnceLock;

use crate::error::{Error, Result};

pub const GF256_POLY: u32 = 0x11D;
pub const GF65536_POLY: u32 = 0x1100B;
pub const GENERATOR: u16 = 2;

pub type Symbol = u16;

#[derive(Clone)]
pub struct Field {
    bits: u32,
    poly: u32,
    order: usize,
    // exp has 2 * order entries so that exp[log a + log b] needs no reduction.
    exp: Vec<u16>,
    log: Vec<u32>,
}

impl std::fmt::Debug for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Field")
            .field("bits", &self.bits)
            .field("poly", &format_args!("{:#x}", self.poly))
            .finish()
    }
}

impl Field {
    /// Builds the tables for GF(2^bits) reduced by `poly`, failing when `x`
    /// does not generate the full multiplicative group.
    pub fn new(bits: u32, poly: u32) -> Result<Field> {
        if !(2..=16).contains(&bits) || poly >> bits != 1 {
            return Err(Error::Field(format!(
                "polynomial {poly:#x} is not of degree {bits}"
            )));
        }
        let size = 1usize << bits;
        let order = size - 1;
        let mut exp = vec![0u16; 2 * order];
        let mut log = vec![0u32; size];
        let mut v: u32 = 1;
        for i in 0..order {
            if i > 0 && v == 1 {
                return Err(Error::Field(format!(
                    "x has order {i} under {poly:#x}, expected {order}"
                )));
            }
            exp[i] = v as u16;
            log[v as usize] = i as u32;
            v <<= 1;
            if v & (size as u32) != 0 {
                v ^= poly;
            }
        }
        if v != 1 {
            return Err(Error::Field(format!("{poly:#x} is not primitive")));
        }
        for i in order..2 * order {
            exp[i] = exp[i - order];
        }
        Ok(Field {
            bits,
            poly,
            order,
            exp,
            log,
        })
    }

    pub fn gf256() -> &'static Field {
        static F: OnceLock<Field> = OnceLock::new();
        F.get_or_init(|| Field::new(8, GF256_POLY).expect("0x11D is primitive"))
    }

    pub fn gf65536() -> &'static Field {
        static F: OnceLock<Field> = OnceLock::new();
        F.get_or_init(|| Field::new(16, GF65536_POLY).expect("0x1100B is primitive"))
    }

    /// The shared table for a symbol size in bits (8 or 16).
    pub fn for_bits(bits: u32) -> Result<&'static Field> {
        match bits {
            8 => Ok(Field::gf256()),
            16 => Ok(Field::gf65536()),
            _ => Err(Error::Field(format!(
                "unsupported symbol size {bits} (only 8 and 16 bits)"
            ))),
        }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn reduction_polynomial(&self) -> u32 {
        self.poly
    }

    pub fn generator(&self) -> Symbol {
        GENERATOR
    }

    /// Number of field elements, 2^bits.
    pub fn size(&self) -> usize {
        self.order + 1
    }

    /// Multiplicative order of the generator, 2^bits - 1.
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn mul(&self, a: Symbol, b: Symbol) -> Symbol {
        if a == 0 || b == 0 {
            return 0;
        }
        self.exp[(self.log[a as usize] + self.log[b as usize]) as usize]
    }

    #[inline]
    pub fn inv(&self, a: Symbol) -> Symbol {
        assert!(a != 0, "inverse of zero");
        let l = self.log[a as usize] as usize;
        self.exp[(self.order - l) % self.order]
    }

    #[inline]
    pub fn div(&self, a: Symbol, b: Symbol) -> Symbol {
        assert!(b != 0, "division by zero");
        if a == 0 {
            return 0;
        }
        let la = self.log[a as usize] as usize;
        let lb = self.log[b as usize] as usize;
        self.exp[la + self.order - lb]
    }

    /// a^e for a non-negative exponent.
    pub fn pow(&self, a: Symbol, e: u64) -> Symbol {
        if e == 0 {
            return 1;
        }
        if a == 0 {
            return 0;
        }
        let l = self.log[a as usize] as u64;
        self.exp[((l * (e % self.order as u64)) % self.order as u64) as usize]
    }

    /// α^i for any integer exponent.
    #[inline]
    pub fn alpha_pow(&self, i: i64) -> Symbol {
        self.exp[i.rem_euclid(self.order as i64) as usize]
    }

    /// Discrete log base α. Panics on zero.
    #[inline]
    pub fn log(&self, a: Symbol) -> usize {
        assert!(a != 0, "log of zero");
        self.log[a as usize] as usize
    }

    /// `a * α^e` without a second table lookup on `α^e`.
    #[inline]
    pub(crate) fn mul_alpha_pow(&self, a: Symbol, e: usize) -> Symbol {
        if a == 0 {
            return 0;
        }
        self.exp[(self.log[a as usize] as usize + e % self.order) % self.order]
    }
}

/// Product of two elements of `field`.
pub fn gf_mul(a: Symbol, b: Symbol, field: &Field) -> Symbol {
    field.mul(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_products_gf256() {
        let f = Field::gf256();
        assert_eq!(f.mul(0x80, 0x02), 0x1D);
        assert_eq!(f.mul(0x53, 1), 0x53);
        assert_eq!(f.mul(0x53, 0), 0);
    }

    #[test]
    fn both_generators_are_primitive() {
        assert_eq!(Field::gf256().order(), 255);
        assert_eq!(Field::gf65536().order(), 65535);
    }

    #[test]
    fn rejects_non_primitive() {
        // x^8 + x^4 + x^3 + x + 1 is irreducible but x is not primitive under it.
        assert!(Field::new(8, 0x11B).is_err());
        assert!(Field::new(8, 0x1FF).is_err());
        assert!(Field::new(8, 0x3FF).is_err());
    }

    #[test]
    fn inverse_round_trip_gf65536() {
        let f = Field::gf65536();
        for a in (1u32..65536).step_by(97) {
            let a = a as u16;
            assert_eq!(f.mul(a, f.inv(a)), 1);
            assert_eq!(f.div(f.mul(a, 0x1234), a), 0x1234);
        }
    }

    #[test]
    fn alpha_pow_wraps() {
        let f = Field::gf256();
        assert_eq!(f.alpha_pow(255), 1);
        assert_eq!(f.alpha_pow(-1), f.inv(2));
        assert_eq!(f.pow(2, 8), 0x1D);
    }
}
