//! The 6-bit local directional gradient pattern.
//!
//! An order-`n` code compares the four order-`(n-1)` directional derivatives
//! of a pixel pairwise. Bits are emitted most-significant first in the pair
//! order (0°,45°), (0°,90°), (0°,135°), (45°,90°), (45°,135°), (90°,135°).

use crate::derivative::{derivative_fields, Sample};
use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Bits per LDGP code.
pub const LDGP_BITS: u8 = 6;

/// A grid of per-pixel descriptor codes, one code per 8-bit cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodeImage {
    width: usize,
    height: usize,
    code_bits: u8,
    codes: Vec<u8>,
}

impl CodeImage {
    pub(crate) fn from_raw(width: usize, height: usize, code_bits: u8, codes: Vec<u8>) -> Self {
        debug_assert_eq!(codes.len(), width * height);
        debug_assert!(code_bits == 8 || codes.iter().all(|&c| c < 1 << code_bits));
        Self {
            width,
            height,
            code_bits,
            codes,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn code_bits(&self) -> u8 {
        self.code_bits
    }

    pub fn codes(&self) -> &[u8] {
        &self.codes
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.codes[y * self.width + x]
    }
}

/// `1` iff `a > b`; ties encode as `0`.
#[inline]
pub fn encode_pair<T: PartialOrd>(a: T, b: T) -> u8 {
    u8::from(a > b)
}

/// Packs the six pairwise comparisons of one pixel's derivatives.
#[inline]
pub fn ldgp_code<T: PartialOrd + Copy>(d0: T, d45: T, d90: T, d135: T) -> u8 {
    encode_pair(d0, d45) << 5
        | encode_pair(d0, d90) << 4
        | encode_pair(d0, d135) << 3
        | encode_pair(d45, d90) << 2
        | encode_pair(d45, d135) << 1
        | encode_pair(d90, d135)
}

/// Order-`order` LDGP code image using 32-bit derivatives.
pub fn ldgp_image(image: &GrayImage, order: usize) -> Result<CodeImage> {
    ldgp_image_with::<i32>(image, order)
}

/// Order-`order` LDGP code image with derivatives held in `T`.
pub fn ldgp_image_with<T: Sample>(image: &GrayImage, order: usize) -> Result<CodeImage> {
    if order < 2 {
        return Err(Error::InvalidOrder {
            order,
            reason: "pattern order must be at least 2",
        });
    }
    let [d0, d45, d90, d135] = derivative_fields::<T>(image, order - 1)?;
    let codes = d0
        .values()
        .iter()
        .zip(d45.values())
        .zip(d90.values())
        .zip(d135.values())
        .map(|(((&a, &b), &c), &d)| ldgp_code(a, b, c, d))
        .collect();
    Ok(CodeImage::from_raw(
        image.width(),
        image.height(),
        LDGP_BITS,
        codes,
    ))
}
