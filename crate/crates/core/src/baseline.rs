//! LBP and LDP baseline code images.
//!
//! Both use the 8-neighborhood ordered clockwise from the upper-left pixel,
//! first neighbor in the most significant bit, with replicate borders.

use crate::derivative::{derivative_fields, Field, Sample};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::ldgp::CodeImage;

/// Clockwise from upper-left, `y` growing downward.
pub const NEIGHBORS: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
];

/// Visits every pixel with its 8 clamped neighbor indices in [`NEIGHBORS`] order.
fn for_each_neighborhood(width: usize, height: usize, mut f: impl FnMut(usize, [usize; 8])) {
    for y in 0..height {
        let up = y.saturating_sub(1) * width;
        let mid = y * width;
        let down = (y + 1).min(height - 1) * width;
        for x in 0..width {
            let left = x.saturating_sub(1);
            let right = (x + 1).min(width - 1);
            f(
                mid + x,
                [
                    up + left,
                    up + x,
                    up + right,
                    mid + right,
                    down + right,
                    down + x,
                    down + left,
                    mid + left,
                ],
            );
        }
    }
}

/// Classic 8-bit LBP: a bit is set when the neighbor is at least the center.
pub fn lbp_image(image: &GrayImage) -> Result<CodeImage> {
    image.ensure_descriptor_size()?;
    let (w, h) = image.dimensions();
    let px = image.pixels();
    let mut codes = vec![0u8; w * h];
    for_each_neighborhood(w, h, |center, neighbors| {
        let c = px[center];
        codes[center] = neighbors
            .iter()
            .fold(0u8, |code, &n| (code << 1) | u8::from(px[n] >= c));
    });
    Ok(CodeImage::from_raw(w, h, 8, codes))
}

/// LDP for one direction: a bit is set when the center derivative and the
/// neighbor derivative do not share a strict sign (their product is ≤ 0).
pub fn ldp_direction<T: Sample>(field: &Field<T>) -> CodeImage {
    let (w, h) = (field.width(), field.height());
    let signs: Vec<i8> = field
        .values()
        .iter()
        .map(|v| {
            if v.is_positive() {
                1
            } else if v.is_negative() {
                -1
            } else {
                0
            }
        })
        .collect();
    let mut codes = vec![0u8; w * h];
    for_each_neighborhood(w, h, |center, neighbors| {
        let s = signs[center];
        codes[center] = neighbors
            .iter()
            .fold(0u8, |code, &n| (code << 1) | u8::from(s * signs[n] <= 0));
    });
    CodeImage::from_raw(w, h, 8, codes)
}

/// Order-`order` LDP: four 8-bit code images in 0°, 45°, 90°, 135° order,
/// concatenating to the 32-bit pattern of each pixel.
pub fn ldp_image(image: &GrayImage, order: usize) -> Result<[CodeImage; 4]> {
    ldp_image_with::<i32>(image, order)
}

pub fn ldp_image_with<T: Sample>(image: &GrayImage, order: usize) -> Result<[CodeImage; 4]> {
    if order < 2 {
        return Err(Error::InvalidOrder {
            order,
            reason: "pattern order must be at least 2",
        });
    }
    let fields = derivative_fields::<T>(image, order - 1)?;
    Ok(fields.each_ref().map(ldp_direction))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derivative::{derivative_field, Direction};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_image_sets_every_bit() {
        let img = GrayImage::filled(5, 5, 9);
        assert!(lbp_image(&img).unwrap().codes().iter().all(|&c| c == 255));
        for n in 2..5 {
            for codes in ldp_image(&img, n).unwrap() {
                assert_eq!(codes.code_bits(), 8);
                assert!(codes.codes().iter().all(|&c| c == 255));
            }
        }
    }

    #[test]
    fn lbp_bright_center_is_zero() {
        let img = GrayImage::from_fn(3, 3, |x, y| if (x, y) == (1, 1) { 5 } else { 0 });
        assert_eq!(lbp_image(&img).unwrap().get(1, 1), 0);
    }

    #[test]
    fn lbp_bit_order() {
        // Only the upper-left neighbor reaches the center value.
        let img = GrayImage::new(3, 3, vec![9, 1, 1, 1, 5, 1, 1, 1, 1]).unwrap();
        assert_eq!(lbp_image(&img).unwrap().get(1, 1), 0b1000_0000);
        // Only the left neighbor.
        let img = GrayImage::new(3, 3, vec![1, 1, 1, 5, 5, 1, 1, 1, 1]).unwrap();
        assert_eq!(lbp_image(&img).unwrap().get(1, 1), 0b0000_0001);
    }

    #[test]
    fn ldp_same_sign_neighborhood_is_zero() {
        // Strictly decreasing to the right: every D0 first-order derivative is
        // positive except the replicated last column, which sits outside the
        // center's 3x3 window when the image is wide enough.
        let img = GrayImage::from_fn(5, 3, |x, _| 200 - 30 * x as u8);
        let d0 = &ldp_image(&img, 2).unwrap()[0];
        assert_eq!(d0.get(2, 1), 0);
        assert_eq!(d0.get(1, 1), 0);
    }

    #[test]
    fn ldp_rejects_low_order() {
        assert!(ldp_image(&GrayImage::filled(3, 3, 0), 1).is_err());
    }

    fn naive_lbp(img: &GrayImage, x: usize, y: usize) -> u8 {
        let c = img.get(x, y);
        let mut code = 0u8;
        for (dx, dy) in NEIGHBORS {
            let n = img.get_clamped(x as isize + dx, y as isize + dy);
            code = code << 1 | u8::from(n >= c);
        }
        code
    }

    fn naive_ldp2(img: &GrayImage, x: usize, y: usize, (ox, oy): (isize, isize)) -> u8 {
        let deriv = |x: isize, y: isize| {
            let cx = x.clamp(0, img.width() as isize - 1);
            let cy = y.clamp(0, img.height() as isize - 1);
            i64::from(img.get_clamped(cx, cy)) - i64::from(img.get_clamped(cx + ox, cy + oy))
        };
        let c = deriv(x as isize, y as isize);
        let mut code = 0u8;
        for (dx, dy) in NEIGHBORS {
            let n = deriv(x as isize + dx, y as isize + dy);
            code = code << 1 | u8::from(c * n <= 0);
        }
        code
    }

    #[test]
    fn baselines_match_naive_oracles() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let (w, h) = (rng.random_range(2..9), rng.random_range(2..9));
            let img = GrayImage::from_fn(w, h, |_, _| rng.random_range(0..8) * 32);
            let lbp = lbp_image(&img).unwrap();
            let ldp = ldp_image(&img, 2).unwrap();
            for y in 0..h {
                for x in 0..w {
                    assert_eq!(lbp.get(x, y), naive_lbp(&img, x, y));
                    for (codes, d) in ldp.iter().zip(Direction::ALL) {
                        assert_eq!(codes.get(x, y), naive_ldp2(&img, x, y, d.offset()));
                    }
                }
            }
        }
    }

    #[test]
    fn direction_images_are_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let img = GrayImage::from_fn(9, 7, |_, _| rng.random());
        let all = ldp_image(&img, 3).unwrap();
        for (i, d) in Direction::ALL.iter().enumerate().rev() {
            let field = derivative_field::<i32>(&img, *d, 2).unwrap();
            assert_eq!(ldp_direction(&field), all[i]);
        }
    }

    proptest! {
        #[test]
        fn gray_shift_invariance(px in proptest::collection::vec(0u8..200, 36), c in 0u8..56) {
            let img = GrayImage::new(6, 6, px).unwrap();
            let shifted = img.map(|p| p + c);
            prop_assert_eq!(lbp_image(&img).unwrap(), lbp_image(&shifted).unwrap());
            prop_assert_eq!(ldp_image(&img, 2).unwrap(), ldp_image(&shifted, 2).unwrap());
            prop_assert_eq!(ldp_image(&img, 3).unwrap(), ldp_image(&shifted, 3).unwrap());
        }
    }
}
