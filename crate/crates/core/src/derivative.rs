//! Directional derivative fields of arbitrary order.
//!
//! The order-`k` field in direction `d` is
//! `F^k(p) = F^{k-1}(p) - F^{k-1}(p + offset(d))` with `F^0` the image itself.
//! Neighbors that fall outside the image are clamped to the nearest valid
//! coordinate, so fields keep the image dimensions and the off-image border
//! row/column of a first-order field is zero.

use std::fmt::Debug;

use num_traits::{PrimInt, Signed};

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Largest derivative order accepted anywhere in the crate.
pub const MAX_ORDER: usize = 20;

/// Signed integer type holding derivative values.
///
/// Order-`k` values are bounded by `255 * 2^k` in magnitude, so the usable
/// order depends on the width of the type (see [`Sample::max_order`]).
pub trait Sample: PrimInt + Signed + From<u8> + Debug + Send + Sync + 'static {
    /// Highest order whose values are guaranteed to fit, capped at [`MAX_ORDER`].
    fn max_order() -> usize {
        let max = Self::max_value();
        let mut bound = <Self as From<u8>>::from(255);
        let mut order = 0;
        while order < MAX_ORDER {
            match bound.checked_mul(&(Self::one() + Self::one())) {
                Some(next) if next <= max => {
                    bound = next;
                    order += 1;
                }
                _ => break,
            }
        }
        order
    }
}

impl Sample for i16 {}
impl Sample for i32 {}
impl Sample for i64 {}

/// One of the four derivative directions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    D0,
    D45,
    D90,
    D135,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::D0,
        Direction::D45,
        Direction::D90,
        Direction::D135,
    ];

    /// Neighbor offset `(dx, dy)` with `y` growing downward.
    pub const fn offset(self) -> (isize, isize) {
        match self {
            Direction::D0 => (1, 0),
            Direction::D45 => (1, -1),
            Direction::D90 => (0, -1),
            Direction::D135 => (-1, -1),
        }
    }

    pub const fn degrees(self) -> u32 {
        match self {
            Direction::D0 => 0,
            Direction::D45 => 45,
            Direction::D90 => 90,
            Direction::D135 => 135,
        }
    }
}

/// A derivative field for one direction and one order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Field<T> {
    width: usize,
    height: usize,
    order: usize,
    direction: Direction,
    values: Vec<T>,
}

impl<T: Sample> Field<T> {
    /// The order-0 field: the image widened to `T`.
    pub fn from_image(image: &GrayImage, direction: Direction) -> Self {
        Self {
            width: image.width(),
            height: image.height(),
            order: 0,
            direction,
            values: image
                .pixels()
                .iter()
                .map(|&p| <T as From<u8>>::from(p))
                .collect(),
        }
    }

    /// Applies the first-order difference operator once more.
    pub fn step(&self) -> Self {
        let (w, h) = (self.width, self.height);
        let (dx, dy) = self.direction.offset();
        let mut values = Vec::with_capacity(self.values.len());
        for y in 0..h {
            let ny = (y as isize + dy).clamp(0, h as isize - 1) as usize;
            let row = &self.values[y * w..(y + 1) * w];
            let neighbor_row = &self.values[ny * w..(ny + 1) * w];
            match dx {
                0 => values.extend(row.iter().zip(neighbor_row).map(|(&a, &b)| a - b)),
                1 => {
                    values.extend(
                        row[..w - 1]
                            .iter()
                            .zip(&neighbor_row[1..])
                            .map(|(&a, &b)| a - b),
                    );
                    values.push(row[w - 1] - neighbor_row[w - 1]);
                }
                _ => {
                    values.push(row[0] - neighbor_row[0]);
                    values.extend(
                        row[1..]
                            .iter()
                            .zip(&neighbor_row[..w - 1])
                            .map(|(&a, &b)| a - b),
                    );
                }
            }
        }
        Self {
            width: w,
            height: h,
            order: self.order + 1,
            direction: self.direction,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.values[y * self.width + x]
    }
}

pub(crate) fn check_order<T: Sample>(order: usize) -> Result<()> {
    if order < 1 {
        return Err(Error::InvalidOrder {
            order,
            reason: "derivative order must be at least 1",
        });
    }
    if order > T::max_order() {
        return Err(Error::InvalidOrder {
            order,
            reason: "derivative order exceeds the range of the sample type",
        });
    }
    Ok(())
}

/// Order-`order` derivative of `image` in `direction`.
pub fn derivative_field<T: Sample>(
    image: &GrayImage,
    direction: Direction,
    order: usize,
) -> Result<Field<T>> {
    check_order::<T>(order)?;
    image.ensure_descriptor_size()?;
    let mut field = Field::from_image(image, direction);
    for _ in 0..order {
        field = field.step();
    }
    Ok(field)
}

/// The four direction fields at one order, in [`Direction::ALL`] order.
pub fn derivative_fields<T: Sample>(image: &GrayImage, order: usize) -> Result<[Field<T>; 4]> {
    check_order::<T>(order)?;
    image.ensure_descriptor_size()?;
    Ok(Direction::ALL.map(|d| {
        let mut field = Field::from_image(image, d);
        for _ in 0..order {
            field = field.step();
        }
        field
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct recursion with explicit clamping, evaluated per pixel.
    fn oracle(img: &GrayImage, x: isize, y: isize, (dx, dy): (isize, isize), k: usize) -> i64 {
        let cx = x.clamp(0, img.width() as isize - 1);
        let cy = y.clamp(0, img.height() as isize - 1);
        if k == 0 {
            return i64::from(img.get(cx as usize, cy as usize));
        }
        let nx = (cx + dx).clamp(0, img.width() as isize - 1);
        let ny = (cy + dy).clamp(0, img.height() as isize - 1);
        oracle(img, cx, cy, (dx, dy), k - 1) - oracle(img, nx, ny, (dx, dy), k - 1)
    }

    fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |_, _| rng.random())
    }

    /// Reference pixel 3 at (1, 1); right 2, upper-right 6, up 4, upper-left 1.
    fn worked_example() -> GrayImage {
        GrayImage::new(3, 3, vec![1, 4, 6, 9, 3, 2, 8, 5, 7]).unwrap()
    }

    #[test]
    fn worked_example_first_order() {
        let img = worked_example();
        let got: Vec<i32> = Direction::ALL
            .iter()
            .map(|&d| derivative_field::<i32>(&img, d, 1).unwrap().get(1, 1))
            .collect();
        assert_eq!(got, vec![1, -3, -1, 2]);
    }

    #[test]
    fn constant_image_has_zero_derivatives() {
        let img = GrayImage::filled(5, 4, 7);
        for d in Direction::ALL {
            for order in 1..=5 {
                let f = derivative_field::<i32>(&img, d, order).unwrap();
                assert!(f.values().iter().all(|&v| v == 0));
            }
        }
    }

    #[test]
    fn order_two_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let img = random_image(&mut rng, 6, 6);
            for d in Direction::ALL {
                let f = derivative_field::<i32>(&img, d, 2).unwrap();
                for y in 0..6 {
                    for x in 0..6 {
                        let want = oracle(&img, x as isize, y as isize, d.offset(), 2);
                        assert_eq!(i64::from(f.get(x, y)), want, "{d:?} at ({x},{y})");
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_bad_orders_and_tiny_images() {
        let img = GrayImage::filled(4, 4, 1);
        assert!(matches!(
            derivative_field::<i32>(&img, Direction::D0, 0),
            Err(Error::InvalidOrder { .. })
        ));
        assert!(derivative_field::<i32>(&img, Direction::D0, MAX_ORDER).is_ok());
        assert!(derivative_field::<i32>(&img, Direction::D0, MAX_ORDER + 1).is_err());
        assert!(derivative_field::<i16>(&img, Direction::D0, 8).is_err());
        assert!(matches!(
            derivative_field::<i32>(&GrayImage::filled(1, 5, 0), Direction::D0, 1),
            Err(Error::ImageTooSmall { .. })
        ));
    }

    #[test]
    fn max_order_per_type() {
        assert_eq!(<i16 as Sample>::max_order(), 7);
        assert_eq!(<i32 as Sample>::max_order(), MAX_ORDER);
        assert_eq!(<i64 as Sample>::max_order(), MAX_ORDER);
    }

    #[test]
    fn extreme_alternating_image_stays_in_bound() {
        // Checkerboard of 0/255 maximizes growth of repeated differences.
        let img = GrayImage::from_fn(8, 8, |x, y| if (x + y) % 2 == 0 { 255 } else { 0 });
        for d in Direction::ALL {
            let f = derivative_field::<i32>(&img, d, MAX_ORDER).unwrap();
            let bound = 255i64 << MAX_ORDER;
            assert!(f.values().iter().all(|&v| i64::from(v).abs() <= bound));
            let narrow = derivative_field::<i16>(&img, d, 7).unwrap();
            let wide = derivative_field::<i64>(&img, d, 7).unwrap();
            assert!(narrow
                .values()
                .iter()
                .zip(wide.values())
                .all(|(&a, &b)| i64::from(a) == b));
        }
    }

    fn image_strategy() -> impl Strategy<Value = GrayImage> {
        (2usize..9, 2usize..9).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<u8>(), w * h)
                .prop_map(move |px| GrayImage::new(w, h, px).unwrap())
        })
    }

    proptest! {
        #[test]
        fn gray_shift_invariance(img in image_strategy(), order in 1usize..5, shift in 0u8..64) {
            let headroom = 255 - *img.pixels().iter().max().unwrap();
            let c = shift.min(headroom);
            let shifted = img.map(|p| p + c);
            for d in Direction::ALL {
                let a = derivative_field::<i32>(&img, d, order).unwrap();
                let b = derivative_field::<i32>(&shifted, d, order).unwrap();
                prop_assert_eq!(a.values(), b.values());
            }
        }

        #[test]
        fn integer_scaling_is_linear(img in image_strategy(), order in 1usize..5, k in 1u8..4) {
            let small = img.map(|p| p / 4);
            let scaled = small.map(|p| p * k);
            for d in Direction::ALL {
                let base = derivative_field::<i32>(&small, d, order).unwrap();
                let got = derivative_field::<i32>(&scaled, d, order).unwrap();
                for (&b, &g) in base.values().iter().zip(got.values()) {
                    prop_assert_eq!(b * i32::from(k), g);
                }
            }
        }

        #[test]
        fn replicate_border_zeroes(img in image_strategy()) {
            let (w, h) = img.dimensions();
            let f = |d| derivative_field::<i32>(&img, d, 1).unwrap();
            let (d0, d45, d90, d135) = (f(Direction::D0), f(Direction::D45), f(Direction::D90), f(Direction::D135));
            // Diagonal neighbors clamp per axis, so off-image columns fall
            // back to the vertical difference and the top row to the
            // horizontal one; only the corners are zero.
            for y in 0..h {
                prop_assert_eq!(d0.get(w - 1, y), 0);
                prop_assert_eq!(d45.get(w - 1, y), d90.get(w - 1, y));
                prop_assert_eq!(d135.get(0, y), d90.get(0, y));
            }
            for x in 0..w {
                prop_assert_eq!(d90.get(x, 0), 0);
                prop_assert_eq!(d45.get(x, 0), d0.get(x, 0));
                let left = img.get(x.saturating_sub(1), 0);
                prop_assert_eq!(d135.get(x, 0), i32::from(img.get(x, 0)) - i32::from(left));
            }
            prop_assert_eq!(d45.get(w - 1, 0), 0);
            prop_assert_eq!(d135.get(0, 0), 0);
        }

        #[test]
        fn order_composes_from_single_steps(img in image_strategy(), order in 1usize..7) {
            for d in Direction::ALL {
                let mut stepped = Field::<i32>::from_image(&img, d);
                for _ in 0..order {
                    stepped = stepped.step();
                }
                let direct = derivative_field::<i32>(&img, d, order).unwrap();
                prop_assert_eq!(stepped.order(), order);
                prop_assert_eq!(&stepped, &direct);
            }
        }
    }
}
