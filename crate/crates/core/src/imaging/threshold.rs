use super::{GrayImage, Mask};
use crate::error::{Error, Result};

/// Images above this size would overflow the exact variance comparison.
const MAX_PIXELS: usize = 1 << 28;

/// Otsu's threshold on the 256-bin histogram.
///
/// Returns the largest intensity of the lower class: pixels `<= t` form the
/// first class, pixels `> t` the second. Between-class variance is compared
/// in exact integer arithmetic, so ties resolve to the smallest `t`
/// deterministically.
pub fn otsu_threshold(img: &GrayImage) -> Result<u8> {
    if img.len() > MAX_PIXELS {
        return Err(Error::Argument(format!("image of {} pixels is too large", img.len())));
    }
    let mut hist = [0u64; 256];
    for &v in img.pixels() {
        hist[v as usize] += 1;
    }
    let n = img.len() as u64;
    let total: u64 = hist.iter().enumerate().map(|(v, &c)| v as u64 * c).sum();

    // sigma_b^2 = (S0 * N - n0 * S)^2 / (N^2 * n0 * n1); N^2 is common.
    let mut best: Option<(u8, u128, u64)> = None;
    let (mut n0, mut s0) = (0u64, 0u64);
    for t in 0..255usize {
        n0 += hist[t];
        s0 += t as u64 * hist[t];
        let n1 = n - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let d = (s0 as i128 * n as i128 - n0 as i128 * total as i128).unsigned_abs();
        let num = d * d;
        let den = n0 * n1;
        let better = match best {
            None => true,
            Some((_, bn, bd)) => wide_mul(num, bd) > wide_mul(bn, den),
        };
        if better {
            best = Some((t as u8, num, den));
        }
    }
    best.map(|(t, _, _)| t).ok_or_else(|| Error::DegenerateInput("constant image has no Otsu threshold".into()))
}

/// Full 256-bit product as `(high, low)`.
fn wide_mul(a: u128, b: u64) -> (u128, u128) {
    let b = b as u128;
    let lo = (a as u64 as u128) * b;
    let hi = (a >> 64) * b;
    let (low, carry) = lo.overflowing_add(hi << 64);
    ((hi >> 64) + carry as u128, low)
}

/// Foreground wherever the intensity exceeds `threshold`.
pub fn binarize(img: &GrayImage, threshold: u8) -> Mask {
    img.map(|v| v > threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::Raster;

    #[test]
    fn wide_mul_matches_naive_when_small() {
        assert_eq!(wide_mul(12345, 678), (0, 12345 * 678));
        let (hi, lo) = wide_mul(u128::MAX, 2);
        assert_eq!((hi, lo), (1, u128::MAX - 1));
    }

    #[test]
    fn bimodal_threshold_separates_modes() {
        let img = Raster::from_fn(10, 10, |x, _| if x < 5 { 50u8 } else { 200 });
        let t = otsu_threshold(&img).unwrap();
        assert!((50..200).contains(&t), "{t}");
        let mask = binarize(&img, t);
        assert_eq!(mask.pixels().iter().filter(|&&m| m).count(), 50);
    }

    #[test]
    fn bright_square_recovered_exactly() {
        let img =
            Raster::from_fn(32, 32, |x, y| if (10..20).contains(&x) && (12..22).contains(&y) { 180u8 } else { 30 });
        let mask = binarize(&img, otsu_threshold(&img).unwrap());
        for y in 0..32 {
            for x in 0..32 {
                assert_eq!(mask.get(x, y), (10..20).contains(&x) && (12..22).contains(&y));
            }
        }
    }

    #[test]
    fn constant_image_is_degenerate() {
        let img = Raster::filled(8, 8, 77u8);
        assert!(matches!(otsu_threshold(&img), Err(Error::DegenerateInput(_))));
    }
}
