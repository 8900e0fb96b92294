use super::{FloatImage, Mask};

const FAR: f64 = 1e20;

/// Exact Euclidean distance from every foreground pixel to the nearest
/// background pixel (separable lower-envelope transform). Background pixels
/// are 0. Only pixels inside the raster count as background; a mask with no
/// background at all maps to infinity.
pub fn distance_transform(mask: &Mask) -> FloatImage {
    let (w, h) = (mask.width(), mask.height());
    let mut sq: Vec<f64> = mask.pixels().iter().map(|&fg| if fg { FAR } else { 0.0 }).collect();

    let mut line = vec![0.0; w.max(h)];
    let mut out = vec![0.0; w.max(h)];
    for x in 0..w {
        for y in 0..h {
            line[y] = sq[y * w + x];
        }
        envelope(&line[..h], &mut out[..h]);
        for y in 0..h {
            sq[y * w + x] = out[y];
        }
    }
    for y in 0..h {
        line[..w].copy_from_slice(&sq[y * w..(y + 1) * w]);
        envelope(&line[..w], &mut out[..w]);
        sq[y * w..(y + 1) * w].copy_from_slice(&out[..w]);
    }

    let data = sq.into_iter().map(|d| if d >= FAR / 2.0 { f64::INFINITY } else { d.sqrt() }).collect();
    FloatImage::from_vec(w, h, data).expect("same shape")
}

/// 1-D squared distance transform of a sampled function.
fn envelope(f: &[f64], d: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let intersect =
        |q: usize, p: usize| ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
    for q in 1..n {
        let mut s = intersect(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = intersect(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        *out = dq * dq + f[p];
    }
}
