//! Per-frame JPEG-style transform coding, used as a stand-in for real video
//! compression inside the distortion library.
//!
//! The pipeline per frame and channel: split into 8x8 blocks (edge blocks
//! replicate border samples), forward 8x8 DCT-II, quantize with the standard
//! baseline tables scaled by the usual quality mapping (quality 50 leaves the
//! tables untouched), dequantize, inverse DCT. No entropy coding — only the
//! lossy part matters here — and no chroma subsampling: all three channels
//! keep full resolution, chroma just uses its own table.

use ndarray::Array2;

/// Baseline luminance quantization table (JPEG Annex K.1), row-major.
const LUMA_TABLE: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, //
    12, 12, 14, 19, 26, 58, 60, 55, //
    14, 13, 16, 24, 40, 57, 69, 56, //
    14, 17, 22, 29, 51, 87, 80, 62, //
    18, 22, 37, 56, 68, 109, 103, 77, //
    24, 35, 55, 64, 81, 104, 113, 92, //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99,
];

/// Baseline chrominance quantization table (JPEG Annex K.2), row-major.
const CHROMA_TABLE: [u16; 64] = [
    17, 18, 24, 47, 99, 99, 99, 99, //
    18, 21, 26, 66, 99, 99, 99, 99, //
    24, 26, 56, 99, 99, 99, 99, 99, //
    47, 66, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99,
];

#[derive(Debug, Clone, Copy)]
pub enum Plane {
    Luma,
    Chroma,
}

/// The usual libjpeg quality mapping: 50 keeps the base table, lower
/// qualities scale it up, higher qualities scale it down, entries clamped to
/// `1..=255`.
fn scaled_table(plane: Plane, quality: u8) -> [f64; 64] {
    let q = quality.clamp(1, 100) as i64;
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    let base = match plane {
        Plane::Luma => &LUMA_TABLE,
        Plane::Chroma => &CHROMA_TABLE,
    };
    let mut out = [0.0; 64];
    for (o, b) in out.iter_mut().zip(base) {
        *o = (((*b as i64) * scale + 50) / 100).clamp(1, 255) as f64;
    }
    out
}

/// Orthonormal 8x8 DCT-II basis matrix: `C[k][n]`.
fn dct_matrix() -> [[f64; 8]; 8] {
    let mut c = [[0.0; 8]; 8];
    for (k, row) in c.iter_mut().enumerate() {
        let norm = if k == 0 {
            (1.0f64 / 8.0).sqrt()
        } else {
            (2.0f64 / 8.0).sqrt()
        };
        for (n, v) in row.iter_mut().enumerate() {
            *v = norm
                * (std::f64::consts::PI * (2.0 * n as f64 + 1.0) * k as f64 / 16.0).cos();
        }
    }
    c
}

/// Transform-codes one plane with samples in `[0, 1]`.
///
/// Output stays real-valued; the caller clamps. Partial edge blocks are
/// handled by replicating border samples before the transform and discarding
/// the synthetic part afterwards.
pub fn transcode_plane(plane: &Array2<f64>, which: Plane, quality: u8) -> Array2<f64> {
    let (h, w) = plane.dim();
    let table = scaled_table(which, quality);
    let c = dct_matrix();

    let mut out = Array2::zeros((h, w));
    let mut block = [[0.0f64; 8]; 8];
    let mut tmp = [[0.0f64; 8]; 8];
    let mut coef = [[0.0f64; 8]; 8];

    for by in (0..h).step_by(8) {
        for bx in (0..w).step_by(8) {
            // Load with level shift to the signed 8-bit range JPEG works in.
            for (dy, row) in block.iter_mut().enumerate() {
                for (dx, v) in row.iter_mut().enumerate() {
                    let sy = (by + dy).min(h - 1);
                    let sx = (bx + dx).min(w - 1);
                    *v = plane[[sy, sx]] * 255.0 - 128.0;
                }
            }
            // coef = C * block * C^T
            for i in 0..8 {
                for j in 0..8 {
                    tmp[i][j] = (0..8).map(|n| c[i][n] * block[n][j]).sum();
                }
            }
            for i in 0..8 {
                for j in 0..8 {
                    coef[i][j] = (0..8).map(|n| tmp[i][n] * c[j][n]).sum();
                }
            }
            // Quantize / dequantize.
            for i in 0..8 {
                for j in 0..8 {
                    let t = table[i * 8 + j];
                    coef[i][j] = (coef[i][j] / t).round() * t;
                }
            }
            // block = C^T * coef * C
            for i in 0..8 {
                for j in 0..8 {
                    tmp[i][j] = (0..8).map(|n| c[n][i] * coef[n][j]).sum();
                }
            }
            for i in 0..8 {
                for j in 0..8 {
                    block[i][j] = (0..8).map(|n| tmp[i][n] * c[n][j]).sum();
                }
            }
            for (dy, row) in block.iter().enumerate() {
                for (dx, v) in row.iter().enumerate() {
                    let sy = by + dy;
                    let sx = bx + dx;
                    if sy < h && sx < w {
                        out[[sy, sx]] = (v + 128.0) / 255.0;
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dct_matrix_is_orthonormal() {
        let c = dct_matrix();
        for i in 0..8 {
            for j in 0..8 {
                let dot: f64 = (0..8).map(|n| c[i][n] * c[j][n]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-12, "row {i} . row {j} = {dot}");
            }
        }
    }

    #[test]
    fn quality_50_keeps_base_tables() {
        let t = scaled_table(Plane::Luma, 50);
        assert_eq!(t[0], 16.0);
        assert_eq!(t[63], 99.0);
        let t = scaled_table(Plane::Chroma, 50);
        assert_eq!(t[0], 17.0);
    }

    #[test]
    fn quality_scaling_brackets() {
        // quality 100 -> all ones (lossless quantization step).
        assert!(scaled_table(Plane::Luma, 100).iter().all(|v| *v == 1.0));
        // quality 10 -> 5x the base table.
        assert_eq!(scaled_table(Plane::Luma, 10)[0], 80.0);
    }

    #[test]
    fn constant_plane_survives_nearly_unchanged() {
        // A flat block has only a DC coefficient; DC quantization error is at
        // most table/2 in coefficient space = table/16 in sample space.
        for value in [0.0, 0.2, 0.5, 0.83, 1.0] {
            let plane = Array2::from_elem((24, 16), value);
            let out = transcode_plane(&plane, Plane::Luma, 50);
            for v in &out {
                assert!((v - value).abs() <= 2.0 / 255.0, "value {value} -> {v}");
            }
        }
    }

    #[test]
    fn lower_quality_means_more_error() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let plane = Array2::from_shape_fn((32, 32), |_| rng.random::<f64>());
        let err = |q: u8| {
            let out = transcode_plane(&plane, Plane::Luma, q);
            plane
                .iter()
                .zip(out.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        };
        let (e90, e50, e10) = (err(90), err(50), err(10));
        assert!(e90 < e50 && e50 < e10, "{e90} {e50} {e10}");
    }

    #[test]
    fn ragged_dimensions_are_handled() {
        let plane = Array2::from_shape_fn((13, 21), |(y, x)| ((y * 31 + x * 7) % 97) as f64 / 96.0);
        let out = transcode_plane(&plane, Plane::Chroma, 75);
        assert_eq!(out.dim(), (13, 21));
        assert!(out.iter().all(|v| v.is_finite()));
    }
}
