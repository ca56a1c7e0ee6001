//! Temporal segmentation.
//!
//! Embedding and extraction operate on fixed-length groups of frames, so
//! longer clips are cut into segments of `segment_len` frames. A short tail
//! is padded by repeating the last frame; [`TileLayout`] remembers how much
//! padding was added so reassembly can drop it again.

use ndarray::{Array4, s};

use crate::clip::VideoClip;
use crate::error::{Error, Result};

/// How a clip was segmented; needed to reassemble it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileLayout {
    pub segment_len: usize,
    /// Frame count before padding.
    pub orig_t: usize,
    pub n_segments: usize,
    /// Frames of trailing padding in the final segment.
    pub pad: usize,
}

/// Splits a clip into consecutive `segment_len`-frame segments, replicating
/// the final frame to fill the last one.
pub fn tile_temporal(clip: &VideoClip, segment_len: usize) -> Result<(Vec<VideoClip>, TileLayout)> {
    if segment_len == 0 {
        return Err(Error::BadDims("segment_len must be positive".into()));
    }
    let (t, h, w) = clip.dims();
    let n_segments = t.div_ceil(segment_len);
    let padded_t = n_segments * segment_len;
    let layout = TileLayout {
        segment_len,
        orig_t: t,
        n_segments,
        pad: padded_t - t,
    };

    let mut segments = Vec::with_capacity(n_segments);
    for si in 0..n_segments {
        let mut data = Array4::zeros((segment_len, h, w, 3));
        for fi in 0..segment_len {
            let src = (si * segment_len + fi).min(t - 1);
            data.slice_mut(s![fi, .., .., ..])
                .assign(&clip.data.slice(s![src, .., .., ..]));
        }
        segments.push(VideoClip {
            data,
            colorspace: clip.colorspace,
        });
    }
    Ok((segments, layout))
}

/// Reassembles segments produced by [`tile_temporal`], dropping the padding.
pub fn untile_temporal(segments: &[VideoClip], layout: &TileLayout) -> Result<VideoClip> {
    if segments.len() != layout.n_segments || segments.is_empty() {
        return Err(Error::BadDims(format!(
            "expected {} segments, got {}",
            layout.n_segments,
            segments.len()
        )));
    }
    let (_, h, w) = segments[0].dims();
    let colorspace = segments[0].colorspace;
    for seg in segments {
        if seg.dims() != (layout.segment_len, h, w) || seg.colorspace != colorspace {
            return Err(Error::BadDims("inconsistent segment shapes".into()));
        }
    }
    let mut data = Array4::zeros((layout.orig_t, h, w, 3));
    for t in 0..layout.orig_t {
        let si = t / layout.segment_len;
        let fi = t % layout.segment_len;
        data.slice_mut(s![t, .., .., ..])
            .assign(&segments[si].data.slice(s![fi, .., .., ..]));
    }
    VideoClip::new(data, colorspace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clip::Colorspace;
    use ndarray::Array4;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_clip(seed: u64, t: usize) -> VideoClip {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = Array4::from_shape_fn((t, 4, 6, 3), |_| rng.random::<f64>());
        VideoClip::new(data, Colorspace::Rgb).unwrap()
    }

    #[test]
    fn exact_multiple_needs_no_padding() {
        let clip = random_clip(1, 16);
        let (segs, layout) = tile_temporal(&clip, 8).unwrap();
        assert_eq!(segs.len(), 2);
        assert_eq!(layout.pad, 0);
        let back = untile_temporal(&segs, &layout).unwrap();
        assert_eq!(back.data, clip.data);
    }

    #[test]
    fn tail_is_padded_with_last_frame() {
        let clip = random_clip(2, 13);
        let (segs, layout) = tile_temporal(&clip, 8).unwrap();
        assert_eq!(segs.len(), 2);
        assert_eq!(layout.pad, 3);
        // The padded frames replicate frame 12.
        for fi in 5..8 {
            assert_eq!(
                segs[1].data.slice(s![fi, .., .., ..]),
                clip.data.slice(s![12, .., .., ..])
            );
        }
        let back = untile_temporal(&segs, &layout).unwrap();
        assert_eq!(back.data, clip.data);
    }

    #[test]
    fn clip_shorter_than_segment() {
        let clip = random_clip(3, 3);
        let (segs, layout) = tile_temporal(&clip, 8).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(layout.pad, 5);
        let back = untile_temporal(&segs, &layout).unwrap();
        assert_eq!(back.data, clip.data);
    }

    #[test]
    fn segment_count_mismatch_is_rejected() {
        let clip = random_clip(4, 16);
        let (mut segs, layout) = tile_temporal(&clip, 8).unwrap();
        segs.pop();
        assert!(untile_temporal(&segs, &layout).is_err());
    }

    #[test]
    fn zero_segment_len_is_rejected() {
        let clip = random_clip(5, 4);
        assert!(tile_temporal(&clip, 0).is_err());
    }
}
