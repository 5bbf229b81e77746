use log::warn;

use super::LogMelBlock;
use crate::synthgen::{ImageSequence, VisualStream};

/// One analysis block: audio features and the image sequence spanning the
/// same second.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignedBlock {
    pub audio: LogMelBlock,
    pub visual: ImageSequence,
}

impl AlignedBlock {
    pub fn start_time(&self) -> f64 {
        self.audio.start_time
    }
}

/// Pairs each audio block with the frames starting at the same instant.
/// Blocks whose span is not fully covered by frames, or whose start does not
/// land on a frame boundary, are dropped.
pub fn block_align(blocks: &[LogMelBlock], frames: &VisualStream) -> Vec<AlignedBlock> {
    let fps = frames.fps as f64;
    let mut out = Vec::new();
    for block in blocks {
        let pos = (block.start_time - frames.start_time) * fps;
        if pos < -1e-6 || (pos - pos.round()).abs() > 1e-6 {
            continue;
        }
        if let Some(visual) = frames.sequence(pos.round() as usize) {
            out.push(AlignedBlock {
                audio: block.clone(),
                visual,
            });
        }
    }
    if out.is_empty() && !blocks.is_empty() {
        let a0 = blocks[0].start_time;
        let a1 = blocks.last().map(|b| b.start_time + b.duration).unwrap_or(a0);
        warn!(
            "no aligned blocks: audio spans [{a0:.3}, {a1:.3}) s, frames span [{:.3}, {:.3}) s",
            frames.start_time,
            frames.end_time()
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{stft_logmel, AudioClip};
    use crate::synthgen::{generate_scene, SceneSpec, FRAME_SIZE, VISUAL_FPS};

    fn stream(start: f64, seconds: usize) -> VisualStream {
        VisualStream {
            width: FRAME_SIZE,
            height: FRAME_SIZE,
            fps: VISUAL_FPS,
            start_time: start,
            frames: vec![0.5; seconds * VISUAL_FPS as usize * FRAME_SIZE * FRAME_SIZE],
        }
    }

    #[test]
    fn ten_seconds_gives_nineteen_pairs() {
        let clip = AudioClip::new(vec![0.0; 160_000], 16_000).unwrap();
        let blocks = stft_logmel(&clip).unwrap();
        let pairs = block_align(&blocks, &stream(0.0, 10));
        assert_eq!(pairs.len(), 19);
        for p in &pairs {
            assert_eq!(p.audio.start_time, p.visual.start_time);
        }
    }

    #[test]
    fn disjoint_streams_give_nothing() {
        let clip = AudioClip::new(vec![0.0; 48_000], 16_000).unwrap();
        let blocks = stft_logmel(&clip).unwrap();
        assert!(block_align(&blocks, &stream(4.5, 3)).is_empty());
    }

    #[test]
    fn generated_scene_is_aligned() {
        let scene = generate_scene(&SceneSpec::random(7, 6.0)).unwrap();
        let blocks = stft_logmel(&scene.audio).unwrap();
        let pairs = block_align(&blocks, &scene.visual);
        assert_eq!(pairs.len(), blocks.len());
        for p in &pairs {
            assert_eq!((p.audio.start_time - p.visual.start_time).abs(), 0.0);
        }
    }
}
