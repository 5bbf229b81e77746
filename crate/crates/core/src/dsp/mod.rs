//! Audio front-end: 16 kHz mono WAV input, log mel-bank energies framed into
//! one-second blocks, and alignment of those blocks with the visual stream.

mod align;
mod logmel;
mod wav;

pub use align::{block_align, AlignedBlock};
pub use logmel::{hz_to_mel, mel_to_hz, stft_logmel, LogMelBlock, LogMelExtractor, MelFilterbank};
pub use wav::{quantize_sample, read_wav, write_wav, AudioClip};

pub const SAMPLE_RATE: u32 = 16_000;
/// 44 ms Hamming window.
pub const WINDOW: usize = 704;
/// 50% overlap.
pub const HOP: usize = 352;
pub const N_FFT: usize = 1024;
pub const N_MELS: usize = 64;
pub const F_MAX: f64 = 8000.0;
/// Floor applied to mel energies before the logarithm.
pub const MEL_FLOOR: f64 = 1e-10;
pub const BLOCK_SECONDS: f64 = 1.0;
pub const BLOCK_HOP_SECONDS: f64 = 0.5;
/// STFT frames per one-second block: `(16000 - 704) / 352 + 1`.
pub const FRAMES_PER_BLOCK: usize = 44;
