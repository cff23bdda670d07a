//! Audio clips, canonical WAV I/O and the metamorphic transforms.

pub mod dsp;
pub mod transform;
pub mod wav;

pub use transform::{
    apply_transform, pick_transform, replay_step, AppliedTransform, Category, MutationRecord, Transform, TransformKind,
};
pub use wav::{load_wav, save_wav};

use crate::error::{Error, Result};

pub const CANONICAL_SAMPLE_RATE: u32 = 16_000;

/// Mono PCM audio normalized to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Validation("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::Validation("clip has no samples".into()));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite() || v.abs() > 1.0) {
            return Err(Error::Validation(format!(
                "sample {i} = {} is outside [-1, 1]",
                samples[i]
            )));
        }
        Ok(AudioClip { samples, sample_rate })
    }

    /// Builds a clip from processed samples, clipping to `[-1, 1]`.
    pub fn from_f64(samples: &[f64], sample_rate: u32) -> Self {
        AudioClip {
            samples: samples.iter().map(|v| v.clamp(-1.0, 1.0) as f32).collect(),
            sample_rate,
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.samples.iter().map(|v| *v as f64).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}
