//! Log mel filterbank front end: 25 ms Hann windows every 10 ms, 20 bands.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::audio::dsp::hann;
use crate::audio::AudioClip;
use crate::error::{Error, Result};

pub const WINDOW_SECS: f64 = 0.025;
pub const HOP_SECS: f64 = 0.010;
pub const N_BANDS: usize = 20;
/// Energy floor applied before the logarithm.
pub const ENERGY_FLOOR: f64 = 1e-10;

pub type FeatureFrame = Vec<f32>;

/// Precomputed window, FFT plan and filterbank for one sample rate.
#[derive(Clone)]
pub struct FeatureExtractor {
    sample_rate: u32,
    window_len: usize,
    hop_len: usize,
    fft_len: usize,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    filters: Vec<Vec<(usize, f64)>>,
}

impl std::fmt::Debug for FeatureExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FeatureExtractor")
            .field("sample_rate", &self.sample_rate)
            .field("window_len", &self.window_len)
            .field("hop_len", &self.hop_len)
            .field("fft_len", &self.fft_len)
            .finish()
    }
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

impl FeatureExtractor {
    pub fn new(sample_rate: u32) -> Self {
        let sr = sample_rate as f64;
        let window_len = (WINDOW_SECS * sr).round() as usize;
        let hop_len = (HOP_SECS * sr).round() as usize;
        let fft_len = window_len.next_power_of_two();
        let bins = fft_len / 2 + 1;

        let mel_hi = hz_to_mel(sr / 2.0);
        let edges: Vec<f64> = (0..N_BANDS + 2)
            .map(|i| mel_to_hz(mel_hi * i as f64 / (N_BANDS + 1) as f64))
            .collect();
        let bin_hz = sr / fft_len as f64;
        let filters = (0..N_BANDS)
            .map(|b| {
                let (lo, mid, hi) = (edges[b], edges[b + 1], edges[b + 2]);
                (0..bins)
                    .filter_map(|k| {
                        let f = k as f64 * bin_hz;
                        let w = if f > lo && f <= mid {
                            (f - lo) / (mid - lo)
                        } else if f > mid && f < hi {
                            (hi - f) / (hi - mid)
                        } else {
                            0.0
                        };
                        (w > 0.0).then_some((k, w))
                    })
                    .collect()
            })
            .collect();

        FeatureExtractor {
            sample_rate,
            window_len,
            hop_len,
            fft_len,
            window: {
                let mut w = hann(window_len);
                w.resize(window_len, 0.0);
                w
            },
            fft: FftPlanner::new().plan_fft_forward(fft_len),
            filters,
        }
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn hop_len(&self) -> usize {
        self.hop_len
    }

    pub fn frame_count(&self, n_samples: usize) -> usize {
        if n_samples < self.window_len {
            0
        } else {
            (n_samples - self.window_len) / self.hop_len + 1
        }
    }

    pub fn extract(&self, clip: &AudioClip) -> Result<Vec<FeatureFrame>> {
        if clip.sample_rate != self.sample_rate {
            return Err(Error::Validation(format!(
                "clip sample rate {} differs from front end ({})",
                clip.sample_rate, self.sample_rate
            )));
        }
        let n = self.frame_count(clip.len());
        if n == 0 {
            return Err(Error::TooShort(format!(
                "{} samples is shorter than one {}-sample window",
                clip.len(),
                self.window_len
            )));
        }
        let mut buf = vec![Complex::new(0.0, 0.0); self.fft_len];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let mut power = vec![0.0; self.fft_len / 2 + 1];
        Ok((0..n)
            .map(|f| {
                let frame = &clip.samples[f * self.hop_len..f * self.hop_len + self.window_len];
                for (i, c) in buf.iter_mut().enumerate() {
                    let v = frame.get(i).map_or(0.0, |s| *s as f64 * self.window[i]);
                    *c = Complex::new(v, 0.0);
                }
                self.fft.process_with_scratch(&mut buf, &mut scratch);
                for (p, c) in power.iter_mut().zip(&buf) {
                    *p = c.norm_sqr();
                }
                self.filters
                    .iter()
                    .map(|band| {
                        let e: f64 = band.iter().map(|(k, w)| power[*k] * w).sum();
                        e.max(ENERGY_FLOOR).ln() as f32
                    })
                    .collect()
            })
            .collect())
    }
}

/// Log filterbank energies of `clip` at its own sample rate.
pub fn extract_features(clip: &AudioClip) -> Result<Vec<FeatureFrame>> {
    FeatureExtractor::new(clip.sample_rate).extract(clip)
}
