//! Signal-processing building blocks for the audio transforms.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Second-order IIR section in transposed direct form II.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    /// Butterworth (Q = 1/√2) low-pass at `cutoff` Hz.
    pub fn lowpass(sample_rate: f64, cutoff: f64) -> Self {
        let (cos_w, alpha) = Self::prewarp(sample_rate, cutoff);
        let a0 = 1.0 + alpha;
        Biquad {
            b0: (1.0 - cos_w) / 2.0 / a0,
            b1: (1.0 - cos_w) / a0,
            b2: (1.0 - cos_w) / 2.0 / a0,
            a1: -2.0 * cos_w / a0,
            a2: (1.0 - alpha) / a0,
        }
    }

    /// Butterworth (Q = 1/√2) high-pass at `cutoff` Hz.
    pub fn highpass(sample_rate: f64, cutoff: f64) -> Self {
        let (cos_w, alpha) = Self::prewarp(sample_rate, cutoff);
        let a0 = 1.0 + alpha;
        Biquad {
            b0: (1.0 + cos_w) / 2.0 / a0,
            b1: -(1.0 + cos_w) / a0,
            b2: (1.0 + cos_w) / 2.0 / a0,
            a1: -2.0 * cos_w / a0,
            a2: (1.0 - alpha) / a0,
        }
    }

    fn prewarp(sample_rate: f64, cutoff: f64) -> (f64, f64) {
        let w0 = 2.0 * PI * cutoff / sample_rate;
        let q = std::f64::consts::FRAC_1_SQRT_2;
        (w0.cos(), w0.sin() / (2.0 * q))
    }

    pub fn process(&self, input: &[f64]) -> Vec<f64> {
        let (mut z1, mut z2) = (0.0, 0.0);
        input
            .iter()
            .map(|&x| {
                let y = self.b0 * x + z1;
                z1 = self.b1 * x - self.a1 * y + z2;
                z2 = self.b2 * x - self.a2 * y;
                y
            })
            .collect()
    }

    /// |H(e^{jω})| at `freq` Hz.
    pub fn magnitude_at(&self, sample_rate: f64, freq: f64) -> f64 {
        let w = 2.0 * PI * freq / sample_rate;
        let z1 = Complex::from_polar(1.0, -w);
        let z2 = z1 * z1;
        let num = Complex::new(self.b0, 0.0) + z1 * self.b1 + z2 * self.b2;
        let den = Complex::new(1.0, 0.0) + z1 * self.a1 + z2 * self.a2;
        (num / den).norm()
    }
}

/// Linear-interpolation resampler producing exactly `out_len` samples that
/// span the whole input.
pub fn resample_to_len(input: &[f64], out_len: usize) -> Vec<f64> {
    if out_len == 0 || input.is_empty() {
        return Vec::new();
    }
    if input.len() == 1 || out_len == 1 {
        return vec![input[0]; out_len];
    }
    let step = (input.len() - 1) as f64 / (out_len - 1) as f64;
    (0..out_len)
        .map(|i| {
            let pos = i as f64 * step;
            let j = (pos.floor() as usize).min(input.len() - 2);
            let frac = pos - j as f64;
            input[j] * (1.0 - frac) + input[j + 1] * frac
        })
        .collect()
}

pub fn hann(n: usize) -> Vec<f64> {
    // periodic window, suited to overlap-add
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

const PV_FFT: usize = 512;
const PV_HOP: usize = 128;

/// Phase-vocoder time stretch. `rate > 1` shortens the signal; output
/// length is `round(len / rate)`.
pub fn time_stretch(input: &[f64], rate: f64) -> Vec<f64> {
    let out_len = ((input.len() as f64) / rate).round().max(1.0) as usize;
    if input.len() < PV_FFT {
        return resample_to_len(input, out_len);
    }
    let window = hann(PV_FFT);
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(PV_FFT);
    let ifft = planner.plan_fft_inverse(PV_FFT);

    // centered analysis frames over a zero-padded signal
    let pad = PV_FFT / 2;
    let mut padded = vec![0.0; pad];
    padded.extend_from_slice(input);
    padded.extend(std::iter::repeat_n(0.0, PV_FFT));
    let n_frames = input.len() / PV_HOP + 1;
    let bins = PV_FFT / 2 + 1;
    let frames: Vec<Vec<Complex<f64>>> = (0..n_frames)
        .map(|f| {
            let start = f * PV_HOP;
            let mut buf: Vec<Complex<f64>> = (0..PV_FFT)
                .map(|i| Complex::new(padded[start + i] * window[i], 0.0))
                .collect();
            fft.process(&mut buf);
            buf.truncate(bins);
            buf
        })
        .collect();

    let expected: Vec<f64> = (0..bins)
        .map(|k| 2.0 * PI * k as f64 * PV_HOP as f64 / PV_FFT as f64)
        .collect();
    let mut phase: Vec<f64> = frames[0].iter().map(|c| c.arg()).collect();
    let out_frames = ((n_frames as f64) / rate).ceil() as usize;
    let total = out_frames * PV_HOP + PV_FFT;
    let mut out = vec![0.0; total];
    let mut norm = vec![0.0; total];
    let mut t = 0.0f64;
    for of in 0..out_frames {
        let i = (t.floor() as usize).min(n_frames - 1);
        let j = (i + 1).min(n_frames - 1);
        let frac = t - t.floor();
        let mut spec: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); PV_FFT];
        for k in 0..bins {
            let mag = frames[i][k].norm() * (1.0 - frac) + frames[j][k].norm() * frac;
            spec[k] = Complex::from_polar(mag, phase[k]);
            let mut dphi = frames[j][k].arg() - frames[i][k].arg() - expected[k];
            dphi -= 2.0 * PI * (dphi / (2.0 * PI)).round();
            phase[k] += expected[k] + dphi;
        }
        for k in 1..PV_FFT / 2 {
            spec[PV_FFT - k] = spec[k].conj();
        }
        ifft.process(&mut spec);
        let start = of * PV_HOP;
        for n in 0..PV_FFT {
            out[start + n] += spec[n].re / PV_FFT as f64 * window[n];
            norm[start + n] += window[n] * window[n];
        }
        t += rate;
    }
    let mut y: Vec<f64> = out
        .iter()
        .zip(&norm)
        .skip(pad)
        .map(|(v, w)| if *w > 1e-8 { v / w } else { 0.0 })
        .collect();
    y.resize(out_len, 0.0);
    y
}

/// Shifts pitch by `semitones` while keeping the sample count unchanged.
pub fn pitch_shift(input: &[f64], semitones: f64) -> Vec<f64> {
    let ratio = 2f64.powf(semitones / 12.0);
    let stretched = time_stretch(input, 1.0 / ratio);
    resample_to_len(&stretched, input.len())
}

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

pub fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}
