//! Seeded speech-like audio for demos and campaign tests.
//!
//! Each utterance is a short run of voiced segments: a harmonic series on a
//! drifting fundamental, shaped by two formant resonances, with attack and
//! release ramps, separated by short pauses and padded with silence.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::{AudioClip, CANONICAL_SAMPLE_RATE};
use crate::sut::{ToyRnnWeights, Vocabulary};

/// Seed used for the committed toy weights fixture.
pub const FIXTURE_WEIGHTS_SEED: u64 = 0x5EED_0001;
pub const FIXTURE_HIDDEN_DIM: usize = 16;

pub fn fixture_weights() -> ToyRnnWeights {
    ToyRnnWeights::seeded(
        FIXTURE_WEIGHTS_SEED,
        crate::sut::features::N_BANDS,
        FIXTURE_HIDDEN_DIM,
        Vocabulary::english().len(),
    )
}

fn formant_gain(freq: f64, formants: &[(f64, f64)]) -> f64 {
    formants
        .iter()
        .map(|(centre, bw)| 1.0 / (1.0 + ((freq - centre) / bw).powi(2)))
        .sum::<f64>()
        + 0.02
}

/// One utterance of roughly `secs` seconds.
pub fn utterance(seed: u64, secs: f64) -> AudioClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sr = CANONICAL_SAMPLE_RATE as f64;
    let total = (secs * sr) as usize;
    let mut out = vec![0.0f64; total];
    let lead = (rng.random_range(0.06..0.15) * sr) as usize;
    let tail = (rng.random_range(0.06..0.15) * sr) as usize;
    let mut pos = lead;
    let f0_base = rng.random_range(95.0..230.0);
    while pos + (0.06 * sr) as usize + tail < total {
        let len = ((rng.random_range(0.07..0.22) * sr) as usize).min(total - tail - pos);
        let f0_start = f0_base * rng.random_range(0.85..1.15);
        let f0_end = f0_base * rng.random_range(0.85..1.15);
        let formants = [
            (rng.random_range(300.0..900.0), rng.random_range(60.0..140.0)),
            (rng.random_range(900.0..2600.0), rng.random_range(90.0..220.0)),
        ];
        let amp = rng.random_range(0.15..0.45);
        let fricative = rng.random_bool(0.25);
        let ramp = (0.015 * sr) as usize;
        let mut phase = 0.0f64;
        for i in 0..len {
            let t = i as f64 / len as f64;
            let f0 = f0_start + (f0_end - f0_start) * t;
            phase += 2.0 * PI * f0 / sr;
            let env = (i.min(len - 1 - i) as f64 / ramp as f64).min(1.0);
            let mut v = 0.0;
            let mut h = 1;
            while (h as f64) * f0 < sr / 2.0 - 200.0 && h <= 40 {
                v += formant_gain(h as f64 * f0, &formants) * (h as f64 * phase).sin() / (h as f64).sqrt();
                h += 1;
            }
            if fricative {
                v = 0.3 * v + rng.random_range(-1.0..1.0) * 0.8;
            }
            out[pos + i] += amp * env * v * 0.5;
        }
        pos += len + (rng.random_range(0.0..0.08) * sr) as usize;
    }
    let peak = out.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if peak > 0.9 {
        out.iter_mut().for_each(|v| *v *= 0.9 / peak);
    }
    AudioClip::from_f64(&out, CANONICAL_SAMPLE_RATE)
}

/// `count` utterances with ids `<prefix>-NNN`.
pub fn corpus(prefix: &str, base_seed: u64, count: usize, secs: f64) -> Vec<(String, AudioClip)> {
    (0..count)
        .map(|i| {
            (
                format!("{prefix}-{i:03}"),
                utterance(base_seed.wrapping_mul(1_000_003).wrapping_add(i as u64), secs),
            )
        })
        .collect()
}
