//! The eight audio transformations, their categories and the lineage
//! constraint that limits how they may be stacked.
//!
//! A mutant may have its volume, speed and clearness altered at most once
//! each: at most one transform from each of VRT, SRT and CRT appears in its
//! history. UAT transforms are unrestricted apart from the overall history
//! cap.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::dsp::{self, Biquad};
use super::AudioClip;
use crate::error::{Error, Result};

pub const GAIN_RANGE: (f64, f64) = (0.7, 1.3);
pub const SEMITONE_RANGE: (f64, f64) = (-2.0, 2.0);
pub const SPEED_RANGE: (f64, f64) = (0.9, 1.1);
pub const SNR_DB_RANGE: (f64, f64) = (25.0, 40.0);
pub const LOWPASS_HZ_RANGE: (f64, f64) = (2000.0, 7000.0);
pub const HIGHPASS_HZ_RANGE: (f64, f64) = (100.0, 400.0);
pub const DRC_THRESHOLD_DB: f64 = -20.0;
pub const DRC_RATIO: f64 = 4.0;
pub const TRIM_THRESHOLD_DB: f64 = -40.0;
pub const DEFAULT_MAX_HISTORY: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    /// volume
    Vrt,
    /// speed
    Srt,
    /// clearness
    Crt,
    /// unaffected
    Uat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TransformKind {
    AddWhiteNoise,
    PitchShift,
    Trim,
    ChangeSpeed,
    ChangeVolume,
    Drc,
    LowPassFilter,
    HighPassFilter,
}

impl TransformKind {
    pub const ALL: [TransformKind; 8] = [
        TransformKind::AddWhiteNoise,
        TransformKind::PitchShift,
        TransformKind::Trim,
        TransformKind::ChangeSpeed,
        TransformKind::ChangeVolume,
        TransformKind::Drc,
        TransformKind::LowPassFilter,
        TransformKind::HighPassFilter,
    ];

    pub fn category(self) -> Category {
        use TransformKind::*;
        match self {
            ChangeVolume | LowPassFilter | HighPassFilter => Category::Vrt,
            PitchShift | ChangeSpeed => Category::Srt,
            AddWhiteNoise => Category::Crt,
            Drc | Trim => Category::Uat,
        }
    }

    pub fn name(self) -> &'static str {
        use TransformKind::*;
        match self {
            AddWhiteNoise => "addwhitenoise",
            PitchShift => "pitchshift",
            Trim => "trim",
            ChangeSpeed => "changespeed",
            ChangeVolume => "changevolume",
            Drc => "drc",
            LowPassFilter => "lowpassfilter",
            HighPassFilter => "highpassfilter",
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted: String = s.chars().filter(|c| *c != '_' && *c != '-').collect();
        TransformKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(&wanted))
            .ok_or_else(|| Error::Config(format!("unknown transform {s:?}")))
    }
}

/// A transform together with concrete parameter values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    AddWhiteNoise { snr_db: f64 },
    PitchShift { semitones: f64 },
    Trim { threshold_db: f64 },
    ChangeSpeed { factor: f64 },
    ChangeVolume { gain: f64 },
    Drc { threshold_db: f64, ratio: f64 },
    LowPassFilter { cutoff_hz: f64 },
    HighPassFilter { cutoff_hz: f64 },
}

impl Transform {
    pub fn kind(&self) -> TransformKind {
        match self {
            Transform::AddWhiteNoise { .. } => TransformKind::AddWhiteNoise,
            Transform::PitchShift { .. } => TransformKind::PitchShift,
            Transform::Trim { .. } => TransformKind::Trim,
            Transform::ChangeSpeed { .. } => TransformKind::ChangeSpeed,
            Transform::ChangeVolume { .. } => TransformKind::ChangeVolume,
            Transform::Drc { .. } => TransformKind::Drc,
            Transform::LowPassFilter { .. } => TransformKind::LowPassFilter,
            Transform::HighPassFilter { .. } => TransformKind::HighPassFilter,
        }
    }

    /// Draws parameters for `kind` from the configured ranges.
    pub fn sample<R: Rng + ?Sized>(kind: TransformKind, rng: &mut R) -> Transform {
        let mut draw = |(lo, hi): (f64, f64)| rng.random_range(lo..=hi);
        match kind {
            TransformKind::AddWhiteNoise => Transform::AddWhiteNoise {
                snr_db: draw(SNR_DB_RANGE),
            },
            TransformKind::PitchShift => Transform::PitchShift {
                semitones: draw(SEMITONE_RANGE),
            },
            TransformKind::Trim => Transform::Trim {
                threshold_db: TRIM_THRESHOLD_DB,
            },
            TransformKind::ChangeSpeed => Transform::ChangeSpeed {
                factor: draw(SPEED_RANGE),
            },
            TransformKind::ChangeVolume => Transform::ChangeVolume { gain: draw(GAIN_RANGE) },
            TransformKind::Drc => Transform::Drc {
                threshold_db: DRC_THRESHOLD_DB,
                ratio: DRC_RATIO,
            },
            TransformKind::LowPassFilter => Transform::LowPassFilter {
                cutoff_hz: draw(LOWPASS_HZ_RANGE),
            },
            TransformKind::HighPassFilter => Transform::HighPassFilter {
                cutoff_hz: draw(HIGHPASS_HZ_RANGE),
            },
        }
    }

    /// Applies the transform. Only white noise consumes `rng`.
    pub fn apply<R: Rng + ?Sized>(&self, clip: &AudioClip, rng: &mut R) -> Result<AudioClip> {
        let x = clip.to_f64();
        let sr = clip.sample_rate as f64;
        let y: Vec<f64> = match *self {
            Transform::AddWhiteNoise { snr_db } => {
                let power = (dsp::rms(&x).powi(2)).max(1e-12);
                let sigma = (power / 10f64.powf(snr_db / 10.0)).sqrt();
                let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
                x.iter().map(|v| v + normal.sample(rng)).collect()
            }
            Transform::PitchShift { semitones } => dsp::pitch_shift(&x, semitones),
            Transform::Trim { threshold_db } => {
                let thr = dsp::db_to_amplitude(threshold_db);
                let first = x.iter().position(|v| v.abs() > thr).ok_or(Error::FullyTrimmed)?;
                let last = x.iter().rposition(|v| v.abs() > thr).expect("non-empty");
                return Ok(AudioClip {
                    samples: clip.samples[first..=last].to_vec(),
                    sample_rate: clip.sample_rate,
                });
            }
            Transform::ChangeSpeed { factor } => {
                if factor.is_nan() || factor <= 0.0 {
                    return Err(Error::Config(format!("speed factor {factor} must be positive")));
                }
                let out_len = (x.len() as f64 / factor).round() as usize;
                if out_len < 1 {
                    return Err(Error::TooShort(format!(
                        "speed factor {factor} leaves no samples from {}",
                        x.len()
                    )));
                }
                dsp::resample_to_len(&x, out_len)
            }
            Transform::ChangeVolume { gain } => x.iter().map(|v| v * gain).collect(),
            Transform::Drc { threshold_db, ratio } => {
                let thr = dsp::db_to_amplitude(threshold_db);
                x.iter()
                    .map(|v| {
                        let a = v.abs();
                        if a > thr {
                            v.signum() * (thr + (a - thr) / ratio)
                        } else {
                            *v
                        }
                    })
                    .collect()
            }
            Transform::LowPassFilter { cutoff_hz } => Biquad::lowpass(sr, cutoff_hz).process(&x),
            Transform::HighPassFilter { cutoff_hz } => Biquad::highpass(sr, cutoff_hz).process(&x),
        };
        Ok(AudioClip::from_f64(&y, clip.sample_rate))
    }
}

/// One lineage step: what was applied, with which parameters, under which
/// rng seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppliedTransform {
    pub transform: Transform,
    pub rng_seed: u64,
}

impl AppliedTransform {
    pub fn kind(&self) -> TransformKind {
        self.transform.kind()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationRecord {
    pub seed_id: String,
    pub history: Vec<AppliedTransform>,
}

impl MutationRecord {
    pub fn new(seed_id: impl Into<String>) -> Self {
        MutationRecord {
            seed_id: seed_id.into(),
            history: Vec::new(),
        }
    }

    pub fn kinds(&self) -> impl Iterator<Item = TransformKind> + '_ {
        self.history.iter().map(AppliedTransform::kind)
    }

    pub fn has_category(&self, c: Category) -> bool {
        self.kinds().any(|k| k.category() == c)
    }

    /// At most one VRT, one SRT and one CRT transform in the history.
    pub fn satisfies_constraint(&self) -> bool {
        [Category::Vrt, Category::Srt, Category::Crt]
            .into_iter()
            .all(|c| self.kinds().filter(|k| k.category() == c).count() <= 1)
    }

    pub fn admissible(&self) -> Vec<TransformKind> {
        TransformKind::ALL
            .into_iter()
            .filter(|k| k.category() == Category::Uat || !self.has_category(k.category()))
            .collect()
    }

    /// Appends a step, refusing it if the lineage constraint would break.
    pub fn push(&mut self, step: AppliedTransform) -> Result<()> {
        let kind = step.kind();
        if kind.category() != Category::Uat && self.has_category(kind.category()) {
            return Err(Error::Validation(format!(
                "{kind} would apply a second {:?} transform to {}",
                kind.category(),
                self.seed_id
            )));
        }
        self.history.push(step);
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: MutationRecord = serde_json::from_str(text)?;
        if !rec.satisfies_constraint() {
            return Err(Error::Validation(format!(
                "mutation record for {} violates the category constraint",
                rec.seed_id
            )));
        }
        Ok(rec)
    }
}

/// Picks uniformly among the kinds the lineage still admits, or `None`
/// once the history has reached `max_history` entries.
pub fn pick_transform<R: Rng + ?Sized>(rec: &MutationRecord, rng: &mut R, max_history: usize) -> Option<TransformKind> {
    if rec.history.len() >= max_history {
        return None;
    }
    let admissible = rec.admissible();
    if admissible.is_empty() {
        return None;
    }
    Some(admissible[rng.random_range(0..admissible.len())])
}

/// Samples parameters for `kind` and applies it using a generator seeded
/// with `rng_seed`, so the step can be replayed from the record alone.
pub fn apply_transform(clip: &AudioClip, kind: TransformKind, rng_seed: u64) -> Result<(AudioClip, AppliedTransform)> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let transform = Transform::sample(kind, &mut rng);
    let out = transform.apply(clip, &mut rng)?;
    Ok((out, AppliedTransform { transform, rng_seed }))
}

/// Re-runs a recorded step.
pub fn replay_step(clip: &AudioClip, step: &AppliedTransform) -> Result<AudioClip> {
    let (out, applied) = apply_transform(clip, step.kind(), step.rng_seed)?;
    debug_assert_eq!(&applied, step);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip(samples: &[f32]) -> AudioClip {
        AudioClip::new(samples.to_vec(), 16000).unwrap()
    }

    fn record(kinds: &[TransformKind]) -> MutationRecord {
        let mut r = MutationRecord::new("s");
        for k in kinds {
            r.history.push(AppliedTransform {
                transform: Transform::sample(*k, &mut ChaCha8Rng::seed_from_u64(0)),
                rng_seed: 0,
            });
        }
        r
    }

    #[test]
    fn category_table() {
        use TransformKind::*;
        let vrt: Vec<_> = TransformKind::ALL
            .into_iter()
            .filter(|k| k.category() == Category::Vrt)
            .collect();
        assert_eq!(vrt, vec![ChangeVolume, LowPassFilter, HighPassFilter]);
        assert_eq!(PitchShift.category(), Category::Srt);
        assert_eq!(ChangeSpeed.category(), Category::Srt);
        assert_eq!(AddWhiteNoise.category(), Category::Crt);
        assert_eq!(Drc.category(), Category::Uat);
        assert_eq!(Trim.category(), Category::Uat);
    }

    #[test]
    fn empty_history_admits_everything() {
        assert_eq!(MutationRecord::new("a").admissible(), TransformKind::ALL.to_vec());
    }

    #[test]
    fn volume_change_excludes_filters() {
        let r = record(&[TransformKind::ChangeVolume]);
        let adm = r.admissible();
        assert!(!adm.contains(&TransformKind::LowPassFilter));
        assert!(!adm.contains(&TransformKind::HighPassFilter));
        assert!(adm.contains(&TransformKind::PitchShift));
        assert!(adm.contains(&TransformKind::Trim));
    }

    #[test]
    fn history_cap_yields_none() {
        let r = record(&[TransformKind::Trim, TransformKind::Drc]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(pick_transform(&r, &mut rng, 2).is_none());
        assert!(pick_transform(&r, &mut rng, 3).is_some());
    }

    #[test]
    fn push_refuses_second_member_of_category() {
        let mut r = record(&[TransformKind::PitchShift]);
        let step = AppliedTransform {
            transform: Transform::ChangeSpeed { factor: 1.05 },
            rng_seed: 3,
        };
        assert!(r.push(step).is_err());
    }

    #[test]
    fn volume_is_scalar_multiply() {
        let out = Transform::ChangeVolume { gain: 2.0 }
            .apply(&clip(&[0.1, -0.2]), &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        assert_eq!(out.samples, vec![0.2, -0.4]);
        let out = Transform::ChangeVolume { gain: 3.0 }
            .apply(&clip(&[0.5, -0.9]), &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        assert_eq!(out.samples, vec![1.0, -1.0]);
    }

    #[test]
    fn speed_factor_two_halves_length() {
        let x: Vec<f32> = (0..16000).map(|i| (i as f32 * 0.01).sin() * 0.5).collect();
        let out = Transform::ChangeSpeed { factor: 2.0 }
            .apply(&clip(&x), &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        assert!((out.len() as i64 - 8000).abs() <= 1);
        let err = Transform::ChangeSpeed { factor: 3.0 }
            .apply(&clip(&[0.1]), &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap_err();
        assert!(matches!(err, Error::TooShort(_)));
    }

    #[test]
    fn trim_keeps_interior_untouched() {
        let x = [0.0, 0.001, 0.2, 0.0, -0.3, 0.005, 0.0];
        let out = Transform::Trim { threshold_db: -40.0 }
            .apply(&clip(&x), &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        assert_eq!(out.samples, vec![0.2, 0.0, -0.3]);
        let silent =
            Transform::Trim { threshold_db: -40.0 }.apply(&clip(&[0.0; 32]), &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(silent, Err(Error::FullyTrimmed)));
    }

    #[test]
    fn drc_compresses_above_threshold_only() {
        let out = Transform::Drc {
            threshold_db: -20.0,
            ratio: 4.0,
        }
        .apply(&clip(&[0.05, 0.5, -0.9]), &mut ChaCha8Rng::seed_from_u64(0))
        .unwrap();
        assert_eq!(out.samples[0], 0.05);
        assert!((out.samples[1] - 0.2).abs() < 1e-6);
        assert!((out.samples[2] + 0.3).abs() < 1e-6);
    }

    #[test]
    fn highpass_removes_dc() {
        let x = vec![0.5f32; 16000];
        let out = Transform::HighPassFilter { cutoff_hz: 100.0 }
            .apply(&clip(&x), &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        let settled: Vec<f64> = out.samples[8000..].iter().map(|v| *v as f64).collect();
        assert!(dsp::rms(&settled) < 0.01 * 0.5);
    }

    #[test]
    fn kind_names_parse() {
        for k in TransformKind::ALL {
            assert_eq!(k.name().parse::<TransformKind>().unwrap(), k);
        }
        assert_eq!(
            "change_speed".parse::<TransformKind>().unwrap(),
            TransformKind::ChangeSpeed
        );
    }

    #[test]
    fn record_json_round_trip_and_gate() {
        let r = record(&[
            TransformKind::ChangeVolume,
            TransformKind::Trim,
            TransformKind::AddWhiteNoise,
        ]);
        assert_eq!(MutationRecord::from_json(&r.to_json()).unwrap(), r);
        let bad = record(&[TransformKind::ChangeVolume, TransformKind::LowPassFilter]);
        assert!(MutationRecord::from_json(&bad.to_json()).is_err());
    }
}
