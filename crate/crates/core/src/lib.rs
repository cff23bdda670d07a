//! Coverage-guided metamorphic testing for stateful recurrent models.
//!
//! Hidden-state traces are abstracted into a grid-quantized Markov decision
//! process ([`mdp`]), test inputs are scored against it by five coverage
//! criteria ([`coverage`]), and a mutation-based fuzz loop ([`fuzz`])
//! drives audio transforms ([`audio`]) through a speech model ([`sut`]) in
//! search of transcription failures.

pub mod abstraction;
pub mod audio;
pub mod coverage;
pub mod error;
pub mod fuzz;
pub mod mdp;
pub mod sut;
pub mod synth;
pub mod trace;

pub use error::{Error, Result};

use sut::Sut;
use trace::TraceSet;

/// Transcribes every clip and collects the resulting traces.
pub fn profile_corpus<S: Sut + ?Sized>(sut: &S, clips: &[(String, audio::AudioClip)]) -> Result<TraceSet> {
    let mut ts = TraceSet::new(sut.state_dim(), sut.input_dim())?;
    for (id, clip) in clips {
        ts.push(sut.transcribe(id, clip)?.trace)?;
    }
    Ok(ts)
}
