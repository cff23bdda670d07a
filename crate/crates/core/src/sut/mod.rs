//! The system under test: audio in, transcript and hidden-state trace out.

pub mod features;
pub mod metrics;
pub mod rnn;

use std::fs;
use std::path::Path;

pub use features::{extract_features, FeatureExtractor, FeatureFrame};
pub use metrics::{cer, edit_distance, wer};
pub use rnn::{argmax, greedy_collapse, rnn_step, ToyRnnWeights, BLANK};

use crate::audio::AudioClip;
use crate::error::{Error, Result};
use crate::trace::{ConcreteState, Trace, TraceStep};

/// Token symbols, index 0 being the blank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    symbols: Vec<String>,
}

/// Symbol rendered as a single space in transcripts.
pub const SPACE_SYMBOL: &str = "<space>";

impl Vocabulary {
    pub fn new(symbols: Vec<String>) -> Result<Self> {
        if symbols.len() < 2 {
            return Err(Error::Validation(
                "vocabulary needs a blank and at least one symbol".into(),
            ));
        }
        Ok(Vocabulary { symbols })
    }

    /// Blank, space, `a`-`z` and apostrophe.
    pub fn english() -> Self {
        let mut symbols = vec!["<blank>".to_string(), SPACE_SYMBOL.to_string()];
        symbols.extend(('a'..='z').map(String::from));
        symbols.push("'".into());
        Vocabulary { symbols }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn decode(&self, tokens: &[u32]) -> String {
        let text: String = tokens
            .iter()
            .filter(|t| **t != BLANK)
            .map(|t| match self.symbols.get(*t as usize).map(String::as_str) {
                Some(SPACE_SYMBOL) => " ",
                Some(s) => s,
                None => "?",
            })
            .collect();
        text.split_whitespace().collect::<Vec<_>>().join(" ")
    }

    pub fn render(&self) -> String {
        self.symbols.iter().map(|s| format!("{s}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        Vocabulary::new(text.lines().map(str::to_string).collect())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcription {
    pub text: String,
    pub trace: Trace,
}

/// Anything that turns audio into a transcript plus a trace of its hidden
/// states. Implementations must be deterministic per clip.
pub trait Sut {
    fn transcribe(&self, id: &str, clip: &AudioClip) -> Result<Transcription>;

    fn state_dim(&self) -> usize;

    fn input_dim(&self) -> usize;
}

/// Built-in recurrent transcriber over log filterbank features.
#[derive(Debug, Clone)]
pub struct ToyTranscriber {
    pub weights: ToyRnnWeights,
    pub vocab: Vocabulary,
    front_end: FeatureExtractor,
}

impl ToyTranscriber {
    pub fn new(weights: ToyRnnWeights, vocab: Vocabulary) -> Result<Self> {
        weights.validate()?;
        if weights.vocab_size != vocab.len() {
            return Err(Error::Validation(format!(
                "weights emit {} tokens but the vocabulary has {}",
                weights.vocab_size,
                vocab.len()
            )));
        }
        if weights.input_dim != features::N_BANDS {
            return Err(Error::Validation(format!(
                "weights expect {} inputs, front end produces {}",
                weights.input_dim,
                features::N_BANDS
            )));
        }
        Ok(ToyTranscriber {
            weights,
            vocab,
            front_end: FeatureExtractor::new(crate::audio::CANONICAL_SAMPLE_RATE),
        })
    }

    pub fn load(weights: impl AsRef<Path>, vocab: impl AsRef<Path>) -> Result<Self> {
        Self::new(ToyRnnWeights::load(weights)?, Vocabulary::load(vocab)?)
    }

    /// Runs the recurrence over every frame from the zero state.
    pub fn run(&self, id: &str, clip: &AudioClip) -> Result<(Vec<u32>, Trace)> {
        let frames = self.front_end.extract(clip)?;
        let mut state = ConcreteState::zeros(self.weights.hidden_dim);
        let mut steps = Vec::with_capacity(frames.len());
        let mut tokens = Vec::with_capacity(frames.len());
        for x in frames {
            let (next, logits) = self.weights.step(&state, &x)?;
            debug_assert!(next.values().iter().all(|v| v.abs() <= 1.0));
            let y = argmax(&logits);
            tokens.push(y);
            steps.push(TraceStep {
                state,
                input: x,
                output: y,
            });
            state = next;
        }
        Ok((tokens, Trace::new(id, steps, state)?))
    }
}

impl Sut for ToyTranscriber {
    fn transcribe(&self, id: &str, clip: &AudioClip) -> Result<Transcription> {
        let (tokens, trace) = self.run(id, clip)?;
        Ok(Transcription {
            text: self.vocab.decode(&greedy_collapse(&tokens)),
            trace,
        })
    }

    fn state_dim(&self) -> usize {
        self.weights.hidden_dim
    }

    fn input_dim(&self) -> usize {
        self.weights.input_dim
    }
}

/// Free-function form of [`Sut::transcribe`] for the toy model.
pub fn transcribe(weights: &ToyRnnWeights, vocab: &Vocabulary, id: &str, clip: &AudioClip) -> Result<Transcription> {
    ToyTranscriber::new(weights.clone(), vocab.clone())?.transcribe(id, clip)
}
