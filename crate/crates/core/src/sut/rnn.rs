//! Single-layer Elman recurrence with greedy, duplicate-collapsing decoding.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::trace::{fmt_f32, ConcreteState};

pub const WEIGHTS_MAGIC: &str = "RNNW";
pub const BLANK: u32 = 0;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f32) {
        self.data[r * self.cols + c] = v;
    }

    fn mul_acc(&self, x: &[f32], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o += self
                .row(r)
                .iter()
                .zip(x)
                .map(|(w, v)| *w as f64 * *v as f64)
                .sum::<f64>();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyRnnWeights {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub vocab_size: usize,
    /// hidden x input
    pub w_xh: Matrix,
    /// hidden x hidden
    pub w_hh: Matrix,
    pub b_h: Vec<f32>,
    /// vocab x hidden
    pub w_hy: Matrix,
    pub b_y: Vec<f32>,
}

impl ToyRnnWeights {
    pub fn zeros(input_dim: usize, hidden_dim: usize, vocab_size: usize) -> Self {
        ToyRnnWeights {
            input_dim,
            hidden_dim,
            vocab_size,
            w_xh: Matrix::zeros(hidden_dim, input_dim),
            w_hh: Matrix::zeros(hidden_dim, hidden_dim),
            b_h: vec![0.0; hidden_dim],
            w_hy: Matrix::zeros(vocab_size, hidden_dim),
            b_y: vec![0.0; vocab_size],
        }
    }

    /// Seeded random weights for log filterbank inputs.
    ///
    /// Input weights are scaled for features in roughly `[-25, 10]` and the
    /// input bias is centred on a mid-range feature level, so speech moves
    /// the state around while silence drives it to a fixed corner. The
    /// recurrent matrix has spectral radius below one and the blank token
    /// gets a positive output bias.
    pub fn seeded(seed: u64, input_dim: usize, hidden_dim: usize, vocab_size: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = Self::zeros(input_dim, hidden_dim, vocab_size);
        let mut fill = |m: &mut Matrix, std: f64| {
            let normal = Normal::new(0.0, std).expect("positive std");
            m.data.iter_mut().for_each(|v| *v = normal.sample(&mut rng) as f32);
        };
        fill(&mut w.w_xh, 0.6 / (input_dim as f64).sqrt() / 4.0);
        fill(&mut w.w_hh, 0.9 / (hidden_dim as f64).sqrt());
        fill(&mut w.w_hy, 2.5 / (hidden_dim as f64).sqrt());
        const FEATURE_CENTRE: f32 = -2.0;
        for h in 0..hidden_dim {
            let row_sum: f32 = w.w_xh.row(h).iter().sum();
            w.b_h[h] = -row_sum * FEATURE_CENTRE;
        }
        if vocab_size > 0 {
            w.b_y[BLANK as usize] = 0.5;
        }
        w
    }

    pub fn validate(&self) -> Result<()> {
        let shapes = [
            ("W_xh", &self.w_xh, self.hidden_dim, self.input_dim),
            ("W_hh", &self.w_hh, self.hidden_dim, self.hidden_dim),
            ("W_hy", &self.w_hy, self.vocab_size, self.hidden_dim),
        ];
        for (name, m, r, c) in shapes {
            if m.rows != r || m.cols != c || m.data.len() != r * c {
                return Err(Error::Validation(format!("{name} must be {r}x{c}")));
            }
        }
        if self.b_h.len() != self.hidden_dim || self.b_y.len() != self.vocab_size {
            return Err(Error::Validation("bias length mismatch".into()));
        }
        if self.input_dim == 0 || self.hidden_dim == 0 || self.vocab_size == 0 {
            return Err(Error::Validation("dimensions must be positive".into()));
        }
        let finite = [&self.w_xh.data, &self.w_hh.data, &self.b_h, &self.w_hy.data, &self.b_y]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()));
        if !finite {
            return Err(Error::Validation("weights contain non-finite values".into()));
        }
        Ok(())
    }

    /// `s' = tanh(W_xh·x + W_hh·s + b_h)`, `logits = W_hy·s' + b_y`.
    pub fn step(&self, s: &ConcreteState, x: &[f32]) -> Result<(ConcreteState, Vec<f32>)> {
        if s.len() != self.hidden_dim || x.len() != self.input_dim {
            return Err(Error::Validation(format!(
                "step expects state {} / input {}, got {} / {}",
                self.hidden_dim,
                self.input_dim,
                s.len(),
                x.len()
            )));
        }
        let mut pre: Vec<f64> = self.b_h.iter().map(|b| *b as f64).collect();
        self.w_xh.mul_acc(x, &mut pre);
        self.w_hh.mul_acc(s.values(), &mut pre);
        let next: Vec<f32> = pre.iter().map(|v| v.tanh() as f32).collect();
        let mut logits: Vec<f64> = self.b_y.iter().map(|b| *b as f64).collect();
        self.w_hy.mul_acc(&next, &mut logits);
        Ok((ConcreteState(next), logits.into_iter().map(|v| v as f32).collect()))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{WEIGHTS_MAGIC} 1 {} {} {}",
            self.input_dim, self.hidden_dim, self.vocab_size
        )
        .unwrap();
        let mut row = |values: &[f32]| {
            for (i, v) in values.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                fmt_f32(&mut out, *v);
            }
            out.push('\n');
        };
        for m in [&self.w_xh, &self.w_hh] {
            (0..m.rows).for_each(|r| row(m.row(r)));
        }
        row(&self.b_h);
        (0..self.w_hy.rows).for_each(|r| row(self.w_hy.row(r)));
        row(&self.b_y);
        out
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines.next().ok_or_else(|| Error::parse(origin, 1, "missing header"))?;
        let fields: Vec<&str> = header.split(' ').collect();
        let dims: Vec<usize> = match fields.as_slice() {
            [magic, "1", rest @ ..] if *magic == WEIGHTS_MAGIC && rest.len() == 3 => rest
                .iter()
                .map(|v| {
                    v.parse()
                        .map_err(|_| Error::parse(origin, 1, format!("bad dimension {v:?}")))
                })
                .collect::<Result<_>>()?,
            _ => {
                return Err(Error::parse(
                    origin,
                    1,
                    "expected `RNNW 1 <input_dim> <hidden_dim> <vocab_size>`",
                ))
            }
        };
        let mut w = ToyRnnWeights::zeros(dims[0], dims[1], dims[2]);
        let mut next_row = |expected: usize| -> Result<Vec<f32>> {
            let (no, line) = lines
                .next()
                .ok_or_else(|| Error::parse(origin, 0, "unexpected end of weights file"))?;
            let vals: Vec<f32> = line
                .split_ascii_whitespace()
                .map(|v| match v.parse::<f32>() {
                    Ok(x) if x.is_finite() => Ok(x),
                    _ => Err(Error::parse(origin, no, format!("bad number {v:?}"))),
                })
                .collect::<Result<_>>()?;
            if vals.len() != expected {
                return Err(Error::parse(
                    origin,
                    no,
                    format!("{} values, expected {expected}", vals.len()),
                ));
            }
            Ok(vals)
        };
        for m in [&mut w.w_xh, &mut w.w_hh] {
            let cols = m.cols;
            m.data = (0..m.rows)
                .map(|_| next_row(cols))
                .collect::<Result<Vec<_>>>()?
                .concat();
        }
        w.b_h = next_row(w.hidden_dim)?;
        let cols = w.w_hy.cols;
        w.w_hy.data = (0..w.w_hy.rows)
            .map(|_| next_row(cols))
            .collect::<Result<Vec<_>>>()?
            .concat();
        w.b_y = next_row(w.vocab_size)?;
        w.validate()?;
        Ok(w)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }
}

/// Free-function form of [`ToyRnnWeights::step`].
pub fn rnn_step(w: &ToyRnnWeights, s: &ConcreteState, x: &[f32]) -> Result<(ConcreteState, Vec<f32>)> {
    w.step(s, x)
}

/// Index of the largest logit; the first one wins ties.
pub fn argmax(logits: &[f32]) -> u32 {
    let mut best = 0;
    for (i, v) in logits.iter().enumerate() {
        if *v > logits[best] {
            best = i;
        }
    }
    best as u32
}

/// Collapses runs of equal tokens and drops blanks.
pub fn greedy_collapse(tokens: &[u32]) -> Vec<u32> {
    let mut out = Vec::new();
    let mut prev = None;
    for &t in tokens {
        if Some(t) != prev && t != BLANK {
            out.push(t);
        }
        prev = Some(t);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_zero_state_and_logits() {
        let w = ToyRnnWeights::zeros(3, 2, 4);
        let (s, logits) = w.step(&ConcreteState::zeros(2), &[1.0, -2.0, 3.0]).unwrap();
        assert!(s.is_zero());
        assert!(logits.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_unit_tanh() {
        let mut w = ToyRnnWeights::zeros(3, 1, 2);
        w.w_xh.set(0, 0, 1.0);
        let (s, _) = w.step(&ConcreteState::zeros(1), &[0.5, 9.0, -9.0]).unwrap();
        assert!((s.values()[0] - 0.462_117).abs() < 1e-6);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let w = ToyRnnWeights::zeros(3, 2, 4);
        assert!(w.step(&ConcreteState::zeros(3), &[0.0; 3]).is_err());
        assert!(w.step(&ConcreteState::zeros(2), &[0.0; 2]).is_err());
    }

    #[test]
    fn collapse_removes_repeats_and_blanks() {
        assert_eq!(greedy_collapse(&[0, 3, 3, 0, 3, 5, 5, 0]), vec![3, 3, 5]);
        assert!(greedy_collapse(&[0, 0, 0]).is_empty());
        assert_eq!(argmax(&[0.0, 0.0, 0.0]), 0);
    }

    #[test]
    fn weights_text_round_trip() {
        let w = ToyRnnWeights::seeded(7, 5, 4, 6);
        let back = ToyRnnWeights::parse(&w.render(), "mem").unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn truncated_weights_file_is_rejected() {
        let w = ToyRnnWeights::seeded(7, 5, 4, 6);
        let text = w.render();
        let cut: String = text.lines().take(6).map(|l| format!("{l}\n")).collect();
        assert!(ToyRnnWeights::parse(&cut, "mem").is_err());
    }
}
