//! Word and character error rates.

use crate::error::{Error, Result};

/// Unit-cost Levenshtein distance over arbitrary tokens, two-row DP.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Word edits divided by the number of reference words.
pub fn wer(reference: &str, hypothesis: &str) -> Result<f64> {
    let r: Vec<&str> = reference.split_whitespace().collect();
    let h: Vec<&str> = hypothesis.split_whitespace().collect();
    if r.is_empty() {
        return Err(Error::EmptyReference);
    }
    Ok(edit_distance(&r, &h) as f64 / r.len() as f64)
}

/// Character edits divided by the number of reference characters.
pub fn cer(reference: &str, hypothesis: &str) -> Result<f64> {
    let r: Vec<char> = reference.chars().collect();
    let h: Vec<char> = hypothesis.chars().collect();
    if r.is_empty() {
        return Err(Error::EmptyReference);
    }
    Ok(edit_distance(&r, &h) as f64 / r.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_strings_have_zero_rate() {
        assert_eq!(wer("the cat sat", "the cat sat").unwrap(), 0.0);
        assert_eq!(cer("abc", "abc").unwrap(), 0.0);
    }

    #[test]
    fn empty_reference_is_an_error() {
        assert!(matches!(wer("  ", "x"), Err(Error::EmptyReference)));
        assert!(matches!(cer("", "x"), Err(Error::EmptyReference)));
    }

    #[test]
    fn worked_examples() {
        assert_eq!(wer("hello world", "hello word").unwrap(), 0.5);
        assert_eq!(wer("a b", "").unwrap(), 1.0);
        assert!((cer("abc", "axc").unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(cer("ab", "ba").unwrap(), 1.0);
    }

    #[test]
    fn insertions_can_push_rate_above_one() {
        assert_eq!(wer("a", "x y z").unwrap(), 3.0);
    }
}
