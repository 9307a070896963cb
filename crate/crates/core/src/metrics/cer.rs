use crate::error::{Error, Result};

/// Character-level edit distance.
pub fn levenshtein(a: &str, b: &str) -> usize {
    strsim::levenshtein(a, b)
}

/// Total edits over total target characters, for `(decoded, target)` pairs.
pub fn cer<S: AsRef<str>, T: AsRef<str>>(pairs: &[(S, T)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Empty("CER pairs".into()));
    }
    let edits: usize = pairs
        .iter()
        .map(|(d, t)| levenshtein(d.as_ref(), t.as_ref()))
        .sum();
    let chars: usize = pairs.iter().map(|(_, t)| t.as_ref().chars().count()).sum();
    if chars == 0 {
        return Err(Error::InvalidArgument(
            "targets contain no characters".into(),
        ));
    }
    Ok(edits as f64 / chars as f64)
}

/// `|CER(generated) - CER(reference)|`.
pub fn delta_cer<S: AsRef<str>, T: AsRef<str>>(
    generated: &[(S, T)],
    reference: &[(S, T)],
) -> Result<f64> {
    Ok((cer(generated)? - cer(reference)?).abs())
}
