use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maps characters to token ids, reserving one id for the CTC blank.
///
/// Symbols occupy the ids `0..=symbols.len()` in order, skipping
/// `blank_index`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TokenizerRepr", into = "TokenizerRepr")]
pub struct CharsetTokenizer {
    symbols: Vec<char>,
    blank_index: u32,
    lookup: HashMap<char, u32>,
}

#[derive(Serialize, Deserialize)]
struct TokenizerRepr {
    symbols: String,
    blank_index: u32,
}

impl TryFrom<TokenizerRepr> for CharsetTokenizer {
    type Error = Error;
    fn try_from(r: TokenizerRepr) -> Result<Self> {
        Self::new(r.symbols.chars().collect(), r.blank_index)
    }
}

impl From<CharsetTokenizer> for TokenizerRepr {
    fn from(t: CharsetTokenizer) -> Self {
        Self {
            symbols: t.symbols.iter().collect(),
            blank_index: t.blank_index,
        }
    }
}

impl Default for CharsetTokenizer {
    fn default() -> Self {
        Self::ascii()
    }
}

impl CharsetTokenizer {
    pub fn new(symbols: Vec<char>, blank_index: u32) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::Empty("character set".into()));
        }
        if blank_index as usize > symbols.len() {
            return Err(Error::OutOfRange {
                index: blank_index as usize,
                limit: symbols.len() + 1,
            });
        }
        let mut lookup = HashMap::with_capacity(symbols.len());
        for (i, &ch) in symbols.iter().enumerate() {
            let id = if (i as u32) < blank_index {
                i as u32
            } else {
                i as u32 + 1
            };
            if lookup.insert(ch, id).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate symbol {ch:?}")));
            }
        }
        Ok(Self {
            symbols,
            blank_index,
            lookup,
        })
    }

    /// The 95 printable ASCII characters (space through `~`), blank at 0.
    pub fn ascii() -> Self {
        Self::new((0x20u8..=0x7E).map(char::from).collect(), 0).expect("ascii charset is valid")
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn blank_index(&self) -> u32 {
        self.blank_index
    }

    /// Number of classes including the blank.
    pub fn num_classes(&self) -> usize {
        self.symbols.len() + 1
    }

    pub fn contains(&self, ch: char) -> bool {
        self.lookup.contains_key(&ch)
    }

    pub fn encode(&self, text: &str) -> Result<Vec<u32>> {
        text.chars()
            .map(|ch| {
                self.lookup
                    .get(&ch)
                    .copied()
                    .ok_or(Error::OutOfCharset { ch })
            })
            .collect()
    }

    pub fn symbol(&self, id: u32) -> Option<char> {
        if id == self.blank_index || id as usize > self.symbols.len() {
            return None;
        }
        let pos = if id < self.blank_index { id } else { id - 1 };
        Some(self.symbols[pos as usize])
    }

    /// Decode printable ids; blank or out-of-range ids are an error.
    pub fn decode(&self, ids: &[u32]) -> Result<String> {
        ids.iter()
            .map(|&id| {
                self.symbol(id).ok_or(Error::OutOfRange {
                    index: id as usize,
                    limit: self.num_classes(),
                })
            })
            .collect()
    }

    /// Check every character of `text`, naming the first offender.
    pub fn validate(&self, text: &str) -> Result<()> {
        match text.chars().find(|c| !self.contains(*c)) {
            Some(ch) => Err(Error::OutOfCharset { ch }),
            None => Ok(()),
        }
    }
}
