//! Four-letter alphabet and finite windows of bi-infinite sequences.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Result, SnlsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Symbol {
    One,
    Two,
    MinusOne,
    MinusTwo,
}

impl Symbol {
    pub const ALL: [Symbol; 4] = [Symbol::One, Symbol::Two, Symbol::MinusOne, Symbol::MinusTwo];

    pub fn value(self) -> i8 {
        match self {
            Symbol::One => 1,
            Symbol::Two => 2,
            Symbol::MinusOne => -1,
            Symbol::MinusTwo => -2,
        }
    }

    /// Position in [`Symbol::ALL`].
    pub fn index(self) -> usize {
        match self {
            Symbol::One => 0,
            Symbol::Two => 1,
            Symbol::MinusOne => 2,
            Symbol::MinusTwo => 3,
        }
    }

    /// Slices with negative labels come from the mirrored slab.
    pub fn is_mirrored(self) -> bool {
        self.value() < 0
    }

    /// Word of length `len` with index `code` in base 4 (most significant first).
    pub fn word(code: usize, len: usize) -> Vec<Symbol> {
        (0..len)
            .map(|i| Symbol::ALL[(code / 4usize.pow((len - 1 - i) as u32)) % 4])
            .collect()
    }
}

impl TryFrom<i8> for Symbol {
    type Error = SnlsError;

    fn try_from(v: i8) -> Result<Self> {
        match v {
            1 => Ok(Symbol::One),
            2 => Ok(Symbol::Two),
            -1 => Ok(Symbol::MinusOne),
            -2 => Ok(Symbol::MinusTwo),
            _ => Err(SnlsError::InvalidParams(format!("symbol {v} not in {{1, 2, -1, -2}}"))),
        }
    }
}

impl From<Symbol> for i8 {
    fn from(s: Symbol) -> i8 {
        s.value()
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

impl FromStr for Symbol {
    type Err = SnlsError;

    fn from_str(s: &str) -> Result<Self> {
        let v: i8 = s
            .trim()
            .parse()
            .map_err(|_| SnlsError::InvalidParams(format!("bad symbol '{s}'")))?;
        Symbol::try_from(v)
    }
}

/// Window `a_{-m} .. a_m` of a bi-infinite sequence, or a periodic word.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolSequence {
    /// `window[i]` is `a_{i - center}`.
    pub window: Vec<Symbol>,
    pub center: usize,
    /// When set, `window` holds one period starting at `a_0` rotated by
    /// `center`, and every index is defined.
    pub period: Option<usize>,
}

impl SymbolSequence {
    /// Finite window with `a_0 = window[center]`.
    pub fn finite(window: Vec<Symbol>, center: usize) -> Result<Self> {
        if center >= window.len() {
            return Err(SnlsError::InvalidParams("center outside the window".into()));
        }
        Ok(Self {
            window,
            center,
            period: None,
        })
    }

    /// Periodic extension of `word`, with `a_0 = word[0]`.
    pub fn periodic(word: Vec<Symbol>) -> Result<Self> {
        if word.is_empty() {
            return Err(SnlsError::InvalidParams("empty periodic word".into()));
        }
        let p = word.len();
        Ok(Self {
            window: word,
            center: 0,
            period: Some(p),
        })
    }

    /// Smallest `m` with `a_{-m} .. a_m` known (unbounded for periodic words).
    pub fn half_width(&self) -> usize {
        match self.period {
            Some(_) => usize::MAX,
            None => self.center.min(self.window.len() - 1 - self.center),
        }
    }

    pub fn get(&self, k: i64) -> Option<Symbol> {
        match self.period {
            Some(p) => {
                let idx = (self.center as i64 + k).rem_euclid(p as i64) as usize;
                Some(self.window[idx])
            }
            None => {
                let idx = self.center as i64 + k;
                (idx >= 0 && (idx as usize) < self.window.len()).then(|| self.window[idx as usize])
            }
        }
    }

    /// `a_{-k} .. a_k`, if the window is wide enough.
    pub fn symbols(&self, k: usize) -> Result<Vec<Symbol>> {
        let k = k as i64;
        (-k..=k)
            .map(|i| {
                self.get(i).ok_or_else(|| {
                    SnlsError::InvalidParams(format!("window too short for depth {k}"))
                })
            })
            .collect()
    }
}

impl fmt::Display for SymbolSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .window
            .iter()
            .enumerate()
            .map(|(i, s)| {
                if i == self.center {
                    format!("[{s}]")
                } else {
                    s.to_string()
                }
            })
            .collect();
        write!(f, "{}", parts.join(" "))?;
        if self.period.is_some() {
            write!(f, " ...")?;
        }
        Ok(())
    }
}

/// `χ(a)_k = a_{k+1}`.
pub fn shift_map(seq: &SymbolSequence) -> SymbolSequence {
    match seq.period {
        Some(p) => SymbolSequence {
            window: seq.window.clone(),
            center: (seq.center + 1) % p,
            period: Some(p),
        },
        None => {
            // Dropping the leftmost symbol keeps the window centered when the
            // right side has room.
            let mut s = seq.clone();
            s.center += 1;
            if s.center >= s.window.len() {
                s.window.push(*s.window.last().expect("non-empty window"));
            }
            s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Symbol::*;

    #[test]
    fn shift_moves_center() {
        let a = SymbolSequence::finite(vec![MinusOne, One, Two, MinusTwo], 1).unwrap();
        assert_eq!(a.get(0), Some(One));
        let b = shift_map(&a);
        assert_eq!(b.get(0), Some(Two));
        assert_eq!(b.get(-1), Some(One));
        assert_eq!(b.get(1), Some(MinusTwo));
    }

    #[test]
    fn constant_sequence_is_fixed() {
        let a = SymbolSequence::periodic(vec![Two]).unwrap();
        let b = shift_map(&a);
        for k in -5..5 {
            assert_eq!(a.get(k), b.get(k));
        }
    }

    #[test]
    fn period_p_returns_after_p_shifts() {
        let a = SymbolSequence::periodic(vec![One, MinusTwo, Two]).unwrap();
        let mut b = a.clone();
        for _ in 0..3 {
            b = shift_map(&b);
        }
        assert_eq!(a, b);
        assert_eq!(a.symbols(2).unwrap(), vec![MinusTwo, Two, One, MinusTwo, Two]);
    }

    #[test]
    fn words_enumerate_all() {
        let words: Vec<_> = (0..16).map(|c| Symbol::word(c, 2)).collect();
        assert_eq!(words[0], vec![One, One]);
        assert_eq!(words[7], vec![Two, MinusTwo]);
        let mut sorted = words.clone();
        sorted.dedup();
        assert_eq!(sorted.len(), 16);
    }

    #[test]
    fn parse_and_reject() {
        assert_eq!("-2".parse::<Symbol>().unwrap(), MinusTwo);
        assert!("3".parse::<Symbol>().is_err());
        assert!(serde_json::from_str::<Symbol>("0").is_err());
    }
}
