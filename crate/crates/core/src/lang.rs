//! Alphabets, expressions and the orderings defined on them.
//!
//! An [`Alphabet`] is an ordered list of distinct tokens whose first entry is
//! the spacer. An [`Expression`] is a finite sequence of indices into an
//! alphabet; it carries no reference to the alphabet itself, so operations
//! that need tokens take the alphabet explicitly.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of the spacer symbol in every alphabet.
pub const SPACER: usize = 0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LangError {
    #[error("alphabet needs at least 2 symbols, got {0}")]
    TooFewSymbols(usize),
    #[error("duplicate token {0:?} in alphabet")]
    DuplicateToken(String),
    #[error("invalid token {0:?}: tokens must be non-empty and free of commas and whitespace")]
    InvalidToken(String),
    #[error("unknown token {token:?} at position {position}")]
    UnknownToken { token: String, position: usize },
    #[error("symbol index {index} outside alphabet of size {size}")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("symbol {token:?} at position {position} is not a digit")]
    NonDigit { token: String, position: usize },
    #[error("digit {digit} at position {position} is not valid in base {base}")]
    DigitOutOfRange { digit: u32, position: usize, base: u32 },
    #[error("base {base} exceeds the {available} digit symbols of the alphabet")]
    BaseTooLarge { base: u32, available: usize },
}

/// A finite alphabet with the spacer at index 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Alphabet {
    symbols: Vec<String>,
}

impl Alphabet {
    /// Builds an alphabet; the first token becomes the spacer.
    pub fn new<I, S>(tokens: I) -> Result<Self, LangError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let symbols: Vec<String> = tokens.into_iter().map(Into::into).collect();
        if symbols.len() < 2 {
            return Err(LangError::TooFewSymbols(symbols.len()));
        }
        for (i, token) in symbols.iter().enumerate() {
            if token.is_empty() || token.contains(',') || token.chars().any(char::is_whitespace) {
                return Err(LangError::InvalidToken(token.clone()));
            }
            if symbols[..i].contains(token) {
                return Err(LangError::DuplicateToken(token.clone()));
            }
        }
        Ok(Self { symbols })
    }

    /// `#` followed by the digits `0, 1, …` (letters past 9): the default
    /// alphabet of size `k`.
    pub fn canonical(k: usize) -> Result<Self, LangError> {
        if k < 2 {
            return Err(LangError::TooFewSymbols(k));
        }
        let mut tokens = vec!["#".to_string()];
        for i in 0..k - 1 {
            let token = match char::from_digit(i as u32, 36) {
                Some(c) => c.to_string(),
                None => format!("s{i}"),
            };
            tokens.push(token);
        }
        Self::new(tokens)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacer(&self) -> &str {
        &self.symbols[SPACER]
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.symbols.get(index).map(String::as_str)
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == token)
    }

    /// True when every token is a single character, in which case
    /// expressions are written one character per symbol.
    pub fn is_single_char(&self) -> bool {
        self.symbols.iter().all(|s| s.chars().count() == 1)
    }

    /// Checks that every index of `indices` belongs to this alphabet.
    pub fn expression(&self, indices: Vec<usize>) -> Result<Expression, LangError> {
        if let Some(&index) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(LangError::IndexOutOfRange { index, size: self.len() });
        }
        Ok(Expression(indices))
    }

    /// Parses the textual form of an expression.
    ///
    /// Single-character alphabets read one character per symbol; otherwise
    /// tokens are comma separated. Positions in errors are 1-based.
    pub fn parse(&self, text: &str) -> Result<Expression, LangError> {
        if text.is_empty() {
            return Ok(Expression::empty());
        }
        let mut out = Vec::new();
        if self.is_single_char() {
            for (i, c) in text.chars().enumerate() {
                let mut buf = [0u8; 4];
                let token: &str = c.encode_utf8(&mut buf);
                out.push(self.index_of(token).ok_or_else(|| LangError::UnknownToken {
                    token: token.to_string(),
                    position: i + 1,
                })?);
            }
        } else {
            for (i, token) in text.split(',').enumerate() {
                out.push(self.index_of(token).ok_or_else(|| LangError::UnknownToken {
                    token: token.to_string(),
                    position: i + 1,
                })?);
            }
        }
        Ok(Expression(out))
    }

    /// Inverse of [`Alphabet::parse`].
    pub fn render(&self, expr: &Expression) -> String {
        let sep = if self.is_single_char() { "" } else { "," };
        expr.0
            .iter()
            .map(|&i| self.symbols.get(i).map(String::as_str).unwrap_or("?"))
            .collect::<Vec<_>>()
            .join(sep)
    }

    /// Number of tokens that read as a digit (`0-9`, then `a-z`).
    fn digit_count(&self) -> usize {
        self.symbols.iter().filter(|s| token_digit(s).is_some()).count()
    }
}

impl TryFrom<Vec<String>> for Alphabet {
    type Error = LangError;

    fn try_from(tokens: Vec<String>) -> Result<Self, Self::Error> {
        Self::new(tokens)
    }
}

impl From<Alphabet> for Vec<String> {
    fn from(a: Alphabet) -> Self {
        a.symbols
    }
}

fn token_digit(token: &str) -> Option<u32> {
    let mut chars = token.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => c.to_digit(36),
        _ => None,
    }
}

/// A finite string of alphabet indices. The empty expression is allowed.
///
/// Ordering is length-lexicographic: shorter expressions first, then
/// lexicographic by symbol index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Expression(Vec<usize>);

impl Expression {
    /// Wraps raw indices without checking them against an alphabet.
    pub fn new(indices: Vec<usize>) -> Self {
        Self(indices)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }

    pub fn into_symbols(self) -> Vec<usize> {
        self.0
    }

    /// 1-based symbol access, `X(j)`.
    pub fn at(&self, j: usize) -> Option<usize> {
        j.checked_sub(1).and_then(|i| self.0.get(i).copied())
    }

    /// The first `end` symbols.
    pub fn prefix(&self, end: usize) -> Option<PrefixView<'_>> {
        (end <= self.len()).then_some(PrefixView { source: self, end })
    }

    /// A word (or formula) contains no spacer. The empty expression is a word.
    pub fn is_word(&self) -> bool {
        !self.0.contains(&SPACER)
    }

    /// Maximal spacer-free runs, in order.
    pub fn split_words(&self) -> Vec<Expression> {
        self.0
            .split(|&s| s == SPACER)
            .filter(|run| !run.is_empty())
            .map(|run| Expression(run.to_vec()))
            .collect()
    }

    /// Joins words with single spacers.
    pub fn join_words(words: &[Expression]) -> Expression {
        let mut out = Vec::new();
        for (i, w) in words.iter().enumerate() {
            if i > 0 {
                out.push(SPACER);
            }
            out.extend_from_slice(&w.0);
        }
        Expression(out)
    }

    /// Drops trailing spacers.
    pub fn trimmed(&self) -> Expression {
        let end = self.0.iter().rposition(|&s| s != SPACER).map_or(0, |i| i + 1);
        Expression(self.0[..end].to_vec())
    }

    pub fn is_trimmed(&self) -> bool {
        self.0.last() != Some(&SPACER)
    }

    pub fn push(&mut self, symbol: usize) {
        self.0.push(symbol);
    }

    /// Positional value with symbol indices as digits, `Σ_j base^{j-1}·s(j)`
    /// where `s(1)` is the rightmost symbol. `None` on overflow or when an
    /// index is not a digit of `base`.
    pub fn index_value(&self, base: usize) -> Option<u64> {
        let base = base as u64;
        self.0.iter().try_fold(0u64, |acc, &s| {
            let s = s as u64;
            if s >= base {
                return None;
            }
            acc.checked_mul(base)?.checked_add(s)
        })
    }
}

impl PartialOrd for Expression {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Expression {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl From<Vec<usize>> for Expression {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// The first `end` symbols of an expression, `X_[1,end]`.
#[derive(Debug, Clone, Copy)]
pub struct PrefixView<'a> {
    source: &'a Expression,
    end: usize,
}

impl<'a> PrefixView<'a> {
    pub fn source(&self) -> &'a Expression {
        self.source
    }

    pub fn end(&self) -> usize {
        self.end
    }

    pub fn symbols(&self) -> &'a [usize] {
        &self.source.0[..self.end]
    }

    pub fn to_expression(&self) -> Expression {
        Expression(self.symbols().to_vec())
    }
}

/// All expressions of length `0..=max_len` in length-lexicographic order.
pub fn enumerate_expressions(alphabet: &Alphabet, max_len: usize) -> LengthLex {
    LengthLex::new(alphabet.len(), max_len)
}

/// Length-lexicographic odometer over `k` symbols.
#[derive(Debug, Clone)]
pub struct LengthLex {
    k: usize,
    max_len: usize,
    next: Option<Vec<usize>>,
}

impl LengthLex {
    pub fn new(k: usize, max_len: usize) -> Self {
        Self { k, max_len, next: Some(Vec::new()) }
    }

    /// Only expressions of exactly length `n`.
    pub fn of_length(k: usize, n: usize) -> impl Iterator<Item = Expression> {
        Self { k, max_len: n, next: Some(vec![0; n]) }
    }
}

impl Iterator for LengthLex {
    type Item = Expression;

    fn next(&mut self) -> Option<Expression> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut i = succ.len();
        loop {
            if i == 0 {
                // Every position rolled over: move to the next length.
                if succ.len() < self.max_len && self.k > 0 {
                    succ = vec![0; succ.len() + 1];
                    self.next = Some(succ);
                }
                break;
            }
            i -= 1;
            succ[i] += 1;
            if succ[i] < self.k {
                self.next = Some(succ);
                break;
            }
            succ[i] = 0;
        }
        Some(Expression(current))
    }
}

/// The number written by `expr` in `base`, reading digit tokens.
///
/// Place labels run from the right: the rightmost written digit is `s(1)`
/// and the value is `Σ_j base^{j-1}·s(j)`, so `"10010"` in base 2 is 18.
pub fn numeral_value(expr: &Expression, alphabet: &Alphabet, base: u32) -> Result<BigUint, LangError> {
    let available = alphabet.digit_count();
    if base < 2 || base as usize > available {
        return Err(LangError::BaseTooLarge { base, available });
    }
    let mut value = BigUint::from(0u32);
    for (i, &s) in expr.symbols().iter().enumerate() {
        let token = alphabet
            .token(s)
            .ok_or(LangError::IndexOutOfRange { index: s, size: alphabet.len() })?;
        let digit = token_digit(token).ok_or_else(|| LangError::NonDigit {
            token: token.to_string(),
            position: i + 1,
        })?;
        if digit >= base {
            return Err(LangError::DigitOutOfRange { digit, position: i + 1, base });
        }
        value = value * base + digit;
    }
    Ok(value)
}
