//! Binary strings and sequence measures.
//!
//! A [`SequenceMeasure`] assigns a probability to every finite prefix of an
//! infinite binary sequence, with `ρ(ε) = 1` and
//! `ρ(s0) + ρ(s1) = ρ(s)`. Implementations expose the next-bit conditional
//! and the log prefix probability; the log form is the one used for
//! accumulation since products of a few thousand conditionals underflow.

mod families;

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use families::{Bernoulli, DeterministicMeasure, Generator, Markov, MAX_MARKOV_ORDER};

/// A finite bit sequence. Dereferences to `[bool]`, `true` being the symbol 1.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct BinaryString(Vec<bool>);

impl BinaryString {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    /// The first `k` symbols. Panics if `k > self.len()`.
    pub fn prefix(&self, k: usize) -> BinaryString {
        assert!(
            k <= self.0.len(),
            "prefix({k}) of a string of length {}",
            self.0.len()
        );
        Self(self.0[..k].to_vec())
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    /// `self · bit` as a new string.
    pub fn extended(&self, bit: bool) -> BinaryString {
        let mut bits = Vec::with_capacity(self.0.len() + 1);
        bits.extend_from_slice(&self.0);
        bits.push(bit);
        Self(bits)
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn into_bits(self) -> Vec<bool> {
        self.0
    }

    /// All strings of length `n`, in lexicographic order.
    pub fn all_of_length(n: usize) -> impl Iterator<Item = BinaryString> {
        assert!(n < 64);
        (0u64..(1u64 << n))
            .map(move |v| Self((0..n).map(|i| (v >> (n - 1 - i)) & 1 == 1).collect()))
    }
}

impl Deref for BinaryString {
    type Target = [bool];

    fn deref(&self) -> &[bool] {
        &self.0
    }
}

impl From<&[bool]> for BinaryString {
    fn from(bits: &[bool]) -> Self {
        Self(bits.to_vec())
    }
}

impl fmt::Display for BinaryString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BinaryString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            f.write_str("ε")
        } else {
            fmt::Display::fmt(self, f)
        }
    }
}

impl FromStr for BinaryString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidParameter(format!(
                    "binary string contains {other:?}"
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

impl From<BinaryString> for String {
    fn from(s: BinaryString) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for BinaryString {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

pub(crate) fn render(bits: &[bool]) -> String {
    BinaryString::from(bits).to_string()
}

/// A probability assignment on finite binary prefixes.
pub trait SequenceMeasure: Send + Sync + fmt::Debug {
    /// Stable identity used in reports.
    fn name(&self) -> String;

    /// Probability that the symbol following `context` is 1.
    ///
    /// Errors with [`Error::NullEvent`] when the measure can tell that
    /// `context` itself has probability 0.
    fn prob_one(&self, context: &[bool]) -> Result<f64>;

    /// `ln ρ(s)`, `-inf` for null strings. The default chains conditionals.
    fn ln_prefix_probability(&self, s: &[bool]) -> Result<f64> {
        let mut ln = 0.0;
        for k in 0..s.len() {
            let p1 = self.prob_one(&s[..k])?;
            let p = if s[k] { p1 } else { 1.0 - p1 };
            if p <= 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            ln += p.ln();
        }
        Ok(ln)
    }

    /// Incremental view of the measure along a single path.
    fn cursor(&self) -> Box<dyn MeasureCursor<'_> + '_>;
}

/// Walks one path through a measure, keeping whatever state makes the next
/// conditional cheap.
pub trait MeasureCursor<'a> {
    /// Conditional probability of 1 after the consumed context.
    fn prob_one(&self) -> Result<f64>;

    /// `ln ρ(context)` of the consumed context.
    fn ln_probability(&self) -> f64;

    /// Consume one more symbol.
    fn advance(&mut self, bit: bool) -> Result<()>;

    /// Independent copy at the current position.
    fn fork(&self) -> Box<dyn MeasureCursor<'a> + 'a>;
}

/// Cursor for measures without specialised state: stores the context and
/// delegates to [`SequenceMeasure::prob_one`].
#[derive(Clone)]
pub struct GenericCursor<'a> {
    measure: &'a dyn SequenceMeasure,
    context: Vec<bool>,
    ln: f64,
}

impl<'a> GenericCursor<'a> {
    pub fn boxed(measure: &'a dyn SequenceMeasure) -> Box<dyn MeasureCursor<'a> + 'a> {
        Box::new(Self {
            measure,
            context: Vec::new(),
            ln: 0.0,
        })
    }
}

impl<'a> MeasureCursor<'a> for GenericCursor<'a> {
    fn prob_one(&self) -> Result<f64> {
        if self.ln == f64::NEG_INFINITY {
            return Err(Error::NullEvent {
                context: render(&self.context),
            });
        }
        self.measure.prob_one(&self.context)
    }

    fn ln_probability(&self) -> f64 {
        self.ln
    }

    fn advance(&mut self, bit: bool) -> Result<()> {
        let p1 = self.prob_one()?;
        self.ln += ln_of(if bit { p1 } else { 1.0 - p1 });
        self.context.push(bit);
        Ok(())
    }

    fn fork(&self) -> Box<dyn MeasureCursor<'a> + 'a> {
        Box::new(self.clone())
    }
}

pub(crate) fn ln_of(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else {
        p.ln()
    }
}

/// `ln Σ exp(x_i)`, stable for large negative inputs; `-inf` when all are.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = xs.into_iter().map(|x| (x - max).exp()).sum();
    max + sum.ln()
}

/// `ρ(context · bit) / ρ(context)`.
pub fn conditional(m: &dyn SequenceMeasure, context: &[bool], bit: bool) -> Result<f64> {
    if m.ln_prefix_probability(context)? == f64::NEG_INFINITY {
        return Err(Error::NullEvent {
            context: render(context),
        });
    }
    let p1 = m.prob_one(context)?;
    Ok(if bit { p1 } else { 1.0 - p1 })
}

/// `ln` of the product of conditionals along `s`; `-inf` once a factor is 0.
pub fn chain_ln_probability(m: &dyn SequenceMeasure, s: &[bool]) -> Result<f64> {
    let mut cursor = m.cursor();
    for &bit in s {
        cursor.advance(bit)?;
        if cursor.ln_probability() == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
    }
    Ok(cursor.ln_probability())
}

/// Product of the conditionals along `s`, which equals `ρ(s)`.
pub fn chain_probability(m: &dyn SequenceMeasure, s: &[bool]) -> Result<f64> {
    Ok(chain_ln_probability(m, s)?.exp())
}

/// Draws an `n`-bit path from `m`; the same seed always gives the same path.
pub fn sample_path(m: &dyn SequenceMeasure, n: usize, seed: u64) -> Result<BinaryString> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_path_with(m, n, &mut rng)
}

pub(crate) fn sample_path_with<R: Rng>(
    m: &dyn SequenceMeasure,
    n: usize,
    rng: &mut R,
) -> Result<BinaryString> {
    let mut cursor = m.cursor();
    let mut bits = Vec::with_capacity(n);
    for _ in 0..n {
        let p1 = cursor.prob_one()?;
        let bit = rng.random::<f64>() < p1;
        cursor.advance(bit)?;
        bits.push(bit);
    }
    Ok(BinaryString::from_bits(bits))
}
