use std::fmt;
use std::sync::{Arc, Mutex};

use super::{ln_of, render, MeasureCursor, SequenceMeasure};
use crate::error::{Error, Result};
use crate::semimeasure::{MachineStatus, MonotoneMachine, RegisterMachine};

pub const MAX_MARKOV_ORDER: usize = 4;

/// i.i.d. bits with `P(1) = theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bernoulli {
    theta: f64,
}

impl Bernoulli {
    /// `theta` must lie strictly inside (0, 1); use [`Bernoulli::point_mass`]
    /// for the degenerate cases.
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "Bernoulli theta must be in (0,1), got {theta}"
            )));
        }
        Ok(Self { theta })
    }

    /// The deterministic all-`bit` sequence.
    pub fn point_mass(bit: bool) -> Self {
        Self {
            theta: if bit { 1.0 } else { 0.0 },
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

impl SequenceMeasure for Bernoulli {
    fn name(&self) -> String {
        format!("bernoulli({})", self.theta)
    }

    fn prob_one(&self, context: &[bool]) -> Result<f64> {
        if self.theta == 0.0 || self.theta == 1.0 {
            let want = self.theta == 1.0;
            if context.iter().any(|&b| b != want) {
                return Err(Error::NullEvent {
                    context: render(context),
                });
            }
        }
        Ok(self.theta)
    }

    fn ln_prefix_probability(&self, s: &[bool]) -> Result<f64> {
        let ones = s.iter().filter(|&&b| b).count() as f64;
        let zeros = s.len() as f64 - ones;
        let mut ln = 0.0;
        if ones > 0.0 {
            ln += ones * ln_of(self.theta);
        }
        if zeros > 0.0 {
            ln += zeros * ln_of(1.0 - self.theta);
        }
        Ok(ln)
    }

    fn cursor(&self) -> Box<dyn MeasureCursor<'_> + '_> {
        Box::new(BernoulliCursor {
            theta: self.theta,
            ln: 0.0,
        })
    }
}

#[derive(Clone)]
struct BernoulliCursor {
    theta: f64,
    ln: f64,
}

impl<'a> MeasureCursor<'a> for BernoulliCursor {
    fn prob_one(&self) -> Result<f64> {
        if self.ln == f64::NEG_INFINITY {
            return Err(Error::NullEvent {
                context: "<bernoulli path>".into(),
            });
        }
        Ok(self.theta)
    }

    fn ln_probability(&self) -> f64 {
        self.ln
    }

    fn advance(&mut self, bit: bool) -> Result<()> {
        let p1 = self.prob_one()?;
        self.ln += ln_of(if bit { p1 } else { 1.0 - p1 });
        Ok(())
    }

    fn fork(&self) -> Box<dyn MeasureCursor<'a> + 'a> {
        Box::new(self.clone())
    }
}

/// Markov chain of order `k <= 4` on bits.
///
/// The next-bit probability depends on the last `min(len, k)` symbols. For
/// contexts shorter than `k` the `start` table is used, so the chain is
/// fully specified from the first symbol on. Histories are read as binary
/// numbers with the oldest symbol most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct Markov {
    order: usize,
    // Index (1 << l) - 1 + h for a history of length l with value h.
    table: Vec<f64>,
}

impl Markov {
    /// `start` has `2^k - 1` entries (histories of length 0..k, shortest
    /// first), `transition` has `2^k` entries indexed by the last `k` bits.
    pub fn new(order: usize, start: Vec<f64>, transition: Vec<f64>) -> Result<Self> {
        if order > MAX_MARKOV_ORDER {
            return Err(Error::InvalidParameter(format!(
                "Markov order {order} exceeds {MAX_MARKOV_ORDER}"
            )));
        }
        if start.len() != (1 << order) - 1 {
            return Err(Error::InvalidParameter(format!(
                "order-{order} Markov needs {} start probabilities, got {}",
                (1 << order) - 1,
                start.len()
            )));
        }
        if transition.len() != 1 << order {
            return Err(Error::InvalidParameter(format!(
                "order-{order} Markov needs {} transition probabilities, got {}",
                1 << order,
                transition.len()
            )));
        }
        let table: Vec<f64> = start.into_iter().chain(transition).collect();
        if let Some(bad) = table.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidParameter(format!(
                "Markov probability {bad} outside [0,1]"
            )));
        }
        Ok(Self { order, table })
    }

    /// Start probabilities all ½.
    pub fn with_uniform_start(order: usize, transition: Vec<f64>) -> Result<Self> {
        Self::new(order, vec![0.5; (1 << order) - 1], transition)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn index(&self, context: &[bool]) -> usize {
        let l = context.len().min(self.order);
        let h = context[context.len() - l..]
            .iter()
            .fold(0usize, |acc, &b| (acc << 1) | b as usize);
        (1 << l) - 1 + h
    }
}

impl SequenceMeasure for Markov {
    fn name(&self) -> String {
        format!("markov{}{:?}", self.order, self.table)
    }

    fn prob_one(&self, context: &[bool]) -> Result<f64> {
        if self.table.iter().any(|&p| p == 0.0 || p == 1.0)
            && self.ln_prefix_probability(context)? == f64::NEG_INFINITY
        {
            return Err(Error::NullEvent {
                context: render(context),
            });
        }
        Ok(self.table[self.index(context)])
    }

    fn ln_prefix_probability(&self, s: &[bool]) -> Result<f64> {
        let mut ln = 0.0;
        for k in 0..s.len() {
            let p1 = self.table[self.index(&s[..k])];
            ln += ln_of(if s[k] { p1 } else { 1.0 - p1 });
            if ln == f64::NEG_INFINITY {
                break;
            }
        }
        Ok(ln)
    }

    fn cursor(&self) -> Box<dyn MeasureCursor<'_> + '_> {
        Box::new(MarkovCursor {
            chain: self,
            seen: 0,
            history: 0,
            ln: 0.0,
        })
    }
}

#[derive(Clone)]
struct MarkovCursor<'a> {
    chain: &'a Markov,
    seen: usize,
    history: usize,
    ln: f64,
}

impl<'a> MeasureCursor<'a> for MarkovCursor<'a> {
    fn prob_one(&self) -> Result<f64> {
        if self.ln == f64::NEG_INFINITY {
            return Err(Error::NullEvent {
                context: "<markov path>".into(),
            });
        }
        let l = self.seen.min(self.chain.order);
        Ok(self.chain.table[(1 << l) - 1 + self.history])
    }

    fn ln_probability(&self) -> f64 {
        self.ln
    }

    fn advance(&mut self, bit: bool) -> Result<()> {
        let p1 = self.prob_one()?;
        self.ln += ln_of(if bit { p1 } else { 1.0 - p1 });
        self.seen += 1;
        let mask = (1usize << self.chain.order) - 1;
        self.history = ((self.history << 1) | bit as usize) & mask;
        Ok(())
    }

    fn fork(&self) -> Box<dyn MeasureCursor<'a> + 'a> {
        Box::new(self.clone())
    }
}

/// Source of the single infinite sequence of a [`DeterministicMeasure`].
#[derive(Clone)]
pub enum Generator {
    Zeros,
    Ones,
    /// 0101...
    Alternating,
    /// The given block repeated forever.
    Periodic(Vec<bool>),
    /// Output of the shipped register machine run on a hex-coded program.
    Program(Arc<ProgramOutput>),
}

impl Generator {
    /// Parses `alternating`, `ones`, `zeros`, `periodic:<bits>` or
    /// `program:<hex>`.
    pub fn parse(spec: &str) -> Result<Self> {
        match spec {
            "alternating" => Ok(Self::Alternating),
            "ones" => Ok(Self::Ones),
            "zeros" => Ok(Self::Zeros),
            _ => {
                if let Some(bits) = spec.strip_prefix("periodic:") {
                    let block: crate::measures::BinaryString = bits.parse()?;
                    if block.is_empty() {
                        return Err(Error::InvalidParameter("empty periodic block".into()));
                    }
                    Ok(Self::Periodic(block.into_bits()))
                } else if let Some(hex) = spec.strip_prefix("program:") {
                    Ok(Self::Program(Arc::new(ProgramOutput::from_hex(hex)?)))
                } else {
                    Err(Error::InvalidParameter(format!(
                        "unknown generator {spec:?}"
                    )))
                }
            }
        }
    }

    pub fn bit(&self, index: usize) -> Result<bool> {
        match self {
            Self::Zeros => Ok(false),
            Self::Ones => Ok(true),
            Self::Alternating => Ok(index % 2 == 1),
            Self::Periodic(block) => Ok(block[index % block.len()]),
            Self::Program(p) => p.bit(index),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Zeros => "zeros".into(),
            Self::Ones => "ones".into(),
            Self::Alternating => "alternating".into(),
            Self::Periodic(block) => format!("periodic:{}", render(block)),
            Self::Program(p) => format!("program:{}", p.hex),
        }
    }
}

impl fmt::Debug for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Lazily extended output of a register-machine program.
pub struct ProgramOutput {
    hex: String,
    program: Vec<bool>,
    cache: Mutex<(Vec<bool>, bool)>,
}

const PROGRAM_FUEL_LIMIT: u64 = 1 << 26;

impl ProgramOutput {
    pub fn from_hex(hex: &str) -> Result<Self> {
        let mut program = Vec::with_capacity(hex.len() * 4);
        for c in hex.chars() {
            let v = c
                .to_digit(16)
                .ok_or_else(|| Error::InvalidParameter(format!("program hex contains {c:?}")))?;
            program.extend((0..4).rev().map(|i| (v >> i) & 1 == 1));
        }
        Ok(Self {
            hex: hex.to_string(),
            program,
            cache: Mutex::new((Vec::new(), false)),
        })
    }

    fn bit(&self, index: usize) -> Result<bool> {
        let mut cache = self.cache.lock().expect("program cache poisoned");
        let mut fuel = 64 * (index as u64 + 1) + 1024;
        while cache.0.len() <= index && !cache.1 {
            let run = RegisterMachine.run(&self.program, fuel);
            cache.1 = run.status != MachineStatus::Running || fuel >= PROGRAM_FUEL_LIMIT;
            cache.0 = run.output;
            fuel = (fuel * 2).min(PROGRAM_FUEL_LIMIT);
        }
        cache
            .0
            .get(index)
            .copied()
            .ok_or_else(|| Error::GeneratorExhausted {
                name: format!("program:{}", self.hex),
                index,
            })
    }
}

/// Puts probability 1 on the single sequence produced by a [`Generator`].
#[derive(Debug, Clone)]
pub struct DeterministicMeasure {
    generator: Generator,
}

impl DeterministicMeasure {
    pub fn new(generator: Generator) -> Self {
        Self { generator }
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    fn is_on_target(&self, s: &[bool]) -> Result<bool> {
        for (i, &b) in s.iter().enumerate() {
            if self.generator.bit(i)? != b {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

impl SequenceMeasure for DeterministicMeasure {
    fn name(&self) -> String {
        format!("deterministic({})", self.generator.label())
    }

    fn prob_one(&self, context: &[bool]) -> Result<f64> {
        if !self.is_on_target(context)? {
            return Err(Error::NullEvent {
                context: render(context),
            });
        }
        Ok(if self.generator.bit(context.len())? {
            1.0
        } else {
            0.0
        })
    }

    fn ln_prefix_probability(&self, s: &[bool]) -> Result<f64> {
        Ok(if self.is_on_target(s)? {
            0.0
        } else {
            f64::NEG_INFINITY
        })
    }

    fn cursor(&self) -> Box<dyn MeasureCursor<'_> + '_> {
        Box::new(DeterministicCursor {
            measure: self,
            position: 0,
            alive: true,
        })
    }
}

#[derive(Clone)]
struct DeterministicCursor<'a> {
    measure: &'a DeterministicMeasure,
    position: usize,
    alive: bool,
}

impl<'a> MeasureCursor<'a> for DeterministicCursor<'a> {
    fn prob_one(&self) -> Result<f64> {
        if !self.alive {
            return Err(Error::NullEvent {
                context: "<off target>".into(),
            });
        }
        Ok(if self.measure.generator.bit(self.position)? {
            1.0
        } else {
            0.0
        })
    }

    fn ln_probability(&self) -> f64 {
        if self.alive {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }

    fn advance(&mut self, bit: bool) -> Result<()> {
        let target = self.prob_one()? == 1.0;
        self.alive = target == bit;
        self.position += 1;
        Ok(())
    }

    fn fork(&self) -> Box<dyn MeasureCursor<'a> + 'a> {
        Box::new(self.clone())
    }
}
