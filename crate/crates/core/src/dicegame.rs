//! The two-dice betting game.
//!
//! Each round the dealer picks one of two dice by a deterministic rule of the
//! past outcomes, the die shows black (bit 0) or white (bit 1), and the
//! player, having staked `s`, wins `r` for a correct guess. Die 1 shows white
//! with probability 1/3, die 2 with 2/3.
//!
//! Amounts are kept in integer cents; the public `f64` values are currency
//! units.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{ln_of, MeasureCursor, SequenceMeasure};
use crate::predictors::Predictor;
use crate::universal::WeightedClass;

pub const DEFAULT_STAKE_CENTS: u64 = 300;
pub const DEFAULT_PAYOUT_CENTS: u64 = 500;

/// Environment randomness and predictor randomness use separate streams of
/// the same seed.
const ENV_STREAM: u64 = 0;
const PREDICTOR_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Die {
    One,
    Two,
}

/// A Moore machine over outcomes: the die is a function of the state, the
/// state advances on each outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DealerRule {
    pub name: String,
    pub start: usize,
    pub die: Vec<Die>,
    /// `next[state][bit]`
    pub next: Vec<[usize; 2]>,
}

impl DealerRule {
    pub fn validate(&self) -> Result<()> {
        let n = self.die.len();
        let fail = |why: String| Err(Error::PartialRule(format!("{}: {why}", self.name)));
        if n == 0 {
            return fail("no states".into());
        }
        if self.next.len() != n {
            return fail(format!(
                "{} states but {} transition rows",
                n,
                self.next.len()
            ));
        }
        if self.start >= n {
            return fail(format!("start state {} out of range", self.start));
        }
        if let Some((s, row)) = self
            .next
            .iter()
            .enumerate()
            .find(|(_, r)| r.iter().any(|&t| t >= n))
        {
            return fail(format!("state {s} moves to undefined state {row:?}"));
        }
        Ok(())
    }

    pub fn states(&self) -> usize {
        self.die.len()
    }

    pub fn constant(die: Die) -> Self {
        let name = match die {
            Die::One => "const-die1",
            Die::Two => "const-die2",
        };
        Self {
            name: name.into(),
            start: 0,
            die: vec![die],
            next: vec![[0, 0]],
        }
    }

    /// Switches die every round regardless of outcomes.
    pub fn clock(first: Die) -> Self {
        let (name, die) = match first {
            Die::One => ("clock-die1-first", vec![Die::One, Die::Two]),
            Die::Two => ("clock-die2-first", vec![Die::Two, Die::One]),
        };
        Self {
            name: name.into(),
            start: 0,
            die,
            next: vec![[1, 1], [0, 0]],
        }
    }

    /// Die from a table over the last `depth` outcomes; rounds before the
    /// first outcome see black. Bit `h` of `table` set means die 2, where
    /// `h` packs the history with the most recent outcome as bit 0.
    pub fn history(depth: u32, table: u32, name: impl Into<String>) -> Self {
        let states = 1usize << depth;
        let mask = states - 1;
        Self {
            name: name.into(),
            start: 0,
            die: (0..states)
                .map(|h| {
                    if table >> h & 1 == 1 {
                        Die::Two
                    } else {
                        Die::One
                    }
                })
                .collect(),
            next: (0..states)
                .map(|h| [(h << 1) & mask, ((h << 1) | 1) & mask])
                .collect(),
        }
    }

    /// Die 2 exactly when the previous outcome was white.
    pub fn feedback() -> Self {
        Self::history(1, 0b10, "lag1-copy")
    }

    /// Die 2 exactly when the last three outcomes hold an odd number of
    /// whites.
    pub fn parity3() -> Self {
        Self::history(3, 0x96, "h3-96")
    }

    pub fn die_at(&self, history: &[bool]) -> Die {
        let mut s = self.start;
        for &b in history {
            s = self.next[s][b as usize];
        }
        self.die[s]
    }
}

/// Every rule of the family in class order: constants, clocks, the two
/// rules of the last outcome, then tables over two and three outcomes that
/// need their full depth.
pub fn rule_family() -> Vec<DealerRule> {
    let mut out = vec![
        DealerRule::constant(Die::One),
        DealerRule::constant(Die::Two),
        DealerRule::clock(Die::One),
        DealerRule::clock(Die::Two),
        DealerRule::feedback(),
        DealerRule::history(1, 0b01, "lag1-invert"),
    ];
    for depth in [2u32, 3] {
        let states = 1u32 << depth;
        let half = states / 2;
        for table in 0..(1u32 << states) {
            // same die for h and h with its oldest bit flipped: depth - 1 suffices
            let shallow = (0..half).all(|h| (table >> h & 1) == (table >> (h + half) & 1));
            if !shallow {
                out.push(DealerRule::history(
                    depth,
                    table,
                    format!("h{depth}-{table:02x}"),
                ));
            }
        }
    }
    out
}

/// The rules the examples and checks are run against.
pub fn shipped_rules() -> Vec<DealerRule> {
    vec![
        DealerRule::constant(Die::One),
        DealerRule::clock(Die::One),
        DealerRule::feedback(),
        DealerRule::parity3(),
    ]
}

pub fn find_rule(name: &str) -> Result<DealerRule> {
    let alias = match name {
        "constant" => "const-die1",
        "alternating" => "clock-die1-first",
        "feedback" => "lag1-copy",
        "parity3" => "h3-96",
        other => other,
    };
    rule_family()
        .into_iter()
        .find(|r| r.name == alias)
        .ok_or_else(|| Error::UnknownComponent(name.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    pub stake_cents: u64,
    pub payout_cents: u64,
    pub die1_white: f64,
    pub die2_white: f64,
    pub dealer: DealerRule,
}

impl Default for GameSpec {
    fn default() -> Self {
        Self::with_dealer(DealerRule::constant(Die::One))
    }
}

impl GameSpec {
    pub fn with_dealer(dealer: DealerRule) -> Self {
        Self {
            stake_cents: DEFAULT_STAKE_CENTS,
            payout_cents: DEFAULT_PAYOUT_CENTS,
            die1_white: 1.0 / 3.0,
            die2_white: 2.0 / 3.0,
            dealer,
        }
    }

    /// A zero stake is accepted so the free game can be analysed.
    pub fn validate(&self) -> Result<()> {
        if self.payout_cents == 0 || self.stake_cents >= self.payout_cents {
            return Err(Error::InvalidParameter(format!(
                "need payout > stake >= 0, got stake {} payout {} (cents)",
                self.stake_cents, self.payout_cents
            )));
        }
        for p in [self.die1_white, self.die2_white] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "die probability {p} outside (0,1)"
                )));
            }
        }
        self.dealer.validate()
    }

    /// `s / r`
    pub fn stake_ratio(&self) -> f64 {
        self.stake_cents as f64 / self.payout_cents as f64
    }

    fn white(&self, die: Die) -> f64 {
        match die {
            Die::One => self.die1_white,
            Die::Two => self.die2_white,
        }
    }
}

/// The outcome process `μ` induced by a game.
#[derive(Debug, Clone)]
pub struct GameMeasure {
    spec: Arc<GameSpec>,
}

pub fn game_measure(spec: &GameSpec) -> Result<GameMeasure> {
    spec.validate()?;
    Ok(GameMeasure {
        spec: Arc::new(spec.clone()),
    })
}

impl GameMeasure {
    pub fn spec(&self) -> &GameSpec {
        &self.spec
    }
}

impl SequenceMeasure for GameMeasure {
    fn name(&self) -> String {
        format!("game({})", self.spec.dealer.name)
    }

    fn prob_one(&self, context: &[bool]) -> Result<f64> {
        Ok(self.spec.white(self.spec.dealer.die_at(context)))
    }

    fn cursor(&self) -> Box<dyn MeasureCursor<'_> + '_> {
        Box::new(GameCursor {
            spec: &self.spec,
            state: self.spec.dealer.start,
            ln_p: 0.0,
        })
    }
}

#[derive(Clone)]
struct GameCursor<'a> {
    spec: &'a GameSpec,
    state: usize,
    ln_p: f64,
}

impl<'a> MeasureCursor<'a> for GameCursor<'a> {
    fn prob_one(&self) -> Result<f64> {
        Ok(self.spec.white(self.spec.dealer.die[self.state]))
    }

    fn ln_probability(&self) -> f64 {
        self.ln_p
    }

    fn advance(&mut self, bit: bool) -> Result<()> {
        let p = self.spec.white(self.spec.dealer.die[self.state]);
        self.ln_p += ln_of(if bit { p } else { 1.0 - p });
        self.state = self.spec.dealer.next[self.state][bit as usize];
        Ok(())
    }

    fn fork(&self) -> Box<dyn MeasureCursor<'a> + 'a> {
        Box::new(self.clone())
    }
}

/// All rules of [`rule_family`] under `spec`'s dice and payouts, with
/// index-code weights.
pub fn family_class(spec: &GameSpec) -> Result<WeightedClass> {
    let members = rule_family()
        .into_iter()
        .map(|rule| {
            let m = game_measure(&GameSpec {
                dealer: rule.clone(),
                ..spec.clone()
            })?;
            Ok((rule.name, Arc::new(m) as Arc<dyn SequenceMeasure>))
        })
        .collect::<Result<Vec<_>>>()?;
    WeightedClass::with_index_code_weights(members)
}

/// Expected profit in currency units after `n` rounds with `errors`
/// expected wrong guesses: `(n - errors)·r - n·s`.
pub fn profit(n: f64, errors: f64, spec: &GameSpec) -> f64 {
    ((n - errors) * spec.payout_cents as f64 - n * spec.stake_cents as f64) / 100.0
}

/// Exact profit in cents for integer counts.
pub fn profit_cents(n: u64, errors: u64, spec: &GameSpec) -> i64 {
    (n - errors) as i64 * spec.payout_cents as i64 - n as i64 * spec.stake_cents as i64
}

/// Error rate at which the expected profit is zero: `1 - s/r`.
pub fn break_even_error_rate(spec: &GameSpec) -> f64 {
    1.0 - spec.stake_ratio()
}

/// Rounds after which `Θξ` is guaranteed a positive expected profit when
/// `Θμ` errs at rate `e_theta_mu` per round and the true rule costs
/// `complexity_bits`:
/// `2(1 - s/r + e) / (1 - s/r - e)² · ln 2 · bits`.
pub fn turnaround_bound(complexity_bits: f64, spec: &GameSpec, e_theta_mu: f64) -> Result<f64> {
    let q = break_even_error_rate(spec);
    if !(q > e_theta_mu) {
        return Err(Error::Unwinnable(format!(
            "1 - s/r = {q} must exceed the per-round error {e_theta_mu}"
        )));
    }
    if !(complexity_bits >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "complexity {complexity_bits} bits"
        )));
    }
    Ok(turnaround_coefficient(spec, e_theta_mu) * complexity_bits)
}

fn turnaround_coefficient(spec: &GameSpec, e: f64) -> f64 {
    let q = break_even_error_rate(spec);
    2.0 * (q + e) / ((q - e) * (q - e)) * std::f64::consts::LN_2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scoring {
    /// Probabilistic predictions are sampled; the ledger is exact cents.
    Sampled,
    /// A prediction of 1 with probability `r` is charged `r` or `1 - r`
    /// errors against the realized outcome.
    Expected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfitTrace {
    pub dealer: String,
    pub predictor: String,
    pub seed: u64,
    pub scoring: Scoring,
    /// Cumulative errors after each round; integral under sampled scoring.
    pub errors: Vec<f64>,
    /// Cumulative profit after each round, in cents; integral under sampled
    /// scoring.
    pub profit_cents: Vec<f64>,
}

impl ProfitTrace {
    pub fn rounds(&self) -> usize {
        self.errors.len()
    }

    pub fn final_profit(&self) -> f64 {
        self.profit_cents.last().copied().unwrap_or(0.0) / 100.0
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("round,cumulative_profit,cumulative_errors\n");
        for (i, (p, e)) in self.profit_cents.iter().zip(&self.errors).enumerate() {
            match self.scoring {
                Scoring::Sampled => {
                    let cents = *p as i64;
                    let sign = if cents < 0 { "-" } else { "" };
                    out.push_str(&format!(
                        "{},{sign}{}.{:02},{}\n",
                        i + 1,
                        cents.abs() / 100,
                        cents.abs() % 100,
                        *e as u64
                    ));
                }
                Scoring::Expected => {
                    out.push_str(&format!("{},{:.16e},{:.16e}\n", i + 1, p / 100.0, e));
                }
            }
        }
        out
    }
}

/// Plays `n` rounds: the outcome path is drawn from the game, the predictor
/// guesses each round before seeing the outcome.
pub fn play(
    spec: &GameSpec,
    predictor: &dyn Predictor,
    n: usize,
    seed: u64,
    scoring: Scoring,
) -> Result<ProfitTrace> {
    let mu = game_measure(spec)?;
    let mut env = ChaCha8Rng::seed_from_u64(seed);
    env.set_stream(ENV_STREAM);
    let mut guess = ChaCha8Rng::seed_from_u64(seed);
    guess.set_stream(PREDICTOR_STREAM);

    let mut world = mu.cursor();
    let mut session = predictor.session();
    let mut errors_sampled: u64 = 0;
    let mut errors_expected = 0.0;
    let mut trace = ProfitTrace {
        dealer: spec.dealer.name.clone(),
        predictor: predictor.name(),
        seed,
        scoring,
        errors: Vec::with_capacity(n),
        profit_cents: Vec::with_capacity(n),
    };
    for round in 1..=n as u64 {
        let r = session.predict()?;
        let y = world.prob_one()?;
        let bit = env.random::<f64>() < y;
        match scoring {
            Scoring::Sampled => {
                // deterministic predictions skip the draw so they cannot
                // depend on the predictor stream
                let predicted = if r == 0.0 || r == 1.0 {
                    r == 1.0
                } else {
                    guess.random::<f64>() < r
                };
                errors_sampled += (predicted != bit) as u64;
                trace.errors.push(errors_sampled as f64);
                trace
                    .profit_cents
                    .push(profit_cents(round, errors_sampled, spec) as f64);
            }
            Scoring::Expected => {
                errors_expected += if bit { 1.0 - r } else { r };
                trace.errors.push(errors_expected);
                trace
                    .profit_cents
                    .push(profit(round as f64, errors_expected, spec) * 100.0);
            }
        }
        world.advance(bit)?;
        session.observe(bit)?;
    }
    Ok(trace)
}

/// Mean cumulative profit per round, in currency units, over games with
/// seeds `first_seed..first_seed + games`.
pub fn mean_profit_curve(
    spec: &GameSpec,
    predictor: &dyn Predictor,
    n: usize,
    first_seed: u64,
    games: u64,
) -> Result<Vec<f64>> {
    let traces: Vec<Result<ProfitTrace>> = (first_seed..first_seed + games)
        .into_par_iter()
        .map(|seed| play(spec, predictor, n, seed, Scoring::Sampled))
        .collect();
    let mut sum = vec![0i64; n];
    for t in traces {
        for (s, p) in sum.iter_mut().zip(t?.profit_cents) {
            *s += p as i64;
        }
    }
    Ok(sum
        .into_iter()
        .map(|c| c as f64 / 100.0 / games as f64)
        .collect())
}

/// First round from which the curve stays positive to its end, or `None`
/// when it ends at or below zero.
pub fn crossing_round(curve: &[f64]) -> Option<usize> {
    match curve.iter().rposition(|&p| p <= 0.0) {
        None => Some(1),
        Some(i) if i + 1 == curve.len() => None,
        Some(i) => Some(i + 2),
    }
}

impl fmt::Display for Die {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Die::One => write!(f, "die 1"),
            Die::Two => write!(f, "die 2"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{chain_probability, conditional, BinaryString};
    use crate::predictors::{
        deterministic_wrap, exact_expectations, ConstantPredictor, MeasurePredictor,
    };
    use crate::universal::{complexity_surrogate, mixture};

    const TOL: f64 = 1e-12;

    #[test]
    fn family_has_expected_shape() {
        let fam = rule_family();
        assert_eq!(fam.len(), 2 + 2 + 2 + 12 + 240);
        let mut names: Vec<_> = fam.iter().map(|r| r.name.clone()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), fam.len());
        for r in &fam {
            r.validate().unwrap();
        }
        for r in shipped_rules() {
            assert!(fam.contains(&r), "{}", r.name);
        }
    }

    #[test]
    fn partial_rules_are_rejected() {
        let mut r = DealerRule::clock(Die::One);
        r.next[1] = [0, 2];
        assert!(matches!(
            game_measure(&GameSpec::with_dealer(r)),
            Err(Error::PartialRule(_))
        ));
        let r = DealerRule {
            name: "empty".into(),
            start: 0,
            die: vec![],
            next: vec![],
        };
        assert!(r.validate().is_err());
    }

    #[test]
    fn game_measure_conditionals() {
        let constant = game_measure(&GameSpec::default()).unwrap();
        for s in BinaryString::all_of_length(5) {
            assert!((conditional(&constant, &s, false).unwrap() - 2.0 / 3.0).abs() < TOL);
        }
        let alt = game_measure(&GameSpec::with_dealer(DealerRule::clock(Die::One))).unwrap();
        let black: Vec<f64> = (0..4)
            .map(|t| conditional(&alt, &vec![true; t], false).unwrap())
            .collect();
        for (t, p) in black.iter().enumerate() {
            let want = if t % 2 == 0 { 2.0 / 3.0 } else { 1.0 / 3.0 };
            assert!((p - want).abs() < TOL);
        }
        // die 2 after white, die 1 after black or at the start
        let fb = game_measure(&GameSpec::with_dealer(DealerRule::feedback())).unwrap();
        assert!((conditional(&fb, &[], false).unwrap() - 2.0 / 3.0).abs() < TOL);
        assert!((conditional(&fb, &[false], false).unwrap() - 2.0 / 3.0).abs() < TOL);
        assert!((conditional(&fb, &[true], false).unwrap() - 1.0 / 3.0).abs() < TOL);
        assert!((conditional(&fb, &[true, false], false).unwrap() - 2.0 / 3.0).abs() < TOL);
    }

    #[test]
    fn parity_rule_matches_table_enumeration() {
        let m = game_measure(&GameSpec::with_dealer(DealerRule::parity3())).unwrap();
        for len in 0..=6 {
            for s in BinaryString::all_of_length(len) {
                let last3 = &s[s.len().saturating_sub(3)..];
                let odd = last3.iter().filter(|&&b| b).count() % 2 == 1;
                let want = if odd { 2.0 / 3.0 } else { 1.0 / 3.0 };
                assert!((m.prob_one(&s).unwrap() - want).abs() < TOL, "{s}");
            }
        }
    }

    #[test]
    fn game_measure_marginalizes_and_cursor_agrees() {
        for rule in shipped_rules() {
            let m = game_measure(&GameSpec::with_dealer(rule)).unwrap();
            for len in 0..=8 {
                for s in BinaryString::all_of_length(len) {
                    let p = m.ln_prefix_probability(&s).unwrap().exp();
                    let c0 = m.ln_prefix_probability(&s.extended(false)).unwrap().exp();
                    let c1 = m.ln_prefix_probability(&s.extended(true)).unwrap().exp();
                    assert!((c0 + c1 - p).abs() < 1e-14);
                    assert!((chain_probability(&m, &s).unwrap() - p).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn closed_form_numbers() {
        let spec = GameSpec::default();
        let y: f64 = 1.0 / 3.0;
        let e_mu = 2.0 * y * (1.0 - y);
        let e_theta_mu = y.min(1.0 - y);
        assert!((e_mu - 4.0 / 9.0).abs() < TOL);
        assert!((e_theta_mu - 1.0 / 3.0).abs() < TOL);
        assert!((profit(1.0, e_theta_mu, &spec) - 1.0 / 3.0).abs() < TOL);
        assert!((profit(1.0, e_mu, &spec) + 2.0 / 9.0).abs() < TOL);
        assert!((break_even_error_rate(&spec) - 0.4).abs() < TOL);
        assert!(profit(1.0, 0.4, &spec).abs() < TOL);
        assert_eq!(profit_cents(3, 1, &spec), 1000 - 900);
        let coeff = turnaround_bound(1.0, &spec, 1.0 / 3.0).unwrap();
        assert!((coeff - 330.0 * std::f64::consts::LN_2).abs() < 1e-9);
        assert!((coeff - 228.7).abs() < 0.1);
        let free = GameSpec {
            stake_cents: 0,
            ..spec.clone()
        };
        let coeff = turnaround_bound(1.0, &free, 1.0 / 3.0).unwrap();
        assert!((coeff - 6.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!(matches!(
            turnaround_bound(1.0, &spec, 0.4),
            Err(Error::Unwinnable(_))
        ));
        assert!(turnaround_bound(1.0, &spec, 0.5).is_err());
    }

    #[test]
    fn profit_is_affine_decreasing_in_errors() {
        let spec = GameSpec::default();
        let p = |e: f64| profit(10.0, e, &spec);
        assert!(p(1.0) > p(2.0));
        assert!(((p(1.0) - p(3.0)) - 2.0 * (p(1.0) - p(2.0))).abs() < TOL);
    }

    #[test]
    fn play_reproduces_expected_profit_rates() {
        let spec = GameSpec::default();
        let mu: Arc<dyn SequenceMeasure> = Arc::new(game_measure(&spec).unwrap());
        let theta_mu = deterministic_wrap(Arc::new(MeasurePredictor::new(mu.clone())));
        let t = play(&spec, &theta_mu, 100_000, 1, Scoring::Sampled).unwrap();
        assert!((t.final_profit() / 1e5 - 1.0 / 3.0).abs() < 0.02);
        let white = ConstantPredictor::new(1.0).unwrap();
        let t = play(&spec, &white, 100_000, 2, Scoring::Sampled).unwrap();
        let exact = profit(1.0, 2.0 / 3.0, &spec);
        assert!((exact + 4.0 / 3.0).abs() < TOL);
        // per-round profit has standard deviation 5·sqrt(2/9) ≈ 2.4
        assert!((t.final_profit() / 1e5 - exact).abs() < 4.0 * 2.4 / 1e5f64.sqrt());
        let informed = MeasurePredictor::new(mu);
        let t = play(&spec, &informed, 100_000, 3, Scoring::Expected).unwrap();
        assert!((t.final_profit() / 1e5 + 2.0 / 9.0).abs() < 0.02);
    }

    #[test]
    fn play_is_deterministic() {
        let spec = GameSpec::with_dealer(DealerRule::feedback());
        let p = ConstantPredictor::new(0.4).unwrap();
        let a = play(&spec, &p, 500, 9, Scoring::Sampled).unwrap();
        let b = play(&spec, &p, 500, 9, Scoring::Sampled).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv(), b.to_csv());
        assert_ne!(a, play(&spec, &p, 500, 10, Scoring::Sampled).unwrap());
        let csv = a.to_csv();
        assert_eq!(csv.lines().count(), 501);
    }

    #[test]
    fn complexity_bits_follow_index_code() {
        let class = family_class(&GameSpec::default()).unwrap();
        let sum = class.weight_sum();
        let bits = complexity_surrogate(&class, "const-die1").unwrap();
        assert!((bits - (1.0 + sum.log2())).abs() < 1e-12);
        let bits = complexity_surrogate(&class, "lag1-copy").unwrap();
        assert!((bits - (5.0 + sum.log2())).abs() < 1e-12);
    }

    #[test]
    fn theta_mu_has_best_expected_profit() {
        let spec = GameSpec::with_dealer(DealerRule::feedback());
        let mu: Arc<dyn SequenceMeasure> = Arc::new(game_measure(&spec).unwrap());
        let xi: Arc<dyn SequenceMeasure> = Arc::new(mixture(family_class(&spec).unwrap()).unwrap());
        let theta_mu = deterministic_wrap(Arc::new(MeasurePredictor::new(mu.clone())));
        let n = 10;
        let best = exact_expectations(mu.as_ref(), xi.as_ref(), &theta_mu, n).unwrap();
        let others: Vec<Box<dyn Predictor>> = vec![
            Box::new(MeasurePredictor::new(mu.clone())),
            Box::new(ConstantPredictor::new(1.0).unwrap()),
            Box::new(ConstantPredictor::new(0.5).unwrap()),
        ];
        for k in 1..=n {
            let p_best = profit(k as f64, best.total(k).e_rho, &spec);
            for o in &others {
                let r = exact_expectations(mu.as_ref(), xi.as_ref(), o.as_ref(), n).unwrap();
                assert!(
                    p_best > profit(k as f64, r.total(k).e_rho, &spec),
                    "{} at {k}",
                    o.name()
                );
            }
            let theta_xi = profit(k as f64, best.total(k).e_theta_xi, &spec);
            assert!(p_best >= theta_xi);
        }
    }

    #[test]
    fn crossing_round_definition() {
        assert_eq!(crossing_round(&[1.0, 2.0]), Some(1));
        assert_eq!(crossing_round(&[-1.0, 0.0, 0.5, 1.0]), Some(3));
        assert_eq!(crossing_round(&[-1.0, 0.5, -0.1]), None);
    }
}
