//! Expected per-step and cumulative functionals under the true measure,
//! by exact enumeration of the prefix tree or by seeded Monte Carlo.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{threshold, Predictor, PredictorSession, StepQuantities, TieRule, DEFAULT_TIE};
use crate::error::{Error, Result};
use crate::measures::{MeasureCursor, SequenceMeasure};

/// Largest horizon the exact enumerator accepts unless told otherwise.
pub const DEFAULT_EXACT_HORIZON_CAP: usize = 16;

/// Version of the JSON report layout.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

const REPORT_FORMAT: &str = "unipred.expectations";

/// Subtrees rooted at this depth are enumerated in parallel.
const SPLIT_DEPTH: usize = 8;

/// Monte Carlo paths per RNG stream.
const BATCH: u64 = 1024;

/// Telescoping tolerance, relative to `max(1, H)`.
const TELESCOPE_TOL: f64 = 1e-9;

/// The nine expected functionals, either for one step or summed over steps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Functionals {
    pub e_mu: f64,
    pub e_xi: f64,
    pub e_rho: f64,
    pub e_theta_mu: f64,
    pub e_theta_xi: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub h: f64,
    /// Expected `|e_Θξ - e_Θμ|`.
    pub theta_gap: f64,
}

impl Functionals {
    pub const NAMES: [&'static str; 9] = [
        "e_mu",
        "e_xi",
        "e_rho",
        "e_theta_mu",
        "e_theta_xi",
        "delta1",
        "delta2",
        "h",
        "theta_gap",
    ];

    pub fn to_array(&self) -> [f64; 9] {
        [
            self.e_mu,
            self.e_xi,
            self.e_rho,
            self.e_theta_mu,
            self.e_theta_xi,
            self.delta1,
            self.delta2,
            self.h,
            self.theta_gap,
        ]
    }

    pub fn from_array(a: [f64; 9]) -> Self {
        Self {
            e_mu: a[0],
            e_xi: a[1],
            e_rho: a[2],
            e_theta_mu: a[3],
            e_theta_xi: a[4],
            delta1: a[5],
            delta2: a[6],
            h: a[7],
            theta_gap: a[8],
        }
    }

    /// Values of one node: `q` must carry `r`.
    fn at_node(q: &StepQuantities) -> Self {
        let d = q.d();
        let (tm, tx) = (q.e_theta_mu(), q.e_theta_xi());
        Self {
            e_mu: q.e_mu(),
            e_xi: q.e_xi(),
            e_rho: q.e_rho().unwrap_or(f64::NAN),
            e_theta_mu: tm,
            e_theta_xi: tx,
            delta1: d,
            delta2: d * d,
            h: q.h(),
            theta_gap: (tx - tm).abs(),
        }
    }

    fn add_scaled(&mut self, other: &Self, w: f64) {
        let mut a = self.to_array();
        for (x, y) in a.iter_mut().zip(other.to_array()) {
            *x += w * y;
        }
        *self = Self::from_array(a);
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_array(self.to_array().map(f))
    }
}

/// Worst pointwise value over the contexts of one step that `μ` can reach.
///
/// Each margin is nonnegative exactly when the corresponding pointwise
/// inequality holds at every such context.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointwiseMargins {
    /// `h - 2d²`
    pub kl_over_squared_distance: f64,
    /// `e_ξ - d² - e_μ/2`
    pub xi_over_half_mu: f64,
    /// `2e_ρ - e_μ`
    pub mu_within_twice_rho: f64,
    /// `e_ρ - e_Θμ`
    pub theta_mu_within_rho: f64,
    /// `e_Θξ - e_Θμ`
    pub theta_mu_within_theta_xi: f64,
    /// Largest difference between the closed forms and the per-outcome sums
    /// they come from.
    pub closed_form_discrepancy: f64,
}

impl Default for PointwiseMargins {
    fn default() -> Self {
        Self {
            kl_over_squared_distance: f64::INFINITY,
            xi_over_half_mu: f64::INFINITY,
            mu_within_twice_rho: f64::INFINITY,
            theta_mu_within_rho: f64::INFINITY,
            theta_mu_within_theta_xi: f64::INFINITY,
            closed_form_discrepancy: 0.0,
        }
    }
}

impl PointwiseMargins {
    fn record(&mut self, q: &StepQuantities) {
        let r = q.r.unwrap_or(f64::NAN);
        let e_rho = q.e_rho().unwrap_or(f64::NAN);
        let d = q.d();
        self.kl_over_squared_distance = self.kl_over_squared_distance.min(q.h() - 2.0 * d * d);
        self.xi_over_half_mu = self.xi_over_half_mu.min(q.e_xi() - d * d - 0.5 * q.e_mu());
        self.mu_within_twice_rho = self.mu_within_twice_rho.min(2.0 * e_rho - q.e_mu());
        self.theta_mu_within_rho = self.theta_mu_within_rho.min(e_rho - q.e_theta_mu());
        self.theta_mu_within_theta_xi = self
            .theta_mu_within_theta_xi
            .min(q.e_theta_xi() - q.e_theta_mu());

        // Per-outcome forms: index 0 is the outcome 0, index 1 the outcome 1.
        let mu = [1.0 - q.y, q.y];
        let xi = [1.0 - q.z, q.z];
        let rho = [1.0 - r, r];
        let hit = threshold(q.z, q.tie);
        let theta_xi = [1.0 - hit, hit];
        let theta_mu = if q.y > 0.5 || (q.y == 0.5 && threshold(0.5, q.tie) == 1.0) {
            [0.0, 1.0]
        } else {
            [1.0, 0.0]
        };
        let expect = |f: &dyn Fn(usize) -> f64| (0..2).map(|i| mu[i] * f(i)).sum::<f64>();
        let mut worst = [
            (expect(&|i| 1.0 - mu[i]) - q.e_mu()).abs(),
            (expect(&|i| 1.0 - xi[i]) - q.e_xi()).abs(),
            (expect(&|i| 1.0 - rho[i]) - e_rho).abs(),
            (expect(&|i| 1.0 - theta_xi[i]) - q.e_theta_xi()).abs(),
            (expect(&|i| 1.0 - theta_mu[i]) - q.e_theta_mu()).abs(),
            (0.5 * (0..2).map(|i| (xi[i] - mu[i]).abs()).sum::<f64>() - d).abs(),
        ]
        .into_iter()
        .fold(0.0f64, f64::max);
        let h = q.h();
        if h.is_finite() {
            let naive: f64 = (0..2)
                .filter(|&i| mu[i] > 0.0)
                .map(|i| mu[i] * (mu[i] / xi[i]).ln())
                .sum();
            worst = worst.max((naive - h).abs());
        }
        self.closed_form_discrepancy = self.closed_form_discrepancy.max(worst);
    }

    fn merge(&mut self, o: &Self) {
        self.kl_over_squared_distance = self
            .kl_over_squared_distance
            .min(o.kl_over_squared_distance);
        self.xi_over_half_mu = self.xi_over_half_mu.min(o.xi_over_half_mu);
        self.mu_within_twice_rho = self.mu_within_twice_rho.min(o.mu_within_twice_rho);
        self.theta_mu_within_rho = self.theta_mu_within_rho.min(o.theta_mu_within_rho);
        self.theta_mu_within_theta_xi = self
            .theta_mu_within_theta_xi
            .min(o.theta_mu_within_theta_xi);
        self.closed_form_discrepancy = self.closed_form_discrepancy.max(o.closed_form_discrepancy);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Mode {
    Exact,
    MonteCarlo { seed: u64, samples: u64 },
}

/// Per-step expectations up to a horizon, plus whatever the mode can say
/// about their accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationReport {
    horizon: usize,
    mu: String,
    xi: String,
    rho: String,
    mode: Mode,
    tie: TieRule,
    steps: Vec<Functionals>,
    /// Empty in Monte Carlo mode.
    pointwise: Vec<PointwiseMargins>,
    /// `Σ μ(x_1:n) ln(μ(x_1:n)/ξ(x_1:n))` over the leaves.
    h_telescoped: Option<f64>,
    /// Standard errors of the totals at the horizon.
    std_errors: Option<Functionals>,
    entropy_cap: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct ReportFile {
    format: String,
    schema_version: u32,
    totals: Functionals,
    #[serde(flatten)]
    report: ExpectationReport,
}

impl ExpectationReport {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn is_exact(&self) -> bool {
        self.mode == Mode::Exact
    }

    pub fn tie(&self) -> TieRule {
        self.tie
    }

    pub fn labels(&self) -> (&str, &str, &str) {
        (&self.mu, &self.xi, &self.rho)
    }

    /// Expected values at step `t`, `1 ≤ t ≤ horizon`.
    pub fn step(&self, t: usize) -> Functionals {
        self.steps[t - 1]
    }

    pub fn steps(&self) -> &[Functionals] {
        &self.steps
    }

    /// Sums over steps `1..=k`.
    pub fn total(&self, k: usize) -> Functionals {
        let mut acc = Functionals::default();
        for s in &self.steps[..k] {
            acc.add_scaled(s, 1.0);
        }
        acc
    }

    pub fn totals(&self) -> Functionals {
        self.total(self.horizon)
    }

    pub fn pointwise(&self) -> &[PointwiseMargins] {
        &self.pointwise
    }

    pub fn h_telescoped(&self) -> Option<f64> {
        self.h_telescoped
    }

    pub fn std_errors(&self) -> Option<Functionals> {
        self.std_errors
    }

    pub fn entropy_cap(&self) -> Option<f64> {
        self.entropy_cap
    }

    /// Attaches `ln(Σw / w_μ)`, the bound on `H_n` when `μ` is a component
    /// of the mixture.
    pub fn with_entropy_cap(mut self, cap: f64) -> Self {
        self.entropy_cap = Some(cap);
        self
    }

    /// The same report cut at horizon `k ≤ horizon`.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k > self.horizon {
            return Err(Error::InvalidParameter(format!(
                "cannot extend horizon {} to {k}",
                self.horizon
            )));
        }
        let mut out = self.clone();
        out.horizon = k;
        out.steps.truncate(k);
        out.pointwise.truncate(k);
        if k < self.horizon {
            out.h_telescoped = None;
            out.std_errors = None;
        }
        Ok(out)
    }

    /// One row per step: per-step values, then running totals, each with 17
    /// significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step");
        for n in Functionals::NAMES {
            out.push(',');
            out.push_str(n);
        }
        for n in Functionals::NAMES {
            out.push_str(",cum_");
            out.push_str(n);
        }
        out.push('\n');
        let mut cum = Functionals::default();
        for (i, s) in self.steps.iter().enumerate() {
            cum.add_scaled(s, 1.0);
            out.push_str(&(i + 1).to_string());
            for v in s.to_array().into_iter().chain(cum.to_array()) {
                out.push(',');
                out.push_str(&format!("{v:.16e}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ReportFile {
            format: REPORT_FORMAT.into(),
            schema_version: REPORT_SCHEMA_VERSION,
            totals: self.totals(),
            report: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ReportFile = serde_json::from_str(text)?;
        if file.format != REPORT_FORMAT || file.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::Serialization(format!(
                "unsupported report {} v{}",
                file.format, file.schema_version
            )));
        }
        let r = file.report;
        if r.steps.len() != r.horizon {
            return Err(Error::Serialization(
                "step count differs from horizon".into(),
            ));
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ExactOptions {
    pub horizon_cap: usize,
    pub tie: TieRule,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self {
            horizon_cap: DEFAULT_EXACT_HORIZON_CAP,
            tie: DEFAULT_TIE,
        }
    }
}

struct Node<'a> {
    mu: Box<dyn MeasureCursor<'a> + 'a>,
    xi: Box<dyn MeasureCursor<'a> + 'a>,
    rho: Box<dyn PredictorSession<'a> + 'a>,
}

impl<'a> Node<'a> {
    fn root(
        mu: &'a dyn SequenceMeasure,
        xi: &'a dyn SequenceMeasure,
        rho: &'a dyn Predictor,
    ) -> Self {
        Self {
            mu: mu.cursor(),
            xi: xi.cursor(),
            rho: rho.session(),
        }
    }

    fn advance(&mut self, bit: bool) -> Result<()> {
        self.mu.advance(bit)?;
        self.xi.advance(bit)?;
        self.rho.observe(bit)
    }

    fn child(&self, bit: bool) -> Result<Self> {
        let mut c = Self {
            mu: self.mu.fork(),
            xi: self.xi.fork(),
            rho: self.rho.fork(),
        };
        c.advance(bit)?;
        Ok(c)
    }

    fn quantities(&self, tie: TieRule) -> Result<StepQuantities> {
        Ok(StepQuantities::new(
            self.mu.prob_one()?,
            self.xi.prob_one()?,
            Some(self.rho.predict()?),
        )
        .with_tie(tie))
    }
}

struct Accumulator {
    steps: Vec<Functionals>,
    margins: Vec<PointwiseMargins>,
    telescoped: f64,
}

impl Accumulator {
    fn new(n: usize) -> Self {
        Self {
            steps: vec![Functionals::default(); n],
            margins: vec![PointwiseMargins::default(); n],
            telescoped: 0.0,
        }
    }

    fn merge(&mut self, o: &Self) {
        for (a, b) in self.steps.iter_mut().zip(&o.steps) {
            a.add_scaled(b, 1.0);
        }
        for (a, b) in self.margins.iter_mut().zip(&o.margins) {
            a.merge(b);
        }
        self.telescoped += o.telescoped;
    }
}

struct Walk<'w> {
    n: usize,
    tie: TieRule,
    /// Stop descending here and record the prefix instead.
    split: Option<usize>,
    frontier: Vec<Vec<bool>>,
    path: Vec<bool>,
    acc: &'w mut Accumulator,
}

impl Walk<'_> {
    fn visit(&mut self, node: &Node<'_>, depth: usize) -> Result<()> {
        let ln_mu = node.mu.ln_probability();
        if depth == self.n {
            let ln_xi = node.xi.ln_probability();
            self.acc.telescoped += ln_mu.exp() * (ln_mu - ln_xi);
            return Ok(());
        }
        if self.split == Some(depth) {
            self.frontier.push(self.path.clone());
            return Ok(());
        }
        let w = ln_mu.exp();
        let q = node.quantities(self.tie)?;
        self.acc.steps[depth].add_scaled(&Functionals::at_node(&q), w);
        self.acc.margins[depth].record(&q);
        for bit in [false, true] {
            let p = if bit { q.y } else { 1.0 - q.y };
            if p == 0.0 {
                continue;
            }
            let child = node.child(bit)?;
            self.path.push(bit);
            self.visit(&child, depth + 1)?;
            self.path.pop();
        }
        Ok(())
    }
}

/// Exact expectations under `mu` over all `2^n` prefixes, skipping
/// subtrees of probability zero.
pub fn exact_expectations(
    mu: &dyn SequenceMeasure,
    xi: &dyn SequenceMeasure,
    rho: &dyn Predictor,
    n: usize,
) -> Result<ExpectationReport> {
    exact_expectations_with(mu, xi, rho, n, ExactOptions::default())
}

pub fn exact_expectations_with(
    mu: &dyn SequenceMeasure,
    xi: &dyn SequenceMeasure,
    rho: &dyn Predictor,
    n: usize,
    opts: ExactOptions,
) -> Result<ExpectationReport> {
    if n > opts.horizon_cap {
        return Err(Error::HorizonOverCap {
            horizon: n,
            cap: opts.horizon_cap,
        });
    }
    let mut top = Accumulator::new(n);
    let split = (n > SPLIT_DEPTH).then_some(SPLIT_DEPTH);
    let frontier = {
        let mut walk = Walk {
            n,
            tie: opts.tie,
            split,
            frontier: Vec::new(),
            path: Vec::new(),
            acc: &mut top,
        };
        walk.visit(&Node::root(mu, xi, rho), 0)?;
        walk.frontier
    };
    let parts: Vec<Result<Accumulator>> = frontier
        .par_iter()
        .map(|prefix| {
            let mut node = Node::root(mu, xi, rho);
            for &b in prefix {
                node.advance(b)?;
            }
            let mut acc = Accumulator::new(n);
            let mut walk = Walk {
                n,
                tie: opts.tie,
                split: None,
                frontier: Vec::new(),
                path: prefix.clone(),
                acc: &mut acc,
            };
            walk.visit(&node, prefix.len())?;
            Ok(acc)
        })
        .collect();
    for part in parts {
        top.merge(&part?);
    }

    let h_sum: f64 = top.steps.iter().map(|s| s.h).sum();
    if h_sum.is_finite() && (h_sum - top.telescoped).abs() > TELESCOPE_TOL * h_sum.abs().max(1.0) {
        return Err(Error::Inconsistent(format!(
            "per-step entropy sum {h_sum} differs from telescoped {}",
            top.telescoped
        )));
    }
    Ok(ExpectationReport {
        horizon: n,
        mu: mu.name(),
        xi: xi.name(),
        rho: rho.name(),
        mode: Mode::Exact,
        tie: opts.tie,
        steps: top.steps,
        pointwise: top.margins,
        h_telescoped: Some(top.telescoped),
        std_errors: None,
        entropy_cap: None,
    })
}

struct Batch {
    steps: Vec<Functionals>,
    sum: Functionals,
    sum_sq: Functionals,
}

fn run_batch(
    mu: &dyn SequenceMeasure,
    xi: &dyn SequenceMeasure,
    rho: &dyn Predictor,
    n: usize,
    paths: u64,
    rng: &mut ChaCha8Rng,
) -> Result<Batch> {
    let mut b = Batch {
        steps: vec![Functionals::default(); n],
        sum: Functionals::default(),
        sum_sq: Functionals::default(),
    };
    for _ in 0..paths {
        let mut node = Node::root(mu, xi, rho);
        let mut path_total = Functionals::default();
        for t in 0..n {
            let q = node.quantities(DEFAULT_TIE)?;
            let f = Functionals::at_node(&q);
            b.steps[t].add_scaled(&f, 1.0);
            path_total.add_scaled(&f, 1.0);
            if t + 1 < n {
                let bit = rng.random::<f64>() < q.y;
                node.advance(bit)?;
            }
        }
        b.sum.add_scaled(&path_total, 1.0);
        b.sum_sq.add_scaled(&path_total.map(|v| v * v), 1.0);
    }
    Ok(b)
}

/// Monte Carlo estimate from `samples` paths drawn from `mu`.
///
/// Along each path the per-step values are the exact conditional
/// expectations at the visited contexts, so only the path is random.
/// Path `j` belongs to RNG stream `j / 1024`, which makes the result
/// independent of the thread count.
pub fn monte_carlo_expectations(
    mu: &dyn SequenceMeasure,
    xi: &dyn SequenceMeasure,
    rho: &dyn Predictor,
    n: usize,
    samples: u64,
    seed: u64,
) -> Result<ExpectationReport> {
    if samples == 0 {
        return Err(Error::InvalidParameter(
            "Monte Carlo needs at least one sample".into(),
        ));
    }
    let batches = samples.div_ceil(BATCH);
    let parts: Vec<Result<Batch>> = (0..batches)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let paths = BATCH.min(samples - i * BATCH);
            run_batch(mu, xi, rho, n, paths, &mut rng)
        })
        .collect();
    let mut steps = vec![Functionals::default(); n];
    let mut sum = Functionals::default();
    let mut sum_sq = Functionals::default();
    for part in parts {
        let part = part?;
        for (a, b) in steps.iter_mut().zip(&part.steps) {
            a.add_scaled(b, 1.0);
        }
        sum.add_scaled(&part.sum, 1.0);
        sum_sq.add_scaled(&part.sum_sq, 1.0);
    }
    let m = samples as f64;
    let steps = steps.iter().map(|s| s.map(|v| v / m)).collect();
    let mean = sum.map(|v| v / m);
    let se = if samples > 1 {
        let mut a = [0.0; 9];
        for (i, (s2, mu)) in sum_sq
            .to_array()
            .into_iter()
            .zip(mean.to_array())
            .enumerate()
        {
            let var = ((s2 - m * mu * mu) / (m - 1.0)).max(0.0);
            a[i] = (var / m).sqrt();
        }
        Functionals::from_array(a)
    } else {
        Functionals::default()
    };
    Ok(ExpectationReport {
        horizon: n,
        mu: mu.name(),
        xi: xi.name(),
        rho: rho.name(),
        mode: Mode::MonteCarlo { seed, samples },
        tie: DEFAULT_TIE,
        steps,
        pointwise: Vec::new(),
        h_telescoped: None,
        std_errors: Some(se),
        entropy_cap: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{Bernoulli, BinaryString, DeterministicMeasure, Generator, Markov};
    use crate::predictors::{ConstantPredictor, MeasurePredictor};
    use crate::universal::{mixture, Component, WeightedClass};
    use std::sync::Arc;

    fn two_bernoulli() -> (Arc<dyn SequenceMeasure>, Arc<dyn SequenceMeasure>) {
        let a: Arc<dyn SequenceMeasure> = Arc::new(Bernoulli::new(1.0 / 3.0).unwrap());
        let b: Arc<dyn SequenceMeasure> = Arc::new(Bernoulli::new(2.0 / 3.0).unwrap());
        let class = WeightedClass::new(vec![
            Component {
                id: "a".into(),
                measure: a,
                weight: 0.5,
            },
            Component {
                id: "b".into(),
                measure: b.clone(),
                weight: 0.5,
            },
        ])
        .unwrap();
        (b, Arc::new(mixture(class).unwrap()))
    }

    /// Sums over every string of length `n` by brute force.
    fn oracle_totals(
        mu: &dyn SequenceMeasure,
        xi: &dyn SequenceMeasure,
        r: f64,
        n: usize,
    ) -> [f64; 9] {
        let mut tot = [0.0; 9];
        for t in 0..n {
            for ctx in BinaryString::all_of_length(t) {
                let p = mu.ln_prefix_probability(&ctx).unwrap().exp();
                if p == 0.0 {
                    continue;
                }
                let y = crate::measures::conditional(mu, &ctx, true).unwrap();
                let z = crate::measures::conditional(xi, &ctx, true).unwrap();
                let kl = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
                let th_z = if z > 0.5 { 1.0 } else { 0.0 };
                let vals = [
                    2.0 * y * (1.0 - y),
                    y * (1.0 - z) + (1.0 - y) * z,
                    y * (1.0 - r) + (1.0 - y) * r,
                    y.min(1.0 - y),
                    (y - th_z).abs(),
                    (y - z).abs(),
                    (y - z).powi(2),
                    kl(y, z) + kl(1.0 - y, 1.0 - z),
                    ((y - th_z).abs() - y.min(1.0 - y)).abs(),
                ];
                for (a, v) in tot.iter_mut().zip(vals) {
                    *a += p * v;
                }
            }
        }
        tot
    }

    #[test]
    fn exact_matches_brute_force_oracle() {
        let (mu, xi) = two_bernoulli();
        let rho = ConstantPredictor::new(0.3).unwrap();
        for n in [0, 1, 3, 7, 11] {
            let rep = exact_expectations(mu.as_ref(), xi.as_ref(), &rho, n).unwrap();
            let want = oracle_totals(mu.as_ref(), xi.as_ref(), 0.3, n);
            for (name, (g, w)) in Functionals::NAMES
                .iter()
                .zip(rep.totals().to_array().iter().zip(want))
            {
                assert!((g - w).abs() < 1e-12, "n={n} {name}: {g} vs {w}");
            }
        }
    }

    #[test]
    fn two_bernoulli_first_step() {
        let (mu, xi) = two_bernoulli();
        let rho = MeasurePredictor::new(xi.clone());
        let rep = exact_expectations(mu.as_ref(), xi.as_ref(), &rho, 1).unwrap();
        let s = rep.step(1);
        assert!((s.e_mu - 4.0 / 9.0).abs() < 1e-15);
        assert!((s.e_xi - 0.5).abs() < 1e-15);
        assert!((s.e_theta_xi - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.e_theta_mu - 1.0 / 3.0).abs() < 1e-15);
        let kl = (2.0 / 3.0) * (4.0f64 / 3.0).ln() + (1.0 / 3.0) * (2.0f64 / 3.0).ln();
        assert!((s.h - kl).abs() < 1e-15);
    }

    #[test]
    fn telescoped_entropy_matches_step_sum() {
        let m1: Arc<dyn SequenceMeasure> =
            Arc::new(Markov::new(1, vec![0.4], vec![0.1, 0.7]).unwrap());
        let m2: Arc<dyn SequenceMeasure> = Arc::new(Bernoulli::new(0.45).unwrap());
        let m3: Arc<dyn SequenceMeasure> =
            Arc::new(DeterministicMeasure::new(Generator::Alternating));
        let class = WeightedClass::new(vec![
            Component {
                id: "m1".into(),
                measure: m1.clone(),
                weight: 0.2,
            },
            Component {
                id: "m2".into(),
                measure: m2,
                weight: 0.3,
            },
            Component {
                id: "m3".into(),
                measure: m3.clone(),
                weight: 0.1,
            },
        ])
        .unwrap();
        let cap_m1 = class.entropy_cap("m1").unwrap();
        let cap_m3 = class.entropy_cap("m3").unwrap();
        let xi = mixture(class).unwrap();
        let rho = ConstantPredictor::new(0.5).unwrap();
        for (mu, cap) in [(m1, cap_m1), (m3, cap_m3)] {
            let rep = exact_expectations(mu.as_ref(), &xi, &rho, 12).unwrap();
            let h = rep.totals().h;
            assert!((h - rep.h_telescoped().unwrap()).abs() < 1e-9);
            assert!(h <= cap + 1e-12);
            let p = rep.pointwise();
            assert!(p.iter().all(|m| m.kl_over_squared_distance >= -1e-15));
            assert!(p.iter().all(|m| m.closed_form_discrepancy < 1e-12));
        }
    }

    #[test]
    fn deterministic_truth_prunes_to_one_path() {
        let mu = DeterministicMeasure::new(Generator::Ones);
        let rho = ConstantPredictor::new(1.0).unwrap();
        let rep = exact_expectations(&mu, &mu, &rho, 16).unwrap();
        let t = rep.totals();
        assert_eq!(t.e_mu, 0.0);
        assert_eq!(t.e_rho, 0.0);
        assert_eq!(t.h, 0.0);
        assert_eq!(t.e_theta_xi, 0.0);
    }

    #[test]
    fn horizon_cap_is_enforced() {
        let mu = Bernoulli::new(0.5).unwrap();
        let rho = ConstantPredictor::new(0.5).unwrap();
        assert_eq!(
            exact_expectations(&mu, &mu, &rho, 17).unwrap_err(),
            Error::HorizonOverCap {
                horizon: 17,
                cap: 16
            }
        );
        let opts = ExactOptions {
            horizon_cap: 4,
            ..Default::default()
        };
        assert!(exact_expectations_with(&mu, &mu, &rho, 5, opts).is_err());
    }

    #[test]
    fn parallel_split_is_deterministic() {
        let (mu, xi) = two_bernoulli();
        let rho = MeasurePredictor::new(xi.clone());
        let a = exact_expectations(mu.as_ref(), xi.as_ref(), &rho, 13).unwrap();
        let b = exact_expectations(mu.as_ref(), xi.as_ref(), &rho, 13).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let c = exact_expectations(mu.as_ref(), xi.as_ref(), &rho, 8).unwrap();
        for k in 1..=8 {
            let (x, y) = (a.step(k).to_array(), c.step(k).to_array());
            for (u, v) in x.iter().zip(y) {
                assert!((u - v).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn tie_rule_changes_only_tied_contexts() {
        let mu = Bernoulli::new(0.7).unwrap();
        let half = Bernoulli::new(0.5).unwrap();
        let rho = ConstantPredictor::new(0.5).unwrap();
        let zero = exact_expectations(&mu, &half, &rho, 3).unwrap();
        let opts = ExactOptions {
            tie: TieRule::PredictOne,
            ..Default::default()
        };
        let one = exact_expectations_with(&mu, &half, &rho, 3, opts).unwrap();
        assert!((zero.totals().e_theta_xi - 3.0 * 0.7).abs() < 1e-12);
        assert!((one.totals().e_theta_xi - 3.0 * 0.3).abs() < 1e-12);
        assert_eq!(zero.totals().e_xi, one.totals().e_xi);
    }

    #[test]
    fn monte_carlo_is_seeded_and_close() {
        let (mu, xi) = two_bernoulli();
        let rho = ConstantPredictor::new(0.3).unwrap();
        let a = monte_carlo_expectations(mu.as_ref(), xi.as_ref(), &rho, 6, 5000, 7).unwrap();
        let b = monte_carlo_expectations(mu.as_ref(), xi.as_ref(), &rho, 6, 5000, 7).unwrap();
        assert_eq!(a, b);
        let exact = exact_expectations(mu.as_ref(), xi.as_ref(), &rho, 6).unwrap();
        let se = a.std_errors().unwrap().to_array();
        for ((m, e), s) in a
            .totals()
            .to_array()
            .iter()
            .zip(exact.totals().to_array())
            .zip(se)
        {
            assert!((m - e).abs() <= 5.0 * s + 1e-12, "{m} vs {e} (se {s})");
        }
        assert!(!a.is_exact());
        assert!(monte_carlo_expectations(mu.as_ref(), xi.as_ref(), &rho, 6, 0, 7).is_err());
    }

    #[test]
    fn truncation_and_serialization() {
        let (mu, xi) = two_bernoulli();
        let rho = ConstantPredictor::new(0.2).unwrap();
        let rep = exact_expectations(mu.as_ref(), xi.as_ref(), &rho, 6)
            .unwrap()
            .with_entropy_cap(2f64.ln());
        let short = rep.truncated(4).unwrap();
        assert_eq!(short.totals(), rep.total(4));
        assert!(short.h_telescoped().is_none());
        assert!(rep.truncated(7).is_err());
        let back = ExpectationReport::from_json(&rep.to_json().unwrap()).unwrap();
        assert_eq!(back, rep);
        let csv = rep.to_csv();
        assert_eq!(csv.lines().count(), 7);
        assert!(csv.starts_with("step,e_mu,e_xi"));
        let last = csv.lines().last().unwrap().split(',').collect::<Vec<_>>();
        let cum_h: f64 = last[1 + 9 + 7].parse().unwrap();
        assert_eq!(cum_h, rep.totals().h);
    }
}
