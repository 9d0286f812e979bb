//! Experiment configuration: one TOML file describes the class, the true
//! measure, the predictor, horizons and the per-command sections.

use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use unipred::dicegame::{find_rule, game_measure, GameSpec, Scoring};
use unipred::inequality_lab::{GridSpec, Inequality, DEFAULT_GRID_COUNT, MIN_BOUNDARY_OFFSET};
use unipred::measures::{Bernoulli, DeterministicMeasure, Generator, Markov, SequenceMeasure};
use unipred::predictors::{
    deterministic_wrap, ConstantPredictor, MeasurePredictor, Predictor, DEFAULT_EXACT_HORIZON_CAP,
};
use unipred::universal::{mixture, Component, MixtureMeasure, WeightedClass};

/// A configuration problem, reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<unipred::Error> for ConfigError {
    fn from(e: unipred::Error) -> Self {
        ConfigError(e.to_string())
    }
}

pub type ConfigResult<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub components: Vec<ComponentSpec>,
    #[serde(default)]
    pub weights: WeightScheme,
    pub true_measure: Option<String>,
    #[serde(default = "default_horizons")]
    pub horizons: Vec<usize>,
    #[serde(default)]
    pub mode: ModeSpec,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
    #[serde(default = "default_rho")]
    pub rho: String,
    #[serde(default = "default_cap")]
    pub exact_horizon_cap: usize,
    #[serde(default)]
    pub inequalities: InequalitySection,
    #[serde(default)]
    pub dicegame: DiceSection,
    #[serde(default)]
    pub semimeasure: SemimeasureSection,
}

fn default_horizons() -> Vec<usize> {
    vec![4, 6, 8, 10, 12, 14]
}

fn default_rho() -> String {
    "xi".into()
}

fn default_cap() -> usize {
    DEFAULT_EXACT_HORIZON_CAP
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum WeightScheme {
    #[default]
    Explicit,
    IndexCode,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ModeSpec {
    #[default]
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ComponentSpec {
    Bernoulli {
        id: String,
        theta: f64,
        weight: Option<f64>,
    },
    Markov {
        id: String,
        order: usize,
        /// Defaults to ½ for every short context.
        start: Option<Vec<f64>>,
        transition: Vec<f64>,
        weight: Option<f64>,
    },
    Deterministic {
        id: String,
        generator: String,
        weight: Option<f64>,
    },
    /// Outcome process of a dice game under the default dice.
    Game {
        id: String,
        dealer: String,
        weight: Option<f64>,
    },
}

impl ComponentSpec {
    fn id(&self) -> &str {
        match self {
            Self::Bernoulli { id, .. }
            | Self::Markov { id, .. }
            | Self::Deterministic { id, .. }
            | Self::Game { id, .. } => id,
        }
    }

    fn weight(&self) -> Option<f64> {
        match self {
            Self::Bernoulli { weight, .. }
            | Self::Markov { weight, .. }
            | Self::Deterministic { weight, .. }
            | Self::Game { weight, .. } => *weight,
        }
    }

    fn build(&self) -> ConfigResult<Arc<dyn SequenceMeasure>> {
        Ok(match self {
            Self::Bernoulli { theta, .. } => Arc::new(Bernoulli::new(*theta)?),
            Self::Markov {
                order,
                start,
                transition,
                ..
            } => {
                let m = match start {
                    Some(s) => Markov::new(*order, s.clone(), transition.clone())?,
                    None => Markov::with_uniform_start(*order, transition.clone())?,
                };
                Arc::new(m)
            }
            Self::Deterministic { generator, .. } => {
                Arc::new(DeterministicMeasure::new(Generator::parse(generator)?))
            }
            Self::Game { dealer, .. } => {
                Arc::new(game_measure(&GameSpec::with_dealer(find_rule(dealer)?))?)
            }
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InequalitySection {
    #[serde(default = "default_grid_count")]
    pub grid_count: usize,
    #[serde(default = "default_eps_b")]
    pub eps_b: f64,
    #[serde(default = "default_true")]
    pub refine: bool,
    #[serde(default = "default_pairs")]
    pub samples: usize,
    #[serde(default = "default_ineq_seed")]
    pub seed: u64,
    #[serde(default = "default_which")]
    pub which: Vec<String>,
    #[serde(default)]
    pub explore: Vec<ExploreSpec>,
}

impl Default for InequalitySection {
    fn default() -> Self {
        Self {
            grid_count: default_grid_count(),
            eps_b: default_eps_b(),
            refine: true,
            samples: default_pairs(),
            seed: default_ineq_seed(),
            which: default_which(),
            explore: Vec::new(),
        }
    }
}

fn default_grid_count() -> usize {
    DEFAULT_GRID_COUNT
}
fn default_eps_b() -> f64 {
    MIN_BOUNDARY_OFFSET
}
fn default_true() -> bool {
    true
}
fn default_pairs() -> usize {
    100
}
fn default_ineq_seed() -> u64 {
    7
}
fn default_which() -> Vec<String> {
    Inequality::ALL
        .iter()
        .map(|i| i.name().to_string())
        .collect()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExploreSpec {
    pub inequality: String,
    pub a: f64,
    pub b: f64,
}

impl InequalitySection {
    pub fn grid(&self) -> ConfigResult<GridSpec> {
        let g = GridSpec {
            count: self.grid_count,
            eps_b: self.eps_b,
            refine: self.refine,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn inequalities(&self) -> ConfigResult<Vec<Inequality>> {
        self.which
            .iter()
            .map(|s| Inequality::parse(s).map_err(Into::into))
            .collect()
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiceSection {
    #[serde(default = "default_stake")]
    pub stake_cents: u64,
    #[serde(default = "default_payout")]
    pub payout_cents: u64,
    #[serde(default = "default_dealer")]
    pub dealer: String,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default = "default_games")]
    pub games: u64,
    #[serde(default = "default_predictors")]
    pub predictors: Vec<String>,
    #[serde(default = "default_scoring")]
    pub scoring: Scoring,
}

impl Default for DiceSection {
    fn default() -> Self {
        Self {
            stake_cents: default_stake(),
            payout_cents: default_payout(),
            dealer: default_dealer(),
            rounds: default_rounds(),
            games: default_games(),
            predictors: default_predictors(),
            scoring: default_scoring(),
        }
    }
}

fn default_stake() -> u64 {
    unipred::dicegame::DEFAULT_STAKE_CENTS
}
fn default_payout() -> u64 {
    unipred::dicegame::DEFAULT_PAYOUT_CENTS
}
fn default_dealer() -> String {
    "constant".into()
}
fn default_rounds() -> usize {
    1000
}
fn default_games() -> u64 {
    100
}
fn default_predictors() -> Vec<String> {
    ["theta-mu", "mu", "theta-xi", "xi", "always-white"]
        .map(String::from)
        .to_vec()
}
fn default_scoring() -> Scoring {
    Scoring::Sampled
}

impl DiceSection {
    pub fn spec(&self) -> ConfigResult<GameSpec> {
        let spec = GameSpec {
            stake_cents: self.stake_cents,
            payout_cents: self.payout_cents,
            ..GameSpec::with_dealer(find_rule(&self.dealer)?)
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemimeasureSection {
    #[serde(default = "default_machine")]
    pub machine: String,
    #[serde(default = "default_sm_cap")]
    pub cap: usize,
    #[serde(default = "default_fuel")]
    pub fuel: u64,
    #[serde(default = "default_depth")]
    pub depth: usize,
}

impl Default for SemimeasureSection {
    fn default() -> Self {
        Self {
            machine: default_machine(),
            cap: default_sm_cap(),
            fuel: default_fuel(),
            depth: default_depth(),
        }
    }
}

fn default_machine() -> String {
    "register".into()
}
fn default_sm_cap() -> usize {
    16
}
fn default_fuel() -> u64 {
    200
}
fn default_depth() -> usize {
    8
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str(DEFAULT_CONFIG).expect("built-in configuration parses")
    }
}

/// Used when no `--config` is given: `B(1/3)` and `B(2/3)` at weight ½,
/// truth `B(2/3)`.
pub const DEFAULT_CONFIG: &str = r#"
true_measure = "b23"
components = [
  { family = "bernoulli", id = "b13", theta = 0.3333333333333333, weight = 0.5 },
  { family = "bernoulli", id = "b23", theta = 0.6666666666666666, weight = 0.5 },
]
"#;

/// Everything the measure pipelines need, built and cross-checked.
pub struct Pipeline {
    pub class: WeightedClass,
    pub mu_id: String,
    pub mu: Arc<dyn SequenceMeasure>,
    pub xi: Arc<MixtureMeasure>,
    pub rho: Arc<dyn Predictor>,
    pub entropy_cap: f64,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> ConfigResult<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| ConfigError(format!("cannot read {}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", p.display())))
            }
        }
    }

    pub fn class(&self) -> ConfigResult<WeightedClass> {
        if self.components.is_empty() {
            return Err(ConfigError("no components configured".into()));
        }
        let measures = self
            .components
            .iter()
            .map(|c| Ok((c.id().to_string(), c.build()?)))
            .collect::<ConfigResult<Vec<_>>>()?;
        Ok(match self.weights {
            WeightScheme::IndexCode => WeightedClass::with_index_code_weights(measures)?,
            WeightScheme::Explicit => WeightedClass::new(
                measures
                    .into_iter()
                    .zip(&self.components)
                    .map(|((id, measure), spec)| {
                        let weight = spec
                            .weight()
                            .ok_or_else(|| ConfigError(format!("component {id} has no weight")))?;
                        Ok(Component {
                            id,
                            measure,
                            weight,
                        })
                    })
                    .collect::<ConfigResult<Vec<_>>>()?,
            )?,
        })
    }

    pub fn pipeline(&self) -> ConfigResult<Pipeline> {
        let class = self.class()?;
        let mu_id = self
            .true_measure
            .clone()
            .ok_or_else(|| ConfigError("true_measure is not set".into()))?;
        let mu = class.get(&mu_id)?.measure.clone();
        let entropy_cap = class.entropy_cap(&mu_id)?;
        let xi = Arc::new(mixture(class.clone())?);
        let rho = self.predictor(&self.rho, &class, &mu, &xi)?;
        for &n in &self.horizons {
            if self.mode == ModeSpec::Exact && n > self.exact_horizon_cap {
                return Err(ConfigError(format!(
                    "horizon {n} exceeds the exact cap {}; use mode = \"monte-carlo\"",
                    self.exact_horizon_cap
                )));
            }
        }
        if self.horizons.is_empty() {
            return Err(ConfigError("no horizons configured".into()));
        }
        Ok(Pipeline {
            class,
            mu_id,
            mu,
            xi,
            rho,
            entropy_cap,
        })
    }

    /// Resolves a predictor name: `mu`, `xi`, `theta-mu`, `theta-xi`,
    /// `always-white`, `always-black`, `constant:<r>`, `component:<id>`.
    pub fn predictor(
        &self,
        name: &str,
        class: &WeightedClass,
        mu: &Arc<dyn SequenceMeasure>,
        xi: &Arc<MixtureMeasure>,
    ) -> ConfigResult<Arc<dyn Predictor>> {
        resolve_predictor(name, Some(class), mu, xi)
    }

    /// Monte Carlo seed; mandatory in that mode.
    pub fn mc_seed(&self, cli_seed: Option<u64>) -> ConfigResult<u64> {
        cli_seed.or(self.seed).ok_or_else(|| {
            ConfigError("monte-carlo mode needs a seed (config `seed` or --seed)".into())
        })
    }
}

pub fn resolve_predictor(
    name: &str,
    class: Option<&WeightedClass>,
    mu: &Arc<dyn SequenceMeasure>,
    xi: &Arc<MixtureMeasure>,
) -> ConfigResult<Arc<dyn Predictor>> {
    let of = |m: Arc<dyn SequenceMeasure>| Arc::new(MeasurePredictor::new(m)) as Arc<dyn Predictor>;
    Ok(match name {
        "mu" => of(mu.clone()),
        "xi" => of(xi.clone()),
        "theta-mu" => Arc::new(deterministic_wrap(of(mu.clone()))),
        "theta-xi" => Arc::new(deterministic_wrap(of(xi.clone()))),
        "always-white" => Arc::new(ConstantPredictor::new(1.0)?),
        "always-black" => Arc::new(ConstantPredictor::new(0.0)?),
        other => {
            if let Some(r) = other.strip_prefix("constant:") {
                let r: f64 = r
                    .parse()
                    .map_err(|_| ConfigError(format!("bad constant predictor '{other}'")))?;
                Arc::new(ConstantPredictor::new(r)?)
            } else if let (Some(id), Some(class)) = (other.strip_prefix("component:"), class) {
                of(class.get(id)?.measure.clone())
            } else {
                return Err(ConfigError(format!("unknown predictor '{other}'")));
            }
        }
    })
}
