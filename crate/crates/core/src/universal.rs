//! Bayes mixtures over a finite weighted class of measures.
//!
//! `ξ(s) = Σ w_i ν_i(s) / Σ w_i`. Because every term is non-negative,
//! `w_ν ν(s) ≤ (Σw) ξ(s)` holds exactly for each component, and the
//! log-ratio `ln(μ(s)/ξ(s))` never exceeds `ln(Σw / w_μ)` when `μ` is in the
//! class. That constant is the mixture's stand-in for `ln 2 · K(μ)`.

use std::collections::HashSet;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measures::{log_sum_exp, render, MeasureCursor, SequenceMeasure};

/// Slack allowed on `Σ w ≤ 1` for weights read from decimal configs.
const KRAFT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Component {
    pub id: String,
    pub measure: Arc<dyn SequenceMeasure>,
    pub weight: f64,
}

/// Measures with positive prior weights summing to at most 1.
#[derive(Debug, Clone)]
pub struct WeightedClass {
    components: Vec<Component>,
}

/// Length in bits of the Elias gamma code of `n >= 1`.
pub fn elias_gamma_length(n: u64) -> u32 {
    assert!(n >= 1);
    2 * (63 - n.leading_zeros()) + 1
}

/// Default prior: the `i`-th component (0-based) gets `2^-ℓ` where `ℓ` is
/// the Elias gamma code length of `i + 1`. Sums to less than 1 for any
/// finite class.
pub fn index_code_weight(i: usize) -> f64 {
    (-(elias_gamma_length(i as u64 + 1) as f64)).exp2()
}

impl WeightedClass {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &components {
            if !(c.weight > 0.0 && c.weight.is_finite()) {
                return Err(Error::InvalidClass(format!(
                    "component {:?} has non-positive weight {}",
                    c.id, c.weight
                )));
            }
            if !seen.insert(c.id.as_str()) {
                return Err(Error::InvalidClass(format!(
                    "duplicate component id {:?}",
                    c.id
                )));
            }
        }
        let sum: f64 = components.iter().map(|c| c.weight).sum();
        if sum > 1.0 + KRAFT_SLACK {
            return Err(Error::InvalidClass(format!("weights sum to {sum} > 1")));
        }
        Ok(Self { components })
    }

    /// Weights assigned by [`index_code_weight`] in the given order.
    pub fn with_index_code_weights(
        measures: impl IntoIterator<Item = (String, Arc<dyn SequenceMeasure>)>,
    ) -> Result<Self> {
        Self::new(
            measures
                .into_iter()
                .enumerate()
                .map(|(i, (id, measure))| Component {
                    id,
                    measure,
                    weight: index_code_weight(i),
                })
                .collect(),
        )
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    pub fn get(&self, id: &str) -> Result<&Component> {
        self.components
            .iter()
            .find(|c| c.id == id)
            .ok_or_else(|| Error::UnknownComponent(id.to_string()))
    }

    /// `ln(Σw / w_ν)`: the exact cap on `ln(ν(s)/ξ(s))`.
    pub fn entropy_cap(&self, id: &str) -> Result<f64> {
        Ok((self.weight_sum() / self.get(id)?.weight).ln())
    }
}

/// `-log2(w_ν / Σw)` in bits.
pub fn complexity_surrogate(class: &WeightedClass, id: &str) -> Result<f64> {
    Ok(-(class.get(id)?.weight / class.weight_sum()).log2())
}

/// Posterior weights `w_i ν_i(context) / Σ_j w_j ν_j(context)`.
pub fn posterior(class: &WeightedClass, context: &[bool]) -> Result<Vec<(String, f64)>> {
    let logs = class
        .components
        .iter()
        .map(|c| Ok(c.weight.ln() + c.measure.ln_prefix_probability(context)?))
        .collect::<Result<Vec<f64>>>()?;
    let total = log_sum_exp(logs.iter().copied());
    if total == f64::NEG_INFINITY {
        return Err(Error::NullEvent {
            context: render(context),
        });
    }
    Ok(class
        .components
        .iter()
        .zip(logs)
        .map(|(c, l)| (c.id.clone(), (l - total).exp()))
        .collect())
}

/// The mixture `ξ` of a [`WeightedClass`].
#[derive(Debug, Clone)]
pub struct MixtureMeasure {
    class: WeightedClass,
    ln_weight_sum: f64,
    label: String,
}

pub fn mixture(class: WeightedClass) -> Result<MixtureMeasure> {
    if class.is_empty() {
        return Err(Error::EmptyClass);
    }
    let ln_weight_sum = class.weight_sum().ln();
    let label = format!("xi[{}]", class.components.len());
    Ok(MixtureMeasure {
        class,
        ln_weight_sum,
        label,
    })
}

impl MixtureMeasure {
    pub fn class(&self) -> &WeightedClass {
        &self.class
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

impl SequenceMeasure for MixtureMeasure {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn prob_one(&self, context: &[bool]) -> Result<f64> {
        let mut cursor = self.cursor();
        for &b in context {
            cursor.advance(b)?;
        }
        cursor.prob_one().map_err(|_| Error::NullEvent {
            context: render(context),
        })
    }

    fn ln_prefix_probability(&self, s: &[bool]) -> Result<f64> {
        if s.is_empty() {
            return Ok(0.0);
        }
        let logs = self
            .class
            .components
            .iter()
            .map(|c| Ok(c.weight.ln() + c.measure.ln_prefix_probability(s)?))
            .collect::<Result<Vec<f64>>>()?;
        Ok(log_sum_exp(logs) - self.ln_weight_sum)
    }

    fn cursor(&self) -> Box<dyn MeasureCursor<'_> + '_> {
        Box::new(MixtureCursor {
            mixture: self,
            components: self
                .class
                .components
                .iter()
                .map(|c| c.measure.cursor())
                .collect(),
            ln_joint: self
                .class
                .components
                .iter()
                .map(|c| c.weight.ln())
                .collect(),
        })
    }
}

/// Tracks `ln(w_i ν_i(context))` per component.
struct MixtureCursor<'a> {
    mixture: &'a MixtureMeasure,
    components: Vec<Box<dyn MeasureCursor<'a> + 'a>>,
    ln_joint: Vec<f64>,
}

impl<'a> MeasureCursor<'a> for MixtureCursor<'a> {
    fn prob_one(&self) -> Result<f64> {
        let max = self
            .ln_joint
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::NullEvent {
                context: "<mixture path>".into(),
            });
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for (cursor, &lj) in self.components.iter().zip(&self.ln_joint) {
            if lj == f64::NEG_INFINITY {
                continue;
            }
            let w = (lj - max).exp();
            num += w * cursor.prob_one()?;
            den += w;
        }
        Ok((num / den).clamp(0.0, 1.0))
    }

    fn ln_probability(&self) -> f64 {
        log_sum_exp(self.ln_joint.iter().copied()) - self.mixture.ln_weight_sum
    }

    fn advance(&mut self, bit: bool) -> Result<()> {
        if self.ln_joint.iter().all(|&l| l == f64::NEG_INFINITY) {
            return Err(Error::NullEvent {
                context: "<mixture path>".into(),
            });
        }
        let weights = self.mixture.class.components.iter().map(|c| c.weight);
        for ((cursor, lj), w) in self
            .components
            .iter_mut()
            .zip(self.ln_joint.iter_mut())
            .zip(weights)
        {
            if *lj == f64::NEG_INFINITY {
                continue;
            }
            cursor.advance(bit)?;
            *lj = w.ln() + cursor.ln_probability();
        }
        Ok(())
    }

    fn fork(&self) -> Box<dyn MeasureCursor<'a> + 'a> {
        Box::new(MixtureCursor {
            mixture: self.mixture,
            components: self.components.iter().map(|c| c.fork()).collect(),
            ln_joint: self.ln_joint.clone(),
        })
    }
}
