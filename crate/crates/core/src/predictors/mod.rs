//! Predictors and the per-step error, distance and entropy quantities.
//!
//! At a fixed context the true measure, the mixture and a predictor each
//! contribute one number: `y = μ(1 | x)`, `z = ξ(1 | x)` and `r = ρ(1 | x)`.
//! Every per-step functional is a closed form in these three values, see
//! [`StepQuantities`].

mod expectations;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{MeasureCursor, SequenceMeasure};

pub use expectations::{
    exact_expectations, exact_expectations_with, monte_carlo_expectations, ExactOptions,
    ExpectationReport, Functionals, Mode, PointwiseMargins, DEFAULT_EXACT_HORIZON_CAP,
    REPORT_SCHEMA_VERSION,
};

/// What a thresholding predictor outputs when the probability is exactly ½.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TieRule {
    PredictZero,
    PredictOne,
}

/// The tie rule used everywhere unless a caller asks otherwise.
pub const DEFAULT_TIE: TieRule = TieRule::PredictZero;

/// `Θ(p - ½)` as 0 or 1.
pub fn threshold(p: f64, tie: TieRule) -> f64 {
    if p > 0.5 {
        1.0
    } else if p < 0.5 {
        0.0
    } else {
        match tie {
            TieRule::PredictZero => 0.0,
            TieRule::PredictOne => 1.0,
        }
    }
}

/// Something that, given the past, outputs the probability with which it
/// predicts the next bit to be 1.
pub trait Predictor: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    fn predict(&self, context: &[bool]) -> Result<f64>;

    /// Incremental view along one path.
    fn session(&self) -> Box<dyn PredictorSession<'_> + '_>;
}

pub trait PredictorSession<'a> {
    fn predict(&self) -> Result<f64>;

    fn observe(&mut self, bit: bool) -> Result<()>;

    fn fork(&self) -> Box<dyn PredictorSession<'a> + 'a>;
}

/// Predicts with the conditionals of a measure: `ρ = μ` (informed) or
/// `ρ = ξ` (universal).
#[derive(Debug, Clone)]
pub struct MeasurePredictor {
    measure: Arc<dyn SequenceMeasure>,
}

impl MeasurePredictor {
    pub fn new(measure: Arc<dyn SequenceMeasure>) -> Self {
        Self { measure }
    }
}

impl Predictor for MeasurePredictor {
    fn name(&self) -> String {
        self.measure.name()
    }

    fn predict(&self, context: &[bool]) -> Result<f64> {
        crate::measures::conditional(self.measure.as_ref(), context, true)
    }

    fn session(&self) -> Box<dyn PredictorSession<'_> + '_> {
        Box::new(CursorSession(self.measure.cursor()))
    }
}

struct CursorSession<'a>(Box<dyn MeasureCursor<'a> + 'a>);

impl<'a> PredictorSession<'a> for CursorSession<'a> {
    fn predict(&self) -> Result<f64> {
        self.0.prob_one()
    }

    fn observe(&mut self, bit: bool) -> Result<()> {
        self.0.advance(bit)
    }

    fn fork(&self) -> Box<dyn PredictorSession<'a> + 'a> {
        Box::new(CursorSession(self.0.fork()))
    }
}

/// Always predicts 1 with probability `r`.
#[derive(Debug, Clone, Copy)]
pub struct ConstantPredictor {
    r: f64,
}

impl ConstantPredictor {
    pub fn new(r: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::InvalidParameter(format!(
                "constant prediction {r} outside [0,1]"
            )));
        }
        Ok(Self { r })
    }
}

impl Predictor for ConstantPredictor {
    fn name(&self) -> String {
        format!("constant({})", self.r)
    }

    fn predict(&self, _context: &[bool]) -> Result<f64> {
        Ok(self.r)
    }

    fn session(&self) -> Box<dyn PredictorSession<'_> + '_> {
        Box::new(*self)
    }
}

impl<'a> PredictorSession<'a> for ConstantPredictor {
    fn predict(&self) -> Result<f64> {
        Ok(self.r)
    }

    fn observe(&mut self, _bit: bool) -> Result<()> {
        Ok(())
    }

    fn fork(&self) -> Box<dyn PredictorSession<'a> + 'a> {
        Box::new(*self)
    }
}

/// `Θ_ρ`: predicts 1 exactly when `ρ` gives 1 more than ½.
#[derive(Debug, Clone)]
pub struct Thresholded {
    inner: Arc<dyn Predictor>,
    tie: TieRule,
}

impl Thresholded {
    pub fn with_tie(inner: Arc<dyn Predictor>, tie: TieRule) -> Self {
        Self { inner, tie }
    }
}

pub fn deterministic_wrap(p: Arc<dyn Predictor>) -> Thresholded {
    Thresholded::with_tie(p, DEFAULT_TIE)
}

impl Predictor for Thresholded {
    fn name(&self) -> String {
        format!("theta({})", self.inner.name())
    }

    fn predict(&self, context: &[bool]) -> Result<f64> {
        Ok(threshold(self.inner.predict(context)?, self.tie))
    }

    fn session(&self) -> Box<dyn PredictorSession<'_> + '_> {
        Box::new(ThresholdSession {
            inner: self.inner.session(),
            tie: self.tie,
        })
    }
}

struct ThresholdSession<'a> {
    inner: Box<dyn PredictorSession<'a> + 'a>,
    tie: TieRule,
}

impl<'a> PredictorSession<'a> for ThresholdSession<'a> {
    fn predict(&self) -> Result<f64> {
        Ok(threshold(self.inner.predict()?, self.tie))
    }

    fn observe(&mut self, bit: bool) -> Result<()> {
        self.inner.observe(bit)
    }

    fn fork(&self) -> Box<dyn PredictorSession<'a> + 'a> {
        Box::new(ThresholdSession {
            inner: self.inner.fork(),
            tie: self.tie,
        })
    }
}

/// `ln(1 + x) - x`, accurate for small `|x|`.
fn ln1p_minus_x(x: f64) -> f64 {
    if x.abs() < 0.1 {
        // -x²/2 + x³/3 - ...; 18 terms reach 1e-18 relative at |x| = 0.1
        let mut term = x;
        let mut sum = 0.0;
        for k in 2..=20 {
            term *= -x;
            sum += term / k as f64;
        }
        sum
    } else {
        x.ln_1p() - x
    }
}

/// Binary relative entropy `y ln(y/z) + (1-y) ln((1-y)/(1-z))` in nats,
/// with `0 ln 0 = 0`.
///
/// Near `y = z` the two terms cancel to first order; the difference is
/// evaluated as `δ²/(z(1-z))` plus two second-order remainders so the
/// result keeps its relative accuracy as `δ = y - z` shrinks.
pub fn binary_kl(y: f64, z: f64) -> f64 {
    if y == z {
        return 0.0;
    }
    if y == 0.0 {
        return -(-z).ln_1p();
    }
    if y == 1.0 {
        return -z.ln();
    }
    if z <= 0.0 || z >= 1.0 {
        return f64::INFINITY;
    }
    let d = y - z;
    let u = d / z;
    let v = -d / (1.0 - z);
    d * d / (z * (1.0 - z)) + y * ln1p_minus_x(u) + (1.0 - y) * ln1p_minus_x(v)
}

/// Error schemes whose per-step error follows from `(y, z, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Mu,
    Xi,
    Rho,
    ThetaMu,
    ThetaXi,
}

/// `y`, `z` and optionally `r` at one context, with the derived quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepQuantities {
    pub y: f64,
    pub z: f64,
    pub r: Option<f64>,
    pub tie: TieRule,
}

impl StepQuantities {
    pub fn new(y: f64, z: f64, r: Option<f64>) -> Self {
        Self {
            y,
            z,
            r,
            tie: DEFAULT_TIE,
        }
    }

    pub fn with_tie(mut self, tie: TieRule) -> Self {
        self.tie = tie;
        self
    }

    /// `2y(1-y)`
    pub fn e_mu(&self) -> f64 {
        2.0 * self.y * (1.0 - self.y)
    }

    /// `y(1-z) + (1-y)z`
    pub fn e_xi(&self) -> f64 {
        self.y * (1.0 - self.z) + (1.0 - self.y) * self.z
    }

    /// `y(1-r) + (1-y)r`
    pub fn e_rho(&self) -> Option<f64> {
        self.r.map(|r| self.y * (1.0 - r) + (1.0 - self.y) * r)
    }

    /// `|y - z|`
    pub fn d(&self) -> f64 {
        (self.y - self.z).abs()
    }

    pub fn h(&self) -> f64 {
        binary_kl(self.y, self.z)
    }

    /// `|y - Θ(z - ½)|`
    pub fn e_theta_xi(&self) -> f64 {
        (self.y - threshold(self.z, self.tie)).abs()
    }

    /// `min{y, 1-y}`
    pub fn e_theta_mu(&self) -> f64 {
        self.y.min(1.0 - self.y)
    }
}

pub fn step_error(q: &StepQuantities, scheme: Scheme) -> Result<f64> {
    Ok(match scheme {
        Scheme::Mu => q.e_mu(),
        Scheme::Xi => q.e_xi(),
        Scheme::Rho => q
            .e_rho()
            .ok_or_else(|| Error::InvalidParameter("rho error needs r".into()))?,
        Scheme::ThetaMu => q.e_theta_mu(),
        Scheme::ThetaXi => q.e_theta_xi(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Bernoulli;
    use proptest::prelude::*;

    const EPS: f64 = 1e-15;

    #[test]
    fn step_error_examples() {
        let q = StepQuantities::new(2.0 / 3.0, 0.5, None);
        assert!((step_error(&q, Scheme::Mu).unwrap() - 4.0 / 9.0).abs() < EPS);
        assert!((step_error(&q, Scheme::ThetaMu).unwrap() - 1.0 / 3.0).abs() < EPS);
        // z = ½ is a tie: Θ predicts 0, so the error is P(1) = y.
        assert!((step_error(&q, Scheme::ThetaXi).unwrap() - 2.0 / 3.0).abs() < EPS);
        assert!(step_error(&q, Scheme::Rho).is_err());
        let flipped = q.with_tie(TieRule::PredictOne);
        assert!((flipped.e_theta_xi() - 1.0 / 3.0).abs() < EPS);
    }

    #[test]
    fn deterministic_wrap_examples() {
        for (r, want) in [(0.7, 1.0), (0.5, 0.0), (0.3, 0.0)] {
            let theta = deterministic_wrap(Arc::new(ConstantPredictor::new(r).unwrap()));
            assert_eq!(theta.predict(&[true, false]).unwrap(), want);
            assert_eq!(theta.session().predict().unwrap(), want);
        }
    }

    #[test]
    fn measure_predictor_session_tracks_context() {
        let p = MeasurePredictor::new(Arc::new(
            crate::measures::Markov::new(1, vec![0.5], vec![0.25, 0.8]).unwrap(),
        ));
        let mut s = p.session();
        assert_eq!(s.predict().unwrap(), 0.5);
        s.observe(false).unwrap();
        assert_eq!(s.predict().unwrap(), 0.25);
        let fork = s.fork();
        s.observe(true).unwrap();
        assert_eq!(s.predict().unwrap(), 0.8);
        assert_eq!(fork.predict().unwrap(), 0.25);
        assert_eq!(p.predict(&[false, true]).unwrap(), 0.8);
        let b = MeasurePredictor::new(Arc::new(Bernoulli::new(0.4).unwrap()));
        assert_eq!(b.predict(&[]).unwrap(), 0.4);
    }

    #[test]
    fn binary_kl_reference_values() {
        // (2/3) ln(4/3) + (1/3) ln(2/3)
        let want = (2.0 / 3.0) * (4.0f64 / 3.0).ln() + (1.0 / 3.0) * (2.0f64 / 3.0).ln();
        assert!((binary_kl(2.0 / 3.0, 0.5) - want).abs() < 1e-15);
        assert!((want - 0.05663).abs() < 5e-6);
        let direct = 0.9 * (0.9f64 / 0.1).ln() + 0.1 * (0.1f64 / 0.9).ln();
        assert!((binary_kl(0.9, 0.1) - direct).abs() < 1e-14);
        assert!((direct - 1.757).abs() < 1e-3);
        assert_eq!(binary_kl(0.0, 0.5), 2f64.ln());
        assert_eq!(binary_kl(0.3, 0.0), f64::INFINITY);
        assert_eq!(binary_kl(0.4, 0.4), 0.0);
    }

    #[test]
    fn binary_kl_small_gap_matches_series() {
        // KL(½ + δ || ½) = 2δ² + (4/3)δ⁴ + (32/15)δ⁶ + ...
        for &step in &[1e-3f64, 1e-4, 1e-5] {
            let y = 0.5 + step;
            let d = y - 0.5;
            let series = 2.0 * d * d + 4.0 / 3.0 * d.powi(4) + 32.0 / 15.0 * d.powi(6);
            let got = binary_kl(y, 0.5);
            assert!(
                ((got - series) / series).abs() < 1e-12,
                "δ={d}: {got} vs {series}"
            );
        }
    }

    proptest! {
        #[test]
        fn kl_dominates_twice_squared_distance(y in 0.0f64..=1.0, z in 1e-9f64..(1.0 - 1e-9)) {
            let q = StepQuantities::new(y, z, None);
            prop_assert!(q.h() >= 2.0 * q.d() * q.d() - 1e-15);
        }

        #[test]
        fn theta_mu_is_pointwise_optimal(y in 0.0f64..=1.0, z in 1e-9f64..(1.0 - 1e-9), r in 0.0f64..=1.0) {
            let q = StepQuantities::new(y, z, Some(r));
            prop_assert!(q.e_theta_mu() <= q.e_rho().unwrap() + 1e-15);
            prop_assert!(q.e_mu() <= 2.0 * q.e_rho().unwrap() + 1e-15);
            prop_assert!(q.e_theta_mu() <= q.e_theta_xi() + 1e-15);
        }

        #[test]
        fn xi_error_exceeds_half_mu_plus_squared_distance(y in 0.0f64..=1.0, z in 1e-6f64..(1.0 - 1e-6)) {
            let q = StepQuantities::new(y, z, None);
            // difference is exactly z(1-z)
            let gap = q.e_xi() - q.d().powi(2) - 0.5 * q.e_mu();
            prop_assert!((gap - z * (1.0 - z)).abs() < 1e-12);
            prop_assert!(gap > 0.0);
        }

        #[test]
        fn binary_kl_matches_naive_away_from_diagonal(y in 0.01f64..0.99, z in 0.01f64..0.99) {
            prop_assume!((y - z).abs() > 0.05);
            let naive = y * (y / z).ln() + (1.0 - y) * ((1.0 - y) / (1.0 - z)).ln();
            prop_assert!((binary_kl(y, z) - naive).abs() <= 1e-13 * naive.max(1e-3));
        }
    }
}
