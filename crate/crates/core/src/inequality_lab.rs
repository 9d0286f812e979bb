//! Grid scans of the pointwise inequalities the error bounds reduce to.
//!
//! With `P = 2y(1-y)`, `KL = KL(y || z)`:
//!
//! - basic2: `A·P + B·KL - |y-z| > 0` for `A > 0`, `B ≥ 1/(2A) + 1`
//! - basic1: `(A-1)·P + (B-1)·KL + y(1-z) + z(1-y) > 0` for `2AB ≥ 1`, `B > 1`
//! - basic4: `(A+1)·min(y,1-y) + (B+1)·KL - |y - Θ(z-½)| > 0` for `A > 0`,
//!   `B ≥ A/4 + 1/A`
//! - kulbound: `KL - 2(y-z)² ≥ 0`, zero only on `y = z`
//!
//! A scan is evidence at the stated resolution, not a proof.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictors::{binary_kl, threshold, TieRule, DEFAULT_TIE};

pub const DEFAULT_GRID_COUNT: usize = 2000;
pub const MIN_BOUNDARY_OFFSET: f64 = 1e-6;

/// Refinement points per decade between `ε_b` and `REFINE_LIMIT`.
const REFINE_PER_DECADE: usize = 16;
const REFINE_LIMIT: f64 = 0.01;

/// Relative slack when testing admissibility of floating-point boundary
/// samples such as `B = 1/(2A) + 1`.
const ADMISSIBLE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Inequality {
    Basic2,
    Basic1,
    Basic4,
    KlBound,
}

impl Inequality {
    pub const ALL: [Inequality; 4] = [Self::Basic2, Self::Basic1, Self::Basic4, Self::KlBound];

    pub fn name(self) -> &'static str {
        match self {
            Self::Basic2 => "basic2",
            Self::Basic1 => "basic1",
            Self::Basic4 => "basic4",
            Self::KlBound => "kulbound",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|i| i.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown inequality '{s}'")))
    }

    pub fn takes_parameters(self) -> bool {
        self != Self::KlBound
    }

    /// Pointwise value; positive means the inequality holds at `(y, z)`.
    pub fn value(self, a: f64, b: f64, y: f64, z: f64, kl: f64, tie: TieRule) -> f64 {
        match self {
            Self::Basic2 => a * 2.0 * y * (1.0 - y) + b * kl - (y - z).abs(),
            Self::Basic1 => {
                (a - 1.0) * 2.0 * y * (1.0 - y) + (b - 1.0) * kl + y * (1.0 - z) + z * (1.0 - y)
            }
            Self::Basic4 => {
                (a + 1.0) * y.min(1.0 - y) + (b + 1.0) * kl - (y - threshold(z, tie)).abs()
            }
            Self::KlBound => kl - 2.0 * (y - z) * (y - z),
        }
    }

    /// Errors when `(a, b)` lies outside the region where the inequality is
    /// claimed.
    pub fn check_admissible(self, a: f64, b: f64) -> Result<()> {
        let fail = |detail: String| {
            Err(Error::Inadmissible {
                inequality: self.name().into(),
                detail,
            })
        };
        if !a.is_finite() || !b.is_finite() {
            return fail(format!("A = {a}, B = {b} not finite"));
        }
        match self {
            Self::Basic2 => {
                let bound = 1.0 / (2.0 * a) + 1.0;
                if a <= 0.0 || b < bound * (1.0 - ADMISSIBLE_SLACK) {
                    return fail(format!(
                        "need A > 0 and B >= 1/(2A) + 1 = {bound}, got A = {a}, B = {b}"
                    ));
                }
            }
            Self::Basic1 => {
                if b <= 1.0 || 2.0 * a * b < 1.0 - ADMISSIBLE_SLACK {
                    return fail(format!("need B > 1 and 2AB >= 1, got A = {a}, B = {b}"));
                }
            }
            Self::Basic4 => {
                let bound = a / 4.0 + 1.0 / a;
                if a <= 0.0 || b < bound * (1.0 - ADMISSIBLE_SLACK) {
                    return fail(format!(
                        "need A > 0 and B >= A/4 + 1/A = {bound}, got A = {a}, B = {b}"
                    ));
                }
            }
            Self::KlBound => {}
        }
        Ok(())
    }
}

/// The `(y, z)` grid: `count` evenly spaced points on `[ε_b, 1-ε_b]`, plus
/// optional geometric refinement toward both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub count: usize,
    pub eps_b: f64,
    pub refine: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            count: DEFAULT_GRID_COUNT,
            eps_b: MIN_BOUNDARY_OFFSET,
            refine: true,
        }
    }
}

impl GridSpec {
    pub fn with_count(count: usize) -> Self {
        Self {
            count,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count < 2 {
            return Err(Error::InvalidGrid(format!("count {} < 2", self.count)));
        }
        if !(self.eps_b >= MIN_BOUNDARY_OFFSET && self.eps_b < 0.5) {
            return Err(Error::InvalidGrid(format!(
                "boundary offset {} outside [{MIN_BOUNDARY_OFFSET}, 0.5)",
                self.eps_b
            )));
        }
        Ok(())
    }

    /// Sorted, distinct points, all strictly inside `(0, 1)`.
    pub fn points(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let (lo, hi) = (self.eps_b, 1.0 - self.eps_b);
        let step = (hi - lo) / (self.count - 1) as f64;
        let mut pts: Vec<f64> = (0..self.count).map(|i| lo + step * i as f64).collect();
        pts[self.count - 1] = hi;
        if self.refine {
            let mut j = 1;
            loop {
                let p = self.eps_b * 10f64.powf(j as f64 / REFINE_PER_DECADE as f64);
                if p > REFINE_LIMIT || p >= 0.5 {
                    break;
                }
                pts.push(p);
                pts.push(1.0 - p);
                j += 1;
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        Ok(pts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanMode {
    /// Parameters must be admissible.
    Strict,
    /// Any parameters; violations are reported, not raised.
    Explore,
}

/// Minimum of one inequality over the grid for one `(A, B)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginRecord {
    pub a: Option<f64>,
    pub b: Option<f64>,
    /// Minimum over the grid; for kulbound, over points with `y ≠ z`.
    pub min_margin: f64,
    pub argmin_y: f64,
    pub argmin_z: f64,
    /// Minimum over points with `y = z`.
    pub diagonal_min: f64,
    /// Points with a negative value.
    pub violations: u64,
    pub points: u64,
}

impl MarginRecord {
    pub fn holds(&self) -> bool {
        self.violations == 0 && self.min_margin > 0.0 && self.diagonal_min >= 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub inequality: Inequality,
    pub grid: GridSpec,
    pub grid_points: usize,
    pub mode: ScanMode,
    pub tie: TieRule,
    pub records: Vec<MarginRecord>,
}

impl MarginReport {
    pub fn all_hold(&self) -> bool {
        self.records.iter().all(MarginRecord::holds)
    }

    /// The record with the smallest margin.
    pub fn worst(&self) -> Option<&MarginRecord> {
        self.records
            .iter()
            .min_by(|a, b| a.min_margin.total_cmp(&b.min_margin))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "inequality,A,B,min_margin,argmin_y,argmin_z,diagonal_min,violations,points,grid_count,eps_b,refine,mode\n",
        );
        let f = |x: Option<f64>| x.map(|v| format!("{v:.16e}")).unwrap_or_default();
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{},{:.16e},{},{}\n",
                self.inequality.name(),
                f(r.a),
                f(r.b),
                r.min_margin,
                r.argmin_y,
                r.argmin_z,
                r.diagonal_min,
                r.violations,
                r.points,
                self.grid.count,
                self.grid.eps_b,
                self.grid.refine,
                match self.mode {
                    ScanMode::Strict => "strict",
                    ScanMode::Explore => "explore",
                }
            ));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// A grid with its relative-entropy matrix computed once.
#[derive(Debug, Clone)]
pub struct Lab {
    grid: GridSpec,
    points: Vec<f64>,
    /// Row-major `KL(points[i] || points[j])`.
    kl: Vec<f64>,
    tie: TieRule,
}

#[derive(Clone, Copy)]
struct RowMin {
    value: f64,
    j: usize,
    diag: f64,
    violations: u64,
}

impl Lab {
    pub fn new(grid: GridSpec) -> Result<Self> {
        let points = grid.points()?;
        let m = points.len();
        let mut kl = vec![0.0; m * m];
        kl.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
            let y = points[i];
            for (j, v) in row.iter_mut().enumerate() {
                *v = binary_kl(y, points[j]);
            }
        });
        Ok(Self {
            grid,
            points,
            kl,
            tie: DEFAULT_TIE,
        })
    }

    pub fn with_tie(mut self, tie: TieRule) -> Self {
        self.tie = tie;
        self
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    fn scan_one(&self, ineq: Inequality, a: f64, b: f64) -> MarginRecord {
        let m = self.points.len();
        let tie = self.tie;
        let off_diagonal_only = ineq == Inequality::KlBound;
        let rows: Vec<RowMin> = (0..m)
            .into_par_iter()
            .map(|i| {
                let y = self.points[i];
                let kl = &self.kl[i * m..(i + 1) * m];
                let mut best = RowMin {
                    value: f64::INFINITY,
                    j: 0,
                    diag: f64::INFINITY,
                    violations: 0,
                };
                for j in 0..m {
                    let v = ineq.value(a, b, y, self.points[j], kl[j], tie);
                    if v < 0.0 || v.is_nan() {
                        best.violations += 1;
                    }
                    if i == j {
                        best.diag = best.diag.min(v);
                        if off_diagonal_only {
                            continue;
                        }
                    }
                    if v < best.value {
                        best.value = v;
                        best.j = j;
                    }
                }
                best
            })
            .collect();
        let mut rec = MarginRecord {
            a: ineq.takes_parameters().then_some(a),
            b: ineq.takes_parameters().then_some(b),
            min_margin: f64::INFINITY,
            argmin_y: f64::NAN,
            argmin_z: f64::NAN,
            diagonal_min: f64::INFINITY,
            violations: 0,
            points: (m * m) as u64,
        };
        for (i, r) in rows.iter().enumerate() {
            rec.violations += r.violations;
            rec.diagonal_min = rec.diagonal_min.min(r.diag);
            if r.value < rec.min_margin {
                rec.min_margin = r.value;
                rec.argmin_y = self.points[i];
                rec.argmin_z = self.points[r.j];
            }
        }
        rec
    }

    /// Scans `ineq` for every `(A, B)`. Kulbound ignores the parameters and
    /// scans once when `params` is empty.
    pub fn scan(
        &self,
        ineq: Inequality,
        params: &[(f64, f64)],
        mode: ScanMode,
    ) -> Result<MarginReport> {
        if mode == ScanMode::Strict {
            for &(a, b) in params {
                ineq.check_admissible(a, b)?;
            }
        }
        let records = if ineq.takes_parameters() {
            params
                .iter()
                .map(|&(a, b)| self.scan_one(ineq, a, b))
                .collect()
        } else {
            vec![self.scan_one(ineq, f64::NAN, f64::NAN)]
        };
        Ok(MarginReport {
            inequality: ineq,
            grid: self.grid,
            grid_points: self.points.len(),
            mode,
            tie: self.tie,
            records,
        })
    }

    /// For basic4 at row `y`, the `z ≤ ½` minimizing the value.
    pub fn basic4_argmin_z_below_half(&self, a: f64, b: f64, y_index: usize) -> f64 {
        let m = self.points.len();
        let y = self.points[y_index];
        let kl = &self.kl[y_index * m..(y_index + 1) * m];
        let mut best = (f64::INFINITY, f64::NAN);
        for (j, &z) in self.points.iter().enumerate() {
            if z > 0.5 {
                break;
            }
            let v = Inequality::Basic4.value(a, b, y, z, kl[j], self.tie);
            if v < best.0 {
                best = (v, z);
            }
        }
        best.1
    }
}

pub fn check_basic2(grid: GridSpec, params: &[(f64, f64)], mode: ScanMode) -> Result<MarginReport> {
    Lab::new(grid)?.scan(Inequality::Basic2, params, mode)
}

pub fn check_basic1(grid: GridSpec, params: &[(f64, f64)], mode: ScanMode) -> Result<MarginReport> {
    Lab::new(grid)?.scan(Inequality::Basic1, params, mode)
}

pub fn check_basic4(grid: GridSpec, params: &[(f64, f64)], mode: ScanMode) -> Result<MarginReport> {
    Lab::new(grid)?.scan(Inequality::Basic4, params, mode)
}

pub fn check_kulbound(grid: GridSpec) -> Result<MarginReport> {
    Lab::new(grid)?.scan(Inequality::KlBound, &[], ScanMode::Strict)
}

/// Boundary of the admissible region as a function of the free parameter:
/// `B(A)` for basic2 and basic4, `A(B)` for basic1.
pub fn admissibility_boundary(ineq: Inequality, free: f64) -> f64 {
    match ineq {
        Inequality::Basic2 => 1.0 / (2.0 * free) + 1.0,
        Inequality::Basic1 => 1.0 / (2.0 * free),
        Inequality::Basic4 => free / 4.0 + 1.0 / free,
        Inequality::KlBound => f64::NAN,
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

/// `count` admissible `(A, B)` pairs. The first fifth lie exactly on the
/// boundary of the admissible region; the rest are spread log-uniformly
/// above it.
pub fn sample_admissible(ineq: Inequality, count: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let on_boundary = count.div_ceil(5);
    (0..count)
        .map(|k| {
            let excess = if k < on_boundary {
                0.0
            } else {
                log_uniform(&mut rng, 1e-3, 10.0)
            };
            match ineq {
                Inequality::Basic2 | Inequality::Basic4 => {
                    let a = log_uniform(&mut rng, 0.02, 50.0);
                    (a, admissibility_boundary(ineq, a) * (1.0 + excess))
                }
                Inequality::Basic1 => {
                    let b = 1.0 + log_uniform(&mut rng, 1e-3, 20.0);
                    (admissibility_boundary(ineq, b) * (1.0 + excess), b)
                }
                Inequality::KlBound => (f64::NAN, f64::NAN),
            }
        })
        .collect()
}

/// basic1 reduced to `z` at the critical `y`:
/// `2A(z - B)(1 - z - B) - (B - 1)(2z - 1)²`.
pub fn basic1_g(z: f64, a: f64, b: f64) -> f64 {
    2.0 * a * (z - b) * (1.0 - z - b) - (b - 1.0) * (2.0 * z - 1.0).powi(2)
}

/// basic2 reduced to `z`: `2A(B - s(1-z))(B + sz) - sB` with `s = sign(z - y)`.
pub fn basic2_g(z: f64, s: f64, a: f64, b: f64) -> f64 {
    2.0 * a * (b - s * (1.0 - z)) * (b + s * z) - s * b
}

/// Minimizing `y` of the basic4 lower bound on `z = ½`, `y > ½`.
pub fn basic4_y_star(a: f64, b: f64) -> f64 {
    (a + 2.0 * b + 4.0) / (4.0 * (b + 1.0))
}

/// Lower bound of basic4 at `(y*, ½)` with `KL` replaced by `2(y-z)²`:
/// `(4AB - A² - 4) / (8(B+1))`, nonnegative exactly on the admissible region.
pub fn basic4_value_at_y_star(a: f64, b: f64) -> f64 {
    (4.0 * a * b - a * a - 4.0) / (8.0 * (b + 1.0))
}
