//! Checks the error relations between `ξ`, `μ`, `ρ` and their thresholded
//! versions on exact expectation reports.
//!
//! A relation `lhs ⋈ rhs` is stored with `margin = rhs - lhs` (or `lhs - rhs`
//! for `>`), so a nonnegative margin always means "holds". A relation passes
//! when its margin is at least `-tolerance`; a strict relation additionally
//! needs a positive margin whenever `H_n > 0`. With `H_n = 0` the strict
//! relations collapse to equalities and are accepted at the boundary.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictors::ExpectationReport;

/// Absolute tolerance on linear-space totals.
pub const TOLERANCE: f64 = 1e-9;

/// Tolerance on `H_n ≤ ln(Σw / w_μ)`.
pub const ENTROPY_CAP_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationRecord {
    pub name: String,
    pub statement: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub strict: bool,
    pub tolerance: f64,
    pub applicable: bool,
    /// Strict relation accepted with zero margin because `H_n = 0`.
    pub boundary: bool,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyBudget {
    pub h: f64,
    /// `ln(Σw / w_μ)` when the report carries it.
    pub cap: Option<f64>,
    /// `cap / ln 2`, the complexity surrogate in bits; informational only.
    pub cap_bits: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub theorem: String,
    pub horizon: usize,
    pub relations: Vec<RelationRecord>,
    pub entropy: EntropyBudget,
}

impl BoundReport {
    pub fn all_passed(&self) -> bool {
        self.relations.iter().all(|r| r.verdict != Verdict::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &RelationRecord> {
        self.relations.iter().filter(|r| r.verdict == Verdict::Fail)
    }

    pub fn get(&self, name: &str) -> Option<&RelationRecord> {
        self.relations.iter().find(|r| r.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} at n = {}", self.theorem, self.horizon);
        let _ = writeln!(
            out,
            "{:<16} {:>24} {:>24} {:>24}  verdict",
            "relation", "lhs", "rhs", "margin"
        );
        for r in &self.relations {
            let verdict = match (r.verdict, r.boundary) {
                (Verdict::Pass, true) => "pass (boundary)",
                (Verdict::Pass, false) => "pass",
                (Verdict::Fail, _) => "FAIL",
                (Verdict::Skipped, _) => "skipped",
            };
            let _ = writeln!(
                out,
                "{:<16} {:>24.16e} {:>24.16e} {:>24.16e}  {verdict}",
                r.name, r.lhs, r.rhs, r.margin
            );
        }
        let _ = write!(out, "H_n = {:.16e}", self.entropy.h);
        if let (Some(cap), Some(bits)) = (self.entropy.cap, self.entropy.cap_bits) {
            let _ = write!(out, ", cap ln(Σw/w_μ) = {cap:.16e} ({bits:.6} bits)");
        }
        out.push('\n');
        out
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Rel {
    Le,
    Lt,
    Gt,
    /// `lhs = rhs` up to tolerance.
    Eq,
}

struct Builder {
    h: f64,
    records: Vec<RelationRecord>,
}

impl Builder {
    fn push(&mut self, name: &str, statement: &str, lhs: f64, rel: Rel, rhs: f64) {
        self.push_with(name, statement, lhs, rel, rhs, TOLERANCE, true);
    }

    #[allow(clippy::too_many_arguments)]
    fn push_with(
        &mut self,
        name: &str,
        statement: &str,
        lhs: f64,
        rel: Rel,
        rhs: f64,
        tolerance: f64,
        applicable: bool,
    ) {
        let margin = match rel {
            Rel::Le | Rel::Lt => rhs - lhs,
            Rel::Gt => lhs - rhs,
            Rel::Eq => -(lhs - rhs).abs(),
        };
        let strict = matches!(rel, Rel::Lt | Rel::Gt);
        let degenerate = self.h == 0.0;
        let (verdict, boundary) = if !applicable {
            (Verdict::Skipped, false)
        } else if margin.is_nan() || margin < -tolerance {
            (Verdict::Fail, false)
        } else if strict && margin <= 0.0 {
            if degenerate {
                (Verdict::Pass, true)
            } else {
                (Verdict::Fail, false)
            }
        } else {
            (Verdict::Pass, strict && degenerate && margin <= tolerance)
        };
        self.records.push(RelationRecord {
            name: name.into(),
            statement: statement.into(),
            lhs,
            rhs,
            margin,
            strict,
            tolerance,
            applicable,
            boundary,
            verdict,
        });
    }

    fn finish(self, theorem: &str, rep: &ExpectationReport) -> BoundReport {
        let cap = rep.entropy_cap();
        BoundReport {
            theorem: theorem.into(),
            horizon: rep.horizon(),
            relations: self.records,
            entropy: EntropyBudget {
                h: self.h,
                cap,
                cap_bits: cap.map(|c| c / std::f64::consts::LN_2),
            },
        }
    }

    fn entropy_cap(&mut self, rep: &ExpectationReport) {
        if let Some(cap) = rep.entropy_cap() {
            self.push_with(
                "H<=cap",
                "H_n <= ln(Σw/w_μ)",
                self.h,
                Rel::Le,
                cap,
                ENTROPY_CAP_TOLERANCE,
                true,
            );
        }
    }
}

fn require_exact(rep: &ExpectationReport, rho_rep: Option<&ExpectationReport>) -> Result<()> {
    if !rep.is_exact() || rho_rep.is_some_and(|r| !r.is_exact()) {
        return Err(Error::RequiresExact);
    }
    if let Some(r) = rho_rep {
        if r.horizon() != rep.horizon() || r.labels().0 != rep.labels().0 {
            return Err(Error::InvalidParameter(
                "rho report must share the true measure and horizon".into(),
            ));
        }
    }
    Ok(())
}

/// Per-step expected `e_ρ` and node-level margin source for `ρ`.
fn rho_source<'a>(
    rep: &'a ExpectationReport,
    rho_rep: Option<&'a ExpectationReport>,
) -> &'a ExpectationReport {
    rho_rep.unwrap_or(rep)
}

/// Error bounds for the probabilistic predictors `μ`, `ξ` and `ρ`, plus the
/// entropy cap.
pub fn check_theorem1(
    rep: &ExpectationReport,
    rho_rep: Option<&ExpectationReport>,
) -> Result<BoundReport> {
    require_exact(rep, rho_rep)?;
    let t = rep.totals();
    let rho = rho_source(rep, rho_rep);
    let e_rho = rho.totals().e_rho;
    let h = t.h;
    let mut b = Builder {
        h,
        records: Vec::new(),
    };

    b.push(
        "1(i).left",
        "|E_ξ - E_μ| <= Δ1",
        (t.e_xi - t.e_mu).abs(),
        Rel::Le,
        t.delta1,
    );
    b.push(
        "1(i).right",
        "Δ1 < H + sqrt(2 E_μ H)",
        t.delta1,
        Rel::Lt,
        h + (2.0 * t.e_mu * h).sqrt(),
    );
    b.push("1(ii)", "Δ2 <= H/2", t.delta2, Rel::Le, 0.5 * h);
    if let Some(cap) = rep.entropy_cap() {
        b.push(
            "1(ii).cap",
            "Δ2 <= ln(Σw/w_μ)/2",
            t.delta2,
            Rel::Le,
            0.5 * cap,
        );
    }
    b.push(
        "1(iii)",
        "E_ξ > Δ2 + E_μ/2",
        t.e_xi,
        Rel::Gt,
        t.delta2 + 0.5 * t.e_mu,
    );
    let applicable = t.e_mu > 2.0 * h;
    let mid = t.e_mu + h - (2.0 * t.e_mu * h).sqrt();
    b.push_with(
        "1(iv).left",
        "E_ξ > E_μ + H - sqrt(2 E_μ H)  [E_μ > 2H]",
        t.e_xi,
        Rel::Gt,
        mid,
        TOLERANCE,
        applicable,
    );
    b.push_with(
        "1(iv).right",
        "E_μ + H - sqrt(2 E_μ H) > H  [E_μ > 2H]",
        mid,
        Rel::Gt,
        h,
        TOLERANCE,
        applicable,
    );
    b.push("1(v)", "E_μ <= 2 E_ρ", t.e_mu, Rel::Le, 2.0 * e_rho);
    let worst = rep
        .steps()
        .iter()
        .zip(rho.steps())
        .map(|(s, r)| (s.e_mu, 2.0 * r.e_rho))
        .min_by(|a, b| (a.1 - a.0).total_cmp(&(b.1 - b.0)));
    if let Some((l, r)) = worst {
        b.push(
            "1(v).step",
            "E[e_μ] <= 2 E[e_ρ] at every step",
            l,
            Rel::Le,
            r,
        );
    }
    if let Some(m) = min_node(rho, |p| p.mu_within_twice_rho) {
        b.push(
            "1(v).node",
            "0 <= 2 e_ρ - e_μ at every node",
            0.0,
            Rel::Le,
            m,
        );
    }
    b.push(
        "1(vi)",
        "E_ξ < 2 E_ρ + H + sqrt(4 E_ρ H)",
        t.e_xi,
        Rel::Lt,
        2.0 * e_rho + h + (4.0 * e_rho * h).sqrt(),
    );
    b.entropy_cap(rep);
    Ok(b.finish("theorem 1", rep))
}

/// Error bounds for the deterministic predictors `Θμ` and `Θξ` against `ρ`,
/// plus the entropy cap.
pub fn check_theorem2(
    rep: &ExpectationReport,
    rho_rep: Option<&ExpectationReport>,
) -> Result<BoundReport> {
    require_exact(rep, rho_rep)?;
    let t = rep.totals();
    let rho = rho_source(rep, rho_rep);
    let e_rho = rho.totals().e_rho;
    let h = t.h;
    let gap = t.e_theta_xi - t.e_theta_mu;
    let mut b = Builder {
        h,
        records: Vec::new(),
    };

    b.push("2(i).left", "0 <= E_Θξ - E_Θμ", 0.0, Rel::Le, gap);
    b.push(
        "2(i).sum",
        "E_Θξ - E_Θμ = Σ E|e_Θξ - e_Θμ|",
        gap,
        Rel::Eq,
        t.theta_gap,
    );
    b.push(
        "2(i).right",
        "E_Θξ - E_Θμ < H + sqrt(4 E_Θμ H + H²)",
        gap,
        Rel::Lt,
        h + (4.0 * t.e_theta_mu * h + h * h).sqrt(),
    );
    b.push("2(ii)", "E_Θμ <= E_ρ", t.e_theta_mu, Rel::Le, e_rho);
    let worst = rep
        .steps()
        .iter()
        .zip(rho.steps())
        .map(|(s, r)| (s.e_theta_mu, r.e_rho))
        .min_by(|a, b| (a.1 - a.0).total_cmp(&(b.1 - b.0)));
    if let Some((l, r)) = worst {
        b.push(
            "2(ii).step",
            "E[e_Θμ] <= E[e_ρ] at every step",
            l,
            Rel::Le,
            r,
        );
    }
    if let Some(m) = min_node(rho, |p| p.theta_mu_within_rho) {
        b.push(
            "2(ii).node",
            "0 <= e_ρ - e_Θμ at every node",
            0.0,
            Rel::Le,
            m,
        );
    }
    b.push(
        "2(iii)",
        "E_Θξ < E_ρ + H + sqrt(4 E_ρ H + H²)",
        t.e_theta_xi,
        Rel::Lt,
        e_rho + h + (4.0 * e_rho * h + h * h).sqrt(),
    );
    b.entropy_cap(rep);
    Ok(b.finish("theorem 2", rep))
}

fn min_node(
    rep: &ExpectationReport,
    f: impl Fn(&crate::predictors::PointwiseMargins) -> f64,
) -> Option<f64> {
    rep.pointwise().iter().map(f).min_by(f64::total_cmp)
}

/// Both theorems at every horizon `1..=n` of the report.
pub fn check_every_horizon(
    rep: &ExpectationReport,
    rho_rep: Option<&ExpectationReport>,
) -> Result<Vec<BoundReport>> {
    require_exact(rep, rho_rep)?;
    let mut out = Vec::with_capacity(2 * rep.horizon());
    for k in 1..=rep.horizon() {
        let r = rep.truncated(k)?;
        let rr = rho_rep.map(|x| x.truncated(k)).transpose()?;
        out.push(check_theorem1(&r, rr.as_ref())?);
        out.push(check_theorem2(&r, rr.as_ref())?);
    }
    Ok(out)
}

/// One horizon of a corollary trend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendPoint {
    pub horizon: usize,
    pub e_mu: f64,
    pub e_xi: f64,
    pub e_theta_mu: f64,
    pub e_theta_xi: f64,
    pub h: f64,
    /// `(E_ξ/E_μ - 1)·sqrt(E_μ)` and its envelope `sqrt(2H) + H/sqrt(E_μ)`,
    /// or `E_ξ` against `H` when `E_μ = 0`.
    pub xi: RelationRecord,
    /// `(E_Θξ/E_Θμ - 1)·sqrt(E_Θμ)` against `H/sqrt(E_Θμ) + sqrt(4H + H²/E_Θμ)`,
    /// or `E_Θξ` against `2H` when `E_Θμ = 0`.
    pub theta: RelationRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub points: Vec<TrendPoint>,
}

impl TrendReport {
    pub fn all_passed(&self) -> bool {
        self.points
            .iter()
            .all(|p| p.xi.verdict != Verdict::Fail && p.theta.verdict != Verdict::Fail)
    }
}

/// Relative-error envelopes over a series of exact reports with increasing
/// horizon.
pub fn corollary_trends(series: &[ExpectationReport]) -> Result<TrendReport> {
    let mut points = Vec::with_capacity(series.len());
    let mut prev: Option<(usize, f64)> = None;
    for rep in series {
        if !rep.is_exact() {
            return Err(Error::RequiresExact);
        }
        let t = rep.totals();
        if let Some((n, e)) = prev {
            if rep.horizon() <= n || t.e_mu < e {
                return Err(Error::NonMonotone(format!(
                    "horizon {} with E_μ = {} follows horizon {n} with E_μ = {e}",
                    rep.horizon(),
                    t.e_mu
                )));
            }
        }
        prev = Some((rep.horizon(), t.e_mu));
        let h = t.h;
        let mut b = Builder {
            h,
            records: Vec::new(),
        };
        if t.e_mu > 0.0 {
            b.push(
                "cor1",
                "(E_ξ/E_μ - 1)·sqrt(E_μ) < sqrt(2H) + H/sqrt(E_μ)",
                (t.e_xi / t.e_mu - 1.0) * t.e_mu.sqrt(),
                Rel::Lt,
                (2.0 * h).sqrt() + h / t.e_mu.sqrt(),
            );
        } else {
            b.push("cor1.finite", "E_ξ < H when E_μ = 0", t.e_xi, Rel::Lt, h);
        }
        if t.e_theta_mu > 0.0 {
            let e = t.e_theta_mu;
            b.push(
                "cor2",
                "(E_Θξ/E_Θμ - 1)·sqrt(E_Θμ) < H/sqrt(E_Θμ) + sqrt(4H + H²/E_Θμ)",
                (t.e_theta_xi / e - 1.0) * e.sqrt(),
                Rel::Lt,
                h / e.sqrt() + (4.0 * h + h * h / e).sqrt(),
            );
        } else {
            b.push(
                "cor2.finite",
                "E_Θξ < 2H when E_Θμ = 0",
                t.e_theta_xi,
                Rel::Lt,
                2.0 * h,
            );
        }
        let mut rec = b.records.into_iter();
        points.push(TrendPoint {
            horizon: rep.horizon(),
            e_mu: t.e_mu,
            e_xi: t.e_xi,
            e_theta_mu: t.e_theta_mu,
            e_theta_xi: t.e_theta_xi,
            h,
            xi: rec.next().expect("two records"),
            theta: rec.next().expect("two records"),
        });
    }
    Ok(TrendReport { points })
}
