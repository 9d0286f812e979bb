//! The subcommands. Each writes its artifacts under the output directory and
//! prints a short summary to stdout.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use serde::Serialize;

use unipred::bounds::{check_theorem1, check_theorem2, corollary_trends, BoundReport, TrendReport};
use unipred::dicegame::{
    break_even_error_rate, crossing_round, family_class, game_measure, mean_profit_curve, play,
    turnaround_bound, Die,
};
use unipred::inequality_lab::{sample_admissible, Inequality, Lab, MarginReport, ScanMode};
use unipred::measures::SequenceMeasure;
use unipred::predictors::{
    exact_expectations_with, monte_carlo_expectations, ExactOptions, ExpectationReport, DEFAULT_TIE,
};
use unipred::semimeasure::{
    approximate_m as approximate, EchoMachine, MonotoneMachine, RegisterMachine,
};
use unipred::universal::{complexity_surrogate, mixture};

use crate::config::{
    resolve_predictor, ConfigError, ConfigResult, ExperimentConfig, ModeSpec, Pipeline,
};
use crate::Status;

pub struct Context {
    pub cfg: ExperimentConfig,
    pub out: PathBuf,
    pub seed: Option<u64>,
}

impl Context {
    fn write(&self, name: &str, contents: &str) -> ConfigResult<()> {
        std::fs::create_dir_all(&self.out)
            .map_err(|e| ConfigError(format!("cannot create {}: {e}", self.out.display())))?;
        let path = self.out.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| ConfigError(format!("cannot write {}: {e}", path.display())))
    }
}

fn json<T: Serialize>(value: &T) -> ConfigResult<String> {
    serde_json::to_string_pretty(value).map_err(|e| ConfigError(e.to_string()))
}

fn status(ok: bool) -> Status {
    if ok {
        Status::Ok
    } else {
        Status::Violation
    }
}

fn exact_report(p: &Pipeline, cfg: &ExperimentConfig, n: usize) -> ConfigResult<ExpectationReport> {
    let opts = ExactOptions {
        horizon_cap: cfg.exact_horizon_cap,
        tie: DEFAULT_TIE,
    };
    Ok(
        exact_expectations_with(p.mu.as_ref(), p.xi.as_ref(), p.rho.as_ref(), n, opts)?
            .with_entropy_cap(p.entropy_cap),
    )
}

pub fn verify_bounds(ctx: &Context) -> ConfigResult<Status> {
    let cfg = &ctx.cfg;
    if cfg.mode != ModeSpec::Exact {
        return Err(ConfigError(
            "verify-bounds requires mode = \"exact\"; bounds need exact expectations".into(),
        ));
    }
    if cfg.horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ConfigError("horizons must be strictly increasing".into()));
    }
    let p = cfg.pipeline()?;
    let mut series = Vec::with_capacity(cfg.horizons.len());
    let mut table = String::new();
    let mut ok = true;
    for &n in &cfg.horizons {
        let rep = exact_report(&p, cfg, n)?;
        let reports: [BoundReport; 2] = [check_theorem1(&rep, None)?, check_theorem2(&rep, None)?];
        for b in &reports {
            ok &= b.all_passed();
            table.push_str(&b.to_table());
            table.push('\n');
        }
        ctx.write(&format!("bounds_n{n}.json"), &json(&reports)?)?;
        series.push(rep);
    }
    let trends: TrendReport = corollary_trends(&series)?;
    ok &= trends.all_passed();
    ctx.write("bounds.txt", &table)?;
    ctx.write("trends.json", &json(&trends)?)?;

    println!(
        "true measure {}  class size {}  ln(Σw/w_μ) = {:.6}",
        p.mu_id,
        p.class.len(),
        p.entropy_cap
    );
    println!(
        "{:>4} {:>14} {:>14} {:>14} {:>14} {:>14}",
        "n", "E_mu", "E_xi", "E_theta_mu", "E_theta_xi", "H"
    );
    for point in &trends.points {
        println!(
            "{:>4} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e}",
            point.horizon, point.e_mu, point.e_xi, point.e_theta_mu, point.e_theta_xi, point.h
        );
    }
    println!(
        "{}",
        if ok {
            "all applicable relations hold"
        } else {
            "VIOLATION: see bounds.txt"
        }
    );
    Ok(status(ok))
}

pub fn simulate(ctx: &Context) -> ConfigResult<Status> {
    let cfg = &ctx.cfg;
    let p = cfg.pipeline()?;
    for &n in &cfg.horizons {
        let rep = match cfg.mode {
            ModeSpec::Exact => exact_report(&p, cfg, n)?,
            ModeSpec::MonteCarlo => {
                let samples = cfg
                    .samples
                    .filter(|&s| s > 0)
                    .ok_or_else(|| ConfigError("monte-carlo mode needs samples >= 1".into()))?;
                let seed = cfg.mc_seed(ctx.seed)?;
                monte_carlo_expectations(
                    p.mu.as_ref(),
                    p.xi.as_ref(),
                    p.rho.as_ref(),
                    n,
                    samples,
                    seed,
                )?
                .with_entropy_cap(p.entropy_cap)
            }
        };
        ctx.write(&format!("expectations_n{n}.csv"), &rep.to_csv())?;
        ctx.write(&format!("expectations_n{n}.json"), &rep.to_json()?)?;
        let t = rep.totals();
        println!(
            "n={n:<4} E_mu={:.6e} E_xi={:.6e} E_rho={:.6e} H={:.6e}",
            t.e_mu, t.e_xi, t.e_rho, t.h
        );
    }
    Ok(Status::Ok)
}

pub fn inequalities(ctx: &Context) -> ConfigResult<Status> {
    let sec = &ctx.cfg.inequalities;
    let grid = sec.grid()?;
    let which = sec.inequalities()?;
    let seed = ctx.seed.unwrap_or(sec.seed);
    // Explore parameters are validated before the expensive grid is built.
    let explore = sec
        .explore
        .iter()
        .map(|e| {
            let ineq = Inequality::parse(&e.inequality)?;
            if !ineq.takes_parameters() {
                return Err(ConfigError(format!(
                    "{} has no (A, B) parameters",
                    ineq.name()
                )));
            }
            Ok((ineq, e.a, e.b))
        })
        .collect::<ConfigResult<Vec<_>>>()?;

    let lab = Lab::new(grid)?;
    println!("grid: {} points per axis", lab.points().len());
    let mut ok = true;
    let mut summary = Vec::new();
    for ineq in which {
        let params = if ineq.takes_parameters() {
            sample_admissible(ineq, sec.samples, seed)
        } else {
            Vec::new()
        };
        let report = lab.scan(ineq, &params, ScanMode::Strict)?;
        ok &= report.all_hold();
        emit(ctx, &report, ineq.name(), &mut summary)?;
    }
    for (i, (ineq, a, b)) in explore.into_iter().enumerate() {
        let report = lab.scan(ineq, &[(a, b)], ScanMode::Explore)?;
        emit(
            ctx,
            &report,
            &format!("explore{}_{}", i + 1, ineq.name()),
            &mut summary,
        )?;
    }
    ctx.write("inequalities_summary.json", &json(&summary)?)?;
    Ok(status(ok))
}

#[derive(Serialize)]
struct ScanSummary {
    name: String,
    mode: ScanMode,
    parameter_sets: usize,
    all_hold: bool,
    min_margin: Option<f64>,
    violations: u64,
}

fn emit(
    ctx: &Context,
    report: &MarginReport,
    name: &str,
    summary: &mut Vec<ScanSummary>,
) -> ConfigResult<()> {
    ctx.write(&format!("{name}.csv"), &report.to_csv())?;
    let worst = report.worst();
    let violations: u64 = report.records.iter().map(|r| r.violations).sum();
    println!(
        "{name:<18} {:?} sets={:<4} min margin {:>12.4e} violations {violations}{}",
        report.mode,
        report.records.len(),
        worst.map_or(f64::NAN, |w| w.min_margin),
        match worst {
            Some(w) if !w.holds() => format!(
                " (worst at A={}, B={}, y={:.6e}, z={:.6e})",
                opt(w.a),
                opt(w.b),
                w.argmin_y,
                w.argmin_z
            ),
            _ => String::new(),
        }
    );
    summary.push(ScanSummary {
        name: name.to_string(),
        mode: report.mode,
        parameter_sets: report.records.len(),
        all_hold: report.all_hold(),
        min_margin: worst.map(|w| w.min_margin),
        violations,
    });
    Ok(())
}

#[derive(Serialize)]
struct PredictorSummary {
    predictor: String,
    seed: u64,
    rounds: usize,
    final_profit: f64,
    profit_per_round: f64,
    error_rate: f64,
    mean_profit_per_round: f64,
    games: u64,
    crossing_round: Option<usize>,
}

#[derive(Serialize)]
struct DiceSummary {
    dealer: String,
    stake_cents: u64,
    payout_cents: u64,
    break_even_error_rate: f64,
    complexity_bits: f64,
    theta_mu_error_rate: f64,
    turnaround_bound: f64,
    predictors: Vec<PredictorSummary>,
}

pub fn dicegame(ctx: &Context) -> ConfigResult<Status> {
    let sec = &ctx.cfg.dicegame;
    let spec = sec.spec()?;
    let seed = ctx.seed.or(ctx.cfg.seed).unwrap_or(0);
    let class = family_class(&spec)?;
    let k = complexity_surrogate(&class, &spec.dealer.name)?;
    // Θμ errs with the smaller colour probability of the die in play.
    let e_theta_mu = spec
        .dealer
        .die
        .iter()
        .map(|d| {
            let w = match d {
                Die::One => spec.die1_white,
                Die::Two => spec.die2_white,
            };
            w.min(1.0 - w)
        })
        .fold(0.0, f64::max);
    let bound = turnaround_bound(k, &spec, e_theta_mu).map_err(|e| {
        ConfigError(format!(
            "{e}; a winnable game needs the Θμ error rate {e_theta_mu:.6} below 1 - stake/payout = {:.6}",
            break_even_error_rate(&spec)
        ))
    })?;
    let mu: Arc<dyn SequenceMeasure> = Arc::new(game_measure(&spec)?);
    let xi = Arc::new(mixture(class.clone())?);

    let mut summary = DiceSummary {
        dealer: spec.dealer.name.clone(),
        stake_cents: spec.stake_cents,
        payout_cents: spec.payout_cents,
        break_even_error_rate: break_even_error_rate(&spec),
        complexity_bits: k,
        theta_mu_error_rate: e_theta_mu,
        turnaround_bound: bound,
        predictors: Vec::new(),
    };
    let mut text = String::new();
    writeln!(
        text,
        "dealer {}  k = {k:.3} bits  turnaround bound {bound:.1} rounds  seed {seed}",
        spec.dealer.name
    )
    .unwrap();
    writeln!(
        text,
        "{:<22} {:>12} {:>12} {:>12} {:>9}",
        "predictor", "profit/n", "mean/n", "error rate", "crossing"
    )
    .unwrap();
    for name in &sec.predictors {
        let pred = resolve_predictor(name, Some(&class), &mu, &xi)?;
        let trace = play(&spec, pred.as_ref(), sec.rounds, seed, sec.scoring)?;
        ctx.write(&format!("dicegame_{name}.csv"), &trace.to_csv())?;
        let n = sec.rounds.max(1) as f64;
        let curve = if sec.games > 0 {
            mean_profit_curve(&spec, pred.as_ref(), sec.rounds, seed, sec.games)?
        } else {
            Vec::new()
        };
        let s = PredictorSummary {
            predictor: name.clone(),
            seed,
            rounds: trace.rounds(),
            final_profit: trace.final_profit(),
            profit_per_round: trace.final_profit() / n,
            error_rate: trace.errors.last().copied().unwrap_or(0.0) / n,
            mean_profit_per_round: curve.last().copied().unwrap_or(f64::NAN) / n,
            games: sec.games,
            crossing_round: crossing_round(&curve),
        };
        writeln!(
            text,
            "{:<22} {:>12.6} {:>12.6} {:>12.6} {:>9}",
            s.predictor,
            s.profit_per_round,
            s.mean_profit_per_round,
            s.error_rate,
            s.crossing_round.map_or("-".into(), |c| c.to_string())
        )
        .unwrap();
        summary.predictors.push(s);
    }
    print!("{text}");
    ctx.write("dicegame_summary.txt", &text)?;
    ctx.write("dicegame_summary.json", &json(&summary)?)?;
    Ok(Status::Ok)
}

pub fn approximate_m(ctx: &Context) -> ConfigResult<Status> {
    let sec = &ctx.cfg.semimeasure;
    let machine: Box<dyn MonotoneMachine> = match sec.machine.as_str() {
        "echo" => Box::new(EchoMachine),
        "register" => Box::new(RegisterMachine),
        other => {
            return Err(ConfigError(format!(
                "unknown machine '{other}' (echo | register)"
            )))
        }
    };
    let table = approximate(machine.as_ref(), sec.cap, sec.fuel, sec.depth)?;
    ctx.write("semimeasure.json", &table.to_json()?)?;
    println!(
        "machine {}  cap {}  fuel {}  depth {}",
        sec.machine, sec.cap, sec.fuel, sec.depth
    );
    for s in [&[][..], &[false], &[true], &[false, false], &[true, true]] {
        let label: String = s.iter().map(|&b| if b { '1' } else { '0' }).collect();
        let label = if label.is_empty() {
            "ε".to_string()
        } else {
            label
        };
        println!("M({label}) >= {:.6e}", table.mass(s)?);
    }
    Ok(Status::Ok)
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| v.to_string())
}
