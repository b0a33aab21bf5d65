use clap::ValueEnum;
use serde::Serialize;
use serde_json::json;

use super::config::{OutputFormat, RunConfig};
use super::table::{num, opt_bool, opt_num, Table};
use super::validate::{run_checks, Check};
use super::{json_report, CliError, CommandOutput, PsiVariant};
use crate::functionals::FunctionalContext;
use crate::numerics::quadrature::QuadratureSpec;
use crate::ou_model::{Corridor, OuParams, PassageOptions};
use crate::renewal::{
    expected_ratio, expected_reward, renewal_theorem_check, simulate_replications, HarvestPolicy,
    RenewalRunStats, INDEXING_NOTE,
};
use crate::sign_analysis::{
    gamma_closed_form, limit_offsets, sign_report, signs_agree, surrogate_a, surrogate_b,
    LimitCase, SignVerdict, SIGN_DEAD_BAND,
};

const QUAD_MAX_DEPTH: u32 = 40;

pub(crate) struct Model {
    pub params: OuParams<f64>,
    pub corridor: Corridor<f64>,
    pub ctx: FunctionalContext<f64>,
}

pub(crate) fn build_model(config: &RunConfig) -> Result<Model, CliError> {
    let params = if config.allow_nonnegative_a {
        OuParams::with_any_drift(config.a, config.b)?
    } else {
        OuParams::new(config.a, config.b)?
    };
    let corridor = Corridor::new(config.eta, config.x0, config.theta)?;
    let quad = QuadratureSpec::new(config.quad_abs_tol, QUAD_MAX_DEPTH)?;
    let ctx = FunctionalContext::new(params, config.eta, config.theta, quad)?;
    Ok(Model {
        params,
        corridor,
        ctx,
    })
}

fn format_of(config: &RunConfig, default: OutputFormat) -> OutputFormat {
    config.output_format.unwrap_or(default)
}

#[derive(Debug, Clone, Serialize)]
pub struct Evaluation {
    pub alpha: f64,
    pub beta: f64,
    pub drift_equilibrium: f64,
    pub rho: f64,
    pub psi: f64,
    pub expected_reward: f64,
    pub expected_duration: f64,
    pub ratio: f64,
}

pub fn evaluate(config: &RunConfig) -> Result<Evaluation, CliError> {
    let Model {
        params,
        corridor,
        ctx,
    } = build_model(config)?;
    let x = corridor.x0;
    let policy = HarvestPolicy::level_difference(&corridor);
    let psi = ctx.psi(x)?;
    Ok(Evaluation {
        alpha: ctx.alpha(),
        beta: ctx.beta(),
        drift_equilibrium: params.drift_equilibrium(),
        rho: ctx.rho(x)?,
        psi,
        expected_reward: expected_reward(&ctx, x, &policy)?,
        expected_duration: psi,
        ratio: expected_ratio(&ctx, x, &policy)?,
    })
}

pub fn cmd_evaluate(config: &RunConfig) -> Result<CommandOutput, CliError> {
    let e = evaluate(config)?;
    let text = match format_of(config, OutputFormat::Json) {
        OutputFormat::Json => json_report(config, &e, json!({ "policy": "Q(y) = y - x0" })),
        OutputFormat::Csv => {
            let mut t = Table::new(&[
                "alpha",
                "beta",
                "drift_equilibrium",
                "rho",
                "psi",
                "expected_reward",
                "expected_duration",
                "ratio",
            ]);
            t.push(
                [
                    e.alpha,
                    e.beta,
                    e.drift_equilibrium,
                    e.rho,
                    e.psi,
                    e.expected_reward,
                    e.expected_duration,
                    e.ratio,
                ]
                .into_iter()
                .map(num)
                .collect(),
            );
            t.render()
        }
    };
    Ok(CommandOutput::done(text))
}

#[derive(Debug, Clone, Serialize)]
struct ReplicationSummary {
    replication: usize,
    horizon: f64,
    n_cycles: usize,
    n_lower: usize,
    n_upper: usize,
    total_reward: f64,
    time_average: f64,
}

#[derive(Debug, Clone, Serialize)]
struct PooledSummary {
    n_cycles: usize,
    horizon: f64,
    time_average: f64,
    standard_error: f64,
    relative_standard_error: f64,
    difference: f64,
    z_score: f64,
    within_three_standard_errors: bool,
}

pub fn cmd_simulate(config: &RunConfig, workers: usize) -> Result<CommandOutput, CliError> {
    let Model {
        params,
        corridor,
        ctx,
    } = build_model(config)?;
    let policy = HarvestPolicy::level_difference(&corridor);
    let analytic = expected_ratio(&ctx, corridor.x0, &policy)?;
    let options = PassageOptions {
        bridge_correction: config.bridge_correction,
        ..PassageOptions::default()
    };
    let runs = simulate_replications(
        &corridor,
        &policy,
        config.horizon,
        config.h,
        &params,
        options,
        config.seed,
        config.replications,
        workers,
    )?;

    let mut completed: Vec<(usize, RenewalRunStats<f64>)> = Vec::new();
    let mut failures = Vec::new();
    let mut first_error = None;
    for (r, run) in runs.into_iter().enumerate() {
        match run {
            Ok(stats) => completed.push((r, stats)),
            Err(e) => {
                failures.push(json!({ "replication": r, "error": e.to_string() }));
                first_error.get_or_insert(e);
            }
        }
    }

    let summaries: Vec<ReplicationSummary> = completed
        .iter()
        .map(|(r, s)| ReplicationSummary {
            replication: *r,
            horizon: s.horizon,
            n_cycles: s.n_cycles,
            n_lower: s.n_lower(),
            n_upper: s.n_upper(),
            total_reward: s.total_reward,
            time_average: s.time_average,
        })
        .collect();
    let stats: Vec<RenewalRunStats<f64>> = completed.iter().map(|(_, s)| s.clone()).collect();
    let mut insufficient = None;
    let pooled = if stats.is_empty() {
        None
    } else {
        let pooled = RenewalRunStats::pool(&stats)?;
        match renewal_theorem_check(&pooled, analytic) {
            Ok(check) => Some(PooledSummary {
                n_cycles: check.n_cycles,
                horizon: pooled.horizon,
                time_average: check.time_average,
                standard_error: check.standard_error,
                relative_standard_error: check.standard_error / analytic.abs(),
                difference: check.difference,
                z_score: check.z_score(),
                within_three_standard_errors: check.z_score() <= 3.0,
            }),
            Err(e) => {
                insufficient = Some(e.to_string());
                None
            }
        }
    };

    let text = match format_of(config, OutputFormat::Json) {
        OutputFormat::Json => json_report(
            config,
            json!({
                "analytic_ratio": analytic,
                "replications": summaries,
                "pooled": pooled,
            }),
            json!({
                "indexing": INDEXING_NOTE,
                "insufficient_cycles": insufficient,
                "failed_replications": failures,
            }),
        ),
        OutputFormat::Csv => {
            let mut t = Table::new(&["replication", "cycle", "boundary", "duration", "reward"]);
            for (r, s) in &completed {
                for (i, c) in s.cycle_records.iter().enumerate() {
                    t.push(vec![
                        r.to_string(),
                        (i + 1).to_string(),
                        c.boundary.as_str().to_string(),
                        num(c.duration),
                        num(c.reward),
                    ]);
                }
            }
            t.render()
        }
    };
    Ok(CommandOutput {
        text,
        deferred: first_error.map(CliError::Model),
    })
}

const SIGN_COLUMNS: [&str; 10] = [
    "case",
    "surrogate",
    "surrogate_collapsed",
    "psi_prime_boundary",
    "gamma_closed_form",
    "gamma_numeric_limit",
    "relative_gap",
    "signs_agree",
    "in_positivity_region",
    "reliable",
];

fn sign_row(v: &SignVerdict) -> Vec<String> {
    vec![
        v.case.as_str().to_string(),
        num(v.surrogate_value),
        opt_num(v.surrogate_collapsed),
        num(v.psi_prime_boundary),
        num(v.gamma_closed_form),
        opt_num(v.gamma_numeric_limit),
        opt_num(v.relative_gap),
        v.signs_agree.to_string(),
        opt_bool(v.in_positivity_region),
        v.reliable.to_string(),
    ]
}

pub fn cmd_sign(config: &RunConfig) -> Result<CommandOutput, CliError> {
    let Model { ctx, .. } = build_model(config)?;
    let (lower, upper) = sign_report(&ctx)?;
    let text = match format_of(config, OutputFormat::Json) {
        OutputFormat::Json => json_report(
            config,
            json!({ "lower": lower, "upper": upper }),
            json!({
                "dead_band": SIGN_DEAD_BAND,
                "limit_offsets": limit_offsets(&ctx),
                "surrogate_collapsed": "upper surrogate with both distribution terms at theta; always negative",
            }),
        ),
        OutputFormat::Csv => {
            let mut t = Table::new(&SIGN_COLUMNS);
            t.push(sign_row(&lower));
            t.push(sign_row(&upper));
            t.render()
        }
    };
    Ok(CommandOutput::done(text))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    Theta,
    Eta,
    X0,
    A,
    B,
}

impl SweepParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParameter::Theta => "theta",
            SweepParameter::Eta => "eta",
            SweepParameter::X0 => "x0",
            SweepParameter::A => "a",
            SweepParameter::B => "b",
        }
    }

    fn apply(self, config: &mut RunConfig, v: f64) {
        match self {
            SweepParameter::Theta => config.theta = v,
            SweepParameter::Eta => config.eta = v,
            SweepParameter::X0 => config.x0 = v,
            SweepParameter::A => config.a = v,
            SweepParameter::B => config.b = v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl SweepSpec {
    pub fn new(
        parameter: SweepParameter,
        lo: f64,
        hi: f64,
        steps: usize,
    ) -> Result<Self, CliError> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(CliError::Config(format!("--lo={lo} must be < --hi={hi}")));
        }
        if steps < 2 {
            return Err(CliError::Config(format!("--steps={steps} must be >= 2")));
        }
        Ok(SweepSpec {
            parameter,
            lo,
            hi,
            steps,
        })
    }

    pub fn values(&self) -> Vec<f64> {
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    self.hi
                } else {
                    self.lo + (self.hi - self.lo) * i as f64 / last
                }
            })
            .collect()
    }
}

/// Column order of the sweep table.
pub const SWEEP_COLUMNS: [&str; 14] = [
    "parameter",
    "value",
    "status",
    "reason",
    "rho",
    "psi",
    "ratio",
    "surrogate_a",
    "surrogate_b",
    "gamma_a",
    "gamma_b",
    "in_positivity_region",
    "signs_agree_a",
    "signs_agree_b",
];

#[derive(Debug, Clone, Serialize)]
struct SweepPoint {
    rho: f64,
    psi: f64,
    ratio: f64,
    surrogate_a: f64,
    surrogate_b: f64,
    gamma_a: f64,
    gamma_b: f64,
    in_positivity_region: bool,
    signs_agree_a: bool,
    signs_agree_b: bool,
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    value: f64,
    status: &'static str,
    reason: Option<String>,
    #[serde(flatten)]
    point: Option<SweepPoint>,
    #[serde(skip)]
    numerical: bool,
}

fn sweep_point(config: &RunConfig) -> Result<SweepPoint, CliError> {
    let Model {
        params,
        corridor,
        ctx,
    } = build_model(config)?;
    let x = corridor.x0;
    let policy = HarvestPolicy::level_difference(&corridor);
    let (s_a, s_b) = (surrogate_a(&ctx), surrogate_b(&ctx));
    let gamma_a = gamma_closed_form(&ctx, LimitCase::ALower)?.value;
    let gamma_b = gamma_closed_form(&ctx, LimitCase::BUpper)?.value;
    Ok(SweepPoint {
        rho: ctx.rho(x)?,
        psi: ctx.psi(x)?,
        ratio: expected_ratio(&ctx, x, &policy)?,
        surrogate_a: s_a,
        surrogate_b: s_b,
        gamma_a,
        gamma_b,
        in_positivity_region: config.eta >= params.drift_equilibrium(),
        signs_agree_a: signs_agree(s_a, gamma_a),
        signs_agree_b: signs_agree(s_b, gamma_b),
    })
}

pub fn cmd_sweep(
    config: &RunConfig,
    spec: &SweepSpec,
    workers: usize,
) -> Result<CommandOutput, CliError> {
    let values = spec.values();
    let rows = crate::numerics::rng::run_indexed(workers, values.len(), |i| {
        let value = values[i];
        let mut point_config = config.clone();
        spec.parameter.apply(&mut point_config, value);
        let row = match point_config.validate() {
            Err(reason) => SweepRow {
                value,
                status: "skipped",
                reason: Some(reason),
                point: None,
                numerical: false,
            },
            Ok(()) => match sweep_point(&point_config) {
                Ok(p) => SweepRow {
                    value,
                    status: "ok",
                    reason: None,
                    point: Some(p),
                    numerical: false,
                },
                Err(e) => SweepRow {
                    value,
                    status: "failed",
                    numerical: e.exit_code() == super::EXIT_NUMERICAL,
                    reason: Some(e.to_string()),
                    point: None,
                },
            },
        };
        Ok(row)
    })?;

    if rows.iter().all(|r| r.point.is_none()) {
        let reason = rows[0].reason.clone().unwrap_or_default();
        let msg = format!("no sweep point could be evaluated (first: {reason})");
        return Err(if rows.iter().any(|r| r.numerical) {
            CliError::Model(crate::Error::Unreliable(msg))
        } else {
            CliError::Config(msg)
        });
    }

    let text = match format_of(config, OutputFormat::Csv) {
        OutputFormat::Json => json_report(
            config,
            json!({ "sweep": spec, "rows": rows }),
            json!({
                "skipped": rows.iter().filter(|r| r.status != "ok").count(),
                "dead_band": SIGN_DEAD_BAND,
            }),
        ),
        OutputFormat::Csv => {
            let mut t = Table::new(&SWEEP_COLUMNS);
            for r in &rows {
                let mut cells = vec![
                    spec.parameter.as_str().to_string(),
                    num(r.value),
                    r.status.to_string(),
                    r.reason.clone().unwrap_or_default(),
                ];
                match &r.point {
                    Some(p) => {
                        cells.extend(
                            [
                                p.rho,
                                p.psi,
                                p.ratio,
                                p.surrogate_a,
                                p.surrogate_b,
                                p.gamma_a,
                                p.gamma_b,
                            ]
                            .into_iter()
                            .map(num),
                        );
                        cells.extend([
                            p.in_positivity_region.to_string(),
                            p.signs_agree_a.to_string(),
                            p.signs_agree_b.to_string(),
                        ]);
                    }
                    None => cells.extend(std::iter::repeat_n(String::new(), 10)),
                }
                t.push(cells);
            }
            t.render()
        }
    };
    Ok(CommandOutput::done(text))
}

pub fn cmd_validate(
    config: &RunConfig,
    paths: usize,
    variant: PsiVariant,
    workers: usize,
) -> Result<CommandOutput, CliError> {
    if paths < 2 {
        return Err(CliError::Config(format!("--paths={paths} must be >= 2")));
    }
    let checks = run_checks(config, paths, variant, workers)?;
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    let text = match format_of(config, OutputFormat::Json) {
        OutputFormat::Json => json_report(
            config,
            json!({ "checks": checks, "all_passed": failed.is_empty() }),
            json!({
                "first_passage_paths": paths,
                "psi_denominator": match variant {
                    PsiVariant::Density => "density",
                    PsiVariant::Cdf => "cdf",
                },
            }),
        ),
        OutputFormat::Csv => {
            let mut t = Table::new(&["name", "passed", "measured", "tolerance", "detail"]);
            for Check {
                name,
                passed,
                measured,
                tolerance,
                detail,
            } in &checks
            {
                t.push(vec![
                    name.clone(),
                    passed.to_string(),
                    num(*measured),
                    num(*tolerance),
                    detail.clone(),
                ]);
            }
            t.render()
        }
    };
    let deferred = (!failed.is_empty())
        .then(|| CliError::Validation(format!("failed checks: {}", failed.join(", "))));
    Ok(CommandOutput { text, deferred })
}
