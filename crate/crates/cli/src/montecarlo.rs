use std::collections::BTreeSet;
use std::path::PathBuf;

use clap::Args;
use gelab::econometrics::{did_estimate, rd_estimate, rk_estimate, DidSpec, EconometricsError, RdSpec, RkSpec, SeKind};
use gelab::panel::{DateWindow, Panel};
use gelab::simkit::{
    replicate, replicate_scenarios, CoverageSummary, EffectKind, InjectedEffect, IntervalDraw, Locus, Replication,
    ScenarioConfig,
};
use serde::Serialize;
use serde_json::json;

use crate::analyze::SeArg;
use crate::bundle::Bundle;
use crate::error::CliError;
use crate::simulate::{load_config, Engine};
use crate::Ctx;

#[derive(Args, Debug)]
pub struct MonteCarloArgs {
    /// Scenario config whose `[[effects]]` define the truth and designs.
    pub config: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    #[arg(long, value_enum, default_value_t = Engine::Synth)]
    pub engine: Engine,
    /// RD bandwidth.
    #[arg(long, default_value_t = 20.0)]
    pub bandwidth: f64,
    /// RK lower restriction.
    #[arg(long, default_value_t = 1e8)]
    pub restriction: f64,
    /// Zero every effect, so the summaries report size instead of coverage.
    #[arg(long)]
    pub null: bool,
    /// DiD standard errors. Item prices are serially correlated, so HC1
    /// intervals undercover.
    #[arg(long, value_enum, default_value_t = SeArg::Cluster)]
    pub se: SeArg,
}

#[derive(Serialize)]
struct DesignSummary {
    design: String,
    effect: InjectedEffect,
    summary: CoverageSummary,
}

/// The estimator matching one planted effect, as an interval draw.
fn estimator(
    effect: &InjectedEffect,
    config: &ScenarioConfig,
    args: &MonteCarloArgs,
) -> Result<(String, Box<dyn Fn(&Panel) -> Result<IntervalDraw, EconometricsError> + Sync>), CliError> {
    let post = DateWindow::new(effect.effect_date, config.end_date());
    let draw = |e: f64, lo: f64, hi: f64| IntervalDraw {
        estimate: e,
        ci_low: lo,
        ci_high: hi,
    };
    match (effect.kind, &effect.locus) {
        (EffectKind::RdStep, Locus::Cutoff(c)) => {
            let spec = RdSpec {
                cutoff: *c,
                bandwidth: args.bandwidth,
                window: Some(post),
                ..RdSpec::default()
            };
            Ok((
                "rd".into(),
                Box::new(move |p| rd_estimate(p, &spec).map(|e| draw(e.beta, e.ci_low, e.ci_high))),
            ))
        }
        (EffectKind::RkSlope, Locus::Cutoff(k)) => {
            let spec = RkSpec {
                kink: *k,
                lower_restriction: args.restriction,
                tax_scale: effect.tax_scale,
                window: Some(post),
                ..RkSpec::default()
            };
            Ok((
                "rk".into(),
                Box::new(move |p| rk_estimate(p, &spec).map(|e| draw(e.delta, e.ci_low, e.ci_high))),
            ))
        }
        (EffectKind::DidLevel, Locus::Items(items)) => {
            let treated: BTreeSet<_> = items.iter().copied().collect();
            let control = config.item_ids().filter(|i| !treated.contains(i)).collect();
            let spec = DidSpec {
                treated,
                control,
                implementation_date: effect.effect_date,
                window: DateWindow::new(config.start_date, config.end_date()),
                outcome: effect.outcome,
                se_kind: match args.se {
                    SeArg::Hc1 => SeKind::Hc1,
                    SeArg::Cluster => SeKind::ClusterItem,
                },
            };
            Ok((
                format!("did_{}", effect.outcome),
                Box::new(move |p| did_estimate(p, &spec).map(|e| draw(e.theta, e.ci_low, e.ci_high))),
            ))
        }
        _ => Err(CliError::config(
            "UnsupportedEffect",
            format!("effect {:?} has no matching estimator for locus {:?}", effect.kind, effect.locus),
        )),
    }
}

pub fn run(ctx: &Ctx, args: &MonteCarloArgs) -> Result<(), CliError> {
    let mut bundle = Bundle::create(&ctx.out)?;
    let mut config = load_config(&args.config)?;
    bundle.input(&args.config)?;
    if let Some(seed) = ctx.seed {
        config.seed = seed;
    }
    if args.null {
        for e in &mut config.effects {
            e.magnitude = 0.0;
        }
    }
    if config.effects.is_empty() {
        return Err(CliError::config("NoEffects", "the config plants no effects to evaluate"));
    }
    let resolved = config.to_toml_string();
    bundle.write("config.toml", &resolved)?;

    let mut summaries = Vec::new();
    let mut rows = Vec::new();
    for effect in &config.effects {
        let (design, f) = estimator(effect, &config, args)?;
        let reps: Vec<Replication<IntervalDraw, EconometricsError>> = match args.engine {
            Engine::Synth => replicate(&config, args.reps, |p| f(p))?,
            Engine::Agent => replicate_scenarios(&config, args.reps, |out| f(&out.panel))?,
        };
        let summary = CoverageSummary::from_replications(effect.magnitude, &reps);
        ctx.say(format!(
            "{design}: truth {} coverage {:.3} rejection {:.3} ({} ok, {} failed)",
            effect.magnitude, summary.coverage, summary.rejection_rate, summary.n_ok, summary.n_failed
        ));
        for r in &reps {
            let (e, lo, hi, err) = match &r.result {
                Ok(d) => (d.estimate.to_string(), d.ci_low.to_string(), d.ci_high.to_string(), String::new()),
                Err(e) => (String::new(), String::new(), String::new(), e.kind().to_string()),
            };
            rows.push([design.clone(), r.rep.to_string(), r.seed.to_string(), e, lo, hi, err]);
        }
        summaries.push(DesignSummary {
            design,
            effect: effect.clone(),
            summary,
        });
    }
    bundle.write_json("coverage.json", &summaries)?;
    bundle.write_csv("replications.csv", |w| {
        w.write_record(["design", "rep", "seed", "estimate", "ci_low", "ci_high", "error"])?;
        for row in &rows {
            w.write_record(row)?;
        }
        Ok(())
    })?;
    bundle.finish(
        "montecarlo",
        json!({ "reps": args.reps, "engine": args.engine, "bandwidth": args.bandwidth, "restriction": args.restriction, "null": args.null, "se": match args.se { SeArg::Hc1 => "hc1", SeArg::Cluster => "cluster" } }),
        Some(config.seed),
        Some(resolved),
    )?;
    Ok(())
}
