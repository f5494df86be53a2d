use std::path::Path;
use std::time::Instant;

use serde_json::{json, Map, Value};
use socpos::approx::{approximate_alternating, approximate_input, approximate_output, ApproxOptions};
use socpos::certify::{adaptive_horizon, certify_soc, discrete_horizon, CertifyOptions, CertifyOutcome, FalsifyOptions};
use socpos::corpus::{generate, CorpusConfig, SystemClass};
use socpos::lti::{impulse_response, step_response, StateSpace};
use socpos::mor::{balance_and_truncate, MorOptions};
use socpos::synth::{synthesize_feedback, SynthOptions, SynthOutcome};
use socpos::Domain;

use crate::error::CliError;
use crate::model::{model_json, parse_model, Model};
use crate::output::{json_bytes, series_csv, write_atomic, write_json};
use crate::report::{self, num};
use crate::{ApproxArgs, ApproxMode, CertifyArgs, CorpusArgs, ReduceArgs, SimulateArgs, SynthArgs};

fn load(path: &Path) -> Result<Model, CliError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(&shown, e))?;
    parse_model(&shown, &text)
}

fn elapsed_ms(t: Instant) -> Value {
    json!((t.elapsed().as_secs_f64() * 1e3 * 1e3).round() / 1e3)
}

fn finish(report: Map<String, Value>, out: Option<&Path>) -> Result<(), CliError> {
    if let Some(p) = out {
        write_json(p, &Value::Object(report))?;
    }
    Ok(())
}

/// Exit code of a module error. Malformed shapes are input errors (1); a
/// model outside an algorithm's reach is a failed design step (2).
fn failure_code(e: &socpos::Error) -> u8 {
    match e {
        socpos::Error::ShapeMismatch(_) => 1,
        _ => 2,
    }
}

fn default_horizon(sys: &StateSpace) -> f64 {
    let fo = FalsifyOptions::default();
    match sys.domain() {
        Domain::Continuous => adaptive_horizon(sys, &fo),
        Domain::Discrete => discrete_horizon(sys, &fo) as f64,
    }
}

pub fn certify(args: &CertifyArgs) -> Result<u8, CliError> {
    let model = load(&args.model)?;
    let sys = &model.system;
    let mut opts = CertifyOptions::default();
    if let Some(t) = args.tol {
        opts.verify_tol = t;
    }
    if let Some(h) = args.max_horizon {
        opts.falsify_opts.max_horizon = h;
    }
    opts.rate_search = args.rate_search;
    let start = Instant::now();
    let outcome = certify_soc(sys, &opts);
    match &outcome {
        CertifyOutcome::Certified(_) => println!("certified"),
        CertifyOutcome::NotCertified { reason, detail } => println!("not certified ({reason}): {detail}"),
        CertifyOutcome::Refuted(cx) => println!(
            "refuted: h_{}{}({}) = {:.6e}",
            cx.output + 1,
            cx.input + 1,
            cx.time,
            cx.value
        ),
    }
    if let Some(p) = &args.csv_impulse {
        let series = impulse_response(sys, default_horizon(sys).min(opts.falsify_opts.max_horizon), 2000)?;
        write_atomic(p, &series_csv(&series, "h")?)?;
    }
    let mut rep = report::header("certify", model.name.as_deref());
    rep.extend(report::outcome_fields(&outcome));
    rep.insert("timing_ms".into(), elapsed_ms(start));
    finish(rep, args.json_out.as_deref())?;
    Ok(report::verdict_code(&outcome))
}

pub fn approx(args: &ApproxArgs) -> Result<u8, CliError> {
    let model = load(&args.model)?;
    let opts = ApproxOptions::default();
    let start = Instant::now();
    let run = match args.mode {
        ApproxMode::Output => approximate_output(&model.system, &opts),
        ApproxMode::Input => approximate_input(&model.system, &opts),
        ApproxMode::Alternating => approximate_alternating(&model.system, &opts),
    };
    let mode = format!("{:?}", args.mode).to_lowercase();
    let mut rep = report::header("approx", model.name.as_deref());
    rep.insert("mode".into(), json!(mode));
    let code = match run {
        Ok(r) => {
            println!(
                "certified approximation at distance {:.6e} (B {:.3e}, C {:.3e}, D {:.3e})",
                r.distance.total, r.distance.b, r.distance.c, r.distance.d
            );
            rep.insert("verdict".into(), json!("certified"));
            rep.insert("reason".into(), Value::Null);
            rep.insert("system".into(), model_json(&r.system, model.name.clone(), model.metadata.clone()));
            rep.insert(
                "distances".into(),
                json!({
                    "B": num(r.distance.b),
                    "C": num(r.distance.c),
                    "D": num(r.distance.d),
                    "total": num(r.distance.total),
                }),
            );
            rep.insert("iterations".into(), json!(r.iterations));
            rep.insert(
                "objective_trace".into(),
                json!(r.objective_trace.iter().map(|v| num(*v)).collect::<Vec<_>>()),
            );
            rep.insert("certificate".into(), report::certificate(&r.certificate));
            0
        }
        Err(e) => {
            println!("no approximation: {e}");
            rep.insert("verdict".into(), json!("not_certified"));
            rep.insert("reason".into(), json!(e.to_string()));
            failure_code(&e)
        }
    };
    rep.insert("timing_ms".into(), elapsed_ms(start));
    finish(rep, args.json_out.as_deref())?;
    Ok(code)
}

pub fn synth(args: &SynthArgs) -> Result<u8, CliError> {
    let model = load(&args.model)?;
    let opts = SynthOptions {
        max_rounds: args.max_rounds,
        effort_bound: args.effort_bound,
        seed: args.seed,
        ..SynthOptions::default()
    };
    let start = Instant::now();
    let mut rep = report::header("synth", model.name.as_deref());
    rep.insert("seed".into(), json!(args.seed));
    let code = match synthesize_feedback(&model.system, &opts) {
        Ok(SynthOutcome::Success(r)) => {
            println!("certified closed loop after {} rounds", r.rounds);
            rep.insert("verdict".into(), json!("certified"));
            rep.insert("reason".into(), Value::Null);
            rep.insert("gain".into(), report::matrix(&r.gain));
            rep.insert("closed_loop".into(), model_json(&r.closed_loop, model.name.clone(), model.metadata.clone()));
            rep.insert("rounds".into(), json!(r.rounds));
            rep.insert("spectral_abscissa".into(), num(r.spectral_abscissa));
            rep.insert("certificate".into(), report::certificate(&r.certificate));
            0
        }
        Ok(SynthOutcome::Failed(f)) => {
            println!("synthesis failed after {} rounds: {}", f.rounds, f.detail);
            rep.insert("verdict".into(), json!("not_certified"));
            rep.insert("reason".into(), json!(f.detail));
            rep.insert("rounds".into(), json!(f.rounds));
            rep.insert("last_gain".into(), report::matrix(&f.last_gain));
            rep.insert(
                "violation_trace".into(),
                json!(f.violation_trace.iter().map(|v| num(*v)).collect::<Vec<_>>()),
            );
            2
        }
        Err(e) => {
            println!("synthesis failed: {e}");
            rep.insert("verdict".into(), json!("not_certified"));
            rep.insert("reason".into(), json!(e.to_string()));
            failure_code(&e)
        }
    };
    rep.insert("timing_ms".into(), elapsed_ms(start));
    finish(rep, args.json_out.as_deref())?;
    Ok(code)
}

pub fn reduce(args: &ReduceArgs) -> Result<u8, CliError> {
    let model = load(&args.model)?;
    let sys = &model.system;
    let n = sys.order();
    if args.order < 1 || args.order > n.max(1) {
        return Err(CliError::Usage(format!("--order must lie in 1..={n}")));
    }
    let start = Instant::now();
    let mut rep = report::header("reduce", model.name.as_deref());
    rep.insert("order".into(), json!(args.order));
    let outcome = certify_soc(sys, &CertifyOptions::default());
    let cert = match outcome {
        CertifyOutcome::Certified(c) => c,
        other => {
            println!("input model is {}; nothing to preserve", report::verdict(&other));
            rep.extend(report::outcome_fields(&other));
            rep.insert("timing_ms".into(), elapsed_ms(start));
            finish(rep, args.json_out.as_deref())?;
            return Ok(report::verdict_code(&other));
        }
    };
    let code = match balance_and_truncate(sys, &cert, args.order, &MorOptions::default()) {
        Ok(r) => {
            println!(
                "reduced {n} -> {} states, error estimate {:.6e}",
                r.system.order(),
                r.error_estimate
            );
            rep.insert("verdict".into(), json!("certified"));
            rep.insert("reason".into(), Value::Null);
            rep.insert("system".into(), model_json(&r.system, model.name.clone(), model.metadata.clone()));
            rep.insert("kept_indices".into(), json!(r.kept_indices));
            rep.insert(
                "hankel_values".into(),
                json!(r.generalized_hankel_values.iter().map(|v| num(*v)).collect::<Vec<_>>()),
            );
            rep.insert("error_estimate".into(), num(r.error_estimate));
            rep.insert("certificate".into(), report::certificate(&r.certificate));
            0
        }
        Err(e) => {
            println!("reduction failed: {e}");
            rep.insert("verdict".into(), json!("not_certified"));
            rep.insert("reason".into(), json!(e.to_string()));
            failure_code(&e)
        }
    };
    rep.insert("timing_ms".into(), elapsed_ms(start));
    finish(rep, args.json_out.as_deref())?;
    Ok(code)
}

pub fn simulate(args: &SimulateArgs) -> Result<u8, CliError> {
    let model = load(&args.model)?;
    let sys = &model.system;
    if args.points < 2 {
        return Err(CliError::Usage("--points must be at least 2".into()));
    }
    let horizon = args.horizon.unwrap_or_else(|| default_horizon(sys));
    let (series, prefix) = if args.step {
        (step_response(sys, horizon, args.points)?, "s")
    } else {
        (impulse_response(sys, horizon, args.points)?, "h")
    };
    let bytes = series_csv(&series, prefix)?;
    match &args.csv_out {
        Some(p) => write_atomic(p, &bytes)?,
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(&bytes)
                .map_err(|e| CliError::io("stdout", e))?;
        }
    }
    Ok(0)
}

fn parse_range(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("--order-range expects a..b, got {s:?}"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let a = a.trim().parse().map_err(|_| bad())?;
    let b = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
    Ok((a, b))
}

pub fn corpus(args: &CorpusArgs) -> Result<u8, CliError> {
    let (min_order, max_order) = parse_range(&args.order_range)?;
    let classes = args
        .classes
        .split(',')
        .map(|c| c.trim().parse::<SystemClass>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let cfg = CorpusConfig {
        count: args.count,
        min_order,
        max_order,
        seed: args.seed,
        classes,
        discrete_fraction: args.discrete_fraction,
    };
    let entries = generate(&cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    let dir = &args.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display().to_string(), e))?;
    let mut index = Vec::with_capacity(entries.len());
    for e in &entries {
        let file = format!("{}.json", e.name);
        let meta = json!({ "class": e.class.as_str(), "seed": e.seed, "index": e.index });
        let doc = model_json(&e.system, Some(e.name.clone()), Some(meta));
        write_atomic(&dir.join(&file), &json_bytes(&doc)?)?;
        index.push(json!({
            "name": e.name,
            "file": file,
            "class": e.class.as_str(),
            "seed": e.seed,
            "order": e.system.order(),
            "domain": crate::model::domain_str(e.system.domain()),
        }));
    }
    let manifest = json!({
        "schema": report::SCHEMA,
        "command": "corpus",
        "seed": args.seed,
        "count": args.count,
        "order_range": [min_order, max_order],
        "discrete_fraction": args.discrete_fraction,
        "prng": "pcg64",
        "entries": index,
    });
    write_json(&dir.join("index.json"), &manifest)?;
    println!("wrote {} models to {}", entries.len(), dir.display());
    Ok(0)
}
