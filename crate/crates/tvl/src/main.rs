use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use std::path::PathBuf;
use std::process::ExitCode;
use tvl::ast::Vocabulary;
use tvl::c2solver::{self, C2Verdict};
use tvl::config::Config;
use tvl::gp2solver;
use tvl::normalize::{to_c2_normal_form, to_gp2_normal_form};
use tvl::parser::{parse, print, print_formula, print_global, LogicTag, SourceProblem};
use tvl::semantics::{cardinality_vector, evaluate, find_model, model_to_json, OracleOptions, SigmaStructure};
use tvl::typespace::{dual, OneType, TwoType, TypeSpace, UniversalPart};

#[derive(Parser)]
#[command(name = "tvl", version, about = "Finite satisfiability and spectra for two-variable logics with counting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Args, Clone)]
struct Opts {
    /// Logic to solve the input as: c2, gp2 or c2g. Defaults to the file's tag.
    #[arg(long, global = true)]
    logic: Option<String>,
    /// Largest domain size for spectrum sweeps and oracle searches.
    #[arg(long, global = true)]
    cap: Option<usize>,
    /// Largest core enumerated by the counting procedures.
    #[arg(long, global = true)]
    core_cap: Option<usize>,
    /// Bound on each variable of bounded integer searches.
    #[arg(long = "box", global = true)]
    search_box: Option<usize>,
    #[arg(long, global = true)]
    oracle_max: Option<usize>,
    /// Admit the empty structure as a model.
    #[arg(long, global = true)]
    allow_empty: bool,
    /// Print JSON (default) or a one-line summary with `--json false`.
    #[arg(long, global = true, default_value_t = true, action = clap::ArgAction::Set)]
    json: bool,
    /// File of `key = value` lines overriding the defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and print the canonical form of a problem.
    Parse { file: PathBuf },
    /// Print the normal form and the renaming trace.
    Normalize { file: PathBuf },
    /// Decide finite satisfiability.
    Sat { file: PathBuf },
    /// 1-type spectrum up to `--cap` elements (c2 and c2g).
    Spectrum { file: PathBuf },
    /// Build and verify a model, optionally with a given 1-type vector
    /// (`mask=count,...` over the normal form's 1-types).
    Model {
        file: PathBuf,
        #[arg(long)]
        vector: Option<String>,
    },
    /// Exhaustive model search up to `--oracle-max` elements.
    Oracle { file: PathBuf },
    /// Run built-in consistency checks.
    Selftest,
}

struct Failure {
    code: u8,
    error: Value,
}

impl Failure {
    fn input(error: impl Into<Value>) -> Failure {
        Failure {
            code: 1,
            error: error.into(),
        }
    }
}

type Outcome = Result<(Value, u8), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match build_config(&cli.opts) {
        Ok(c) => c,
        Err(e) => {
            emit(&cli.opts, &json!({ "error": e.error }));
            return ExitCode::from(e.code);
        }
    };
    let result = run(&cli, &cfg);
    let (mut body, code) = match result {
        Ok(v) => v,
        Err(f) => (json!({ "error": f.error }), f.code),
    };
    if let Value::Object(map) = &mut body {
        map.insert("config".into(), serde_json::to_value(&cfg).expect("config serializes"));
    }
    emit(&cli.opts, &body);
    ExitCode::from(code)
}

fn emit(opts: &Opts, body: &Value) {
    use std::io::Write;
    let text = if opts.json {
        serde_json::to_string_pretty(body).expect("json")
    } else {
        let field = |k: &str| body.get(k).map(|v| v.to_string());
        let summary = field("error")
            .map(|e| format!("error: {e}"))
            .or_else(|| field("verdict"))
            .or_else(|| field("totals").map(|t| format!("totals {t}")))
            .or_else(|| field("found").map(|f| format!("found {f}")))
            .or_else(|| field("pass").map(|f| format!("pass {f}")))
            .unwrap_or_else(|| "ok".into());
        summary
    };
    // A closed pipe is not an error worth reporting.
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn build_config(opts: &Opts) -> Result<Config, Failure> {
    let mut cfg = match &opts.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::input(json!({ "message": format!("{}: {e}", path.display()) })))?;
            Config::from_kv(&text).map_err(|e| Failure::input(json!({ "message": e.to_string() })))?
        }
        None => Config::default(),
    };
    if let Some(v) = opts.core_cap {
        cfg.core_cap = v;
    }
    if let Some(v) = opts.search_box {
        cfg.search_box = v;
    }
    if let Some(v) = opts.oracle_max {
        cfg.oracle_max_size = v;
    }
    if opts.allow_empty {
        cfg.allow_empty = true;
    }
    Ok(cfg)
}

fn load(file: &PathBuf, opts: &Opts) -> Result<(SourceProblem, LogicTag), Failure> {
    let text = std::fs::read_to_string(file)
        .map_err(|e| Failure::input(json!({ "message": format!("{}: {e}", file.display()) })))?;
    let p = parse(&text).map_err(|e| {
        let pos = e.position();
        Failure::input(json!({
            "position": { "line": pos.line, "column": pos.column },
            "message": e.to_string(),
        }))
    })?;
    let logic = match &opts.logic {
        None => p.logic,
        Some(name) => {
            let tag = LogicTag::from_name(name)
                .ok_or_else(|| Failure::input(json!({ "message": format!("unknown logic `{name}`") })))?;
            let fits = tag == p.logic || (tag == LogicTag::C2g && p.logic == LogicTag::C2);
            if !fits {
                return Err(Failure::input(json!({
                    "message": format!("file declares logic {}, asked for {}", p.logic.name(), tag.name())
                })));
            }
            tag
        }
    };
    Ok((p, logic))
}

fn model_value(m: Option<&SigmaStructure>, vocab: &Vocabulary) -> Value {
    m.map_or(Value::Null, |m| serde_json::to_value(model_to_json(m, vocab)).expect("json"))
}

fn normalize_failure(e: impl std::fmt::Display) -> Failure {
    Failure::input(json!({ "message": e.to_string() }))
}

fn run(cli: &Cli, cfg: &Config) -> Outcome {
    let opts = &cli.opts;
    match &cli.command {
        Command::Parse { file } => {
            let (p, logic) = load(file, opts)?;
            Ok((json!({ "logic": logic, "canonical": print(&p) }), 0))
        }
        Command::Normalize { file } => {
            let (p, logic) = load(file, opts)?;
            if logic == LogicTag::Gp2 {
                let n = to_gp2_normal_form(&p).map_err(normalize_failure)?;
                let text = print_formula(&n.nf.to_formula(), &n.nf.vocab);
                Ok((json!({ "logic": logic, "normal_form": text, "trace": n.trace }), 0))
            } else {
                let n = to_c2_normal_form(&p).map_err(normalize_failure)?;
                let globals: Vec<String> = n.globals.iter().map(|g| print_global(g, &n.nf.vocab)).collect();
                Ok((
                    json!({
                        "logic": logic,
                        "normal_form": print_formula(&n.nf.to_formula(), &n.nf.vocab),
                        "globals": globals,
                        "small_cases": n.small_cases,
                        "trace": n.trace,
                    }),
                    0,
                ))
            }
        }
        Command::Sat { file } | Command::Model { file, vector: None } => {
            let (p, logic) = load(file, opts)?;
            sat(&p, logic, cfg)
        }
        Command::Model { file, vector: Some(text) } => {
            let (p, logic) = load(file, opts)?;
            if logic == LogicTag::Gp2 {
                return Err(Failure::input(json!({ "message": "--vector needs a c2 or c2g problem" })));
            }
            model_with_vector(&p, text, cfg)
        }
        Command::Spectrum { file } => {
            let (p, logic) = load(file, opts)?;
            if logic == LogicTag::Gp2 {
                return Err(Failure::input(json!({ "message": "spectrum needs a c2 problem" })));
            }
            spectrum(&p, opts.cap.unwrap_or(6), cfg)
        }
        Command::Oracle { file } => {
            let (p, _) = load(file, opts)?;
            let max = opts.cap.unwrap_or(cfg.oracle_max_size);
            let o = OracleOptions {
                allow_empty: cfg.allow_empty,
                exec: cfg.exec,
                ..OracleOptions::up_to(max)
            };
            let ts = TypeSpace::new(p.vocab.n(), p.vocab.m());
            let m = find_model(ts, &p.sentence, &p.globals, &o);
            Ok((
                json!({ "found": m.is_some(), "max_size": max, "model": model_value(m.as_ref(), &p.vocab) }),
                0,
            ))
        }
        Command::Selftest => selftest(cfg),
    }
}

fn sat(p: &SourceProblem, logic: LogicTag, cfg: &Config) -> Outcome {
    if logic == LogicTag::Gp2 {
        let (report, model) = gp2solver::solve_problem(p, cfg).map_err(|e| match e {
            gp2solver::ProblemError::Solve(e) => Failure {
                code: 2,
                error: json!({ "message": e.to_string(), "verdict": "inconclusive" }),
            },
            other => normalize_failure(other),
        })?;
        return Ok((
            json!({
                "logic": logic,
                "verdict": report.verdict,
                "stats": report.stats,
                "model": model_value(model.as_ref(), &p.vocab),
                "witness_note": report.witness_note,
            }),
            0,
        ));
    }
    let out = c2solver::solve_problem(p, cfg).map_err(normalize_failure)?;
    let code = if out.report.verdict == C2Verdict::Inconclusive { 2 } else { 0 };
    Ok((
        json!({
            "logic": logic,
            "verdict": out.report.verdict,
            "reason": out.report.reason,
            "stats": out.report.stats,
            "model": model_value(out.source_model.as_ref(), &p.vocab),
        }),
        code,
    ))
}

fn mask_string(mask: usize, width: usize) -> String {
    format!("{mask:0width$b}")
}

fn type_legend(vocab: &Vocabulary) -> Value {
    json!({
        "unary_bits": vocab.unary_names(),
        "loop_bits": vocab.binary_names(),
        "note": "bit i of a mask, counted from the right, is the i-th unary predicate, then R(x,x) per binary",
    })
}

fn spectrum(p: &SourceProblem, cap: usize, cfg: &Config) -> Outcome {
    let n = to_c2_normal_form(p).map_err(normalize_failure)?;
    if !n.globals.is_empty() {
        return Err(Failure::input(json!({ "message": "spectrum takes a problem without global constraints" })));
    }
    let ts = n.nf.type_space();
    let width = ts.n + ts.m;
    let r = c2solver::spectrum_report(&n.nf, cap, cfg);
    let keyed = |v: &Vec<usize>| -> Value {
        let map: serde_json::Map<String, Value> = v
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(mask, &c)| (mask_string(mask, width), json!(c)))
            .collect();
        Value::Object(map)
    };
    let code = if r.inconclusive.is_empty() { 0 } else { 2 };
    let note = (!n.small_cases.is_empty()).then(|| {
        format!(
            "spectrum of the normal form; it may be stricter than the source at sizes {:?}",
            n.small_cases
        )
    });
    Ok((
        json!({
            "cap": cap,
            "types": type_legend(&n.nf.vocab),
            "totals": r.totals,
            "vectors": r.members.iter().map(keyed).collect::<Vec<_>>(),
            "inconclusive": r.inconclusive.iter().map(keyed).collect::<Vec<_>>(),
            "note": note,
        }),
        code,
    ))
}

fn parse_vector(text: &str, ts: &TypeSpace) -> Result<Vec<usize>, Failure> {
    let width = ts.n + ts.m;
    let mut v = vec![0; ts.one_type_count()];
    let bad = || Failure::input(json!({ "message": format!("bad vector `{text}`, expected mask=count,...") }));
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (mask, count) = item.split_once('=').ok_or_else(bad)?;
        let mask = mask.trim();
        if mask.len() != width {
            return Err(bad());
        }
        let idx = usize::from_str_radix(mask, 2).map_err(|_| bad())?;
        v[idx] += count.trim().parse::<usize>().map_err(|_| bad())?;
    }
    Ok(v)
}

fn model_with_vector(p: &SourceProblem, text: &str, cfg: &Config) -> Outcome {
    let n = to_c2_normal_form(p).map_err(normalize_failure)?;
    if !n.globals.is_empty() {
        return Err(Failure::input(json!({ "message": "--vector takes a problem without global constraints" })));
    }
    let ts = n.nf.type_space();
    let v = parse_vector(text, &ts)?;
    match c2solver::spectrum_witness(&n.nf, &v, cfg) {
        Ok(None) => Ok((json!({ "member": false, "model": null }), 0)),
        Ok(Some(Ok(m))) => {
            let ok = cardinality_vector(&m) == v && evaluate(&m, &n.nf.to_formula(), &[]);
            if !ok {
                return Err(Failure {
                    code: 2,
                    error: json!({ "message": "constructed structure failed verification" }),
                });
            }
            Ok((
                json!({ "member": true, "verified": true, "model": model_value(Some(&m), &n.nf.vocab) }),
                0,
            ))
        }
        Ok(Some(Err(e))) => Ok((json!({ "member": true, "model": null, "construction": e.to_string() }), 2)),
        Err(e) => Err(Failure {
            code: 2,
            error: json!({ "message": e.to_string(), "verdict": "inconclusive" }),
        }),
    }
}

const PERCENTAGE: &str = include_str!("../fixtures/percentage.tvl");
const MATCHING: &str = include_str!("../fixtures/matching.tvl");

fn selftest(cfg: &Config) -> Outcome {
    let mut checks: Vec<(String, bool)> = Vec::new();
    for m in 1..=4 {
        let ts = TypeSpace::new(0, m);
        let involution = ts.two_types().all(|e: TwoType| dual(dual(e)) == e);
        checks.push((format!("dual involution, {m} binaries"), involution));
    }
    for (n, m) in [(0, 1), (2, 1), (1, 2), (3, 2)] {
        let ts = TypeSpace::new(n, m);
        let ok = ts.one_types().count() == 1 << (n + m) && ts.audible_two_types().count() == (1 << (2 * m)) - 1;
        checks.push((format!("type counts, n={n} m={m}"), ok));
    }
    let p = parse(PERCENTAGE).expect("fixture parses");
    let percentage = matches!(gp2solver::solve_problem(&p, cfg), Ok((r, Some(m)))
        if r.verdict == gp2solver::Verdict::Sat && evaluate(&m, &p.sentence, &[]));
    checks.push(("percentage fixture is satisfiable with a verified model".into(), percentage));
    let p = parse(MATCHING).expect("fixture parses");
    let nf = to_c2_normal_form(&p).expect("fixture normalizes").nf;
    let spectrum = c2solver::spectrum_report(&nf, 6, &Config { core_cap: 6, ..cfg.clone() });
    let ts = nf.type_space();
    let oracle: Vec<usize> = (1..=6)
        .filter(|&s| {
            let o = OracleOptions {
                min_size: s,
                exec: cfg.exec,
                ..OracleOptions::up_to(s)
            };
            find_model(ts, &p.sentence, &[], &o).is_some()
        })
        .collect();
    let totals: Vec<usize> = spectrum.totals.iter().copied().collect();
    checks.push(("matching spectrum agrees with the oracle".into(), totals == oracle && spectrum.inconclusive.is_empty()));
    let loops_free = (0..ts.one_type_count()).filter(|&t| ts.loop_free(OneType(t as u32))).count();
    checks.push(("loop-free 1-types".into(), loops_free == 1 << ts.n));
    let all = checks.iter().all(|(_, ok)| *ok);
    let list: Vec<Value> = checks.iter().map(|(name, ok)| json!({ "name": name, "pass": ok })).collect();
    if all {
        Ok((json!({ "checks": list, "pass": true }), 0))
    } else {
        Err(Failure {
            code: 1,
            error: json!({ "message": "self-test failed", "checks": list }),
        })
    }
}
