use std::collections::BTreeMap;
use std::io::Read;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use recomp::graph::{build_graph, replay_paths, to_dot, to_json, GraphLimits, ReplayCaps};
use recomp::model::{AlphabetRegistry, LetterId, ParseError, Problem, Provenance, Substitution};
use recomp::oracle::{brute_solve, enumerate_solutions, OracleLimits};
use recomp::solver::reconstruct::{verify, Verdict};
use recomp::solver::{solve, BlockMode, Limit, Outcome, SolveReport, SolverConfig};
use serde_json::{json, Value};

const EXIT_SAT: u8 = 0;
const EXIT_UNSAT: u8 = 1;
const EXIT_UNKNOWN: u8 = 2;
const EXIT_USAGE: u8 = 64;

/// Decide and solve word equations by recompression.
#[derive(Parser, Debug)]
#[command(name = "recomp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Look for a solution within a node budget.
    Solve(SolveArgs),
    /// Answer satisfiability, exhaustively unless a budget is given.
    Decide(SolveArgs),
    /// Check a candidate assignment.
    Verify {
        /// Equation text, JSON, `-` for stdin or `@path`.
        equation: String,
        /// Value of one variable, as `X=word`. Unlisted variables are empty.
        #[arg(long = "assign", value_name = "VAR=WORD")]
        assign: Vec<String>,
        #[arg(long, default_value_t = 1 << 20)]
        expansion_cap: usize,
    },
    /// Build the bounded solution graph.
    Graph(GraphArgs),
    /// Brute-force search over short assignments.
    Oracle {
        equation: String,
        /// Largest total length of all values.
        #[arg(long)]
        maxlen: usize,
        /// Forbid empty values.
        #[arg(long)]
        nonempty: bool,
        /// List every solution instead of the first.
        #[arg(long)]
        all: bool,
    },
}

#[derive(Args, Debug)]
struct SolveArgs {
    equation: String,
    /// Node budget; `solve` defaults to 200000, `decide` to none.
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long, default_value_t = 64)]
    max_phases: usize,
    /// Drop states longer than this multiple of the input length.
    #[arg(long, default_value_t = 100)]
    length_factor: usize,
    #[arg(long, value_enum, default_value_t = BlockArg::Parametric)]
    block_mode: BlockArg,
    /// Largest run length guessed in explicit block mode.
    #[arg(long)]
    block_cap: Option<BigUint>,
    /// Longest expansion printed or verified letter by letter.
    #[arg(long, default_value_t = 1 << 20)]
    expansion_cap: usize,
    #[arg(long, env = "RECOMP_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Include the definitions of derived letters in the report.
    #[arg(long)]
    dump_slp: bool,
}

#[derive(Args, Debug)]
struct GraphArgs {
    equation: String,
    /// Most nodes kept.
    #[arg(long, default_value_t = 2000)]
    budget: usize,
    #[arg(long, default_value_t = 3)]
    max_phases: usize,
    #[arg(long, default_value_t = 85)]
    length_factor: usize,
    #[arg(long, value_enum, default_value_t = GraphFormat::Json)]
    format: GraphFormat,
    /// Also list every solution read off the graph.
    #[arg(long)]
    replay: bool,
    /// Longest expanded solution kept when replaying.
    #[arg(long, default_value_t = 64)]
    replay_cap: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BlockArg {
    Parametric,
    Explicit,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GraphFormat {
    Json,
    Dot,
}

struct Failure(String);

impl From<ParseError> for Failure {
    fn from(e: ParseError) -> Self {
        Failure(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_SAT });
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn run(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Solve(a) => run_solver(a, SolverConfig::search()),
        Command::Decide(a) => run_solver(a, SolverConfig::decide()),
        Command::Verify { equation, assign, expansion_cap } => run_verify(&equation, &assign, expansion_cap),
        Command::Graph(a) => run_graph(a),
        Command::Oracle { equation, maxlen, nonempty, all } => run_oracle(&equation, maxlen, nonempty, all),
    }
}

fn load(arg: &str) -> Result<Problem, Failure> {
    let text = if arg == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(|e| Failure(format!("reading stdin: {e}")))?;
        s
    } else if let Some(path) = arg.strip_prefix('@') {
        std::fs::read_to_string(path).map_err(|e| Failure(format!("reading {path}: {e}")))?
    } else {
        arg.to_string()
    };
    Problem::parse_any(text.trim_end()).map_err(|e| {
        let col = match e {
            ParseError::ExtraEquals(c) | ParseError::BadChar { col: c, .. } => Some(c),
            _ => None,
        };
        match col {
            Some(c) if !text.contains('\n') => Failure(format!("{e}\n  {}\n  {}^", text.trim_end(), " ".repeat(c - 1))),
            _ => Failure(e.to_string()),
        }
    })
}

fn run_solver(a: SolveArgs, base: SolverConfig) -> Result<u8, Failure> {
    let problem = load(&a.equation)?;
    let config = SolverConfig {
        max_phases: a.max_phases,
        length_factor: a.length_factor,
        block_mode: match a.block_mode {
            BlockArg::Parametric => BlockMode::Parametric,
            BlockArg::Explicit => BlockMode::Explicit,
        },
        explicit_block_cap: a.block_cap,
        expansion_cap: a.expansion_cap,
        seed: a.seed,
        node_budget: a.budget.or(base.node_budget),
        threads: a.threads,
        ..base
    };
    let report = solve(&problem, &config).map_err(|e| Failure(e.to_string()))?;
    let SolveReport { outcome, stats, elapsed } = &report;
    let mut out = json!({
        "schema": 1,
        "command": format!("{:?}", config.mode).to_lowercase(),
        "input": problem.to_string(),
        "phases": stats.phases,
        "nodes": stats.nodes,
        "stats": stats,
        "timings": { "total_ms": elapsed.as_secs_f64() * 1e3 },
    });
    let code = match outcome {
        Outcome::Sat(sol) => {
            out["status"] = json!("sat");
            out["witness"] = witness_json(&problem, &sol.registry, &sol.substitution, config.expansion_cap);
            out["verdict"] = json!(verdict_name(&sol.verdict));
            if a.dump_slp {
                out["slp"] = slp_json(&sol.registry);
            }
            EXIT_SAT
        }
        Outcome::Unsat => {
            out["status"] = json!("unsat");
            EXIT_UNSAT
        }
        Outcome::Unknown(limit) => {
            out["status"] = json!("unknown");
            out["limit"] = json!(match limit {
                Limit::NodeBudget(n) => format!("node budget {n}"),
                Limit::MaxPhases(p) => format!("phase limit {p}"),
                Limit::NoGuide => "no guide".to_string(),
            });
            EXIT_UNKNOWN
        }
    };
    eprintln!(
        "{}: {} in {:.1} ms, {} nodes, {} phases",
        problem,
        out["status"].as_str().unwrap_or("?"),
        elapsed.as_secs_f64() * 1e3,
        stats.nodes,
        stats.phases
    );
    summarize_witness(&out);
    emit(&out);
    Ok(code)
}

// Expanded values when short enough, otherwise the length and the compressed word.
fn witness_json(problem: &Problem, registry: &AlphabetRegistry, sigma: &Substitution, cap: usize) -> Value {
    let mut w = serde_json::Map::new();
    for (x, word) in sigma.iter() {
        let value = match registry.expand_word(word, cap).ok().and_then(|e| e.full()) {
            Some(full) => json!(problem.show_word(registry, &full)),
            None => json!({
                "length": registry.word_length(word).map(|n| n.to_string()).unwrap_or_default(),
                "slp": word.iter().map(|&a| registry.name(a)).collect::<Vec<_>>(),
            }),
        };
        w.insert(problem.var_name(x), value);
    }
    Value::Object(w)
}

fn slp_json(registry: &AlphabetRegistry) -> Value {
    let rows: Vec<Value> = registry
        .entries()
        .filter_map(|(a, p)| match p {
            Provenance::Input(_) => None,
            Provenance::Pair(x, y) => Some(json!({
                "letter": registry.name(a),
                "pair": [registry.name(*x), registry.name(*y)],
            })),
            Provenance::Block(x, n) => Some(json!({
                "letter": registry.name(a),
                "block": { "base": registry.name(*x), "count": n.to_string() },
            })),
        })
        .collect();
    Value::Array(rows)
}

fn verdict_name(v: &Verdict) -> &'static str {
    match v {
        Verdict::Equal => "equal",
        Verdict::Unequal => "unequal",
        Verdict::Inconclusive(_) => "inconclusive",
    }
}

fn summarize_witness(out: &Value) {
    if let Some(w) = out["witness"].as_object() {
        for (x, v) in w {
            match v.as_str() {
                Some(s) => eprintln!("  {x} = {s}"),
                None => eprintln!("  {x} = <{} letters>", v["length"].as_str().unwrap_or("?")),
            }
        }
    }
}

fn emit(out: &Value) {
    println!("{}", serde_json::to_string_pretty(out).expect("report serializes"));
}

// Words are strings of one-character letter names, or space separated names.
fn parse_value(problem: &Problem, text: &str) -> Result<Vec<LetterId>, Failure> {
    let by_name: BTreeMap<String, LetterId> = problem.registry.input_letters().map(|a| (problem.registry.name(a), a)).collect();
    let names: Vec<String> = if text.contains(char::is_whitespace) {
        text.split_whitespace().map(str::to_string).collect()
    } else {
        text.chars().map(String::from).collect()
    };
    names
        .iter()
        .map(|n| by_name.get(n).copied().ok_or_else(|| Failure(format!("unknown letter {n:?} in {text:?}"))))
        .collect()
}

fn run_verify(equation: &str, assign: &[String], cap: usize) -> Result<u8, Failure> {
    let start = Instant::now();
    let problem = load(equation)?;
    let mut sigma = Substitution::new();
    for x in problem.equation.vars() {
        sigma.set(x, Vec::new());
    }
    for item in assign {
        let (name, word) = item.split_once('=').ok_or_else(|| Failure(format!("expected VAR=WORD, got {item:?}")))?;
        let x = problem.var_by_name(name.trim()).ok_or_else(|| Failure(format!("unknown variable {name:?}")))?;
        sigma.set(x, parse_value(&problem, word)?);
    }
    let verdict = verify(&problem.equation, &sigma, &problem.registry, cap);
    let (status, code) = match verdict {
        Verdict::Equal => ("sat", EXIT_SAT),
        Verdict::Unequal => ("unsat", EXIT_UNSAT),
        Verdict::Inconclusive(_) => ("unknown", EXIT_UNKNOWN),
    };
    let mut out = json!({
        "schema": 1,
        "command": "verify",
        "input": problem.to_string(),
        "status": status,
        "verdict": verdict_name(&verdict),
        "phases": 0,
        "nodes": 0,
        "timings": { "total_ms": start.elapsed().as_secs_f64() * 1e3 },
    });
    if verdict == Verdict::Equal {
        out["witness"] = witness_json(&problem, &problem.registry, &sigma, cap);
    }
    eprintln!("{problem}: assignment is {}", if code == EXIT_SAT { "a solution" } else { "not a solution" });
    emit(&out);
    Ok(code)
}

fn run_graph(a: GraphArgs) -> Result<u8, Failure> {
    let start = Instant::now();
    let problem = load(&a.equation)?;
    let limits = GraphLimits { node_budget: a.budget, max_phases: a.max_phases, length_factor: a.length_factor, ..Default::default() };
    let graph = build_graph(&problem, &limits);
    let caps = ReplayCaps { expansion_cap: a.replay_cap, ..Default::default() };
    let (solutions, replay_stats) = replay_paths(&graph, &caps);
    let (status, code) = if graph.root.is_none() {
        ("unsat", EXIT_UNSAT)
    } else if !solutions.is_empty() {
        ("sat", EXIT_SAT)
    } else {
        ("unknown", EXIT_UNKNOWN)
    };
    let ms = start.elapsed().as_secs_f64() * 1e3;
    eprintln!(
        "{problem}: {status}, {} nodes, {} edges{}, {} solutions replayed in {ms:.1} ms",
        graph.nodes.len(),
        graph.edges.len(),
        if graph.incomplete { " (incomplete)" } else { "" },
        solutions.len()
    );
    if let Some(d) = &graph.diagnostic {
        eprintln!("  {d}");
    }
    if let GraphFormat::Dot = a.format {
        print!("{}", to_dot(&graph));
        return Ok(code);
    }
    let mut out = json!({
        "schema": 1,
        "command": "graph",
        "input": problem.to_string(),
        "status": status,
        "phases": graph.nodes.iter().map(|n| n.phase).max().unwrap_or(0),
        "nodes": graph.nodes.len(),
        "timings": { "total_ms": ms },
        "replay": replay_stats,
        "graph": to_json(&graph),
    });
    if let Some(first) = solutions.first() {
        out["witness"] = witness_json(&problem, &problem.registry, &first.substitution, a.replay_cap);
    }
    if a.replay {
        out["solutions"] = solutions
            .iter()
            .map(|s| json!({ "witness": witness_json(&problem, &problem.registry, &s.substitution, a.replay_cap), "path": s.path }))
            .collect();
    }
    emit(&out);
    Ok(code)
}

fn run_oracle(equation: &str, maxlen: usize, nonempty: bool, all: bool) -> Result<u8, Failure> {
    let start = Instant::now();
    let problem = load(equation)?;
    let mut limits = OracleLimits::new(maxlen);
    if nonempty {
        limits = limits.nonempty();
    }
    let (eq, reg) = (&problem.equation, &problem.registry);
    let solutions = if all {
        enumerate_solutions(eq, reg, &limits)
    } else {
        brute_solve(eq, reg, &limits).found().cloned().into_iter().collect()
    };
    // Without variables the bounded search is complete.
    let (status, code) = match (solutions.is_empty(), eq.has_vars()) {
        (false, _) => ("sat", EXIT_SAT),
        (true, false) => ("unsat", EXIT_UNSAT),
        (true, true) => ("unknown", EXIT_UNKNOWN),
    };
    let mut out = json!({
        "schema": 1,
        "command": "oracle",
        "input": problem.to_string(),
        "status": status,
        "bound": maxlen,
        "phases": 0,
        "nodes": 0,
        "timings": { "total_ms": start.elapsed().as_secs_f64() * 1e3 },
    });
    if let Some(first) = solutions.first() {
        out["witness"] = witness_json(&problem, reg, first, usize::MAX);
    }
    if all {
        out["solutions"] = solutions.iter().map(|s| witness_json(&problem, reg, s, usize::MAX)).collect();
    }
    match status {
        "unknown" => eprintln!("{problem}: no solution of total length at most {maxlen}"),
        _ => eprintln!("{problem}: {status}, {} solutions listed", solutions.len()),
    }
    summarize_witness(&out);
    emit(&out);
    Ok(code)
}
