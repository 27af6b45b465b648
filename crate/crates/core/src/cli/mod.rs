//! The `quipmc` command line.
//!
//! Exit codes: 0 on success, 1 when a checked property is false or a chain
//! fails the trace-preservation check, 2 on any error.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde_json::{json, Value as Json};

use crate::emit::{emit_dot, emit_qpmc, parse_complex};
use crate::frontend::{load_program, CheckedProgram, VarId};
use crate::linalg::{CMatrix, DensityMatrix};
use crate::par::Exec;
use crate::qctl::{self, evaluate, parse_formula, EvalContext, Property, Value};
use crate::refsim::{self, Limits};
use crate::semantics::{build_program_chain_with, check_qmc, ChainOptions, Qmc, DEFAULT_STATE_CAP};

#[derive(Debug, Parser)]
#[command(name = "quipmc", version, about = "Quip-E to quantum Markov chain compiler and QCTL checker")]
pub struct Cli {
    /// Machine-readable output; errors go to stderr as JSON.
    #[arg(long, global = true)]
    pub json: bool,
    /// Write the main output here instead of stdout.
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
    /// Run every data-parallel loop on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Emit the QPMC model of a program.
    Translate(ChainArgs),
    /// Evaluate QCTL properties.
    Check(CheckArgs),
    /// Enumerate the branches of a run with the reference simulator.
    Simulate {
        input: PathBuf,
        #[command(flatten)]
        init: InitArg,
        /// Body passes per branch.
        #[arg(long, default_value_t = 30)]
        max_loops: usize,
        #[arg(long)]
        max_steps: Option<usize>,
        #[arg(long, default_value_t = 1 << 16)]
        max_branches: usize,
    },
    /// Emit the chain as Graphviz DOT.
    Graph(ChainArgs),
    /// Check that every state's outgoing maps sum to a trace-preserving map.
    VerifyTp {
        #[command(flatten)]
        chain: ChainArgs,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub chain: ChainArgs,
    /// Property file, one formula per line.
    #[arg(long)]
    pub props: PathBuf,
    #[command(flatten)]
    pub init: InitArg,
    /// Comparison tolerance for thresholds.
    #[arg(long, default_value_t = qctl::DEFAULT_TOL)]
    pub tol: f64,
    /// Fixpoint iteration cap for unbounded until.
    #[arg(long, default_value_t = qctl::DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    /// Thresholds must hold for every input state.
    #[arg(long)]
    pub all_rho: bool,
    /// `Q=?` queries report the vectorized superoperator.
    #[arg(long)]
    pub superop: bool,
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    /// Quip-E source file.
    pub input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
    pub max_states: usize,
}

#[derive(Debug, Args)]
pub struct InitArg {
    /// `|0101>`, `maxmixed`, or a file holding a density matrix with one
    /// row per line. Defaults to the all-zero ket.
    #[arg(long)]
    pub init: Option<String>,
}

/// A failure reported with exit code 2.
#[derive(Debug)]
pub struct CliError {
    pub stage: &'static str,
    pub message: String,
}

impl CliError {
    fn new(stage: &'static str, message: impl ToString) -> Self {
        CliError {
            stage,
            message: message.to_string(),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<CheckedProgram, CliError> {
    let src = read(path)?;
    load_program(&src).map_err(|e| CliError::new("frontend", format!("{}:{e}", path.display())))
}

fn chain(args: &ChainArgs) -> Result<(CheckedProgram, Qmc), CliError> {
    let p = load(&args.input)?;
    let c = build_program_chain_with(
        &p,
        ChainOptions {
            state_cap: args.max_states,
        },
    )
    .map_err(|e| CliError::new("semantics", e))?;
    Ok((p, c))
}

fn positive(name: &str, x: f64) -> Result<(), CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(CliError::new("usage", format!("--{name} must be positive, got {x}")))
    }
}

/// Parses an initial-state spec for an `n`-qubit program.
pub fn parse_init(spec: Option<&str>, n: usize) -> Result<DensityMatrix, CliError> {
    let bad = |m: String| CliError::new("init", m);
    let Some(spec) = spec.map(str::trim) else {
        return DensityMatrix::basis(0, n).map_err(|e| bad(e.to_string()));
    };
    if spec == "maxmixed" {
        return Ok(DensityMatrix::maximally_mixed(n));
    }
    if let Some(bits) = spec.strip_prefix('|').and_then(|s| s.strip_suffix('>')) {
        if bits.len() != n || !bits.chars().all(|c| c == '0' || c == '1') {
            return Err(bad(format!("`{spec}` is not a {n}-qubit basis ket")));
        }
        let index = usize::from_str_radix(bits, 2).map_err(|e| bad(e.to_string()))?;
        return DensityMatrix::basis(index, n).map_err(|e| bad(e.to_string()));
    }
    let text = read(Path::new(spec))?;
    let rows = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            l.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| parse_complex(t, i + 1))
                .collect::<Result<Vec<Complex64>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| bad(format!("{spec}: {e}")))?;
    let m = CMatrix::from_rows(&rows).map_err(|e| bad(format!("{spec}: {e}")))?;
    if m.rows() != 1 << n {
        return Err(bad(format!("{spec}: expected a {0}x{0} matrix", 1 << n)));
    }
    DensityMatrix::new(m).map_err(|e| bad(format!("{spec}: {e}")))
}

/// Non-empty lines of a property file that are not `#` or `//` comments,
/// with their line numbers.
pub fn property_lines(text: &str) -> Vec<(usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#') && !l.starts_with("//"))
        .collect()
}

fn complex_json(z: Complex64) -> Json {
    json!([z.re, z.im])
}

fn matrix_json(m: &CMatrix) -> Json {
    Json::Array(
        (0..m.rows())
            .map(|r| Json::Array(m.row(r).iter().map(|z| complex_json(*z)).collect()))
            .collect(),
    )
}

fn value_json(v: &Value) -> (&'static str, Json) {
    match v {
        Value::Bool(b) => ("bool", json!(b)),
        Value::Prob { p, .. } => ("prob", json!(p)),
        Value::Matrix(m) => ("matrix", matrix_json(m)),
    }
}

fn value_text(v: &Value) -> String {
    match v {
        Value::Bool(b) => b.to_string(),
        Value::Prob { p, range: None } => format!("{p}"),
        Value::Prob { p, range: Some((lo, hi)) } => format!("{p} (over all inputs: [{lo}, {hi}])"),
        Value::Matrix(m) => std::iter::once(format!("trace {}", m.trace().re))
            .chain((0..m.rows()).map(|r| {
                m.row(r)
                    .iter()
                    .map(|z| format!("{}{:+}i", z.re, z.im))
                    .collect::<Vec<_>>()
                    .join(" ")
            }))
            .collect::<Vec<_>>()
            .join("\n  "),
    }
}

/// Output text and whether the run counts as a success.
struct Report {
    text: String,
    ok: bool,
}

fn run_check(cli: &Cli, args: &CheckArgs) -> Result<Report, CliError> {
    positive("tol", args.tol)?;
    let (_, c) = chain(&args.chain)?;
    let rho = parse_init(args.init.init.as_deref(), c.num_qubits())?;
    let props = &args.props;
    let text = read(props)?;
    let parsed = property_lines(&text)
        .into_iter()
        .map(|(no, line)| {
            parse_formula(line)
                .map(|p| (line, p))
                .map_err(|e| CliError::new("qctl", format!("{}:{no}: {e}", props.display())))
        })
        .collect::<Result<Vec<(&str, Property)>, _>>()?;
    let mut ctx = EvalContext::new(&c, rho).map_err(|e| CliError::new("init", e))?;
    ctx.tol = args.tol;
    ctx.max_iters = args.max_iters;
    ctx.all_rho = args.all_rho;
    ctx.exec = if cli.sequential { Exec::Sequential } else { Exec::default() };

    let mut ok = true;
    let mut records = Vec::new();
    let mut lines = Vec::new();
    for (line, prop) in &parsed {
        let v = evaluate(&ctx, prop, args.superop).map_err(|e| CliError::new("qctl", format!("`{line}`: {e}")))?;
        if v == Value::Bool(false) {
            ok = false;
        }
        let (kind, value) = value_json(&v);
        let mut rec = json!({ "formula": line, "kind": kind, "value": value });
        if let Value::Prob { range: Some((lo, hi)), .. } = v {
            rec["range"] = json!([lo, hi]);
        }
        records.push(rec);
        lines.push(format!("{line}\n  {}", value_text(&v)));
    }
    let text = if cli.json {
        serde_json::to_string_pretty(&records).expect("serializable") + "\n"
    } else {
        lines.join("\n") + "\n"
    };
    Ok(Report { text, ok })
}

fn run_simulate(cli: &Cli, input: &Path, init: &InitArg, limits: Limits) -> Result<Report, CliError> {
    let p = load(input)?;
    let rho = parse_init(init.init.as_deref(), p.num_qubits())?;
    let out = refsim::simulate_density(&p, &rho, limits).map_err(|e| CliError::new("refsim", e))?;
    let branches: Vec<Json> = out
        .terminals
        .iter()
        .map(|t| {
            let env: serde_json::Map<String, Json> = p
                .vars
                .iter()
                .enumerate()
                .map(|(i, v)| (v.name.clone(), json!(t.get(VarId(i)))))
                .collect();
            json!({
                "steps": t.steps,
                "passes": t.loops + 1,
                "weight": t.weight(),
                "env": env,
                "state": t.normalized_state().into_iter().map(complex_json).collect::<Vec<_>>(),
            })
        })
        .collect();
    let text = if cli.json {
        let doc = json!({
            "terminated_mass": out.termination_prob(),
            "unfinished_mass": out.unfinished_mass,
            "pruned_mass": out.pruned_mass,
            "branches": branches,
        });
        serde_json::to_string_pretty(&doc).expect("serializable") + "\n"
    } else {
        let mut s = format!(
            "terminated mass {}\nunfinished mass {}\n",
            out.termination_prob(),
            out.unfinished_mass
        );
        for (i, t) in out.terminals.iter().enumerate() {
            let env: Vec<String> = p
                .vars
                .iter()
                .enumerate()
                .map(|(k, v)| format!("{}={}", v.name, u8::from(t.get(VarId(k)))))
                .collect();
            s += &format!(
                "branch {i}: weight {} steps {} passes {} [{}]\n",
                t.weight(),
                t.steps,
                t.loops + 1,
                env.join(" ")
            );
        }
        s
    };
    Ok(Report { text, ok: true })
}

fn run_verify(cli: &Cli, chain_args: &ChainArgs, tol: f64) -> Result<Report, CliError> {
    positive("tol", tol)?;
    let (_, c) = chain(chain_args)?;
    let report = check_qmc(&c, tol);
    let ok = report.passed();
    let text = if cli.json {
        let doc = json!({
            "states": c.num_states(),
            "tol": tol,
            "passed": ok,
            "max_deviation": report.max_deviation(),
            "failing_states": report.failures().map(|v| v.state).collect::<Vec<_>>(),
            "increasing_edges": report.increasing_edges,
        });
        serde_json::to_string_pretty(&doc).expect("serializable") + "\n"
    } else {
        let mut s = String::new();
        for v in &report.states {
            s += &format!(
                "state {}: {} (deviation {:e})\n",
                v.state,
                if v.trace_preserving { "ok" } else { "FAIL" },
                v.deviation
            );
        }
        for (from, to) in &report.increasing_edges {
            s += &format!("edge {from} -> {to}: trace-increasing\n");
        }
        s += &format!(
            "{}: {} states, max deviation {:e}\n",
            if ok { "all states pass" } else { "trace preservation FAILED" },
            c.num_states(),
            report.max_deviation()
        );
        s
    };
    Ok(Report { text, ok })
}

fn execute(cli: &Cli) -> Result<Report, CliError> {
    match &cli.command {
        Command::Translate(a) => Ok(Report {
            text: emit_qpmc(&chain(a)?.1),
            ok: true,
        }),
        Command::Graph(a) => Ok(Report {
            text: emit_dot(&chain(a)?.1),
            ok: true,
        }),
        Command::Check(args) => run_check(cli, args),
        Command::Simulate {
            input,
            init,
            max_loops,
            max_steps,
            max_branches,
        } => run_simulate(
            cli,
            input,
            init,
            Limits {
                max_loops: *max_loops,
                max_steps: *max_steps,
                max_branches: *max_branches,
            },
        ),
        Command::VerifyTp { chain, tol } => run_verify(cli, chain, *tol),
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = execute(cli).and_then(|r| {
        match &cli.output {
            Some(path) => fs::write(path, &r.text)
                .map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))?,
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(r.text.as_bytes())
                    .and_then(|_| out.flush())
                    .map_err(|e| CliError::new("io", e))?;
            }
        }
        Ok(r.ok)
    });
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            if cli.json {
                eprintln!("{}", json!({ "error": e.stage, "message": e.message }));
            } else {
                eprintln!("error: {}", e.message);
            }
            2
        }
    }
}

/// Entry point for the binary: argument errors also exit with code 2.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            code
        }
    }
}
