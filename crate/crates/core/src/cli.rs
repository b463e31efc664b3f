//! Command-line interface.
//!
//! Exit codes: 0 on success, 1 when `--strict` is set and a run was scored as
//! failed, 2 on configuration or I/O errors.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::agents::Trajectory;
use crate::harness::{
    evaluate, export, run_task, write_run, AgentKind, AggregateReport, BackendChoice, BackendFactory, EvalOptions,
    ExportFormat, FaultCondition, HarnessError, RunReport, RunSpec, Scenario, Suite,
};
use crate::history::ToolHistory;

#[derive(Debug, Parser)]
#[command(name = "riva", version, about = "Cross-validated infrastructure verification with two cooperating agents")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one agent on one scenario.
    Run(RunArgs),
    /// Run a full evaluation suite.
    Eval(EvalArgs),
    /// Summarize a run directory or one of its artifacts.
    Inspect(InspectArgs),
    /// Convert an aggregate report to another format.
    Export(ExportArgs),
    /// List the tasks of a suite or scenario.
    ListTasks(ListArgs),
}

#[derive(Debug, Args)]
pub struct BackendArgs {
    /// scripted, scripted:<script.json>, replay:<trajectory.json> or http:<base-url>
    #[arg(long, default_value = "scripted")]
    pub backend: String,
    /// Model name sent to an HTTP backend.
    #[arg(long, default_value = "gpt-oss:120b")]
    pub model: String,
    /// Environment variable holding the API key of an HTTP backend.
    #[arg(long, value_name = "VAR")]
    pub api_key_env: Option<String>,
    /// Sampling temperature for an HTTP backend.
    #[arg(long, default_value_t = 0.0)]
    pub temperature: f64,
}

impl BackendArgs {
    fn choice(&self) -> Result<BackendChoice, HarnessError> {
        BackendChoice::parse(&self.backend, &self.model, self.api_key_env.clone(), self.temperature)
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario file.
    #[arg(long)]
    pub scenario: PathBuf,
    /// riva or react
    #[arg(long, default_value = "riva")]
    pub agent: String,
    /// Distinct tools required per verdict (riva only).
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Cap on backend replies across all agents.
    #[arg(long, default_value_t = 45)]
    pub max_steps: usize,
    /// none, get_logs, read_metrics or both
    #[arg(long, default_value = "none")]
    pub fault: String,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Environment seed; defaults to the scenario's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory receiving runs/<task>/<agent>/<condition>/<rep>/.
    #[arg(long, default_value = "riva-out")]
    pub out: PathBuf,
    /// Exit with 1 when the run is scored as failed.
    #[arg(long)]
    pub strict: bool,
    /// Keep exploratory tool calls in the history.
    #[arg(long)]
    pub record_exploratory: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Suite file.
    #[arg(long)]
    pub suite: PathBuf,
    /// Agents to run instead of the suite's (repeatable).
    #[arg(long = "agent")]
    pub agents: Vec<String>,
    /// Overrides K of every riva agent.
    #[arg(long)]
    pub k: Option<usize>,
    /// Overrides the suite's step cap.
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Fault conditions to run instead of the suite's (repeatable).
    #[arg(long = "fault")]
    pub faults: Vec<String>,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Comma-separated seeds, one per repetition.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Runs executed in parallel.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Directory receiving per-run artifacts and the aggregate reports.
    #[arg(long, default_value = "riva-out")]
    pub out: PathBuf,
    /// Exit with 1 when any run is scored as failed.
    #[arg(long)]
    pub strict: bool,
    /// Keep exploratory tool calls in the history.
    #[arg(long)]
    pub record_exploratory: bool,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// A run directory, trajectory.json, history.json or report.json.
    pub path: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Aggregate report JSON written by `eval`.
    #[arg(long)]
    pub report: PathBuf,
    /// json, csv or cdf-csv
    #[arg(long)]
    pub format: String,
    /// Output file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ListArgs {
    /// Suite file.
    #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
    pub suite: Option<PathBuf>,
    /// A single scenario file.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
}

fn parse_k(k: usize) -> Result<usize, HarnessError> {
    if k == 0 {
        return Err(HarnessError::Config("k must be ≥ 1".into()));
    }
    Ok(k)
}

fn agent_with_k(agent: &str, k: Option<usize>) -> Result<AgentKind, HarnessError> {
    let kind: AgentKind = agent.parse()?;
    Ok(match (kind, k) {
        (AgentKind::Riva { .. }, Some(k)) => AgentKind::Riva { k: parse_k(k)? },
        (other, _) => other,
    })
}

enum Failure {
    Scored,
    Config(HarnessError),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Failure::Config(e)
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(Failure::Scored) => 1,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run(a) => run(a),
        Command::Eval(a) => eval(a),
        Command::Inspect(a) => inspect(&a.path).map_err(Failure::from),
        Command::Export(a) => {
            let format: ExportFormat = a.format.parse()?;
            let report = read_aggregate(&a.report)?;
            export(&report, format, &a.out)?;
            println!("{}", a.out.display());
            Ok(())
        }
        Command::ListTasks(a) => list_tasks(&a).map_err(Failure::from),
    }
}

fn run(a: RunArgs) -> Result<(), Failure> {
    let agent = agent_with_k(&a.agent, Some(parse_k(a.k)?))?;
    if a.max_steps == 0 {
        return Err(HarnessError::Config("max-steps must be ≥ 1".into()).into());
    }
    let condition: FaultCondition = a.fault.parse()?;
    let scenario = Scenario::load(&a.scenario)?;
    let factory = BackendFactory::new(a.backend.choice()?)?;
    let backend = factory.for_scenario(&scenario)?;
    let spec = RunSpec {
        agent,
        condition,
        repetition: 0,
        seed: a.seed.unwrap_or(scenario.file.seed),
        max_steps: a.max_steps,
        record_exploratory: a.record_exploratory,
    };
    let artifacts = run_task(&scenario, &spec, backend.as_ref())?;
    let dir = write_run(&a.out, &artifacts)?;
    println!("{}", serde_json::to_string_pretty(&artifacts.report).expect("report serializes"));
    eprintln!("artifacts written to {}", dir.display());
    if a.strict && !artifacts.report.success {
        return Err(Failure::Scored);
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<(), Failure> {
    let mut suite = Suite::load(&a.suite)?;
    if let Some(k) = a.k {
        parse_k(k)?;
    }
    if !a.agents.is_empty() {
        suite.file.agents = a.agents.iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
    }
    if let Some(k) = a.k {
        for agent in &mut suite.file.agents {
            if let AgentKind::Riva { k: old } = agent {
                *old = k;
            }
        }
    }
    if !a.faults.is_empty() {
        suite.file.conditions = a.faults.iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
    }
    if let Some(m) = a.max_steps {
        suite.file.max_steps = m;
    }
    if !a.seeds.is_empty() {
        suite.file.repetitions = a.seeds.len();
        suite.file.seeds = Some(a.seeds.clone());
    }
    suite.validate()?;
    let factory = BackendFactory::new(a.backend.choice()?)?;
    let opts = EvalOptions { workers: a.workers, out_dir: Some(a.out.clone()), record_exploratory: a.record_exploratory };
    let report = evaluate(&suite, &factory, &opts)?;
    print_summary(&report);
    eprintln!("reports written to {}", a.out.display());
    if a.strict && report.runs.iter().any(|r| !r.success) {
        return Err(Failure::Scored);
    }
    Ok(())
}

fn print_summary(report: &AggregateReport) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{:<10} {:<13} {:>6} {:>8} {:>10}", "agent", "condition", "runs", "success", "max steps");
    for c in &report.conditions {
        let max_steps = report
            .runs
            .iter()
            .filter(|r| r.agent == c.agent && r.condition == c.condition)
            .map(|r| r.steps)
            .max()
            .unwrap_or(0);
        let _ = writeln!(
            out,
            "{:<10} {:<13} {:>6} {:>7.1}% {:>10}",
            c.agent.to_string(),
            c.condition.to_string(),
            c.runs,
            c.success_rate_over_runs * 100.0,
            max_steps
        );
    }
}

fn read_aggregate(path: &Path) -> Result<AggregateReport, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    AggregateReport::from_json(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
}

fn read(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

fn bad_json(path: &Path, e: serde_json::Error) -> HarnessError {
    HarnessError::Config(format!("{}: {e}", path.display()))
}

fn inspect(path: &Path) -> Result<(), HarnessError> {
    let mut out = std::io::stdout().lock();
    let files: Vec<PathBuf> = if path.is_dir() {
        ["report.json", "history.json", "trajectory.json"].iter().map(|f| path.join(f)).filter(|p| p.exists()).collect()
    } else {
        vec![path.to_path_buf()]
    };
    if files.is_empty() {
        return Err(HarnessError::Config(format!("{}: no run artifacts found", path.display())));
    }
    for f in files {
        let text = read(&f)?;
        let name = f.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("report") {
            let r: RunReport = serde_json::from_str(&text).map_err(|e| bad_json(&f, e))?;
            let _ = writeln!(
                out,
                "run {} {} {} rep {}: success={} steps={} tokens={} terminated_by={}",
                r.task_id, r.agent, r.condition, r.repetition, r.success, r.steps, r.total_tokens, r.terminated_by
            );
            if let Some(a) = &r.answer {
                let _ = writeln!(out, "  answer: {a}");
            }
        } else if name.starts_with("history") {
            if text.trim() == "null" {
                let _ = writeln!(out, "history: none (single-agent run)");
                continue;
            }
            let h = ToolHistory::from_json(&text).map_err(|e| bad_json(&f, e))?;
            let _ = writeln!(out, "history (K={}, {} conclusive):", h.k(), h.conclusive_count());
            for (id, g) in h.goals() {
                let _ = writeln!(out, "  {id} [{:?}, {:?}]", g.status, g.origin);
                for (i, rec) in g.records.iter().enumerate() {
                    let _ = writeln!(out, "    {i}: {} -> {}", rec.command.render(), first_line(&rec.analysis));
                }
            }
        } else {
            let t: Trajectory = serde_json::from_str(&text).map_err(|e| bad_json(&f, e))?;
            let _ = writeln!(
                out,
                "trajectory: {} steps ({} counted), terminated_by={}",
                t.steps.len(),
                t.counted_steps(),
                t.terminated_by
            );
            for s in &t.steps {
                let mark = if s.counted { "*" } else { " " };
                let _ = writeln!(out, " {mark}{:>3} {:<12} {:?}: {}", s.index, s.actor.to_string(), s.kind, first_line(&s.payload));
            }
        }
    }
    Ok(())
}

fn first_line(s: &str) -> String {
    let line = s.lines().map(str::trim).find(|l| !l.is_empty() && !l.starts_with("```")).unwrap_or("");
    if line.chars().count() > 100 {
        format!("{}…", line.chars().take(100).collect::<String>())
    } else {
        line.to_string()
    }
}

fn list_tasks(a: &ListArgs) -> Result<(), HarnessError> {
    let scenarios = match (&a.suite, &a.scenario) {
        (Some(s), _) => Suite::load(s)?.scenarios,
        (None, Some(p)) => vec![Scenario::load(p)?],
        (None, None) => unreachable!("clap requires one of --suite or --scenario"),
    };
    let mut out = std::io::stdout().lock();
    for s in &scenarios {
        let faults: Vec<String> = s.file.faults.iter().map(|f| f.kind.fault_kind().to_string()).collect();
        let _ = writeln!(
            out,
            "{} [{}] faults: {}",
            s.name(),
            s.file.task_type,
            if faults.is_empty() { "none".to_string() } else { faults.join(", ") }
        );
        for (property, tools) in s.available_tools() {
            let _ = writeln!(out, "  {property}: {}", tools.join(", "));
        }
    }
    Ok(())
}
