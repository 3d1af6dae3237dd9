use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rust_decimal::Decimal;

use exgen::agent::{run_experiment, AgentConfig, AgentError, ToolOrderMode, WallClock};
use exgen::domain::{parse_address, ChainId, Outcome, TargetSpec};
use exgen::econ::{self, EconConfig};
use exgen::exec::Scenario;
use exgen::llm::{PricingTable, ProviderRoute, ScriptedBackend};
use exgen::store::{self, ReportKind, RunStore, StoredRun};

const EXIT_EXHAUSTED: u8 = 2;
const EXIT_USAGE: u8 = 64;

/// Flag combinations clap cannot check; reported with the usage exit code.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Parser)]
#[command(name = "exgen", version, about = "Execution-validated exploit generation and economic analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one agent experiment against a fixture scenario.
    Run(RunArgs),
    /// Tabulate stored runs.
    Report(ReportArgs),
    /// Economic analyses.
    #[command(subcommand)]
    Econ(EconCommand),
    /// Attack-window tools.
    #[command(subcommand)]
    Window(WindowCommand),
    /// Incident metadata.
    #[command(subcommand)]
    Incidents(IncidentsCommand),
}

#[derive(Args)]
struct RunArgs {
    /// Bundled incident name; fills chain, contracts and block.
    #[arg(long)]
    incident: Option<String>,
    #[arg(long)]
    chain: Option<u64>,
    #[arg(long = "contract")]
    contracts: Vec<String>,
    #[arg(long)]
    block: Option<u64>,
    #[arg(long)]
    model: String,
    /// Concrete-execution budget.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
    max_iters: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scenario id (`name@block`) or directory.
    #[arg(long)]
    fixture: String,
    /// Scripted provider transcript.
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// OpenAI-compatible chat endpoint; key read from EXGEN_API_KEY.
    #[cfg(feature = "http")]
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long, value_enum, default_value_t = ToolMode::Fixed)]
    tool_mode: ToolMode,
    /// Run store; defaults to $EXGEN_STORE.
    #[arg(long)]
    store: Option<PathBuf>,
    /// Print the full record as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ToolMode {
    Fixed,
    Free,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Markdown,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
#[allow(clippy::enum_variant_names)]
enum Kind {
    SuccessTable,
    TokenTable,
    TimingTable,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long)]
    incident: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Markdown)]
    format: Format,
    /// `incident<TAB>usd` base-currency prices.
    #[arg(long)]
    prices: Option<PathBuf>,
}

#[derive(Subcommand)]
enum EconCommand {
    /// Expected profit per analyzed contract over (rho, delay).
    ProfitGrid {
        #[arg(long)]
        config: PathBuf,
    },
    /// Attacker and defender payoffs per scan and their break-even values.
    Race {
        #[arg(long, value_delimiter = ',', default_values_t = [Decimal::new(1, 3), Decimal::new(1, 4), Decimal::new(1, 5)])]
        rho: Vec<Decimal>,
        #[arg(long, default_value_t = Decimal::from(3))]
        scan_cost: Decimal,
        #[arg(long, default_value_t = Decimal::new(1, 1))]
        bounty: Decimal,
        /// Exploit values; defaults to a 1-2-5 ladder from 1k to 10M.
        #[arg(long, value_delimiter = ',')]
        values: Vec<Decimal>,
    },
    /// Monte-Carlo success probability per model and detection delay.
    DelayTable {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum WindowCommand {
    /// Smallest block where the oracle holds.
    Bisect {
        #[arg(long)]
        genesis: u64,
        #[arg(long)]
        attack_block: u64,
        /// Shell command run per probe with `{block}` substituted; exit 0
        /// means exploitable.
        #[arg(long, conflicts_with = "threshold")]
        oracle_cmd: Option<String>,
        /// Synthetic oracle: exploitable from this block on.
        #[arg(long)]
        threshold: Option<u64>,
        /// Add monotonicity spot checks.
        #[arg(long)]
        verify: bool,
    },
}

#[derive(Subcommand)]
enum IncidentsCommand {
    List {
        #[arg(long)]
        file: Option<PathBuf>,
        #[arg(long)]
        chain: Option<u64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Report(a) => cmd_report(a).map(|_| ExitCode::SUCCESS),
        Command::Econ(c) => cmd_econ(c).map(|_| ExitCode::SUCCESS),
        Command::Window(WindowCommand::Bisect {
            genesis,
            attack_block,
            oracle_cmd,
            threshold,
            verify,
        }) => cmd_bisect(genesis, attack_block, oracle_cmd, threshold, verify).map(|_| ExitCode::SUCCESS),
        Command::Incidents(IncidentsCommand::List { file, chain }) => {
            cmd_incidents(file, chain).map(|_| ExitCode::SUCCESS)
        }
    }
}

/// Writes to stdout; a closed pipe ends output quietly.
fn out(text: &str) -> Result<()> {
    use std::io::Write;
    let mut stdout = std::io::stdout().lock();
    match stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn open_store(path: Option<PathBuf>) -> RunStore {
    path.map(RunStore::open).unwrap_or_else(RunStore::from_env)
}

fn resolve_target(a: &RunArgs) -> Result<(String, TargetSpec)> {
    let incident = match &a.incident {
        Some(name) => Some(
            store::bundled_incidents()
                .into_iter()
                .find(|i| &i.name == name)
                .ok_or_else(|| usage(format!("unknown incident {name}")))?,
        ),
        None => None,
    };
    let chain = match (a.chain, &incident) {
        (Some(c), _) => ChainId::try_from(c).map_err(|e| usage(e.to_string()))?,
        (None, Some(i)) => i.chain,
        (None, None) => return Err(usage("--chain or --incident is required")),
    };
    let block = a
        .block
        .or(incident.as_ref().map(|i| i.block))
        .ok_or_else(|| usage("--block or --incident is required"))?;
    let contracts = if a.contracts.is_empty() {
        incident
            .as_ref()
            .map(|i| i.contracts.clone())
            .ok_or_else(|| usage("--contract or --incident is required"))?
    } else {
        a.contracts
            .iter()
            .map(|c| parse_address(c).map_err(|e| usage(e.to_string())))
            .collect::<Result<_>>()?
    };
    let name = incident.map_or_else(|| a.fixture.split('@').next().unwrap_or("").to_string(), |i| i.name);
    let target = TargetSpec::new(chain, contracts, block).map_err(|e| usage(e.to_string()))?;
    Ok((name, target))
}

fn provider(a: &RunArgs) -> Result<ProviderRoute> {
    #[cfg(feature = "http")]
    if let Some(endpoint) = &a.endpoint {
        let key = std::env::var("EXGEN_API_KEY").unwrap_or_default();
        return Ok(ProviderRoute::single(exgen::llm::http::HttpBackend::new("http", endpoint, &key)));
    }
    let path = a.transcript.as_ref().ok_or_else(|| usage("--transcript is required"))?;
    Ok(ProviderRoute::single(ScriptedBackend::load("scripted", path)?))
}

fn cmd_run(a: RunArgs) -> Result<ExitCode> {
    PricingTable::bundled().get(&a.model)?;
    let (incident, target) = resolve_target(&a)?;
    let scenario = Arc::new(Scenario::load(&a.fixture)?);
    let route = provider(&a)?;
    let mut config = AgentConfig::new(&a.model).with_budget(a.max_iters);
    config.tool_order_mode = match a.tool_mode {
        ToolMode::Fixed => ToolOrderMode::Fixed,
        ToolMode::Free => ToolOrderMode::Free,
    };
    let store = open_store(a.store.clone());
    let clock = WallClock::default();
    let record = match run_experiment(&target, scenario, &route, &config, a.seed, &clock) {
        Ok(r) => r,
        Err(e) => {
            let partial = match &e {
                AgentError::Provider { partial, .. } | AgentError::Tool { partial, .. } => Some(partial.clone()),
                _ => None,
            };
            if let Some(mut p) = partial {
                p.error = Some(e.to_string());
                let experiment = store.next_experiment(&incident, &a.model)?;
                store.append(&StoredRun {
                    incident,
                    experiment,
                    record: *p,
                })?;
            }
            return Err(e.into());
        }
    };
    let experiment = store.next_experiment(&incident, &a.model)?;
    let stored = StoredRun {
        incident,
        experiment,
        record,
    };
    store.append(&stored)?;
    let r = &stored.record;
    if a.json {
        out(&format!("{}\n", serde_json::to_string_pretty(&stored)?))?;
    } else {
        out(&format!(
            "{} {} experiment {}: {:?} after {} executions ({} model turns), best revenue {} {}\n",
            stored.incident,
            a.model,
            experiment,
            r.outcome,
            r.execution_count(),
            r.iterations.len(),
            r.best_revenue,
            r.target.chain().base_currency().symbol,
        ))?;
    }
    Ok(match r.outcome {
        Outcome::Success => ExitCode::SUCCESS,
        Outcome::Exhausted => ExitCode::from(EXIT_EXHAUSTED),
        Outcome::Error => ExitCode::FAILURE,
    })
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let runs = open_store(a.store).read_all()?;
    let slice = store::select(&runs, a.incident.as_deref(), a.model.as_deref());
    let prices = match a.prices {
        Some(p) => store::parse_prices(&std::fs::read_to_string(&p).with_context(|| p.display().to_string())?)?,
        None => BTreeMap::new(),
    };
    let kind = match a.kind {
        Kind::SuccessTable => ReportKind::SuccessTable,
        Kind::TokenTable => ReportKind::TokenTable,
        Kind::TimingTable => ReportKind::TimingTable,
    };
    let table = store::report(kind, &slice, &PricingTable::bundled(), &prices)?;
    match a.format {
        Format::Markdown => out(&table.to_markdown())?,
        Format::Csv => out(&table.to_csv()?)?,
    }
    Ok(())
}

fn load_econ(path: &PathBuf) -> Result<EconConfig> {
    let text = std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
    toml::from_str(&text).with_context(|| path.display().to_string())
}

fn value_ladder() -> Vec<Decimal> {
    let mut out = Vec::new();
    let mut scale = Decimal::from(1000);
    while scale <= Decimal::from(10_000_000) {
        for m in [1, 2, 5] {
            let v = scale * Decimal::from(m);
            if v <= Decimal::from(10_000_000) {
                out.push(v);
            }
        }
        scale *= Decimal::from(10);
    }
    out
}

fn cmd_econ(c: EconCommand) -> Result<()> {
    match c {
        EconCommand::ProfitGrid { config } => {
            let cfg = load_econ(&config)?;
            let grid = cfg.profit_grid()?;
            out(&econ::to_csv(&grid)?)?;
            for x in econ::break_even_crossings(&grid) {
                eprintln!(
                    "break-even: {} at delay {} min between rho {} and {}",
                    x.model, x.delay_minutes, x.rho_below, x.rho_above
                );
            }
        }
        EconCommand::Race {
            rho,
            scan_cost,
            bounty,
            values,
        } => {
            let values = if values.is_empty() { value_ladder() } else { values };
            out(&econ::to_csv(&econ::race_curves(&rho, &values, scan_cost, bounty))?)?;
            for r in &rho {
                let be = econ::break_even_values(*r, scan_cost, bounty)?;
                let (att, def) = be.to_decimals().context("break-even out of range")?;
                eprintln!("rho {r}: attacker break-even {att}, defender break-even {def}");
            }
        }
        EconCommand::DelayTable { config } => {
            let cfg = load_econ(&config)?;
            out(&econ::to_csv(&cfg.delay_table()?)?)?;
        }
    }
    Ok(())
}

fn cmd_bisect(
    genesis: u64,
    attack_block: u64,
    oracle_cmd: Option<String>,
    threshold: Option<u64>,
    verify: bool,
) -> Result<()> {
    let mut failure: Option<anyhow::Error> = None;
    let mut oracle = |b: u64| -> bool {
        if let Some(t) = threshold {
            return b >= t;
        }
        let cmd = oracle_cmd.as_deref().unwrap_or_default().replace("{block}", &b.to_string());
        match std::process::Command::new("sh").arg("-c").arg(&cmd).status() {
            Ok(s) => s.success(),
            Err(e) => {
                failure.get_or_insert(e.into());
                false
            }
        }
    };
    if threshold.is_none() && oracle_cmd.is_none() {
        return Err(usage("--oracle-cmd or --threshold is required"));
    }
    let result = if verify {
        econ::bisect_attack_window_verified(&mut oracle, genesis, attack_block)
    } else {
        econ::bisect_attack_window(&mut oracle, genesis, attack_block)
    };
    if let Some(e) = failure {
        return Err(e.context("oracle command failed to start"));
    }
    let r = result?;
    let mut line = format!(
        "introduced at block {}, window {} blocks, {} probes",
        r.introduced, r.window_blocks, r.probes
    );
    if !verify {
        line.push_str(&format!(" (bound {})", econ::probe_bound(genesis, attack_block)));
    }
    out(&(line + "\n"))
}

fn cmd_incidents(file: Option<PathBuf>, chain: Option<u64>) -> Result<()> {
    let incidents = match file {
        Some(f) => store::load_incidents(&f)?,
        None => store::bundled_incidents(),
    };
    let mut text = String::from("name\tchain\tblock\tcontracts\n");
    for i in incidents.iter().filter(|i| chain.is_none_or(|c| i.chain.id() == c)) {
        let contracts: Vec<String> = i.contracts.iter().map(|c| c.to_string()).collect();
        text.push_str(&format!("{}\t{}\t{}\t{}\n", i.name, i.chain.id(), i.block, contracts.join(",")));
    }
    out(&text)
}
