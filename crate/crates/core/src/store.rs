//! Run persistence, incident metadata and report tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use statrs::statistics::Statistics;
use thiserror::Error;

use crate::domain::{parse_address, Address, ChainId, RunRecord};
use crate::llm::PricingTable;

pub const STORE_ENV: &str = "EXGEN_STORE";
pub const DEFAULT_STORE: &str = "exgen-runs.jsonl";
pub const BUNDLED_INCIDENTS: &str = include_str!("../fixtures/incidents.tsv");
pub const FAIL_MARK: &str = "✗";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Schema { line: usize, reason: String },
    #[error("no runs match the requested slice")]
    EmptyStore,
    #[error("csv: {0}")]
    Csv(String),
}

fn schema(line: usize, reason: impl Into<String>) -> StoreError {
    StoreError::Schema {
        line,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncidentRecord {
    pub name: String,
    pub chain: ChainId,
    pub block: u64,
    pub contracts: Vec<Address>,
}

/// Tab-separated `name chain block contracts`, contracts comma-separated;
/// `#` lines are comments.
pub fn parse_incidents(text: &str) -> Result<Vec<IncidentRecord>, StoreError> {
    let mut out = Vec::new();
    let mut names = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.trim_end();
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let [name, chain, block, contracts] = f.as_slice() else {
            return Err(schema(n, "expected 4 tab-separated fields"));
        };
        let chain_id: u64 = chain.parse().map_err(|_| schema(n, "bad chain id"))?;
        let chain = ChainId::try_from(chain_id).map_err(|e| schema(n, e.to_string()))?;
        let block = block.parse().map_err(|_| schema(n, "bad block number"))?;
        let contracts = contracts
            .split(',')
            .map(|a| parse_address(a.trim()).map_err(|e| schema(n, e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        if !names.insert(name.to_string()) {
            return Err(schema(n, format!("duplicate incident {name}")));
        }
        out.push(IncidentRecord {
            name: name.to_string(),
            chain,
            block,
            contracts,
        });
    }
    Ok(out)
}

pub fn load_incidents(path: &Path) -> Result<Vec<IncidentRecord>, StoreError> {
    let text = std::fs::read_to_string(path).map_err(|source| StoreError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_incidents(&text)
}

pub fn bundled_incidents() -> Vec<IncidentRecord> {
    parse_incidents(BUNDLED_INCIDENTS).expect("bundled incidents parse")
}

/// One persisted run with its index fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredRun {
    pub incident: String,
    pub experiment: u32,
    pub record: RunRecord,
}

impl StoredRun {
    pub fn model(&self) -> &str {
        &self.record.model_id
    }
}

/// Append-only JSON-lines log of runs.
pub struct RunStore {
    path: PathBuf,
    writer: Mutex<()>,
}

impl RunStore {
    pub fn open(path: impl Into<PathBuf>) -> Self {
        RunStore {
            path: path.into(),
            writer: Mutex::new(()),
        }
    }

    /// The store named by `EXGEN_STORE`, else the default file name in the
    /// working directory.
    pub fn from_env() -> Self {
        RunStore::open(std::env::var_os(STORE_ENV).map(PathBuf::from).unwrap_or_else(|| DEFAULT_STORE.into()))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn io(&self, source: std::io::Error) -> StoreError {
        StoreError::Io {
            path: self.path.display().to_string(),
            source,
        }
    }

    /// Writes one record as a single line with one `write` call.
    pub fn append(&self, run: &StoredRun) -> Result<(), StoreError> {
        let mut line = serde_json::to_string(run).map_err(|e| schema(0, e.to_string()))?;
        line.push('\n');
        let _guard = self.writer.lock().expect("store lock poisoned");
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| self.io(e))?;
        f.write_all(line.as_bytes()).map_err(|e| self.io(e))?;
        f.flush().map_err(|e| self.io(e))
    }

    /// All records in append order; a missing file is an empty store.
    pub fn read_all(&self) -> Result<Vec<StoredRun>, StoreError> {
        let f = match File::open(&self.path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(self.io(e)),
        };
        let mut out = Vec::new();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| self.io(e))?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line).map_err(|e| schema(i + 1, e.to_string()))?);
        }
        Ok(out)
    }

    /// Next free experiment number for (incident, model).
    pub fn next_experiment(&self, incident: &str, model: &str) -> Result<u32, StoreError> {
        Ok(self
            .read_all()?
            .iter()
            .filter(|r| r.incident == incident && r.model() == model)
            .map(|r| r.experiment)
            .max()
            .map_or(1, |m| m + 1))
    }
}

/// Restricts runs to optional incident and model filters.
pub fn select<'a>(runs: &'a [StoredRun], incident: Option<&str>, model: Option<&str>) -> Vec<&'a StoredRun> {
    runs.iter()
        .filter(|r| incident.is_none_or(|i| r.incident == i))
        .filter(|r| model.is_none_or(|m| r.model() == m))
        .collect()
}

/// A rendered report: header plus rows of cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn to_markdown(&self) -> String {
        let mut s = format!("| {} |\n", self.header.join(" | "));
        s.push_str(&format!("|{}\n", "---|".repeat(self.header.len())));
        for r in &self.rows {
            s.push_str(&format!("| {} |\n", r.join(" | ")));
        }
        s
    }

    pub fn to_csv(&self) -> Result<String, StoreError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| StoreError::Csv(e.to_string());
        w.write_record(&self.header).map_err(err)?;
        for r in &self.rows {
            w.write_record(r).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| StoreError::Csv(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| StoreError::Csv(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportKind {
    SuccessTable,
    TokenTable,
    TimingTable,
}

/// Base-currency USD prices per incident, `name<TAB>usd` lines.
pub fn parse_prices(text: &str) -> Result<BTreeMap<String, f64>, StoreError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, usd) = line
            .split_once('\t')
            .ok_or_else(|| schema(i + 1, "expected name<TAB>usd"))?;
        let usd: f64 = usd.trim().parse().map_err(|_| schema(i + 1, "bad price"))?;
        out.insert(name.to_string(), usd);
    }
    Ok(out)
}

/// One row per incident; per model one column per experiment holding the
/// execution index of the first success or the fail mark. The best revenue
/// is shown in base units and, when a price is known, in USD.
pub fn success_table(runs: &[&StoredRun], prices: &BTreeMap<String, f64>) -> Result<Table, StoreError> {
    if runs.is_empty() {
        return Err(StoreError::EmptyStore);
    }
    let models: BTreeSet<&str> = runs.iter().map(|r| r.model()).collect();
    let experiments: BTreeSet<u32> = runs.iter().map(|r| r.experiment).collect();
    let incidents: BTreeSet<&str> = runs.iter().map(|r| r.incident.as_str()).collect();
    let mut header = vec!["incident".to_string()];
    for m in &models {
        for e in &experiments {
            header.push(format!("{m} #{e}"));
        }
    }
    header.extend(["best_revenue".to_string(), "best_revenue_usd".to_string()]);
    let mut rows = Vec::new();
    for inc in &incidents {
        let mut row = vec![inc.to_string()];
        let mut best: Option<&StoredRun> = None;
        for m in &models {
            for e in &experiments {
                let hit = runs
                    .iter()
                    .find(|r| r.incident == *inc && r.model() == *m && r.experiment == *e);
                row.push(match hit {
                    None => String::new(),
                    Some(r) => {
                        if best.is_none_or(|b| r.record.best_revenue.raw > b.record.best_revenue.raw) {
                            best = Some(r);
                        }
                        r.record
                            .success_iteration()
                            .map_or(FAIL_MARK.to_string(), |i| i.to_string())
                    }
                });
            }
        }
        let revenue = best.map(|b| b.record.best_revenue).filter(|r| !r.is_zero());
        row.push(revenue.map_or(String::new(), |r| r.to_decimal_string()));
        row.push(match (revenue, prices.get(*inc)) {
            (Some(r), Some(p)) => format!("{:.2}", r.to_f64() * p),
            _ => String::new(),
        });
        rows.push(row);
    }
    Ok(Table { header, rows })
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let mean = v.mean();
    let std = if v.len() > 1 { v.std_dev() } else { 0.0 };
    (mean, std)
}

fn fmt2(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.2}")
    }
}

/// Per model and LLM turn: mean and sample standard deviation of prompt
/// and completion tokens, and the mean cost when the model is priced.
pub fn token_table(runs: &[&StoredRun], pricing: &PricingTable) -> Result<Table, StoreError> {
    if runs.is_empty() {
        return Err(StoreError::EmptyStore);
    }
    type Samples = Vec<(f64, f64, Option<f64>)>;
    let mut groups: BTreeMap<(&str, u32), Samples> = BTreeMap::new();
    for r in runs {
        for it in &r.record.iterations {
            let cost = pricing
                .cost(r.model(), &it.usage)
                .ok()
                .and_then(|c| c.to_string().parse::<f64>().ok());
            groups.entry((r.model(), it.turn)).or_default().push((
                it.usage.prompt_tokens as f64,
                it.usage.completion_tokens as f64,
                cost,
            ));
        }
    }
    let header = [
        "model",
        "turn",
        "n",
        "prompt_mean",
        "prompt_std",
        "completion_mean",
        "completion_std",
        "cost_mean_usd",
    ]
    .map(String::from)
    .to_vec();
    let rows = groups
        .into_iter()
        .map(|((model, turn), v)| {
            let prompt: Vec<f64> = v.iter().map(|x| x.0).collect();
            let completion: Vec<f64> = v.iter().map(|x| x.1).collect();
            let costs: Option<Vec<f64>> = v.iter().map(|x| x.2).collect();
            let (pm, ps) = mean_std(&prompt);
            let (cm, cs) = mean_std(&completion);
            vec![
                model.to_string(),
                turn.to_string(),
                v.len().to_string(),
                fmt2(pm),
                fmt2(ps),
                fmt2(cm),
                fmt2(cs),
                costs.map_or(String::new(), |c| format!("{:.4}", c.mean())),
            ]
        })
        .collect();
    Ok(Table { header, rows })
}

/// Per model: run count and mean/std of total, model and tool seconds.
pub fn timing_table(runs: &[&StoredRun]) -> Result<Table, StoreError> {
    if runs.is_empty() {
        return Err(StoreError::EmptyStore);
    }
    let mut groups: BTreeMap<&str, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for r in runs {
        let its = &r.record.iterations;
        let model: f64 = its.iter().map(|i| i.model_seconds).sum();
        let tool: f64 = its.iter().map(|i| i.tool_seconds).sum();
        groups.entry(r.model()).or_default().push((model + tool, model, tool));
    }
    let header = [
        "model",
        "runs",
        "total_mean_s",
        "total_std_s",
        "model_mean_s",
        "tool_mean_s",
    ]
    .map(String::from)
    .to_vec();
    let rows = groups
        .into_iter()
        .map(|(model, v)| {
            let total: Vec<f64> = v.iter().map(|x| x.0).collect();
            let (tm, ts) = mean_std(&total);
            vec![
                model.to_string(),
                v.len().to_string(),
                fmt2(tm),
                fmt2(ts),
                fmt2(v.iter().map(|x| x.1).collect::<Vec<_>>().mean()),
                fmt2(v.iter().map(|x| x.2).collect::<Vec<_>>().mean()),
            ]
        })
        .collect();
    Ok(Table { header, rows })
}

pub fn report(
    kind: ReportKind,
    runs: &[&StoredRun],
    pricing: &PricingTable,
    prices: &BTreeMap<String, f64>,
) -> Result<Table, StoreError> {
    match kind {
        ReportKind::SuccessTable => success_table(runs, prices),
        ReportKind::TokenTable => token_table(runs, pricing),
        ReportKind::TimingTable => timing_table(runs),
    }
}
