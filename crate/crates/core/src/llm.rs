//! Vendor-agnostic model access: ordered backends with failover, token
//! accounting and exact-decimal cost computation.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Add;
use std::path::Path;
use std::sync::Mutex;

use regex::Regex;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("unknown model {0:?}")]
    UnknownModel(String),
    #[error("pricing table line {line}: {reason}")]
    PricingSchema { line: usize, reason: String },
    #[error("transcript line {line}: {reason}")]
    TranscriptSchema { line: usize, reason: String },
    #[error("route has no backends")]
    EmptyRoute,
    #[error("all backends failed: {}", format_causes(.0))]
    AllBackendsFailed(Vec<(String, String)>),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn format_causes(causes: &[(String, String)]) -> String {
    causes
        .iter()
        .map(|(b, c)| format!("{b}: {c}"))
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    /// Billed inside `completion_tokens`.
    pub reasoning_tokens: u64,
}

impl TokenUsage {
    pub fn new(prompt: u64, completion: u64, reasoning: u64) -> Self {
        TokenUsage {
            prompt_tokens: prompt,
            completion_tokens: completion,
            reasoning_tokens: reasoning,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.reasoning_tokens <= self.completion_tokens
    }

    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

impl Add for TokenUsage {
    type Output = TokenUsage;
    fn add(self, o: TokenUsage) -> TokenUsage {
        TokenUsage {
            prompt_tokens: self.prompt_tokens + o.prompt_tokens,
            completion_tokens: self.completion_tokens + o.completion_tokens,
            reasoning_tokens: self.reasoning_tokens + o.reasoning_tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PricingEntry {
    pub model_id: String,
    pub alias: Option<String>,
    pub input_usd_per_million: Decimal,
    pub output_usd_per_million: Decimal,
    pub context_window: u64,
    /// Training cutoff as `YYYY-MM`, when published.
    pub cutoff: Option<String>,
}

/// `prompt * input / 1e6 + completion * output / 1e6`, exact.
pub fn compute_cost(usage: &TokenUsage, pricing: &PricingEntry) -> Decimal {
    let million = Decimal::from(1_000_000u32);
    (Decimal::from(usage.prompt_tokens) * pricing.input_usd_per_million
        + Decimal::from(usage.completion_tokens) * pricing.output_usd_per_million)
        / million
}

/// Rounds to cents for display.
pub fn display_usd(cost: Decimal) -> String {
    format!(
        "{:.2}",
        cost.round_dp_with_strategy(2, rust_decimal::RoundingStrategy::MidpointAwayFromZero)
    )
}

pub const BUNDLED_PRICING: &str = include_str!("../fixtures/pricing.tsv");

/// Immutable model price list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PricingTable {
    entries: Vec<PricingEntry>,
}

impl PricingTable {
    pub fn bundled() -> Self {
        PricingTable::parse(BUNDLED_PRICING).expect("bundled pricing table parses")
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path).map_err(|source| LlmError::Io {
            path: path.display().to_string(),
            source,
        })?;
        PricingTable::parse(&text)
    }

    /// Tab-separated: `model_id alias input output context cutoff`; `-`
    /// marks an absent alias, `unknown` an absent cutoff.
    pub fn parse(text: &str) -> Result<Self, LlmError> {
        let mut entries: Vec<PricingEntry> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = l.split('\t').map(str::trim).collect();
            let err = |reason: &str| LlmError::PricingSchema {
                line,
                reason: reason.to_string(),
            };
            if cols.len() != 6 {
                return Err(err("expected 6 tab-separated columns"));
            }
            let price = |s: &str| -> Result<Decimal, LlmError> {
                let d: Decimal = s.parse().map_err(|_| err("bad price"))?;
                if d.is_sign_negative() {
                    return Err(err("negative price"));
                }
                Ok(d)
            };
            let entry = PricingEntry {
                model_id: cols[0].to_string(),
                alias: (cols[1] != "-").then(|| cols[1].to_string()),
                input_usd_per_million: price(cols[2])?,
                output_usd_per_million: price(cols[3])?,
                context_window: cols[4].parse().map_err(|_| err("bad context window"))?,
                cutoff: (!cols[5].eq_ignore_ascii_case("unknown")).then(|| cols[5].to_string()),
            };
            if entries.iter().any(|e| e.model_id == entry.model_id) {
                return Err(err("duplicate model id"));
            }
            entries.push(entry);
        }
        Ok(PricingTable { entries })
    }

    pub fn entries(&self) -> &[PricingEntry] {
        &self.entries
    }

    /// Looks a model up by id or alias.
    pub fn get(&self, model: &str) -> Result<&PricingEntry, LlmError> {
        self.entries
            .iter()
            .find(|e| e.model_id == model || e.alias.as_deref() == Some(model))
            .ok_or_else(|| LlmError::UnknownModel(model.to_string()))
    }

    pub fn cost(&self, model: &str, usage: &TokenUsage) -> Result<Decimal, LlmError> {
        Ok(compute_cost(usage, self.get(model)?))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CompletionParams {
    pub model: String,
    pub temperature: Option<f32>,
    pub max_tokens: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendReply {
    pub text: String,
    pub usage: TokenUsage,
    /// Backend-reported latency; scripted backends replay authored values.
    pub latency_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct BackendError(pub String);

pub trait Backend: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, prompt: &str, params: &CompletionParams)
        -> Result<BackendReply, BackendError>;
}

pub struct RouteEntry {
    pub backend: Box<dyn Backend>,
    /// Informational only, e.g. `fp8`.
    pub precision: Option<String>,
    pub context_window: Option<u64>,
}

impl fmt::Debug for RouteEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RouteEntry")
            .field("backend", &self.backend.name())
            .field("precision", &self.precision)
            .field("context_window", &self.context_window)
            .finish()
    }
}

/// Ordered backends, tried first to last.
#[derive(Debug)]
pub struct ProviderRoute {
    entries: Vec<RouteEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub usage: TokenUsage,
    pub backend: String,
    pub latency_seconds: Option<f64>,
    /// Backends that failed before `backend` answered, with causes.
    pub failovers: Vec<(String, String)>,
}

impl ProviderRoute {
    pub fn new(entries: Vec<RouteEntry>) -> Result<Self, LlmError> {
        if entries.is_empty() {
            return Err(LlmError::EmptyRoute);
        }
        Ok(ProviderRoute { entries })
    }

    pub fn single(backend: impl Backend + 'static) -> Self {
        ProviderRoute {
            entries: vec![RouteEntry {
                backend: Box::new(backend),
                precision: None,
                context_window: None,
            }],
        }
    }

    pub fn entries(&self) -> &[RouteEntry] {
        &self.entries
    }

    pub fn complete(
        &self,
        prompt: &str,
        params: &CompletionParams,
    ) -> Result<Completion, LlmError> {
        let mut causes = Vec::new();
        for entry in &self.entries {
            let name = entry.backend.name().to_string();
            match entry.backend.complete(prompt, params) {
                Ok(reply) => {
                    return Ok(Completion {
                        text: reply.text,
                        usage: reply.usage,
                        backend: name,
                        latency_seconds: reply.latency_seconds,
                        failovers: causes,
                    })
                }
                Err(e) => {
                    log::warn!("backend {name} failed, failing over: {e}");
                    causes.push((name, e.0));
                }
            }
        }
        Err(LlmError::AllBackendsFailed(causes))
    }
}

/// Rough token estimate used when a scripted reply carries no usage.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

#[derive(Debug, Clone)]
struct ScriptedReply {
    pattern: Option<Regex>,
    repeat: bool,
    fail: Option<String>,
    usage: Option<TokenUsage>,
    latency: Option<f64>,
    body: String,
}

/// Replays a transcript of canned replies.
///
/// Each request consumes the first unused record whose `match:` pattern (a
/// regex, absent = any) matches the prompt. Records marked `repeat: true`
/// are never consumed.
#[derive(Debug)]
pub struct ScriptedBackend {
    name: String,
    replies: Vec<ScriptedReply>,
    used: Mutex<Vec<bool>>,
}

impl ScriptedBackend {
    pub fn load(name: &str, path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path).map_err(|source| LlmError::Io {
            path: path.display().to_string(),
            source,
        })?;
        ScriptedBackend::parse(name, &text)
    }

    /// Transcript grammar:
    ///
    /// ```text
    /// === reply
    /// match: <regex>          (optional)
    /// repeat: true            (optional)
    /// fail: <message>         (optional; the backend errors instead)
    /// usage: <prompt> <completion> <reasoning>
    /// latency: <seconds>
    /// ---
    /// <reply body, verbatim>
    /// ```
    pub fn parse(name: &str, text: &str) -> Result<Self, LlmError> {
        let mut replies = Vec::new();
        let lines: Vec<&str> = text.lines().collect();
        let mut i = 0;
        let err = |line: usize, reason: &str| LlmError::TranscriptSchema {
            line,
            reason: reason.to_string(),
        };
        while i < lines.len() {
            let l = lines[i].trim_end();
            if l.trim().is_empty() || l.starts_with('#') {
                i += 1;
                continue;
            }
            if l != "=== reply" {
                return Err(err(i + 1, "expected `=== reply`"));
            }
            i += 1;
            let mut reply = ScriptedReply {
                pattern: None,
                repeat: false,
                fail: None,
                usage: None,
                latency: None,
                body: String::new(),
            };
            loop {
                let Some(h) = lines.get(i) else {
                    return Err(err(i, "header not terminated by `---`"));
                };
                let h = h.trim_end();
                i += 1;
                if h == "---" {
                    break;
                }
                let (key, value) = h
                    .split_once(':')
                    .ok_or_else(|| err(i, "expected `key: value`"))?;
                let value = value.trim();
                match key.trim() {
                    "match" => {
                        reply.pattern =
                            Some(Regex::new(value).map_err(|_| err(i, "bad regex"))?)
                    }
                    "repeat" => reply.repeat = value == "true",
                    "fail" => reply.fail = Some(value.to_string()),
                    "usage" => {
                        let nums: Vec<u64> = value
                            .split_whitespace()
                            .map(|n| n.parse().map_err(|_| err(i, "bad usage number")))
                            .collect::<Result<_, _>>()?;
                        if nums.len() != 3 {
                            return Err(err(i, "usage needs three numbers"));
                        }
                        let u = TokenUsage::new(nums[0], nums[1], nums[2]);
                        if !u.is_valid() {
                            return Err(err(i, "reasoning tokens exceed completion tokens"));
                        }
                        reply.usage = Some(u);
                    }
                    "latency" => {
                        reply.latency = Some(value.parse().map_err(|_| err(i, "bad latency"))?)
                    }
                    _ => return Err(err(i, "unknown header key")),
                }
            }
            let mut body = Vec::new();
            while i < lines.len() && lines[i].trim_end() != "=== reply" {
                body.push(lines[i]);
                i += 1;
            }
            while body.last().is_some_and(|l| l.trim().is_empty()) {
                body.pop();
            }
            reply.body = body.join("\n");
            replies.push(reply);
        }
        let used = Mutex::new(vec![false; replies.len()]);
        Ok(ScriptedBackend {
            name: name.to_string(),
            replies,
            used,
        })
    }

    /// A backend that always answers with `body`.
    pub fn constant(name: &str, body: &str, usage: Option<TokenUsage>) -> Self {
        ScriptedBackend {
            name: name.to_string(),
            replies: vec![ScriptedReply {
                pattern: None,
                repeat: true,
                fail: None,
                usage,
                latency: None,
                body: body.to_string(),
            }],
            used: Mutex::new(vec![false]),
        }
    }

    /// A backend that always fails.
    pub fn failing(name: &str, message: &str) -> Self {
        ScriptedBackend {
            name: name.to_string(),
            replies: vec![ScriptedReply {
                pattern: None,
                repeat: true,
                fail: Some(message.to_string()),
                usage: None,
                latency: None,
                body: String::new(),
            }],
            used: Mutex::new(vec![false]),
        }
    }
}

impl Backend for ScriptedBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(
        &self,
        prompt: &str,
        _params: &CompletionParams,
    ) -> Result<BackendReply, BackendError> {
        let mut used = self.used.lock().expect("transcript lock poisoned");
        let pick = self.replies.iter().enumerate().find(|(i, r)| {
            !used[*i] && r.pattern.as_ref().is_none_or(|p| p.is_match(prompt))
        });
        let Some((idx, reply)) = pick else {
            return Err(BackendError("transcript exhausted".into()));
        };
        if !reply.repeat {
            used[idx] = true;
        }
        if let Some(msg) = &reply.fail {
            return Err(BackendError(msg.clone()));
        }
        let usage = reply.usage.unwrap_or_else(|| {
            TokenUsage::new(estimate_tokens(prompt), estimate_tokens(&reply.body), 0)
        });
        Ok(BackendReply {
            text: reply.body.clone(),
            usage,
            latency_seconds: reply.latency,
        })
    }
}

/// Summary statistics over a set of usages, keyed by turn index.
pub fn usage_by_turn(records: &[Vec<TokenUsage>]) -> BTreeMap<usize, Vec<TokenUsage>> {
    let mut out: BTreeMap<usize, Vec<TokenUsage>> = BTreeMap::new();
    for run in records {
        for (i, u) in run.iter().enumerate() {
            out.entry(i + 1).or_default().push(*u);
        }
    }
    out
}

#[cfg(feature = "http")]
pub mod http {
    //! OpenAI-compatible chat-completions backend (e.g. an aggregating
    //! gateway). Not exercised by the offline test suite.

    use super::*;

    pub struct HttpBackend {
        name: String,
        endpoint: String,
        api_key: String,
        client: reqwest::blocking::Client,
    }

    impl HttpBackend {
        pub fn new(name: &str, endpoint: &str, api_key: &str) -> Self {
            HttpBackend {
                name: name.to_string(),
                endpoint: endpoint.to_string(),
                api_key: api_key.to_string(),
                client: reqwest::blocking::Client::new(),
            }
        }
    }

    impl Backend for HttpBackend {
        fn name(&self) -> &str {
            &self.name
        }

        fn complete(
            &self,
            prompt: &str,
            params: &CompletionParams,
        ) -> Result<BackendReply, BackendError> {
            let mut body = serde_json::json!({
                "model": params.model,
                "messages": [{"role": "user", "content": prompt}],
            });
            if let Some(t) = params.temperature {
                body["temperature"] = serde_json::json!(t);
            }
            if let Some(m) = params.max_tokens {
                body["max_tokens"] = serde_json::json!(m);
            }
            let started = std::time::Instant::now();
            let resp: serde_json::Value = self
                .client
                .post(&self.endpoint)
                .bearer_auth(&self.api_key)
                .json(&body)
                .send()
                .and_then(|r| r.error_for_status())
                .and_then(|r| r.json())
                .map_err(|e| BackendError(e.to_string()))?;
            let text = resp["choices"][0]["message"]["content"]
                .as_str()
                .ok_or_else(|| BackendError("response without content".into()))?
                .to_string();
            let u = &resp["usage"];
            let usage = TokenUsage::new(
                u["prompt_tokens"].as_u64().unwrap_or(0),
                u["completion_tokens"].as_u64().unwrap_or(0),
                u["completion_tokens_details"]["reasoning_tokens"]
                    .as_u64()
                    .unwrap_or(0),
            );
            Ok(BackendReply {
                text,
                usage,
                latency_seconds: Some(started.elapsed().as_secs_f64()),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::str::FromStr;

    fn entry(input: &str, output: &str) -> PricingEntry {
        PricingEntry {
            model_id: "m".into(),
            alias: None,
            input_usd_per_million: Decimal::from_str(input).unwrap(),
            output_usd_per_million: Decimal::from_str(output).unwrap(),
            context_window: 1,
            cutoff: None,
        }
    }

    #[test]
    fn o3_pro_first_iteration_cost() {
        let cost = compute_cost(&TokenUsage::new(5407, 12161, 11012), &entry("20", "80"));
        assert_eq!(cost, Decimal::from_str("1.08102").unwrap());
        assert_eq!(display_usd(cost), "1.08");
    }

    #[test]
    fn o3_first_iteration_cost() {
        let cost = compute_cost(&TokenUsage::new(5942, 12023, 11343), &entry("2", "8"));
        assert_eq!(display_usd(cost), "0.11");
    }

    #[test]
    fn zero_usage_is_free() {
        let cost = compute_cost(&TokenUsage::default(), &entry("20", "80"));
        assert_eq!(display_usd(cost), "0.00");
    }

    #[test]
    fn bundled_table_has_six_models_and_aliases() {
        let t = PricingTable::bundled();
        assert_eq!(t.entries().len(), 6);
        assert_eq!(t.get("o3-pro").unwrap().model_id, "openai/o3-pro");
        assert!(matches!(t.get("gpt-9"), Err(LlmError::UnknownModel(_))));
        assert_eq!(t.get("qwen3-moe").unwrap().cutoff, None);
    }

    #[test]
    fn pricing_rejects_duplicates_and_negatives() {
        let dup = "a\t-\t1\t1\t1\tunknown\na\t-\t1\t1\t1\tunknown\n";
        assert!(PricingTable::parse(dup).is_err());
        assert!(PricingTable::parse("a\t-\t-1\t1\t1\tunknown\n").is_err());
    }

    #[test]
    fn scripted_reply_with_authored_usage() {
        let t = "=== reply\nusage: 10 20 5\nlatency: 1.5\n---\nhello\nworld\n";
        let b = ScriptedBackend::parse("mock", t).unwrap();
        let r = b.complete("p", &CompletionParams::default()).unwrap();
        assert_eq!(r.text, "hello\nworld");
        assert_eq!(r.usage, TokenUsage::new(10, 20, 5));
        assert_eq!(r.latency_seconds, Some(1.5));
        assert!(b.complete("p", &CompletionParams::default()).is_err());
    }

    #[test]
    fn scripted_pattern_selection() {
        let t = "=== reply\nmatch: FEEDBACK\n---\nsecond\n=== reply\n---\nfirst\n";
        let b = ScriptedBackend::parse("mock", t).unwrap();
        let p = CompletionParams::default();
        assert_eq!(b.complete("initial", &p).unwrap().text, "first");
        assert_eq!(b.complete("has FEEDBACK", &p).unwrap().text, "second");
    }

    #[test]
    fn failover_to_second_backend() {
        let route = ProviderRoute::new(vec![
            RouteEntry {
                backend: Box::new(ScriptedBackend::failing("a", "rate limited")),
                precision: None,
                context_window: None,
            },
            RouteEntry {
                backend: Box::new(ScriptedBackend::constant("b", "ok", None)),
                precision: Some("fp8".into()),
                context_window: Some(128_000),
            },
        ])
        .unwrap();
        let c = route.complete("x", &CompletionParams::default()).unwrap();
        assert_eq!(c.backend, "b");
        assert_eq!(c.text, "ok");
        assert_eq!(c.failovers, vec![("a".to_string(), "rate limited".to_string())]);
    }

    #[test]
    fn all_backends_failed_aggregates_causes() {
        let route = ProviderRoute::new(vec![
            RouteEntry {
                backend: Box::new(ScriptedBackend::failing("a", "down")),
                precision: None,
                context_window: None,
            },
            RouteEntry {
                backend: Box::new(ScriptedBackend::failing("b", "timeout")),
                precision: None,
                context_window: None,
            },
        ])
        .unwrap();
        match route.complete("x", &CompletionParams::default()) {
            Err(LlmError::AllBackendsFailed(c)) => assert_eq!(c.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(ProviderRoute::new(vec![]), Err(LlmError::EmptyRoute)));
    }

    proptest! {
        #[test]
        fn cost_is_linear(a in (0u64..10_000_000, 0u64..10_000_000), b in (0u64..10_000_000, 0u64..10_000_000)) {
            let p = entry("1.25", "10");
            let ua = TokenUsage::new(a.0, a.1, 0);
            let ub = TokenUsage::new(b.0, b.1, 0);
            prop_assert_eq!(compute_cost(&(ua + ub), &p), compute_cost(&ua, &p) + compute_cost(&ub, &p));
        }
    }
}
