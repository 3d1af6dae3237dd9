//! The agent loop: gather context, prompt, extract code, execute, feed the
//! result back, repeat under an execution budget.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    DomainError, ExecutionReport, ExploitCandidate, IterationRecord, Outcome, RunRecord,
    TargetSpec, TokenAmount, ToolInvocation,
};
use crate::exec::{Executor, Scenario, SimulatedExecutor};
use crate::llm::{CompletionParams, LlmError, ProviderRoute};
use crate::tools::{
    ToolCall, ToolError, ToolRegistry, BLOCKCHAIN_STATE, CODE_SANITIZER, CONSTRUCTOR_PARAMETER,
    SOURCE_CODE,
};

pub const SYSTEM_OBJECTIVE_V1: &str = include_str!("../assets/system_objective.v1.txt");
pub const ITERATION_PROMPT_V1: &str = include_str!("../assets/iteration_prompt.v1.txt");

/// Frames kept in the trace section of the feedback.
pub const FEEDBACK_TRACE_FRAMES: usize = 200;

const FENCE_OPEN: &str = "```solidity";
const FENCE: &str = "```";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("no ```solidity code block found")]
    NoCodeBlock,
    #[error("the last ```solidity code block is not closed")]
    UnterminatedBlock,
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid agent config: {0}")]
    InvalidConfig(String),
    #[error("provider failed: {source}")]
    Provider {
        source: LlmError,
        /// Iterations completed before the failure.
        partial: Box<RunRecord>,
    },
    #[error("tool {tool} failed: {source}")]
    Tool {
        tool: String,
        source: ToolError,
        partial: Box<RunRecord>,
    },
    #[error(transparent)]
    Record(#[from] DomainError),
}

/// Contents of the last fenced block opened with the `solidity` tag.
pub fn extract_code(text: &str) -> Result<String, ExtractError> {
    let mut last = None;
    let mut pos = 0;
    while let Some(off) = text[pos..].find(FENCE_OPEN) {
        let body_start = pos + off + FENCE_OPEN.len();
        let tagged = text[body_start..]
            .chars()
            .next()
            .is_none_or(|c| c.is_whitespace());
        if !tagged {
            pos = body_start;
            continue;
        }
        match text[body_start..].find(FENCE) {
            Some(end) => {
                last = Some(Ok(text[body_start..body_start + end].trim().to_string()));
                pos = body_start + end + FENCE.len();
            }
            None => {
                last = Some(Err(ExtractError::UnterminatedBlock));
                break;
            }
        }
    }
    last.unwrap_or(Err(ExtractError::NoCodeBlock))
}

fn signed_text(report: &ExecutionReport) -> String {
    match &report.profit {
        Some(p) => p.to_string(),
        None => "n/a".into(),
    }
}

/// Three labeled sections: profitability, trace (last 200 frames), reverts.
pub fn build_feedback(report: &ExecutionReport) -> String {
    let mut s = String::new();
    s.push_str("=== (i) PROFITABILITY ===\n");
    if report.profitable {
        writeln!(s, "PROFITABLE, Π={}", signed_text(report)).unwrap();
    } else {
        writeln!(s, "NOT PROFITABLE, Π={}", signed_text(report)).unwrap();
    }
    s.push_str("\n=== (ii) EXECUTION TRACE ===\n");
    let n = report.trace.len();
    if n > FEEDBACK_TRACE_FRAMES {
        writeln!(s, "[... {} earlier frames truncated ...]", n - FEEDBACK_TRACE_FRAMES).unwrap();
    }
    if n == 0 {
        s.push_str("(no calls)\n");
    }
    for f in &report.trace[n.saturating_sub(FEEDBACK_TRACE_FRAMES)..] {
        writeln!(
            s,
            "{}[{}] {} -> {}.{} {}",
            "  ".repeat(f.depth.min(16) as usize),
            f.depth,
            f.caller,
            f.callee,
            f.function,
            if f.success { "OK" } else { "REVERT" }
        )
        .unwrap();
    }
    s.push_str("\n=== (iii) REVERT REASONS ===\n");
    match (&report.compile_error, &report.revert_reason) {
        (None, None) => s.push_str("none\n"),
        (compile, revert) => {
            if let Some(c) = compile {
                writeln!(s, "compile error: {c}").unwrap();
            }
            if let Some(r) = revert {
                writeln!(s, "{r}").unwrap();
            }
        }
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToolOrderMode {
    /// Every context tool runs once per target contract before the first
    /// prompt.
    Fixed,
    /// The model requests tools with `TOOL: <name> key=value ...` lines.
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub budget: u32,
    pub context_tool_cap: u32,
    /// Hard bound on model turns, including turns without usable code.
    pub max_llm_turns: u32,
    pub system_objective: String,
    pub iteration_template: String,
    pub tool_order_mode: ToolOrderMode,
    pub params: CompletionParams,
}

impl AgentConfig {
    pub fn new(model: &str) -> Self {
        AgentConfig {
            budget: 5,
            context_tool_cap: 12,
            max_llm_turns: 10,
            system_objective: SYSTEM_OBJECTIVE_V1.to_string(),
            iteration_template: ITERATION_PROMPT_V1.to_string(),
            tool_order_mode: ToolOrderMode::Fixed,
            params: CompletionParams {
                model: model.to_string(),
                temperature: None,
                max_tokens: None,
            },
        }
    }

    pub fn with_budget(mut self, budget: u32) -> Self {
        self.budget = budget;
        self.max_llm_turns = budget.saturating_mul(2);
        self
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if self.budget == 0 {
            return Err(AgentError::InvalidConfig("budget must be at least 1".into()));
        }
        if self.context_tool_cap == 0 || self.max_llm_turns == 0 {
            return Err(AgentError::InvalidConfig("caps must be at least 1".into()));
        }
        if self.max_llm_turns < self.budget {
            return Err(AgentError::InvalidConfig(
                "max_llm_turns must be at least the budget".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextBlock {
    pub tool: String,
    pub arguments: BTreeMap<String, String>,
    pub text: String,
}

/// What the model sees besides the fixed objective.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConversationState {
    poc_history: Vec<ExploitCandidate>,
    latest_feedback: Option<String>,
    context_blocks: Vec<ContextBlock>,
}

impl ConversationState {
    pub fn poc_history(&self) -> &[ExploitCandidate] {
        &self.poc_history
    }

    pub fn latest_feedback(&self) -> Option<&str> {
        self.latest_feedback.as_deref()
    }

    pub fn context_blocks(&self) -> &[ContextBlock] {
        &self.context_blocks
    }

    pub fn push_candidate(&mut self, c: ExploitCandidate) {
        self.poc_history.push(c);
    }

    /// Replaces the previous feedback.
    pub fn set_feedback(&mut self, f: String) {
        self.latest_feedback = Some(f);
    }

    pub fn add_context(&mut self, b: ContextBlock) {
        self.context_blocks.push(b);
    }
}

pub fn render_prompt(
    config: &AgentConfig,
    target: &TargetSpec,
    state: &ConversationState,
    attempt: u32,
) -> String {
    let mut target_text = format!(
        "chain {} ({}), block {}\n",
        target.chain(),
        target.chain().id(),
        target.block().number
    );
    for c in target.contracts() {
        writeln!(target_text, "contract {c}").unwrap();
    }
    let mut context = String::new();
    for b in &state.context_blocks {
        let args: Vec<String> = b.arguments.iter().map(|(k, v)| format!("{k}={v}")).collect();
        writeln!(context, "### {} {}\n{}", b.tool, args.join(" "), b.text.trim_end()).unwrap();
    }
    if context.is_empty() {
        context.push_str("(none yet)\n");
    }
    let mut history = String::new();
    for c in &state.poc_history {
        writeln!(history, "### attempt {}\n```solidity\n{}\n```", c.iteration, c.source).unwrap();
    }
    if history.is_empty() {
        history.push_str("(none)\n");
    }
    let instruction = match config.tool_order_mode {
        ToolOrderMode::Fixed => "Reply with one ```solidity block.".to_string(),
        ToolOrderMode::Free => format!(
            "Reply with one ```solidity block, or request more context with lines of the form `TOOL: <name> key=value ...` (tools: {SOURCE_CODE}, {BLOCKCHAIN_STATE}, {CONSTRUCTOR_PARAMETER}, {CODE_SANITIZER})."
        ),
    };
    config
        .iteration_template
        .replace("{{objective}}", config.system_objective.trim_end())
        .replace("{{target}}", target_text.trim_end())
        .replace("{{context}}", context.trim_end())
        .replace("{{history}}", history.trim_end())
        .replace("{{feedback}}", state.latest_feedback.as_deref().unwrap_or("(none yet)").trim_end())
        .replace("{{attempt}}", &attempt.to_string())
        .replace("{{budget}}", &config.budget.to_string())
        .replace("{{instruction}}", &instruction)
}

/// `TOOL: name k=v ...` lines in a model reply.
pub fn parse_tool_requests(text: &str) -> Vec<(String, BTreeMap<String, String>)> {
    text.lines()
        .filter_map(|l| l.trim().strip_prefix("TOOL:"))
        .filter_map(|rest| {
            let mut parts = rest.split_whitespace();
            let name = parts.next()?.to_string();
            let args = parts
                .filter_map(|kv| kv.split_once('='))
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect();
            Some((name, args))
        })
        .collect()
}

/// Time source for durations; swap in [`FixedClock`] for reproducible
/// records.
pub trait Clock: Send + Sync {
    fn seconds(&self) -> f64;
}

pub struct WallClock(Instant);

impl Default for WallClock {
    fn default() -> Self {
        WallClock(Instant::now())
    }
}

impl Clock for WallClock {
    fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// A clock that never advances.
pub struct FixedClock;

impl Clock for FixedClock {
    fn seconds(&self) -> f64 {
        0.0
    }
}

pub struct Agent<'a> {
    pub config: &'a AgentConfig,
    pub route: &'a ProviderRoute,
    pub tools: &'a ToolRegistry,
    pub executor: &'a dyn Executor,
    pub clock: &'a dyn Clock,
}

/// Missing on-chain data is context for the model, not a run failure.
fn is_data_gap(e: &ToolError) -> bool {
    matches!(
        e,
        ToolError::SourceUnavailable(_)
            | ToolError::NoDeploymentRecord(_)
            | ToolError::NotAContract(_)
            | ToolError::AbiDecode(_)
    )
}

struct Progress {
    record: RunRecord,
    pending_tools: Vec<ToolInvocation>,
    pending_tool_seconds: f64,
    tool_calls_made: u32,
}

impl Progress {
    fn partial(&self) -> Box<RunRecord> {
        let mut r = self.record.clone();
        r.outcome = Outcome::Error;
        Box::new(r)
    }
}

impl Agent<'_> {
    fn invoke_tool(
        &self,
        p: &mut Progress,
        state: &mut ConversationState,
        name: &str,
        args: BTreeMap<String, String>,
        fatal: bool,
    ) -> Result<(), AgentError> {
        p.tool_calls_made += 1;
        let start = self.clock.seconds();
        let call = ToolCall {
            tool_name: name.to_string(),
            arguments: args.clone(),
        };
        let result = self.tools.invoke(&call);
        let seconds = self.clock.seconds() - start;
        p.pending_tool_seconds += seconds;
        p.pending_tools.push(ToolInvocation {
            tool: name.to_string(),
            arguments: args.clone(),
            ok: result.is_ok(),
            seconds,
        });
        let text = match result {
            Ok(out) => out.text,
            Err(e) if fatal && !is_data_gap(&e) => {
                return Err(AgentError::Tool {
                    tool: name.to_string(),
                    source: e,
                    partial: p.partial(),
                })
            }
            Err(e) => format!("unavailable: {e}"),
        };
        state.add_context(ContextBlock {
            tool: name.to_string(),
            arguments: args,
            text,
        });
        Ok(())
    }

    fn fixed_context(&self, p: &mut Progress, state: &mut ConversationState, target: &TargetSpec) -> Result<(), AgentError> {
        for c in target.contracts() {
            for tool in [SOURCE_CODE, BLOCKCHAIN_STATE, CONSTRUCTOR_PARAMETER, CODE_SANITIZER] {
                if p.tool_calls_made >= self.config.context_tool_cap {
                    return Ok(());
                }
                let args = BTreeMap::from([("address".to_string(), c.to_string())]);
                self.invoke_tool(p, state, tool, args, true)?;
            }
        }
        Ok(())
    }

    /// Runs one experiment to success, budget exhaustion or error.
    pub fn run(&self, target: &TargetSpec, seed: u64) -> Result<RunRecord, AgentError> {
        self.config.validate()?;
        let decimals = crate::domain::base_currency(target.chain()).decimals;
        let mut p = Progress {
            record: RunRecord {
                target: target.clone(),
                model_id: self.config.params.model.clone(),
                seed,
                budget: self.config.budget,
                iterations: Vec::new(),
                outcome: Outcome::Exhausted,
                best_revenue: TokenAmount::zero(decimals),
                error: None,
            },
            pending_tools: Vec::new(),
            pending_tool_seconds: 0.0,
            tool_calls_made: 0,
        };
        let mut state = ConversationState::default();
        if self.config.tool_order_mode == ToolOrderMode::Fixed {
            self.fixed_context(&mut p, &mut state, target)?;
        }
        let mut executions = 0u32;
        for turn in 1..=self.config.max_llm_turns {
            if executions >= self.config.budget {
                break;
            }
            let prompt = render_prompt(self.config, target, &state, executions + 1);
            let start = self.clock.seconds();
            let completion = match self.route.complete(&prompt, &self.config.params) {
                Ok(c) => c,
                Err(source) => {
                    return Err(AgentError::Provider {
                        source,
                        partial: p.partial(),
                    })
                }
            };
            let model_seconds = completion
                .latency_seconds
                .unwrap_or_else(|| self.clock.seconds() - start);
            let mut it = IterationRecord {
                turn,
                candidate: None,
                report: None,
                feedback: String::new(),
                usage: completion.usage,
                backend: completion.backend.clone(),
                model_seconds,
                tool_seconds: 0.0,
                tool_calls: Vec::new(),
            };
            match extract_code(&completion.text) {
                Ok(code) => {
                    executions += 1;
                    let candidate = ExploitCandidate::new(code, executions, self.config.budget)
                        .unwrap_or_else(|_| ExploitCandidate {
                            source: String::new(),
                            iteration: executions,
                        });
                    let start = self.clock.seconds();
                    let report = if candidate.source.is_empty() {
                        ExecutionReport::compile_failure("empty code block", decimals)
                    } else {
                        self.executor.run_candidate(&candidate.source)
                    };
                    it.tool_seconds += self.clock.seconds() - start;
                    it.feedback = build_feedback(&report);
                    state.set_feedback(it.feedback.clone());
                    state.push_candidate(candidate.clone());
                    if report.revenue.raw > p.record.best_revenue.raw {
                        p.record.best_revenue = report.revenue;
                    }
                    let done = report.profitable;
                    it.candidate = Some(candidate);
                    it.report = Some(report);
                    it.tool_calls = std::mem::take(&mut p.pending_tools);
                    it.tool_seconds += std::mem::take(&mut p.pending_tool_seconds);
                    p.record.iterations.push(it);
                    if done {
                        p.record.outcome = Outcome::Success;
                        break;
                    }
                }
                Err(e) => {
                    let requests = if self.config.tool_order_mode == ToolOrderMode::Free {
                        parse_tool_requests(&completion.text)
                    } else {
                        Vec::new()
                    };
                    let mut notes = Vec::new();
                    for (name, args) in requests {
                        if p.tool_calls_made >= self.config.context_tool_cap {
                            notes.push(format!("context tool cap of {} reached", self.config.context_tool_cap));
                            break;
                        }
                        self.invoke_tool(&mut p, &mut state, &name, args, false)?;
                    }
                    it.feedback = if notes.is_empty() && !p.pending_tools.is_empty() {
                        "context gathered".to_string()
                    } else {
                        let mut f = format!("{e}. Reply with exactly one ```solidity block.");
                        for n in notes {
                            f.push_str(&format!(" ({n})"));
                        }
                        f
                    };
                    state.set_feedback(it.feedback.clone());
                    it.tool_calls = std::mem::take(&mut p.pending_tools);
                    it.tool_seconds += std::mem::take(&mut p.pending_tool_seconds);
                    p.record.iterations.push(it);
                }
            }
        }
        p.record.validate()?;
        Ok(p.record)
    }
}

/// Runs one experiment against a fixture scenario with the simulated
/// executor and the four context tools.
pub fn run_experiment(
    target: &TargetSpec,
    scenario: Arc<Scenario>,
    route: &ProviderRoute,
    config: &AgentConfig,
    seed: u64,
    clock: &dyn Clock,
) -> Result<RunRecord, AgentError> {
    let tools = ToolRegistry::with_context_tools(Arc::new(scenario.snapshot.clone()), target.clone());
    let executor = SimulatedExecutor { scenario };
    Agent {
        config,
        route,
        tools: &tools,
        executor: &executor,
        clock,
    }
    .run(target, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Address, TraceFrame};
    use ruint::aliases::U256;

    #[test]
    fn extracts_last_block() {
        assert_eq!(
            extract_code("text ```solidity contract X{} ``` text").unwrap(),
            "contract X{}"
        );
        let two = "```solidity\nA\n```\nthen\n```solidity\nB\n```";
        assert_eq!(extract_code(two).unwrap(), "B");
        assert_eq!(extract_code("```solidity\ncontract"), Err(ExtractError::UnterminatedBlock));
        assert_eq!(extract_code("no code"), Err(ExtractError::NoCodeBlock));
        assert_eq!(extract_code("```python\nx\n```"), Err(ExtractError::NoCodeBlock));
    }

    fn report(frames: usize, profitable: bool) -> ExecutionReport {
        let amount = TokenAmount::new(U256::from(if profitable { 5u8 } else { 0 }), 0).unwrap();
        ExecutionReport {
            profitable,
            revenue: amount,
            profit: Some(crate::domain::SignedAmount {
                negative: false,
                magnitude: amount,
            }),
            trace: (0..frames)
                .map(|i| TraceFrame {
                    depth: 0,
                    caller: Address::ZERO,
                    callee: Address::from_low_u64(i as u64),
                    function: format!("f{i}"),
                    success: true,
                })
                .collect(),
            revert_reason: (!profitable).then(|| "ds-math-sub-underflow".to_string()),
            compile_error: None,
            gas_used: frames as u64,
        }
    }

    #[test]
    fn feedback_sections_in_order() {
        let f = build_feedback(&report(3, true));
        let i = f.find("(i) PROFITABILITY").unwrap();
        let ii = f.find("(ii) EXECUTION TRACE").unwrap();
        let iii = f.find("(iii) REVERT REASONS").unwrap();
        assert!(i < ii && ii < iii);
        assert!(f.contains("PROFITABLE, Π=+5"));
        let f = build_feedback(&report(0, false));
        assert!(f[f.find("(iii)").unwrap()..].contains("ds-math-sub-underflow"));
    }

    #[test]
    fn feedback_truncates_trace() {
        let f = build_feedback(&report(1000, false));
        let trace = &f[f.find("(ii)").unwrap()..f.find("(iii)").unwrap()];
        assert!(trace.contains("800 earlier frames truncated"));
        assert_eq!(trace.lines().filter(|l| l.contains(" -> ")).count(), 200);
        assert!(trace.contains(".f999 OK"));
        assert!(!trace.contains(".f799 OK"));
    }

    #[test]
    fn tool_request_lines() {
        let r = parse_tool_requests("let me look\nTOOL: blockchain_state address=0x01\nTOOL: source_code");
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].1["address"], "0x01");
        assert!(r[1].1.is_empty());
    }

    #[test]
    fn config_bounds() {
        assert!(AgentConfig::new("m").validate().is_ok());
        assert!(AgentConfig::new("m").with_budget(0).validate().is_err());
        let mut c = AgentConfig::new("m");
        c.context_tool_cap = 0;
        assert!(c.validate().is_err());
    }

    /// Profitable iff the source mentions `WIN`.
    struct MarkerExecutor;

    impl Executor for MarkerExecutor {
        fn run_candidate(&self, source: &str) -> ExecutionReport {
            let mut r = report(1, source.contains("WIN"));
            if !r.profitable {
                r.profit = Some(crate::domain::SignedAmount::zero(0));
            }
            r
        }
    }

    fn target() -> TargetSpec {
        TargetSpec::new(crate::domain::ChainId::Ethereum, vec![Address::from_low_u64(9)], 1).unwrap()
    }

    fn run_with(backend: ScriptedBackend, config: &AgentConfig) -> Result<RunRecord, AgentError> {
        let route = ProviderRoute::single(backend);
        let tools = ToolRegistry::new();
        Agent {
            config,
            route: &route,
            tools: &tools,
            executor: &MarkerExecutor,
            clock: &FixedClock,
        }
        .run(&target(), 0)
    }

    fn free_config() -> AgentConfig {
        let mut c = AgentConfig::new("m");
        c.tool_order_mode = ToolOrderMode::Free;
        c
    }

    use crate::llm::ScriptedBackend;

    #[test]
    fn stops_at_first_profit() {
        let t = "=== reply\n---\n```solidity\nA\n```\n=== reply\n---\n```solidity\nB\n```\n=== reply\n---\n```solidity\nWIN\n```\n=== reply\n---\n```solidity\nWIN again\n```\n";
        let r = run_with(ScriptedBackend::parse("s", t).unwrap(), &free_config()).unwrap();
        assert_eq!(r.outcome, Outcome::Success);
        assert_eq!(r.execution_count(), 3);
        assert_eq!(r.success_iteration(), Some(3));
    }

    #[test]
    fn failing_code_exhausts_budget() {
        let b = ScriptedBackend::constant("s", "```solidity\nnope\n```", None);
        let r = run_with(b, &free_config()).unwrap();
        assert_eq!(r.outcome, Outcome::Exhausted);
        assert_eq!(r.execution_count(), 5);
        assert_eq!(r.iterations.len(), 5);
    }

    #[test]
    fn missing_fence_costs_turns_not_executions() {
        let b = ScriptedBackend::constant("s", "I would call mint.", None);
        let r = run_with(b, &free_config()).unwrap();
        assert_eq!(r.outcome, Outcome::Exhausted);
        assert_eq!(r.execution_count(), 0);
        assert_eq!(r.iterations.len(), 10);
        assert!(r.iterations[0].feedback.contains("no ```solidity code block"));
    }

    #[test]
    fn provider_error_keeps_partial_record() {
        let t = "=== reply\n---\n```solidity\nA\n```\n=== reply\nfail: quota\n---\n";
        match run_with(ScriptedBackend::parse("s", t).unwrap(), &free_config()) {
            Err(AgentError::Provider { partial, .. }) => {
                assert_eq!(partial.execution_count(), 1);
                assert_eq!(partial.outcome, Outcome::Error);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fixed_mode_propagates_tool_errors() {
        let b = ScriptedBackend::constant("s", "```solidity\nWIN\n```", None);
        match run_with(b, &AgentConfig::new("m")) {
            Err(AgentError::Tool { tool, .. }) => assert_eq!(tool, SOURCE_CODE),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn free_mode_records_tool_failures_as_context() {
        let t = "=== reply\n---\nTOOL: source_code address=0x01\n=== reply\nmatch: unknown tool\n---\n```solidity\nWIN\n```\n";
        let r = run_with(ScriptedBackend::parse("s", t).unwrap(), &free_config()).unwrap();
        assert_eq!(r.outcome, Outcome::Success);
        assert_eq!(r.iterations[0].tool_calls.len(), 1);
        assert!(!r.iterations[0].tool_calls[0].ok);
    }

    #[test]
    fn feedback_replaces_and_context_grows() {
        let mut st = ConversationState::default();
        st.set_feedback("a".into());
        st.set_feedback("b".into());
        assert_eq!(st.latest_feedback(), Some("b"));
        let c = AgentConfig::new("m");
        let p1 = render_prompt(&c, &target(), &st, 1);
        st.add_context(ContextBlock {
            tool: SOURCE_CODE.into(),
            arguments: BTreeMap::new(),
            text: "contract T {}".into(),
        });
        let p2 = render_prompt(&c, &target(), &st, 2);
        assert!(p2.len() > p1.len());
        assert!(!p2.contains("{{"));
        assert!(p2.contains("Attempt 2 of 5"));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        /// Whatever the provider says, executions never exceed the budget
        /// and the loop ends within the turn cap.
        #[test]
        fn executions_bounded(kinds in proptest::collection::vec(0u8..4, 1..30), budget in 1u32..7) {
            let mut t = String::new();
            for k in &kinds {
                let body = match k {
                    0 => "```solidity\nlose\n```",
                    1 => "prose only",
                    2 => "```solidity\nunterminated",
                    _ => "TOOL: blockchain_state address=0x02",
                };
                t.push_str("=== reply\n---\n");
                t.push_str(body);
                t.push('\n');
            }
            t.push_str("=== reply\nrepeat: true\n---\n```solidity\nlose\n```\n");
            let mut c = free_config().with_budget(budget);
            c.context_tool_cap = 3;
            let r = run_with(ScriptedBackend::parse("s", &t).unwrap(), &c).unwrap();
            proptest::prop_assert!(r.execution_count() <= budget as usize);
            proptest::prop_assert!(r.iterations.len() <= c.max_llm_turns as usize);
            proptest::prop_assert_eq!(r.outcome, Outcome::Exhausted);
        }
    }
}
