// Runs the agent against the bundled minter-privilege scenario with a
// scripted provider that finds the exploit on its third attempt.

use std::error::Error;
use std::path::Path;
use std::sync::Arc;

use exgen::agent::{run_experiment, AgentConfig, FixedClock};
use exgen::domain::TargetSpec;
use exgen::exec::Scenario;
use exgen::llm::{ProviderRoute, ScriptedBackend};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let scenario = Arc::new(Scenario::load_dir(&root.join("snapshots/sgeth@18041975"))?);
    let snap = &scenario.snapshot;
    let target = TargetSpec::new(snap.chain(), snap.targets.clone(), snap.block.number)?;
    let route = ProviderRoute::single(ScriptedBackend::load(
        "o3",
        &root.join("transcripts/sgeth_success.txt"),
    )?);
    let config = AgentConfig::new("o3");

    let record = run_experiment(&target, scenario.clone(), &route, &config, 7, &FixedClock)?;
    for it in &record.iterations {
        let verdict = match &it.report {
            Some(r) if r.profitable => "profitable".to_string(),
            Some(r) => r.revert_reason.clone().unwrap_or_else(|| "not profitable".into()),
            None => "no candidate".into(),
        };
        println!("turn {}: {} tool calls, {verdict}", it.turn, it.tool_calls.len());
    }
    println!(
        "{:?} after {} executions, best revenue {}",
        record.outcome,
        record.execution_count(),
        record.best_revenue
    );
    assert_eq!(record.execution_count(), 3);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
