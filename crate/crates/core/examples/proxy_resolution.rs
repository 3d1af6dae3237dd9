// Context tools on a hand-built snapshot: an EIP-1967 proxy whose
// implementation carries the verified source, plus constructor decoding.

use std::error::Error;
use std::sync::Arc;

use exgen::abi::{encode, AbiValue, ContractAbi};
use exgen::chain::{ChainSnapshot, DeploymentTx, ScriptedView, VerifiedSource};
use exgen::domain::{Address, BlockRef, ChainId, TargetSpec};
use exgen::tools::{
    ToolCall, ToolRegistry, BLOCKCHAIN_STATE, CONSTRUCTOR_PARAMETER, EIP1967_IMPLEMENTATION_SLOT,
    SOURCE_CODE,
};
use ruint::aliases::U256;

const IMPL_SOURCE: &str = "contract Pool {\n    constructor(address admin, uint256 fee) {}\n    function fee() external view returns (uint256) { return 30; }\n}\n";
const IMPL_ABI: &str = "constructor(address admin, uint256 fee)\nfunction fee() view returns (uint256)\n";

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let proxy = Address::from_low_u64(0x1000);
    let implementation = Address::from_low_u64(0x2000);
    let admin = Address::from_low_u64(0xad);

    let mut snap = ChainSnapshot::empty(BlockRef { chain: ChainId::Ethereum, number: 19_000_000 });
    let creation = vec![0x60, 0x80, 0x60, 0x40];
    snap.code.insert(proxy, vec![0x36, 0x3d]);
    snap.code.insert(implementation, creation.clone());
    snap.storage.insert((proxy, EIP1967_IMPLEMENTATION_SLOT), implementation.to_word());
    snap.sources.insert(
        implementation,
        VerifiedSource {
            source: IMPL_SOURCE.into(),
            abi_text: IMPL_ABI.into(),
            abi: ContractAbi::parse(IMPL_ABI)?,
            compiler: "v0.8.24".into(),
        },
    );
    snap.views.insert((proxy, "fee".into()), ScriptedView::Value("30".into()));
    let mut calldata = creation;
    calldata.extend(encode(&[AbiValue::Address(admin), AbiValue::Uint(U256::from(30u8), 256)]));
    snap.deployments.insert(implementation, DeploymentTx { deployer: admin, calldata });

    let target = TargetSpec::new(ChainId::Ethereum, vec![proxy], 19_000_000)?;
    let tools = ToolRegistry::with_context_tools(Arc::new(snap), target);
    let proxy_arg = proxy.to_string();
    let impl_arg = implementation.to_string();
    for (tool, address) in [
        (SOURCE_CODE, proxy_arg.as_str()),
        (BLOCKCHAIN_STATE, proxy_arg.as_str()),
        (CONSTRUCTOR_PARAMETER, impl_arg.as_str()),
    ] {
        match tools.invoke(&ToolCall::new(tool, &[("address", address)])?) {
            Ok(out) => println!("--- {tool}\n{}", out.text),
            Err(e) => println!("--- {tool}\nunavailable: {e}"),
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
