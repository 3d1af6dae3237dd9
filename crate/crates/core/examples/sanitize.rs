// Strips comments and unused file-level declarations before source is
// placed in a prompt.

use std::error::Error;

use exgen::sanitize::sanitize;

const SOURCE: &str = r#"// SPDX-License-Identifier: MIT
pragma solidity ^0.8.19;

import {Unused} from "./Unused.sol";
import {Ownable} from "./Ownable.sol";

uint256 constant LEGACY_FEE = 30; /* no longer read */

/// @notice Vault that forgot an access check.
contract Vault is Ownable {
    string public url = "https://example.org/docs"; // kept: inside a string
    function sweep(address to) external {
        payable(to).transfer(address(this).balance);
    }
}
"#;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let clean = sanitize(SOURCE)?;
    println!("{clean}");
    println!("{} -> {} bytes", SOURCE.len(), clean.len());
    assert!(!clean.contains("LEGACY_FEE"));
    assert!(clean.contains("https://example.org/docs"));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
