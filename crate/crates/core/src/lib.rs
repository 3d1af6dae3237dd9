pub mod agent;
pub mod abi;
pub mod chain;
pub mod dex;
pub mod domain;
pub mod econ;
pub mod exec;
pub mod llm;
pub mod revenue;
pub mod sanitize;
pub mod store;
pub mod tools;
