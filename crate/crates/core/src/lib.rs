pub mod claims;
pub mod ingest;
pub mod segment;
pub mod prompting;
pub mod provider;
pub mod verdict_parse;
pub mod agent;
pub mod judge;
pub mod report;
pub mod eval;
pub mod gateway;
mod pool;
