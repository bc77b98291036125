pub mod config;
pub mod connectivity;
pub mod error;
pub mod experiment;
pub mod id;
pub mod protocol;
pub mod report;
pub mod routing;
pub mod sim;
pub mod snapshot;
pub mod time;
