pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod exact;
pub mod fes;
pub mod ga;
pub mod nn;
pub mod pipeline;
pub mod rtpnn;
pub mod scenario;
