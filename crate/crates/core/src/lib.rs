//! Simulation of mobile devices that self-organise into interest clusters
//! using quorum-sensing density weights and chemotaxis-style gradient
//! messages.

pub mod cli;
pub mod metrics;
pub mod netsim;
pub mod oracle;
pub mod protocol;
pub mod taxonomy;
