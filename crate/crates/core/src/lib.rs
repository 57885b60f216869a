pub mod dynamics;
pub mod interaction;
pub mod passivity;
pub mod metrics;
pub mod scenario;
pub mod log;
pub mod harness;
