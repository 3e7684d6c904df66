pub mod gait;
pub mod mcmc;
pub mod metrics;
pub mod oracle;
pub mod preference;
pub mod profile;
pub mod query;
pub mod report;
pub mod session;
pub mod session_log;
pub mod synthetic;
pub mod campaign;
