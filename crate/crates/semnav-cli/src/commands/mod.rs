pub mod compare;
pub mod correlate;
pub mod embed;
pub mod ingest;
pub mod metrics;
pub mod whiten;
