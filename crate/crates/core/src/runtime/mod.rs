//! Master/worker evaluation.
//!
//! The master owns the swarm and all random streams; workers only evaluate
//! words. Each iteration the master sends one ASSIGN per particle, waits for
//! every RESULT, and then updates the swarm, so a run with any number of
//! workers follows the same trajectory as a sequential run.

pub mod ledger;
pub mod master;
pub mod transport;
pub mod wire;
pub mod worker;

use thiserror::Error;

use crate::engine::EngineError;
use crate::fitness::EvalError;

pub use ledger::{LedgerEntry, LedgerError, RunLedger};
pub use master::{
    join_workers, master_loop, run_with_channel_workers, run_with_tcp_workers,
    spawn_channel_workers, spawn_tcp_workers, DistributedRun, Master,
};
pub use transport::{accept_links, ChannelLink, Link, TcpLink};
pub use wire::{FrameError, Kind, WireMessage, MAX_FRAME, PROTOCOL_VERSION};
pub use worker::{worker_loop, WorkerStats};

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Eval(EvalError),
    #[error("no live workers")]
    NoWorkers,
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("worker failure: {0}")]
    Remote(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
