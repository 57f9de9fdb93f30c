//! The `serve-worker` command.

use std::net::TcpStream;
use std::thread;
use std::time::{Duration, Instant};

use anyhow::{anyhow, Context};
use clap::Args;
use phyloswarm::runtime::{worker_loop, FrameError, RuntimeError, TcpLink};

use crate::setup::{build_instance, load_config, save_cache};
use crate::{ConfigArgs, Failure};

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Master host.
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Master port (defaults to `runtime.port`).
    #[arg(long)]
    pub port: Option<u16>,
    /// Worker id announced in HELLO.
    #[arg(long, default_value_t = 0)]
    pub id: u64,
    /// Seconds to keep retrying the first connection.
    #[arg(long, default_value_t = 30)]
    pub wait: u64,
}

fn connect(addr: &str, patience: Duration) -> Option<TcpStream> {
    let deadline = Instant::now() + patience;
    loop {
        if let Ok(s) = TcpStream::connect(addr) {
            return Some(s);
        }
        if Instant::now() >= deadline {
            return None;
        }
        thread::sleep(Duration::from_millis(50));
    }
}

/// Serves one run per connection and reconnects for the next run. Once at
/// least one run has completed, a refused, closed or reset connection means
/// the master has finished.
pub fn serve(args: &ServeArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.config, &[])?;
    let instance = build_instance(&cfg)?;
    let addr = format!("{}:{}", args.host, args.port.unwrap_or(cfg.runtime.port));
    let mut sessions = 0usize;
    let mut evaluated = 0usize;
    let mut patience = Duration::from_secs(args.wait);
    while let Some(stream) = connect(&addr, patience) {
        let mut link = TcpLink::new(stream).with_context(|| format!("connect {addr}"))?;
        let stats = match worker_loop(&*instance.evaluator, &mut link, args.id) {
            Ok(stats) => stats,
            Err(RuntimeError::Frame(FrameError::Closed | FrameError::Io(_)) | RuntimeError::Io(_))
                if sessions > 0 =>
            {
                break;
            }
            Err(e) => {
                return Err(Failure::Run(anyhow!(e).context(format!("worker session with {addr}"))));
            }
        };
        sessions += 1;
        evaluated += stats.evaluated;
        patience = Duration::from_secs(2);
    }
    save_cache(&cfg, &instance)?;
    if sessions == 0 {
        return Err(Failure::Run(anyhow!("no master reachable at {addr}")));
    }
    eprintln!("served {sessions} run(s), {evaluated} evaluation(s)");
    Ok(())
}
