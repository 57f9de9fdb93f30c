use super::transport::Link;
use super::wire::{FrameError, Kind, WireMessage};
use super::RuntimeError;
use crate::fitness::FitnessEvaluator;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WorkerStats {
    pub evaluated: usize,
}

/// Serves one master until it sends STOP.
///
/// Sends HELLO (with `worker_id` in the particle field), then answers every
/// ASSIGN with a RESULT. A frame that fails to decode, or an evaluation
/// error, is answered with an ERROR message and ends the loop with an error.
pub fn worker_loop(
    evaluator: &dyn FitnessEvaluator,
    link: &mut dyn Link,
    worker_id: u64,
) -> Result<WorkerStats, RuntimeError> {
    let mut stats = WorkerStats::default();
    let mut run_id = String::new();
    link.send(&WireMessage::hello(&run_id, worker_id))?;
    loop {
        let msg = match link.recv() {
            Ok(m) => m,
            Err(FrameError::Closed) => return Err(RuntimeError::Frame(FrameError::Closed)),
            Err(e) => {
                let _ = link.send(&WireMessage::error(&run_id, format!("protocol error: {e}")));
                return Err(e.into());
            }
        };
        run_id.clone_from(&msg.run_id);
        match msg.kind {
            Kind::Hello | Kind::Best => {}
            Kind::Stop => return Ok(stats),
            Kind::Assign => {
                let outcome = msg
                    .parsed_word()
                    .map_err(RuntimeError::from)
                    .and_then(|w| Ok((evaluator.evaluate(&w).map_err(RuntimeError::Eval)?, w)));
                match outcome {
                    Ok((report, w)) => {
                        stats.evaluated += 1;
                        link.send(&WireMessage::result(
                            &run_id,
                            msg.iteration,
                            msg.particle_id,
                            &w,
                            &report,
                        ))?;
                    }
                    Err(e) => {
                        let _ = link.send(&WireMessage::error(&run_id, e.to_string()));
                        return Err(e);
                    }
                }
            }
            Kind::Result | Kind::Error => {
                let reason = format!("unexpected {} from master", msg.kind);
                let _ = link.send(&WireMessage::error(&run_id, reason.clone()));
                return Err(RuntimeError::Protocol(reason));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::BinaryPosition;
    use crate::fitness::PlantedOracle;
    use crate::runtime::transport::ChannelLink;
    use std::thread;

    fn oracle() -> PlantedOracle {
        PlantedOracle::new("1010".parse().unwrap())
    }

    #[test]
    fn stop_without_assign_exits_cleanly() {
        let (mut master, mut worker) = ChannelLink::pair();
        let h = thread::spawn(move || worker_loop(&oracle(), &mut worker, 4));
        let hello = master.recv().unwrap();
        assert_eq!((hello.kind, hello.particle_id), (Kind::Hello, 4));
        master.send(&WireMessage::stop("r")).unwrap();
        assert_eq!(h.join().unwrap().unwrap(), WorkerStats { evaluated: 0 });
    }

    #[test]
    fn answers_assign_with_result() {
        let (mut master, mut worker) = ChannelLink::pair();
        let h = thread::spawn(move || worker_loop(&oracle(), &mut worker, 0));
        master.recv().unwrap();
        let w: BinaryPosition = "1010".parse().unwrap();
        master.send(&WireMessage::assign("r", 2, 5, &w)).unwrap();
        let r = master.recv().unwrap();
        assert_eq!(r.kind, Kind::Result);
        assert_eq!((r.run_id.as_str(), r.iteration, r.particle_id), ("r", 2, 5));
        assert_eq!(r.report().unwrap(), oracle().evaluate(&w).unwrap());
        master.send(&WireMessage::stop("r")).unwrap();
        assert_eq!(h.join().unwrap().unwrap().evaluated, 1);
    }

    #[test]
    fn malformed_frame_gets_error_reply() {
        let (mut master, mut worker) = ChannelLink::pair();
        let h = thread::spawn(move || worker_loop(&oracle(), &mut worker, 0));
        master.recv().unwrap();
        master.send_raw(vec![0, 0, 0, 3, b'v', b'=', b'1']).unwrap();
        let reply = master.recv().unwrap();
        assert_eq!(reply.kind, Kind::Error);
        assert!(reply.message.contains("protocol error"));
        assert!(h.join().unwrap().is_err());
    }

    #[test]
    fn evaluation_error_is_reported() {
        let (mut master, mut worker) = ChannelLink::pair();
        let h = thread::spawn(move || worker_loop(&oracle(), &mut worker, 0));
        master.recv().unwrap();
        master
            .send(&WireMessage::assign("r", 0, 0, &BinaryPosition::ones(7)))
            .unwrap();
        assert_eq!(master.recv().unwrap().kind, Kind::Error);
        assert!(h.join().unwrap().is_err());
    }
}
