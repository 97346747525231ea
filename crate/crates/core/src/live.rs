//! A session running on its own thread.
//!
//! All control goes through one command channel, so callers on any thread see
//! operations applied in a single order. The worker steps the session while it
//! is running and checks for commands between iterations; pauses therefore
//! land on iteration boundaries.

use std::path::PathBuf;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use crate::acs::{Event, SteeringSource};
use crate::scalar::Scalar;
use crate::session::{Comparison, RunResult, Session, SessionError, Snapshot, Status, SteeringScript};
use crate::steering::SteeringUpdate;

/// What a subscriber receives. A subscriber first gets a snapshot, then one
/// event per colony event, and a snapshot on every pause and at the finish.
/// The channel closes after the final snapshot.
#[derive(Debug, Clone)]
pub enum LiveMessage<T> {
    Snapshot(Box<Snapshot<T>>),
    Event(Event),
}

type Reply<R> = Sender<R>;

enum Command<T: Scalar> {
    Start(Reply<Result<Status, SessionError>>),
    Pause(Reply<Result<Status, SessionError>>),
    Resume(Reply<Result<Status, SessionError>>),
    Steer(SteeringUpdate<T>, Reply<Result<u64, SessionError>>),
    Snapshot(Reply<Snapshot<T>>),
    Compare(bool, Reply<Result<Comparison, SessionError>>),
    Result(Reply<RunResult<T>>),
    Subscribe(Sender<LiveMessage<T>>),
}

#[derive(Debug, Clone)]
pub struct LiveOptions<T> {
    /// Pause between iterations so a human can follow along.
    pub iteration_delay: Duration,
    /// Directory the session is persisted to when it finishes.
    pub persist_dir: Option<PathBuf>,
    /// Updates applied at their recorded boundaries, before any live edits.
    pub script: SteeringScript<T>,
}

impl<T: Scalar> Default for LiveOptions<T> {
    fn default() -> Self {
        LiveOptions { iteration_delay: Duration::ZERO, persist_dir: None, script: SteeringScript::new(Vec::new()) }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("session worker has stopped")]
pub struct WorkerGone;

impl From<WorkerGone> for SessionError {
    fn from(_: WorkerGone) -> Self {
        SessionError::Io {
            context: "session worker".into(),
            source: std::io::Error::new(std::io::ErrorKind::BrokenPipe, "worker stopped"),
        }
    }
}

/// Cloneable handle to a session owned by a worker thread.
pub struct SessionHandle<T: Scalar> {
    id: String,
    commands: Sender<Command<T>>,
    worker: Option<JoinHandle<Session<T>>>,
}

impl<T: Scalar> Clone for SessionHandle<T> {
    fn clone(&self) -> Self {
        SessionHandle { id: self.id.clone(), commands: self.commands.clone(), worker: None }
    }
}

impl<T: Scalar> SessionHandle<T> {
    pub fn spawn(session: Session<T>, options: LiveOptions<T>) -> Self {
        let id = session.id().to_string();
        let (tx, rx) = mpsc::channel();
        let worker = thread::Builder::new()
            .name(format!("session-{id}"))
            .spawn(move || Worker { session, subscribers: Vec::new(), options, forwarded: 0 }.run(rx))
            .expect("spawn session worker");
        SessionHandle { id, commands: tx, worker: Some(worker) }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    fn ask<R>(&self, make: impl FnOnce(Reply<R>) -> Command<T>) -> Result<R, WorkerGone> {
        let (tx, rx) = mpsc::channel();
        self.commands.send(make(tx)).map_err(|_| WorkerGone)?;
        rx.recv().map_err(|_| WorkerGone)
    }

    pub fn start(&self) -> Result<Status, SessionError> {
        self.ask(Command::Start)?
    }

    pub fn pause(&self) -> Result<Status, SessionError> {
        self.ask(Command::Pause)?
    }

    pub fn resume(&self) -> Result<Status, SessionError> {
        self.ask(Command::Resume)?
    }

    pub fn steer(&self, update: SteeringUpdate<T>) -> Result<u64, SessionError> {
        self.ask(|r| Command::Steer(update, r))?
    }

    pub fn snapshot(&self) -> Result<Snapshot<T>, WorkerGone> {
        self.ask(Command::Snapshot)
    }

    pub fn compare(&self, force: bool) -> Result<Comparison, SessionError> {
        self.ask(|r| Command::Compare(force, r))?
    }

    pub fn result(&self) -> Result<RunResult<T>, WorkerGone> {
        self.ask(Command::Result)
    }

    pub fn subscribe(&self) -> Result<Receiver<LiveMessage<T>>, WorkerGone> {
        let (tx, rx) = mpsc::channel();
        self.commands.send(Command::Subscribe(tx)).map_err(|_| WorkerGone)?;
        Ok(rx)
    }

    /// Blocks until the session finishes.
    pub fn wait_finished(&self) -> Result<Snapshot<T>, WorkerGone> {
        let rx = self.subscribe()?;
        let mut last = None;
        for message in rx {
            if let LiveMessage::Snapshot(s) = message {
                last = Some(*s);
            }
        }
        match last {
            Some(s) if s.status == Status::Finished => Ok(s),
            _ => Err(WorkerGone),
        }
    }

    /// Stops the worker and returns the session. Only the handle returned by
    /// [`Self::spawn`] can join; clones return `None`.
    pub fn into_session(mut self) -> Option<Session<T>> {
        let worker = self.worker.take()?;
        drop(self);
        worker.join().ok()
    }
}

struct Worker<T: Scalar> {
    session: Session<T>,
    subscribers: Vec<Sender<LiveMessage<T>>>,
    options: LiveOptions<T>,
    /// Events of the session log already sent to subscribers.
    forwarded: usize,
}

impl<T: Scalar> Worker<T> {
    fn run(mut self, commands: Receiver<Command<T>>) -> Session<T> {
        loop {
            let next = if self.session.status() == Status::Running {
                match commands.try_recv() {
                    Ok(c) => Some(c),
                    Err(mpsc::TryRecvError::Empty) => None,
                    Err(mpsc::TryRecvError::Disconnected) => break,
                }
            } else {
                match commands.recv() {
                    Ok(c) => Some(c),
                    Err(_) => break,
                }
            };
            match next {
                Some(command) => {
                    self.handle(command);
                    self.forward_events();
                }
                None => {
                    self.advance();
                    if !self.options.iteration_delay.is_zero() && self.session.status() == Status::Running {
                        match commands.recv_timeout(self.options.iteration_delay) {
                            Ok(command) => {
                                self.handle(command);
                                self.forward_events();
                            }
                            Err(RecvTimeoutError::Timeout) => {}
                            Err(RecvTimeoutError::Disconnected) => break,
                        }
                    }
                }
            }
        }
        self.session
    }

    fn handle(&mut self, command: Command<T>) {
        match command {
            Command::Start(r) => {
                let _ = r.send(self.session.start());
            }
            Command::Pause(r) => {
                let out = self.session.pause();
                if out.is_ok() {
                    self.broadcast_snapshot();
                }
                let _ = r.send(out);
            }
            Command::Resume(r) => {
                let _ = r.send(self.session.resume());
            }
            Command::Steer(update, r) => {
                let out = self.session.apply_steering_update(update);
                let visible = out.is_ok() && self.session.status() != Status::Running;
                let _ = r.send(out);
                if visible {
                    self.broadcast_snapshot();
                }
            }
            Command::Snapshot(r) => {
                let _ = r.send(self.session.snapshot());
            }
            Command::Compare(force, r) => {
                let out = self.session.compare_with_optimal(force);
                if out.is_ok() {
                    self.persist();
                }
                let _ = r.send(out);
            }
            Command::Result(r) => {
                let _ = r.send(self.session.result());
            }
            Command::Subscribe(tx) => {
                self.forward_events();
                let snapshot = LiveMessage::Snapshot(Box::new(self.session.snapshot()));
                if tx.send(snapshot).is_ok() && self.session.status() != Status::Finished {
                    self.subscribers.push(tx);
                }
            }
        }
    }

    fn advance(&mut self) {
        for update in self.options.script.drain(self.session.iteration()) {
            if self.session.apply_steering_update(update).is_err() {
                break;
            }
        }
        if self.session.step().is_err() {
            return;
        }
        self.forward_events();
        if self.session.status() == Status::Finished {
            self.persist();
            self.broadcast_snapshot();
            self.subscribers.clear();
        }
    }

    fn forward_events(&mut self) {
        let events = &self.session.events()[self.forwarded..];
        self.forwarded += events.len();
        for event in events {
            self.subscribers.retain(|s| s.send(LiveMessage::Event(event.clone())).is_ok());
        }
    }

    /// Sends pending events first so a snapshot never precedes its events.
    fn broadcast_snapshot(&mut self) {
        self.forward_events();
        let snapshot = self.session.snapshot();
        self.subscribers
            .retain(|s| s.send(LiveMessage::Snapshot(Box::new(snapshot.clone()))).is_ok());
    }

    fn persist(&mut self) {
        if let Some(dir) = &self.options.persist_dir {
            if self.session.status() == Status::Finished {
                // Failures surface when the result is read back from disk.
                let _ = self.session.persist(dir);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acs::AcsParams;
    use crate::instance::parse_tsplib;
    use std::sync::Arc;

    fn burma() -> Arc<crate::instance::Instance> {
        Arc::new(parse_tsplib(include_str!("../data/burma14.tsp")).unwrap())
    }

    fn params() -> AcsParams<f64> {
        AcsParams { iterations: 40, ..AcsParams::default() }.with_seed(3)
    }

    #[test]
    fn live_run_matches_direct_run() {
        let mut direct = Session::create(burma(), params(), 1.0).unwrap();
        direct.run_to_end().unwrap();

        let handle = SessionHandle::spawn(Session::create(burma(), params(), 1.0).unwrap(), LiveOptions::default());
        let a = handle.subscribe().unwrap();
        let b = handle.subscribe().unwrap();
        handle.start().unwrap();
        let collect = |rx: Receiver<LiveMessage<f64>>| {
            rx.into_iter()
                .filter_map(|m| match m {
                    LiveMessage::Event(e) => Some(e),
                    LiveMessage::Snapshot(_) => None,
                })
                .collect::<Vec<_>>()
        };
        let ea = collect(a);
        let eb = collect(b);
        assert_eq!(ea, eb);
        assert_eq!(ea, direct.events());
        assert_eq!(handle.result().unwrap(), direct.result());
        let session = handle.into_session().unwrap();
        assert_eq!(session.status(), Status::Finished);
    }

    #[test]
    fn finished_session_subscription_is_one_snapshot() {
        let handle = SessionHandle::spawn(Session::create(burma(), params(), 1.0).unwrap(), LiveOptions::default());
        handle.start().unwrap();
        handle.wait_finished().unwrap();
        let messages: Vec<_> = handle.subscribe().unwrap().into_iter().collect();
        assert_eq!(messages.len(), 1);
        assert!(matches!(&messages[0], LiveMessage::Snapshot(s) if s.status == Status::Finished));
        assert!(handle.resume().is_err());
    }

    #[test]
    fn pause_edit_resume() {
        let options = LiveOptions { iteration_delay: Duration::from_millis(2), ..LiveOptions::default() };
        let p = AcsParams { iterations: 200, ..params() };
        let handle = SessionHandle::spawn(Session::create(burma(), p, 1.0).unwrap(), options);
        handle.start().unwrap();
        thread::sleep(Duration::from_millis(20));
        handle.pause().unwrap();
        let s1 = handle.snapshot().unwrap();
        let s2 = handle.snapshot().unwrap();
        assert_eq!(s1, s2);
        assert_eq!(s1.status, Status::Paused);
        let version = handle.steer(SteeringUpdate::entry(1, 2, 0.5)).unwrap();
        assert_eq!(version, 1);
        assert_eq!(handle.snapshot().unwrap().steering.version, 1);
        handle.resume().unwrap();
        let done = handle.wait_finished().unwrap();
        assert_eq!(done.iteration, 200);
        let session = handle.into_session().unwrap();
        assert!(session.events().iter().any(|e| matches!(
            e,
            Event::Iteration { iteration, steering_version: 1, .. } if *iteration == s1.iteration + 1
        )));
    }
}
