//! Drives a [`SessionState`] while writing every step to an [`EventSink`].
//!
//! Live and simulated sessions, the HTTP service and the campaign runner all
//! go through [`SessionDriver`], so their logs share one layout and any log
//! can be replayed with [`replay`].

use std::io;

use chrono::{DateTime, Duration, Utc};

use crate::oracle::{OracleError, OracleSpec, SimulatedUser};
use crate::preference::{Query, ResponderKind, Selection};
use crate::query::{QueryError, Responder, SessionConfig, SessionPhase, SessionState};
use crate::session_log::{
    BatchCreated, BeliefSnapshot, ChoiceRecorded, EventKind, EventSink, FinishedPayload, LogEvent,
    QueryPresented, SessionMode, ValidationMeta, ValidationResult,
};

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("failed to persist session event: {0}")]
    Io(#[from] io::Error),
    #[error("choice submitted {elapsed_s:.1} s after the query was presented; both exposures and the washout need {required_s:.1} s")]
    TooEarly { elapsed_s: f64, required_s: f64 },
    #[error("simulated sessions require an oracle spec")]
    MissingOracle,
    #[error("live sessions do not take an oracle spec")]
    UnexpectedOracle,
    #[error("no query is awaiting an answer (state {0})")]
    NoPendingQuery(SessionPhase),
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("log is empty")]
    Empty,
    #[error("first event must be batch_created, found {0:?}")]
    MissingHeader(EventKind),
    #[error("event {line}: malformed payload: {source}")]
    Payload {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("event {line}: replay diverged from the log: {reason}")]
    Divergence { line: usize, reason: String },
    #[error(transparent)]
    Session(#[from] SessionError),
}

/// What the current open question is, if any.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendingQuery {
    pub query: Query,
    pub presented_at: DateTime<Utc>,
    pub validation: Option<usize>,
}

#[derive(Debug)]
pub struct SessionDriver<S: EventSink> {
    pub id: String,
    pub mode: SessionMode,
    pub oracle: Option<OracleSpec>,
    state: SessionState,
    sink: S,
    presented_at: DateTime<Utc>,
    events_written: usize,
}

impl<S: EventSink> SessionDriver<S> {
    /// Initializes the session, logs the batch and presents the first query.
    pub fn create(
        id: impl Into<String>,
        config: SessionConfig,
        mode: SessionMode,
        oracle: Option<OracleSpec>,
        sink: S,
        now: DateTime<Utc>,
    ) -> Result<Self, SessionError> {
        match (mode, &oracle) {
            (SessionMode::Simulated, None) => return Err(SessionError::MissingOracle),
            (SessionMode::Live, Some(_)) => return Err(SessionError::UnexpectedOracle),
            (SessionMode::Simulated, Some(spec)) => spec.validate()?,
            _ => {}
        }
        let state = SessionState::initialize(config)?;
        let mut driver = Self {
            id: id.into(),
            mode,
            oracle,
            state,
            sink,
            presented_at: now,
            events_written: 0,
        };
        let header = BatchCreated {
            session_id: driver.id.clone(),
            mode,
            config: driver.state.config.clone(),
            oracle: driver.oracle.clone(),
            batch: driver.state.batch.clone(),
        };
        driver.emit(EventKind::BatchCreated, now, &header)?;
        driver.state.start()?;
        driver.emit_query(now)?;
        Ok(driver)
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn sink(&self) -> &S {
        &self.sink
    }

    pub fn into_parts(self) -> (SessionState, S) {
        (self.state, self.sink)
    }

    pub fn events_written(&self) -> usize {
        self.events_written
    }

    fn emit<P: serde::Serialize>(
        &mut self,
        kind: EventKind,
        t: DateTime<Utc>,
        payload: &P,
    ) -> Result<(), SessionError> {
        self.sink.append(&LogEvent::new(kind, t, payload))?;
        self.events_written += 1;
        Ok(())
    }

    fn emit_query(&mut self, now: DateTime<Utc>) -> Result<(), SessionError> {
        let Some(pending) = self.pending() else {
            return Ok(());
        };
        let validation = pending.validation.map(|index| {
            let v = &self.state.validation.as_ref().expect("validating").queries[index];
            ValidationMeta {
                index,
                target: v.target,
                sign: v.sign,
                preferred_slot: v.preferred_slot,
            }
        });
        let payload = QueryPresented {
            iteration: self.state.iteration(),
            query: pending.query,
            validation,
        };
        self.presented_at = now;
        self.emit(EventKind::QueryPresented, now, &payload)
    }

    /// The query currently waiting for an answer.
    pub fn pending(&self) -> Option<PendingQuery> {
        match self.state.phase {
            SessionPhase::AwaitingChoice => self.state.current_query.map(|query| PendingQuery {
                query,
                presented_at: self.presented_at,
                validation: None,
            }),
            SessionPhase::Validating => {
                let round = self.state.validation.as_ref()?;
                round.current().map(|v| PendingQuery {
                    query: v.query,
                    presented_at: self.presented_at,
                    validation: Some(round.outcomes.len()),
                })
            }
            _ => None,
        }
    }

    /// Seconds until a live answer will be accepted; zero in simulation.
    pub fn remaining_lockout_s(&self, now: DateTime<Utc>) -> f64 {
        if self.mode == SessionMode::Simulated {
            return 0.0;
        }
        let elapsed = (now - self.presented_at).num_milliseconds() as f64 / 1000.0;
        (self.state.config.answer_delay_s() - elapsed).max(0.0)
    }

    /// Answers the pending query. In live mode the answer is rejected until
    /// both exposure windows and the washout have elapsed.
    pub fn submit(
        &mut self,
        selected: Selection,
        responder: ResponderKind,
        now: DateTime<Utc>,
    ) -> Result<(), SessionError> {
        if self.pending().is_none() {
            return Err(SessionError::NoPendingQuery(self.state.phase));
        }
        if self.mode == SessionMode::Live {
            let elapsed_s = (now - self.presented_at).num_milliseconds() as f64 / 1000.0;
            let required_s = self.state.config.answer_delay_s();
            if elapsed_s < required_s {
                return Err(SessionError::TooEarly {
                    elapsed_s,
                    required_s,
                });
            }
        }
        match self.state.phase {
            SessionPhase::Validating => self.submit_validation(selected, now),
            _ => self.submit_learning(selected, responder, now),
        }
    }

    fn submit_learning(
        &mut self,
        selected: Selection,
        responder: ResponderKind,
        now: DateTime<Utc>,
    ) -> Result<(), SessionError> {
        let choice = self.state.record_choice(selected, responder, now)?.clone();
        // write-ahead: the choice is durable before the belief moves
        let record = ChoiceRecorded {
            iteration: self.state.iteration(),
            selected,
            responder,
            query: choice.query,
        };
        self.emit(EventKind::Choice, now, &record)?;
        self.state.complete_update()?;
        self.emit_follow_up(now)
    }

    fn emit_follow_up(&mut self, now: DateTime<Utc>) -> Result<(), SessionError> {
        let snapshot = BeliefSnapshot {
            iteration: self.state.iteration(),
            belief: self.state.belief.clone(),
            summary: self.state.trajectory.last().cloned().unwrap_or_else(|| self.state.summary()),
        };
        self.emit(EventKind::BeliefSnapshot, now, &snapshot)?;
        if self.state.phase == SessionPhase::Finished {
            let payload = FinishedPayload {
                final_index: self.state.final_index,
                final_profile: self.state.final_profile().copied(),
                summary: snapshot.summary,
            };
            self.emit(EventKind::Finished, now, &payload)
        } else {
            self.emit_query(now)
        }
    }

    fn submit_validation(&mut self, selected: Selection, now: DateTime<Utc>) -> Result<(), SessionError> {
        let index = self.state.validation.as_ref().map_or(0, |r| r.outcomes.len());
        let kept = self.state.submit_validation(selected)?;
        let round = self.state.validation.as_ref().expect("validating");
        let q = &round.queries[index];
        let payload = ValidationResult {
            index,
            target: q.target,
            sign: q.sign,
            selected,
            kept,
            report: round.report(),
        };
        self.emit(EventKind::ValidationResult, now, &payload)?;
        self.emit_query(now)
    }

    /// Opens the validation round over the configured targets.
    pub fn start_validation(&mut self, now: DateTime<Utc>) -> Result<(), SessionError> {
        let targets = self.state.config.validation_targets.clone();
        self.state.validation_round(&targets)?;
        self.emit_query(now)
    }

    /// Answers every remaining query with `responder`, including the
    /// validation round when configured.
    pub fn run_to_completion<R: Responder>(
        &mut self,
        responder: &mut R,
        now: impl Fn() -> DateTime<Utc>,
    ) -> Result<(), SessionError> {
        while let Some(p) = self.pending().filter(|p| p.validation.is_none()) {
            let answer = responder.respond(&p.query);
            self.submit(answer, responder.kind(), now())?;
        }
        if self.state.phase == SessionPhase::Finished && !self.state.config.validation_targets.is_empty() {
            self.start_validation(now())?;
            while let Some(p) = self.pending() {
                let answer = responder.respond(&p.query);
                self.submit(answer, responder.kind(), now())?;
            }
        }
        Ok(())
    }
}

/// Creates and runs a simulated session against its oracle.
pub fn run_simulated<S: EventSink>(
    id: impl Into<String>,
    config: SessionConfig,
    oracle: OracleSpec,
    sink: S,
) -> Result<(SessionDriver<S>, SimulatedUser), SessionError> {
    let mut user = SimulatedUser::for_session(&oracle, config.ranges.clone(), config.seed)?;
    let mut driver = SessionDriver::create(id, config, SessionMode::Simulated, Some(oracle), sink, Utc::now())?;
    driver.run_to_completion(&mut user, Utc::now)?;
    Ok((driver, user))
}

fn payload<P: serde::de::DeserializeOwned>(event: &LogEvent, line: usize) -> Result<P, ReplayError> {
    event
        .decode()
        .map_err(|source| ReplayError::Payload { line, source })
}

/// Rebuilds the session from its log, checking every logged query and
/// belief against the recomputed ones.
pub fn replay(events: &[LogEvent]) -> Result<(SessionState, BatchCreated), ReplayError> {
    let (state, header, _) = replay_inner(events)?;
    Ok((state, header))
}

struct ReplayTail {
    snapshots: usize,
    last_presented: DateTime<Utc>,
}

fn replay_inner(events: &[LogEvent]) -> Result<(SessionState, BatchCreated, ReplayTail), ReplayError> {
    let first = events.first().ok_or(ReplayError::Empty)?;
    if first.event != EventKind::BatchCreated {
        return Err(ReplayError::MissingHeader(first.event));
    }
    let header: BatchCreated = payload(first, 1)?;
    let mut state = SessionState::initialize(header.config.clone()).map_err(SessionError::from)?;
    if state.batch != header.batch {
        return Err(ReplayError::Divergence {
            line: 1,
            reason: "batch differs from the one regenerated from the seed".into(),
        });
    }
    state.start().map_err(SessionError::from)?;
    let mut tail = ReplayTail {
        snapshots: 0,
        last_presented: first.t,
    };
    let diverged = |line: usize, reason: String| ReplayError::Divergence { line, reason };

    for (i, event) in events.iter().enumerate().skip(1) {
        let line = i + 1;
        match event.event {
            EventKind::BatchCreated => return Err(diverged(line, "second batch_created".into())),
            EventKind::QueryPresented => {
                let p: QueryPresented = payload(event, line)?;
                if p.validation.is_some() && state.phase == SessionPhase::Finished {
                    let targets = state.config.validation_targets.clone();
                    state.validation_round(&targets).map_err(SessionError::from)?;
                }
                let expected = match state.phase {
                    SessionPhase::AwaitingChoice => state.current_query,
                    SessionPhase::Validating => state.current_validation().map(|v| v.query),
                    _ => None,
                };
                if expected != Some(p.query) {
                    return Err(diverged(line, "presented query differs from the recomputed one".into()));
                }
                tail.last_presented = event.t;
            }
            EventKind::Choice => {
                let c: ChoiceRecorded = payload(event, line)?;
                if state.current_query != Some(c.query) {
                    return Err(diverged(line, "answered query differs from the pending one".into()));
                }
                state
                    .submit_choice(c.selected, c.responder, event.t)
                    .map_err(SessionError::from)?;
            }
            EventKind::BeliefSnapshot => {
                let s: BeliefSnapshot = payload(event, line)?;
                if s.belief != state.belief {
                    return Err(diverged(line, format!("belief after iteration {} differs", s.iteration)));
                }
                tail.snapshots += 1;
            }
            EventKind::Finished => {
                let f: FinishedPayload = payload(event, line)?;
                if f.final_index != state.final_index {
                    return Err(diverged(line, "final profile differs".into()));
                }
            }
            EventKind::ValidationResult => {
                let v: ValidationResult = payload(event, line)?;
                state.submit_validation(v.selected).map_err(SessionError::from)?;
            }
        }
    }
    Ok((state, header, tail))
}

impl<S: EventSink> SessionDriver<S> {
    /// Restores a session from its log and appends whatever follow-up events
    /// a crash after the last durable line left out.
    pub fn recover(events: &[LogEvent], sink: S, now: DateTime<Utc>) -> Result<Self, ReplayError> {
        let (state, header, tail) = replay_inner(events)?;
        let mut driver = Self {
            id: header.session_id,
            mode: header.mode,
            oracle: header.oracle,
            state,
            sink,
            presented_at: tail.last_presented,
            events_written: events.len(),
        };
        let missing_snapshot = tail.snapshots < driver.state.history.len();
        if missing_snapshot {
            driver.emit_follow_up(now)?;
        }
        Ok(driver)
    }
}

/// Offset of `t` from `base`, handy for deterministic test clocks.
pub fn seconds_after(base: DateTime<Utc>, seconds: f64) -> DateTime<Utc> {
    base + Duration::milliseconds((seconds * 1000.0).round() as i64)
}
