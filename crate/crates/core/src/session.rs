//! Login, registration, monitoring and lock-out as a streaming state machine.
//!
//! ```text
//! Locked --login--> Registering --t periods recorded--> Monitoring --rejected interval--> Locked
//! ```
//!
//! Frames arriving while locked are discarded, so no frame sequence alone
//! can leave `Locked`. During registration a gap of more than
//! `max_gap_s` between frames restarts the recording. While monitoring, the
//! session keeps the most recent authentication interval of frames; when
//! the interval deadline passes, every window of that interval is matched
//! and a majority vote (ties accept) decides between `AUTH_OK` and
//! `LOCKED_OUT`.

use std::collections::VecDeque;
use std::fmt;
use std::sync::{Arc, Mutex, MutexGuard};

use crate::csi_pipeline::{CsiFrame, CsiSeries, FilterSpec};
use crate::matcher::{RegisteredProfile, RegistrationOptions};
use crate::pipeline::{features_from_series, frames_for, register_series};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionConfig {
    pub periods: usize,
    pub period_secs: f64,
    pub auth_interval_s: f64,
    pub rate_hz: f64,
    pub window_s: f64,
    pub filter: FilterSpec,
    pub update_enabled: bool,
    /// Largest frame gap tolerated during registration.
    pub max_gap_s: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            periods: 4,
            period_secs: 30.0,
            auth_interval_s: 300.0,
            rate_hz: 50.0,
            window_s: 1.0,
            filter: FilterSpec::default(),
            update_enabled: true,
            max_gap_s: 1.0,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.periods == 0 {
            return Err(Error::Invalid("periods must be >= 1".into()));
        }
        for (name, v) in [
            ("period_secs", self.period_secs),
            ("auth_interval_s", self.auth_interval_s),
            ("rate_hz", self.rate_hz),
            ("window_s", self.window_s),
            ("max_gap_s", self.max_gap_s),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.auth_interval_s < 2.0 * self.window_s {
            return Err(Error::Invalid(format!(
                "auth_interval_s {} is shorter than two windows ({} s)",
                self.auth_interval_s,
                2.0 * self.window_s
            )));
        }
        self.filter_spec().validate()?;
        Ok(())
    }

    fn filter_spec(&self) -> FilterSpec {
        FilterSpec {
            rate_hz: self.rate_hz,
            ..self.filter
        }
    }

    fn registration_frames(&self) -> usize {
        self.periods * frames_for(self.period_secs, self.rate_hz)
    }

    fn interval_us(&self) -> u64 {
        (self.auth_interval_s * 1e6).round() as u64
    }
}

/// Session configuration plus scripted primary-login times, read from a
/// `key = value` file. `#` starts a comment.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub session: SessionConfig,
    pub login_at_us: Vec<u64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Invalid(format!("config line {line_no}: {msg}"));
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(format!("expected key = value, got '{line}'")))?;
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key '{key}'")));
            }
            let float = || value.parse::<f64>().map_err(|_| err(format!("{key}: '{value}' is not a number")));
            let int = || value.parse::<usize>().map_err(|_| err(format!("{key}: '{value}' is not an integer")));
            let s = &mut cfg.session;
            match key {
                "periods" => s.periods = int()?,
                "period_secs" => s.period_secs = float()?,
                "auth_interval_s" => s.auth_interval_s = float()?,
                "rate_hz" => s.rate_hz = float()?,
                "window_s" => s.window_s = float()?,
                "filter_order" => s.filter.order = int()?,
                "cutoff_hz" => s.filter.cutoff_hz = float()?,
                "max_gap_s" => s.max_gap_s = float()?,
                "update_enabled" => {
                    s.update_enabled = value
                        .parse()
                        .map_err(|_| err(format!("update_enabled: '{value}' is not true/false")))?
                }
                "login_at_us" => {
                    cfg.login_at_us = value
                        .split(',')
                        .map(str::trim)
                        .filter(|v| !v.is_empty())
                        .map(|v| v.parse::<u64>().map_err(|_| err(format!("login_at_us: bad timestamp '{v}'"))))
                        .collect::<Result<Vec<_>>>()?;
                    cfg.login_at_us.sort_unstable();
                }
                other => return Err(err(format!("unknown key '{other}'"))),
            }
        }
        cfg.session.filter.rate_hz = cfg.session.rate_hz;
        cfg.session.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Locked,
    Registering,
    Monitoring,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Registered,
    AuthOk,
    LockedOut,
    Warn,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Registered => "REGISTERED",
            EventKind::AuthOk => "AUTH_OK",
            EventKind::LockedOut => "LOCKED_OUT",
            EventKind::Warn => "WARN",
        }
    }
}

/// One line of the event stream: `ts_us EVENT detail`.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionEvent {
    pub ts_us: u64,
    pub kind: EventKind,
    pub detail: String,
}

impl fmt::Display for SessionEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.ts_us, self.kind.as_str(), self.detail)
    }
}

/// Single-owner session state.
#[derive(Debug, Clone)]
pub struct Session {
    config: SessionConfig,
    phase: Phase,
    profile: Option<Arc<RegisteredProfile>>,
    buffer: VecDeque<CsiFrame>,
    last_ts: Option<u64>,
    next_auth_deadline: Option<u64>,
    out_of_order: u64,
    dropped_locked: u64,
}

impl Session {
    pub fn new(config: SessionConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            phase: Phase::Locked,
            profile: None,
            buffer: VecDeque::new(),
            last_ts: None,
            next_auth_deadline: None,
            out_of_order: 0,
            dropped_locked: 0,
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Current profile; replaced wholesale on every update.
    pub fn profile(&self) -> Option<Arc<RegisteredProfile>> {
        self.profile.clone()
    }

    pub fn out_of_order_frames(&self) -> u64 {
        self.out_of_order
    }

    pub fn dropped_while_locked(&self) -> u64 {
        self.dropped_locked
    }

    pub fn next_auth_deadline(&self) -> Option<u64> {
        self.next_auth_deadline
    }

    /// Frames recorded toward registration so far.
    pub fn registration_progress(&self) -> (usize, usize) {
        match self.phase {
            Phase::Registering => (self.buffer.len(), self.config.registration_frames()),
            _ => (0, self.config.registration_frames()),
        }
    }

    fn event(ts_us: u64, kind: EventKind, detail: impl Into<String>) -> SessionEvent {
        SessionEvent {
            ts_us,
            kind,
            detail: detail.into(),
        }
    }

    /// A successful conventional login at `ts_us`.
    pub fn on_primary_login(&mut self, ts_us: u64) -> Vec<SessionEvent> {
        match self.phase {
            Phase::Locked => {
                self.phase = Phase::Registering;
                self.buffer.clear();
                self.profile = None;
                self.next_auth_deadline = None;
                vec![]
            }
            Phase::Registering => {
                self.buffer.clear();
                vec![Self::event(ts_us, EventKind::Warn, "login during registration; registration restarted")]
            }
            Phase::Monitoring => vec![Self::event(ts_us, EventKind::Warn, "login ignored while monitoring")],
        }
    }

    /// Feeds one frame. Out-of-order frames are counted and dropped.
    pub fn ingest_frame(&mut self, frame: CsiFrame) -> Vec<SessionEvent> {
        let ts = frame.timestamp_us;
        if self.last_ts.is_some_and(|last| ts <= last) {
            self.out_of_order += 1;
            return vec![];
        }
        self.last_ts = Some(ts);
        match self.phase {
            Phase::Locked => {
                self.dropped_locked += 1;
                vec![]
            }
            Phase::Registering => self.record_registration(frame),
            Phase::Monitoring => {
                self.buffer.push_back(frame);
                let horizon = ts.saturating_sub(self.config.interval_us());
                while self.buffer.front().is_some_and(|f| f.timestamp_us <= horizon) {
                    self.buffer.pop_front();
                }
                vec![]
            }
        }
    }

    fn record_registration(&mut self, frame: CsiFrame) -> Vec<SessionEvent> {
        let ts = frame.timestamp_us;
        let mut events = vec![];
        let gap_us = (self.config.max_gap_s * 1e6) as u64;
        if let Some(prev) = self.buffer.back() {
            let bad_shape = prev.subcarriers() != frame.subcarriers();
            if ts - prev.timestamp_us > gap_us || bad_shape {
                let why = if bad_shape {
                    "subcarrier count changed".to_string()
                } else {
                    format!("gap of {:.3} s", (ts - prev.timestamp_us) as f64 / 1e6)
                };
                self.buffer.clear();
                events.push(Self::event(ts, EventKind::Warn, format!("{why}; registration restarted")));
            }
        }
        self.buffer.push_back(frame);
        if self.buffer.len() < self.config.registration_frames() {
            return events;
        }
        let series = CsiSeries {
            rate_hz: self.config.rate_hz,
            frames: self.buffer.drain(..).collect(),
        };
        let options = RegistrationOptions {
            period_secs: self.config.period_secs,
            window_s: self.config.window_s,
            filter: self.config.filter_spec(),
            ..RegistrationOptions::default()
        };
        match register_series(&series, self.config.periods, &options) {
            Ok(profile) => {
                let thresholds: Vec<String> = profile.periods.iter().map(|p| format!("{:.6e}", p.threshold)).collect();
                events.push(Self::event(
                    ts,
                    EventKind::Registered,
                    format!("t={} dim={} thresholds={}", profile.t, profile.dim(), thresholds.join(",")),
                ));
                self.profile = Some(Arc::new(profile));
                self.phase = Phase::Monitoring;
                self.next_auth_deadline = Some(ts + self.config.interval_us());
            }
            Err(e) => events.push(Self::event(ts, EventKind::Warn, format!("registration failed: {e}; restarting"))),
        }
        events
    }

    /// Runs the interval authentication if its deadline has passed.
    pub fn tick(&mut self, now_us: u64) -> Vec<SessionEvent> {
        let (Phase::Monitoring, Some(deadline)) = (self.phase, self.next_auth_deadline) else {
            return vec![];
        };
        if now_us < deadline {
            return vec![];
        }
        let profile = self.profile.clone().expect("monitoring holds a profile");
        let expected = frames_for(self.config.auth_interval_s, self.config.rate_hz);
        let window_frames = frames_for(self.config.window_s, self.config.rate_hz);
        let defer_us = (self.config.window_s * 1e6) as u64;
        if self.buffer.len() < (expected / 2).max(window_frames) {
            self.next_auth_deadline = Some(now_us + defer_us);
            return vec![Self::event(
                now_us,
                EventKind::Warn,
                format!("authentication deferred: {} of {expected} frames buffered", self.buffer.len()),
            )];
        }
        let series = CsiSeries {
            rate_hz: self.config.rate_hz,
            frames: self.buffer.iter().cloned().collect(),
        };
        let features = match features_from_series(&series, &profile.filter, profile.window_s) {
            Ok(f) => f,
            Err(e) => {
                self.next_auth_deadline = Some(now_us + defer_us);
                return vec![Self::event(now_us, EventKind::Warn, format!("authentication deferred: {e}"))];
            }
        };
        let mut accepted = 0;
        let mut best_votes = vec![0usize; profile.t];
        for f in &features {
            match profile.authenticate(&f.values) {
                Ok(d) => {
                    if d.accepted {
                        accepted += 1;
                        best_votes[d.best_period] += 1;
                    }
                }
                Err(e) => {
                    self.lock();
                    return vec![Self::event(now_us, EventKind::LockedOut, format!("match error: {e}"))];
                }
            }
        }
        let n = features.len();
        if 2 * accepted < n {
            self.lock();
            return vec![Self::event(now_us, EventKind::LockedOut, format!("accepted {accepted}/{n} windows"))];
        }
        let best = best_votes.iter().enumerate().max_by_key(|(i, v)| (**v, std::cmp::Reverse(*i))).map_or(0, |b| b.0);
        let mut events = vec![Self::event(
            now_us,
            EventKind::AuthOk,
            format!("accepted {accepted}/{n} windows best_period={best}"),
        )];
        if self.config.update_enabled {
            let keep = (profile.period_secs / profile.window_s).round() as usize;
            let latest: Vec<&[f64]> = features[n.saturating_sub(keep)..].iter().map(|f| f.values.as_slice()).collect();
            match profile.updated(&latest) {
                Ok(next) => self.profile = Some(Arc::new(next)),
                Err(e) => events.push(Self::event(now_us, EventKind::Warn, format!("update skipped: {e}"))),
            }
        }
        self.next_auth_deadline = Some(now_us + self.config.interval_us());
        events
    }

    fn lock(&mut self) {
        self.phase = Phase::Locked;
        self.profile = None;
        self.buffer.clear();
        self.next_auth_deadline = None;
    }

    /// [`ingest_frame`](Self::ingest_frame) followed by a tick at the frame's
    /// timestamp.
    pub fn process(&mut self, frame: CsiFrame) -> Vec<SessionEvent> {
        let ts = frame.timestamp_us;
        let mut events = self.ingest_frame(frame);
        events.extend(self.tick(ts));
        events
    }
}

/// A [`Session`] shared between an ingesting producer and a ticking
/// consumer. Every call serializes on one lock and appends its events to a
/// single log, so the log is totally ordered.
#[derive(Debug, Clone)]
pub struct SharedSession {
    inner: Arc<Mutex<(Session, Vec<SessionEvent>)>>,
}

impl SharedSession {
    pub fn new(session: Session) -> Self {
        Self {
            inner: Arc::new(Mutex::new((session, Vec::new()))),
        }
    }

    fn guard(&self) -> MutexGuard<'_, (Session, Vec<SessionEvent>)> {
        self.inner.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }

    fn with<F: FnOnce(&mut Session) -> Vec<SessionEvent>>(&self, f: F) -> usize {
        let mut g = self.guard();
        let events = f(&mut g.0);
        let n = events.len();
        g.1.extend(events);
        n
    }

    pub fn login(&self, ts_us: u64) -> usize {
        self.with(|s| s.on_primary_login(ts_us))
    }

    pub fn ingest(&self, frame: CsiFrame) -> usize {
        self.with(|s| s.ingest_frame(frame))
    }

    pub fn tick(&self, now_us: u64) -> usize {
        self.with(|s| s.tick(now_us))
    }

    pub fn phase(&self) -> Phase {
        self.guard().0.phase()
    }

    /// Snapshot of the current profile; never observes a half-applied update.
    pub fn profile(&self) -> Option<Arc<RegisteredProfile>> {
        self.guard().0.profile()
    }

    pub fn events(&self) -> Vec<SessionEvent> {
        self.guard().1.clone()
    }
}
