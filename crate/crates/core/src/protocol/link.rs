//! Simulated central/onboard link.
//!
//! The central endpoint encodes commands onto an ordered downlink; the
//! onboard endpoint reassembles lines, applies them to its state machines and
//! answers on the uplink. Both directions deliver in order and at most once;
//! independent frame loss can be injected. Onboard watchdog ticks run on a
//! fixed grid of simulated time.

use std::collections::VecDeque;
use std::fmt;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::codec::{decode, decode_response, Command, ErrorCode, LineDecoder, Response};
use super::onboard::{OnboardState, ProtocolError, DEFAULT_SAFETY_TIMEOUT_S};
use crate::primitives::{ChannelMask, GaitSchedule, CHANNEL_COUNT};

pub const DEFAULT_TICK_INTERVAL_S: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkConfig {
    pub safety_timeout_s: f64,
    pub tick_interval_s: f64,
    /// Probability that any single frame, in either direction, is lost.
    pub loss_probability: f64,
    pub record_transcript: bool,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            safety_timeout_s: DEFAULT_SAFETY_TIMEOUT_S,
            tick_interval_s: DEFAULT_TICK_INTERVAL_S,
            loss_probability: 0.0,
            record_transcript: false,
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        if !(self.safety_timeout_s.is_finite() && self.safety_timeout_s > 0.0) {
            return Err(ProtocolError::InvalidTimeout(self.safety_timeout_s));
        }
        if !(self.tick_interval_s.is_finite() && self.tick_interval_s > 0.0) {
            return Err(ProtocolError::InvalidTickInterval(self.tick_interval_s));
        }
        if !(0.0..1.0).contains(&self.loss_probability) {
            return Err(ProtocolError::InvalidLossProbability(self.loss_probability));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// Central to onboard.
    Down,
    /// Onboard to central.
    Up,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub t: f64,
    pub direction: Direction,
    /// Frame text without its newline.
    pub frame: String,
    pub delivered: bool,
}

impl fmt::Display for TranscriptEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let arrow = match self.direction {
            Direction::Down => '>',
            Direction::Up => '<',
        };
        write!(f, "{:.3} {} {}", self.t, arrow, self.frame)?;
        if !self.delivered {
            write!(f, " [lost]")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LinkStats {
    pub frames_sent: usize,
    pub frames_lost: usize,
    pub responses_ok: usize,
    pub responses_err: usize,
    pub missing_responses: usize,
    pub watchdog_trips: usize,
    /// Largest `now - (last ON command + timeout)` seen for an active channel.
    pub worst_overrun_s: f64,
}

/// One direction of the link: FIFO, at most once, optionally lossy.
#[derive(Debug, Clone)]
struct Wire {
    queue: VecDeque<Vec<u8>>,
    loss_probability: f64,
    rng: ChaCha8Rng,
}

impl Wire {
    fn new(loss_probability: f64, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self {
            queue: VecDeque::new(),
            loss_probability,
            rng,
        }
    }

    fn send(&mut self, frame: Vec<u8>) -> bool {
        let lost = self.loss_probability > 0.0 && self.rng.random::<f64>() < self.loss_probability;
        if !lost {
            self.queue.push_back(frame);
        }
        !lost
    }

    fn recv(&mut self) -> Option<Vec<u8>> {
        self.queue.pop_front()
    }
}

#[derive(Debug, Clone)]
pub struct ActuationLink {
    config: LinkConfig,
    onboard: OnboardState,
    onboard_rx: LineDecoder,
    central_rx: LineDecoder,
    down: Wire,
    up: Wire,
    now: f64,
    next_tick: f64,
    /// Time of the last ON command each actuator actually received.
    last_on: [Option<f64>; CHANNEL_COUNT],
    stats: LinkStats,
    transcript: Vec<TranscriptEntry>,
}

impl ActuationLink {
    pub fn new(config: LinkConfig, seed: u64) -> Result<Self, ProtocolError> {
        config.validate()?;
        Ok(Self {
            onboard: OnboardState::new(config.safety_timeout_s)?,
            onboard_rx: LineDecoder::new(),
            central_rx: LineDecoder::new(),
            down: Wire::new(config.loss_probability, seed, 1),
            up: Wire::new(config.loss_probability, seed, 2),
            now: 0.0,
            next_tick: config.tick_interval_s,
            last_on: [None; CHANNEL_COUNT],
            stats: LinkStats::default(),
            transcript: Vec::new(),
            config,
        })
    }

    pub fn onboard(&self) -> &OnboardState {
        &self.onboard
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn stats(&self) -> &LinkStats {
        &self.stats
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    pub fn write_transcript(&self, path: &Path) -> std::io::Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for e in &self.transcript {
            writeln!(out, "{e}")?;
        }
        out.flush()
    }

    fn record(&mut self, direction: Direction, frame: &[u8], delivered: bool) {
        if self.config.record_transcript {
            self.transcript.push(TranscriptEntry {
                t: self.now,
                direction,
                frame: String::from_utf8_lossy(frame.strip_suffix(b"\n").unwrap_or(frame))
                    .into_owned(),
                delivered,
            });
        }
    }

    fn check_overrun(&mut self) {
        for (i, last) in self.last_on.iter().enumerate() {
            if let (true, Some(t)) = (self.onboard.fsm(i).is_on(), last) {
                let over = self.now - (t + self.config.safety_timeout_s);
                self.stats.worst_overrun_s = self.stats.worst_overrun_s.max(over);
            }
        }
    }

    /// Advances simulated time, running every watchdog tick due on the way.
    /// Returns the channels that tripped.
    pub fn advance_to(&mut self, t: f64) -> Result<Vec<u8>, ProtocolError> {
        if t < self.now {
            return Err(ProtocolError::TimeRegression {
                now: t,
                clock: self.now,
            });
        }
        let mut tripped = Vec::new();
        while self.next_tick <= t {
            self.now = self.next_tick;
            self.check_overrun();
            let trips = self.onboard.fsm_tick(self.now)?;
            self.stats.watchdog_trips += trips.len();
            tripped.extend(trips);
            self.next_tick += self.config.tick_interval_s;
        }
        self.now = t;
        self.check_overrun();
        Ok(tripped)
    }

    /// Sends one command at the current time. Returns the response if both
    /// the command and its answer survived the link.
    pub fn send(&mut self, command: &Command) -> Option<Response> {
        let frame = command.encode();
        let delivered = self.down.send(frame.clone());
        self.stats.frames_sent += 1;
        if !delivered {
            self.stats.frames_lost += 1;
        }
        self.record(Direction::Down, &frame, delivered);

        // Onboard side.
        while let Some(bytes) = self.down.recv() {
            for line in self.onboard_rx.extend(&bytes) {
                let response = match decode(&line) {
                    Ok(cmd) => {
                        let response = self.onboard.apply_command(&cmd, self.now);
                        if response == Response::Ok {
                            match cmd {
                                Command::SmaSet { index, on } => {
                                    self.last_on[index.get() as usize] = on.then_some(self.now)
                                }
                                Command::AllOff => self.last_on = [None; CHANNEL_COUNT],
                                Command::Ping => {}
                            }
                        }
                        response
                    }
                    Err(e) => Response::Err(ErrorCode::from(&e)),
                };
                let reply = response.encode();
                let ok = self.up.send(reply.clone());
                self.stats.frames_sent += 1;
                if !ok {
                    self.stats.frames_lost += 1;
                }
                self.record(Direction::Up, &reply, ok);
            }
        }

        // Central side.
        let mut answer = None;
        while let Some(bytes) = self.up.recv() {
            for line in self.central_rx.extend(&bytes) {
                answer = decode_response(&line).ok();
            }
        }
        match answer {
            Some(Response::Ok) => self.stats.responses_ok += 1,
            Some(Response::Err(_)) => self.stats.responses_err += 1,
            None => self.stats.missing_responses += 1,
        }
        answer
    }

    /// Drives a gait schedule starting at `start`: switches channels at each
    /// frame boundary (releases before activations), holds, then sends ALLOFF.
    pub fn play_schedule(
        &mut self,
        schedule: &GaitSchedule<f64>,
        start: f64,
    ) -> Result<PlaybackReport, ProtocolError> {
        let before = self.stats;
        let mut tripped = self.advance_to(start)?;
        let mut active = ChannelMask::empty();
        let mut t = start;
        for frame in &schedule.frames {
            let next = frame.channels;
            for ch in active.iter().filter(|&c| !next.contains(c)) {
                self.send(&Command::sma(ch, false).expect("mask channel in range"));
            }
            for ch in next.iter().filter(|&c| !active.contains(c)) {
                self.send(&Command::sma(ch, true).expect("mask channel in range"));
            }
            active = next;
            t += frame.hold_duration;
            tripped.extend(self.advance_to(t)?);
        }
        self.send(&Command::AllOff);
        Ok(PlaybackReport {
            frames_sent: self.stats.frames_sent - before.frames_sent,
            frames_lost: self.stats.frames_lost - before.frames_lost,
            tripped,
            end_time: t,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaybackReport {
    pub frames_sent: usize,
    pub frames_lost: usize,
    pub tripped: Vec<u8>,
    pub end_time: f64,
}
