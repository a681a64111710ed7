//! Onboard actuator state machines with watchdog timers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::codec::{decode, Command, ErrorCode, Response};
use crate::primitives::{ChannelMask, CHANNEL_COUNT};

pub const DEFAULT_SAFETY_TIMEOUT_S: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("time went backwards: now {now} < clock {clock}")]
    TimeRegression { now: f64, clock: f64 },
    #[error("safety timeout must be positive and finite, got {0}")]
    InvalidTimeout(f64),
    #[error("tick interval must be positive and finite, got {0}")]
    InvalidTickInterval(f64),
    #[error("loss probability must lie in [0, 1), got {0}")]
    InvalidLossProbability(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ActuatorState {
    Off,
    /// Active until `deadline` unless refreshed or switched off.
    On {
        deadline: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatorFsm {
    pub state: ActuatorState,
}

impl Default for ActuatorFsm {
    fn default() -> Self {
        Self {
            state: ActuatorState::Off,
        }
    }
}

impl ActuatorFsm {
    pub fn is_on(&self) -> bool {
        matches!(self.state, ActuatorState::On { .. })
    }

    fn activate(&mut self, now: f64, timeout: f64) {
        self.state = ActuatorState::On {
            deadline: now + timeout,
        };
    }

    fn deactivate(&mut self) {
        self.state = ActuatorState::Off;
    }

    /// Returns true if the watchdog tripped.
    fn tick(&mut self, now: f64) -> bool {
        match self.state {
            ActuatorState::On { deadline } if deadline <= now => {
                self.state = ActuatorState::Off;
                true
            }
            _ => false,
        }
    }
}

/// Everything the robot-side firmware holds.
#[derive(Debug, Clone, PartialEq)]
pub struct OnboardState {
    fsms: [ActuatorFsm; CHANNEL_COUNT],
    clock: f64,
    safety_timeout: f64,
}

impl OnboardState {
    pub fn new(safety_timeout: f64) -> Result<Self, ProtocolError> {
        if !(safety_timeout.is_finite() && safety_timeout > 0.0) {
            return Err(ProtocolError::InvalidTimeout(safety_timeout));
        }
        Ok(Self {
            fsms: [ActuatorFsm::default(); CHANNEL_COUNT],
            clock: 0.0,
            safety_timeout,
        })
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn safety_timeout(&self) -> f64 {
        self.safety_timeout
    }

    pub fn fsm(&self, index: usize) -> &ActuatorFsm {
        &self.fsms[index]
    }

    pub fn active_mask(&self) -> ChannelMask {
        ChannelMask::from_channels(
            self.fsms
                .iter()
                .enumerate()
                .filter(|(_, f)| f.is_on())
                .map(|(i, _)| i as u8),
        )
        .expect("fsm index in range")
    }

    /// Applies a decoded command at time `now`. State is untouched on error.
    pub fn apply_command(&mut self, command: &Command, now: f64) -> Response {
        if now < self.clock {
            return Response::Err(ErrorCode::TimeRegression);
        }
        self.clock = now;
        match *command {
            Command::SmaSet { index, on: true } => {
                self.fsms[index.get() as usize].activate(now, self.safety_timeout)
            }
            Command::SmaSet { index, on: false } => self.fsms[index.get() as usize].deactivate(),
            Command::AllOff => self.fsms.iter_mut().for_each(ActuatorFsm::deactivate),
            Command::Ping => {}
        }
        Response::Ok
    }

    /// Decodes and applies a raw frame; decode failures become `ERR` responses.
    pub fn handle_frame(&mut self, frame: &[u8], now: f64) -> Response {
        match decode(frame) {
            Ok(cmd) => self.apply_command(&cmd, now),
            Err(e) => Response::Err(ErrorCode::from(&e)),
        }
    }

    /// Trips every actuator whose deadline has passed. Deadlines are inclusive.
    pub fn fsm_tick(&mut self, now: f64) -> Result<Vec<u8>, ProtocolError> {
        if now < self.clock {
            return Err(ProtocolError::TimeRegression {
                now,
                clock: self.clock,
            });
        }
        self.clock = now;
        Ok(self
            .fsms
            .iter_mut()
            .enumerate()
            .filter_map(|(i, f)| f.tick(now).then_some(i as u8))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::super::codec::commands_for_mask;
    use super::*;
    use proptest::prelude::*;

    fn sma(i: u8, on: bool) -> Command {
        Command::sma(i, on).unwrap()
    }

    #[test]
    fn set_on_records_deadline() {
        let mut s = OnboardState::new(2.0).unwrap();
        assert_eq!(s.apply_command(&sma(3, true), 0.0), Response::Ok);
        assert_eq!(s.fsm(3).state, ActuatorState::On { deadline: 2.0 });
        assert_eq!(s.apply_command(&sma(3, false), 0.5), Response::Ok);
        assert_eq!(s.fsm(3).state, ActuatorState::Off);
    }

    #[test]
    fn resend_refreshes_deadline() {
        let mut s = OnboardState::new(2.0).unwrap();
        s.apply_command(&sma(4, true), 0.0);
        s.apply_command(&sma(4, true), 1.5);
        assert_eq!(s.fsm(4).state, ActuatorState::On { deadline: 3.5 });
    }

    #[test]
    fn all_off_clears_and_is_idempotent() {
        let mut s = OnboardState::new(2.0).unwrap();
        for i in [0, 2, 5, 8, 11, 15, 19] {
            s.apply_command(&sma(i, true), 0.1);
        }
        assert_eq!(s.active_mask().count(), 7);
        s.apply_command(&Command::AllOff, 0.2);
        assert!(s.active_mask().is_empty());
        let once = s.clone();
        s.apply_command(&Command::AllOff, 0.2);
        assert_eq!(s, once);
    }

    #[test]
    fn watchdog_boundary_is_inclusive() {
        let mut s = OnboardState::new(2.0).unwrap();
        s.apply_command(&sma(3, true), 0.0);
        assert_eq!(s.fsm_tick(1.9).unwrap(), Vec::<u8>::new());
        assert!(s.fsm(3).is_on());
        assert_eq!(s.fsm_tick(2.0).unwrap(), vec![3]);
        assert!(!s.fsm(3).is_on());
    }

    #[test]
    fn time_regression_rejected() {
        let mut s = OnboardState::new(2.0).unwrap();
        s.fsm_tick(1.0).unwrap();
        assert!(matches!(
            s.fsm_tick(0.5),
            Err(ProtocolError::TimeRegression { .. })
        ));
        let before = s.clone();
        assert_eq!(
            s.apply_command(&sma(1, true), 0.5),
            Response::Err(ErrorCode::TimeRegression)
        );
        assert_eq!(s, before);
    }

    #[test]
    fn out_of_range_frame_leaves_state_untouched() {
        let mut s = OnboardState::new(2.0).unwrap();
        s.apply_command(&sma(6, true), 0.0);
        let before = s.clone();
        assert_eq!(
            s.handle_frame(b"SMA 25 1\n", 0.1),
            Response::Err(ErrorCode::IndexOutOfRange)
        );
        assert_eq!(
            s.handle_frame(b"SMA 2 1\n", 0.1),
            Response::Err(ErrorCode::Malformed)
        );
        assert_eq!(s, before);
    }

    #[test]
    fn invalid_timeout_rejected() {
        assert!(OnboardState::new(0.0).is_err());
        assert!(OnboardState::new(f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn every_mask_is_reachable(bits in 0u32..(1 << 20), prior in 0u32..(1 << 20)) {
            let mut s = OnboardState::new(2.0).unwrap();
            for c in commands_for_mask(ChannelMask::from_bits(prior).unwrap()) {
                s.apply_command(&c, 0.0);
            }
            let mask = ChannelMask::from_bits(bits).unwrap();
            for c in commands_for_mask(mask) {
                let wire = c.encode();
                prop_assert_eq!(s.handle_frame(&wire, 0.1), Response::Ok);
            }
            prop_assert_eq!(s.active_mask(), mask);
        }
    }
}
