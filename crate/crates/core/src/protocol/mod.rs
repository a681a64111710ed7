//! Actuator command protocol: wire codec, onboard safety state machines, and
//! the simulated link between the planner-side and robot-side endpoints.

pub mod codec;
pub mod link;
pub mod onboard;

pub use codec::{
    commands_for_mask, decode, decode_response, encode, Command, DecodeError, ErrorCode,
    LineDecoder, Response, SmaIndex,
};
pub use link::{ActuationLink, Direction, LinkConfig, LinkStats, PlaybackReport, TranscriptEntry};
pub use onboard::{ActuatorFsm, ActuatorState, OnboardState, ProtocolError};
