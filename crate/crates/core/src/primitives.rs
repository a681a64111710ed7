//! The five leading-limb motion primitives and their SMA gait schedules.
//!
//! Limbs are numbered clockwise starting from limb 0 on +Y (90°), so limb `i`
//! points at `90° - 72°·i`. A primitive led by limb `i` drives the four other
//! limbs through a lift, swing, plant, push cycle in unison.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{deg_to_rad, rad_to_deg, Scalar};

pub const LIMB_COUNT: usize = 5;
pub const CHANNELS_PER_LIMB: usize = 4;
pub const CHANNEL_COUNT: usize = LIMB_COUNT * CHANNELS_PER_LIMB;

/// Default cap on simultaneously active channels (4 pushing limbs x 2).
pub const DEFAULT_MAX_SIMULTANEOUS_ON: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LibraryError {
    #[error("limb index {0} out of range 0..{LIMB_COUNT}")]
    InvalidLimb(usize),
    #[error("channel index {0} out of range 0..{CHANNEL_COUNT}")]
    ChannelOutOfRange(u8),
    #[error("channel {0} assigned more than once in limb map")]
    DuplicateChannel(u8),
    #[error("hold duration must be positive and finite, got {0}")]
    InvalidDuration(f64),
    #[error("nominal displacement must be finite and non-negative, got {0}")]
    InvalidRadius(f64),
}

/// Set of active SMA channels, one bit per channel.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChannelMask(u32);

impl ChannelMask {
    const VALID: u32 = (1 << CHANNEL_COUNT) - 1;

    pub const fn empty() -> Self {
        Self(0)
    }

    pub fn from_bits(bits: u32) -> Option<Self> {
        (bits & !Self::VALID == 0).then_some(Self(bits))
    }

    pub fn from_channels<I: IntoIterator<Item = u8>>(channels: I) -> Result<Self, LibraryError> {
        let mut mask = Self::empty();
        for ch in channels {
            mask.insert(ch)?;
        }
        Ok(mask)
    }

    pub const fn bits(self) -> u32 {
        self.0
    }

    pub fn insert(&mut self, channel: u8) -> Result<(), LibraryError> {
        if channel as usize >= CHANNEL_COUNT {
            return Err(LibraryError::ChannelOutOfRange(channel));
        }
        self.0 |= 1 << channel;
        Ok(())
    }

    pub fn contains(self, channel: u8) -> bool {
        (channel as usize) < CHANNEL_COUNT && self.0 & (1 << channel) != 0
    }

    pub fn count(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = u8> {
        (0..CHANNEL_COUNT as u8).filter(move |&c| self.contains(c))
    }
}

impl fmt::Debug for ChannelMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Function of an SMA spring inside its limb.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmaRole {
    /// Lifts the limb off the floor.
    Dorsal,
    /// Presses the limb down; antagonist of `Dorsal`.
    Ventral,
    /// Bends the limb counterclockwise in the body plane.
    BendCcw,
    /// Bends the limb clockwise; antagonist of `BendCcw`.
    BendCw,
}

impl SmaRole {
    pub const ALL: [SmaRole; CHANNELS_PER_LIMB] = [
        SmaRole::Dorsal,
        SmaRole::Ventral,
        SmaRole::BendCcw,
        SmaRole::BendCw,
    ];

    pub fn antagonist(self) -> SmaRole {
        match self {
            SmaRole::Dorsal => SmaRole::Ventral,
            SmaRole::Ventral => SmaRole::Dorsal,
            SmaRole::BendCcw => SmaRole::BendCw,
            SmaRole::BendCw => SmaRole::BendCcw,
        }
    }
}

/// Channel indices of the four springs in one limb.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LimbChannels {
    pub dorsal: u8,
    pub ventral: u8,
    pub bend_ccw: u8,
    pub bend_cw: u8,
}

impl LimbChannels {
    pub fn channel(&self, role: SmaRole) -> u8 {
        match role {
            SmaRole::Dorsal => self.dorsal,
            SmaRole::Ventral => self.ventral,
            SmaRole::BendCcw => self.bend_ccw,
            SmaRole::BendCw => self.bend_cw,
        }
    }
}

/// Limb-to-channel assignment. Always a bijection onto the 20 channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LimbMap {
    limbs: [LimbChannels; LIMB_COUNT],
    owner: [(u8, SmaRole); CHANNEL_COUNT],
}

impl LimbMap {
    pub fn new(limbs: [LimbChannels; LIMB_COUNT]) -> Result<Self, LibraryError> {
        let mut owner: [Option<(u8, SmaRole)>; CHANNEL_COUNT] = [None; CHANNEL_COUNT];
        for (limb, channels) in limbs.iter().enumerate() {
            for role in SmaRole::ALL {
                let ch = channels.channel(role);
                let slot = owner
                    .get_mut(ch as usize)
                    .ok_or(LibraryError::ChannelOutOfRange(ch))?;
                if slot.is_some() {
                    return Err(LibraryError::DuplicateChannel(ch));
                }
                *slot = Some((limb as u8, role));
            }
        }
        // 20 distinct in-range channels fill every slot.
        let owner = owner.map(|o| o.expect("limb map covers every channel"));
        Ok(Self { limbs, owner })
    }

    pub fn limbs(&self) -> &[LimbChannels; LIMB_COUNT] {
        &self.limbs
    }

    pub fn channel(&self, limb: usize, role: SmaRole) -> u8 {
        self.limbs[limb].channel(role)
    }

    /// Limb index and role driven by `channel`.
    pub fn locate(&self, channel: u8) -> Option<(usize, SmaRole)> {
        self.owner
            .get(channel as usize)
            .map(|&(limb, role)| (limb as usize, role))
    }

    /// Moves every active channel to the same role on limb `(limb + shift) mod 5`.
    pub fn rotate_limbs(&self, mask: ChannelMask, shift: usize) -> ChannelMask {
        let mut out = ChannelMask::empty();
        for ch in mask.iter() {
            let (limb, role) = self.owner[ch as usize];
            let target = self.channel((limb as usize + shift) % LIMB_COUNT, role);
            out.insert(target).expect("mapped channel in range");
        }
        out
    }
}

impl Default for LimbMap {
    /// Limb `k` owns channels `4k..4k+4` as dorsal, ventral, ccw, cw.
    fn default() -> Self {
        let limbs = std::array::from_fn(|k| {
            let base = (k * CHANNELS_PER_LIMB) as u8;
            LimbChannels {
                dorsal: base,
                ventral: base + 1,
                bend_ccw: base + 2,
                bend_cw: base + 3,
            }
        });
        Self::new(limbs).expect("default limb map is a bijection")
    }
}

impl Serialize for LimbMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.limbs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for LimbMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let limbs = <[LimbChannels; LIMB_COUNT]>::deserialize(d)?;
        LimbMap::new(limbs).map_err(serde::de::Error::custom)
    }
}

/// One actuation vector held for a fixed time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatorFrame<T> {
    pub channels: ChannelMask,
    pub hold_duration: T,
}

impl<T: Scalar> ActuatorFrame<T> {
    pub fn new(channels: ChannelMask, hold_duration: T) -> Result<Self, LibraryError> {
        if !(hold_duration.is_finite() && hold_duration > T::zero()) {
            return Err(LibraryError::InvalidDuration(
                hold_duration.to_f64().unwrap_or(f64::NAN),
            ));
        }
        Ok(Self {
            channels,
            hold_duration,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GaitSchedule<T> {
    pub frames: Vec<ActuatorFrame<T>>,
}

impl<T: Scalar> GaitSchedule<T> {
    pub fn total_duration(&self) -> T {
        self.frames
            .iter()
            .fold(T::zero(), |acc, f| acc + f.hold_duration)
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Phase durations of the swing-stance cycle, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaitTiming<T> {
    pub lift_s: T,
    pub swing_s: T,
    pub plant_s: T,
    pub push_s: T,
}

impl<T: Scalar> Default for GaitTiming<T> {
    fn default() -> Self {
        Self {
            lift_s: T::lit(0.6),
            swing_s: T::lit(0.6),
            plant_s: T::lit(0.4),
            push_s: T::lit(0.92),
        }
    }
}

/// Heading offset of limb `i` in degrees, in `[0, 360)`.
pub fn limb_heading_degrees(limb: usize) -> f64 {
    (90.0 - 72.0 * limb as f64).rem_euclid(360.0)
}

/// Swing-stance schedule for the primitive led by `leading_limb`.
///
/// The two limbs on either side of the leader swing toward it while lifted,
/// then push away from it while planted.
pub fn gait_for<T: Scalar>(
    leading_limb: usize,
    timing: &GaitTiming<T>,
    map: &LimbMap,
) -> Result<GaitSchedule<T>, LibraryError> {
    if leading_limb >= LIMB_COUNT {
        return Err(LibraryError::InvalidLimb(leading_limb));
    }
    let mut lift = ChannelMask::empty();
    let mut forward = ChannelMask::empty();
    let mut backward = ChannelMask::empty();
    for offset in 1..LIMB_COUNT {
        let limb = (leading_limb + offset) % LIMB_COUNT;
        // Limbs numbered clockwise: offsets 1, 2 sit clockwise of the leader
        // and reach it with a counterclockwise bend.
        let (toward, away) = if offset <= 2 {
            (SmaRole::BendCcw, SmaRole::BendCw)
        } else {
            (SmaRole::BendCw, SmaRole::BendCcw)
        };
        lift.insert(map.channel(limb, SmaRole::Dorsal))?;
        forward.insert(map.channel(limb, toward))?;
        backward.insert(map.channel(limb, away))?;
    }
    let swing = ChannelMask::from_bits(lift.bits() | forward.bits()).expect("valid bits");
    Ok(GaitSchedule {
        frames: vec![
            ActuatorFrame::new(lift, timing.lift_s)?,
            ActuatorFrame::new(swing, timing.swing_s)?,
            ActuatorFrame::new(forward, timing.plant_s)?,
            ActuatorFrame::new(backward, timing.push_s)?,
        ],
    })
}

/// A planning action: heading offset, nominal step length and its gait.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionPrimitive<T> {
    pub id: usize,
    /// Heading offset relative to the body heading, radians.
    pub phi: T,
    /// Nominal displacement used by the planner, cm.
    pub r_nominal: T,
    pub schedule: GaitSchedule<T>,
}

impl<T: Scalar> MotionPrimitive<T> {
    pub fn phi_degrees(&self) -> T {
        rad_to_deg(self.phi)
    }
}

/// Builds the five leading-limb primitives with a shared nominal step length.
pub fn build_library<T: Scalar>(
    r_nominal: T,
    timing: &GaitTiming<T>,
    map: &LimbMap,
) -> Result<Vec<MotionPrimitive<T>>, LibraryError> {
    if !(r_nominal.is_finite() && r_nominal >= T::zero()) {
        return Err(LibraryError::InvalidRadius(
            r_nominal.to_f64().unwrap_or(f64::NAN),
        ));
    }
    (0..LIMB_COUNT)
        .map(|id| {
            Ok(MotionPrimitive {
                id,
                phi: deg_to_rad(T::lit(limb_heading_degrees(id))),
                r_nominal,
                schedule: gait_for(id, timing, map)?,
            })
        })
        .collect()
}

/// Default library: r = 5 cm, default timing and limb map.
pub fn build_default_library<T: Scalar>() -> Vec<MotionPrimitive<T>> {
    build_library(T::lit(5.0), &GaitTiming::default(), &LimbMap::default())
        .expect("default library parameters are valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidationRules<T> {
    pub safety_timeout_s: T,
    pub max_simultaneous_on: usize,
    pub allow_antagonistic: bool,
}

impl<T: Scalar> Default for ValidationRules<T> {
    fn default() -> Self {
        Self {
            safety_timeout_s: T::lit(2.0),
            max_simultaneous_on: DEFAULT_MAX_SIMULTANEOUS_ON,
            allow_antagonistic: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation<T> {
    /// Channel held ON across consecutive frames for longer than the timeout.
    ChannelOverTimeout {
        channel: u8,
        first_frame: usize,
        on_time: T,
    },
    AntagonisticCoactivation {
        frame: usize,
        limb: usize,
        channels: (u8, u8),
    },
    TooManyActive {
        frame: usize,
        active: usize,
        max: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport<T> {
    pub violations: Vec<Violation<T>>,
}

impl<T> ValidationReport<T> {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_schedule<T: Scalar>(
    schedule: &GaitSchedule<T>,
    rules: &ValidationRules<T>,
    map: &LimbMap,
) -> ValidationReport<T> {
    let mut violations = Vec::new();

    for (idx, frame) in schedule.frames.iter().enumerate() {
        let active = frame.channels.count();
        if active > rules.max_simultaneous_on {
            violations.push(Violation::TooManyActive {
                frame: idx,
                active,
                max: rules.max_simultaneous_on,
            });
        }
        if !rules.allow_antagonistic {
            for (limb, ch) in map.limbs().iter().enumerate() {
                for (a, b) in [(ch.dorsal, ch.ventral), (ch.bend_ccw, ch.bend_cw)] {
                    if frame.channels.contains(a) && frame.channels.contains(b) {
                        violations.push(Violation::AntagonisticCoactivation {
                            frame: idx,
                            limb,
                            channels: (a, b),
                        });
                    }
                }
            }
        }
    }

    for channel in 0..CHANNEL_COUNT as u8 {
        let mut run: Option<(usize, T)> = None;
        let mut flush = |run: &mut Option<(usize, T)>| {
            if let Some((first_frame, on_time)) = run.take() {
                if on_time > rules.safety_timeout_s {
                    violations.push(Violation::ChannelOverTimeout {
                        channel,
                        first_frame,
                        on_time,
                    });
                }
            }
        };
        for (idx, frame) in schedule.frames.iter().enumerate() {
            if frame.channels.contains(channel) {
                match run.as_mut() {
                    Some((_, t)) => *t += frame.hold_duration,
                    None => run = Some((idx, frame.hold_duration)),
                }
            } else {
                flush(&mut run);
            }
        }
        flush(&mut run);
    }

    ValidationReport { violations }
}
