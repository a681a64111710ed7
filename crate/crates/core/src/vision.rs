//! Emulated overhead-camera feedback.
//!
//! The camera is a planar similarity transform from world centimeters to
//! pixels plus isotropic Gaussian pixel noise. Floor markers with known world
//! positions calibrate the inverse transform; two body markers give the pose.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{wrap_angle, ModelError, Pose2D};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VisionError {
    #[error("camera scale must be positive and finite")]
    InvalidScale,
    #[error("calibration needs at least 2 correspondences, got {0}")]
    TooFewCorrespondences(usize),
    #[error("calibration points are coincident")]
    DegenerateCalibration,
    #[error("front and back markers coincide; heading undefined")]
    CoincidentMarkers,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// `p' = scale · R(rotation) · p + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTransform<T> {
    pub scale: T,
    pub rotation: T,
    pub tx: T,
    pub ty: T,
}

impl<T: Scalar> SimilarityTransform<T> {
    pub fn new(scale: T, rotation: T, tx: T, ty: T) -> Result<Self, VisionError> {
        if !(scale.is_finite() && scale > T::zero()) {
            return Err(VisionError::InvalidScale);
        }
        Ok(Self {
            scale,
            rotation: wrap_angle(rotation)?,
            tx,
            ty,
        })
    }

    pub fn identity() -> Self {
        Self {
            scale: T::one(),
            rotation: T::zero(),
            tx: T::zero(),
            ty: T::zero(),
        }
    }

    pub fn apply(&self, (x, y): (T, T)) -> (T, T) {
        let (s, c) = self.rotation.sin_cos();
        (
            self.scale * (c * x - s * y) + self.tx,
            self.scale * (s * x + c * y) + self.ty,
        )
    }

    pub fn inverse(&self) -> Self {
        let inv_scale = T::one() / self.scale;
        let (s, c) = self.rotation.sin_cos();
        // -R^T t / scale
        let tx = -(c * self.tx + s * self.ty) * inv_scale;
        let ty = -(-s * self.tx + c * self.ty) * inv_scale;
        Self {
            scale: inv_scale,
            rotation: -self.rotation,
            tx,
            ty,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkerRole {
    Front,
    Back,
    Goal,
    Floor(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkerObservation<T> {
    pub u: T,
    pub v: T,
    pub role: MarkerRole,
}

/// World-to-pixel camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel<T> {
    pub world_to_pixel: SimilarityTransform<T>,
    pub pixel_noise_std: T,
}

impl<T: Scalar> CameraModel<T> {
    pub fn new(
        scale: T,
        rotation: T,
        translation: (T, T),
        pixel_noise_std: T,
    ) -> Result<Self, VisionError> {
        Ok(Self {
            world_to_pixel: SimilarityTransform::new(
                scale,
                rotation,
                translation.0,
                translation.1,
            )?,
            pixel_noise_std,
        })
    }
}

/// Projects a world point (cm) to pixels, adding pixel noise. With zero noise
/// the stream is not consumed.
pub fn project<T: Scalar, R: Rng + ?Sized>(
    world: (T, T),
    role: MarkerRole,
    camera: &CameraModel<T>,
    rng: &mut R,
) -> MarkerObservation<T> {
    let (mut u, mut v) = camera.world_to_pixel.apply(world);
    if camera.pixel_noise_std > T::zero() {
        u += camera.pixel_noise_std * T::standard_normal(rng);
        v += camera.pixel_noise_std * T::standard_normal(rng);
    }
    MarkerObservation { u, v, role }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence<T> {
    pub world: (T, T),
    pub pixel: (T, T),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CalibrationSet<T> {
    pub pairs: Vec<Correspondence<T>>,
}

/// Least-squares pixel-to-world similarity transform.
///
/// Minimizes `Σ ‖w_i − (s R p_i + t)‖²`. After centering both point sets the
/// optimal rotation is the angle of the 2D cross-covariance
/// `(Σ p̃·w̃, Σ p̃×w̃)`, the scale is its magnitude over `Σ ‖p̃‖²`, and the
/// translation maps the pixel centroid onto the world centroid.
pub fn calibrate<T: Scalar>(
    set: &CalibrationSet<T>,
) -> Result<SimilarityTransform<T>, VisionError> {
    let n = set.pairs.len();
    if n < 2 {
        return Err(VisionError::TooFewCorrespondences(n));
    }
    let nf = T::from_usize_lossy(n);
    let (mut pcx, mut pcy, mut wcx, mut wcy) = (T::zero(), T::zero(), T::zero(), T::zero());
    for c in &set.pairs {
        pcx += c.pixel.0;
        pcy += c.pixel.1;
        wcx += c.world.0;
        wcy += c.world.1;
    }
    let (pcx, pcy, wcx, wcy) = (pcx / nf, pcy / nf, wcx / nf, wcy / nf);

    let (mut dot, mut cross, mut spread) = (T::zero(), T::zero(), T::zero());
    for c in &set.pairs {
        let (px, py) = (c.pixel.0 - pcx, c.pixel.1 - pcy);
        let (wx, wy) = (c.world.0 - wcx, c.world.1 - wcy);
        dot += px * wx + py * wy;
        cross += px * wy - py * wx;
        spread += px * px + py * py;
    }
    let magnitude = dot.hypot(cross);
    if spread <= T::zero() || magnitude <= T::zero() {
        return Err(VisionError::DegenerateCalibration);
    }
    let rotation = cross.atan2(dot);
    let scale = magnitude / spread;
    let (s, c) = rotation.sin_cos();
    let tx = wcx - scale * (c * pcx - s * pcy);
    let ty = wcy - scale * (s * pcx + c * pcy);
    SimilarityTransform::new(scale, rotation, tx, ty)
}

/// Pose from the front and back body markers: midpoint and front-minus-back heading.
pub fn estimate_pose<T: Scalar>(
    front: &MarkerObservation<T>,
    back: &MarkerObservation<T>,
    pixel_to_world: &SimilarityTransform<T>,
) -> Result<Pose2D<T>, VisionError> {
    let f = pixel_to_world.apply((front.u, front.v));
    let b = pixel_to_world.apply((back.u, back.v));
    let (hx, hy) = (f.0 - b.0, f.1 - b.1);
    if hx == T::zero() && hy == T::zero() {
        return Err(VisionError::CoincidentMarkers);
    }
    let half = T::lit(0.5);
    Ok(Pose2D::new(
        half * (f.0 + b.0),
        half * (f.1 + b.1),
        hy.atan2(hx),
    )?)
}

/// Camera plus calibration state: turns true poses into estimated poses.
#[derive(Debug, Clone)]
pub struct VisionSystem<T> {
    camera: CameraModel<T>,
    pixel_to_world: SimilarityTransform<T>,
    /// Distance from body center to each tracking marker, cm.
    marker_offset: T,
    rng: ChaCha8Rng,
}

impl<T: Scalar> VisionSystem<T> {
    /// Calibrates from noisy projections of `floor_markers`, then tracks.
    pub fn calibrated(
        camera: CameraModel<T>,
        floor_markers: &[(T, T)],
        marker_offset: T,
        seed: u64,
    ) -> Result<Self, VisionError> {
        if !(marker_offset.is_finite() && marker_offset > T::zero()) {
            return Err(VisionError::CoincidentMarkers);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs = floor_markers
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                let obs = project(w, MarkerRole::Floor(i), &camera, &mut rng);
                Correspondence {
                    world: w,
                    pixel: (obs.u, obs.v),
                }
            })
            .collect();
        let pixel_to_world = calibrate(&CalibrationSet { pairs })?;
        Ok(Self {
            camera,
            pixel_to_world,
            marker_offset,
            rng,
        })
    }

    pub fn pixel_to_world(&self) -> &SimilarityTransform<T> {
        &self.pixel_to_world
    }

    pub fn camera(&self) -> &CameraModel<T> {
        &self.camera
    }

    /// Marker pixels a camera would see for the given true pose.
    pub fn observe_markers(
        &mut self,
        pose: &Pose2D<T>,
    ) -> (MarkerObservation<T>, MarkerObservation<T>) {
        let (s, c) = pose.theta.sin_cos();
        let k = self.marker_offset;
        let front = (pose.x + k * c, pose.y + k * s);
        let back = (pose.x - k * c, pose.y - k * s);
        (
            project(front, MarkerRole::Front, &self.camera, &mut self.rng),
            project(back, MarkerRole::Back, &self.camera, &mut self.rng),
        )
    }

    pub fn estimate(&mut self, pose: &Pose2D<T>) -> Result<Pose2D<T>, VisionError> {
        let (front, back) = self.observe_markers(pose);
        estimate_pose(&front, &back, &self.pixel_to_world)
    }
}
