//! Planar and polar coordinates around a BS-user pair, and the link distances
//! derived from them.
//!
//! The polar frame is anchored at the user: `rho` is the ground distance from
//! the user and `theta` the signed deviation from the user-to-BS direction.
//! Positive `theta` is a counter-clockwise rotation.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("BS and user are co-located at ({x}, {y}); the user-to-BS direction is undefined")]
    DegenerateDirection { x: f64, y: f64 },
    #[error("invalid heights: {0}")]
    InvalidHeights(String),
}

/// Horizontal position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the planar cross product `self × other`.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    /// Counter-clockwise rotation by `angle` radians.
    pub fn rotate(self, angle: f64) -> Point2 {
        let (s, c) = angle.sin_cos();
        Point2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

/// Point in 3D space, used for ray casting against buildings.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn at_height(p: Point2, z: f64) -> Self {
        Self::new(p.x, p.y, z)
    }
}

/// Polar position relative to the user: ground distance and deviation angle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PolarCoord {
    pub rho: f64,
    pub theta: f64,
}

impl PolarCoord {
    pub const fn new(rho: f64, theta: f64) -> Self {
        Self { rho, theta }
    }
}

/// Antenna heights of the UAV, the BS and the user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Heights {
    pub uav: f64,
    pub bs: f64,
    pub user: f64,
}

impl Heights {
    pub fn new(uav: f64, bs: f64, user: f64) -> Result<Self, GeometryError> {
        let h = Self { uav, bs, user };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let finite = self.uav.is_finite() && self.bs.is_finite() && self.user.is_finite();
        if !finite || !(self.uav > self.bs && self.bs > self.user && self.user >= 0.0) {
            return Err(GeometryError::InvalidHeights(format!(
                "need h_uav > h_bs > h_user >= 0, got h_uav={}, h_bs={}, h_user={}",
                self.uav, self.bs, self.user
            )));
        }
        Ok(())
    }

    /// Vertical UAV-user separation.
    pub fn user_gap(&self) -> f64 {
        self.uav - self.user
    }

    /// Vertical UAV-BS separation.
    pub fn bs_gap(&self) -> f64 {
        self.uav - self.bs
    }
}

/// Cached polar frame for a fixed user/BS pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarFrame {
    user: Point2,
    bs: Point2,
    dir: Point2,
    length: f64,
}

impl PolarFrame {
    pub fn new(user: Point2, bs: Point2) -> Result<Self, GeometryError> {
        let diff = bs - user;
        let length = diff.norm();
        if !(length > 0.0) || !length.is_finite() {
            return Err(GeometryError::DegenerateDirection {
                x: user.x,
                y: user.y,
            });
        }
        Ok(Self {
            user,
            bs,
            dir: diff * (1.0 / length),
            length,
        })
    }

    pub fn user(&self) -> Point2 {
        self.user
    }

    pub fn bs(&self) -> Point2 {
        self.bs
    }

    /// Unit vector from the user towards the BS.
    pub fn axis(&self) -> Point2 {
        self.dir
    }

    /// Horizontal BS-user distance `L`.
    pub fn length(&self) -> f64 {
        self.length
    }

    /// Unit radial direction `M(theta) u`.
    pub fn radial(&self, theta: f64) -> Point2 {
        self.dir.rotate(theta)
    }

    /// `d/dtheta M(theta) u`, the unit tangential direction.
    pub fn tangential(&self, theta: f64) -> Point2 {
        self.dir.rotate(theta + FRAC_PI_2)
    }

    pub fn to_cartesian(&self, p: PolarCoord) -> Point2 {
        self.user + self.radial(p.theta) * p.rho
    }

    pub fn to_polar(&self, x: Point2) -> PolarCoord {
        let z = x - self.user;
        let rho = z.norm();
        if rho == 0.0 {
            return PolarCoord::new(0.0, 0.0);
        }
        // atan2 is the well-conditioned form of sign(z2 u1 - z1 u2) * arccos(z.u / rho);
        // sign(0) = -1 is kept, so points straight behind the user get -pi.
        let cross = self.dir.cross(z);
        let angle = cross.atan2(self.dir.dot(z)).abs();
        let theta = if cross > 0.0 { angle } else { -angle };
        PolarCoord::new(rho, theta)
    }

    /// Whether `(rho, theta)` lies in the half-disc with the BS-user segment as diameter.
    pub fn in_search_region(&self, p: PolarCoord) -> bool {
        p.theta.abs() <= FRAC_PI_2 && p.rho >= 0.0 && p.rho <= self.length * p.theta.cos()
    }

    /// UAV-user distance in polar form.
    pub fn dist_to_user_polar(&self, rho: f64, h: &Heights) -> f64 {
        (rho * rho + h.user_gap() * h.user_gap()).sqrt()
    }

    /// UAV-BS distance in polar form (law of cosines on the ground triangle).
    pub fn dist_to_bs_polar(&self, p: PolarCoord, h: &Heights) -> f64 {
        let l = self.length;
        let ground_sq = (p.rho * p.rho + l * l - 2.0 * p.rho * l * p.theta.cos()).max(0.0);
        (ground_sq + h.bs_gap() * h.bs_gap()).sqrt()
    }
}

/// `x_u + rho M(theta) u`.
pub fn from_polar(p: PolarCoord, user: Point2, bs: Point2) -> Result<Point2, GeometryError> {
    Ok(PolarFrame::new(user, bs)?.to_cartesian(p))
}

pub fn to_polar(x: Point2, user: Point2, bs: Point2) -> Result<PolarCoord, GeometryError> {
    Ok(PolarFrame::new(user, bs)?.to_polar(x))
}

pub fn dist_to_user(x: Point2, user: Point2, h: &Heights) -> f64 {
    ((x - user).norm_sq() + h.user_gap() * h.user_gap()).sqrt()
}

pub fn dist_to_bs(x: Point2, bs: Point2, h: &Heights) -> f64 {
    ((x - bs).norm_sq() + h.bs_gap() * h.bs_gap()).sqrt()
}

/// Elevation angle of the UAV seen from the user, in `(0, pi/2]`.
pub fn elevation_angle(x: Point2, user: Point2, h: &Heights) -> f64 {
    h.user_gap().atan2((x - user).norm())
}

/// Wraps an angle into `[0, 2 pi)`.
pub fn wrap_two_pi(angle: f64) -> f64 {
    let a = angle.rem_euclid(2.0 * PI);
    if a >= 2.0 * PI {
        0.0
    } else {
        a
    }
}
