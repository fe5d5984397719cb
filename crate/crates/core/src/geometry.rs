//! Uniform square arrays and element-pair distances.
//!
//! An array of `m * m` elements lies in the local y-z plane with its
//! broadside along +x. A pose rotates it intrinsically Z-Y-X
//! (yaw, pitch, roll) about its center and then translates it.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, Isometry3, Point3, Rotation3, Vector3};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("element count {0} is not a perfect square")]
    NotPerfectSquare(usize),
    #[error("inter-element spacing must be positive, got {0}")]
    NonPositiveSpacing(f64),
    #[error("elements rx {rx} and tx {tx} are {distance} m apart (overlapping)")]
    OverlappingElements { rx: usize, tx: usize, distance: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayPose {
    pub center: Point3<f64>,
    /// (yaw, pitch, roll) in radians, each wrapped into `[0, 2 pi)`.
    pub orientation: [f64; 3],
}

impl ArrayPose {
    pub fn new(center: Point3<f64>, orientation: [f64; 3]) -> Self {
        Self {
            center,
            orientation: orientation.map(|a| a.rem_euclid(TAU)),
        }
    }

    /// Broadside pose at `center`.
    pub fn identity(center: Point3<f64>) -> Self {
        Self::new(center, [0.0; 3])
    }

    pub fn rotation(&self) -> Rotation3<f64> {
        let [yaw, pitch, roll] = self.orientation;
        // from_euler_angles builds Rz(yaw) * Ry(pitch) * Rx(roll)
        Rotation3::from_euler_angles(roll, pitch, yaw)
    }
}

/// Pose with three i.i.d. uniform angles on `[0, 2 pi)`.
pub fn random_pose<R: Rng + ?Sized>(rng: &mut R, center: Point3<f64>) -> ArrayPose {
    let orientation = [
        rng.random_range(0.0..TAU),
        rng.random_range(0.0..TAU),
        rng.random_range(0.0..TAU),
    ];
    ArrayPose::new(center, orientation)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    positions: Vec<Point3<f64>>,
    side: usize,
    spacing: f64,
}

impl ArrayGeometry {
    pub fn positions(&self) -> &[Point3<f64>] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Corner-to-corner extent `(m - 1) s sqrt(2)`.
    pub fn diagonal(&self) -> f64 {
        (self.side.saturating_sub(1)) as f64 * self.spacing * std::f64::consts::SQRT_2
    }

    pub fn transformed(&self, motion: &Isometry3<f64>) -> Self {
        Self {
            positions: self.positions.iter().map(|p| motion * p).collect(),
            ..self.clone()
        }
    }
}

fn integer_sqrt(n: usize) -> Option<usize> {
    let r = (n as f64).sqrt().round() as usize;
    (r * r == n).then_some(r)
}

pub fn build_square_array(
    n: usize,
    spacing: f64,
    pose: &ArrayPose,
) -> Result<ArrayGeometry, GeometryError> {
    let side = integer_sqrt(n)
        .filter(|&s| s > 0)
        .ok_or(GeometryError::NotPerfectSquare(n))?;
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(GeometryError::NonPositiveSpacing(spacing));
    }
    let rotation = pose.rotation();
    let offset = (side as f64 - 1.0) / 2.0;
    let mut positions = Vec::with_capacity(n);
    for row in 0..side {
        for col in 0..side {
            let local = Vector3::new(
                0.0,
                (col as f64 - offset) * spacing,
                (row as f64 - offset) * spacing,
            );
            positions.push(pose.center + rotation * local);
        }
    }
    Ok(ArrayGeometry {
        positions,
        side,
        spacing,
    })
}

/// `d_ij = |rx_i - tx_j|`, rows indexed by receive element.
pub fn pairwise_distances(
    tx: &ArrayGeometry,
    rx: &ArrayGeometry,
) -> Result<DMatrix<f64>, GeometryError> {
    let min_allowed = tx.spacing.min(rx.spacing) / 1000.0;
    let mut out = DMatrix::zeros(rx.len(), tx.len());
    for (i, r) in rx.positions.iter().enumerate() {
        for (j, t) in tx.positions.iter().enumerate() {
            let d = (r - t).norm();
            if d < min_allowed {
                return Err(GeometryError::OverlappingElements {
                    rx: i,
                    tx: j,
                    distance: d,
                });
            }
            out[(i, j)] = d;
        }
    }
    Ok(out)
}

/// Whether both arrays are small against the link distance; logs a warning
/// when an array diagonal exceeds a tenth of the distance.
pub fn check_far_field(tx: &ArrayGeometry, rx: &ArrayGeometry, distance: f64) -> bool {
    let limit = distance / 10.0;
    let ok = tx.diagonal() <= limit && rx.diagonal() <= limit;
    if !ok {
        log::warn!(
            "array diagonal ({:.3e} m tx, {:.3e} m rx) exceeds d/10 = {:.3e} m; \
             K-factor assumes arrays small against the distance",
            tx.diagonal(),
            rx.diagonal(),
            limit
        );
    }
    ok
}
