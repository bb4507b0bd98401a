//! Multistatic sensor placement and the discretized imaging scene.

use crate::error::{Error, Result};
use crate::scalar::{norm3, Point3, Real};

/// Regular square grid of pixel centers, row-major, centered on the origin at zero height.
///
/// Pixel `k = row * points_per_side + col` sits at
/// `x1 = -L/2 + (col + 1/2) * spacing`, `x2 = -L/2 + (row + 1/2) * spacing`.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGrid<T> {
    side_length: T,
    points_per_side: usize,
    spacing: T,
    positions: Vec<Point3<T>>,
}

impl<T: Real> SceneGrid<T> {
    pub fn new(side_length: T, points_per_side: usize) -> Result<Self> {
        if !(side_length > T::zero()) || !side_length.is_finite() {
            return Err(Error::invalid("side_length", "must be positive and finite"));
        }
        if points_per_side == 0 {
            return Err(Error::invalid("points_per_side", "must be at least 1"));
        }
        let n = T::from_usize_lossy(points_per_side);
        let spacing = side_length / n;
        let half = side_length * T::half();
        let coord = |i: usize| -half + (T::from_usize_lossy(i) + T::half()) * spacing;
        let positions = (0..points_per_side)
            .flat_map(|row| (0..points_per_side).map(move |col| (row, col)))
            .map(|(row, col)| [coord(col), coord(row), T::zero()])
            .collect();
        Ok(Self {
            side_length,
            points_per_side,
            spacing,
            positions,
        })
    }

    pub fn side_length(&self) -> T {
        self.side_length
    }

    pub fn points_per_side(&self) -> usize {
        self.points_per_side
    }

    /// Pixel spacing `L / sqrt(K)`.
    pub fn spacing(&self) -> T {
        self.spacing
    }

    /// Number of pixels `K`.
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point3<T>] {
        &self.positions
    }

    pub fn position(&self, k: usize) -> Point3<T> {
        self.positions[k]
    }

    /// Index of the pixel whose center is closest to `(x1, x2)`, or `None` outside the square.
    pub fn nearest_index(&self, x1: T, x2: T) -> Option<usize> {
        let half = self.side_length * T::half();
        let locate = |x: T| -> Option<usize> {
            let u = ((x + half) / self.spacing).floor();
            if !u.is_finite() || u < T::zero() {
                return None;
            }
            let idx = u.to_usize()?;
            // the far edge belongs to the last pixel
            if idx == self.points_per_side && x <= half {
                Some(idx - 1)
            } else if idx < self.points_per_side {
                Some(idx)
            } else {
                None
            }
        };
        let col = locate(x1)?;
        let row = locate(x2)?;
        Some(row * self.points_per_side + col)
    }
}

/// Shorthand for [`SceneGrid::new`].
pub fn build_scene_grid<T: Real>(side_length: T, points_per_side: usize) -> Result<SceneGrid<T>> {
    SceneGrid::new(side_length, points_per_side)
}

/// Parameters of an equispaced circular-arc receiver layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcLayout<T> {
    /// Angular extent of the arc, radians in (0, 2π].
    pub aperture: T,
    /// Common receiver elevation angle seen from the scene center, radians.
    pub elevation: T,
    /// Horizontal distance of every receiver from the scene center, meters.
    pub ground_range: T,
    pub height: T,
}

/// Receiver and transmitter placement together with their unit look directions
/// (from the scene center toward each antenna).
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry<T> {
    receivers: Vec<Point3<T>>,
    transmitter: Point3<T>,
    receiver_looks: Vec<Point3<T>>,
    transmitter_look: Point3<T>,
    arc: Option<ArcLayout<T>>,
}

fn unit<T: Real>(p: &Point3<T>, what: &'static str) -> Result<Point3<T>> {
    let n = norm3(p);
    if !(n > T::zero()) || !n.is_finite() {
        return Err(Error::invalid(what, "antenna cannot sit at the scene center"));
    }
    Ok([p[0] / n, p[1] / n, p[2] / n])
}

impl<T: Real> Geometry<T> {
    /// Arbitrary (non-arc) placement. Closed-form bounds are not defined for such geometries.
    pub fn from_positions(receivers: Vec<Point3<T>>, transmitter: Point3<T>) -> Result<Self> {
        if receivers.len() < 2 {
            return Err(Error::invalid("receivers", "at least two receivers are required"));
        }
        let receiver_looks = receivers
            .iter()
            .map(|r| unit(r, "receivers"))
            .collect::<Result<Vec<_>>>()?;
        let transmitter_look = unit(&transmitter, "tx_position")?;
        Ok(Self {
            receivers,
            transmitter,
            receiver_looks,
            transmitter_look,
            arc: None,
        })
    }

    /// `n` receivers at azimuths `aperture * i / n`, all at the same ground range and height.
    pub fn arc(
        n: usize,
        aperture: T,
        ground_range: T,
        height: T,
        transmitter: Point3<T>,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("receivers", "at least two receivers are required"));
        }
        let two_pi = T::TAU();
        if !(aperture > T::zero() && aperture <= two_pi) {
            return Err(Error::invalid("aperture", "must lie in (0, 2π]"));
        }
        if !(ground_range > T::zero()) || !ground_range.is_finite() {
            return Err(Error::invalid("receiver_range", "must be positive and finite"));
        }
        if !height.is_finite() {
            return Err(Error::invalid("receiver_height", "must be finite"));
        }
        if transmitter[1] != T::zero() {
            return Err(Error::invalid(
                "tx_position",
                "arc layouts place the transmitter on the x1-axis (second coordinate 0)",
            ));
        }
        let elevation = (height / ground_range).atan();
        let nf = T::from_usize_lossy(n);
        let receivers: Vec<Point3<T>> = (0..n)
            .map(|i| {
                let theta = aperture * T::from_usize_lossy(i) / nf;
                [ground_range * theta.cos(), ground_range * theta.sin(), height]
            })
            .collect();
        let (ce, se) = (elevation.cos(), elevation.sin());
        let receiver_looks = (0..n)
            .map(|i| {
                let theta = aperture * T::from_usize_lossy(i) / nf;
                [ce * theta.cos(), ce * theta.sin(), se]
            })
            .collect();
        let transmitter_look = unit(&transmitter, "tx_position")?;
        Ok(Self {
            receivers,
            transmitter,
            receiver_looks,
            transmitter_look,
            arc: Some(ArcLayout {
                aperture,
                elevation,
                ground_range,
                height,
            }),
        })
    }

    pub fn receiver_count(&self) -> usize {
        self.receivers.len()
    }

    pub fn receivers(&self) -> &[Point3<T>] {
        &self.receivers
    }

    pub fn receiver(&self, i: usize) -> Point3<T> {
        self.receivers[i]
    }

    pub fn transmitter(&self) -> Point3<T> {
        self.transmitter
    }

    pub fn receiver_looks(&self) -> &[Point3<T>] {
        &self.receiver_looks
    }

    pub fn receiver_look(&self, i: usize) -> Point3<T> {
        self.receiver_looks[i]
    }

    pub fn transmitter_look(&self) -> Point3<T> {
        self.transmitter_look
    }

    /// Arc parameters, `None` for geometries built from explicit positions.
    pub fn arc_layout(&self) -> Option<&ArcLayout<T>> {
        self.arc.as_ref()
    }

    /// Azimuth of receiver `i`'s look direction, radians.
    pub fn receiver_azimuth(&self, i: usize) -> T {
        let l = self.receiver_looks[i];
        l[1].atan2(l[0])
    }
}

/// Shorthand for [`Geometry::arc`].
pub fn build_arc_geometry<T: Real>(
    n: usize,
    aperture: T,
    ground_range: T,
    height: T,
    transmitter: Point3<T>,
) -> Result<Geometry<T>> {
    Geometry::arc(n, aperture, ground_range, height, transmitter)
}
