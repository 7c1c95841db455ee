//! Geometric predicates between the UAV, the ground target and cylindrical
//! obstacles. All functions are pure and generic over the scalar type.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Solid vertical cylinder standing on the ground plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cylinder<T> {
    pub center: [T; 2],
    pub radius: T,
    pub height: T,
}

impl<T: Scalar> Cylinder<T> {
    pub fn new(center: [T; 2], radius: T, height: T) -> Self {
        Self { center, radius, height }
    }

    /// Point-in-solid test, boundary inclusive.
    pub fn contains(&self, p: [T; 3]) -> bool {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        dx * dx + dy * dy <= self.radius * self.radius && p[2] <= self.height && p[2] >= T::zero()
    }

    /// Signed distance-like margin to the surface: negative inside.
    ///
    /// Not a Euclidean distance near the rim, but its zero set is the
    /// cylinder surface and its magnitude bounds the distance from below.
    pub fn surface_margin(&self, p: [T; 3]) -> T {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        let radial = (dx * dx + dy * dy).sqrt() - self.radius;
        let vertical = (p[2] - self.height).max(-p[2]);
        radial.max(vertical)
    }
}

/// Shape of the camera footprint on the ground.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FovShape {
    /// Axis-aligned square of side `d_FOV`.
    #[default]
    Square,
    /// Disk of diameter `d_FOV`.
    Circle,
}

/// Footprint diameter `2 z tan(theta)`.
pub fn fov_diameter<T: Scalar>(z: T, theta_fov: T) -> Result<T> {
    if !(theta_fov < T::FRAC_PI_2()) || theta_fov <= T::zero() {
        return Err(Error::Domain(format!("theta_fov must lie in (0, pi/2), got {theta_fov}")));
    }
    if z < T::zero() {
        return Err(Error::Domain(format!("altitude must be non-negative, got {z}")));
    }
    Ok(T::lit(2.0) * z * theta_fov.tan())
}

/// Whether the ground target lies inside the UAV footprint (boundary inclusive).
pub fn visible<T: Scalar>(uav: [T; 3], target: [T; 2], theta_fov: T, shape: FovShape) -> bool {
    let Ok(d) = fov_diameter(uav[2].max(T::zero()), theta_fov) else {
        return false;
    };
    // Absorb rounding in tan() so grid points exactly on the edge count.
    let half = d / T::lit(2.0) * (T::one() + T::lit(8.0) * T::epsilon());
    let dx = target[0] - uav[0];
    let dy = target[1] - uav[1];
    match shape {
        FovShape::Square => dx.abs() <= half && dy.abs() <= half,
        FovShape::Circle => dx * dx + dy * dy <= half * half,
    }
}

/// UAV inside an obstacle: planar distance within the radius and not above it.
pub fn collides<T: Scalar>(uav: [T; 3], obstacle: &Cylinder<T>) -> bool {
    let dx = uav[0] - obstacle.center[0];
    let dy = uav[1] - obstacle.center[1];
    (dx * dx + dy * dy).sqrt() <= obstacle.radius && uav[2] <= obstacle.height
}

/// Obstruction test from a two-condition closed form.
///
/// The second condition omits the UAV-relative terms of a point-to-line
/// distance, so it reports obstruction for cylinders well away from the
/// sight line. Kept for comparison; [`obstruction_geometric`] is the
/// default. When `x_T == x_D` the formula divides by zero and the geometric
/// predicate is used instead.
pub fn obstruction_literal<T: Scalar>(uav: [T; 3], target: [T; 2], obstacle: &Cylinder<T>) -> bool {
    let [xd, yd, zd] = uav;
    let [xt, yt] = target;
    let [xo, yo] = obstacle.center;
    let ddx = xt - xd;
    if ddx == T::zero() {
        return obstruction_geometric(uav, target, obstacle);
    }
    let ddy = yt - yd;
    let cond_height = zd * (-xo + xd) / ddx + zd <= obstacle.height;
    let cond_radius = (ddx * yo + ddy * xo) / (ddx * ddx + ddy * ddy).sqrt() <= obstacle.radius;
    cond_height && cond_radius
}

/// Exact segment/solid-cylinder intersection for the sight line from the
/// UAV `(x_D, y_D, z_D)` to the target on the ground `(x_T, y_T, 0)`.
///
/// With the segment parametrised by `s ∈ [0, 1]`, the planar part is inside
/// the disk on the root interval of a quadratic and the height condition
/// `z_D (1 - s) <= h` holds for `s >= 1 - h / z_D`. The segment hits the
/// cylinder iff the two intervals overlap inside `[0, 1]`.
pub fn obstruction_geometric<T: Scalar>(uav: [T; 3], target: [T; 2], obstacle: &Cylinder<T>) -> bool {
    let zero = T::zero();
    let one = T::one();
    let ax = uav[0] - obstacle.center[0];
    let ay = uav[1] - obstacle.center[1];
    let dx = target[0] - uav[0];
    let dy = target[1] - uav[1];
    let r2 = obstacle.radius * obstacle.radius;

    // Height window.
    let zd = uav[2];
    let s_height = if zd <= obstacle.height { zero } else { one - obstacle.height / zd };
    if s_height > one {
        return false;
    }

    // Planar window.
    let a = dx * dx + dy * dy;
    let b = ax * dx + ay * dy;
    let c = ax * ax + ay * ay - r2;
    let (s_lo, s_hi) = if a == zero {
        if c > zero {
            return false;
        }
        (zero, one)
    } else {
        let disc = b * b - a * c;
        if disc < zero {
            return false;
        }
        let root = disc.sqrt();
        ((-b - root) / a, (-b + root) / a)
    };

    let lo = s_lo.max(zero).max(s_height);
    let hi = s_hi.min(one);
    lo <= hi
}
