use serde::{Deserialize, Serialize};

/// Bloch vector of a pure qubit state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl QubitState {
    /// `|↑⟩`, the bright state.
    pub const UP: QubitState = QubitState { x: 0.0, y: 0.0, z: 1.0 };
    /// `|↓⟩`, the dark state.
    pub const DOWN: QubitState = QubitState { x: 0.0, y: 0.0, z: -1.0 };

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Probability of reading out `|↑⟩`.
    pub fn bright_population(&self) -> f64 {
        (0.5 * (1.0 + self.z)).clamp(0.0, 1.0)
    }

    /// Azimuth in the equatorial plane.
    pub fn azimuth(&self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Right-handed rotation by `angle` about +x.
    pub fn rotate_x(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        QubitState { x: self.x, y: self.y * c - self.z * s, z: self.y * s + self.z * c }
    }

    /// Right-handed rotation by `angle` about +z.
    pub fn rotate_z(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        QubitState { x: self.x * c - self.y * s, y: self.x * s + self.y * c, z: self.z }
    }

    /// Right-handed rotation by `angle` about the unit vector `axis`
    /// (Rodrigues' formula).
    pub fn rotate(self, axis: [f64; 3], angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let [ax, ay, az] = axis;
        let dot = ax * self.x + ay * self.y + az * self.z;
        let cross = [ay * self.z - az * self.y, az * self.x - ax * self.z, ax * self.y - ay * self.x];
        QubitState {
            x: self.x * c + cross[0] * s + ax * dot * (1.0 - c),
            y: self.y * c + cross[1] * s + ay * dot * (1.0 - c),
            z: self.z * c + cross[2] * s + az * dot * (1.0 - c),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn close(a: QubitState, b: QubitState) -> bool {
        (a.x - b.x).abs() < 1e-12 && (a.y - b.y).abs() < 1e-12 && (a.z - b.z).abs() < 1e-12
    }

    #[test]
    fn quarter_turns() {
        let s = QubitState::UP.rotate_x(FRAC_PI_2);
        assert!(close(s, QubitState { x: 0.0, y: -1.0, z: 0.0 }));
        assert!(close(s.rotate_z(FRAC_PI_2), QubitState { x: 1.0, y: 0.0, z: 0.0 }));
        assert!(close(s.rotate_x(FRAC_PI_2), QubitState::DOWN));
    }

    #[test]
    fn rodrigues_matches_axis_rotations() {
        let s = QubitState { x: 0.3, y: -0.5, z: 0.81 };
        assert!(close(s.rotate([1.0, 0.0, 0.0], 0.7), s.rotate_x(0.7)));
        assert!(close(s.rotate([0.0, 0.0, 1.0], -1.3), s.rotate_z(-1.3)));
    }

    #[test]
    fn pi_x_then_pi_z_is_pi_y() {
        let s = QubitState { x: 0.6, y: 0.0, z: 0.8 };
        let composite = s.rotate_x(PI).rotate_z(PI);
        assert!(close(composite, s.rotate([0.0, 1.0, 0.0], PI)));
    }
}
