//! Deep-water Gerstner wave surface.
//!
//! Elevation `h` is positive up, so the NED surface sits at `z = -h`.
//! Per component: `k = 2 pi / wavelength`, `omega = sqrt(g k)`,
//! `theta = k (d . x) - omega t + phase`, elevation `A cos theta`,
//! horizontal displacement `-Q A d sin theta`.

use serde::{Deserialize, Serialize};

use super::EnvError;
use crate::geom::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveComponent {
    pub amplitude: f64,
    pub wavelength: f64,
    pub direction: [f64; 2],
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub steepness: f64,
}

impl WaveComponent {
    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength
    }

    pub fn angular_frequency(&self, gravity: f64) -> f64 {
        (gravity * self.wavenumber()).sqrt()
    }

    fn unit_direction(&self) -> [f64; 2] {
        let n = self.direction[0].hypot(self.direction[1]);
        [self.direction[0] / n, self.direction[1] / n]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveField {
    pub components: Vec<WaveComponent>,
    #[serde(default = "default_gravity")]
    pub gravity: f64,
}

fn default_gravity() -> f64 {
    9.81
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveSample {
    pub surface_height: f64,
    /// Unit surface normal pointing up (negative z in NED).
    pub normal: Vec3,
    pub orbital_velocity: Vec3,
    pub horizontal_displacement: [f64; 2],
}

impl WaveField {
    pub fn flat() -> Self {
        Self { components: Vec::new(), gravity: default_gravity() }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if !(self.gravity > 0.0) {
            return Err(EnvError::InvalidWave { index: 0, message: "gravity must be positive".into() });
        }
        for (index, c) in self.components.iter().enumerate() {
            let bad = |message: &str| Err(EnvError::InvalidWave { index, message: message.into() });
            if !(c.wavelength > 0.0) {
                return bad("wavelength must be positive");
            }
            if !(c.amplitude >= 0.0) || !c.phase.is_finite() {
                return bad("amplitude must be non-negative and phase finite");
            }
            if !(0.0..=1.0).contains(&c.steepness) {
                return bad("steepness must lie in [0, 1]");
            }
            if !(c.direction[0].hypot(c.direction[1]) > 0.0) {
                return bad("direction must be non-zero");
            }
            if c.steepness * c.wavenumber() * c.amplitude > 1.0 {
                return bad("steepness * k * amplitude exceeds 1 (self-intersecting surface)");
            }
        }
        Ok(())
    }

    /// Surface elevation only.
    pub fn height(&self, x: f64, y: f64, t: f64) -> f64 {
        self.components
            .iter()
            .map(|c| {
                let d = c.unit_direction();
                let th = c.wavenumber() * (d[0] * x + d[1] * y) - c.angular_frequency(self.gravity) * t + c.phase;
                c.amplitude * th.cos()
            })
            .sum()
    }

    /// Surface quantities at reference point (x, y). `z` is the NED depth
    /// at which orbital velocity is evaluated.
    pub fn sample(&self, x: f64, y: f64, z: f64, t: f64) -> WaveSample {
        let mut h = 0.0;
        let mut disp = [0.0; 2];
        // Tangents of the parametric surface P(x0, y0) = (x0 + Dx, y0 + Dy, -h).
        let mut tx = Vec3::new(1.0, 0.0, 0.0);
        let mut ty = Vec3::new(0.0, 1.0, 0.0);
        let mut vel = Vec3::zeros();
        let depth = z.max(0.0);
        for c in &self.components {
            let d = c.unit_direction();
            let k = c.wavenumber();
            let w = c.angular_frequency(self.gravity);
            let th = k * (d[0] * x + d[1] * y) - w * t + c.phase;
            let (s, co) = th.sin_cos();
            let a = c.amplitude;
            let q = c.steepness;
            h += a * co;
            disp[0] -= q * a * d[0] * s;
            disp[1] -= q * a * d[1] * s;
            tx += Vec3::new(-q * a * k * d[0] * d[0] * co, -q * a * k * d[0] * d[1] * co, a * k * d[0] * s);
            ty += Vec3::new(-q * a * k * d[0] * d[1] * co, -q * a * k * d[1] * d[1] * co, a * k * d[1] * s);
            let decay = (-k * depth).exp();
            let horiz = a * w * co * decay;
            vel += Vec3::new(horiz * d[0], horiz * d[1], -a * w * s * decay);
        }
        let mut n = tx.cross(&ty).normalize();
        if n.z > 0.0 {
            n = -n;
        }
        WaveSample { surface_height: h, normal: n, orbital_velocity: vel, horizontal_displacement: disp }
    }
}
