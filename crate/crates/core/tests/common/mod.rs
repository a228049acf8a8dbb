#![allow(dead_code)]

use snowvis::io::LidarPoint;

/// Small deterministic generator so fixtures do not depend on a RNG crate version.
pub struct Lcg(u64);

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Self(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) | 1)
    }

    pub fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_f64() * n as f64) as usize).min(n - 1)
    }
}

pub fn point(x: f32, y: f32, z: f32) -> LidarPoint {
    LidarPoint::new(x, y, z, 0.0)
}

pub fn alpha() -> f64 {
    0.085f64.to_radians()
}
