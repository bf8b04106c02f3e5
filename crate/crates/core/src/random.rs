//! Seeded random radial fields.
//!
//! The generator is PCG32 (XSH-RR output on a 64-bit LCG) created with
//! `Pcg32::new(seed, stream)`. A uniform draw on `[0, 1)` combines two
//! consecutive 32-bit outputs `lo`, `hi` as `((hi << 32 | lo) >> 11) · 2⁻⁵³`.
//! Each field consumes five draws, in order `c0, c1, c2, c3, e`, and is
//!
//! `u(r) = 10^e · (1 - ρ²) · (c0 + Σ_{k=1..3} c_k cos(kπρ))`, `ρ = r/R`,
//!
//! with `e ∈ [-3, 0)`. Positive fields use `c0 ∈ [1, 2)`, `c_k ∈ [-0.3, 0.3)`;
//! signed fields use `c0 ∈ [-0.5, 0.5)`, `c_k ∈ [-1, 1)`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand_core::RngCore;
use rand_pcg::Pcg32;

use crate::grid::{Field, RadialGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldSampler {
    pub seed: u64,
    pub stream: u64,
}

/// Uniform `[0, 1)` draw with 53 random bits.
pub fn uniform(rng: &mut Pcg32) -> f64 {
    let lo = rng.next_u32() as u64;
    let hi = rng.next_u32() as u64;
    ((hi << 32 | lo) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn between(rng: &mut Pcg32, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform(rng)
}

impl FieldSampler {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> Pcg32 {
        Pcg32::new(self.seed, self.stream)
    }

    pub fn positive_fields(&self, grid: &Arc<RadialGrid>, count: usize) -> Vec<Field> {
        self.fields(grid, count, (1.0, 2.0), 0.3)
    }

    pub fn signed_fields(&self, grid: &Arc<RadialGrid>, count: usize) -> Vec<Field> {
        self.fields(grid, count, (-0.5, 0.5), 1.0)
    }

    fn fields(&self, grid: &Arc<RadialGrid>, count: usize, c0: (f64, f64), ck: f64) -> Vec<Field> {
        let mut rng = self.rng();
        (0..count)
            .map(|_| {
                let mut c = [0.0; 4];
                c[0] = between(&mut rng, c0.0, c0.1);
                for x in c.iter_mut().skip(1) {
                    *x = between(&mut rng, -ck, ck);
                }
                let scale = 10f64.powf(between(&mut rng, -3.0, 0.0));
                let r_max = grid.radius();
                Field::from_fn(grid, |r| {
                    let rho = r / r_max;
                    let modes: f64 = (1..4).map(|k| c[k] * (k as f64 * PI * rho).cos()).sum();
                    scale * (1.0 - rho * rho) * (c[0] + modes)
                })
                .expect("random field is finite")
            })
            .collect()
    }
}
