//! Deterministic low-discrepancy sampling of phase-space boxes.
//!
//! A Halton sequence over the four phase-space coordinates, offset by the
//! seed, so identical (box, seed, count) triples always produce identical
//! point sets regardless of threading.

use crate::profile::Profile;
use crate::symbols::PhasePoint;

/// Radical-inverse in the given base.
fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let bf = base as f64;
    while i > 0 {
        f /= bf;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

const BASES: [u64; 4] = [2, 3, 5, 7];

/// Axis-aligned phase-space box sampler.
#[derive(Clone, Debug)]
pub struct BoxSampler {
    pub lo: [f64; 4],
    pub hi: [f64; 4],
    pub seed: u64,
    index: u64,
}

impl BoxSampler {
    /// Bounds ordered `(x1, x2, xi1, xi2)`.
    pub fn new(lo: [f64; 4], hi: [f64; 4], seed: u64) -> Self {
        assert!(lo.iter().zip(hi.iter()).all(|(a, b)| a <= b));
        BoxSampler {
            lo,
            hi,
            seed,
            index: 0,
        }
    }

    /// The `i`-th point of the stream (independent of iteration state).
    pub fn point_at(&self, i: u64) -> PhasePoint {
        let k = 1 + self.seed.wrapping_add(i);
        let mut c = [0.0f64; 4];
        for d in 0..4 {
            let t = radical_inverse(k, BASES[d]);
            c[d] = self.lo[d] + (self.hi[d] - self.lo[d]) * t;
        }
        PhasePoint::new(c[0], c[1], c[2], c[3])
    }

    /// Smallest value of `xi1^2 + xi2^2 + b^2` over the box, by interval
    /// arithmetic in the momenta and a dense scan of `b` over the `x2` range.
    pub fn min_gap_sq(&self, profile: &Profile) -> f64 {
        let int_min_sq = |lo: f64, hi: f64| -> f64 {
            if lo <= 0.0 && hi >= 0.0 {
                0.0
            } else {
                lo.abs().min(hi.abs()).powi(2)
            }
        };
        let m1 = int_min_sq(self.lo[2], self.hi[2]);
        let m2 = int_min_sq(self.lo[3], self.hi[3]);
        let n = 20_001;
        let mut bmin = f64::INFINITY;
        for i in 0..n {
            let x2 = self.lo[1] + (self.hi[1] - self.lo[1]) * i as f64 / (n - 1) as f64;
            bmin = bmin.min(profile.b(x2).abs());
        }
        m1 + m2 + bmin * bmin
    }

    /// True when the box stays clear of the degenerate set with the given
    /// margin (the pointwise eigenvalue-separation condition).
    pub fn satisfies_cond1(&self, profile: &Profile, gap_tol: f64) -> bool {
        self.min_gap_sq(profile).sqrt() >= gap_tol
    }

    /// True when the `xi1` interval excludes zero (one-sided momentum).
    pub fn satisfies_cond2(&self) -> bool {
        self.lo[2] > 0.0 || self.hi[2] < 0.0
    }
}

impl Iterator for BoxSampler {
    type Item = PhasePoint;
    fn next(&mut self) -> Option<PhasePoint> {
        let p = self.point_at(self.index);
        self.index += 1;
        Some(p)
    }
}
