//! Halton points with an optional seeded Cranley-Patterson rotation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

#[derive(Debug, Clone)]
pub struct Halton {
    dim: usize,
    index: u64,
    shift: Vec<f64>,
}

impl Halton {
    pub fn new(dim: usize) -> Halton {
        assert!(dim >= 1 && dim <= PRIMES.len(), "Halton dimension {dim} unsupported");
        // index 0 is the origin in every coordinate; start past it
        Halton { dim, index: 1, shift: vec![0.0; dim] }
    }

    /// Rotated by a shift drawn from `seed`; seed 0 keeps the plain sequence.
    pub fn seeded(dim: usize, seed: u64) -> Halton {
        let mut h = Halton::new(dim);
        if seed != 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            h.shift = (0..dim).map(|_| rng.random::<f64>()).collect();
        }
        h
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let i = self.index;
        self.index += 1;
        (0..self.dim)
            .map(|d| {
                let v = radical_inverse(i, PRIMES[d]) + self.shift[d];
                v - v.floor()
            })
            .collect()
    }
}

impl Iterator for Halton {
    type Item = Vec<f64>;
    fn next(&mut self) -> Option<Vec<f64>> {
        Some(self.next_point())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_points_base_two_and_three() {
        let pts: Vec<Vec<f64>> = Halton::new(2).take(3).collect();
        assert_eq!(pts[0], vec![0.5, 1.0 / 3.0]);
        assert_eq!(pts[1], vec![0.25, 2.0 / 3.0]);
        assert_eq!(pts[2], vec![0.75, 1.0 / 9.0]);
    }

    #[test]
    fn points_fill_unit_cube_evenly() {
        let n = 4096;
        let mut counts = [0usize; 16];
        for p in Halton::seeded(3, 7).take(n) {
            assert!(p.iter().all(|v| (0.0..1.0).contains(v)));
            counts[(p[0] * 4.0) as usize * 4 + (p[2] * 4.0) as usize] += 1;
        }
        for c in counts {
            assert!((c as f64 - 256.0).abs() < 16.0, "count {c}");
        }
    }

    #[test]
    fn seeded_sequences_repeat() {
        let a: Vec<Vec<f64>> = Halton::seeded(4, 11).take(10).collect();
        let b: Vec<Vec<f64>> = Halton::seeded(4, 11).take(10).collect();
        assert_eq!(a, b);
    }
}
