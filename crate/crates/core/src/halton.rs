//! Halton low-discrepancy sequences, used to place kernel centers
//! quasi-uniformly inside boxes.

/// Radical-inverse of `index` in the given prime base; the classic van der
/// Corput construction. `halton(1, 2) = 1/2`, `halton(1, 3) = 1/3`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    debug_assert!(base >= 2);
    // exact rational arithmetic, one final division: digit-reversal in the
    // given base never accumulates rounding error this way
    let base = base as u128;
    let mut numerator: u128 = 0;
    let mut denominator: u128 = 1;
    while index > 0 {
        numerator = numerator * base + index as u128 % base;
        denominator *= base;
        index /= base as u64;
    }
    numerator as f64 / denominator as f64
}

/// First `count` primes, the standard per-coordinate bases.
pub fn first_primes(count: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(count);
    let mut candidate: u64 = 2;
    while primes.len() < count {
        if primes.iter().all(|&p| candidate % p != 0) {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

/// A multi-dimensional Halton stream over the unit cube `[0,1)^dim`.
/// Deterministic: the `seed` only offsets the starting index, so the same
/// seed always replays the same points.
#[derive(Debug, Clone)]
pub struct HaltonSampler {
    bases: Vec<u64>,
    index: u64,
}

impl HaltonSampler {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self {
            bases: first_primes(dim),
            index: 1 + seed,
        }
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let i = self.index;
        self.index += 1;
        self.bases
            .iter()
            .map(|&b| radical_inverse(i, b))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base2_prefix() {
        let expected = [
            1.0 / 2.0,
            1.0 / 4.0,
            3.0 / 4.0,
            1.0 / 8.0,
            5.0 / 8.0,
            3.0 / 8.0,
            7.0 / 8.0,
            1.0 / 16.0,
            9.0 / 16.0,
        ];
        for (i, want) in expected.iter().enumerate() {
            assert_eq!(radical_inverse(i as u64 + 1, 2), *want);
        }
    }

    #[test]
    fn base3_prefix() {
        let expected = [
            1.0 / 3.0,
            2.0 / 3.0,
            1.0 / 9.0,
            4.0 / 9.0,
            7.0 / 9.0,
            2.0 / 9.0,
            5.0 / 9.0,
            8.0 / 9.0,
            1.0 / 27.0,
        ];
        for (i, want) in expected.iter().enumerate() {
            assert_eq!(radical_inverse(i as u64 + 1, 3), *want);
        }
    }

    #[test]
    fn sampler_first_point_is_half_third() {
        let mut s = HaltonSampler::new(2, 0);
        assert_eq!(s.next_point(), vec![0.5, 1.0 / 3.0]);
    }

    #[test]
    fn primes() {
        assert_eq!(first_primes(6), vec![2, 3, 5, 7, 11, 13]);
    }

    #[test]
    fn seed_offsets_start() {
        let mut a = HaltonSampler::new(1, 3);
        assert_eq!(a.next_point(), vec![radical_inverse(4, 2)]);
    }
}
