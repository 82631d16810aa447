use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::chart::Chart;

/// Fraction of each non-periodic interval kept clear of sample points, so
/// finite-difference stencils stay inside the box.
pub const BOX_MARGIN: f64 = 0.02;

/// Seeded, reproducible sample points in a chart box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Sampler {
    pub seed: u64,
    pub count: usize,
}

impl Sampler {
    pub fn new(seed: u64, count: usize) -> Self {
        Sampler { seed, count }
    }

    pub fn points(&self, chart: &Chart) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.count)
            .map(|_| {
                chart
                    .intervals()
                    .iter()
                    .map(|iv| {
                        let (lo, hi) = if iv.periodic {
                            (iv.lo, iv.hi)
                        } else {
                            let pad = BOX_MARGIN * iv.width();
                            (iv.lo + pad, iv.hi - pad)
                        };
                        rng.random_range(lo..hi)
                    })
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffgeo::chart::Interval;

    #[test]
    fn reproducible_and_inside() {
        let c = Chart::new(
            vec!["t", "x"],
            vec![Interval::new(-1.0, 1.0), Interval::periodic(0.0, 1.0)],
        )
        .unwrap();
        let a = Sampler::new(7, 50).points(&c);
        let b = Sampler::new(7, 50).points(&c);
        assert_eq!(a, b);
        assert_ne!(a, Sampler::new(8, 50).points(&c));
        assert!(a
            .iter()
            .all(|p| p[0] > -0.97 && p[0] < 0.97 && c.contains(p)));
    }
}
