//! Compensated accumulation.  Reductions over configuration sums must be
//! reproducible bit-for-bit across runs and thread counts, so every final
//! reduction runs sequentially in a fixed order through these accumulators.

use num_complex::Complex64;

/// Neumaier's variant of Kahan summation: exact for the running
/// compensation even when the addend exceeds the partial sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Componentwise compensated complex accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct NeumaierC {
    re: Neumaier,
    im: Neumaier,
}

impl NeumaierC {
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_small_terms() {
        // 1 + 1e16·ulp-sized noise summed naively loses the noise entirely
        let mut acc = Neumaier::default();
        acc.add(1.0);
        for _ in 0..10_000 {
            acc.add(1e-20);
        }
        acc.add(-1.0);
        assert!((acc.value() - 1e-16).abs() < 1e-26);
    }
}
