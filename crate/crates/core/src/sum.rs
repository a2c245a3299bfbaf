//! Exact floating-point summation.
//!
//! Shewchuk's non-overlapping partials: the returned value is the sum of the
//! inputs correctly rounded to `f64`, independent of input order.

use alloc::vec::Vec;

/// Correctly rounded sum of `values`.
pub fn exact_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = ExactAccumulator::default();
    values.into_iter().for_each(|x| acc.add(x));
    acc.value()
}

/// Running exact sum; [`ExactAccumulator::value`] is the correctly rounded
/// total of everything added so far.
#[derive(Debug, Clone, Default)]
pub struct ExactAccumulator {
    partials: Vec<f64>,
}

impl ExactAccumulator {
    pub fn add(&mut self, mut x: f64) {
        let partials = &mut self.partials;
        let mut kept = 0;
        for k in 0..partials.len() {
            let mut y = partials[k];
            if libm::fabs(x) < libm::fabs(y) {
                core::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        partials.truncate(kept);
        partials.push(x);
    }

    pub fn value(&self) -> f64 {
        round_partials(&self.partials)
    }
}

fn round_partials(partials: &[f64]) -> f64 {
    let mut n = partials.len();
    if n == 0 {
        return 0.0;
    }
    n -= 1;
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        let x = hi;
        n -= 1;
        let y = partials[n];
        hi = x + y;
        let yr = hi - x;
        lo = y - yr;
        if lo != 0.0 {
            break;
        }
    }
    // Half-way case: the remaining partials decide the rounding direction.
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        if y == x - hi {
            hi = x;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn cancels_exactly() {
        assert_eq!(exact_sum(vec![1e100, 1.0, -1e100]), 1.0);
        assert_eq!(exact_sum(vec![0.1; 10]), 1.0);
        assert_eq!(exact_sum(Vec::new()), 0.0);
    }

    #[test]
    fn order_independent() {
        let a = vec![0.1, 0.2, 0.3, 1e-17, 5e15, -5e15, 0.7];
        let mut b = a.clone();
        b.reverse();
        assert_eq!(exact_sum(a), exact_sum(b));
    }
}
