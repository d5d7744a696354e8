//! Correctly rounded floating-point summation.
//!
//! Risk values are means of many per-point losses. Accumulating them with a
//! plain running sum makes the result depend on the iteration order, which in
//! turn makes benchmarks irreproducible under data shuffles. `fsum` computes
//! the exact (correctly rounded) sum of a sequence via Shewchuk's expansion
//! arithmetic, so the result depends only on the multiset of inputs.

/// Exact sum of a slice of finite doubles.
///
/// Maintains a list of non-overlapping partials; the returned value is the
/// exact mathematical sum rounded once to the nearest double. Inputs must be
/// finite; a non-finite input poisons the result in the usual IEEE way.
pub fn fsum(values: &[f64]) -> f64 {
    let mut partials: Vec<f64> = Vec::with_capacity(16);
    for &v in values {
        let mut x = v;
        if !x.is_finite() {
            // Give up on exactness; propagate inf/nan like a naive sum would.
            return values.iter().sum();
        }
        let mut i = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        partials.truncate(i);
        partials.push(x);
    }
    round_partials(&partials)
}

/// Exact mean: correctly rounded sum divided by `n`.
pub fn fmean(values: &[f64]) -> f64 {
    fsum(values) / values.len() as f64
}

// Final rounding of the non-overlapping partials, with the half-way
// correction so the result is the nearest double to the exact sum.
fn round_partials(partials: &[f64]) -> f64 {
    let n = partials.len();
    if n == 0 {
        return 0.0;
    }
    let mut hi = partials[n - 1];
    let mut lo = 0.0;
    let mut i = n - 1;
    while i > 0 {
        i -= 1;
        let x = hi;
        let y = partials[i];
        hi = x + y;
        let yr = hi - x;
        lo = y - yr;
        if lo != 0.0 {
            break;
        }
    }
    // If the residual would round hi away from the exact value, and the next
    // partial pushes in the same direction, nudge by one ulp (round-half-even
    // over the full expansion, not just the top term).
    if i > 0 && ((lo < 0.0 && partials[i - 1] < 0.0) || (lo > 0.0 && partials[i - 1] > 0.0)) {
        let y2 = lo * 2.0;
        let x2 = hi + y2;
        let yr = x2 - hi;
        if y2 == yr {
            hi = x2;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cancellation_is_exact() {
        assert_eq!(fsum(&[1e100, 1.0, -1e100]), 1.0);
        assert_eq!(fsum(&[1e16, 1.0, -1e16]), 1.0);
        assert_eq!(fsum(&[]), 0.0);
        assert_eq!(fsum(&[0.0]), 0.0);
    }

    #[test]
    fn matches_integer_arithmetic() {
        // Doubles holding small integers sum exactly; compare against i64.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let xs: Vec<f64> = (0..57).map(|_| rng.random_range(-1000..1000) as f64).collect();
            let exact: i64 = xs.iter().map(|&x| x as i64).sum();
            assert_eq!(fsum(&xs), exact as f64);
        }
    }

    #[test]
    fn permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut xs: Vec<f64> = (0..301)
            .map(|_| rng.random::<f64>() * 10f64.powi(rng.random_range(-12..12)))
            .collect();
        let reference = fsum(&xs);
        for _ in 0..50 {
            xs.shuffle(&mut rng);
            assert_eq!(fsum(&xs), reference);
        }
    }

    #[test]
    fn half_ulp_ladder() {
        // Classic stress case: 1 + eps/2 repeated; naive summation loses every
        // increment, exact summation keeps them all.
        let eps = f64::EPSILON / 2.0;
        let mut xs = vec![1.0];
        xs.extend(std::iter::repeat(eps).take(1 << 12));
        let expected = 1.0 + (1 << 12) as f64 * eps;
        assert_eq!(fsum(&xs), expected);
    }

    #[test]
    fn mean_of_ones_is_one() {
        let xs = vec![1.0; 12345];
        assert_eq!(fsum(&xs), 12345.0);
        assert_eq!(fmean(&xs), 1.0);
    }
}
