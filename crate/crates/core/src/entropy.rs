use crate::error::{Result, ScadError};

/// Slack tolerated outside `[0, 1]` before an argument counts as a domain error.
pub const PROBABILITY_SLACK: f64 = 1e-12;

/// Clamps `x` into `[0, 1]`, rejecting anything further out than [`PROBABILITY_SLACK`].
pub fn clamp_probability(x: f64, what: &'static str) -> Result<f64> {
    if x.is_nan() || x < -PROBABILITY_SLACK || x > 1.0 + PROBABILITY_SLACK {
        return Err(ScadError::Domain {
            what,
            value: x,
            range: "[0, 1]",
        });
    }
    Ok(x.clamp(0.0, 1.0))
}

/// Binary Shannon entropy in bits, with `h(0) = h(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    clamp_probability(x, "binary entropy argument").map(h)
}

/// Unchecked binary entropy for arguments already known to lie in `[0, 1]`.
#[inline]
pub(crate) fn h(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let flo = f(lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (f(mid) > 0.0) == (flo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn boundary_values() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
    }

    #[test]
    fn half_bit_crossing_near_0_11() {
        // root of h(Q) = 1/2 found by bisection: 0.1100278644...
        let root = bisect(|q| h(q) - 0.5, 1e-6, 0.5);
        assert!((root - 0.110_027_864_4).abs() < 1e-9, "{root}");
        let v = binary_entropy(0.11).unwrap();
        assert!((v - 0.4999).abs() < 1e-3, "{v}");
        assert!(v < 0.5);
    }

    #[test]
    fn slack_and_errors() {
        assert_eq!(binary_entropy(-1e-13).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0 + 1e-13).unwrap(), 0.0);
        assert!(binary_entropy(-1e-9).is_err());
        assert!(binary_entropy(1.01).is_err());
        assert!(binary_entropy(f64::NAN).is_err());
    }

    #[test]
    fn symmetric_on_grid() {
        for k in 0..=1000 {
            let x = k as f64 / 1000.0;
            assert!((h(x) - h(1.0 - x)).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn concave(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            prop_assert!(h(0.5 * (a + b)) + 1e-12 >= 0.5 * (h(a) + h(b)));
        }
    }
}
