//! Bracketing bisection on monotone predicates.

/// Outcome of a predicate bisection: `pred(lo) == false`, `pred(hi) == true`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub iterations: usize,
}

impl Bracket {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Shrinks `[lo, hi]` around the switch point of a predicate that is false
/// at `lo` and true at `hi` (and monotone in between) until the bracket is
/// narrower than `rel_tol * hi` or `abs_tol`.
pub fn bisect_predicate<F>(mut lo: f64, mut hi: f64, rel_tol: f64, abs_tol: f64, pred: F) -> Bracket
where
    F: Fn(f64) -> bool,
{
    debug_assert!(lo <= hi);
    let mut iterations = 0;
    while hi - lo > (rel_tol * hi.abs()).max(abs_tol) && iterations < 400 {
        // geometric midpoint when the bracket spans decades
        let mid = if lo > 0.0 && hi / lo > 4.0 {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    Bracket { lo, hi, iterations }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let b = bisect_predicate(0.0, 2.0, 1e-12, 0.0, |x| x * x >= 2.0);
        assert!((b.hi - 2f64.sqrt()).abs() < 1e-11);
        assert!(b.lo * b.lo < 2.0 && b.hi * b.hi >= 2.0);
    }

    #[test]
    fn geometric_steps_across_decades() {
        let b = bisect_predicate(1e-12, 1e6, 1e-10, 0.0, |x| x >= 3.7e-5);
        assert!((b.hi / 3.7e-5 - 1.0).abs() < 1e-9);
        assert!(b.iterations < 200);
    }
}
