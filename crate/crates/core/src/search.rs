/// Uniform-grid maximisation of `f` over `[lo, hi]`.
///
/// Evaluates `resolution` points including both endpoints and returns
/// `(argmax, max)`. Ties go to the larger argument; NaN values are skipped.
pub fn maximize_scalar<F>(mut f: F, lo: f64, hi: f64, resolution: usize) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let resolution = resolution.max(2);
    let last = resolution - 1;
    let mut best = (lo, f64::NEG_INFINITY);
    for i in 0..resolution {
        let x = if i == last {
            hi
        } else {
            lo + (hi - lo) * (i as f64 / last as f64)
        };
        let v = f(x);
        if v >= best.1 {
            best = (x, v);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_picks_upper_end() {
        assert_eq!(maximize_scalar(|_| 1.0, 0.0, 1.0, 11), (1.0, 1.0));
    }

    #[test]
    fn unimodal_peak() {
        let (x, _) = maximize_scalar(|x| -(x - 0.3) * (x - 0.3), 0.0, 1.0, 10_000);
        assert!((x - 0.3).abs() < 1e-4);
    }

    #[test]
    fn endpoints_are_evaluated() {
        let mut seen = Vec::new();
        maximize_scalar(|x| { seen.push(x); x }, -2.0, 3.0, 5);
        assert_eq!(seen, vec![-2.0, -0.75, 0.5, 1.75, 3.0]);
    }
}
