//! Kendall rank correlation, tau-b variant.
//!
//! `tau_b = (C - D) / sqrt((n0 - n1) * (n0 - n2))` where `n1` and `n2` count
//! pairs tied in x and in y respectively. Computed in O(n log n) with
//! Knight's algorithm: sort by (x, y), then count the inversions left in y
//! with a merge sort.

use std::cmp::Ordering;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KendallError {
    #[error("sequences differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least two observations, got {0}")]
    TooFewObservations(usize),
    /// Every observation is tied in at least one variable, so tau-b is 0/0.
    #[error("tau-b is undefined: one variable is constant")]
    Degenerate,
}

/// Tau-b with caller-supplied total orders for both variables.
pub fn tau_b_by<X, Y>(
    x: &[X],
    y: &[Y],
    mut cmp_x: impl FnMut(&X, &X) -> Ordering,
    mut cmp_y: impl FnMut(&Y, &Y) -> Ordering,
) -> Result<f64, KendallError> {
    if x.len() != y.len() {
        return Err(KendallError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return Err(KendallError::TooFewObservations(n));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| cmp_x(&x[a], &x[b]).then_with(|| cmp_y(&y[a], &y[b])));

    let pairs = |t: u64| t * (t.saturating_sub(1)) / 2;
    let n0 = pairs(n as u64);

    // ties in x (n1) and joint ties in (x, y) (n3)
    let (mut n1, mut n3) = (0u64, 0u64);
    let (mut run_x, mut run_xy) = (1u64, 1u64);
    for w in order.windows(2) {
        let (a, b) = (w[0], w[1]);
        if cmp_x(&x[a], &x[b]) == Ordering::Equal {
            run_x += 1;
            if cmp_y(&y[a], &y[b]) == Ordering::Equal {
                run_xy += 1;
            } else {
                n3 += pairs(run_xy);
                run_xy = 1;
            }
        } else {
            n1 += pairs(run_x);
            n3 += pairs(run_xy);
            run_x = 1;
            run_xy = 1;
        }
    }
    n1 += pairs(run_x);
    n3 += pairs(run_xy);

    // discordant pairs = strict inversions of y in this order
    let mut seq = order;
    let mut scratch = vec![0usize; n];
    let swaps = merge_count(&mut seq, &mut scratch, &mut |a, b| cmp_y(&y[*a], &y[*b]));

    let mut n2 = 0u64;
    let mut run_y = 1u64;
    for w in seq.windows(2) {
        if cmp_y(&y[w[0]], &y[w[1]]) == Ordering::Equal {
            run_y += 1;
        } else {
            n2 += pairs(run_y);
            run_y = 1;
        }
    }
    n2 += pairs(run_y);

    let not_tied_x = n0 - n1;
    let not_tied_y = n0 - n2;
    if not_tied_x == 0 || not_tied_y == 0 {
        return Err(KendallError::Degenerate);
    }
    let numerator = n0 as i64 - n1 as i64 - n2 as i64 + n3 as i64 - 2 * swaps as i64;
    Ok(numerator as f64 / (not_tied_x as f64 * not_tied_y as f64).sqrt())
}

/// Tau-b for an ordered variable against a float variable.
pub fn tau_b<X: Ord>(x: &[X], y: &[f64]) -> Result<f64, KendallError> {
    tau_b_by(x, y, |a, b| a.cmp(b), |a, b| a.total_cmp(b))
}

/// Stable merge sort counting strict inversions.
fn merge_count<T: Copy>(items: &mut [T], scratch: &mut [T], cmp: &mut impl FnMut(&T, &T) -> Ordering) -> u64 {
    let n = items.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (left, right) = items.split_at_mut(mid);
        let (sl, sr) = scratch.split_at_mut(mid);
        merge_count(left, sl, cmp) + merge_count(right, sr, cmp)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if cmp(&items[j], &items[i]) == Ordering::Less {
            scratch[k] = items[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            scratch[k] = items[i];
            i += 1;
        }
        k += 1;
    }
    while i < mid {
        scratch[k] = items[i];
        i += 1;
        k += 1;
    }
    while j < n {
        scratch[k] = items[j];
        j += 1;
        k += 1;
    }
    items.copy_from_slice(&scratch[..n]);
    swaps
}
