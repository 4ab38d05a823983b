//! Composite Simpson rule used for all time averages along trajectories.

/// Panel count for a window of length `span`: at least 64, and 64 per time unit.
pub fn panels_for(span: f64) -> usize {
    64usize.max((64.0 * span).ceil() as usize)
}

/// Nodes and weights of the composite Simpson rule with `panels` panels on [a, b].
///
/// Each panel spans two subintervals, so there are `2 * panels + 1` nodes.
pub fn simpson(a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    assert!(panels >= 1);
    let n = 2 * panels;
    let h = (b - a) / n as f64;
    (0..=n)
        .map(|i| {
            let t = if i == n { b } else { a + i as f64 * h };
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (t, w * h / 3.0)
        })
        .collect()
}
