//! Composite Simpson quadrature on uniform grids with analytic midpoints.
//!
//! Every grid interval `[t_k, t_{k+1}]` is one Simpson panel whose midpoint
//! value comes straight from the integrand, so the cumulative integral is
//! available at every node without interpolation.

use alloc::vec::Vec;

/// Simpson estimate of `∫_a^b f`.
#[inline]
pub fn simpson_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let m = 0.5 * (a + b);
    (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
}

/// Cumulative integral `∫_{t_0}^{t_k} f` at every node of `nodes`.
///
/// `nodes` must be increasing; the first entry of the result is zero.
pub fn cumulative_simpson<F: Fn(f64) -> f64>(f: F, nodes: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(nodes.len());
    if nodes.is_empty() {
        return out;
    }
    out.push(0.0);
    let mut acc = 0.0;
    let mut left = f(nodes[0]);
    for w in nodes.windows(2) {
        let (a, b) = (w[0], w[1]);
        let right = f(b);
        acc += (b - a) / 6.0 * (left + 4.0 * f(0.5 * (a + b)) + right);
        out.push(acc);
        left = right;
    }
    out
}

/// Uniform grid of `samples` points on `[0, t_end]`; endpoints are exact.
pub fn uniform_nodes(t_end: f64, samples: usize) -> Vec<f64> {
    let intervals = samples.saturating_sub(1).max(1);
    let h = t_end / intervals as f64;
    let mut nodes: Vec<f64> = (0..samples).map(|k| k as f64 * h).collect();
    if let Some(last) = nodes.last_mut() {
        *last = t_end;
    }
    nodes
}
