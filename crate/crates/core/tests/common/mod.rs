//! Test-only reference computations, independent of the library's code paths.

#![allow(dead_code)]

/// Coincidence probability by explicit projection of the two-photon state
/// vector onto the product of the analyzers' "+" states.
///
/// Basis order is `HH, HV, VH, VV`. The "+" state of an analyzer at angle `t`
/// is `sin t |H> + cos t |V>`.
pub fn projected_coincidence(r: f64, alpha_deg: f64, beta_deg: f64) -> f64 {
    let norm = (1.0 + r * r).sqrt();
    let state = [1.0 / norm, 0.0, 0.0, r / norm];
    let analyzer = |deg: f64| {
        let t = deg * std::f64::consts::PI / 180.0;
        [t.sin(), t.cos()]
    };
    let (a, b) = (analyzer(alpha_deg), analyzer(beta_deg));
    let product = [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]];
    let amp: f64 = product.iter().zip(state).map(|(p, s)| p * s).sum();
    amp * amp
}

/// Alice "+" marginal by summing the projections over Bob's two orthogonal channels.
pub fn projected_single(r: f64, alpha_deg: f64) -> f64 {
    projected_coincidence(r, alpha_deg, 0.0) + projected_coincidence(r, alpha_deg, 90.0)
}

pub fn sse(e: &[f64; 4], q: &[f64; 4], s: f64) -> f64 {
    e.iter().zip(q).map(|(ej, qj)| (ej - s * qj).powi(2)).sum()
}

/// Minimizes the SSE over `s` by a coarse grid scan followed by golden-section
/// refinement of the bracketing interval.
pub fn brute_force_scale(e: &[f64; 4], q: &[f64; 4]) -> f64 {
    let hi = e
        .iter()
        .zip(q)
        .filter(|(_, &qj)| qj > 0.0)
        .map(|(ej, qj)| ej / qj)
        .fold(0.0f64, f64::max)
        * 2.0
        + 1.0;
    let steps = 2000;
    let grid = |i: usize| hi * i as f64 / steps as f64;
    let best = (0..=steps)
        .min_by(|&i, &j| sse(e, q, grid(i)).total_cmp(&sse(e, q, grid(j))))
        .unwrap();
    let mut lo = grid(best.saturating_sub(1));
    let mut up = grid((best + 1).min(steps));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = up - inv_phi * (up - lo);
    let mut x2 = lo + inv_phi * (up - lo);
    let (mut f1, mut f2) = (sse(e, q, x1), sse(e, q, x2));
    for _ in 0..200 {
        if f1 < f2 {
            up = x2;
            x2 = x1;
            f2 = f1;
            x1 = up - inv_phi * (up - lo);
            f1 = sse(e, q, x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (up - lo);
            f2 = sse(e, q, x2);
        }
        if up - lo <= 1e-13 * up.abs().max(1e-300) {
            break;
        }
    }
    0.5 * (lo + up)
}

/// Reference values from a 40-digit evaluation of the coincidence formula at
/// r = 0.26 and angles a = 3.8, a' = -25.2, b = -3.8, b' = 25.2 degrees.
pub mod frozen {
    pub const Q: [f64; 4] = [
        0.060_652_714_933_3,
        0.064_767_507_310_1,
        0.064_767_507_310_1,
        0.000_933_977_238_314,
    ];
    pub const SINGLE_A: f64 = 0.067_155_596_791_617_9;
    pub const CH_UNIT_EFFICIENCY: f64 = 0.054_942_558_732_001_4;
    pub const CRITICAL_EFFICIENCY: f64 = 0.709_688_404_801_166_8;
    /// Least-squares scale for corrected counts [30008, 33721, 34687, 1867].
    pub const SCALE: f64 = 518_044.481_206_511;
}
