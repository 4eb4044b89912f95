//! The convex region K = {1 <= x <= 2, 4x/3 <= y <= 5x/3}, its dilations,
//! the distinctness chain, and the compactly supported smooth cutoff used
//! by the lattice sums.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("cutoff factors must satisfy 0 < shrink < support < 1 (got {shrink}, {support})")]
    InvalidCutoff { shrink: f64, support: f64 },
}

// Area centroid of K.
const CX: f64 = 14.0 / 9.0;
const CY: f64 = 7.0 / 3.0;

// Largest |profile'(rho)| of the ramp exp(1 - 1/(1 - rho^2)), rounded up.
const MAX_PROFILE_SLOPE: f64 = 2.2;
// Largest gradient of the gauge over the four half-plane functionals.
const MAX_GAUGE_GRADIENT: f64 = 7.5;

/// Exact membership test for K on rational points xn/xd, yn/yd.
pub fn in_region(xn: i64, xd: i64, yn: i64, yd: i64) -> bool {
    assert!(xd != 0 && yd != 0, "zero denominator");
    let (xn, xd) = if xd < 0 { (-xn, -xd) } else { (xn, xd) };
    let (yn, yd) = if yd < 0 { (-yn, -yd) } else { (yn, yd) };
    let (xn, xd, yn, yd) = (xn as i128, xd as i128, yn as i128, yd as i128);
    xn >= xd && xn <= 2 * xd && 4 * xn * yd <= 3 * yn * xd && 3 * yn * xd <= 5 * xn * yd
}

/// Integer membership in the dilation NK: (t/n, u/n) in K.
pub fn in_dilation(n: u64, t: i64, u: i64) -> bool {
    let n = n as i64;
    t >= n && t <= 2 * n && 4 * t <= 3 * u && 3 * u <= 5 * t
}

/// Lattice points of NK in lexicographic (t, then u) order.
pub fn enumerate_dilation(n: u64) -> impl Iterator<Item = (i64, i64)> {
    let n = n as i64;
    (n..=2 * n).flat_map(|t| {
        let lo = (4 * t + 2) / 3;
        let hi = (5 * t).div_euclid(3);
        (lo..=hi).map(move |u| (t, u))
    })
}

/// The full strict chain t < u < 2t < t+u < 2u < u+2t < 2u+t < 2u+2t,
/// which forces the eight form values to be pairwise distinct and > q0.
pub fn chain_check(t: i64, u: i64) -> bool {
    let (t, u) = (t as i128, u as i128);
    0 < t
        && t < u
        && u < 2 * t
        && 2 * t < t + u
        && t + u < 2 * u
        && 2 * u < u + 2 * t
        && u + 2 * t < 2 * u + t
        && 2 * u + t < 2 * u + 2 * t
}

/// Smooth cutoff built by shrinking K toward its centroid: identically 1 on
/// the gauge sublevel set at `shrink`, supported inside the sublevel set at
/// `support`, ramped by the classical exponential bump in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub shrink: f64,
    pub support: f64,
}

impl Default for Cutoff {
    fn default() -> Self {
        Cutoff { shrink: 0.6, support: 0.85 }
    }
}

impl Cutoff {
    pub fn new(shrink: f64, support: f64) -> Result<Self, GeometryError> {
        if !(shrink > 0.0 && shrink < support && support < 1.0) {
            return Err(GeometryError::InvalidCutoff { shrink, support });
        }
        Ok(Cutoff { shrink, support })
    }

    /// Minkowski gauge of K about the centroid: 0 there, 1 on the boundary.
    pub fn gauge(x: f64, y: f64) -> f64 {
        let g1 = (14.0 - 9.0 * x) / 5.0;
        let g2 = (9.0 * x - 14.0) / 4.0;
        let g3 = (36.0 * x - 27.0 * y + 7.0) / 7.0;
        let g4 = (-45.0 * x + 27.0 * y + 7.0) / 7.0;
        g1.max(g2).max(g3).max(g4)
    }

    fn ramp(rho: f64) -> f64 {
        if rho <= 0.0 {
            1.0
        } else if rho >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - rho * rho)).exp()
        }
    }

    /// chi(x, y): 1 on K0, 0 outside K_chi, smooth ramp between.
    pub fn chi(&self, x: f64, y: f64) -> f64 {
        let r = Self::gauge(x, y);
        if r <= self.shrink {
            1.0
        } else if r >= self.support {
            0.0
        } else {
            Self::ramp((r - self.shrink) / (self.support - self.shrink))
        }
    }

    /// One-dimensional window on [1, 2] from the same profile; used as the
    /// smooth weight F(n/X) on [X, 2X] by the variance probe.
    pub fn window1d(&self, v: f64) -> f64 {
        let r = (v - 1.5).abs() / 0.5;
        if r <= self.shrink {
            1.0
        } else if r >= self.support {
            0.0
        } else {
            Self::ramp((r - self.shrink) / (self.support - self.shrink))
        }
    }

    /// Upper bound on |grad chi| for the sampled-gradient contract.
    pub fn gradient_bound(&self) -> f64 {
        MAX_PROFILE_SLOPE * MAX_GAUGE_GRADIENT / (self.support - self.shrink)
    }

    /// Lower bound on dist(K_chi, boundary of K).
    pub fn boundary_margin(&self) -> f64 {
        let min_h = (7.0 / 9.0) / 34.0f64.sqrt();
        (1.0 - self.support) * min_h
    }

    /// Conservative inclusive m-range containing the support of chi_X.
    pub fn support_m_range(&self, x: u64) -> (i64, i64) {
        let x = x as f64;
        let lo = (CX - self.support * 5.0 / 9.0) * x;
        let hi = (CX + self.support * 4.0 / 9.0) * x;
        (lo.floor() as i64 - 1, hi.ceil() as i64 + 1)
    }

    /// Conservative inclusive n-range of the support on the row m.
    pub fn support_n_range(&self, x: u64, m: i64) -> (i64, i64) {
        let x = x as f64;
        let slack = 7.0 * (1.0 - self.support);
        let lo = (36.0 * m as f64 + slack * x) / 27.0;
        let hi = (45.0 * m as f64 - slack * x) / 27.0;
        (lo.floor() as i64 - 1, hi.ceil() as i64 + 1)
    }

    pub fn centroid() -> (f64, f64) {
        (CX, CY)
    }
}

/// Smallest X at which the W-shift is guaranteed to keep the support inside K.
pub fn support_shift_threshold(cutoff: &Cutoff, big_w: u64, a_w: u64, b_w: u64) -> u64 {
    let shift = a_w.max(b_w);
    if shift == 0 {
        return 0;
    }
    (shift as f64 / (big_w as f64 * cutoff.boundary_margin())).ceil() as u64
}

/// Scans every lattice point of the support of chi_X and tests that its
/// image ((a_W + W m)/(W X), (b_W + W n)/(W X)) lies in K, exactly.
pub fn support_shift_check(cutoff: &Cutoff, big_w: u64, a_w: u64, b_w: u64, x: u64) -> bool {
    assert!(x >= 1 && big_w >= 1);
    let (w, aw, bw, xx) = (big_w as i128, a_w as i128, b_w as i128, x as i128);
    let wx = w * xx;
    let (m_lo, m_hi) = cutoff.support_m_range(x);
    for m in m_lo..=m_hi {
        let (n_lo, n_hi) = cutoff.support_n_range(x, m);
        for n in n_lo..=n_hi {
            if cutoff.chi(m as f64 / x as f64, n as f64 / x as f64) == 0.0 {
                continue;
            }
            let t = aw + w * m as i128;
            let u = bw + w * n as i128;
            let ok = t >= wx && t <= 2 * wx && 4 * t <= 3 * u && 3 * u <= 5 * t;
            if !ok {
                return false;
            }
        }
    }
    true
}
