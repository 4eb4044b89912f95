//! Empirical evaluation of the analytic functionals: the core mass M1(X),
//! the joint residual functional C_{q0}(X), marginals and restricted masses
//! A_d, discrepancy sums, diagonal mass conservation, and the smoothed
//! variance over arithmetic progressions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{forms_for, AlgebraError};
use crate::geometry::Cutoff;
use crate::local::{
    g_multiplicative, singular_series, LocalError, NormalizedForms, SeriesKind, Star,
    WNormalization,
};
use crate::primes::{
    is_prime, prime_power_base, primes_up_to, proper_prime_powers_up_to, sieve_range,
    PrimalityBitmap, PrimesError, WeightKind,
};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Local(#[from] LocalError),
    #[error(transparent)]
    Primes(#[from] PrimesError),
    #[error("lattice scale X = {0} exceeds the resource budget")]
    Resource(u64),
    #[error("modulus d = {0} must be squarefree and coprime to 6*W*q0")]
    Domain(u64),
    #[error("moduli bound Q = {q} must satisfy 1 <= Q <= X = {x}")]
    BadModuli { q: u64, x: u64 },
}

const MAX_LATTICE_X: u64 = 1 << 16;
const MAX_BDH_X: u64 = 10_000_000;
const SERIES_CUTOFF: u64 = 10_000;

#[derive(Debug, Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, v: f64) {
        let y = v - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum
    }
}

fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut k = Kahan::default();
    for v in values {
        k.add(v);
    }
    k.value()
}

/// Primality and weights for a bounded value range, backed by one segmented
/// sieve (plus a prime-power table for Lambda) when the range permits.
enum ValueOracle {
    Bitmap {
        bits: PrimalityBitmap,
        proper_powers: Vec<(u64, u64)>, // (p^k, p), k >= 2, sorted
    },
    Direct,
}

impl ValueOracle {
    fn new(vmin: u64, vmax: u64) -> Self {
        let lo = vmin.max(2);
        if vmax < lo {
            return ValueOracle::Direct;
        }
        match sieve_range(lo, vmax + 1) {
            Ok(bits) => {
                let proper_powers = proper_prime_powers_up_to(vmax)
                    .into_iter()
                    .filter(|&v| v >= lo)
                    .map(|v| (v, prime_power_base(v).expect("prime power")))
                    .collect();
                ValueOracle::Bitmap { bits, proper_powers }
            }
            Err(_) => ValueOracle::Direct,
        }
    }

    fn is_prime(&self, v: u64) -> bool {
        match self {
            ValueOracle::Bitmap { bits, .. } => bits.is_prime_at(v),
            ValueOracle::Direct => is_prime(v),
        }
    }

    fn weight(&self, kind: WeightKind, v: u64) -> f64 {
        match kind {
            WeightKind::Theta => {
                if self.is_prime(v) {
                    (v as f64).ln()
                } else {
                    0.0
                }
            }
            WeightKind::Indicator => {
                if self.is_prime(v) {
                    1.0
                } else {
                    0.0
                }
            }
            WeightKind::Lambda => {
                if self.is_prime(v) {
                    (v as f64).ln()
                } else {
                    match self {
                        ValueOracle::Bitmap { proper_powers, .. } => proper_powers
                            .binary_search_by_key(&v, |&(pk, _)| pk)
                            .map(|i| (proper_powers[i].1 as f64).ln())
                            .unwrap_or(0.0),
                        ValueOracle::Direct => match prime_power_base(v) {
                            Some(p) => (p as f64).ln(),
                            None => 0.0,
                        },
                    }
                }
            }
        }
    }
}

/// One full pass over the support of chi_X: M1, C_{q0}, counts, and the
/// three marginal vectors. Rows are processed in parallel and merged in
/// fixed m order, so results do not depend on the thread count.
pub struct LatticeMarginals {
    pub q0: u64,
    pub x: u64,
    pub weight: WeightKind,
    pub m1: f64,
    pub c_q0: f64,
    pub core_prime_pairs: u64,
    pub all_eight_prime_pairs: u64,
    m_lo: i64,
    s1: Vec<f64>,
    n_lo: i64,
    s2: Vec<f64>,
    r_lo: i64,
    s_diag: Vec<f64>,
    norm: WNormalization,
}

struct RowResult {
    s1: f64,
    joint: f64,
    core_pts: u64,
    all8_pts: u64,
    points: Vec<(i64, f64)>, // (n, chi * omega) at omega > 0
}

pub fn lattice_marginals(
    q0: u64,
    norm: &WNormalization,
    cutoff: &Cutoff,
    x: u64,
    weight: WeightKind,
) -> Result<LatticeMarginals, StatsError> {
    if x == 0 || x > MAX_LATTICE_X {
        return Err(StatsError::Resource(x));
    }
    let fs = forms_for(q0)?;
    let nf = NormalizedForms::new(&fs, norm)?;
    let (m_lo, m_hi) = cutoff.support_m_range(x);
    let mut n_lo = i64::MAX;
    let mut n_hi = i64::MIN;
    for m in m_lo..=m_hi {
        let (lo, hi) = cutoff.support_n_range(x, m);
        n_lo = n_lo.min(lo);
        n_hi = n_hi.max(hi);
    }
    if n_lo > n_hi {
        n_lo = 0;
        n_hi = 0;
    }
    // corner values bound the whole box: coefficients are nonnegative, so
    // any value hit inside the support lies between these. Corners below 2
    // are outside the support (chi > 0 forces m, n > 0) and are clamped.
    let corners = [nf.evaluate_all(m_lo, n_lo), nf.evaluate_all(m_hi, n_hi)];
    let mut vmin = u64::MAX;
    let mut vmax = 2u64;
    for c in corners {
        let vals = c.ok_or(StatsError::Resource(x))?;
        for v in vals {
            if v > crate::primes::VALUE_CAP as i64 {
                return Err(StatsError::Resource(x));
            }
            vmin = vmin.min(v.max(2) as u64);
            vmax = vmax.max(v.max(2) as u64);
        }
    }
    let oracle = ValueOracle::new(vmin, vmax);
    let xf = x as f64;

    let rows: Vec<RowResult> = (m_lo..=m_hi)
        .into_par_iter()
        .map(|m| {
            let (lo, hi) = cutoff.support_n_range(x, m);
            let mut s1 = Kahan::default();
            let mut joint = Kahan::default();
            let mut core_pts = 0;
            let mut all8_pts = 0;
            let mut points = Vec::new();
            let theta_n1 = {
                let v = nf.residual(Star::One, m).expect("bounded");
                oracle.weight(WeightKind::Theta, v as u64)
            };
            for n in lo..=hi {
                let chi = cutoff.chi(m as f64 / xf, n as f64 / xf);
                if chi == 0.0 {
                    continue;
                }
                let mut omega = 1.0f64;
                for f in &nf.core {
                    let v = f.constant + f.coeff_t * m + f.coeff_u * n;
                    omega *= oracle.weight(weight, v as u64);
                    if omega == 0.0 {
                        break;
                    }
                }
                if omega == 0.0 {
                    continue;
                }
                let w = chi * omega;
                s1.add(w);
                points.push((n, w));
                let core_prime = nf
                    .core
                    .iter()
                    .all(|f| oracle.is_prime((f.constant + f.coeff_t * m + f.coeff_u * n) as u64));
                if core_prime {
                    core_pts += 1;
                }
                let n2 = nf.residual(Star::Two, n).expect("bounded") as u64;
                let n3 = nf.residual(Star::Delta, m + n).expect("bounded") as u64;
                let theta_n2 = oracle.weight(WeightKind::Theta, n2);
                let theta_n3 = oracle.weight(WeightKind::Theta, n3);
                if theta_n1 > 0.0 && theta_n2 > 0.0 && theta_n3 > 0.0 {
                    joint.add(w * theta_n1 * theta_n2 * theta_n3);
                    if core_prime {
                        all8_pts += 1;
                    }
                }
            }
            RowResult {
                s1: s1.value(),
                joint: joint.value(),
                core_pts,
                all8_pts,
                points,
            }
        })
        .collect();

    let s1: Vec<f64> = rows.iter().map(|r| r.s1).collect();
    let m1 = kahan_sum(s1.iter().copied());
    let c_q0 = kahan_sum(rows.iter().map(|r| r.joint));
    let mut s2 = vec![0.0f64; (n_hi - n_lo + 1) as usize];
    let r_lo = m_lo + n_lo;
    let mut s_diag = vec![0.0f64; (m_hi + n_hi - r_lo + 1) as usize];
    for (i, row) in rows.iter().enumerate() {
        let m = m_lo + i as i64;
        for &(n, w) in &row.points {
            s2[(n - n_lo) as usize] += w;
            s_diag[(m + n - r_lo) as usize] += w;
        }
    }
    Ok(LatticeMarginals {
        q0,
        x,
        weight,
        m1,
        c_q0,
        core_prime_pairs: rows.iter().map(|r| r.core_pts).sum(),
        all_eight_prime_pairs: rows.iter().map(|r| r.all8_pts).sum(),
        m_lo,
        s1,
        n_lo,
        s2,
        r_lo,
        s_diag,
        norm: *norm,
    })
}

impl LatticeMarginals {
    /// Sum of a marginal vector over one residue class mod d, in index order.
    fn class_sum(vec: &[f64], start_index: i64, class: u64, d: u64) -> f64 {
        let mut k = Kahan::default();
        let first = (class as i64 - start_index).rem_euclid(d as i64) as usize;
        let mut i = first;
        while i < vec.len() {
            k.add(vec[i]);
            i += d as usize;
        }
        k.value()
    }

    /// A_d^{(star)}: the marginal mass on the class d | N_star.
    pub fn restricted(&self, d: u64, star: Star) -> f64 {
        if d == 1 {
            // the d = 1 class sum runs over every index in the same order
            // that defined m1/diagonal totals
            return match star {
                Star::One => kahan_sum(self.s1.iter().copied()),
                Star::Two => kahan_sum(self.s2.iter().copied()),
                Star::Delta => kahan_sum(self.s_diag.iter().copied()),
            };
        }
        let two_w = 2u128 * self.norm.big_w as u128 % d as u128;
        let inv = crate::primes::pow_mod(two_w as u64, phi_of(d) - 1, d);
        let (constant, vec, start): (u64, &[f64], i64) = match star {
            Star::One => (
                (self.q0 as u128 + 2 * self.norm.a_w as u128) as u64,
                &self.s1,
                self.m_lo,
            ),
            Star::Two => (
                (self.q0 as u128 + 2 * self.norm.b_w as u128) as u64,
                &self.s2,
                self.n_lo,
            ),
            Star::Delta => (
                (self.q0 as u128 + 2 * self.norm.a_w as u128 + 2 * self.norm.b_w as u128) as u64,
                &self.s_diag,
                self.r_lo,
            ),
        };
        let class = (d - constant % d) % d * inv % d;
        Self::class_sum(vec, start, class, d)
    }

    /// Total diagonal mass, summed in r order.
    pub fn diagonal_total(&self) -> f64 {
        kahan_sum(self.s_diag.iter().copied())
    }
}

// Euler phi by trial division; moduli here are small.
fn phi_of(d: u64) -> u64 {
    let mut n = d;
    let mut phi = d;
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            phi -= phi / p;
            while n.is_multiple_of(p) {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        phi -= phi / n;
    }
    phi
}

fn moebius(d: u64) -> Option<i64> {
    let mut n = d;
    let mut k = 0;
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            n /= p;
            if n.is_multiple_of(p) {
                return None;
            }
            k += 1;
        }
        p += 1;
    }
    if n > 1 {
        k += 1;
    }
    Some(if k % 2 == 0 { 1 } else { -1 })
}

/// Midpoint quadrature of chi over its support box on a 1000x1000 grid:
/// the empirical stand-in for the singular integral J_core(chi).
pub fn cutoff_integral(cutoff: &Cutoff) -> f64 {
    let (cx, cy) = Cutoff::centroid();
    let x_lo = cx - cutoff.support * 5.0 / 9.0;
    let x_hi = cx + cutoff.support * 4.0 / 9.0;
    let y_lo = cy - cutoff.support;
    let y_hi = cy + cutoff.support;
    let n = 1000usize;
    let dx = (x_hi - x_lo) / n as f64;
    let dy = (y_hi - y_lo) / n as f64;
    let mut total = Kahan::default();
    for i in 0..n {
        let x = x_lo + (i as f64 + 0.5) * dx;
        for j in 0..n {
            let y = y_lo + (j as f64 + 0.5) * dy;
            total.add(cutoff.chi(x, y));
        }
    }
    total.value() * dx * dy
}

/// Empirical mass of the core plus the derived prediction constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassReport {
    pub x: u64,
    pub weight: WeightKind,
    pub m1: f64,
    pub c_q0: f64,
    pub core_prime_pairs: u64,
    pub all_eight_prime_pairs: u64,
    /// Truncated singular product (W-tricked local factors, which carry the
    /// (W/phi(W))-type normalization) times the quadrature of chi.
    pub c_pred: f64,
    pub m1_over_x2: f64,
}

pub fn core_mass(
    q0: u64,
    norm: &WNormalization,
    cutoff: &Cutoff,
    x: u64,
    weight: WeightKind,
) -> Result<MassReport, StatsError> {
    let lat = lattice_marginals(q0, norm, cutoff, x, weight)?;
    let series = singular_series(q0, SeriesKind::Core, SERIES_CUTOFF, norm.w)?;
    Ok(MassReport {
        x,
        weight,
        m1: lat.m1,
        c_q0: lat.c_q0,
        core_prime_pairs: lat.core_prime_pairs,
        all_eight_prime_pairs: lat.all_eight_prime_pairs,
        c_pred: series.value * cutoff_integral(cutoff),
        m1_over_x2: lat.m1 / (x as f64 * x as f64),
    })
}

/// C_{q0}(X): the core mass additionally weighted by theta of the residuals.
pub fn joint_functional(
    q0: u64,
    norm: &WNormalization,
    cutoff: &Cutoff,
    x: u64,
) -> Result<f64, StatsError> {
    Ok(lattice_marginals(q0, norm, cutoff, x, WeightKind::Theta)?.c_q0)
}

fn check_modulus(d: u64, q0: u64, norm: &WNormalization) -> Result<(), StatsError> {
    if d == 0 || moebius(d).is_none() {
        return Err(StatsError::Domain(d));
    }
    let m = 6u128 * norm.big_w as u128 * q0 as u128;
    let mut a = d as u128;
    let mut b = m;
    while b != 0 {
        (a, b) = (b, a % b);
    }
    if a != 1 {
        return Err(StatsError::Domain(d));
    }
    Ok(())
}

/// A_d^{(star)} for one modulus.
pub fn restricted_mass(
    q0: u64,
    norm: &WNormalization,
    cutoff: &Cutoff,
    x: u64,
    d: u64,
    star: Star,
    weight: WeightKind,
) -> Result<f64, StatsError> {
    if d != 1 {
        check_modulus(d, q0, norm)?;
    }
    Ok(lattice_marginals(q0, norm, cutoff, x, weight)?.restricted(d, star))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyRow {
    pub d: u64,
    pub moebius: i64,
    /// A_d for stars 1, 2, Delta.
    pub a_d: [f64; 3],
    /// g_star(d) * M1.
    pub predicted: [f64; 3],
    pub error: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarAggregate {
    pub sum_abs: f64,
    pub sum_unit: f64,
    pub sum_moebius: f64,
    pub sum_abs_over_m1: f64,
    pub sum_unit_over_m1: f64,
    pub sum_moebius_over_m1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyReport {
    pub x: u64,
    pub delta: f64,
    pub d_max: u64,
    pub m1: f64,
    pub rows: Vec<DiscrepancyRow>,
    /// Aggregates for stars 1, 2, Delta.
    pub aggregates: [StarAggregate; 3],
}

/// All A_d - g(d) M1 discrepancies for squarefree d <= X^delta coprime to
/// 6 W q0, with unit and Moebius weighted aggregates.
pub fn discrepancy_sum(
    q0: u64,
    norm: &WNormalization,
    cutoff: &Cutoff,
    x: u64,
    delta: f64,
    weight: WeightKind,
) -> Result<DiscrepancyReport, StatsError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(StatsError::Domain(0));
    }
    let lat = lattice_marginals(q0, norm, cutoff, x, weight)?;
    let d_max = (x as f64).powf(delta).floor() as u64;
    let mut rows = Vec::new();
    for d in 1..=d_max {
        let Some(mu) = moebius(d) else { continue };
        if d != 1 && check_modulus(d, q0, &lat.norm).is_err() {
            continue;
        }
        let mut a_d = [0.0; 3];
        let mut predicted = [0.0; 3];
        let mut error = [0.0; 3];
        for (i, star) in Star::ALL.into_iter().enumerate() {
            a_d[i] = lat.restricted(d, star);
            let (gn, gd) = g_multiplicative(d, q0, star)?;
            predicted[i] = gn as f64 / gd as f64 * lat.m1;
            error[i] = a_d[i] - predicted[i];
        }
        rows.push(DiscrepancyRow { d, moebius: mu, a_d, predicted, error });
    }
    let aggregate = |rows: &[DiscrepancyRow], i: usize| {
        let sum_abs = kahan_sum(rows.iter().map(|r| r.error[i].abs()));
        let sum_unit = kahan_sum(rows.iter().map(|r| r.error[i]));
        let sum_moebius = kahan_sum(rows.iter().map(|r| r.moebius as f64 * r.error[i]));
        StarAggregate {
            sum_abs,
            sum_unit,
            sum_moebius,
            sum_abs_over_m1: sum_abs / lat.m1,
            sum_unit_over_m1: sum_unit / lat.m1,
            sum_moebius_over_m1: sum_moebius / lat.m1,
        }
    };
    let aggregates = [aggregate(&rows, 0), aggregate(&rows, 1), aggregate(&rows, 2)];
    Ok(DiscrepancyReport { x, delta, d_max, m1: lat.m1, rows, aggregates })
}

/// Mass conservation under the unimodular diagonal change of variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalReport {
    pub x: u64,
    pub weight: WeightKind,
    pub m1: f64,
    pub diagonal_total: f64,
    pub abs_diff: f64,
    pub rel_diff: f64,
}

pub fn diagonal_mass_check(
    q0: u64,
    norm: &WNormalization,
    cutoff: &Cutoff,
    x: u64,
    weight: WeightKind,
) -> Result<DiagonalReport, StatsError> {
    let lat = lattice_marginals(q0, norm, cutoff, x, weight)?;
    let diag = lat.diagonal_total();
    let abs_diff = (diag - lat.m1).abs();
    let denom = lat.m1.abs().max(f64::MIN_POSITIVE);
    Ok(DiagonalReport {
        x,
        weight,
        m1: lat.m1,
        diagonal_total: diag,
        abs_diff,
        rel_diff: abs_diff / denom,
    })
}

/// Pairwise non-proportionality by cross products.
pub fn pairwise_nonproportional(dirs: &[(i64, i64)]) -> bool {
    for i in 0..dirs.len() {
        for j in i + 1..dirs.len() {
            let (a, b) = dirs[i];
            let (c, d) = dirs[j];
            if (a as i128) * (d as i128) - (b as i128) * (c as i128) == 0 {
                return false;
            }
        }
    }
    true
}

/// Under (m, n) -> (r, s) = (m + n, m) the core directions become
/// {(0,1), (1,-1), (1,0), (1,1), (2,-1)}; checks the set and its
/// pairwise non-proportionality symbolically.
pub fn diagonal_direction_check(q0: u64) -> bool {
    let Ok(fs) = forms_for(q0) else { return false };
    // coefficient (cm, cn) on (m, n) becomes (cn, cm - cn) on (r, s)
    let mut dirs: Vec<(i64, i64)> = fs
        .core_directions()
        .iter()
        .map(|&(cm, cn)| (cn, cm - cn))
        .collect();
    let mut expected = vec![(0, 1), (1, -1), (1, 0), (1, 1), (2, -1)];
    dirs.sort_unstable();
    expected.sort_unstable();
    dirs == expected && pairwise_nonproportional(&dirs)
}

/// Smoothed variance of Lambda over all progressions with moduli q <= Q.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub x: u64,
    pub q_max: u64,
    pub variance: f64,
    pub xq: f64,
    pub log_x_pow5: f64,
    pub variance_over_xq: f64,
}

pub fn bdh_variance(x: u64, q_max: u64, cutoff: &Cutoff) -> Result<VarianceReport, StatsError> {
    if !(4..=MAX_BDH_X).contains(&x) {
        return Err(StatsError::Resource(x));
    }
    if q_max < 1 || q_max > x {
        return Err(StatsError::BadModuli { q: q_max, x });
    }
    let hi = 2 * x;
    // Lambda and Lambda*F over the window [x, 2x]
    let len = (hi - x + 1) as usize;
    let mut lam_f = vec![0.0f64; len];
    let mut f_win = vec![0.0f64; len];
    for (i, slot) in f_win.iter_mut().enumerate() {
        *slot = cutoff.window1d((x + i as u64) as f64 / x as f64);
    }
    for p in primes_up_to(hi) {
        let mut v = p;
        loop {
            if v >= x {
                lam_f[(v - x) as usize] = (p as f64).ln() * f_win[(v - x) as usize];
            }
            match v.checked_mul(p) {
                Some(next) if next <= hi => v = next,
                _ => break,
            }
        }
    }
    let per_q: Vec<f64> = (1..=q_max)
        .into_par_iter()
        .map(|q| {
            let qs = q as usize;
            let mut s_lam = vec![0.0f64; qs];
            let mut s_f = vec![0.0f64; qs];
            let mut class = (x % q) as usize;
            for i in 0..len {
                s_lam[class] += lam_f[i];
                s_f[class] += f_win[i];
                class += 1;
                if class == qs {
                    class = 0;
                }
            }
            let mut coprime = vec![true; qs];
            if q > 1 {
                let mut n = q;
                let mut p = 2;
                while p * p <= n {
                    if n % p == 0 {
                        for a in (0..q).step_by(p as usize) {
                            coprime[a as usize] = false;
                        }
                        while n % p == 0 {
                            n /= p;
                        }
                    }
                    p += 1;
                }
                if n > 1 {
                    for a in (0..q).step_by(n as usize) {
                        coprime[a as usize] = false;
                    }
                }
            }
            let phi = coprime.iter().filter(|&&b| b).count() as f64;
            let t_q = kahan_sum((0..qs).filter(|&a| coprime[a]).map(|a| s_f[a]));
            let mean = t_q / phi;
            kahan_sum(
                (0..qs)
                    .filter(|&a| coprime[a])
                    .map(|a| (s_lam[a] - mean) * (s_lam[a] - mean)),
            )
        })
        .collect();
    let variance = kahan_sum(per_q.iter().copied());
    let xq = x as f64 * q_max as f64;
    let log_x = (x as f64).ln();
    Ok(VarianceReport {
        x,
        q_max,
        variance,
        xq,
        log_x_pow5: log_x.powi(5),
        variance_over_xq: variance / xq,
    })
}
