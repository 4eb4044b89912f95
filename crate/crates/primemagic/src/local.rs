//! The W-trick normalization, local admissibility, exact local densities
//! g1/g2/gDelta, and truncated singular-series products.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{forms_for, AffineForm, AlgebraError, FormSystem, FORM_COEFFS};
use crate::primes::{pow_mod, primes_up_to};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LocalError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("smoothing cutoff w must be at least 2 (got {0})")]
    BadSmoothness(u64),
    #[error("g_star is undefined for p = {0} dividing 2*q0")]
    UnsupportedPrime(u64),
    #[error("modulus {0} is not squarefree")]
    NotSquarefree(u64),
    #[error("parameter {0} exceeds the supported enumeration range")]
    TooLarge(u64),
    #[error("arithmetic overflow in W-tricked coefficients")]
    Overflow,
}

/// Residue-class data making all eight forms coprime to W.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WNormalization {
    pub w: u64,
    pub q0: u64,
    pub big_w: u64,
    pub a_w: u64,
    pub b_w: u64,
}

/// Which residual form a restricted mass or density refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Star {
    /// N1 <-> q0 + 2t
    One,
    /// N2 <-> q0 + 2u
    Two,
    /// N_Delta <-> q0 + 2t + 2u
    Delta,
}

impl Star {
    pub const ALL: [Star; 3] = [Star::One, Star::Two, Star::Delta];

    fn coeffs(self) -> (i64, i64) {
        match self {
            Star::One => (2, 0),
            Star::Two => (0, 2),
            Star::Delta => (2, 2),
        }
    }
}

impl std::str::FromStr for Star {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "1" => Ok(Star::One),
            "2" => Ok(Star::Two),
            "delta" | "d" => Ok(Star::Delta),
            other => Err(format!("unknown star {other:?} (1|2|delta)")),
        }
    }
}

impl std::fmt::Display for Star {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Star::One => "1",
            Star::Two => "2",
            Star::Delta => "delta",
        })
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn inv_mod(a: u64, p: u64) -> u64 {
    pow_mod(a % p, p - 2, p)
}

/// The eight forms reduced mod p, as (coeff_t, coeff_u, constant) residues.
fn forms_mod_p(q0: u64, p: u64) -> [(u64, u64, u64); 8] {
    FORM_COEFFS.map(|(ct, cu)| (ct as u64 % p, cu as u64 % p, q0 % p))
}

/// First (t, u) mod p, in lexicographic order, at which none of the eight
/// forms vanishes; None when no admissible pair exists (only q0 in {2, 3}).
pub fn admissibility_witness(p: u64, q0: u64) -> Option<(u64, u64)> {
    let forms = forms_mod_p(q0, p);
    for t in 0..p {
        for u in 0..p {
            if forms.iter().all(|&(a, b, c)| (a * t + b * u + c) % p != 0) {
                return Some((t, u));
            }
        }
    }
    None
}

/// Canonical (W, a_W, b_W): per-prime lexicographically smallest admissible
/// residues, combined by the Chinese Remainder construction.
pub fn compute_w_normalization(w: u64, q0: u64) -> Result<WNormalization, LocalError> {
    if w < 2 {
        return Err(LocalError::BadSmoothness(w));
    }
    forms_for(q0)?; // validates q0 >= 5 prime
    let mut big_w: u64 = 1;
    let mut residues: Vec<(u64, u64, u64)> = Vec::new(); // (p, a_p, b_p)
    for p in primes_up_to(w) {
        if q0.is_multiple_of(p) {
            continue;
        }
        big_w = big_w.checked_mul(p).ok_or(LocalError::TooLarge(w))?;
        // existence is guaranteed at (0,0) since every form is q0 mod p there
        let (a_p, b_p) = admissibility_witness(p, q0).expect("admissible class exists");
        residues.push((p, a_p, b_p));
    }
    let crt = |pick: fn(&(u64, u64, u64)) -> u64| -> u64 {
        let mut x: u128 = 0;
        for r in &residues {
            let p = r.0;
            let m = big_w / p;
            let y = inv_mod(m % p, p);
            x += pick(r) as u128 * m as u128 % big_w as u128 * y as u128 % big_w as u128;
            x %= big_w as u128;
        }
        x as u64
    };
    let norm = WNormalization {
        w,
        q0,
        big_w,
        a_w: crt(|r| r.1),
        b_w: crt(|r| r.2),
    };
    debug_assert!(norm.forms_coprime_to_w());
    Ok(norm)
}

impl WNormalization {
    /// gcd(L_j(a_W, b_W), W) = 1 for all eight forms.
    pub fn forms_coprime_to_w(&self) -> bool {
        FORM_COEFFS.iter().all(|&(ct, cu)| {
            let v = self.q0 as u128
                + ct as u128 * self.a_w as u128
                + cu as u128 * self.b_w as u128;
            gcd((v % self.big_w as u128) as u64, self.big_w) == 1
        })
    }
}

/// The form system after the change of variables t = a_W + Wm, u = b_W + Wn:
/// five core forms in (m, n) plus the three one-dimensional residuals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedForms {
    /// A1..A5 in the lattice variables; coeff_t acts on m, coeff_u on n.
    pub core: [AffineForm; 5],
    /// Constants of N1, N2, N3.
    pub residual_constants: [i64; 3],
    /// Common residual slope 2W.
    pub residual_coeff: i64,
}

impl NormalizedForms {
    pub fn new(fs: &FormSystem, norm: &WNormalization) -> Result<Self, LocalError> {
        assert_eq!(fs.q0, norm.q0);
        let w = i64::try_from(norm.big_w).map_err(|_| LocalError::Overflow)?;
        let aw = norm.a_w as i64;
        let bw = norm.b_w as i64;
        let tricked = |f: &AffineForm| -> Result<AffineForm, LocalError> {
            Ok(AffineForm {
                constant: f
                    .constant
                    .checked_add(f.coeff_t.checked_mul(aw).ok_or(LocalError::Overflow)?)
                    .and_then(|c| c.checked_add(f.coeff_u.checked_mul(bw)?))
                    .ok_or(LocalError::Overflow)?,
                coeff_t: f.coeff_t.checked_mul(w).ok_or(LocalError::Overflow)?,
                coeff_u: f.coeff_u.checked_mul(w).ok_or(LocalError::Overflow)?,
            })
        };
        let core_src = fs.core();
        let mut core = [AffineForm { constant: 0, coeff_t: 0, coeff_u: 0 }; 5];
        for (slot, f) in core.iter_mut().zip(core_src.iter()) {
            *slot = tricked(f)?;
        }
        let q = fs.q0 as i64;
        let two_w = w.checked_mul(2).ok_or(LocalError::Overflow)?;
        Ok(NormalizedForms {
            core,
            residual_constants: [q + 2 * aw, q + 2 * bw, q + 2 * aw + 2 * bw],
            residual_coeff: two_w,
        })
    }

    pub fn residual(&self, star: Star, arg: i64) -> Option<i64> {
        let c = match star {
            Star::One => self.residual_constants[0],
            Star::Two => self.residual_constants[1],
            Star::Delta => self.residual_constants[2],
        };
        self.residual_coeff.checked_mul(arg)?.checked_add(c)
    }

    /// All eight tricked values at (m, n): five core then N1, N2, N3.
    pub fn evaluate_all(&self, m: i64, n: i64) -> Option<[i64; 8]> {
        let mut out = [0i64; 8];
        for (slot, f) in out.iter_mut().zip(self.core.iter()) {
            *slot = f.evaluate(m, n)?;
        }
        out[5] = self.residual(Star::One, m)?;
        out[6] = self.residual(Star::Two, n)?;
        out[7] = self.residual(Star::Delta, m.checked_add(n)?)?;
        Some(out)
    }
}

/// Exhaustive count of (t, u) in (Z/p)^2 where no listed form vanishes.
fn count_nonvanishing_enum(p: u64, forms: &[(u64, u64, u64)]) -> u64 {
    let mut count = 0;
    for t in 0..p {
        for u in 0..p {
            if forms.iter().all(|&(a, b, c)| (a * t + b * u + c) % p != 0) {
                count += 1;
            }
        }
    }
    count
}

/// Same count via exact line-union inclusion-exclusion: O(k^2) per prime.
fn count_nonvanishing_lines(p: u64, forms: &[(u64, u64, u64)]) -> u64 {
    // normalize each vanishing locus; drop empty ones, dedup identical lines
    let mut lines: Vec<(u64, u64, u64)> = Vec::new();
    for &(a, b, c) in forms {
        let (a, b, c) = (a % p, b % p, c % p);
        if a == 0 && b == 0 {
            if c == 0 {
                return 0; // a form vanishes identically
            }
            continue; // never vanishes
        }
        let scale = if a != 0 { inv_mod(a, p) } else { inv_mod(b, p) };
        let norm = (a * scale % p, b * scale % p, c * scale % p);
        if !lines.contains(&norm) {
            lines.push(norm);
        }
    }
    let k = lines.len() as u64;
    // pairwise intersection points, then multiplicity correction
    let mut points: Vec<(u64, u64)> = Vec::new();
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            let (a1, b1, c1) = lines[i];
            let (a2, b2, c2) = lines[j];
            let det = (a1 * b2 % p + p - a2 * b1 % p) % p;
            if det == 0 {
                continue; // parallel, already distinct
            }
            let inv = inv_mod(det, p);
            // Cramer on a t + b u = -c
            let rc1 = (p - c1) % p;
            let rc2 = (p - c2) % p;
            let t = (rc1 * b2 % p + p - rc2 * b1 % p) % p * inv % p;
            let u = (a1 * rc2 % p + p - a2 * rc1 % p) % p * inv % p;
            if !points.contains(&(t, u)) {
                points.push((t, u));
            }
        }
    }
    let mut extra = 0u64;
    for &(t, u) in &points {
        let mult = lines
            .iter()
            .filter(|&&(a, b, c)| (a * t + b * u + c) % p == 0)
            .count() as u64;
        extra += mult - 1;
    }
    p * p - (k * p - extra)
}

fn core_forms_mod_p(q0: u64, p: u64) -> Vec<(u64, u64, u64)> {
    let fs_coeffs: Vec<(i64, i64)> = crate::algebra::CORE_INDICES
        .iter()
        .map(|&i| FORM_COEFFS[i])
        .collect();
    fs_coeffs
        .iter()
        .map(|&(ct, cu)| (ct as u64 % p, cu as u64 % p, q0 % p))
        .collect()
}

/// #{(t,u) in (Z/p)^2 : A1..A5 all nonzero mod p}, by exhaustive enumeration.
pub fn local_core_count(p: u64, q0: u64) -> u64 {
    count_nonvanishing_enum(p, &core_forms_mod_p(q0, p))
}

/// Exact local density of the residual star within the core: the pair
/// (numerator, denominator) of #{p | N_star, core nonvanishing} / core count,
/// reduced to lowest terms.
pub fn g_star(p: u64, q0: u64, star: Star) -> Result<(u64, u64), LocalError> {
    if p == 2 || q0.is_multiple_of(p) {
        return Err(LocalError::UnsupportedPrime(p));
    }
    let core = core_forms_mod_p(q0, p);
    let (sc_t, sc_u) = star.coeffs();
    let (sa, sb, scst) = (sc_t as u64 % p, sc_u as u64 % p, q0 % p);
    let mut num = 0u64;
    let mut den = 0u64;
    for t in 0..p {
        for u in 0..p {
            if core.iter().all(|&(a, b, c)| (a * t + b * u + c) % p != 0) {
                den += 1;
                if (sa * t + sb * u + scst) % p == 0 {
                    num += 1;
                }
            }
        }
    }
    // gcd(0, den) = den, so a zero numerator reduces to (0, 1)
    let g = gcd(num, den);
    Ok((num / g, den / g))
}

fn factorize(mut d: u64) -> Result<Vec<u64>, LocalError> {
    let mut ps = Vec::new();
    let mut p = 2u64;
    while p * p <= d {
        if d.is_multiple_of(p) {
            d /= p;
            if d.is_multiple_of(p) {
                return Err(LocalError::NotSquarefree(d * p * p));
            }
            ps.push(p);
        }
        p += 1;
    }
    if d > 1 {
        ps.push(d);
    }
    Ok(ps)
}

/// g_star(d) = prod over p | d of g_star(p), for squarefree d.
pub fn g_multiplicative(d: u64, q0: u64, star: Star) -> Result<(u64, u64), LocalError> {
    if d == 0 {
        return Err(LocalError::NotSquarefree(0));
    }
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for p in factorize(d)? {
        let (n, dd) = g_star(p, q0, star)?;
        num *= n as u128;
        den *= dd as u128;
    }
    let g = {
        let (mut a, mut b) = (num, den);
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    };
    Ok((
        u64::try_from(num / g).map_err(|_| LocalError::Overflow)?,
        u64::try_from(den / g).map_err(|_| LocalError::Overflow)?,
    ))
}

/// Which truncated Euler product to form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeriesKind {
    Core,
    Residual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularSeries {
    pub kind: SeriesKind,
    pub p_cutoff: u64,
    pub value: f64,
    /// |log(tail)| <= this; from sum over p > P of p^{-2} <= 1/P.
    pub log_tail_bound: f64,
}

const TAIL_CONSTANT: f64 = 30.0;

fn tricked_forms_mod_p(norm: &WNormalization, p: u64, core_only: bool) -> Vec<(u64, u64, u64)> {
    let idx: &[usize] = if core_only {
        &crate::algebra::CORE_INDICES
    } else {
        &[0, 1, 2, 3, 4, 5, 6, 7]
    };
    idx.iter()
        .map(|&i| {
            let (ct, cu) = FORM_COEFFS[i];
            let (ct, cu) = (ct as u128, cu as u128);
            let c = (norm.q0 as u128 + ct * norm.a_w as u128 + cu * norm.b_w as u128) % p as u128;
            (
                (ct * norm.big_w as u128 % p as u128) as u64,
                (cu * norm.big_w as u128 % p as u128) as u64,
                c as u64,
            )
        })
        .collect()
}

/// Local core factor sigma_p of the W-tricked system; for p | W the forms are
/// nonzero constants mod p, so this degenerates to (1 - 1/p)^{-5}.
pub fn sigma_p(norm: &WNormalization, p: u64) -> f64 {
    let cnt = count_nonvanishing_lines(p, &tricked_forms_mod_p(norm, p, true));
    let pf = p as f64;
    (cnt as f64 / (pf * pf)) * (1.0 - 1.0 / pf).powi(-5)
}

/// Local residual factor beta_p = [full8(p)/core(p)] (1 - 1/p)^{-3}.
pub fn beta_p(norm: &WNormalization, p: u64) -> f64 {
    let core = count_nonvanishing_lines(p, &tricked_forms_mod_p(norm, p, true));
    let full = count_nonvanishing_lines(p, &tricked_forms_mod_p(norm, p, false));
    let pf = p as f64;
    (full as f64 / core as f64) * (1.0 - 1.0 / pf).powi(-3)
}

/// Truncated singular series with a reported tail bound.
pub fn singular_series(
    q0: u64,
    kind: SeriesKind,
    p_cutoff: u64,
    w: u64,
) -> Result<SingularSeries, LocalError> {
    let norm = compute_w_normalization(w, q0)?;
    let mut value = 1.0f64;
    for p in primes_up_to(p_cutoff) {
        value *= match kind {
            SeriesKind::Core => sigma_p(&norm, p),
            SeriesKind::Residual => beta_p(&norm, p),
        };
    }
    Ok(SingularSeries {
        kind,
        p_cutoff,
        value,
        log_tail_bound: TAIL_CONSTANT / p_cutoff as f64,
    })
}

/// Per-prime exact counts and densities, one row per prime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalDensityRow {
    pub p: u64,
    pub core_count: u64,
    pub g1: Option<(u64, u64)>,
    pub g2: Option<(u64, u64)>,
    pub g_delta: Option<(u64, u64)>,
    pub sigma_p: f64,
    pub beta_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalDensityTable {
    pub q0: u64,
    pub w: u64,
    pub big_w: u64,
    pub rows: Vec<LocalDensityRow>,
}

const MAX_TABLE_PRIME: u64 = 5000;

/// Exact per-prime table for all p <= p_max.
pub fn local_density_table(q0: u64, w: u64, p_max: u64) -> Result<LocalDensityTable, LocalError> {
    if p_max > MAX_TABLE_PRIME {
        return Err(LocalError::TooLarge(p_max));
    }
    let norm = compute_w_normalization(w, q0)?;
    let mut rows = Vec::new();
    for p in primes_up_to(p_max) {
        let defined = p != 2 && !q0.is_multiple_of(p);
        let g = |star| defined.then(|| g_star(p, q0, star).expect("defined"));
        rows.push(LocalDensityRow {
            p,
            core_count: local_core_count(p, q0),
            g1: g(Star::One),
            g2: g(Star::Two),
            g_delta: g(Star::Delta),
            sigma_p: sigma_p(&norm, p),
            beta_p: beta_p(&norm, p),
        });
    }
    Ok(LocalDensityTable { q0, w, big_w: norm.big_w, rows })
}
