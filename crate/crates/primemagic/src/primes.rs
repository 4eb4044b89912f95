//! Exact primality, windowed sieving, and the arithmetic weights ϑ and Λ.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::AffineForm;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PrimesError {
    #[error("sieve window [{lo}, {hi}) outside supported range")]
    BadWindow { lo: u64, hi: u64 },
    #[error("sieve window of {span} values exceeds the memory budget")]
    Resource { span: u64 },
}

/// Largest value any primality-bearing quantity may take (2^62).
pub const VALUE_CAP: u64 = 1 << 62;

const MAX_SIEVE_SPAN: u64 = 1 << 30;
const MAX_BASE_LIMIT: u64 = 1 << 28;

// Jim Sinclair's witness set: deterministic for all n < 2^64.
const MR_BASES: [u64; 7] = [2, 325, 9375, 28178, 450775, 9780504, 1795265022];

const SMALL_PRIMES: [u64; 15] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47];

pub(crate) fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub(crate) fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc: u64 = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic primality for the full u64 range.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &SMALL_PRIMES {
        if n == p {
            return true;
        }
        if n.is_multiple_of(p) {
            return false;
        }
    }
    // n odd, > 47*47 would be needed for a missed small factor; MR settles it.
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &MR_BASES {
        let a = a % n;
        if a == 0 {
            continue;
        }
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Integer k-th root by floating guess plus fixup.
fn iroot(n: u64, k: u32) -> u64 {
    if n == 0 {
        return 0;
    }
    let mut r = (n as f64).powf(1.0 / k as f64).round() as u64;
    while r > 1 && r.checked_pow(k).is_none_or(|v| v > n) {
        r -= 1;
    }
    while (r + 1).checked_pow(k).is_some_and(|v| v <= n) {
        r += 1;
    }
    r
}

/// If n = p^k for a prime p and k >= 1, returns p.
pub fn prime_power_base(n: u64) -> Option<u64> {
    if n < 2 {
        return None;
    }
    if is_prime(n) {
        return Some(n);
    }
    for k in 2..=n.ilog2() {
        let r = iroot(n, k);
        if r >= 2 && r.checked_pow(k) == Some(n) && is_prime(r) {
            return Some(r);
        }
    }
    None
}

/// Arithmetic weight placed on each form value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightKind {
    /// log n on the primes, 0 elsewhere.
    Theta,
    /// von Mangoldt: log p on prime powers p^k, 0 elsewhere.
    Lambda,
    /// 1 on the primes, 0 elsewhere.
    Indicator,
}

impl std::str::FromStr for WeightKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "theta" => Ok(WeightKind::Theta),
            "lambda" => Ok(WeightKind::Lambda),
            "indicator" => Ok(WeightKind::Indicator),
            other => Err(format!("unknown weight kind {other:?} (theta|lambda|indicator)")),
        }
    }
}

impl std::fmt::Display for WeightKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WeightKind::Theta => "theta",
            WeightKind::Lambda => "lambda",
            WeightKind::Indicator => "indicator",
        })
    }
}

/// ϑ(n), Λ(n) or the prime indicator.
pub fn weight(kind: WeightKind, n: u64) -> f64 {
    match kind {
        WeightKind::Theta => {
            if is_prime(n) {
                (n as f64).ln()
            } else {
                0.0
            }
        }
        WeightKind::Lambda => match prime_power_base(n) {
            Some(p) => (p as f64).ln(),
            None => 0.0,
        },
        WeightKind::Indicator => {
            if is_prime(n) {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Primality flags for a window [lo, hi), one bit per value.
pub struct PrimalityBitmap {
    lo: u64,
    len: u64,
    words: Vec<u64>,
}

impl PrimalityBitmap {
    /// Bit i corresponds to lo + i.
    pub fn get(&self, i: u64) -> bool {
        debug_assert!(i < self.len);
        self.words[(i / 64) as usize] >> (i % 64) & 1 == 1
    }

    /// Flag for an absolute value inside the window.
    pub fn is_prime_at(&self, n: u64) -> bool {
        assert!(n >= self.lo && n < self.lo + self.len, "value outside window");
        self.get(n - self.lo)
    }

    pub fn lo(&self) -> u64 {
        self.lo
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn count_primes(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    fn clear(&mut self, i: u64) {
        self.words[(i / 64) as usize] &= !(1 << (i % 64));
    }
}

/// Simple bit-packed sieve of [0, limit].
fn base_sieve(limit: u64) -> Vec<u64> {
    let words = (limit / 64 + 1) as usize;
    let mut bits = vec![!0u64; words];
    let set = |bits: &mut [u64], i: u64, v: bool| {
        if v {
            bits[(i / 64) as usize] |= 1 << (i % 64);
        } else {
            bits[(i / 64) as usize] &= !(1 << (i % 64));
        }
    };
    let get = |bits: &[u64], i: u64| bits[(i / 64) as usize] >> (i % 64) & 1 == 1;
    set(&mut bits, 0, false);
    if limit >= 1 {
        set(&mut bits, 1, false);
    }
    let mut p = 2u64;
    while p * p <= limit {
        if get(&bits, p) {
            let mut m = p * p;
            while m <= limit {
                set(&mut bits, m, false);
                m += p;
            }
        }
        p += 1;
    }
    bits
}

/// Segmented sieve over [lo, hi); agrees with `is_prime` pointwise.
pub fn sieve_range(lo: u64, hi: u64) -> Result<PrimalityBitmap, PrimesError> {
    if lo < 2 || lo >= hi || hi > VALUE_CAP {
        return Err(PrimesError::BadWindow { lo, hi });
    }
    let span = hi - lo;
    let root = (hi - 1).isqrt();
    if span > MAX_SIEVE_SPAN || root > MAX_BASE_LIMIT {
        return Err(PrimesError::Resource { span });
    }
    let mut bm = PrimalityBitmap {
        lo,
        len: span,
        words: vec![!0u64; (span as usize).div_ceil(64)],
    };
    // mask the tail bits beyond the window
    let tail = span % 64;
    if tail != 0 {
        *bm.words.last_mut().unwrap() = (1u64 << tail) - 1;
    }
    let base = base_sieve(root);
    let get = |bits: &[u64], i: u64| bits[(i / 64) as usize] >> (i % 64) & 1 == 1;
    for p in 2..=root {
        if !get(&base, p) {
            continue;
        }
        let mut start = lo.div_ceil(p) * p;
        if start < p * p {
            start = p * p;
        }
        let mut m = start;
        while m < hi {
            bm.clear(m - lo);
            m += p;
        }
    }
    Ok(bm)
}

/// All primes up to and including `n`.
pub fn primes_up_to(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let bits = base_sieve(n);
    let get = |i: u64| bits[(i / 64) as usize] >> (i % 64) & 1 == 1;
    (2..=n).filter(|&i| get(i)).collect()
}

/// Sorted list of prime powers p^k with k >= 2 up to `limit`.
pub fn proper_prime_powers_up_to(limit: u64) -> Vec<u64> {
    let mut out = Vec::new();
    for p in primes_up_to(limit.isqrt()) {
        let mut v = p * p;
        loop {
            out.push(v);
            match v.checked_mul(p) {
                Some(next) if next <= limit => v = next,
                _ => break,
            }
        }
    }
    out.sort_unstable();
    out
}

/// Counts pairs (t, u) in the window [1, x]^2 whose form value is a prime
/// power p^k with k >= 2. Fibers along a missing variable count in full.
pub fn prime_power_scan(form: &AffineForm, x: u64) -> u64 {
    if x == 0 || (form.coeff_t == 0 && form.coeff_u == 0) {
        return 0;
    }
    let xi = x as i64;
    let vmax = form.constant + (form.coeff_t + form.coeff_u) * xi;
    if vmax < 4 {
        return 0;
    }
    let pps = proper_prime_powers_up_to(vmax as u64);
    let in_window = |v: i64| v >= 1 && v <= xi;
    let mut count = 0u64;
    match (form.coeff_t, form.coeff_u) {
        (a, 0) => {
            for &s in &pps {
                let s = s as i64;
                let r = s - form.constant;
                if r > 0 && r % a == 0 && in_window(r / a) {
                    count += x; // full u-fiber
                }
            }
        }
        (0, b) => {
            for &s in &pps {
                let s = s as i64;
                let r = s - form.constant;
                if r > 0 && r % b == 0 && in_window(r / b) {
                    count += x;
                }
            }
        }
        (a, b) => {
            for t in 1..=xi {
                let base = form.constant + a * t;
                for &s in &pps {
                    let s = s as i64;
                    if s <= base {
                        continue;
                    }
                    if s > base + b * xi {
                        break;
                    }
                    let r = s - base;
                    if r % b == 0 && in_window(r / b) {
                        count += 1;
                    }
                }
            }
        }
    }
    count
}
