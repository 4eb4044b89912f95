//! Exact integer algebra of 3x3 magic squares: the universal (e, t, u)
//! parametrization, the q0-insertion family, the eight moving forms with
//! their core/residual split, and full verification of prime squares.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::primes::is_prime;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("arithmetic overflow while building a square entry")]
    Overflow,
    #[error("input square violates a line-sum invariant")]
    NotMagic,
    #[error("q0 = {0} is a structural small obstruction; no prime magic square contains it")]
    SmallObstruction(u64),
    #[error("q0 = {0} is not prime")]
    NotPrime(u64),
    #[error("q0 = {0} exceeds the supported range")]
    TooLarge(u64),
}

/// A 3x3 integer square, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MagicSquare {
    pub entries: [[i64; 3]; 3],
}

/// Center and the two free offsets (t = a - e, u = c - e).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamTriple {
    pub e: i64,
    pub t: i64,
    pub u: i64,
}

/// constant + coeff_t * t + coeff_u * u
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffineForm {
    pub constant: i64,
    pub coeff_t: i64,
    pub coeff_u: i64,
}

impl AffineForm {
    pub fn evaluate(&self, t: i64, u: i64) -> Option<i64> {
        self.coeff_t
            .checked_mul(t)?
            .checked_add(self.coeff_u.checked_mul(u)?)?
            .checked_add(self.constant)
    }

    pub fn direction(&self) -> (i64, i64) {
        (self.coeff_t, self.coeff_u)
    }
}

/// Homogeneous coefficient table for L1..L8, in fixed equation order.
pub const FORM_COEFFS: [(i64, i64); 8] =
    [(2, 1), (1, 2), (0, 2), (1, 1), (2, 0), (1, 0), (2, 2), (0, 1)];

/// Positions of A1..A5 inside L1..L8.
pub const CORE_INDICES: [usize; 5] = [5, 7, 3, 0, 1];
/// Positions of B1..B3 inside L1..L8.
pub const RESIDUAL_INDICES: [usize; 3] = [4, 2, 6];

/// The eight moving forms attached to a fixed prime q0 placed at cell (1,2).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormSystem {
    pub q0: u64,
    pub forms: [AffineForm; 8],
    pub core_indices: [usize; 5],
    pub residual_indices: [usize; 3],
}

impl MagicSquare {
    pub fn new(entries: [[i64; 3]; 3]) -> Self {
        MagicSquare { entries }
    }

    pub fn center(&self) -> i64 {
        self.entries[1][1]
    }

    /// Rows, columns, then the two diagonals.
    pub fn line_sums(&self) -> Option<[i64; 8]> {
        let e = &self.entries;
        let add3 = |a: i64, b: i64, c: i64| a.checked_add(b)?.checked_add(c);
        Some([
            add3(e[0][0], e[0][1], e[0][2])?,
            add3(e[1][0], e[1][1], e[1][2])?,
            add3(e[2][0], e[2][1], e[2][2])?,
            add3(e[0][0], e[1][0], e[2][0])?,
            add3(e[0][1], e[1][1], e[2][1])?,
            add3(e[0][2], e[1][2], e[2][2])?,
            add3(e[0][0], e[1][1], e[2][2])?,
            add3(e[0][2], e[1][1], e[2][0])?,
        ])
    }

    pub fn is_magic(&self) -> bool {
        match self.line_sums() {
            Some(sums) => sums.iter().all(|&s| s == sums[0]),
            None => false,
        }
    }

    pub fn magic_constant(&self) -> Option<i64> {
        let sums = self.line_sums()?;
        sums.iter().all(|&s| s == sums[0]).then_some(sums[0])
    }

    pub fn row_major(&self) -> [i64; 9] {
        let e = &self.entries;
        [
            e[0][0], e[0][1], e[0][2], e[1][0], e[1][1], e[1][2], e[2][0], e[2][1], e[2][2],
        ]
    }

    pub fn contains(&self, v: i64) -> bool {
        self.row_major().contains(&v)
    }
}

impl std::fmt::Display for MagicSquare {
    /// Nine entries, row-major, comma-separated.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let flat = self.row_major();
        let strs: Vec<String> = flat.iter().map(|v| v.to_string()).collect();
        f.write_str(&strs.join(","))
    }
}

impl std::str::FromStr for MagicSquare {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let vals: Result<Vec<i64>, _> = s.split(',').map(|p| p.trim().parse::<i64>()).collect();
        let vals = vals.map_err(|e| format!("bad square entry: {e}"))?;
        if vals.len() != 9 {
            return Err(format!("expected 9 entries, got {}", vals.len()));
        }
        Ok(MagicSquare::new([
            [vals[0], vals[1], vals[2]],
            [vals[3], vals[4], vals[5]],
            [vals[6], vals[7], vals[8]],
        ]))
    }
}

/// Builds the square of the universal parametrization; magic constant is 3e.
pub fn square_from_center_params(e: i64, t: i64, u: i64) -> Result<MagicSquare, AlgebraError> {
    let add = |a: i64, b: i64| a.checked_add(b).ok_or(AlgebraError::Overflow);
    let sub = |a: i64, b: i64| a.checked_sub(b).ok_or(AlgebraError::Overflow);
    let tu = t.checked_add(u).ok_or(AlgebraError::Overflow)?;
    let square = MagicSquare::new([
        [add(e, t)?, sub(e, tu)?, add(e, u)?],
        [add(sub(e, t)?, u)?, e, sub(add(e, t)?, u)?],
        [sub(e, u)?, add(e, tu)?, sub(e, t)?],
    ]);
    // 3e must also be representable, or line sums overflow downstream
    e.checked_mul(3).ok_or(AlgebraError::Overflow)?;
    Ok(square)
}

/// Inverse of the parametrization; exact round-trip on magic input.
pub fn params_from_square(sq: &MagicSquare) -> Result<ParamTriple, AlgebraError> {
    if !sq.is_magic() {
        return Err(AlgebraError::NotMagic);
    }
    let e = sq.center();
    Ok(ParamTriple {
        e,
        t: sq.entries[0][0] - e,
        u: sq.entries[0][2] - e,
    })
}

/// The eight forms for a prescribed prime q0 >= 5, with the core/residual split.
pub fn forms_for(q0: u64) -> Result<FormSystem, AlgebraError> {
    if q0 == 2 || q0 == 3 {
        return Err(AlgebraError::SmallObstruction(q0));
    }
    if q0 > crate::primes::VALUE_CAP {
        return Err(AlgebraError::TooLarge(q0));
    }
    if !is_prime(q0) {
        return Err(AlgebraError::NotPrime(q0));
    }
    let c = q0 as i64;
    let forms = FORM_COEFFS.map(|(ct, cu)| AffineForm {
        constant: c,
        coeff_t: ct,
        coeff_u: cu,
    });
    Ok(FormSystem {
        q0,
        forms,
        core_indices: CORE_INDICES,
        residual_indices: RESIDUAL_INDICES,
    })
}

impl FormSystem {
    /// Values of L1..L8 at (t, u), in equation order.
    pub fn evaluate(&self, t: i64, u: i64) -> Result<[i64; 8], AlgebraError> {
        let mut out = [0i64; 8];
        for (slot, form) in out.iter_mut().zip(self.forms.iter()) {
            *slot = form.evaluate(t, u).ok_or(AlgebraError::Overflow)?;
        }
        Ok(out)
    }

    /// The member square M_{q0}(t, u) of the insertion family.
    pub fn square(&self, t: i64, u: i64) -> Result<MagicSquare, AlgebraError> {
        let v = self.evaluate(t, u)?;
        Ok(MagicSquare::new([
            [v[0], self.q0 as i64, v[1]],
            [v[2], v[3], v[4]],
            [v[5], v[6], v[7]],
        ]))
    }

    pub fn core(&self) -> [&AffineForm; 5] {
        self.core_indices.map(|i| &self.forms[i])
    }

    pub fn residuals(&self) -> [&AffineForm; 3] {
        self.residual_indices.map(|i| &self.forms[i])
    }

    pub fn core_directions(&self) -> [(i64, i64); 5] {
        self.core_indices.map(|i| self.forms[i].direction())
    }
}

/// Per-contract booleans for a claimed prime magic square; all are always
/// computed so a report shows every failure at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub is_magic: bool,
    pub all_positive: bool,
    pub all_prime: bool,
    pub all_distinct: bool,
    pub contains_q0: bool,
}

impl VerificationReport {
    pub fn pass(&self) -> bool {
        self.is_magic && self.all_positive && self.all_prime && self.all_distinct && self.contains_q0
    }
}

impl std::fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "magic={} positive={} prime={} distinct={} contains_q0={} => {}",
            self.is_magic,
            self.all_positive,
            self.all_prime,
            self.all_distinct,
            self.contains_q0,
            if self.pass() { "PASS" } else { "FAIL" },
        )
    }
}

/// Checks all contracts of a prime magic square containing q0.
pub fn verify_prime_magic(sq: &MagicSquare, q0: u64) -> VerificationReport {
    let flat = sq.row_major();
    let all_positive = flat.iter().all(|&v| v > 0);
    let all_prime = flat.iter().all(|&v| v > 0 && is_prime(v as u64));
    let mut sorted = flat;
    sorted.sort_unstable();
    let all_distinct = sorted.windows(2).all(|w| w[0] != w[1]);
    let contains_q0 = i64::try_from(q0).map(|v| sq.contains(v)).unwrap_or(false);
    VerificationReport {
        is_magic: sq.is_magic(),
        all_positive,
        all_prime,
        all_distinct,
        contains_q0,
    }
}
