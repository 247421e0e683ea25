//! Arithmetic over GF(2^8) and the dense linear algebra used by coding,
//! decoding and innovation checks.
//!
//! Elements are bytes; addition is XOR and multiplication is polynomial
//! multiplication modulo the irreducible polynomial x^8 + x^4 + x^3 + x + 1
//! (0x11B). Products are served from a full 256x256 table that is built at
//! compile time from a bitwise shift-and-reduce routine, so every entry is
//! the brute-force product by construction.

use thiserror::Error;

/// Reduction mask of the field polynomial 0x11B (low 8 bits after x^8).
const POLY: u8 = 0x1B;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GfError {
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("system is rank deficient (rank {rank}, need {need})")]
    RankDeficient { rank: usize, need: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

const fn mul_slow(mut a: u8, mut b: u8) -> u8 {
    let mut acc = 0u8;
    while b != 0 {
        if b & 1 != 0 {
            acc ^= a;
        }
        let overflow = a & 0x80 != 0;
        a <<= 1;
        if overflow {
            a ^= POLY;
        }
        b >>= 1;
    }
    acc
}

const fn build_mul_table() -> [[u8; 256]; 256] {
    let mut t = [[0u8; 256]; 256];
    let mut a = 0usize;
    while a < 256 {
        let mut b = 0usize;
        while b < 256 {
            t[a][b] = mul_slow(a as u8, b as u8);
            b += 1;
        }
        a += 1;
    }
    t
}

const fn build_inv_table() -> [u8; 256] {
    let mut t = [0u8; 256];
    let mut a = 1usize;
    while a < 256 {
        let mut b = 1usize;
        while b < 256 {
            if mul_slow(a as u8, b as u8) == 1 {
                t[a] = b as u8;
                break;
            }
            b += 1;
        }
        a += 1;
    }
    t
}

static MUL: [[u8; 256]; 256] = build_mul_table();
static INV: [u8; 256] = build_inv_table();

/// An element of GF(2^8).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
#[repr(transparent)]
pub struct Gf256(pub u8);

impl Gf256 {
    pub const ZERO: Self = Self(0);
    pub const ONE: Self = Self(1);

    #[inline]
    pub const fn new(v: u8) -> Self {
        Self(v)
    }

    #[inline]
    pub const fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Multiplicative inverse; zero is a domain error.
    #[inline]
    pub fn inv(self) -> Result<Self, GfError> {
        if self.0 == 0 {
            return Err(GfError::ZeroInverse);
        }
        Ok(Self(INV[self.0 as usize]))
    }

    /// Row of the product table for this element, used for byte-wise
    /// payload arithmetic.
    #[inline]
    pub(crate) fn mul_row(self) -> &'static [u8; 256] {
        &MUL[self.0 as usize]
    }
}

impl std::ops::Add for Gf256 {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self(self.0 ^ rhs.0)
    }
}

impl std::ops::AddAssign for Gf256 {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        self.0 ^= rhs.0;
    }
}

impl std::ops::Sub for Gf256 {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        // Characteristic 2: subtraction is addition.
        self + rhs
    }
}

impl std::ops::Mul for Gf256 {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        Self(MUL[self.0 as usize][rhs.0 as usize])
    }
}

impl std::ops::MulAssign for Gf256 {
    #[inline]
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl From<u8> for Gf256 {
    fn from(v: u8) -> Self {
        Self(v)
    }
}

/// `dst[i] += c * src[i]` applied byte-wise over payloads.
#[inline]
pub fn add_scaled(dst: &mut [u8], src: &[u8], c: Gf256) {
    debug_assert_eq!(dst.len(), src.len());
    if c.is_zero() {
        return;
    }
    let row = c.mul_row();
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= row[*s as usize];
    }
}

/// `dst[i] *= c` byte-wise.
#[inline]
pub fn scale(dst: &mut [u8], c: Gf256) {
    let row = c.mul_row();
    for d in dst.iter_mut() {
        *d = row[*d as usize];
    }
}

/// Dense matrix over GF(2^8) with from-scratch rank and solve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matrix {
    rows: Vec<Vec<Gf256>>,
    width: usize,
}

impl Matrix {
    pub fn new(rows: Vec<Vec<Gf256>>) -> Result<Self, GfError> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(GfError::Dimension("rows differ in length".into()));
        }
        Ok(Self { rows, width })
    }

    pub fn identity(n: usize) -> Self {
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![Gf256::ZERO; n];
                r[i] = Gf256::ONE;
                r
            })
            .collect();
        Self { rows, width: n }
    }

    pub fn height(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rows(&self) -> &[Vec<Gf256>] {
        &self.rows
    }

    /// Row rank by Gaussian elimination on a scratch copy.
    pub fn rank(&self) -> usize {
        let mut work = self.rows.clone();
        let mut rank = 0;
        for col in 0..self.width {
            let Some(pivot) = (rank..work.len()).find(|&r| !work[r][col].is_zero()) else {
                continue;
            };
            work.swap(rank, pivot);
            let inv = work[rank][col].inv().expect("pivot is nonzero");
            for v in work[rank].iter_mut() {
                *v *= inv;
            }
            let pivot_row = work[rank].clone();
            for (r, row) in work.iter_mut().enumerate() {
                if r != rank && !row[col].is_zero() {
                    let f = row[col];
                    for (v, p) in row.iter_mut().zip(&pivot_row) {
                        *v += f * *p;
                    }
                }
            }
            rank += 1;
            if rank == work.len() {
                break;
            }
        }
        rank
    }

    /// Solves `self * n = payloads` for the native payload rows `n`.
    ///
    /// Requires full column rank; payload rows mirror every row operation
    /// byte-wise, so the result is exact.
    pub fn solve(&self, payloads: &[Vec<u8>]) -> Result<Vec<Vec<u8>>, GfError> {
        if payloads.len() != self.rows.len() {
            return Err(GfError::Dimension(format!(
                "{} payload rows for {} coefficient rows",
                payloads.len(),
                self.rows.len()
            )));
        }
        let payload_len = payloads.first().map_or(0, Vec::len);
        if payloads.iter().any(|p| p.len() != payload_len) {
            return Err(GfError::Dimension("payload rows differ in length".into()));
        }
        let mut coeff = self.rows.clone();
        let mut data = payloads.to_vec();
        let mut pivot_of_col = vec![usize::MAX; self.width];
        let mut rank = 0;
        for col in 0..self.width {
            let Some(pivot) = (rank..coeff.len()).find(|&r| !coeff[r][col].is_zero()) else {
                continue;
            };
            coeff.swap(rank, pivot);
            data.swap(rank, pivot);
            let inv = coeff[rank][col].inv().expect("pivot is nonzero");
            for v in coeff[rank].iter_mut() {
                *v *= inv;
            }
            scale(&mut data[rank], inv);
            let coeff_row = coeff[rank].clone();
            let data_row = data[rank].clone();
            for r in 0..coeff.len() {
                if r != rank && !coeff[r][col].is_zero() {
                    let f = coeff[r][col];
                    for (v, p) in coeff[r].iter_mut().zip(&coeff_row) {
                        *v += f * *p;
                    }
                    add_scaled(&mut data[r], &data_row, f);
                }
            }
            pivot_of_col[col] = rank;
            rank += 1;
            if rank == coeff.len() {
                break;
            }
        }
        if rank < self.width {
            return Err(GfError::RankDeficient {
                rank,
                need: self.width,
            });
        }
        Ok(pivot_of_col
            .iter()
            .map(|&r| data[r].clone())
            .collect())
    }

    /// `self * natives`, byte-wise; the encoding direction, handy for checks.
    pub fn mul_payloads(&self, natives: &[Vec<u8>]) -> Result<Vec<Vec<u8>>, GfError> {
        if natives.len() != self.width {
            return Err(GfError::Dimension(format!(
                "{} native rows for width {}",
                natives.len(),
                self.width
            )));
        }
        let len = natives.first().map_or(0, Vec::len);
        Ok(self
            .rows
            .iter()
            .map(|row| {
                let mut out = vec![0u8; len];
                for (c, n) in row.iter().zip(natives) {
                    add_scaled(&mut out, n, *c);
                }
                out
            })
            .collect())
    }
}

/// Progressively row-reduced matrix with incremental rank tracking.
///
/// Rows are kept normalized (leading coefficient 1) and fully reduced
/// against each other, so an insertion is O(rank * width).
#[derive(Debug, Clone)]
pub struct Echelon {
    width: usize,
    rows: Vec<Vec<Gf256>>,
    pivots: Vec<usize>,
}

impl Echelon {
    pub fn new(width: usize) -> Self {
        Self {
            width,
            rows: Vec::new(),
            pivots: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    fn reduce(&self, row: &[Gf256]) -> Option<(usize, Vec<Gf256>)> {
        let mut work = row.to_vec();
        for (stored, &pivot) in self.rows.iter().zip(&self.pivots) {
            let f = work[pivot];
            if !f.is_zero() {
                for (w, s) in work.iter_mut().zip(stored) {
                    *w += f * *s;
                }
            }
        }
        let lead = work.iter().position(|v| !v.is_zero())?;
        let inv = work[lead].inv().expect("lead is nonzero");
        for v in work.iter_mut() {
            *v *= inv;
        }
        Some((lead, work))
    }

    /// True iff inserting `row` would increase the rank; no mutation.
    pub fn would_increase(&self, row: &[Gf256]) -> bool {
        debug_assert_eq!(row.len(), self.width);
        self.reduce(row).is_some()
    }

    /// Inserts the row in reduced form; returns whether the rank grew.
    pub fn insert(&mut self, row: &[Gf256]) -> bool {
        debug_assert_eq!(row.len(), self.width);
        let Some((lead, reduced)) = self.reduce(row) else {
            return false;
        };
        // Back-eliminate the new pivot column from the stored rows.
        for stored in self.rows.iter_mut() {
            let f = stored[lead];
            if !f.is_zero() {
                for (s, r) in stored.iter_mut().zip(&reduced) {
                    *s += f * *r;
                }
            }
        }
        self.rows.push(reduced);
        self.pivots.push(lead);
        true
    }
}
