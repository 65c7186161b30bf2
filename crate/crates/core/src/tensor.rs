//! Linear algebra on tensor products of `N x N` matrix algebras, one factor per string.
//!
//! A full-space index is a tuple in `[N]^S` encoded mixed-radix with the lowest string
//! most significant. Matrices supported on a subset of strings act as `X ⊗ I`.

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{saturating_pow, Error, GuardKind, Guards, Result};
use crate::scalar::Scalar;

/// Index space `[N]^strings` with strings sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiIndexSpace {
    strings: Vec<usize>,
    n: usize,
}

impl MultiIndexSpace {
    /// Sorts and deduplicates `strings`.
    pub fn new(mut strings: Vec<usize>, n: usize) -> Self {
        strings.sort_unstable();
        strings.dedup();
        MultiIndexSpace { strings, n }
    }

    /// `[N]^{0..string_count}`.
    pub fn full(string_count: usize, n: usize) -> Self {
        MultiIndexSpace {
            strings: (0..string_count).collect(),
            n,
        }
    }

    pub fn strings(&self) -> &[usize] {
        &self.strings
    }

    pub fn side(&self) -> usize {
        self.n
    }

    /// `N^{#strings}`, saturating.
    pub fn total_dim(&self) -> u128 {
        saturating_pow(self.n as u128, self.strings.len())
    }

    /// `total_dim` as a `usize`; panics if it does not fit.
    pub fn dim(&self) -> usize {
        usize::try_from(self.total_dim()).expect("dimension exceeds usize")
    }

    pub fn encode(&self, idx: &[usize]) -> Result<usize> {
        if idx.len() != self.strings.len() {
            return Err(Error::SizeMismatch(format!(
                "tuple of length {} for {} strings",
                idx.len(),
                self.strings.len()
            )));
        }
        idx.iter().try_fold(0usize, |acc, &d| {
            if d >= self.n {
                Err(Error::InvalidInput(format!("component {d} out of range [0,{})", self.n)))
            } else {
                Ok(acc * self.n + d)
            }
        })
    }

    pub fn decode(&self, mut code: usize) -> Vec<usize> {
        let mut out = vec![0; self.strings.len()];
        for slot in out.iter_mut().rev() {
            *slot = code % self.n;
            code /= self.n;
        }
        out
    }

    /// Coordinates of a sub-support inside this space.
    pub fn sub_index(&self, support: &[usize]) -> Result<SubIndex> {
        let len = self.strings.len();
        let strides = support
            .iter()
            .map(|s| {
                let pos = self.strings.binary_search(s).map_err(|_| {
                    Error::InvalidInput(format!("string {s} not in space {:?}", self.strings))
                })?;
                Ok(self.n.pow((len - 1 - pos) as u32))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SubIndex {
            strides,
            n: self.n,
        })
    }
}

/// Extraction and replacement of the coordinates of a sub-support within full indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubIndex {
    /// Full-space stride of each support string, in support order.
    strides: Vec<usize>,
    n: usize,
}

impl SubIndex {
    pub fn local_dim(&self) -> usize {
        self.n.pow(self.strides.len() as u32)
    }

    /// Support coordinates of `full`, encoded in the support's own space.
    pub fn local(&self, full: usize) -> usize {
        self.strides
            .iter()
            .fold(0, |acc, &st| acc * self.n + (full / st) % self.n)
    }

    /// Full-space offset contributed by a local index.
    pub fn offset(&self, mut local: usize) -> usize {
        let mut off = 0;
        for &st in self.strides.iter().rev() {
            off += (local % self.n) * st;
            local /= self.n;
        }
        off
    }

    /// `full` with its support coordinates zeroed.
    pub fn rest(&self, full: usize) -> usize {
        full - self.offset(self.local(full))
    }

    /// `full` with its support coordinates replaced by those of `local`.
    pub fn replace(&self, full: usize, local: usize) -> usize {
        self.rest(full) + self.offset(local)
    }
}

/// A bijection of `0..n`; `images[i]` is the image of `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "PermutationFile", into = "PermutationFile")]
pub struct Permutation {
    images: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct PermutationFile {
    n: usize,
    images: Vec<usize>,
}

impl TryFrom<PermutationFile> for Permutation {
    type Error = Error;
    fn try_from(f: PermutationFile) -> Result<Self> {
        if f.images.len() != f.n {
            return Err(Error::SizeMismatch(format!(
                "n = {} but {} images",
                f.n,
                f.images.len()
            )));
        }
        Permutation::new(f.images)
    }
}

impl From<Permutation> for PermutationFile {
    fn from(p: Permutation) -> Self {
        PermutationFile {
            n: p.len(),
            images: p.images,
        }
    }
}

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; images.len()];
        for &x in &images {
            if x >= images.len() || std::mem::replace(&mut seen[x], true) {
                return Err(Error::InvalidInput(format!("{images:?} is not a bijection")));
            }
        }
        Ok(Permutation { images })
    }

    pub fn identity(n: usize) -> Self {
        Permutation {
            images: (0..n).collect(),
        }
    }

    /// `i -> i + 1 mod n`.
    pub fn cycle(n: usize) -> Self {
        Permutation {
            images: (0..n).map(|i| (i + 1) % n).collect(),
        }
    }

    /// Uniform draw from the symmetric group (Fisher-Yates).
    pub fn sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("cannot sample a permutation of 0 points".into()));
        }
        let mut images: Vec<usize> = (0..n).collect();
        images.shuffle(rng);
        Ok(Permutation { images })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn apply(&self, i: usize) -> usize {
        self.images[i]
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (i, &x) in self.images.iter().enumerate() {
            inv[x] = i;
        }
        Permutation { images: inv }
    }

    /// `self ∘ other`: apply `other` first. Its matrix is `P_self · P_other`.
    pub fn compose(&self, other: &Permutation) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::SizeMismatch(format!(
                "composing permutations of {} and {} points",
                self.len(),
                other.len()
            )));
        }
        Ok(Permutation {
            images: other.images.iter().map(|&x| self.images[x]).collect(),
        })
    }

    pub fn pow(&self, e: i64) -> Self {
        let base = if e < 0 { self.inverse() } else { self.clone() };
        let mut acc = Permutation::identity(self.len());
        for _ in 0..e.unsigned_abs() {
            acc = base.compose(&acc).expect("same size");
        }
        acc
    }

    pub fn fixed_points(&self) -> usize {
        self.images.iter().enumerate().filter(|&(i, &x)| i == x).count()
    }

    pub fn is_identity(&self) -> bool {
        self.fixed_points() == self.len()
    }

    /// The matrix `P` with `P e_a = e_{σ(a)}`.
    pub fn matrix<T: Scalar>(&self) -> Matrix<T> {
        let n = self.len();
        let mut m = Matrix::zeros(n, n);
        for (a, &b) in self.images.iter().enumerate() {
            m.set(b, a, T::one());
        }
        m
    }

    /// Conjugate `σ⁻¹ ∘ self ∘ σ`, the permutation of `Σ* P Σ`.
    pub fn conjugate_by(&self, sigma: &Permutation) -> Result<Self> {
        sigma.inverse().compose(&self.compose(sigma)?)
    }
}

/// Dense row-major matrix over a [`Scalar`].
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, T::one());
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::SizeMismatch("ragged rows".into()));
        }
        Ok(Matrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    /// From small integers, for tests and fixtures.
    pub fn from_i64_rows(rows: &[Vec<i64>]) -> Result<Self> {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&v| T::from_i64(v)).collect())
                .collect(),
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn mul(&self, other: &Matrix<T>) -> Result<Matrix<T>> {
        if self.cols != other.rows {
            return Err(Error::SizeMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::<T>::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    if !b.is_zero() {
                        let idx = i * out.cols + j;
                        out.data[idx] = out.data[idx].clone() + a.clone() * b.clone();
                    }
                }
            }
        }
        Ok(out)
    }

    fn zip(&self, other: &Matrix<T>, f: impl Fn(T, T) -> T) -> Result<Matrix<T>> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::SizeMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| f(a.clone(), b.clone()))
                .collect(),
        })
    }

    pub fn add(&self, other: &Matrix<T>) -> Result<Matrix<T>> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix<T>) -> Result<Matrix<T>> {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, c: &T) -> Matrix<T> {
        self.map(|x| x.clone() * c.clone())
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Matrix<T> {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).fold(T::zero(), |acc, i| acc + self.get(i, i).clone())
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.rows.min(self.cols))
            .map(|i| self.get(i, i).clone())
            .collect()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.rows).all(|i| (0..self.cols).all(|j| i == j || self.get(i, j).is_zero()))
    }

    /// `A ⊗ B` with `A` indexing the most significant factor.
    pub fn kron(&self, other: &Matrix<T>) -> Matrix<T> {
        Matrix::from_fn(self.rows * other.rows, self.cols * other.cols, |i, j| {
            self.get(i / other.rows, j / other.cols).clone()
                * other.get(i % other.rows, j % other.cols).clone()
        })
    }

    /// `Σ |a_ij|^2` in the field.
    pub fn frobenius_sq(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, x| acc + x.norm_sqr())
    }

    /// `M · D` for a diagonal `D`: column scaling.
    pub fn scale_columns(&self, d: &DiagonalMatrix<T>) -> Result<Matrix<T>> {
        if d.dim() != self.cols {
            return Err(Error::SizeMismatch(format!(
                "diagonal of size {} against {} columns",
                d.dim(),
                self.cols
            )));
        }
        Ok(Matrix::from_fn(self.rows, self.cols, |i, j| {
            self.get(i, j).clone() * d.entries()[j].clone()
        }))
    }

    /// `D · M` for a diagonal `D`: row scaling.
    pub fn scale_rows(&self, d: &DiagonalMatrix<T>) -> Result<Matrix<T>> {
        if d.dim() != self.rows {
            return Err(Error::SizeMismatch(format!(
                "diagonal of size {} against {} rows",
                d.dim(),
                self.rows
            )));
        }
        Ok(Matrix::from_fn(self.rows, self.cols, |i, j| {
            d.entries()[i].clone() * self.get(i, j).clone()
        }))
    }
}

/// Diagonal matrix stored as its diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalMatrix<T> {
    entries: Vec<T>,
}

impl<T: Scalar> DiagonalMatrix<T> {
    pub fn new(entries: Vec<T>) -> Self {
        DiagonalMatrix { entries }
    }

    pub fn identity(dim: usize) -> Self {
        DiagonalMatrix {
            entries: vec![T::one(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn to_matrix(&self) -> Matrix<T> {
        Matrix::from_fn(self.dim(), self.dim(), |i, j| {
            if i == j {
                self.entries[i].clone()
            } else {
                T::zero()
            }
        })
    }

    pub fn mul(&self, other: &DiagonalMatrix<T>) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::SizeMismatch(format!(
                "diagonals of size {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(DiagonalMatrix {
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a.clone() * b.clone())
                .collect(),
        })
    }

    pub fn normalized_trace(&self) -> T {
        let sum = self.entries.iter().fold(T::zero(), |a, x| a + x.clone());
        sum / T::from_i64(self.dim() as i64)
    }

    /// `‖D‖₂² = (1/dim) Σ |d_i|²`.
    pub fn two_norm_sq(&self) -> T {
        let sum = self
            .entries
            .iter()
            .fold(T::zero(), |a, x| a + x.norm_sqr());
        sum / T::from_i64(self.dim() as i64)
    }

    /// Largest modulus, the operator norm.
    pub fn op_norm(&self) -> f64 {
        self.entries.iter().map(Scalar::modulus).fold(0.0, f64::max)
    }
}

/// A matrix acting on the strings in `support` and as the identity elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredMatrix<T> {
    support: Vec<usize>,
    n: usize,
    entries: Matrix<T>,
    permutation: Option<Permutation>,
}

impl<T: Scalar> StructuredMatrix<T> {
    /// `support` is sorted; `entries` must be `N^{#support}` square.
    pub fn new(support: Vec<usize>, n: usize, entries: Matrix<T>) -> Result<Self> {
        let space = MultiIndexSpace::new(support, n);
        let d = space.total_dim();
        if !entries.is_square() || entries.rows() as u128 != d {
            return Err(Error::SizeMismatch(format!(
                "{}x{} entries for local dimension {d}",
                entries.rows(),
                entries.cols()
            )));
        }
        Ok(StructuredMatrix {
            support: space.strings,
            n,
            entries,
            permutation: None,
        })
    }

    pub fn from_permutation(support: Vec<usize>, n: usize, p: Permutation) -> Result<Self> {
        let mut m = Self::new(support, n, p.matrix())?;
        m.permutation = Some(p);
        Ok(m)
    }

    pub fn identity(support: Vec<usize>, n: usize) -> Self {
        let d = MultiIndexSpace::new(support.clone(), n).dim();
        Self::from_permutation(support, n, Permutation::identity(d)).expect("square")
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn side(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.entries.rows()
    }

    pub fn entries(&self) -> &Matrix<T> {
        &self.entries
    }

    pub fn permutation(&self) -> Option<&Permutation> {
        self.permutation.as_ref()
    }

    pub fn entry(&self, i: usize, j: usize) -> &T {
        self.entries.get(i, j)
    }

    pub fn adjoint(&self) -> Self {
        StructuredMatrix {
            support: self.support.clone(),
            n: self.n,
            entries: self.entries.adjoint(),
            permutation: self.permutation.as_ref().map(Permutation::inverse),
        }
    }

    /// Operator norm bound `max_i Σ_j |x_ij|` (exact for permutations and diagonals).
    pub fn row_sum_norm(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.entries.row(i).iter().map(Scalar::modulus).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// `Σ* X Σ` realized by relabeling: entry `(a, b)` becomes `x[σ(a), σ(b)]`.
pub fn conjugate_by_color<T: Scalar>(
    x: &StructuredMatrix<T>,
    sigma: &Permutation,
) -> Result<StructuredMatrix<T>> {
    if sigma.len() != x.dim() {
        return Err(Error::SizeMismatch(format!(
            "permutation of {} points for a {}-dimensional matrix",
            sigma.len(),
            x.dim()
        )));
    }
    let entries = Matrix::from_fn(x.dim(), x.dim(), |a, b| {
        x.entry(sigma.apply(a), sigma.apply(b)).clone()
    });
    Ok(StructuredMatrix {
        support: x.support.clone(),
        n: x.n,
        entries,
        permutation: x
            .permutation
            .as_ref()
            .map(|p| p.conjugate_by(sigma))
            .transpose()?,
    })
}

fn check_dense(space: &MultiIndexSpace, guards: &Guards) -> Result<usize> {
    guards.check(GuardKind::Dense, space.total_dim())?;
    Ok(space.dim())
}

/// `X ⊗ I` materialized on `target`.
pub fn lift<T: Scalar>(
    x: &StructuredMatrix<T>,
    target: &MultiIndexSpace,
    guards: &Guards,
) -> Result<Matrix<T>> {
    check_side(x.n, target)?;
    let d = check_dense(target, guards)?;
    let sub = target.sub_index(&x.support)?;
    let local: Vec<usize> = (0..d).map(|i| sub.local(i)).collect();
    let rest: Vec<usize> = (0..d).map(|i| sub.rest(i)).collect();
    Ok(Matrix::from_fn(d, d, |i, j| {
        if rest[i] == rest[j] {
            x.entry(local[i], local[j]).clone()
        } else {
            T::zero()
        }
    }))
}

fn check_side(n: usize, target: &MultiIndexSpace) -> Result<()> {
    if n != target.side() {
        return Err(Error::SizeMismatch(format!(
            "matrix side {n} in a space of side {}",
            target.side()
        )));
    }
    Ok(())
}

/// `M · (X ⊗ I)` without materializing the lift.
pub fn mul_lifted<T: Scalar>(
    m: &Matrix<T>,
    x: &StructuredMatrix<T>,
    space: &MultiIndexSpace,
) -> Result<Matrix<T>> {
    check_side(x.n, space)?;
    let d = space.dim();
    if m.cols() != d {
        return Err(Error::SizeMismatch(format!(
            "{} columns against space of dimension {d}",
            m.cols()
        )));
    }
    let sub = space.sub_index(&x.support)?;
    if let Some(p) = &x.permutation {
        // Column j of M·P is column σ̃(j) of M, σ̃ the lifted permutation.
        let src: Vec<usize> = (0..d)
            .map(|j| sub.replace(j, p.apply(sub.local(j))))
            .collect();
        return Ok(Matrix::from_fn(m.rows(), d, |i, j| m.get(i, src[j]).clone()));
    }
    let ld = sub.local_dim();
    let offsets: Vec<usize> = (0..ld).map(|l| sub.offset(l)).collect();
    Ok(Matrix::from_fn(m.rows(), d, |i, j| {
        let (rest, lj) = (sub.rest(j), sub.local(j));
        let mut acc = T::zero();
        for (lk, off) in offsets.iter().enumerate() {
            let xv = x.entry(lk, lj);
            if !xv.is_zero() {
                acc = acc + m.get(i, rest + off).clone() * xv.clone();
            }
        }
        acc
    }))
}

/// The diagonal part of a square matrix.
pub fn delta<T: Scalar>(a: &Matrix<T>) -> Result<DiagonalMatrix<T>> {
    if !a.is_square() {
        return Err(Error::SizeMismatch(format!("{}x{} is not square", a.rows(), a.cols())));
    }
    Ok(DiagonalMatrix::new(a.diagonal()))
}

/// `Tr(A) / dim`.
pub fn normalized_trace<T: Scalar>(a: &Matrix<T>) -> Result<T> {
    if !a.is_square() || a.rows() == 0 {
        return Err(Error::SizeMismatch(format!(
            "normalized trace of a {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    Ok(a.trace() / T::from_i64(a.rows() as i64))
}

/// `‖A‖₂² = tr(A* A) = Σ |a_ij|² / dim`.
pub fn two_norm_sq<T: Scalar>(a: &Matrix<T>) -> Result<T> {
    if !a.is_square() || a.rows() == 0 {
        return Err(Error::SizeMismatch(format!("{}x{} is not square", a.rows(), a.cols())));
    }
    Ok(a.frobenius_sq() / T::from_i64(a.rows() as i64))
}

pub fn two_norm<T: Scalar>(a: &Matrix<T>) -> Result<f64> {
    Ok(two_norm_sq(a)?.to_c64().re.max(0.0).sqrt())
}

/// `Λ_1 X_1 Λ_2 X_2 ⋯ Λ_ℓ X_ℓ` on `space`, diagonals applied as scalings.
pub fn chain_product<T: Scalar>(
    space: &MultiIndexSpace,
    lambdas: &[DiagonalMatrix<T>],
    xs: &[StructuredMatrix<T>],
    guards: &Guards,
) -> Result<Matrix<T>> {
    if lambdas.len() != xs.len() || xs.is_empty() {
        return Err(Error::SizeMismatch(format!(
            "{} diagonals and {} matrices",
            lambdas.len(),
            xs.len()
        )));
    }
    let mut m = lift(&xs[0], space, guards)?.scale_rows(&lambdas[0])?;
    for (l, x) in lambdas.iter().zip(xs).skip(1) {
        m = mul_lifted(&m.scale_columns(l)?, x, space)?;
    }
    Ok(m)
}

/// `‖Δ[(Y₁ − ΔY₁)⋯(Y_k − ΔY_k)]‖₂²`. Only the diagonal of the final product is formed.
pub fn centered_chain_norm_sq<T: Scalar>(ys: &[Matrix<T>]) -> Result<T> {
    let Some(first) = ys.first() else {
        return Err(Error::InvalidInput("empty chain".into()));
    };
    let d = first.rows();
    if d == 0 || ys.iter().any(|y| y.rows() != d || y.cols() != d) {
        return Err(Error::SizeMismatch("chain factors must share a square dimension".into()));
    }
    let centered: Vec<Matrix<T>> = ys
        .iter()
        .map(|y| {
            let mut c = y.clone();
            for i in 0..d {
                c.set(i, i, T::zero());
            }
            c
        })
        .collect();
    let (last, init) = centered.split_last().expect("nonempty");
    let diag: Vec<T> = if init.is_empty() {
        last.diagonal()
    } else {
        let mut acc = init[0].clone();
        for c in &init[1..] {
            acc = acc.mul(c)?;
        }
        (0..d)
            .map(|i| {
                (0..d).fold(T::zero(), |s, k| {
                    s + acc.get(i, k).clone() * last.get(k, i).clone()
                })
            })
            .collect()
    };
    Ok(DiagonalMatrix::new(diag).two_norm_sq())
}

pub fn centered_chain_norm<T: Scalar>(ys: &[Matrix<T>]) -> Result<f64> {
    Ok(centered_chain_norm_sq(ys)?.to_c64().re.max(0.0).sqrt())
}

/// A permutation of `[N]^support` acting as the identity on other strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalPermutation {
    pub support: Vec<usize>,
    pub n: usize,
    pub perm: Permutation,
}

impl LocalPermutation {
    pub fn new(mut support: Vec<usize>, n: usize, perm: Permutation) -> Result<Self> {
        support.sort_unstable();
        support.dedup();
        let d = saturating_pow(n as u128, support.len());
        if perm.len() as u128 != d {
            return Err(Error::SizeMismatch(format!(
                "permutation of {} points on a local space of dimension {d}",
                perm.len()
            )));
        }
        Ok(LocalPermutation { support, n, perm })
    }

    pub fn inverse(&self) -> Self {
        LocalPermutation {
            support: self.support.clone(),
            n: self.n,
            perm: self.perm.inverse(),
        }
    }

    /// The full permutation of `space` (materialized).
    pub fn lift(&self, space: &MultiIndexSpace) -> Result<Permutation> {
        check_side(self.n, space)?;
        let sub = space.sub_index(&self.support)?;
        Ok(Permutation {
            images: (0..space.dim())
                .map(|i| sub.replace(i, self.perm.apply(sub.local(i))))
                .collect(),
        })
    }
}

/// Normalized trace of `P_1^{e_1} ⋯ P_m^{e_m}` (each `e = ±1`) on `space`, as an exact
/// fixed-point fraction. No dense matrix is formed.
pub fn perm_word_trace(
    word: &[(&LocalPermutation, i8)],
    space: &MultiIndexSpace,
) -> Result<BigRational> {
    let mut letters = Vec::with_capacity(word.len());
    for (lp, e) in word {
        check_side(lp.n, space)?;
        let perm = match e {
            1 => lp.perm.clone(),
            -1 => lp.perm.inverse(),
            _ => return Err(Error::InvalidInput(format!("exponent {e} is not ±1"))),
        };
        letters.push((space.sub_index(&lp.support)?, perm));
    }
    let d = space.dim();
    // The rightmost letter acts first.
    let fixed = (0..d)
        .filter(|&x| {
            let y = letters
                .iter()
                .rev()
                .fold(x, |y, (sub, p)| sub.replace(y, p.apply(sub.local(y))));
            y == x
        })
        .count();
    Ok(BigRational::new(BigInt::from(fixed), BigInt::from(d)))
}

/// A ChaCha20 stream determined by `seed` and a key path such as `[color, sample]`.
/// Distinct key paths give independent streams.
pub fn stream_rng(seed: u64, keys: &[u64]) -> ChaCha20Rng {
    fn splitmix(state: &mut u64, v: u64) -> u64 {
        *state = state.wrapping_add(v).wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = *state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        *state = z ^ (z >> 31);
        *state
    }
    let mut state = seed ^ 0x243F_6A88_85A3_08D3;
    splitmix(&mut state, keys.len() as u64);
    for &k in keys {
        splitmix(&mut state, k);
    }
    let mut bytes = [0u8; 32];
    for chunk in bytes.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix(&mut state, 0).to_le_bytes());
    }
    ChaCha20Rng::from_seed(bytes)
}

/// On-disk matrix: `entries_im` may be omitted for real data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    pub support: Vec<usize>,
    pub n: usize,
    pub entries_re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entries_im: Option<Vec<Vec<f64>>>,
}

impl MatrixFile {
    pub fn from_structured<T: Scalar>(x: &StructuredMatrix<T>) -> Self {
        let d = x.dim();
        let part = |f: fn(num_complex::Complex<f64>) -> f64| -> Vec<Vec<f64>> {
            (0..d)
                .map(|i| (0..d).map(|j| f(x.entry(i, j).to_c64())).collect())
                .collect()
        };
        let im = part(|z| z.im);
        MatrixFile {
            support: x.support().to_vec(),
            n: x.side(),
            entries_re: part(|z| z.re),
            entries_im: im.iter().flatten().any(|&v| v != 0.0).then_some(im),
        }
    }

    pub fn to_structured<T: Scalar>(&self) -> Result<StructuredMatrix<T>> {
        let d = self.entries_re.len();
        if let Some(im) = &self.entries_im {
            if im.len() != d || im.iter().zip(&self.entries_re).any(|(a, b)| a.len() != b.len()) {
                return Err(Error::SizeMismatch("entries_re and entries_im differ in shape".into()));
            }
        }
        let rows = (0..d)
            .map(|i| {
                (0..self.entries_re[i].len())
                    .map(|j| {
                        let re = self.entries_re[i][j];
                        let im = self.entries_im.as_ref().map_or(0.0, |m| m[i][j]);
                        T::from_parts(re, im).ok_or_else(|| {
                            Error::InvalidInput(format!(
                                "entry ({i},{j}) = {re}+{im}i not representable"
                            ))
                        })
                    })
                    .collect::<Result<Vec<T>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        StructuredMatrix::new(self.support.clone(), self.n, Matrix::from_rows(rows)?)
    }
}
