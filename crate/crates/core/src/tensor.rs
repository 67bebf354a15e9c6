//! Symmetric tensors in dimension 2 or 3.
//!
//! Only the independent entries are stored, in Voigt order:
//! `[xx, yy, xy]` for `n = 2` and `[xx, yy, zz, yz, xz, xy]` for `n = 3`.
//! The double contraction weights off-diagonal entries by 2 so that
//! `a.ddot(&b)` equals the Frobenius product of the full matrices.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymTensor {
    dim: usize,
    c: [f64; 6],
}

/// Number of independent entries of a symmetric `dim x dim` matrix.
pub fn sym_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// Dimension of the space of trace-free symmetric matrices.
pub fn dev_len(dim: usize) -> usize {
    sym_len(dim) - 1
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 3 {
        Ok(())
    } else {
        Err(Error::InvalidDimension(dim))
    }
}

// (row, col) of each stored component
const IDX2: [(usize, usize); 3] = [(0, 0), (1, 1), (0, 1)];
const IDX3: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)];

impl SymTensor {
    pub fn new(dim: usize, components: &[f64]) -> Result<Self> {
        check_dim(dim)?;
        let len = sym_len(dim);
        if components.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                got: components.len(),
            });
        }
        let mut c = [0.0; 6];
        c[..len].copy_from_slice(components);
        Ok(Self { dim, c })
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim == 2 || dim == 3, "invalid dimension {dim}");
        Self { dim, c: [0.0; 6] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            t.c[i] = 1.0;
        }
        t
    }

    pub fn diag(values: &[f64]) -> Result<Self> {
        let dim = values.len();
        check_dim(dim)?;
        let mut t = Self::zeros(dim);
        t.c[..dim].copy_from_slice(values);
        Ok(t)
    }

    /// Builds a tensor from a full matrix, symmetrizing it.
    pub fn from_matrix(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        check_dim(dim)?;
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: r.len(),
            });
        }
        let mut t = Self::zeros(dim);
        for (k, &(i, j)) in t.index_map().iter().enumerate() {
            t.c[k] = 0.5 * (rows[i][j] + rows[j][i]);
        }
        Ok(t)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn components(&self) -> &[f64] {
        &self.c[..sym_len(self.dim)]
    }

    fn index_map(&self) -> &'static [(usize, usize)] {
        if self.dim == 2 {
            &IDX2
        } else {
            &IDX3
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let k = self
            .index_map()
            .iter()
            .position(|&(a, b)| (a, b) == (i, j) || (b, a) == (i, j))
            .expect("index out of range");
        self.c[k]
    }

    pub fn to_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.dim;
        let mut m = vec![vec![0.0; n]; n];
        for (k, &(i, j)) in self.index_map().iter().enumerate() {
            m[i][j] = self.c[k];
            m[j][i] = self.c[k];
        }
        m
    }

    #[inline]
    pub fn trace(&self) -> f64 {
        self.c[..self.dim].iter().sum()
    }

    /// Frobenius product `self : other`.
    #[inline]
    pub fn ddot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let len = sym_len(n);
        let diag: f64 = (0..n).map(|k| self.c[k] * other.c[k]).sum();
        let off: f64 = (n..len).map(|k| self.c[k] * other.c[k]).sum();
        diag + 2.0 * off
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.ddot(self)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn deviator(&self) -> DevTensor {
        let mean = self.trace() / self.dim as f64;
        let mut c = self.c;
        for v in c.iter_mut().take(self.dim) {
            *v -= mean;
        }
        DevTensor(Self { dim: self.dim, c })
    }

    /// Spherical part `(tr / n) I`.
    pub fn spherical(&self) -> Self {
        Self::identity(self.dim) * (self.trace() / self.dim as f64)
    }

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.components()
            .iter()
            .zip(other.components())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Symmetrized tensor product `(a_i b_j + a_j b_i) / 2`.
pub fn sym_dyad(a: &[f64], b: &[f64]) -> Result<SymTensor> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let dim = a.len();
    check_dim(dim)?;
    let mut t = SymTensor::zeros(dim);
    let map = t.index_map();
    for (k, &(i, j)) in map.iter().enumerate() {
        t.c[k] = 0.5 * (a[i] * b[j] + a[j] * b[i]);
    }
    Ok(t)
}

impl Add for SymTensor {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl AddAssign for SymTensor {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        debug_assert_eq!(self.dim, rhs.dim);
        for k in 0..6 {
            self.c[k] += rhs.c[k];
        }
    }
}

impl Sub for SymTensor {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        self -= rhs;
        self
    }
}

impl SubAssign for SymTensor {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        debug_assert_eq!(self.dim, rhs.dim);
        for k in 0..6 {
            self.c[k] -= rhs.c[k];
        }
    }
}

impl Neg for SymTensor {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self * -1.0
    }
}

impl Mul<f64> for SymTensor {
    type Output = Self;
    #[inline]
    fn mul(mut self, s: f64) -> Self {
        for v in self.c.iter_mut() {
            *v *= s;
        }
        self
    }
}

/// Trace-free symmetric tensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DevTensor(SymTensor);

impl DevTensor {
    pub fn zeros(dim: usize) -> Self {
        Self(SymTensor::zeros(dim))
    }

    /// Accepts `t` only if its trace vanishes to `tol * |t|`.
    pub fn try_from_sym(t: SymTensor, tol: f64) -> Option<Self> {
        if t.trace().abs() <= tol * t.norm().max(f64::MIN_POSITIVE) {
            Some(t.deviator())
        } else {
            None
        }
    }

    /// Builds from coordinates in an orthonormal basis of the deviatoric
    /// subspace (see [`DevTensor::coords`]).
    pub fn from_coords(dim: usize, coords: &[f64]) -> Result<Self> {
        check_dim(dim)?;
        if coords.len() != dev_len(dim) {
            return Err(Error::DimensionMismatch {
                expected: dev_len(dim),
                got: coords.len(),
            });
        }
        let mut c = [0.0; 6];
        if dim == 2 {
            let (a, b) = (coords[0], coords[1]);
            c[0] = a / SQRT2;
            c[1] = -a / SQRT2;
            c[2] = b / SQRT2;
        } else {
            let s6 = 6f64.sqrt();
            let (a, b) = (coords[0], coords[1]);
            c[0] = a / SQRT2 + b / s6;
            c[1] = -a / SQRT2 + b / s6;
            c[2] = -2.0 * b / s6;
            c[3] = coords[2] / SQRT2;
            c[4] = coords[3] / SQRT2;
            c[5] = coords[4] / SQRT2;
        }
        Ok(Self(SymTensor { dim, c }))
    }

    /// Coordinates in the orthonormal basis
    /// `diag(1,-1)/√2, (e1⊙e2)·√2` (n = 2) or
    /// `diag(1,-1,0)/√2, diag(1,1,-2)/√6` plus the three off-diagonal units (n = 3).
    /// The map is an isometry: `|coords| = |self|`.
    pub fn coords(&self) -> Vec<f64> {
        let c = &self.0.c;
        if self.0.dim == 2 {
            vec![(c[0] - c[1]) / SQRT2, SQRT2 * c[2]]
        } else {
            let s6 = 6f64.sqrt();
            vec![
                (c[0] - c[1]) / SQRT2,
                (c[0] + c[1] - 2.0 * c[2]) / s6,
                SQRT2 * c[3],
                SQRT2 * c[4],
                SQRT2 * c[5],
            ]
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.dim
    }

    #[inline]
    pub fn as_sym(&self) -> &SymTensor {
        &self.0
    }

    #[inline]
    pub fn into_sym(self) -> SymTensor {
        self.0
    }

    #[inline]
    pub fn ddot(&self, other: &Self) -> f64 {
        self.0.ddot(&other.0)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    #[inline]
    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn is_zero(&self) -> bool {
        self.0.c.iter().all(|&v| v == 0.0)
    }
}

impl Add for DevTensor {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

impl AddAssign for DevTensor {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

impl Sub for DevTensor {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Self(self.0 - rhs.0)
    }
}

impl Neg for DevTensor {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self(-self.0)
    }
}

impl Mul<f64> for DevTensor {
    type Output = Self;
    #[inline]
    fn mul(self, s: f64) -> Self {
        Self(self.0 * s)
    }
}

impl From<DevTensor> for SymTensor {
    fn from(d: DevTensor) -> Self {
        d.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sym(dim: usize, c: &[f64]) -> SymTensor {
        SymTensor::new(dim, c).unwrap()
    }

    #[test]
    fn deviator_of_identity_vanishes() {
        assert!(SymTensor::identity(2).deviator().is_zero());
        assert!(SymTensor::identity(3).deviator().norm() < 1e-15);
    }

    #[test]
    fn deviator_is_idempotent_on_trace_free() {
        let xi = sym(2, &[0.7, -0.7, 0.3]);
        assert_eq!(xi.deviator().into_sym(), xi);
    }

    #[test]
    fn deviator_diag_3_1() {
        let d = SymTensor::diag(&[3.0, 1.0]).unwrap().deviator();
        assert_eq!(d.as_sym().components(), &[1.0, -1.0, 0.0]);
    }

    #[test]
    fn sym_dyad_examples() {
        assert_eq!(
            sym_dyad(&[1.0, 0.0], &[1.0, 0.0]).unwrap().components(),
            &[1.0, 0.0, 0.0]
        );
        let t = sym_dyad(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(t.components(), &[0.0, 0.0, 0.5]);
        assert_eq!(t.trace(), 0.0);
        let t = sym_dyad(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert_eq!(t.components(), &[1.0, 0.0, 0.5]);
        assert!((t.norm_sq() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn sym_dyad_rejects_mismatch() {
        assert!(matches!(
            sym_dyad(&[1.0, 0.0], &[1.0, 0.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            sym_dyad(&[1.0], &[1.0]),
            Err(Error::InvalidDimension(1))
        ));
    }

    #[test]
    fn ddot_matches_full_matrix_frobenius() {
        let a = sym(3, &[1.0, 2.0, 3.0, 0.4, -0.5, 0.6]);
        let b = sym(3, &[-1.0, 0.5, 2.0, 1.5, 0.25, -2.0]);
        let (ma, mb) = (a.to_matrix(), b.to_matrix());
        let full: f64 = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| ma[i][j] * mb[i][j])
            .sum();
        assert!((a.ddot(&b) - full).abs() < 1e-14);
    }

    #[test]
    fn coords_are_an_isometry() {
        for dim in [2, 3] {
            let coords: Vec<f64> = (0..dev_len(dim)).map(|k| 0.3 * k as f64 - 0.4).collect();
            let d = DevTensor::from_coords(dim, &coords).unwrap();
            assert!(d.trace().abs() < 1e-15);
            let back = d.coords();
            for (a, b) in coords.iter().zip(&back) {
                assert!((a - b).abs() < 1e-14);
            }
            let n2: f64 = coords.iter().map(|v| v * v).sum();
            assert!((d.norm() - n2.sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn constructor_validates() {
        assert!(SymTensor::new(4, &[0.0; 10]).is_err());
        assert!(SymTensor::new(2, &[0.0; 4]).is_err());
        assert!(SymTensor::from_matrix(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    fn arb_sym() -> impl Strategy<Value = SymTensor> {
        prop_oneof![
            prop::collection::vec(-10.0..10.0f64, 3).prop_map(|v| sym(2, &v)),
            prop::collection::vec(-10.0..10.0f64, 6).prop_map(|v| sym(3, &v)),
        ]
    }

    proptest! {
        #[test]
        fn deviator_decomposition(xi in arb_sym()) {
            let dev = xi.deviator();
            let sph = xi.spherical();
            let scale = xi.norm_sq().max(1.0);
            prop_assert!(dev.trace().abs() <= 1e-14 * xi.norm().max(1.0));
            prop_assert!(dev.as_sym().ddot(&sph).abs() <= 1e-12 * scale);
            let n = xi.dim() as f64;
            let lhs = xi.norm_sq();
            let rhs = dev.as_sym().norm_sq() + xi.trace().powi(2) / n;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
            prop_assert!((dev.into_sym() + sph).max_abs_diff(&xi) <= 1e-13 * xi.norm().max(1.0));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn sym_dyad_trace_and_norm_bounds(
            a in prop::collection::vec(-5.0..5.0f64, 3),
            b in prop::collection::vec(-5.0..5.0f64, 3),
        ) {
            let t = sym_dyad(&a, &b).unwrap();
            let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!((t.trace() - dot).abs() <= 1e-12 * (1.0 + na * nb));
            prop_assert!(t.norm() <= na * nb * (1.0 + 1e-12) + 1e-300);
            prop_assert!(t.norm() >= na * nb / 2f64.sqrt() * (1.0 - 1e-12));
        }
    }
}
