//! Yield sets, elasticity and the pointwise incremental minimization.
//!
//! The yield set `K` lives in the deviatoric subspace. Two shapes are
//! supported: a ball (von Mises) and a bounded polytope given by facet
//! normals and offsets. Polytope geometry is computed in the orthonormal
//! deviatoric coordinates of [`DevTensor::coords`], where the Frobenius
//! norm is the Euclidean one.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{dev_len, DevTensor, SymTensor};

/// Geometric tolerance for unit-scale data.
pub const GEOM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polytope {
    dim: usize,
    normals: Vec<Vec<f64>>,
    offsets: Vec<f64>,
    vertices: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum YieldKind {
    VonMises { radius: f64 },
    Polyhedral(Polytope),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YieldSurface {
    kind: YieldKind,
    r_inner: f64,
    r_outer: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// All `k`-subsets of `0..m` in lexicographic order.
fn subsets(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(i + 1, m, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, m, k, &mut Vec::with_capacity(k), &mut out);
    out
}

impl Polytope {
    fn new(dim: usize, facets: &[(DevTensor, f64)]) -> Result<Self> {
        let d = dev_len(dim);
        if facets.len() <= d {
            return Err(Error::InvalidYieldSurface(format!(
                "a bounded polytope in {d} deviatoric dimensions needs more than {d} facets"
            )));
        }
        let mut normals = Vec::with_capacity(facets.len());
        let mut offsets = Vec::with_capacity(facets.len());
        for (k, (n, c)) in facets.iter().enumerate() {
            if n.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: n.dim(),
                });
            }
            if (n.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidYieldSurface(format!(
                    "facet {k} normal is not a unit tensor (|n| = {})",
                    n.norm()
                )));
            }
            if !(*c > 0.0) {
                return Err(Error::InvalidYieldSurface(format!(
                    "facet {k} offset must be positive so that 0 is interior"
                )));
            }
            normals.push(n.coords());
            offsets.push(*c);
        }
        let mut poly = Self {
            dim,
            normals,
            offsets,
            vertices: Vec::new(),
        };
        poly.check_bounded()?;
        poly.vertices = poly.enumerate_vertices();
        if poly.vertices.is_empty() {
            return Err(Error::InvalidYieldSurface("polytope has no vertices".into()));
        }
        Ok(poly)
    }

    fn coord_dim(&self) -> usize {
        dev_len(self.dim)
    }

    /// Bounded iff the normals span the space and the recession cone
    /// `{d : N d <= 0}` has no extreme ray.
    fn check_bounded(&self) -> Result<()> {
        let d = self.coord_dim();
        let m = self.normals.len();
        let nmat = DMatrix::from_fn(m, d, |i, j| self.normals[i][j]);
        let rank = nmat.clone().svd(false, false).rank(1e-12);
        if rank < d {
            return Err(Error::InvalidYieldSurface(
                "facet normals do not span the deviatoric space; K is unbounded".into(),
            ));
        }
        for subset in subsets(m, d - 1) {
            let a = DMatrix::from_fn(d - 1, d, |i, j| self.normals[subset[i]][j]);
            let ata = a.transpose() * &a;
            let eig = ata.symmetric_eigen();
            let (imin, &lmin) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .unwrap();
            // a second vanishing eigenvalue means the rows are dependent
            let zero_count = eig.eigenvalues.iter().filter(|l| l.abs() < 1e-12).count();
            if lmin.abs() > 1e-12 || zero_count > 1 {
                continue;
            }
            let ray: Vec<f64> = eig.eigenvectors.column(imin).iter().copied().collect();
            for sign in [1.0, -1.0] {
                let recedes = self
                    .normals
                    .iter()
                    .all(|n| sign * dot(n, &ray) <= 1e-12);
                if recedes {
                    return Err(Error::InvalidYieldSurface(
                        "polytope is unbounded along a recession direction".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn enumerate_vertices(&self) -> Vec<Vec<f64>> {
        let d = self.coord_dim();
        let m = self.normals.len();
        let mut verts: Vec<Vec<f64>> = Vec::new();
        for subset in subsets(m, d) {
            let a = DMatrix::from_fn(d, d, |i, j| self.normals[subset[i]][j]);
            let b = DVector::from_fn(d, |i, _| self.offsets[subset[i]]);
            let Some(x) = a.lu().solve(&b) else { continue };
            let x: Vec<f64> = x.iter().copied().collect();
            if !x.iter().all(|v| v.is_finite()) || self.max_violation(&x) > 1e-9 {
                continue;
            }
            if !verts.iter().any(|v| {
                v.iter()
                    .zip(&x)
                    .map(|(p, q)| (p - q).abs())
                    .fold(0.0, f64::max)
                    < 1e-9
            }) {
                verts.push(x);
            }
        }
        verts
    }

    fn max_violation(&self, x: &[f64]) -> f64 {
        self.normals
            .iter()
            .zip(&self.offsets)
            .map(|(n, c)| dot(n, x) - c)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn vertices(&self) -> Vec<DevTensor> {
        self.vertices
            .iter()
            .map(|v| DevTensor::from_coords(self.dim, v).unwrap())
            .collect()
    }

    pub fn facets(&self) -> Vec<(DevTensor, f64)> {
        self.normals
            .iter()
            .zip(&self.offsets)
            .map(|(n, &c)| (DevTensor::from_coords(self.dim, n).unwrap(), c))
            .collect()
    }

    fn support(&self, x: &[f64]) -> f64 {
        self.vertices
            .iter()
            .map(|v| dot(v, x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Dykstra's alternating projections onto the facet half-spaces
    /// (plus an optional extra half-space `n·x <= c`).
    fn dykstra(
        &self,
        y: &[f64],
        extra: Option<(&[f64], f64)>,
        tol: f64,
        max_iter: usize,
    ) -> (Vec<f64>, bool, usize) {
        let mut planes: Vec<(&[f64], f64)> = self
            .normals
            .iter()
            .zip(&self.offsets)
            .map(|(n, &c)| (n.as_slice(), c))
            .collect();
        if let Some(e) = extra {
            planes.push(e);
        }
        let d = y.len();
        let mut x = y.to_vec();
        let mut incr = vec![vec![0.0; d]; planes.len()];
        let scale = norm(y).max(1.0);
        for it in 1..=max_iter {
            let start = x.clone();
            for (j, &(n, c)) in planes.iter().enumerate() {
                let z: Vec<f64> = x.iter().zip(&incr[j]).map(|(a, b)| a + b).collect();
                let nn = dot(n, n);
                let viol = dot(n, &z) - c;
                if viol > 0.0 {
                    for k in 0..d {
                        x[k] = z[k] - viol / nn * n[k];
                    }
                } else {
                    x.copy_from_slice(&z);
                }
                for k in 0..d {
                    incr[j][k] = z[k] - x[k];
                }
            }
            let change = x
                .iter()
                .zip(&start)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let feas = planes
                .iter()
                .map(|&(n, c)| dot(n, &x) - c)
                .fold(f64::NEG_INFINITY, f64::max);
            if change <= tol * scale && feas <= tol * scale {
                return (x, true, it);
            }
        }
        (x, false, max_iter)
    }
}

impl YieldSurface {
    pub fn von_mises(radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidYieldSurface(format!(
                "von Mises radius must be positive and finite, got {radius}"
            )));
        }
        Ok(Self {
            kind: YieldKind::VonMises { radius },
            r_inner: radius,
            r_outer: radius,
        })
    }

    /// Polytope `{ξ : n_j : ξ <= c_j}` with unit deviatoric normals `n_j`.
    pub fn polyhedral(dim: usize, facets: &[(DevTensor, f64)]) -> Result<Self> {
        let poly = Polytope::new(dim, facets)?;
        let r_inner = poly.offsets.iter().copied().fold(f64::INFINITY, f64::min);
        let r_outer = poly.vertices.iter().map(|v| norm(v)).fold(0.0, f64::max);
        Ok(Self {
            kind: YieldKind::Polyhedral(poly),
            r_inner,
            r_outer,
        })
    }

    /// Tresca-like square in the two-dimensional deviatoric plane (n = 2):
    /// `|ξ:E1| <= half_width`, `|ξ:E2| <= half_width` for the orthonormal
    /// deviatoric basis `E1, E2`.
    pub fn square_2d(half_width: f64) -> Result<Self> {
        let facets: Vec<(DevTensor, f64)> = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]
            .iter()
            .map(|c| (DevTensor::from_coords(2, c).unwrap(), half_width))
            .collect();
        Self::polyhedral(2, &facets)
    }

    pub fn kind(&self) -> &YieldKind {
        &self.kind
    }

    /// Inner radius `r_K`.
    pub fn r_inner(&self) -> f64 {
        self.r_inner
    }

    /// Outer radius `R_K`.
    pub fn r_outer(&self) -> f64 {
        self.r_outer
    }

    pub fn is_von_mises(&self) -> bool {
        matches!(self.kind, YieldKind::VonMises { .. })
    }

    /// The set `s K`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s > 0.0) {
            return Err(Error::InvalidYieldSurface(format!(
                "yield scale must be positive, got {s}"
            )));
        }
        match &self.kind {
            YieldKind::VonMises { radius } => Self::von_mises(radius * s),
            YieldKind::Polyhedral(p) => {
                let facets: Vec<_> = p.facets().into_iter().map(|(n, c)| (n, c * s)).collect();
                Self::polyhedral(p.dim, &facets)
            }
        }
    }

    /// Support function `H(ξ) = sup_{ζ ∈ K} ξ : ζ`.
    pub fn support(&self, xi: &DevTensor) -> f64 {
        match &self.kind {
            YieldKind::VonMises { radius } => radius * xi.norm(),
            YieldKind::Polyhedral(p) => p.support(&xi.coords()),
        }
    }

    /// Signed violation: `> 0` outside `K`.
    pub fn violation(&self, xi: &DevTensor) -> f64 {
        match &self.kind {
            YieldKind::VonMises { radius } => xi.norm() - radius,
            YieldKind::Polyhedral(p) => p.max_violation(&xi.coords()),
        }
    }

    pub fn contains(&self, xi: &DevTensor, tol: f64) -> bool {
        self.violation(xi) <= tol
    }

    /// Distance from `xi` to `K`.
    pub fn distance(&self, xi: &DevTensor) -> f64 {
        match &self.kind {
            YieldKind::VonMises { radius } => (xi.norm() - radius).max(0.0),
            YieldKind::Polyhedral(_) => (*xi - self.project(xi)).norm(),
        }
    }

    /// Nearest point of `K`.
    pub fn project(&self, xi: &DevTensor) -> DevTensor {
        self.project_with(xi, GEOM_TOL * 1e-2, 100_000).0
    }

    /// Projection with an explicit tolerance and iteration cap; the flag
    /// reports whether the polyhedral iteration met the tolerance.
    pub fn project_with(&self, xi: &DevTensor, tol: f64, max_iter: usize) -> (DevTensor, bool) {
        match &self.kind {
            YieldKind::VonMises { radius } => {
                let n = xi.norm();
                if n <= *radius {
                    (*xi, true)
                } else {
                    (*xi * (radius / n), true)
                }
            }
            YieldKind::Polyhedral(p) => {
                let y = xi.coords();
                if p.max_violation(&y) <= 0.0 {
                    return (*xi, true);
                }
                let (x, ok, _) = p.dykstra(&y, None, tol, max_iter);
                (DevTensor::from_coords(p.dim, &x).unwrap(), ok)
            }
        }
    }

    /// Whether `q` lies in the normal cone `N_K(sigma_d)` to tolerance `tol`.
    pub fn in_normal_cone(&self, sigma_d: &DevTensor, q: &DevTensor, tol: f64) -> bool {
        let qn = q.norm();
        if qn == 0.0 {
            return true;
        }
        if !self.contains(sigma_d, tol) {
            return false;
        }
        let qhat = *q * (1.0 / qn);
        match &self.kind {
            YieldKind::VonMises { radius } => (*sigma_d - qhat * *radius).norm() <= tol,
            YieldKind::Polyhedral(p) => {
                let s = sigma_d.coords();
                let qc = qhat.coords();
                p.vertices
                    .iter()
                    .all(|v| dot(&qc, v) - dot(&qc, &s) <= tol)
            }
        }
    }

    /// Minimum-norm element of `∂H(q)`, i.e. of the face of `K` exposed by `q`.
    ///
    /// For a polytope the face is taken up to [`FACE_TOL`]: a direction
    /// within rounding of a facet normal exposes the whole facet.
    pub fn min_norm_subgradient(&self, q: &DevTensor) -> DevTensor {
        let qn = q.norm();
        if qn == 0.0 {
            return DevTensor::zeros(q.dim());
        }
        match &self.kind {
            YieldKind::VonMises { radius } => *q * (radius / qn),
            YieldKind::Polyhedral(p) => {
                let qc: Vec<f64> = q.coords().iter().map(|v| v / qn).collect();
                let h = p.support(&qc);
                let tol = FACE_TOL * (1.0 + self.r_outer);
                let face: Vec<&Vec<f64>> = p.vertices.iter().filter(|v| dot(&qc, v) >= h - tol).collect();
                DevTensor::from_coords(p.dim, &min_norm_in_hull(&face)).unwrap()
            }
        }
    }
}

/// Relative tolerance deciding which vertices a direction exposes.
pub const FACE_TOL: f64 = 1e-7;

/// Minimum-norm point of the convex hull of a few points: the best feasible
/// affine minimizer over subsets of at most `d + 1` points.
fn min_norm_in_hull(points: &[&Vec<f64>]) -> Vec<f64> {
    let d = points[0].len();
    let mut best = points[0].clone();
    let mut best_n = dot(&best, &best);
    for k in 1..=points.len().min(d + 1) {
        for subset in subsets(points.len(), k) {
            let v0 = points[subset[0]];
            let a = DMatrix::from_fn(d, k - 1, |i, j| points[subset[j + 1]][i] - v0[i]);
            let x = if k == 1 {
                v0.clone()
            } else {
                let g = a.transpose() * &a;
                let rhs = -(a.transpose() * DVector::from_column_slice(v0));
                let Some(mu) = g.lu().solve(&rhs) else { continue };
                if !mu.iter().all(|m| m.is_finite() && *m >= -1e-12) || mu.sum() > 1.0 + 1e-12 {
                    continue;
                }
                let x = DVector::from_column_slice(v0) + &a * mu;
                x.iter().copied().collect()
            };
            let n = dot(&x, &x);
            if n < best_n {
                best_n = n;
                best = x;
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticModuli {
    /// Shear modulus; the deviatoric part of the elasticity tensor is `2 mu Id`.
    pub mu: f64,
    /// Modulus of compression.
    pub kappa: f64,
}

impl ElasticModuli {
    pub fn new(mu: f64, kappa: f64) -> Result<Self> {
        if !(mu > 0.0 && kappa > 0.0) || !mu.is_finite() || !kappa.is_finite() {
            return Err(Error::InvalidMaterial(format!(
                "moduli must be positive and finite (mu = {mu}, kappa = {kappa})"
            )));
        }
        Ok(Self { mu, kappa })
    }

    /// Lower ellipticity constant `alpha_C` with `alpha_C |ξ|² <= Q(ξ)`.
    pub fn alpha_c(&self, dim: usize) -> f64 {
        (2.0 * self.mu).min(dim as f64 * self.kappa) / 2.0
    }

    /// Upper constant `beta_C` with `Q(ξ) <= beta_C |ξ|²`.
    pub fn beta_c(&self, dim: usize) -> f64 {
        (2.0 * self.mu).max(dim as f64 * self.kappa) / 2.0
    }

    /// `σ = 2 mu e_D + kappa (tr e) I`.
    #[inline]
    pub fn stress(&self, e: &SymTensor) -> SymTensor {
        let dim = e.dim();
        let tr = e.trace();
        e.deviator().into_sym() * (2.0 * self.mu) + SymTensor::identity(dim) * (self.kappa * tr)
    }

    /// `Q(e) = mu |e_D|² + (kappa / 2) (tr e)²`.
    #[inline]
    pub fn quad_q(&self, e: &SymTensor) -> f64 {
        let tr = e.trace();
        self.mu * e.deviator().as_sym().norm_sq() + 0.5 * self.kappa * tr * tr
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub moduli: ElasticModuli,
    pub yield_surface: YieldSurface,
}

/// Controls for the iterative (polyhedral) return mapping.
#[derive(Debug, Clone, Copy)]
pub struct ReturnConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ReturnConfig {
    fn default() -> Self {
        Self {
            tol: GEOM_TOL,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointUpdate {
    pub p: DevTensor,
    pub e: SymTensor,
    pub sigma: SymTensor,
    pub dissipation: f64,
}

impl Material {
    pub fn new(moduli: ElasticModuli, yield_surface: YieldSurface) -> Self {
        Self {
            moduli,
            yield_surface,
        }
    }

    pub fn von_mises(mu: f64, kappa: f64, radius: f64) -> Result<Self> {
        Ok(Self::new(
            ElasticModuli::new(mu, kappa)?,
            YieldSurface::von_mises(radius)?,
        ))
    }

    pub fn stress(&self, e: &SymTensor) -> SymTensor {
        self.moduli.stress(e)
    }

    pub fn quad_q(&self, e: &SymTensor) -> f64 {
        self.moduli.quad_q(e)
    }

    pub fn support(&self, xi: &DevTensor) -> f64 {
        self.yield_surface.support(xi)
    }

    /// Pointwise incremental energy `Q(ε - p) + H(p - p_prev)`.
    pub fn point_energy(&self, eps: &SymTensor, p: &DevTensor, p_prev: &DevTensor) -> f64 {
        self.quad_q(&(*eps - p.into_sym())) + self.support(&(*p - *p_prev))
    }

    /// Minimizes `Q(ε - p) + H(p - p_prev)` over trace-free `p`.
    ///
    /// The minimizer satisfies `σ_D = P_K(s)` with the trial deviatoric
    /// stress `s = 2 mu (ε_D - p_prev)`; for a ball this is the closed-form
    /// radial return.
    pub fn incremental_update(&self, eps: &SymTensor, p_prev: &DevTensor) -> Result<PointUpdate> {
        self.incremental_update_with(eps, p_prev, ReturnConfig::default())
    }

    pub fn incremental_update_with(
        &self,
        eps: &SymTensor,
        p_prev: &DevTensor,
        cfg: ReturnConfig,
    ) -> Result<PointUpdate> {
        let p = self.return_map(eps, p_prev, cfg)?;
        let e = *eps - p.into_sym();
        let sigma = self.moduli.stress(&e);
        let dissipation = self.support(&(p - *p_prev));
        Ok(PointUpdate {
            p,
            e,
            sigma,
            dissipation,
        })
    }

    /// Plastic strain only; the hot path of the global solver.
    #[inline]
    pub fn return_map(&self, eps: &SymTensor, p_prev: &DevTensor, cfg: ReturnConfig) -> Result<DevTensor> {
        let two_mu = 2.0 * self.moduli.mu;
        let trial = (eps.deviator() - *p_prev) * two_mu;
        match self.yield_surface.kind() {
            YieldKind::VonMises { radius } => {
                let s = trial.norm();
                if s <= *radius {
                    Ok(*p_prev)
                } else {
                    Ok(*p_prev + trial * ((s - radius) / (two_mu * s)))
                }
            }
            YieldKind::Polyhedral(_) => {
                let (sigma_d, ok) = self.yield_surface.project_with(&trial, cfg.tol, cfg.max_iter);
                if !ok {
                    return Err(Error::ReturnMapping {
                        iterations: cfg.max_iter,
                        residual: self.yield_surface.violation(&sigma_d).max(0.0),
                    });
                }
                Ok(*p_prev + (trial - sigma_d) * (1.0 / two_mu))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dev2(a: f64, b: f64) -> DevTensor {
        DevTensor::from_coords(2, &[a, b]).unwrap()
    }

    fn random_dev(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> DevTensor {
        let c: Vec<f64> = (0..dev_len(dim)).map(|_| rng.random_range(-scale..scale)).collect();
        DevTensor::from_coords(dim, &c).unwrap()
    }

    fn random_sym(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> SymTensor {
        let c: Vec<f64> = (0..dim * (dim + 1) / 2)
            .map(|_| rng.random_range(-scale..scale))
            .collect();
        SymTensor::new(dim, &c).unwrap()
    }

    /// Brute-force minimizer of a convex function of two variables by
    /// repeated grid zoom.
    fn grid_zoom_min(f: impl Fn(f64, f64) -> f64, center: (f64, f64), half: f64) -> (f64, f64) {
        let (mut cx, mut cy, mut h) = (center.0, center.1, half);
        let n = 40;
        for _ in 0..60 {
            let mut best = (f64::INFINITY, cx, cy);
            for i in 0..=n {
                for j in 0..=n {
                    let x = cx - h + 2.0 * h * i as f64 / n as f64;
                    let y = cy - h + 2.0 * h * j as f64 / n as f64;
                    let v = f(x, y);
                    if v < best.0 {
                        best = (v, x, y);
                    }
                }
            }
            cx = best.1;
            cy = best.2;
            h *= 0.5;
        }
        (cx, cy)
    }

    #[test]
    fn support_examples() {
        let vm = YieldSurface::von_mises(2.0).unwrap();
        assert!((vm.support(&dev2(3.0, 4.0)) - 10.0).abs() < 1e-14);
        assert_eq!(vm.support(&DevTensor::zeros(2)), 0.0);
        // square with vertices (±1, ±1): brute-force over the four vertices
        let sq = YieldSurface::square_2d(1.0).unwrap();
        let dir = dev2(1.0, 0.0);
        let oracle = [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]]
            .iter()
            .map(|v| v[0] * 1.0 + v[1] * 0.0)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((sq.support(&dir) - oracle).abs() < 1e-12);
        assert_eq!(sq.vertices_len(), 4);
        assert!((sq.r_inner() - 1.0).abs() < 1e-15);
        assert!((sq.r_outer() - 2f64.sqrt()).abs() < 1e-12);
    }

    impl YieldSurface {
        fn vertices_len(&self) -> usize {
            match &self.kind {
                YieldKind::Polyhedral(p) => p.vertices.len(),
                _ => 0,
            }
        }
    }

    #[test]
    fn support_bounds_homogeneity_and_convexity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let hex: Vec<(DevTensor, f64)> = (0..6)
            .map(|k| {
                let th = std::f64::consts::PI * k as f64 / 3.0;
                (dev2(th.cos(), th.sin()), 1.0 + 0.1 * k as f64)
            })
            .collect();
        let surfaces = [
            YieldSurface::von_mises(1.3).unwrap(),
            YieldSurface::square_2d(0.7).unwrap(),
            YieldSurface::polyhedral(2, &hex).unwrap(),
        ];
        for k in &surfaces {
            for _ in 0..200 {
                let a = random_dev(&mut rng, 2, 3.0);
                let b = random_dev(&mut rng, 2, 3.0);
                let h = k.support(&a);
                assert!(h >= k.r_inner() * a.norm() - 1e-12);
                assert!(h <= k.r_outer() * a.norm() + 1e-12);
                let s = rng.random_range(0.0..5.0);
                assert!((k.support(&(a * s)) - s * h).abs() < 1e-11);
                assert!(k.support(&(a + b)) <= h + k.support(&b) + 1e-12);
                let mid = k.support(&((a + b) * 0.5));
                assert!(mid <= 0.5 * h + 0.5 * k.support(&b) + 1e-12);
            }
        }
    }

    #[test]
    fn rejects_invalid_polytopes() {
        // three facets cannot bound a 2-dim region
        let open = [(dev2(1.0, 0.0), 1.0), (dev2(-1.0, 0.0), 1.0), (dev2(0.0, 1.0), 1.0)];
        assert!(YieldSurface::polyhedral(2, &open).is_err());
        // four facets, but all normals in a half-plane
        let th = |a: f64| dev2(a.cos(), a.sin());
        let half = [(th(0.0), 1.0), (th(0.5), 1.0), (th(1.0), 1.0), (th(1.5), 1.0)];
        assert!(YieldSurface::polyhedral(2, &half).is_err());
        let zero_offset = [
            (dev2(1.0, 0.0), 0.0),
            (dev2(-1.0, 0.0), 1.0),
            (dev2(0.0, 1.0), 1.0),
            (dev2(0.0, -1.0), 1.0),
        ];
        assert!(YieldSurface::polyhedral(2, &zero_offset).is_err());
        assert!(YieldSurface::von_mises(0.0).is_err());
    }

    #[test]
    fn polytope_in_three_dimensions() {
        // cube in 5-dim deviatoric coordinates
        let mut facets = Vec::new();
        for k in 0..5 {
            for s in [1.0, -1.0] {
                let mut c = vec![0.0; 5];
                c[k] = s;
                facets.push((DevTensor::from_coords(3, &c).unwrap(), 0.5));
            }
        }
        let cube = YieldSurface::polyhedral(3, &facets).unwrap();
        assert_eq!(cube.vertices_len(), 32);
        assert!((cube.r_outer() - 0.5 * 5f64.sqrt()).abs() < 1e-12);
        let x = DevTensor::from_coords(3, &[2.0, 0.1, -3.0, 0.0, 0.4]).unwrap();
        let p = cube.project(&x);
        let expect = [0.5, 0.1, -0.5, 0.0, 0.4];
        for (a, b) in p.coords().iter().zip(expect) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn projection_examples() {
        let vm = YieldSurface::von_mises(1.0).unwrap();
        let inside = dev2(0.3, -0.2);
        assert_eq!(vm.project(&inside), inside);
        let out = dev2(3.0 * 0.6, 3.0 * 0.8);
        let p = vm.project(&out);
        assert!((p - out * (1.0 / 3.0)).norm() < 1e-15);
        let p2 = vm.project(&p);
        assert!((p2 - p).norm() < 1e-15);
    }

    #[test]
    fn polyhedral_projection_matches_grid_oracle() {
        let sq = YieldSurface::square_2d(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let y = random_dev(&mut rng, 2, 3.0);
            let p = sq.project(&y);
            assert!(sq.contains(&p, 1e-10));
            let yc = y.coords();
            // fine grid over K = [-1,1]^2
            let n = 2000;
            let mut best = (f64::INFINITY, 0.0, 0.0);
            for i in 0..=n {
                for j in 0..=n {
                    let a = -1.0 + 2.0 * i as f64 / n as f64;
                    let b = -1.0 + 2.0 * j as f64 / n as f64;
                    let d = (a - yc[0]).powi(2) + (b - yc[1]).powi(2);
                    if d < best.0 {
                        best = (d, a, b);
                    }
                }
            }
            let pc = p.coords();
            assert!((pc[0] - best.1).abs() <= 1e-3 && (pc[1] - best.2).abs() <= 1e-3);
            assert!((sq.project(&p) - p).norm() < 1e-12);
        }
    }

    #[test]
    fn normal_cone_examples() {
        let vm = YieldSurface::von_mises(1.0).unwrap();
        let q = dev2(0.0, 2.0);
        assert!(vm.in_normal_cone(&dev2(0.5, 0.0), &DevTensor::zeros(2), 1e-10));
        assert!(vm.in_normal_cone(&(q * 0.5), &q, 1e-10));
        assert!(!vm.in_normal_cone(&dev2(0.0, 0.5), &q, 1e-10));
        assert!(!vm.in_normal_cone(&dev2(0.0, 1.5), &q, 1e-10));

        let sq = YieldSurface::square_2d(1.0).unwrap();
        let corner = dev2(1.0, 1.0);
        // any direction in the cone spanned by the two active normals
        assert!(sq.in_normal_cone(&corner, &dev2(1.0, 0.3), 1e-10));
        assert!(sq.in_normal_cone(&corner, &dev2(0.2, 1.0), 1e-10));
        assert!(!sq.in_normal_cone(&corner, &dev2(1.0, -0.3), 1e-10));
        let edge = dev2(1.0, 0.2);
        assert!(sq.in_normal_cone(&edge, &dev2(3.0, 0.0), 1e-10));
        assert!(!sq.in_normal_cone(&edge, &dev2(3.0, 0.1), 1e-10));
    }

    #[test]
    fn min_norm_subgradient_matches_face_oracle() {
        let sq = YieldSurface::square_2d(1.0).unwrap();
        // exposed face is the edge {a = 1, b in [-1, 1]}: min-norm point (1, 0)
        let g = sq.min_norm_subgradient(&dev2(2.0, 0.0));
        assert!((g - dev2(1.0, 0.0)).norm() < 1e-9);
        // vertex exposed
        let g = sq.min_norm_subgradient(&dev2(1.0, 0.5));
        assert!((g - dev2(1.0, 1.0)).norm() < 1e-9);
        // within rounding of the facet normal: still the facet
        let g = sq.min_norm_subgradient(&dev2(1.0, 1e-12));
        assert!((g - dev2(1.0, 0.0)).norm() < 1e-9);
        let g = sq.min_norm_subgradient(&dev2(1.0, 1e-3));
        assert!((g - dev2(1.0, 1.0)).norm() < 1e-9);

        // off-center hexagon: parametrize each exposed edge and minimize |x|
        let hex: Vec<(DevTensor, f64)> = (0..6)
            .map(|k| {
                let th = std::f64::consts::PI * k as f64 / 3.0 + 0.2;
                (dev2(th.cos(), th.sin()), 1.0 + 0.15 * k as f64)
            })
            .collect();
        let k = YieldSurface::polyhedral(2, &hex).unwrap();
        let verts = match k.kind() {
            YieldKind::Polyhedral(p) => p.vertices(),
            _ => unreachable!(),
        };
        for (n, _) in &hex {
            let h = k.support(n);
            let face: Vec<&DevTensor> = verts
                .iter()
                .filter(|v| (n.ddot(v) - h).abs() < 1e-9)
                .collect();
            assert_eq!(face.len(), 2);
            let mut best = f64::INFINITY;
            let steps = 100_000;
            for i in 0..=steps {
                let th = i as f64 / steps as f64;
                let x = *face[0] * (1.0 - th) + *face[1] * th;
                best = best.min(x.norm());
            }
            let g = k.min_norm_subgradient(n);
            assert!((g.norm() - best).abs() < 1e-8, "{} vs {}", g.norm(), best);
            assert!((n.ddot(&g) - h).abs() < 1e-8);
        }
    }

    #[test]
    fn moduli_bounds_and_stress() {
        let m = ElasticModuli::new(1.0, 0.5).unwrap();
        let e = SymTensor::diag(&[1.0, -1.0]).unwrap();
        assert!((m.quad_q(&e) - 2.0).abs() < 1e-15);
        assert_eq!(m.quad_q(&SymTensor::zeros(2)), 0.0);

        let m = ElasticModuli::new(1.0, 1.0).unwrap();
        let s = m.stress(&SymTensor::diag(&[1.0, 1.0]).unwrap());
        assert!(s.max_abs_diff(&SymTensor::diag(&[2.0, 2.0]).unwrap()) < 1e-15);
        let tf = SymTensor::new(2, &[0.3, -0.3, 0.7]).unwrap();
        assert!(m.stress(&tf).max_abs_diff(&(tf * 2.0)) < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for dim in [2, 3] {
            let m = ElasticModuli::new(rng.random_range(0.1..3.0), rng.random_range(0.1..3.0)).unwrap();
            for _ in 0..100 {
                let e = random_sym(&mut rng, dim, 2.0);
                let q = m.quad_q(&e);
                assert!((q - 0.5 * m.stress(&e).ddot(&e)).abs() < 1e-12 * (1.0 + q));
                assert!(q >= m.alpha_c(dim) * e.norm_sq() - 1e-12);
                assert!(q <= m.beta_c(dim) * e.norm_sq() + 1e-12);
                let s = m.stress(&e);
                assert!((s.deviator().into_sym() - e.deviator().into_sym() * (2.0 * m.mu)).norm() < 1e-12);
                assert!((s.trace() - dim as f64 * m.kappa * e.trace()).abs() < 1e-12);
                assert!(s.norm() <= 2.0 * m.beta_c(dim) * e.norm() + 1e-12);
            }
        }
    }

    #[test]
    fn incremental_update_examples() {
        let mat = Material::von_mises(1.0, 1.0, 1.0).unwrap();
        let d = dev2(0.6, 0.8);
        let zero = DevTensor::zeros(2);

        let up = mat.incremental_update(&(d * 0.3).into_sym(), &zero).unwrap();
        assert_eq!(up.p, zero);
        assert_eq!(up.dissipation, 0.0);

        let up = mat.incremental_update(&(d * 1.5).into_sym(), &zero).unwrap();
        assert!((up.p - d).norm() < 1e-14);
        assert!((up.sigma.deviator() - d).norm() < 1e-14);
        assert!((up.dissipation - 1.0).abs() < 1e-14);

        let prev = d * 0.2;
        let up = mat.incremental_update(&(d * 0.5).into_sym(), &prev).unwrap();
        assert_eq!(up.p, prev);
    }

    #[test]
    fn incremental_update_ray_matches_line_oracle() {
        // along the ray p = t d the energy is (1.5 - t)² + |t|; bisect on
        // the sign of its right derivative
        let mat = Material::von_mises(1.0, 1.0, 1.0).unwrap();
        let d = dev2(0.6, 0.8);
        let slope = |t: f64| -2.0 * (1.5 - t) + if t >= 0.0 { 1.0 } else { -1.0 };
        let (mut a, mut b) = (-3.0f64, 3.0f64);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if slope(m) > 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        let t = 0.5 * (a + b);
        let up = mat
            .incremental_update(&(d * 1.5).into_sym(), &DevTensor::zeros(2))
            .unwrap();
        assert!((up.p - d * t).norm() < 1e-10);
    }

    #[test]
    fn radial_return_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..200 {
            let mu = rng.random_range(0.2..3.0);
            let kappa = rng.random_range(0.2..3.0);
            let r = rng.random_range(0.2..2.0);
            let mat = Material::von_mises(mu, kappa, r).unwrap();
            let eps = random_sym(&mut rng, 2, 2.0);
            let prev = random_dev(&mut rng, 2, 1.0);
            let up = mat.incremental_update(&eps, &prev).unwrap();
            let energy = |a: f64, b: f64| mat.point_energy(&eps, &dev2(a, b), &prev);
            let pc = prev.coords();
            let (a, b) = grid_zoom_min(energy, (pc[0], pc[1]), 4.0);
            let oracle = dev2(a, b);
            assert!((up.p - oracle).norm() < 1e-6);
            let e_impl = mat.point_energy(&eps, &up.p, &prev);
            let e_orc = energy(a, b);
            assert!((e_impl - e_orc).abs() < 1e-8);
        }
    }

    #[test]
    fn return_map_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let surfaces = [
            YieldSurface::von_mises(0.8).unwrap(),
            YieldSurface::square_2d(0.6).unwrap(),
        ];
        for k in surfaces {
            let mat = Material::new(ElasticModuli::new(1.3, 0.9).unwrap(), k);
            for _ in 0..100 {
                let eps = random_sym(&mut rng, 2, 2.0);
                let prev = random_dev(&mut rng, 2, 0.5);
                let up = mat.incremental_update(&eps, &prev).unwrap();
                let dp = up.p - prev;
                let sd = up.sigma.deviator();
                assert!(mat.yield_surface.contains(&sd, 1e-10));
                if dp.norm() > 0.0 {
                    let h = mat.support(&dp);
                    assert!((sd.ddot(&dp) - h).abs() <= 1e-9 * h.max(1e-300));
                    assert!(mat.yield_surface.violation(&sd).abs() <= 1e-9);
                    assert!(mat.yield_surface.in_normal_cone(&sd, &dp, 1e-8));
                }
                let e0 = mat.point_energy(&eps, &up.p, &prev);
                for _ in 0..20 {
                    let dir = random_dev(&mut rng, 2, 1.0);
                    let dir = dir * (1e-3 / dir.norm());
                    let e1 = mat.point_energy(&eps, &(up.p + dir), &prev);
                    assert!(e1 >= e0 - 1e-12);
                }
            }
        }
    }

    #[test]
    fn dissipation_lower_bound_is_tight_for_balls() {
        let vm = YieldSurface::von_mises(1.7).unwrap();
        let d = dev2(0.3, -1.1);
        assert!((vm.support(&d) - 1.7 * d.norm()).abs() < 1e-15);
    }
}
