//! One incremental minimization over the discrete admissible set.
//!
//! The energy `𝓠(Eu - p) + 𝓗(p - p_prev) - F·u` is minimized by block
//! descent: a linear solve in `u` with `p` as eigenstrain, then the
//! elementwise return mapping in `p`.

use nalgebra::DMatrix;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constitutive::ReturnConfig;
use crate::error::{Error, Result};
use crate::fem::{
    check_safe_load, dot, free_norm, internal_force, strain_unchecked, DiscreteTriple, EdgeLabel,
    Scenario,
};
use crate::tensor::{DevTensor, SymTensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Stop once the relative energy decrease per outer iteration falls below this.
    pub tol_energy: f64,
    /// Bound on the free-dof equilibrium residual `‖Bᵀσ - F‖`.
    pub tol_res: f64,
    pub max_outer: usize,
    /// Over-relaxation of the plastic update, in `[1, 2)`.
    pub relaxation: f64,
    /// Skip the safe-load and initial-stability checks.
    pub force: bool,
    /// Keep the energy after every outer iteration in the report.
    pub trace: bool,
    pub return_tol: f64,
    pub return_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_energy: 1e-12,
            tol_res: 1e-9,
            max_outer: 10_000,
            relaxation: 1.0,
            force: false,
            trace: false,
            return_tol: 1e-10,
            return_max_iter: 10_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tol_energy > 0.0
            && self.tol_res > 0.0
            && self.max_outer >= 1
            && (1.0..2.0).contains(&self.relaxation)
            && self.return_tol > 0.0
            && self.return_max_iter >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid solver configuration {self:?}")))
        }
    }

    fn return_cfg(&self) -> ReturnConfig {
        ReturnConfig {
            tol: self.return_tol,
            max_iter: self.return_max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StepReport {
    pub t: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `𝓠(e) + 𝓗(p - p_prev) - ⟨ℒ|u⟩`.
    pub energy: f64,
    /// `‖Bᵀσ - F‖` over all free degrees of freedom.
    pub equilibrium_residual: f64,
    /// The part of the residual carried by free nodes on `Γ1`.
    pub traction_residual: f64,
    /// Largest distance from `σ_D` to `K`.
    pub admissibility_margin: f64,
    /// Largest `|H(Δp) - σ_D:Δp|`.
    pub flow_rule_residual: f64,
    /// Largest distance of `p` from the return mapping of `Eu`.
    pub p_residual: f64,
    pub compatibility_error: f64,
    pub boundary_error: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub energy_trace: Vec<f64>,
}

impl StepReport {
    /// Every residual is at most `tol`.
    pub fn within(&self, tol: f64) -> bool {
        self.equilibrium_residual <= tol
            && self.admissibility_margin <= tol
            && self.flow_rule_residual <= tol
            && self.p_residual <= tol
            && self.compatibility_error <= tol
            && self.boundary_error <= tol
    }
}

/// Prefactored solver for one scenario.
pub struct IncrementalSolver<'a> {
    scenario: &'a Scenario,
    cfg: SolverConfig,
    free: Vec<usize>,
    chol: CscCholesky<f64>,
    /// Free dofs of nodes on `Γ1` edges, as positions in `free`.
    traction_rows: Vec<usize>,
}

fn element_stiffness(mu: f64, kappa: f64, area: f64, g: &[[f64; 2]; 3]) -> [[f64; 6]; 6] {
    // strain vector (xx, yy, xy) against dofs (u_ax, u_ay)
    let m = [[mu + kappa, kappa - mu, 0.0], [kappa - mu, mu + kappa, 0.0], [0.0, 0.0, 4.0 * mu]];
    let mut b = [[0.0; 6]; 3];
    for a in 0..3 {
        b[0][2 * a] = g[a][0];
        b[1][2 * a + 1] = g[a][1];
        b[2][2 * a] = 0.5 * g[a][1];
        b[2][2 * a + 1] = 0.5 * g[a][0];
    }
    let mut k = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            let mut s = 0.0;
            for r in 0..3 {
                for c in 0..3 {
                    s += b[r][i] * m[r][c] * b[c][j];
                }
            }
            k[i][j] = area * s;
        }
    }
    k
}

impl<'a> IncrementalSolver<'a> {
    pub fn new(scenario: &'a Scenario, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let mesh = scenario.mesh();
        let n = mesh.n_dofs();
        let mut fixed = vec![false; n];
        for &d in scenario.dirichlet_dofs() {
            fixed[d] = true;
        }
        // order nodes along the longer side to keep the factor banded
        let bb = mesh.bbox();
        let axis = usize::from(bb[3] - bb[1] > bb[2] - bb[0]);
        let mut order: Vec<usize> = (0..mesh.n_nodes()).collect();
        order.sort_by(|&i, &j| {
            let (a, b) = (mesh.nodes()[i], mesh.nodes()[j]);
            a[axis].total_cmp(&b[axis]).then(a[1 - axis].total_cmp(&b[1 - axis]))
        });
        let free: Vec<usize> = order
            .iter()
            .flat_map(|&i| [2 * i, 2 * i + 1])
            .filter(|&d| !fixed[d])
            .collect();
        if free.is_empty() {
            return Err(Error::SingularSystem("no free degree of freedom".into()));
        }
        let mut slot = vec![usize::MAX; n];
        for (k, &d) in free.iter().enumerate() {
            slot[d] = k;
        }
        let m = scenario.moduli();
        let mut coo = CooMatrix::new(free.len(), free.len());
        for ((el, g), area) in mesh.elements().iter().zip(mesh.grads()).zip(mesh.areas()) {
            let k = element_stiffness(m.mu, m.kappa, *area, g);
            let dofs: Vec<usize> = el.iter().flat_map(|&i| [2 * i, 2 * i + 1]).collect();
            for (i, &di) in dofs.iter().enumerate() {
                if slot[di] == usize::MAX {
                    continue;
                }
                for (j, &dj) in dofs.iter().enumerate() {
                    if slot[dj] != usize::MAX {
                        coo.push(slot[di], slot[dj], k[i][j]);
                    }
                }
            }
        }
        let csc = CscMatrix::from(&coo);
        let chol = CscCholesky::factor(&csc)
            .map_err(|e| Error::SingularSystem(format!("stiffness factorization failed: {e:?}")))?;
        let diag: Vec<f64> = (0..free.len())
            .map(|j| chol.l().col(j).get_entry(j).map_or(0.0, |v| v.into_value()))
            .collect();
        let dmax = diag.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let dmin = diag.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
        if !(dmin * dmin > 1e-13 * dmax * dmax) {
            return Err(Error::SingularSystem(format!(
                "stiffness is singular (pivot ratio {:.3e}); some part of the body is not held by a Dirichlet edge",
                (dmin / dmax).powi(2)
            )));
        }
        let mut on_g1 = vec![false; mesh.n_nodes()];
        for e in mesh.edges().iter().filter(|e| e.label == EdgeLabel::G1) {
            on_g1[e.nodes[0]] = true;
            on_g1[e.nodes[1]] = true;
        }
        let traction_rows = free
            .iter()
            .enumerate()
            .filter(|(_, &d)| on_g1[d / 2])
            .map(|(k, _)| k)
            .collect();
        Ok(Self {
            scenario,
            cfg,
            free,
            chol,
            traction_rows,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        self.scenario
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    fn return_map(&self, eps: &[SymTensor], p_prev: &[DevTensor]) -> Result<Vec<DevTensor>> {
        let rc = self.cfg.return_cfg();
        let sc = self.scenario;
        eps.par_iter()
            .zip(p_prev.par_iter())
            .enumerate()
            .with_min_len(64)
            .map(|(el, (e, pp))| sc.material(el).return_map(e, pp, rc))
            .collect()
    }

    fn energy(&self, eps: &[SymTensor], p: &[DevTensor], p_prev: &[DevTensor], f: &[f64], u: &[f64]) -> f64 {
        let sc = self.scenario;
        let m = sc.moduli();
        let mut j = 0.0;
        for (el, area) in sc.mesh().areas().iter().enumerate() {
            let e = eps[el] - p[el].into_sym();
            j += area * (m.quad_q(&e) + sc.material(el).support(&(p[el] - p_prev[el])));
        }
        j - dot(f, u)
    }

    /// Residual `F - Bᵀσ(Eu - p)` restricted to the free dofs.
    fn free_residual(&self, eps: &[SymTensor], p: &[DevTensor], f: &[f64]) -> Vec<f64> {
        let m = self.scenario.moduli();
        let sigma: Vec<SymTensor> = eps
            .iter()
            .zip(p)
            .map(|(e, q)| m.stress(&(*e - q.into_sym())))
            .collect();
        let b = internal_force(self.scenario.mesh(), &sigma);
        self.free.iter().map(|&d| f[d] - b[d]).collect()
    }

    /// Minimizes the incremental energy at time `t` from `p_prev`.
    pub fn solve_increment(
        &self,
        t: f64,
        p_prev: &[DevTensor],
        warm_start: Option<&DiscreteTriple>,
    ) -> Result<(DiscreteTriple, StepReport)> {
        let sc = self.scenario;
        let mesh = sc.mesh();
        if p_prev.len() != mesh.n_elements() {
            return Err(Error::DimensionMismatch {
                expected: mesh.n_elements(),
                got: p_prev.len(),
            });
        }
        if !self.cfg.force {
            let r = check_safe_load(sc, t);
            if !r.passed {
                return Err(Error::UnsafeLoad { t, detail: r.detail() });
            }
        }
        let f = sc.load(t);
        let w = sc.w_nodal(t);
        let (mut u, mut p) = match warm_start {
            Some(ws) => {
                if ws.u.len() != mesh.n_dofs() || ws.p.len() != mesh.n_elements() {
                    return Err(Error::DimensionMismatch {
                        expected: mesh.n_dofs(),
                        got: ws.u.len(),
                    });
                }
                (ws.u.clone(), ws.p.clone())
            }
            None => (w.clone(), p_prev.to_vec()),
        };
        for &d in sc.dirichlet_dofs() {
            u[d] = w[d];
        }
        let mut eps = strain_unchecked(mesh, &u);
        let mut j_prev = self.energy(&eps, &p, p_prev, &f, &u);
        let mut trace = Vec::new();
        let omega = self.cfg.relaxation;
        let mut rhs = DMatrix::zeros(self.free.len(), 1);
        for it in 1..=self.cfg.max_outer {
            // u-step: exact minimizer in u at fixed p
            let r = self.free_residual(&eps, &p, &f);
            rhs.column_mut(0).copy_from_slice(&r);
            self.chol.solve_mut(&mut rhs);
            for (k, &d) in self.free.iter().enumerate() {
                u[d] += rhs[k];
            }
            eps = strain_unchecked(mesh, &u);
            // p-step
            let p_rr = self.return_map(&eps, p_prev)?;
            let j_rr = self.energy(&eps, &p_rr, p_prev, &f, &u);
            let res = self.free_residual(&eps, &p_rr, &f);
            let res_norm = res.iter().map(|x| x * x).sum::<f64>().sqrt();
            let scale = j_rr.abs().max(dot(&f, &u).abs()).max(sc.q_functional(&eps)).max(f64::MIN_POSITIVE);
            let small_decrease = j_prev - j_rr <= self.cfg.tol_energy * scale;
            if self.cfg.trace {
                trace.push(j_rr);
            }
            if small_decrease && res_norm <= self.cfg.tol_res {
                let triple = DiscreteTriple::from_up(mesh, u, p_rr)?;
                let mut report = euler_residuals_with(self, t, &triple, Some(p_prev));
                report.iterations = it;
                report.converged = true;
                report.energy_trace = trace;
                return Ok((triple, report));
            }
            if omega != 1.0 {
                let p_rel: Vec<DevTensor> = p
                    .iter()
                    .zip(&p_rr)
                    .map(|(a, b)| *a + (*b - *a) * omega)
                    .collect();
                let j_rel = self.energy(&eps, &p_rel, p_prev, &f, &u);
                if j_rel <= j_prev {
                    p = p_rel;
                    j_prev = j_rel;
                    continue;
                }
            }
            p = p_rr;
            j_prev = j_rr;
        }
        let p_rr = self.return_map(&eps, p_prev)?;
        let triple = DiscreteTriple::from_up(mesh, u, p_rr)?;
        let mut report = euler_residuals_with(self, t, &triple, Some(p_prev));
        report.iterations = self.cfg.max_outer;
        report.converged = false;
        report.energy_trace = trace;
        Err(Error::NonConvergence {
            t,
            step: None,
            triple: Box::new(triple),
            report: Box::new(report),
        })
    }
}

/// Builds a solver and runs one increment.
pub fn solve_increment(
    scenario: &Scenario,
    t: f64,
    p_prev: &[DevTensor],
    cfg: SolverConfig,
    warm_start: Option<&DiscreteTriple>,
) -> Result<(DiscreteTriple, StepReport)> {
    IncrementalSolver::new(scenario, cfg)?.solve_increment(t, p_prev, warm_start)
}

/// Residuals of the Euler conditions for `triple` at time `t`. The flow-rule
/// and return-mapping residuals need `p_prev` and are zero without it.
pub fn euler_residuals(
    scenario: &Scenario,
    t: f64,
    triple: &DiscreteTriple,
    p_prev: Option<&[DevTensor]>,
) -> StepReport {
    let mesh = scenario.mesh();
    let mut on_g1 = vec![false; mesh.n_nodes()];
    for e in mesh.edges().iter().filter(|e| e.label == EdgeLabel::G1) {
        on_g1[e.nodes[0]] = true;
        on_g1[e.nodes[1]] = true;
    }
    let mut fixed = vec![false; mesh.n_dofs()];
    for &d in scenario.dirichlet_dofs() {
        fixed[d] = true;
    }
    let rows: Vec<usize> = (0..mesh.n_dofs()).filter(|&d| !fixed[d] && on_g1[d / 2]).collect();
    residuals(scenario, t, triple, p_prev, &rows, ReturnConfig::default())
}

fn euler_residuals_with(
    solver: &IncrementalSolver<'_>,
    t: f64,
    triple: &DiscreteTriple,
    p_prev: Option<&[DevTensor]>,
) -> StepReport {
    let rows: Vec<usize> = solver.traction_rows.iter().map(|&k| solver.free[k]).collect();
    residuals(solver.scenario, t, triple, p_prev, &rows, solver.cfg.return_cfg())
}

fn residuals(
    sc: &Scenario,
    t: f64,
    triple: &DiscreteTriple,
    p_prev: Option<&[DevTensor]>,
    traction_dofs: &[usize],
    rc: ReturnConfig,
) -> StepReport {
    let mesh = sc.mesh();
    let sigma = triple.stress(sc);
    let f = sc.load(t);
    let b = internal_force(mesh, &sigma);
    let r: Vec<f64> = b.iter().zip(&f).map(|(x, y)| x - y).collect();
    let equilibrium_residual = free_norm(&r, sc.dirichlet_dofs());
    let traction_residual = traction_dofs.iter().map(|&d| r[d] * r[d]).sum::<f64>().sqrt();
    let mut admissibility_margin = 0.0f64;
    let mut flow = 0.0f64;
    let mut p_res = 0.0f64;
    let eps = strain_unchecked(mesh, &triple.u);
    for (el, s) in sigma.iter().enumerate() {
        let mat = sc.material(el);
        let sd = s.deviator();
        admissibility_margin = admissibility_margin.max(mat.yield_surface.distance(&sd));
        if let Some(pp) = p_prev {
            let dp = triple.p[el] - pp[el];
            flow = flow.max((mat.support(&dp) - sd.ddot(&dp)).abs());
            // a failed polyhedral return shows up as a large residual
            let q = mat.return_map(&eps[el], &pp[el], rc).unwrap_or(pp[el]);
            p_res = p_res.max((q - triple.p[el]).norm());
        }
    }
    let dissip = p_prev.map_or(0.0, |pp| {
        let dp: Vec<DevTensor> = triple.p.iter().zip(pp).map(|(a, b)| *a - *b).collect();
        sc.h_functional(&dp)
    });
    StepReport {
        t,
        iterations: 0,
        converged: false,
        energy: sc.q_functional(&triple.e) + dissip - dot(&f, &triple.u),
        equilibrium_residual,
        traction_residual,
        admissibility_margin,
        flow_rule_residual: flow,
        p_residual: p_res,
        compatibility_error: triple.compatibility_error(mesh),
        boundary_error: triple.boundary_error(sc, t),
        energy_trace: Vec::new(),
    }
}
