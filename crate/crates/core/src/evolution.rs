//! Time stepping of the incremental scheme and the energy bookkeeping.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{dev_diff, dot, l1_norm, l2_norm, pairing, sym_diff, DiscreteTriple, Scenario};
use crate::solver::{euler_residuals, IncrementalSolver, SolverConfig, StepReport};
use crate::tensor::{DevTensor, SymTensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TryFrom<Vec<f64>> for TimeGrid {
    type Error = Error;
    fn try_from(times: Vec<f64>) -> Result<Self> {
        Self::new(times)
    }
}

impl From<TimeGrid> for Vec<f64> {
    fn from(g: TimeGrid) -> Self {
        g.times
    }
}

impl TimeGrid {
    /// `0 = t⁰ < t¹ < … < tᵏ`.
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::Config("a time grid needs at least two points".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::Config(format!("time grid must start at 0, got {}", times[0])));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("time grid must be finite and strictly increasing".into()));
        }
        Ok(Self { times })
    }

    pub fn uniform(t_final: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Config("number of steps must be at least 1".into()));
        }
        Self::new((0..=steps).map(|i| t_final * i as f64 / steps as f64).collect())
    }

    /// Halves every step.
    pub fn refined(&self) -> Self {
        let mut t = Vec::with_capacity(2 * self.times.len() - 1);
        for w in self.times.windows(2) {
            t.push(w[0]);
            t.push(0.5 * (w[0] + w[1]));
        }
        t.push(*self.times.last().unwrap());
        Self { times: t }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn t_final(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn max_step(&self) -> f64 {
        self.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Index of the last grid point `≤ t` (the piecewise-constant interpolant).
    pub fn index_at(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t).saturating_sub(1)
    }
}

/// Energy terms at one grid point; sums run over the steps up to it.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LedgerRow {
    pub t: f64,
    /// `𝓠(e)`.
    pub stored: f64,
    /// `Σ 𝓗(Δp)`.
    pub dissipation: f64,
    /// `⟨ℒ(t)|u(t)⟩`.
    pub load_u: f64,
    /// `Σ ⟨σʲ⁻¹|ΔEw⟩` (left endpoint).
    pub work_sigma_ew: f64,
    /// `Σ ⟨σ̄|ΔEw⟩` (trapezoid).
    pub work_sigma_ew_trap: f64,
    /// `Σ ⟨ℒ̄|Δw⟩` (trapezoid).
    pub work_load_w: f64,
    /// `Σ ⟨Δℒ|ū⟩` (trapezoid).
    pub work_load_rate_u: f64,
    /// Energy-balance residual with trapezoidal work.
    pub balance_residual: f64,
    /// Left minus right side of the discrete energy inequality, without `δ_k`.
    pub audit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionRecord {
    pub grid: TimeGrid,
    pub triples: Vec<DiscreteTriple>,
    pub sigma: Vec<Vec<SymTensor>>,
    pub ledger: Vec<LedgerRow>,
    pub reports: Vec<StepReport>,
    /// `ω_k = β_C max_r ∫_step ‖Eẇ‖₂`.
    pub omega_k: f64,
    /// `δ_k = ω_k ∫₀ᵀ ‖Eẇ‖₂`.
    pub delta_k: f64,
}

impl EvolutionRecord {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        self.grid.times()
    }

    /// Plastic increment of step `i ≥ 1`.
    pub fn dp(&self, i: usize) -> Vec<DevTensor> {
        dev_diff(&self.triples[i].p, &self.triples[i - 1].p)
    }

    /// Piecewise-constant interpolant of the stress.
    pub fn sigma_at(&self, t: f64) -> &[SymTensor] {
        &self.sigma[self.grid.index_at(t)]
    }

    pub fn max_balance_residual(&self) -> f64 {
        self.ledger.iter().map(|r| r.balance_residual.abs()).fold(0.0, f64::max)
    }

    pub fn final_dissipation(&self) -> f64 {
        self.ledger.last().map_or(0.0, |r| r.dissipation)
    }
}

/// Residual tolerance for accepting a user-supplied initial state.
const INITIAL_TOL: f64 = 1e-8;

/// The minimizer at `t = 0` from `p = 0`; stable by construction.
pub fn initial_state(scenario: &Scenario, cfg: SolverConfig) -> Result<DiscreteTriple> {
    let solver = IncrementalSolver::new(scenario, cfg)?;
    let p0 = vec![DevTensor::zeros(2); scenario.mesh().n_elements()];
    Ok(solver.solve_increment(0.0, &p0, None)?.0)
}

/// Marches the scheme over `grid`. Without `initial`, the state at `t = 0`
/// is the minimizer from zero plastic strain.
pub fn run_evolution(
    scenario: &Scenario,
    grid: &TimeGrid,
    initial: Option<&DiscreteTriple>,
    cfg: SolverConfig,
) -> Result<EvolutionRecord> {
    if (grid.t_final() - scenario.t_final()).abs() > 1e-12 * scenario.t_final() {
        return Err(Error::Config(format!(
            "grid ends at {} but the scenario at {}",
            grid.t_final(),
            scenario.t_final()
        )));
    }
    let solver = IncrementalSolver::new(scenario, cfg)?;
    let mesh = scenario.mesh();
    let with_step = |e: Error, i: usize| match e {
        Error::NonConvergence { t, triple, report, .. } => Error::NonConvergence {
            t,
            step: Some(i),
            triple,
            report,
        },
        other => other,
    };
    let (first, first_report) = match initial {
        Some(tr) => {
            if tr.u.len() != mesh.n_dofs() || tr.p.len() != mesh.n_elements() || tr.e.len() != mesh.n_elements() {
                return Err(Error::UnstableInitial("initial state does not match the mesh".into()));
            }
            let rep = euler_residuals(scenario, 0.0, tr, None);
            let ok = rep.admissibility_margin <= INITIAL_TOL
                && rep.equilibrium_residual <= INITIAL_TOL.max(cfg.tol_res)
                && rep.compatibility_error <= INITIAL_TOL
                && rep.boundary_error <= INITIAL_TOL;
            if !ok && !cfg.force {
                return Err(Error::UnstableInitial(format!(
                    "margin {:e}, equilibrium {:e}, compatibility {:e}, boundary {:e}",
                    rep.admissibility_margin, rep.equilibrium_residual, rep.compatibility_error, rep.boundary_error
                )));
            }
            (tr.clone(), rep)
        }
        None => {
            let p0 = vec![DevTensor::zeros(2); mesh.n_elements()];
            solver.solve_increment(0.0, &p0, None).map_err(|e| with_step(e, 0))?
        }
    };
    let mut triples = Vec::with_capacity(grid.times().len());
    let mut reports = Vec::with_capacity(grid.times().len());
    triples.push(first);
    reports.push(first_report);
    for (i, &t) in grid.times().iter().enumerate().skip(1) {
        let prev = &triples[i - 1];
        let (tr, rep) = solver
            .solve_increment(t, &prev.p, Some(prev))
            .map_err(|e| with_step(e, i))?;
        triples.push(tr);
        reports.push(rep);
    }
    let sigma: Vec<Vec<SymTensor>> = triples.iter().map(|tr| tr.stress(scenario)).collect();
    let beta = scenario.moduli().beta_c(2);
    let step_w: Vec<f64> = grid
        .times()
        .windows(2)
        .map(|w| scenario.ew_rate_integral(w[0], w[1]))
        .collect();
    let omega_k = beta * step_w.iter().fold(0.0, |a: f64, b| a.max(*b));
    let delta_k = omega_k * step_w.iter().sum::<f64>();
    let mut record = EvolutionRecord {
        grid: grid.clone(),
        triples,
        sigma,
        ledger: Vec::new(),
        reports,
        omega_k,
        delta_k,
    };
    record.ledger = build_ledger(&record, scenario);
    Ok(record)
}

fn build_ledger(rec: &EvolutionRecord, sc: &Scenario) -> Vec<LedgerRow> {
    let mesh = sc.mesh();
    let times = rec.grid.times();
    let ew: Vec<Vec<SymTensor>> = times.iter().map(|&t| sc.ew(t)).collect();
    let w: Vec<Vec<f64>> = times.iter().map(|&t| sc.w_nodal(t)).collect();
    let load: Vec<Vec<f64>> = times.iter().map(|&t| sc.load(t)).collect();
    let rho: Vec<Vec<SymTensor>> = times.iter().map(|&t| sc.rho(t)).collect();
    let mut rows = Vec::with_capacity(times.len());
    let mut acc = LedgerRow::default();
    // running sums of the discrete energy inequality
    let mut diss_rho = 0.0;
    let mut rho_rate_term = 0.0;
    let e_minus_ew = |i: usize| sym_diff(&rec.triples[i].e, &ew[i]);
    let q0 = sc.q_functional(&rec.triples[0].e);
    let rhs0 = q0 - pairing(mesh, &rho[0], &e_minus_ew(0));
    let l0 = dot(&load[0], &rec.triples[0].u);
    for (i, &t) in times.iter().enumerate() {
        let tr = &rec.triples[i];
        if i > 0 {
            let dp = rec.dp(i);
            let dh = sc.h_functional(&dp);
            acc.dissipation += dh;
            let dew = sym_diff(&ew[i], &ew[i - 1]);
            acc.work_sigma_ew += pairing(mesh, &rec.sigma[i - 1], &dew);
            let sbar: Vec<SymTensor> = rec.sigma[i - 1]
                .iter()
                .zip(&rec.sigma[i])
                .map(|(a, b)| (*a + *b) * 0.5)
                .collect();
            acc.work_sigma_ew_trap += pairing(mesh, &sbar, &dew);
            let dw: Vec<f64> = w[i].iter().zip(&w[i - 1]).map(|(a, b)| a - b).collect();
            let lbar: Vec<f64> = load[i].iter().zip(&load[i - 1]).map(|(a, b)| 0.5 * (a + b)).collect();
            acc.work_load_w += dot(&lbar, &dw);
            let dl: Vec<f64> = load[i].iter().zip(&load[i - 1]).map(|(a, b)| a - b).collect();
            let ubar: Vec<f64> = tr.u.iter().zip(&rec.triples[i - 1].u).map(|(a, b)| 0.5 * (a + b)).collect();
            acc.work_load_rate_u += dot(&dl, &ubar);
            let rho_d_dp: f64 = mesh
                .areas()
                .iter()
                .zip(rho[i].iter().zip(&dp))
                .map(|(a, (r, q))| a * r.deviator().ddot(q))
                .sum();
            diss_rho += dh - rho_d_dp;
            rho_rate_term += pairing(mesh, &sym_diff(&rho[i], &rho[i - 1]), &e_minus_ew(i - 1));
        }
        acc.t = t;
        acc.stored = sc.q_functional(&tr.e);
        acc.load_u = dot(&load[i], &tr.u);
        let work = acc.work_sigma_ew_trap - acc.work_load_w - acc.work_load_rate_u;
        acc.balance_residual = (acc.stored + acc.dissipation - acc.load_u) - (q0 - l0) - work;
        let lhs = acc.stored - pairing(mesh, &rho[i], &e_minus_ew(i)) + diss_rho;
        let rhs = rhs0 - rho_rate_term + acc.work_sigma_ew;
        acc.audit = lhs - rhs;
        rows.push(acc);
    }
    rows
}

/// Left minus right side of the discrete energy inequality at every grid
/// point, without the remainder `δ_k`; the inequality holds when every entry
/// is at most `record.delta_k`.
pub fn discrete_energy_audit(record: &EvolutionRecord) -> Vec<f64> {
    record.ledger.iter().map(|r| r.audit).collect()
}

/// `[𝓠 + 𝓓 - ⟨ℒ|u⟩](tᵢ) - [𝓠 - ⟨ℒ|u⟩](0) - ∫ {⟨σ|Eẇ⟩ - ⟨ℒ|ẇ⟩ - ⟨ℒ̇|u⟩}`,
/// with trapezoidal quadrature.
pub fn energy_balance_residual(record: &EvolutionRecord) -> Vec<f64> {
    record.ledger.iter().map(|r| r.balance_residual).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AprioriReport {
    pub max_e: f64,
    pub bound_e: f64,
    /// `Σ ‖Δp‖₁`.
    pub variation_p: f64,
    pub bound_p: f64,
    pub holds: bool,
}

/// Checks `max ‖eᵢ‖₂` and `Σ ‖Δpᵢ‖₁` against the bounds that follow from the
/// discrete energy inequality and the safe-load coercivity:
/// `α_C S² + α V ≤ b S + c` with
/// `b = R + I_ρ + 2β_C I_w`, `c = β_C ‖e₀‖² + R₀(‖e₀‖ + W₀) + (R + I_ρ) W + δ_k`,
/// where `R`, `W` bound `‖ρ‖₂`, `‖Ew‖₂` and `I_ρ`, `I_w` are the sums of
/// `‖Δρ‖₂`, `‖ΔEw‖₂` over the steps.
pub fn apriori_bounds(record: &EvolutionRecord, scenario: &Scenario) -> AprioriReport {
    let mesh = scenario.mesh();
    let m = scenario.moduli();
    let (ac, bc) = (m.alpha_c(2), m.beta_c(2));
    let times = record.grid.times();
    let rho: Vec<Vec<SymTensor>> = times.iter().map(|&t| scenario.rho(t)).collect();
    let ew: Vec<Vec<SymTensor>> = times.iter().map(|&t| scenario.ew(t)).collect();
    let r_max = rho.iter().map(|r| l2_norm(mesh, r)).fold(0.0, f64::max);
    let w_max = ew.iter().map(|e| l2_norm(mesh, e)).fold(0.0, f64::max);
    let i_rho: f64 = rho.windows(2).map(|w| l2_norm(mesh, &sym_diff(&w[1], &w[0]))).sum();
    let i_w: f64 = ew.windows(2).map(|w| l2_norm(mesh, &sym_diff(&w[1], &w[0]))).sum();
    let e0 = l2_norm(mesh, &record.triples[0].e);
    let r0 = l2_norm(mesh, &rho[0]);
    let w0 = l2_norm(mesh, &ew[0]);
    let b = r_max + i_rho + 2.0 * bc * i_w;
    let c = bc * e0 * e0 + r0 * (e0 + w0) + (r_max + i_rho) * w_max + record.delta_k;
    let bound_e = (b + (b * b + 4.0 * ac * c).sqrt()) / (2.0 * ac);
    let bound_p = (b * bound_e + c) / scenario.alpha();
    let max_e = record.triples.iter().map(|tr| l2_norm(mesh, &tr.e)).fold(0.0, f64::max);
    let variation_p: f64 = (1..record.len()).map(|i| l1_norm(mesh, &record.dp(i))).sum();
    // solver tolerance slack
    let slack = 1e-9 * (1.0 + bound_e);
    AprioriReport {
        max_e,
        bound_e,
        variation_p,
        bound_p,
        holds: max_e <= bound_e + slack && variation_p <= bound_p + slack,
    }
}

/// `max ‖eⁱ - eⁱ⁻¹‖₂ / Δtᵢ`.
pub fn strain_rate_bound(record: &EvolutionRecord, scenario: &Scenario) -> f64 {
    let mesh = scenario.mesh();
    let t = record.grid.times();
    (1..record.len())
        .map(|i| l2_norm(mesh, &sym_diff(&record.triples[i].e, &record.triples[i - 1].e)) / (t[i] - t[i - 1]))
        .fold(0.0, f64::max)
}

/// `max_t ‖σ_a(t) - σ_b(t)‖₂` over `probes`, using the piecewise-constant
/// interpolants.
pub fn stress_distance(a: &EvolutionRecord, b: &EvolutionRecord, scenario: &Scenario, probes: &[f64]) -> f64 {
    probes
        .iter()
        .map(|&t| l2_norm(scenario.mesh(), &sym_diff(a.sigma_at(t), b.sigma_at(t))))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub steps: usize,
    pub max_step: f64,
    /// `max_t ‖σ_k - σ_next‖₂` at the probe times; `None` on the finest grid.
    pub sigma_cauchy: Option<f64>,
    /// `|D_k(T) - D_next(T)|`.
    pub dissipation_diff: Option<f64>,
    pub dissipation: f64,
    pub max_balance_residual: f64,
    pub delta_k: f64,
    /// Largest violation of the discrete energy inequality beyond `δ_k`.
    pub audit_excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub probes: Vec<f64>,
    pub rows: Vec<StudyRow>,
}

impl StudyReport {
    /// Strictly decreasing `‖σ_k - σ_next‖` along the refinement.
    pub fn cauchy_decreasing(&self) -> bool {
        let c: Vec<f64> = self.rows.iter().filter_map(|r| r.sigma_cauchy).collect();
        c.len() >= 2 && c.windows(2).all(|w| w[1] < w[0])
    }
}

/// Runs every grid (in parallel) and compares consecutive ones at the
/// points of the first grid.
pub fn convergence_study(
    scenario: &Scenario,
    grids: &[TimeGrid],
    initial: Option<&DiscreteTriple>,
    cfg: SolverConfig,
) -> Result<(StudyReport, Vec<EvolutionRecord>)> {
    if grids.len() < 2 {
        return Err(Error::Config("a convergence study needs at least two grids".into()));
    }
    let records: Vec<EvolutionRecord> = grids
        .par_iter()
        .map(|g| run_evolution(scenario, g, initial, cfg))
        .collect::<Result<_>>()?;
    let probes = grids[0].times().to_vec();
    let rows = records
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let next = records.get(k + 1);
            let audit_excess = r
                .ledger
                .iter()
                .map(|l| l.audit - r.delta_k)
                .fold(f64::NEG_INFINITY, f64::max);
            StudyRow {
                steps: r.grid.steps(),
                max_step: r.grid.max_step(),
                sigma_cauchy: next.map(|n| stress_distance(r, n, scenario, &probes)),
                dissipation_diff: next.map(|n| (r.final_dissipation() - n.final_dissipation()).abs()),
                dissipation: r.final_dissipation(),
                max_balance_residual: r.max_balance_residual(),
                delta_k: r.delta_k,
                audit_excess,
            }
        })
        .collect();
    Ok((StudyReport { probes, rows }, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::Material;
    use crate::fem::tests::{base_spec, unit_square};
    use crate::fem::EdgeLabel::{G0, G1};
    use crate::fem::{AffineDisplacement, Schedule};
    use crate::material_point::{run_point, StrainHistory};

    fn grid(k: usize) -> TimeGrid {
        TimeGrid::uniform(1.0, k).unwrap()
    }

    #[test]
    fn grid_validation_and_refinement() {
        assert!(TimeGrid::new(vec![0.0]).is_err());
        assert!(TimeGrid::new(vec![0.1, 1.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, 0.5, 0.5]).is_err());
        assert!(TimeGrid::uniform(1.0, 0).is_err());
        let g = TimeGrid::new(vec![0.0, 0.2, 1.0]).unwrap();
        assert_eq!(g.refined().times(), &[0.0, 0.1, 0.2, 0.6, 1.0]);
        assert!((g.max_step() - 0.8).abs() < 1e-15);
        assert_eq!(g.index_at(0.19), 0);
        assert_eq!(g.index_at(0.2), 1);
        assert_eq!(g.index_at(5.0), 2);
    }

    #[test]
    fn zero_data_gives_zero_ledger() {
        let sc = Scenario::with_mesh(base_spec(), unit_square(3, [G0, G1, G1, G1])).unwrap();
        let rec = run_evolution(&sc, &grid(4), None, SolverConfig::default()).unwrap();
        assert_eq!(rec.len(), 5);
        for (tr, row) in rec.triples.iter().zip(&rec.ledger) {
            assert!(tr.u.iter().all(|&v| v == 0.0));
            assert_eq!(row.stored, 0.0);
            assert_eq!(row.dissipation, 0.0);
            assert_eq!(row.balance_residual, 0.0);
        }
        assert_eq!(rec.delta_k, 0.0);
    }

    fn shear_spec(schedule: Schedule) -> crate::fem::ScenarioSpec {
        let mut spec = base_spec();
        spec.material.kappa = 1.7;
        spec.w.push(AffineDisplacement {
            grad: [[0.0, 1.0], [0.0, 0.0]],
            shift: [0.0; 2],
            schedule,
        });
        spec
    }

    #[test]
    fn homogeneous_shear_matches_material_point() {
        let sched = Schedule::new(vec![[0.0, 0.0], [0.6, 2.0], [1.0, 0.8]]).unwrap();
        let sc = Scenario::with_mesh(shear_spec(sched.clone()), unit_square(3, [G0, G0, G0, G0])).unwrap();
        let g = grid(50);
        let rec = run_evolution(&sc, &g, None, SolverConfig::default()).unwrap();
        let mat = Material::von_mises(1.0, 1.7, 1.0).unwrap();
        let hist = StrainHistory::new(
            g.times().to_vec(),
            g.times()
                .iter()
                .map(|&t| SymTensor::new(2, &[0.0, 0.0, 0.5 * sched.value(t)]).unwrap())
                .collect(),
        )
        .unwrap();
        let point = run_point(&mat, &hist).unwrap();
        let area = sc.mesh().total_area();
        for (i, st) in point.states.iter().enumerate() {
            for el in 0..sc.mesh().n_elements() {
                assert!((rec.triples[i].p[el] - st.p).norm() <= 1e-9);
                assert!((rec.sigma[i][el] - st.sigma).norm() <= 1e-9);
            }
            assert!((rec.ledger[i].dissipation - area * st.dissipation).abs() <= 1e-9);
        }
        assert!(point.states.iter().any(|s| !s.p.is_zero()));
    }

    #[test]
    fn hold_phase_freezes_plastic_strain() {
        let sched = Schedule::new(vec![[0.0, 0.0], [0.5, 1.5], [1.0, 1.5]]).unwrap();
        let sc = Scenario::with_mesh(shear_spec(sched), unit_square(2, [G0, G0, G0, G0])).unwrap();
        let rec = run_evolution(&sc, &grid(10), None, SolverConfig::default()).unwrap();
        for i in 6..=10 {
            assert!(rec.dp(i).iter().all(|d| d.norm() < 1e-14));
            assert!((rec.ledger[i].dissipation - rec.ledger[5].dissipation).abs() < 1e-13);
        }
        assert!(rec.ledger[5].dissipation > 0.0);
    }

    #[test]
    fn unstable_initial_state_is_refused() {
        let sc = Scenario::with_mesh(shear_spec(Schedule::ramp()), unit_square(2, [G0, G1, G1, G1])).unwrap();
        let mut bad = DiscreteTriple::zeros(sc.mesh());
        bad.e[0] = SymTensor::new(2, &[2.0, -2.0, 0.0]).unwrap();
        let err = run_evolution(&sc, &grid(2), Some(&bad), SolverConfig::default()).unwrap_err();
        assert!(matches!(err, Error::UnstableInitial(_)), "{err}");
        let zero = DiscreteTriple::zeros(sc.mesh());
        assert!(run_evolution(&sc, &grid(2), Some(&zero), SolverConfig::default()).is_ok());
        assert!(run_evolution(&sc, &TimeGrid::uniform(2.0, 2).unwrap(), None, SolverConfig::default()).is_err());
    }

    /// Strip `[0,2]×[0,1]` pulled and then sheared through its ends.
    fn plastic_ramp() -> Scenario {
        let mut spec = base_spec();
        spec.t_final = 1.0;
        spec.w.push(AffineDisplacement {
            grad: [[1.0, 0.0], [0.0, 0.0]],
            shift: [0.0; 2],
            schedule: Schedule::new(vec![[0.0, 0.0], [0.5, 0.9], [1.0, 0.9]]).unwrap(),
        });
        spec.w.push(AffineDisplacement {
            grad: [[0.0, 0.0], [1.0, 0.0]],
            shift: [0.0; 2],
            schedule: Schedule::new(vec![[0.0, 0.0], [0.5, 0.0], [1.0, 1.2]]).unwrap(),
        });
        let mesh = crate::fem::Mesh::rectangle(&crate::fem::RectSpec {
            x0: 0.0,
            y0: 0.0,
            lx: 2.0,
            ly: 1.0,
            nx: 8,
            ny: 4,
            left: G0,
            right: G0,
            bottom: G1,
            top: G1,
        })
        .unwrap();
        Scenario::with_mesh(spec, mesh).unwrap()
    }

    #[test]
    fn audit_balance_and_bounds_on_plastic_ramp() {
        let sc = plastic_ramp();
        let mut prev: Option<f64> = None;
        for k in [8, 16, 32] {
            let rec = run_evolution(&sc, &grid(k), None, SolverConfig::default()).unwrap();
            assert!(rec.final_dissipation() > 0.0);
            for a in discrete_energy_audit(&rec) {
                assert!(a <= rec.delta_k + 1e-12, "audit {a} > delta {}", rec.delta_k);
            }
            let ap = apriori_bounds(&rec, &sc);
            assert!(ap.holds, "{ap:?}");
            let res = rec.max_balance_residual();
            if let Some(p) = prev {
                assert!(p / res >= 1.5, "balance residual {p} -> {res}");
            }
            prev = Some(res);
        }
    }

    #[test]
    fn study_is_cauchy() {
        let sc = plastic_ramp();
        let grids: Vec<TimeGrid> = [4, 8, 16, 32].iter().map(|&k| grid(k)).collect();
        let (rep, recs) = convergence_study(&sc, &grids, None, SolverConfig::default()).unwrap();
        assert_eq!(recs.len(), 4);
        assert!(rep.cauchy_decreasing(), "{:?}", rep.rows);
        assert!(rep.rows.iter().all(|r| r.audit_excess <= 1e-12));
        let r16 = strain_rate_bound(&recs[2], &sc);
        let r32 = strain_rate_bound(&recs[3], &sc);
        assert!(r32 <= 1.5 * r16, "{r16} {r32}");
    }
}
