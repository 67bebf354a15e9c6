//! Post-hoc audits of a finished evolution: flow rule, variational
//! inequality, normality, precise stress, continuous dependence, power
//! balance and uniqueness probes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::constitutive::YieldKind;
use crate::error::Result;
use crate::evolution::EvolutionRecord;
use crate::fem::{dev_diff, dot, l1_norm, l2_norm, pairing, sym_diff, DiscreteTriple, Scenario};
use crate::solver::{solve_increment, SolverConfig};
use crate::tensor::{DevTensor, SymTensor};

/// Summary row of one check; the row of `verify.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub check: String,
    /// Step of the worst value (0 when the check is not stepwise).
    pub step: usize,
    pub element: Option<usize>,
    pub value: f64,
    pub tol: f64,
    pub passed: bool,
}

impl CheckRow {
    fn new(check: &str, worst: Worst, tol: f64, passed: bool) -> Self {
        Self {
            check: check.into(),
            step: worst.step,
            element: worst.element,
            value: worst.value,
            tol,
            passed,
        }
    }
}

/// Running maximum with its location.
#[derive(Debug, Clone, Copy)]
struct Worst {
    value: f64,
    step: usize,
    element: Option<usize>,
}

impl Worst {
    fn new(init: f64) -> Self {
        Self {
            value: init,
            step: 0,
            element: None,
        }
    }

    /// Ties go to the earliest location, so parallel reductions are
    /// reproducible.
    fn max(self, other: Self) -> Self {
        let earlier = (other.step, other.element) < (self.step, self.element);
        if other.value > self.value || (other.value == self.value && earlier) {
            other
        } else {
            self
        }
    }
}

/// An element flows in step `i` when `|Δp|` is well above the rounding of
/// `p` itself; below that the direction of `Δp` is noise.
pub const FLOW_TOL: f64 = 1e-9;

fn is_flowing(dp: &DevTensor, p_prev: &DevTensor) -> bool {
    dp.norm() > FLOW_TOL * (1.0 + p_prev.norm())
}

fn stress_scale(scenario: &Scenario) -> f64 {
    scenario.r_outer()
}

/// Elementwise gap `H(Δp) - σ_D:Δp`, normalized by `|Δp|` and the yield
/// radius; it lies in `[0, tol]` when the flow rule holds.
pub fn check_flow_rule(record: &EvolutionRecord, scenario: &Scenario, tol: f64) -> CheckRow {
    let s = stress_scale(scenario);
    let worst = (1..record.len())
        .into_par_iter()
        .map(|i| {
            let dp = record.dp(i);
            let mut w = Worst::new(0.0);
            for (el, q) in dp.iter().enumerate() {
                let n = q.norm();
                if n == 0.0 {
                    continue;
                }
                let sd = record.sigma[i][el].deviator();
                let gap = scenario.material(el).support(q) - sd.ddot(q);
                // a negative gap beyond rounding is as much a violation
                w = w.max(Worst {
                    value: gap.abs() / (n * s),
                    step: i,
                    element: Some(el),
                });
            }
            w
        })
        .reduce(|| Worst::new(0.0), Worst::max);
    CheckRow::new("flow_rule", worst, tol, worst.value <= tol)
}

/// Elementwise flow-rule gaps of step `i`, unnormalized.
pub fn flow_rule_gaps(record: &EvolutionRecord, scenario: &Scenario, i: usize) -> Vec<f64> {
    record
        .dp(i)
        .iter()
        .enumerate()
        .map(|(el, q)| scenario.material(el).support(q) - record.sigma[i][el].deviator().ddot(q))
        .collect()
}

/// `min ⟨σ_D - τ_D|Δp⟩` over `τ = ρ(tᵢ)` and `n_samples` random convex
/// combinations `θρ + (1-θ)σ`; non-negative when the inequality holds.
pub fn check_variational_inequality(
    record: &EvolutionRecord,
    scenario: &Scenario,
    n_samples: usize,
    seed: u64,
    tol: f64,
) -> CheckRow {
    let mesh = scenario.mesh();
    let times = record.times();
    let worst = (1..record.len())
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let dp = record.dp(i);
            let rho = scenario.rho(times[i]);
            let sig = &record.sigma[i];
            let mut thetas = vec![1.0];
            thetas.extend((0..n_samples).map(|_| 1.0 - rng.random::<f64>()));
            let mut w = Worst::new(f64::NEG_INFINITY);
            for th in thetas {
                let v: f64 = (0..mesh.n_elements())
                    .map(|el| {
                        let tau = rho[el] * th + sig[el] * (1.0 - th);
                        mesh.areas()[el] * (sig[el].deviator() - tau.deviator()).ddot(&dp[el])
                    })
                    .sum();
                // stored as a violation so that the max is the worst case
                w = w.max(Worst {
                    value: -v,
                    step: i,
                    element: None,
                });
            }
            w
        })
        .reduce(|| Worst::new(f64::NEG_INFINITY), Worst::max);
    let mut worst = worst;
    if worst.value == f64::NEG_INFINITY {
        worst.value = 0.0;
    }
    worst.value = -worst.value;
    CheckRow::new("variational_inequality", worst, tol, worst.value >= -tol)
}

/// `⟨σ_D - ρ_D|Δp⟩` per step; the `τ = ρ` column of the inequality.
pub fn rho_pairings(record: &EvolutionRecord, scenario: &Scenario) -> Vec<f64> {
    let mesh = scenario.mesh();
    (1..record.len())
        .map(|i| {
            let rho = scenario.rho(record.times()[i]);
            let dp = record.dp(i);
            (0..mesh.n_elements())
                .map(|el| mesh.areas()[el] * (record.sigma[i][el].deviator() - rho[el].deviator()).ddot(&dp[el]))
                .sum()
        })
        .collect()
}

/// Angle between two nonzero deviators, accurate near zero.
pub fn angle(a: &DevTensor, b: &DevTensor) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    let (ua, ub) = (*a * (1.0 / na), *b * (1.0 / nb));
    2.0 * (ua - ub).norm().atan2((ua + ub).norm())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalityReport {
    pub flowing: usize,
    /// `max ||σ_D| - r|` at flowing elements (ball-shaped sets).
    pub residence: CheckRow,
    /// `max angle(σ_D, Δp)` (ball) or normal-cone failures (polytope).
    pub direction: CheckRow,
}

impl NormalityReport {
    pub fn passed(&self) -> bool {
        self.residence.passed && self.direction.passed
    }
}

/// Yield residence and normality at flowing elements.
pub fn check_normality(record: &EvolutionRecord, scenario: &Scenario, tol_residence: f64, tol_angle: f64) -> NormalityReport {
    let per_step: Vec<(usize, Worst, Worst)> = (1..record.len())
        .into_par_iter()
        .map(|i| {
            let dp = record.dp(i);
            let mut res = Worst::new(0.0);
            let mut dir = Worst::new(0.0);
            let mut flowing = 0;
            for (el, q) in dp.iter().enumerate() {
                if !is_flowing(q, &record.triples[i - 1].p[el]) {
                    continue;
                }
                flowing += 1;
                let sd = record.sigma[i][el].deviator();
                let ys = &scenario.material(el).yield_surface;
                let at = |value| Worst {
                    value,
                    step: i,
                    element: Some(el),
                };
                match ys.kind() {
                    YieldKind::VonMises { radius } => {
                        res = res.max(at((sd.norm() - radius).abs()));
                        dir = dir.max(at(angle(&sd, q)));
                    }
                    YieldKind::Polyhedral(_) => {
                        res = res.max(at(ys.violation(&sd).abs()));
                        let ok = ys.in_normal_cone(&sd, q, tol_residence);
                        dir = dir.max(at(if ok { 0.0 } else { 1.0 }));
                    }
                }
            }
            (flowing, res, dir)
        })
        .collect();
    let flowing = per_step.iter().map(|s| s.0).sum();
    let res = per_step.iter().fold(Worst::new(0.0), |a, s| a.max(s.1));
    let dir = per_step.iter().fold(Worst::new(0.0), |a, s| a.max(s.2));
    let dir_tol = if scenario.all_von_mises() { tol_angle } else { 0.0 };
    NormalityReport {
        flowing,
        residence: CheckRow::new("yield_residence", res, tol_residence, res.value <= tol_residence),
        direction: CheckRow::new("normality", dir, dir_tol, dir.value <= dir_tol),
    }
}

/// Area-weighted mean of `sigma` over the elements whose centroids lie in
/// the ball of the given radius around each element's centroid; an element
/// always averages at least itself.
pub fn averaged_stress(scenario: &Scenario, sigma: &[SymTensor], radius: f64) -> Vec<SymTensor> {
    let mesh = scenario.mesh();
    let c: Vec<[f64; 2]> = (0..mesh.n_elements()).map(|el| mesh.centroid(el)).collect();
    let r2 = radius * radius;
    (0..mesh.n_elements())
        .into_par_iter()
        .map(|el| {
            let mut acc = SymTensor::zeros(2);
            let mut w = 0.0;
            for (k, ck) in c.iter().enumerate() {
                let d2 = (ck[0] - c[el][0]).powi(2) + (ck[1] - c[el][1]).powi(2);
                if k == el || d2 <= r2 {
                    acc += sigma[k] * mesh.areas()[k];
                    w += mesh.areas()[k];
                }
            }
            acc * (1.0 / w)
        })
        .collect()
}

/// Area-weighted root mean square of `|σʳ_D - ∂H(Δp/|Δp|)|` over the
/// flowing elements of step `i`. `None` unless every yield set is a ball
/// (the subdifferential is then the single point `r Δp/|Δp|`) or nothing
/// flows.
pub fn precise_stress_discrepancy(record: &EvolutionRecord, scenario: &Scenario, i: usize, radius: f64) -> Option<f64> {
    if !scenario.all_von_mises() || i == 0 {
        return None;
    }
    let mesh = scenario.mesh();
    let avg = averaged_stress(scenario, &record.sigma[i], radius);
    let dp = record.dp(i);
    let (mut num, mut den) = (0.0, 0.0);
    for (el, q) in dp.iter().enumerate() {
        if !is_flowing(q, &record.triples[i - 1].p[el]) {
            continue;
        }
        let hat = scenario.material(el).yield_surface.min_norm_subgradient(&(*q * (1.0 / q.norm())));
        let d = (avg[el].deviator() - hat).norm();
        num += mesh.areas()[el] * d * d;
        den += mesh.areas()[el];
    }
    (den > 0.0).then(|| (num / den).sqrt())
}

/// Minimum-norm element of `∂H(q)` for a polygon, from its facets alone.
/// Facets are ordered by the angle of their normals; `q` exposes a facet
/// when it is within `face_tol` (scaled by the edge length) of its normal,
/// otherwise the vertex between the two normals bracketing it.
pub fn min_norm_subgradient_oracle(facets: &[(DevTensor, f64)], q: &DevTensor, face_tol: f64) -> DevTensor {
    let c = |t: &DevTensor| [t.coords()[0], t.coords()[1]];
    let mut fs: Vec<([f64; 2], f64)> = facets.iter().map(|(n, o)| (c(n), *o)).collect();
    fs.sort_by(|x, y| x.0[1].atan2(x.0[0]).total_cmp(&y.0[1].atan2(y.0[0])));
    let m = fs.len();
    let meet = |a: ([f64; 2], f64), b: ([f64; 2], f64)| {
        let det = a.0[0] * b.0[1] - a.0[1] * b.0[0];
        [(a.1 * b.0[1] - b.1 * a.0[1]) / det, (a.0[0] * b.1 - b.0[0] * a.1) / det]
    };
    let q = c(q);
    let qa = q[1].atan2(q[0]);
    let ang = |n: [f64; 2]| {
        let d = (qa - n[1].atan2(n[0])).rem_euclid(std::f64::consts::TAU);
        d.min(std::f64::consts::TAU - d)
    };
    let r_outer = (0..m)
        .map(|i| {
            let v = meet(fs[i], fs[(i + 1) % m]);
            (v[0] * v[0] + v[1] * v[1]).sqrt()
        })
        .fold(0.0, f64::max);
    for i in 0..m {
        let (prev, cur, next) = (fs[(i + m - 1) % m], fs[i], fs[(i + 1) % m]);
        let (v1, v2) = (meet(prev, cur), meet(cur, next));
        let len = ((v1[0] - v2[0]).powi(2) + (v1[1] - v2[1]).powi(2)).sqrt();
        if ang(cur.0) * len <= face_tol * (1.0 + r_outer) {
            // project the origin on the edge [v1, v2]
            let d = [v2[0] - v1[0], v2[1] - v1[1]];
            let t = (-(v1[0] * d[0] + v1[1] * d[1]) / (len * len)).clamp(0.0, 1.0);
            return DevTensor::from_coords(2, &[v1[0] + t * d[0], v1[1] + t * d[1]]).unwrap();
        }
    }
    // strictly between two consecutive normals
    for i in 0..m {
        let (cur, next) = (fs[i], fs[(i + 1) % m]);
        let a0 = cur.0[1].atan2(cur.0[0]);
        let span = (next.0[1].atan2(next.0[0]) - a0).rem_euclid(std::f64::consts::TAU);
        let off = (qa - a0).rem_euclid(std::f64::consts::TAU);
        if off < span {
            let v = meet(cur, next);
            return DevTensor::from_coords(2, &v).unwrap();
        }
    }
    unreachable!("normals of a bounded polygon span every direction")
}

/// Compares the reported stress representative at flowing elements with the
/// vertex oracle (polygonal sets only).
pub fn check_min_norm_subgradient(record: &EvolutionRecord, scenario: &Scenario, tol: f64) -> Option<CheckRow> {
    if scenario.all_von_mises() {
        return None;
    }
    let mut worst = Worst::new(0.0);
    for i in 1..record.len() {
        let dp = record.dp(i);
        for (el, q) in dp.iter().enumerate() {
            let ys = &scenario.material(el).yield_surface;
            let YieldKind::Polyhedral(poly) = ys.kind() else { continue };
            if !is_flowing(q, &record.triples[i - 1].p[el]) {
                continue;
            }
            let dir = *q * (1.0 / q.norm());
            let oracle = min_norm_subgradient_oracle(&poly.facets(), &dir, crate::constitutive::FACE_TOL);
            let d = (ys.min_norm_subgradient(&dir) - oracle).norm();
            worst = worst.max(Worst {
                value: d,
                step: i,
                element: Some(el),
            });
        }
    }
    Some(CheckRow::new("min_norm_subgradient", worst, tol, worst.value <= tol))
}

/// Per step `⟨σⁱ|Δe⟩ + 𝓗(Δp) - ⟨σⁱ|ΔEw⟩ + ⟨ℒⁱ|Δw⟩ - ⟨ℒⁱ|Δu⟩`. With
/// end-of-step stress and load this vanishes for the exact minimizer, since
/// `𝓗` is positively homogeneous.
pub fn power_balance(record: &EvolutionRecord, scenario: &Scenario) -> Vec<f64> {
    let mesh = scenario.mesh();
    let t = record.times();
    (1..record.len())
        .into_par_iter()
        .map(|i| {
            let (a, b) = (&record.triples[i - 1], &record.triples[i]);
            let sig = &record.sigma[i];
            let de = sym_diff(&b.e, &a.e);
            let dew = sym_diff(&scenario.ew(t[i]), &scenario.ew(t[i - 1]));
            let l = scenario.load(t[i]);
            let dw: Vec<f64> = scenario
                .w_nodal(t[i])
                .iter()
                .zip(scenario.w_nodal(t[i - 1]))
                .map(|(x, y)| x - y)
                .collect();
            let du: Vec<f64> = b.u.iter().zip(&a.u).map(|(x, y)| x - y).collect();
            pairing(mesh, sig, &de) + scenario.h_functional(&dev_diff(&b.p, &a.p)) - pairing(mesh, sig, &dew)
                + dot(&l, &dw)
                - dot(&l, &du)
        })
        .collect()
}

/// `max |power balance|` relative to the energy scale of the record.
pub fn check_power_balance(record: &EvolutionRecord, scenario: &Scenario, tol: f64) -> CheckRow {
    let scale = energy_scale(record);
    let mut worst = Worst::new(0.0);
    for (k, v) in power_balance(record, scenario).into_iter().enumerate() {
        worst = worst.max(Worst {
            value: v.abs() / scale,
            step: k + 1,
            element: None,
        });
    }
    CheckRow::new("power_balance", worst, tol, worst.value <= tol)
}

/// `1 + max(𝓠) + 𝓓(T) + max |⟨ℒ|u⟩|`.
pub fn energy_scale(record: &EvolutionRecord) -> f64 {
    1.0 + record.ledger.iter().map(|r| r.stored.abs() + r.load_u.abs()).fold(0.0, f64::max) + record.final_dissipation()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuityReport {
    pub delta: f64,
    pub t: f64,
    /// `‖e₂ - e₁‖₂`.
    pub de: f64,
    pub dew: f64,
    pub dp1: f64,
    /// `max(β_C/α_C, (R_K/α_C)^½)`.
    pub constant: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Solves the increment at `t` from zero plastic strain for `w` and for
/// `(1 + δ) w`, and compares `‖e₂ - e₁‖₂` with
/// `C (‖Ew₂ - Ew₁‖₂ + ‖p₂ - p₁‖₁ + ‖p₂ - p₁‖₁^½)`.
pub fn check_continuous_dependence(scenario: &Scenario, delta: f64, t: f64, cfg: SolverConfig) -> Result<ContinuityReport> {
    let mut spec = scenario.spec().clone();
    for g in &mut spec.w {
        for row in &mut g.grad {
            for v in row.iter_mut() {
                *v *= 1.0 + delta;
            }
        }
        for v in &mut g.shift {
            *v *= 1.0 + delta;
        }
    }
    let other = scenario.with_spec(spec)?;
    let mesh = scenario.mesh();
    let p0 = vec![DevTensor::zeros(2); mesh.n_elements()];
    let (a, _) = solve_increment(scenario, t, &p0, cfg, None)?;
    let (b, _) = solve_increment(&other, t, &p0, cfg, None)?;
    let m = scenario.moduli();
    let (ac, bc) = (m.alpha_c(2), m.beta_c(2));
    let constant = (bc / ac).max((scenario.r_outer() / ac).sqrt());
    let de = l2_norm(mesh, &sym_diff(&b.e, &a.e));
    let dew = l2_norm(mesh, &sym_diff(&other.ew(t), &scenario.ew(t)));
    let dp1 = l1_norm(mesh, &dev_diff(&b.p, &a.p));
    let bound = constant * (dew + dp1 + dp1.sqrt());
    Ok(ContinuityReport {
        delta,
        t,
        de,
        dew,
        dp1,
        constant,
        bound,
        holds: de <= bound * (1.0 + 1e-9) + 1e-12,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WarmStartReport {
    pub step: usize,
    pub sigma_diff: f64,
    pub p_diff: f64,
    pub u_diff: f64,
    /// Equal stresses but different plastic strains.
    pub nonunique: bool,
}

/// Re-solves step `i` of `record` from a randomly perturbed displacement
/// and compares with the recorded triple.
pub fn warm_start_probe(
    record: &EvolutionRecord,
    scenario: &Scenario,
    i: usize,
    amplitude: f64,
    seed: u64,
    cfg: SolverConfig,
    tol: f64,
) -> Result<WarmStartReport> {
    let mesh = scenario.mesh();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = &record.triples[i];
    let t = record.times()[i];
    let mut u = base.u.clone();
    for (d, v) in u.iter_mut().enumerate() {
        if !scenario.dirichlet_dofs().contains(&d) {
            *v += amplitude * (2.0 * rng.random::<f64>() - 1.0);
        }
    }
    let p_prev = if i == 0 {
        vec![DevTensor::zeros(2); mesh.n_elements()]
    } else {
        record.triples[i - 1].p.clone()
    };
    let start = DiscreteTriple::from_up(mesh, u, p_prev.clone())?;
    let (other, _) = solve_increment(scenario, t, &p_prev, cfg, Some(&start))?;
    let sigma_diff = l2_norm(mesh, &sym_diff(&other.stress(scenario), &record.sigma[i]));
    let p_diff = l1_norm(mesh, &dev_diff(&other.p, &base.p));
    let u_diff = other.u.iter().zip(&base.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(WarmStartReport {
        step: i,
        sigma_diff,
        p_diff,
        u_diff,
        nonunique: sigma_diff <= tol && p_diff > tol,
    })
}

/// Geometric tail bound `d₁/(1 - q)` with `q = d₂/d₁` on the distance of
/// the coarser of two consecutive refinements to the limit; `None` without
/// contraction.
pub fn cauchy_envelope(d1: f64, d2: f64) -> Option<f64> {
    if d1 <= 0.0 {
        return Some(0.0);
    }
    let q = d2 / d1;
    (q < 1.0).then(|| d1 / (1.0 - q))
}

/// The standard audits of a finished record, in `verify.csv` order.
pub fn verify_record(record: &EvolutionRecord, scenario: &Scenario, tol: &VerifyTolerances) -> Vec<CheckRow> {
    let mut rows = Vec::new();
    let mut conv = Worst::new(0.0);
    for (i, r) in record.reports.iter().enumerate() {
        if !r.converged {
            conv = conv.max(Worst {
                value: 1.0,
                step: i,
                element: None,
            });
        }
    }
    rows.push(CheckRow::new("converged", conv, 0.0, conv.value == 0.0));
    rows.push(check_flow_rule(record, scenario, tol.flow_rule));
    rows.push(check_variational_inequality(record, scenario, tol.vi_samples, tol.seed, tol.variational));
    let n = check_normality(record, scenario, tol.residence, tol.angle);
    rows.push(n.residence);
    rows.push(n.direction);
    rows.extend(check_min_norm_subgradient(record, scenario, tol.subgradient));
    rows.push(check_power_balance(record, scenario, tol.power));
    let mut audit = Worst::new(f64::NEG_INFINITY);
    for (i, l) in record.ledger.iter().enumerate() {
        audit = audit.max(Worst {
            value: l.audit - record.delta_k,
            step: i,
            element: None,
        });
    }
    rows.push(CheckRow::new("energy_inequality", audit, tol.audit, audit.value <= tol.audit));
    let ap = crate::evolution::apriori_bounds(record, scenario);
    rows.push(CheckRow::new(
        "apriori_strain",
        Worst::new(ap.max_e - ap.bound_e),
        0.0,
        ap.holds,
    ));
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyTolerances {
    pub flow_rule: f64,
    pub variational: f64,
    pub vi_samples: usize,
    pub seed: u64,
    pub residence: f64,
    pub angle: f64,
    pub subgradient: f64,
    pub power: f64,
    pub audit: f64,
}

impl Default for VerifyTolerances {
    fn default() -> Self {
        Self {
            flow_rule: 1e-10,
            variational: 1e-9,
            vi_samples: 20,
            seed: 0x7a11_0c5e,
            residence: 1e-9,
            angle: 1e-6,
            subgradient: 1e-8,
            power: 1e-8,
            audit: 1e-12,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{run_evolution, TimeGrid};
    use crate::fem::tests::{base_spec, unit_square};
    use crate::fem::EdgeLabel::{G0, G1};
    use crate::fem::{AffineDisplacement, Inclusion, Schedule, YieldSpec};

    fn shear_band() -> Scenario {
        let mut spec = base_spec();
        spec.w.push(AffineDisplacement {
            grad: [[0.0, 1.0], [0.0, 0.0]],
            shift: [0.0; 2],
            schedule: Schedule::new(vec![[0.0, 0.0], [1.0, 1.2]]).unwrap(),
        });
        spec.inclusion.push(Inclusion {
            x_min: 0.0,
            x_max: 1.0,
            y_min: 0.4,
            y_max: 0.6,
            yield_scale: 0.5,
        });
        spec.alpha = 0.05;
        Scenario::with_mesh(spec, unit_square(10, [G1, G1, G0, G0])).unwrap()
    }

    fn record(sc: &Scenario, k: usize) -> EvolutionRecord {
        run_evolution(sc, &TimeGrid::uniform(sc.t_final(), k).unwrap(), None, SolverConfig::default()).unwrap()
    }

    #[test]
    fn angle_is_accurate_for_small_and_large_angles() {
        let a = DevTensor::from_coords(2, &[1.0, 0.0]).unwrap();
        for th in [1e-9f64, 1e-3, 1.0, 3.0] {
            let b = DevTensor::from_coords(2, &[2.0 * th.cos(), 2.0 * th.sin()]).unwrap();
            assert!((angle(&a, &b) - th).abs() <= 1e-15 * (1.0 + th) + 1e-17, "{th}");
        }
    }

    #[test]
    fn shear_band_passes_every_audit() {
        let sc = shear_band();
        let rec = record(&sc, 12);
        assert!(rec.final_dissipation() > 0.0);
        for row in verify_record(&rec, &sc, &VerifyTolerances::default()) {
            assert!(row.passed, "{row:?}");
        }
        let n = check_normality(&rec, &sc, 1e-9, 1e-6);
        assert!(n.flowing > 0);
        assert!(rho_pairings(&rec, &sc).iter().any(|&v| v > 0.0));
    }

    #[test]
    fn corrupted_stress_is_flagged() {
        let sc = shear_band();
        let mut rec = record(&sc, 6);
        let good = flow_rule_gaps(&rec, &sc, 6);
        for s in &mut rec.sigma[6] {
            *s = *s * 0.5;
        }
        assert!(!check_flow_rule(&rec, &sc, 1e-10).passed);
        let bad = flow_rule_gaps(&rec, &sc, 6);
        for (el, (g, b)) in good.iter().zip(&bad).enumerate() {
            let h = sc.material(el).support(&rec.dp(6)[el]);
            assert!(g.abs() <= 1e-10 * (1.0 + h));
            assert!((b - 0.5 * h).abs() <= 1e-10 * (1.0 + h));
        }
        assert!(!check_normality(&rec, &sc, 1e-9, 1e-6).residence.passed);
    }

    #[test]
    fn rotated_increment_fails_normality() {
        let sc = shear_band();
        let mut rec = record(&sc, 6);
        let (c, s) = (10f64.to_radians().cos(), 10f64.to_radians().sin());
        for i in 1..rec.len() {
            for el in 0..sc.mesh().n_elements() {
                let dp = rec.triples[i].p[el] - rec.triples[i - 1].p[el];
                let [a, b] = [dp.coords()[0], dp.coords()[1]];
                let rot = DevTensor::from_coords(2, &[c * a - s * b, s * a + c * b]).unwrap();
                rec.triples[i].p[el] = rec.triples[i - 1].p[el] + rot;
            }
        }
        let n = check_normality(&rec, &sc, 1e-9, 1e-6);
        assert!(!n.direction.passed);
        assert!((n.direction.value - 10f64.to_radians()).abs() < 1e-6);
    }

    #[test]
    fn vacuous_on_elastic_runs() {
        let mut spec = base_spec();
        spec.w.push(AffineDisplacement {
            grad: [[0.1, 0.0], [0.0, 0.0]],
            shift: [0.0; 2],
            schedule: Schedule::ramp(),
        });
        let sc = Scenario::with_mesh(spec, unit_square(3, [G0, G1, G1, G1])).unwrap();
        let rec = record(&sc, 4);
        assert_eq!(rec.final_dissipation(), 0.0);
        let n = check_normality(&rec, &sc, 1e-9, 1e-6);
        assert_eq!(n.flowing, 0);
        assert!(n.passed());
        let vi = check_variational_inequality(&rec, &sc, 5, 1, 1e-9);
        assert_eq!(vi.value, 0.0);
        assert!(precise_stress_discrepancy(&rec, &sc, 4, 0.3).is_none());
    }

    #[test]
    fn averaged_stress_limits() {
        let sc = shear_band();
        let uniform = vec![SymTensor::new(2, &[1.0, 2.0, 3.0]).unwrap(); sc.mesh().n_elements()];
        for r in [0.01, 0.3, 10.0] {
            for s in averaged_stress(&sc, &uniform, r) {
                assert!((s - uniform[0]).norm() < 1e-13);
            }
        }
        let rec = record(&sc, 4);
        let tiny = averaged_stress(&sc, &rec.sigma[4], 1e-6);
        for (a, b) in tiny.iter().zip(&rec.sigma[4]) {
            assert!((*a - *b).norm() <= 1e-14 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn precise_stress_discrepancy_shrinks_with_radius() {
        let sc = shear_band();
        let rec = record(&sc, 8);
        let d: Vec<f64> = [0.4, 0.2, 0.1]
            .iter()
            .map(|&r| precise_stress_discrepancy(&rec, &sc, 8, r).unwrap())
            .collect();
        assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
    }

    #[test]
    fn continuous_dependence_bound() {
        let sc = shear_band();
        let zero = check_continuous_dependence(&sc, 0.0, 1.0, SolverConfig::default()).unwrap();
        assert_eq!(zero.de, 0.0);
        let r = check_continuous_dependence(&sc, 0.05, 1.0, SolverConfig::default()).unwrap();
        assert!(r.holds && r.de > 0.0, "{r:?}");
        // elastic regime: linear response
        let a = check_continuous_dependence(&sc, 0.02, 0.1, SolverConfig::default()).unwrap();
        let b = check_continuous_dependence(&sc, 0.01, 0.1, SolverConfig::default()).unwrap();
        assert_eq!(a.dp1, 0.0);
        assert!((a.de / b.de - 2.0).abs() < 1e-6, "{} {}", a.de, b.de);
        assert!(a.holds && b.holds);
    }

    #[test]
    fn warm_starts_agree_in_stress() {
        let sc = shear_band();
        let rec = record(&sc, 4);
        for i in [0, 2, 4] {
            let w = warm_start_probe(&rec, &sc, i, 0.05, 9, SolverConfig::default(), 1e-6).unwrap();
            assert!(w.sigma_diff <= 1e-6, "{w:?}");
        }
    }

    #[test]
    fn polygonal_subgradient_matches_oracle() {
        let mut spec = base_spec();
        spec.material.yield_spec = YieldSpec::Square { half_width: 1.0 };
        spec.w.push(AffineDisplacement {
            grad: [[0.0, 1.0], [0.0, 0.0]],
            shift: [0.0; 2],
            schedule: Schedule::new(vec![[0.0, 0.0], [1.0, 2.5]]).unwrap(),
        });
        let sc = Scenario::with_mesh(spec, unit_square(3, [G1, G1, G0, G0])).unwrap();
        let rec = record(&sc, 5);
        assert!(rec.final_dissipation() > 0.0);
        let row = check_min_norm_subgradient(&rec, &sc, 1e-8).unwrap();
        assert!(row.passed, "{row:?}");
        let nr = check_normality(&rec, &sc, 1e-9, 1e-6);
        assert!(nr.passed(), "{nr:?}");
        assert!(check_flow_rule(&rec, &sc, 1e-9).passed);
    }

    #[test]
    fn oracle_faces_of_a_hexagon() {
        let hex: Vec<(DevTensor, f64)> = (0..6)
            .map(|k| {
                let th = std::f64::consts::PI * k as f64 / 3.0 + 0.2;
                (DevTensor::from_coords(2, &[th.cos(), th.sin()]).unwrap(), 1.0 + 0.15 * k as f64)
            })
            .collect();
        let k = crate::constitutive::YieldSurface::polyhedral(2, &hex).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut dirs: Vec<DevTensor> = hex.iter().map(|f| f.0).collect();
        dirs.extend((0..200).map(|_| {
            let th = rng.random_range(0.0..std::f64::consts::TAU);
            DevTensor::from_coords(2, &[th.cos(), th.sin()]).unwrap()
        }));
        for q in dirs {
            let o = min_norm_subgradient_oracle(&hex, &q, crate::constitutive::FACE_TOL);
            assert!((k.min_norm_subgradient(&q) - o).norm() < 1e-9);
            assert!((q.ddot(&o) - k.support(&q)).abs() < 1e-9);
        }
    }

    #[test]
    fn envelope() {
        assert_eq!(cauchy_envelope(1.0, 0.5), Some(2.0));
        assert_eq!(cauchy_envelope(1.0, 1.0), None);
        assert_eq!(cauchy_envelope(0.0, 0.0), Some(0.0));
    }
}
