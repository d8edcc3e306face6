//! Multistart ascent of `delta(K, E)` over the Grassmannian `G(k, N)`.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::coordinate_planes;
use crate::error::{Error, Result};
use crate::linalg;
use crate::lp::Space;
use crate::projection::{subspace_ortho_defect, DefectConfig};
use crate::seed;
use crate::subspace::Subspace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertifyConfig {
    /// Random starts on top of the structured ones.
    pub random_starts: usize,
    /// Start from every coordinate `k`-plane.
    pub coordinate_starts: bool,
    /// Start from the Euclidean complement of `E` (truncated or padded to `k`).
    pub complement_start: bool,
    pub seed: u64,
    /// Objective evaluations per Nelder–Mead round.
    pub max_evals: usize,
    /// Chart re-centerings after the first round.
    pub recenter_rounds: usize,
    pub initial_step: f64,
    /// Nelder–Mead stops when the simplex values spread less than this.
    pub f_tol: f64,
    /// Number of best starts that must agree for `converged`.
    pub agree_top: usize,
    pub agree_tol: f64,
    /// Defect evaluation used inside the ascent.
    pub search_defect: DefectConfig,
    /// Defect evaluation used for the reported values.
    pub final_defect: DefectConfig,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            random_starts: 16,
            coordinate_starts: true,
            complement_start: true,
            seed: 0xCE27_1F1E,
            max_evals: 400,
            recenter_rounds: 3,
            initial_step: 0.25,
            f_tol: 1e-9,
            agree_top: 5,
            agree_tol: 1e-4,
            search_defect: DefectConfig {
                angle_grid: 120,
                random_starts: 96,
                refine_top: 2,
                ..DefectConfig::default()
            },
            final_defect: DefectConfig::default(),
        }
    }
}

impl CertifyConfig {
    pub fn with_budget(random_starts: usize, seed_value: u64) -> Self {
        Self { random_starts, seed: seed_value, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub start_id: usize,
    pub seed: u64,
    pub kind: &'static str,
    /// `delta` of the start's final plane under the reporting evaluation.
    pub value: f64,
    /// Objective evaluations spent by the ascent.
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct DefectReport {
    /// Largest defect found, an estimate of `max_K delta(K, E)`.
    pub omega: f64,
    pub epsilon: f64,
    pub k: usize,
    pub best_k: Subspace,
    pub best_start: usize,
    pub starts: usize,
    pub seed: u64,
    /// The best `agree_top` starts agree within `agree_tol`.
    pub converged: bool,
    pub trace: Vec<TraceRow>,
}

impl DefectReport {
    /// `start_id,seed,value,iterations`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("start_id,seed,value,iterations\n");
        for r in &self.trace {
            let _ = writeln!(out, "{},{},{:.17e},{}", r.start_id, r.seed, r.value, r.iterations);
        }
        out
    }
}

struct Start {
    kind: &'static str,
    basis: DMatrix<f64>,
}

fn structured_starts(e: &Subspace, k: usize, cfg: &CertifyConfig) -> Vec<Start> {
    let n = e.ambient_dim();
    let mut starts = Vec::new();
    if cfg.coordinate_starts {
        starts.extend(
            coordinate_planes(n, k)
                .into_iter()
                .map(|s| Start { kind: "coordinate", basis: s.basis().clone() }),
        );
    }
    if cfg.complement_start {
        let comp = e.complement();
        let mut cols = linalg::columns(comp.basis());
        cols.extend(e.basis_vectors());
        cols.truncate(k);
        starts.push(Start { kind: "complement", basis: DMatrix::from_columns(&cols) });
    }
    starts
}

struct Chart {
    center: DMatrix<f64>,
    normal: DMatrix<f64>,
}

impl Chart {
    fn new(center: DMatrix<f64>) -> Self {
        let normal = linalg::orthogonal_complement(&center);
        Self { center, normal }
    }

    fn plane(&self, y: &[f64]) -> Result<Subspace> {
        let k = self.center.ncols();
        let rows = self.normal.ncols();
        let y = DMatrix::from_column_slice(rows, k, y);
        let frame = &self.center + &self.normal * y;
        Subspace::span_of_columns(&frame, Some(1e-12))
    }

    fn params(&self) -> usize {
        self.center.ncols() * self.normal.ncols()
    }
}

struct Ascent<'a> {
    space: &'a Space,
    e: &'a Subspace,
    defect: &'a DefectConfig,
    evals: usize,
}

impl Ascent<'_> {
    /// `-delta`, with failed or degenerate planes scored worst.
    fn objective(&mut self, chart: &Chart, y: &[f64]) -> f64 {
        self.evals += 1;
        match chart.plane(y) {
            Ok(plane) if plane.dim() == chart.center.ncols() => {
                match subspace_ortho_defect(self.space, &plane, self.e, self.defect) {
                    Ok(d) => -d.delta,
                    Err(_) => 1.0,
                }
            }
            _ => 1.0,
        }
    }

    fn nelder_mead(&mut self, chart: &Chart, step: f64, max_evals: usize, f_tol: f64) -> (Vec<f64>, f64) {
        let n = chart.params();
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        let x0 = vec![0.0; n];
        let f0 = self.objective(chart, &x0);
        simplex.push((x0, f0));
        for i in 0..n {
            let mut x = vec![0.0; n];
            x[i] = step;
            let f = self.objective(chart, &x);
            simplex.push((x, f));
        }
        let start = self.evals;
        while self.evals - start < max_evals {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let spread = simplex[n].1 - simplex[0].1;
            if spread <= f_tol {
                break;
            }
            let centroid: Vec<f64> = (0..n)
                .map(|j| simplex[..n].iter().map(|s| s.0[j]).sum::<f64>() / n as f64)
                .collect();
            let along = |t: f64, worst: &[f64]| -> Vec<f64> {
                centroid.iter().zip(worst).map(|(c, w)| c + t * (w - c)).collect()
            };
            let worst = simplex[n].0.clone();
            let xr = along(-1.0, &worst);
            let fr = self.objective(chart, &xr);
            if fr < simplex[0].1 {
                let xe = along(-2.0, &worst);
                let fe = self.objective(chart, &xe);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                let (xc, fc) = if fr < simplex[n].1 {
                    let xc = along(-0.5, &worst);
                    let fc = self.objective(chart, &xc);
                    (xc, fc)
                } else {
                    let xc = along(0.5, &worst);
                    let fc = self.objective(chart, &xc);
                    (xc, fc)
                };
                if fc < simplex[n].1.min(fr) {
                    simplex[n] = (xc, fc);
                } else {
                    let best = simplex[0].0.clone();
                    for s in simplex.iter_mut().skip(1) {
                        let x: Vec<f64> = best.iter().zip(&s.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
                        let f = self.objective(chart, &x);
                        *s = (x, f);
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        simplex.swap_remove(0)
    }
}

struct StartOutcome {
    plane: Subspace,
    evals: usize,
}

fn run_start(space: &Space, e: &Subspace, start: &Start, cfg: &CertifyConfig) -> Result<StartOutcome> {
    let mut plane = Subspace::span_of_columns(&start.basis, Some(1e-12))?;
    let n = space.dim();
    if plane.dim() == n {
        return Ok(StartOutcome { plane, evals: 0 });
    }
    let mut ascent = Ascent { space, e, defect: &cfg.search_defect, evals: 0 };
    let mut step = cfg.initial_step;
    let mut best = f64::INFINITY;
    for _round in 0..=cfg.recenter_rounds {
        let chart = Chart::new(plane.basis().clone());
        let (y, f) = ascent.nelder_mead(&chart, step, cfg.max_evals, cfg.f_tol);
        if f < best {
            let moved = chart.plane(&y)?;
            if moved.dim() == plane.dim() {
                plane = moved;
            }
        }
        let improvement = best - f;
        best = best.min(f);
        if improvement.is_finite() && improvement <= cfg.f_tol {
            break;
        }
        step *= 0.25;
    }
    Ok(StartOutcome { plane, evals: ascent.evals })
}

fn check_inputs(space: &Space, e: &Subspace, k: usize) -> Result<()> {
    if e.ambient_dim() != space.dim() {
        return Err(Error::DimensionMismatch("E lives in another space".into()));
    }
    if e.is_zero() {
        return Err(Error::Precondition("E must be nontrivial".into()));
    }
    if k == 0 || k > space.dim() {
        return Err(Error::Precondition(format!("need 1 <= k <= N, got k={k}")));
    }
    Ok(())
}

/// Estimates `Omega = max_K delta(K, E)` over `k`-planes by multistart
/// Nelder–Mead ascent in local Grassmannian charts. Always returns the report.
pub fn search_max_defect(space: &Space, e: &Subspace, k: usize, cfg: &CertifyConfig) -> Result<DefectReport> {
    check_inputs(space, e, k)?;
    let n = space.dim();
    let mut starts = structured_starts(e, k, cfg);
    let structured = starts.len();
    for i in 0..cfg.random_starts {
        let s = seed::derive_seed(cfg.seed, (structured + i) as u64);
        let plane = Subspace::random_grassmann(n, k, s)?;
        starts.push(Start { kind: "random", basis: plane.basis().clone() });
    }
    if starts.is_empty() {
        return Err(Error::Precondition("no starts configured".into()));
    }
    let outcomes: Vec<(StartOutcome, f64)> = starts
        .par_iter()
        .map(|st| {
            let out = run_start(space, e, st, cfg)?;
            let value = subspace_ortho_defect(space, &out.plane, e, &cfg.final_defect)?.delta;
            Ok((out, value))
        })
        .collect::<Result<_>>()?;

    let trace: Vec<TraceRow> = outcomes
        .iter()
        .zip(&starts)
        .enumerate()
        .map(|(i, ((out, value), st))| TraceRow {
            start_id: i,
            seed: seed::derive_seed(cfg.seed, i as u64),
            kind: st.kind,
            value: *value,
            iterations: out.evals,
        })
        .collect();
    let mut best = 0;
    for (i, (_, v)) in outcomes.iter().enumerate() {
        if *v > outcomes[best].1 {
            best = i;
        }
    }
    let mut values: Vec<f64> = outcomes.iter().map(|o| o.1).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    let top = cfg.agree_top.max(1);
    let converged = values.len() >= top && values[0] - values[top - 1] <= cfg.agree_tol;
    let omega = outcomes[best].1;
    Ok(DefectReport {
        omega,
        epsilon: 1.0 - omega,
        k,
        best_k: outcomes[best].0.plane.clone(),
        best_start: best,
        starts: starts.len(),
        seed: cfg.seed,
        converged,
        trace,
    })
}

/// As [`search_max_defect`], failing with `BudgetExhausted` (carrying the
/// report) when the best starts do not agree.
pub fn certify_no_orthogonal_subspace(
    space: &Space,
    e: &Subspace,
    k: usize,
    cfg: &CertifyConfig,
) -> Result<DefectReport> {
    let report = search_max_defect(space, e, k, cfg)?;
    if report.converged {
        Ok(report)
    } else {
        Err(Error::BudgetExhausted(Box::new(report)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counterexample::build_e_from_g;
    use nalgebra::DVector;

    fn sheared_e() -> Subspace {
        let g = Subspace::span_of(&[
            DVector::from_column_slice(&[1.0, 1.0, 0.0]),
            DVector::from_column_slice(&[0.0, 1.0, 1.0]),
        ])
        .unwrap();
        build_e_from_g(&g).unwrap()
    }

    fn quick(random_starts: usize) -> CertifyConfig {
        CertifyConfig { random_starts, max_evals: 150, recenter_rounds: 1, ..CertifyConfig::default() }
    }

    #[test]
    fn coordinate_plane_is_orthogonal_to_coordinate_axis() {
        let s = Space::finite(3, 3.0).unwrap();
        let e = Subspace::coordinate(3, &[2]).unwrap();
        let r = search_max_defect(&s, &e, 2, &quick(2)).unwrap();
        assert!((r.omega - 1.0).abs() < 1e-12);
        let target = Subspace::coordinate(3, &[0, 1]).unwrap();
        assert!(r.best_k.gap_distance(&target).unwrap() < 1e-9);
    }

    #[test]
    fn lines_always_reach_one() {
        let s = Space::finite(3, 3.0).unwrap();
        let r = search_max_defect(&s, &sheared_e(), 1, &quick(4)).unwrap();
        assert!((r.omega - 1.0).abs() < 1e-6, "omega {}", r.omega);
    }

    #[test]
    fn sheared_kernel_has_no_orthogonal_plane() {
        let s = Space::finite(3, 3.0).unwrap();
        let r = search_max_defect(&s, &sheared_e(), 2, &quick(6)).unwrap();
        assert!(r.omega < 0.99, "omega {}", r.omega);
        assert!((r.epsilon - (1.0 - r.omega)).abs() < 1e-15);
        let again = subspace_ortho_defect(&s, &r.best_k, &sheared_e(), &DefectConfig::default()).unwrap();
        assert!((again.delta - r.omega).abs() < 1e-6);
        assert_eq!(r.trace.len(), r.starts);
        assert!(r.trace_csv().starts_with("start_id,seed,value,iterations\n"));
    }

    #[test]
    fn more_starts_never_lower_omega() {
        let s = Space::finite(3, 3.0).unwrap();
        let a = search_max_defect(&s, &sheared_e(), 2, &quick(2)).unwrap();
        let b = search_max_defect(&s, &sheared_e(), 2, &quick(5)).unwrap();
        assert!(b.omega >= a.omega);
        assert_eq!(a.trace[..], b.trace[..a.trace.len()]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = Space::finite(3, 3.0).unwrap();
        assert!(search_max_defect(&s, &Subspace::zero(3), 2, &quick(1)).is_err());
        assert!(search_max_defect(&s, &sheared_e(), 0, &quick(1)).is_err());
        assert!(search_max_defect(&s, &sheared_e(), 4, &quick(1)).is_err());
    }

    #[test]
    fn unconverged_certificate_carries_the_report() {
        let s = Space::finite(3, 3.0).unwrap();
        let cfg = CertifyConfig {
            random_starts: 0,
            coordinate_starts: false,
            ..quick(0)
        };
        match certify_no_orthogonal_subspace(&s, &sheared_e(), 2, &cfg) {
            Err(Error::BudgetExhausted(r)) => assert_eq!(r.starts, 1),
            other => panic!("expected BudgetExhausted, got {other:?}"),
        }
    }
}
