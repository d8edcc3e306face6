//! Counterexample subspaces: `E` with no `k`-dimensional orthogonal subspace.
//!
//! `E` is built as the common kernel of a subspace `g` of functionals. Whether
//! an orthogonal `k`-plane exists is decided numerically through
//! `Omega(E) = max { delta(K, E) : K in G(k, N) }`; `K` is orthogonal to `E`
//! exactly when `delta(K, E) = 1`.

mod certify;
mod q1;

pub use certify::{
    certify_no_orthogonal_subspace, search_max_defect, CertifyConfig, DefectReport, TraceRow,
};
pub use q1::{q1_demo, rank_lemma_bound, rank_lemma_check, Q1Config, Q1Report, RankLemmaReport};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::Space;
use crate::seed;
use crate::subspace::Subspace;

/// `{e : <n, e> = 0 for all n in g}`.
pub fn build_e_from_g(g: &Subspace) -> Result<Subspace> {
    if g.is_zero() {
        return Err(Error::Precondition("g must be nontrivial".into()));
    }
    Subspace::kernel_of(&g.basis_vectors())
}

/// Smallest odd integer exceeding `m - k + 2`.
pub fn counterexample_exponent(m: usize, k: usize) -> Result<u32> {
    if !(1 < k && k <= m) {
        return Err(Error::Precondition(format!("need 1 < k <= m, got m={m}, k={k}")));
    }
    let t = (m - k + 2) as u32;
    Ok(if t.is_multiple_of(2) { t + 1 } else { t + 2 })
}

/// Gap below which `g` counts as too close to a coordinate plane.
pub const COORDINATE_GAP: f64 = 1e-3;
pub const DEFAULT_REJECTION_BUDGET: usize = 100;

#[derive(Debug, Clone, Serialize)]
pub struct Counterexample {
    pub m: usize,
    pub k: usize,
    pub p: u32,
    #[serde(rename = "N")]
    pub n: usize,
    pub g: Subspace,
    #[serde(rename = "E")]
    pub e: Subspace,
    /// Smallest gap between `g` and a coordinate `m`-plane.
    pub coordinate_gap: f64,
    pub draws: usize,
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(idx.clone());
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

pub(crate) fn coordinate_planes(n: usize, k: usize) -> Vec<Subspace> {
    combinations(n, k)
        .into_iter()
        .map(|idx| Subspace::coordinate(n, &idx).expect("valid indices"))
        .collect()
}

impl Counterexample {
    /// Draws `g` in `G(m, N)` away from every coordinate `m`-plane and sets
    /// `E = build_e_from_g(g)`. `n = None` means `N = 2m`.
    pub fn construct(m: usize, k: usize, n: Option<usize>, seed_value: u64) -> Result<Self> {
        Self::construct_with_budget(m, k, n, seed_value, DEFAULT_REJECTION_BUDGET)
    }

    pub fn construct_with_budget(
        m: usize,
        k: usize,
        n: Option<usize>,
        seed_value: u64,
        budget: usize,
    ) -> Result<Self> {
        let p = counterexample_exponent(m, k)?;
        let n = n.unwrap_or(2 * m);
        if n <= m {
            return Err(Error::Precondition(format!("need N > m, got N={n}, m={m}")));
        }
        let planes = coordinate_planes(n, m);
        for draw in 0..budget {
            let g = Subspace::random_grassmann(n, m, seed::derive_seed(seed_value, draw as u64))?;
            let mut gap = f64::INFINITY;
            for c in &planes {
                gap = gap.min(g.gap_distance(c)?);
                if gap < COORDINATE_GAP {
                    break;
                }
            }
            if gap >= COORDINATE_GAP {
                let e = build_e_from_g(&g)?;
                return Ok(Self { m, k, p, n, g, e, coordinate_gap: gap, draws: draw + 1 });
            }
        }
        Err(Error::RejectionBudgetExhausted(budget))
    }

    pub fn space(&self) -> Space {
        Space::finite(self.n, self.p as f64).expect("valid exponent")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleRun {
    pub p: u32,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "E")]
    pub e: Subspace,
    pub report: DefectReport,
}

/// Constructs the counterexample and searches for orthogonal `k`-planes.
/// The search report is returned whether or not it converged.
pub fn build_paper_counterexample(
    m: usize,
    k: usize,
    seed_value: u64,
    cfg: &CertifyConfig,
) -> Result<CounterexampleRun> {
    let c = Counterexample::construct(m, k, None, seed_value)?;
    let space = c.space();
    let report = search_max_defect(&space, &c.e, k, cfg)?;
    Ok(CounterexampleRun { p: c.p, n: c.n, e: c.e, report })
}
