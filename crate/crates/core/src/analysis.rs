//! Derived quantities: worm-problem bounds, refinement studies in `N` and
//! detection of distinct optima of equal length.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::nlp_solver::{solve_fixed_order, SolveOptions, Solution};
use crate::order_search::OrderPlan;
use crate::scenario::{build_instance, Catalog, Instance, ScenarioSpec};

/// Area over squared escape length. Every worm of unit length fits in a
/// region of area `ratio`, so the smallest worm cover has area at most
/// `ratio`.
#[derive(Clone, Debug, PartialEq)]
pub struct WormBound {
    pub scenario: String,
    pub area: f64,
    pub escape_length: f64,
    pub ratio: f64,
}

pub fn worm_upper_bound(scenario: &str, region_area: f64, solution: &Solution) -> Result<WormBound> {
    if !solution.converged {
        return Err(Error::InvalidInput("worm bound needs a converged solution".into()));
    }
    worm_ratio(scenario, region_area, solution.length)
}

/// The bound from a raw length.
pub fn worm_ratio(scenario: &str, area: f64, length: f64) -> Result<WormBound> {
    if !(area > 0.0 && area.is_finite()) {
        return Err(Error::InvalidInput(format!("region area must be positive, got {area}")));
    }
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::InvalidInput(format!("escape length must be positive, got {length}")));
    }
    Ok(WormBound {
        scenario: scenario.to_string(),
        area,
        escape_length: length,
        ratio: area / (length * length),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceEntry {
    pub n: usize,
    pub length: f64,
    pub max_residual: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub scenario: String,
    pub entries: Vec<ConvergenceEntry>,
    /// Lengths never drop by more than `MONOTONE_TOL` along the ladder.
    pub monotone_ok: bool,
    /// Rungs `(n_prev, n)` where the length dropped.
    pub violations: Vec<(usize, usize)>,
}

pub const MONOTONE_TOL: f64 = 1e-9;

/// Checks that `n_list` is strictly increasing and each entry divides the
/// next, so each orientation set contains the previous one.
pub fn check_nested(n_list: &[usize]) -> Result<()> {
    if n_list.is_empty() || n_list.contains(&0) {
        return Err(Error::InvalidInput("ladder needs positive orientation counts".into()));
    }
    for w in n_list.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidInput(format!("ladder is not strictly increasing at {} -> {}", w[0], w[1])));
        }
        if w[1] % w[0] != 0 {
            return Err(Error::InvalidInput(format!("{} does not divide {}", w[0], w[1])));
        }
    }
    Ok(())
}

/// Solves the spec produced by `make(n)` for every `n` in the ladder with
/// its order hint (natural order when it has none).
pub fn convergence_study(
    make: impl Fn(usize) -> Result<ScenarioSpec> + Sync,
    n_list: &[usize],
    opts: &SolveOptions,
) -> Result<ConvergenceReport> {
    check_nested(n_list)?;
    let entries: Vec<(String, ConvergenceEntry)> = n_list
        .par_iter()
        .map(|&n| {
            let spec = make(n)?;
            let inst = build_instance(&spec)?;
            let order = spec.order_hint.clone().unwrap_or_else(|| OrderPlan::identity(inst.len()));
            let clock = Instant::now();
            let sol = solve_fixed_order(&inst, &order, opts)?;
            Ok((
                spec.name.clone(),
                ConvergenceEntry {
                    n,
                    length: sol.length,
                    max_residual: sol.max_residual,
                    seconds: clock.elapsed().as_secs_f64(),
                },
            ))
        })
        .collect::<Result<_>>()?;
    let scenario = entries[0].0.clone();
    let entries: Vec<ConvergenceEntry> = entries.into_iter().map(|(_, e)| e).collect();
    let violations: Vec<(usize, usize)> = entries
        .windows(2)
        .filter(|w| w[1].length < w[0].length - MONOTONE_TOL)
        .map(|w| (w[0].n, w[1].n))
        .collect();
    Ok(ConvergenceReport {
        scenario,
        monotone_ok: violations.is_empty(),
        violations,
        entries,
    })
}

/// [`convergence_study`] on a catalog entry with its single start.
pub fn catalog_convergence_study(
    catalog: &Catalog,
    name: &str,
    n_list: &[usize],
    opts: &SolveOptions,
) -> Result<ConvergenceReport> {
    let entry = catalog.get(name)?;
    convergence_study(|n| entry.spec(n, entry.default_m, &Default::default()), n_list, opts)
}

/// Symmetric Hausdorff distance between two finite point sets.
pub fn hausdorff(a: &[Vec3], b: &[Vec3]) -> f64 {
    let directed = |from: &[Vec3], to: &[Vec3]| {
        from.iter()
            .map(|p| to.iter().map(|q| (*p - *q).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    if a.is_empty() || b.is_empty() {
        return if a.is_empty() && b.is_empty() { 0.0 } else { f64::INFINITY };
    }
    directed(a, b).max(directed(b, a))
}

#[derive(Clone, Debug, PartialEq)]
pub struct NonUniquenessReport {
    /// Shortest length among the inputs.
    pub best_length: f64,
    /// Indices of the near-optimal inputs, grouped by geometry.
    pub groups: Vec<Vec<usize>>,
    pub distinct_optima: usize,
    pub length_tol: f64,
    pub distinct_tol: f64,
}

/// Groups the solutions whose length is within the length tolerance of the
/// best one; solutions land in different groups when their escape points
/// are farther apart (Hausdorff) than the distinctness threshold.
///
/// With `tol = None` the length tolerance is `1e-3` of the best length and
/// the threshold is `1e-2`; otherwise they are `tol` and `10 * tol`.
pub fn detect_nonuniqueness(solutions: &[Solution], tol: Option<f64>) -> Result<NonUniquenessReport> {
    if solutions.len() < 2 {
        return Err(Error::InvalidInput("need at least two solutions".into()));
    }
    if solutions.iter().any(|s| !s.converged) {
        return Err(Error::InvalidInput("every solution must be converged".into()));
    }
    let best_length = solutions.iter().map(|s| s.length).fold(f64::INFINITY, f64::min);
    let (length_tol, distinct_tol) = match tol {
        Some(t) if t > 0.0 => (t, 10.0 * t),
        Some(t) => return Err(Error::InvalidInput(format!("tolerance must be positive, got {t}"))),
        None => (1e-3 * best_length, 1e-2),
    };
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (idx, s) in solutions.iter().enumerate() {
        if s.length - best_length >= length_tol {
            continue;
        }
        let home = groups
            .iter_mut()
            .find(|g| hausdorff(solutions[g[0]].points(), s.points()) <= distinct_tol);
        match home {
            Some(g) => g.push(idx),
            None => groups.push(vec![idx]),
        }
    }
    Ok(NonUniquenessReport {
        best_length,
        distinct_optima: groups.len(),
        groups,
        length_tol,
        distinct_tol,
    })
}

/// Straight walk of fixed length from the anchor and the boundaries it meets.
#[derive(Clone, Debug, PartialEq)]
pub struct StraightEscape {
    pub direction: Vec3,
    pub length: f64,
    /// Distance along the walk at which each boundary is first met.
    pub first_hits: Vec<Option<f64>>,
}

impl StraightEscape {
    pub fn meets_all(&self) -> bool {
        self.first_hits.iter().all(Option::is_some)
    }

    /// Distance after which every boundary has been met.
    pub fn last_hit(&self) -> Option<f64> {
        self.first_hits
            .iter()
            .try_fold(0.0f64, |acc, h| h.map(|d| acc.max(d)))
    }
}

/// Which boundaries a straight walk of `length` along `direction` meets,
/// found by sign changes on a fine sampling refined by bisection.
pub fn straight_escape(inst: &Instance, direction: Vec3, length: f64) -> Result<StraightEscape> {
    const SAMPLES: usize = 4096;
    let anchor = inst
        .anchor
        .ok_or_else(|| Error::InvalidInput("straight walks need an anchored instance".into()))?;
    let dir = direction
        .normalized()
        .ok_or_else(|| Error::InvalidInput("direction must be nonzero".into()))?;
    if !(length > 0.0) {
        return Err(Error::InvalidInput("walk length must be positive".into()));
    }
    let at = |t: f64| anchor + dir * t;
    let first_hits = inst
        .boundaries
        .iter()
        .map(|b| {
            let mut best: Option<f64> = None;
            for f in b.factors() {
                let mut prev = f.eval_at(anchor);
                if prev == 0.0 {
                    return Some(0.0);
                }
                for j in 1..=SAMPLES {
                    let t = length * j as f64 / SAMPLES as f64;
                    let cur = f.eval_at(at(t));
                    if cur == 0.0 || cur.signum() != prev.signum() {
                        let (mut lo, mut hi) = (length * (j - 1) as f64 / SAMPLES as f64, t);
                        for _ in 0..80 {
                            let mid = 0.5 * (lo + hi);
                            if f.eval_at(at(mid)).signum() == prev.signum() {
                                lo = mid;
                            } else {
                                hi = mid;
                            }
                        }
                        best = Some(best.map_or(hi, |v: f64| v.min(hi)));
                        break;
                    }
                    prev = cur;
                }
            }
            best
        })
        .collect();
    Ok(StraightEscape {
        direction: dir,
        length,
        first_hits,
    })
}
