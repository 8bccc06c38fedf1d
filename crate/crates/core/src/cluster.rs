//! Probabilistic selection of representative periods.
//!
//! Representative months are chosen by an exact optimization: binary
//! selection variables pick `n - n_ext` representatives, assignment
//! variables map every sampled month to one representative, and the
//! objective minimizes the capacity-weighted distance between represented
//! and representative months. Extreme months (highest and lowest residual
//! demand) are preselected, represent only themselves, and are excluded
//! from the optimization. Probability weights follow the share of months
//! each representative covers; extremes carry `1 / years`.

use crate::climate::{ClimateSample, MetricKind};
use crate::error::CoreError;
use boreas_lp::{solve_mip, LpBuilder, MipOptions, RowSense, Status};
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Absolute metric differences between same-period months of different
/// years: `d[(i, j, p, c)] >= 0`, symmetric in `(i, j)`.
#[derive(Debug, Clone)]
pub struct DistanceTensor {
    pub num_years: usize,
    pub num_periods: usize,
    pub metrics: Vec<String>,
    data: Vec<f64>,
}

impl DistanceTensor {
    /// Build a tensor from a callback; used by synthetic fixtures.
    pub fn from_fn(
        num_years: usize,
        num_periods: usize,
        metrics: Vec<String>,
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> DistanceTensor {
        let nc = metrics.len();
        let mut data = vec![0.0; num_years * num_years * num_periods * nc];
        for i in 0..num_years {
            for j in 0..num_years {
                for p in 0..num_periods {
                    for c in 0..nc {
                        data[((i * num_years + j) * num_periods + p) * nc + c] = f(i, j, p, c);
                    }
                }
            }
        }
        DistanceTensor {
            num_years,
            num_periods,
            metrics,
            data,
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, p: usize, c: usize) -> f64 {
        let nc = self.metrics.len();
        self.data[((i * self.num_years + j) * self.num_periods + p) * nc + c]
    }

    /// Distance summed over metrics.
    pub fn total(&self, i: usize, j: usize, p: usize) -> f64 {
        (0..self.metrics.len()).map(|c| self.get(i, j, p, c)).sum()
    }
}

/// Capacity-weighted period totals `M(i, p, c)`, then absolute differences.
pub fn compute_distances(
    sample: &ClimateSample,
    reference_capacities: &BTreeMap<String, f64>,
) -> Result<DistanceTensor, CoreError> {
    let weights: Vec<f64> = sample
        .metrics
        .iter()
        .map(|m| match &m.weight_tech {
            Some(tech) => reference_capacities
                .get(tech)
                .copied()
                .ok_or_else(|| CoreError::MissingCapacity(tech.clone())),
            None => Ok(1.0),
        })
        .collect::<Result<_, _>>()?;

    let ny = sample.num_years();
    let np = sample.periods_per_year;
    let nc = sample.metrics.len();
    // Period totals per (year, period, metric), aggregated over regions.
    let mut totals = vec![0.0f64; ny * np * nc];
    for (c, metric) in sample.metrics.iter().enumerate() {
        for i in 0..ny {
            for p in 0..np {
                totals[(i * np + p) * nc + c] = weights[c] * sample.period_total(metric, i, p);
            }
        }
    }
    let mut data = vec![0.0f64; ny * ny * np * nc];
    for i in 0..ny {
        for j in 0..ny {
            for p in 0..np {
                for c in 0..nc {
                    let mi = totals[(i * np + p) * nc + c];
                    let mj = totals[(j * np + p) * nc + c];
                    data[((i * ny + j) * np + p) * nc + c] = (mi - mj).abs();
                }
            }
        }
    }
    Ok(DistanceTensor {
        num_years: ny,
        num_periods: np,
        metrics: sample.metrics.iter().map(|m| m.name.clone()).collect(),
        data,
    })
}

/// Residual demand (supply minus demand) per (year, period), aggregated
/// over regions with the same capacity weights as the distances.
#[derive(Debug, Clone)]
pub struct ResidualDemandIndex {
    pub num_years: usize,
    pub num_periods: usize,
    /// `[year][period]` residual in MWh.
    pub values: Vec<Vec<f64>>,
}

pub fn residual_demand_index(
    sample: &ClimateSample,
    reference_capacities: &BTreeMap<String, f64>,
) -> Result<ResidualDemandIndex, CoreError> {
    let ny = sample.num_years();
    let np = sample.periods_per_year;
    let mut values = vec![vec![0.0f64; np]; ny];
    for metric in &sample.metrics {
        let weight = match &metric.weight_tech {
            Some(tech) => *reference_capacities
                .get(tech)
                .ok_or_else(|| CoreError::MissingCapacity(tech.clone()))?,
            None => 1.0,
        };
        let sign = match metric.kind {
            MetricKind::Supply => 1.0,
            MetricKind::Demand => -1.0,
        };
        for (i, row) in values.iter_mut().enumerate() {
            for (p, v) in row.iter_mut().enumerate() {
                *v += sign * weight * sample.period_total(metric, i, p);
            }
        }
    }
    Ok(ResidualDemandIndex {
        num_years: ny,
        num_periods: np,
        values,
    })
}

/// Pick `n_ext / 2` months with the highest and `n_ext / 2` with the
/// lowest residual demand. Ties break on (earlier period, earlier year).
pub fn preselect_extremes(
    index: &ResidualDemandIndex,
    n_ext: usize,
) -> Result<Vec<(usize, usize)>, CoreError> {
    if n_ext % 2 != 0 {
        return Err(CoreError::OddExtremeCount(n_ext));
    }
    let cells = index.num_years * index.num_periods;
    if n_ext > cells {
        return Err(CoreError::Infeasible(format!(
            "{n_ext} extreme months requested from {cells} cells"
        )));
    }
    if n_ext == 0 {
        return Ok(Vec::new());
    }
    // Sort keys: value, then (period, year) for deterministic ties.
    let mut order: Vec<(usize, usize)> = (0..index.num_years)
        .flat_map(|i| (0..index.num_periods).map(move |p| (i, p)))
        .collect();
    order.sort_by(|&(i1, p1), &(i2, p2)| {
        index.values[i1][p1]
            .total_cmp(&index.values[i2][p2])
            .then(p1.cmp(&p2))
            .then(i1.cmp(&i2))
    });
    let half = n_ext / 2;
    let mut picked: Vec<(usize, usize)> = Vec::with_capacity(n_ext);
    // Highest residual demand first, then lowest.
    let mut highest: Vec<(usize, usize)> = order[order.len() - half..].to_vec();
    // Within the highest block restore the tie order: highest value first,
    // ties by earlier period then earlier year.
    highest.sort_by(|&(i1, p1), &(i2, p2)| {
        index.values[i2][p2]
            .total_cmp(&index.values[i1][p1])
            .then(p1.cmp(&p2))
            .then(i1.cmp(&i2))
    });
    picked.extend(highest);
    picked.extend(order[..half].iter().copied());
    Ok(picked)
}

/// One representative `(year, period)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepEntry {
    /// Index into the sample's year list.
    pub year_idx: usize,
    pub probability: f64,
    pub extreme: bool,
    /// Year indices this entry stands in for (itself included).
    pub represents: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentativeSet {
    /// Per calendar period, sorted by year index.
    pub periods: Vec<Vec<RepEntry>>,
    pub sample_years: usize,
    /// Optimal assignment objective of the selection program.
    pub objective: f64,
    pub n: usize,
    pub n_ext: usize,
}

impl RepresentativeSet {
    pub fn scenarios_per_period(&self) -> Vec<usize> {
        self.periods.iter().map(|p| p.len()).collect()
    }

    /// Representative `(year index)` of a sampled `(year, period)` cell.
    pub fn representative_of(&self, year: usize, period: usize) -> Option<usize> {
        self.periods[period]
            .iter()
            .find(|e| e.represents.contains(&year))
            .map(|e| e.year_idx)
    }
}

/// Exact optimum of the selection program via branch and bound on the
/// selection binaries; assignments relax and re-derive deterministically.
/// Ties between optimal selections resolve to the lexicographically
/// smallest selection vector ordered by (year, period).
pub fn select_representatives(
    d: &DistanceTensor,
    n: usize,
    extremes: &[(usize, usize)],
) -> Result<RepresentativeSet, CoreError> {
    select_representatives_with(d, n, extremes, true)
}

/// Single exact solve without the lexicographic tie-break refinement;
/// still deterministic, used for error-curve sweeps.
pub fn select_representatives_unrefined(
    d: &DistanceTensor,
    n: usize,
    extremes: &[(usize, usize)],
) -> Result<RepresentativeSet, CoreError> {
    select_representatives_with(d, n, extremes, false)
}

fn select_representatives_with(
    d: &DistanceTensor,
    n: usize,
    extremes: &[(usize, usize)],
    refine: bool,
) -> Result<RepresentativeSet, CoreError> {
    let ny = d.num_years;
    let np = d.num_periods;
    if n < extremes.len() || n - extremes.len() < np {
        return Err(CoreError::Infeasible(format!(
            "n = {n} with {} extremes leaves fewer than one representative per period",
            extremes.len()
        )));
    }
    let n_select = n - extremes.len();
    let is_extreme = |i: usize, p: usize| extremes.contains(&(i, p));

    // Candidate cells per period (non-extreme years).
    let candidates: Vec<Vec<usize>> = (0..np)
        .map(|p| (0..ny).filter(|&i| !is_extreme(i, p)).collect())
        .collect();
    let total_candidates: usize = candidates.iter().map(|c| c.len()).sum();
    if n_select > total_candidates {
        return Err(CoreError::Infeasible(format!(
            "n = {n} exceeds the {total_candidates} candidate months"
        )));
    }
    for (p, cand) in candidates.iter().enumerate() {
        if cand.is_empty() && n_select > 0 {
            // Nothing to represent in this period; fine, but selection
            // cardinality applies globally over the remaining periods.
            let _ = p;
        }
    }

    let solve_with =
        |fixed_zero: &[(usize, usize)]| -> Result<(f64, Vec<Vec<usize>>), CoreError> {
            let mut b = LpBuilder::new();
            // Selection binaries ordered by (year, period); this ordering is
            // the tie-breaking order.
            let mut u_col: BTreeMap<(usize, usize), usize> = BTreeMap::new();
            for i in 0..ny {
                for p in 0..np {
                    if !is_extreme(i, p) {
                        let fixed = fixed_zero.contains(&(i, p));
                        let col = if fixed {
                            b.add_integer_col(0.0, 0.0, 0.0)
                        } else {
                            b.add_integer_col(0.0, 0.0, 1.0)
                        };
                        u_col.insert((i, p), col);
                    }
                }
            }
            // Assignment variables, relaxed; integrality follows from fixed
            // selections.
            let mut v_col: BTreeMap<(usize, usize, usize), usize> = BTreeMap::new();
            for p in 0..np {
                for &i in &candidates[p] {
                    for &j in &candidates[p] {
                        let col = b.add_col(d.total(i, j, p), 0.0, 1.0);
                        v_col.insert((i, j, p), col);
                    }
                }
            }
            // Assignments only to selected representatives.
            for (&(i, j, p), &vc) in &v_col {
                let _ = j;
                b.add_row(RowSense::Le, 0.0, &[(vc, 1.0), (u_col[&(i, p)], -1.0)]);
            }
            // Every non-extreme month is represented exactly once.
            for p in 0..np {
                for &j in &candidates[p] {
                    let entries: Vec<(usize, f64)> = candidates[p]
                        .iter()
                        .map(|&i| (v_col[&(i, j, p)], 1.0))
                        .collect();
                    b.add_row(RowSense::Eq, 1.0, &entries);
                }
            }
            // Total number of selected representatives.
            let entries: Vec<(usize, f64)> = u_col.values().map(|&c| (c, 1.0)).collect();
            b.add_row(RowSense::Eq, n_select as f64, &entries);

            let lp = b.build();
            let sol = solve_mip(&lp, &MipOptions::default())?;
            match sol.status {
                Status::Optimal => {}
                Status::Infeasible => {
                    return Err(CoreError::Infeasible(
                        "selection program has no feasible assignment".into(),
                    ))
                }
                other => return Err(CoreError::StatusNotOptimal(other)),
            }
            let mut selected: Vec<Vec<usize>> = vec![Vec::new(); np];
            for (&(i, p), &col) in &u_col {
                if sol.primal[col] > 0.5 {
                    selected[p].push(i);
                }
            }
            selected.iter_mut().for_each(|s| s.sort_unstable());
            Ok((sol.objective, selected))
        };

    let (best_obj, mut selected) = solve_with(&[])?;

    if refine {
        // Lexicographic refinement over the (year, period)-ordered
        // selection vector: prefer 0 at each position while optimal.
        let tol = 1e-7 * (1.0 + best_obj.abs());
        let mut fixed_zero: Vec<(usize, usize)> = Vec::new();
        for i in 0..ny {
            for p in 0..np {
                if is_extreme(i, p) {
                    continue;
                }
                if !selected[p].contains(&i) {
                    // Zero in the incumbent: fixing it keeps the incumbent
                    // feasible, so optimality is preserved.
                    fixed_zero.push((i, p));
                    continue;
                }
                fixed_zero.push((i, p));
                match solve_with(&fixed_zero) {
                    Ok((obj, sel)) if obj <= best_obj + tol => {
                        selected = sel;
                    }
                    _ => {
                        fixed_zero.pop();
                    }
                }
            }
        }
    }

    // Deterministic assignment: nearest selected representative, ties to
    // the smaller year index.
    let mut periods: Vec<Vec<RepEntry>> = Vec::with_capacity(np);
    let mut objective = 0.0;
    for p in 0..np {
        let mut entries: Vec<RepEntry> = Vec::new();
        for &i in &selected[p] {
            entries.push(RepEntry {
                year_idx: i,
                probability: 0.0,
                extreme: false,
                represents: Vec::new(),
            });
        }
        for &(ei, ep) in extremes {
            if ep == p {
                entries.push(RepEntry {
                    year_idx: ei,
                    probability: 0.0,
                    extreme: true,
                    represents: vec![ei],
                });
            }
        }
        entries.sort_by_key(|e| e.year_idx);
        for &j in &candidates[p] {
            let mut best: Option<(f64, usize)> = None;
            for &i in &selected[p] {
                let dist = d.total(i, j, p);
                match best {
                    Some((bd, bi)) if bd < dist || (bd == dist && bi < i) => {}
                    _ => best = Some((dist, i)),
                }
            }
            let (dist, rep) = best.ok_or_else(|| {
                CoreError::Infeasible(format!("period {p} has months but no representative"))
            })?;
            objective += dist;
            entries
                .iter_mut()
                .find(|e| e.year_idx == rep && !e.extreme)
                .expect("selected representative present")
                .represents
                .push(j);
        }
        for e in &mut entries {
            e.represents.sort_unstable();
        }
        periods.push(entries);
    }

    Ok(RepresentativeSet {
        periods,
        sample_years: ny,
        objective,
        n,
        n_ext: extremes.len(),
    })
}

/// Fill probability weights: a representative's weight is the share of
/// months it represents among the non-extreme months of its period,
/// rescaled so extremes keep `1 / years` and each period sums to one.
pub fn compute_probabilities(
    set: &mut RepresentativeSet,
    sample_years: usize,
) -> Result<(), CoreError> {
    let years = sample_years as f64;
    for (p, entries) in set.periods.iter_mut().enumerate() {
        let k_ext = entries.iter().filter(|e| e.extreme).count();
        let non_extreme_months = sample_years - k_ext;
        for e in entries.iter_mut() {
            if e.extreme {
                e.probability = 1.0 / years;
            } else {
                if e.represents.is_empty() {
                    return Err(CoreError::EmptyAssignment {
                        year: e.year_idx,
                        period: p,
                    });
                }
                let ratio = e.represents.len() as f64 / non_extreme_months as f64;
                e.probability = ratio * (1.0 - k_ext as f64 / years);
            }
        }
        let sum: f64 = entries.iter().map(|e| e.probability).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CoreError::ProbabilityMismatch { period: p, sum });
        }
    }
    Ok(())
}

/// Average monthly clustering error, total and per metric: the mean over
/// all (month, metric) cells of the distance to the representing month.
pub fn clustering_error(set: &RepresentativeSet, d: &DistanceTensor) -> (f64, Vec<f64>) {
    let nc = d.metrics.len();
    let mut per_metric = vec![0.0f64; nc];
    let mut cells = 0usize;
    for p in 0..d.num_periods {
        for j in 0..d.num_years {
            let rep = set
                .representative_of(j, p)
                .expect("every month has a representative");
            for (c, acc) in per_metric.iter_mut().enumerate() {
                *acc += d.get(rep, j, p, c);
            }
            cells += 1;
        }
    }
    for v in per_metric.iter_mut() {
        *v /= cells as f64;
    }
    let total = per_metric.iter().sum::<f64>() / nc as f64;
    (total, per_metric)
}

/// Number of period-scenario combinations: the exact product of the
/// scenario counts over all periods.
pub fn count_combinations(scenarios_per_period: &[usize]) -> BigUint {
    let mut total = BigUint::from(1u32);
    for &n in scenarios_per_period {
        total *= BigUint::from(n);
    }
    total
}

// ---------------------------------------------------------------------------
// JSON interchange
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct RepSetJson {
    sample_years: Vec<i32>,
    n: usize,
    n_ext: usize,
    objective: f64,
    periods: Vec<PeriodJson>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PeriodJson {
    period: usize,
    representatives: Vec<RepJson>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RepJson {
    year: i32,
    probability: f64,
    extreme: bool,
    represents: Vec<i32>,
}

/// Serialize with calendar year labels.
pub fn repset_to_json(set: &RepresentativeSet, years: &[i32]) -> String {
    let doc = RepSetJson {
        sample_years: years.to_vec(),
        n: set.n,
        n_ext: set.n_ext,
        objective: set.objective,
        periods: set
            .periods
            .iter()
            .enumerate()
            .map(|(p, entries)| PeriodJson {
                period: p,
                representatives: entries
                    .iter()
                    .map(|e| RepJson {
                        year: years[e.year_idx],
                        probability: e.probability,
                        extreme: e.extreme,
                        represents: e.represents.iter().map(|&j| years[j]).collect(),
                    })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("repset serializes")
}

/// Parse the JSON interchange form back; exposed for fuzzing as well.
pub fn repset_from_json(text: &str) -> Result<(RepresentativeSet, Vec<i32>), CoreError> {
    let doc: RepSetJson =
        serde_json::from_str(text).map_err(|e| CoreError::schema("repset.json", e.to_string()))?;
    let year_index: BTreeMap<i32, usize> = doc
        .sample_years
        .iter()
        .enumerate()
        .map(|(i, &y)| (y, i))
        .collect();
    if year_index.len() != doc.sample_years.len() {
        return Err(CoreError::schema("repset.json", "duplicate sample years"));
    }
    let mut periods = vec![Vec::new(); doc.periods.len()];
    for pj in &doc.periods {
        if pj.period >= periods.len() {
            return Err(CoreError::schema("repset.json", format!("period {} out of range", pj.period)));
        }
        let entries: Vec<RepEntry> = pj
            .representatives
            .iter()
            .map(|r| {
                let year_idx = *year_index.get(&r.year).ok_or_else(|| {
                    CoreError::schema("repset.json", format!("unknown year {}", r.year))
                })?;
                let represents = r
                    .represents
                    .iter()
                    .map(|y| {
                        year_index.get(y).copied().ok_or_else(|| {
                            CoreError::schema("repset.json", format!("unknown year {y}"))
                        })
                    })
                    .collect::<Result<Vec<usize>, CoreError>>()?;
                if !(r.probability >= 0.0 && r.probability <= 1.0) {
                    return Err(CoreError::schema(
                        "repset.json",
                        format!("probability {} outside [0, 1]", r.probability),
                    ));
                }
                Ok(RepEntry {
                    year_idx,
                    probability: r.probability,
                    extreme: r.extreme,
                    represents,
                })
            })
            .collect::<Result<_, CoreError>>()?;
        periods[pj.period] = entries;
    }
    let n: usize = periods.iter().map(|p| p.len()).sum();
    Ok((
        RepresentativeSet {
            periods,
            sample_years: doc.sample_years.len(),
            objective: doc.objective,
            n,
            n_ext: doc.n_ext,
        },
        doc.sample_years,
    ))
}
