//! Correlation-entropy estimation from discrete samples, plus exact
//! separated-set and covering counters on finite trajectory families.
//!
//! The correlation sum counts pairs of time origins whose length-n windows
//! stay ε-close in the selected window norm. Pairwise closeness is computed
//! once per diagonal of the (j, k) index plane; the window product then
//! reduces to counting runs of consecutive ones along the diagonal, so the
//! cost is `O(N²·(ε-levels + window))` instead of `O(N²·n_max)` per level.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pde::Field;

/// Time-ordered snapshots restricted to an observation window.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub n_components: usize,
    /// Spatial points per snapshot.
    pub points: usize,
    /// Each snapshot holds `points · n_components` values, point-major.
    pub snapshots: Vec<Vec<f64>>,
    /// Time between consecutive snapshots.
    pub tau: f64,
    /// Spacing of the stored points.
    pub delta: f64,
    /// Window half-width; the volume normalization for entropy rates.
    /// Scalar series (no spatial extent) use 1.
    pub lambda: f64,
    pub meta: RecordMeta,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RecordMeta {
    pub model_hash: String,
    pub seed: u64,
    pub t_start: f64,
}

impl TrajectoryRecord {
    /// Collect the window `|x| <= lambda` from each field at the given grid
    /// stride. Stored points sit at `n·stride·h` for `|n·stride·h| <= lambda`.
    pub fn from_fields(
        fields: &[Field],
        lambda: f64,
        stride: usize,
        meta: RecordMeta,
    ) -> Result<TrajectoryRecord> {
        if fields.len() < 2 {
            return Err(Error::validation("a record needs at least two snapshots"));
        }
        let first = &fields[0];
        if stride == 0 {
            return Err(Error::validation("stride must be at least 1"));
        }
        let h = first.grid_spacing();
        let delta = stride as f64 * h;
        let g = first.grid_points as i64;
        let j = (lambda / delta + 1e-9).floor() as i64;
        let tau = fields[1].time - fields[0].time;
        if tau <= 0.0 {
            return Err(Error::validation("snapshots must be strictly time-ordered"));
        }
        let mut snapshots = Vec::with_capacity(fields.len());
        for (idx, f) in fields.iter().enumerate() {
            if f.grid_points != first.grid_points || f.n_components != first.n_components {
                return Err(Error::validation("snapshots live on different grids"));
            }
            if idx > 0 {
                let dt = f.time - fields[idx - 1].time;
                if (dt - tau).abs() > 1e-9 * tau.max(1.0) {
                    return Err(Error::validation(format!(
                        "snapshot cadence is not uniform: step {idx} has dt = {dt}, \
                         expected {tau}"
                    )));
                }
            }
            let mut row = Vec::with_capacity((2 * j + 1) as usize * f.n_components);
            for n in -j..=j {
                let i = (n * stride as i64).rem_euclid(g) as usize;
                for c in 0..f.n_components {
                    row.push(f.value(c, i));
                }
            }
            snapshots.push(row);
        }
        Ok(TrajectoryRecord {
            n_components: first.n_components,
            points: (2 * j + 1) as usize,
            snapshots,
            tau,
            delta,
            lambda,
            meta,
        })
    }

    /// Wrap a scalar time series (one component, no spatial extent).
    pub fn from_scalar_series(series: &[f64], tau: f64, meta: RecordMeta) -> TrajectoryRecord {
        TrajectoryRecord {
            n_components: 1,
            points: 1,
            snapshots: series.iter().map(|v| vec![*v]).collect(),
            tau,
            delta: 1.0,
            lambda: 1.0,
            meta,
        }
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// Consecutive non-overlapping segments of the record as a family.
    pub fn segment_family(&self, segment_len: usize, max_segments: usize) -> SegmentFamily {
        let mut segments = Vec::new();
        let mut start = 0;
        while start + segment_len <= self.len() && segments.len() < max_segments {
            segments.push(self.snapshots[start..start + segment_len].to_vec());
            start += segment_len;
        }
        SegmentFamily { n_components: self.n_components, segments }
    }
}

/// Window norm used for snapshot distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WindowNorm {
    /// Sup over every stored point.
    Grid,
    /// Sup over every `stride`-th stored point (centered sublattice).
    Lattice { stride: usize },
}

/// Squared sup-of-l² distance between two stored snapshots.
fn snapshot_dist_sq(a: &[f64], b: &[f64], n_comp: usize, points: usize, norm: WindowNorm) -> f64 {
    let (start, step) = match norm {
        WindowNorm::Grid => (0usize, 1usize),
        WindowNorm::Lattice { stride } => {
            let center = points / 2;
            (center % stride, stride)
        }
    };
    let mut worst = 0.0_f64;
    let mut p = start;
    while p < points {
        let base = p * n_comp;
        let mut s = 0.0;
        for c in 0..n_comp {
            let d = a[base + c] - b[base + c];
            s += d * d;
        }
        if s > worst {
            worst = s;
        }
        p += step;
    }
    worst
}

/// Correlation-sum values over a grid of radii and window lengths.
#[derive(Debug, Clone, Serialize)]
pub struct CorrelationTable {
    pub epsilons: Vec<f64>,
    pub n_max: usize,
    /// Record length (number of time origins before windowing).
    pub record_len: usize,
    /// Raw matching pair counts, self-pairs included: `counts[e][n-1]`.
    pub counts: Vec<Vec<u64>>,
    pub tau: f64,
    pub lambda: f64,
    pub norm: WindowNorm,
    /// Violations of the soft monotonicity checks, if any.
    pub warnings: Vec<String>,
}

impl CorrelationTable {
    pub fn n_effective(&self, n: usize) -> u64 {
        (self.record_len - n + 1) as u64
    }

    /// Correlation sum with self-pairs included, normalized by the number of
    /// valid window starts.
    pub fn c(&self, eps_idx: usize, n: usize) -> f64 {
        let ne = self.n_effective(n) as f64;
        self.counts[eps_idx][n - 1] as f64 / (ne * ne)
    }

    /// Correlation sum excluding the diagonal self-pairs.
    pub fn c_excluding_self(&self, eps_idx: usize, n: usize) -> f64 {
        let ne = self.n_effective(n) as f64;
        let raw = self.counts[eps_idx][n - 1] as f64 - ne;
        if ne <= 1.0 {
            return 0.0;
        }
        (raw / (ne * (ne - 1.0))).max(0.0)
    }

    fn check_monotonicity(&mut self) {
        for (e, eps) in self.epsilons.iter().enumerate() {
            for n in 1..=self.n_max {
                if e > 0 && self.counts[e][n - 1] < self.counts[e - 1][n - 1] {
                    self.warnings.push(format!(
                        "pair count decreased from eps {} to {eps} at n = {n}",
                        self.epsilons[e - 1]
                    ));
                }
                if n > 1 && self.counts[e][n - 1] > self.counts[e][n - 2] {
                    self.warnings.push(format!(
                        "pair count increased from n = {} to {n} at eps {eps}",
                        n - 1
                    ));
                }
                let c = self.c(e, n);
                if !(0.0..=1.0).contains(&c) {
                    self.warnings.push(format!("C({eps}, {n}) = {c} outside [0, 1]"));
                }
            }
        }
    }
}

/// Correlation sums by the run-length method.
///
/// For each diagonal offset `d = k - j`, pairwise closeness along the
/// diagonal is a bit string; a window of length n matches exactly where n
/// consecutive bits are set, so each maximal run of length r contributes
/// `r - n + 1` pairs. Diagonals partition the index plane, so paralleling
/// over them keeps integer counts exactly reproducible.
pub fn correlation_sum(
    record: &TrajectoryRecord,
    epsilons: &[f64],
    n_max: usize,
    norm: WindowNorm,
) -> Result<CorrelationTable> {
    let n_snap = record.len();
    if epsilons.is_empty() {
        return Err(Error::validation("epsilon grid must be non-empty"));
    }
    if epsilons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::validation("epsilons must be sorted strictly ascending"));
    }
    if n_max == 0 || n_max + 2 > n_snap {
        return Err(Error::validation(format!(
            "window length n_max = {n_max} needs a record of at least n_max + 2 \
             snapshots, got {n_snap}"
        )));
    }
    if let WindowNorm::Lattice { stride } = norm {
        if stride == 0 {
            return Err(Error::validation("lattice stride must be at least 1"));
        }
        if stride >= record.points.max(1) && record.points > 1 {
            return Err(Error::validation(format!(
                "lattice stride {stride} leaves no stored point in the window \
                 ({} points)",
                record.points
            )));
        }
    }
    let eps_sq: Vec<f64> = epsilons.iter().map(|e| e * e).collect();
    let levels = epsilons.len();
    let n_comp = record.n_components;
    let points = record.points;

    let counts_flat: Vec<u64> = (0..n_snap)
        .into_par_iter()
        .fold(
            || vec![0u64; levels * n_max],
            |mut acc, d| {
                let len = n_snap - d;
                let mut dist_sq = Vec::with_capacity(len);
                for j in 0..len {
                    dist_sq.push(snapshot_dist_sq(
                        &record.snapshots[j],
                        &record.snapshots[j + d],
                        n_comp,
                        points,
                        norm,
                    ));
                }
                let mult = if d == 0 { 1u64 } else { 2u64 };
                for (e, es) in eps_sq.iter().enumerate() {
                    let mut run = 0usize;
                    for j in 0..=len {
                        let close = j < len && dist_sq[j] < *es;
                        if close {
                            run += 1;
                        } else if run > 0 {
                            let max_n = run.min(n_max);
                            for n in 1..=max_n {
                                acc[e * n_max + (n - 1)] += mult * (run - n + 1) as u64;
                            }
                            run = 0;
                        }
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; levels * n_max],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b.iter()) {
                    *x += y;
                }
                a
            },
        );

    let counts: Vec<Vec<u64>> = (0..levels)
        .map(|e| counts_flat[e * n_max..(e + 1) * n_max].to_vec())
        .collect();
    let mut table = CorrelationTable {
        epsilons: epsilons.to_vec(),
        n_max,
        record_len: n_snap,
        counts,
        tau: record.tau,
        lambda: record.lambda,
        norm,
        warnings: Vec::new(),
    };
    table.check_monotonicity();
    Ok(table)
}

/// Log-spaced radius grid, `per_decade` points per decade of `[lo, hi]`.
pub fn log_epsilon_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo);
    let decades = (hi / lo).log10();
    let count = ((decades * per_decade as f64).round() as usize).max(2);
    (0..=count)
        .map(|i| lo * (hi / lo).powf(i as f64 / count as f64))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsilonFit {
    pub epsilon: f64,
    /// Slope of `-log C` against the window length, per window step.
    pub slope: f64,
    /// Slope divided by `tau · lambda^d`: entropy per unit time and volume.
    pub k2: f64,
    /// Root-mean-square fit residual.
    pub residual: f64,
    pub n_used: usize,
    pub usable: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Plateau {
    pub eps_lo: f64,
    pub eps_hi: f64,
    pub first_index: usize,
    pub len: usize,
    pub k2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyReport {
    pub fits: Vec<EpsilonFit>,
    pub plateau: Option<Plateau>,
    pub fit_range: (usize, usize),
    /// Radius range considered for the plateau, when restricted.
    pub selection: Option<(f64, f64)>,
    pub tau: f64,
    pub lambda: f64,
    pub warnings: Vec<String>,
}

impl EntropyReport {
    /// Plateau estimate when one exists, otherwise the median usable slope
    /// inside the selection. The flag reports whether the plateau was used.
    pub fn k2_estimate_or_median(&self) -> Option<(f64, bool)> {
        if let Some(p) = &self.plateau {
            return Some((p.k2, true));
        }
        let in_selection = |eps: f64| match self.selection {
            Some((lo, hi)) => eps >= lo && eps <= hi,
            None => true,
        };
        let mut vals: Vec<f64> = self
            .fits
            .iter()
            .filter(|f| f.usable && in_selection(f.epsilon))
            .map(|f| f.k2)
            .collect();
        if vals.is_empty() {
            return None;
        }
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Some((vals[vals.len() / 2], false))
    }
}

/// Radius range where the correlation statistics scale: enough matched
/// pairs beyond the self-pair floor at the longest window, below saturation
/// at the shortest.
pub fn scaling_selection(
    table: &CorrelationTable,
    fit_range: (usize, usize),
    min_pairs: u64,
    saturation: f64,
) -> Option<(f64, f64)> {
    let (_, n_hi) = fit_range;
    let mut lo = None;
    let mut hi = None;
    for (e, eps) in table.epsilons.iter().enumerate() {
        let genuine = table.counts[e][n_hi - 1].saturating_sub(table.n_effective(n_hi));
        if lo.is_none() && genuine >= min_pairs {
            lo = Some(*eps);
        }
        if table.c(e, 1) <= saturation {
            hi = Some(*eps);
        }
    }
    match (lo, hi) {
        (Some(l), Some(h)) if l <= h => Some((l, h)),
        _ => None,
    }
}

/// Fit `-log C(ε, n)` against n on the requested range and report the
/// entropy rate per unit time and volume, with plateau selection over ε.
pub fn k2_estimate(
    table: &CorrelationTable,
    fit_range: (usize, usize),
    epsilon_selection: Option<(f64, f64)>,
) -> Result<EntropyReport> {
    let (n_lo, n_hi) = fit_range;
    if n_lo < 1 || n_hi > table.n_max || n_lo + 2 > n_hi + 1 {
        return Err(Error::validation(format!(
            "fit range ({n_lo}, {n_hi}) must satisfy 1 <= n_lo, n_hi <= n_max = {} \
             and span at least 3 window lengths",
            table.n_max
        )));
    }
    let mut warnings = Vec::new();
    let volume = table.lambda; // 1-D window volume
    let mut fits = Vec::new();
    for (e, eps) in table.epsilons.iter().enumerate() {
        // Shrink to the sub-range with positive counts.
        let pts: Vec<(f64, f64)> = (n_lo..=n_hi)
            .filter(|n| table.counts[e][n - 1] > 0)
            .map(|n| (n as f64, -(table.c(e, n)).ln()))
            .collect();
        if pts.len() < (n_hi - n_lo + 1) && !pts.is_empty() {
            warnings.push(format!(
                "fit range shrunk to {} points at eps = {eps} (zero counts)",
                pts.len()
            ));
        }
        if pts.len() < 3 {
            fits.push(EpsilonFit {
                epsilon: *eps,
                slope: f64::NAN,
                k2: f64::NAN,
                residual: f64::NAN,
                n_used: pts.len(),
                usable: false,
            });
            continue;
        }
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let denom = n * sxx - sx * sx;
        let slope = (n * sxy - sx * sy) / denom;
        let intercept = (sy - slope * sx) / n;
        let residual = (pts
            .iter()
            .map(|p| {
                let r = p.1 - (slope * p.0 + intercept);
                r * r
            })
            .sum::<f64>()
            / n)
            .sqrt();
        fits.push(EpsilonFit {
            epsilon: *eps,
            slope,
            k2: slope / (table.tau * volume),
            residual,
            n_used: pts.len(),
            usable: true,
        });
    }
    if !fits.iter().any(|f| f.usable) {
        return Err(Error::numerical(
            "no epsilon level has at least 3 positive correlation values on \
             the fit range",
        ));
    }
    // Plateau: the longest run of >= 3 consecutive usable levels inside the
    // selection whose slopes vary by less than 10%.
    let in_selection = |eps: f64| match epsilon_selection {
        Some((lo, hi)) => eps >= lo && eps <= hi,
        None => true,
    };
    let mut best: Option<(usize, usize)> = None; // (start, len)
    let mut start = 0usize;
    while start < fits.len() {
        if !fits[start].usable || !in_selection(fits[start].epsilon) {
            start += 1;
            continue;
        }
        let mut end = start;
        let mut lo = fits[start].slope;
        let mut hi = fits[start].slope;
        while end + 1 < fits.len() && fits[end + 1].usable && in_selection(fits[end + 1].epsilon)
        {
            let s = fits[end + 1].slope;
            let nlo = lo.min(s);
            let nhi = hi.max(s);
            if (nhi - nlo) > 0.10 * nhi.abs().max(1e-300) {
                break;
            }
            lo = nlo;
            hi = nhi;
            end += 1;
        }
        let len = end - start + 1;
        if len >= 3 && best.map(|(_, l)| len > l).unwrap_or(true) {
            best = Some((start, len));
        }
        start = end + 1;
    }
    let plateau = best.map(|(s, l)| {
        let k2 = fits[s..s + l].iter().map(|f| f.k2).sum::<f64>() / l as f64;
        Plateau {
            eps_lo: fits[s].epsilon,
            eps_hi: fits[s + l - 1].epsilon,
            first_index: s,
            len: l,
            k2,
        }
    });
    Ok(EntropyReport {
        fits,
        plateau,
        fit_range,
        selection: epsilon_selection,
        tau: table.tau,
        lambda: table.lambda,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// Separated-set and covering counters
// ---------------------------------------------------------------------------

/// Finite family of trajectory segments (single snapshots are length-1
/// segments). Segment distance is the sup over time steps of the snapshot
/// distance.
#[derive(Debug, Clone)]
pub struct SegmentFamily {
    pub n_components: usize,
    pub segments: Vec<Vec<Vec<f64>>>,
}

impl SegmentFamily {
    pub fn from_points(n_components: usize, points: Vec<Vec<f64>>) -> SegmentFamily {
        SegmentFamily {
            n_components,
            segments: points.into_iter().map(|p| vec![p]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Restriction to the time steps `[t0, t0 + len)`.
    pub fn restrict_time(&self, t0: usize, len: usize) -> SegmentFamily {
        SegmentFamily {
            n_components: self.n_components,
            segments: self
                .segments
                .iter()
                .map(|s| s[t0.min(s.len())..(t0 + len).min(s.len())].to_vec())
                .collect(),
        }
    }

    /// Sup over time of the snapshot sup-of-l² distance.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let a = &self.segments[i];
        let b = &self.segments[j];
        let steps = a.len().min(b.len());
        let mut worst = 0.0_f64;
        for t in 0..steps {
            let points = a[t].len() / self.n_components;
            let d = snapshot_dist_sq(&a[t], &b[t], self.n_components, points, WindowNorm::Grid);
            worst = worst.max(d);
        }
        worst.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CountMode {
    Exact,
    Greedy,
}

const EXACT_LIMIT: usize = 24;

/// Size of a maximum pairwise ζ-separated subset.
///
/// Exact mode solves the maximum-clique problem on the "distance >= ζ" graph
/// by branch and bound; greedy keeps points in input order, giving a maximal
/// (not maximum) separated set, so greedy <= exact always.
pub fn separated_count(family: &SegmentFamily, zeta: f64, mode: CountMode) -> Result<usize> {
    if !(zeta > 0.0) {
        return Err(Error::validation(format!("zeta must be positive, got {zeta}")));
    }
    let n = family.len();
    if n == 0 {
        return Ok(0);
    }
    match mode {
        CountMode::Greedy => {
            let mut kept: Vec<usize> = Vec::new();
            for i in 0..n {
                if kept.iter().all(|&j| family.distance(i, j) >= zeta) {
                    kept.push(i);
                }
            }
            Ok(kept.len())
        }
        CountMode::Exact => {
            if n > EXACT_LIMIT {
                return Err(Error::validation(format!(
                    "exact separated counting is limited to {EXACT_LIMIT} points \
                     (got {n}); use greedy mode"
                )));
            }
            let adj = adjacency(family, |d| d >= zeta);
            Ok(max_clique(&adj, n))
        }
    }
}

/// Minimum number of diameter-ε classes covering the family.
///
/// Exact mode computes the minimum partition into subsets of pairwise
/// distance at most ε (the covering convention whose sandwich against
/// separated counts holds with no slack); greedy first-fit gives an upper
/// bound.
pub fn covering_count(family: &SegmentFamily, epsilon: f64, mode: CountMode) -> Result<usize> {
    if !(epsilon > 0.0) {
        return Err(Error::validation(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let n = family.len();
    if n == 0 {
        return Ok(0);
    }
    let compatible = adjacency(family, |d| d <= epsilon);
    match mode {
        CountMode::Greedy => Ok(first_fit_cover(&compatible, n)),
        CountMode::Exact => {
            if n > EXACT_LIMIT {
                return Err(Error::validation(format!(
                    "exact covering counting is limited to {EXACT_LIMIT} points \
                     (got {n}); use greedy mode"
                )));
            }
            let upper = first_fit_cover(&compatible, n);
            Ok(min_clique_cover(&compatible, n, upper))
        }
    }
}

fn adjacency(family: &SegmentFamily, pred: impl Fn(f64) -> bool) -> Vec<u32> {
    let n = family.len();
    let mut adj = vec![0u32; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if pred(family.distance(i, j)) {
                adj[i] |= 1 << j;
                adj[j] |= 1 << i;
            }
        }
    }
    adj
}

/// Branch-and-bound maximum clique with a population bound.
fn max_clique(adj: &[u32], n: usize) -> usize {
    fn extend(adj: &[u32], current: usize, mut candidates: u32, best: &mut usize) {
        if current + candidates.count_ones() as usize <= *best {
            return;
        }
        if candidates == 0 {
            *best = (*best).max(current);
            return;
        }
        while candidates != 0 {
            if current + candidates.count_ones() as usize <= *best {
                return;
            }
            let v = candidates.trailing_zeros() as usize;
            candidates &= !(1u32 << v);
            extend(adj, current + 1, candidates & adj[v], best);
        }
    }
    let mut best = 0usize;
    let all = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    extend(adj, 0, all, &mut best);
    best.max(usize::from(n > 0))
}

/// First-fit partition into mutually compatible classes, in input order.
fn first_fit_cover(compatible: &[u32], n: usize) -> usize {
    let mut classes: Vec<u32> = Vec::new();
    for i in 0..n {
        let mut placed = false;
        for class in classes.iter_mut() {
            // The class must stay a clique of the compatibility graph.
            if *class & !compatible[i] == 0 {
                *class |= 1 << i;
                placed = true;
                break;
            }
        }
        if !placed {
            classes.push(1 << i);
        }
    }
    classes.len()
}

/// Exact minimum clique cover by branch and bound over class assignments.
fn min_clique_cover(compatible: &[u32], n: usize, upper: usize) -> usize {
    // Order vertices by ascending compatibility degree: hardest first.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| compatible[v].count_ones());

    fn assign(
        compatible: &[u32],
        order: &[usize],
        idx: usize,
        classes: &mut Vec<u32>,
        best: &mut usize,
    ) {
        if classes.len() >= *best {
            return;
        }
        if idx == order.len() {
            *best = classes.len();
            return;
        }
        let v = order[idx];
        for c in 0..classes.len() {
            if classes[c] & !compatible[v] == 0 {
                classes[c] |= 1 << v;
                assign(compatible, order, idx + 1, classes, best);
                classes[c] &= !(1u32 << v);
            }
        }
        if classes.len() + 1 < *best {
            classes.push(1 << v);
            assign(compatible, order, idx + 1, classes, best);
            classes.pop();
        }
    }

    let mut best = upper;
    let mut classes = Vec::new();
    assign(compatible, &order, 0, &mut classes, &mut best);
    best
}

/// Exact-count audit of the combinatorial entropy properties on a family.
#[derive(Debug, Clone, Serialize)]
pub struct AuditRow {
    pub epsilon: f64,
    pub covering_full: usize,
    pub covering_first: usize,
    pub covering_second: usize,
    pub separated: usize,
    pub covering_double: usize,
    pub covering_half: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub rows: Vec<AuditRow>,
    pub epsilon_monotone: bool,
    pub submultiplicative: bool,
    pub sandwich: bool,
    pub violations: Vec<String>,
}

impl AuditReport {
    pub fn all_ok(&self) -> bool {
        self.epsilon_monotone && self.submultiplicative && self.sandwich
    }
}

/// Verify, on exact counts, that covering numbers are non-increasing in ε,
/// submultiplicative under time splitting, and sandwiched by separated
/// counts: `N(2ζ) <= R(ζ) <= N(ζ/2)`.
pub fn entropy_monotonicity_audit(
    family: &SegmentFamily,
    epsilons: &[f64],
    time_split: (usize, usize),
    mode: CountMode,
) -> Result<AuditReport> {
    if mode != CountMode::Exact {
        return Err(Error::validation(
            "the audit requires exact counts; greedy mode is refused",
        ));
    }
    if epsilons.is_empty() || epsilons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::validation(
            "epsilons must be non-empty and strictly ascending",
        ));
    }
    let (t1, t2) = time_split;
    let first = family.restrict_time(0, t1);
    let second = family.restrict_time(t1, t2);
    let mut rows = Vec::new();
    let mut violations = Vec::new();
    for &eps in epsilons {
        let covering_full = covering_count(family, eps, CountMode::Exact)?;
        let covering_first = covering_count(&first, eps, CountMode::Exact)?;
        let covering_second = covering_count(&second, eps, CountMode::Exact)?;
        let separated = separated_count(family, eps, CountMode::Exact)?;
        let covering_double = covering_count(family, 2.0 * eps, CountMode::Exact)?;
        let covering_half = covering_count(family, eps / 2.0, CountMode::Exact)?;
        if covering_full > covering_first * covering_second {
            violations.push(format!(
                "submultiplicativity failed at eps = {eps}: {covering_full} > \
                 {covering_first} x {covering_second}"
            ));
        }
        if covering_double > separated {
            violations.push(format!(
                "sandwich lower part failed at eps = {eps}: N(2ζ) = \
                 {covering_double} > R(ζ) = {separated}"
            ));
        }
        if separated > covering_half {
            violations.push(format!(
                "sandwich upper part failed at eps = {eps}: R(ζ) = {separated} > \
                 N(ζ/2) = {covering_half}"
            ));
        }
        rows.push(AuditRow {
            epsilon: eps,
            covering_full,
            covering_first,
            covering_second,
            separated,
            covering_double,
            covering_half,
        });
    }
    let mut epsilon_monotone = true;
    for w in rows.windows(2) {
        if w[1].covering_full > w[0].covering_full {
            epsilon_monotone = false;
            violations.push(format!(
                "covering count increased from eps = {} to {}",
                w[0].epsilon, w[1].epsilon
            ));
        }
        if w[1].separated > w[0].separated {
            epsilon_monotone = false;
            violations.push(format!(
                "separated count increased from zeta = {} to {}",
                w[0].epsilon, w[1].epsilon
            ));
        }
    }
    let submultiplicative = !violations.iter().any(|v| v.contains("submultiplicativity"));
    let sandwich = !violations.iter().any(|v| v.contains("sandwich"));
    Ok(AuditReport { rows, epsilon_monotone, submultiplicative, sandwich, violations })
}
