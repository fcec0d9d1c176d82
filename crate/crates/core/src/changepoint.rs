//! Exact penalized mean-shift segmentation.
//!
//! The solver minimizes `J(y, tau) + beta * m` where `J` is the sum of
//! squared deviations from per-segment means. [`pelt`] is the pruned
//! dynamic program; [`dp_optimal_oracle`] is the unpruned reference with
//! the same contract. [`penalty_profile`] computes the single-changepoint
//! improvement curve `beta(tau_1)` whose maximum bounds every useful
//! penalty, and [`crops_max_changes`] reproduces the iterative
//! penalty-search baseline this method replaces.

use crate::error::{Error, Result};
use crate::signal::SignalRecord;

/// Relative tolerance for "equal" objective values; ties resolve to the
/// smaller predecessor index so results are platform-stable.
const TIE_REL_TOL: f64 = 1e-12;
/// Pruning margin relative to the whole-record cost scale. Wider than the
/// tie tolerance at any prefix, so a pruned candidate can never come back
/// as a tolerance-tie.
const PRUNE_REL_MARGIN: f64 = 1e-9;

/// A mean-shift segmentation of one record.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    /// Strictly increasing changepoint indices; `tau` is the first sample
    /// of a new segment, so segments are `[0, tau_1), [tau_1, tau_2), ...`.
    pub changepoints: Vec<usize>,
    /// Arithmetic mean of each of the `m + 1` segments.
    pub segment_means: Vec<f64>,
    /// Unpenalized total cost: the sum of squared deviations.
    pub total_cost: f64,
    /// Penalty the segmentation was solved under.
    pub penalty: f64,
}

impl Segmentation {
    pub fn num_changepoints(&self) -> usize {
        self.changepoints.len()
    }

    /// Segment boundaries as `[start, end)` pairs covering `0..n`.
    pub fn segment_bounds(&self, n: usize) -> Vec<(usize, usize)> {
        let mut bounds = Vec::with_capacity(self.changepoints.len() + 1);
        let mut start = 0usize;
        for &cp in &self.changepoints {
            bounds.push((start, cp));
            start = cp;
        }
        bounds.push((start, n));
        bounds
    }

    /// Expand the segment means to one value per sample (the `Y_hat`
    /// array the interval construction consumes).
    pub fn sample_means(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for ((start, end), &mean) in self.segment_bounds(n).into_iter().zip(&self.segment_means) {
            for v in &mut out[start..end] {
                *v = mean;
            }
        }
        out
    }

    /// Length of the shortest segment.
    pub fn min_segment_len(&self, n: usize) -> usize {
        self.segment_bounds(n)
            .into_iter()
            .map(|(s, e)| e - s)
            .min()
            .unwrap_or(n)
    }
}

/// Single-changepoint penalty profile: `beta(tau_1)` for every split
/// position, plus its maximum and mean.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyProfile {
    /// `beta_of_tau1[i]` is the profile at `tau_1 = i + 1`.
    pub beta_of_tau1: Vec<f64>,
    pub beta_max: f64,
    pub beta_mean: f64,
}

/// How to pick the working penalty from a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaStrategy {
    /// `beta = mean(beta(tau_1))`.
    MeanProfile,
    /// `beta = 0.5 * beta_max`.
    HalfMax,
}

/// O(1) segment costs from cumulative sums of `y` and `y^2`.
pub(crate) struct CostTable {
    cum: Vec<f64>,
    cum_sq: Vec<f64>,
}

impl CostTable {
    pub fn new(samples: &[f64]) -> Self {
        let mut cum = Vec::with_capacity(samples.len() + 1);
        let mut cum_sq = Vec::with_capacity(samples.len() + 1);
        cum.push(0.0);
        cum_sq.push(0.0);
        let (mut s, mut s2) = (0.0f64, 0.0f64);
        for &v in samples {
            s += v;
            s2 += v * v;
            cum.push(s);
            cum_sq.push(s2);
        }
        Self { cum, cum_sq }
    }

    /// Sum of squared deviations from the mean over `[start, end)`.
    /// Clipped at zero: cancellation can leave a tiny negative residue.
    #[inline]
    pub fn cost(&self, start: usize, end: usize) -> f64 {
        let len = (end - start) as f64;
        let s = self.cum[end] - self.cum[start];
        let s2 = self.cum_sq[end] - self.cum_sq[start];
        (s2 - s * s / len).max(0.0)
    }

    #[inline]
    pub fn mean(&self, start: usize, end: usize) -> f64 {
        (self.cum[end] - self.cum[start]) / (end - start) as f64
    }
}

/// Cost of one segment `[start, end_exclusive)`: squared deviations from
/// the segment mean, computed in O(1) from cumulative sums.
pub fn segment_cost(y: &SignalRecord, start: usize, end_exclusive: usize) -> Result<f64> {
    if start >= end_exclusive || end_exclusive > y.len() {
        return Err(Error::EmptySegment {
            start,
            end: end_exclusive,
        });
    }
    Ok(CostTable::new(&y.samples).cost(start, end_exclusive))
}

/// `candidate` strictly beats `best` (beyond the tie tolerance).
#[inline]
fn strictly_better(candidate: f64, best: f64) -> bool {
    if !best.is_finite() {
        return candidate < best;
    }
    candidate < best - TIE_REL_TOL * best.abs().max(1e-300)
}

fn solve_dp(
    samples: &[f64],
    beta: f64,
    min_seg_len: usize,
    prune: bool,
) -> (Vec<usize>, CostTable) {
    let n = samples.len();
    let table = CostTable::new(samples);
    let prune_margin = PRUNE_REL_MARGIN * (table.cost(0, n) + beta).max(1.0);
    let mut f = vec![f64::INFINITY; n + 1];
    f[0] = -beta;
    let mut prev = vec![0usize; n + 1];
    // Candidate predecessors in increasing order. A candidate failing the
    // prune test at time t is dominated by the path through t, but that
    // path needs a whole segment, so removal is only sound from
    // t + min_seg_len onward; `expiry[i]` records that moment.
    let mut cands: Vec<usize> = vec![0];
    let mut expiry: Vec<usize> = vec![usize::MAX];
    let mut scores: Vec<f64> = vec![0.0];
    for t in min_seg_len..=n {
        let new_cand = t.checked_sub(min_seg_len).filter(|&s| s >= min_seg_len);
        if let Some(s) = new_cand {
            cands.push(s);
            expiry.push(usize::MAX);
            scores.push(0.0);
        }
        if prune {
            let mut keep = 0usize;
            for i in 0..cands.len() {
                if expiry[i] > t {
                    cands[keep] = cands[i];
                    expiry[keep] = expiry[i];
                    keep += 1;
                }
            }
            cands.truncate(keep);
            expiry.truncate(keep);
            scores.truncate(keep);
        }
        let mut best = f64::INFINITY;
        let mut best_s = usize::MAX;
        // Candidates are pushed only once t - s >= min_seg_len, so every
        // entry is segment-feasible here.
        for (i, &s) in cands.iter().enumerate() {
            let sc = f[s] + table.cost(s, t);
            scores[i] = sc;
            if strictly_better(sc + beta, best) {
                best = sc + beta;
                best_s = s;
            }
        }
        f[t] = best;
        prev[t] = best_s;
        if prune {
            // Killick pruning (K = 0 for subadditive SSE costs), with a
            // margin so tolerance-level ties survive.
            let bound = f[t] + prune_margin;
            for i in 0..cands.len() {
                if scores[i] > bound && expiry[i] == usize::MAX {
                    expiry[i] = t + min_seg_len;
                }
            }
        }
    }
    // Backtrack.
    let mut cps = Vec::new();
    let mut t = n;
    while t > 0 {
        let s = prev[t];
        if s == 0 {
            break;
        }
        cps.push(s);
        t = s;
    }
    cps.reverse();
    (cps, table)
}

fn finish_segmentation(
    cps: Vec<usize>,
    table: &CostTable,
    n: usize,
    beta: f64,
) -> Segmentation {
    let mut means = Vec::with_capacity(cps.len() + 1);
    let mut total = 0.0;
    let mut start = 0usize;
    for &cp in cps.iter().chain(std::iter::once(&n)) {
        means.push(table.mean(start, cp));
        total += table.cost(start, cp);
        start = cp;
    }
    Segmentation {
        changepoints: cps,
        segment_means: means,
        total_cost: total,
        penalty: beta,
    }
}

fn validate_dp_inputs(y: &SignalRecord, beta: f64, min_seg_len: usize) -> Result<()> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::NonPositivePenalty(beta));
    }
    assert!(min_seg_len >= 1, "min_seg_len must be >= 1");
    if y.len() < 2 * min_seg_len {
        return Err(Error::ShortRecord {
            len: y.len(),
            min: 2 * min_seg_len,
        });
    }
    Ok(())
}

/// Exact minimizer of the penalized mean-shift cost with per-changepoint
/// penalty `beta`, by pruned dynamic programming. Every segment has at
/// least `min_seg_len` samples.
pub fn pelt(y: &SignalRecord, beta: f64, min_seg_len: usize) -> Result<Segmentation> {
    validate_dp_inputs(y, beta, min_seg_len)?;
    let (cps, table) = solve_dp(&y.samples, beta, min_seg_len, true);
    Ok(finish_segmentation(cps, &table, y.len(), beta))
}

/// Unpruned O(N^2) dynamic program with the same contract as [`pelt`].
/// Reference implementation for correctness tests.
pub fn dp_optimal_oracle(y: &SignalRecord, beta: f64, min_seg_len: usize) -> Result<Segmentation> {
    validate_dp_inputs(y, beta, min_seg_len)?;
    let (cps, table) = solve_dp(&y.samples, beta, min_seg_len, false);
    Ok(finish_segmentation(cps, &table, y.len(), beta))
}

/// Single-changepoint improvement profile: for each split position
/// `tau_1`, the drop in cost relative to the unsplit record. Any penalty
/// at or above the profile maximum makes the null segmentation optimal.
pub fn penalty_profile(y: &SignalRecord) -> Result<PenaltyProfile> {
    let n = y.len();
    if n < 2 {
        return Err(Error::ShortRecord { len: n, min: 2 });
    }
    let table = CostTable::new(&y.samples);
    let null_cost = table.cost(0, n);
    let mut profile = Vec::with_capacity(n - 1);
    let mut sum = 0.0;
    let mut max = f64::MIN;
    for tau in 1..n {
        let b = (null_cost - table.cost(0, tau) - table.cost(tau, n)).max(0.0);
        sum += b;
        max = max.max(b);
        profile.push(b);
    }
    Ok(PenaltyProfile {
        beta_max: max,
        beta_mean: sum / profile.len() as f64,
        beta_of_tau1: profile,
    })
}

/// Pick the working penalty from a profile. Degenerate profiles (constant
/// records) carry no scale and are reported as an error; callers treat
/// that case as "no changepoints".
pub fn choose_beta(profile: &PenaltyProfile, strategy: BetaStrategy) -> Result<f64> {
    if !(profile.beta_max > 0.0) {
        return Err(Error::NoPenaltyScale);
    }
    Ok(match strategy {
        BetaStrategy::MeanProfile => profile.beta_mean,
        BetaStrategy::HalfMax => 0.5 * profile.beta_max,
    })
}

/// Result of the iterative baseline search, with the instrumentation the
/// benchmark needs.
#[derive(Debug, Clone)]
pub struct CropsOutcome {
    pub segmentation: Segmentation,
    /// Number of internal [`pelt`] invocations performed.
    pub pelt_calls: usize,
}

/// Minimum segment length used by the solver itself; the domain-level
/// minimum is enforced by the callers.
pub const SOLVER_MIN_SEG_LEN: usize = 2;

/// Baseline penalty search: explore `[beta_low, beta_max]` with repeated
/// solver calls (interior penalties from cost differences between known
/// solutions) until the segmentation with the most changepoints not
/// exceeding `max_num_changes` is found; an outer pass lowers the allowed
/// count and reruns whenever a produced segment is shorter than
/// `min_seg_len`.
pub fn crops_max_changes(
    y: &SignalRecord,
    max_num_changes: usize,
    min_seg_len: usize,
) -> Result<CropsOutcome> {
    assert!(max_num_changes >= 1, "max_num_changes must be >= 1");
    let n = y.len();
    let profile = penalty_profile(y)?;
    let mut calls = 0usize;
    let mut limit = max_num_changes;
    loop {
        let seg = crops_search(y, limit, &profile, &mut calls)?;
        let done = seg.num_changepoints() == 0 || seg.min_segment_len(n) >= min_seg_len;
        if done {
            return Ok(CropsOutcome {
                segmentation: seg,
                pelt_calls: calls,
            });
        }
        if limit == 1 {
            // Even a single split violates the segment floor: no usable
            // changepoints.
            let null = pelt(y, (2.0 * profile.beta_max).max(1.0), SOLVER_MIN_SEG_LEN)?;
            calls += 1;
            return Ok(CropsOutcome {
                segmentation: null,
                pelt_calls: calls,
            });
        }
        // Retry with the allowance reduced below what was just found.
        limit = (seg.num_changepoints() - 1).min(limit - 1).max(1);
    }
}

/// One penalty-range exploration: returns the known solution with the
/// largest changepoint count not exceeding `limit`.
fn crops_search(
    y: &SignalRecord,
    limit: usize,
    profile: &PenaltyProfile,
    calls: &mut usize,
) -> Result<Segmentation> {
    let mut beta_hi = profile.beta_max.max(1e-12);
    let beta_lo = (beta_hi * 1e-6).max(1e-300);
    let mut run = |beta: f64| -> Result<Segmentation> {
        *calls += 1;
        pelt(y, beta, SOLVER_MIN_SEG_LEN)
    };
    let lo = run(beta_lo)?;
    let mut hi = run(beta_hi)?;
    // The single-split bound does not cap multi-split gains, so the count
    // at beta_max can still exceed the allowance; widen until feasible.
    while hi.num_changepoints() > limit {
        beta_hi *= 4.0;
        hi = run(beta_hi)?;
    }
    let mut best: Option<Segmentation> = None;
    let consider = |seg: &Segmentation, best: &mut Option<Segmentation>| {
        if seg.num_changepoints() <= limit
            && best
                .as_ref()
                .is_none_or(|b| seg.num_changepoints() > b.num_changepoints())
        {
            *best = Some(seg.clone());
        }
    };
    consider(&lo, &mut best);
    consider(&hi, &mut best);
    let mut stack = vec![((beta_lo, lo), (beta_hi, hi))];
    while let Some(((b0, s0), (b1, s1))) = stack.pop() {
        let (m0, m1) = (s0.num_changepoints(), s1.num_changepoints());
        if best.as_ref().map(|b| b.num_changepoints()) == Some(limit) {
            break; // cannot do better than the allowance itself
        }
        if m0 <= m1 + 1 {
            continue; // no intermediate count can exist
        }
        // Skip ranges that cannot reveal a better feasible count.
        let best_m = best.as_ref().map_or(0, |b| b.num_changepoints());
        if m1 >= limit || m0 <= best_m {
            continue;
        }
        // Interior penalty at which the two known solutions cost the same.
        let beta_star = (s1.total_cost - s0.total_cost) / (m0 - m1) as f64;
        if !(beta_star > b0 && beta_star < b1) {
            continue;
        }
        let s_star = run(beta_star)?;
        let m_star = s_star.num_changepoints();
        consider(&s_star, &mut best);
        if m_star != m0 && m_star != m1 {
            stack.push(((b0, s0.clone()), (beta_star, s_star.clone())));
            stack.push(((beta_star, s_star), (b1, s1)));
        }
    }
    Ok(best.expect("penalty search retains at least the endpoint solutions"))
}
