//! Construction of `(N, K, M)` rate-compatible polar codes.
//!
//! The mother code of length `N0 = 2^ceil(log2 M)` is punctured down to `M`
//! polar bits, its channels are ranked by GA density evolution, and the
//! `N - M` repetition bits are assigned greedily: each one goes to the
//! information channel whose error probability is currently the largest, and
//! that channel's LLR mean grows by the channel mean (a Gaussian convolution).
//! The block error rate estimate is the sum of the final per-channel error
//! probabilities over the information set, clipped to 1.

use crate::codec::{PolarCodeSpec, RcpCode};
use crate::error::{domain, Result};
use crate::reliability::{
    ga_evolve_counted, mother_channel_means, mother_length, select_info_set, LlrDistribution,
    PunctureStrategy, QuasiUniform, ReliabilityTable,
};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

/// Repetition mapping and the per-channel densities it produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RepetitionPlan<T> {
    /// `r_k`: information channel copied by the `k`-th repetition bit.
    pub r: Vec<usize>,
    /// Information set the plan refers to, ascending.
    pub info_set: Vec<usize>,
    /// Updated densities, aligned with `info_set`.
    pub means: Vec<LlrDistribution<T>>,
    /// Error probabilities, aligned with `info_set`.
    pub pe: Vec<T>,
}

/// Union-bound block error rate estimate, in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct BlerEstimate<T> {
    pub value: T,
}

/// Incremental form of the greedy repetition assignment.
///
/// A segment tree over the information set keeps the error probability sum
/// and the least reliable channel, so each added repetition costs `O(log K)`
/// and the sum never accumulates cancellation error.
#[derive(Debug, Clone)]
pub struct RepetitionTracker<T> {
    info_set: Vec<usize>,
    means: Vec<T>,
    pe: Vec<T>,
    channel: LlrDistribution<T>,
    width: usize,
    sum: Vec<T>,
    worst: Vec<usize>,
    r: Vec<usize>,
    convolutions: u64,
}

const NONE: usize = usize::MAX;

impl<T: Real> RepetitionTracker<T> {
    /// Starts from the mother-code table restricted to `info_set`.
    pub fn new(info_set: &[usize], table: &ReliabilityTable<T>, channel: LlrDistribution<T>) -> Result<Self> {
        if let Some(&i) = info_set.iter().find(|&&i| i >= table.len()) {
            return domain(format!("information index {i} outside table of {}", table.len()));
        }
        let k = info_set.len();
        let width = k.next_power_of_two().max(1);
        let mut tracker = Self {
            info_set: info_set.to_vec(),
            means: info_set.iter().map(|&i| table.means[i].mean()).collect(),
            pe: info_set.iter().map(|&i| table.pe[i]).collect(),
            channel,
            width,
            sum: vec![T::zero(); 2 * width],
            worst: vec![NONE; 2 * width],
            r: Vec::new(),
            convolutions: 0,
        };
        for pos in 0..k {
            tracker.sum[width + pos] = tracker.pe[pos];
            tracker.worst[width + pos] = pos;
        }
        for node in (1..width).rev() {
            tracker.pull(node);
        }
        Ok(tracker)
    }

    fn less_reliable(&self, a: usize, b: usize) -> usize {
        match (a, b) {
            (NONE, _) => b,
            (_, NONE) => a,
            _ => match self.means[a].partial_cmp(&self.means[b]).unwrap_or(Ordering::Equal) {
                Ordering::Less => a,
                Ordering::Greater => b,
                Ordering::Equal => a.min(b),
            },
        }
    }

    fn pull(&mut self, node: usize) {
        let (l, r) = (2 * node, 2 * node + 1);
        self.sum[node] = self.sum[l] + self.sum[r];
        self.worst[node] = self.less_reliable(self.worst[l], self.worst[r]);
    }

    /// Position in `info_set` of the channel with the largest error probability.
    pub fn worst_position(&self) -> Option<usize> {
        match self.worst[1.min(self.worst.len() - 1)] {
            NONE => None,
            p => Some(p),
        }
    }

    /// Adds one repetition bit; returns the channel index it copies.
    pub fn step(&mut self) -> Result<usize> {
        let Some(pos) = self.worst_position() else {
            return domain("no information channel to repeat");
        };
        let updated = LlrDistribution::new_unchecked(self.means[pos]).convolve(&self.channel);
        self.means[pos] = updated.mean();
        self.pe[pos] = updated.pe();
        self.convolutions += 1;
        let mut node = self.width + pos;
        self.sum[node] = self.pe[pos];
        while node > 1 {
            node /= 2;
            self.pull(node);
        }
        let idx = self.info_set[pos];
        self.r.push(idx);
        Ok(idx)
    }

    /// `sum_{i in A} pe_i`, not clipped.
    pub fn pe_sum(&self) -> T {
        if self.info_set.is_empty() {
            T::zero()
        } else {
            self.sum[1]
        }
    }

    pub fn bler(&self) -> BlerEstimate<T> {
        BlerEstimate {
            value: self.pe_sum().min(T::one()),
        }
    }

    pub fn repetitions(&self) -> &[usize] {
        &self.r
    }

    pub fn convolutions(&self) -> u64 {
        self.convolutions
    }

    pub fn into_plan(self) -> RepetitionPlan<T> {
        RepetitionPlan {
            r: self.r,
            info_set: self.info_set,
            means: self.means.into_iter().map(LlrDistribution::new_unchecked).collect(),
            pe: self.pe,
        }
    }
}

/// Greedy assignment of `n_minus_m` repetition bits to the channels of `info_set`.
pub fn build_repetition_plan<T: Real>(
    info_set: &[usize],
    table: &ReliabilityTable<T>,
    n_minus_m: usize,
    channel: LlrDistribution<T>,
) -> Result<RepetitionPlan<T>> {
    if info_set.is_empty() && n_minus_m > 0 {
        return domain("cannot place repetitions on an empty information set");
    }
    let mut tracker = RepetitionTracker::new(info_set, table, channel)?;
    for _ in 0..n_minus_m {
        tracker.step()?;
    }
    Ok(tracker.into_plan())
}

/// `min(1, sum of the plan's error probabilities)`.
pub fn evaluate_bler<T: Real>(code: &RcpCode, plan: &RepetitionPlan<T>) -> Result<BlerEstimate<T>> {
    if plan.info_set != code.spec().info_set() || plan.r != code.rep_vector() {
        return domain("repetition plan does not belong to this code");
    }
    let sum: T = plan.pe.iter().copied().sum();
    Ok(BlerEstimate {
        value: sum.min(T::one()),
    })
}

/// Result of [`construct_rcp`].
#[derive(Debug, Clone)]
pub struct RcpConstruction<T> {
    pub code: RcpCode,
    pub plan: RepetitionPlan<T>,
    pub bler: BlerEstimate<T>,
    /// GA table of the punctured mother code, before repetitions.
    pub table: ReliabilityTable<T>,
}

/// Punctured mother code for `(k, m)`: spec plus its reliability table.
pub fn punctured_mother<T: Real>(
    k: usize,
    m: usize,
    channel: &LlrDistribution<T>,
    strategy: &dyn PunctureStrategy,
    ops: &mut u64,
) -> Result<(PolarCodeSpec, ReliabilityTable<T>)> {
    if m == 0 || k > m {
        return domain(format!("need 1 <= M and K <= M, got K = {k}, M = {m}"));
    }
    let n0 = mother_length(m);
    let punctures = strategy.positions(n0, m)?;
    let means = mother_channel_means(n0, &punctures, channel);
    let table = ga_evolve_counted(&means, ops)?;
    let info = select_info_set(&table, k)?;
    let spec = PolarCodeSpec::new(n0, info, punctures)?;
    Ok((spec, table))
}

/// Builds an `(n, k, m)` RCP code with quasi-uniform puncturing.
pub fn construct_rcp<T: Real>(n: usize, k: usize, m: usize, channel: LlrDistribution<T>) -> Result<RcpConstruction<T>> {
    construct_rcp_with(n, k, m, channel, &QuasiUniform)
}

pub fn construct_rcp_with<T: Real>(
    n: usize,
    k: usize,
    m: usize,
    channel: LlrDistribution<T>,
    strategy: &dyn PunctureStrategy,
) -> Result<RcpConstruction<T>> {
    if !(k <= m && m <= n) {
        return domain(format!("need K <= M <= N, got ({n}, {k}, {m})"));
    }
    let mut ops = 0;
    let (spec, table) = punctured_mother(k, m, &channel, strategy, &mut ops)?;
    let plan = build_repetition_plan(spec.info_set(), &table, n - m, channel)?;
    let code = RcpCode::new(spec, n, plan.r.clone())?;
    let bler = evaluate_bler(&code, &plan)?;
    Ok(RcpConstruction { code, plan, bler, table })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reliability::pe_of;

    fn table_of(means: &[f64]) -> ReliabilityTable<f64> {
        ReliabilityTable::from_means(means.iter().map(|&m| LlrDistribution::new(m).unwrap()).collect())
    }

    #[test]
    fn zero_and_one_repetitions() {
        let t = table_of(&[3.0, 1.0, 2.0, 5.0]);
        let ch = LlrDistribution::new(2.0).unwrap();
        let p = build_repetition_plan(&[0, 1, 2], &t, 0, ch).unwrap();
        assert!(p.r.is_empty());
        assert_eq!(p.means[1].mean(), 1.0);
        let p = build_repetition_plan(&[0, 1, 2], &t, 1, ch).unwrap();
        assert_eq!(p.r, vec![1]);
        assert_eq!(p.means[1].mean(), 3.0);
        assert!(build_repetition_plan(&[], &t, 1, ch).is_err());
        assert!(build_repetition_plan(&[], &t, 0, ch).is_ok());
    }

    #[test]
    fn two_step_hand_simulation() {
        // pe_a > pe_b initially; one repetition pushes a past b, so b is next.
        let (a, b) = (0usize, 1usize);
        let t = table_of(&[1.0, 4.0]);
        let ch = LlrDistribution::new(6.0).unwrap();
        let pe = |m: f64| pe_of(&LlrDistribution::new(m).unwrap());
        assert!(pe(1.0) > pe(4.0));
        assert!(pe(1.0 + 6.0) < pe(4.0));
        let p = build_repetition_plan(&[a, b], &t, 2, ch).unwrap();
        assert_eq!(p.r, vec![a, b]);
        assert!((p.pe[0] - pe(7.0)).abs() < 1e-15);
        assert!((p.pe[1] - pe(10.0)).abs() < 1e-15);
    }

    #[test]
    fn ties_go_to_the_smaller_index() {
        let t = table_of(&[2.0, 2.0, 2.0]);
        let ch = LlrDistribution::new(1.0).unwrap();
        let p = build_repetition_plan(&[0, 1, 2], &t, 4, ch).unwrap();
        assert_eq!(p.r, vec![0, 1, 2, 0]);
    }

    #[test]
    fn greedy_invariants_hold_each_step() {
        let c = construct_rcp(64, 32, 64, LlrDistribution::new(2.0f64).unwrap()).unwrap();
        let ch = LlrDistribution::new(2.0).unwrap();
        let mut tr = RepetitionTracker::new(c.code.spec().info_set(), &c.table, ch).unwrap();
        let mut prev_sum = tr.pe_sum();
        let mut prev_max = f64::INFINITY;
        for _ in 0..200 {
            let pos = tr.worst_position().unwrap();
            let max = tr.pe.iter().cloned().fold(0.0, f64::max);
            assert_eq!(tr.pe[pos], max);
            assert!(max <= prev_max);
            prev_max = max;
            tr.step().unwrap();
            assert!(tr.pe_sum() < prev_sum);
            prev_sum = tr.pe_sum();
        }
        let plan = tr.into_plan();
        for (pos, &i) in plan.info_set.iter().enumerate() {
            let count = plan.r.iter().filter(|&&r| r == i).count() as f64;
            let want = c.table.means[i].mean() + count * 2.0;
            assert!((plan.means[pos].mean() - want).abs() < 1e-9);
        }
    }

    #[test]
    fn prefix_property() {
        let ch = LlrDistribution::new(1.5f64).unwrap();
        let long = construct_rcp(100, 24, 40, ch).unwrap();
        for n in 40..100 {
            let short = construct_rcp(n, 24, 40, ch).unwrap();
            assert!(short.code.is_prefix_of(&long.code));
            assert_eq!(long.code.truncated(n).unwrap(), short.code);
        }
    }

    #[test]
    fn bler_nonincreasing_in_n() {
        let ch = LlrDistribution::new(1.0f64).unwrap();
        let mut prev = 1.0;
        for n in 48..120 {
            let b = construct_rcp(n, 32, 48, ch).unwrap().bler.value;
            assert!(b <= prev);
            prev = b;
        }
    }

    #[test]
    fn evaluate_bler_cases() {
        let spec = PolarCodeSpec::new(4, vec![1, 2, 3], vec![]).unwrap();
        let code = RcpCode::new(spec, 4, vec![]).unwrap();
        let plan = |p: f64| RepetitionPlan {
            r: vec![],
            info_set: vec![1, 2, 3],
            means: vec![LlrDistribution::new(1.0).unwrap(); 3],
            pe: vec![p; 3],
        };
        assert_eq!(evaluate_bler(&code, &plan(0.0)).unwrap().value, 0.0);
        assert!((evaluate_bler(&code, &plan(0.1)).unwrap().value - 0.3).abs() < 1e-15);
        assert_eq!(evaluate_bler(&code, &plan(0.4)).unwrap().value, 1.0);
        let mut wrong = plan(0.1);
        wrong.r = vec![1];
        assert!(evaluate_bler(&code, &wrong).is_err());
    }

    #[test]
    fn degenerate_compositions() {
        let ch = LlrDistribution::new(2.0f64).unwrap();
        let c = construct_rcp(8, 8, 8, ch).unwrap();
        let total: f64 = c.table.pe.iter().sum();
        assert!((c.bler.value - total.min(1.0)).abs() < 1e-12);
        let c = construct_rcp(12, 4, 12, ch).unwrap();
        assert!(c.code.rep_vector().is_empty());
        assert_eq!(c.code.n0(), 16);
        assert_eq!(c.code.spec().puncture_set().len(), 4);
        assert!(construct_rcp(8, 9, 8, ch).is_err());
        assert!(construct_rcp(7, 4, 8, ch).is_err());
    }
}
