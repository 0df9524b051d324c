//! Greedy design of an HARQ scheme built from nested RCP codes.
//!
//! For every polar-bit count `m` in `K..=Q` the BLER curve `e[n]`,
//! `n = m..=Q`, is built incrementally (one extra repetition per step). A
//! greedy search then adds one cumulative length per transmission round,
//! keeping whichever addition maximizes the approximate throughput
//!
//! ```text
//! eta = K (1 - e[N_T]) / (sum_t N_t (e[N_{t-1}] - e[N_t]) + N_T e[N_T]),   e[N_0] = 1.
//! ```
//!
//! The best `(m, lengths)` over all `m` is returned as `s = (m, N_1, .., N_T)`.
//! A round with no improving addition adds nothing, so fewer than `T`
//! lengths may come back. Ties prefer the lexicographically smaller length
//! vector, then the smaller `m`.

use crate::error::{domain, Error, Result};
use crate::rcp::{punctured_mother, RepetitionTracker};
use crate::reliability::{mother_length, LlrDistribution, PunctureStrategy, QuasiUniform};
use crate::scalar::Real;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::io::Write;

/// Smallest BLER value kept in a curve.
pub const BLER_FLOOR: f64 = 1e-15;

/// Union-bound BLER of the `(n, K, m)` codes for `n = m..=q`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlerCurve<T> {
    m: usize,
    e: Vec<T>,
}

impl<T: Real> BlerCurve<T> {
    /// Builds the curve incrementally, adding `q - m` convolutions to `ops`
    /// (plus the GA updates of the mother code).
    pub fn build(
        k: usize,
        m: usize,
        q: usize,
        channel: &LlrDistribution<T>,
        strategy: &dyn PunctureStrategy,
        ops: &mut u64,
    ) -> Result<Self> {
        if m > q {
            return domain(format!("m = {m} exceeds q = {q}"));
        }
        let (spec, table) = punctured_mother(k, m, channel, strategy, ops)?;
        let mut tracker = RepetitionTracker::new(spec.info_set(), &table, *channel)?;
        let floor = T::lit(BLER_FLOOR);
        let mut e = Vec::with_capacity(q - m + 1);
        e.push(tracker.bler().value.max(floor));
        for _ in m..q {
            if k == 0 {
                e.push(floor);
                continue;
            }
            tracker.step()?;
            e.push(tracker.bler().value.max(floor));
        }
        *ops += tracker.convolutions();
        Ok(Self { m, e })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn q(&self) -> usize {
        self.m + self.e.len() - 1
    }

    /// `P_B(n, K, m)`; `n = 0` is the state before any transmission and gives 1.
    pub fn at(&self, n: usize) -> T {
        if n == 0 {
            T::one()
        } else {
            self.e[n - self.m]
        }
    }

    pub fn values(&self) -> &[T] {
        &self.e
    }

    /// Writes `n,bler` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "n,bler")?;
        for (j, v) in self.e.iter().enumerate() {
            writeln!(w, "{},{:e}", self.m + j, v.as_f64())?;
        }
        Ok(())
    }
}

/// Transmission scheme `s = (M, N_1, .., N_T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarqScheme {
    pub k: usize,
    pub s: Vec<usize>,
    pub eta_estimate: f64,
}

impl HarqScheme {
    pub fn m(&self) -> usize {
        self.s[0]
    }

    /// Cumulative lengths `N_1 < .. < N_T`.
    pub fn lengths(&self) -> &[usize] {
        &self.s[1..]
    }

    pub fn transmissions(&self) -> usize {
        self.s.len() - 1
    }

    /// Checks the ordering constraints of the scheme vector against `q`.
    pub fn validate(&self, q: usize) -> Result<()> {
        let lens = self.lengths();
        if lens.is_empty() {
            return domain("scheme has no transmissions");
        }
        if !(self.k <= self.m() && self.m() <= lens[0]) {
            return domain(format!("need K <= M <= N_1, got s = {:?}", self.s));
        }
        if !lens.windows(2).all(|w| w[0] < w[1]) || *lens.last().unwrap() > q {
            return domain(format!("lengths must increase up to q = {q}, got {lens:?}"));
        }
        Ok(())
    }
}

/// Approximate throughput of a scheme from its per-round BLERs.
pub fn throughput_estimate<T: Real>(k: usize, lengths: &[usize], blers: &[T]) -> Result<T> {
    if lengths.is_empty() || lengths.len() != blers.len() {
        return Err(Error::Length {
            expected: lengths.len().max(1),
            actual: blers.len(),
        });
    }
    if !lengths.windows(2).all(|w| w[0] < w[1]) || lengths[0] == 0 {
        return domain(format!("lengths must be positive and increasing: {lengths:?}"));
    }
    if blers.iter().any(|&b| !(b >= T::zero() && b <= T::one())) {
        return domain("BLERs must lie in [0, 1]");
    }
    if !blers.windows(2).all(|w| w[1] <= w[0]) {
        return domain("BLERs must be nonincreasing in t");
    }
    Ok(eta_unchecked(k, lengths.iter().copied(), |t| blers[t]))
}

/// Approximate throughput over lengths yielded in increasing order; `bler(t)` is the BLER after round `t`.
fn eta_unchecked<T: Real>(k: usize, lengths: impl Iterator<Item = usize>, bler: impl Fn(usize) -> T) -> T {
    let mut prev = T::one();
    let mut denom = T::zero();
    let mut last_len = 0;
    for (t, n) in lengths.enumerate() {
        let e = bler(t);
        denom += T::lit(n as f64) * (prev - e);
        prev = e;
        last_len = n;
    }
    denom += T::lit(last_len as f64) * prev;
    T::lit(k as f64) * (T::one() - prev) / denom
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DesignOptions {
    /// Pin the first cumulative length to `M` (the first transmission carries exactly the polar bits).
    pub first_length_is_m: bool,
}

/// Output of [`design_scheme`].
#[derive(Debug, Clone)]
pub struct Design<T> {
    pub scheme: HarqScheme,
    /// BLER curve of the chosen `M`.
    pub curve: BlerCurve<T>,
    /// GA node updates plus repetition convolutions spent in the search.
    pub convolutions: u64,
}

struct Candidate<T> {
    m: usize,
    lengths: Vec<usize>,
    eta: T,
}

fn better<T: Real>(a: &Candidate<T>, b: &Candidate<T>) -> bool {
    match a.eta.partial_cmp(&b.eta).unwrap_or(Ordering::Equal) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => (&a.lengths, a.m) < (&b.lengths, b.m),
    }
}

fn greedy_rounds<T: Real>(k: usize, t_max: usize, curve: &BlerCurve<T>, opts: DesignOptions) -> Candidate<T> {
    let (m, q) = (curve.m(), curve.q());
    let mut chosen: Vec<usize> = Vec::with_capacity(t_max);
    let mut eta = T::zero();
    let mut rounds = 1..=t_max;
    if opts.first_length_is_m {
        rounds.next();
        chosen.push(m);
        eta = eta_unchecked(k, chosen.iter().copied(), |t| curve.at(chosen[t]));
    }
    let mut trial = Vec::with_capacity(t_max);
    for _ in rounds {
        let mut pick = None;
        for n in m..=q {
            let pos = match chosen.binary_search(&n) {
                Ok(_) => continue,
                Err(pos) => pos,
            };
            trial.clear();
            trial.extend_from_slice(&chosen[..pos]);
            trial.push(n);
            trial.extend_from_slice(&chosen[pos..]);
            let rho = eta_unchecked(k, trial.iter().copied(), |t| curve.at(trial[t]));
            if rho > eta {
                eta = rho;
                pick = Some((n, pos));
            }
        }
        if let Some((n, pos)) = pick {
            chosen.insert(pos, n);
        }
    }
    Candidate { m, lengths: chosen, eta }
}


fn check_bounds(k: usize, t_max: usize, q: usize) -> Result<()> {
    if k == 0 || t_max == 0 || k > q {
        return Err(Error::Infeasible(format!("need 1 <= K <= Q and T >= 1, got K = {k}, T = {t_max}, Q = {q}")));
    }
    Ok(())
}

/// Greedy HARQ design with quasi-uniform puncturing.
pub fn design_scheme<T: Real>(
    k: usize,
    t_max: usize,
    q: usize,
    channel: LlrDistribution<T>,
    opts: DesignOptions,
) -> Result<Design<T>> {
    design_scheme_with(k, t_max, q, channel, opts, &QuasiUniform)
}

pub fn design_scheme_with<T: Real>(
    k: usize,
    t_max: usize,
    q: usize,
    channel: LlrDistribution<T>,
    opts: DesignOptions,
    strategy: &(dyn PunctureStrategy + Sync),
) -> Result<Design<T>> {
    check_bounds(k, t_max, q)?;
    let per_m: Vec<Result<(Candidate<T>, u64)>> = (k..=q)
        .into_par_iter()
        .map(|m| {
            let mut ops = 0;
            let curve = BlerCurve::build(k, m, q, &channel, strategy, &mut ops)?;
            Ok((greedy_rounds(k, t_max, &curve, opts), ops))
        })
        .collect();
    let mut best: Option<Candidate<T>> = None;
    let mut convolutions = 0;
    for r in per_m {
        let (cand, ops) = r?;
        convolutions += ops;
        if cand.eta > T::zero() && best.as_ref().is_none_or(|b| better(&cand, b)) {
            best = Some(cand);
        }
    }
    let Some(best) = best else {
        return Err(Error::Infeasible(format!("no scheme with positive throughput for K = {k}, Q = {q}")));
    };
    let curve = BlerCurve::build(k, best.m, q, &channel, strategy, &mut 0)?;
    let mut s = vec![best.m];
    s.extend(&best.lengths);
    Ok(Design {
        scheme: HarqScheme {
            k,
            s,
            eta_estimate: best.eta.as_f64(),
        },
        curve,
        convolutions,
    })
}

/// Operation counts of one design run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostProfile {
    pub k: usize,
    pub q: usize,
    /// Counted GA updates plus repetition convolutions.
    pub measured: u64,
    /// `sum_{m=K..Q} (mbar log2 mbar + Q - m)`, `mbar = 2^ceil(log2 m)`.
    pub closed_form: u64,
}

pub fn closed_form_convolutions(k: usize, q: usize) -> u64 {
    (k..=q)
        .map(|m| {
            let mbar = mother_length(m);
            (mbar * mbar.trailing_zeros() as usize + q - m) as u64
        })
        .sum()
}

/// Builds every BLER curve of a `(K, Q)` search and reports the operation count.
pub fn scheme_cost_profile(k: usize, q: usize) -> Result<CostProfile> {
    check_bounds(k, 1, q)?;
    let channel = LlrDistribution::new(2.0f64)?;
    let mut measured = 0;
    for m in k..=q {
        BlerCurve::build(k, m, q, &channel, &QuasiUniform, &mut measured)?;
    }
    Ok(CostProfile {
        k,
        q,
        measured,
        closed_form: closed_form_convolutions(k, q),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rcp::construct_rcp;

    /// `N_1 + sum_t (N_{t+1} - N_t) e_t` over `K (1 - e_T)`, the same quantity after summation by parts.
    fn eta_by_parts(k: usize, lengths: &[usize], blers: &[f64]) -> f64 {
        let mut denom = lengths[0] as f64;
        for t in 0..lengths.len() - 1 {
            denom += (lengths[t + 1] - lengths[t]) as f64 * blers[t];
        }
        k as f64 * (1.0 - blers[blers.len() - 1]) / denom
    }

    #[test]
    fn throughput_examples() {
        let eta = throughput_estimate(1024, &[1100, 1200], &[0.5, 0.1]).unwrap();
        assert!((eta - 921.6 / 1150.0f64).abs() < 1e-12);
        assert!((eta_by_parts(1024, &[1100, 1200], &[0.5, 0.1]) - eta).abs() < 1e-12);
        assert!((eta - 0.8014).abs() < 1e-4);
        let one: f64 = throughput_estimate(100, &[150], &[0.2]).unwrap();
        assert!((one - 100.0 * 0.8 / 150.0).abs() < 1e-12);
        let zero: f64 = throughput_estimate(100, &[150, 170, 190], &[0.0, 0.0, 0.0]).unwrap();
        assert!((zero - 100.0 / 150.0).abs() < 1e-12);
        assert!(throughput_estimate(10, &[12, 11], &[0.5, 0.1]).is_err());
        assert!(throughput_estimate(10, &[11, 12], &[0.1, 0.5]).is_err());
        assert!(throughput_estimate(10, &[11, 12], &[0.1]).is_err());
    }

    #[test]
    fn curve_matches_direct_construction() {
        let ch = LlrDistribution::new(2.0f64).unwrap();
        let curve = BlerCurve::build(8, 12, 20, &ch, &QuasiUniform, &mut 0).unwrap();
        assert_eq!(curve.at(0), 1.0);
        for n in 12..=20 {
            let direct = construct_rcp(n, 8, 12, ch).unwrap().bler.value.max(BLER_FLOOR);
            assert!((curve.at(n) - direct).abs() <= 1e-15 * direct.max(1e-300));
        }
        assert!(curve.values().windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn single_candidate() {
        let ch = LlrDistribution::new(4.0f64).unwrap();
        let d = design_scheme(8, 1, 8, ch, DesignOptions::default()).unwrap();
        assert_eq!(d.scheme.s, vec![8, 8]);
        d.scheme.validate(8).unwrap();
    }

    #[test]
    fn infeasible_bounds() {
        let ch = LlrDistribution::new(2.0f64).unwrap();
        assert!(design_scheme(8, 1, 7, ch, DesignOptions::default()).is_err());
        assert!(design_scheme(8, 0, 16, ch, DesignOptions::default()).is_err());
        // A dead channel never yields positive throughput.
        let dead = LlrDistribution::new(0.0f64).unwrap();
        assert!(matches!(
            design_scheme(4, 2, 8, dead, DesignOptions::default()),
            Err(Error::Infeasible(_))
        ));
    }

    fn curves(k: usize, q: usize, ch: LlrDistribution<f64>) -> Vec<Vec<f64>> {
        // e[m][n] through independent full constructions.
        (0..=q)
            .map(|m| {
                if m < k {
                    return vec![];
                }
                (0..=q)
                    .map(|n| if n < m { f64::NAN } else { construct_rcp(n, k, m, ch).unwrap().bler.value.max(BLER_FLOOR) })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn single_transmission_matches_exhaustive_search() {
        let (k, q) = (8, 16);
        let ch = LlrDistribution::new(2.0f64).unwrap();
        let e = curves(k, q, ch);
        let mut best = (0.0, vec![0usize], 0usize);
        for m in k..=q {
            for n in m..=q {
                let eta = k as f64 * (1.0 - e[m][n]) / n as f64;
                let cand = (eta, vec![n], m);
                if eta > best.0 || (eta == best.0 && (&cand.1, cand.2) < (&best.1, best.2)) {
                    best = cand;
                }
            }
        }
        let d = design_scheme(k, 1, q, ch, DesignOptions::default()).unwrap();
        assert_eq!(d.scheme.s, vec![best.2, best.1[0]]);
        assert!((d.scheme.eta_estimate - best.0).abs() < 1e-12);
    }

    #[test]
    fn two_transmissions_are_greedy_consistent() {
        let (k, q) = (8, 20);
        let ch = LlrDistribution::new(2.0f64).unwrap();
        let e = curves(k, q, ch);
        let eta_of = |m: usize, lens: &[usize]| {
            let b: Vec<f64> = lens.iter().map(|&n| e[m][n]).collect();
            throughput_estimate(k, lens, &b).unwrap()
        };
        let mut oracle = 0.0f64;
        for m in k..=q {
            // round-1 pick for this m (smallest n on ties)
            let mut n1 = m;
            for n in m..=q {
                if eta_of(m, &[n]) > eta_of(m, &[n1]) {
                    n1 = n;
                }
            }
            oracle = oracle.max(eta_of(m, &[n1]));
            for n2 in m..=q {
                if n2 != n1 {
                    let mut lens = vec![n1, n2];
                    lens.sort();
                    oracle = oracle.max(eta_of(m, &lens));
                }
            }
        }
        let d = design_scheme(k, 2, q, ch, DesignOptions::default()).unwrap();
        d.scheme.validate(q).unwrap();
        assert!(d.scheme.eta_estimate >= oracle - 1e-12, "{} < {oracle}", d.scheme.eta_estimate);
        let recomputed = eta_of(d.scheme.m(), d.scheme.lengths());
        assert!((recomputed - d.scheme.eta_estimate).abs() < 1e-12);
        let single = design_scheme(k, 1, q, ch, DesignOptions::default()).unwrap();
        assert!(d.scheme.eta_estimate >= single.scheme.eta_estimate);
        for n in d.scheme.m()..=q {
            assert!(d.scheme.eta_estimate >= eta_of(d.scheme.m(), &[n]) - 1e-15);
        }
    }

    #[test]
    fn rounds_never_lower_throughput_and_are_deterministic() {
        let ch = LlrDistribution::new(1.2f64).unwrap();
        let mut prev = 0.0;
        for t in 1..=4 {
            let a = design_scheme(16, t, 48, ch, DesignOptions::default()).unwrap();
            let b = design_scheme(16, t, 48, ch, DesignOptions::default()).unwrap();
            assert_eq!(a.scheme, b.scheme);
            assert!(a.scheme.eta_estimate >= prev);
            assert!(a.scheme.eta_estimate <= 16.0 / a.scheme.lengths()[0] as f64);
            a.scheme.validate(48).unwrap();
            prev = a.scheme.eta_estimate;
        }
    }

    #[test]
    fn forced_first_length() {
        let ch = LlrDistribution::new(1.2f64).unwrap();
        let d = design_scheme(16, 3, 48, ch, DesignOptions { first_length_is_m: true }).unwrap();
        assert_eq!(d.scheme.lengths()[0], d.scheme.m());
        d.scheme.validate(48).unwrap();
    }

    #[test]
    fn cost_counts_match_closed_form() {
        let ch = LlrDistribution::new(2.0f64).unwrap();
        let d = design_scheme(12, 2, 40, ch, DesignOptions::default()).unwrap();
        assert_eq!(d.convolutions, closed_form_convolutions(12, 40));
        let p = scheme_cost_profile(8, 8).unwrap();
        assert_eq!(p.measured, 8 * 3);
        for (k, q) in [(8, 16), (12, 40), (32, 64)] {
            let p = scheme_cost_profile(k, q).unwrap();
            assert_eq!(p.measured, p.closed_form);
        }
    }

    #[test]
    fn curve_csv() {
        let ch = LlrDistribution::new(2.0f64).unwrap();
        let curve = BlerCurve::build(4, 6, 9, &ch, &QuasiUniform, &mut 0).unwrap();
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().count(), 5);
        assert!(s.lines().nth(1).unwrap().starts_with("6,"));
    }
}
