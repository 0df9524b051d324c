//! Gaussian-approximation density evolution for (punctured) polar codes.
//!
//! Each channel is summarized by the mean `m` of its LLR under the all-zero
//! input; the LLR is modelled as `Normal(m, 2m)` and its error probability is
//! `Q(sqrt(m / 2))`. The polar transform is tracked with the usual GA rules:
//! the check-type child gets `phi^-1(1 - (1 - phi(a))(1 - phi(b)))` and the
//! variable-type child gets `a + b`.

use crate::error::{domain, Error, Result};
use crate::scalar::Real;
use crate::special::{ln_q_function, q_function};
use std::io::Write;

/// Piecewise boundary of the GA `phi` approximation.
const PHI_SPLIT: f64 = 10.0;
const PHI_ALPHA: f64 = -0.4527;
const PHI_GAMMA: f64 = 0.86;
const PHI_BETA: f64 = 0.0218;

/// One-parameter Gaussian LLR density. `mean == 0` is a zero-capacity channel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LlrDistribution<T> {
    mean: T,
}

impl<T: Real> LlrDistribution<T> {
    pub fn new(mean: T) -> Result<Self> {
        if mean.is_nan() || mean < T::zero() {
            return domain(format!("LLR mean must be >= 0, got {mean}"));
        }
        Ok(Self { mean })
    }

    pub(crate) fn new_unchecked(mean: T) -> Self {
        Self { mean }
    }

    pub fn erasure() -> Self {
        Self { mean: T::zero() }
    }

    pub fn mean(&self) -> T {
        self.mean
    }

    /// The GA consistency condition fixes the variance at twice the mean.
    pub fn variance(&self) -> T {
        self.mean + self.mean
    }

    /// Density of two independent observations of the same bit (means add).
    pub fn convolve(&self, other: &Self) -> Self {
        Self {
            mean: self.mean + other.mean,
        }
    }

    pub fn pe(&self) -> T {
        pe_of(self)
    }

    pub fn ln_pe(&self) -> f64 {
        ln_q_function((self.mean.as_f64() / 2.0).sqrt())
    }
}

/// `P(LLR < 0) = Q(sqrt(m / 2))`.
pub fn pe_of<T: Real>(dist: &LlrDistribution<T>) -> T {
    let m = dist.mean.as_f64();
    if m == 0.0 {
        return T::lit(0.5);
    }
    T::lit(q_function((m / 2.0).sqrt()))
}

/// Error probability of a raw mean, rejecting negative input.
pub fn pe_of_mean<T: Real>(mean: T) -> Result<T> {
    LlrDistribution::new(mean).map(|d| d.pe())
}

fn ln_phi_head<T: Real>(x: T) -> T {
    T::lit(PHI_ALPHA) * x.powf(T::lit(PHI_GAMMA)) + T::lit(PHI_BETA)
}

/// `ln phi(x)` for the two-piece GA approximation.
///
/// Clipped at 0 near the origin and at the lower piece's value at the split,
/// so that `phi` maps `[0, inf)` nonincreasingly into `[0, 1]`.
pub fn ln_phi<T: Real>(x: T) -> T {
    if x <= T::zero() {
        return T::zero();
    }
    let split = T::lit(PHI_SPLIT);
    if x < split {
        ln_phi_head(x).min(T::zero())
    } else {
        ln_phi_tail(x).min(ln_phi_head(split))
    }
}

pub fn phi<T: Real>(x: T) -> T {
    ln_phi(x).exp()
}

fn ln_phi_tail<T: Real>(x: T) -> T {
    T::lit(0.5) * (T::PI() / x).ln() - x / T::lit(4.0)
        + (T::one() - T::lit(10.0) / (T::lit(7.0) * x)).ln()
}

fn ln_phi_tail_slope<T: Real>(x: T) -> T {
    let q = T::lit(10.0) / (T::lit(7.0) * x);
    -T::lit(0.5) / x - T::lit(0.25) + (q / x) / (T::one() - q)
}

/// Inverse of `phi` given `ln y`. Returns 0 when `y >= 1`.
///
/// The lower piece is inverted in closed form; the upper piece by a bracketed
/// bisection with Newton acceleration.
pub fn phi_inv_ln<T: Real>(ln_y: T) -> T {
    if ln_y >= T::zero() {
        return T::zero();
    }
    let split = T::lit(PHI_SPLIT);
    if ln_y > ln_phi_head(split) {
        let base = (T::lit(PHI_BETA) - ln_y) / -T::lit(PHI_ALPHA);
        return base.powf(T::one() / T::lit(PHI_GAMMA));
    }
    let tol = T::epsilon() * T::lit(16.0);
    let mut lo = split;
    let mut hi = split + split;
    while ln_phi_tail(hi) > ln_y {
        lo = hi;
        hi = hi + hi;
    }
    // For large arguments ln phi ~ -x/4, a good starting point.
    let mut x = (T::lit(-4.0) * ln_y).max(lo).min(hi);
    for _ in 0..200 {
        let r = ln_phi_tail(x) - ln_y;
        if r.abs() <= tol * ln_y.abs() {
            return x;
        }
        if r > T::zero() {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= tol * hi {
            break;
        }
        let step = x - r / ln_phi_tail_slope(x);
        x = if step > lo && step < hi {
            step
        } else {
            (lo + hi) / T::lit(2.0)
        };
    }
    x
}

/// GA mean of the check-type (worse) child of two channels.
pub fn check_mean<T: Real>(a: T, b: T) -> T {
    let (la, lb) = (ln_phi(a), ln_phi(b));
    let (hi, lo) = if la >= lb { (la, lb) } else { (lb, la) };
    // ln(pa + pb - pa*pb), kept accurate when both are tiny.
    let ln_y = hi + ((lo - hi).exp() - lo.exp()).ln_1p();
    phi_inv_ln(ln_y)
}

/// Per-channel GA means and error probabilities of the synthesized channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityTable<T> {
    pub means: Vec<LlrDistribution<T>>,
    pub pe: Vec<T>,
}

impl<T: Real> ReliabilityTable<T> {
    pub fn from_means(means: Vec<LlrDistribution<T>>) -> Self {
        let pe = means.iter().map(pe_of).collect();
        Self { means, pe }
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    /// Writes `index,mean,pe` rows (0-based indices).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "index,mean,pe")?;
        for (i, (d, pe)) in self.means.iter().zip(&self.pe).enumerate() {
            writeln!(w, "{i},{:e},{:e}", d.mean().as_f64(), pe.as_f64())?;
        }
        Ok(())
    }
}

/// Runs GA density evolution over `log2 N0` stages.
pub fn ga_evolve<T: Real>(channel_means: &[T]) -> Result<ReliabilityTable<T>> {
    let mut ops = 0;
    ga_evolve_counted(channel_means, &mut ops)
}

/// As [`ga_evolve`], adding the number of node updates (`N0 log2 N0`) to `ops`.
pub fn ga_evolve_counted<T: Real>(channel_means: &[T], ops: &mut u64) -> Result<ReliabilityTable<T>> {
    let n0 = channel_means.len();
    if n0 == 0 || !n0.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n0));
    }
    if let Some(bad) = channel_means.iter().find(|m| m.is_nan() || **m < T::zero()) {
        return domain(format!("channel mean must be >= 0, got {bad}"));
    }
    let mut v = channel_means.to_vec();
    let mut half = n0 / 2;
    while half >= 1 {
        for block in v.chunks_exact_mut(2 * half) {
            let (upper, lower) = block.split_at_mut(half);
            for (a, b) in upper.iter_mut().zip(lower.iter_mut()) {
                let (ma, mb) = (*a, *b);
                *a = check_mean(ma, mb);
                *b = ma + mb;
            }
        }
        *ops += n0 as u64;
        half /= 2;
    }
    Ok(ReliabilityTable::from_means(
        v.into_iter().map(LlrDistribution::new_unchecked).collect(),
    ))
}

/// Mother-code channel means: `channel` everywhere except punctured positions, which are erasures.
pub fn mother_channel_means<T: Real>(n0: usize, puncture_set: &[usize], channel: &LlrDistribution<T>) -> Vec<T> {
    let mut means = vec![channel.mean(); n0];
    for &p in puncture_set {
        means[p] = T::zero();
    }
    means
}

/// Reverses the low `bits` bits of `i`.
pub fn bit_reverse(i: usize, bits: u32) -> usize {
    if bits == 0 {
        0
    } else {
        i.reverse_bits() >> (usize::BITS - bits)
    }
}

/// Chooses which encoder outputs to puncture when shortening `n0` to `m`.
pub trait PunctureStrategy {
    /// Sorted 0-based positions, `n0 - m` of them.
    fn positions(&self, n0: usize, m: usize) -> Result<Vec<usize>>;
}

/// Quasi-uniform puncturing. For an encoder that applies the bit-reversal
/// permutation it removes the first `n0 - m` bit-reversed positions; that
/// permutation commutes with the kernel power, so for the natural-order
/// encoder used here the same outputs are the first `n0 - m` positions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QuasiUniform;

/// Punctures the first `n0 - m` entries of the bit-reversal permutation of
/// `0..n0`, taken as natural-order encoder positions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BitReversedPositions;

fn check_puncture_args(n0: usize, m: usize) -> Result<()> {
    if n0 == 0 || !n0.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n0));
    }
    if !(2 * m > n0 && m <= n0) {
        return domain(format!("polar length {m} outside ({}, {n0}]", n0 / 2));
    }
    Ok(())
}

impl PunctureStrategy for QuasiUniform {
    fn positions(&self, n0: usize, m: usize) -> Result<Vec<usize>> {
        check_puncture_args(n0, m)?;
        Ok((0..n0 - m).collect())
    }
}

impl PunctureStrategy for BitReversedPositions {
    fn positions(&self, n0: usize, m: usize) -> Result<Vec<usize>> {
        check_puncture_args(n0, m)?;
        let bits = n0.trailing_zeros();
        let mut p: Vec<usize> = (0..n0 - m).map(|j| bit_reverse(j, bits)).collect();
        p.sort_unstable();
        Ok(p)
    }
}

/// Quasi-uniform puncture set for shortening `n0` to `m`.
pub fn puncture_pattern(n0: usize, m: usize) -> Result<Vec<usize>> {
    QuasiUniform.positions(n0, m)
}

/// `2^ceil(log2 m)`.
pub fn mother_length(m: usize) -> usize {
    m.max(1).next_power_of_two()
}

/// The `k` most reliable channels, sorted by index.
///
/// Ranked by GA mean, which orders `pe` exactly even where `pe` underflows;
/// equal means go to the smaller index.
pub fn select_info_set<T: Real>(table: &ReliabilityTable<T>, k: usize) -> Result<Vec<usize>> {
    if k > table.len() {
        return domain(format!("k = {k} exceeds {} channels", table.len()));
    }
    let mut order: Vec<usize> = (0..table.len()).collect();
    order.sort_by(|&a, &b| {
        let (ma, mb) = (table.means[a].mean(), table.means[b].mean());
        mb.partial_cmp(&ma).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    let mut info: Vec<usize> = order.into_iter().take(k).collect();
    info.sort_unstable();
    Ok(info)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pe_endpoints() {
        assert_eq!(pe_of(&LlrDistribution::<f64>::erasure()), 0.5);
        assert_eq!(pe_of(&LlrDistribution::new(1e6).unwrap()), 0.0);
        assert!(LlrDistribution::new(-1.0f64).is_err());
        assert!(pe_of_mean(-0.5f64).is_err());
    }

    #[test]
    fn pe_matches_quadrature_of_gaussian_density() {
        // Integrate Normal(2, 4) over (-inf, 0] with composite Simpson on [-40, 0].
        let (mu, var) = (2.0f64, 4.0f64);
        let pdf = |x: f64| (-(x - mu).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
        let (a, b, n) = (-40.0, 0.0, 200_000);
        let h = (b - a) / n as f64;
        let mut s = pdf(a) + pdf(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * pdf(x);
        }
        let integral = s * h / 3.0;
        let pe = pe_of(&LlrDistribution::new(2.0f64).unwrap());
        assert!((pe - integral).abs() < 1e-10, "{pe} vs {integral}");
    }

    #[test]
    fn phi_inverse_round_trip() {
        let mut x = 0.03f64;
        while x <= 100.0 {
            x += 0.0137;
            if (10.0..10.15).contains(&x) {
                // flat stretch of the clipped upper piece
                continue;
            }
            let back: f64 = phi_inv_ln(ln_phi(x));
            assert!((back - x).abs() < 1e-9, "x = {x}, back = {back}");
        }
        for x in [150.0, 1e3, 1e4, 1e5] {
            let back: f64 = phi_inv_ln(ln_phi(x));
            assert!(((back - x) / x).abs() < 1e-12);
        }
        assert_eq!(phi_inv_ln(0.0f64), 0.0);
    }

    #[test]
    fn phi_is_bounded_and_nonincreasing() {
        let mut prev = 1.0;
        for i in 0..20_000 {
            let x = i as f64 * 0.01;
            let p = phi(x);
            assert!((0.0..=1.0).contains(&p));
            assert!(p <= prev + 1e-15, "x = {x}");
            prev = p;
        }
    }

    #[test]
    fn degenerate_inputs() {
        let t = ga_evolve(&[0.0f64; 8]).unwrap();
        assert!(t.means.iter().all(|d| d.mean() == 0.0));
        assert!(t.pe.iter().all(|&p| p == 0.5));
        let t = ga_evolve(&[1.5f64, 1.5]).unwrap();
        assert_eq!(t.means[1].mean(), 3.0);
        assert!(t.means[0].mean() < 1.5);
        assert!(matches!(ga_evolve(&[1.0f64; 6]), Err(Error::NotPowerOfTwo(6))));
        assert!(ga_evolve(&[1.0f64, -1.0]).is_err());
    }

    #[test]
    fn counted_updates() {
        let mut ops = 0;
        ga_evolve_counted(&[1.0f64; 64], &mut ops).unwrap();
        assert_eq!(ops, 64 * 6);
    }

    #[test]
    fn polarization_deepens() {
        let mut prev_max = 0.0;
        for n in [2usize, 4, 8, 16, 32, 64] {
            let t = ga_evolve(&vec![2.0f64; n]).unwrap();
            let pe_w = pe_of(&LlrDistribution::new(2.0f64).unwrap());
            let min = t.pe.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = t.pe.iter().cloned().fold(0.0, f64::max);
            assert!(min <= pe_w && pe_w <= max);
            let max_mean = t.means.iter().map(|d| d.mean()).fold(0.0, f64::max);
            assert!(max_mean > prev_max);
            prev_max = max_mean;
        }
    }

    #[test]
    fn puncture_examples() {
        assert!(puncture_pattern(8, 8).unwrap().is_empty());
        assert_eq!(puncture_pattern(4, 3).unwrap(), vec![0]);
        assert_eq!(puncture_pattern(8, 6).unwrap(), vec![0, 1]);
        assert_eq!(puncture_pattern(8, 5).unwrap(), vec![0, 1, 2]);
        assert!(puncture_pattern(8, 4).is_err());
        assert!(puncture_pattern(8, 9).is_err());
        assert!(puncture_pattern(6, 5).is_err());
        assert_eq!(BitReversedPositions.positions(4, 3).unwrap(), vec![0]);
        assert_eq!(BitReversedPositions.positions(8, 6).unwrap(), vec![0, 4]);
        assert_eq!(BitReversedPositions.positions(8, 5).unwrap(), vec![0, 2, 4]);
    }

    #[test]
    fn info_set_selection() {
        let t = ReliabilityTable::from_means(vec![LlrDistribution::new(1.0f64).unwrap(); 8]);
        assert_eq!(select_info_set(&t, 3).unwrap(), vec![0, 1, 2]);
        assert_eq!(select_info_set(&t, 8).unwrap(), (0..8).collect::<Vec<_>>());
        assert!(select_info_set(&t, 9).is_err());
        let t = ga_evolve(&[2.0f64; 8]).unwrap();
        assert_eq!(select_info_set(&t, 1).unwrap(), vec![7]);
    }

    #[test]
    fn csv_export() {
        let t = ga_evolve(&[2.0f64; 4]).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().count(), 5);
        assert!(s.starts_with("index,mean,pe\n0,"));
    }

    proptest! {
        #[test]
        fn raising_means_never_raises_pe(
            base in proptest::collection::vec(0.0f64..20.0, 16),
            bump in proptest::collection::vec(0.0f64..5.0, 16),
        ) {
            let lo = ga_evolve(&base).unwrap();
            let raised: Vec<f64> = base.iter().zip(&bump).map(|(a, b)| a + b).collect();
            let hi = ga_evolve(&raised).unwrap();
            for (p_lo, p_hi) in lo.pe.iter().zip(&hi.pe) {
                prop_assert!(*p_hi <= *p_lo * (1.0 + 1e-9) + 1e-300);
            }
        }

        #[test]
        fn puncture_sets_are_valid(log_n in 0u32..12, frac in 0.0f64..1.0) {
            let n0 = 1usize << log_n;
            let m = n0 / 2 + 1 + ((n0 - n0 / 2 - 1) as f64 * frac) as usize;
            let p = puncture_pattern(n0, m).unwrap();
            prop_assert_eq!(p.len(), n0 - m);
            prop_assert!(p.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(p.iter().all(|&i| i < n0));
        }
    }
}
