//! Monte Carlo simulation of the incremental-redundancy HARQ protocol.
//!
//! Round 1 sends the first `N_1` bits of the longest codeword; every NACK
//! triggers the next `N_t - N_{t-1}` repetition bits. The receiver keeps all
//! LLRs and re-decodes with the code of length `N_t`. ACK/NACK is a genie
//! comparison with the true information block.
//!
//! Each trial is decoded after every round, even past the first success, so
//! that the marginal events `E_t` (failure with all `N_t` bits) are observed
//! alongside the protocol outcome. Trials where decoding succeeds with fewer
//! bits and fails with more are counted as non-nesting.

use crate::channel::{channel_llr_distribution, transmit_with_rng, trial_rng, ChannelParams};
use crate::codec::{rcp_encode, sc_decode_with, DecoderScratch, RcpCode};
use crate::design::HarqScheme;
use crate::error::{domain, Error, Result};
use crate::rcp::construct_rcp;
use crate::stats::{Proportion, RatioMoments};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};

/// Nested RCP codes for `N_1 < .. < N_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeFamily {
    codes: Vec<RcpCode>,
}

impl CodeFamily {
    /// Checks that the codes share a mother code and that each repetition
    /// vector is a prefix of the next.
    pub fn new(codes: Vec<RcpCode>) -> Result<Self> {
        if codes.is_empty() {
            return domain("empty code family");
        }
        for w in codes.windows(2) {
            if w[0].n() >= w[1].n() || !w[0].is_prefix_of(&w[1]) {
                return domain(format!("codes of length {} and {} do not nest", w[0].n(), w[1].n()));
            }
        }
        Ok(Self { codes })
    }

    /// Builds the family of a designed scheme at the given channel.
    pub fn from_scheme(scheme: &HarqScheme, params: &ChannelParams) -> Result<Self> {
        let lens = scheme.lengths();
        let last = *lens.last().ok_or_else(|| Error::Domain("scheme has no transmissions".into()))?;
        let full = construct_rcp(last, scheme.k, scheme.m(), channel_llr_distribution::<f64>(params))?.code;
        Self::new(lens.iter().map(|&n| full.truncated(n)).collect::<Result<_>>()?)
    }

    pub fn codes(&self) -> &[RcpCode] {
        &self.codes
    }

    pub fn k(&self) -> usize {
        self.codes[0].k()
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.codes.iter().map(RcpCode::n).collect()
    }

    pub fn rounds(&self) -> usize {
        self.codes.len()
    }

    fn longest(&self) -> &RcpCode {
        self.codes.last().expect("nonempty")
    }
}

/// Protocol outcome of one information block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialOutcome {
    /// 1-based round of the ACK, `None` if all `T` rounds failed.
    pub success_round: Option<usize>,
    pub bits_sent: usize,
    pub decoded_ok: bool,
}

/// Outcome plus the decoding result after every round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialRecord {
    pub outcome: TrialOutcome,
    /// `failed[t]` is the event `E_{t+1}`.
    pub failed: Vec<bool>,
}

impl TrialRecord {
    /// Record for per-round decoding results; the outcome follows the protocol.
    pub fn from_failures(lengths: &[usize], failed: Vec<bool>) -> Self {
        let success_round = failed.iter().position(|f| !f).map(|t| t + 1);
        let bits_sent = match success_round {
            Some(t) => lengths[t - 1],
            None => *lengths.last().expect("nonempty"),
        };
        Self {
            outcome: TrialOutcome {
                success_round,
                bits_sent,
                decoded_ok: success_round.is_some(),
            },
            failed,
        }
    }

    /// Success with fewer bits followed by failure with more.
    pub fn is_non_nesting(&self) -> bool {
        match self.failed.iter().position(|f| !f) {
            Some(t) => self.failed[t..].iter().any(|&f| f),
            None => false,
        }
    }
}

/// Reusable buffers for [`run_trial_with`].
#[derive(Debug, Default)]
pub struct TrialScratch {
    decoder: DecoderScratch<f64>,
    llrs: Vec<f64>,
}

/// One protocol run of `info_bits`, noise drawn from `seed`.
pub fn run_trial(family: &CodeFamily, info_bits: &[u8], params: &ChannelParams, seed: u64) -> Result<TrialOutcome> {
    let mut rng = trial_rng(seed, 0);
    let r = run_trial_with(family, info_bits, params, &mut rng, &mut TrialScratch::default())?;
    Ok(r.outcome)
}

/// As [`run_trial`] with a caller-supplied generator, returning every round's result.
pub fn run_trial_with<R: Rng + ?Sized>(
    family: &CodeFamily,
    info_bits: &[u8],
    params: &ChannelParams,
    rng: &mut R,
    scratch: &mut TrialScratch,
) -> Result<TrialRecord> {
    let word = rcp_encode(info_bits, family.longest())?;
    scratch.llrs.clear();
    let mut sent = 0;
    let mut failed = Vec::with_capacity(family.rounds());
    for code in &family.codes {
        let segment = transmit_with_rng::<f64, _>(&word[sent..code.n()], params, rng)?;
        scratch.llrs.extend_from_slice(&segment.values);
        sent = code.n();
        let decoded = sc_decode_with(&scratch.llrs, code, &mut scratch.decoder)?;
        failed.push(decoded != info_bits);
    }
    Ok(TrialRecord::from_failures(&family.lengths(), failed))
}

/// Order-independent accumulation of trial records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tally {
    pub k: usize,
    pub lengths: Vec<usize>,
    pub trials: u64,
    /// Marginal `E_t` counts.
    pub failures: Vec<u64>,
    /// Counts of `not E_t and E_{t-1} .. E_1`.
    pub first_success: Vec<u64>,
    pub all_fail: u64,
    pub non_nesting: u64,
    /// Per-trial (delivered bits, channel uses).
    pub usage: RatioMoments,
}

impl Tally {
    pub fn new(k: usize, lengths: &[usize]) -> Self {
        let t = lengths.len();
        Self {
            k,
            lengths: lengths.to_vec(),
            trials: 0,
            failures: vec![0; t],
            first_success: vec![0; t],
            all_fail: 0,
            non_nesting: 0,
            usage: RatioMoments::default(),
        }
    }

    pub fn push(&mut self, r: &TrialRecord) {
        assert_eq!(r.failed.len(), self.lengths.len(), "record has the wrong number of rounds");
        self.trials += 1;
        for (c, &f) in self.failures.iter_mut().zip(&r.failed) {
            *c += u64::from(f);
        }
        match r.outcome.success_round {
            Some(t) => self.first_success[t - 1] += 1,
            None => self.all_fail += 1,
        }
        self.non_nesting += u64::from(r.is_non_nesting());
        let delivered = if r.outcome.decoded_ok { self.k as u64 } else { 0 };
        self.usage.push(delivered, r.outcome.bits_sent as u64);
    }

    pub fn merge(mut self, o: Self) -> Self {
        self.trials += o.trials;
        for (a, b) in self.failures.iter_mut().zip(&o.failures) {
            *a += b;
        }
        for (a, b) in self.first_success.iter_mut().zip(&o.first_success) {
            *a += b;
        }
        self.all_fail += o.all_fail;
        self.non_nesting += o.non_nesting;
        self.usage.merge(&o.usage);
        self
    }

    pub fn report(&self) -> SimReport {
        let n = self.trials;
        let prop = |c: u64| Proportion::new(c, n);
        let pr_e: Vec<f64> = self.failures.iter().map(|&c| prop(c).estimate()).collect();
        let pr_first_success: Vec<f64> = self.first_success.iter().map(|&c| prop(c).estimate()).collect();
        let pr_all_fail = prop(self.all_fail).estimate();
        let e_k = self.k as f64 * (n - self.all_fail) as f64 / n as f64;
        let uses: u64 = self
            .first_success
            .iter()
            .zip(&self.lengths)
            .map(|(&c, &len)| c * len as u64)
            .sum::<u64>()
            + self.all_fail * *self.lengths.last().unwrap() as u64;
        let e_n = uses as f64 / n as f64;
        let eta = if e_n > 0.0 { e_k / e_n } else { 0.0 };
        SimReport {
            k: self.k,
            lengths: self.lengths.clone(),
            trials: n,
            failures: self.failures.clone(),
            first_success: self.first_success.clone(),
            all_fail: self.all_fail,
            non_nesting: self.non_nesting,
            eta_direct: self.usage.ratio(),
            eta_approx: approx_throughput(self.k, &self.lengths, &pr_e),
            ci95: Ci95 {
                pr_e: self.failures.iter().map(|&c| prop(c).half_width95()).collect(),
                pr_first_success: self.first_success.iter().map(|&c| prop(c).half_width95()).collect(),
                pr_all_fail: prop(self.all_fail).half_width95(),
                eta: self.usage.half_width95(),
            },
            pr_e,
            pr_first_success,
            pr_all_fail,
            e_k,
            e_n,
            eta,
            snr_db: None,
            eta_estimate: None,
        }
    }
}

/// Approximate throughput from marginal failure rates; 0 if nothing is delivered.
fn approx_throughput(k: usize, lengths: &[usize], pr_e: &[f64]) -> f64 {
    let mut prev = 1.0;
    let mut denom = 0.0;
    for (&n, &p) in lengths.iter().zip(pr_e) {
        denom += n as f64 * (prev - p);
        prev = p;
    }
    denom += *lengths.last().unwrap() as f64 * prev;
    k as f64 * (1.0 - prev) / denom
}

/// 95% half-widths: Wilson for probabilities, delta method for `eta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ci95 {
    pub pr_e: Vec<f64>,
    pub pr_first_success: Vec<f64>,
    pub pr_all_fail: f64,
    pub eta: f64,
}

/// Campaign statistics. Vectors are indexed by round, `t = 1..T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub k: usize,
    pub lengths: Vec<usize>,
    pub trials: u64,
    pub failures: Vec<u64>,
    pub first_success: Vec<u64>,
    pub all_fail: u64,
    pub non_nesting: u64,
    /// Marginal `Pr(E_t)`.
    pub pr_e: Vec<f64>,
    /// `Pr(not E_t and E_{t-1} .. E_0)`.
    pub pr_first_success: Vec<f64>,
    /// `Pr(E_T and .. E_0)`.
    pub pr_all_fail: f64,
    /// Expected delivered information bits per block.
    pub e_k: f64,
    /// Expected channel uses per block.
    pub e_n: f64,
    /// `e_k / e_n`.
    pub eta: f64,
    /// Delivered bits over channel uses, accumulated per trial.
    pub eta_direct: f64,
    /// Approximate throughput evaluated at the empirical `Pr(E_t)`.
    pub eta_approx: f64,
    pub ci95: Ci95,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    /// Designer's approximate throughput from the union-bound BLERs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_estimate: Option<f64>,
}

/// Aggregates records of one campaign.
pub fn aggregate(k: usize, lengths: &[usize], records: &[TrialRecord]) -> SimReport {
    let mut t = Tally::new(k, lengths);
    for r in records {
        t.push(r);
    }
    t.report()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CampaignOptions {
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    /// Report progress on standard error.
    pub progress: bool,
}

/// Runs `trials` blocks through a code family. Trial `i` draws its info block
/// and noise from `trial_rng(base_seed, i)`, so results do not depend on
/// the number of threads.
pub fn run_family_campaign(
    family: &CodeFamily,
    params: &ChannelParams,
    trials: u64,
    base_seed: u64,
    opts: CampaignOptions,
) -> Result<SimReport> {
    if trials == 0 {
        return domain("trials must be at least 1");
    }
    let lengths = family.lengths();
    let k = family.k();
    let done = AtomicU64::new(0);
    let step = (trials / 10).max(1);
    let work = || {
        (0..trials)
            .into_par_iter()
            .map_init(TrialScratch::default, |scratch, i| {
                let mut rng = trial_rng(base_seed, i);
                let info: Vec<u8> = (0..k).map(|_| u8::from(rng.random::<bool>())).collect();
                let rec = run_trial_with(family, &info, params, &mut rng, scratch)?;
                if opts.progress {
                    let d = done.fetch_add(1, Ordering::Relaxed) + 1;
                    if d % step == 0 {
                        eprintln!("  {d}/{trials} trials");
                    }
                }
                Ok(rec)
            })
            .try_fold(
                || Tally::new(k, &lengths),
                |mut t, rec: Result<TrialRecord>| {
                    t.push(&rec?);
                    Ok::<_, Error>(t)
                },
            )
            .try_reduce(|| Tally::new(k, &lengths), |a, b| Ok(a.merge(b)))
    };
    let tally = match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Domain(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    let mut report = tally.report();
    report.snr_db = Some(params.snr_db());
    Ok(report)
}

/// Campaign for a designed scheme, codes built at the operating channel.
pub fn run_campaign(
    scheme: &HarqScheme,
    params: &ChannelParams,
    trials: u64,
    base_seed: u64,
    opts: CampaignOptions,
) -> Result<SimReport> {
    let family = CodeFamily::from_scheme(scheme, params)?;
    let mut report = run_family_campaign(&family, params, trials, base_seed, opts)?;
    report.eta_estimate = Some(scheme.eta_estimate);
    Ok(report)
}

/// One row of the upper-bound comparison for round `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferenceCheck {
    pub t: usize,
    /// `Pr(E_{t-1}) - Pr(E_t)`, marginals, `Pr(E_0) = 1`.
    pub difference: f64,
    /// `Pr(not E_t and E_{t-1} .. E_0)`.
    pub first_success: f64,
    /// Root sum of squares of the three Wilson half-widths.
    pub ci: f64,
    /// `difference >= first_success - 2 ci`.
    pub holds: bool,
}

/// Approximate throughput against the simulated one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputCheck {
    pub source: String,
    pub approx: f64,
    pub eta: f64,
    pub ci: f64,
    /// `approx <= eta + 2 ci`.
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub differences: Vec<DifferenceCheck>,
    pub throughput: Vec<ThroughputCheck>,
    pub non_nesting: u64,
}

impl BoundCheck {
    pub fn all_hold(&self) -> bool {
        self.differences.iter().all(|d| d.holds) && self.throughput.iter().all(|c| c.holds)
    }
}

/// Compares the empirical event probabilities with the relations used by the
/// throughput approximation.
pub fn bound_check(report: &SimReport) -> BoundCheck {
    let mut prev = (1.0, 0.0);
    let differences = (0..report.lengths.len())
        .map(|i| {
            let cur = (report.pr_e[i], report.ci95.pr_e[i]);
            let difference = prev.0 - cur.0;
            let first_success = report.pr_first_success[i];
            let ci = (prev.1 * prev.1 + cur.1 * cur.1 + report.ci95.pr_first_success[i].powi(2)).sqrt();
            prev = cur;
            DifferenceCheck {
                t: i + 1,
                difference,
                first_success,
                ci,
                holds: difference >= first_success - 2.0 * ci,
            }
        })
        .collect();
    let eta_ci = report.ci95.eta;
    let check = |source: &str, approx: f64| ThroughputCheck {
        source: source.into(),
        approx,
        eta: report.eta,
        ci: eta_ci,
        holds: approx <= report.eta + 2.0 * eta_ci,
    };
    let mut throughput = vec![check("empirical", report.eta_approx)];
    if let Some(e) = report.eta_estimate {
        throughput.push(check("union_bound", e));
    }
    BoundCheck {
        differences,
        throughput,
        non_nesting: report.non_nesting,
    }
}

/// Monte Carlo block error count of a fixed code; all-zero-free random info blocks.
pub fn simulate_bler(
    code: &RcpCode,
    params: &ChannelParams,
    trials: u64,
    base_seed: u64,
    threads: Option<usize>,
) -> Result<Proportion> {
    let family = CodeFamily::new(vec![code.clone()])?;
    let report = run_family_campaign(
        &family,
        params,
        trials,
        base_seed,
        CampaignOptions { threads, progress: false },
    )?;
    Ok(Proportion::new(report.failures[0], trials))
}

/// CSV header of [`write_report_csv`].
pub const REPORT_CSV_HEADER: &str = "snr_db,t,n_t,pr_e,pr_first_success,eta,ci_pr_e,ci_pr_first_success,ci_eta";

/// One row per round; `eta` and its half-width repeat on every row.
pub fn write_report_csv<W: Write>(mut w: W, reports: &[SimReport]) -> std::io::Result<()> {
    writeln!(w, "{REPORT_CSV_HEADER}")?;
    for r in reports {
        let snr = r.snr_db.map(|s| s.to_string()).unwrap_or_default();
        for t in 0..r.lengths.len() {
            writeln!(
                w,
                "{snr},{},{},{},{},{},{},{},{}",
                t + 1,
                r.lengths[t],
                r.pr_e[t],
                r.pr_first_success[t],
                r.eta,
                r.ci95.pr_e[t],
                r.ci95.pr_first_success[t],
                r.ci95.eta
            )?;
        }
    }
    Ok(())
}
