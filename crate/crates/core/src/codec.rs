//! Encoding and successive-cancellation decoding of RCP codes.
//!
//! Conventions: indices are 0-based, the transform is the natural-order
//! Arikan kernel power `x = u F^{(x)n}` with `F = [[1,0],[1,1]]` and no bit
//! reversal, and frozen bits are zero unless a spec says otherwise.
//!
//! An RCP codeword is the polar codeword with the punctured positions removed
//! (ascending order), followed by the repetition bits `u[r_1], .., u[r_{N-M}]`.
//! The decoder gives punctured positions LLR 0 and adds every repetition LLR
//! to the decision LLR of the information bit it copies.

use crate::channel::LlrWord;
use crate::error::{domain, Error, Result};
use crate::reliability::mother_length;
use crate::scalar::Real;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

/// Mother polar code with its information, frozen and puncture sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolarCodeSpec {
    n0: usize,
    info_set: Vec<usize>,
    frozen_set: Vec<usize>,
    puncture_set: Vec<usize>,
    /// Values of the frozen bits, aligned with `frozen_set`.
    frozen_values: Vec<u8>,
}

fn check_index_set(name: &str, set: &[usize], n0: usize) -> Result<()> {
    if !set.windows(2).all(|w| w[0] < w[1]) {
        return domain(format!("{name} must be strictly increasing"));
    }
    if let Some(&i) = set.iter().find(|&&i| i >= n0) {
        return domain(format!("{name} index {i} out of range for N0 = {n0}"));
    }
    Ok(())
}

impl PolarCodeSpec {
    /// Spec with all-zero frozen bits.
    pub fn new(n0: usize, info_set: Vec<usize>, puncture_set: Vec<usize>) -> Result<Self> {
        if n0 == 0 || !n0.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(n0));
        }
        check_index_set("info set", &info_set, n0)?;
        check_index_set("puncture set", &puncture_set, n0)?;
        let m = n0 - puncture_set.len();
        if mother_length(m) != n0 {
            return domain(format!("N0 = {n0} is not 2^ceil(log2 M) for M = {m}"));
        }
        let mut is_info = vec![false; n0];
        for &i in &info_set {
            is_info[i] = true;
        }
        let frozen_set: Vec<usize> = (0..n0).filter(|&i| !is_info[i]).collect();
        let frozen_values = vec![0; frozen_set.len()];
        Ok(Self {
            n0,
            info_set,
            frozen_set,
            puncture_set,
            frozen_values,
        })
    }

    pub fn with_frozen_values(mut self, values: Vec<u8>) -> Result<Self> {
        if values.len() != self.frozen_set.len() {
            return Err(Error::Length {
                expected: self.frozen_set.len(),
                actual: values.len(),
            });
        }
        check_binary(&values)?;
        self.frozen_values = values;
        Ok(self)
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    pub fn k(&self) -> usize {
        self.info_set.len()
    }

    /// Number of transmitted polar bits.
    pub fn m(&self) -> usize {
        self.n0 - self.puncture_set.len()
    }

    pub fn info_set(&self) -> &[usize] {
        &self.info_set
    }

    pub fn frozen_set(&self) -> &[usize] {
        &self.frozen_set
    }

    pub fn puncture_set(&self) -> &[usize] {
        &self.puncture_set
    }

    pub fn frozen_values(&self) -> &[u8] {
        &self.frozen_values
    }

    /// Transmitted polar positions in ascending order.
    pub fn transmitted_positions(&self) -> Vec<usize> {
        let mut punctured = vec![false; self.n0];
        for &p in &self.puncture_set {
            punctured[p] = true;
        }
        (0..self.n0).filter(|&i| !punctured[i]).collect()
    }

    /// The full `u` vector: info bits on `A`, frozen values elsewhere.
    fn place(&self, info_bits: &[u8]) -> Result<Vec<u8>> {
        if info_bits.len() != self.k() {
            return Err(Error::Length {
                expected: self.k(),
                actual: info_bits.len(),
            });
        }
        check_binary(info_bits)?;
        let mut u = vec![0u8; self.n0];
        for (&i, &b) in self.info_set.iter().zip(info_bits) {
            u[i] = b;
        }
        for (&i, &b) in self.frozen_set.iter().zip(&self.frozen_values) {
            u[i] = b;
        }
        Ok(u)
    }
}

fn check_binary(bits: &[u8]) -> Result<()> {
    match bits.iter().find(|&&b| b > 1) {
        Some(b) => domain(format!("non-binary symbol {b}")),
        None => Ok(()),
    }
}

/// An `(N, K, M)` rate-compatible polar code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RcpCodeRecord", into = "RcpCodeRecord")]
pub struct RcpCode {
    spec: PolarCodeSpec,
    n: usize,
    rep_vector: Vec<usize>,
}

impl RcpCode {
    pub fn new(spec: PolarCodeSpec, n: usize, rep_vector: Vec<usize>) -> Result<Self> {
        let (k, m) = (spec.k(), spec.m());
        if !(k <= m && m <= n) {
            return domain(format!("need K <= M <= N, got ({n}, {k}, {m})"));
        }
        if rep_vector.len() != n - m {
            return Err(Error::Length {
                expected: n - m,
                actual: rep_vector.len(),
            });
        }
        if let Some(&r) = rep_vector.iter().find(|r| spec.info_set.binary_search(r).is_err()) {
            return domain(format!("repetition index {r} is not an information channel"));
        }
        Ok(Self { spec, n, rep_vector })
    }

    pub fn spec(&self) -> &PolarCodeSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.spec.k()
    }

    pub fn m(&self) -> usize {
        self.spec.m()
    }

    pub fn n0(&self) -> usize {
        self.spec.n0()
    }

    pub fn rep_vector(&self) -> &[usize] {
        &self.rep_vector
    }

    /// The code of length `n` that keeps the first `n - M` repetitions.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n < self.m() || n > self.n {
            return domain(format!("length {n} outside [{}, {}]", self.m(), self.n));
        }
        Ok(Self {
            spec: self.spec.clone(),
            n,
            rep_vector: self.rep_vector[..n - self.m()].to_vec(),
        })
    }

    /// True if `self` is `longer` with some trailing repetitions dropped.
    pub fn is_prefix_of(&self, longer: &RcpCode) -> bool {
        self.spec == longer.spec
            && self.n <= longer.n
            && longer.rep_vector.starts_with(&self.rep_vector)
    }
}

#[derive(Serialize, Deserialize)]
struct RcpCodeRecord {
    n: usize,
    k: usize,
    m: usize,
    n0: usize,
    info_set: Vec<usize>,
    puncture_set: Vec<usize>,
    rep_vector: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    frozen_values: Vec<u8>,
}

impl TryFrom<RcpCodeRecord> for RcpCode {
    type Error = Error;

    fn try_from(r: RcpCodeRecord) -> Result<Self> {
        let mut spec = PolarCodeSpec::new(r.n0, r.info_set, r.puncture_set)?;
        if !r.frozen_values.is_empty() {
            spec = spec.with_frozen_values(r.frozen_values)?;
        }
        if spec.k() != r.k || spec.m() != r.m {
            return domain(format!(
                "record declares (k, m) = ({}, {}) but sets give ({}, {})",
                r.k,
                r.m,
                spec.k(),
                spec.m()
            ));
        }
        RcpCode::new(spec, r.n, r.rep_vector)
    }
}

impl From<RcpCode> for RcpCodeRecord {
    fn from(c: RcpCode) -> Self {
        let frozen_values = if c.spec.frozen_values.iter().all(|&b| b == 0) {
            Vec::new()
        } else {
            c.spec.frozen_values.clone()
        };
        Self {
            n: c.n,
            k: c.k(),
            m: c.m(),
            n0: c.n0(),
            info_set: c.spec.info_set,
            puncture_set: c.spec.puncture_set,
            rep_vector: c.rep_vector,
            frozen_values,
        }
    }
}

/// In-place `x = u F^{(x)n}`.
fn polar_transform(x: &mut [u8]) {
    let n = x.len();
    let mut half = 1;
    while half < n {
        for block in x.chunks_exact_mut(2 * half) {
            let (a, b) = block.split_at_mut(half);
            for (xa, xb) in a.iter_mut().zip(b.iter()) {
                *xa ^= *xb;
            }
        }
        half *= 2;
    }
}

/// Mother-code codeword of length `N0` (punctured positions included).
pub fn polar_encode(info_bits: &[u8], spec: &PolarCodeSpec) -> Result<Vec<u8>> {
    let mut x = spec.place(info_bits)?;
    polar_transform(&mut x);
    Ok(x)
}

/// Length-`N` RCP codeword.
pub fn rcp_encode(info_bits: &[u8], code: &RcpCode) -> Result<Vec<u8>> {
    let u = code.spec.place(info_bits)?;
    let mut x = u.clone();
    polar_transform(&mut x);
    let mut out = Vec::with_capacity(code.n);
    let mut punctured = code.spec.puncture_set.iter().peekable();
    for (i, &b) in x.iter().enumerate() {
        if punctured.peek() == Some(&&i) {
            punctured.next();
        } else {
            out.push(b);
        }
    }
    out.extend(code.rep_vector.iter().map(|&r| u[r]));
    Ok(out)
}

/// Exact `2 atanh(tanh(a/2) tanh(b/2))`, evaluated as a corrected min-sum.
#[inline]
pub fn boxplus<T: Real>(a: T, b: T) -> T {
    let (aa, ab) = (a.abs(), b.abs());
    let cutoff = T::lit(40.0);
    let sum = aa + ab;
    let diff = (aa - ab).abs();
    let mut mag = aa.min(ab);
    if sum < cutoff {
        mag += (-sum).exp().ln_1p();
    }
    if diff < cutoff {
        mag -= (-diff).exp().ln_1p();
    }
    if (a < T::zero()) != (b < T::zero()) {
        -mag
    } else {
        mag
    }
}

/// Working memory for [`sc_decode_with`]. Reusable across codes and calls.
#[derive(Debug, Clone, Default)]
pub struct DecoderScratch<T> {
    // Node LLRs and partial sums for the active node of size s live at [s, 2s).
    llr: Vec<T>,
    bits: Vec<u8>,
    rep: Vec<T>,
    frozen: Vec<Option<u8>>,
    u: Vec<u8>,
    decisions: Vec<T>,
    ops: u64,
}

impl<T: Real> DecoderScratch<T> {
    pub fn new() -> Self {
        Self {
            llr: Vec::new(),
            bits: Vec::new(),
            rep: Vec::new(),
            frozen: Vec::new(),
            u: Vec::new(),
            decisions: Vec::new(),
            ops: 0,
        }
    }

    /// Decision LLRs of the last decode, indexed by `u` position.
    pub fn decision_llrs(&self) -> &[T] {
        &self.decisions
    }

    /// Decoded `u` vector of the last decode.
    pub fn u_hat(&self) -> &[u8] {
        &self.u
    }

    /// Cumulative number of f/g node updates performed with this scratch.
    pub fn ops(&self) -> u64 {
        self.ops
    }

    fn prepare(&mut self, spec: &PolarCodeSpec) {
        let n0 = spec.n0;
        self.llr.clear();
        self.llr.resize(2 * n0, T::zero());
        self.bits.clear();
        self.bits.resize(2 * n0, 0);
        self.rep.clear();
        self.rep.resize(n0, T::zero());
        self.u.clear();
        self.u.resize(n0, 0);
        self.decisions.clear();
        self.decisions.resize(n0, T::zero());
        self.frozen.clear();
        self.frozen.resize(n0, None);
        for (&i, &b) in spec.frozen_set.iter().zip(&spec.frozen_values) {
            self.frozen[i] = Some(b);
        }
    }

    fn node(&mut self, s: usize, u_start: usize) {
        if s == 1 {
            let l = self.llr[1] + self.rep[u_start];
            self.decisions[u_start] = l;
            let b = self.frozen[u_start].unwrap_or((l < T::zero()) as u8);
            self.u[u_start] = b;
            self.bits[1] = b;
            return;
        }
        let h = s / 2;
        for j in 0..h {
            self.llr[h + j] = boxplus(self.llr[s + j], self.llr[s + h + j]);
        }
        self.node(h, u_start);
        self.bits.copy_within(h..s, s);
        for j in 0..h {
            let (top, bottom) = (self.llr[s + j], self.llr[s + h + j]);
            self.llr[h + j] = if self.bits[s + j] == 0 { bottom + top } else { bottom - top };
        }
        self.ops += 2 * h as u64;
        self.node(h, u_start + h);
        for j in 0..h {
            let c = self.bits[h + j];
            self.bits[s + j] ^= c;
            self.bits[s + h + j] = c;
        }
    }
}

/// SC decoding of an RCP word. Allocates fresh scratch; see [`sc_decode_with`].
pub fn sc_decode<T: Real>(llrs: &LlrWord<T>, code: &RcpCode) -> Result<Vec<u8>> {
    sc_decode_with(&llrs.values, code, &mut DecoderScratch::new())
}

/// SC decoding of `llrs` (length `N`) into the `K` information bits.
pub fn sc_decode_with<T: Real>(llrs: &[T], code: &RcpCode, scratch: &mut DecoderScratch<T>) -> Result<Vec<u8>> {
    if llrs.len() != code.n {
        return Err(Error::Length {
            expected: code.n,
            actual: llrs.len(),
        });
    }
    let spec = &code.spec;
    let n0 = spec.n0;
    let m = spec.m();
    scratch.prepare(spec);
    let mut received = llrs[..m].iter();
    let mut punctured = spec.puncture_set.iter().peekable();
    for i in 0..n0 {
        scratch.llr[n0 + i] = if punctured.peek() == Some(&&i) {
            punctured.next();
            T::zero()
        } else {
            *received.next().expect("M transmitted positions")
        };
    }
    for (&r, &l) in code.rep_vector.iter().zip(&llrs[m..]) {
        scratch.rep[r] += l;
    }
    scratch.node(n0, 0);
    Ok(spec.info_set.iter().map(|&i| scratch.u[i]).collect())
}

/// One line of a golden-vector file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenVector {
    pub spec: RcpCode,
    pub info_bits_hex: String,
    pub codeword_hex: String,
}

/// Packs bits MSB-first into bytes and hex-encodes them; the tail is zero-padded.
pub fn bits_to_hex(bits: &[u8]) -> String {
    let bytes: Vec<u8> = bits
        .chunks(8)
        .map(|c| c.iter().enumerate().fold(0u8, |acc, (j, &b)| acc | ((b & 1) << (7 - j))))
        .collect();
    hex::encode(bytes)
}

pub fn hex_to_bits(s: &str, len: usize) -> Result<Vec<u8>> {
    let bytes = hex::decode(s).map_err(|e| Error::Serde(e.to_string()))?;
    if bytes.len() != len.div_ceil(8) {
        return Err(Error::Length {
            expected: len.div_ceil(8),
            actual: bytes.len(),
        });
    }
    Ok((0..len).map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1).collect())
}

impl GoldenVector {
    pub fn generate(code: &RcpCode, info_bits: &[u8]) -> Result<Self> {
        let cw = rcp_encode(info_bits, code)?;
        Ok(Self {
            spec: code.clone(),
            info_bits_hex: bits_to_hex(info_bits),
            codeword_hex: bits_to_hex(&cw),
        })
    }

    /// Re-encodes and compares against the stored codeword.
    pub fn verify(&self) -> Result<bool> {
        let info = hex_to_bits(&self.info_bits_hex, self.spec.k())?;
        let cw = rcp_encode(&info, &self.spec)?;
        Ok(bits_to_hex(&cw) == self.codeword_hex)
    }
}

pub fn write_golden<W: Write>(mut w: W, vectors: &[GoldenVector]) -> Result<()> {
    for v in vectors {
        serde_json::to_writer(&mut w, v)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_golden<R: BufRead>(r: R) -> Result<Vec<GoldenVector>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
