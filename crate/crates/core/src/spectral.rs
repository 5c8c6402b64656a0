// SPDX-License-Identifier: Apache-2.0
//! Spectra of grid-density time traces, peak picking, energy-ladder
//! reconstruction from level gaps, and error metrics.
//!
//! Traces of N_t + 1 samples are zero-padded to 2·N_t so the bin width is
//! 1/(2T). Frequencies are in THz.

use nalgebra::{DMatrix, DVector};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::linalg::C64;
use crate::qsim::BlockTag;
use crate::trace::TimeTrace;
use crate::units::thz_to_kcal;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SpectralError {
    #[error("trace needs at least 8 time steps, got {0}")]
    TooShort(usize),
    #[error("time axis is not uniform: {0}")]
    NonUniform(String),
    #[error("frequency axes differ ({0} vs {1})")]
    AxisMismatch(String, String),
    #[error("peak floor {0} outside (0, 1)")]
    BadFloor(f64),
    #[error("no level assignment within tolerance; unmatched peaks (THz): {0:?}")]
    Inconsistent(Vec<f64>),
    #[error("requested {requested} levels, only {available} available")]
    TooFewLevels { requested: usize, available: usize },
    #[error("trace shapes differ: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectrumOptions {
    /// Subtract the (window-weighted) mean before transforming.
    pub remove_mean: bool,
    pub hann: bool,
}

impl SpectrumOptions {
    pub const RAW: SpectrumOptions = SpectrumOptions { remove_mean: false, hann: false };
    /// Used for peak picking: leakage suppressed, DC removed.
    pub const PEAKS: SpectrumOptions = SpectrumOptions { remove_mean: true, hann: true };
}

/// I(ω; x) for every basis point; `values[x][bin]` over the full padded axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDensity {
    pub d_omega_thz: f64,
    pub fft_len: usize,
    pub n_samples: usize,
    pub options: SpectrumOptions,
    pub values: Vec<Vec<C64>>,
}

impl SpectralDensity {
    /// Signed frequency of a bin.
    pub fn frequency_thz(&self, bin: usize) -> f64 {
        let b = if bin <= self.fft_len / 2 { bin as f64 } else { bin as f64 - self.fft_len as f64 };
        b * self.d_omega_thz
    }

    /// Largest |I(ω;x)| over all points and bins, against the bound N_t + 1.
    pub fn max_magnitude(&self) -> f64 {
        self.values.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|k| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / (n - 1) as f64).cos())
        .collect()
}

pub fn trace_fft(trace: &TimeTrace, options: SpectrumOptions) -> Result<SpectralDensity, SpectralError> {
    let n = trace.n_times();
    if n < 9 {
        return Err(SpectralError::TooShort(n.saturating_sub(1)));
    }
    if !(trace.dt_fs.is_finite() && trace.dt_fs > 0.0) {
        return Err(SpectralError::NonUniform(format!("dt = {}", trace.dt_fs)));
    }
    let width = trace.n_points();
    if let Some(bad) = trace.slices.iter().position(|s| s.len() != width) {
        return Err(SpectralError::NonUniform(format!("slice {bad} has {} points, expected {width}", trace.slices[bad].len())));
    }
    let n_t = n - 1;
    let len = 2 * n_t;
    let window = if options.hann { hann(n) } else { vec![1.0; n] };
    let wsum: f64 = window.iter().sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(len);
    let mut values = Vec::with_capacity(width);
    for x in 0..width {
        let series = trace.series(x);
        let mean = if options.remove_mean {
            series.iter().zip(&window).map(|(r, w)| r * w).sum::<f64>() / wsum
        } else {
            0.0
        };
        let mut buf = vec![C64::new(0.0, 0.0); len];
        for (k, (r, w)) in series.iter().zip(&window).enumerate() {
            let v = C64::new((r - mean) * w, 0.0);
            // the last sample wraps onto bin 0 only if len < n, which never happens
            buf[k % len] += v;
        }
        fft.process(&mut buf);
        values.push(buf);
    }
    Ok(SpectralDensity { d_omega_thz: 1e3 / (len as f64 * trace.dt_fs), fft_len: len, n_samples: n, options, values })
}

/// P(ω) = Σ_x |I(ω;x)|² on the non-negative half axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSpectrum {
    pub d_omega_thz: f64,
    pub n_points: usize,
    pub n_samples: usize,
    pub values: Vec<f64>,
    #[serde(default)]
    pub sources: Vec<String>,
}

impl PowerSpectrum {
    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.values.len()).map(|b| b as f64 * self.d_omega_thz).collect()
    }

    /// n·(N_t + 1)² per contributing spectrum.
    pub fn bound(&self) -> f64 {
        let per = self.n_points as f64 * (self.n_samples as f64).powi(2);
        per * self.sources.len().max(1) as f64
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("frequency_thz,power\n");
        for (f, p) in self.frequencies().iter().zip(&self.values) {
            s.push_str(&format!("{f:.6},{p:.9e}\n"));
        }
        s
    }
}

pub fn power_spectrum(density: &SpectralDensity, source: impl Into<String>) -> PowerSpectrum {
    let half = density.fft_len / 2 + 1;
    let values = (0..half)
        .map(|b| density.values.iter().map(|row| row[b].norm_sqr()).sum())
        .collect();
    PowerSpectrum {
        d_omega_thz: density.d_omega_thz,
        n_points: density.values.len(),
        n_samples: density.n_samples,
        values,
        sources: vec![source.into()],
    }
}

/// Bin-wise sum over initial states.
pub fn cumulate(spectra: &[PowerSpectrum]) -> Result<PowerSpectrum, SpectralError> {
    let first = spectra.first().ok_or_else(|| SpectralError::Shape("no spectra to cumulate".into()))?;
    let mut out = PowerSpectrum { values: vec![0.0; first.values.len()], sources: Vec::new(), ..first.clone() };
    for s in spectra {
        let same = (s.d_omega_thz - first.d_omega_thz).abs() <= 1e-12 * first.d_omega_thz
            && s.values.len() == first.values.len()
            && s.n_points == first.n_points;
        if !same {
            return Err(SpectralError::AxisMismatch(
                format!("{} bins of {} THz", first.values.len(), first.d_omega_thz),
                format!("{} bins of {} THz", s.values.len(), s.d_omega_thz),
            ));
        }
        for (o, v) in out.values.iter_mut().zip(&s.values) {
            *o += v;
        }
        out.sources.extend(s.sources.iter().cloned());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub freq_thz: f64,
    pub height: f64,
}

/// Local maxima above `floor`·max (DC excluded), refined by a parabola
/// through the three bins around each maximum. Plateaus resolve to their
/// lowest bin.
pub fn detect_peaks(p: &PowerSpectrum, floor: f64) -> Result<Vec<Peak>, SpectralError> {
    if !(floor > 0.0 && floor < 1.0) {
        return Err(SpectralError::BadFloor(floor));
    }
    let v = &p.values;
    let n = v.len();
    if n < 3 {
        return Ok(Vec::new());
    }
    let max = v[1..].iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Ok(Vec::new());
    }
    let mut peaks = Vec::new();
    for i in 1..n {
        let left = v[i - 1];
        // the half axis ends at Nyquist; mirror across it
        let right = if i + 1 < n { v[i + 1] } else { v[i - 1] };
        if !(v[i] > left && v[i] >= right && v[i] >= floor * max) {
            continue;
        }
        if i == 1 {
            // neighbours the excluded DC bin: accept only if it is a true maximum
            if v[0] >= v[1] {
                continue;
            }
        }
        let denom = left - 2.0 * v[i] + right;
        let shift = if denom.abs() > 0.0 { (0.5 * (left - right) / denom).clamp(-0.5, 0.5) } else { 0.0 };
        peaks.push(Peak { freq_thz: (i as f64 + shift) * p.d_omega_thz, height: v[i] });
    }
    Ok(peaks)
}

/// Peaks from a block run, with the number of levels the block holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockPeaks {
    pub block: BlockTag,
    pub n_levels: usize,
    pub peaks_thz: Vec<f64>,
    pub tol_thz: f64,
}

/// Peaks from a full-Hamiltonian run; gaps above Nyquist appear folded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullPeaks {
    pub peaks_thz: Vec<f64>,
    /// Peak heights, used as match weights; empty means equal weights.
    #[serde(default)]
    pub heights: Vec<f64>,
    pub sample_rate_thz: f64,
    pub tol_thz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub thz: f64,
    pub kcal_mol: f64,
    pub block: BlockTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyLadder {
    pub levels: Vec<Level>,
    /// Offset of each block's ground level, same order as the input blocks.
    pub block_offsets_thz: Vec<f64>,
    /// RMS distance of block peaks to the nearest predicted gap.
    pub residual_thz: f64,
    /// Whether the offsets came from full-Hamiltonian peaks.
    pub anchored: bool,
}

impl EnergyLadder {
    pub fn thz(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.thz).collect()
    }

    pub fn kcal(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.kcal_mol).collect()
    }
}

/// Sort and merge peaks closer than `tol`.
pub fn merge_peaks(peaks: &[f64], tol: f64) -> Vec<f64> {
    let mut p: Vec<f64> = peaks.iter().copied().filter(|x| x.is_finite() && *x > 0.0).collect();
    p.sort_by(f64::total_cmp);
    let mut out: Vec<Vec<f64>> = Vec::new();
    for x in p {
        match out.last_mut() {
            Some(c) if x - c[c.len() - 1] < tol => c.push(x),
            _ => out.push(vec![x]),
        }
    }
    out.into_iter().map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
}

fn gaps(levels: &[f64]) -> Vec<(usize, usize, f64)> {
    let mut g = Vec::new();
    for i in 0..levels.len() {
        for j in i + 1..levels.len() {
            g.push((i, j, (levels[j] - levels[i]).abs()));
        }
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
struct Score {
    unmatched_peaks: usize,
    missing_gaps: usize,
    sq: f64,
}

fn score_levels(levels: &[f64], peaks: &[f64], tol: f64) -> Score {
    let g = gaps(levels);
    let mut s = Score { unmatched_peaks: 0, missing_gaps: 0, sq: 0.0 };
    for p in peaks {
        let d = g.iter().map(|&(_, _, x)| (x - p).abs()).fold(f64::INFINITY, f64::min);
        if d > tol {
            s.unmatched_peaks += 1;
        } else {
            s.sq += d * d;
        }
    }
    for &(_, _, x) in &g {
        if !peaks.iter().any(|p| (p - x).abs() <= tol) {
            s.missing_gaps += 1;
        }
    }
    s
}

/// Least-squares levels (ground pinned at 0) given peak-to-pair assignments,
/// with a weak pull toward `start` for levels no peak constrains.
fn refine(start: &[f64], peaks: &[f64], tol: f64) -> Vec<f64> {
    let m = start.len();
    if m < 2 {
        return start.to_vec();
    }
    let g = gaps(start);
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for p in peaks {
        let best = g
            .iter()
            .min_by(|a, b| (a.2 - p).abs().total_cmp(&(b.2 - p).abs()))
            .copied()
            .expect("at least one gap");
        if (best.2 - p).abs() > tol {
            continue;
        }
        let (i, j) = if start[best.1] >= start[best.0] { (best.0, best.1) } else { (best.1, best.0) };
        let mut r = vec![0.0; m - 1];
        if j > 0 {
            r[j - 1] += 1.0;
        }
        if i > 0 {
            r[i - 1] -= 1.0;
        }
        rows.push((r, *p));
    }
    let w = 1e-6;
    for k in 1..m {
        let mut r = vec![0.0; m - 1];
        r[k - 1] = w;
        rows.push((r, w * start[k]));
    }
    let a = DMatrix::from_fn(rows.len(), m - 1, |r, c| rows[r].0[c]);
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
    let sol = a.clone().svd(true, true).solve(&b, 1e-14).expect("svd solve");
    let mut out = vec![0.0];
    out.extend(sol.iter());
    out
}

fn combinations(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    if k > n {
        return;
    }
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// All best-scoring level sets (ground 0, ascending) of `n_levels` levels
/// whose pairwise gaps explain `peaks`. Mirror images tie and are both returned.
pub fn turnpike(peaks: &[f64], n_levels: usize, tol: f64) -> Result<Vec<Vec<f64>>, SpectralError> {
    let p = merge_peaks(peaks, tol);
    if n_levels <= 1 {
        return if p.is_empty() { Ok(vec![vec![0.0]]) } else { Err(SpectralError::Inconsistent(p)) };
    }
    let Some(&top) = p.last() else {
        return Err(SpectralError::Inconsistent(Vec::new()));
    };
    let mut cand: Vec<f64> = p.iter().flat_map(|&x| [x, top - x]).filter(|&x| x > 0.0 && x < top).collect();
    cand = merge_peaks(&cand, tol * 1e-3);
    let inner = n_levels - 2;
    let mut best: Option<Score> = None;
    let mut sols: Vec<Vec<f64>> = Vec::new();
    let mut worst_unmatched = p.clone();
    combinations(cand.len(), inner, |ix| {
        let mut lv = vec![0.0];
        lv.extend(ix.iter().map(|&i| cand[i]));
        lv.push(top);
        let lv = refine(&lv, &p, tol);
        let mut sorted = lv.clone();
        sorted.sort_by(f64::total_cmp);
        let s = score_levels(&sorted, &p, tol);
        if s.unmatched_peaks > 0 {
            if s.unmatched_peaks < worst_unmatched.len() {
                let g = gaps(&sorted);
                worst_unmatched = p
                    .iter()
                    .copied()
                    .filter(|x| g.iter().all(|&(_, _, y)| (y - x).abs() > tol))
                    .collect();
            }
            return;
        }
        let key = (s.missing_gaps, s.sq);
        match best {
            Some(b) if key.0 > b.missing_gaps || (key.0 == b.missing_gaps && key.1 > b.sq + 1e-12 * tol * tol) => {}
            Some(b) if key.0 == b.missing_gaps && (key.1 - b.sq).abs() <= 1e-12 * tol * tol => {
                if !sols.iter().any(|o| same_levels(o, &sorted, tol * 1e-3)) {
                    sols.push(sorted);
                }
            }
            _ => {
                best = Some(s);
                sols = vec![sorted];
            }
        }
    });
    if inner == 0 {
        let lv = vec![0.0, top];
        let s = score_levels(&lv, &p, tol);
        if s.unmatched_peaks == 0 {
            return Ok(vec![lv]);
        }
    }
    if sols.is_empty() {
        return Err(SpectralError::Inconsistent(worst_unmatched));
    }
    // the mirror of a solution explains the same gaps
    let mirrors: Vec<Vec<f64>> = sols
        .iter()
        .map(|s| {
            let t = s[s.len() - 1];
            let mut m: Vec<f64> = s.iter().map(|x| t - x).collect();
            m.sort_by(f64::total_cmp);
            m
        })
        .collect();
    for m in mirrors {
        if !sols.iter().any(|o| same_levels(o, &m, tol * 1e-3)) {
            sols.push(m);
        }
    }
    sols.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    Ok(sols)
}

fn same_levels(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

/// |ν| folded into [0, fs/2].
pub fn fold(nu: f64, fs: f64) -> f64 {
    (nu - (nu / fs).round() * fs).abs()
}

/// Height-weighted unmatched fraction and weighted squared residual of the
/// full peaks against the folded gaps of `levels`. Weighting keeps a few
/// faint spurious peaks from outvoting the dominant ones.
fn full_score(levels: &[f64], full: &[FullPeaks]) -> (f64, f64) {
    let mut unmatched = 0.0;
    let mut sq = 0.0;
    let mut total = 0.0;
    for f in full {
        let pred: Vec<f64> = gaps(levels).iter().map(|g| fold(g.2, f.sample_rate_thz)).collect();
        for (k, p) in f.peaks_thz.iter().enumerate() {
            let w = f.heights.get(k).copied().unwrap_or(1.0);
            total += w;
            let d = pred.iter().map(|x| (x - p).abs()).fold(f64::INFINITY, f64::min);
            if d > f.tol_thz {
                unmatched += w;
            } else {
                sq += w * d * d;
            }
        }
    }
    if total > 0.0 {
        (unmatched / total, sq / total)
    } else {
        (0.0, 0.0)
    }
}

/// Merge full peaks closer than their tolerance, summing heights and
/// averaging positions by height.
fn merge_full(f: &FullPeaks) -> FullPeaks {
    let mut pw: Vec<(f64, f64)> = f
        .peaks_thz
        .iter()
        .enumerate()
        .map(|(k, &p)| (p, f.heights.get(k).copied().unwrap_or(1.0).max(0.0)))
        .filter(|(p, _)| p.is_finite() && *p > 0.0)
        .collect();
    pw.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<Vec<(f64, f64)>> = Vec::new();
    for x in pw {
        match out.last_mut() {
            Some(c) if x.0 - c[c.len() - 1].0 < f.tol_thz => c.push(x),
            _ => out.push(vec![x]),
        }
    }
    let mut peaks = Vec::new();
    let mut heights = Vec::new();
    for c in out {
        let w: f64 = c.iter().map(|x| x.1).sum();
        let mean = if w > 0.0 { c.iter().map(|x| x.0 * x.1).sum::<f64>() / w } else { c.iter().map(|x| x.0).sum::<f64>() / c.len() as f64 };
        peaks.push(mean);
        heights.push(w);
    }
    FullPeaks { peaks_thz: peaks, heights, ..f.clone() }
}

/// Offsets that differ by the sample rate fold every cross gap identically,
/// so reduce to the representative nearest zero when all full runs share
/// one sample rate.
fn principal_offset(delta: f64, full: &[FullPeaks]) -> f64 {
    let fs = full[0].sample_rate_thz;
    if full.iter().all(|f| (f.sample_rate_thz - fs).abs() <= 1e-9 * fs) {
        let r = delta - (delta / fs).round() * fs;
        // keep the positive representative on the ±fs/2 edge
        if (r + fs / 2.0).abs() < 1e-12 * fs {
            fs / 2.0
        } else {
            r
        }
    } else {
        delta
    }
}

fn combined(parts: &[(&[f64], f64)]) -> Vec<f64> {
    let mut all: Vec<f64> = parts.iter().flat_map(|(l, d)| l.iter().map(move |x| x + d)).collect();
    all.sort_by(f64::total_cmp);
    all
}

/// Assemble the energy ladder from per-block gap peaks, placing later blocks
/// relative to the first using full-Hamiltonian peaks. Folded cross gaps fix
/// an offset only up to the sample rate, so the smallest offset wins ties.
/// Without full peaks every block starts at 0.
pub fn reconstruct_ladder(blocks: &[BlockPeaks], full: &[FullPeaks]) -> Result<EnergyLadder, SpectralError> {
    if blocks.is_empty() {
        return Err(SpectralError::Shape("no block peaks".into()));
    }
    let mut per_block = Vec::new();
    for b in blocks {
        per_block.push(prefer_widening(turnpike(&b.peaks_thz, b.n_levels, b.tol_thz)?));
    }
    let full: Vec<FullPeaks> = full
        .iter()
        .map(merge_full)
        .filter(|f| !f.peaks_thz.is_empty())
        .collect();
    let anchored = !full.is_empty();

    let span = per_block.iter().flatten().flat_map(|l| l.last().copied()).fold(0.0, f64::max);
    let chosen: Vec<(Vec<f64>, f64)> = if !anchored {
        per_block.iter().map(|sols| (sols[0].clone(), 0.0)).collect()
    } else {
        // every orientation of the first block is a starting prefix; each
        // further block is placed against the best prefix so far
        let mut prefixes: Vec<Vec<(Vec<f64>, f64)>> = per_block[0].iter().map(|s| vec![(s.clone(), 0.0)]).collect();
        for sols in &per_block[1..] {
            let mut best: Option<(Key, Placement)> = None;
            for prefix in &prefixes {
                let base = combined(&prefix.iter().map(|(l, d)| (l.as_slice(), *d)).collect::<Vec<_>>());
                for s in sols {
                    for delta in offset_candidates(&base, s, &full, span) {
                        let delta = principal_offset(polish_offset(&base, s, delta, &full), &full);
                        let mut parts: Vec<(&[f64], f64)> = prefix.iter().map(|(l, d)| (l.as_slice(), *d)).collect();
                        parts.push((s.as_slice(), delta));
                        let (u, sq) = full_score(&combined(&parts), &full);
                        let key = (u, sq, delta.abs());
                        if best.as_ref().is_none_or(|(k, _)| better(key, *k)) {
                            let mut c = prefix.clone();
                            c.push((s.clone(), delta));
                            best = Some((key, c));
                        }
                    }
                }
            }
            prefixes = vec![best.expect("at least one candidate").1];
        }
        prefixes
            .into_iter()
            .min_by(|a, b| {
                let sa = full_score(&combined(&a.iter().map(|(l, d)| (l.as_slice(), *d)).collect::<Vec<_>>()), &full);
                let sb = full_score(&combined(&b.iter().map(|(l, d)| (l.as_slice(), *d)).collect::<Vec<_>>()), &full);
                sa.0.total_cmp(&sb.0).then(sa.1.total_cmp(&sb.1))
            })
            .expect("at least one prefix")
    };

    let mut levels = Vec::new();
    let mut sq = 0.0;
    let mut count = 0usize;
    for (b, (lv, d)) in blocks.iter().zip(&chosen) {
        let p = merge_peaks(&b.peaks_thz, b.tol_thz);
        let s = score_levels(lv, &p, b.tol_thz);
        sq += s.sq;
        count += p.len();
        levels.extend(lv.iter().map(|x| (x + d, b.block)));
    }
    levels.sort_by(|a, b| a.0.total_cmp(&b.0));
    let ground = levels[0].0;
    let levels = levels
        .into_iter()
        .map(|(x, block)| Level { thz: x - ground, kcal_mol: thz_to_kcal(x - ground), block })
        .collect();
    Ok(EnergyLadder {
        levels,
        block_offsets_thz: chosen.iter().map(|c| c.1 - ground).collect(),
        residual_thz: if count > 0 { (sq / count as f64).sqrt() } else { 0.0 },
        anchored,
    })
}

/// Gap data cannot tell a ladder from its mirror image. Confined
/// vibrational ladders widen toward the top, so keep the orientation whose
/// last spacing is at least its first.
fn prefer_widening(sols: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let widening = |s: &Vec<f64>| {
        let n = s.len();
        if n < 3 {
            return 0.0;
        }
        (s[n - 1] - s[n - 2]) - (s[1] - s[0])
    };
    let kept: Vec<Vec<f64>> = sols.iter().filter(|s| widening(s) >= -1e-9 * s[s.len() - 1].abs().max(1.0)).cloned().collect();
    if kept.is_empty() {
        sols
    } else {
        kept
    }
}

/// (unmatched weight, squared error, |offset|), compared in order.
type Key = (f64, f64, f64);
/// Block ladders with their energy offsets.
type Placement = Vec<(Vec<f64>, f64)>;

fn better(a: Key, b: Key) -> bool {
    const EPS: f64 = 1e-12;
    if (a.0 - b.0).abs() > 1e-9 {
        return a.0 < b.0;
    }
    if (a.1 - b.1).abs() > EPS * (1.0 + b.1.abs()) {
        return a.1 < b.1;
    }
    a.2 < b.2 - EPS
}

/// Offsets placing `block` so that some cross gap folds onto some full peak.
fn offset_candidates(base: &[f64], block: &[f64], full: &[FullPeaks], span: f64) -> Vec<f64> {
    let mut out = vec![0.0];
    for f in full {
        let fs = f.sample_rate_thz;
        let n_alias = (2.0 * span / fs).ceil() as i64 + 1;
        for p in &f.peaks_thz {
            for a in base {
                for b in block {
                    for n in -n_alias..=n_alias {
                        for sign in [-1.0, 1.0] {
                            let d = a - b + sign * p + n as f64 * fs;
                            if d.abs() <= span {
                                out.push(principal_offset(d, full));
                            }
                        }
                    }
                }
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    out
}

/// Local scan of the offset around a candidate within the finest tolerance.
fn polish_offset(base: &[f64], block: &[f64], delta: f64, full: &[FullPeaks]) -> f64 {
    let tol = full.iter().map(|f| f.tol_thz).fold(f64::INFINITY, f64::min);
    let eval = |d: f64| {
        let mut parts: Vec<f64> = base.to_vec();
        parts.extend(block.iter().map(|x| x + d));
        parts.sort_by(f64::total_cmp);
        full_score(&parts, full)
    };
    let mut best = (eval(delta), delta);
    for k in -40..=40 {
        let d = delta + tol * k as f64 / 40.0;
        let s = eval(d);
        if s.0 < best.0 .0 - 1e-9 || ((s.0 - best.0 .0).abs() <= 1e-9 && s.1 < best.0 .1) {
            best = (s, d);
        }
    }
    best.1
}

/// Mean |E_recon − E_exact| over the first `k` levels, both shifted to ground 0.
pub fn ladder_mae(recon: &[f64], exact: &[f64], k: usize) -> Result<f64, SpectralError> {
    let avail = recon.len().min(exact.len());
    if k > avail || k == 0 {
        return Err(SpectralError::TooFewLevels { requested: k, available: avail });
    }
    let prep = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        let g = v[0];
        v.iter().map(|x| x - g).collect::<Vec<_>>()
    };
    let (r, e) = (prep(recon), prep(exact));
    Ok(r.iter().zip(&e).take(k).map(|(a, b)| (a - b).abs()).sum::<f64>() / k as f64)
}

/// Ascending sums a_i + b_j (independent-mode 2-D ladder).
pub fn kronecker_ladder(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = a.iter().flat_map(|x| b.iter().map(move |y| x + y)).collect();
    out.sort_by(f64::total_cmp);
    out
}

/// RMS density difference over grid points and time samples.
pub fn wavepacket_error(quantum: &TimeTrace, classical: &TimeTrace) -> Result<f64, SpectralError> {
    if quantum.n_times() != classical.n_times()
        || quantum.n_points() != classical.n_points()
        || (quantum.dt_fs - classical.dt_fs).abs() > 1e-9 * classical.dt_fs
    {
        return Err(SpectralError::Shape(format!(
            "{}x{} at {} fs vs {}x{} at {} fs",
            quantum.n_times(),
            quantum.n_points(),
            quantum.dt_fs,
            classical.n_times(),
            classical.n_points(),
            classical.dt_fs
        )));
    }
    let n = (quantum.n_times() * quantum.n_points()).max(1) as f64;
    let sq: f64 = quantum
        .slices
        .iter()
        .zip(&classical.slices)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)))
        .sum();
    Ok((sq / n).sqrt())
}

/// Peak of |ρ(t) − mean| over a trace series, used to compare oscillation amplitudes.
pub fn oscillation_amplitude(trace: &TimeTrace) -> f64 {
    (0..trace.n_points())
        .map(|x| {
            let s = trace.series(x);
            let m = s.iter().sum::<f64>() / s.len() as f64;
            s.iter().map(|v| (v - m).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{classical_delta_trace, SimulationSchedule};
    use crate::linalg::{random_symmetric, sym_eigen};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tone(freq_thz: f64, dt_fs: f64, n_t: usize) -> TimeTrace {
        let slices = (0..=n_t)
            .map(|k| vec![0.5 + 0.25 * (2.0 * std::f64::consts::PI * freq_thz * 1e-3 * dt_fs * k as f64).cos()])
            .collect();
        TimeTrace::new(dt_fs, slices)
    }

    #[test]
    fn constant_trace() {
        let t = TimeTrace::new(2.5, vec![vec![0.3, 0.7]; 161]);
        let raw = trace_fft(&t, SpectrumOptions::RAW).unwrap();
        for row in &raw.values {
            let dc = row[0].norm();
            assert!(row.iter().all(|z| z.norm() <= dc));
        }
        let centred = trace_fft(&t, SpectrumOptions { remove_mean: true, hann: false }).unwrap();
        assert!(centred.max_magnitude() <= 1e-10);
    }

    #[test]
    fn on_grid_tone_lands_on_its_bin() {
        let dt = 2.5;
        let d = 1e3 / (320.0 * dt);
        let spec = trace_fft(&tone(10.0 * d, dt, 160), SpectrumOptions { remove_mean: true, hann: false }).unwrap();
        let row = &spec.values[0];
        let arg = (0..row.len()).max_by(|&a, &b| row[a].norm().total_cmp(&row[b].norm())).unwrap();
        assert!(arg == 10 || arg == 310);
        assert!((row[10].norm() - row[310].norm()).abs() < 1e-9);
    }

    #[test]
    fn axis_matches_schedule() {
        let t = TimeTrace::new(2.5, vec![vec![1.0]; 161]);
        let s = trace_fft(&t, SpectrumOptions::RAW).unwrap();
        assert!((s.d_omega_thz - 1.25).abs() < 1e-12);
        assert!((s.frequency_thz(s.fft_len / 2) - 200.0).abs() < 1e-9);
        assert!(matches!(trace_fft(&TimeTrace::new(1.0, vec![vec![1.0]; 5]), SpectrumOptions::RAW), Err(SpectralError::TooShort(4))));
    }

    #[test]
    fn zero_trace_and_bound_saturation() {
        let z = trace_fft(&TimeTrace::new(1.0, vec![vec![0.0; 3]; 20]), SpectrumOptions::RAW).unwrap();
        assert!(power_spectrum(&z, "z").values.iter().all(|&v| v == 0.0));
        let one = trace_fft(&TimeTrace::new(1.0, vec![vec![1.0]; 20]), SpectrumOptions::RAW).unwrap();
        let p = power_spectrum(&one, "one");
        assert!((p.values[0] - 400.0).abs() < 1e-9);
        assert!((p.values[0] - p.bound()).abs() < 1e-9);
    }

    #[test]
    fn two_level_superposition_has_one_peak() {
        let h = crate::grid::diag_from(&[0.0, crate::units::thz_to_hartree(30.0)]);
        let mut h2 = h.clone();
        h2[(0, 1)] = 0.0;
        let v = nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]) / 2f64.sqrt();
        let hx = &v * h2 * v.transpose();
        let sched = SimulationSchedule::new(2.5, 400.0);
        let tr = classical_delta_trace(&hx, 0, &sched).unwrap();
        let p = power_spectrum(&trace_fft(&tr, SpectrumOptions::PEAKS).unwrap(), "two");
        let peaks = detect_peaks(&p, 0.02).unwrap();
        assert_eq!(peaks.len(), 1);
        assert!((peaks[0].freq_thz - 30.0).abs() < sched.d_omega_thz() / 2.0);
    }

    #[test]
    fn off_grid_tone_interpolates() {
        let dt = 2.5;
        let d = 1e3 / (320.0 * dt);
        let p = power_spectrum(&trace_fft(&tone(10.3 * d, dt, 160), SpectrumOptions::PEAKS).unwrap(), "t");
        let peaks = detect_peaks(&p, 0.02).unwrap();
        assert_eq!(peaks.len(), 1);
        assert!((peaks[0].freq_thz - 10.3 * d).abs() < d / 4.0);
    }

    #[test]
    fn flat_and_two_tone_spectra() {
        let flat = PowerSpectrum { d_omega_thz: 1.0, n_points: 1, n_samples: 9, values: vec![1.0; 17], sources: vec![] };
        assert!(detect_peaks(&flat, 0.02).unwrap().is_empty());
        assert!(detect_peaks(&flat, 1.0).is_err());
        let dt = 2.5;
        let d = 1e3 / (320.0 * dt);
        let mut t = tone(20.0 * d, dt, 160);
        let t2 = tone(27.0 * d, dt, 160);
        for (a, b) in t.slices.iter_mut().zip(&t2.slices) {
            a[0] = 0.5 * (a[0] + b[0]);
        }
        let p = power_spectrum(&trace_fft(&t, SpectrumOptions::PEAKS).unwrap(), "t");
        assert_eq!(detect_peaks(&p, 0.02).unwrap().len(), 2);
    }

    #[test]
    fn cumulate_scales_and_checks_axes() {
        let p = power_spectrum(&trace_fft(&tone(30.0, 2.5, 160), SpectrumOptions::PEAKS).unwrap(), "a");
        assert_eq!(cumulate(std::slice::from_ref(&p)).unwrap().values, p.values);
        let three = cumulate(&[p.clone(), p.clone(), p.clone()]).unwrap();
        for (a, b) in three.values.iter().zip(&p.values) {
            assert!((a - 3.0 * b).abs() <= 1e-12 * b.abs().max(1.0));
        }
        let q = power_spectrum(&trace_fft(&tone(30.0, 2.0, 160), SpectrumOptions::PEAKS).unwrap(), "b");
        assert!(matches!(cumulate(&[p, q]), Err(SpectralError::AxisMismatch(..))));
    }

    #[test]
    fn parseval_and_cauchy_schwarz() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = random_symmetric(4, &mut rng) * 0.01;
        let sched = SimulationSchedule::new(2.5, 400.0);
        let tr = classical_delta_trace(&h, 1, &sched).unwrap();
        let s = trace_fft(&tr, SpectrumOptions::RAW).unwrap();
        let n_t = tr.n_times() - 1;
        for x in 0..4 {
            let lhs: f64 = s.values[x].iter().map(|z| z.norm_sqr()).sum();
            let rhs = (2 * n_t) as f64 * tr.series(x).iter().map(|r| r * r).sum::<f64>();
            assert!((lhs - rhs).abs() <= 1e-8 * rhs);
            let sum_rho: f64 = tr.series(x).iter().sum();
            assert!(s.values[x].iter().all(|z| z.norm() <= sum_rho + 1e-9));
        }
        assert!(s.max_magnitude() <= tr.n_times() as f64);
        let p = power_spectrum(&s, "r");
        assert!(p.values.iter().all(|&v| v >= 0.0 && v <= p.bound()));
    }

    #[test]
    fn three_level_turnpike() {
        let sols = turnpike(&[1.0, 2.0, 3.0], 3, 0.1).unwrap();
        assert!(sols.iter().any(|s| same_levels(s, &[0.0, 1.0, 3.0], 1e-9)));
        assert!(sols.iter().all(|s| same_levels(s, &[0.0, 1.0, 3.0], 1e-9) || same_levels(s, &[0.0, 2.0, 3.0], 1e-9)));
        let l = reconstruct_ladder(
            &[BlockPeaks { block: BlockTag::Upper, n_levels: 3, peaks_thz: vec![3.0, 1.0, 2.0], tol_thz: 0.1 }],
            &[],
        )
        .unwrap();
        assert!(same_levels(&l.thz(), &[0.0, 1.0, 3.0], 1e-9));
    }

    #[test]
    fn exact_four_level_gaps() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let (e, _) = sym_eigen(&random_symmetric(4, &mut rng));
            let lv: Vec<f64> = e.iter().map(|x| 50.0 * (x - e[0])).collect();
            let g: Vec<f64> = gaps(&lv).iter().map(|x| x.2).collect();
            let sols = turnpike(&g, 4, 0.5).unwrap();
            assert!(sols.iter().any(|s| same_levels(s, &lv, 1e-9)), "{lv:?} {sols:?}");
        }
    }

    #[test]
    fn noisy_gaps_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let tol = 0.625;
        let mut ok = 0;
        for _ in 0..100 {
            let mut lv = vec![0.0];
            for _ in 0..3 {
                let last = *lv.last().unwrap();
                lv.push(last + rng.gen_range(8.0..60.0));
            }
            let g: Vec<f64> = gaps(&lv).iter().map(|x| x.2 + rng.gen_range(-tol / 4.0..tol / 4.0)).collect();
            if let Ok(sols) = turnpike(&g, 4, tol) {
                if sols.iter().any(|s| s.iter().zip(&lv).all(|(a, b)| (a - b).abs() <= tol / 2.0)) {
                    ok += 1;
                }
            }
        }
        assert!(ok >= 95, "{ok}");
    }

    #[test]
    fn inconsistent_peaks_are_listed() {
        match turnpike(&[1.0, 2.0, 3.0, 100.0, 7.77], 3, 0.01) {
            Err(SpectralError::Inconsistent(u)) => assert!(!u.is_empty()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn two_blocks_anchored_through_folded_peaks() {
        let upper = [0.0, 26.19, 71.67, 129.89];
        let lower = [2.36, 44.68, 101.47, 169.0];
        let bp = |lv: &[f64], block| {
            let base = lv[0];
            let rel: Vec<f64> = lv.iter().map(|x| x - base).collect();
            BlockPeaks { block, n_levels: 4, peaks_thz: gaps(&rel).iter().map(|g| g.2).collect(), tol_thz: 0.625 }
        };
        let all: Vec<f64> = upper.iter().chain(&lower).copied().collect();
        let fs = 10.0;
        let full = FullPeaks {
            peaks_thz: gaps(&all).iter().map(|g| fold(g.2, fs)).filter(|&f| f > 0.1 && f < 4.9).collect(),
            heights: Vec::new(),
            sample_rate_thz: fs,
            tol_thz: 0.0156,
        };
        let l = reconstruct_ladder(&[bp(&upper, BlockTag::Upper), bp(&lower, BlockTag::Lower)], std::slice::from_ref(&full)).unwrap();
        let mut truth = all.clone();
        truth.sort_by(f64::total_cmp);
        assert!(same_levels(&l.thz(), &truth, 1e-6), "{:?}", l.thz());
        assert!(l.anchored);
        // input order must not matter
        let mut shuffled = full;
        shuffled.peaks_thz.reverse();
        let mut b = bp(&lower, BlockTag::Lower);
        b.peaks_thz.reverse();
        let l2 = reconstruct_ladder(&[bp(&upper, BlockTag::Upper), b], &[shuffled]).unwrap();
        assert_eq!(l.thz(), l2.thz());
    }

    #[test]
    fn faint_spurious_peaks_do_not_move_the_offset() {
        let upper = [0.0, 26.19, 71.67, 129.89];
        let lower = [2.36, 44.68, 101.47, 169.0];
        // block ladders known only to ~0.03 THz, coarser than the full-run bins
        let jitter = [0.0, 0.02, -0.03, 0.01];
        let bp = |lv: &[f64], block| {
            let rel: Vec<f64> = lv.iter().zip(&jitter).map(|(x, j)| x - lv[0] + j).collect();
            BlockPeaks { block, n_levels: 4, peaks_thz: gaps(&rel).iter().map(|g| g.2).collect(), tol_thz: 0.625 }
        };
        let all: Vec<f64> = upper.iter().chain(&lower).copied().collect();
        let fs = 10.0;
        let mut peaks: Vec<f64> = gaps(&all).iter().map(|g| fold(g.2, fs)).filter(|&f| f > 0.1 && f < 4.9).collect();
        let mut heights: Vec<f64> = peaks.iter().map(|p| if (p - 2.36).abs() < 1e-9 { 10.0 } else { 1.0 }).collect();
        for extra in [0.45, 1.51, 3.72, 4.21] {
            peaks.push(extra);
            heights.push(0.2);
        }
        let full = FullPeaks { peaks_thz: peaks, heights, sample_rate_thz: fs, tol_thz: 0.0156 };
        let l = reconstruct_ladder(&[bp(&upper, BlockTag::Upper), bp(&lower, BlockTag::Lower)], &[full]).unwrap();
        let lower_ground = l.levels.iter().find(|x| x.block == BlockTag::Lower).unwrap().thz;
        let upper_ground = l.levels.iter().find(|x| x.block == BlockTag::Upper).unwrap().thz;
        assert!((lower_ground - upper_ground - 2.36).abs() < 0.05, "{:?}", l.thz());
    }

    #[test]
    fn mae_arithmetic() {
        let e = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(ladder_mae(&e, &e, 4).unwrap(), 0.0);
        let r = [0.0, 1.1, 2.1, 3.1];
        assert!((ladder_mae(&r, &e, 4).unwrap() - 0.1 * 3.0 / 4.0).abs() < 1e-12);
        assert!(ladder_mae(&r, &e, 5).is_err());
        assert_eq!(kronecker_ladder(&[0.0, 1.0], &[0.0, 0.5]), vec![0.0, 0.5, 1.0, 1.5]);
    }

    #[test]
    fn wavepacket_error_basics() {
        let a = TimeTrace::new(1.0, vec![vec![0.5, 0.5]; 10]);
        assert_eq!(wavepacket_error(&a, &a).unwrap(), 0.0);
        let b = TimeTrace::new(1.0, vec![vec![0.6, 0.4]; 10]);
        assert!((wavepacket_error(&a, &b).unwrap() - 0.1).abs() < 1e-12);
        assert!(wavepacket_error(&a, &TimeTrace::new(1.0, vec![vec![1.0]; 10])).is_err());
    }
}
