//! Generalized fast-convolution synthesis filter bank.
//!
//! Streaming form, per block `r`:
//!
//! ```text
//!  x_ZP,m[r·L_S .. r·L_S+L_m] --a--> FFT L_m --shift--> ·d_m·sqrt(N/L_m)·Θ_m(r) --> bins of frame r
//!  frame r --IFFT N / N--> ·s --> overlap-add at r·N_S
//! ```
//!
//! A dense matrix form of the same operator is kept as a reference model.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::dsp;
use crate::numerology::FcConfig;
use crate::windowing::{AnalysisWindow, WindowSet};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Direct-sum linear convolution.
pub fn linear_convolve(x: &[Complex64], h: &[Complex64]) -> Vec<Complex64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let mut y = vec![ZERO; x.len() + h.len() - 1];
    for (i, a) in x.iter().enumerate() {
        for (j, b) in h.iter().enumerate() {
            y[i + j] += a * b;
        }
    }
    y
}

/// Direct-sum cyclic convolution of period `n`.
pub fn cyclic_convolve(x: &[Complex64], h: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut y = vec![ZERO; n];
    for (i, a) in x.iter().enumerate() {
        for (j, b) in h.iter().enumerate() {
            y[(i + j) % n] += a * b;
        }
    }
    y
}

/// Block-level OLS windows: all-ones analysis, rectangular synthesis
/// covering the middle `N_S` samples.
pub fn ols_windows(cfg: &FcConfig) -> WindowSet {
    let n_l = cfg.n_o.div_ceil(2);
    let mut s = vec![0.0; cfg.n_long];
    s[n_l..n_l + cfg.n_s].iter_mut().for_each(|v| *v = 1.0);
    WindowSet {
        fd: cfg.geometry.iter().map(|g| vec![1.0; g.l_short]).collect(),
        analysis: cfg.geometry.iter().map(|g| AnalysisWindow::Block(vec![1.0; g.l_short])).collect(),
        synthesis: s,
    }
}

/// Block-level OLA windows: rectangular analysis over the middle `L_S`
/// samples, all-ones synthesis.
pub fn ola_windows(cfg: &FcConfig) -> WindowSet {
    WindowSet {
        fd: cfg.geometry.iter().map(|g| vec![1.0; g.l_short]).collect(),
        analysis: cfg
            .geometry
            .iter()
            .map(|g| {
                let l_l = g.s_f.div_ceil(2);
                let mut a = vec![0.0; g.l_short];
                a[l_l..l_l + g.l_s].iter_mut().for_each(|v| *v = 1.0);
                AnalysisWindow::Block(a)
            })
            .collect(),
        synthesis: vec![1.0; cfg.n_long],
    }
}

/// Θ_m(r) from the exact phase fraction (r·c·L_S mod L) / L.
pub fn block_phase(r: usize, center_bin: i64, l_s: usize, l_short: usize) -> Complex64 {
    let l = l_short as i128;
    let num = ((r as i128) * (center_bin as i128) * (l_s as i128)).rem_euclid(l);
    Complex64::from_polar(1.0, 2.0 * PI * num as f64 / l as f64)
}

/// Target long-transform bin of shifted short-transform index `l`.
pub fn target_bin(l: usize, center_bin: i64, l_short: usize, n_long: usize) -> usize {
    (center_bin - l_short.div_ceil(2) as i64 + l as i64).rem_euclid(n_long as i64) as usize
}

struct SubbandPlan {
    l_short: usize,
    l_s: usize,
    s_f: usize,
    t_len: usize,
    center_bin: i64,
    /// (shifted index source bin, target bin, d·sqrt(N/L)) for nonzero weights.
    taps: Vec<(usize, usize, f64)>,
    analysis: AnalysisKind,
}

enum AnalysisKind {
    Block(Vec<f64>),
    /// CP-extended window of one symbol period.
    Periodic(Vec<f64>),
}

/// Streaming synthesis filter bank with fixed windows.
pub struct FcBlockPipeline {
    cfg: FcConfig,
    synthesis: Vec<f64>,
    plans: Vec<SubbandPlan>,
}

impl FcBlockPipeline {
    pub fn new(cfg: &FcConfig, windows: &WindowSet) -> Result<Self> {
        windows.check(cfg)?;
        let n = cfg.n_long;
        let plans = (0..cfg.num_subbands())
            .map(|m| {
                let g = &cfg.geometry[m];
                let sb = &cfg.subbands[m];
                let l = g.l_short;
                let gain = (n as f64 / l as f64).sqrt();
                let half = l.div_ceil(2);
                let taps = windows.fd[m]
                    .iter()
                    .enumerate()
                    .filter(|(_, &d)| d != 0.0)
                    .map(|(i, &d)| ((i + half) % l, target_bin(i, sb.center_bin, l, n), d * gain))
                    .collect();
                let analysis = match &windows.analysis[m] {
                    AnalysisWindow::Block(a) => AnalysisKind::Block(a.clone()),
                    AnalysisWindow::Aligned(a) => {
                        let lo = a.len();
                        let mut ext = a[lo - sb.l_cp..].to_vec();
                        ext.extend_from_slice(a);
                        AnalysisKind::Periodic(ext)
                    }
                };
                SubbandPlan {
                    l_short: l,
                    l_s: g.l_s,
                    s_f: g.s_f,
                    t_len: g.t_len,
                    center_bin: sb.center_bin,
                    taps,
                    analysis,
                }
            })
            .collect();
        Ok(FcBlockPipeline {
            cfg: cfg.clone(),
            synthesis: windows.synthesis.clone(),
            plans,
        })
    }

    pub fn config(&self) -> &FcConfig {
        &self.cfg
    }

    /// Samples of block `r` of subband `m` read from the unpadded burst `x`.
    fn load_block(&self, m: usize, r: usize, x: &[Complex64], buf: &mut [Complex64]) {
        let p = &self.plans[m];
        let start = (r * p.l_s) as i64 - p.s_f as i64;
        for (k, b) in buf.iter_mut().enumerate() {
            let t = start + k as i64;
            *b = if t >= 0 && (t as usize) < x.len() { x[t as usize] } else { ZERO };
        }
        match &p.analysis {
            AnalysisKind::Block(a) => buf.iter_mut().zip(a).for_each(|(b, w)| *b *= *w),
            AnalysisKind::Periodic(ext) => {
                let period = ext.len() as i64;
                for (k, b) in buf.iter_mut().enumerate() {
                    *b *= ext[(start + k as i64).rem_euclid(period) as usize];
                }
            }
        }
    }

    fn accumulate(&self, m: usize, r: usize, block: &mut [Complex64], frame: &mut [Complex64]) {
        let p = &self.plans[m];
        dsp::fft_inplace(block, true);
        let theta = block_phase(r, p.center_bin, p.l_s, p.l_short);
        for &(src, dst, w) in &p.taps {
            frame[dst] += block[src] * (theta * w);
        }
    }

    /// Frequency-domain contribution of one block of subband `m`, before
    /// combining with other subbands. `x_block` holds the `L_m` zero-padded
    /// input samples of the block.
    pub fn fc_synthesize_block(&self, x_block: &[Complex64], m: usize, r: usize) -> Result<Vec<Complex64>> {
        if r >= self.cfg.r_max {
            return Err(Error::Config(format!("block index {r} exceeds R_max = {}", self.cfg.r_max)));
        }
        let p = &self.plans[m];
        if x_block.len() != p.l_short {
            return Err(Error::Length {
                what: "FC block",
                expected: p.l_short,
                got: x_block.len(),
            });
        }
        let mut block = x_block.to_vec();
        match &p.analysis {
            AnalysisKind::Block(a) => block.iter_mut().zip(a).for_each(|(b, w)| *b *= *w),
            AnalysisKind::Periodic(ext) => {
                let start = (r * p.l_s) as i64 - p.s_f as i64;
                for (k, b) in block.iter_mut().enumerate() {
                    *b *= ext[(start + k as i64).rem_euclid(ext.len() as i64) as usize];
                }
            }
        }
        let mut frame = vec![ZERO; self.cfg.n_long];
        self.accumulate(m, r, &mut block, &mut frame);
        Ok(frame)
    }

    /// Full overlap-add output for unpadded low-rate bursts, one per subband.
    pub fn fc_synthesize(&self, inputs: &[&[Complex64]]) -> Result<Vec<Complex64>> {
        if inputs.len() != self.plans.len() {
            return Err(Error::Length {
                what: "subband inputs",
                expected: self.plans.len(),
                got: inputs.len(),
            });
        }
        for (p, x) in self.plans.iter().zip(inputs) {
            if x.len() != p.t_len {
                return Err(Error::Length {
                    what: "subband burst",
                    expected: p.t_len,
                    got: x.len(),
                });
            }
        }
        let n = self.cfg.n_long;
        let n_s = self.cfg.n_s;
        let mut out = vec![ZERO; self.cfg.output_len()];
        let mut frame = vec![ZERO; n];
        let mut blocks: Vec<Vec<Complex64>> = self.plans.iter().map(|p| vec![ZERO; p.l_short]).collect();
        let ifft = dsp::plan(n, false);
        let inv_n = 1.0 / n as f64;
        for r in 0..self.cfg.r_max {
            frame.iter_mut().for_each(|v| *v = ZERO);
            for (m, x) in inputs.iter().enumerate() {
                self.load_block(m, r, x, &mut blocks[m]);
                self.accumulate(m, r, &mut blocks[m], &mut frame);
            }
            ifft.process(&mut frame);
            let dst = &mut out[r * n_s..r * n_s + n];
            for ((o, f), s) in dst.iter_mut().zip(&frame).zip(&self.synthesis) {
                *o += f * (s * inv_n);
            }
        }
        Ok(out)
    }
}

/// The high-rate samples aligned with the burst of subband `m`.
pub fn trim_output<'a>(full: &'a [Complex64], cfg: &FcConfig, m: usize) -> &'a [Complex64] {
    let start = cfg.n_o;
    let end = (start + cfg.trimmed_len(m)).min(full.len());
    &full[start.min(end)..end]
}

/// Dense complex matrix in row-major order.
#[derive(Debug, Clone)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    pub fn mul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self.at(i, j)).collect()
    }

    fn diag(v: &[Complex64]) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(v.len(), v.len());
        for (i, x) in v.iter().enumerate() {
            d.data[i * v.len() + i] = *x;
        }
        d
    }

    fn dft(n: usize, sign: f64, scale: f64) -> DenseMatrix {
        let mut w = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for k in 0..n {
                w.data[i * n + k] = Complex64::from_polar(scale, sign * 2.0 * PI * ((i * k) % n) as f64 / n as f64);
            }
        }
        w
    }
}

/// Dense block-diagonal model of the synthesis operator, one matrix per
/// subband acting on its zero-padded burst.
pub struct DenseSynthesisModel {
    pub operators: Vec<DenseMatrix>,
    pub s_f: Vec<usize>,
}

const DENSE_LIMIT: usize = 40_000_000;

impl DenseSynthesisModel {
    pub fn new(cfg: &FcConfig, windows: &WindowSet) -> Result<Self> {
        windows.check(cfg)?;
        let n = cfg.n_long;
        let rows = cfg.output_len();
        let mut operators = Vec::new();
        for m in 0..cfg.num_subbands() {
            let g = &cfg.geometry[m];
            let sb = &cfg.subbands[m];
            let l = g.l_short;
            let cols = 2 * g.s_f + g.t_len;
            if rows * cols > DENSE_LIMIT {
                return Err(Error::Config(format!("dense model of {rows}x{cols} exceeds the size guard")));
            }
            let w_l = DenseMatrix::dft(l, -1.0, 1.0);
            let w_n_inv = DenseMatrix::dft(n, 1.0, 1.0 / n as f64);
            let mut shift = DenseMatrix::zeros(l, l);
            for i in 0..l {
                shift.data[i * l + (i + l.div_ceil(2)) % l] = Complex64::new(1.0, 0.0);
            }
            let d = DenseMatrix::diag(&windows.fd[m].iter().map(|&v| Complex64::new(v, 0.0)).collect::<Vec<_>>());
            let s = DenseMatrix::diag(&windows.synthesis.iter().map(|&v| Complex64::new(v, 0.0)).collect::<Vec<_>>());
            let core = d.mul(&shift).mul(&w_l);
            let post = s.mul(&w_n_inv);
            let gain = (n as f64 / l as f64).sqrt();
            let mut f = DenseMatrix::zeros(rows, cols);
            for r in 0..g.r_blocks {
                let a: Vec<Complex64> = match &windows.analysis[m] {
                    AnalysisWindow::Block(a) => a.iter().map(|&v| v.into()).collect(),
                    AnalysisWindow::Aligned(a) => crate::windowing::align_analysis_window(a, r, cfg, m)?
                        .into_iter()
                        .map(Complex64::from)
                        .collect(),
                };
                let theta = block_phase(r, sb.center_bin, g.l_s, l);
                let mut sel = DenseMatrix::zeros(n, l);
                for i in 0..l {
                    sel.data[target_bin(i, sb.center_bin, l, n) * l + i] = theta;
                }
                let block = post.mul(&sel).mul(&core).mul(&DenseMatrix::diag(&a));
                for i in 0..n {
                    for k in 0..l {
                        let col = r * g.l_s + k;
                        if col < cols {
                            f.data[(r * cfg.n_s + i) * cols + col] += block.at(i, k) * gain;
                        }
                    }
                }
            }
            operators.push(f);
        }
        Ok(DenseSynthesisModel {
            operators,
            s_f: cfg.geometry.iter().map(|g| g.s_f).collect(),
        })
    }

    /// Sum over subbands of each operator applied to its zero-padded burst.
    pub fn fc_synthesize_dense(&self, inputs: &[&[Complex64]]) -> Result<Vec<Complex64>> {
        if inputs.len() != self.operators.len() {
            return Err(Error::Length {
                what: "subband inputs",
                expected: self.operators.len(),
                got: inputs.len(),
            });
        }
        let mut out = vec![ZERO; self.operators[0].rows];
        for ((f, x), &s_f) in self.operators.iter().zip(inputs).zip(&self.s_f) {
            if x.len() + 2 * s_f != f.cols {
                return Err(Error::Length {
                    what: "subband burst",
                    expected: f.cols - 2 * s_f,
                    got: x.len(),
                });
            }
            let mut padded = vec![ZERO; s_f];
            padded.extend_from_slice(x);
            padded.extend(std::iter::repeat(ZERO).take(s_f));
            for (o, v) in out.iter_mut().zip(f.apply(&padded)) {
                *o += v;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerology::{derive_fc_params, khz, Rational, SubbandConfig};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_kernels() {
        let h = vec![c(1.0, 2.0), c(-0.5, 0.0), c(0.0, 3.0)];
        assert_eq!(linear_convolve(&[c(1.0, 0.0)], &h), h);
        let h4 = vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0)];
        assert_eq!(cyclic_convolve(&[c(1.0, 0.0), ZERO, ZERO, ZERO], &h4, 4), h4);
    }

    #[test]
    fn ols_window_shape() {
        let sb = SubbandConfig::new(0, 1, khz(15.0), 128, 9, 0, 1).unwrap();
        let cfg = derive_fc_params(&[sb], 8, Rational::new(1, 2), khz(15.0 * 128.0 * 8.0 / 8.0)).unwrap();
        let w = ols_windows(&cfg);
        assert_eq!(w.synthesis, vec![0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
        assert!(w.analysis.iter().all(|a| a.values().iter().all(|&v| v == 1.0)));
    }

    #[test]
    fn phase_examples() {
        for r in 0..5 {
            assert_eq!(block_phase(r, 0, 16, 32), Complex64::new(1.0, 0.0));
        }
        let t = block_phase(1, 3, 16, 32);
        assert!((t - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        for r in 0..50 {
            assert!((block_phase(r, -7, 24, 32).norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn target_bins_are_injective() {
        let mut seen: Vec<usize> = (0..32).map(|l| target_bin(l, -5, 32, 128)).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 32);
    }
}
