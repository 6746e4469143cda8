//! The three window families of the generalized filter bank.
//!
//! * FD window `d_m`: passband ones, stopband zeros and two mirrored
//!   transition ramps `ξ_m`.
//! * TD analysis window `â_m`: one OFDM symbol long, built from a
//!   conjugate-symmetric spectrum that is zero on bins `1..L_ACT-1`, so that
//!   multiplying a symbol by it leaves the active subcarriers untouched up to
//!   a common gain.
//! * TD synthesis window `s`: `N` samples, optionally reduced to its `γ`
//!   lowest spectral bins.

use std::io::{BufRead, Write};

use num_complex::Complex64;

use crate::dsp;
use crate::numerology::FcConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FdWindowSpec {
    pub l_short: usize,
    /// Passband width in FC bins.
    pub passband: usize,
    pub l_tbw: usize,
    pub weights: Vec<f64>,
}

/// Passband width in FC bins of an allocation of `l_act` subcarriers.
pub fn fc_passband_bins(l_act: usize, l_short: usize, l_ofdm: usize) -> usize {
    (l_act * l_short).div_ceil(l_ofdm)
}

/// Largest transition width that fits next to the passband.
pub fn max_transition_bins(l_short: usize, passband: usize) -> usize {
    l_short.saturating_sub(passband) / 2
}

pub fn build_fd_window(spec: &FdWindowSpec) -> Result<Vec<f64>> {
    let FdWindowSpec {
        l_short,
        passband,
        l_tbw,
        ref weights,
    } = *spec;
    if weights.len() != l_tbw {
        return Err(Error::Window(format!(
            "FD window expects {l_tbw} transition weights, got {}",
            weights.len()
        )));
    }
    if passband > l_short {
        return Err(Error::Window(format!("passband {passband} exceeds L_m {l_short}")));
    }
    let lead = (l_short - passband).div_ceil(2);
    let trail = (l_short - passband) / 2;
    if trail < l_tbw {
        return Err(Error::Window(format!(
            "transition band of {l_tbw} bins does not fit beside a {passband}-bin passband in L_m = {l_short}"
        )));
    }
    let mut d = Vec::with_capacity(l_short);
    d.extend(std::iter::repeat(0.0).take(lead - l_tbw));
    d.extend_from_slice(weights);
    d.extend(std::iter::repeat(1.0).take(passband));
    d.extend(weights.iter().rev());
    d.extend(std::iter::repeat(0.0).take(trail - l_tbw));
    Ok(d)
}

/// Raised-cosine transition samples strictly between zero and one.
pub fn raised_cosine_ramp(l_tbw: usize) -> Vec<f64> {
    (0..l_tbw)
        .map(|p| 0.5 * (1.0 - (std::f64::consts::PI * (p + 1) as f64 / (l_tbw + 1) as f64).cos()))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisWindowSpec {
    pub l_ofdm: usize,
    pub l_act: usize,
    pub params: Vec<f64>,
}

/// Number of free analysis-window parameters; zero when the allocation
/// fills half the OFDM transform or more.
pub fn analysis_param_len(l_ofdm: usize, l_act: usize) -> usize {
    if 2 * l_act >= l_ofdm {
        0
    } else {
        l_ofdm - 2 * l_act + 2
    }
}

/// Parameters producing the all-ones analysis window.
pub fn analysis_identity_params(l_ofdm: usize, l_act: usize) -> Vec<f64> {
    let mut p = vec![0.0; analysis_param_len(l_ofdm, l_act)];
    if let Some(v) = p.first_mut() {
        *v = l_ofdm as f64;
    }
    p
}

fn real_idft(spectrum: &mut [Complex64]) -> Vec<f64> {
    let n = spectrum.len();
    dsp::fft_inplace(spectrum, false);
    spectrum.iter().map(|v| v.re / n as f64).collect()
}

pub fn analysis_spectrum(spec: &AnalysisWindowSpec) -> Result<Vec<Complex64>> {
    let AnalysisWindowSpec { l_ofdm, l_act, ref params } = *spec;
    let need = analysis_param_len(l_ofdm, l_act);
    if params.len() != need {
        return Err(Error::Window(format!(
            "analysis window expects {need} parameters, got {}",
            params.len()
        )));
    }
    let mut alpha = vec![Complex64::new(0.0, 0.0); l_ofdm];
    if need == 0 {
        alpha[0] = Complex64::new(l_ofdm as f64, 0.0);
        return Ok(alpha);
    }
    let half = l_ofdm / 2;
    let q = half - l_act;
    alpha[0] = Complex64::new(params[0], 0.0);
    for p in 1..=q {
        alpha[l_act + p - 1] = Complex64::new(params[p], params[q + 1 + p]);
    }
    alpha[half] = Complex64::new(params[q + 1], 0.0);
    for n in 1..half {
        alpha[l_ofdm - n] = alpha[n].conj();
    }
    Ok(alpha)
}

pub fn build_analysis_window(spec: &AnalysisWindowSpec) -> Result<Vec<f64>> {
    let mut alpha = analysis_spectrum(spec)?;
    Ok(real_idft(&mut alpha))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisWindowSpec {
    pub n_long: usize,
    pub gamma: usize,
    pub params: Vec<f64>,
}

pub fn synthesis_param_len(gamma: usize) -> usize {
    2 * gamma - 1
}

pub fn build_synthesis_window(spec: &SynthesisWindowSpec) -> Result<Vec<f64>> {
    let SynthesisWindowSpec { n_long, gamma, ref params } = *spec;
    if gamma == 0 || 2 * (gamma - 1) >= n_long {
        return Err(Error::Window(format!("γ = {gamma} must satisfy 1 ≤ γ and γ−1 < N/2")));
    }
    if params.len() != synthesis_param_len(gamma) {
        return Err(Error::Window(format!(
            "synthesis window expects {} parameters, got {}",
            synthesis_param_len(gamma),
            params.len()
        )));
    }
    let mut beta = vec![Complex64::new(0.0, 0.0); n_long];
    beta[0] = Complex64::new(params[0], 0.0);
    for p in 1..gamma {
        beta[p] = Complex64::new(params[p], params[gamma + p - 1]);
        beta[n_long - p] = beta[p].conj();
    }
    Ok(real_idft(&mut beta))
}

/// Reduced parameters approximating an arbitrary real window by its `γ`
/// lowest DFT bins.
pub fn synthesis_params_from_window(window: &[f64], gamma: usize) -> Vec<f64> {
    let mut spec: Vec<Complex64> = window.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    dsp::fft_inplace(&mut spec, true);
    let mut p = vec![0.0; synthesis_param_len(gamma)];
    p[0] = spec[0].re;
    for k in 1..gamma {
        p[k] = spec[k].re;
        p[gamma + k - 1] = spec[k].im;
    }
    p
}

/// Parameters producing the all-ones synthesis window.
pub fn synthesis_identity_params(n_long: usize, gamma: usize) -> Vec<f64> {
    let mut p = vec![0.0; synthesis_param_len(gamma)];
    p[0] = n_long as f64;
    p
}

/// Window samples that block `r` of subband `m` sees: the CP-extended
/// window tiled over the symbol stream, with the zero-padded head and tail
/// reading the periodic extension.
pub fn align_analysis_window(a_hat: &[f64], r: usize, cfg: &FcConfig, m: usize) -> Result<Vec<f64>> {
    let g = &cfg.geometry[m];
    if r >= g.r_blocks.max(cfg.r_max) {
        return Err(Error::Window(format!("block {r} out of range (R = {})", cfg.r_max)));
    }
    let l_cp = cfg.subbands[m].l_cp;
    let mut out = vec![0.0; g.l_short];
    align_into(a_hat, l_cp, g.l_s, g.s_f, r, &mut out);
    Ok(out)
}

pub(crate) fn align_into(a_hat: &[f64], l_cp: usize, l_s: usize, s_f: usize, r: usize, out: &mut [f64]) {
    let l_ofdm = a_hat.len();
    let period = (l_ofdm + l_cp) as i64;
    let start = (r * l_s) as i64 - s_f as i64;
    for (k, o) in out.iter_mut().enumerate() {
        let t = (start + k as i64).rem_euclid(period) as usize;
        *o = if t < l_cp { a_hat[l_ofdm - l_cp + t] } else { a_hat[t - l_cp] };
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnalysisWindow {
    /// Same `L_m` samples applied to every block.
    Block(Vec<f64>),
    /// One OFDM symbol of window, aligned to the CP-OFDM symbol grid.
    Aligned(Vec<f64>),
}

impl AnalysisWindow {
    pub fn len(&self) -> usize {
        match self {
            AnalysisWindow::Block(v) | AnalysisWindow::Aligned(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self) -> &[f64] {
        match self {
            AnalysisWindow::Block(v) | AnalysisWindow::Aligned(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    pub fd: Vec<Vec<f64>>,
    pub analysis: Vec<AnalysisWindow>,
    pub synthesis: Vec<f64>,
}

impl WindowSet {
    pub fn check(&self, cfg: &FcConfig) -> Result<()> {
        let m_count = cfg.num_subbands();
        if self.fd.len() != m_count || self.analysis.len() != m_count {
            return Err(Error::Length {
                what: "window set subbands",
                expected: m_count,
                got: self.fd.len().min(self.analysis.len()),
            });
        }
        for m in 0..m_count {
            let l = cfg.geometry[m].l_short;
            if self.fd[m].len() != l {
                return Err(Error::Length {
                    what: "FD window",
                    expected: l,
                    got: self.fd[m].len(),
                });
            }
            let expected = match &self.analysis[m] {
                AnalysisWindow::Block(_) => l,
                AnalysisWindow::Aligned(_) => cfg.subbands[m].l_ofdm,
            };
            if self.analysis[m].len() != expected {
                return Err(Error::Length {
                    what: "analysis window",
                    expected,
                    got: self.analysis[m].len(),
                });
            }
        }
        if self.synthesis.len() != cfg.n_long {
            return Err(Error::Length {
                what: "synthesis window",
                expected: cfg.n_long,
                got: self.synthesis.len(),
            });
        }
        Ok(())
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "fcofdm-windows 1")?;
        writeln!(w, "subbands {}", self.fd.len())?;
        for (m, (d, a)) in self.fd.iter().zip(&self.analysis).enumerate() {
            writeln!(w, "fd {m} {}", d.len())?;
            write_values(&mut w, d)?;
            let kind = match a {
                AnalysisWindow::Block(_) => "block",
                AnalysisWindow::Aligned(_) => "aligned",
            };
            writeln!(w, "analysis {m} {kind} {}", a.len())?;
            write_values(&mut w, a.values())?;
        }
        writeln!(w, "synthesis {}", self.synthesis.len())?;
        write_values(&mut w, &self.synthesis)?;
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::Parse("unexpected end of window file".into()))?
                .map_err(Error::from)
        };
        let header = next()?;
        if header.trim() != "fcofdm-windows 1" {
            return Err(Error::Parse(format!("unrecognized window file header '{header}'")));
        }
        let count = parse_header(&next()?, "subbands", 1)?[0];
        let mut fd = Vec::with_capacity(count);
        let mut analysis = Vec::with_capacity(count);
        for m in 0..count {
            let h = next()?;
            let f = parse_header(&h, "fd", 2)?;
            if f[0] != m {
                return Err(Error::Parse(format!("expected FD window of subband {m}, found '{h}'")));
            }
            fd.push(read_values(&mut next, f[1])?);
            let h = next()?;
            let parts: Vec<&str> = h.split_whitespace().collect();
            if parts.len() != 4 || parts[0] != "analysis" || parts[1] != m.to_string() {
                return Err(Error::Parse(format!("malformed analysis header '{h}'")));
            }
            let len: usize = parts[3]
                .parse()
                .map_err(|_| Error::Parse(format!("bad length in '{h}'")))?;
            let values = read_values(&mut next, len)?;
            analysis.push(match parts[2] {
                "block" => AnalysisWindow::Block(values),
                "aligned" => AnalysisWindow::Aligned(values),
                other => return Err(Error::Parse(format!("unknown analysis window kind '{other}'"))),
            });
        }
        let n = parse_header(&next()?, "synthesis", 1)?[0];
        let synthesis = read_values(&mut next, n)?;
        Ok(WindowSet { fd, analysis, synthesis })
    }
}

fn write_values(w: &mut impl Write, v: &[f64]) -> Result<()> {
    for x in v {
        writeln!(w, "{x:.17e}")?;
    }
    Ok(())
}

fn parse_header(line: &str, tag: &str, fields: usize) -> Result<Vec<usize>> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != fields + 1 || parts[0] != tag {
        return Err(Error::Parse(format!("expected '{tag}' header, found '{line}'")));
    }
    parts[1..]
        .iter()
        .map(|p| p.parse().map_err(|_| Error::Parse(format!("bad number in '{line}'"))))
        .collect()
}

fn read_values(next: &mut impl FnMut() -> Result<String>, n: usize) -> Result<Vec<f64>> {
    (0..n)
        .map(|_| {
            let l = next()?;
            l.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad window value '{l}'")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn brute_idft(alpha: &[Complex64]) -> Vec<Complex64> {
        let n = alpha.len();
        (0..n)
            .map(|t| {
                alpha
                    .iter()
                    .enumerate()
                    .map(|(k, a)| a * Complex64::from_polar(1.0, 2.0 * PI * (k * t) as f64 / n as f64))
                    .sum::<Complex64>()
                    / n as f64
            })
            .collect()
    }

    #[test]
    fn fd_layout_small() {
        let d = build_fd_window(&FdWindowSpec {
            l_short: 32,
            passband: 24,
            l_tbw: 3,
            weights: vec![0.1, 0.2, 0.3],
        })
        .unwrap();
        let mut expect = vec![0.0, 0.1, 0.2, 0.3];
        expect.extend(vec![1.0; 24]);
        expect.extend([0.3, 0.2, 0.1, 0.0]);
        assert_eq!(d, expect);
    }

    #[test]
    fn fd_rectangular_and_widened() {
        let d = build_fd_window(&FdWindowSpec { l_short: 16, passband: 6, l_tbw: 0, weights: vec![] }).unwrap();
        assert_eq!(d.iter().filter(|&&v| v == 1.0).count(), 6);
        assert!(d.iter().all(|&v| v == 0.0 || v == 1.0));
        let d = build_fd_window(&FdWindowSpec { l_short: 16, passband: 6, l_tbw: 4, weights: vec![1.0; 4] }).unwrap();
        assert_eq!(d.iter().filter(|&&v| v == 1.0).count(), 14);
    }

    #[test]
    fn fd_ramp_must_fit() {
        assert!(build_fd_window(&FdWindowSpec { l_short: 16, passband: 10, l_tbw: 4, weights: vec![0.5; 4] }).is_err());
    }

    #[test]
    fn analysis_identity() {
        let a = build_analysis_window(&AnalysisWindowSpec {
            l_ofdm: 128,
            l_act: 24,
            params: analysis_identity_params(128, 24),
        })
        .unwrap();
        assert!(a.iter().all(|v| (v - 1.0).abs() < 1e-14));
        assert_eq!(analysis_param_len(128, 24), 82);
        assert_eq!(analysis_param_len(512, 300), 0);
    }

    #[test]
    fn analysis_matches_index_map_oracle() {
        let (l, la) = (16usize, 4usize);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let phi: Vec<f64> = (0..analysis_param_len(l, la)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // Spectrum written out entry by entry for L = 16, L_ACT = 4:
        // reals at bins 0, 4..7, Nyquist 8, imaginary parts of bins 4..7.
        let mut alpha = vec![Complex64::new(0.0, 0.0); l];
        alpha[0] = phi[0].into();
        alpha[4] = Complex64::new(phi[1], phi[6]);
        alpha[5] = Complex64::new(phi[2], phi[7]);
        alpha[6] = Complex64::new(phi[3], phi[8]);
        alpha[7] = Complex64::new(phi[4], phi[9]);
        alpha[8] = phi[5].into();
        for k in 9..16 {
            alpha[k] = alpha[16 - k].conj();
        }
        let oracle = brute_idft(&alpha);
        let got = build_analysis_window(&AnalysisWindowSpec { l_ofdm: l, l_act: la, params: phi }).unwrap();
        for (g, o) in got.iter().zip(&oracle) {
            assert!(o.im.abs() < 1e-12);
            assert!((g - o.re).abs() < 1e-12);
        }
    }

    #[test]
    fn synthesis_identity_and_oracle() {
        let s = build_synthesis_window(&SynthesisWindowSpec {
            n_long: 64,
            gamma: 20,
            params: synthesis_identity_params(64, 20),
        })
        .unwrap();
        assert!(s.iter().all(|v| (v - 1.0).abs() < 1e-14));

        let psi = [0.7, -0.2, 0.4, 0.9, -0.3];
        let mut beta = vec![Complex64::new(0.0, 0.0); 32];
        beta[0] = psi[0].into();
        beta[1] = Complex64::new(psi[1], psi[3]);
        beta[2] = Complex64::new(psi[2], psi[4]);
        beta[31] = beta[1].conj();
        beta[30] = beta[2].conj();
        let oracle = brute_idft(&beta);
        let got = build_synthesis_window(&SynthesisWindowSpec { n_long: 32, gamma: 3, params: psi.to_vec() }).unwrap();
        for (g, o) in got.iter().zip(&oracle) {
            assert!(o.im.abs() < 1e-12);
            assert!((g - o.re).abs() < 1e-12);
        }
    }

    #[test]
    fn synthesis_projection_recovers_band_limited_window() {
        let w: Vec<f64> = (0..64).map(|n| (PI * n as f64 / 64.0).sin().powi(2)).collect();
        let p = synthesis_params_from_window(&w, 3);
        let back = build_synthesis_window(&SynthesisWindowSpec { n_long: 64, gamma: 3, params: p }).unwrap();
        for (a, b) in w.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn wrong_parameter_lengths() {
        assert!(build_analysis_window(&AnalysisWindowSpec { l_ofdm: 16, l_act: 4, params: vec![0.0; 3] }).is_err());
        assert!(build_synthesis_window(&SynthesisWindowSpec { n_long: 16, gamma: 3, params: vec![0.0; 4] }).is_err());
    }

    #[test]
    fn window_file_round_trip() {
        let ws = WindowSet {
            fd: vec![vec![0.0, 0.25, 1.0, 1.0 / 3.0]],
            analysis: vec![AnalysisWindow::Aligned(vec![1.0, -2.5e-7, PI, 0.1])],
            synthesis: vec![0.0, 1.0, 0.5, std::f64::consts::E],
        };
        let mut buf = Vec::new();
        ws.write_to(&mut buf).unwrap();
        let back = WindowSet::read_from(buf.as_slice()).unwrap();
        assert_eq!(ws, back);
        assert!(WindowSet::read_from("garbage\n".as_bytes()).is_err());
    }
}
