//! Reference transmitters and receivers: WOLA edge tapering and
//! time-domain convolution f-OFDM.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::dsp;
use crate::{Error, Result};

/// Symbol layout plus the raised-cosine slope length in samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WolaConfig {
    pub n_ofdm: usize,
    pub n_cp: usize,
    pub slope: usize,
}

impl WolaConfig {
    /// Slope of a quarter CP.
    pub fn quarter_cp(n_ofdm: usize, n_cp: usize) -> Self {
        WolaConfig {
            n_ofdm,
            n_cp,
            slope: n_cp / 4,
        }
    }

    fn check(&self, len: usize) -> Result<usize> {
        if self.slope > self.n_cp {
            return Err(Error::Config(format!(
                "WOLA slope {} exceeds CP length {}",
                self.slope, self.n_cp
            )));
        }
        let sym = self.n_ofdm + self.n_cp;
        if len % sym != 0 {
            return Err(Error::Length {
                what: "WOLA burst",
                expected: (len / sym + 1) * sym,
                got: len,
            });
        }
        Ok(len / sym)
    }
}

/// Rising raised-cosine samples at `(k + 0.5) / slope`.
pub fn wola_ramp(slope: usize) -> Vec<f64> {
    (0..slope)
        .map(|k| 0.5 * (1.0 - (PI * (k as f64 + 0.5) / slope as f64).cos()))
        .collect()
}

/// Tapers each symbol over the first `slope` CP samples and a cyclic
/// suffix of `slope` samples that overlaps the next symbol's CP. The last
/// suffix extends the burst by `slope` samples.
pub fn wola_tx(signal: &[Complex64], cfg: &WolaConfig) -> Result<Vec<Complex64>> {
    let n_sym = cfg.check(signal.len())?;
    let sym = cfg.n_ofdm + cfg.n_cp;
    let ramp = wola_ramp(cfg.slope);
    let mut out = vec![Complex64::new(0.0, 0.0); signal.len() + cfg.slope];
    for s in 0..n_sym {
        let base = s * sym;
        let x = &signal[base..base + sym];
        for (k, &v) in x.iter().enumerate() {
            let w = if k < cfg.slope { ramp[k] } else { 1.0 };
            out[base + k] += v * w;
        }
        // Cyclic continuation after the body starts again at body[0].
        for k in 0..cfg.slope {
            out[base + sym + k] += x[cfg.n_cp + k] * ramp[cfg.slope - 1 - k];
        }
    }
    Ok(out)
}

/// Receiver windowing: the last `slope` CP samples, weighted by the rising
/// ramp, are folded onto the body tail weighted by the falling ramp. The
/// output keeps the CP-OFDM layout so a plain demodulator applies.
pub fn wola_rx(signal: &[Complex64], cfg: &WolaConfig) -> Result<Vec<Complex64>> {
    let sym = cfg.n_ofdm + cfg.n_cp;
    let usable = signal.len() - signal.len() % sym;
    let n_sym = cfg.check(usable)?;
    let ramp = wola_ramp(cfg.slope);
    let mut out = signal[..usable].to_vec();
    for s in 0..n_sym {
        let base = s * sym;
        for k in 0..cfg.slope {
            let pre = signal[base + cfg.n_cp - cfg.slope + k];
            let tail = base + sym - cfg.slope + k;
            out[tail] = signal[tail] * ramp[cfg.slope - 1 - k] + pre * ramp[k];
        }
    }
    Ok(out)
}

/// Subband filter of the time-domain f-OFDM transmitter.
#[derive(Debug, Clone, PartialEq)]
pub struct FofdmConfig {
    pub n_filt: usize,
    pub fs_hz: f64,
    pub center_hz: f64,
    /// One-sided lowpass cutoff before modulation to `center_hz`.
    pub cutoff_hz: f64,
}

impl FofdmConfig {
    /// Excess bandwidth of 1.5 subcarriers, which puts the in-band error of
    /// a plain receiver timed at mid-CP near -37 dB.
    pub fn default_excess_hz(scs_hz: f64) -> f64 {
        1.5 * scs_hz
    }

    /// Length `n_ofdm / 2` and cutoff at the allocation edge plus `excess_hz`.
    pub fn for_allocation(n_ofdm: usize, fs_hz: f64, band_hz: (f64, f64), excess_hz: f64) -> Self {
        FofdmConfig {
            n_filt: n_ofdm / 2,
            fs_hz,
            center_hz: 0.5 * (band_hz.0 + band_hz.1),
            cutoff_hz: 0.5 * (band_hz.1 - band_hz.0) + excess_hz,
        }
    }
}

/// Hann-windowed sinc with `n_filt + 1` taps, modulated to the center.
pub fn fofdm_prototype(cfg: &FofdmConfig) -> Vec<Complex64> {
    let len = cfg.n_filt + 1;
    let mid = cfg.n_filt as f64 / 2.0;
    let wc = 2.0 * cfg.cutoff_hz / cfg.fs_hz;
    let taps: Vec<f64> = (0..len)
        .map(|i| {
            let t = i as f64 - mid;
            let sinc = if t == 0.0 { wc } else { (PI * wc * t).sin() / (PI * t) };
            let hann = 0.5 * (1.0 + (2.0 * PI * t / (cfg.n_filt as f64 + 2.0)).cos());
            sinc * hann
        })
        .collect();
    let dc: f64 = taps.iter().sum();
    let w = 2.0 * PI * cfg.center_hz / cfg.fs_hz;
    taps.iter()
        .enumerate()
        .map(|(i, &h)| Complex64::from_polar(h / dc, w * (i as f64 - mid)))
        .collect()
}

/// Convolves the whole burst with `taps` and removes the group delay so
/// the output is aligned with and as long as the input.
pub fn fir_filter_aligned(signal: &[Complex64], taps: &[Complex64]) -> Vec<Complex64> {
    let delay = (taps.len() - 1) / 2;
    let full = dsp::fft_convolve(signal, taps);
    full[delay..delay + signal.len()].to_vec()
}

/// Moves the receiver FFT window `samples` earlier into the CP by delaying
/// the signal, keeping its length.
pub fn advance_rx_timing(signal: &[Complex64], samples: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); samples.min(signal.len())];
    out.extend_from_slice(&signal[..signal.len() - out.len()]);
    out
}

pub fn fofdm_tx(signal: &[Complex64], cfg: &FofdmConfig) -> Result<Vec<Complex64>> {
    if cfg.n_filt % 2 != 0 {
        return Err(Error::Config(format!("f-OFDM filter order {} must be even", cfg.n_filt)));
    }
    if !(cfg.cutoff_hz > 0.0 && cfg.cutoff_hz < cfg.fs_hz / 2.0) {
        return Err(Error::Config(format!("f-OFDM cutoff {} Hz outside (0, fs/2)", cfg.cutoff_hz)));
    }
    Ok(fir_filter_aligned(signal, &fofdm_prototype(cfg)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_is_complementary() {
        let r = wola_ramp(9);
        for k in 0..9 {
            assert!((r[k] + r[8 - k] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn slope_longer_than_cp_is_rejected() {
        let cfg = WolaConfig { n_ofdm: 16, n_cp: 2, slope: 3 };
        assert!(wola_tx(&vec![Complex64::new(1.0, 0.0); 18], &cfg).is_err());
    }

    #[test]
    fn prototype_is_symmetric_at_dc() {
        let cfg = FofdmConfig {
            n_filt: 64,
            fs_hz: 1e6,
            center_hz: 0.0,
            cutoff_hz: 1e5,
        };
        let h = fofdm_prototype(&cfg);
        assert_eq!(h.len(), 65);
        for i in 0..65 {
            assert!((h[i] - h[64 - i]).norm() < 1e-15);
        }
    }
}
