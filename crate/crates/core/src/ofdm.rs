//! CP-OFDM modulation and the two transparent receive paths.
//!
//! Active subcarriers are placed DC-straddling: subcarrier `l` of an
//! allocation with `L_ACT` entries sits at relative index `l - L_ACT/2`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsp;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modulation {
    Qpsk,
    Qam16,
    Qam64,
    Qam256,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 6,
            Modulation::Qam256 => 8,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qpsk" => Some(Modulation::Qpsk),
            "16qam" | "qam16" => Some(Modulation::Qam16),
            "64qam" | "qam64" => Some(Modulation::Qam64),
            "256qam" | "qam256" => Some(Modulation::Qam256),
            _ => None,
        }
    }

    /// Gray-mapped, unit average power constellation point.
    pub fn map(self, bits: u32) -> Complex64 {
        let half = self.bits_per_symbol() / 2;
        let levels = 1u32 << half;
        let mask = levels - 1;
        let axis = |g: u32| {
            let mut b = g;
            let mut shift = 1;
            while shift < half as u32 {
                b ^= b >> shift;
                shift <<= 1;
            }
            2.0 * b as f64 - (levels - 1) as f64
        };
        let i = axis((bits >> half) & mask);
        let q = axis(bits & mask);
        let m = (levels * levels) as f64;
        Complex64::new(i, q) / (2.0 * (m - 1.0) / 3.0).sqrt()
    }
}

/// Complex baseband samples with their sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal {
    pub samples: Vec<Complex64>,
    pub rate_hz: f64,
}

impl ComplexSignal {
    pub fn new(samples: Vec<Complex64>, rate_hz: f64) -> Result<Self> {
        if samples.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Measurement("signal contains non-finite samples".into()));
        }
        Ok(ComplexSignal { samples, rate_hz })
    }
}

/// Active-subcarrier symbols, stored symbol by symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolGrid {
    pub l_act: usize,
    pub n_symbols: usize,
    pub data: Vec<Complex64>,
}

impl SymbolGrid {
    pub fn zeros(l_act: usize, n_symbols: usize) -> Self {
        SymbolGrid {
            l_act,
            n_symbols,
            data: vec![Complex64::new(0.0, 0.0); l_act * n_symbols],
        }
    }

    pub fn random(l_act: usize, n_symbols: usize, modulation: Modulation, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nb = modulation.bits_per_symbol();
        let data = (0..l_act * n_symbols)
            .map(|_| modulation.map(rng.gen::<u32>() & ((1u32 << nb) - 1)))
            .collect();
        SymbolGrid { l_act, n_symbols, data }
    }

    pub fn get(&self, l: usize, s: usize) -> Complex64 {
        self.data[s * self.l_act + l]
    }

    pub fn set(&mut self, l: usize, s: usize, v: Complex64) {
        self.data[s * self.l_act + l] = v;
    }

    pub fn symbol(&self, s: usize) -> &[Complex64] {
        &self.data[s * self.l_act..(s + 1) * self.l_act]
    }

    fn check_same(&self, other: &SymbolGrid) -> Result<()> {
        if self.l_act != other.l_act || self.n_symbols != other.n_symbols {
            return Err(Error::Length {
                what: "symbol grid",
                expected: self.data.len(),
                got: other.data.len(),
            });
        }
        Ok(())
    }
}

/// Transform bin of active subcarrier `l` for an allocation centered on `center`.
pub fn subcarrier_bin(l: usize, l_act: usize, center: i64, n: usize) -> usize {
    let k = l as i64 - (l_act / 2) as i64 + center;
    k.rem_euclid(n as i64) as usize
}

/// Unitary IDFT per symbol with cyclic prefix.
pub fn cp_ofdm_modulate(grid: &SymbolGrid, l_ofdm: usize, l_cp: usize) -> Result<Vec<Complex64>> {
    cp_ofdm_modulate_at(grid, l_ofdm, l_cp, 0)
}

/// As [`cp_ofdm_modulate`] with the allocation centered on subcarrier `center`.
pub fn cp_ofdm_modulate_at(grid: &SymbolGrid, l_ofdm: usize, l_cp: usize, center: i64) -> Result<Vec<Complex64>> {
    if l_cp >= l_ofdm {
        return Err(Error::Config(format!("l_cp {l_cp} must be smaller than l_ofdm {l_ofdm}")));
    }
    if grid.l_act > l_ofdm {
        return Err(Error::Length {
            what: "active subcarriers",
            expected: l_ofdm,
            got: grid.l_act,
        });
    }
    let ifft = dsp::plan(l_ofdm, false);
    let norm = 1.0 / (l_ofdm as f64).sqrt();
    let sym_len = l_ofdm + l_cp;
    let mut out = vec![Complex64::new(0.0, 0.0); grid.n_symbols * sym_len];
    let mut buf = vec![Complex64::new(0.0, 0.0); l_ofdm];
    for s in 0..grid.n_symbols {
        buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for (l, &x) in grid.symbol(s).iter().enumerate() {
            buf[subcarrier_bin(l, grid.l_act, center, l_ofdm)] = x * norm;
        }
        ifft.process(&mut buf);
        let dst = &mut out[s * sym_len..(s + 1) * sym_len];
        dst[..l_cp].copy_from_slice(&buf[l_ofdm - l_cp..]);
        dst[l_cp..].copy_from_slice(&buf);
    }
    Ok(out)
}

fn demod(
    signal: &[Complex64],
    n_ofdm: usize,
    n_cp: usize,
    l_act: usize,
    center: i64,
    n_symbols: usize,
) -> SymbolGrid {
    let fft = dsp::plan(n_ofdm, true);
    let norm = 1.0 / (n_ofdm as f64).sqrt();
    let sym_len = n_ofdm + n_cp;
    let mut grid = SymbolGrid::zeros(l_act, n_symbols);
    let mut buf = vec![Complex64::new(0.0, 0.0); n_ofdm];
    for s in 0..n_symbols {
        buf.copy_from_slice(&signal[s * sym_len + n_cp..(s + 1) * sym_len]);
        fft.process(&mut buf);
        for l in 0..l_act {
            grid.set(l, s, buf[subcarrier_bin(l, l_act, center, n_ofdm)] * norm);
        }
    }
    grid
}

/// High-rate receiver: CP removal and an `n_ofdm`-point DFT at the output rate.
/// `center` is the allocation center in subcarriers.
pub fn cp_ofdm_demod_highrate(
    signal: &[Complex64],
    n_ofdm: usize,
    n_cp: usize,
    l_act: usize,
    center: i64,
    n_symbols: usize,
) -> Result<SymbolGrid> {
    let expected = n_symbols * (n_ofdm + n_cp);
    if signal.len() != expected {
        return Err(Error::Length {
            what: "high-rate burst",
            expected,
            got: signal.len(),
        });
    }
    Ok(demod(signal, n_ofdm, n_cp, l_act, center, n_symbols))
}

/// Decimating receiver: keeps every `interp`-th sample from offset zero,
/// rescales by sqrt(interp) to preserve symbol energy, then demodulates at
/// the low rate.
pub fn cp_ofdm_demod_decimated(
    signal: &[Complex64],
    l_ofdm: usize,
    l_cp: usize,
    interp: usize,
    l_act: usize,
    center: i64,
    n_symbols: usize,
) -> Result<SymbolGrid> {
    if interp == 0 {
        return Err(Error::Config("decimation factor must be a positive integer".into()));
    }
    let expected = interp * n_symbols * (l_ofdm + l_cp);
    if signal.len() != expected {
        return Err(Error::Length {
            what: "high-rate burst",
            expected,
            got: signal.len(),
        });
    }
    let g = (interp as f64).sqrt();
    let low: Vec<Complex64> = signal.iter().step_by(interp).map(|v| v * g).collect();
    Ok(demod(&low, l_ofdm, l_cp, l_act, center, n_symbols))
}

/// Per-subcarrier complex gains estimated by least squares against the
/// known transmitted grid.
pub fn zf_gains(rx: &SymbolGrid, tx_ref: &SymbolGrid) -> Result<Vec<Complex64>> {
    rx.check_same(tx_ref)?;
    (0..rx.l_act)
        .map(|l| {
            let mut num = Complex64::new(0.0, 0.0);
            let mut den = 0.0;
            for s in 0..rx.n_symbols {
                let t = tx_ref.get(l, s);
                num += rx.get(l, s) * t.conj();
                den += t.norm_sqr();
            }
            if den == 0.0 {
                return Err(Error::Measurement(format!("subcarrier {l} carries no reference energy")));
            }
            Ok(num / den)
        })
        .collect()
}

pub fn zf_equalize(rx: &SymbolGrid, tx_ref: &SymbolGrid) -> Result<SymbolGrid> {
    let gains = zf_gains(rx, tx_ref)?;
    let mut out = rx.clone();
    for s in 0..rx.n_symbols {
        for (l, g) in gains.iter().enumerate() {
            let v = rx.get(l, s);
            out.set(l, s, if g.norm_sqr() > 0.0 { v / g } else { v });
        }
    }
    Ok(out)
}
