//! Subband numerology and filter-bank geometry.
//!
//! All frequencies are exact rationals in Hz so that divisibility checks on
//! transform lengths never suffer from float drift.

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

use crate::{config_err, Result};

pub type Rational = Ratio<i64>;

/// Converts a float in Hz that is known to be a multiple of 1/1000 Hz.
pub fn hz(v: f64) -> Rational {
    Rational::new((v * 1000.0).round() as i64, 1000)
}

pub fn khz(v: f64) -> Rational {
    Rational::new((v * 1.0e6).round() as i64, 1000)
}

pub fn to_f64(r: Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubbandConfig {
    pub index: usize,
    pub n_prb: usize,
    pub scs_hz: Rational,
    pub l_ofdm: usize,
    pub l_cp: usize,
    pub l_act: usize,
    /// Subband center in FC bins relative to DC.
    pub center_bin: i64,
    pub n_symbols: usize,
}

impl SubbandConfig {
    pub fn new(
        index: usize,
        n_prb: usize,
        scs_hz: Rational,
        l_ofdm: usize,
        l_cp: usize,
        center_bin: i64,
        n_symbols: usize,
    ) -> Result<Self> {
        let cfg = SubbandConfig {
            index,
            n_prb,
            scs_hz,
            l_ofdm,
            l_cp,
            l_act: 12 * n_prb,
            center_bin,
            n_symbols,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.index;
        if self.n_prb == 0 {
            return config_err(format!("subband {m}: n_prb must be at least 1"));
        }
        if self.l_act != 12 * self.n_prb {
            return config_err(format!("subband {m}: l_act must equal 12 * n_prb"));
        }
        if self.l_ofdm == 0 || self.l_ofdm % 2 != 0 {
            return config_err(format!("subband {m}: l_ofdm must be even and positive"));
        }
        if self.l_act > self.l_ofdm {
            return config_err(format!("subband {m}: l_act {} exceeds l_ofdm {}", self.l_act, self.l_ofdm));
        }
        if self.l_cp >= self.l_ofdm {
            return config_err(format!("subband {m}: l_cp must be smaller than l_ofdm"));
        }
        if self.n_symbols == 0 {
            return config_err(format!("subband {m}: n_symbols must be at least 1"));
        }
        if self.scs_hz <= Rational::zero() {
            return config_err(format!("subband {m}: scs_hz must be positive"));
        }
        Ok(())
    }

    /// Samples of the low-rate CP-OFDM burst.
    pub fn burst_len(&self) -> usize {
        self.n_symbols * (self.l_ofdm + self.l_cp)
    }
}

/// Smallest OFDM IFFT length holding `n_prb` resource blocks, floored at 128.
pub fn derive_ofdm_ifft_length(n_prb: usize) -> usize {
    let need = (12 * n_prb.max(1)).next_power_of_two();
    need.max(128)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubbandGeometry {
    pub l_short: usize,
    pub l_s: usize,
    pub s_f: usize,
    pub interp: usize,
    pub t_len: usize,
    pub r_blocks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcConfig {
    pub n_long: usize,
    pub overlap: Rational,
    pub fs_hz: Rational,
    pub n_s: usize,
    pub n_o: usize,
    pub subbands: Vec<SubbandConfig>,
    pub geometry: Vec<SubbandGeometry>,
    pub r_max: usize,
}

impl FcConfig {
    pub fn num_subbands(&self) -> usize {
        self.subbands.len()
    }

    pub fn bin_spacing_hz(&self) -> Rational {
        self.fs_hz / Rational::from_integer(self.n_long as i64)
    }

    /// Subcarrier spacing recomputed from the geometry.
    pub fn scs_from_geometry(&self, m: usize) -> Rational {
        let g = &self.geometry[m];
        Rational::new(g.l_short as i64, self.n_long as i64) * self.fs_hz
            / Rational::from_integer(self.subbands[m].l_ofdm as i64)
    }

    /// Low-rate sampling rate of subband `m`.
    pub fn low_rate_hz(&self, m: usize) -> Rational {
        self.fs_hz * Rational::new(self.geometry[m].l_short as i64, self.n_long as i64)
    }

    pub fn center_hz(&self, m: usize) -> Rational {
        self.bin_spacing_hz() * Rational::from_integer(self.subbands[m].center_bin)
    }

    /// Outer edges of the occupied band of subband `m`.
    pub fn band_edges_hz(&self, m: usize) -> (Rational, Rational) {
        occupied_band(self.center_hz(m), &self.subbands[m])
    }

    /// Length of the full overlap-add output.
    pub fn output_len(&self) -> usize {
        self.r_max * self.n_s + self.n_long - self.n_s
    }

    /// Length of the trimmed high-rate burst of subband `m`.
    pub fn trimmed_len(&self, m: usize) -> usize {
        self.geometry[m].interp * self.geometry[m].t_len
    }

    /// Center of subband `m` counted in high-rate OFDM subcarriers, if integral.
    pub fn center_subcarrier(&self, m: usize) -> Option<i64> {
        let r = self.center_hz(m) / self.subbands[m].scs_hz;
        if r.is_integer() {
            Some(r.to_integer())
        } else {
            None
        }
    }
}

/// Occupied band of an allocation with DC-straddling subcarrier placement.
pub fn occupied_band(center_hz: Rational, sb: &SubbandConfig) -> (Rational, Rational) {
    let half = Rational::new(1, 2);
    let lo_k = -Rational::from_integer((sb.l_act / 2) as i64) - half;
    let hi_k = Rational::from_integer((sb.l_act - sb.l_act / 2) as i64) - half;
    (center_hz + lo_k * sb.scs_hz, center_hz + hi_k * sb.scs_hz)
}

fn integral(r: Rational, what: &str) -> Result<usize> {
    if !r.is_integer() || r < Rational::zero() {
        return config_err(format!("{what} must be a non-negative integer, got {r}"));
    }
    Ok(r.to_integer() as usize)
}

/// Derives the FC geometry; short transform lengths follow from the
/// subcarrier spacing relation f_SCS = (L/N) f_s / L_OFDM.
pub fn derive_fc_params(
    subbands: &[SubbandConfig],
    n_long: usize,
    overlap: Rational,
    fs_hz: Rational,
) -> Result<FcConfig> {
    if subbands.is_empty() {
        return config_err("at least one subband is required");
    }
    if n_long == 0 {
        return config_err("n_long must be positive");
    }
    if overlap <= Rational::zero() || overlap >= Rational::from_integer(1) {
        return config_err(format!("overlap λ must lie in (0, 1), got {overlap}"));
    }
    if fs_hz <= Rational::zero() {
        return config_err("fs_hz must be positive");
    }
    let n = Rational::from_integer(n_long as i64);
    let mut geometry = Vec::with_capacity(subbands.len());
    for sb in subbands {
        sb.validate()?;
        let m = sb.index;
        let l = sb.scs_hz * Rational::from_integer(sb.l_ofdm as i64) * n / fs_hz;
        let l_short = integral(l, &format!("subband {m}: L_m = f_SCS·L_OFDM·N/f_s"))?;
        if l_short == 0 || l_short % 2 != 0 {
            return config_err(format!("subband {m}: L_m = {l_short} must be even and positive"));
        }
        if n_long % l_short != 0 {
            return config_err(format!("subband {m}: interpolation N/L_m = {n_long}/{l_short} is not an integer"));
        }
        let s_f = integral(
            overlap * Rational::from_integer(l_short as i64),
            &format!("subband {m}: λ·L_m"),
        )?;
        let l_s = l_short - s_f;
        let t_len = sb.burst_len();
        let r_blocks = block_count(l_short, l_s, s_f, t_len);
        geometry.push(SubbandGeometry {
            l_short,
            l_s,
            s_f,
            interp: n_long / l_short,
            t_len,
            r_blocks,
        });
    }
    let n_o = integral(overlap * n, "λ·N")?;
    let n_s = n_long - n_o;
    let r_max = geometry.iter().map(|g| g.r_blocks).max().unwrap_or(0);
    Ok(FcConfig {
        n_long,
        overlap,
        fs_hz,
        n_s,
        n_o,
        subbands: subbands.to_vec(),
        geometry,
        r_max,
    })
}

/// Number of overlapping blocks covering a zero-padded burst of `t_len` samples.
pub fn block_count(l_short: usize, l_s: usize, s_f: usize, t_len: usize) -> usize {
    let span = (2 * s_f + t_len).saturating_sub(l_short);
    span.div_ceil(l_s) + 1
}

/// Nearest FC bin to a desired center frequency and the residual offset.
pub fn nearest_center_bin(freq_hz: Rational, fs_hz: Rational, n_long: usize) -> (i64, Rational) {
    let bs = fs_hz / Rational::from_integer(n_long as i64);
    let bin = (freq_hz / bs).round().to_integer();
    (bin, freq_hz - bs * Rational::from_integer(bin))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumerologyDiagnostics {
    pub n_long: usize,
    pub fs_hz: Rational,
    pub bin_spacing_hz: Rational,
    /// (subband index, L_m, I_m) for every subband.
    pub subbands: Vec<(usize, usize, usize)>,
}

/// Checks that independently derived subband configurations can share one
/// filter bank and that their occupied bands are disjoint.
pub fn validate_mixed_numerology(configs: &[FcConfig]) -> Result<NumerologyDiagnostics> {
    let Some(first) = configs.first() else {
        return config_err("no subband configurations given");
    };
    let mut bands = Vec::new();
    let mut diag = NumerologyDiagnostics {
        n_long: first.n_long,
        fs_hz: first.fs_hz,
        bin_spacing_hz: first.bin_spacing_hz(),
        subbands: Vec::new(),
    };
    for cfg in configs {
        if cfg.n_long != first.n_long {
            return config_err(format!("mismatched N across subbands: {} vs {}", first.n_long, cfg.n_long));
        }
        if cfg.fs_hz != first.fs_hz {
            return config_err(format!("mismatched f_s across subbands: {} vs {}", first.fs_hz, cfg.fs_hz));
        }
        for (m, sb) in cfg.subbands.iter().enumerate() {
            let g = &cfg.geometry[m];
            diag.subbands.push((sb.index, g.l_short, g.interp));
            bands.push((sb.index, cfg.band_edges_hz(m)));
        }
    }
    for i in 0..bands.len() {
        for j in i + 1..bands.len() {
            let (a, (alo, ahi)) = bands[i];
            let (b, (blo, bhi)) = bands[j];
            if alo < bhi && blo < ahi {
                return config_err(format!("active bins of subbands {a} and {b} overlap"));
            }
        }
    }
    Ok(diag)
}
