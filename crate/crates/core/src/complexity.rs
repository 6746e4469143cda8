//! Closed-form real-operation counts for FFTs, windowing and whole TX chains.
//!
//! Counting conventions:
//! * a real window value times a complex sample costs 2 real multiplications;
//! * the TD analysis window is applied once per OFDM symbol before CP
//!   insertion, i.e. `L_OFDM` samples per symbol;
//! * the TD synthesis window costs `N` samples per block;
//! * FD window weights are not counted unless `fd_window` is set, in which
//!   case only the `2·L_TBW` transition bins cost anything.

use std::fmt::Write as _;

use crate::numerology::FcConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OpCount {
    pub real_mults: u64,
    pub real_adds: u64,
}

impl std::ops::Add for OpCount {
    type Output = OpCount;
    fn add(self, o: OpCount) -> OpCount {
        OpCount {
            real_mults: self.real_mults + o.real_mults,
            real_adds: self.real_adds + o.real_adds,
        }
    }
}

/// Split-radix counts for `n = 2^k` or `n = 3·2^k`, `k ≥ 2`.
pub fn fft_op_count(n: usize) -> Result<OpCount> {
    let unsupported = || Error::Config(format!("unsupported FFT length {n}"));
    let (three, base) = if n.is_power_of_two() {
        (false, n)
    } else if n % 3 == 0 && (n / 3).is_power_of_two() {
        (true, n / 3)
    } else {
        return Err(unsupported());
    };
    if base < 4 {
        return Err(unsupported());
    }
    let b = base as i64;
    let k = base.trailing_zeros() as i64;
    let (m, a) = if three {
        (b * (3 * k - 7) + 12, b * (9 * k + 3) + 12)
    } else {
        (b * (k - 3) + 4, b * (3 * k - 3) + 4)
    };
    Ok(OpCount {
        real_mults: m as u64,
        real_adds: a as u64,
    })
}

/// Which window stages are present in the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WindowFlags {
    pub analysis: bool,
    pub synthesis: bool,
    pub fd_window: bool,
}

impl WindowFlags {
    pub const ORIGINAL: WindowFlags = WindowFlags {
        analysis: false,
        synthesis: false,
        fd_window: false,
    };
    pub const GENERALIZED: WindowFlags = WindowFlags {
        analysis: true,
        synthesis: true,
        fd_window: false,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainCount {
    /// Per-burst terms that belong to one subband.
    pub per_subband: Vec<OpCount>,
    /// Per-burst terms of the shared long IFFT and synthesis window.
    pub shared: OpCount,
    pub total: OpCount,
    /// Total real multiplications divided by the OFDM symbols of subband 0.
    pub mults_per_symbol: f64,
}

/// Operation count of the FC transmitter for one burst. `l_tbw` gives the
/// transition width per subband, used only with `fd_window`.
pub fn chain_op_count(cfg: &FcConfig, l_tbw: &[usize], flags: WindowFlags) -> Result<ChainCount> {
    let n = cfg.n_long;
    let ifft_n = fft_op_count(n)?;
    let mut per_block_shared = ifft_n;
    if flags.synthesis {
        per_block_shared.real_mults += 2 * n as u64;
    }
    let shared = OpCount {
        real_mults: per_block_shared.real_mults * cfg.r_max as u64,
        real_adds: per_block_shared.real_adds * cfg.r_max as u64,
    };
    let mut per_subband = Vec::new();
    for (m, g) in cfg.geometry.iter().enumerate() {
        let sb = &cfg.subbands[m];
        let mut block = fft_op_count(g.l_short)?;
        if flags.fd_window {
            block.real_mults += 4 * l_tbw.get(m).copied().unwrap_or(0) as u64;
        }
        let mut symbol = fft_op_count(sb.l_ofdm)?;
        if flags.analysis {
            symbol.real_mults += 2 * sb.l_ofdm as u64;
        }
        let r = g.r_blocks as u64;
        let b = sb.n_symbols as u64;
        per_subband.push(OpCount {
            real_mults: r * block.real_mults + b * symbol.real_mults,
            real_adds: r * block.real_adds + b * symbol.real_adds,
        });
    }
    let total = per_subband.iter().fold(shared, |acc, c| acc + *c);
    Ok(ChainCount {
        mults_per_symbol: total.real_mults as f64 / cfg.subbands[0].n_symbols as f64,
        per_subband,
        shared,
        total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Baseline {
    CpOfdm { n_ofdm: usize },
    /// Raised-cosine edge tapering with `slope` samples per edge.
    Wola { n_ofdm: usize, slope: usize },
    /// Symmetric FIR at the output rate.
    Fofdm { n_filt: usize, n_ofdm: usize, n_cp: usize },
    /// Polyphase interpolating FIR with interpolation factor `interp`.
    FofdmInterpolating {
        n_filt: usize,
        n_ofdm: usize,
        n_cp: usize,
        interp: usize,
    },
}

/// Real multiplications per OFDM symbol of a reference transmitter.
pub fn baseline_op_count(kind: Baseline) -> Result<u64> {
    Ok(match kind {
        Baseline::CpOfdm { n_ofdm } => fft_op_count(n_ofdm)?.real_mults,
        Baseline::Wola { n_ofdm, slope } => fft_op_count(n_ofdm)?.real_mults + 4 * slope as u64,
        Baseline::Fofdm { n_filt, n_ofdm, n_cp } => {
            (n_filt * (n_ofdm + n_cp)) as u64 + fft_op_count(n_ofdm)?.real_mults
        }
        Baseline::FofdmInterpolating {
            n_filt,
            n_ofdm,
            n_cp,
            interp,
        } => {
            if interp == 0 {
                return Err(Error::Config("interpolation factor must be positive".into()));
            }
            (2 * n_filt * (n_ofdm + n_cp) / interp) as u64
        }
    })
}

/// FFT counts for the lengths of the split-radix comparison table.
pub const TABLE_FFT_LENGTHS: [usize; 12] = [16, 24, 32, 48, 64, 128, 256, 384, 512, 768, 1024, 2048];

pub fn fft_table_csv(lengths: &[usize]) -> Result<String> {
    let mut s = String::from("n,real_mults,real_adds\n");
    for &n in lengths {
        let c = fft_op_count(n)?;
        writeln!(s, "{n},{},{}", c.real_mults, c.real_adds).expect("string write");
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_examples() {
        assert_eq!(fft_op_count(16).unwrap(), OpCount { real_mults: 20, real_adds: 148 });
        assert_eq!(fft_op_count(128).unwrap(), OpCount { real_mults: 516, real_adds: 2308 });
        assert_eq!(fft_op_count(24).unwrap(), OpCount { real_mults: 28, real_adds: 252 });
    }

    #[test]
    fn unsupported_lengths() {
        for n in [0, 1, 2, 3, 6, 10, 40, 100] {
            assert!(fft_op_count(n).is_err(), "{n}");
        }
    }

    #[test]
    fn baselines() {
        assert_eq!(baseline_op_count(Baseline::CpOfdm { n_ofdm: 2048 }).unwrap(), 16388);
        assert_eq!(baseline_op_count(Baseline::Wola { n_ofdm: 2048, slope: 72 }).unwrap(), 16676);
        assert_eq!(
            baseline_op_count(Baseline::Fofdm { n_filt: 1024, n_ofdm: 2048, n_cp: 144 }).unwrap(),
            2_260_996
        );
        assert_eq!(
            baseline_op_count(Baseline::FofdmInterpolating { n_filt: 1024, n_ofdm: 2048, n_cp: 144, interp: 16 })
                .unwrap(),
            280_576
        );
    }
}
