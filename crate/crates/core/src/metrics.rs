//! Spectral confinement, in-band error and inter-numerology leakage.
//!
//! SCR compares the power seen by a 180 kHz measurement filter placed just
//! outside a subband edge (after a guard) with the power of the same filter
//! placed on the edge PRB inside the allocation.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::dsp;
use crate::ofdm::{subcarrier_bin, SymbolGrid};
use crate::{Error, Result};

pub const MEAS_HALF_BAND_HZ: f64 = 90_000.0;
pub const MEAS_TRANSITION_HZ: f64 = 7_500.0;
pub const MEAS_MIN_ATTEN_DB: f64 = 100.0;
pub const DEFAULT_GUARD_HZ: f64 = 180_000.0;
pub const SCR_CAP_DB: f64 = 200.0;
pub const DB_FLOOR: f64 = -300.0;
pub const N_EDGE: usize = 12;

/// Design attenuation of each Kaiser stage; leaves margin over the mask.
const STAGE_ATTEN_DB: f64 = 106.0;

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let y = x * x / 4.0;
    for k in 1..500 {
        term *= y / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn kaiser_len(atten_db: f64, transition: f64, fs: f64) -> usize {
    let n = ((atten_db - 7.95) / (14.36 * transition / fs)).ceil() as usize + 1;
    n | 1
}

/// Kaiser-windowed sinc lowpass of odd length with unit DC gain.
fn kaiser_lowpass(cutoff: f64, transition: f64, fs: f64, atten_db: f64) -> Vec<f64> {
    let len = kaiser_len(atten_db, transition, fs);
    let beta = 0.1102 * (atten_db - 8.7);
    let mid = (len / 2) as f64;
    let wc = 2.0 * cutoff / fs;
    let norm = bessel_i0(beta);
    let mut h: Vec<f64> = (0..len)
        .map(|i| {
            let t = i as f64 - mid;
            let sinc = if t == 0.0 { wc } else { (PI * wc * t).sin() / (PI * t) };
            let r = t / mid;
            sinc * bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / norm
        })
        .collect();
    let dc: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= dc);
    h
}

/// Two-stage lowpass `H1(z)·H2(z^K)` with a 90 kHz half-band passband.
#[derive(Debug, Clone)]
pub struct MeasurementFilter {
    pub fs_hz: f64,
    pub k: usize,
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    /// Single-stage equivalent impulse response.
    pub coefficients: Vec<f64>,
}

impl MeasurementFilter {
    /// Total number of stored coefficients of both stages.
    pub fn order(&self) -> usize {
        self.h1.len() + self.h2.len()
    }

    pub fn response(&self, f_hz: f64) -> Complex64 {
        let eval = |h: &[f64], w: f64| -> Complex64 {
            h.iter().enumerate().map(|(n, &c)| Complex64::from_polar(c, -w * n as f64)).sum()
        };
        let w = 2.0 * PI * f_hz / self.fs_hz;
        eval(&self.h1, w) * eval(&self.h2, w * self.k as f64)
    }
}

/// Passband ripple and stopband attenuation measured on a frequency grid.
#[derive(Debug, Clone, Copy)]
pub struct MaskReport {
    pub passband_ripple_db: f64,
    pub min_stopband_atten_db: f64,
    pub dc_gain_db: f64,
}

pub fn check_mask(filter: &MeasurementFilter, points: usize) -> MaskReport {
    let fs = filter.fs_hz;
    let (mut pmax, mut pmin, mut smax) = (f64::MIN, f64::MAX, 0.0f64);
    let mut visit = |f: f64| {
        let mag = filter.response(f).norm();
        if f <= MEAS_HALF_BAND_HZ {
            pmax = pmax.max(mag);
            pmin = pmin.min(mag);
        } else if f >= MEAS_HALF_BAND_HZ + MEAS_TRANSITION_HZ {
            smax = smax.max(mag);
        }
    };
    for i in 0..points {
        visit(0.5 * fs * i as f64 / (points - 1) as f64);
    }
    // Dense sampling of both band edges.
    for i in 0..=points / 10 {
        let t = i as f64 / (points / 10) as f64;
        visit(MEAS_HALF_BAND_HZ * t);
        visit(MEAS_HALF_BAND_HZ + MEAS_TRANSITION_HZ + 4.0 * MEAS_TRANSITION_HZ * t);
    }
    MaskReport {
        passband_ripple_db: 20.0 * (pmax / pmin).log10(),
        min_stopband_atten_db: -20.0 * smax.max(1e-300).log10(),
        dc_gain_db: 20.0 * filter.response(0.0).norm().log10(),
    }
}

/// Chooses the stage split K that minimizes the stored coefficient count.
pub fn design_measurement_filter(fs_hz: f64) -> Result<MeasurementFilter> {
    let stop = MEAS_HALF_BAND_HZ + MEAS_TRANSITION_HZ;
    if !(fs_hz >= 2.0 * stop) {
        return Err(Error::Measurement(format!(
            "measurement mask infeasible at fs = {fs_hz} Hz (needs at least {} Hz)",
            2.0 * stop
        )));
    }
    let cutoff = MEAS_HALF_BAND_HZ + MEAS_TRANSITION_HZ / 2.0;
    let mut best: Option<(usize, usize)> = None;
    let k_max = (fs_hz / (2.0 * stop)).floor() as usize;
    for k in 1..=k_max.max(1) {
        let low = fs_hz / k as f64;
        let n2 = kaiser_len(STAGE_ATTEN_DB, MEAS_TRANSITION_HZ, low);
        let n1 = if k == 1 {
            0
        } else {
            let tb = low - stop - MEAS_HALF_BAND_HZ;
            if tb <= 0.0 {
                continue;
            }
            kaiser_len(STAGE_ATTEN_DB, tb, fs_hz)
        };
        if best.map_or(true, |(_, c)| n1 + n2 < c) {
            best = Some((k, n1 + n2));
        }
    }
    let (k, _) = best.ok_or_else(|| Error::Measurement("no feasible stage split".into()))?;
    let low = fs_hz / k as f64;
    let h2 = kaiser_lowpass(cutoff, MEAS_TRANSITION_HZ, low, STAGE_ATTEN_DB);
    let h1 = if k == 1 {
        vec![1.0]
    } else {
        let image_stop = low - stop;
        let tb = image_stop - MEAS_HALF_BAND_HZ;
        kaiser_lowpass(MEAS_HALF_BAND_HZ + tb / 2.0, tb, fs_hz, STAGE_ATTEN_DB)
    };
    let mut coefficients = vec![0.0; h1.len() + k * (h2.len() - 1)];
    for (j, &b) in h2.iter().enumerate() {
        for (i, &a) in h1.iter().enumerate() {
            coefficients[i + j * k] += a * b;
        }
    }
    Ok(MeasurementFilter {
        fs_hz,
        k,
        h1,
        h2,
        coefficients,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScrMode {
    /// Energy of the complete filter output, transients included.
    Burst,
    /// Mean power after discarding one filter length at both ends.
    SteadyState,
}

/// Filter centers (signal, interference) for one side of a band.
pub fn scr_centers(band: (f64, f64), side: Side, guard_hz: f64) -> (f64, f64) {
    match side {
        Side::Right => (band.1 - MEAS_HALF_BAND_HZ, band.1 + guard_hz + MEAS_HALF_BAND_HZ),
        Side::Left => (band.0 + MEAS_HALF_BAND_HZ, band.0 - guard_hz - MEAS_HALF_BAND_HZ),
    }
}

fn ratio_db(p_i: f64, p_s: f64) -> f64 {
    if p_s <= 0.0 {
        if p_i > 0.0 {
            SCR_CAP_DB
        } else {
            DB_FLOOR
        }
    } else {
        dsp::db10(p_i / p_s).min(SCR_CAP_DB)
    }
}

/// Band-power meter for signals of one fixed length, with cached filter
/// responses per center frequency.
#[derive(Debug, Clone)]
pub struct ScrProbe {
    filter: MeasurementFilter,
    signal_len: usize,
    nfft: usize,
    mode: ScrMode,
    responses: HashMap<u64, Vec<Complex64>>,
}

impl ScrProbe {
    pub fn new(filter: MeasurementFilter, signal_len: usize, mode: ScrMode) -> Result<Self> {
        let h = filter.coefficients.len();
        if mode == ScrMode::SteadyState {
            let steady = signal_len.saturating_sub(2 * (h - 1));
            if steady < 10 * filter.order() {
                return Err(Error::Measurement(format!(
                    "signal of {signal_len} samples leaves {steady} steady-state samples; need {}",
                    10 * filter.order()
                )));
            }
        }
        let nfft = dsp::fast_len(signal_len + h - 1);
        Ok(ScrProbe {
            filter,
            signal_len,
            nfft,
            mode,
            responses: HashMap::new(),
        })
    }

    pub fn filter(&self) -> &MeasurementFilter {
        &self.filter
    }

    fn response(&mut self, center_hz: f64) -> &Vec<Complex64> {
        let nfft = self.nfft;
        let f = &self.filter;
        self.responses.entry(center_hz.to_bits()).or_insert_with(|| {
            let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
            let w = 2.0 * PI * center_hz / f.fs_hz;
            for (n, &c) in f.coefficients.iter().enumerate() {
                buf[n] = Complex64::from_polar(c, w * n as f64);
            }
            dsp::fft_inplace(&mut buf, true);
            buf
        })
    }

    /// Registers center frequencies ahead of concurrent use.
    pub fn prepare(&mut self, centers: &[f64]) {
        for &c in centers {
            self.response(c);
        }
    }

    fn spectrum(&self, signal: &[Complex64]) -> Result<Vec<Complex64>> {
        if signal.len() != self.signal_len {
            return Err(Error::Length {
                what: "SCR signal",
                expected: self.signal_len,
                got: signal.len(),
            });
        }
        let mut z = vec![Complex64::new(0.0, 0.0); self.nfft];
        z[..signal.len()].copy_from_slice(signal);
        dsp::fft_inplace(&mut z, true);
        Ok(z)
    }

    fn power_from_spectrum(&self, z: &[Complex64], center_hz: f64) -> Result<f64> {
        let h = self
            .responses
            .get(&center_hz.to_bits())
            .ok_or_else(|| Error::Measurement(format!("center {center_hz} Hz was not prepared")))?;
        match self.mode {
            ScrMode::Burst => {
                let e: f64 = z.iter().zip(h).map(|(a, b)| (a * b).norm_sqr()).sum();
                Ok(e / (self.nfft as f64 * self.signal_len as f64))
            }
            ScrMode::SteadyState => {
                let mut y: Vec<Complex64> = z.iter().zip(h).map(|(a, b)| a * b).collect();
                dsp::fft_inplace(&mut y, false);
                let hl = self.filter.coefficients.len();
                let seg = &y[hl - 1..self.signal_len];
                let seg = &seg[..seg.len() - (hl - 1).min(seg.len())];
                Ok(dsp::energy(seg) / (self.nfft as f64).powi(2) / seg.len().max(1) as f64)
            }
        }
    }

    /// Mean power behind the measurement filter at each center.
    pub fn band_powers(&self, signal: &[Complex64], centers: &[f64]) -> Result<Vec<f64>> {
        let z = self.spectrum(signal)?;
        centers.iter().map(|&c| self.power_from_spectrum(&z, c)).collect()
    }

    /// SCR in dB of `band` on `side`.
    pub fn scr(&mut self, signal: &[Complex64], band: (f64, f64), side: Side, guard_hz: f64) -> Result<f64> {
        let (cs, ci) = scr_centers(band, side, guard_hz);
        self.prepare(&[cs, ci]);
        let p = self.band_powers(signal, &[cs, ci])?;
        Ok(ratio_db(p[1], p[0]))
    }

    /// SCR of both sides from one transform of the signal.
    pub fn scr_both(&self, signal: &[Complex64], band: (f64, f64), guard_hz: f64) -> Result<(f64, f64)> {
        let (ls, li) = scr_centers(band, Side::Left, guard_hz);
        let (rs, ri) = scr_centers(band, Side::Right, guard_hz);
        let p = self.band_powers(signal, &[ls, li, rs, ri])?;
        Ok((ratio_db(p[1], p[0]), ratio_db(p[3], p[2])))
    }
}

/// One-shot SCR measurement.
pub fn measure_scr(
    signal: &[Complex64],
    filter: &MeasurementFilter,
    band: (f64, f64),
    side: Side,
    guard_hz: f64,
    mode: ScrMode,
) -> Result<f64> {
    let mut probe = ScrProbe::new(filter.clone(), signal.len(), mode)?;
    probe.scr(signal, band, side, guard_hz)
}

/// Per-subcarrier and aggregate error of an equalized grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MseReport {
    pub per_subcarrier: Vec<f64>,
    pub avg: f64,
    pub max: f64,
}

pub fn to_db(x: f64) -> f64 {
    dsp::db10(x)
}

impl MseReport {
    pub fn avg_db(&self) -> f64 {
        to_db(self.avg)
    }

    pub fn max_db(&self) -> f64 {
        to_db(self.max)
    }

    pub fn per_subcarrier_db(&self) -> Vec<f64> {
        self.per_subcarrier.iter().map(|&v| to_db(v)).collect()
    }

    pub fn evm_pct(&self) -> Vec<f64> {
        self.per_subcarrier.iter().map(|&v| 100.0 * v.sqrt()).collect()
    }
}

/// Distinct edge subcarriers: the lowest and highest `N_EDGE` indices.
pub fn edge_subcarriers(l_act: usize) -> Vec<usize> {
    let mut e: Vec<usize> = (0..N_EDGE.min(l_act)).chain(l_act.saturating_sub(N_EDGE)..l_act).collect();
    e.sort_unstable();
    e.dedup();
    e
}

pub fn compute_mse(tx: &SymbolGrid, rx_eq: &SymbolGrid) -> Result<MseReport> {
    if tx.l_act != rx_eq.l_act || tx.n_symbols != rx_eq.n_symbols {
        return Err(Error::Length {
            what: "MSE grids",
            expected: tx.data.len(),
            got: rx_eq.data.len(),
        });
    }
    let b = tx.n_symbols as f64;
    let per: Vec<f64> = (0..tx.l_act)
        .map(|l| (0..tx.n_symbols).map(|s| (tx.get(l, s) - rx_eq.get(l, s)).norm_sqr()).sum::<f64>() / b)
        .collect();
    let avg = per.iter().sum::<f64>() / per.len() as f64;
    let edges = edge_subcarriers(tx.l_act);
    let max = edges.iter().map(|&l| per[l]).sum::<f64>() / edges.len() as f64;
    Ok(MseReport {
        per_subcarrier: per,
        avg,
        max,
    })
}

/// Expected per-subcarrier MSE of a linear grid-to-grid chain for unit-power
/// i.i.d. symbols, found by driving unit impulses through it.
pub fn linear_chain_mse(
    l_act: usize,
    n_symbols: usize,
    mut chain: impl FnMut(&SymbolGrid) -> Result<SymbolGrid>,
) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; l_act];
    let mut unit = SymbolGrid::zeros(l_act, n_symbols);
    for s in 0..n_symbols {
        for l in 0..l_act {
            unit.set(l, s, Complex64::new(1.0, 0.0));
            let out = chain(&unit)?;
            unit.set(l, s, Complex64::new(0.0, 0.0));
            for s2 in 0..n_symbols {
                for (l2, a) in acc.iter_mut().enumerate() {
                    let target = if l2 == l && s2 == s { 1.0 } else { 0.0 };
                    *a += (out.get(l2, s2) - target).norm_sqr();
                }
            }
        }
    }
    Ok(acc.into_iter().map(|v| v / n_symbols as f64).collect())
}

/// A victim CP-OFDM receiver listening on an allocation without data.
#[derive(Debug, Clone, PartialEq)]
pub struct VictimRx {
    pub n_ofdm: usize,
    pub n_cp: usize,
    pub scs_hz: f64,
    /// Frequency of the allocation's relative subcarrier zero.
    pub center_hz: f64,
    pub l_act: usize,
    pub n_symbols: usize,
    /// First sample of the victim burst in the received signal.
    pub start: usize,
}

impl VictimRx {
    pub fn fs_hz(&self) -> f64 {
        self.n_ofdm as f64 * self.scs_hz
    }

    pub fn band_hz(&self) -> (f64, f64) {
        let half = (self.l_act / 2) as f64;
        (
            self.center_hz - (half + 0.5) * self.scs_hz,
            self.center_hz + (self.l_act as f64 - half - 0.5) * self.scs_hz,
        )
    }

    /// Places the allocation on the subcarrier grid through 0 Hz, with its
    /// upper edge at least `guard_hz` below `edge_hz`.
    pub fn below(edge_hz: f64, guard_hz: f64, n_ofdm: usize, n_cp: usize, scs_hz: f64, l_act: usize, n_symbols: usize) -> Self {
        let top = ((edge_hz - guard_hz - 0.5 * scs_hz) / scs_hz + 1e-9).floor() * scs_hz;
        let half = (l_act / 2) as f64;
        VictimRx {
            n_ofdm,
            n_cp,
            scs_hz,
            center_hz: top - (l_act as f64 - half - 1.0) * scs_hz,
            l_act,
            n_symbols,
            start: 0,
        }
    }

    /// Mixes the victim allocation to DC and cuts out its burst, zero
    /// extending past the end of `rx`.
    pub fn downconvert(&self, rx: &[Complex64]) -> Vec<Complex64> {
        let len = self.n_symbols * (self.n_ofdm + self.n_cp);
        let w = -2.0 * PI * self.center_hz / self.fs_hz();
        (0..len)
            .map(|i| {
                let n = self.start + i;
                rx.get(n).map_or(Complex64::new(0.0, 0.0), |v| v * Complex64::from_polar(1.0, w * n as f64))
            })
            .collect()
    }

    /// Mean power on the victim subcarriers of a downconverted burst.
    pub fn mean_power_db(&self, baseband: &[Complex64]) -> Result<f64> {
        let sym = self.n_ofdm + self.n_cp;
        if baseband.len() < self.n_symbols * sym {
            return Err(Error::Length {
                what: "victim burst",
                expected: self.n_symbols * sym,
                got: baseband.len(),
            });
        }
        let fft = dsp::plan(self.n_ofdm, true);
        let norm = 1.0 / self.n_ofdm as f64;
        let mut acc = 0.0;
        for s in 0..self.n_symbols {
            let mut buf = baseband[s * sym + self.n_cp..(s + 1) * sym].to_vec();
            fft.process(&mut buf);
            for l in 0..self.l_act {
                acc += buf[subcarrier_bin(l, self.l_act, 0, self.n_ofdm)].norm_sqr() * norm;
            }
        }
        Ok(dsp::db10(acc / (self.l_act * self.n_symbols) as f64))
    }
}

/// Mean power on the victim subcarriers, in dB relative to unit data power.
pub fn measure_ini(rx: &[Complex64], victim: &VictimRx, interferer_band_hz: (f64, f64)) -> Result<f64> {
    let (vlo, vhi) = victim.band_hz();
    if vlo < interferer_band_hz.1 && interferer_band_hz.0 < vhi {
        return Err(Error::Measurement("victim and interferer allocations overlap".into()));
    }
    victim.mean_power_db(&victim.downconvert(rx))
}

/// Per-subband measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandMetrics {
    pub scr_left_db: f64,
    pub scr_right_db: f64,
    pub mse: MseReport,
}

impl SubbandMetrics {
    pub fn scr_db(&self) -> f64 {
        self.scr_left_db.max(self.scr_right_db)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub subbands: Vec<SubbandMetrics>,
}

/// Twelve significant digits, locale independent.
pub fn fmt12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    format!("{x:.11e}")
}

impl MetricsReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("subband,subcarrier,mse,mse_db,evm_pct\n");
        for (m, sb) in self.subbands.iter().enumerate() {
            let evm = sb.mse.evm_pct();
            for (l, &v) in sb.mse.per_subcarrier.iter().enumerate() {
                writeln!(s, "{m},{l},{},{},{}", fmt12(v), fmt12(to_db(v)), fmt12(evm[l])).expect("string write");
            }
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for (m, sb) in self.subbands.iter().enumerate() {
            writeln!(s, "subband.{m}.scr_left_db = {}", fmt12(sb.scr_left_db)).expect("string write");
            writeln!(s, "subband.{m}.scr_right_db = {}", fmt12(sb.scr_right_db)).expect("string write");
            writeln!(s, "subband.{m}.scr_db = {}", fmt12(sb.scr_db())).expect("string write");
            writeln!(s, "subband.{m}.mse_avg_db = {}", fmt12(sb.mse.avg_db())).expect("string write");
            writeln!(s, "subband.{m}.mse_max_db = {}", fmt12(sb.mse.max_db())).expect("string write");
            writeln!(s, "subband.{m}.evm_avg_pct = {}", fmt12(100.0 * sb.mse.avg.sqrt())).expect("string write");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ofdm::Modulation;

    #[test]
    fn kaiser_stage_has_unit_dc() {
        let h = kaiser_lowpass(1000.0, 500.0, 48000.0, 80.0);
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(h.len() % 2, 1);
    }

    #[test]
    fn infeasible_rate() {
        assert!(design_measurement_filter(150_000.0).is_err());
    }

    #[test]
    fn mse_identity_and_constant_error() {
        let tx = SymbolGrid::random(24, 6, Modulation::Qpsk, 1);
        let r = compute_mse(&tx, &tx).unwrap();
        assert_eq!(r.avg_db(), DB_FLOOR);
        let mut rx = tx.clone();
        rx.data.iter_mut().for_each(|v| *v += Complex64::new(0.1, 0.0));
        let r = compute_mse(&tx, &rx).unwrap();
        for (db, evm) in r.per_subcarrier_db().iter().zip(r.evm_pct()) {
            assert!((db + 20.0).abs() < 1e-9);
            assert!((evm - 10.0).abs() < 1e-9);
        }
    }

    #[test]
    fn edge_sets() {
        assert_eq!(edge_subcarriers(24).len(), 24);
        assert_eq!(edge_subcarriers(48).len(), 24);
        assert_eq!(edge_subcarriers(12).len(), 12);
        assert!(edge_subcarriers(48).contains(&47) && edge_subcarriers(48).contains(&0));
        assert!(!edge_subcarriers(48).contains(&12));
    }

    #[test]
    fn dimension_mismatch() {
        let a = SymbolGrid::zeros(12, 2);
        let b = SymbolGrid::zeros(12, 3);
        assert!(compute_mse(&a, &b).is_err());
    }

    #[test]
    fn fmt12_digits() {
        assert_eq!(fmt12(1.0 / 3.0), "3.33333333333e-1");
        assert_eq!(fmt12(-39.6), "-3.96000000000e1");
    }

    #[test]
    fn ini_floor_and_overlap() {
        let v = VictimRx {
            n_ofdm: 64,
            n_cp: 4,
            scs_hz: 15e3,
            center_hz: -150e3,
            l_act: 12,
            n_symbols: 2,
            start: 0,
        };
        let rx = vec![Complex64::new(0.0, 0.0); 200];
        assert_eq!(measure_ini(&rx, &v, (0.0, 100e3)).unwrap(), DB_FLOOR);
        assert!(measure_ini(&rx, &v, (-200e3, 100e3)).is_err());
    }
}
