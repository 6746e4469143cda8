//! TOML scenario files and the runner behind the command-line tool.
//!
//! Every physical quantity carries its unit in the key name. A scenario is
//! one of three kinds: `fc` (design and measure a transmitter), `ini`
//! (leakage into an idle neighbouring allocation) or `fft_counts`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{fofdm_tx, wola_rx, wola_tx, FofdmConfig, WolaConfig};
use crate::complexity::{baseline_op_count, chain_op_count, fft_table_csv, Baseline, WindowFlags, TABLE_FFT_LENGTHS};
use crate::fcfb::{ola_windows, ols_windows};
use crate::metrics::{fmt12, measure_ini, to_db, MetricsReport, ScrMode, VictimRx, DEFAULT_GUARD_HZ};
use crate::numerology::{derive_fc_params, derive_ofdm_ifft_length, khz, to_f64, FcConfig, Rational, SubbandConfig};
use crate::ofdm::cp_ofdm_modulate_at;
use crate::optimizer::{
    build_windows, initial_params, multistart, optimize, Case, DesignMode, Evaluation, Evaluator, Goal,
    OptimizeOptions, OptimizeReport, ParamLayout, Solver, DEFAULT_GAMMA,
};
use crate::windowing::{fc_passband_bins, max_transition_bins, WindowSet};
use crate::{Error, Result};

fn field_err(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {msg}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    #[default]
    Fc,
    Ini,
    FftCounts,
}

/// Overlap factor written either as a fraction string or a decimal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Overlap {
    Fraction(String),
    Decimal(f64),
}

impl Overlap {
    pub fn to_rational(&self) -> Result<Rational> {
        let bad = |s: &dyn std::fmt::Display| field_err("numerology.overlap", format!("cannot read '{s}' as a fraction"));
        match self {
            Overlap::Fraction(s) => {
                let (n, d) = s.split_once('/').unwrap_or((s.as_str(), "1"));
                let n: i64 = n.trim().parse().map_err(|_| bad(s))?;
                let d: i64 = d.trim().parse().map_err(|_| bad(s))?;
                if d == 0 {
                    return Err(bad(s));
                }
                Ok(Rational::new(n, d))
            }
            Overlap::Decimal(x) => Rational::approximate_float(*x).ok_or_else(|| bad(x)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubbandSpec {
    pub n_prb: usize,
    pub scs_khz: f64,
    /// Defaults to the smallest power of two ≥ 128 holding the allocation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_ofdm: Option<usize>,
    pub l_cp: usize,
    #[serde(default)]
    pub center_bin: i64,
    /// Transition weights; defaults to covering 360 kHz of FC bins.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_tbw: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumerologySpec {
    pub fs_khz: f64,
    pub n_long: usize,
    pub overlap: Overlap,
    pub subbands: Vec<SubbandSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowMode {
    #[default]
    CaseI,
    CaseII,
    CaseIii,
    CaseIv,
    CaseV,
    Ols,
    Ola,
    Wola,
    Fofdm,
}

impl WindowMode {
    pub fn case(self) -> Option<Case> {
        match self {
            WindowMode::CaseI => Some(Case::I),
            WindowMode::CaseII => Some(Case::II),
            WindowMode::CaseIii => Some(Case::III),
            WindowMode::CaseIv => Some(Case::IV),
            WindowMode::CaseV => Some(Case::V),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WindowMode::CaseI => "case_i",
            WindowMode::CaseII => "case_ii",
            WindowMode::CaseIii => "case_iii",
            WindowMode::CaseIv => "case_iv",
            WindowMode::CaseV => "case_v",
            WindowMode::Ols => "ols",
            WindowMode::Ola => "ola",
            WindowMode::Wola => "wola",
            WindowMode::Fofdm => "fofdm",
        }
    }
}

fn default_gamma() -> usize {
    DEFAULT_GAMMA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowsSpec {
    #[serde(default)]
    pub mode: WindowMode,
    #[serde(default = "default_gamma")]
    pub gamma: usize,
    /// Window file to use instead of designing, relative to the scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub import: Option<String>,
    /// WOLA slope in high-rate samples; half the CP when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wola_slope: Option<usize>,
    /// f-OFDM cutoff beyond the allocation edge; 1.5 subcarriers when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fofdm_excess_khz: Option<f64>,
}

impl Default for WindowsSpec {
    fn default() -> Self {
        WindowsSpec {
            mode: WindowMode::default(),
            gamma: DEFAULT_GAMMA,
            import: None,
            wola_slope: None,
            fofdm_excess_khz: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalKind {
    #[default]
    MinMse,
    MinScr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    #[default]
    Slsqp,
    Mma,
    Ccsaq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScrModeSpec {
    #[default]
    Burst,
    SteadyState,
}

impl From<ScrModeSpec> for ScrMode {
    fn from(s: ScrModeSpec) -> ScrMode {
        match s {
            ScrModeSpec::Burst => ScrMode::Burst,
            ScrModeSpec::SteadyState => ScrMode::SteadyState,
        }
    }
}

fn d_seed() -> u64 {
    1
}
fn d_opt_symbols() -> usize {
    14
}
fn d_max_iters() -> usize {
    200
}
fn d_starts() -> usize {
    1
}
fn d_spread() -> f64 {
    0.05
}
fn d_box() -> f64 {
    1.0
}
fn d_margin() -> f64 {
    0.5
}
fn d_evm_window() -> f64 {
    0.5
}
fn d_meas_symbols() -> usize {
    200
}
fn d_meas_seed() -> u64 {
    1001
}
fn d_guard_khz() -> f64 {
    DEFAULT_GUARD_HZ / 1e3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizationSpec {
    #[serde(default)]
    pub goal: GoalKind,
    /// SCR target of `min_mse`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_des_db: Option<f64>,
    /// MSE limit of `min_scr`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mse_max_db: Option<f64>,
    #[serde(default = "d_seed")]
    pub seed: u64,
    /// OFDM symbols per subband in the design payload.
    #[serde(default = "d_opt_symbols")]
    pub symbols: usize,
    #[serde(default = "d_max_iters")]
    pub max_iters: usize,
    #[serde(default = "d_starts")]
    pub starts: usize,
    #[serde(default = "d_spread")]
    pub spread: f64,
    #[serde(default)]
    pub solver: SolverKind,
    #[serde(default = "d_box")]
    pub box_half_width: f64,
    #[serde(default = "d_margin")]
    pub margin_db: f64,
    #[serde(default)]
    pub scr_mode: ScrModeSpec,
    /// EVM window width as a fraction of the CP.
    #[serde(default = "d_evm_window")]
    pub evm_window_cp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSpec {
    #[serde(default = "d_meas_symbols")]
    pub symbols: usize,
    #[serde(default = "d_meas_seed")]
    pub seed: u64,
    #[serde(default = "d_guard_khz")]
    pub guard_khz: f64,
    #[serde(default = "d_evm_window")]
    pub evm_window_cp: f64,
}

impl Default for MeasurementSpec {
    fn default() -> Self {
        MeasurementSpec {
            symbols: d_meas_symbols(),
            seed: d_meas_seed(),
            guard_khz: d_guard_khz(),
            evm_window_cp: d_evm_window(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxKind {
    Plain,
    Wola,
    Fofdm,
    Fc,
}

impl TxKind {
    fn name(self) -> &'static str {
        match self {
            TxKind::Plain => "plain",
            TxKind::Wola => "wola",
            TxKind::Fofdm => "fofdm",
            TxKind::Fc => "fc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RxKind {
    Plain,
    Wola,
    /// Victim-band f-OFDM filter ahead of a plain CP-OFDM receiver.
    Fofdm,
}

impl RxKind {
    fn name(self) -> &'static str {
        match self {
            RxKind::Plain => "plain",
            RxKind::Wola => "wola",
            RxKind::Fofdm => "fofdm",
        }
    }
}

fn d_victim_scs() -> f64 {
    15.0
}
fn d_victim_n_ofdm() -> usize {
    2048
}
fn d_victim_n_cp() -> usize {
    144
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IniSpec {
    pub guard_khz: Vec<f64>,
    pub victim_prb: Vec<usize>,
    #[serde(default = "d_victim_scs")]
    pub victim_scs_khz: f64,
    #[serde(default = "d_victim_n_ofdm")]
    pub victim_n_ofdm: usize,
    #[serde(default = "d_victim_n_cp")]
    pub victim_n_cp: usize,
    pub tx: Vec<TxKind>,
    pub rx: Vec<RxKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    NPrb,
    GuardKhz,
    ADesDb,
    MseMaxDb,
    Overlap,
    Seed,
}

impl SweepAxis {
    fn name(self) -> &'static str {
        match self {
            SweepAxis::NPrb => "n_prb",
            SweepAxis::GuardKhz => "guard_khz",
            SweepAxis::ADesDb => "a_des_db",
            SweepAxis::MseMaxDb => "mse_max_db",
            SweepAxis::Overlap => "overlap",
            SweepAxis::Seed => "seed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl SweepValue {
    fn label(&self) -> String {
        match self {
            SweepValue::Int(v) => v.to_string(),
            SweepValue::Float(v) => fmt12(*v),
            SweepValue::Text(s) => s.clone(),
        }
    }

    fn as_f64(&self, field: &str) -> Result<f64> {
        match self {
            SweepValue::Int(v) => Ok(*v as f64),
            SweepValue::Float(v) => Ok(*v),
            SweepValue::Text(s) => Err(field_err(field, format!("expected a number, got '{s}'"))),
        }
    }

    fn as_usize(&self, field: &str) -> Result<usize> {
        match self {
            SweepValue::Int(v) if *v >= 0 => Ok(*v as usize),
            _ => Err(field_err(field, format!("expected a non-negative integer, got '{}'", self.label()))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<SweepValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountsSpec {
    /// FFT lengths for `fft_counts`; the split-radix table when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fft_lengths: Option<Vec<usize>>,
    /// Burst lengths of the transmitter chain counts.
    #[serde(default = "d_count_symbols")]
    pub symbols: Vec<usize>,
}

fn d_count_symbols() -> Vec<usize> {
    vec![1, 7, 14]
}

impl Default for CountsSpec {
    fn default() -> Self {
        CountsSpec {
            fft_lengths: None,
            symbols: d_count_symbols(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub numerology: Option<NumerologySpec>,
    #[serde(default)]
    pub windows: WindowsSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimization: Option<OptimizationSpec>,
    #[serde(default)]
    pub measurement: MeasurementSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ini: Option<IniSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub counts: CountsSpec,
    #[serde(default)]
    pub output: OutputSpec,
    /// Directory that relative paths inside the file resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

/// Command-line adjustments applied on top of a scenario file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    /// Design seed; the measurement seed becomes `seed + 1000`.
    pub seed: Option<u64>,
    pub max_iters: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Scenario> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut s = Scenario::from_toml_str(&text)
            .map_err(|e| Error::Parse(format!("{}: {}", path.display(), e.to_string().trim_start_matches("parse: "))))?;
        s.base_dir = path.parent().map(Path::to_path_buf);
        Ok(s)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Copy with every defaulted subband field spelled out.
    pub fn normalized(&self) -> Scenario {
        let mut s = self.clone();
        if let Some(num) = s.numerology.as_mut() {
            for sb in num.subbands.iter_mut() {
                sb.l_ofdm = Some(sb.l_ofdm.unwrap_or_else(|| derive_ofdm_ifft_length(sb.n_prb)));
            }
        }
        s
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            if let Some(opt) = self.optimization.as_mut() {
                opt.seed = seed;
            }
            self.measurement.seed = seed.wrapping_add(1000);
        }
        if let (Some(n), Some(opt)) = (o.max_iters, self.optimization.as_mut()) {
            opt.max_iters = n;
        }
        if let Some(d) = &o.out_dir {
            self.output.dir = Some(d.to_string_lossy().into_owned());
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        match &self.output.dir {
            Some(d) => PathBuf::from(d),
            None => PathBuf::from("out").join(&self.name),
        }
    }

    fn numerology(&self) -> Result<&NumerologySpec> {
        self.numerology
            .as_ref()
            .ok_or_else(|| field_err("numerology", "required for this scenario kind"))
    }

    /// FC geometry with `symbols` OFDM symbols per subband.
    pub fn fc_config(&self, symbols: usize) -> Result<FcConfig> {
        let num = self.numerology()?;
        if num.subbands.is_empty() {
            return Err(field_err("numerology.subbands", "at least one subband is required"));
        }
        if !(num.fs_khz > 0.0) {
            return Err(field_err("numerology.fs_khz", "must be positive"));
        }
        let overlap = num.overlap.to_rational()?;
        let mut sbs = Vec::with_capacity(num.subbands.len());
        for (m, sb) in num.subbands.iter().enumerate() {
            let l_ofdm = sb.l_ofdm.unwrap_or_else(|| derive_ofdm_ifft_length(sb.n_prb));
            let c = SubbandConfig::new(m, sb.n_prb, khz(sb.scs_khz), l_ofdm, sb.l_cp, sb.center_bin, symbols)
                .map_err(|e| field_err(&format!("numerology.subbands[{m}]"), strip(&e)))?;
            sbs.push(c);
        }
        derive_fc_params(&sbs, num.n_long, overlap, khz(num.fs_khz)).map_err(|e| {
            let msg = strip(&e);
            let field = if msg.contains('λ') {
                "numerology.overlap".to_string()
            } else if let Some(m) = subband_in(&msg) {
                format!("numerology.subbands[{m}]")
            } else {
                "numerology".to_string()
            };
            field_err(&field, msg)
        })
    }

    /// Transition widths per subband. The default covers 360 kHz of FC bins,
    /// capped at what fits beside the passband.
    pub fn l_tbw(&self, cfg: &FcConfig) -> Result<Vec<usize>> {
        let num = self.numerology()?;
        let fs = khz(num.fs_khz);
        let mut out = Vec::with_capacity(num.subbands.len());
        for (m, sb) in num.subbands.iter().enumerate() {
            let (g, c) = (&cfg.geometry[m], &cfg.subbands[m]);
            let limit = max_transition_bins(g.l_short, fc_passband_bins(c.l_act, g.l_short, c.l_ofdm));
            out.push(match sb.l_tbw {
                Some(t) if t > limit => {
                    return Err(field_err(
                        &format!("numerology.subbands[{m}].l_tbw"),
                        format!("{t} transition bins do not fit; at most {limit} with L_m = {}", g.l_short),
                    ))
                }
                Some(t) => t,
                None => default_l_tbw(fs, num.n_long).min(limit),
            });
        }
        Ok(out)
    }

    fn goal(&self) -> Result<Option<(Goal, &OptimizationSpec)>> {
        let Some(opt) = self.optimization.as_ref() else {
            return Ok(None);
        };
        let goal = match opt.goal {
            GoalKind::MinMse => Goal::MinMse {
                a_des_db: opt
                    .a_des_db
                    .ok_or_else(|| field_err("optimization.a_des_db", "required by goal min_mse"))?,
            },
            GoalKind::MinScr => Goal::MinScr {
                mse_max_db: opt
                    .mse_max_db
                    .ok_or_else(|| field_err("optimization.mse_max_db", "required by goal min_scr"))?,
            },
        };
        Ok(Some((goal, opt)))
    }

    fn design_mode(&self) -> Result<DesignMode> {
        let case = self
            .windows
            .mode
            .case()
            .ok_or_else(|| field_err("windows.mode", format!("'{}' has no adjustable windows", self.windows.mode.name())))?;
        let mut mode = DesignMode::case(case);
        mode.gamma = self.windows.gamma;
        Ok(mode)
    }
}

fn strip(e: &Error) -> String {
    let s = e.to_string();
    s.trim_start_matches("invalid configuration: ").to_string()
}

fn subband_in(msg: &str) -> Option<usize> {
    let rest = msg.strip_prefix("subband ")?;
    rest.split(|c: char| !c.is_ascii_digit()).next()?.parse().ok()
}

/// Transition weights spanning 360 kHz of FC bins.
pub fn default_l_tbw(fs_hz: Rational, n_long: usize) -> usize {
    let bs = fs_hz / Rational::from_integer(n_long as i64);
    (Rational::from_integer(360_000) / bs).ceil().to_integer().max(1) as usize
}

/// Outcome of a scenario run that did not hit a configuration error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    Infeasible,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::Infeasible => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub status: RunStatus,
    /// `key = value` lines.
    pub summary: String,
    /// Artifact name to contents, written under the output directory.
    pub files: BTreeMap<String, String>,
    pub report: Option<MetricsReport>,
}

impl RunOutput {
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let p = dir.join("summary.txt");
        fs::write(&p, &self.summary)?;
        written.push(p);
        for (name, body) in &self.files {
            let p = dir.join(name);
            fs::write(&p, body)?;
            written.push(p);
        }
        Ok(written)
    }

    /// Value of a summary key.
    pub fn get(&self, key: &str) -> Option<&str> {
        summary_value(&self.summary, key)
    }
}

pub fn summary_value<'a>(summary: &'a str, key: &str) -> Option<&'a str> {
    summary
        .lines()
        .filter_map(|l| l.split_once(" = "))
        .find(|(k, _)| *k == key)
        .map(|(_, v)| v)
}

fn kv(s: &mut String, key: &str, value: impl std::fmt::Display) {
    writeln!(s, "{key} = {value}").expect("string write");
}

/// Designed windows and how they were obtained.
pub struct Design {
    pub windows: WindowSet,
    pub report: Option<OptimizeReport>,
    pub spread_db: Option<f64>,
    pub parameters: usize,
}

/// Evaluator for the design payload of the scenario.
pub fn design_evaluator(sc: &Scenario, mode: DesignMode, guard_hz: f64) -> Result<Evaluator> {
    let opt = sc.optimization.as_ref();
    let symbols = opt.map_or(d_opt_symbols(), |o| o.symbols);
    let cfg = sc.fc_config(symbols)?;
    let seed = opt.map_or(d_seed(), |o| o.seed);
    let scr = opt.map_or(ScrModeSpec::Burst, |o| o.scr_mode);
    let w = opt.map_or(d_evm_window(), |o| o.evm_window_cp);
    Evaluator::new(&cfg, mode, seed, guard_hz, scr.into())?
        .with_evm_window(w)
        .map_err(|e| field_err("optimization.evm_window_cp", strip(&e)))
}

/// Windows of an `fc` scenario, optimized when an optimization block exists.
pub fn design_windows(sc: &Scenario, guard_hz: f64) -> Result<Design> {
    let cfg = sc.fc_config(sc.measurement.symbols.max(1))?;
    if let Some(path) = &sc.windows.import {
        let full = sc.base_dir.as_ref().map_or_else(|| PathBuf::from(path), |b| b.join(path));
        let f = fs::File::open(&full).map_err(|e| field_err("windows.import", format!("{}: {e}", full.display())))?;
        let windows = WindowSet::read_from(BufReader::new(f))?;
        windows.check(&cfg).map_err(|e| field_err("windows.import", e))?;
        return Ok(Design {
            windows,
            report: None,
            spread_db: None,
            parameters: 0,
        });
    }
    let l_tbw = sc.l_tbw(&cfg)?;
    match sc.windows.mode {
        WindowMode::Ols | WindowMode::Ola => {
            let mut w = if sc.windows.mode == WindowMode::Ols { ols_windows(&cfg) } else { ola_windows(&cfg) };
            let mode = DesignMode::case(Case::I);
            w.fd = build_windows(&cfg, &mode, &initial_params(&cfg, &mode, &l_tbw)?)?.fd;
            Ok(Design {
                windows: w,
                report: None,
                spread_db: None,
                parameters: 0,
            })
        }
        WindowMode::Wola | WindowMode::Fofdm => Err(field_err(
            "windows.mode",
            format!("'{}' is not a fast-convolution window set", sc.windows.mode.name()),
        )),
        _ => {
            let mode = sc.design_mode()?;
            let parameters = ParamLayout::new(&cfg, &mode, &l_tbw)
                .map_err(|e| field_err("numerology.subbands", strip(&e)))?
                .len();
            let Some((goal, opt)) = sc.goal()? else {
                let p = initial_params(&cfg, &mode, &l_tbw)?;
                return Ok(Design {
                    windows: build_windows(&cfg, &mode, &p)?,
                    report: None,
                    spread_db: None,
                    parameters,
                });
            };
            if opt.max_iters == 0 {
                return Err(field_err("optimization.max_iters", "must be positive"));
            }
            if opt.symbols == 0 {
                return Err(field_err("optimization.symbols", "must be positive"));
            }
            let eval = design_evaluator(sc, mode, guard_hz)?;
            let mut o = OptimizeOptions::new(goal);
            o.solver = match opt.solver {
                SolverKind::Slsqp => Solver::Slsqp,
                SolverKind::Mma => Solver::Mma,
                SolverKind::Ccsaq => Solver::Ccsaq,
            };
            o.box_half_width = opt.box_half_width;
            o.max_iters = opt.max_iters;
            o.margin_db = opt.margin_db;
            let (report, spread_db) = if opt.starts <= 1 {
                (optimize(&eval, &l_tbw, &o)?, None)
            } else {
                match multistart(&eval, &l_tbw, &o, opt.starts, opt.seed, opt.spread) {
                    Ok(ms) => {
                        let spread = ms.objective_spread_db();
                        (ms.runs.into_iter().nth(ms.best).expect("best index"), Some(spread))
                    }
                    Err(Error::Optimization(_)) => (optimize(&eval, &l_tbw, &o)?, None),
                    Err(e) => return Err(e),
                }
            };
            let windows = build_windows(eval.config(), &report.mode, &report.params)?;
            Ok(Design {
                windows,
                report: Some(report),
                spread_db,
                parameters,
            })
        }
    }
}

/// Baseline transmitter output of every subband, summed, for the payload of
/// `eval`, placed where the FC output would start its burst.
pub fn baseline_output(sc: &Scenario, eval: &Evaluator, kind: TxKind) -> Result<Vec<Complex64>> {
    let cfg = eval.config();
    let fs = to_f64(cfg.fs_hz);
    let mut out = vec![Complex64::new(0.0, 0.0); cfg.output_len()];
    for m in 0..cfg.num_subbands() {
        let sb = &cfg.subbands[m];
        let i = cfg.geometry[m].interp;
        let (n, cp) = (sb.l_ofdm * i, sb.l_cp * i);
        let center = cfg
            .center_subcarrier(m)
            .ok_or_else(|| field_err(&format!("numerology.subbands[{m}].center_bin"), "not on the subcarrier grid"))?;
        let x = cp_ofdm_modulate_at(eval.payload(m), n, cp, center)?;
        let y = match kind {
            TxKind::Plain | TxKind::Fc => x,
            TxKind::Wola => {
                let slope = sc.windows.wola_slope.unwrap_or(cp / 2);
                wola_tx(&x, &WolaConfig { n_ofdm: n, n_cp: cp, slope }).map_err(|e| field_err("windows.wola_slope", strip(&e)))?
            }
            TxKind::Fofdm => {
                let (lo, hi) = cfg.band_edges_hz(m);
                let scs = to_f64(sb.scs_hz);
                let excess = sc
                    .windows
                    .fofdm_excess_khz
                    .map_or_else(|| FofdmConfig::default_excess_hz(scs), |k| k * 1e3);
                let fc = FofdmConfig::for_allocation(n, fs, (to_f64(lo), to_f64(hi)), excess);
                fofdm_tx(&x, &fc).map_err(|e| field_err("windows.fofdm_excess_khz", strip(&e)))?
            }
        };
        for (o, v) in out[cfg.n_o..].iter_mut().zip(&y) {
            *o += v;
        }
    }
    Ok(out)
}

fn measurement_evaluator(sc: &Scenario, mode: DesignMode, guard_hz: f64) -> Result<Evaluator> {
    let ms = &sc.measurement;
    if ms.symbols == 0 {
        return Err(field_err("measurement.symbols", "must be positive"));
    }
    let cfg = sc.fc_config(ms.symbols)?;
    Evaluator::new(&cfg, mode, ms.seed, guard_hz, ScrMode::SteadyState)
        .map_err(|e| field_err("measurement.symbols", strip(&e)))?
        .with_evm_window(ms.evm_window_cp)
        .map_err(|e| field_err("measurement.evm_window_cp", strip(&e)))
}

fn measurement_mode(sc: &Scenario) -> DesignMode {
    let mut mode = DesignMode::case(sc.windows.mode.case().unwrap_or(Case::I));
    mode.gamma = sc.windows.gamma;
    mode
}

/// Runs a scenario of any kind without touching the file system.
pub fn run(sc: &Scenario) -> Result<RunOutput> {
    match sc.kind {
        Kind::FftCounts => run_fft_counts(sc),
        Kind::Fc => run_fc(sc),
        Kind::Ini => run_ini(sc),
    }
}

fn run_fft_counts(sc: &Scenario) -> Result<RunOutput> {
    let lengths = sc.counts.fft_lengths.clone().unwrap_or_else(|| TABLE_FFT_LENGTHS.to_vec());
    let csv = fft_table_csv(&lengths).map_err(|e| field_err("counts.fft_lengths", strip(&e)))?;
    let mut summary = String::new();
    kv(&mut summary, "scenario", &sc.name);
    kv(&mut summary, "kind", "fft_counts");
    kv(&mut summary, "lengths", lengths.len());
    let mut files = BTreeMap::new();
    files.insert("fft_counts.csv".to_string(), csv);
    Ok(RunOutput {
        status: RunStatus::Ok,
        summary,
        files,
        report: None,
    })
}

fn write_config_summary(s: &mut String, sc: &Scenario, cfg: &FcConfig, l_tbw: &[usize]) {
    kv(s, "scenario", &sc.name);
    kv(s, "mode", sc.windows.mode.name());
    kv(s, "fs_khz", fmt12(to_f64(cfg.fs_hz) / 1e3));
    kv(s, "n_long", cfg.n_long);
    kv(s, "overlap", cfg.overlap);
    kv(s, "bin_spacing_khz", fmt12(to_f64(cfg.bin_spacing_hz()) / 1e3));
    for (m, g) in cfg.geometry.iter().enumerate() {
        let sb = &cfg.subbands[m];
        kv(s, &format!("subband.{m}.n_prb"), sb.n_prb);
        kv(s, &format!("subband.{m}.l_ofdm"), sb.l_ofdm);
        kv(s, &format!("subband.{m}.l_cp"), sb.l_cp);
        kv(s, &format!("subband.{m}.l_short"), g.l_short);
        kv(s, &format!("subband.{m}.interp"), g.interp);
        kv(s, &format!("subband.{m}.l_tbw"), l_tbw[m]);
    }
}

fn write_design_summary(s: &mut String, d: &Design) {
    kv(s, "optimization.parameters", d.parameters);
    if let Some(r) = &d.report {
        kv(s, "optimization.feasible", r.feasible);
        kv(s, "optimization.status", &r.status);
        kv(s, "optimization.evaluations", r.evaluations);
        kv(s, "optimization.wall_seconds", format!("{:.1}", r.wall_seconds));
        kv(s, "optimization.start_mse_avg_db", fmt12(to_db(r.start.worst_mse_avg())));
        kv(s, "optimization.start_scr_db", fmt12(r.start.worst_scr_db()));
        if let Some(fd) = &r.fd_only {
            kv(s, "optimization.fd_only_mse_avg_db", fmt12(to_db(fd.worst_mse_avg())));
            kv(s, "optimization.fd_only_scr_db", fmt12(fd.worst_scr_db()));
        }
        kv(s, "optimization.mse_avg_db", fmt12(to_db(r.best.worst_mse_avg())));
        kv(s, "optimization.scr_db", fmt12(r.best.worst_scr_db()));
    }
    if let Some(sp) = d.spread_db {
        kv(s, "optimization.multistart_spread_db", fmt12(sp));
    }
}

fn write_measurement_summary(s: &mut String, sc: &Scenario, e: &Evaluation) {
    kv(s, "measurement.symbols", sc.measurement.symbols);
    kv(s, "measurement.guard_khz", fmt12(sc.measurement.guard_khz));
    s.push_str(&e.report().summary());
    kv(s, "mse_avg_db", fmt12(to_db(e.worst_mse_avg())));
    kv(s, "mse_max_db", fmt12(to_db(e.mse.iter().map(|r| r.max).fold(0.0, f64::max))));
    kv(s, "scr_db", fmt12(e.worst_scr_db()));
}

fn run_fc(sc: &Scenario) -> Result<RunOutput> {
    let guard_hz = sc.measurement.guard_khz * 1e3;
    let cfg = sc.fc_config(sc.measurement.symbols.max(1))?;
    let l_tbw = sc.l_tbw(&cfg)?;
    if l_tbw.len() != cfg.num_subbands() {
        return Err(field_err("numerology.subbands", "l_tbw count mismatch"));
    }
    let mut summary = String::new();
    write_config_summary(&mut summary, sc, &cfg, &l_tbw);
    let mut files = BTreeMap::new();
    let meas = measurement_evaluator(sc, measurement_mode(sc), guard_hz)?;
    let mut status = RunStatus::Ok;
    let eval = match sc.windows.mode {
        WindowMode::Wola | WindowMode::Fofdm => {
            let kind = if sc.windows.mode == WindowMode::Wola { TxKind::Wola } else { TxKind::Fofdm };
            meas.evaluate_output(&baseline_output(sc, &meas, kind)?, cfg.n_o)?
        }
        _ => {
            let design = design_windows(sc, guard_hz)?;
            write_design_summary(&mut summary, &design);
            if let Some(r) = &design.report {
                files.insert("history.csv".to_string(), r.history_csv());
                if !r.feasible {
                    status = RunStatus::Infeasible;
                }
            }
            let mut w = Vec::new();
            design.windows.write_to(&mut w)?;
            files.insert("windows.txt".to_string(), String::from_utf8(w).expect("ascii window file"));
            meas.evaluate_windows(&design.windows)?
        }
    };
    write_measurement_summary(&mut summary, sc, &eval);
    kv(&mut summary, "status", if status == RunStatus::Ok { "ok" } else { "infeasible" });
    let report = eval.report();
    files.insert("metrics.csv".to_string(), report.to_csv());
    files.insert("opcounts.csv".to_string(), opcounts_csv(sc)?);
    Ok(RunOutput {
        status,
        summary,
        files,
        report: Some(report),
    })
}

/// Real operation counts of the FC chain per burst length and of the
/// reference transmitters per symbol.
pub fn opcounts_csv(sc: &Scenario) -> Result<String> {
    let mut s = String::from("symbols,scheme,subband,real_mults,real_adds,mults_per_symbol\n");
    for &b in &sc.counts.symbols {
        if b == 0 {
            return Err(field_err("counts.symbols", "burst lengths must be positive"));
        }
        let cfg = sc.fc_config(b)?;
        let l_tbw = sc.l_tbw(&cfg)?;
        for (name, flags) in [("fc_original", WindowFlags::ORIGINAL), ("fc_generalized", WindowFlags::GENERALIZED)] {
            let c = chain_op_count(&cfg, &l_tbw, flags)?;
            writeln!(
                s,
                "{b},{name},all,{},{},{}",
                c.total.real_mults,
                c.total.real_adds,
                fmt12(c.mults_per_symbol)
            )
            .expect("string write");
        }
        for m in 0..cfg.num_subbands() {
            let sb = &cfg.subbands[m];
            let i = cfg.geometry[m].interp;
            let (n, cp) = (sb.l_ofdm * i, sb.l_cp * i);
            let slope = sc.windows.wola_slope.unwrap_or(cp / 2);
            let rows = [
                ("cp_ofdm", Baseline::CpOfdm { n_ofdm: n }),
                ("wola", Baseline::Wola { n_ofdm: n, slope }),
                ("fofdm", Baseline::Fofdm { n_filt: n / 2, n_ofdm: n, n_cp: cp }),
                (
                    "fofdm_interpolating",
                    Baseline::FofdmInterpolating {
                        n_filt: n / 2,
                        n_ofdm: n,
                        n_cp: cp,
                        interp: i,
                    },
                ),
            ];
            for (name, kind) in rows {
                let per = baseline_op_count(kind)?;
                writeln!(s, "{b},{name},{m},{},,{}", per * b as u64, fmt12(per as f64)).expect("string write");
            }
        }
    }
    Ok(s)
}

/// Op-count artifacts for the `counts` verb.
pub fn run_counts(sc: &Scenario) -> Result<RunOutput> {
    if sc.kind == Kind::FftCounts {
        return run_fft_counts(sc);
    }
    let mut summary = String::new();
    kv(&mut summary, "scenario", &sc.name);
    let mut files = BTreeMap::new();
    files.insert("opcounts.csv".to_string(), opcounts_csv(sc)?);
    Ok(RunOutput {
        status: RunStatus::Ok,
        summary,
        files,
        report: None,
    })
}

/// One INI measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct IniPoint {
    pub guard_khz: f64,
    pub victim_prb: usize,
    pub tx: TxKind,
    pub rx: RxKind,
    pub ini_db: f64,
}

fn run_ini(sc: &Scenario) -> Result<RunOutput> {
    let ini = sc.ini.as_ref().ok_or_else(|| field_err("ini", "required by kind = \"ini\""))?;
    if ini.guard_khz.is_empty() {
        return Err(field_err("ini.guard_khz", "empty axis"));
    }
    if ini.victim_prb.is_empty() || ini.victim_prb.contains(&0) {
        return Err(field_err("ini.victim_prb", "needs at least one positive PRB count"));
    }
    if ini.tx.is_empty() || ini.rx.is_empty() {
        return Err(field_err("ini.tx", "at least one transmitter and one receiver are required"));
    }
    let cfg = sc.fc_config(sc.measurement.symbols.max(1))?;
    let fs = to_f64(cfg.fs_hz);
    let victim_fs = ini.victim_n_ofdm as f64 * ini.victim_scs_khz * 1e3;
    if (victim_fs - fs).abs() > 1e-6 * fs {
        return Err(field_err(
            "ini.victim_n_ofdm",
            format!("victim rate {victim_fs} Hz differs from the transmitter rate {fs} Hz"),
        ));
    }
    let l_tbw = sc.l_tbw(&cfg)?;
    let mut summary = String::new();
    write_config_summary(&mut summary, sc, &cfg, &l_tbw);
    let meas = measurement_evaluator(sc, measurement_mode(sc), sc.measurement.guard_khz * 1e3)?;
    let lo_edge = (0..cfg.num_subbands())
        .map(|m| to_f64(cfg.band_edges_hz(m).0))
        .fold(f64::INFINITY, f64::min);
    let hi_edge = (0..cfg.num_subbands())
        .map(|m| to_f64(cfg.band_edges_hz(m).1))
        .fold(f64::NEG_INFINITY, f64::max);
    let sym = ini.victim_n_ofdm + ini.victim_n_cp;
    let victim_symbols = (cfg.trimmed_len(0) / sym).max(1);
    let mut status = RunStatus::Ok;
    let mut points = Vec::new();
    for (gi, &g) in ini.guard_khz.iter().enumerate() {
        let mut signals: Vec<(TxKind, Vec<Complex64>)> = Vec::new();
        for &tx in &ini.tx {
            let out = if tx == TxKind::Fc {
                let mut per_guard = sc.clone();
                per_guard.measurement.guard_khz = g;
                let design = design_windows(&per_guard, g * 1e3)?;
                let e = meas.evaluate_windows(&design.windows)?;
                let key = format!("fc.guard_{gi}");
                kv(&mut summary, &format!("{key}.guard_khz"), fmt12(g));
                if let Some(r) = &design.report {
                    kv(&mut summary, &format!("{key}.feasible"), r.feasible);
                    kv(&mut summary, &format!("{key}.design_scr_db"), fmt12(r.best.worst_scr_db()));
                    if !r.feasible {
                        status = RunStatus::Infeasible;
                    }
                }
                kv(&mut summary, &format!("{key}.mse_avg_db"), fmt12(to_db(e.worst_mse_avg())));
                meas.transmit(&design.windows)?
            } else {
                baseline_output(sc, &meas, tx)?
            };
            signals.push((tx, out));
        }
        for &prb in &ini.victim_prb {
            let mut v = VictimRx::below(
                lo_edge,
                g * 1e3,
                ini.victim_n_ofdm,
                ini.victim_n_cp,
                ini.victim_scs_khz * 1e3,
                12 * prb,
                victim_symbols,
            );
            v.start = cfg.n_o;
            for (tx, out) in &signals {
                for &rx in &ini.rx {
                    let ini_db = match rx {
                        RxKind::Plain => measure_ini(out, &v, (lo_edge, hi_edge))?,
                        RxKind::Wola => {
                            let w = WolaConfig::quarter_cp(ini.victim_n_ofdm, ini.victim_n_cp);
                            v.mean_power_db(&wola_rx(&v.downconvert(out), &w)?)?
                        }
                        RxKind::Fofdm => {
                            let f = FofdmConfig::for_allocation(
                                ini.victim_n_ofdm,
                                fs,
                                v.band_hz(),
                                FofdmConfig::default_excess_hz(v.scs_hz),
                            );
                            measure_ini(&fofdm_tx(out, &f)?, &v, (lo_edge, hi_edge))?
                        }
                    };
                    points.push(IniPoint {
                        guard_khz: g,
                        victim_prb: prb,
                        tx: *tx,
                        rx,
                        ini_db,
                    });
                }
            }
        }
    }
    let mut csv = String::from("guard_khz,victim_prb,tx,rx,ini_db\n");
    for p in &points {
        writeln!(csv, "{},{},{},{},{}", fmt12(p.guard_khz), p.victim_prb, p.tx.name(), p.rx.name(), fmt12(p.ini_db))
            .expect("string write");
    }
    for (gi, &g) in ini.guard_khz.iter().enumerate() {
        for &tx in &ini.tx {
            for &rx in &ini.rx {
                let sel: Vec<f64> = points
                    .iter()
                    .filter(|p| p.guard_khz == g && p.tx == tx && p.rx == rx)
                    .map(|p| 10f64.powf(p.ini_db / 10.0))
                    .collect();
                let mean = sel.iter().sum::<f64>() / sel.len() as f64;
                kv(
                    &mut summary,
                    &format!("ini.guard_{gi}.{}.{}_db", tx.name(), rx.name()),
                    fmt12(to_db(mean)),
                );
            }
        }
    }
    kv(&mut summary, "status", if status == RunStatus::Ok { "ok" } else { "infeasible" });
    let mut files = BTreeMap::new();
    files.insert("ini.csv".to_string(), csv);
    Ok(RunOutput {
        status,
        summary,
        files,
        report: None,
    })
}

/// Mean INI in dB over the victim allocations of one guard, TX and RX.
pub fn ini_mean_db(summary: &str, guard_index: usize, tx: TxKind, rx: RxKind) -> Option<f64> {
    summary_value(summary, &format!("ini.guard_{guard_index}.{}.{}_db", tx.name(), rx.name()))?
        .parse()
        .ok()
}

/// Scenario with one sweep value applied.
pub fn sweep_point(sc: &Scenario, value: &SweepValue) -> Result<Scenario> {
    let sw = sc.sweep.as_ref().ok_or_else(|| field_err("sweep", "no sweep axis declared"))?;
    let field = format!("sweep.values ({})", sw.axis.name());
    let mut p = sc.clone();
    p.sweep = None;
    match sw.axis {
        SweepAxis::NPrb => {
            let n = value.as_usize(&field)?;
            let num = p
                .numerology
                .as_mut()
                .ok_or_else(|| field_err("numerology", "required by the n_prb axis"))?;
            for s in num.subbands.iter_mut() {
                s.n_prb = n;
            }
        }
        SweepAxis::GuardKhz => p.measurement.guard_khz = value.as_f64(&field)?,
        SweepAxis::ADesDb => {
            p.optimization
                .as_mut()
                .ok_or_else(|| field_err("optimization", "required by the a_des_db axis"))?
                .a_des_db = Some(value.as_f64(&field)?)
        }
        SweepAxis::MseMaxDb => {
            p.optimization
                .as_mut()
                .ok_or_else(|| field_err("optimization", "required by the mse_max_db axis"))?
                .mse_max_db = Some(value.as_f64(&field)?)
        }
        SweepAxis::Overlap => {
            p.numerology
                .as_mut()
                .ok_or_else(|| field_err("numerology", "required by the overlap axis"))?
                .overlap = match value {
                SweepValue::Text(s) => Overlap::Fraction(s.clone()),
                other => Overlap::Decimal(other.as_f64(&field)?),
            }
        }
        SweepAxis::Seed => {
            let s = value.as_usize(&field)? as u64;
            p.apply(&Overrides {
                seed: Some(s),
                ..Overrides::default()
            });
        }
    }
    Ok(p)
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub status: RunStatus,
    /// One row per point and subband.
    pub csv: String,
    pub points: Vec<RunOutput>,
}

/// Runs every sweep point (concurrently) and merges rows in axis order.
/// An `ini` scenario sweeps its own guard and allocation axes.
pub fn sweep(sc: &Scenario) -> Result<SweepOutput> {
    if sc.kind == Kind::Ini {
        let out = run(sc)?;
        return Ok(SweepOutput {
            status: out.status,
            csv: out.files["ini.csv"].clone(),
            points: vec![out],
        });
    }
    let sw = sc.sweep.as_ref().ok_or_else(|| field_err("sweep", "no sweep axis declared"))?;
    if sw.values.is_empty() {
        return Err(field_err("sweep.values", "empty axis"));
    }
    let scenarios = sw.values.iter().map(|v| sweep_point(sc, v)).collect::<Result<Vec<_>>>()?;
    let points = scenarios.par_iter().map(run).collect::<Result<Vec<_>>>()?;
    let mut csv = format!(
        "{},subband,scr_left_db,scr_right_db,scr_db,mse_avg_db,mse_max_db,evm_avg_pct,status\n",
        sw.axis.name()
    );
    let mut status = RunStatus::Ok;
    for (v, out) in sw.values.iter().zip(&points) {
        if out.status == RunStatus::Infeasible {
            status = RunStatus::Infeasible;
        }
        let tag = if out.status == RunStatus::Ok { "ok" } else { "infeasible" };
        let Some(rep) = &out.report else { continue };
        for (m, sb) in rep.subbands.iter().enumerate() {
            writeln!(
                csv,
                "{},{m},{},{},{},{},{},{},{tag}",
                v.label(),
                fmt12(sb.scr_left_db),
                fmt12(sb.scr_right_db),
                fmt12(sb.scr_db()),
                fmt12(sb.mse.avg_db()),
                fmt12(sb.mse.max_db()),
                fmt12(100.0 * sb.mse.avg.sqrt()),
            )
            .expect("string write");
        }
    }
    Ok(SweepOutput { status, csv, points })
}

impl SweepOutput {
    /// Writes `sweep.csv` and one `point_NNN` directory per point.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let p = dir.join("sweep.csv");
        fs::write(&p, &self.csv)?;
        let mut written = vec![p];
        for (k, out) in self.points.iter().enumerate() {
            written.extend(out.write(&dir.join(format!("point_{k:03}")))?);
        }
        Ok(written)
    }
}

/// Designs the windows of an `fc` scenario and serializes them.
pub fn export_windows(sc: &Scenario) -> Result<(RunStatus, String)> {
    let d = design_windows(sc, sc.measurement.guard_khz * 1e3)?;
    let status = match &d.report {
        Some(r) if !r.feasible => RunStatus::Infeasible,
        _ => RunStatus::Ok,
    };
    let mut w = Vec::new();
    d.windows.write_to(&mut w)?;
    Ok((status, String::from_utf8(w).expect("ascii window file")))
}

/// Measures a window file against the scenario's numerology.
pub fn import_windows(sc: &Scenario, path: &Path) -> Result<RunOutput> {
    let mut s = sc.clone();
    s.windows.import = Some(path.to_string_lossy().into_owned());
    s.base_dir = None;
    s.optimization = None;
    run(&s)
}

/// Caps the worker threads used for sweep points and gradients.
pub fn set_jobs(n: usize) -> Result<()> {
    if n == 0 {
        return Err(field_err("jobs", "must be positive"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| field_err("jobs", e))
}
