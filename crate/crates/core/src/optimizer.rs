//! Joint window design: minimize the worst subband MSE subject to SCR
//! limits (or the interchanged problem) with SLSQP on finite-difference
//! gradients.

use std::cell::RefCell;
use std::fmt::Write as _;
use std::time::Instant;

use nlopt::{Algorithm, Nlopt, Target};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::fcfb::FcBlockPipeline;
use crate::metrics::{
    compute_mse, design_measurement_filter, fmt12, scr_centers, to_db, MetricsReport, MseReport, ScrMode, ScrProbe,
    Side, SubbandMetrics,
};
use crate::numerology::{to_f64, FcConfig};
use crate::ofdm::{cp_ofdm_demod_highrate, cp_ofdm_modulate, zf_equalize, Modulation, SymbolGrid};
use crate::windowing::{
    analysis_identity_params, analysis_param_len, build_analysis_window, build_fd_window, build_synthesis_window,
    fc_passband_bins, raised_cosine_ramp, synthesis_param_len, synthesis_params_from_window, AnalysisWindow,
    AnalysisWindowSpec, FdWindowSpec, SynthesisWindowSpec, WindowSet,
};
use crate::{Error, Result};

/// How one time-domain window family enters the optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Held at its overlap-save value.
    Fixed,
    /// Every sample is a parameter.
    Full,
    /// Low-order spectral parameterization.
    Reduced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    I,
    II,
    III,
    IV,
    V,
}

impl Case {
    pub fn parse(s: &str) -> Option<Case> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Some(Case::I),
            "II" | "2" => Some(Case::II),
            "III" | "3" => Some(Case::III),
            "IV" | "4" => Some(Case::IV),
            "V" | "5" => Some(Case::V),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DesignMode {
    pub analysis: Family,
    pub synthesis: Family,
    /// Spectral bins of the reduced synthesis window.
    pub gamma: usize,
}

pub const DEFAULT_GAMMA: usize = 20;

impl DesignMode {
    pub fn case(c: Case) -> DesignMode {
        let (analysis, synthesis) = match c {
            Case::I => (Family::Fixed, Family::Fixed),
            Case::II => (Family::Fixed, Family::Full),
            Case::III => (Family::Full, Family::Fixed),
            Case::IV => (Family::Full, Family::Full),
            Case::V => (Family::Reduced, Family::Reduced),
        };
        DesignMode {
            analysis,
            synthesis,
            gamma: DEFAULT_GAMMA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub xi: Vec<usize>,
    pub phi: Vec<usize>,
    pub psi: usize,
}

impl ParamLayout {
    pub fn new(cfg: &FcConfig, mode: &DesignMode, l_tbw: &[usize]) -> Result<ParamLayout> {
        if l_tbw.len() != cfg.num_subbands() {
            return Err(Error::Config(format!(
                "l_tbw lists {} subbands, configuration has {}",
                l_tbw.len(),
                cfg.num_subbands()
            )));
        }
        let phi = cfg
            .subbands
            .iter()
            .map(|sb| match mode.analysis {
                Family::Fixed => 0,
                Family::Full => sb.l_ofdm,
                Family::Reduced => analysis_param_len(sb.l_ofdm, sb.l_act),
            })
            .collect();
        let psi = match mode.synthesis {
            Family::Fixed => 0,
            Family::Full => cfg.n_long,
            Family::Reduced => synthesis_param_len(mode.gamma),
        };
        Ok(ParamLayout {
            xi: l_tbw.to_vec(),
            phi,
            psi,
        })
    }

    pub fn len(&self) -> usize {
        self.xi.iter().sum::<usize>() + self.phi.iter().sum::<usize>() + self.psi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// All adjustable window values: every ξ_m, then every φ_m, then ψ.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub xi: Vec<Vec<f64>>,
    pub phi: Vec<Vec<f64>>,
    pub psi: Vec<f64>,
}

impl ParamVector {
    pub fn layout(&self) -> ParamLayout {
        ParamLayout {
            xi: self.xi.iter().map(Vec::len).collect(),
            phi: self.phi.iter().map(Vec::len).collect(),
            psi: self.psi.len(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.layout().len());
        self.xi.iter().for_each(|x| v.extend_from_slice(x));
        self.phi.iter().for_each(|x| v.extend_from_slice(x));
        v.extend_from_slice(&self.psi);
        v
    }

    pub fn unflatten(layout: &ParamLayout, flat: &[f64]) -> Result<ParamVector> {
        if flat.len() != layout.len() {
            return Err(Error::Length {
                what: "parameter vector",
                expected: layout.len(),
                got: flat.len(),
            });
        }
        let mut at = 0;
        let mut take = |n: usize| {
            let s = flat[at..at + n].to_vec();
            at += n;
            s
        };
        let xi = layout.xi.iter().map(|&n| take(n)).collect();
        let phi = layout.phi.iter().map(|&n| take(n)).collect();
        let psi = take(layout.psi);
        Ok(ParamVector { xi, phi, psi })
    }
}

/// Raised-cosine-tapered window whose shifts by `N_S` add to one.
pub fn cola_taper(n_long: usize, n_o: usize) -> Vec<f64> {
    (0..n_long)
        .map(|k| {
            let edge = k.min(n_long - 1 - k);
            if edge >= n_o {
                1.0
            } else {
                0.5 * (1.0 - (std::f64::consts::PI * (edge as f64 + 0.5) / n_o as f64).cos())
            }
        })
        .collect()
}

fn ols_synthesis(cfg: &FcConfig) -> Vec<f64> {
    let n_l = cfg.n_o.div_ceil(2);
    let mut s = vec![0.0; cfg.n_long];
    s[n_l..n_l + cfg.n_s].iter_mut().for_each(|v| *v = 1.0);
    s
}

/// Starting point: raised-cosine transitions, identity analysis and the
/// overlap-save synthesis window (its band-limited taper when reduced).
pub fn initial_params(cfg: &FcConfig, mode: &DesignMode, l_tbw: &[usize]) -> Result<ParamVector> {
    let layout = ParamLayout::new(cfg, mode, l_tbw)?;
    let xi = l_tbw.iter().map(|&t| raised_cosine_ramp(t)).collect();
    let phi = cfg
        .subbands
        .iter()
        .map(|sb| match mode.analysis {
            Family::Fixed => Vec::new(),
            Family::Full => vec![1.0; sb.l_ofdm],
            Family::Reduced => analysis_identity_params(sb.l_ofdm, sb.l_act),
        })
        .collect();
    let psi = match mode.synthesis {
        Family::Fixed => Vec::new(),
        Family::Full => ols_synthesis(cfg),
        Family::Reduced => synthesis_params_from_window(&cola_taper(cfg.n_long, cfg.n_o), mode.gamma),
    };
    let p = ParamVector { xi, phi, psi };
    debug_assert_eq!(p.layout(), layout);
    Ok(p)
}

pub fn build_windows(cfg: &FcConfig, mode: &DesignMode, p: &ParamVector) -> Result<WindowSet> {
    let m_count = cfg.num_subbands();
    if p.xi.len() != m_count || p.phi.len() != m_count {
        return Err(Error::Length {
            what: "parameter subbands",
            expected: m_count,
            got: p.xi.len().min(p.phi.len()),
        });
    }
    let mut fd = Vec::with_capacity(m_count);
    let mut analysis = Vec::with_capacity(m_count);
    for m in 0..m_count {
        let g = &cfg.geometry[m];
        let sb = &cfg.subbands[m];
        fd.push(build_fd_window(&FdWindowSpec {
            l_short: g.l_short,
            passband: fc_passband_bins(sb.l_act, g.l_short, sb.l_ofdm),
            l_tbw: p.xi[m].len(),
            weights: p.xi[m].clone(),
        })?);
        analysis.push(match mode.analysis {
            Family::Fixed => AnalysisWindow::Block(vec![1.0; g.l_short]),
            Family::Full => {
                if p.phi[m].len() != sb.l_ofdm {
                    return Err(Error::Length {
                        what: "analysis parameters",
                        expected: sb.l_ofdm,
                        got: p.phi[m].len(),
                    });
                }
                AnalysisWindow::Aligned(p.phi[m].clone())
            }
            Family::Reduced => AnalysisWindow::Aligned(build_analysis_window(&AnalysisWindowSpec {
                l_ofdm: sb.l_ofdm,
                l_act: sb.l_act,
                params: p.phi[m].clone(),
            })?),
        });
    }
    let synthesis = match mode.synthesis {
        Family::Fixed => ols_synthesis(cfg),
        Family::Full => {
            if p.psi.len() != cfg.n_long {
                return Err(Error::Length {
                    what: "synthesis parameters",
                    expected: cfg.n_long,
                    got: p.psi.len(),
                });
            }
            p.psi.clone()
        }
        Family::Reduced => build_synthesis_window(&SynthesisWindowSpec {
            n_long: cfg.n_long,
            gamma: mode.gamma,
            params: p.psi.clone(),
        })?,
    };
    Ok(WindowSet { fd, analysis, synthesis })
}

/// Transmit chain, receiver and metrics for a fixed seeded payload.
pub struct Evaluator {
    cfg: FcConfig,
    mode: DesignMode,
    tx: Vec<SymbolGrid>,
    bursts: Vec<Vec<Complex64>>,
    centers: Vec<i64>,
    bands: Vec<(f64, f64)>,
    guard_hz: f64,
    probe: ScrProbe,
    timing: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Per subband, the report at the receiver timing with the largest
    /// average MSE.
    pub mse: Vec<MseReport>,
    /// Average MSE at every receiver timing, per subband.
    pub mse_by_timing: Vec<Vec<f64>>,
    /// (left, right) SCR in dB per subband.
    pub scr_db: Vec<(f64, f64)>,
}

impl Evaluation {
    pub fn worst_mse_avg(&self) -> f64 {
        self.mse.iter().map(|r| r.avg).fold(0.0, f64::max)
    }

    pub fn worst_scr_db(&self) -> f64 {
        self.scr_db.iter().map(|&(l, r)| l.max(r)).fold(f64::MIN, f64::max)
    }

    pub fn report(&self) -> MetricsReport {
        MetricsReport {
            subbands: self
                .mse
                .iter()
                .zip(&self.scr_db)
                .map(|(m, &(l, r))| SubbandMetrics {
                    scr_left_db: l,
                    scr_right_db: r,
                    mse: m.clone(),
                })
                .collect(),
        }
    }
}

impl Evaluator {
    pub fn new(cfg: &FcConfig, mode: DesignMode, seed: u64, guard_hz: f64, scr_mode: ScrMode) -> Result<Evaluator> {
        let mut tx = Vec::new();
        let mut bursts = Vec::new();
        let mut centers = Vec::new();
        let mut bands = Vec::new();
        for m in 0..cfg.num_subbands() {
            let sb = &cfg.subbands[m];
            let grid = SymbolGrid::random(sb.l_act, sb.n_symbols, Modulation::Qpsk, seed.wrapping_add(m as u64));
            bursts.push(cp_ofdm_modulate(&grid, sb.l_ofdm, sb.l_cp)?);
            tx.push(grid);
            centers.push(cfg.center_subcarrier(m).ok_or_else(|| {
                Error::Config(format!(
                    "subband {m}: center frequency {} Hz is not on the subcarrier grid",
                    to_f64(cfg.center_hz(m))
                ))
            })?);
            let (lo, hi) = cfg.band_edges_hz(m);
            bands.push((to_f64(lo), to_f64(hi)));
        }
        let filter = design_measurement_filter(to_f64(cfg.fs_hz))?;
        let mut probe = ScrProbe::new(filter, cfg.output_len(), scr_mode)?;
        for &b in &bands {
            for side in [Side::Left, Side::Right] {
                let (s, i) = scr_centers(b, side, guard_hz);
                probe.prepare(&[s, i]);
            }
        }
        Ok(Evaluator {
            cfg: cfg.clone(),
            mode,
            tx,
            bursts,
            centers,
            bands,
            guard_hz,
            probe,
            timing: vec![vec![0]; cfg.num_subbands()],
        })
    }

    /// Receiver FFT window positions, each given as the fraction of the
    /// high-rate CP by which the window starts before the CP end. MSE is
    /// taken at the worst position.
    pub fn with_rx_timing(mut self, fractions: &[f64]) -> Result<Evaluator> {
        if fractions.is_empty() {
            return Err(Error::Config("at least one RX timing position is required".into()));
        }
        for m in 0..self.cfg.num_subbands() {
            let cp = self.cfg.subbands[m].l_cp * self.cfg.geometry[m].interp;
            let mut adv = Vec::with_capacity(fractions.len());
            for &f in fractions {
                if !(0.0..=1.0).contains(&f) {
                    return Err(Error::Config(format!("RX timing {f} outside [0, 1] CP")));
                }
                adv.push((f * cp as f64).round() as usize);
            }
            self.timing[m] = adv;
        }
        Ok(self)
    }

    /// EVM window of `w` CP fractions centered on the CP middle.
    pub fn with_evm_window(self, w: f64) -> Result<Evaluator> {
        if w == 0.0 {
            self.with_rx_timing(&[0.5])
        } else {
            self.with_rx_timing(&[0.5 - w / 2.0, 0.5 + w / 2.0])
        }
    }

    pub fn config(&self) -> &FcConfig {
        &self.cfg
    }

    /// Same payload, receiver and probe with other adjustable families.
    pub fn with_mode(&self, mode: DesignMode) -> Evaluator {
        Evaluator {
            cfg: self.cfg.clone(),
            mode,
            tx: self.tx.clone(),
            bursts: self.bursts.clone(),
            centers: self.centers.clone(),
            bands: self.bands.clone(),
            guard_hz: self.guard_hz,
            probe: self.probe.clone(),
            timing: self.timing.clone(),
        }
    }

    pub fn mode(&self) -> &DesignMode {
        &self.mode
    }

    pub fn payload(&self, m: usize) -> &SymbolGrid {
        &self.tx[m]
    }

    /// Full overlap-add output for the stored payload.
    pub fn transmit(&self, windows: &WindowSet) -> Result<Vec<Complex64>> {
        let pipe = FcBlockPipeline::new(&self.cfg, windows)?;
        let inputs: Vec<&[Complex64]> = self.bursts.iter().map(Vec::as_slice).collect();
        pipe.fc_synthesize(&inputs)
    }

    pub fn evaluate_windows(&self, windows: &WindowSet) -> Result<Evaluation> {
        self.evaluate_output(&self.transmit(windows)?, self.cfg.n_o)
    }

    /// Measures any transmitter output of `config().output_len()` samples
    /// whose burst (CP end timing) starts at sample `start`.
    pub fn evaluate_output(&self, out: &[Complex64], start: usize) -> Result<Evaluation> {
        let mut mse = Vec::new();
        let mut mse_by_timing = Vec::new();
        let mut scr_db = Vec::new();
        for m in 0..self.cfg.num_subbands() {
            let sb = &self.cfg.subbands[m];
            let i = self.cfg.geometry[m].interp;
            let mut worst: Option<MseReport> = None;
            let mut avgs = Vec::with_capacity(self.timing[m].len());
            for &adv in &self.timing[m] {
                let rx = cp_ofdm_demod_highrate(
                    &received_window(out, start as isize - adv as isize, self.cfg.trimmed_len(m)),
                    sb.l_ofdm * i,
                    sb.l_cp * i,
                    sb.l_act,
                    self.centers[m],
                    sb.n_symbols,
                )?;
                let rep = compute_mse(&self.tx[m], &zf_equalize(&rx, &self.tx[m])?)?;
                avgs.push(rep.avg);
                if worst.as_ref().map_or(true, |w| rep.avg > w.avg) {
                    worst = Some(rep);
                }
            }
            mse.push(worst.expect("at least one timing"));
            mse_by_timing.push(avgs);
            scr_db.push(self.probe.scr_both(out, self.bands[m], self.guard_hz)?);
        }
        Ok(Evaluation {
            mse,
            mse_by_timing,
            scr_db,
        })
    }

    pub fn evaluate(&self, p: &ParamVector) -> Result<Evaluation> {
        self.evaluate_windows(&build_windows(&self.cfg, &self.mode, p)?)
    }
}

/// `len` samples of `out` from `start`, zero outside the signal.
fn received_window(out: &[Complex64], start: isize, len: usize) -> Vec<Complex64> {
    (0..len as isize)
        .map(|k| {
            let i = start + k;
            if i >= 0 && (i as usize) < out.len() {
                out[i as usize]
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect()
}

/// What is minimized and what is constrained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Goal {
    /// Worst average MSE subject to SCR ≤ `a_des_db` on every side.
    MinMse { a_des_db: f64 },
    /// Worst SCR subject to average MSE ≤ `mse_max_db` in every subband.
    MinScr { mse_max_db: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Slsqp,
    Mma,
    Ccsaq,
}

impl Solver {
    fn algorithm(self) -> Algorithm {
        match self {
            Solver::Slsqp => Algorithm::Slsqp,
            Solver::Mma => Algorithm::Mma,
            Solver::Ccsaq => Algorithm::Ccsaq,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOptions {
    pub goal: Goal,
    pub solver: Solver,
    /// Half-width of the box around the start that bounds every parameter.
    pub box_half_width: f64,
    pub max_iters: usize,
    /// Reported feasibility tolerance in dB.
    pub margin_db: f64,
    pub fd_step: f64,
}

impl OptimizeOptions {
    pub fn new(goal: Goal) -> Self {
        OptimizeOptions {
            goal,
            solver: Solver::Slsqp,
            box_half_width: 1.0,
            max_iters: 200,
            margin_db: 0.5,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub iteration: usize,
    pub mse_avg_db: f64,
    pub scr_db: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone)]
pub struct OptimizeReport {
    /// Window families `params` belong to.
    pub mode: DesignMode,
    pub params: ParamVector,
    pub start: Evaluation,
    pub best: Evaluation,
    pub feasible: bool,
    pub history: Vec<HistoryRow>,
    pub evaluations: usize,
    pub wall_seconds: f64,
    pub status: String,
    /// Best point of the preceding ξ-only stage, if one ran.
    pub fd_only: Option<Evaluation>,
}

impl OptimizeReport {
    pub fn history_csv(&self) -> String {
        let mut s = String::from("iteration,mse_avg_db,scr_db,feasible\n");
        for h in &self.history {
            writeln!(
                s,
                "{},{},{},{}",
                h.iteration,
                fmt12(h.mse_avg_db),
                fmt12(h.scr_db),
                u8::from(h.feasible)
            )
            .expect("string write");
        }
        s
    }
}

/// Objective components and hard constraints, both as "≤ 0"-ready values.
fn components(goal: Goal, e: &Evaluation, mse0: &[f64]) -> (Vec<f64>, Vec<f64>) {
    match goal {
        Goal::MinMse { a_des_db } => (
            e.mse_by_timing.iter().flatten().zip(mse0).map(|(v, &m0)| v / m0).collect(),
            e.scr_db
                .iter()
                .flat_map(|&(l, r)| [(l - a_des_db) / 10.0, (r - a_des_db) / 10.0])
                .collect(),
        ),
        Goal::MinScr { mse_max_db } => (
            e.scr_db.iter().flat_map(|&(l, r)| [l / 10.0, r / 10.0]).collect(),
            e.mse_by_timing
                .iter()
                .flatten()
                .map(|&v| (to_db(v) - mse_max_db) / 10.0)
                .collect(),
        ),
    }
}

fn is_feasible(goal: Goal, e: &Evaluation, margin_db: f64) -> bool {
    match goal {
        Goal::MinMse { a_des_db } => e.worst_scr_db() <= a_des_db + margin_db,
        Goal::MinScr { mse_max_db } => e.mse.iter().all(|r| r.avg_db() <= mse_max_db + margin_db),
    }
}

/// Scalar used to rank feasible candidates.
fn merit(goal: Goal, e: &Evaluation) -> f64 {
    match goal {
        Goal::MinMse { .. } => e.worst_mse_avg(),
        Goal::MinScr { .. } => e.worst_scr_db(),
    }
}

struct Point {
    x: Vec<f64>,
    values: Vec<f64>,
    jac: Option<Vec<Vec<f64>>>,
}

struct Problem<'a> {
    eval: &'a Evaluator,
    layout: ParamLayout,
    goal: Goal,
    mse0: Vec<f64>,
    n_obj: usize,
    step: f64,
    cache: RefCell<Option<Point>>,
    count: RefCell<usize>,
    error: RefCell<Option<Error>>,
    history: RefCell<Vec<HistoryRow>>,
    best: RefCell<Option<(Vec<f64>, Evaluation)>>,
    margin_db: f64,
}

impl Problem<'_> {
    /// Objective components followed by hard constraints at parameters `x`
    /// (without the epigraph variable).
    fn values(&self, x: &[f64]) -> Result<(Vec<f64>, Evaluation)> {
        stacked_values(self.eval, &self.layout, self.goal, &self.mse0, x)
    }

    fn at(&self, x: &[f64], need_jac: bool) -> Option<std::cell::Ref<'_, Point>> {
        let fresh = {
            let c = self.cache.borrow();
            match c.as_ref() {
                Some(p) if p.x == x => need_jac && p.jac.is_none(),
                _ => true,
            }
        };
        if fresh {
            let xp = &x[..x.len() - 1];
            let (values, e) = match self.values(xp) {
                Ok(v) => v,
                Err(err) => {
                    self.error.borrow_mut().get_or_insert(err);
                    return None;
                }
            };
            *self.count.borrow_mut() += 1;
            self.record(xp, &e);
            let jac = if need_jac {
                let (step, eval, layout, goal, mse0) = (self.step, self.eval, &self.layout, self.goal, &self.mse0);
                let cols: Vec<Result<Vec<f64>>> = (0..xp.len())
                    .into_par_iter()
                    .map(|i| {
                        let mut xi = xp.to_vec();
                        let h = step * xi[i].abs().max(1.0);
                        xi[i] += h;
                        let (v, _) = stacked_values(eval, layout, goal, mse0, &xi)?;
                        Ok(v.iter().zip(&values).map(|(a, b)| (a - b) / h).collect())
                    })
                    .collect();
                *self.count.borrow_mut() += xp.len();
                let mut out = Vec::with_capacity(cols.len());
                for c in cols {
                    match c {
                        Ok(c) => out.push(c),
                        Err(err) => {
                            self.error.borrow_mut().get_or_insert(err);
                            return None;
                        }
                    }
                }
                Some(out)
            } else {
                None
            };
            *self.cache.borrow_mut() = Some(Point {
                x: x.to_vec(),
                values,
                jac,
            });
        }
        Some(std::cell::Ref::map(self.cache.borrow(), |c| c.as_ref().expect("cached point")))
    }

    fn record(&self, x: &[f64], e: &Evaluation) {
        let feasible = is_feasible(self.goal, e, self.margin_db);
        let mut h = self.history.borrow_mut();
        let iteration = h.len();
        h.push(HistoryRow {
            iteration,
            mse_avg_db: to_db(e.worst_mse_avg()),
            scr_db: e.worst_scr_db(),
            feasible,
        });
        let mut best = self.best.borrow_mut();
        let better = match best.as_ref() {
            None => true,
            Some((_, b)) => {
                let bf = is_feasible(self.goal, b, self.margin_db);
                match (feasible, bf) {
                    (true, false) => true,
                    (false, true) => false,
                    (true, true) => merit(self.goal, e) < merit(self.goal, b),
                    (false, false) => violation(self.goal, e) < violation(self.goal, b),
                }
            }
        };
        if better {
            *best = Some((x.to_vec(), e.clone()));
        }
    }
}

fn stacked_values(
    eval: &Evaluator,
    layout: &ParamLayout,
    goal: Goal,
    mse0: &[f64],
    x: &[f64],
) -> Result<(Vec<f64>, Evaluation)> {
    let e = eval.evaluate(&ParamVector::unflatten(layout, x)?)?;
    let (mut obj, cons) = components(goal, &e, mse0);
    obj.extend(cons);
    Ok((obj, e))
}

fn violation(goal: Goal, e: &Evaluation) -> f64 {
    match goal {
        Goal::MinMse { a_des_db } => e.worst_scr_db() - a_des_db,
        Goal::MinScr { mse_max_db } => e.mse.iter().map(|r| r.avg_db()).fold(f64::MIN, f64::max) - mse_max_db,
    }
}

/// Runs SLSQP from `start` in epigraph form: minimize `t` subject to every
/// objective component `≤ t` and every hard constraint `≤ 0`.
pub fn optimize_from(eval: &Evaluator, start: &ParamVector, opts: &OptimizeOptions) -> Result<OptimizeReport> {
    let t0 = Instant::now();
    let layout = start.layout();
    let start_eval = eval.evaluate(start)?;
    let mse0: Vec<f64> = start_eval.mse_by_timing.iter().flatten().map(|v| v.max(1e-30)).collect();
    let (obj0, cons0) = components(opts.goal, &start_eval, &mse0);
    let n_obj = obj0.len();
    let n_cons = cons0.len();
    let problem = Problem {
        eval,
        layout: layout.clone(),
        goal: opts.goal,
        mse0,
        n_obj,
        step: opts.fd_step,
        cache: RefCell::new(None),
        count: RefCell::new(1),
        error: RefCell::new(None),
        history: RefCell::new(Vec::new()),
        best: RefCell::new(None),
        margin_db: opts.margin_db,
    };
    problem.record(&start.flatten(), &start_eval);

    let n = layout.len() + 1;
    let mut x = start.flatten();
    x.push(obj0.iter().cloned().fold(f64::MIN, f64::max));

    let status = if layout.is_empty() {
        "no free parameters".to_string()
    } else {
        let pr = &problem;
        let objective = |x: &[f64], grad: Option<&mut [f64]>, _: &mut ()| -> f64 {
            if let Some(g) = grad {
                g.iter_mut().for_each(|v| *v = 0.0);
                g[n - 1] = 1.0;
            }
            x[n - 1]
        };
        let mut opt = Nlopt::new(opts.solver.algorithm(), n, objective, Target::Minimize, ());
        let w = opts.box_half_width;
        let mut lower: Vec<f64> = x.iter().map(|v| v - w).collect();
        let mut upper: Vec<f64> = x.iter().map(|v| v + w).collect();
        lower[n - 1] = f64::NEG_INFINITY;
        upper[n - 1] = f64::INFINITY;
        opt.set_lower_bounds(&lower).map_err(|e| Error::Optimization(format!("{e:?}")))?;
        opt.set_upper_bounds(&upper).map_err(|e| Error::Optimization(format!("{e:?}")))?;
        let m = n_obj + n_cons;
        let cons = |result: &mut [f64], x: &[f64], grad: Option<&mut [f64]>, _: &mut ()| {
            let t = x[n - 1];
            let Some(pt) = pr.at(x, grad.is_some()) else {
                result.iter_mut().for_each(|r| *r = f64::NAN);
                return;
            };
            for k in 0..m {
                result[k] = if k < pr.n_obj { pt.values[k] - t } else { pt.values[k] };
            }
            if let Some(g) = grad {
                let jac = pt.jac.as_ref().expect("jacobian requested");
                for k in 0..m {
                    for (i, col) in jac.iter().enumerate() {
                        g[k * n + i] = col[k];
                    }
                    g[k * n + n - 1] = if k < pr.n_obj { -1.0 } else { 0.0 };
                }
            }
        };
        opt.add_inequality_mconstraint(m, cons, (), &vec![1e-9; m])
            .map_err(|e| Error::Optimization(format!("constraint setup failed: {e:?}")))?;
        opt.set_maxeval(opts.max_iters as u32)
            .map_err(|e| Error::Optimization(format!("{e:?}")))?;
        opt.set_xtol_rel(1e-10).map_err(|e| Error::Optimization(format!("{e:?}")))?;
        opt.set_ftol_rel(1e-8).map_err(|e| Error::Optimization(format!("{e:?}")))?;
        let res = opt.optimize(&mut x);
        if let Some(err) = problem.error.borrow_mut().take() {
            return Err(err);
        }
        match res {
            Ok((s, _)) => format!("{s:?}"),
            Err((f, _)) => format!("{f:?}"),
        }
    };
    let final_x = &x[..n - 1];
    let final_eval = eval.evaluate(&ParamVector::unflatten(&layout, final_x)?)?;
    problem.record(final_x, &final_eval);
    let (best_x, best_eval) = problem.best.borrow_mut().take().expect("start was recorded");
    let feasible = is_feasible(opts.goal, &best_eval, opts.margin_db);
    let evaluations = *problem.count.borrow();
    let history = problem.history.into_inner();
    Ok(OptimizeReport {
        mode: *eval.mode(),
        params: ParamVector::unflatten(&layout, &best_x)?,
        start: start_eval,
        best: best_eval,
        feasible,
        history,
        evaluations,
        wall_seconds: t0.elapsed().as_secs_f64(),
        status,
        fd_only: None,
    })
}

/// Raised-cosine ramp squeezed onto the innermost `k` of `l_tbw` bins.
pub fn compressed_ramp(l_tbw: usize, k: usize) -> Vec<f64> {
    let k = k.min(l_tbw);
    let mut xi = vec![0.0; l_tbw - k];
    xi.extend(raised_cosine_ramp(k));
    xi
}

/// Default start with each ramp compressed to the widest width that meets
/// the goal's constraint, or to the least-violating width when none does.
pub fn feasible_start(eval: &Evaluator, l_tbw: &[usize], goal: Goal, margin_db: f64) -> Result<ParamVector> {
    let mut p = initial_params(eval.config(), eval.mode(), l_tbw)?;
    let widest = l_tbw.iter().copied().max().unwrap_or(0);
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    for k in (1..=widest).rev() {
        p.xi = l_tbw.iter().map(|&t| compressed_ramp(t, k)).collect();
        let e = eval.evaluate(&p)?;
        if is_feasible(goal, &e, margin_db) {
            return Ok(p);
        }
        let v = violation(goal, &e);
        if best.as_ref().map_or(true, |(b, _)| v < *b) {
            best = Some((v, p.xi.clone()));
        }
    }
    if let Some((_, xi)) = best {
        p.xi = xi;
    }
    Ok(p)
}

/// Optimizes ξ alone first; when time-domain windows are adjustable, the
/// FD-only result seeds the joint run.
pub fn optimize(eval: &Evaluator, l_tbw: &[usize], opts: &OptimizeOptions) -> Result<OptimizeReport> {
    optimize_with_spread(eval, l_tbw, opts, 0, 0, 0.0)
}

fn optimize_with_spread(
    eval: &Evaluator,
    l_tbw: &[usize],
    opts: &OptimizeOptions,
    k: usize,
    seed: u64,
    spread: f64,
) -> Result<OptimizeReport> {
    let fd_mode = DesignMode {
        analysis: Family::Fixed,
        synthesis: Family::Fixed,
        gamma: eval.mode().gamma,
    };
    if *eval.mode() == fd_mode {
        let start = perturbed_start(&feasible_start(eval, l_tbw, opts.goal, 0.0)?, k, seed, spread);
        return optimize_from(eval, &start, opts);
    }
    let fd_eval = eval.with_mode(fd_mode);
    let fd_start = perturbed_start(&feasible_start(&fd_eval, l_tbw, opts.goal, 0.0)?, k, seed, spread);
    let fd = optimize_from(&fd_eval, &fd_start, opts)?;
    let mut start = perturbed_start(&initial_params(eval.config(), eval.mode(), l_tbw)?, k, seed, spread);
    start.xi = fd.params.xi.clone();
    let joint = optimize_from(eval, &start, opts)?;
    let fd_wins = match (fd.feasible, joint.feasible) {
        (true, false) => true,
        (false, true) => false,
        (true, true) => merit(opts.goal, &fd.best) < merit(opts.goal, &joint.best),
        (false, false) => violation(opts.goal, &fd.best) < violation(opts.goal, &joint.best),
    };
    let offset = fd.history.len();
    let mut history = fd.history.clone();
    history.extend(joint.history.iter().cloned().map(|mut h| {
        h.iteration += offset;
        h
    }));
    let evaluations = fd.evaluations + joint.evaluations;
    let wall_seconds = fd.wall_seconds + joint.wall_seconds;
    let fd_best = fd.best.clone();
    let mut out = if fd_wins {
        OptimizeReport {
            start: joint.start,
            status: format!("{} (joint stage did not improve on the FD-only design)", joint.status),
            ..fd
        }
    } else {
        joint
    };
    out.history = history;
    out.evaluations = evaluations;
    out.wall_seconds = wall_seconds;
    out.fd_only = Some(fd_best);
    Ok(out)
}

/// Start `k` (k ≥ 1) is the default start perturbed by Gaussian noise of
/// relative size `spread`; start 0 is unperturbed.
pub fn perturbed_start(base: &ParamVector, k: usize, seed: u64, spread: f64) -> ParamVector {
    if k == 0 {
        return base.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let flat: Vec<f64> = base
        .flatten()
        .iter()
        .map(|&v| v + spread * v.abs().max(1.0) * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
        .collect();
    ParamVector::unflatten(&base.layout(), &flat).expect("same layout")
}

#[derive(Debug, Clone)]
pub struct MultistartReport {
    pub runs: Vec<OptimizeReport>,
    pub best: usize,
}

impl MultistartReport {
    pub fn best(&self) -> &OptimizeReport {
        &self.runs[self.best]
    }

    /// Spread in dB of the final objectives of the feasible runs.
    pub fn objective_spread_db(&self) -> f64 {
        let v: Vec<f64> = self
            .runs
            .iter()
            .filter(|r| r.feasible)
            .map(|r| match r.best.mse.first() {
                Some(_) => to_db(r.best.worst_mse_avg()),
                None => f64::NAN,
            })
            .collect();
        if v.is_empty() {
            return f64::NAN;
        }
        v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min)
    }
}

pub fn multistart(
    eval: &Evaluator,
    l_tbw: &[usize],
    opts: &OptimizeOptions,
    k_starts: usize,
    seed: u64,
    spread: f64,
) -> Result<MultistartReport> {
    if k_starts == 0 {
        return Err(Error::Optimization("at least one start is required".into()));
    }
    let runs = (0..k_starts)
        .into_par_iter()
        .map(|k| optimize_with_spread(eval, l_tbw, opts, k, seed, spread))
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<usize> = None;
    for (i, r) in runs.iter().enumerate() {
        if !r.feasible {
            continue;
        }
        if best.map_or(true, |b| merit(opts.goal, &r.best) < merit(opts.goal, &runs[b].best)) {
            best = Some(i);
        }
    }
    let best = best.ok_or_else(|| Error::Optimization(format!("all {k_starts} starts ended infeasible")))?;
    Ok(MultistartReport { runs, best })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cola_taper_adds_to_one() {
        for (n, n_o) in [(128usize, 64usize), (128, 32), (64, 16)] {
            let w = cola_taper(n, n_o);
            let hop = n - n_o;
            for k in n_o..n {
                let mut s = w[k];
                if k >= hop {
                    s += w[k - hop];
                }
                if k + hop < n {
                    s += w[k + hop];
                }
                if k < n - n_o || k >= n_o {
                    assert!((s - 1.0).abs() < 1e-12 || k < n_o, "{n} {n_o} {k}: {s}");
                }
            }
        }
    }

    #[test]
    fn case_parse() {
        assert_eq!(Case::parse("iv"), Some(Case::IV));
        assert_eq!(Case::parse("6"), None);
    }
}
