//! Gait trace ingestion, event detection and cycle segmentation.

use std::collections::VecDeque;
use std::io::Read;

use serde::{Deserialize, Serialize};

/// Default sampling rate of kinematic recordings.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 100.0;

/// Contact runs shorter than this are treated as noise.
pub const DEFAULT_DEBOUNCE_S: f64 = 0.050;

/// Number of recent strides averaged by the phase estimator.
pub const DEFAULT_STRIDE_WINDOW: usize = 3;

/// Number of phase points per cycle in synergy exports.
pub const SYNERGY_POINTS: usize = 100;

/// Largest phase the estimator reports before a new heel strike arrives.
pub const PHASE_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

const JITTER_TOLERANCE: f64 = 0.01;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GaitError {
    #[error("csv parse error at row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("missing required column '{0}'")]
    MissingColumn(String),
    #[error("trace needs at least two samples")]
    TooShort,
    #[error("time must be strictly increasing (row {0})")]
    NonMonotonicTime(usize),
    #[error("sampling interval at row {row} deviates {deviation_pct:.2}% from the mean")]
    Jitter { row: usize, deviation_pct: f64 },
    #[error("unsupported input: {0}")]
    UnsupportedInput(String),
    #[error("phase estimator not ready: need at least 2 heel strikes, have {0}")]
    NotReady(usize),
    #[error("no gait cycles supplied")]
    NoCycles,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];
}

/// Per-side channels of a trace.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LegChannels {
    pub hip_deg: Vec<f64>,
    pub knee_deg: Vec<f64>,
    pub contact: Option<Vec<bool>>,
    pub torque_nm: Option<Vec<f64>>,
    pub omega_rads: Option<Vec<f64>>,
}

/// Uniformly sampled lower-limb recording.
#[derive(Debug, Clone, PartialEq)]
pub struct GaitTrace {
    pub sample_rate_hz: f64,
    pub time_s: Vec<f64>,
    pub left: LegChannels,
    pub right: LegChannels,
}

const REQUIRED: [&str; 5] = ["time_s", "hip_l_deg", "hip_r_deg", "knee_l_deg", "knee_r_deg"];

impl GaitTrace {
    /// Builds a trace and checks the time axis.
    pub fn new(time_s: Vec<f64>, left: LegChannels, right: LegChannels) -> Result<Self, GaitError> {
        let sample_rate_hz = check_time_axis(&time_s)?;
        Ok(Self {
            sample_rate_hz,
            time_s,
            left,
            right,
        })
    }

    /// Parses the `time_s,hip_l_deg,...` CSV layout. Contact, torque and
    /// angular velocity columns are optional.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, GaitError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| GaitError::Parse {
                row: 1,
                column: String::new(),
                message: e.to_string(),
            })?
            .clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        for name in REQUIRED {
            if col(name).is_none() {
                return Err(GaitError::MissingColumn(name.to_string()));
            }
        }
        let names = [
            "time_s",
            "hip_l_deg",
            "hip_r_deg",
            "knee_l_deg",
            "knee_r_deg",
            "contact_l",
            "contact_r",
            "tau_l_nm",
            "tau_r_nm",
            "omega_l_rads",
            "omega_r_rads",
        ];
        let idx: Vec<Option<usize>> = names.iter().map(|n| col(n)).collect();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); names.len()];

        for (i, record) in rdr.records().enumerate() {
            // header is row 1
            let row = i + 2;
            let record = record.map_err(|e| GaitError::Parse {
                row,
                column: String::new(),
                message: e.to_string(),
            })?;
            for (k, name) in names.iter().enumerate() {
                let Some(c) = idx[k] else { continue };
                let raw = record.get(c).unwrap_or("");
                let value = if name.starts_with("contact") {
                    match raw {
                        "0" | "false" => 0.0,
                        "1" | "true" => 1.0,
                        _ => {
                            return Err(GaitError::Parse {
                                row,
                                column: name.to_string(),
                                message: format!("expected 0 or 1, got '{raw}'"),
                            })
                        }
                    }
                } else {
                    raw.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| GaitError::Parse {
                            row,
                            column: name.to_string(),
                            message: format!("expected a finite number, got '{raw}'"),
                        })?
                };
                cols[k].push(value);
            }
        }

        let mut take = |k: usize| std::mem::take(&mut cols[k]);
        let time_s = take(0);
        let hip_l = take(1);
        let hip_r = take(2);
        let knee_l = take(3);
        let knee_r = take(4);
        let as_bool = |v: Vec<f64>| v.into_iter().map(|x| x > 0.5).collect::<Vec<_>>();
        let contact_l = idx[5].map(|_| as_bool(take(5)));
        let contact_r = idx[6].map(|_| as_bool(take(6)));
        let tau_l = idx[7].map(|_| take(7));
        let tau_r = idx[8].map(|_| take(8));
        let omega_l = idx[9].map(|_| take(9));
        let omega_r = idx[10].map(|_| take(10));

        GaitTrace::new(
            time_s,
            LegChannels {
                hip_deg: hip_l,
                knee_deg: knee_l,
                contact: contact_l,
                torque_nm: tau_l,
                omega_rads: omega_l,
            },
            LegChannels {
                hip_deg: hip_r,
                knee_deg: knee_r,
                contact: contact_r,
                torque_nm: tau_r,
                omega_rads: omega_r,
            },
        )
    }

    pub fn len(&self) -> usize {
        self.time_s.len()
    }

    /// Writes the layout read by [`GaitTrace::from_csv`]. Optional channels
    /// are written only when both legs have them.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> csv::Result<()> {
        let (l, r) = (&self.left, &self.right);
        let contact = l.contact.as_ref().zip(r.contact.as_ref());
        let torque = l.torque_nm.as_ref().zip(r.torque_nm.as_ref());
        let omega = l.omega_rads.as_ref().zip(r.omega_rads.as_ref());
        let mut header = vec!["time_s", "hip_l_deg", "hip_r_deg", "knee_l_deg", "knee_r_deg"];
        if contact.is_some() {
            header.extend(["contact_l", "contact_r"]);
        }
        if torque.is_some() {
            header.extend(["tau_l_nm", "tau_r_nm"]);
        }
        if omega.is_some() {
            header.extend(["omega_l_rads", "omega_r_rads"]);
        }
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![
                format!("{:.4}", self.time_s[i]),
                format!("{:.4}", l.hip_deg[i]),
                format!("{:.4}", r.hip_deg[i]),
                format!("{:.4}", l.knee_deg[i]),
                format!("{:.4}", r.knee_deg[i]),
            ];
            if let Some((cl, cr)) = contact {
                row.push(u8::from(cl[i]).to_string());
                row.push(u8::from(cr[i]).to_string());
            }
            for (a, b) in torque.into_iter().chain(omega) {
                row.push(format!("{:.6}", a[i]));
                row.push(format!("{:.6}", b[i]));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.time_s.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    pub fn leg(&self, side: Side) -> &LegChannels {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    /// Hip angular velocity in rad/s, from the recorded channel or by
    /// central differences of the hip angle.
    pub fn hip_velocity(&self, side: Side) -> Vec<f64> {
        let leg = self.leg(side);
        if let Some(omega) = &leg.omega_rads {
            return omega.clone();
        }
        finite_difference(&leg.hip_deg, &self.time_s)
            .into_iter()
            .map(f64::to_radians)
            .collect()
    }
}

fn check_time_axis(time_s: &[f64]) -> Result<f64, GaitError> {
    if time_s.len() < 2 {
        return Err(GaitError::TooShort);
    }
    for (i, w) in time_s.windows(2).enumerate() {
        if w[1] <= w[0] {
            return Err(GaitError::NonMonotonicTime(i + 3));
        }
    }
    let mean_dt = (time_s[time_s.len() - 1] - time_s[0]) / (time_s.len() - 1) as f64;
    for (i, w) in time_s.windows(2).enumerate() {
        let deviation = ((w[1] - w[0]) - mean_dt).abs() / mean_dt;
        if deviation > JITTER_TOLERANCE {
            return Err(GaitError::Jitter {
                row: i + 3,
                deviation_pct: deviation * 100.0,
            });
        }
    }
    Ok(1.0 / mean_dt)
}

fn finite_difference(values: &[f64], time_s: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                i if i == n - 1 => (n - 2, n - 1),
                i => (i - 1, i + 1),
            };
            (values[b] - values[a]) / (time_s[b] - time_s[a])
        })
        .collect()
}

/// Heel strike and the following toe off on the same side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaitEvent {
    pub heel_strike: usize,
    /// Absent when the recording ends before the foot leaves the ground.
    pub toe_off: Option<usize>,
}

/// Removes contact runs shorter than `min_run` samples by merging them into
/// their neighbours. Runs touching either end of the signal are kept.
pub fn debounce(contact: &[bool], min_run: usize) -> Vec<bool> {
    let mut out = contact.to_vec();
    if min_run <= 1 || out.len() < 3 {
        return out;
    }
    loop {
        let runs = run_lengths(&out);
        let shortest = runs
            .iter()
            .enumerate()
            .filter(|(i, r)| *i != 0 && *i != runs.len() - 1 && r.2 < min_run)
            .min_by_key(|(_, r)| r.2);
        let Some((_, &(start, value, len))) = shortest else {
            return out;
        };
        for v in &mut out[start..start + len] {
            *v = !value;
        }
    }
}

fn run_lengths(signal: &[bool]) -> Vec<(usize, bool, usize)> {
    let mut runs = Vec::new();
    let mut start = 0;
    for i in 1..=signal.len() {
        if i == signal.len() || signal[i] != signal[start] {
            runs.push((start, signal[start], i - start));
            start = i;
        }
    }
    runs
}

/// Heel strikes and toe offs from a contact channel.
pub fn detect_events(trace: &GaitTrace, side: Side) -> Result<Vec<GaitEvent>, GaitError> {
    detect_events_with(trace, side, DEFAULT_DEBOUNCE_S)
}

pub fn detect_events_with(
    trace: &GaitTrace,
    side: Side,
    debounce_s: f64,
) -> Result<Vec<GaitEvent>, GaitError> {
    let contact = trace.leg(side).contact.as_ref().ok_or_else(|| {
        GaitError::UnsupportedInput(format!(
            "no contact channel for the {side:?} side and no external events supplied"
        ))
    })?;
    let min_run = (debounce_s * trace.sample_rate_hz).round() as usize;
    Ok(events_from_contact(&debounce(contact, min_run)))
}

fn events_from_contact(contact: &[bool]) -> Vec<GaitEvent> {
    let mut events: Vec<GaitEvent> = Vec::new();
    for i in 1..contact.len() {
        match (contact[i - 1], contact[i]) {
            (false, true) => events.push(GaitEvent {
                heel_strike: i,
                toe_off: None,
            }),
            (true, false) => {
                if let Some(last) = events.last_mut() {
                    if last.toe_off.is_none() {
                        last.toe_off = Some(i);
                    }
                }
            }
            _ => {}
        }
    }
    events
}

/// One stride, heel strike to next ipsilateral heel strike (end exclusive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitCycle {
    pub side: Side,
    pub start: usize,
    pub end: usize,
    pub toe_off: Option<usize>,
    pub stance_s: f64,
    pub swing_s: f64,
    pub phase: Vec<f64>,
}

impl GaitCycle {
    pub fn duration_s(&self) -> f64 {
        self.stance_s + self.swing_s
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Splits the trace between consecutive heel strikes. Samples before the
/// first and after the last heel strike are not part of any cycle.
pub fn segment_cycles(trace: &GaitTrace, side: Side, events: &[GaitEvent]) -> Vec<GaitCycle> {
    let dt = trace.dt();
    events
        .windows(2)
        .filter(|w| w[1].heel_strike > w[0].heel_strike)
        .map(|w| {
            let (start, end) = (w[0].heel_strike, w[1].heel_strike);
            let toe_off = w[0].toe_off.filter(|&t| t > start && t < end);
            let stance_samples = toe_off.unwrap_or(end) - start;
            let len = end - start;
            GaitCycle {
                side,
                start,
                end,
                toe_off,
                stance_s: stance_samples as f64 * dt,
                swing_s: (len - stance_samples) as f64 * dt,
                phase: (0..len).map(|k| k as f64 / len as f64).collect(),
            }
        })
        .collect()
}

/// Detects events on every side with a contact channel and segments them.
pub fn segment_trace(trace: &GaitTrace) -> Result<Vec<GaitCycle>, GaitError> {
    let mut cycles = Vec::new();
    let mut any = false;
    for side in Side::BOTH {
        if trace.leg(side).contact.is_some() {
            any = true;
            let events = detect_events(trace, side)?;
            cycles.extend(segment_cycles(trace, side, &events));
        }
    }
    if !any {
        return Err(GaitError::UnsupportedInput(
            "trace has no contact channels and no external events".into(),
        ));
    }
    Ok(cycles)
}

/// Phase from the last heel strike and the mean of recent strides.
pub fn estimate_phase(heel_strikes_s: &[f64], now_s: f64) -> Result<f64, GaitError> {
    estimate_phase_with(heel_strikes_s, now_s, DEFAULT_STRIDE_WINDOW)
}

pub fn estimate_phase_with(
    heel_strikes_s: &[f64],
    now_s: f64,
    window: usize,
) -> Result<f64, GaitError> {
    let n = heel_strikes_s.len();
    if n < 2 {
        return Err(GaitError::NotReady(n));
    }
    let strides = &heel_strikes_s[n.saturating_sub(window + 1)..];
    let mean_stride = (strides[strides.len() - 1] - strides[0]) / (strides.len() - 1) as f64;
    let elapsed = now_s - heel_strikes_s[n - 1];
    Ok((elapsed / mean_stride).clamp(0.0, PHASE_MAX))
}

/// Online phase estimator. Emits `NotReady` until two heel strikes are seen.
#[derive(Debug, Clone)]
pub struct PhaseEstimator {
    window: usize,
    strikes: VecDeque<f64>,
}

impl Default for PhaseEstimator {
    fn default() -> Self {
        Self::new(DEFAULT_STRIDE_WINDOW)
    }
}

impl PhaseEstimator {
    pub fn new(window: usize) -> Self {
        let window = window.max(1);
        Self {
            window,
            strikes: VecDeque::with_capacity(window + 1),
        }
    }

    pub fn heel_strike(&mut self, t_s: f64) {
        if self.strikes.len() == self.window + 1 {
            self.strikes.pop_front();
        }
        self.strikes.push_back(t_s);
    }

    pub fn phase(&self, now_s: f64) -> Result<f64, GaitError> {
        let strikes: Vec<f64> = self.strikes.iter().copied().collect();
        estimate_phase_with(&strikes, now_s, self.window)
    }

    pub fn is_ready(&self) -> bool {
        self.strikes.len() >= 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StanceSwingSummary {
    pub ratios: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation; zero for a single cycle.
    pub std: f64,
    /// Cycles dropped for having no swing phase.
    pub excluded: usize,
}

pub fn stance_swing_ratio(cycles: &[GaitCycle]) -> Result<StanceSwingSummary, GaitError> {
    if cycles.is_empty() {
        return Err(GaitError::NoCycles);
    }
    let ratios: Vec<f64> = cycles
        .iter()
        .filter(|c| c.swing_s > 0.0)
        .map(|c| c.stance_s / c.swing_s)
        .collect();
    let excluded = cycles.len() - ratios.len();
    let (mean, std) = mean_and_sample_std(&ratios);
    Ok(StanceSwingSummary {
        ratios,
        mean,
        std,
        excluded,
    })
}

pub(crate) fn mean_and_sample_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynergyRow {
    pub cycle: usize,
    pub point: usize,
    pub phase: f64,
    pub hip_deg: f64,
    pub knee_deg: f64,
}

/// Hip-knee pairs per cycle, resampled to [`SYNERGY_POINTS`] phase points.
pub fn synergy_export(trace: &GaitTrace, cycles: &[GaitCycle]) -> Vec<SynergyRow> {
    let mut rows = Vec::with_capacity(cycles.len() * SYNERGY_POINTS);
    for (c, cycle) in cycles.iter().enumerate() {
        let leg = trace.leg(cycle.side);
        let last = trace.len() - 1;
        for point in 0..SYNERGY_POINTS {
            let phase = point as f64 / SYNERGY_POINTS as f64;
            let x = cycle.start as f64 + phase * (cycle.end - cycle.start) as f64;
            let i = (x.floor() as usize).min(last);
            let j = (i + 1).min(last);
            let frac = x - i as f64;
            let lerp = |v: &[f64]| v[i] * (1.0 - frac) + v[j] * frac;
            rows.push(SynergyRow {
                cycle: c,
                point,
                phase,
                hip_deg: lerp(&leg.hip_deg),
                knee_deg: lerp(&leg.knee_deg),
            });
        }
    }
    rows
}
