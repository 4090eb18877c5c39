//! Per-minute invocation traces: CSV ingestion, synthetic generation and
//! sliding-window slicing.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weaklabel::Archetype;

pub const DEFAULT_WINDOW_LEN: usize = 60;
pub const DEFAULT_STRIDE: usize = 10;
pub const DEFAULT_MIN_TOTAL_INVOCATIONS: u64 = 1000;

/// One row of the trace CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub function_id: String,
    pub minute_index: u64,
    pub invocations: i64,
}

/// Dense per-minute invocation counts for one function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkloadTrace {
    pub function_id: String,
    pub counts: Vec<u64>,
}

impl WorkloadTrace {
    pub fn new(function_id: impl Into<String>, counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::validation("a trace needs at least one minute"));
        }
        Ok(Self {
            function_id: function_id.into(),
            counts,
        })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }
}

/// A fixed-length analysis slice of a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub function_id: String,
    pub start_minute: usize,
    pub values: Vec<f64>,
}

/// Options controlling CSV ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    /// Functions whose total invocations fall below this are dropped.
    pub min_total_invocations: u64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            min_total_invocations: DEFAULT_MIN_TOTAL_INVOCATIONS,
        }
    }
}

/// Reads a `function_id,minute_index,invocations` CSV into dense traces.
///
/// Missing minutes are zero-filled, repeated minutes are summed, and
/// functions below the retention floor are dropped. Output is ordered by
/// `function_id`.
pub fn load_trace_csv(path: &Path, options: &LoadOptions) -> Result<Vec<WorkloadTrace>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_trace_csv(file, path, options)
}

pub(crate) fn read_trace_csv<R: std::io::Read>(
    reader: R,
    path: &Path,
    options: &LoadOptions,
) -> Result<Vec<WorkloadTrace>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut per_function: BTreeMap<String, BTreeMap<u64, u64>> = BTreeMap::new();
    for row in rdr.deserialize::<TraceRecord>() {
        let record = row.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        if record.invocations < 0 {
            return Err(Error::validation(format!(
                "negative invocation count {} for function {} at minute {}",
                record.invocations, record.function_id, record.minute_index
            )));
        }
        *per_function
            .entry(record.function_id)
            .or_default()
            .entry(record.minute_index)
            .or_insert(0) += record.invocations as u64;
    }

    let mut traces = Vec::with_capacity(per_function.len());
    for (function_id, minutes) in per_function {
        let total: u64 = minutes.values().sum();
        if total < options.min_total_invocations {
            continue;
        }
        let len = minutes.keys().next_back().map_or(0, |&m| m as usize + 1);
        let mut counts = vec![0u64; len];
        for (minute, count) in minutes {
            counts[minute as usize] = count;
        }
        traces.push(WorkloadTrace::new(function_id, counts)?);
    }
    Ok(traces)
}

/// Writes traces in the ingestion format (all minutes, zeros included).
pub fn write_trace_csv(path: &Path, traces: &[WorkloadTrace]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(out, "function_id,minute_index,invocations").map_err(|e| Error::io(path, e))?;
    for trace in traces {
        for (minute, count) in trace.counts.iter().enumerate() {
            writeln!(out, "{},{},{}", trace.function_id, minute, count)
                .map_err(|e| Error::io(path, e))?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Slices a trace into windows at offsets `0, stride, 2*stride, ...`.
pub fn slide_windows(trace: &WorkloadTrace, window_len: usize, stride: usize) -> Result<Vec<Window>> {
    validate_windowing(window_len, stride)?;
    if trace.len() < window_len {
        return Ok(Vec::new());
    }
    let count = (trace.len() - window_len) / stride + 1;
    Ok((0..count)
        .map(|i| {
            let start = i * stride;
            Window {
                function_id: trace.function_id.clone(),
                start_minute: start,
                values: trace.counts[start..start + window_len]
                    .iter()
                    .map(|&c| c as f64)
                    .collect(),
            }
        })
        .collect())
}

pub fn validate_windowing(window_len: usize, stride: usize) -> Result<()> {
    if window_len < 2 {
        return Err(Error::validation(format!(
            "window length must be at least 2, got {window_len}"
        )));
    }
    if stride == 0 || stride > window_len {
        return Err(Error::validation(format!(
            "stride must lie in [1, window_len={window_len}], got {stride}"
        )));
    }
    Ok(())
}

fn default_burst_interval() -> f64 {
    30.0
}

fn default_burst_duration() -> usize {
    1
}

/// Parameters of a synthetic archetype workload.
///
/// `amplitude` is relative to `base_rate`: SPIKE bursts reach
/// `amplitude * base_rate` and PERIODIC swings by `amplitude * base_rate`
/// around the base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub archetype: Archetype,
    pub duration_minutes: usize,
    /// Requests per minute.
    pub base_rate: f64,
    #[serde(default)]
    pub amplitude: f64,
    /// PERIODIC only.
    #[serde(default)]
    pub period_minutes: Option<f64>,
    /// RAMP only, requests/min per minute.
    #[serde(default)]
    pub slope: f64,
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub rng_seed: u64,
    /// SPIKE only: mean minutes between burst onsets.
    #[serde(default = "default_burst_interval")]
    pub burst_interval_minutes: f64,
    /// SPIKE only: length of each burst in minutes.
    #[serde(default = "default_burst_duration")]
    pub burst_duration_minutes: usize,
}

impl SyntheticSpec {
    pub fn new(archetype: Archetype, duration_minutes: usize, base_rate: f64) -> Self {
        Self {
            archetype,
            duration_minutes,
            base_rate,
            amplitude: 0.0,
            period_minutes: None,
            slope: 0.0,
            noise_std: 0.0,
            rng_seed: 0,
            burst_interval_minutes: default_burst_interval(),
            burst_duration_minutes: default_burst_duration(),
        }
    }

    pub fn validate(&self, window_len: usize) -> Result<()> {
        if self.duration_minutes < window_len {
            return Err(Error::validation(format!(
                "synthetic duration {} shorter than window length {window_len}",
                self.duration_minutes
            )));
        }
        if !(self.base_rate >= 0.0 && self.base_rate.is_finite()) {
            return Err(Error::validation("base_rate must be finite and >= 0"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::validation("noise_std must be finite and >= 0"));
        }
        if !self.amplitude.is_finite() || !self.slope.is_finite() {
            return Err(Error::validation("amplitude and slope must be finite"));
        }
        match self.archetype {
            Archetype::Periodic => match self.period_minutes {
                Some(p) if p > 0.0 && p.is_finite() => {}
                _ => {
                    return Err(Error::validation(
                        "PERIODIC spec needs a positive period_minutes",
                    ))
                }
            },
            Archetype::Spike => {
                if !(self.burst_interval_minutes >= 1.0) || self.burst_duration_minutes == 0 {
                    return Err(Error::validation(
                        "SPIKE spec needs burst_interval_minutes >= 1 and a non-zero burst duration",
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Generates a synthetic trace. Output is a pure function of the spec.
pub fn generate_synthetic(function_id: &str, spec: &SyntheticSpec) -> Result<WorkloadTrace> {
    spec.validate(2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let noise = Normal::new(0.0, spec.noise_std)
        .map_err(|e| Error::validation(format!("noise_std: {e}")))?;
    let n = spec.duration_minutes;
    let base = spec.base_rate;

    let mut signal: Vec<f64> = match spec.archetype {
        Archetype::Stationary => vec![base; n],
        Archetype::Ramp => (0..n).map(|t| base + spec.slope * t as f64).collect(),
        Archetype::Periodic => {
            let period = spec.period_minutes.unwrap_or(60.0);
            (0..n)
                .map(|t| {
                    let phase = 2.0 * std::f64::consts::PI * t as f64 / period;
                    base + spec.amplitude * base * phase.sin()
                })
                .collect()
        }
        Archetype::Spike => {
            let mut s = vec![base; n];
            let peak = spec.amplitude * base;
            for onset in burst_onsets(&mut rng, n, spec.burst_interval_minutes) {
                for v in s.iter_mut().skip(onset).take(spec.burst_duration_minutes) {
                    *v = peak;
                }
            }
            s
        }
    };

    if spec.noise_std > 0.0 {
        for v in signal.iter_mut() {
            *v += noise.sample(&mut rng);
        }
    }
    let counts = signal
        .into_iter()
        .map(|v| v.max(0.0).round() as u64)
        .collect();
    WorkloadTrace::new(function_id, counts)
}

/// Burst onsets form a Poisson process with a refractory gap: each gap is
/// `2/3 * interval` plus an exponential with mean `interval / 3`, capped at
/// `5/3 * interval`. The mean gap is therefore close to `interval`.
fn burst_onsets(rng: &mut ChaCha8Rng, n: usize, interval: f64) -> Vec<usize> {
    let floor = interval * 2.0 / 3.0;
    let cap = interval * 5.0 / 3.0;
    let exp = Exp::new(3.0 / interval).expect("positive rate");
    let mut onsets = Vec::new();
    let mut t = rng.random_range(0.0..interval);
    while (t as usize) < n {
        onsets.push(t as usize);
        let gap = (floor + exp.sample(rng)).min(cap);
        t += gap;
    }
    onsets
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, floor: u64) -> Result<Vec<WorkloadTrace>> {
        read_trace_csv(
            text.as_bytes(),
            Path::new("mem.csv"),
            &LoadOptions {
                min_total_invocations: floor,
            },
        )
    }

    #[test]
    fn zero_fills_gaps() {
        let traces = parse(
            "function_id,minute_index,invocations\nf,0,3\nf,2,4\nf,5,1\n",
            0,
        )
        .unwrap();
        assert_eq!(traces.len(), 1);
        assert_eq!(traces[0].counts, vec![3, 0, 4, 0, 0, 1]);
    }

    #[test]
    fn drops_functions_below_floor() {
        let text = "function_id,minute_index,invocations\na,0,999\nb,0,1000\n";
        let traces = parse(text, DEFAULT_MIN_TOTAL_INVOCATIONS).unwrap();
        assert_eq!(traces.len(), 1);
        assert_eq!(traces[0].function_id, "b");
    }

    #[test]
    fn empty_file_is_empty_list() {
        assert!(parse("function_id,minute_index,invocations\n", 0)
            .unwrap()
            .is_empty());
        assert!(parse("", 0).unwrap().is_empty());
    }

    #[test]
    fn malformed_row_reports_line() {
        let err = parse(
            "function_id,minute_index,invocations\nf,0,1\nf,x,2\n",
            0,
        )
        .unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_count_is_validation_error() {
        let err = parse("function_id,minute_index,invocations\nf,0,-1\n", 0).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn window_counts() {
        let t = |n| WorkloadTrace::new("f", vec![1; n]).unwrap();
        assert_eq!(slide_windows(&t(60), 60, 10).unwrap().len(), 1);
        assert_eq!(slide_windows(&t(14400), 60, 10).unwrap().len(), 1435);
        assert!(slide_windows(&t(59), 60, 10).unwrap().is_empty());
        assert!(slide_windows(&t(100), 60, 61).is_err());
        assert!(slide_windows(&t(100), 1, 1).is_err());
    }

    #[test]
    fn stationary_without_noise_is_constant() {
        let spec = SyntheticSpec::new(Archetype::Stationary, 120, 42.0);
        let trace = generate_synthetic("s", &spec).unwrap();
        assert!(trace.counts.iter().all(|&c| c == 42));
    }

    #[test]
    fn periodic_trace_has_strong_lag_period_autocorrelation() {
        let mut spec = SyntheticSpec::new(Archetype::Periodic, 1440, 100.0);
        spec.amplitude = 0.8;
        spec.period_minutes = Some(60.0);
        spec.noise_std = 10.0;
        spec.rng_seed = 3;
        let x = generate_synthetic("p", &spec).unwrap().as_f64();
        let r = pearson(&x[..x.len() - 60], &x[60..]);
        assert!(r > 0.6, "lag-60 autocorrelation {r}");
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let mut sab = 0.0;
        let mut saa = 0.0;
        let mut sbb = 0.0;
        for (x, y) in a.iter().zip(b) {
            sab += (x - ma) * (y - mb);
            saa += (x - ma) * (x - ma);
            sbb += (y - mb) * (y - mb);
        }
        sab / (saa * sbb).sqrt()
    }

    #[test]
    fn generator_is_deterministic() {
        for archetype in Archetype::ALL {
            let mut spec = SyntheticSpec::new(archetype, 600, 50.0);
            spec.amplitude = 40.0;
            spec.period_minutes = Some(30.0);
            spec.slope = 2.0;
            spec.noise_std = 3.0;
            spec.rng_seed = 11;
            let a = generate_synthetic("x", &spec).unwrap();
            let b = generate_synthetic("x", &spec).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn spike_bursts_are_present() {
        let mut spec = SyntheticSpec::new(Archetype::Spike, 1440, 20.0);
        spec.amplitude = 50.0;
        spec.rng_seed = 5;
        let trace = generate_synthetic("s", &spec).unwrap();
        let bursts = trace.counts.iter().filter(|&&c| c == 1000).count();
        // Gaps lie in [20, 50] minutes.
        assert!((28..=72).contains(&bursts), "bursts {bursts}");
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let traces = vec![
            WorkloadTrace::new("a", vec![0, 5, 0, 7]).unwrap(),
            WorkloadTrace::new("b", vec![3]).unwrap(),
        ];
        write_trace_csv(&path, &traces).unwrap();
        let loaded = load_trace_csv(&path, &LoadOptions { min_total_invocations: 0 }).unwrap();
        assert_eq!(loaded, traces);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn windows_cover_prefix(len in 2usize..400, window in 2usize..80, stride_frac in 0.0f64..1.0) {
                let stride = 1 + ((window - 1) as f64 * stride_frac) as usize;
                let trace = WorkloadTrace::new("f", vec![1; len]).unwrap();
                let windows = slide_windows(&trace, window, stride).unwrap();
                if len < window {
                    prop_assert!(windows.is_empty());
                } else {
                    prop_assert_eq!(windows.len(), (len - window) / stride + 1);
                    let end = windows.last().unwrap().start_minute + window;
                    let mut covered = vec![false; end];
                    for w in &windows {
                        prop_assert_eq!(w.values.len(), window);
                        prop_assert_eq!(w.start_minute % stride, 0);
                        for c in covered.iter_mut().skip(w.start_minute).take(window) {
                            *c = true;
                        }
                    }
                    prop_assert!(covered.iter().all(|&c| c));
                }
            }

            #[test]
            fn ingestion_conserves_invocations(rows in proptest::collection::vec((0u8..3, 0u64..50, 0i64..500), 0..60)) {
                let mut text = String::from("function_id,minute_index,invocations\n");
                let mut expected = [0u64; 3];
                for (f, m, c) in &rows {
                    text.push_str(&format!("f{f},{m},{c}\n"));
                    expected[*f as usize] += *c as u64;
                }
                let traces = read_trace_csv(text.as_bytes(), Path::new("p.csv"), &LoadOptions { min_total_invocations: 0 }).unwrap();
                for t in traces {
                    let idx: usize = t.function_id[1..].parse().unwrap();
                    prop_assert_eq!(t.total(), expected[idx]);
                }
            }
        }
    }
}
