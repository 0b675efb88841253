//! Command-line front end.
//!
//! Every subcommand writes its result into the output directory together
//! with a `<command>.meta.json` sidecar holding the resolved configuration.
//! Settings resolve as built-in defaults, then `--config FILE` (JSON), then
//! flags. Exit codes: 0 success, 2 usage, 3 parse or validation, 4 I/O.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::correlate::eigen_track;
use crate::error::{Error, Result};
use crate::ingest::{self, fmt_value, write_series, MultiChannelRecord};
use crate::peaks::{detect_record, DetectorConfig, PeakTrain, Polarity};
use crate::pipeline::Pipeline;
use crate::preprocess::{FilterSpec, NotchBand, DEFAULT_BANDPASS_ORDER, DEFAULT_NOTCH_ORDER};
use crate::surrogate::{self, SurrogateConfig, PRNG_ID};
use crate::sync::{compound, multi_sync, multi_sync_pairwise, rank_groups, SyncSeries};
use crate::synth::{self, Emit, SynthOutput, SynthSpec};
use crate::weights::{build_weights, DensitySpec, WeightVector};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INVALID: i32 = 3;
pub const EXIT_IO: i32 = 4;

pub const THREADS_ENV: &str = "PEAKSYNC_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DensityFamily {
    #[default]
    Gaussian,
    Uniform,
}

/// Every tunable, as resolved from defaults, config file and flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub sample_rate_hz: f64,
    pub output_dir: PathBuf,
    /// Input already holds 0/1 peak trains.
    pub trains_input: bool,
    pub filter: bool,
    pub band: (f64, f64),
    pub notch: Option<(f64, f64)>,
    pub filter_order: usize,
    pub notch_order: usize,
    /// Defaults to one second of samples.
    pub window_len: Option<usize>,
    pub multiplier: f64,
    pub polarity: Polarity,
    pub a0: f64,
    pub tau: f64,
    pub density: DensityFamily,
    /// Gaussian sigma or uniform half-width.
    pub density_scale: f64,
    pub surrogates: usize,
    pub percentile: f64,
    pub seed: u64,
    pub surrogate_block: Option<usize>,
    /// Defaults to four seconds of samples.
    pub m: Option<usize>,
    /// Defaults to one second of samples.
    pub hop: Option<usize>,
    pub channels: Option<Vec<String>>,
    pub groups: Vec<Vec<String>>,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            sample_rate_hz: 256.0,
            output_dir: PathBuf::from("peaksync-out"),
            trains_input: false,
            filter: true,
            band: (25.0, 100.0),
            notch: Some((49.0, 51.0)),
            filter_order: DEFAULT_BANDPASS_ORDER,
            notch_order: DEFAULT_NOTCH_ORDER,
            window_len: None,
            multiplier: 2.0,
            polarity: Polarity::Positive,
            a0: 0.5,
            tau: 1e-3,
            density: DensityFamily::Gaussian,
            density_scale: 1.0,
            surrogates: 100,
            percentile: 95.0,
            seed: 0,
            surrogate_block: None,
            m: None,
            hop: None,
            channels: None,
            groups: Vec::new(),
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn filter_spec(&self) -> Option<FilterSpec> {
        self.filter.then(|| FilterSpec {
            low_hz: self.band.0,
            high_hz: self.band.1,
            notch: self
                .notch
                .map(|(low_hz, high_hz)| NotchBand { low_hz, high_hz }),
            order: self.filter_order,
            notch_order: self.notch_order,
        })
    }

    pub fn detector(&self) -> DetectorConfig {
        let mut d = DetectorConfig::for_sample_rate(self.sample_rate_hz);
        if let Some(w) = self.window_len {
            d.window_len = w;
        }
        d.multiplier = self.multiplier;
        d.polarity = self.polarity;
        d
    }

    pub fn density_spec(&self) -> DensitySpec {
        match self.density {
            DensityFamily::Gaussian => DensitySpec::Gaussian {
                sigma: self.density_scale,
            },
            DensityFamily::Uniform => DensitySpec::Uniform {
                half_width: self.density_scale,
            },
        }
    }

    pub fn weights(&self) -> Result<WeightVector> {
        build_weights(self.a0, self.tau, &self.density_spec())
    }

    pub fn surrogate(&self) -> SurrogateConfig {
        SurrogateConfig {
            count: self.surrogates,
            percentile: self.percentile,
            seed: self.seed,
            block: self.surrogate_block,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::validation("sample rate must be positive"));
        }
        if let Some(f) = self.filter_spec() {
            f.validate(self.sample_rate_hz)?;
        }
        self.detector().validate()?;
        self.surrogate().validate()?;
        Ok(())
    }

    fn seconds(&self, s: f64) -> usize {
        ((s * self.sample_rate_hz).round() as usize).max(1)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "peaksync",
    version,
    about = "Peak synchronization across signal channels"
)]
pub struct Cli {
    /// JSON configuration file (overridden by flags)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker thread cap (falls back to PEAKSYNC_THREADS)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// Input record (CSV, or PSYN binary)
    #[arg(long, short)]
    pub input: Option<PathBuf>,
    /// Sample rate in Hz
    #[arg(long)]
    pub fs: Option<f64>,
    /// Input columns are 0/1 peak trains; skip filtering and detection
    #[arg(long)]
    pub trains: bool,
    /// Band-pass edges, LO:HI in Hz
    #[arg(long, value_parser = parse_pair_f64)]
    pub band: Option<(f64, f64)>,
    /// Notch band, LO:HI in Hz
    #[arg(long, value_parser = parse_pair_f64)]
    pub notch: Option<(f64, f64)>,
    /// Disable the notch stage
    #[arg(long)]
    pub no_notch: bool,
    /// Skip all filtering
    #[arg(long)]
    pub no_filter: bool,
    /// Detection window in samples
    #[arg(long)]
    pub window: Option<usize>,
    /// Threshold multiplier on the window standard deviation
    #[arg(long)]
    pub mult: Option<f64>,
    #[arg(long, value_parser = parse_polarity)]
    pub polarity: Option<Polarity>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WeightArgs {
    /// Central coefficient
    #[arg(long)]
    pub a0: Option<f64>,
    /// Neglected tail mass
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, value_enum)]
    pub density: Option<DensityFamily>,
    /// Gaussian sigma or uniform half-width
    #[arg(long)]
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ChannelArgs {
    /// Comma-separated channel labels (default: all)
    #[arg(long, value_delimiter = ',')]
    pub channels: Option<Vec<String>>,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "name")]
pub enum Command {
    /// Detect peaks in every channel
    Peaks {
        #[command(flatten)]
        input: InputArgs,
        /// Write a 0/1 matrix instead of per-channel index lists
        #[arg(long)]
        as_train: bool,
    },
    /// Print the weight vector as `j,a_j`
    Weights {
        #[command(flatten)]
        weights: WeightArgs,
    },
    /// Synchronization series for a channel group
    Sync {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        weights: WeightArgs,
        #[command(flatten)]
        channels: ChannelArgs,
        /// Average explicit pairwise series instead of the single sweep
        #[arg(long)]
        pairwise: bool,
    },
    /// Compound (time-averaged) measure over an interval
    Compound {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        weights: WeightArgs,
        #[command(flatten)]
        channels: ChannelArgs,
        /// First sample of the interval (0-based)
        #[arg(long, default_value_t = 0)]
        t0: usize,
        /// Interval length (default: to the end)
        #[arg(long)]
        span: Option<usize>,
    },
    /// Surrogate significance threshold
    Significance {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        weights: WeightArgs,
        #[command(flatten)]
        channels: ChannelArgs,
        #[arg(long)]
        surrogates: Option<usize>,
        #[arg(long)]
        percentile: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Pool means over blocks of this many samples
        #[arg(long)]
        block: Option<usize>,
        /// Also write the pooled surrogate values
        #[arg(long)]
        write_pool: bool,
    },
    /// Sliding-window correlation eigenvalues
    Eigcorr {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        channels: ChannelArgs,
        /// Window length in samples
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        hop: Option<usize>,
    },
    /// Rank channel groups by compound measure
    Rank {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        weights: WeightArgs,
        /// Groups as "a,b,c;d,e,f"
        #[arg(long, value_parser = parse_groups)]
        groups: Option<GroupList>,
        #[arg(long)]
        t0: Option<usize>,
        #[arg(long)]
        span: Option<usize>,
    },
    /// Generate a synthetic coupled fixture
    Simulate {
        #[arg(long, default_value_t = 3)]
        r: usize,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 0.01)]
        rate: f64,
        #[arg(long, default_value_t = 0.0)]
        coupling: f64,
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
        /// Coupled stretch START:END (0-based, end exclusive)
        #[arg(long, value_parser = parse_pair_usize)]
        segment: Option<(usize, usize)>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_parser = ["raw", "trains"], default_value = "raw")]
        emit: String,
        #[arg(long)]
        fs: Option<f64>,
        /// Write the PSYN binary format instead of CSV
        #[arg(long)]
        binary: bool,
    },
    /// Compound measure over a grid of central coefficients
    #[command(name = "sweep-a0")]
    SweepA0 {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        channels: ChannelArgs,
        /// Grid START:STEP:END
        #[arg(long, default_value = "0.1:0.05:0.9")]
        grid: String,
        /// Intervals "A:B,C:D" (0-based, end exclusive; default: whole record)
        #[arg(long, value_delimiter = ',', value_parser = parse_pair_usize)]
        intervals: Option<Vec<(usize, usize)>>,
        #[arg(long)]
        tau: Option<f64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Peaks { .. } => "peaks",
            Command::Weights { .. } => "weights",
            Command::Sync { .. } => "sync",
            Command::Compound { .. } => "compound",
            Command::Significance { .. } => "significance",
            Command::Eigcorr { .. } => "eigcorr",
            Command::Rank { .. } => "rank",
            Command::Simulate { .. } => "simulate",
            Command::SweepA0 { .. } => "sweep-a0",
        }
    }
}

fn parse_pair<T: std::str::FromStr>(s: &str) -> std::result::Result<(T, T), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected LO:HI, got `{s}`"))?;
    let p = |v: &str| {
        v.trim()
            .parse::<T>()
            .map_err(|_| format!("bad number `{v}`"))
    };
    Ok((p(a)?, p(b)?))
}

fn parse_pair_f64(s: &str) -> std::result::Result<(f64, f64), String> {
    parse_pair(s)
}

fn parse_pair_usize(s: &str) -> std::result::Result<(usize, usize), String> {
    parse_pair(s)
}

fn parse_polarity(s: &str) -> std::result::Result<Polarity, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Channel groups as given by `--groups "a,b;c,d"`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct GroupList(pub Vec<Vec<String>>);

fn parse_groups(s: &str) -> std::result::Result<GroupList, String> {
    let groups: Vec<Vec<String>> = s
        .split(';')
        .filter(|g| !g.trim().is_empty())
        .map(|g| g.split(',').map(|l| l.trim().to_owned()).collect())
        .collect();
    if groups.is_empty() {
        return Err("no groups given".into());
    }
    Ok(GroupList(groups))
}

/// Expands `START:STEP:END` inclusively, rounding to 12 decimals to absorb
/// accumulation error.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::validation(format!("bad grid `{s}`")))?;
    let [start, step, end] = parts[..] else {
        return Err(Error::validation(format!(
            "grid must be START:STEP:END, got `{s}`"
        )));
    };
    if !(step.is_finite() && step > 0.0) || end < start {
        return Err(Error::validation(format!("empty or unbounded grid `{s}`")));
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

impl InputArgs {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(p) = &self.input {
            c.input = Some(p.clone());
        }
        if let Some(fs) = self.fs {
            c.sample_rate_hz = fs;
        }
        if self.trains {
            c.trains_input = true;
        }
        if let Some(b) = self.band {
            c.band = b;
        }
        if let Some(n) = self.notch {
            c.notch = Some(n);
        }
        if self.no_notch {
            c.notch = None;
        }
        if self.no_filter {
            c.filter = false;
        }
        if let Some(w) = self.window {
            c.window_len = Some(w);
        }
        if let Some(m) = self.mult {
            c.multiplier = m;
        }
        if let Some(p) = self.polarity {
            c.polarity = p;
        }
    }
}

impl WeightArgs {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(v) = self.a0 {
            c.a0 = v;
        }
        if let Some(v) = self.tau {
            c.tau = v;
        }
        if let Some(v) = self.density {
            c.density = v;
        }
        if let Some(v) = self.scale {
            c.density_scale = v;
        }
    }
}

impl ChannelArgs {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(ch) = &self.channels {
            c.channels = Some(ch.clone());
        }
    }
}

/// Defaults, then the JSON file, then flags.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut c = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::parse(Some(e.line()), format!("config: {e}")))?
        }
        None => RunConfig::default(),
    };
    if let Some(o) = &cli.out {
        c.output_dir = o.clone();
    }
    if let Some(t) = cli.threads {
        c.threads = Some(t);
    } else if c.threads.is_none() {
        if let Ok(v) = std::env::var(THREADS_ENV) {
            c.threads =
                Some(v.parse().map_err(|_| {
                    Error::validation(format!("{THREADS_ENV}=`{v}` is not a count"))
                })?);
        }
    }
    match &cli.command {
        Command::Peaks { input, .. } => input.apply(&mut c),
        Command::Weights { weights } => weights.apply(&mut c),
        Command::Sync {
            input,
            weights,
            channels,
            ..
        }
        | Command::Compound {
            input,
            weights,
            channels,
            ..
        } => {
            input.apply(&mut c);
            weights.apply(&mut c);
            channels.apply(&mut c);
        }
        Command::Significance {
            input,
            weights,
            channels,
            surrogates,
            percentile,
            seed,
            block,
            ..
        } => {
            input.apply(&mut c);
            weights.apply(&mut c);
            channels.apply(&mut c);
            if let Some(v) = surrogates {
                c.surrogates = *v;
            }
            if let Some(v) = percentile {
                c.percentile = *v;
            }
            if let Some(v) = seed {
                c.seed = *v;
            }
            if let Some(v) = block {
                c.surrogate_block = Some(*v);
            }
        }
        Command::Eigcorr {
            input,
            channels,
            m,
            hop,
        } => {
            input.apply(&mut c);
            channels.apply(&mut c);
            if let Some(v) = m {
                c.m = Some(*v);
            }
            if let Some(v) = hop {
                c.hop = Some(*v);
            }
        }
        Command::Rank {
            input,
            weights,
            groups,
            ..
        } => {
            input.apply(&mut c);
            weights.apply(&mut c);
            if let Some(g) = groups {
                c.groups = g.0.clone();
            }
        }
        Command::Simulate { seed, fs, .. } => {
            c.seed = *seed;
            if let Some(fs) = fs {
                c.sample_rate_hz = *fs;
            }
        }
        Command::SweepA0 {
            input,
            channels,
            tau,
            ..
        } => {
            input.apply(&mut c);
            channels.apply(&mut c);
            if let Some(t) = tau {
                c.tau = *t;
            }
        }
    }
    c.validate()?;
    Ok(c)
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a Command,
    config: &'a RunConfig,
    seed: u64,
    prng: &'static str,
    outputs: Vec<String>,
}

struct Outputs<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl<'a> Outputs<'a> {
    fn new(dir: &'a Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir,
            written: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_owned());
        self.dir.join(name)
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, body).map_err(|e| Error::io(&p, e))
    }
}

fn load_record(c: &RunConfig) -> Result<MultiChannelRecord> {
    let path = c
        .input
        .as_ref()
        .ok_or_else(|| Error::validation("no input file given (--input)"))?;
    ingest::read_record(path, c.sample_rate_hz)
}

fn trains_from_record(rec: &MultiChannelRecord) -> Result<Vec<PeakTrain>> {
    rec.labels()
        .iter()
        .zip(rec.channels())
        .map(|(label, row)| {
            let v = row
                .iter()
                .map(|&x| match x {
                    0.0 => Ok(0u8),
                    1.0 => Ok(1u8),
                    _ => Err(Error::validation(format!(
                        "train `{label}` holds {x}; expected 0 or 1"
                    ))),
                })
                .collect::<Result<Vec<_>>>()?;
            PeakTrain::new(label.clone(), v)
        })
        .collect()
}

fn resolve_trains(c: &RunConfig) -> Result<Vec<PeakTrain>> {
    let rec = load_record(c)?;
    if c.trains_input {
        return trains_from_record(&rec);
    }
    let filtered = match c.filter_spec() {
        Some(spec) => crate::preprocess::apply(&rec, &spec)?,
        None => rec,
    };
    detect_record(&filtered, &c.detector())
}

fn pick(trains: &[PeakTrain], labels: Option<&[String]>) -> Result<Vec<PeakTrain>> {
    match labels {
        None => Ok(trains.to_vec()),
        Some(labels) => labels
            .iter()
            .map(|l| {
                trains
                    .iter()
                    .find(|t| t.label() == l)
                    .cloned()
                    .ok_or_else(|| Error::validation(format!("unknown channel label `{l}`")))
            })
            .collect(),
    }
}

fn group_series(c: &RunConfig, pairwise: bool) -> Result<SyncSeries> {
    let trains = pick(&resolve_trains(c)?, c.channels.as_deref())?;
    let w = c.weights()?;
    if pairwise {
        multi_sync_pairwise(&trains, &w)
    } else {
        multi_sync(&trains, &w)
    }
}

fn group_labels(c: &RunConfig, rec: &MultiChannelRecord) -> Vec<String> {
    c.channels.clone().unwrap_or_else(|| rec.labels().to_vec())
}

fn train_matrix_csv(trains: &[PeakTrain]) -> String {
    let mut s = trains
        .iter()
        .map(|t| t.label())
        .collect::<Vec<_>>()
        .join(",");
    s.push('\n');
    if let Some(first) = trains.first() {
        for i in 0..first.len() {
            let row: Vec<&str> = trains
                .iter()
                .map(|t| if t.indicators()[i] == 1 { "1" } else { "0" })
                .collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
    }
    s
}

fn execute(cli: &Cli, c: &RunConfig, stdout: &mut dyn Write) -> Result<Vec<String>> {
    let mut out = Outputs::new(&c.output_dir)?;
    let say = |stdout: &mut dyn Write, s: &str| -> Result<()> {
        stdout
            .write_all(s.as_bytes())
            .map_err(|e| Error::io("<stdout>", e))
    };

    match &cli.command {
        Command::Peaks { as_train, .. } => {
            let trains = resolve_trains(c)?;
            if *as_train {
                out.text("peaks_train.csv", &train_matrix_csv(&trains))?;
            } else {
                for t in &trains {
                    let mut body = String::from("index\n");
                    for i in t.peak_indices() {
                        body.push_str(&format!("{i}\n"));
                    }
                    out.text(&format!("peaks_{}.csv", t.label()), &body)?;
                }
            }
        }
        Command::Weights { .. } => {
            let w = c.weights()?;
            let mut body = String::from("j,a_j\n");
            let n = w.n() as isize;
            for j in -n..=n {
                body.push_str(&format!("{j},{}\n", fmt_value(w.get(j))));
            }
            out.text("weights.csv", &body)?;
            say(stdout, &body)?;
        }
        Command::Sync { pairwise, .. } => {
            let s = group_series(c, *pairwise)?;
            let t: Vec<usize> = (0..s.len()).collect();
            write_series(out.path("sync.csv"), &t, s.values())?;
        }
        Command::Compound { t0, span, .. } => {
            let s = group_series(c, false)?;
            let span = span.unwrap_or_else(|| s.len().saturating_sub(*t0));
            let phi = compound(&s, *t0, span)?;
            let body = serde_json::json!({
                "members": s.members(),
                "t0": t0,
                "span": span,
                "phi_bar": phi,
            });
            out.text("compound.json", &format!("{body:#}\n"))?;
            say(stdout, &format!("{}\n", fmt_value(phi)))?;
        }
        Command::Significance { write_pool, .. } => {
            let rec = load_record(c)?;
            let group = group_labels(c, &rec);
            let sub = rec.select(&group)?;
            let pipeline = Pipeline {
                filter: c.filter_spec(),
                detector: c.detector(),
                weights: c.weights()?,
            };
            let cfg = c.surrogate();
            let pool = surrogate::pooled_values(&sub, &cfg, |r| {
                Ok(pipeline.run(r)?.valid_values().to_vec())
            })?;
            let threshold = surrogate::nearest_rank(&pool, cfg.percentile)?;
            if *write_pool {
                let t: Vec<usize> = (0..pool.len()).collect();
                write_series(out.path("surrogate_pool.csv"), &t, &pool)?;
            }
            let body = serde_json::json!({
                "members": group,
                "threshold": threshold,
                "surrogates": cfg.count,
                "percentile": cfg.percentile,
                "seed": cfg.seed,
                "block": cfg.block,
                "prng": PRNG_ID,
            });
            out.text("significance.json", &format!("{body:#}\n"))?;
            say(stdout, &format!("{}\n", fmt_value(threshold)))?;
        }
        Command::Eigcorr { .. } => {
            let rec = load_record(c)?;
            let filtered = match c.filter_spec() {
                Some(spec) => crate::preprocess::apply(&rec, &spec)?,
                None => rec,
            };
            let group = group_labels(c, &filtered);
            let m = c.m.unwrap_or_else(|| c.seconds(4.0));
            let hop = c.hop.unwrap_or_else(|| c.seconds(1.0));
            let track = eigen_track(&filtered, &group, m, hop)?;
            let mut body = String::from("center");
            for i in 1..=group.len() {
                body.push_str(&format!(",l{i}"));
            }
            body.push('\n');
            for (center, eig) in track.window_centers.iter().zip(&track.eigenvalues) {
                body.push_str(&center.to_string());
                for l in eig {
                    body.push(',');
                    body.push_str(&fmt_value(*l));
                }
                body.push('\n');
            }
            out.text("eigcorr.csv", &body)?;
        }
        Command::Rank { t0, span, .. } => {
            if c.groups.is_empty() {
                return Err(Error::validation("no groups given (--groups)"));
            }
            let trains = resolve_trains(c)?;
            let interval = match (t0, span) {
                (None, None) => None,
                (t0, span) => {
                    let t0 = t0.unwrap_or(0);
                    Some((
                        t0,
                        span.unwrap_or_else(|| trains[0].len().saturating_sub(t0)),
                    ))
                }
            };
            let ranked = rank_groups(&trains, &c.groups, &c.weights()?, interval)?;
            let rows: Vec<_> = ranked
                .iter()
                .map(|g| serde_json::json!({ "members": g.members, "phi_bar": g.phi_bar }))
                .collect();
            let body = format!("{:#}\n", serde_json::Value::Array(rows));
            out.text("rank.json", &body)?;
            say(stdout, &body)?;
        }
        Command::Simulate {
            r,
            n,
            rate,
            coupling,
            jitter,
            segment,
            seed,
            emit,
            binary,
            ..
        } => {
            let spec = SynthSpec {
                r: *r,
                n: *n,
                base_rate: *rate,
                coupling: *coupling,
                jitter_std: *jitter,
                segment: *segment,
                seed: *seed,
                emit: if emit == "trains" {
                    Emit::Trains
                } else {
                    Emit::Raw {
                        sample_rate_hz: c.sample_rate_hz,
                    }
                },
            };
            let record = match synth::generate(&spec)? {
                SynthOutput::Raw(rec) => rec,
                SynthOutput::Trains(trains) => {
                    let rows = trains
                        .iter()
                        .map(|t| t.indicators().iter().map(|&v| f64::from(v)).collect())
                        .collect();
                    let labels = trains.iter().map(|t| t.label().to_owned()).collect();
                    MultiChannelRecord::new(labels, rows, c.sample_rate_hz)?
                }
            };
            if *binary {
                ingest::write_binary(out.path("simulate.bin"), &record)?;
            } else {
                ingest::write_record(out.path("simulate.csv"), &record)?;
            }
        }
        Command::SweepA0 {
            grid, intervals, ..
        } => {
            let grid = parse_grid(grid)?;
            let trains = pick(&resolve_trains(c)?, c.channels.as_deref())?;
            let len = trains.first().map_or(0, PeakTrain::len);
            let intervals = intervals.clone().unwrap_or_else(|| vec![(0, len)]);
            let table = sweep_a0(&trains, &grid, c.tau, &c.density_spec(), &intervals)?;
            let mut body = String::from("a0");
            for (a, b) in &intervals {
                body.push_str(&format!(",{a}:{b}"));
            }
            body.push('\n');
            for (a0, row) in grid.iter().zip(&table) {
                body.push_str(&fmt_value(*a0));
                for v in row {
                    body.push(',');
                    body.push_str(&fmt_value(*v));
                }
                body.push('\n');
            }
            out.text("sweep_a0.csv", &body)?;
        }
    }
    Ok(out.written)
}

/// Compound measure for each central coefficient (rows) and interval
/// (columns, half-open `start..end`).
pub fn sweep_a0(
    trains: &[PeakTrain],
    grid: &[f64],
    tau: f64,
    density: &DensitySpec,
    intervals: &[(usize, usize)],
) -> Result<Vec<Vec<f64>>> {
    use rayon::prelude::*;
    grid.par_iter()
        .map(|&a0| {
            let w = build_weights(a0, tau, density)?;
            let s = multi_sync(trains, &w)?;
            intervals
                .iter()
                .map(|&(a, b)| {
                    if b <= a {
                        return Err(Error::validation(format!("empty interval {a}:{b}")));
                    }
                    compound(&s, a, b - a)
                })
                .collect()
        })
        .collect()
}

/// Runs a parsed command line, writing small results to `stdout`.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    let c = resolve_config(cli)?;
    let mut printed = Vec::new();
    let mut body = || -> Result<()> {
        let written = execute(cli, &c, &mut printed)?;
        let meta = Metadata {
            tool: "peaksync",
            version: crate::VERSION,
            command: &cli.command,
            config: &c,
            seed: c.seed,
            prng: PRNG_ID,
            outputs: written,
        };
        let name = format!("{}.meta.json", cli.command.name());
        let path = c.output_dir.join(name);
        let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    };
    match c.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| Error::validation(e.to_string()))?
            .install(body)?,
        None => body()?,
    }
    stdout
        .write_all(&printed)
        .map_err(|e| Error::io("<stdout>", e))
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse { .. } | Error::Validation(_) => EXIT_INVALID,
        Error::Io { .. } => EXIT_IO,
    }
}

/// Parses `args`, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(stderr, "{e}")
            } else {
                write!(stdout, "{e}")
            };
            return code;
        }
    };
    match run(&cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "peaksync: {e}");
            exit_code(&e)
        }
    }
}
