//! Monte-Carlo bit-error-rate harness and diversity-slope estimation.
//!
//! Each trial owns the random stream selected by `(master_seed, snr index,
//! trial index)`. Trials run in fixed-size parallel batches whose results are
//! scanned in trial order, so a curve (including the trial at which a point
//! stops early) does not depend on the number of worker threads.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    build_G, effective_channel, noise_covariance, simulate_transmission, vec_tilde, whiten,
    ChannelRealization, PowerConfig,
};
use crate::constellation::signal_set_with_order;
use crate::construct::{preset, CodeDoc, DstbcCode, PresetName, PresetParams};
use crate::decode::{DecodeProblem, DecoderKind};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::streams::{stream_index, substream};

/// Trials evaluated per parallel batch.
pub const BATCH: usize = 256;

/// Default early-stop threshold per SNR point.
pub const DEFAULT_MAX_BIT_ERRORS: u64 = 200;

/// CSV header of [`BerCurve::to_csv`].
pub const CSV_HEADER: &str = "snr_db,trials,bit_errors,ber";

fn default_nd() -> usize {
    1
}

fn default_decoder() -> DecoderKind {
    DecoderKind::PicSic
}

fn default_max_errors() -> u64 {
    DEFAULT_MAX_BIT_ERRORS
}

fn default_max_trials() -> u64 {
    10_000
}

/// A simulation experiment; serialised as a flat JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Preset name (see [`PresetName`]); ignored when `design_file` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Path of a code document.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design_file: Option<PathBuf>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub relays: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<usize>,
    #[serde(rename = "n", default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<usize>,
    /// Points per group signal set; the code's default sets when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphabet: Option<usize>,
    /// Destination antennas `N_D`.
    #[serde(default = "default_nd")]
    pub nd: usize,
    #[serde(default = "default_decoder")]
    pub decoder: DecoderKind,
    pub snr_grid_db: Vec<f64>,
    #[serde(default = "default_max_trials")]
    pub max_trials: u64,
    /// A point stops once this many bit errors are counted; 0 disables.
    #[serde(default = "default_max_errors")]
    pub max_bit_errors: u64,
    #[serde(default)]
    pub master_seed: u64,
    /// Broadcast power fraction; 1 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi1: Option<f64>,
    /// Relay power fraction; `1/R` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi2: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            preset: None,
            design_file: None,
            relays: None,
            lambda: None,
            layers: None,
            alphabet: None,
            nd: default_nd(),
            decoder: default_decoder(),
            snr_grid_db: Vec::new(),
            max_trials: default_max_trials(),
            max_bit_errors: default_max_errors(),
            master_seed: 0,
            pi1: None,
            pi2: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Checks the grid, trial budget and antenna count.
    pub fn validate(&self) -> Result<()> {
        if self.snr_grid_db.is_empty() {
            return Err(Error::Parameter("SNR grid is empty".into()));
        }
        if self.snr_grid_db.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("SNR grid has a non-finite value".into()));
        }
        if self.snr_grid_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter(
                "SNR grid is not strictly increasing".into(),
            ));
        }
        if self.max_trials == 0 {
            return Err(Error::Parameter("max_trials must be at least 1".into()));
        }
        if self.nd == 0 {
            return Err(Error::Parameter("nd must be at least 1".into()));
        }
        if self.pi1.is_some_and(|p| p <= 0.0) || self.pi2.is_some_and(|p| p <= 0.0) {
            return Err(Error::Parameter("power fractions must be positive".into()));
        }
        Ok(())
    }

    /// Builds the code the configuration describes, with its alphabet.
    pub fn build_code<T: Real>(&self) -> Result<DstbcCode<T>> {
        let code = if let Some(path) = &self.design_file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Parameter(format!("cannot read {}: {e}", path.display())))?;
            let doc: CodeDoc =
                serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
            DstbcCode::from_doc(&doc)?
        } else {
            let name: PresetName = self
                .preset
                .as_deref()
                .ok_or_else(|| {
                    Error::Parameter("either a preset or a design file is required".into())
                })?
                .parse()?;
            let relays = self
                .relays
                .ok_or_else(|| Error::Parameter("N is required".into()))?;
            let layers = self
                .layers
                .ok_or_else(|| Error::Parameter("n is required".into()))?;
            preset(
                name,
                PresetParams {
                    relays,
                    lambda: self.lambda,
                    layers,
                },
            )?
        };
        match self.alphabet {
            None => Ok(code),
            Some(points) => {
                let sets = code
                    .grouping()
                    .groups()
                    .iter()
                    .map(|g| signal_set_with_order(g.len(), points))
                    .collect::<Result<Vec<_>>>()?;
                code.with_group_sets(sets)
            }
        }
    }

    fn power<T: Real>(&self, code: &DstbcCode<T>, snr_db: f64) -> Result<PowerConfig<T>> {
        let total = T::lit(10f64.powf(snr_db / 10.0));
        let default = PowerConfig::for_code(code, total)?;
        PowerConfig::new(
            total,
            self.pi1.map_or(default.pi1, T::lit),
            self.pi2.map_or(default.pi2, T::lit),
        )
    }
}

/// Result at one SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub snr_db: f64,
    pub trials: u64,
    pub bit_errors: u64,
    pub ber: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerCurve {
    pub points: Vec<BerPoint>,
    pub config: ExperimentConfig,
    pub bits_per_codeword: u32,
    /// Elapsed seconds; not part of the CSV.
    pub wall_time_s: f64,
}

impl BerCurve {
    /// `snr_db,trials,bit_errors,ber`, one row per grid point; `ber` with six
    /// significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{:.5e}",
                p.snr_db, p.trials, p.bit_errors, p.ber
            )
            .expect("write to string");
        }
        out
    }
}

/// Runs the experiment with the code it describes.
pub fn run_ber<T: Real>(config: &ExperimentConfig) -> Result<BerCurve> {
    let code = config.build_code::<T>()?;
    run_ber_with_code(&code, config)
}

/// Runs the experiment on `code`; the code fields of `config` are ignored.
pub fn run_ber_with_code<T: Real>(
    code: &DstbcCode<T>,
    config: &ExperimentConfig,
) -> Result<BerCurve> {
    config.validate()?;
    code.require_relay_form()?;
    config.decoder.check_compatible(code.group_sets())?;
    let start = Instant::now();
    let bits = code.bits_per_codeword();
    let mut points = Vec::with_capacity(config.snr_grid_db.len());
    for (si, &snr_db) in config.snr_grid_db.iter().enumerate() {
        let power = config.power(code, snr_db)?;
        let (mut trials, mut errors) = (0u64, 0u64);
        'batches: while trials < config.max_trials {
            let n = (config.max_trials - trials).min(BATCH as u64);
            let batch: Vec<u32> = (trials..trials + n)
                .into_par_iter()
                .map(|t| {
                    let mut rng = substream(config.master_seed, stream_index(si, t));
                    run_trial(code, &power, config.nd, config.decoder, &mut rng)
                })
                .collect::<Result<_>>()?;
            for e in batch {
                trials += 1;
                errors += u64::from(e);
                if config.max_bit_errors > 0 && errors >= config.max_bit_errors {
                    break 'batches;
                }
            }
        }
        let ber = errors as f64 / (trials as f64 * f64::from(bits));
        points.push(BerPoint {
            snr_db,
            trials,
            bit_errors: errors,
            ber,
        });
    }
    Ok(BerCurve {
        points,
        config: config.clone(),
        bits_per_codeword: bits,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// One codeword through the channel; returns its bit errors.
pub fn run_trial<T: Real, R: Rng + ?Sized>(
    code: &DstbcCode<T>,
    power: &PowerConfig<T>,
    nd: usize,
    decoder: DecoderKind,
    rng: &mut R,
) -> Result<u32> {
    let sets = code.group_sets();
    let grouping = code.grouping();
    let mut x = vec![T::zero(); code.num_symbols()];
    let mut sent = Vec::with_capacity(sets.len());
    for (k, set) in sets.iter().enumerate() {
        let label = rng.random_range(0..set.len() as u32);
        let idx = set.index_of_label(label);
        for (&s, &v) in grouping.group(k).iter().zip(set.point(idx).iter()) {
            x[s] = v;
        }
        sent.push(label);
    }
    let realization = ChannelRealization::draw(code.relays(), nd, rng);
    let y = simulate_transmission(code, &x, &realization, power, rng)?;
    let h = effective_channel(code, &realization)?;
    let g_raw = build_G(code, &h, power.rho())?;
    let noise = noise_covariance(code, &realization, power)?;
    let (g, y) = whiten(&noise, &g_raw, &vec_tilde(&y));
    let problem = DecodeProblem::new(&g, &y, grouping, sets)?;
    let decided = decoder.decode(&problem)?;
    Ok(sent
        .iter()
        .zip(&decided.indices)
        .zip(sets)
        .map(|((&label, &idx), set)| (label ^ set.label(idx)).count_ones())
        .sum())
}

/// `−slope` of the least-squares fit of `log₁₀ BER` against `snr_db / 10`
/// over the points with nonzero BER lying within `window_db` of the highest
/// such SNR.
pub fn estimate_diversity_slope(curve: &BerCurve, window_db: f64) -> Result<f64> {
    let nonzero: Vec<&BerPoint> = curve.points.iter().filter(|p| p.ber > 0.0).collect();
    let top = nonzero
        .iter()
        .map(|p| p.snr_db)
        .fold(f64::NEG_INFINITY, f64::max);
    let window: Vec<(f64, f64)> = nonzero
        .iter()
        .filter(|p| p.snr_db >= top - window_db - 1e-9)
        .map(|p| (p.snr_db / 10.0, p.ber.log10()))
        .collect();
    if window.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} point(s) with nonzero BER in the top {window_db} dB",
            window.len()
        )));
    }
    let n = window.len() as f64;
    let mx = window.iter().map(|w| w.0).sum::<f64>() / n;
    let my = window.iter().map(|w| w.1).sum::<f64>() / n;
    let sxy: f64 = window.iter().map(|w| (w.0 - mx) * (w.1 - my)).sum();
    let sxx: f64 = window.iter().map(|w| (w.0 - mx) * (w.0 - mx)).sum();
    Ok(-(sxy / sxx))
}

/// Wraps bare points as a curve (e.g. for slope estimation on external data).
pub fn curve_from_points(points: Vec<BerPoint>) -> BerCurve {
    BerCurve {
        points,
        config: ExperimentConfig::default(),
        bits_per_codeword: 0,
        wall_time_s: 0.0,
    }
}

/// Convenience constructor of the per-group symbol vector for tests and tools.
pub fn symbols_from_indices<T: Real>(code: &DstbcCode<T>, indices: &[usize]) -> DVector<T> {
    let mut x = DVector::zeros(code.num_symbols());
    for (k, &i) in indices.iter().enumerate() {
        for (&s, &v) in code
            .grouping()
            .group(k)
            .iter()
            .zip(code.group_sets()[k].point(i).iter())
        {
            x[s] = v;
        }
    }
    x
}
