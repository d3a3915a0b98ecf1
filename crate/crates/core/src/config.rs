//! Run configuration: a flat TOML key/value file.
//!
//! Every key is optional; missing keys take the defaults below. Unknown
//! keys are rejected so typos do not silently fall back to defaults.
//!
//! ```toml
//! trips = "data/trips.csv"
//! hops = "data/hops.csv"
//! poi = "data/poi.csv"
//! use_graphs = true
//! r = 45
//! out_dir = "out/run1"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{TimeFormat, TripSchema};
use crate::dpmm::Hyperparams;
use crate::eval::EvalOptions;

/// Vocabulary the internal metrics are computed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MetricSpace {
    /// Raw station vocabulary.
    Original,
    /// Community-remapped vocabulary, i.e. the space the sampler saw.
    /// Same as `original` when graphs are off.
    #[default]
    Remapped,
}

impl MetricSpace {
    pub fn name(self) -> &'static str {
        match self {
            MetricSpace::Original => "original",
            MetricSpace::Remapped => "remapped",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Trip file. Raw `passenger,origin,destination,time` rows unless
    /// `vocab` is set, in which case it is an indexed trips file as
    /// written by `ingest` or `synth`.
    pub trips: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    /// Station × station hop-distance matrix.
    pub hops: Option<PathBuf>,
    /// Station × category POI count matrix.
    pub poi: Option<PathBuf>,
    /// `passenger_id,true_cluster` file; adds NMI and ARI to the report.
    pub labels: Option<PathBuf>,
    pub out_dir: PathBuf,

    pub passenger_col: String,
    pub origin_col: String,
    pub destination_col: String,
    pub time_col: String,
    pub delimiter: char,
    pub time_format: TimeFormat,
    pub slot_hours: u32,
    pub min_trips: usize,

    pub use_graphs: bool,
    pub h: u32,
    pub gamma: f64,

    pub alpha: f64,
    pub beta_o: f64,
    pub beta_d: f64,
    pub beta_t: f64,
    pub r: usize,
    pub max_iter: usize,
    pub k0: usize,
    /// Root seed; every stage derives its own seed from it.
    pub seed: u64,
    pub crp_prior: bool,
    pub disband_every_sweep: bool,

    pub normalize_docs: bool,
    pub weighted_ch: bool,
    pub metric_space: MetricSpace,
    /// Words per dimension in the cluster summary.
    pub top_words: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let schema = TripSchema::default();
        let model = Hyperparams::default();
        RunConfig {
            trips: None,
            vocab: None,
            hops: None,
            poi: None,
            labels: None,
            out_dir: PathBuf::from("out"),
            passenger_col: schema.passenger_col,
            origin_col: schema.origin_col,
            destination_col: schema.destination_col,
            time_col: schema.time_col,
            delimiter: schema.delimiter as char,
            time_format: schema.time_format,
            slot_hours: schema.slot_hours,
            min_trips: schema.min_trips,
            use_graphs: false,
            h: 4,
            gamma: 0.7,
            alpha: model.alpha,
            beta_o: model.beta[0],
            beta_d: model.beta[1],
            beta_t: model.beta[2],
            r: model.r,
            max_iter: model.max_iter,
            k0: model.k0,
            seed: model.seed,
            crp_prior: model.crp_prior,
            disband_every_sweep: model.disband_every_sweep,
            normalize_docs: false,
            weighted_ch: false,
            metric_space: MetricSpace::Remapped,
            top_words: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Sampler,
    ProximityCommunities,
    FunctionalCommunities,
}

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-stage seed: `splitmix64(root ^ splitmix64(stage_tag))` with tags
/// 1 (sampler), 2 (proximity communities), 3 (functional communities).
pub fn stage_seed(root: u64, stage: Stage) -> u64 {
    let tag = match stage {
        Stage::Sampler => 1,
        Stage::ProximityCommunities => 2,
        Stage::FunctionalCommunities => 3,
    };
    splitmix64(root ^ splitmix64(tag))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.use_graphs && (self.hops.is_none() || self.poi.is_none()) {
            return Err("use_graphs requires both `hops` and `poi`".into());
        }
        if !self.delimiter.is_ascii() {
            return Err(format!("delimiter must be a single ASCII character, got {:?}", self.delimiter));
        }
        if self.slot_hours == 0 || self.slot_hours > 24 {
            return Err(format!("slot_hours must lie in 1..=24, got {}", self.slot_hours));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(format!("gamma must lie in (0, 1], got {}", self.gamma));
        }
        self.hyperparams().validate().map_err(|e| e.to_string())
    }

    pub fn schema(&self) -> TripSchema {
        TripSchema {
            passenger_col: self.passenger_col.clone(),
            origin_col: self.origin_col.clone(),
            destination_col: self.destination_col.clone(),
            time_col: self.time_col.clone(),
            delimiter: self.delimiter as u8,
            time_format: self.time_format,
            slot_hours: self.slot_hours,
            min_trips: self.min_trips,
            stations: None,
        }
    }

    /// Sampler settings; the seed is the derived sampler seed.
    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            alpha: self.alpha,
            beta: [self.beta_o, self.beta_d, self.beta_t],
            r: self.r,
            max_iter: self.max_iter,
            k0: self.k0,
            seed: stage_seed(self.seed, Stage::Sampler),
            crp_prior: self.crp_prior,
            disband_every_sweep: self.disband_every_sweep,
        }
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            normalize_docs: self.normalize_docs,
            weighted_ch: self.weighted_ch,
        }
    }

    /// Sets a model parameter by config key; used by sweeps.
    pub fn set_model_param(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.trim().parse().map_err(|_| format!("bad value `{v}` for `{key}`"))
        }
        match key {
            "alpha" => self.alpha = parse(key, value)?,
            "beta_o" => self.beta_o = parse(key, value)?,
            "beta_d" => self.beta_d = parse(key, value)?,
            "beta_t" => self.beta_t = parse(key, value)?,
            "r" => self.r = parse(key, value)?,
            "max_iter" => self.max_iter = parse(key, value)?,
            "k0" => self.k0 = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "crp_prior" => self.crp_prior = parse(key, value)?,
            _ => return Err(format!("`{key}` is not a model parameter")),
        }
        Ok(())
    }
}
