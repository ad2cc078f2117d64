use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{build_default_layout, SkinLayout};
use crate::neural::TrainConfig;
use crate::pipeline::PipelineConfig;
use crate::psychometrics::VonFreyConfig;
use crate::simulator::{FieldParams, Protocol};
use crate::textfmt::{key_values, parse_key_values};

/// Everything a run depends on. Rendered as `key=value` lines; the rendering
/// is hashed into every manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n: usize,
    pub seed: u64,
    pub frames: usize,
    pub noise_sigma_nm: f64,
    pub thickness_mm: f64,
    pub peak_sensitivity: f64,
    pub sigma_par: f64,
    pub sigma_perp: f64,
    pub thickness_exponent_s: f64,
    pub thickness_exponent_w: f64,
    pub dual_lobes: bool,
    pub split_seed: u64,
    pub test_frac: f64,
    pub folds: usize,
    pub window: usize,
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub gate_n: f64,
    pub frame_stride: usize,
    pub momentum: f64,
    pub minibatch: usize,
    pub force_lr: f64,
    pub force_epochs: usize,
    pub force_lr_decay: f64,
    pub loc_lr: f64,
    pub loc_epochs: usize,
    pub loc_lr_decay: f64,
    pub train_seed: u64,
    pub vonfrey_subjects: usize,
    pub vonfrey_sites: usize,
    pub fit_on_log_force: bool,
    pub gzip: bool,
    pub dataset: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let field = FieldParams::default();
        let pipe = PipelineConfig::default();
        let vf = VonFreyConfig::default();
        let protocol = Protocol::default();
        Self {
            n: 2700,
            seed: 7,
            frames: protocol.frames,
            noise_sigma_nm: protocol.noise_sigma,
            thickness_mm: build_default_layout().thickness,
            peak_sensitivity: field.peak_sensitivity,
            sigma_par: field.sigma_par,
            sigma_perp: field.sigma_perp,
            thickness_exponent_s: field.thickness_exponent_s,
            thickness_exponent_w: field.thickness_exponent_w,
            dual_lobes: false,
            split_seed: 7,
            test_frac: 0.15,
            folds: 5,
            window: pipe.window,
            hidden: pipe.hidden,
            dropout: pipe.dropout,
            gate_n: pipe.gate,
            frame_stride: pipe.frame_stride,
            momentum: pipe.force_train.momentum,
            minibatch: pipe.force_train.minibatch_size,
            force_lr: pipe.force_train.learning_rate,
            force_epochs: pipe.force_train.epochs,
            force_lr_decay: pipe.force_train.lr_decay,
            loc_lr: pipe.loc_train.learning_rate,
            loc_epochs: pipe.loc_train.epochs,
            loc_lr_decay: pipe.loc_train.lr_decay,
            train_seed: pipe.seed,
            vonfrey_subjects: vf.subjects,
            vonfrey_sites: vf.sites_per_filament,
            fit_on_log_force: false,
            gzip: false,
            dataset: None,
            model: None,
            out: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true/false, got {value:?}"))),
    }
}

fn path_or_none(value: &str) -> Option<PathBuf> {
    let v = value.trim();
    (!v.is_empty()).then(|| PathBuf::from(v))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl RunConfig {
    /// Sets one key; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n" => self.n = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "frames" => self.frames = parse(key, value)?,
            "noise_sigma_nm" => self.noise_sigma_nm = parse(key, value)?,
            "thickness_mm" => self.thickness_mm = parse(key, value)?,
            "peak_sensitivity" => self.peak_sensitivity = parse(key, value)?,
            "sigma_par" => self.sigma_par = parse(key, value)?,
            "sigma_perp" => self.sigma_perp = parse(key, value)?,
            "thickness_exponent_s" => self.thickness_exponent_s = parse(key, value)?,
            "thickness_exponent_w" => self.thickness_exponent_w = parse(key, value)?,
            "dual_lobes" => self.dual_lobes = parse_bool(key, value)?,
            "split_seed" => self.split_seed = parse(key, value)?,
            "test_frac" => self.test_frac = parse(key, value)?,
            "folds" => self.folds = parse(key, value)?,
            "window" => self.window = parse(key, value)?,
            "hidden" => {
                self.hidden = value.split(',').map(|v| parse(key, v)).collect::<Result<_>>()?;
            }
            "dropout" => self.dropout = parse(key, value)?,
            "gate_n" => self.gate_n = parse(key, value)?,
            "frame_stride" => self.frame_stride = parse(key, value)?,
            "momentum" => self.momentum = parse(key, value)?,
            "minibatch" => self.minibatch = parse(key, value)?,
            "force_lr" => self.force_lr = parse(key, value)?,
            "force_epochs" => self.force_epochs = parse(key, value)?,
            "force_lr_decay" => self.force_lr_decay = parse(key, value)?,
            "loc_lr" => self.loc_lr = parse(key, value)?,
            "loc_epochs" => self.loc_epochs = parse(key, value)?,
            "loc_lr_decay" => self.loc_lr_decay = parse(key, value)?,
            "train_seed" => self.train_seed = parse(key, value)?,
            "vonfrey_subjects" => self.vonfrey_subjects = parse(key, value)?,
            "vonfrey_sites" => self.vonfrey_sites = parse(key, value)?,
            "fit_on_log_force" => self.fit_on_log_force = parse_bool(key, value)?,
            "gzip" => self.gzip = parse_bool(key, value)?,
            "dataset" => self.dataset = path_or_none(value),
            "model" => self.model = path_or_none(value),
            "out" => self.out = path_or_none(value),
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies every pair of a `key=value` document.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        let map: BTreeMap<String, String> = parse_key_values(text).map_err(|(row, message)| Error::Parse {
            path: origin.to_path_buf(),
            row,
            message,
        })?;
        for (k, v) in &map {
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c = Self::default();
        c.apply_text(&text, path)?;
        Ok(c)
    }

    /// Canonical `key=value` rendering, every key in a fixed order.
    pub fn to_text(&self) -> String {
        let list = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        key_values([
            ("n", self.n.to_string()),
            ("seed", self.seed.to_string()),
            ("frames", self.frames.to_string()),
            ("noise_sigma_nm", self.noise_sigma_nm.to_string()),
            ("thickness_mm", self.thickness_mm.to_string()),
            ("peak_sensitivity", self.peak_sensitivity.to_string()),
            ("sigma_par", self.sigma_par.to_string()),
            ("sigma_perp", self.sigma_perp.to_string()),
            ("thickness_exponent_s", self.thickness_exponent_s.to_string()),
            ("thickness_exponent_w", self.thickness_exponent_w.to_string()),
            ("dual_lobes", self.dual_lobes.to_string()),
            ("split_seed", self.split_seed.to_string()),
            ("test_frac", self.test_frac.to_string()),
            ("folds", self.folds.to_string()),
            ("window", self.window.to_string()),
            ("hidden", list(&self.hidden)),
            ("dropout", self.dropout.to_string()),
            ("gate_n", self.gate_n.to_string()),
            ("frame_stride", self.frame_stride.to_string()),
            ("momentum", self.momentum.to_string()),
            ("minibatch", self.minibatch.to_string()),
            ("force_lr", self.force_lr.to_string()),
            ("force_epochs", self.force_epochs.to_string()),
            ("force_lr_decay", self.force_lr_decay.to_string()),
            ("loc_lr", self.loc_lr.to_string()),
            ("loc_epochs", self.loc_epochs.to_string()),
            ("loc_lr_decay", self.loc_lr_decay.to_string()),
            ("train_seed", self.train_seed.to_string()),
            ("vonfrey_subjects", self.vonfrey_subjects.to_string()),
            ("vonfrey_sites", self.vonfrey_sites.to_string()),
            ("fit_on_log_force", self.fit_on_log_force.to_string()),
            ("gzip", self.gzip.to_string()),
            ("dataset", show_path(&self.dataset)),
            ("model", show_path(&self.model)),
            ("out", show_path(&self.out)),
        ])
    }

    /// SHA-256 of [`RunConfig::to_text`], hex.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn layout(&self) -> Result<SkinLayout> {
        let mut layout = build_default_layout();
        layout.thickness = self.thickness_mm;
        layout.validate()?;
        Ok(layout)
    }

    pub fn field_params(&self, layout: &SkinLayout) -> Result<FieldParams> {
        let p = FieldParams {
            peak_sensitivity: self.peak_sensitivity,
            sigma_par: self.sigma_par,
            sigma_perp: self.sigma_perp,
            thickness_exponent_s: self.thickness_exponent_s,
            thickness_exponent_w: self.thickness_exponent_w,
            dual_lobes: Vec::new(),
        };
        let p = if self.dual_lobes { p.with_dual_lobe_preset(layout) } else { p };
        p.validate()?;
        Ok(p)
    }

    pub fn protocol(&self) -> Protocol {
        Protocol { frames: self.frames, noise_sigma: self.noise_sigma_nm, ..Protocol::default() }
    }

    pub fn pipeline(&self) -> Result<PipelineConfig> {
        let train = |lr, epochs, decay| TrainConfig {
            learning_rate: lr,
            momentum: self.momentum,
            minibatch_size: self.minibatch,
            epochs,
            lr_decay: decay,
            seed: self.train_seed,
        };
        let c = PipelineConfig {
            window: self.window,
            hidden: self.hidden.clone(),
            dropout: self.dropout,
            gate: self.gate_n,
            frame_stride: self.frame_stride,
            force_train: train(self.force_lr, self.force_epochs, self.force_lr_decay),
            loc_train: train(self.loc_lr, self.loc_epochs, self.loc_lr_decay),
            seed: self.train_seed,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn vonfrey(&self) -> VonFreyConfig {
        VonFreyConfig {
            subjects: self.vonfrey_subjects,
            sites_per_filament: self.vonfrey_sites,
            noise_sigma: self.noise_sigma_nm,
            ..VonFreyConfig::default()
        }
    }
}
