use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{SensedArea, SurfacePoint, SENSOR_COUNT};
use crate::neural::{
    load_checkpoint, save_checkpoint, Activation, LayerSpec, Network, NetworkSpec, NormStats, Tensor, TrainConfig,
};
use crate::textfmt::{key_values, parse_key_values};

use super::grids::{GridName, GridSpec};
use super::nip::NipIntegrator;

/// Contact gate, N. Localization runs only above it.
pub const DEFAULT_GATE_N: f64 = 0.050;

const BUNDLE_FORMAT: &str = "fbg-skin-model 1";
const PREDICT_CHUNK: usize = 4096;

/// Force CNN: three conv + max-pool blocks over a 16-channel × `window` input.
pub fn force_net_spec(window: usize) -> NetworkSpec {
    let mut layers = Vec::new();
    for block in 0..3 {
        let kernel = if block == 0 { [SENSOR_COUNT, 1] } else { [1, 1] };
        layers.push(LayerSpec::Conv { filters: 16, kernel, stride: 1, activation: Activation::Relu });
        layers.push(LayerSpec::MaxPool { window: [1, 2] });
    }
    layers.push(LayerSpec::Flatten);
    layers.push(LayerSpec::Dense { units: 100, activation: Activation::Relu });
    layers.push(LayerSpec::Dense { units: 1, activation: Activation::Linear });
    NetworkSpec { input_shape: vec![1, SENSOR_COUNT, window], layers }
}

/// Localization MLP for a grid with `cells` classes.
pub fn loc_net_spec(hidden: &[usize], dropout: f64, cells: usize) -> NetworkSpec {
    let mut layers: Vec<LayerSpec> =
        hidden.iter().map(|&units| LayerSpec::Dense { units, activation: Activation::Relu }).collect();
    layers.push(LayerSpec::Dropout { rate: dropout });
    layers.push(LayerSpec::Dense { units: cells, activation: Activation::Softmax });
    NetworkSpec { input_shape: vec![SENSOR_COUNT], layers }
}

/// Training and architecture settings of the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// CNN window length in frames.
    pub window: usize,
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub gate: f64,
    /// Every `frame_stride`-th loading frame becomes a sample.
    pub frame_stride: usize,
    pub force_train: TrainConfig,
    pub loc_train: TrainConfig,
    /// Base seed; overrides the seeds in the two train configs.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window: 8,
            hidden: vec![128, 128, 64],
            dropout: 0.2,
            gate: DEFAULT_GATE_N,
            frame_stride: 10,
            force_train: TrainConfig { epochs: 30, lr_decay: 0.9, ..TrainConfig::default() },
            loc_train: TrainConfig { epochs: 15, lr_decay: 0.95, ..TrainConfig::default() },
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gate > 0.0 && self.gate.is_finite()) {
            return Err(Error::InvalidArgument(format!("gate threshold {} must be positive", self.gate)));
        }
        if self.frame_stride == 0 {
            return Err(Error::InvalidArgument("frame stride must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!("dropout rate {}", self.dropout)));
        }
        force_net_spec(self.window).validate()?;
        loc_net_spec(&self.hidden, self.dropout, 2).validate()?;
        self.force_train.validate()?;
        self.loc_train.validate()
    }
}

/// Output of one inference call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContactEstimate {
    NoContact,
    Contact { force: f64, point: SurfacePoint },
}

/// Batch localization output.
#[derive(Debug, Clone, PartialEq)]
pub struct Localizations {
    pub fused: Vec<SurfacePoint>,
    /// Single-grid predictions, one vector per grid in model order.
    pub per_grid: Vec<Vec<SurfacePoint>>,
}

/// Trained two-stage model. Immutable after training; share freely.
#[derive(Debug, Clone)]
pub struct PipelineModel {
    pub window: usize,
    pub gate: f64,
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub grids: Vec<GridSpec>,
    pub force_net: Network,
    pub force_stats: NormStats,
    pub loc_nets: Vec<Network>,
    pub loc_stats: NormStats,
    fused: NipIntegrator,
    single: Vec<NipIntegrator>,
}

impl PipelineModel {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn assemble(
        window: usize,
        gate: f64,
        hidden: Vec<usize>,
        dropout: f64,
        grids: Vec<GridSpec>,
        force_net: Network,
        force_stats: NormStats,
        loc_nets: Vec<Network>,
        loc_stats: NormStats,
    ) -> Result<Self> {
        if !(gate > 0.0) {
            return Err(Error::InvalidArgument(format!("gate threshold {gate} must be positive")));
        }
        if loc_nets.len() != grids.len() {
            return Err(Error::Shape("one localization net per grid required".into()));
        }
        if force_stats.width() != SENSOR_COUNT || loc_stats.width() != SENSOR_COUNT {
            return Err(Error::Shape("normalization statistics must cover 16 channels".into()));
        }
        let fused = NipIntegrator::new(&grids)?;
        let single = grids.iter().map(|g| NipIntegrator::new(std::slice::from_ref(g))).collect::<Result<Vec<_>>>()?;
        Ok(Self { window, gate, hidden, dropout, grids, force_net, force_stats, loc_nets, loc_stats, fused, single })
    }

    pub fn area(&self) -> SensedArea {
        self.grids[0].area
    }

    /// CNN input tensor from raw windows laid out `[n, window, 16]`, oldest frame first.
    pub(crate) fn force_input(&self, windows: &[f64]) -> Result<Tensor> {
        let per = self.window * SENSOR_COUNT;
        if windows.is_empty() || !windows.len().is_multiple_of(per) {
            return Err(Error::Shape(format!(
                "{} values do not form windows of {}x{SENSOR_COUNT}",
                windows.len(),
                self.window
            )));
        }
        let n = windows.len() / per;
        let mut norm = windows.to_vec();
        self.force_stats.apply_in_place(&mut norm)?;
        let mut data = vec![0.0; norm.len()];
        for (dst, src) in data.chunks_exact_mut(per).zip(norm.chunks_exact(per)) {
            for t in 0..self.window {
                for c in 0..SENSOR_COUNT {
                    dst[c * self.window + t] = src[t * SENSOR_COUNT + c];
                }
            }
        }
        Tensor::new(vec![n, 1, SENSOR_COUNT, self.window], data)
    }

    pub(crate) fn loc_input(&self, frames: &[f64]) -> Result<Tensor> {
        if frames.is_empty() || !frames.len().is_multiple_of(SENSOR_COUNT) {
            return Err(Error::Shape(format!("{} values do not form 16-channel frames", frames.len())));
        }
        let mut norm = frames.to_vec();
        self.loc_stats.apply_in_place(&mut norm)?;
        Tensor::new(vec![frames.len() / SENSOR_COUNT, SENSOR_COUNT], norm)
    }

    /// Force estimates for raw windows laid out `[n, window, 16]`.
    pub fn predict_forces(&self, windows: &[f64]) -> Result<Vec<f64>> {
        let per = self.window * SENSOR_COUNT;
        let chunks: Vec<&[f64]> = windows.chunks(PREDICT_CHUNK * per).collect();
        let parts = chunks
            .par_iter()
            .map(|c| Ok(self.force_net.predict(&self.force_input(c)?)?.into_data()))
            .collect::<Result<Vec<_>>>()?;
        Ok(parts.concat())
    }

    /// Softmax outputs of every grid net for raw frames `[n, 16]`; one flat
    /// `[n, cells]` vector per grid.
    pub fn predict_cell_probs(&self, frames: &[f64]) -> Result<Vec<Vec<f64>>> {
        let input = self.loc_input(frames)?;
        self.loc_nets.par_iter().map(|net| Ok(net.predict(&input)?.into_data())).collect()
    }

    /// Fused and single-grid contact points for raw frames `[n, 16]`.
    pub fn localize(&self, frames: &[f64]) -> Result<Localizations> {
        let probs = self.predict_cell_probs(frames)?;
        let n = frames.len() / SENSOR_COUNT;
        let counts: Vec<usize> = self.grids.iter().map(GridSpec::cell_count).collect();
        let fused = (0..n)
            .into_par_iter()
            .map(|i| {
                let w: Vec<&[f64]> = probs.iter().zip(&counts).map(|(p, &k)| &p[i * k..(i + 1) * k]).collect();
                self.fused.integrate(&w)
            })
            .collect::<Result<Vec<_>>>()?;
        let per_grid = probs
            .iter()
            .zip(&counts)
            .zip(&self.single)
            .map(|((p, &k), nip)| p.chunks_exact(k).map(|w| nip.integrate(&[w])).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Localizations { fused, per_grid })
    }

    /// Runs the gated pipeline on one window of `window` frames of 16 shifts,
    /// oldest first. The latest frame feeds the localization nets.
    pub fn infer(&self, window: &[Vec<f64>]) -> Result<ContactEstimate> {
        if window.len() != self.window || window.iter().any(|f| f.len() != SENSOR_COUNT) {
            return Err(Error::Shape(format!("window must be {} frames of {SENSOR_COUNT} shifts", self.window)));
        }
        let flat = window.concat();
        let force = self.predict_forces(&flat)?[0];
        self.gated(force, &flat[flat.len() - SENSOR_COUNT..])
    }

    /// Applies the gate to a force estimate and localizes above it.
    pub fn gated(&self, force: f64, frame: &[f64]) -> Result<ContactEstimate> {
        if !(force > self.gate) {
            return Ok(ContactEstimate::NoContact);
        }
        let point = self.localize(frame)?.fused[0];
        Ok(ContactEstimate::Contact { force, point })
    }

    /// Batch form of [`PipelineModel::infer`] for windows `[n, window, 16]`.
    pub fn infer_batch(&self, windows: &[f64]) -> Result<Vec<ContactEstimate>> {
        let forces = self.predict_forces(windows)?;
        let per = self.window * SENSOR_COUNT;
        let latest: Vec<usize> = (0..forces.len()).filter(|&i| forces[i] > self.gate).collect();
        let frames: Vec<f64> =
            latest.iter().flat_map(|&i| windows[(i + 1) * per - SENSOR_COUNT..(i + 1) * per].iter().copied()).collect();
        let mut out = vec![ContactEstimate::NoContact; forces.len()];
        if !latest.is_empty() {
            let points = self.localize(&frames)?.fused;
            for (&i, point) in latest.iter().zip(points) {
                out[i] = ContactEstimate::Contact { force: forces[i], point };
            }
        }
        Ok(out)
    }

    fn manifest(&self) -> String {
        let a = self.area();
        let mut pairs = vec![
            ("format", BUNDLE_FORMAT.to_string()),
            ("window", self.window.to_string()),
            ("gate_n", self.gate.to_string()),
            ("hidden", join(self.hidden.iter())),
            ("dropout", self.dropout.to_string()),
            ("area", join([a.x_min, a.x_max, a.y_min, a.y_max].iter())),
            ("grids", join(self.grids.iter().map(|g| g.name))),
        ];
        let mut grid_lines: Vec<(String, String)> = Vec::new();
        for g in &self.grids {
            grid_lines.push((
                format!("grid.{}", g.name),
                join([g.offset[0], g.offset[1], g.cell[0], g.cell[1], g.cols as f64, g.rows as f64].iter()),
            ));
        }
        grid_lines.push(("force.spec_hash".into(), self.force_net.spec().hash()));
        for (g, net) in self.grids.iter().zip(&self.loc_nets) {
            grid_lines.push((format!("loc.{}.spec_hash", g.name), net.spec().hash()));
        }
        let mut text = key_values(pairs.drain(..));
        text.push_str(&key_values(grid_lines.iter().map(|(k, v)| (k.as_str(), v.clone()))));
        text
    }

    /// Writes the model bundle: five checkpoints, a stats file and a manifest.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_checkpoint(&self.force_net, &dir.join("force.ckpt"))?;
        for (g, net) in self.grids.iter().zip(&self.loc_nets) {
            save_checkpoint(net, &dir.join(format!("loc_{}.ckpt", g.name)))?;
        }
        let stats = format!(
            "{}{}",
            prefixed("force.", &self.force_stats.to_text()),
            prefixed("loc.", &self.loc_stats.to_text())
        );
        write(&dir.join("stats.txt"), &stats)?;
        write(&dir.join("model_manifest.txt"), &self.manifest())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest = read(&dir.join("model_manifest.txt"))?;
        let kv =
            parse_key_values(&manifest).map_err(|(row, m)| Error::Checkpoint(format!("manifest line {row}: {m}")))?;
        let get = |k: &str| kv.get(k).ok_or_else(|| Error::Checkpoint(format!("manifest lacks {k}")));
        if get("format")? != BUNDLE_FORMAT {
            return Err(Error::Checkpoint(format!("unsupported bundle format {:?}", get("format")?)));
        }
        let window: usize = parse_one(get("window")?)?;
        let gate: f64 = parse_one(get("gate_n")?)?;
        let hidden: Vec<usize> = parse_list(get("hidden")?)?;
        let dropout: f64 = parse_one(get("dropout")?)?;
        let a: Vec<f64> = parse_list(get("area")?)?;
        if a.len() != 4 {
            return Err(Error::Checkpoint("area needs 4 values".into()));
        }
        let area = SensedArea { x_min: a[0], x_max: a[1], y_min: a[2], y_max: a[3] };
        let mut grids = Vec::new();
        for name in get("grids")?.split(',') {
            let name: GridName = name.trim().parse().map_err(|_| Error::Checkpoint(format!("grid {name:?}")))?;
            let v: Vec<f64> = parse_list(get(&format!("grid.{name}"))?)?;
            if v.len() != 6 {
                return Err(Error::Checkpoint(format!("grid.{name} needs 6 values")));
            }
            grids.push(GridSpec {
                name,
                offset: [v[0], v[1]],
                cell: [v[2], v[3]],
                cols: v[4] as usize,
                rows: v[5] as usize,
                area,
            });
        }
        let force_net = load_checkpoint(&dir.join("force.ckpt"), &force_net_spec(window))?;
        let loc_nets = grids
            .iter()
            .map(|g| {
                load_checkpoint(
                    &dir.join(format!("loc_{}.ckpt", g.name)),
                    &loc_net_spec(&hidden, dropout, g.cell_count()),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let stats = read(&dir.join("stats.txt"))?;
        let force_stats = NormStats::from_text(&unprefixed("force.", &stats))?;
        let loc_stats = NormStats::from_text(&unprefixed("loc.", &stats))?;
        Self::assemble(window, gate, hidden, dropout, grids, force_net, force_stats, loc_nets, loc_stats)
    }
}

fn join<T: ToString>(items: impl Iterator<Item = T>) -> String {
    items.map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn prefixed(prefix: &str, text: &str) -> String {
    text.lines().map(|l| format!("{prefix}{l}\n")).collect()
}

fn unprefixed(prefix: &str, text: &str) -> String {
    text.lines().filter_map(|l| l.strip_prefix(prefix)).map(|l| format!("{l}\n")).collect()
}

fn parse_one<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Checkpoint(format!("bad manifest value {s:?}")))
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',').map(parse_one).collect()
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_default_layout;
    use crate::neural::zscore_fit;
    use crate::pipeline::grids::build_grids;

    fn untrained(gate: f64) -> PipelineModel {
        let grids = build_grids(build_default_layout().area()).to_vec();
        let stats = zscore_fit(&[vec![0.0; 16], vec![1.0; 16]].concat(), 16).unwrap();
        let loc = grids
            .iter()
            .enumerate()
            .map(|(i, g)| Network::new(loc_net_spec(&[8], 0.2, g.cell_count()), i as u64).unwrap())
            .collect();
        let force = Network::new(force_net_spec(8), 9).unwrap();
        PipelineModel::assemble(8, gate, vec![8], 0.2, grids, force, stats.clone(), loc, stats).unwrap()
    }

    #[test]
    fn spec_shapes() {
        let f = force_net_spec(8);
        assert_eq!(f.output_shape().unwrap(), vec![1]);
        assert_eq!(f.layers.iter().filter(|l| matches!(l, LayerSpec::Conv { .. })).count(), 3);
        assert_eq!(loc_net_spec(&[128, 128, 64], 0.2, 30).output_shape().unwrap(), vec![30]);
        assert!(force_net_spec(4).validate().is_err());
    }

    #[test]
    fn gate_is_strict() {
        let m = untrained(0.05);
        let frame = vec![0.0; 16];
        assert_eq!(m.gated(0.030, &frame).unwrap(), ContactEstimate::NoContact);
        assert_eq!(m.gated(0.050, &frame).unwrap(), ContactEstimate::NoContact);
        match m.gated(0.060, &frame).unwrap() {
            ContactEstimate::Contact { force, point } => {
                assert_eq!(force, 0.060);
                assert!(m.area().contains(point));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn window_shape_checked() {
        let m = untrained(0.05);
        assert!(matches!(m.infer(&vec![vec![0.0; 16]; 7]), Err(Error::Shape(_))));
        assert!(matches!(m.infer(&vec![vec![0.0; 15]; 8]), Err(Error::Shape(_))));
    }

    #[test]
    fn batch_matches_single() {
        let m = untrained(1e-9);
        let windows: Vec<f64> = (0..3 * 8 * 16).map(|i| ((i * 37) % 11) as f64 * 0.1).collect();
        let batch = m.infer_batch(&windows).unwrap();
        for (i, est) in batch.iter().enumerate() {
            let w: Vec<Vec<f64>> = windows[i * 128..(i + 1) * 128].chunks(16).map(<[f64]>::to_vec).collect();
            assert_eq!(*est, m.infer(&w).unwrap());
        }
    }

    #[test]
    fn bundle_round_trip() {
        let m = untrained(0.05);
        let dir = tempfile::tempdir().unwrap();
        m.save(dir.path()).unwrap();
        let back = PipelineModel::load(dir.path()).unwrap();
        assert_eq!(back.grids, m.grids);
        assert_eq!(back.force_stats, m.force_stats);
        let w = vec![vec![0.3; 16]; 8];
        assert_eq!(back.predict_forces(&w.concat()).unwrap(), m.predict_forces(&w.concat()).unwrap());
    }
}
