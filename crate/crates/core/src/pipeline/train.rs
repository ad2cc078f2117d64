use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{SurfacePoint, SENSOR_COUNT};
use crate::neural::{train, zscore_fit, Loss, Network, NormStats, Tensor, TrainConfig};
use crate::simulator::Dataset;

use super::grids::{build_grids, cell_of};
use super::model::{force_net_spec, loc_net_spec, PipelineConfig, PipelineModel};

/// Indentation-level partition. Whole indentations go to one side only.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DataSplit {
    pub train: Vec<u64>,
    /// Validation and test members; never read during training.
    pub held_out: Vec<u64>,
}

impl DataSplit {
    pub fn validate(&self, dataset: &Dataset) -> Result<()> {
        let mut seen = BTreeSet::new();
        for &id in self.train.iter().chain(&self.held_out) {
            if !seen.insert(id) {
                return Err(Error::Validation(format!("indentation {id} appears more than once in the split")));
            }
            if dataset.find(id).is_none() {
                return Err(Error::Validation(format!("indentation {id} is not in the dataset")));
            }
        }
        if self.train.is_empty() {
            return Err(Error::Validation("empty training set".into()));
        }
        Ok(())
    }
}

/// Frame-level samples drawn from the loading phase of a set of indentations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleSet {
    pub window: usize,
    /// Raw windows `[n, window, 16]`, oldest frame first, edge-replicated
    /// before the first frame.
    pub windows: Vec<f64>,
    /// Raw latest frames `[n, 16]`.
    pub frames: Vec<f64>,
    pub force: Vec<f64>,
    pub location: Vec<SurfacePoint>,
    pub indentation: Vec<u64>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.force.len()
    }

    pub fn is_empty(&self) -> bool {
        self.force.is_empty()
    }

    /// Subset of samples whose true force exceeds `threshold`.
    pub fn above(&self, threshold: f64) -> SampleSet {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.force[i] > threshold).collect();
        let per = self.window * SENSOR_COUNT;
        SampleSet {
            window: self.window,
            windows: keep.iter().flat_map(|&i| self.windows[i * per..(i + 1) * per].iter().copied()).collect(),
            frames: keep
                .iter()
                .flat_map(|&i| self.frames[i * SENSOR_COUNT..(i + 1) * SENSOR_COUNT].iter().copied())
                .collect(),
            force: keep.iter().map(|&i| self.force[i]).collect(),
            location: keep.iter().map(|&i| self.location[i]).collect(),
            indentation: keep.iter().map(|&i| self.indentation[i]).collect(),
        }
    }
}

/// Collects every `stride`-th loading-phase frame of the listed indentations,
/// in the order given.
pub fn extract_samples(dataset: &Dataset, ids: &[u64], stride: usize, window: usize) -> Result<SampleSet> {
    if stride == 0 || window == 0 {
        return Err(Error::InvalidArgument("stride and window must be positive".into()));
    }
    let mut set = SampleSet { window, ..SampleSet::default() };
    for &id in ids {
        let ind =
            dataset.find(id).ok_or_else(|| Error::Validation(format!("indentation {id} is not in the dataset")))?;
        for f in (0..ind.loading_end).step_by(stride) {
            for k in 0..window {
                let src = (f + k + 1).saturating_sub(window);
                set.windows.extend_from_slice(&ind.frames[src].shifts);
            }
            let frame = &ind.frames[f];
            if frame.shifts.len() != SENSOR_COUNT {
                return Err(Error::Shape(format!("indentation {id} frame {f} has {} shifts", frame.shifts.len())));
            }
            set.frames.extend_from_slice(&frame.shifts);
            set.force.push(frame.force_z);
            set.location.push(ind.location);
            set.indentation.push(id);
        }
    }
    Ok(set)
}

/// Normalization statistics of the force and localization inputs, fitted on
/// the training indentations of `split` only.
pub fn training_stats(dataset: &Dataset, split: &DataSplit, config: &PipelineConfig) -> Result<(NormStats, NormStats)> {
    split.validate(dataset)?;
    let samples = extract_samples(dataset, &split.train, config.frame_stride, config.window)?;
    let force = zscore_fit(&samples.frames, SENSOR_COUNT)?;
    let loc = zscore_fit(&samples.above(config.gate).frames, SENSOR_COUNT)?;
    Ok((force, loc))
}

enum Job {
    Force,
    Loc(usize),
}

/// Trains the force CNN and the four grid MLPs on the training side of `split`.
pub fn train_pipeline(dataset: &Dataset, split: &DataSplit, config: &PipelineConfig) -> Result<PipelineModel> {
    config.validate()?;
    split.validate(dataset)?;
    let samples = extract_samples(dataset, &split.train, config.frame_stride, config.window)?;
    let loc_samples = samples.above(config.gate);
    let force_stats = zscore_fit(&samples.frames, SENSOR_COUNT)?;
    let loc_stats = zscore_fit(&loc_samples.frames, SENSOR_COUNT)?;
    let grids = build_grids(dataset.layout.area()).to_vec();

    // A model shell provides the input transforms before the nets exist.
    let shell = PipelineModel::assemble(
        config.window,
        config.gate,
        config.hidden.clone(),
        config.dropout,
        grids.clone(),
        Network::new(force_net_spec(config.window), 0)?,
        force_stats.clone(),
        grids
            .iter()
            .map(|g| Network::new(loc_net_spec(&config.hidden, config.dropout, g.cell_count()), 0))
            .collect::<Result<Vec<_>>>()?,
        loc_stats.clone(),
    )?;
    let force_x = shell.force_input(&samples.windows)?;
    let force_y = Tensor::new(vec![samples.len(), 1], samples.force.clone())?;
    let loc_x = shell.loc_input(&loc_samples.frames)?;

    let jobs: Vec<Job> = std::iter::once(Job::Force).chain((0..grids.len()).map(Job::Loc)).collect();
    let mut nets = jobs
        .par_iter()
        .map(|job| match *job {
            Job::Force => {
                let seed = config.seed;
                let mut net = Network::new(force_net_spec(config.window), seed)?;
                let tc = TrainConfig { seed, ..config.force_train.clone() };
                train(&mut net, &force_x, &force_y, Loss::Mse, &tc)?;
                Ok(net)
            }
            Job::Loc(g) => {
                let grid = &grids[g];
                let seed = config.seed.wrapping_add(1 + g as u64);
                let cells = grid.cell_count();
                let mut target = vec![0.0; loc_samples.len() * cells];
                for (i, &p) in loc_samples.location.iter().enumerate() {
                    target[i * cells + cell_of(grid, p)?] = 1.0;
                }
                let target = Tensor::new(vec![loc_samples.len(), cells], target)?;
                let mut net = Network::new(loc_net_spec(&config.hidden, config.dropout, cells), seed)?;
                let tc = TrainConfig { seed, ..config.loc_train.clone() };
                train(&mut net, &loc_x, &target, Loss::CrossEntropy, &tc)?;
                Ok(net)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let loc_nets = nets.split_off(1);
    let force_net = nets.pop().expect("force net");
    PipelineModel::assemble(
        config.window,
        config.gate,
        config.hidden.clone(),
        config.dropout,
        grids,
        force_net,
        force_stats,
        loc_nets,
        loc_stats,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_default_layout;
    use crate::simulator::{generate_dataset, FieldParams, Protocol};

    fn tiny() -> Dataset {
        let protocol = Protocol { frames: 50, ..Protocol::default() };
        generate_dataset(&build_default_layout(), &FieldParams::default(), &protocol, 6, 3).unwrap()
    }

    #[test]
    fn leakage_rejected() {
        let d = tiny();
        let split = DataSplit { train: vec![0, 1, 2], held_out: vec![2, 3] };
        assert!(matches!(split.validate(&d), Err(Error::Validation(_))));
        let split = DataSplit { train: vec![0, 9], held_out: vec![] };
        assert!(matches!(split.validate(&d), Err(Error::Validation(_))));
    }

    #[test]
    fn windows_replicate_first_frame() {
        let d = tiny();
        let s = extract_samples(&d, &[1], 5, 8).unwrap();
        assert_eq!(s.len(), 4);
        let first = &d.indentations[1].frames[0].shifts;
        assert_eq!(&s.windows[..16], first.as_slice());
        assert_eq!(&s.windows[7 * 16..8 * 16], first.as_slice());
        // Second sample ends at frame 5 and starts at frame 0 (edge replication for -2..-1).
        let w = &s.windows[128..256];
        assert_eq!(&w[2 * 16..3 * 16], first.as_slice());
        assert_eq!(&w[7 * 16..], d.indentations[1].frames[5].shifts.as_slice());
    }

    #[test]
    fn training_is_deterministic() {
        let d = tiny();
        let split = DataSplit { train: vec![0, 1, 2, 3], held_out: vec![4, 5] };
        let config = PipelineConfig {
            hidden: vec![8],
            frame_stride: 2,
            force_train: TrainConfig { epochs: 2, ..TrainConfig::default() },
            loc_train: TrainConfig { epochs: 2, ..TrainConfig::default() },
            ..PipelineConfig::default()
        };
        let a = train_pipeline(&d, &split, &config).unwrap();
        let b = train_pipeline(&d, &split, &config).unwrap();
        assert_eq!(a.force_net.params(), b.force_net.params());
        for (x, y) in a.loc_nets.iter().zip(&b.loc_nets) {
            assert_eq!(x.params(), y.params());
        }
        assert_eq!(a.loc_nets[0].spec().output_shape().unwrap(), vec![30]);
    }
}
