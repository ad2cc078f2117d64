use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::geometry::{SkinLayout, SurfacePoint, SENSOR_COUNT};
use crate::simulator::{Dataset, FieldParams, Indentation, Protocol, SensorFrame};

const FIXED_COLUMNS: [&str; 5] = ["indentation_id", "t_s", "x_mm", "y_mm", "fz_N"];

fn header() -> Vec<String> {
    FIXED_COLUMNS.iter().map(|s| s.to_string()).chain((1..=SENSOR_COUNT).map(|i| format!("dl{i:02}_nm"))).collect()
}

fn is_gzip(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

/// Writes one row per frame with 6-decimal fields; `.gz` paths are gzip-compressed.
pub fn save_dataset_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let sink: Box<dyn Write> =
        if is_gzip(path) { Box::new(GzEncoder::new(file, Compression::default())) } else { Box::new(file) };
    let mut w = BufWriter::new(sink);
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", header().join(",")).map_err(io)?;
    let mut line = String::new();
    for ind in &dataset.indentations {
        for f in &ind.frames {
            use std::fmt::Write as _;
            line.clear();
            let _ = write!(line, "{},{:.6},{:.6},{:.6},{:.6}", ind.id, f.t, ind.location.x, ind.location.y, f.force_z);
            for s in &f.shifts {
                let _ = write!(line, ",{s:.6}");
            }
            line.push('\n');
            w.write_all(line.as_bytes()).map_err(io)?;
        }
    }
    let sink = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    drop(sink);
    Ok(())
}

/// Reads a dataset CSV written by [`save_dataset_csv`] (or any file with the
/// same schema). Layout and field parameters are not stored in the file and
/// are taken from the arguments; the protocol is reconstructed from the rows
/// with the loading phase ending at the peak-force frame.
pub fn load_dataset_csv(path: &Path, layout: &SkinLayout, params: &FieldParams, seed: u64) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let source: Box<dyn Read> = if is_gzip(path) { Box::new(GzDecoder::new(file)) } else { Box::new(file) };
    let reader = BufReader::with_capacity(1 << 20, source);
    let perr = |row: usize, message: String| Error::Parse { path: path.to_path_buf(), row, message };

    let mut lines = reader.lines();
    let head = lines.next().ok_or_else(|| perr(1, "empty file".into()))?.map_err(|e| Error::io(path, e))?;
    let cols: Vec<&str> = head.trim_end().split(',').map(str::trim).collect();
    let expected = header();
    for name in &expected {
        if !cols.iter().any(|c| c == name) {
            return Err(perr(1, format!("missing column {name}")));
        }
    }
    let index: Vec<usize> =
        expected.iter().map(|name| cols.iter().position(|c| c == name).expect("checked above")).collect();

    let mut indentations: Vec<Indentation> = Vec::new();
    let mut values = vec![0.0; expected.len()];
    for (i, line) in lines.enumerate() {
        let row = i + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.trim_end().split(',').collect();
        if cells.len() != cols.len() {
            let detail = match cols.get(cells.len()) {
                Some(name) => format!("missing column {name}"),
                None => "extra cells".to_string(),
            };
            return Err(perr(row, format!("expected {} cells, got {} ({detail})", cols.len(), cells.len())));
        }
        for (v, (&ci, name)) in values.iter_mut().zip(index.iter().zip(&expected)) {
            *v = cells[ci]
                .trim()
                .parse::<f64>()
                .map_err(|_| perr(row, format!("column {name}: non-numeric cell {:?}", cells[ci])))?;
            if !v.is_finite() {
                return Err(perr(row, format!("column {name}: non-finite value")));
            }
        }
        let id_text = cells[index[0]].trim();
        let id: u64 =
            id_text.parse().map_err(|_| perr(row, format!("indentation_id {id_text:?} is not an integer")))?;
        let frame = SensorFrame { t: values[1], force_z: values[4], shifts: values[5..].to_vec() };
        match indentations.last_mut() {
            Some(last) if last.id == id => {
                if frame.t <= last.frames.last().expect("non-empty").t {
                    return Err(perr(row, format!("time is not increasing within indentation {id}")));
                }
                last.frames.push(frame);
            }
            _ => {
                if indentations.iter().any(|ind| ind.id == id) {
                    return Err(perr(row, format!("rows of indentation {id} are not contiguous")));
                }
                indentations.push(Indentation {
                    id,
                    location: SurfacePoint::new(values[2], values[3]),
                    frames: vec![frame],
                    loading_end: 0,
                });
            }
        }
    }
    if indentations.is_empty() {
        return Err(perr(2, "no data rows".into()));
    }
    let area = layout.area();
    for ind in &mut indentations {
        if !area.contains(ind.location) {
            return Err(Error::OutOfDomain(format!("indentation {} lies outside the sensed area", ind.id)));
        }
        let peak = ind
            .frames
            .iter()
            .enumerate()
            .fold(0, |best, (k, f)| if f.force_z > ind.frames[best].force_z { k } else { best });
        ind.loading_end = peak + 1;
    }
    let first = &indentations[0];
    let frames = first.frames.len();
    let sample_rate_hz =
        if frames > 1 { 1.0 / (first.frames[1].t - first.frames[0].t) } else { Protocol::default().sample_rate_hz };
    let protocol = Protocol {
        frames,
        sample_rate_hz,
        peak_force: first.frames[first.loading_end - 1].force_z,
        loading_fraction: first.loading_end as f64 / frames as f64,
        noise_sigma: Protocol::default().noise_sigma,
    };
    Ok(Dataset { layout: layout.clone(), params: params.clone(), protocol, indentations, seed })
}
