//! Emission of run artifacts: a JSON summary per run plus data tables as
//! CSV (one-line header) or JSON arrays.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tmreadout_core::calibration::StarkMap;

use crate::config::EmitFormat;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
}

pub struct Emitter {
    dir: PathBuf,
    format: EmitFormat,
    written: Vec<PathBuf>,
}

impl Emitter {
    pub fn new(dir: &Path, format: EmitFormat) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Emitter { dir: dir.to_path_buf(), format, written: Vec::new() })
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.written
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }

    pub fn summary<T: Serialize>(&mut self, provenance: &Provenance, result: &T) -> Result<PathBuf> {
        #[derive(Serialize)]
        struct Doc<'a, T> {
            provenance: &'a Provenance,
            result: &'a T,
        }
        let path = self.path("summary.json");
        let mut w = BufWriter::new(File::create(&path)?);
        serde_json::to_writer_pretty(&mut w, &Doc { provenance, result })?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(path)
    }

    pub fn table<T: Serialize>(&mut self, stem: &str, rows: &[T]) -> Result<PathBuf> {
        let mut sink = self.sink(stem)?;
        for r in rows {
            sink.push(r)?;
        }
        sink.finish()
    }

    /// A table written row by row, flushed after every row.
    pub fn sink<T: Serialize>(&mut self, stem: &str) -> Result<RowSink<T>> {
        let ext = match self.format {
            EmitFormat::ColumnarText => "csv",
            EmitFormat::StructuredDocument => "json",
        };
        let path = self.path(&format!("{stem}.{ext}"));
        let file = File::create(&path)?;
        let inner = match self.format {
            EmitFormat::ColumnarText => Sink::Csv(csv::Writer::from_writer(file)),
            EmitFormat::StructuredDocument => {
                let mut w = BufWriter::new(file);
                w.write_all(b"[")?;
                w.flush()?;
                Sink::Json { w, first: true }
            }
        };
        Ok(RowSink { inner, path, _rows: std::marker::PhantomData })
    }
}

enum Sink {
    Csv(csv::Writer<File>),
    Json { w: BufWriter<File>, first: bool },
}

pub struct RowSink<T> {
    inner: Sink,
    path: PathBuf,
    _rows: std::marker::PhantomData<fn(&T)>,
}

impl<T: Serialize> RowSink<T> {
    pub fn push(&mut self, row: &T) -> Result<()> {
        match &mut self.inner {
            Sink::Csv(w) => {
                w.serialize(row)?;
                w.flush()?;
            }
            Sink::Json { w, first } => {
                w.write_all(if *first { b"\n  " } else { b",\n  " })?;
                serde_json::to_writer(&mut *w, row)?;
                w.flush()?;
                *first = false;
            }
        }
        Ok(())
    }

    pub fn finish(self) -> Result<PathBuf> {
        match self.inner {
            Sink::Csv(mut w) => w.flush()?,
            Sink::Json { mut w, first } => {
                w.write_all(if first { b"]\n" } else { b"\n]\n" })?;
                w.flush()?;
            }
        }
        Ok(self.path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapRow {
    pub power: f64,
    pub frequency: f64,
    pub response: f64,
}

pub fn map_rows(map: &StarkMap) -> Vec<MapRow> {
    let mut rows = Vec::with_capacity(map.powers.len() * map.probe_freqs.len());
    for (p, line) in map.powers.iter().zip(&map.response) {
        for (f, r) in map.probe_freqs.iter().zip(line) {
            rows.push(MapRow { power: *p, frequency: *f, response: *r });
        }
    }
    rows
}

/// Reads a map written as `power,frequency,response` rows covering a full grid.
pub fn read_stark_map(path: &Path) -> Result<StarkMap> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<MapRow> = Vec::new();
    for r in reader.deserialize() {
        rows.push(r.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?);
    }
    let mut powers: Vec<f64> = rows.iter().map(|r| r.power).collect();
    let mut freqs: Vec<f64> = rows.iter().map(|r| r.frequency).collect();
    for v in [&mut powers, &mut freqs] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    if powers.len() * freqs.len() != rows.len() {
        return Err(CliError::Config(format!("{}: rows do not form a complete power x frequency grid", path.display())));
    }
    let mut response = vec![vec![f64::NAN; freqs.len()]; powers.len()];
    for r in &rows {
        let i = powers.binary_search_by(|p| p.total_cmp(&r.power)).unwrap_or_default();
        let j = freqs.binary_search_by(|f| f.total_cmp(&r.frequency)).unwrap_or_default();
        if !response[i][j].is_nan() {
            return Err(CliError::Config(format!("{}: duplicate grid point", path.display())));
        }
        response[i][j] = r.response;
    }
    let map = StarkMap { powers, probe_freqs: freqs, response, true_centers: None, line_fits: None };
    map.validate()?;
    Ok(map)
}
