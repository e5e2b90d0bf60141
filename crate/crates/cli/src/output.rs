//! Trajectory CSV and JSON summaries, written via rename so readers never
//! see a partial file.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use tvopt::TrajectoryRecord;

use crate::error::CliError;

pub fn write_atomic<F>(path: &Path, fill: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let io_err = |e| CliError::Io(path.to_path_buf(), e);
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file_name}.tmp"));
    let result = (|| {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        fill(&mut w)?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io_err)
}

/// Header `k,t,err,wall_ns,x_0..x_{n-1}`; `err` is empty when no reference
/// is known.
pub fn write_csv(w: &mut dyn Write, record: &TrajectoryRecord) -> io::Result<()> {
    let n = record.steps.first().map_or(0, |s| s.x.len());
    write!(w, "k,t,err,wall_ns")?;
    for i in 0..n {
        write!(w, ",x_{i}")?;
    }
    writeln!(w)?;
    for s in &record.steps {
        write!(w, "{},{},", s.k, s.t)?;
        if let Some(e) = s.error {
            write!(w, "{e}")?;
        }
        write!(w, ",{}", s.wall_ns)?;
        for v in &s.x {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(w: &mut dyn Write, value: &T) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)
}
