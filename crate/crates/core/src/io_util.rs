use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Result, SpamsError};

/// Writes through a sibling temp file and renames it into place, so a
/// reader never observes a half-written artifact.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let file_name = path
        .file_name()
        .ok_or_else(|| SpamsError::Config(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);

    let result = (|| {
        let file = fs::File::create(&tmp)?;
        let mut w = BufWriter::new(file);
        fill(&mut w)?;
        w.flush()?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(SpamsError::io(path, e));
    }
    Ok(())
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| SpamsError::io(path, e))
}

pub fn csv_write(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    write_atomic(path, |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(header).map_err(csv_to_io)?;
        for row in rows {
            wtr.write_record(&row).map_err(csv_to_io)?;
        }
        wtr.flush()
    })
}

fn csv_to_io(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}
