use std::fs;
use std::path::Path;

use crate::cube::EndmemberSet;
use crate::error::{Error, Result};

/// Reads an endmember library: a header row of names followed by one row
/// per band with one column per endmember.
pub fn read_endmembers_csv(path: impl AsRef<Path>) -> Result<EndmemberSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());

    let header = lines
        .next()
        .ok_or_else(|| Error::format(path, "empty file"))?;
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if names.len() < 2 {
        return Err(Error::format(
            path,
            format!("M ≥ 2 endmembers required (found {})", names.len()),
        ));
    }

    let mut spectra = vec![Vec::new(); names.len()];
    let mut band_rows = 0usize;
    for (row, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != names.len() {
            return Err(Error::format(
                path,
                format!(
                    "ragged row {}: {} cells, expected {}",
                    row + 2,
                    cells.len(),
                    names.len()
                ),
            ));
        }
        for (m, cell) in cells.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                Error::format(
                    path,
                    format!("non-numeric cell `{cell}` at row {}", row + 2),
                )
            })?;
            spectra[m].push(v);
        }
        band_rows += 1;
    }
    if band_rows == 0 {
        return Err(Error::format(path, "no band rows"));
    }
    EndmemberSet::new(spectra, names).map_err(|e| Error::format(path, e.to_string()))
}

/// Writes `set` in the layout accepted by [`read_endmembers_csv`].
pub fn write_endmembers_csv(set: &EndmemberSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = set.names().join(",");
    out.push('\n');
    for b in 0..set.bands() {
        let row: Vec<String> = (0..set.count())
            .map(|m| set.spectrum(m)[b].to_string())
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
