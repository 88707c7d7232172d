//! CSV persistence with `# key=value` metadata headers, and atomic file writes.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiment::NoisyRun;
use crate::greens::{GreensTable, TimeGrid};
use crate::spectral::SpectralGrid;
use crate::state_prep::TraceRow;

/// Ordered metadata written as `# key=value` lines.
pub type Metadata = Vec<(String, String)>;

pub fn meta(pairs: &[(&str, String)]) -> Metadata {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| Error::InvalidArgument(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// CSV text: metadata lines, a header row and the data rows.
pub fn csv_text(metadata: &Metadata, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut out = String::new();
    for (k, v) in metadata {
        out.push_str(&format!("# {k}={v}\n"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    out.push_str(&String::from_utf8(body).map_err(|e| Error::Parse(e.to_string()))?);
    Ok(out)
}

/// Metadata and data rows of a CSV produced by [`csv_text`].
pub fn parse_csv(text: &str) -> Result<(BTreeMap<String, String>, Vec<csv::StringRecord>)> {
    let mut meta = BTreeMap::new();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        if let Some((k, v)) = line.trim_start_matches('#').trim().split_once('=') {
            meta.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let rows = r.records().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok((meta, rows))
}

fn field<T: std::str::FromStr>(meta: &BTreeMap<String, String>, key: &str) -> Result<T> {
    meta.get(key)
        .ok_or_else(|| Error::Parse(format!("missing metadata key {key}")))?
        .parse()
        .map_err(|_| Error::Parse(format!("metadata key {key} does not parse")))
}

fn cell<T: std::str::FromStr>(row: &csv::StringRecord, i: usize) -> Result<T> {
    row.get(i)
        .ok_or_else(|| Error::Parse("short CSV row".into()))?
        .parse()
        .map_err(|_| Error::Parse(format!("bad CSV value {:?}", row.get(i))))
}

/// Rows (i, n, t, ReG) with n counted from 1.
pub fn greens_csv(table: &GreensTable, extra: &Metadata) -> Result<String> {
    let g = table.grid();
    let mut m = meta(&[
        ("L", table.sites().to_string()),
        ("j_c", table.center().to_string()),
        ("delta", g.delta.to_string()),
        ("N", g.steps.to_string()),
    ]);
    m.extend(extra.iter().cloned());
    let rows = (0..table.sites()).flat_map(|i| {
        (0..g.steps).map(move |n| vec![i.to_string(), (n + 1).to_string(), g.time(n + 1).to_string(), table.get(i, n).to_string()])
    });
    csv_text(&m, &["i", "n", "t", "ReG"], rows)
}

pub fn parse_greens_csv(text: &str) -> Result<GreensTable> {
    let (meta, rows) = parse_csv(text)?;
    let grid = TimeGrid::new(field(&meta, "delta")?, field(&meta, "N")?)?;
    let mut table = GreensTable::zeros(field(&meta, "L")?, field(&meta, "j_c")?, grid)?;
    for row in rows {
        let (i, n): (usize, usize) = (cell(&row, 0)?, cell(&row, 1)?);
        if i >= table.sites() || n == 0 || n > grid.steps {
            return Err(Error::Parse(format!("row index ({i}, {n}) out of range")));
        }
        table.set(i, n - 1, cell(&row, 3)?);
    }
    Ok(table)
}

/// Rows (k, ω, S).
pub fn spectral_csv(s: &SpectralGrid, extra: &Metadata) -> Result<String> {
    let mut m = meta(&[
        ("eta", s.eta().to_string()),
        ("n_k", s.momenta().len().to_string()),
        ("n_omega", s.omegas().len().to_string()),
        ("negative_ratio", s.negative_weight_ratio().to_string()),
    ]);
    m.extend(extra.iter().cloned());
    let rows = s.momenta().iter().enumerate().flat_map(|(ki, k)| {
        s.omegas().iter().enumerate().map(move |(wi, w)| vec![k.to_string(), w.to_string(), s.get(ki, wi).to_string()])
    });
    csv_text(&m, &["k", "omega", "S"], rows)
}

pub fn parse_spectral_csv(text: &str) -> Result<SpectralGrid> {
    let (meta, rows) = parse_csv(text)?;
    let (nk, nw): (usize, usize) = (field(&meta, "n_k")?, field(&meta, "n_omega")?);
    if rows.len() != nk * nw {
        return Err(Error::Parse(format!("{} rows for a {nk} × {nw} grid", rows.len())));
    }
    let mut momenta = Vec::with_capacity(nk);
    let mut omegas = Vec::with_capacity(nw);
    let mut values = Vec::with_capacity(rows.len());
    for (r, row) in rows.iter().enumerate() {
        if r % nw == 0 {
            momenta.push(cell(row, 0)?);
        }
        if r < nw {
            omegas.push(cell(row, 1)?);
        }
        values.push(cell(row, 2)?);
    }
    SpectralGrid::from_values(momenta, omegas, values, field(&meta, "eta")?)
}

/// One row per shot: (trajectory, n, bitstring, seed). Bit i of the string is site i, written left to right.
pub fn shots_csv(run: &NoisyRun, extra: &Metadata) -> Result<String> {
    let mut m = meta(&[
        ("L", run.sites.to_string()),
        ("N", run.grid.steps.to_string()),
        ("delta", run.grid.delta.to_string()),
        ("seed", run.seed.to_string()),
    ]);
    m.extend(extra.iter().cloned());
    let l = run.sites;
    let seed = run.seed;
    let rows = run.shots.iter().enumerate().flat_map(move |(t, row)| {
        row.iter().enumerate().map(move |(n, b)| {
            let bits: String = (0..l).map(|i| if (b >> i) & 1 == 1 { '1' } else { '0' }).collect();
            vec![t.to_string(), (n + 1).to_string(), bits, seed.to_string()]
        })
    });
    csv_text(&m, &["trajectory", "n", "bitstring", "seed"], rows)
}

/// Optimizer trace rows (evaluation, fidelity, best, p0…p7).
pub fn trace_csv(trace: &[TraceRow], extra: &Metadata) -> Result<String> {
    let rows = trace.iter().map(|r| {
        let mut v = vec![r.evaluation.to_string(), r.fidelity.to_string(), r.best.to_string()];
        v.extend(r.p.iter().map(|x| x.to_string()));
        v
    });
    csv_text(extra, &["evaluation", "fidelity", "best", "p0", "p1", "p2", "p3", "p4", "p5", "p6", "p7"], rows)
}
