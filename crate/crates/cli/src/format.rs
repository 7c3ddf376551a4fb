//! Plain-text file formats. Every output goes through [`atomic_write`].

use std::collections::HashMap;
use std::io::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use sparsest_core::models::{gen_dpcp, gen_mcsbd, gen_odl, gen_psv, GenParams};
use sparsest_core::solvers::Trace;
use sparsest_core::{ModelKind, ProblemInstance};

use crate::config::KvConfig;
use crate::error::{CliError, Result};

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// Writes to a sibling temporary file and renames it into place, so readers
/// never observe a partial file.
pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn line_of(rec: &csv::StringRecord) -> usize {
    rec.position().map_or(0, |p| p.line() as usize)
}

fn parse_num(path: &Path, line: usize, field: &str) -> Result<f64> {
    field
        .parse()
        .map_err(|_| CliError::format(path, line, format!("not a number: '{field}'")))
}

fn params_entries(params: &GenParams, kind: ModelKind) -> Vec<(&'static str, String)> {
    let mut out = Vec::new();
    out.push(("seed", params.seed.map_or("none".to_string(), |s| s.to_string())));
    if kind == ModelKind::Custom {
        return out;
    }
    out.push(("n", params.n.to_string()));
    out.push(("p", params.p.to_string()));
    if let Some(r) = params.r {
        out.push(("r", r.to_string()));
    }
    if let Some(p1) = params.p1 {
        out.push(("p1", p1.to_string()));
    }
    if let Some(p2) = params.p2 {
        out.push(("p2", p2.to_string()));
    }
    if let Some(theta) = params.theta {
        out.push(("theta", theta.to_string()));
    }
    out
}

/// Instance CSV: one header comment with shape, kind and generation
/// parameters, then one matrix row per line.
pub fn instance_text(inst: &ProblemInstance) -> String {
    let mut s = format!("# rows={} cols={} kind={}", inst.data.nrows(), inst.data.ncols(), inst.kind);
    for (k, v) in params_entries(&inst.params, inst.kind) {
        s.push_str(&format!(" {k}={v}"));
    }
    s.push('\n');
    for row in inst.data.row_iter() {
        let fields: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}

/// Metadata record written next to a generated instance.
pub fn instance_meta(inst: &ProblemInstance) -> String {
    let mut s = format!("kind={}\nrows={}\ncols={}\n", inst.kind, inst.data.nrows(), inst.data.ncols());
    for (k, v) in params_entries(&inst.params, inst.kind) {
        s.push_str(&format!("{k}={v}\n"));
    }
    if let Some(mask) = &inst.inliers {
        s.push_str(&format!("inliers={}\n", mask.iter().filter(|&&b| b).count()));
    }
    s
}

pub fn write_instance(path: &Path, inst: &ProblemInstance) -> Result<()> {
    atomic_write(path, instance_text(inst).as_bytes())
}

fn parse_header(path: &Path, line: &str) -> Result<HashMap<String, String>> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| CliError::format(path, 1, "missing '# rows=... cols=...' header"))?;
    body.split_whitespace()
        .map(|tok| {
            tok.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| CliError::format(path, 1, format!("bad header token '{tok}'")))
        })
        .collect()
}

/// Reads an instance CSV. A generated instance is regenerated from its
/// header so that ground truth is available; if the stored data does not
/// match, it is loaded as a custom instance.
pub fn read_instance(path: &Path) -> Result<ProblemInstance> {
    let text = read_text(path)?;
    let first = text.lines().next().unwrap_or("");
    let header = parse_header(path, first)?;
    let get = |k: &str| header.get(k).map(String::as_str);
    let num = |k: &str| -> Result<usize> {
        get(k)
            .ok_or_else(|| CliError::format(path, 1, format!("header lacks '{k}'")))?
            .parse()
            .map_err(|_| CliError::format(path, 1, format!("header '{k}' is not an integer")))
    };
    let rows = num("rows")?;
    let cols = num("cols")?;
    let mut entries = Vec::with_capacity(rows * cols);
    let mut got_rows = 0;
    for rec in reader(&text).records() {
        let rec = rec.map_err(|e| CliError::format(path, 0, e.to_string()))?;
        let line = line_of(&rec);
        if rec.len() != cols {
            return Err(CliError::format(path, line, format!("expected {cols} fields, found {}", rec.len())));
        }
        for f in rec.iter() {
            entries.push(parse_num(path, line, f)?);
        }
        got_rows += 1;
    }
    if got_rows != rows {
        return Err(CliError::format(path, 0, format!("expected {rows} rows, found {got_rows}")));
    }
    let data = DMatrix::from_row_slice(rows, cols, &entries);
    let kind: ModelKind = get("kind").unwrap_or("custom").parse().unwrap_or(ModelKind::Custom);
    if kind != ModelKind::Custom {
        if let Some(inst) = regenerate(kind, &header) {
            if inst.data == data {
                return Ok(inst);
            }
        }
    }
    Ok(ProblemInstance::custom(data)?)
}

fn regenerate(kind: ModelKind, get: &HashMap<String, String>) -> Option<ProblemInstance> {
    fn p<T: std::str::FromStr>(get: &HashMap<String, String>, k: &str) -> Option<T> {
        get.get(k).and_then(|v| v.parse().ok())
    }
    let seed = p::<u64>(get, "seed")?;
    let n = p::<usize>(get, "n")?;
    let np = p::<usize>(get, "p")?;
    let theta = p::<f64>(get, "theta");
    let inst = match kind {
        ModelKind::Dpcp => match (p(get, "r"), p(get, "p1"), p(get, "p2")) {
            (Some(r), Some(p1), Some(p2)) => gen_dpcp(n, r, p1, p2, seed).ok(),
            _ => None,
        },
        ModelKind::Odl => theta.and_then(|t| gen_odl(n, np, t, seed).ok()),
        ModelKind::Psv => theta.and_then(|t| gen_psv(np, n, t, seed).ok()),
        ModelKind::Mcsbd => theta.and_then(|t| gen_mcsbd(n, np, t, seed).ok()),
        ModelKind::Custom => None,
    };
    inst
}

/// Trace CSV: `# key: value` lines describing the run, `# key=value` lines
/// holding the resolved config, then `iter,f,grad_norm[,dist],elapsed_ms`.
pub fn trace_text(
    trace: &Trace,
    meta: &[(String, String)],
    config: &[(&'static str, String)],
    with_dist: bool,
) -> String {
    let mut s = String::new();
    for (k, v) in meta {
        s.push_str(&format!("# {k}: {v}\n"));
    }
    for (k, v) in config {
        s.push_str(&format!("# {k}={v}\n"));
    }
    s.push_str(if with_dist { "iter,f,grad_norm,dist,elapsed_ms\n" } else { "iter,f,grad_norm,elapsed_ms\n" });
    for r in &trace.records {
        s.push_str(&format!("{},{},{}", r.iter, fmt_f64(r.f), fmt_f64(r.grad_norm)));
        if with_dist {
            s.push(',');
            s.push_str(&r.dist.map_or(String::new(), fmt_f64));
        }
        s.push_str(&format!(",{:.3}\n", r.elapsed_ms));
    }
    s
}

/// A parsed trace file.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub meta: Vec<(String, String)>,
    /// The `key=value` comment lines, loadable as a config.
    pub config: KvConfig,
    pub columns: Vec<String>,
    /// Rows in column order; empty fields read as NaN.
    pub rows: Vec<Vec<f64>>,
}

impl TraceFile {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

pub fn read_trace(path: &Path) -> Result<TraceFile> {
    let text = read_text(path)?;
    let mut meta = Vec::new();
    let mut config = KvConfig::new();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        let body = line.trim_start_matches('#').trim();
        match (body.split_once(": "), body.split_once('=')) {
            (Some((k, v)), None) => meta.push((k.to_string(), v.to_string())),
            (Some((k, v)), Some((k2, _))) if k.len() < k2.len() => meta.push((k.to_string(), v.to_string())),
            (_, Some((k, v))) => config.set(k, v),
            _ => {}
        }
    }
    let mut records = reader(&text).into_records();
    let header = records
        .next()
        .ok_or_else(|| CliError::format(path, 0, "missing column header"))?
        .map_err(|e| CliError::format(path, 0, e.to_string()))?;
    let columns: Vec<String> = header.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| CliError::format(path, 0, e.to_string()))?;
        let line = line_of(&rec);
        if rec.len() != columns.len() {
            return Err(CliError::format(path, line, "field count differs from header"));
        }
        let row = rec
            .iter()
            .map(|f| if f.is_empty() { Ok(f64::NAN) } else { parse_num(path, line, f) })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(TraceFile { meta, config, columns, rows })
}

/// One row of a summary CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub seed: u64,
    pub dist: Option<f64>,
    pub f: f64,
    pub iters: usize,
    pub ms: f64,
    pub status: String,
}

pub fn summary_text(rows: &[SummaryRow], comments: &[(String, String)]) -> String {
    let mut s = String::new();
    for (k, v) in comments {
        s.push_str(&format!("# {k}={v}\n"));
    }
    s.push_str("seed,dist,f,iters,ms,status\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{:.3},{}\n",
            r.seed,
            r.dist.map_or(String::new(), fmt_f64),
            fmt_f64(r.f),
            r.iters,
            r.ms,
            r.status
        ));
    }
    s
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, rec) in reader(&text).records().enumerate() {
        let rec = rec.map_err(|e| CliError::format(path, 0, e.to_string()))?;
        if i == 0 {
            continue;
        }
        let line = line_of(&rec);
        if rec.len() != 6 {
            return Err(CliError::format(path, line, "expected 6 fields"));
        }
        let bad = |what: &str| CliError::format(path, line, format!("bad {what}"));
        out.push(SummaryRow {
            seed: rec[0].parse().map_err(|_| bad("seed"))?,
            dist: if rec[1].is_empty() { None } else { Some(parse_num(path, line, &rec[1])?) },
            f: parse_num(path, line, &rec[2])?,
            iters: rec[3].parse().map_err(|_| bad("iters"))?,
            ms: parse_num(path, line, &rec[4])?,
            status: rec[5].to_string(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub theta: f64,
    pub method: String,
    pub success_rate: f64,
}

pub fn sweep_text(rows: &[SweepRow], comments: &[(String, String)]) -> String {
    let mut s = String::new();
    for (k, v) in comments {
        s.push_str(&format!("# {k}={v}\n"));
    }
    s.push_str("theta,method,success_rate\n");
    for r in rows {
        s.push_str(&format!("{},{},{}\n", r.theta, r.method, r.success_rate));
    }
    s
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepRow>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, rec) in reader(&text).records().enumerate() {
        let rec = rec.map_err(|e| CliError::format(path, 0, e.to_string()))?;
        if i == 0 {
            continue;
        }
        let line = line_of(&rec);
        if rec.len() != 3 {
            return Err(CliError::format(path, line, "expected 3 fields"));
        }
        out.push(SweepRow {
            theta: parse_num(path, line, &rec[0])?,
            method: rec[1].to_string(),
            success_rate: parse_num(path, line, &rec[2])?,
        });
    }
    Ok(out)
}

/// Point CSV: one point per row, optionally followed by a non-numeric label.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<Option<String>>,
}

impl PointCloud {
    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }
}

pub fn read_points(path: &Path) -> Result<PointCloud> {
    let text = read_text(path)?;
    let mut cloud = PointCloud::default();
    for rec in reader(&text).records() {
        let rec = rec.map_err(|e| CliError::format(path, 0, e.to_string()))?;
        let line = line_of(&rec);
        let mut fields: Vec<&str> = rec.iter().collect();
        let label = match fields.last() {
            Some(last) if last.parse::<f64>().is_err() => fields.pop().map(str::to_string),
            _ => None,
        };
        let point = fields
            .iter()
            .map(|f| parse_num(path, line, f))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = cloud.points.first() {
            if first.len() != point.len() {
                return Err(CliError::format(path, line, format!("expected {} coordinates", first.len())));
            }
        }
        cloud.points.push(point);
        cloud.labels.push(label);
    }
    Ok(cloud)
}

pub fn points_text(cloud: &PointCloud) -> String {
    let mut s = String::new();
    for (p, label) in cloud.points.iter().zip(&cloud.labels) {
        let mut fields: Vec<String> = p.iter().map(|&x| fmt_f64(x)).collect();
        if let Some(l) = label {
            fields.push(l.clone());
        }
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}
