//! Deterministic artifact emission: RFC-4180 CSV with 17 significant digits,
//! JSON run manifests with content hashes of every output file.

use crate::admissibility::{ConstantsTable, RequirementReport};
use crate::analysis::QnSeries;
use crate::rate::RateSolution;
use crate::sim::{Params, SwitchHistory};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub type IoResult<T> = std::io::Result<T>;

/// 17 significant digits, '.' decimal separator, round-trips in f64.
pub fn fmt17(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        // keep integers readable
        format!("{:.1}", x)
    } else {
        format!("{:.16e}", x)
    }
}

fn write_csv(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> IoResult<()> {
    let mut out = String::new();
    out.push_str(header);
    out.push_str("\r\n");
    for row in rows {
        out.push_str(&row);
        out.push_str("\r\n");
    }
    fs::write(path, out)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut s = String::with_capacity(64);
    for b in digest {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

pub fn file_sha256(path: &Path) -> IoResult<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

#[derive(Debug, Serialize)]
pub struct ManifestOutput {
    pub file: String,
    pub sha256: String,
}

/// Run manifest written next to every artifact. `created_unix` is the only
/// field allowed to differ between identical runs.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub params: Params,
    pub a: Option<f64>,
    pub tolerances: serde_json::Value,
    pub outputs: Vec<ManifestOutput>,
    pub code_version: &'static str,
    pub created_unix: u64,
}

impl Manifest {
    pub fn new(command: &str, params: Params, a: Option<f64>, tolerances: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            params,
            a,
            tolerances,
            outputs: Vec::new(),
            code_version: env!("CARGO_PKG_VERSION"),
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn add_output(&mut self, path: &Path) -> IoResult<()> {
        self.outputs.push(ManifestOutput {
            file: path
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            sha256: file_sha256(path)?,
        });
        Ok(())
    }

    pub fn write(&self, dir: &Path, name: &str) -> IoResult<PathBuf> {
        let path = dir.join(name);
        let mut f = fs::File::create(&path)?;
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        f.write_all(json.as_bytes())?;
        f.write_all(b"\n")?;
        Ok(path)
    }
}

/// columns: h1, a, residual_f, residual_g, residual_h
pub fn write_rate_csv(path: &Path, rows: &[(f64, RateSolution)]) -> IoResult<()> {
    write_csv(
        path,
        "h1,a,residual_f,residual_g,residual_h",
        rows.iter().map(|(h1, s)| {
            format!(
                "{},{},{},{},{}",
                fmt17(*h1),
                fmt17(s.a),
                fmt17(s.residual_f),
                fmt17(s.residual_g),
                fmt17(s.residual_h)
            )
        }),
    )
}

/// columns: n, t_n, q_n, q_n/sqrt(n), grad, grad + 0.75 h1
pub fn write_history_csv(path: &Path, hist: &SwitchHistory) -> IoResult<()> {
    let h1 = hist.params.h1;
    write_csv(
        path,
        "n,t_n,q_n,q_n_over_sqrt_n,grad,grad_plus_3h1_over_4",
        hist.records.iter().map(|r| {
            let rq = if r.n == 0 {
                0.0
            } else {
                r.q / (r.n as f64).sqrt()
            };
            format!(
                "{},{},{},{},{},{}",
                r.n,
                fmt17(r.t),
                fmt17(r.q),
                fmt17(rq),
                fmt17(r.grad),
                fmt17(r.grad + 0.75 * h1)
            )
        }),
    )
}

/// columns: n, q_n, q_n/sqrt(n)
pub fn write_qn_csv(path: &Path, series: &QnSeries) -> IoResult<()> {
    write_csv(
        path,
        "n,q_n,q_n_over_sqrt_n",
        series
            .entries
            .iter()
            .map(|(n, q, rq)| format!("{},{},{}", n, fmt17(*q), fmt17(*rq))),
    )
}

/// columns: n, grad, residual = (grad + 0.75 h1) sqrt(n)
pub fn write_grad_csv(path: &Path, hist: &SwitchHistory) -> IoResult<()> {
    let h1 = hist.params.h1;
    write_csv(
        path,
        "n,grad,residual_sqrt_n",
        hist.records.iter().filter(|r| r.n > 0).map(|r| {
            format!(
                "{},{},{}",
                r.n,
                fmt17(r.grad),
                fmt17((r.grad + 0.75 * h1) * (r.n as f64).sqrt())
            )
        }),
    )
}

/// rows n, columns requirement 1..12 margins
pub fn write_margin_csv(path: &Path, report: &RequirementReport) -> IoResult<()> {
    let header = format!(
        "n,{}",
        (1..=12)
            .map(|j| format!("req{j}"))
            .collect::<Vec<_>>()
            .join(",")
    );
    write_csv(
        path,
        &header,
        report.margins.iter().map(|(n, m)| {
            let cells: Vec<String> = m.iter().map(|v| fmt17(*v)).collect();
            format!("{},{}", n, cells.join(","))
        }),
    )
}

/// the full constants manifest as JSON (value, grid, flag per entry)
pub fn write_constants_json(path: &Path, table: &ConstantsTable) -> IoResult<()> {
    #[derive(Serialize)]
    struct Doc<'a> {
        params: Params,
        a: f64,
        group_a_plateau_ok: bool,
        group_a_max_rel_change: f64,
        scan_end_moving: &'a [String],
        constants: std::collections::BTreeMap<String, crate::admissibility::ConstEntry>,
    }
    let doc = Doc {
        params: table.params,
        a: table.a,
        group_a_plateau_ok: table.group_a_plateau_ok,
        group_a_max_rel_change: table.group_a_max_rel_change,
        scan_end_moving: &table.scan_end_moving,
        constants: table.manifest(),
    };
    fs::write(
        path,
        serde_json::to_string_pretty(&doc).expect("constants serialize") + "\n",
    )
}
