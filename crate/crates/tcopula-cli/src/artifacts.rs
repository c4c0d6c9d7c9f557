//! Reading and writing run artifacts: tab-delimited matrices at full float
//! precision, digests, and the manifest.

use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;
use tcopula::copula::{CorrelationMatrix, PseudoSample};
use tcopula::error::{Error, Result};

/// Full-precision float formatting; 17 significant digits round-trip f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_matrix(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join("\t"));
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&line.join("\t"));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::data(format!("{} is empty", path.display())))?
        .split('\t')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split('\t')
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::data(format!("{} row {}: bad float {f:?}", path.display(), i + 2)))
            })
            .collect::<Result<_>>()?;
        if row.len() != header.len() {
            return Err(Error::data(format!(
                "{} row {}: {} fields, expected {}",
                path.display(),
                i + 2,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn read_pseudo_obs(path: &Path) -> Result<(Vec<String>, PseudoSample)> {
    let (header, rows) = read_matrix(path)?;
    Ok((header, PseudoSample::from_rows(&rows)?))
}

pub fn read_correlation(path: &Path) -> Result<CorrelationMatrix> {
    let (header, rows) = read_matrix(path)?;
    let n = header.len();
    if rows.len() != n {
        return Err(Error::data(format!(
            "{}: {} rows for {} columns",
            path.display(),
            rows.len(),
            n
        )));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    CorrelationMatrix::new(nalgebra::DMatrix::from_row_slice(n, n, &flat))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}

pub fn file_digest(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

/// Digest identifying a chain run: data bytes, model id and chain settings.
pub fn chain_cache_key(
    data_digest: &str,
    model_id: &str,
    chain: &tcopula::mcmc::ChainConfig,
    quad_rel_tol: f64,
) -> String {
    let tag = format!(
        "{data_digest}|{model_id}|{}|{}|{}|{}|{}|{quad_rel_tol:e}",
        chain.n_tune, chain.n_burn, chain.n_sample, chain.seed, chain.target_acceptance
    );
    sha256_hex(tag.as_bytes())[..16].to_string()
}

/// Write a MANIFEST listing every regular file under `dir` with its digest.
pub fn write_manifest(dir: &Path) -> Result<usize> {
    let mut entries = Vec::new();
    collect_files(dir, dir, &mut entries)?;
    entries.sort();
    let mut out = String::new();
    for rel in &entries {
        if rel == "MANIFEST" {
            continue;
        }
        let digest = file_digest(&dir.join(rel))?;
        writeln!(out, "{digest}  {rel}").unwrap();
    }
    std::fs::write(dir.join("MANIFEST"), out)?;
    Ok(entries.len())
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else if let Ok(rel) = path.strip_prefix(root) {
            out.push(rel.to_string_lossy().to_string());
        }
    }
    Ok(())
}
