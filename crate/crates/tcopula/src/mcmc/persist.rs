//! Plain-text persistence of stored chains: a tab-delimited draw file plus a
//! small key-value metadata file next to it.

use crate::error::{Error, Result};
use crate::mcmc::{PosteriorSample, ProposalSpec};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Identifying information stored with a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainMetadata {
    pub model_label: String,
    pub seed: u64,
    pub n_tune: usize,
    pub n_burn: usize,
}

fn meta_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".meta");
    PathBuf::from(p)
}

/// Write draws as `sweep<TAB>theta_1..theta_m<TAB>log_lik` rows with full
/// float precision, plus a metadata sidecar.
pub fn save_chain(path: &Path, sample: &PosteriorSample, meta: &ChainMetadata) -> Result<()> {
    let m = sample.param_count();
    let mut out = String::new();
    let mut header = String::from("sweep");
    for k in 0..m {
        write!(header, "\ttheta_{k}").unwrap();
    }
    header.push_str("\tlog_lik\n");
    out.push_str(&header);
    for t in 0..sample.n_sweeps() {
        write!(out, "{t}").unwrap();
        for &v in sample.draw(t) {
            write!(out, "\t{v:.17e}").unwrap();
        }
        writeln!(out, "\t{:.17e}", sample.log_lik()[t]).unwrap();
    }
    std::fs::write(path, out)?;

    let mut side = String::new();
    writeln!(side, "model_label\t{}", meta.model_label).unwrap();
    writeln!(side, "seed\t{}", meta.seed).unwrap();
    writeln!(side, "n_tune\t{}", meta.n_tune).unwrap();
    writeln!(side, "n_burn\t{}", meta.n_burn).unwrap();
    writeln!(side, "param_count\t{m}").unwrap();
    for (k, &s) in sample.proposal.sigmas.iter().enumerate() {
        writeln!(side, "sigma_{k}\t{s:.17e}").unwrap();
    }
    for (k, &a) in sample.acceptance.iter().enumerate() {
        writeln!(side, "acceptance_{k}\t{a:.17e}").unwrap();
    }
    std::fs::write(meta_path(path), side)?;
    Ok(())
}

fn meta_value<'a>(lines: &'a [(&'a str, &'a str)], key: &str) -> Result<&'a str> {
    lines
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| Error::data(format!("metadata key {key:?} missing")))
}

/// Read a chain written by [`save_chain`].
pub fn load_chain(path: &Path) -> Result<(PosteriorSample, ChainMetadata)> {
    let side = std::fs::read_to_string(meta_path(path))?;
    let pairs: Vec<(&str, &str)> = side
        .lines()
        .filter_map(|l| l.split_once('\t'))
        .collect();
    let m: usize = meta_value(&pairs, "param_count")?
        .parse()
        .map_err(|_| Error::data("bad param_count".to_string()))?;
    let parse_f64 = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| Error::data(format!("bad float {s:?}")))
    };
    let mut sigmas = Vec::with_capacity(m);
    let mut acceptance = Vec::with_capacity(m);
    for k in 0..m {
        sigmas.push(parse_f64(meta_value(&pairs, &format!("sigma_{k}"))?)?);
        acceptance.push(parse_f64(meta_value(&pairs, &format!("acceptance_{k}"))?)?);
    }
    let meta = ChainMetadata {
        model_label: meta_value(&pairs, "model_label")?.to_string(),
        seed: meta_value(&pairs, "seed")?
            .parse()
            .map_err(|_| Error::data("bad seed".to_string()))?,
        n_tune: meta_value(&pairs, "n_tune")?
            .parse()
            .map_err(|_| Error::data("bad n_tune".to_string()))?,
        n_burn: meta_value(&pairs, "n_burn")?
            .parse()
            .map_err(|_| Error::data("bad n_burn".to_string()))?,
    };

    let body = std::fs::read_to_string(path)?;
    let mut draws = Vec::new();
    let mut log_lik = Vec::new();
    for (idx, line) in body.lines().enumerate() {
        if idx == 0 {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != m + 2 {
            return Err(Error::data(format!(
                "row {idx} has {} fields, expected {}",
                fields.len(),
                m + 2
            )));
        }
        for f in &fields[1..=m] {
            draws.push(parse_f64(f)?);
        }
        log_lik.push(parse_f64(fields[m + 1])?);
    }
    let sample = PosteriorSample::from_parts(
        m,
        draws,
        log_lik,
        acceptance,
        ProposalSpec::new(sigmas)?,
    )?;
    Ok((sample, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_everything() {
        let sample = PosteriorSample::from_parts(
            2,
            vec![3.5, 40.0, 3.6, 41.0, 3.4, 39.5],
            vec![-10.5, -10.2, -10.8],
            vec![0.23, 0.25],
            ProposalSpec::new(vec![1.5, 8.0]).unwrap(),
        )
        .unwrap();
        let meta = ChainMetadata {
            model_label: "(0,1)(2)".to_string(),
            seed: 77,
            n_tune: 100,
            n_burn: 200,
        };
        let mut path = std::env::temp_dir();
        path.push(format!("chain-{}.tsv", std::process::id()));
        save_chain(&path, &sample, &meta).unwrap();
        let (back, back_meta) = load_chain(&path).unwrap();
        assert_eq!(back, sample);
        assert_eq!(back_meta, meta);
        std::fs::remove_file(&path).ok();
        std::fs::remove_file(meta_path(&path)).ok();
    }

    #[test]
    fn missing_metadata_is_an_error() {
        let mut path = std::env::temp_dir();
        path.push(format!("chain-missing-{}.tsv", std::process::id()));
        std::fs::write(&path, "sweep\ttheta_0\tlog_lik\n0\t1.0\t-1.0\n").unwrap();
        assert!(load_chain(&path).is_err());
        std::fs::remove_file(&path).ok();
    }
}
