//! File formats: CSV with `#` metadata headers, histogram JSON, time-tag CSV.
//! All writes go through a temp file in the target directory and a rename.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use biphoton_core::sim::{Channel, CoincidenceHistogram, TimeTagRecord};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file()
        .sync_all()
        .map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

/// `#` header lines: config hash, the resolved config, then any extra
/// `key: value` pairs.
pub fn csv_header(cfg: &ExperimentConfig, extra: &[(&str, String)]) -> String {
    let mut h = String::new();
    let _ = writeln!(h, "# config_sha256: {}", cfg.sha256());
    let _ = writeln!(
        h,
        "# config: {}",
        serde_json::to_string(cfg).expect("config serializes")
    );
    for (k, v) in extra {
        let _ = writeln!(h, "# {k}: {v}");
    }
    h
}

/// Two-or-more column numeric CSV.
pub fn write_table(
    path: &Path,
    header: &str,
    columns: &[&str],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> Result<(), CliError> {
    let mut s = String::from(header);
    s.push_str(&columns.join(","));
    s.push('\n');
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                s.push(',');
            }
            first = false;
            let _ = write!(s, "{v:e}");
        }
        s.push('\n');
    }
    write_atomic(path, s.as_bytes())
}

/// Read the value of a `# key: value` header line.
pub fn header_value(text: &str, key: &str) -> Option<String> {
    let prefix = format!("# {key}: ");
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.strip_prefix(&prefix).map(str::to_string))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramMetadata {
    pub config_sha256: String,
    pub config: ExperimentConfig,
}

/// On-disk start-stop histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramFile {
    pub bin_width_ns: f64,
    pub counts: Vec<u64>,
    pub n_triggers: u64,
    pub n_trials: u64,
    pub window_us: f64,
    pub metadata: Option<HistogramMetadata>,
}

impl HistogramFile {
    pub fn from_histogram(h: &CoincidenceHistogram, cfg: Option<&ExperimentConfig>) -> Self {
        Self {
            bin_width_ns: h.bin_width * 1e9,
            counts: h.counts.clone(),
            n_triggers: h.n_triggers,
            n_trials: h.n_trials,
            window_us: h.window * 1e6,
            metadata: cfg.map(|c| HistogramMetadata {
                config_sha256: c.sha256(),
                config: c.clone(),
            }),
        }
    }

    pub fn to_histogram(&self) -> CoincidenceHistogram {
        CoincidenceHistogram {
            bin_width: self.bin_width_ns * 1e-9,
            counts: self.counts.clone(),
            n_triggers: self.n_triggers,
            n_trials: self.n_trials,
            window: self.window_us * 1e-6,
            meta: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let h: Self =
            serde_json::from_str(&text).map_err(|e| CliError::format(path, e.to_string()))?;
        h.to_histogram()
            .validate()
            .map_err(|e| CliError::format(path, e.to_string()))?;
        Ok(h)
    }
}

fn channel_name(c: Channel) -> &'static str {
    match c {
        Channel::Stokes => "stokes",
        Channel::AntiStokes => "anti_stokes",
    }
}

/// Time tags as `trial,channel,t_ns`.
pub fn write_tags(path: &Path, header: &str, tags: &[TimeTagRecord]) -> Result<(), CliError> {
    let mut s = String::with_capacity(header.len() + 32 * tags.len() + 32);
    s.push_str(header);
    s.push_str("trial,channel,t_ns\n");
    for r in tags {
        let _ = writeln!(s, "{},{},{}", r.trial, channel_name(r.channel), r.t * 1e9);
    }
    write_atomic(path, s.as_bytes())
}

pub fn read_tags(path: &Path) -> Result<Vec<TimeTagRecord>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty());
    match lines.next() {
        Some((_, "trial,channel,t_ns")) => {}
        _ => {
            return Err(CliError::format(
                path,
                "missing `trial,channel,t_ns` header",
            ))
        }
    }
    lines
        .map(|(i, l)| {
            let bad = || CliError::format(path, format!("line {}: malformed record", i + 1));
            let mut f = l.split(',');
            let trial = f.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            let channel = match f.next() {
                Some("stokes") => Channel::Stokes,
                Some("anti_stokes") => Channel::AntiStokes,
                _ => return Err(bad()),
            };
            let t_ns: f64 = f.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            if f.next().is_some() || !t_ns.is_finite() {
                return Err(bad());
            }
            Ok(TimeTagRecord {
                trial,
                channel,
                t: t_ns * 1e-9,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let tags = vec![
            TimeTagRecord {
                trial: 0,
                channel: Channel::Stokes,
                t: 1.25e-6,
            },
            TimeTagRecord {
                trial: 7,
                channel: Channel::AntiStokes,
                t: 2.0e-4,
            },
        ];
        write_tags(&p, "# x: 1\n", &tags).unwrap();
        let back = read_tags(&p).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in back.iter().zip(&tags) {
            assert_eq!((a.trial, a.channel), (b.trial, b.channel));
            assert!((a.t - b.t).abs() <= 1e-15 * b.t);
        }
        // second pass is textually stable
        let p2 = dir.path().join("t2.csv");
        write_tags(&p2, "# x: 1\n", &back).unwrap();
        let again = read_tags(&p2).unwrap();
        assert_eq!(again, back);
    }

    #[test]
    fn malformed_tags_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "trial,channel,t_ns\n0,idler,3\n").unwrap();
        assert!(matches!(read_tags(&p), Err(CliError::Format { .. })));
        std::fs::write(&p, "0,stokes,3\n").unwrap();
        assert!(matches!(read_tags(&p), Err(CliError::Format { .. })));
    }

    #[test]
    fn header_lookup() {
        let cfg = ExperimentConfig::default();
        let h = csv_header(&cfg, &[("temporal_fwhm_s", "1e-5".into())]);
        assert_eq!(header_value(&h, "config_sha256"), Some(cfg.sha256()));
        assert_eq!(header_value(&h, "temporal_fwhm_s").as_deref(), Some("1e-5"));
        let cfg_back: ExperimentConfig =
            serde_json::from_str(&header_value(&h, "config").unwrap()).unwrap();
        assert_eq!(cfg_back, cfg);
    }

    #[test]
    fn histogram_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.json");
        let h = CoincidenceHistogram {
            bin_width: 51.2e-9,
            counts: vec![1, 0, 5],
            n_triggers: 9,
            n_trials: 3,
            window: 240e-6,
            meta: None,
        };
        let f = HistogramFile::from_histogram(&h, Some(&ExperimentConfig::default()));
        write_json(&p, &f).unwrap();
        let back = HistogramFile::load(&p).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.to_histogram().counts, h.counts);
    }
}
