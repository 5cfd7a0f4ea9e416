//! Report assembly and serialization. A report carries every number a
//! run produced, each scalar with its flag set, plus curve tables and a
//! provenance block. Serialization is deliberately timestamp-free so
//! identical inputs produce byte-identical files.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::{CalibrationBin, CurvePoint};
use crate::model::Diagnostic;

/// One reported value. `value: None` means the metric was requested but
/// undefined on this dataset; the flags say why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scalar {
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl Scalar {
    pub fn defined(value: f64) -> Self {
        Scalar {
            value: Some(value),
            flags: Vec::new(),
        }
    }

    pub fn undefined(reason: &str) -> Self {
        Scalar {
            value: None,
            flags: vec![format!("undefined: {reason}")],
        }
    }

    pub fn with_flag(mut self, flag: &str) -> Self {
        self.flags.push(flag.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the canonical JSON of the run options.
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

/// Hash of a serializable configuration, hex encoded. Uses the canonical
/// serde_json encoding so semantically equal configs hash equally.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("config must serialize");
    let mut hasher = Sha256::new();
    hasher.update(json.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn tool_version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub scalars: BTreeMap<String, Scalar>,
    /// Named curves ("froc", "pr"), each a threshold-ordered point list.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub curves: BTreeMap<String, Vec<CurvePoint>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<Vec<CalibrationBin>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<Diagnostic>,
    pub provenance: Provenance,
}

impl MetricReport {
    pub fn new(provenance: Provenance) -> Self {
        MetricReport {
            scalars: BTreeMap::new(),
            curves: BTreeMap::new(),
            calibration: None,
            diagnostics: Vec::new(),
            provenance,
        }
    }

    pub fn scalar(&self, name: &str) -> Option<f64> {
        self.scalars.get(name).and_then(|s| s.value)
    }

    /// Deterministic pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report must serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            detail: format!("report: {e}"),
        })
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_json().as_bytes())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    /// CSV table for one named curve: `threshold,recall,precision,fppi`
    /// with empty cells for fields the curve does not carry.
    pub fn curve_csv(&self, name: &str) -> Option<String> {
        let points = self.curves.get(name)?;
        let mut out = String::from("threshold,recall,precision,fppi\n");
        for p in points {
            let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
            out.push_str(&format!(
                "{},{},{},{}\n",
                p.threshold,
                p.recall,
                opt(p.precision),
                opt(p.fppi)
            ));
        }
        Some(out)
    }

    /// CSV table for the calibration curve.
    pub fn calibration_csv(&self) -> Option<String> {
        let bins = self.calibration.as_ref()?;
        let mut out = String::from("bin_lo,bin_hi,mean_confidence,empirical_precision,count\n");
        for b in bins {
            let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                b.lo,
                b.hi,
                opt(b.mean_confidence),
                opt(b.empirical_precision),
                b.count
            ));
        }
        Some(out)
    }

    /// Writes `<stem>.report.json` plus one `<stem>.<curve>.csv` per curve
    /// and `<stem>.calibration.csv` when present. Returns written paths.
    pub fn write_artifacts(&self, dir: &Path, stem: &str) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.display().to_string(),
            source: e,
        })?;
        let mut written = Vec::new();
        let report_path = dir.join(format!("{stem}.report.json"));
        self.write_json(&report_path)?;
        written.push(report_path);
        for name in self.curves.keys() {
            let path = dir.join(format!("{stem}.{name}.csv"));
            write_file(&path, self.curve_csv(name).unwrap().as_bytes())?;
            written.push(path);
        }
        if self.calibration.is_some() {
            let path = dir.join(format!("{stem}.calibration.csv"));
            write_file(&path, self.calibration_csv().unwrap().as_bytes())?;
            written.push(path);
        }
        Ok(written)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    f.write_all(bytes).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}
