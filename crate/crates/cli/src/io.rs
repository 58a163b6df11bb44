use std::fs;
use std::path::{Path, PathBuf};

use polycurve::CurveGamma;
use serde::Serialize;

use crate::failure::Failure;

pub fn load_curve(path: &Path) -> Result<CurveGamma, Failure> {
    if !path.is_file() {
        return Err(Failure::Usage(format!(
            "curve file {} does not exist",
            path.display()
        )));
    }
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Failure::Input {
        kind: "Parse".into(),
        message: format!("{}: {e}", path.display()),
    })
}

pub fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    if !path.is_file() {
        return Err(Failure::Usage(format!(
            "file {} does not exist",
            path.display()
        )));
    }
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Failure::Input {
        kind: "Parse".into(),
        message: format!("{}: {e}", path.display()),
    })
}

pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

pub fn csv_rows<T: Serialize>(rows: &[T]) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Failure::Numerical {
            kind: "Csv".into(),
            message: e.to_string(),
        })?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Numerical {
        kind: "Csv".into(),
        message: e.to_string(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Files of one run, written together once every computation has finished
/// so that failures leave no partial output.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(String, String)>,
}

impl Outputs {
    pub fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    pub fn write(self, dir: &Path) -> Result<Vec<PathBuf>, Failure> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (name, contents) in self.files {
            let path = dir.join(name);
            fs::write(&path, contents)?;
            written.push(path);
        }
        Ok(written)
    }
}
