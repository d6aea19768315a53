//! CSV and text artifacts, each written to a temporary file and renamed.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

pub struct Csv {
    body: String,
}

impl Csv {
    /// Starts with the `# config-hash:` comment and the header row.
    pub fn new(hash: &str, columns: &[String]) -> Self {
        let mut body = format!("# config-hash: {hash}\n");
        body.push_str(&columns.join(","));
        body.push('\n');
        Csv { body }
    }

    pub fn row(&mut self, cells: impl IntoIterator<Item = String>) {
        let mut first = true;
        for c in cells {
            if !first {
                self.body.push(',');
            }
            first = false;
            self.body.push_str(&c);
        }
        self.body.push('\n');
    }

    pub fn into_string(self) -> String {
        self.body
    }
}

pub fn num(v: f64) -> String {
    let mut s = String::new();
    write!(s, "{v:e}").unwrap();
    s
}

/// Column names may not contain commas, so block labels use `;` between indices.
pub fn column(label: &str) -> String {
    format!("norm:{}", label.replace(',', ";"))
}

pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = path.file_name().context("output path has no file name")?.to_string_lossy();
    let tmp: PathBuf = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("renaming {} to {}", tmp.display(), path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_rows() {
        let mut c = Csv::new("abc", &["t".into(), column("y[1,1](0,0)")]);
        c.row([num(0.5), num(1e-3)]);
        assert_eq!(c.into_string(), "# config-hash: abc\nt,norm:y[1;1](0;0)\n5e-1,1e-3\n");
    }
}
