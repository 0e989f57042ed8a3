//! Output files: CSV, JSON, gnuplot data and scripts, each carrying the
//! configuration hash and library version.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

/// Provenance written into every output.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub version: &'static str,
    pub config_sha256: String,
}

impl Provenance {
    pub fn new(hash: &str) -> Self {
        Provenance {
            version: levyhedge::VERSION,
            config_sha256: hash.to_owned(),
        }
    }

    /// `# levyhedge <version> config-sha256 <hash>`.
    pub fn comment_line(&self) -> String {
        format!("# levyhedge {} config-sha256 {}", self.version, self.config_sha256)
    }
}

/// JSON document `{provenance, ...payload}` with keys in declaration order.
#[derive(Serialize)]
pub struct Document<'a, T: Serialize> {
    pub provenance: &'a Provenance,
    #[serde(flatten)]
    pub payload: &'a T,
}

pub fn json<T: Serialize>(prov: &Provenance, payload: &T) -> String {
    let mut s = serde_json::to_string_pretty(&Document {
        provenance: prov,
        payload,
    })
    .expect("outputs serialize");
    s.push('\n');
    s
}

/// Destination of command outputs: a directory, or standard output only.
#[derive(Debug, Clone)]
pub struct Sink {
    pub dir: Option<PathBuf>,
}

impl Sink {
    pub fn new(dir: Option<PathBuf>) -> std::io::Result<Self> {
        if let Some(d) = &dir {
            std::fs::create_dir_all(d)?;
        }
        Ok(Sink { dir })
    }

    /// Writes `contents` to `name` inside the output directory, if any.
    pub fn file(&self, name: &str, contents: &str) -> std::io::Result<()> {
        if let Some(d) = &self.dir {
            write_atomically(&d.join(name), contents)?;
        }
        Ok(())
    }

    /// Prints `contents` and writes it to `name`.
    pub fn primary(&self, name: &str, contents: &str) -> std::io::Result<()> {
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        lock.write_all(contents.as_bytes())?;
        lock.flush()?;
        self.file(name, contents)
    }
}

fn write_atomically(path: &Path, contents: &str) -> std::io::Result<()> {
    let tmp = path.with_extension("partial");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(tmp, path)
}

/// CSV text with a provenance comment, a header row and LF line endings.
pub fn csv<I: IntoIterator<Item = String>>(prov: &Provenance, header: &str, rows: I) -> String {
    let mut s = prov.comment_line();
    s.push('\n');
    s.push_str(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}
