use std::fs;
use std::io::Write;
use std::path::Path;

use crate::engine::RNG_ID;
use crate::error::{Error, Result};

pub const HEADER_PREFIX: &str = "# selfwalk";

/// Header line for an output file: version, generator id, and the resolved
/// arguments that regenerate the file.
pub(crate) fn header(args: &[String]) -> String {
    format!("{HEADER_PREFIX} {} rng={RNG_ID} args: {}", env!("CARGO_PKG_VERSION"), args.join(" "))
}

/// Arguments recorded in a header line, ready to pass back to the binary.
pub fn parse_header(line: &str) -> Option<Vec<String>> {
    let rest = line.strip_prefix(HEADER_PREFIX)?;
    let (_, args) = rest.split_once(" args: ")?;
    Some(args.split_whitespace().map(str::to_string).collect())
}

/// CSV text with a header comment line and a column row.
pub(crate) struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header_line: &str, columns: &[&str]) -> Self {
        let mut buf = Vec::new();
        buf.extend_from_slice(header_line.as_bytes());
        buf.push(b'\n');
        let mut writer = csv::WriterBuilder::new().from_writer(buf);
        writer.write_record(columns).expect("writing to memory");
        Table { writer }
    }

    /// A table without the comment and column lines, for fragments.
    pub fn bare() -> Self {
        Table { writer: csv::WriterBuilder::new().from_writer(Vec::new()) }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("writing to memory");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.writer.into_inner().expect("flushing to memory")
    }
}

/// Writes `bytes` to `path` via a temporary file and a rename, so a file
/// that exists is always complete.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    {
        let mut f = fs::File::create(tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path).map_err(Error::from)
}

pub(crate) fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}
