//! JSON, JSONL and CSV emission. Every float is written with 17 significant
//! digits and every file starts with the metadata block.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use dpp_logderiv::Estimate;
use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, Serializer};

use crate::config::ExperimentConfig;

/// Compact JSON with floats as `{:.16e}`; non-finite floats become `null`.
struct SigFormatter;

impl Formatter for SigFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{}", sig(v))
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }

    fn write_null<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        CompactFormatter.write_null(w)
    }
}

/// `v` with 17 significant digits.
pub fn sig(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

pub fn to_json<T: Serialize + ?Sized>(v: &T) -> String {
    let mut buf = Vec::new();
    v.serialize(&mut Serializer::with_formatter(&mut buf, SigFormatter))
        .expect("serializing to memory");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

#[derive(Serialize)]
pub struct Meta<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub config: &'a ExperimentConfig,
}

impl<'a> Meta<'a> {
    pub fn new(command: &'a str, config: &'a ExperimentConfig) -> Self {
        Self {
            tool: "dpplog",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed: config.seed,
            config,
        }
    }
}

/// Opens `path`, or stdout when absent.
pub fn sink(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// `{"meta": …, "result": …}` on one line.
pub fn write_json<T: Serialize>(w: &mut dyn Write, meta: &Meta, result: &T) -> io::Result<()> {
    #[derive(Serialize)]
    struct Doc<'a, T> {
        meta: &'a Meta<'a>,
        result: &'a T,
    }
    writeln!(w, "{}", to_json(&Doc { meta, result }))?;
    w.flush()
}

/// A metadata line `{"meta": …}` followed by one record per line.
pub fn write_jsonl<T: Serialize>(w: &mut dyn Write, meta: &Meta, records: impl IntoIterator<Item = T>) -> io::Result<()> {
    #[derive(Serialize)]
    struct Head<'a> {
        meta: &'a Meta<'a>,
    }
    writeln!(w, "{}", to_json(&Head { meta }))?;
    for r in records {
        writeln!(w, "{}", to_json(&r))?;
    }
    w.flush()
}

/// One CSV row of the fixed `name,value,stderr,n` layout.
pub struct Row {
    pub name: String,
    pub estimate: Estimate,
}

impl Row {
    pub fn new(name: impl Into<String>, estimate: Estimate) -> Self {
        Self {
            name: name.into(),
            estimate,
        }
    }
}

/// `# {"meta": …}`, the header `name,value,stderr,n`, then the rows.
pub fn write_csv(w: &mut dyn Write, meta: &Meta, rows: &[Row]) -> Result<(), csv::Error> {
    #[derive(Serialize)]
    struct Head<'a> {
        meta: &'a Meta<'a>,
    }
    writeln!(w, "# {}", to_json(&Head { meta }))?;
    let mut c = csv::Writer::from_writer(w);
    c.write_record(["name", "value", "stderr", "n"])?;
    for r in rows {
        let e = &r.estimate;
        c.write_record([r.name.clone(), sig(e.value), sig(e.stderr), e.n.to_string()])?;
    }
    c.flush()?;
    Ok(())
}
