use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use serde::Serialize;
use serde_json::Value;
use singlecopy_core::Error;

use crate::{Common, Failure};

pub const SCHEMA: u32 = 1;
pub const VERSION: &str = env!("SINGLECOPY_VERSION");

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: u32,
    version: &'static str,
    command: &'a str,
    config: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time_ms: Option<u64>,
    result: &'a T,
}

pub fn core_failure(e: Error) -> Failure {
    match e {
        Error::Domain(_)
        | Error::SizeCap(_)
        | Error::InvalidDimension(_)
        | Error::InvalidSubset(_)
        | Error::InvalidCut(_)
        | Error::DimensionMismatch { .. } => Failure::Usage(e.to_string()),
        _ => Failure::Runtime(e.to_string()),
    }
}

pub fn usage(ok: bool, msg: impl Into<String>) -> Result<(), Failure> {
    if ok {
        Ok(())
    } else {
        Err(Failure::Usage(msg.into()))
    }
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(p) => {
            Box::new(BufWriter::new(File::create(p).map_err(|e| {
                Failure::Runtime(format!("cannot write {}: {e}", p.display()))
            })?))
        }
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn io_failure(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(format!("write failed: {e}"))
}

pub fn emit_json<T: Serialize>(
    common: &Common,
    command: &str,
    config: Value,
    wall_time_ms: u64,
    result: &T,
) -> Result<(), Failure> {
    let envelope = Envelope {
        schema: SCHEMA,
        version: VERSION,
        command,
        config,
        wall_time_ms: (!common.no_timing).then_some(wall_time_ms),
        result,
    };
    let mut w = sink(&common.out)?;
    serde_json::to_writer_pretty(&mut w, &envelope).map_err(io_failure)?;
    writeln!(w).map_err(io_failure)?;
    w.flush().map_err(io_failure)
}

pub fn write_csv(path: &Option<PathBuf>, header: &[String], rows: &[Vec<String>]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_writer(sink(path)?);
    w.write_record(header).map_err(io_failure)?;
    for r in rows {
        w.write_record(r).map_err(io_failure)?;
    }
    w.flush().map_err(io_failure)
}

pub fn emit_csv(common: &Common, header: Vec<String>, rows: &[Vec<String>]) -> Result<(), Failure> {
    write_csv(&common.out, &header, rows)
}
