//! Trajectory persistence.
//!
//! Binary layout, little endian throughout:
//!
//! | field          | type                    |
//! |----------------|-------------------------|
//! | magic          | `b"BSIM1"`              |
//! | channel count  | u32                     |
//! | dt             | f64                     |
//! | t0             | f64                     |
//! | sample count   | u64                     |
//! | metadata bytes | u32 length + UTF-8 TOML |
//! | samples        | f64, one channel after another |
//!
//! The metadata block also stores `kind` and the channel names.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{TrajectoryKind, TrajectorySeries};
use crate::{Error, Result};

const MAGIC: &[u8; 5] = b"BSIM1";

pub fn write_bsim(path: impl AsRef<Path>, series: &TrajectorySeries) -> Result<()> {
    let mut meta = series.metadata.clone();
    meta.insert("kind".into(), format!("{:?}", series.kind).to_lowercase().into());
    meta.insert(
        "channels".into(),
        toml::Value::Array(series.names.iter().map(|n| n.clone().into()).collect()),
    );
    let text = toml::to_string(&meta).map_err(|e| Error::Format(e.to_string()))?;

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(series.channels.len() as u32)?;
    w.write_f64::<LittleEndian>(series.dt)?;
    w.write_f64::<LittleEndian>(series.t0)?;
    w.write_u64::<LittleEndian>(series.len() as u64)?;
    w.write_u32::<LittleEndian>(text.len() as u32)?;
    w.write_all(text.as_bytes())?;
    for ch in &series.channels {
        for &v in ch {
            w.write_f64::<LittleEndian>(v)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_bsim(path: impl AsRef<Path>) -> Result<TrajectorySeries> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a BSIM1 file".into()));
    }
    let n_channels = r.read_u32::<LittleEndian>()? as usize;
    let dt = r.read_f64::<LittleEndian>()?;
    let t0 = r.read_f64::<LittleEndian>()?;
    let n_samples = r.read_u64::<LittleEndian>()? as usize;
    let meta_len = r.read_u32::<LittleEndian>()? as usize;
    let mut text = vec![0u8; meta_len];
    r.read_exact(&mut text)?;
    let text = String::from_utf8(text).map_err(|e| Error::Format(e.to_string()))?;
    let mut metadata: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Format(e.to_string()))?;

    let kind = match metadata.remove("kind").as_ref().and_then(|v| v.as_str()) {
        Some("full") => TrajectoryKind::Full,
        Some("envelope") => TrajectoryKind::Envelope,
        other => return Err(Error::Format(format!("unknown trajectory kind {other:?}"))),
    };
    let names: Vec<String> = match metadata.remove("channels") {
        Some(toml::Value::Array(a)) => a.iter().filter_map(|v| v.as_str().map(str::to_string)).collect(),
        _ => (0..n_channels).map(|i| format!("ch{i}")).collect(),
    };
    if names.len() != n_channels {
        return Err(Error::Format("channel names do not match the channel count".into()));
    }
    let mut channels = Vec::with_capacity(n_channels);
    for _ in 0..n_channels {
        let mut ch = vec![0.0; n_samples];
        r.read_f64_into::<LittleEndian>(&mut ch)?;
        channels.push(ch);
    }
    Ok(TrajectorySeries { t0, dt, kind, names, channels, metadata })
}

/// CSV with a time column followed by one column per channel.
pub fn write_csv(path: impl AsRef<Path>, series: &TrajectorySeries) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t_s".to_string()];
    header.extend(series.names.iter().cloned());
    w.write_record(&header)?;
    for i in 0..series.len() {
        let mut row = vec![format!("{:e}", series.t0 + series.dt * i as f64)];
        row.extend(series.channels.iter().map(|c| format!("{:e}", c[i])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
