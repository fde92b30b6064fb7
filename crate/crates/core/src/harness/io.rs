//! Transcript persistence (JSONL) and replay input (CSV).
//!
//! The JSONL layout is one `{"meta": ...}` header line followed by one round
//! object per line, `{"n":1,"x":[...],"p":[...],"gamma":...,"y":...,...}`,
//! with reals in serde_json's shortest round-trip form.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::metrics::{Round, Transcript, TranscriptMeta};

#[derive(serde::Serialize, Deserialize)]
struct MetaLine {
    meta: TranscriptMeta,
}

pub fn write_transcript_jsonl<W: Write>(writer: W, t: &Transcript) -> Result<()> {
    let mut w = BufWriter::new(writer);
    serde_json::to_writer(
        &mut w,
        &MetaLine {
            meta: t.meta.clone(),
        },
    )?;
    w.write_all(b"\n")?;
    for round in &t.rounds {
        serde_json::to_writer(&mut w, round)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_transcript<P: AsRef<Path>>(path: P, t: &Transcript) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_transcript_jsonl(file, t)
}

pub fn read_transcript_jsonl<P: AsRef<Path>>(path: P) -> Result<Transcript> {
    let file = std::fs::File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    let mut meta = TranscriptMeta::default();
    let mut rounds = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 {
            if let Ok(m) = serde_json::from_str::<MetaLine>(&line) {
                meta = m.meta;
                continue;
            }
        }
        let round: Round = serde_json::from_str(&line).map_err(|e| {
            Error::Input(format!(
                "{}:{}: bad round record: {e}",
                path.as_ref().display(),
                i + 1
            ))
        })?;
        rounds.push(round);
    }
    let t = Transcript { meta, rounds };
    t.validate()?;
    Ok(t)
}

/// Reads replay data: columns x0,...,xk,y with an optional header row.
pub fn read_xy_csv<P: AsRef<Path>>(path: P) -> Result<Vec<(Vec<f64>, usize)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_path(path.as_ref())
        .map_err(|e| Error::Input(format!("{}: {e}", path.as_ref().display())))?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Input(format!("csv row {}: {e}", i + 1)))?;
        if record.len() < 2 {
            return Err(Error::Input(format!(
                "csv row {} has {} columns, need at least x and y",
                i + 1,
                record.len()
            )));
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(values) => {
                let (x, y) = values.split_at(values.len() - 1);
                let y_f = y[0];
                if y_f < 0.0 || y_f.fract() != 0.0 {
                    return Err(Error::Input(format!(
                        "csv row {}: outcome {y_f} is not a class index",
                        i + 1
                    )));
                }
                out.push((x.to_vec(), y_f as usize));
            }
            Err(_) if i == 0 => continue, // header row
            Err(e) => {
                return Err(Error::Input(format!("csv row {}: {e}", i + 1)));
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Input("replay file has no data rows".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decision::Gamma;
    use std::io::Write as _;

    fn sample_transcript() -> Transcript {
        let rounds = (1..=3)
            .map(|n| Round {
                n,
                x: vec![0.25 * n as f64, -0.1],
                p: vec![0.4, 0.6],
                gamma: if n == 2 { Some(Gamma::Scalar(0.75)) } else { None },
                y: (n % 2) as usize,
                loss: Some(0.5),
                cap: None,
                cert: Some(1e-10),
                g_samp: None,
                d_samp: None,
                d_mean_loss: None,
            })
            .collect();
        Transcript {
            meta: TranscriptMeta {
                kernel: Some(crate::kernel::KernelSpec::gaussian(1.0)),
                seed: Some(42),
                stream: Some("bernoulli(0.5)".into()),
                mode: Some("forecast".into()),
                m: Some(2),
                ..Default::default()
            },
            rounds,
        }
    }

    #[test]
    fn jsonl_round_trip_is_lossless() {
        let t = sample_transcript();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        save_transcript(&path, &t).unwrap();
        let back = read_transcript_jsonl(&path).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn csv_replay_skips_header_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "x0,x1,y").unwrap();
        writeln!(f, "0.5,-1.0,1").unwrap();
        writeln!(f, "0.25,0.0,0").unwrap();
        drop(f);
        let rows = read_xy_csv(&path).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0], (vec![0.5, -1.0], 1));
        assert_eq!(rows[1], (vec![0.25, 0.0], 0));
    }
}
