//! On-disk formats: metrics CSV, flat-parameter checkpoints, float formatting.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numkit::{LayerShape, ParamVector};

/// Per-epoch telemetry, one row of `metrics.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    /// 0-based, counting DP initialisation epochs.
    pub epoch: usize,
    pub goal: usize,
    /// `exp(H(p))` of the distribution the goal was drawn from.
    pub eff_skills: f64,
    pub mean_reward: f64,
    pub disc_loss: f64,
    /// DP vector after this epoch's update; `None` for other strategies.
    pub dp: Option<Vec<f64>>,
    /// Distribution the goal was drawn from.
    pub p_goal: Vec<f64>,
    /// Cumulative selections per goal, including this epoch.
    pub counts: Vec<u64>,
}

/// `printf("%.9g")`: nine significant digits, trailing zeros removed,
/// scientific notation outside `1e-4 <= |x| < 1e9`.
pub fn format_g9(x: f64) -> String {
    const PRECISION: i32 = 9;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.into();
    }
    let sci = format!("{:.*e}", (PRECISION - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..PRECISION).contains(&exp) {
        let fixed = format!("{:.*}", (PRECISION - 1 - exp) as usize, x);
        strip_zeros(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", strip_zeros(mantissa), exp.abs())
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn metrics_header(num_goals: usize) -> Vec<String> {
    let mut cols: Vec<String> = ["epoch", "goal", "eff_skills", "mean_reward", "disc_loss"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for prefix in ["dp", "p", "count"] {
        cols.extend((0..num_goals).map(|g| format!("{prefix}_{g}")));
    }
    cols
}

pub fn write_metrics<W: Write>(out: W, num_goals: usize, records: &[EpochRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(metrics_header(num_goals))?;
    for r in records {
        let mut row = vec![
            r.epoch.to_string(),
            r.goal.to_string(),
            format_g9(r.eff_skills),
            format_g9(r.mean_reward),
            format_g9(r.disc_loss),
        ];
        match &r.dp {
            Some(dp) => row.extend(dp.iter().map(|&v| format_g9(v))),
            None => row.extend(std::iter::repeat_n(String::new(), num_goals)),
        }
        row.extend(r.p_goal.iter().map(|&v| format_g9(v)));
        row.extend(r.counts.iter().map(|c| c.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("metrics", e))?;
    Ok(())
}

/// Parses `metrics.csv`, checking the header against the expected schema.
pub fn read_metrics(path: &Path) -> Result<Vec<EpochRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let corrupt = |detail: String| Error::Format {
        what: format!("metrics file {}", path.display()),
        detail,
    };
    if header.len() < 5 || !(header.len() - 5).is_multiple_of(3) {
        return Err(corrupt(format!("unexpected column count {}", header.len())));
    }
    let num_goals = (header.len() - 5) / 3;
    if header != metrics_header(num_goals) {
        return Err(corrupt("header does not match the metrics schema".into()));
    }
    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let field = |k: usize| -> Result<f64> {
            row[k]
                .parse::<f64>()
                .map_err(|e| corrupt(format!("row {}, column {}: {e}", i + 1, header[k])))
        };
        let int = |k: usize| -> Result<u64> {
            row[k]
                .parse::<u64>()
                .map_err(|e| corrupt(format!("row {}, column {}: {e}", i + 1, header[k])))
        };
        let dp_cols = 5..5 + num_goals;
        let dp = if dp_cols.clone().all(|k| row[k].is_empty()) {
            None
        } else {
            Some(dp_cols.map(field).collect::<Result<Vec<_>>>()?)
        };
        records.push(EpochRecord {
            epoch: int(0)? as usize,
            goal: int(1)? as usize,
            eff_skills: field(2)?,
            mean_reward: field(3)?,
            disc_loss: field(4)?,
            dp,
            p_goal: (5 + num_goals..5 + 2 * num_goals)
                .map(field)
                .collect::<Result<_>>()?,
            counts: (5 + 2 * num_goals..5 + 3 * num_goals)
                .map(int)
                .collect::<Result<_>>()?,
        });
    }
    Ok(records)
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"SKF1";

/// `SKF1`, layer count (u32), `(fan_in, fan_out)` per layer (u32 each), then
/// the raw parameters as f64. Everything little-endian.
pub fn encode_checkpoint(params: &ParamVector) -> Vec<u8> {
    let layout = params.layout();
    let mut out = Vec::with_capacity(8 + 8 * layout.len() + 8 * params.len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(layout.len() as u32).to_le_bytes());
    for shape in layout {
        out.extend_from_slice(&(shape.fan_in as u32).to_le_bytes());
        out.extend_from_slice(&(shape.fan_out as u32).to_le_bytes());
    }
    for v in params.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ParamVector> {
    let corrupt = |detail: &str| Error::Format {
        what: "checkpoint".into(),
        detail: detail.into(),
    };
    let mut cursor = bytes;
    let mut take = |n: usize| -> Result<&[u8]> {
        if cursor.len() < n {
            return Err(corrupt("truncated"));
        }
        let (head, tail) = cursor.split_at(n);
        cursor = tail;
        Ok(head)
    };
    if take(4)? != CHECKPOINT_MAGIC {
        return Err(corrupt("bad magic bytes"));
    }
    let read_u32 = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("four bytes")) as usize;
    let layers = read_u32(take(4)?);
    let mut layout = Vec::with_capacity(layers.min(1024));
    for _ in 0..layers {
        let fan_in = read_u32(take(4)?);
        let fan_out = read_u32(take(4)?);
        layout.push(LayerShape { fan_in, fan_out });
    }
    let count: usize = layout.iter().map(LayerShape::num_params).sum();
    let raw = take(
        count
            .checked_mul(8)
            .ok_or_else(|| corrupt("layout too large"))?,
    )?;
    if !cursor.is_empty() {
        return Err(corrupt("trailing bytes after parameters"));
    }
    let values = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes")))
        .collect();
    ParamVector::new(values, layout)
}

pub fn write_checkpoint(path: &Path, params: &ParamVector) -> Result<()> {
    std::fs::write(path, encode_checkpoint(params)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<ParamVector> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g9_matches_printf() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (20.0, "20"),
            (-2.5, "-2.5"),
            (1.0 / 3.0, "0.333333333"),
            (2.0 / 3.0, "0.666666667"),
            (123456789.0, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (std::f64::consts::PI * 1e10, "3.14159265e+10"),
            (19.999999999999, "20"),
            (1e-300, "1e-300"),
        ];
        for (x, want) in cases {
            assert_eq!(format_g9(x), want, "formatting {x}");
        }
    }

    #[test]
    fn g9_round_trips_to_nine_digits() {
        for x in [0.123456789123, 98765.4321012, -7.77e-7, 5.5e12] {
            let back: f64 = format_g9(x).parse().unwrap();
            assert!(((back - x) / x).abs() < 1e-8);
        }
    }

    #[test]
    fn header_layout() {
        assert_eq!(
            metrics_header(2).join(","),
            "epoch,goal,eff_skills,mean_reward,disc_loss,dp_0,dp_1,p_0,p_1,count_0,count_1"
        );
    }

    #[test]
    fn metrics_round_trip() {
        let records = vec![
            EpochRecord {
                epoch: 0,
                goal: 1,
                eff_skills: 2.0,
                mean_reward: -0.25,
                disc_loss: 0.612345678,
                dp: Some(vec![0.0, 0.5]),
                p_goal: vec![0.5, 0.5],
                counts: vec![0, 1],
            },
            EpochRecord {
                epoch: 1,
                goal: 0,
                eff_skills: 1.0,
                mean_reward: 0.125,
                disc_loss: 0.5,
                dp: None,
                p_goal: vec![1.0, 0.0],
                counts: vec![1, 1],
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        let mut buf = Vec::new();
        write_metrics(&mut buf, 2, &records).unwrap();
        std::fs::write(&path, &buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("\n1,0,1,0.125,0.5,,,1,0,1,1\n"));
        assert_eq!(read_metrics(&path).unwrap(), records);
    }

    #[test]
    fn corrupt_metrics_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        std::fs::write(&path, "epoch,goal\n0,1\n").unwrap();
        assert!(read_metrics(&path).is_err());
        std::fs::write(
            &path,
            format!("{}\n0,x,1,1,1,,1,0\n", metrics_header(1).join(",")),
        )
        .unwrap();
        assert!(read_metrics(&path).is_err());
        assert!(read_metrics(&dir.path().join("missing.csv")).is_err());
    }

    #[test]
    fn checkpoint_round_trip_and_corruption() {
        let layout = vec![
            LayerShape {
                fan_in: 2,
                fan_out: 3,
            },
            LayerShape {
                fan_in: 3,
                fan_out: 1,
            },
        ];
        let values: Vec<f64> = (0..13).map(|i| i as f64 * 0.5 - 2.0).collect();
        let params = ParamVector::new(values, layout).unwrap();
        let bytes = encode_checkpoint(&params);
        assert_eq!(&bytes[..4], b"SKF1");
        assert_eq!(bytes.len(), 4 + 4 + 2 * 8 + 13 * 8);
        assert_eq!(decode_checkpoint(&bytes).unwrap(), params);

        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(decode_checkpoint(&bad_magic).is_err());
        assert!(decode_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        let mut trailing = bytes.clone();
        trailing.push(0);
        assert!(decode_checkpoint(&trailing).is_err());
    }
}
