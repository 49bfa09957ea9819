//! CSV interchange format for CSI series.
//!
//! Header `ts_us,a1,..,aN,p1,..,pN`, one row per frame, LF line endings.
//! Values are printed with the shortest representation that parses back to
//! the same `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{CsiFrame, CsiSeries, PipelineError, DEFAULT_RATE_HZ};

fn header(n: usize) -> String {
    let mut cols = vec!["ts_us".to_string()];
    cols.extend((1..=n).map(|i| format!("a{i}")));
    cols.extend((1..=n).map(|i| format!("p{i}")));
    cols.join(",")
}

pub fn write_csv<W: Write>(series: &CsiSeries, out: W) -> Result<(), PipelineError> {
    series.validate()?;
    let mut w = BufWriter::new(out);
    w.write_all(header(series.subcarriers()).as_bytes())?;
    w.write_all(b"\n")?;
    for (i, frame) in series.frames.iter().enumerate() {
        if frame.amplitudes.iter().any(|a| !a.is_finite() || *a < 0.0)
            || frame.phases.iter().any(|p| !p.is_finite())
        {
            return Err(PipelineError::InvalidSeries(format!(
                "frame {i} has a negative or non-finite value"
            )));
        }
        write!(w, "{}", frame.timestamp_us)?;
        for v in frame.amplitudes.iter().chain(&frame.phases) {
            // Display never uses exponent notation for f64
            write!(w, ",{v}")?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(series: &CsiSeries, path: impl AsRef<Path>) -> Result<(), PipelineError> {
    write_csv(series, File::create(path)?)
}

/// Row-by-row reader; rows are parsed independently so a caller can skip
/// malformed ones.
pub struct FrameReader<R: Read> {
    records: csv::StringRecordsIntoIter<R>,
    subcarriers: usize,
    line: usize,
}

impl<R: Read> FrameReader<R> {
    /// Reads and checks the header.
    pub fn new(input: R) -> Result<Self, PipelineError> {
        let mut records = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(input)
            .into_records();
        let head = match records.next() {
            None => {
                return Err(PipelineError::Csv {
                    line: 1,
                    msg: "missing header".into(),
                })
            }
            Some(r) => r.map_err(|e| csv_err(1, e))?,
        };
        let cols = head.len();
        if cols < 3 || (cols - 1) % 2 != 0 {
            return Err(PipelineError::Csv {
                line: 1,
                msg: format!("header has {cols} columns; expected ts_us plus 2N columns"),
            });
        }
        let n = (cols - 1) / 2;
        let joined = head.iter().collect::<Vec<_>>().join(",");
        if joined != header(n) {
            return Err(PipelineError::Csv {
                line: 1,
                msg: format!("unexpected header; expected `ts_us,a1..a{n},p1..p{n}`"),
            });
        }
        Ok(Self {
            records,
            subcarriers: n,
            line: 1,
        })
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    /// Line number of the row returned last.
    pub fn line(&self) -> usize {
        self.line
    }

    fn parse(&self, rec: csv::StringRecord) -> Result<CsiFrame, PipelineError> {
        let (line, n) = (self.line, self.subcarriers);
        let cols = 2 * n + 1;
        if rec.len() != cols {
            return Err(PipelineError::Csv {
                line,
                msg: format!("expected {cols} columns, found {}", rec.len()),
            });
        }
        let timestamp_us: u64 = rec[0].parse().map_err(|_| PipelineError::Csv {
            line,
            msg: format!("bad timestamp {:?}", &rec[0]),
        })?;
        let mut values = Vec::with_capacity(2 * n);
        for (j, field) in rec.iter().enumerate().skip(1) {
            let v: f64 = field.parse().map_err(|_| PipelineError::Csv {
                line,
                msg: format!("column {}: bad number {field:?}", j + 1),
            })?;
            if !v.is_finite() || (j <= n && v < 0.0) {
                return Err(PipelineError::Csv {
                    line,
                    msg: format!("column {}: value {field} out of range", j + 1),
                });
            }
            values.push(v);
        }
        let phases = values.split_off(n);
        Ok(CsiFrame {
            timestamp_us,
            amplitudes: values,
            phases,
        })
    }
}

impl<R: Read> Iterator for FrameReader<R> {
    type Item = Result<CsiFrame, PipelineError>;

    fn next(&mut self) -> Option<Self::Item> {
        let rec = self.records.next()?;
        self.line += 1;
        Some(rec.map_err(|e| csv_err(self.line, e)).and_then(|r| self.parse(r)))
    }
}

/// Parses a CSI CSV document. The packet rate is inferred from the median
/// timestamp step.
pub fn read_csv<R: Read>(input: R) -> Result<CsiSeries, PipelineError> {
    let mut reader = FrameReader::new(input)?;
    let mut frames: Vec<CsiFrame> = Vec::new();
    while let Some(frame) = reader.next() {
        let frame = frame?;
        if let Some(prev) = frames.last() {
            if frame.timestamp_us <= prev.timestamp_us {
                return Err(PipelineError::Csv {
                    line: reader.line(),
                    msg: format!("timestamp {} does not increase", frame.timestamp_us),
                });
            }
        }
        frames.push(frame);
    }
    let rate_hz = infer_rate(&frames);
    Ok(CsiSeries { rate_hz, frames })
}

pub fn read_csv_file(path: impl AsRef<Path>) -> Result<CsiSeries, PipelineError> {
    read_csv(BufReader::new(File::open(path)?))
}

fn csv_err(line: usize, e: csv::Error) -> PipelineError {
    PipelineError::Csv {
        line,
        msg: e.to_string(),
    }
}

fn infer_rate(frames: &[CsiFrame]) -> f64 {
    if frames.len() < 2 {
        return DEFAULT_RATE_HZ;
    }
    let mut steps: Vec<u64> = frames
        .windows(2)
        .map(|w| w[1].timestamp_us - w[0].timestamp_us)
        .collect();
    steps.sort_unstable();
    let median = steps[steps.len() / 2] as f64;
    // round to the nearest millihertz to absorb microsecond truncation
    (1.0e6 / median * 1000.0).round() / 1000.0
}
