//! CSV formats for traces, heart-rate series, beats, ROI sidecars and
//! questionnaire data. Every reader requires the header row and reports
//! errors with the source name and line.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use csv::{ReaderBuilder, StringRecord, Trim};

use crate::analytics::{MappingEntry, SpgqMapping, SpgqResponse, Subscale, LIKERT_MAX, N_ITEMS};
use crate::error::{Error, Result};
use crate::hr::{HrSample, HrTrace};
use crate::session::Condition;
use crate::signal::{Roi, Sample, Trace};
use crate::validation::RrSeries;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

/// Opens `path` for buffered reading.
pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

struct Table<R: Read> {
    reader: csv::Reader<R>,
    source: String,
}

impl<R: Read> Table<R> {
    fn new(input: R, source: &str, expected: &[&str]) -> Result<Self> {
        let mut reader = ReaderBuilder::new().has_headers(true).trim(Trim::All).from_reader(input);
        let headers = reader.headers().map_err(|e| csv_error(source, e))?.clone();
        if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
            return Err(Error::parse_in(source, 1, "missing header row"));
        }
        let found: Vec<&str> = headers.iter().collect();
        if found != expected {
            return Err(Error::parse_in(
                source,
                1,
                format!("expected header `{}`, found `{}`", expected.join(","), found.join(",")),
            ));
        }
        Ok(Table { reader, source: source.to_string() })
    }

    /// Remaining records with their line numbers.
    fn rows(&mut self) -> impl Iterator<Item = Result<(u64, StringRecord)>> + '_ {
        let source = self.source.clone();
        self.reader.records().map(move |r| {
            let rec = r.map_err(|e| csv_error(&source, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            Ok((line, rec))
        })
    }
}

fn csv_error(source: &str, e: csv::Error) -> Error {
    let line = e.position().map_or(1, |p| p.line());
    Error::parse_in(source, line, e.to_string())
}

fn field<T: FromStr>(source: &str, line: u64, rec: &StringRecord, i: usize, name: &str) -> Result<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse()
        .map_err(|_| Error::parse_in(source, line, format!("invalid {name} {raw:?}")))
}

fn finite(source: &str, line: u64, v: f64, name: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::parse_in(source, line, format!("{name} is not finite")))
    }
}

fn ms_to_s(ms: i64) -> f64 {
    ms as f64 / 1000.0
}

fn s_to_ms(t: f64) -> i64 {
    (t * 1000.0).round() as i64
}

fn strictly_increasing(source: &str, line: u64, prev: Option<i64>, t_ms: i64) -> Result<()> {
    match prev {
        Some(p) if t_ms <= p => Err(Error::parse_in(
            source,
            line,
            format!("timestamp {t_ms} ms does not increase past {p} ms"),
        )),
        _ => Ok(()),
    }
}

/// Reads `t_ms,value`.
pub fn read_trace_csv<R: Read>(input: R, source: &str, nominal_fs: f64) -> Result<Trace> {
    let mut table = Table::new(input, source, &["t_ms", "value"])?;
    let mut samples = Vec::new();
    let mut prev = None;
    for row in table.rows() {
        let (line, rec) = row?;
        let t_ms: i64 = field(source, line, &rec, 0, "t_ms")?;
        let v = finite(source, line, field(source, line, &rec, 1, "value")?, "value")?;
        strictly_increasing(source, line, prev, t_ms)?;
        prev = Some(t_ms);
        samples.push(Sample { t: ms_to_s(t_ms), v });
    }
    Trace::new(samples, nominal_fs)
}

pub fn write_trace_csv<W: Write>(mut out: W, trace: &Trace) -> Result<()> {
    writeln!(out, "t_ms,value")?;
    for s in trace.samples() {
        writeln!(out, "{},{:.6}", s_to_ms(s.t), s.v)?;
    }
    Ok(())
}

/// Reads `t_ms,bpm,confidence`.
pub fn read_hr_csv<R: Read>(input: R, source: &str) -> Result<HrTrace> {
    let mut table = Table::new(input, source, &["t_ms", "bpm", "confidence"])?;
    let mut samples = Vec::new();
    let mut prev = None;
    for row in table.rows() {
        let (line, rec) = row?;
        let t_ms: i64 = field(source, line, &rec, 0, "t_ms")?;
        let bpm = finite(source, line, field(source, line, &rec, 1, "bpm")?, "bpm")?;
        let confidence = finite(source, line, field(source, line, &rec, 2, "confidence")?, "confidence")?;
        strictly_increasing(source, line, prev, t_ms)?;
        prev = Some(t_ms);
        samples.push(HrSample { t: ms_to_s(t_ms), bpm, confidence });
        HrTrace::new(vec![*samples.last().unwrap()]).map_err(|e| Error::parse_in(source, line, e.to_string()))?;
    }
    HrTrace::new(samples)
}

/// Writes `t_ms,bpm,confidence` with four decimals.
pub fn write_hr_csv<W: Write>(mut out: W, hr: &HrTrace) -> Result<()> {
    writeln!(out, "t_ms,bpm,confidence")?;
    for s in hr.samples() {
        writeln!(out, "{},{:.4},{:.4}", s_to_ms(s.t), s.bpm, s.confidence)?;
    }
    Ok(())
}

/// Reads the single-column `beat_t_ms` file.
pub fn read_beats_csv<R: Read>(input: R, source: &str) -> Result<RrSeries> {
    let mut table = Table::new(input, source, &["beat_t_ms"])?;
    let mut beats = Vec::new();
    let mut prev = None;
    for row in table.rows() {
        let (line, rec) = row?;
        let t_ms: i64 = field(source, line, &rec, 0, "beat_t_ms")?;
        strictly_increasing(source, line, prev, t_ms)?;
        prev = Some(t_ms);
        beats.push(ms_to_s(t_ms));
    }
    RrSeries::new(beats)
}

pub fn write_beats_csv<W: Write>(mut out: W, beats: &[f64]) -> Result<()> {
    writeln!(out, "beat_t_ms")?;
    for t in beats {
        writeln!(out, "{}", s_to_ms(*t))?;
    }
    Ok(())
}

/// Per-frame regions of interest. Frames without an entry reuse the most
/// recent earlier one.
#[derive(Debug, Clone, PartialEq)]
pub struct RoiTrack {
    entries: Vec<(usize, Roi)>,
}

impl RoiTrack {
    pub fn new(mut entries: Vec<(usize, Roi)>) -> Result<Self> {
        entries.sort_by_key(|(i, _)| *i);
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Config(format!("frame {} has two ROIs", w[0].0)));
        }
        Ok(RoiTrack { entries })
    }

    pub fn roi_for(&self, frame_index: usize) -> Result<Roi> {
        let idx = self.entries.partition_point(|(i, _)| *i <= frame_index);
        match idx {
            0 => Err(Error::Bounds(format!("no ROI given at or before frame {frame_index}"))),
            i => Ok(self.entries[i - 1].1),
        }
    }
}

/// Reads `frame_index,x,y,w,h`.
pub fn read_roi_csv<R: Read>(input: R, source: &str) -> Result<RoiTrack> {
    let mut table = Table::new(input, source, &["frame_index", "x", "y", "w", "h"])?;
    let mut entries = Vec::new();
    for row in table.rows() {
        let (line, rec) = row?;
        let mut v = [0usize; 5];
        for (i, name) in ["frame_index", "x", "y", "w", "h"].iter().enumerate() {
            v[i] = field(source, line, &rec, i, name)?;
        }
        if v[3] == 0 || v[4] == 0 {
            return Err(Error::parse_in(source, line, "ROI width and height must be positive"));
        }
        if entries.iter().any(|(f, _)| *f == v[0]) {
            return Err(Error::parse_in(source, line, format!("duplicate frame_index {}", v[0])));
        }
        entries.push((v[0], Roi::new(v[1], v[2], v[3], v[4])));
    }
    if entries.is_empty() {
        return Err(Error::parse_in(source, 2, "ROI sidecar has no rows"));
    }
    RoiTrack::new(entries)
}

fn response_header() -> Vec<String> {
    let mut h: Vec<String> = ["group", "participant", "condition"].iter().map(|s| s.to_string()).collect();
    h.extend((1..=N_ITEMS).map(|i| format!("item_{i}")));
    h
}

/// Reads `group,participant,condition,item_1..item_21`.
pub fn read_responses_csv<R: Read>(input: R, source: &str) -> Result<Vec<SpgqResponse>> {
    let header = response_header();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = Table::new(input, source, &header_refs)?;
    let mut out = Vec::new();
    for row in table.rows() {
        let (line, rec) = row?;
        let condition: Condition = rec[2]
            .parse()
            .map_err(|e: Error| Error::parse_in(source, line, e.to_string()))?;
        let mut items = [0u8; N_ITEMS];
        for (i, item) in items.iter_mut().enumerate() {
            let v: u8 = field(source, line, &rec, 3 + i, &header[3 + i])?;
            if v > LIKERT_MAX {
                return Err(Error::parse_in(source, line, format!("item_{} = {v} outside 0..={LIKERT_MAX}", i + 1)));
            }
            *item = v;
        }
        out.push(SpgqResponse { group: rec[0].to_string(), participant: rec[1].to_string(), condition, items });
    }
    Ok(out)
}

pub fn write_responses_csv<W: Write>(mut out: W, responses: &[SpgqResponse]) -> Result<()> {
    writeln!(out, "{}", response_header().join(","))?;
    for r in responses {
        let items: Vec<String> = r.items.iter().map(u8::to_string).collect();
        writeln!(out, "{},{},{},{}", r.group, r.participant, r.condition, items.join(","))?;
    }
    Ok(())
}

fn parse_bool(raw: &str) -> Option<bool> {
    match raw.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" | "" => Some(false),
        _ => None,
    }
}

/// Reads `item,subscale,reversed`.
pub fn read_mapping_csv<R: Read>(input: R, source: &str) -> Result<SpgqMapping> {
    let mut table = Table::new(input, source, &["item", "subscale", "reversed"])?;
    let mut entries = Vec::new();
    for row in table.rows() {
        let (line, rec) = row?;
        let item: usize = field(source, line, &rec, 0, "item")?;
        let subscale: Subscale = rec[1]
            .parse()
            .map_err(|e: Error| Error::parse_in(source, line, e.to_string()))?;
        let reversed = parse_bool(rec.get(2).unwrap_or(""))
            .ok_or_else(|| Error::parse_in(source, line, format!("invalid reversed flag {:?}", &rec[2])))?;
        entries.push(MappingEntry { item, subscale, reversed });
    }
    SpgqMapping::new(entries, format!("mapping from {source}"))
}

pub fn write_mapping_csv<W: Write>(mut out: W, mapping: &SpgqMapping) -> Result<()> {
    writeln!(out, "item,subscale,reversed")?;
    for e in mapping.entries() {
        writeln!(out, "{},{},{}", e.item, e.subscale, e.reversed)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn location(e: Error) -> String {
        match e {
            Error::Parse { location, .. } => location,
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn trace_round_trip() {
        let trace = Trace::from_uniform(0.0, 30.0, &[0.5, -0.25, 1.0, 0.125]).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &trace).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text, "t_ms,value\n0,0.500000\n33,-0.250000\n67,1.000000\n100,0.125000\n");
        let back = read_trace_csv(&buf[..], "t.csv", 30.0).unwrap();
        assert_eq!(back.len(), 4);
        assert_eq!(back.samples()[2].t, 0.067);
        assert_eq!(back.values(), trace.values());
    }

    #[test]
    fn trace_errors_carry_line() {
        assert_eq!(location(read_trace_csv(&b""[..], "e.csv", 30.0).unwrap_err()), "e.csv line 1");
        assert_eq!(location(read_trace_csv(&b"t,value\n0,1\n"[..], "h.csv", 30.0).unwrap_err()), "h.csv line 1");
        let bad = b"t_ms,value\n0,1.0\n33,abc\n";
        assert_eq!(location(read_trace_csv(&bad[..], "b.csv", 30.0).unwrap_err()), "b.csv line 3");
        let dec = b"t_ms,value\n0.5,1.0\n";
        assert_eq!(location(read_trace_csv(&dec[..], "d.csv", 30.0).unwrap_err()), "d.csv line 2");
        let back = b"t_ms,value\n0,1\n40,1\n40,2\n";
        assert_eq!(location(read_trace_csv(&back[..], "r.csv", 30.0).unwrap_err()), "r.csv line 4");
        let short = b"t_ms,value\n0,1\n40\n";
        assert_eq!(location(read_trace_csv(&short[..], "s.csv", 30.0).unwrap_err()), "s.csv line 3");
        let nan = b"t_ms,value\n0,NaN\n";
        assert!(read_trace_csv(&nan[..], "n.csv", 30.0).is_err());
    }

    #[test]
    fn hr_round_trip_four_decimals() {
        let hr = HrTrace::new(vec![
            HrSample { t: 3.0, bpm: 72.123456, confidence: 0.5 },
            HrSample { t: 4.0, bpm: 73.0, confidence: 1.0 },
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_hr_csv(&mut buf, &hr).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "t_ms,bpm,confidence\n3000,72.1235,0.5000\n4000,73.0000,1.0000\n");
        let back = read_hr_csv(&buf[..], "hr.csv").unwrap();
        assert_eq!(back.samples()[0].bpm, 72.1235);
        let out_of_band = b"t_ms,bpm,confidence\n0,70,1\n1000,250,1\n";
        assert_eq!(location(read_hr_csv(&out_of_band[..], "x.csv").unwrap_err()), "x.csv line 3");
    }

    #[test]
    fn beats_file() {
        let rr = read_beats_csv(&b"beat_t_ms\n0\n1000\n2000\n3000\n"[..], "b.csv").unwrap();
        assert_eq!(rr.beats(), &[0.0, 1.0, 2.0, 3.0]);
        let mut buf = Vec::new();
        write_beats_csv(&mut buf, rr.beats()).unwrap();
        assert_eq!(buf, b"beat_t_ms\n0\n1000\n2000\n3000\n");
    }

    #[test]
    fn roi_reuse_and_gaps() {
        let track = read_roi_csv(&b"frame_index,x,y,w,h\n0,1,2,3,4\n5,10,10,8,8\n"[..], "r.csv").unwrap();
        assert_eq!(track.roi_for(0).unwrap(), Roi::new(1, 2, 3, 4));
        assert_eq!(track.roi_for(4).unwrap(), Roi::new(1, 2, 3, 4));
        assert_eq!(track.roi_for(99).unwrap(), Roi::new(10, 10, 8, 8));
        let late = read_roi_csv(&b"frame_index,x,y,w,h\n3,0,0,1,1\n"[..], "r.csv").unwrap();
        assert!(matches!(late.roi_for(2), Err(Error::Bounds(_))));
        let dup = b"frame_index,x,y,w,h\n0,0,0,1,1\n0,0,0,2,2\n";
        assert_eq!(location(read_roi_csv(&dup[..], "d.csv").unwrap_err()), "d.csv line 3");
        assert!(read_roi_csv(&b"frame_index,x,y,w,h\n"[..], "e.csv").is_err());
    }

    #[test]
    fn responses_round_trip() {
        let r = SpgqResponse {
            group: "3".into(),
            participant: "p7".into(),
            condition: Condition::HrOthers,
            items: std::array::from_fn(|i| (i % 5) as u8),
        };
        let mut buf = Vec::new();
        write_responses_csv(&mut buf, std::slice::from_ref(&r)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("group,participant,condition,item_1,item_2,"));
        assert!(text.lines().next().unwrap().ends_with(",item_21"));
        assert_eq!(read_responses_csv(&buf[..], "r.csv").unwrap(), vec![r]);
        let bad = text.replace(",hr_others,", ",hr_maybe,");
        assert_eq!(location(read_responses_csv(bad.as_bytes(), "r.csv").unwrap_err()), "r.csv line 2");
        let big = text.replacen(",0,1,", ",7,1,", 1);
        assert!(read_responses_csv(big.as_bytes(), "r.csv").is_err());
    }

    #[test]
    fn mapping_round_trip() {
        let m = SpgqMapping::placeholder();
        let mut buf = Vec::new();
        write_mapping_csv(&mut buf, &m).unwrap();
        let back = read_mapping_csv(&buf[..], "m.csv").unwrap();
        assert_eq!(back.entries(), m.entries());
        let text = String::from_utf8(buf).unwrap().replace("3,empathy,false", "3,empathy,yes");
        assert!(read_mapping_csv(text.as_bytes(), "m.csv").unwrap().entries()[2].reversed);
        let short: String = text.lines().take(21).map(|l| format!("{l}\n")).collect();
        assert!(matches!(read_mapping_csv(short.as_bytes(), "m.csv"), Err(Error::Config(_))));
    }
}
