//! Binary PPM (P6) frames and ROI channel averaging.

use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An 8-bit RGB image, row-major, three bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    rgb: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, rgb: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Config(format!(
                "frame dimensions must be positive, got {width}x{height}"
            )));
        }
        if rgb.len() != width * height * 3 {
            return Err(Error::Config(format!(
                "frame {width}x{height} needs {} bytes, got {}",
                width * height * 3,
                rgb.len()
            )));
        }
        Ok(Frame { width, height, rgb })
    }

    /// A frame filled with a single color.
    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Result<Self> {
        let rgb = color.iter().copied().cycle().take(width * height * 3).collect();
        Frame::new(width, height, rgb)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn rgb(&self) -> &[u8] {
        &self.rgb
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, color: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.rgb[i..i + 3].copy_from_slice(&color);
    }

    /// Encodes as binary PPM with a minimal header.
    pub fn to_ppm(&self) -> Vec<u8> {
        let header = format!("P6\n{} {}\n255\n", self.width, self.height);
        let mut out = Vec::with_capacity(header.len() + self.rgb.len());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(&self.rgb);
        out
    }
}

/// Parses exactly one binary PPM image. Trailing bytes are an error.
pub fn parse_frame(bytes: &[u8]) -> Result<Frame> {
    let (frame, used) = parse_frame_prefix(bytes)?;
    if used != bytes.len() {
        return Err(Error::parse_at_offset(
            used,
            format!("{} trailing bytes after pixel payload", bytes.len() - used),
        ));
    }
    Ok(frame)
}

/// Parses one PPM image from the front of `bytes`, returning the frame and
/// the number of bytes consumed. Used for concatenated frame streams.
pub fn parse_frame_prefix(bytes: &[u8]) -> Result<(Frame, usize)> {
    if bytes.len() < 2 {
        return Err(Error::parse_at_offset(0, "truncated header: missing magic"));
    }
    if &bytes[..2] != b"P6" {
        return Err(Error::parse_at_offset(0, "unsupported magic"));
    }
    let mut cursor = HeaderCursor { bytes, pos: 2 };
    let (width, _) = cursor.number("width")?;
    let (height, _) = cursor.number("height")?;
    let (maxval, maxval_at) = cursor.number("maxval")?;
    if maxval != 255 {
        return Err(Error::parse_at_offset(
            maxval_at,
            format!("unsupported maxval {maxval}, expected 255"),
        ));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(cursor.pos) {
        Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
        _ => {
            return Err(Error::parse_at_offset(
                cursor.pos,
                "expected single whitespace before pixel payload",
            ))
        }
    }
    if width == 0 || height == 0 {
        return Err(Error::parse_at_offset(2, "zero image dimension"));
    }
    let start = cursor.pos;
    let needed = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| Error::parse_at_offset(2, "image dimensions overflow"))?;
    let available = bytes.len() - start;
    if available < needed {
        return Err(Error::parse_at_offset(
            start + available,
            format!("truncated pixel payload: expected {needed} bytes from offset {start}, found {available}"),
        ));
    }
    let frame = Frame {
        width,
        height,
        rgb: bytes[start..start + needed].to_vec(),
    };
    Ok((frame, start + needed))
}

/// Reads the next PPM image from a byte stream such as a pipe. Returns
/// `None` at a clean end of stream (no bytes before the magic).
pub fn read_frame<R: Read>(input: &mut R) -> Result<Option<Frame>> {
    let mut buf = Vec::with_capacity(32);
    let mut byte = [0u8; 1];
    let mut numbers: Vec<usize> = Vec::with_capacity(3);
    let mut digits: Option<usize> = None;
    let mut in_comment = false;
    loop {
        match input.read(&mut byte) {
            Ok(0) if buf.is_empty() => return Ok(None),
            Ok(0) => return parse_frame(&buf).map(Some),
            Ok(_) => {}
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(Error::Io(e.to_string())),
        }
        let b = byte[0];
        buf.push(b);
        if buf.len() <= 2 {
            continue;
        }
        if in_comment {
            in_comment = b != b'\n' && b != b'\r';
            continue;
        }
        if b.is_ascii_digit() {
            let d = (b - b'0') as usize;
            digits = Some(digits.unwrap_or(0).saturating_mul(10).saturating_add(d));
            continue;
        }
        if let Some(v) = digits.take() {
            numbers.push(v);
        }
        if b == b'#' {
            in_comment = true;
        } else if !b.is_ascii_whitespace() || numbers.len() == 3 {
            break;
        }
    }
    if numbers.len() == 3 {
        let needed = numbers[0].saturating_mul(numbers[1]).saturating_mul(3);
        // a bogus header must not trigger a huge allocation; let the parser
        // reject it first
        if numbers[2] == 255 && numbers[0] > 0 && numbers[1] > 0 && needed < (1 << 30) {
            let start = buf.len();
            buf.resize(start + needed, 0);
            let mut filled = 0;
            while filled < needed {
                match input.read(&mut buf[start + filled..]) {
                    Ok(0) => break,
                    Ok(n) => filled += n,
                    Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                    Err(e) => return Err(Error::Io(e.to_string())),
                }
            }
            buf.truncate(start + filled);
        }
    }
    parse_frame(&buf).map(Some)
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    /// Returns the value and the offset of its first digit.
    fn number(&mut self, field: &str) -> Result<(usize, usize)> {
        let before = self.pos;
        self.skip_space_and_comments();
        if self.pos == before {
            return Err(Error::parse_at_offset(
                self.pos,
                format!("expected whitespace before {field}"),
            ));
        }
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::parse_at_offset(start, format!("expected decimal {field}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .map(|v| (v, start))
            .ok_or_else(|| Error::parse_at_offset(start, format!("{field} out of range")))
    }
}

/// Rectangular face region in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roi {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Roi {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Roi { x, y, w, h }
    }

    pub fn check_inside(&self, frame: &Frame) -> Result<()> {
        if self.w == 0 || self.h == 0 {
            return Err(Error::Bounds(format!("empty ROI {}x{}", self.w, self.h)));
        }
        if self.x + self.w > frame.width() || self.y + self.h > frame.height() {
            return Err(Error::Bounds(format!(
                "ROI ({}, {}, {}, {}) exceeds frame {}x{}",
                self.x,
                self.y,
                self.w,
                self.h,
                frame.width(),
                frame.height()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    R,
    #[default]
    G,
    B,
}

impl Channel {
    fn offset(self) -> usize {
        match self {
            Channel::R => 0,
            Channel::G => 1,
            Channel::B => 2,
        }
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "r" | "red" => Ok(Channel::R),
            "g" | "green" => Ok(Channel::G),
            "b" | "blue" => Ok(Channel::B),
            other => Err(Error::Config(format!("unknown channel {other:?}"))),
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::R => "r",
            Channel::G => "g",
            Channel::B => "b",
        })
    }
}

/// Mean of one channel over the ROI. The integer sum is exact, so the result
/// is the correctly rounded rational mean.
pub fn mean_channel(frame: &Frame, roi: &Roi, channel: Channel) -> Result<f64> {
    roi.check_inside(frame)?;
    let c = channel.offset();
    let mut sum: u64 = 0;
    for y in roi.y..roi.y + roi.h {
        let row = (y * frame.width + roi.x) * 3;
        sum += frame.rgb[row..row + roi.w * 3]
            .chunks_exact(3)
            .map(|px| px[c] as u64)
            .sum::<u64>();
    }
    Ok(sum as f64 / (roi.w * roi.h) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_ppm() -> Vec<u8> {
        let mut bytes = b"P6\n2 2\n255\n".to_vec();
        for _ in 0..4 {
            bytes.extend_from_slice(&[10, 20, 30]);
        }
        bytes
    }

    #[test]
    fn parses_direct_encoding() {
        let frame = parse_frame(&tiny_ppm()).unwrap();
        assert_eq!(frame.width(), 2);
        assert_eq!(frame.height(), 2);
        assert_eq!(frame.rgb(), [10, 20, 30].repeat(4).as_slice());
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut bytes = b"P6 # camera 0\n2 # width\n 2\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3].repeat(4));
        let frame = parse_frame(&bytes).unwrap();
        assert_eq!(frame.pixel(1, 1), [1, 2, 3]);
    }

    #[test]
    fn rejects_p5() {
        let err = parse_frame(b"P5\n2 2\n255\n\0\0\0\0").unwrap_err();
        match err {
            Error::Parse { location, message } => {
                assert_eq!(message, "unsupported magic");
                assert_eq!(location, "byte offset 0");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_truncated_payload_with_offset() {
        let mut bytes = tiny_ppm();
        bytes.truncate(bytes.len() - 1);
        let err = parse_frame(&bytes).unwrap_err();
        let Error::Parse { location, message } = err else {
            panic!("expected parse error");
        };
        assert_eq!(location, "byte offset 22");
        assert!(message.contains("truncated pixel payload"), "{message}");
    }

    #[test]
    fn rejects_other_maxval() {
        let err = parse_frame(b"P6\n1 1\n65535\n\0\0\0\0\0\0").unwrap_err();
        let Error::Parse { location, message } = err else {
            panic!("expected parse error");
        };
        assert_eq!(location, "byte offset 7");
        assert!(message.contains("maxval"));
    }

    #[test]
    fn rejects_empty_input() {
        assert!(matches!(parse_frame(b""), Err(Error::Parse { .. })));
    }

    #[test]
    fn prefix_parse_reports_consumed_bytes() {
        let one = tiny_ppm();
        let mut two = one.clone();
        two.extend_from_slice(&one);
        let (_, used) = parse_frame_prefix(&two).unwrap();
        assert_eq!(used, one.len());
        assert!(parse_frame(&two).is_err());
    }

    #[test]
    fn uniform_frame_mean() {
        let frame = Frame::filled(8, 6, [100, 100, 100]).unwrap();
        let roi = Roi::new(1, 2, 5, 3);
        assert_eq!(mean_channel(&frame, &roi, Channel::G).unwrap(), 100.0);
    }

    #[test]
    fn two_point_mean() {
        let mut frame = Frame::filled(2, 1, [0, 0, 0]).unwrap();
        frame.set_pixel(1, 0, [0, 255, 0]);
        let roi = Roi::new(0, 0, 2, 1);
        assert_eq!(mean_channel(&frame, &roi, Channel::G).unwrap(), 127.5);
        assert_eq!(mean_channel(&frame, &roi, Channel::R).unwrap(), 0.0);
    }

    #[test]
    fn roi_out_of_bounds() {
        let frame = Frame::filled(4, 4, [1, 1, 1]).unwrap();
        for roi in [Roi::new(3, 0, 2, 1), Roi::new(0, 0, 0, 1), Roi::new(0, 4, 1, 1)] {
            assert!(matches!(
                mean_channel(&frame, &roi, Channel::G),
                Err(Error::Bounds(_))
            ));
        }
    }

    #[test]
    fn channel_names() {
        assert_eq!("G".parse::<Channel>().unwrap(), Channel::G);
        assert_eq!("red".parse::<Channel>().unwrap(), Channel::R);
        assert!("y".parse::<Channel>().is_err());
    }

    #[test]
    fn stream_reader_splits_concatenated_frames() {
        let a = Frame::filled(2, 2, [1, 2, 3]).unwrap();
        let b = Frame::filled(3, 1, [9, 8, 7]).unwrap();
        let mut bytes = a.to_ppm();
        bytes.extend(b"P6 # comment\n3 1\n255\n");
        bytes.extend(&b.to_ppm()[b.to_ppm().len() - 9..]);
        let mut cursor = std::io::Cursor::new(bytes);
        assert_eq!(read_frame(&mut cursor).unwrap(), Some(a));
        assert_eq!(read_frame(&mut cursor).unwrap(), Some(b));
        assert_eq!(read_frame(&mut cursor).unwrap(), None);
    }

    #[test]
    fn stream_reader_reports_truncation() {
        let mut bytes = Frame::filled(2, 2, [1, 2, 3]).unwrap().to_ppm();
        bytes.truncate(bytes.len() - 1);
        let err = read_frame(&mut std::io::Cursor::new(bytes)).unwrap_err();
        assert!(matches!(err, Error::Parse { ref location, .. } if location == "byte offset 22"), "{err}");
        let err = read_frame(&mut std::io::Cursor::new(b"P5 1 1 255\n\0".to_vec())).unwrap_err();
        assert!(err.to_string().contains("unsupported magic"));
        let err = read_frame(&mut std::io::Cursor::new(b"P6 99999 99999 65535\n".to_vec())).unwrap_err();
        assert!(err.to_string().contains("maxval"));
    }
}
