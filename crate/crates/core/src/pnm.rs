//! Binary Netpbm codecs (P4 bitmaps, P5 graymaps, P6 pixmaps) and frame
//! directory scanning.
//!
//! Frame files are named `frame_%06d.ppm` or `frame_%06d.pgm`; the number
//! is the frame index.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::raster::{BitMask, Frame, GrayImage, PixelKind};

const KIND: &str = "netpbm";

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: usize,
    data_start: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(Error::format(KIND, "missing magic number"));
    }
    let magic = [bytes[0], bytes[1]];
    let fields_needed = if magic[1] == b'4' { 2 } else { 3 };
    let mut fields = Vec::with_capacity(3);
    let mut pos = 2;
    while fields.len() < fields_needed {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(KIND, "truncated header"));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        let value: usize = text
            .parse()
            .map_err(|_| Error::format(KIND, format!("bad header field {text:?}")))?;
        fields.push(value);
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::format(KIND, "header not terminated"));
    }
    let maxval = if fields_needed == 3 { fields[2] } else { 1 };
    if fields[0] == 0 || fields[1] == 0 {
        return Err(Error::format(KIND, "zero image dimension"));
    }
    Ok(Header {
        magic,
        width: fields[0],
        height: fields[1],
        maxval,
        data_start: pos + 1,
    })
}

/// Decodes a P5 or P6 image into a frame carrying `index`.
pub fn decode_frame(bytes: &[u8], index: u32) -> Result<Frame> {
    let h = parse_header(bytes)?;
    let kind = match &h.magic {
        b"P5" => PixelKind::Gray,
        b"P6" => PixelKind::Color,
        m => {
            return Err(Error::format(
                KIND,
                format!("unsupported magic {:?}", String::from_utf8_lossy(m)),
            ))
        }
    };
    if h.maxval != 255 {
        return Err(Error::format(KIND, format!("maxval {} is not 255", h.maxval)));
    }
    let n = h.width * h.height * kind.channels();
    let data = bytes
        .get(h.data_start..h.data_start + n)
        .ok_or_else(|| Error::format(KIND, "raster shorter than header claims"))?;
    Frame::new(index, h.width, h.height, kind, data.to_vec())
}

pub fn read_frame(path: &Path, index: u32) -> Result<Frame> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_frame(&bytes, index).map_err(|e| match e {
        Error::Format { kind, msg } => Error::Format {
            kind,
            msg: format!("{}: {msg}", path.display()),
        },
        other => other,
    })
}

pub fn encode_frame(frame: &Frame) -> Vec<u8> {
    let magic = match frame.kind() {
        PixelKind::Gray => "P5",
        PixelKind::Color => "P6",
    };
    let mut out = format!("{magic}\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend_from_slice(frame.pixels());
    out
}

pub fn encode_gray(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.values);
    out
}

/// P4 encoding; set bits are written as 1 (black).
pub fn encode_bits(mask: &BitMask) -> Vec<u8> {
    let mut out = format!("P4\n{} {}\n", mask.width, mask.height).into_bytes();
    let row_bytes = mask.width.div_ceil(8);
    for y in 0..mask.height {
        let mut row = vec![0u8; row_bytes];
        for x in 0..mask.width {
            if mask.get(x, y) {
                row[x / 8] |= 0x80 >> (x % 8);
            }
        }
        out.extend_from_slice(&row);
    }
    out
}

pub fn decode_bits(bytes: &[u8]) -> Result<BitMask> {
    let h = parse_header(bytes)?;
    if &h.magic != b"P4" {
        return Err(Error::format(KIND, "expected a P4 bitmap"));
    }
    let row_bytes = h.width.div_ceil(8);
    let data = bytes
        .get(h.data_start..h.data_start + row_bytes * h.height)
        .ok_or_else(|| Error::format(KIND, "bitmap shorter than header claims"))?;
    let mut mask = BitMask::empty(h.width, h.height);
    for y in 0..h.height {
        for x in 0..h.width {
            let byte = data[y * row_bytes + x / 8];
            mask.set(x, y, byte & (0x80 >> (x % 8)) != 0);
        }
    }
    Ok(mask)
}

pub fn read_bits(path: &Path) -> Result<BitMask> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_bits(&bytes)
}

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// Conventional file name for frame `index`.
pub fn frame_file_name(index: u32, kind: PixelKind) -> String {
    let ext = match kind {
        PixelKind::Gray => "pgm",
        PixelKind::Color => "ppm",
    };
    format!("frame_{index:06}.{ext}")
}

/// Parses `frame_NNNNNN.ppm|pgm` into its index.
pub fn parse_frame_name(name: &str) -> Option<u32> {
    let stem = name
        .strip_suffix(".ppm")
        .or_else(|| name.strip_suffix(".pgm"))?;
    let digits = stem.strip_prefix("frame_")?;
    if digits.len() < 6 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Lists frame files in `dir` ordered by frame index.
pub fn list_frames(dir: &Path) -> Result<Vec<(u32, PathBuf)>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut frames = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        if let Some(idx) = name.to_str().and_then(parse_frame_name) {
            frames.push((idx, entry.path()));
        }
    }
    frames.sort();
    if let Some(w) = frames.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Usage(format!(
            "frame index {} appears twice in {}",
            w[0].0,
            dir.display()
        )));
    }
    Ok(frames)
}
