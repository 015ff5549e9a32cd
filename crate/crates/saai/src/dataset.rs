//! Dataset directories: `manifest.jsonl` plus one PNG per frame in `images/`.
//!
//! The first manifest line is a header, every further line one frame:
//!
//! ```text
//! {"version":"saai-dataset/1","intrinsics":{...},"channels":"thermal","coordinates":"..."}
//! {"index":0,"image":"images/000000.png","pose":{"position":{"x":..,"y":..,"z":..},"yaw":..,"gimbal_pitch":..,"gimbal_roll":..}}
//! ```
//!
//! Thermal frames are 16-bit grayscale with `value = round(v * 65535)`; RGB
//! frames are 8-bit per channel. Ground truth, when present, sits next to
//! the manifest as `truth.png` (8-bit mask) and `truth.json`.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use saai_core::forest::GroundTruth;
use saai_core::geometry::{CameraIntrinsics, FocalPlaneSpec, Pose};
use saai_core::Frame;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageio;

pub const VERSION: &str = "saai-dataset/1";
pub const MANIFEST: &str = "manifest.jsonl";
pub const IMAGES: &str = "images";
pub const TRUTH_MASK: &str = "truth.png";
pub const TRUTH_META: &str = "truth.json";
pub const COORDINATES: &str = "local east-north-up meters, ground at z = 0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channels {
    /// One scalar thermal channel, 16-bit.
    Thermal,
    /// Three 8-bit channels.
    Rgb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub version: String,
    pub intrinsics: CameraIntrinsics,
    pub channels: Channels,
    pub coordinates: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub index: u64,
    /// Relative to the dataset directory.
    pub image: String,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub header: Header,
    pub records: Vec<Record>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub intrinsics: CameraIntrinsics,
    pub channels: Channels,
    pub frames: Vec<Frame>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TruthMeta {
    plane: FocalPlaneSpec,
    footprint_area: usize,
}

fn channels_of(frames: &[Frame]) -> Result<Channels> {
    let n = frames[0].image.channels();
    let channels = match n {
        1 => Channels::Thermal,
        3 => Channels::Rgb,
        _ => return Err(Error::Invalid(format!("frames with {n} channels cannot be stored"))),
    };
    if let Some(f) = frames.iter().find(|f| f.image.channels() != n) {
        return Err(Error::Invalid(format!(
            "frame {} has {} channels, expected {n}",
            f.index,
            f.image.channels()
        )));
    }
    Ok(channels)
}

pub fn write_dataset(frames: &[Frame], intrinsics: &CameraIntrinsics, dir: &Path) -> Result<Manifest> {
    if frames.is_empty() {
        return Err(saai_core::Error::EmptyInput("no frames to write").into());
    }
    intrinsics.validate()?;
    let channels = channels_of(frames)?;
    for pair in frames.windows(2) {
        if pair[1].index <= pair[0].index {
            return Err(saai_core::Error::OutOfOrder {
                previous: pair[0].index,
                index: pair[1].index,
            }
            .into());
        }
    }
    let images = dir.join(IMAGES);
    fs::create_dir_all(&images).map_err(Error::io(&images))?;
    let header = Header {
        version: VERSION.to_string(),
        intrinsics: *intrinsics,
        channels,
        coordinates: COORDINATES.to_string(),
    };
    let mut records = Vec::with_capacity(frames.len());
    for f in frames {
        let (w, h) = (f.image.width(), f.image.height());
        if (w, h) != (intrinsics.width, intrinsics.height) {
            return Err(saai_core::Error::ShapeMismatch {
                expected_width: intrinsics.width,
                expected_height: intrinsics.height,
                width: w,
                height: h,
            }
            .into());
        }
        let name = format!("{IMAGES}/{:06}.png", f.index);
        let path = dir.join(&name);
        match channels {
            Channels::Thermal => imageio::write_gray16(&path, &f.image)?,
            Channels::Rgb => imageio::write_rgb8(&path, &f.image)?,
        }
        records.push(Record {
            index: f.index,
            image: name,
            pose: f.pose,
        });
    }
    let manifest = Manifest { header, records };
    write_manifest(&manifest, &dir.join(MANIFEST))?;
    Ok(manifest)
}

fn write_manifest(m: &Manifest, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(Error::io(path))?;
    let mut out = BufWriter::new(file);
    let mut line = |json: String| writeln!(out, "{json}").map_err(Error::io(path));
    line(serde_json::to_string(&m.header).expect("header serializes"))?;
    for r in &m.records {
        line(serde_json::to_string(r).expect("record serializes"))?;
    }
    out.flush().map_err(Error::io(path))
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let file = fs::File::open(&path).map_err(Error::io(&path))?;
    let malformed = |line: usize, message: String| Error::Manifest {
        path: path.clone(),
        line,
        message,
    };
    let mut lines = BufReader::new(file)
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
    let (_, first) = lines.next().ok_or_else(|| malformed(1, "empty manifest".into()))?;
    let first = first.map_err(Error::io(&path))?;
    let version = serde_json::from_str::<serde_json::Value>(&first)
        .map_err(|e| malformed(1, e.to_string()))?
        .get("version")
        .and_then(|v| v.as_str().map(str::to_string))
        .ok_or_else(|| malformed(1, "header has no `version`".into()))?;
    if version != VERSION {
        return Err(Error::Version {
            found: version,
            expected: VERSION,
        });
    }
    let header: Header = serde_json::from_str(&first).map_err(|e| malformed(1, e.to_string()))?;
    let mut records: Vec<Record> = Vec::new();
    for (i, line) in lines {
        let n = i + 1;
        let line = line.map_err(Error::io(&path))?;
        let r: Record = serde_json::from_str(&line).map_err(|e| malformed(n, e.to_string()))?;
        if let Some(prev) = records.last() {
            if r.index <= prev.index {
                return Err(malformed(
                    n,
                    format!("index {} does not follow {}", r.index, prev.index),
                ));
            }
        }
        records.push(r);
    }
    Ok(Manifest { header, records })
}

/// Reads the manifest now and each frame image only when the iterator
/// reaches it.
pub fn stream_dataset(dir: &Path) -> Result<(Header, impl Iterator<Item = Result<Frame>> + Send)> {
    let m = read_manifest(dir)?;
    let header = m.header.clone();
    header.intrinsics.validate()?;
    let dir = dir.to_path_buf();
    let frames = m.records.into_iter().map(move |r| load_frame(&dir, &m.header, &r));
    Ok((header, frames))
}

fn load_frame(dir: &Path, header: &Header, r: &Record) -> Result<Frame> {
    let intr = header.intrinsics;
    let path = dir.join(&r.image);
    if !path.is_file() {
        return Err(Error::Io {
            path,
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "frame image missing"),
        });
    }
    let image = match header.channels {
        Channels::Thermal => imageio::read_gray16(&path)?,
        Channels::Rgb => imageio::read_rgb8(&path)?,
    };
    if (image.width(), image.height()) != (intr.width, intr.height) {
        return Err(saai_core::Error::ShapeMismatch {
            expected_width: intr.width,
            expected_height: intr.height,
            width: image.width(),
            height: image.height(),
        }
        .into());
    }
    Ok(Frame::new(r.index, r.pose, image))
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let (header, frames) = stream_dataset(dir)?;
    Ok(Dataset {
        intrinsics: header.intrinsics,
        channels: header.channels,
        frames: frames.collect::<Result<_>>()?,
    })
}

pub fn write_ground_truth(dir: &Path, truth: &GroundTruth) -> Result<()> {
    imageio::write_mask(&dir.join(TRUTH_MASK), &truth.footprint_mask)?;
    let meta = TruthMeta {
        plane: truth.plane,
        footprint_area: truth.footprint_area,
    };
    let path = dir.join(TRUTH_META);
    fs::write(&path, serde_json::to_string_pretty(&meta).expect("truth serializes")).map_err(Error::io(&path))
}

pub fn read_ground_truth(dir: &Path) -> Result<GroundTruth> {
    let path = dir.join(TRUTH_META);
    let text = fs::read_to_string(&path).map_err(Error::io(&path))?;
    let meta: TruthMeta = serde_json::from_str(&text).map_err(|e| Error::Config {
        path: path.clone(),
        message: e.to_string(),
    })?;
    let mask = imageio::read_mask(&dir.join(TRUTH_MASK))?;
    let area = mask.count_set();
    if area != meta.footprint_area || (mask.width(), mask.height()) != (meta.plane.grid_width, meta.plane.grid_height) {
        return Err(Error::Config {
            path,
            message: "truth mask does not match its metadata".into(),
        });
    }
    Ok(GroundTruth {
        footprint_mask: mask,
        footprint_area: area,
        plane: meta.plane,
    })
}
