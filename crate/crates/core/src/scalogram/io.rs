//! `SCLG` scalogram tensor files.
//!
//! Layout (little-endian): magic `SCLG`, u32 version, u32 count, u32 height,
//! u32 width, `count × height × width` f32 pixels, then `count` label bytes
//! (0 non-stress, 1 stress, 255 unlabeled).

use std::io::{Read, Write};
use std::path::Path;

use super::{ScalogramImage, IMAGE_PIXELS, IMAGE_SIZE};
use crate::bytes::{put_f32, put_u32, Reader};
use crate::error::{Error, Result};
use crate::signal::Class;

pub const SCLG_MAGIC: [u8; 4] = *b"SCLG";
pub const SCLG_VERSION: u32 = 1;
const UNLABELED: u8 = 255;

pub fn write_sclg_to<W: Write>(mut w: W, images: &[ScalogramImage]) -> std::io::Result<()> {
    let mut out = Vec::with_capacity(20 + images.len() * (IMAGE_PIXELS * 4 + 1));
    out.extend_from_slice(&SCLG_MAGIC);
    put_u32(&mut out, SCLG_VERSION);
    put_u32(&mut out, images.len() as u32);
    put_u32(&mut out, IMAGE_SIZE as u32);
    put_u32(&mut out, IMAGE_SIZE as u32);
    for img in images {
        for &p in &img.pixels {
            put_f32(&mut out, p);
        }
    }
    out.extend(images.iter().map(|i| i.label.map_or(UNLABELED, |c| c as u8)));
    w.write_all(&out)
}

pub fn write_sclg(path: impl AsRef<Path>, images: &[ScalogramImage]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_sclg_to(std::io::BufWriter::new(file), images).map_err(|e| Error::io(path, e))
}

pub fn read_sclg_from<R: Read>(mut r: R) -> Result<Vec<ScalogramImage>> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)
        .map_err(|e| Error::io("<reader>", e))?;
    parse(&buf)
}

pub fn read_sclg(path: impl AsRef<Path>) -> Result<Vec<ScalogramImage>> {
    let path = path.as_ref();
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse(&buf)
}

fn parse(buf: &[u8]) -> Result<Vec<ScalogramImage>> {
    let mut r = Reader::new(buf);
    r.magic(SCLG_MAGIC)?;
    let version = r.u32()?;
    if version != SCLG_VERSION {
        return Err(Error::VersionMismatch {
            expected: SCLG_VERSION,
            found: version,
        });
    }
    let count = r.u32()? as usize;
    let (h, w) = (r.u32()? as usize, r.u32()? as usize);
    if (h, w) != (IMAGE_SIZE, IMAGE_SIZE) {
        return Err(Error::ShapeMismatch(format!(
            "SCLG images are {h}x{w}, expected {IMAGE_SIZE}x{IMAGE_SIZE}"
        )));
    }
    let expected = count * (IMAGE_PIXELS * 4 + 1);
    if r.remaining() < expected {
        return Err(Error::Truncated {
            expected,
            actual: r.remaining(),
        });
    }
    let pixels = r.payload(count * IMAGE_PIXELS, 4)?;
    let labels = r.take(count)?;
    let mut images = Vec::with_capacity(count);
    for (i, chunk) in pixels.chunks_exact(IMAGE_PIXELS * 4).enumerate() {
        let px: Vec<f32> = chunk
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let label = match labels[i] {
            UNLABELED => None,
            l => Some(
                Class::from_index(l as usize)
                    .ok_or_else(|| Error::Malformed(format!("image {i}: label byte {l}")))?,
            ),
        };
        let mut img = ScalogramImage::from_pixels(px, label)
            .map_err(|e| Error::Malformed(format!("image {i}: {e}")))?;
        img.provenance.record_id = i as u32;
        images.push(img);
    }
    Ok(images)
}
