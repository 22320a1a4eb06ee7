//! Binary PPM (P6, maxval 255) images.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ColorType, ExtendedColorType, ImageEncoder, ImageFormat, RgbImage};

use crate::error::{Error, Result};

pub fn read_ppm(path: &Path) -> Result<RgbImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_ppm(&bytes, &path.display().to_string())
}

pub fn decode_ppm(bytes: &[u8], source: &str) -> Result<RgbImage> {
    if !bytes.starts_with(b"P6") {
        return Err(Error::Data(format!("{source}: not a binary PPM (P6) image")));
    }
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Pnm)?;
    if img.color() != ColorType::Rgb8 {
        return Err(Error::Data(format!("{source}: only 8-bit PPM (maxval 255) is supported")));
    }
    Ok(img.into_rgb8())
}

pub fn encode_ppm(img: &RgbImage, writer: impl Write) -> Result<()> {
    PnmEncoder::new(writer)
        .with_subtype(PnmSubtype::Pixmap(SampleEncoding::Binary))
        .write_image(img.as_raw(), img.width(), img.height(), ExtendedColorType::Rgb8)?;
    Ok(())
}

pub fn write_ppm(img: &RgbImage, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    encode_ppm(img, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}
