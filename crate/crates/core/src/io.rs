//! 8-bit grayscale image and mask files (PGM `P2`/`P5`, PNG).

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, GrayImage, ImageFormat};

use crate::error::{Error, Result};
use crate::lifting::{Image, Mask};

/// Mask pixels above this 8-bit value are corrupted.
pub const MASK_THRESHOLD: f64 = 127.0;

/// Decodes a file into 8-bit-scale gray levels in `[0, 255]`.
fn read_levels(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let img = image::open(path).map_err(|e| Error::io(path, e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let levels = match img {
        DynamicImage::ImageLuma8(g) => g.into_raw().into_iter().map(f64::from).collect(),
        DynamicImage::ImageRgb8(rgb) => rgb
            .pixels()
            .map(|p| 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]))
            .collect(),
        other => {
            return Err(Error::io(
                path,
                format!(
                    "unsupported pixel format {:?}; need 8-bit gray or RGB",
                    other.color()
                ),
            ))
        }
    };
    Ok((w, h, levels))
}

/// Loads a grayscale or RGB image, mapping 8-bit levels to `[0, 1]`.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let (w, h, levels) = read_levels(path)?;
    let pixels = levels
        .into_iter()
        .map(|l| (l / 255.0).clamp(0.0, 1.0))
        .collect();
    Image::new(w, h, pixels).map_err(|e| Error::io(path, e))
}

/// Writes `round(255·clamp(v, 0, 1))` as binary PGM or PNG, chosen by the
/// file extension.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let format = ImageFormat::from_path(path).map_err(|e| Error::io(path, e))?;
    if !matches!(format, ImageFormat::Png | ImageFormat::Pnm) {
        return Err(Error::io(path, "output must be .pgm or .png"));
    }
    let bytes = img
        .pixels()
        .iter()
        .map(|v| (255.0 * v.clamp(0.0, 1.0)).round() as u8)
        .collect();
    let gray = GrayImage::from_raw(img.width() as u32, img.height() as u32, bytes)
        .expect("buffer sized to the image");
    let written = if format == ImageFormat::Pnm {
        File::create(path)
            .map_err(image::ImageError::IoError)
            .and_then(|f| {
                let enc = PnmEncoder::new(BufWriter::new(f))
                    .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary));
                gray.write_with_encoder(enc)
            })
    } else {
        gray.save_with_format(path, format)
    };
    written.map_err(|e| Error::io(path, e))
}

/// Loads a mask whose bright pixels (above 127) mark the corrupted region.
pub fn load_mask(path: impl AsRef<Path>, width: usize, height: usize) -> Result<Mask> {
    let path = path.as_ref();
    let (w, h, levels) = read_levels(path)?;
    if (w, h) != (width, height) {
        return Err(Error::config(format!(
            "mask {} is {w}x{h}, image is {width}x{height}",
            path.display()
        )));
    }
    Mask::new(
        w,
        h,
        levels.into_iter().map(|l| l > MASK_THRESHOLD).collect(),
    )
}
