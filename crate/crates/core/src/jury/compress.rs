use std::borrow::Cow;
use std::io::Cursor;

use image::codecs::jpeg::JpegEncoder;
use image::imageops::FilterType;
use image::DynamicImage;

use super::JuryError;

const QUALITIES: [u8; 5] = [90, 80, 70, 55, 40];
const MIN_SIDE: u32 = 16;

/// Returns `image` unchanged if it is smaller than `budget` bytes, else a
/// JPEG re-encoding that fits, lowering quality first and then resolution.
pub fn compress_to_budget(image: &[u8], budget: usize) -> Result<Cow<'_, [u8]>, JuryError> {
    let decoded = image::load_from_memory(image)
        .map_err(|e| JuryError::Compression(format!("cannot decode image: {e}")))?;
    if image.len() < budget {
        return Ok(Cow::Borrowed(image));
    }
    let mut current = DynamicImage::ImageRgb8(decoded.into_rgb8());
    loop {
        for q in QUALITIES {
            let bytes = encode_jpeg(&current, q)?;
            if bytes.len() < budget {
                return Ok(Cow::Owned(bytes));
            }
        }
        let (w, h) = (current.width(), current.height());
        if w.min(h) <= MIN_SIDE {
            return Err(JuryError::Compression(format!(
                "cannot fit a {}x{} image into {budget} bytes",
                w, h
            )));
        }
        let (nw, nh) = ((w * 3 / 4).max(1), (h * 3 / 4).max(1));
        current = current.resize_exact(nw, nh, FilterType::Triangle);
    }
}

fn encode_jpeg(img: &DynamicImage, quality: u8) -> Result<Vec<u8>, JuryError> {
    let mut out = Cursor::new(Vec::new());
    img.write_with_encoder(JpegEncoder::new_with_quality(&mut out, quality))
        .map_err(|e| JuryError::Compression(e.to_string()))?;
    Ok(out.into_inner())
}
