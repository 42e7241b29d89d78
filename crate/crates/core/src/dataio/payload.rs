use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

/// Hover content attached to a prediction.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Payload {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub img_src: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json_src: Option<String>,
}

/// Encodes a grayscale image with values in `[0, 1]` as a PNG data URI.
pub fn image_data_uri(pixels: &[f32], width: usize, height: usize) -> String {
    let bytes: Vec<u8> = pixels
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let mut png_bytes = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut png_bytes, width as u32, height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        // Writing into a Vec cannot fail for a correctly sized buffer.
        let mut writer = enc.write_header().expect("png header");
        writer.write_image_data(&bytes).expect("png body");
    }
    format!("data:image/png;base64,{}", STANDARD.encode(png_bytes))
}
