//! False-color display of a dual-energy view and its inverse.
//!
//! Hue encodes the material class recovered from the two-band ratio;
//! brightness follows the high-band transmission, floored so that dense
//! metal stays distinguishable from black.

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};

use super::physics::{HueClass, Physics};
use super::render::RenderedView;

pub const BACKGROUND: [u8; 3] = [255, 255, 255];
/// Brightness of a fully opaque pixel.
pub const LUMINANCE_FLOOR: f64 = 0.25;

pub fn palette(hue: HueClass) -> [u8; 3] {
    match hue {
        HueClass::Orange => [255, 140, 0],
        HueClass::Green => [40, 200, 40],
        HueClass::Blue => [30, 90, 255],
    }
}

fn dominant_channel(hue: HueClass) -> usize {
    match hue {
        HueClass::Orange => 0,
        HueClass::Green => 1,
        HueClass::Blue => 2,
    }
}

pub fn luminance(transmission: f64) -> f64 {
    LUMINANCE_FLOOR + (1.0 - LUMINANCE_FLOOR) * transmission.clamp(0.0, 1.0)
}

pub fn shade(hue: HueClass, transmission: f64) -> [u8; 3] {
    let l = luminance(transmission);
    palette(hue).map(|c| (f64::from(c) * l).round() as u8)
}

/// Decoded pixel: `None` for background, otherwise the hue class and the
/// high-band transmission implied by the brightness.
pub type DecodedPixel = Option<(HueClass, f64)>;

/// Inverts [`shade`]; `None` when `rgb` is not a palette color.
pub fn decode(rgb: [u8; 3]) -> Option<DecodedPixel> {
    if rgb == BACKGROUND {
        return Some(None);
    }
    [HueClass::Orange, HueClass::Green, HueClass::Blue]
        .into_iter()
        .find_map(|hue| {
            let pal = palette(hue);
            let k = dominant_channel(hue);
            let l = f64::from(rgb[k]) / f64::from(pal[k]);
            if !(LUMINANCE_FLOOR - 0.01..=1.0).contains(&l) {
                return None;
            }
            let fits = (0..3).all(|i| {
                let expect = f64::from(pal[i]) * l;
                (f64::from(rgb[i]) - expect).abs() <= 1.5
            });
            fits.then(|| {
                let t = (l - LUMINANCE_FLOOR) / (1.0 - LUMINANCE_FLOOR);
                Some((hue, t.clamp(0.0, 1.0)))
            })
        })
}

pub fn decode_image(image: &RgbImage) -> Result<Vec<DecodedPixel>> {
    image
        .enumerate_pixels()
        .map(|(x, y, p)| {
            decode(p.0).ok_or(Error::Colormap { x, y, rgb: p.0 })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct FalseColorImage {
    pub image: RgbImage,
    /// Pixels transparent in exactly one band, drawn as background.
    pub inconsistent: Vec<(u32, u32)>,
}

pub fn false_color(view: &RenderedView, physics: &Physics) -> FalseColorImage {
    let mut inconsistent = Vec::new();
    let image = RgbImage::from_fn(view.width, view.height, |x, y| {
        let i = view.index(x, y);
        let (low, high) = (view.low[i], view.high[i]);
        if !view.material[i] {
            return Rgb(BACKGROUND);
        }
        if (low >= 1.0) != (high >= 1.0) {
            inconsistent.push((x, y));
            return Rgb(BACKGROUND);
        }
        match physics.z_eff_from_transmission(low, high) {
            Some(z) => Rgb(shade(physics.hue_class(z), high)),
            None => Rgb(BACKGROUND),
        }
    });
    FalseColorImage {
        image,
        inconsistent,
    }
}
