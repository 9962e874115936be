//! RGBD scene ingestion and the built-in procedural test scene.

use std::path::Path;

use image::{DynamicImage, GenericImageView};
use ndarray::Array2;

use crate::error::{config_err, Error, Result};
use crate::targeting::RgbdScene;

fn open(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

fn scene_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Scene {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn plane(img: &image::RgbImage, channel: usize) -> Array2<f64> {
    let (w, h) = img.dimensions();
    Array2::from_shape_fn((h as usize, w as usize), |(r, c)| {
        img.get_pixel(c as u32, r as u32)[channel] as f64 / 255.0
    })
}

/// Loads an 8-bit grayscale or RGB image and an 8-bit grayscale depth map.
/// Values are scaled by 1/255; depth 0 is the plane nearest the viewer.
pub fn load_scene(image_path: &Path, depth_path: &Path) -> Result<RgbdScene<f64>> {
    let image = open(image_path)?;
    let depth = open(depth_path)?;
    if image.dimensions() != depth.dimensions() {
        let (iw, ih) = image.dimensions();
        let (dw, dh) = depth.dimensions();
        return Err(scene_err(
            image_path,
            format!(
                "image is {ih}x{iw} (HxW) but depth map {} is {dh}x{dw}",
                depth_path.display()
            ),
        ));
    }

    let channels = match image {
        DynamicImage::ImageLuma8(g) => {
            let rgb = DynamicImage::ImageLuma8(g).to_rgb8();
            vec![plane(&rgb, 0)]
        }
        DynamicImage::ImageRgb8(rgb) => (0..3).map(|c| plane(&rgb, c)).collect(),
        other => {
            return Err(scene_err(
                image_path,
                format!(
                    "unsupported pixel format {:?}; expected 8-bit grayscale or RGB",
                    other.color()
                ),
            ))
        }
    };
    let depth = match depth {
        DynamicImage::ImageLuma8(g) => plane(&DynamicImage::ImageLuma8(g).to_rgb8(), 0),
        other => {
            return Err(scene_err(
                depth_path,
                format!("unsupported depth format {:?}; expected 8-bit grayscale", other.color()),
            ))
        }
    };
    RgbdScene::new(channels, depth)
}

/// Axis-aligned rectangle of the procedural scene, in fractions of the frame.
#[derive(Debug, Clone, Copy)]
struct Block {
    top: f64,
    left: f64,
    bottom: f64,
    right: f64,
    color: [f64; 3],
}

const BLOCKS: [Block; 3] = [
    Block {
        top: 0.12,
        left: 0.10,
        bottom: 0.50,
        right: 0.42,
        color: [1.0, 0.85, 0.55],
    },
    Block {
        top: 0.30,
        left: 0.52,
        bottom: 0.68,
        right: 0.90,
        color: [0.55, 1.0, 0.70],
    },
    Block {
        top: 0.58,
        left: 0.22,
        bottom: 0.90,
        right: 0.64,
        color: [0.60, 0.75, 1.0],
    },
];

/// Three rectangles, one per depth bin (near, middle, far), on a dim
/// backdrop that sits with the far rectangle. `channels` is 1 (luminance)
/// or 3 (RGB).
pub fn synthetic_scene(height: usize, width: usize, channels: usize) -> Result<RgbdScene<f64>> {
    if channels != 1 && channels != 3 {
        return Err(config_err(format!(
            "synthetic scene supports 1 or 3 channels, got {channels}"
        )));
    }
    const BACKDROP: f64 = 0.25;
    // bin centres for three planes
    let depths = [1.0 / 6.0, 0.5, 5.0 / 6.0];

    let owner = |r: usize, c: usize| {
        let y = (r as f64 + 0.5) / height as f64;
        let x = (c as f64 + 0.5) / width as f64;
        BLOCKS
            .iter()
            .position(|b| y >= b.top && y < b.bottom && x >= b.left && x < b.right)
    };

    let depth = Array2::from_shape_fn((height, width), |(r, c)| owner(r, c).map_or(1.0, |i| depths[i]));
    let value = |r: usize, c: usize, ch: usize| match owner(r, c) {
        Some(i) if channels == 3 => BLOCKS[i].color[ch],
        Some(i) => {
            let [red, green, blue] = BLOCKS[i].color;
            0.2126 * red + 0.7152 * green + 0.0722 * blue
        }
        None => BACKDROP,
    };
    let planes = (0..channels)
        .map(|ch| Array2::from_shape_fn((height, width), |(r, c)| value(r, c, ch)))
        .collect();
    RgbdScene::new(planes, depth)
}

/// Writes a scene as 8-bit PNGs (image and depth).
pub fn save_scene(scene: &RgbdScene<f64>, image_path: &Path, depth_path: &Path) -> Result<()> {
    let (h, w) = scene.dims();
    let to_u8 = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    let save = |img: DynamicImage, path: &Path| {
        img.save(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    };
    let image = if scene.n_channels() == 1 {
        DynamicImage::ImageLuma8(image::GrayImage::from_fn(w as u32, h as u32, |x, y| {
            image::Luma([to_u8(scene.channel(0)[[y as usize, x as usize]])])
        }))
    } else {
        DynamicImage::ImageRgb8(image::RgbImage::from_fn(w as u32, h as u32, |x, y| {
            image::Rgb([0, 1, 2].map(|c| to_u8(scene.channel(c)[[y as usize, x as usize]])))
        }))
    };
    save(image, image_path)?;
    let depth = image::GrayImage::from_fn(w as u32, h as u32, |x, y| {
        image::Luma([to_u8(scene.depth()[[y as usize, x as usize]])])
    });
    save(DynamicImage::ImageLuma8(depth), depth_path)
}
