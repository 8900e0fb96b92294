use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::ImageFormat;

use crate::error::{Error, Result};
use crate::imaging::GrayImage;

const EXTENSIONS: [&str; 4] = ["png", "tif", "tiff", "PNG"];

/// Frame number encoded by the last run of digits in a file stem
/// (`frame_0042.png` is frame 42).
pub fn frame_index_from_name(path: &Path) -> Option<u32> {
    let stem = path.file_stem()?.to_str()?;
    let end = stem.rfind(|c: char| c.is_ascii_digit())? + 1;
    let start = stem[..end].rfind(|c: char| !c.is_ascii_digit()).map_or(0, |i| i + 1);
    stem[start..end].parse().ok()
}

fn is_frame_file(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()).is_some_and(|e| EXTENSIONS.iter().any(|x| x.eq_ignore_ascii_case(e)))
}

/// PNG and TIFF files of a directory keyed by frame index. Files without a
/// number are skipped; two files claiming the same index are an error.
pub fn list_frames(dir: impl AsRef<Path>) -> Result<BTreeMap<u32, PathBuf>> {
    let dir = dir.as_ref();
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    entries.sort();
    let mut frames = BTreeMap::new();
    for path in entries.into_iter().filter(|p| p.is_file() && is_frame_file(p)) {
        let Some(index) = frame_index_from_name(&path) else {
            log::warn!("{}: no frame number in file name, skipped", path.display());
            continue;
        };
        if let Some(previous) = frames.insert(index, path.clone()) {
            return Err(Error::Argument(format!(
                "frame {index} claimed by both {} and {}",
                previous.display(),
                path.display()
            )));
        }
    }
    Ok(frames)
}

/// Loads an image as 8-bit grayscale; 16-bit data is scaled down.
pub fn read_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| Error::Image { path: path.into(), source: e })?;
    let luma = img.into_luma8();
    let (w, h) = (luma.width() as usize, luma.height() as usize);
    GrayImage::from_vec(w, h, luma.into_raw())
}

/// Saves in the format implied by the extension (PNG or TIFF).
pub fn write_gray(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    let path = path.as_ref();
    let format = ImageFormat::from_path(path).map_err(|e| Error::Image { path: path.into(), source: e })?;
    let buffer = image::GrayImage::from_raw(img.width() as u32, img.height() as u32, img.pixels().to_vec())
        .expect("raster length matches dimensions");
    buffer.save_with_format(path, format).map_err(|e| Error::Image { path: path.into(), source: e })
}
