//! File-backed pixel access and an OCR provider that shells out to a command.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::{Arc, Mutex};

use image::RgbImage;

use super::{GrayRegion, PixelProvider, ProviderError, TextRecognizer};
use crate::model::{BBox, ScreenshotMeta};

/// BT.601 luma, rounded to the nearest integer.
pub(crate) fn luma_bt601(r: u8, g: u8, b: u8) -> u8 {
    let y = 299 * u32::from(r) + 587 * u32::from(g) + 114 * u32::from(b);
    ((y + 500) / 1000) as u8
}

/// Loads screenshots from `image_ref` paths, resolved against an optional base
/// directory. The most recently used image is cached since corpora are
/// usually grouped by screenshot.
pub struct ImagePixels {
    base_dir: Option<PathBuf>,
    cache: Mutex<Option<(PathBuf, Arc<RgbImage>)>>,
}

impl ImagePixels {
    pub fn new(base_dir: Option<PathBuf>) -> Self {
        ImagePixels {
            base_dir,
            cache: Mutex::new(None),
        }
    }

    fn resolve(&self, screen: &ScreenshotMeta) -> Result<PathBuf, ProviderError> {
        let rel = screen
            .image_ref
            .as_ref()
            .ok_or_else(|| ProviderError(format!("screenshot `{}` has no image_ref", screen.id)))?;
        Ok(match &self.base_dir {
            Some(base) if rel.is_relative() => base.join(rel),
            _ => rel.clone(),
        })
    }

    fn load(&self, path: &Path) -> Result<Arc<RgbImage>, ProviderError> {
        let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        if let Some((p, img)) = cache.as_ref() {
            if p == path {
                return Ok(Arc::clone(img));
            }
        }
        let img = image::open(path)
            .map_err(|e| ProviderError(format!("{}: {e}", path.display())))?
            .to_rgb8();
        let img = Arc::new(img);
        *cache = Some((path.to_path_buf(), Arc::clone(&img)));
        Ok(img)
    }

    /// Crops the RGB region of `bbox` from the screenshot.
    pub fn crop(&self, screen: &ScreenshotMeta, bbox: &BBox) -> Result<RgbImage, ProviderError> {
        let img = self.load(&self.resolve(screen)?)?;
        if !bbox.is_valid()
            || bbox.left < 0
            || bbox.top < 0
            || bbox.right as u32 > img.width()
            || bbox.bottom as u32 > img.height()
        {
            return Err(ProviderError(format!(
                "box {bbox:?} outside {}x{} image",
                img.width(),
                img.height()
            )));
        }
        let (w, h) = (bbox.width() as u32, bbox.height() as u32);
        Ok(image::imageops::crop_imm(img.as_ref(), bbox.left as u32, bbox.top as u32, w, h).to_image())
    }
}

impl PixelProvider for ImagePixels {
    fn region(&self, screen: &ScreenshotMeta, bbox: &BBox) -> Result<GrayRegion, ProviderError> {
        let crop = self.crop(screen, bbox)?;
        let pixels = crop.pixels().map(|p| luma_bt601(p[0], p[1], p[2])).collect();
        Ok(GrayRegion {
            width: crop.width(),
            height: crop.height(),
            pixels,
        })
    }
}

/// Runs an external OCR program on a cropped region.
///
/// Contract: the program is invoked as `<program> <args...> <region.png>`,
/// prints the recognized text as UTF-8 on stdout and exits with status 0.
/// Any other exit status counts as a recognizer failure.
pub struct CommandOcr {
    program: String,
    args: Vec<String>,
    images: ImagePixels,
}

impl CommandOcr {
    pub fn new(program: impl Into<String>, args: Vec<String>, base_dir: Option<PathBuf>) -> Self {
        CommandOcr {
            program: program.into(),
            args,
            images: ImagePixels::new(base_dir),
        }
    }

    /// Splits a command line such as `tesseract --psm 7` on whitespace.
    pub fn from_command_line(cmd: &str, base_dir: Option<PathBuf>) -> Option<Self> {
        let mut parts = cmd.split_whitespace().map(str::to_string);
        let program = parts.next()?;
        Some(CommandOcr::new(program, parts.collect(), base_dir))
    }

    pub fn run_on_file(&self, path: &Path) -> Result<String, ProviderError> {
        let out = Command::new(&self.program)
            .args(&self.args)
            .arg(path)
            .output()
            .map_err(|e| ProviderError(format!("cannot run `{}`: {e}", self.program)))?;
        if !out.status.success() {
            return Err(ProviderError(format!(
                "`{}` exited with {}",
                self.program, out.status
            )));
        }
        String::from_utf8(out.stdout)
            .map(|s| s.trim().to_string())
            .map_err(|_| ProviderError(format!("`{}` produced non-UTF-8 output", self.program)))
    }
}

impl TextRecognizer for CommandOcr {
    fn recognize(&self, screen: &ScreenshotMeta, bbox: &BBox) -> Result<String, ProviderError> {
        let crop = self.images.crop(screen, bbox)?;
        let file = tempfile::Builder::new()
            .suffix(".png")
            .tempfile()
            .map_err(|e| ProviderError(e.to_string()))?;
        crop.save_with_format(file.path(), image::ImageFormat::Png)
            .map_err(|e| ProviderError(e.to_string()))?;
        self.run_on_file(file.path())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Platform;

    fn write_image(dir: &Path) -> ScreenshotMeta {
        let mut img = RgbImage::new(40, 20);
        for (x, _, p) in img.enumerate_pixels_mut() {
            *p = if x < 20 { image::Rgb([255, 0, 0]) } else { image::Rgb([10, 10, 10]) };
        }
        img.save(dir.join("shot.png")).unwrap();
        let mut meta = ScreenshotMeta::new("shot", 40, 20, Platform::Web);
        meta.image_ref = Some("shot.png".into());
        meta
    }

    #[test]
    fn luma_weights() {
        assert_eq!(luma_bt601(255, 255, 255), 255);
        assert_eq!(luma_bt601(0, 0, 0), 0);
        assert_eq!(luma_bt601(255, 0, 0), 76);
        assert_eq!(luma_bt601(0, 255, 0), 150);
        assert_eq!(luma_bt601(0, 0, 255), 29);
    }

    #[test]
    fn region_has_box_dimensions() {
        let dir = tempfile::tempdir().unwrap();
        let meta = write_image(dir.path());
        let pixels = ImagePixels::new(Some(dir.path().to_path_buf()));
        let bbox = BBox { left: 10, top: 5, right: 30, bottom: 15 };
        let r = pixels.region(&meta, &bbox).unwrap();
        assert_eq!((r.width, r.height, r.pixels.len()), (20, 10, 200));
        assert_eq!(r.pixels[0], 76);
        assert_eq!(r.pixels[19], 10);
        let outside = BBox { left: 30, top: 0, right: 50, bottom: 10 };
        assert!(pixels.region(&meta, &outside).is_err());
    }

    #[cfg(unix)]
    #[test]
    fn command_ocr_contract() {
        let dir = tempfile::tempdir().unwrap();
        let meta = write_image(dir.path());
        let bbox = BBox { left: 0, top: 0, right: 20, bottom: 20 };
        let echo = CommandOcr::new("sh", vec!["-c".into(), "echo Submit".into()], Some(dir.path().into()));
        assert_eq!(echo.recognize(&meta, &bbox).unwrap(), "Submit");
        let fail = CommandOcr::new("sh", vec!["-c".into(), "exit 3".into()], Some(dir.path().into()));
        assert!(fail.recognize(&meta, &bbox).is_err());
        let missing = CommandOcr::new("/nonexistent/ocr", vec![], Some(dir.path().into()));
        assert!(missing.recognize(&meta, &bbox).is_err());
    }
}
