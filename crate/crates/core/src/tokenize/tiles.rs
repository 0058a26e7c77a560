//! Raster basemap tiles addressed by Web-Mercator `z/x/y`.

use std::fs;
use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use image::{ImageFormat, Rgba, RgbaImage};
use thiserror::Error;

pub const TILE_PX: u32 = 256;

#[derive(Debug, Error)]
pub enum TileError {
    #[error("tile {z}/{x}/{y} not found")]
    NotFound { z: u8, x: u32, y: u32 },
    #[error("tile {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("tile fetch failed: {0}")]
    Http(String),
}

/// A source of encoded (PNG) tile bytes.
pub trait TileSource: Send + Sync {
    fn tile(&self, z: u8, x: u32, y: u32) -> Result<Vec<u8>, TileError>;

    /// Short description recorded in run manifests.
    fn describe(&self) -> String;
}

fn encode_png(img: &RgbaImage) -> Vec<u8> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .expect("PNG encoding into memory cannot fail");
    out.into_inner()
}

/// Synthetic two-tone checkerboard; needs no files or network. Adjacent
/// tiles swap phase so tile seams stay visible.
#[derive(Debug, Clone)]
pub struct Checkerboard {
    even: Vec<u8>,
    odd: Vec<u8>,
}

impl Checkerboard {
    pub fn new(light: [u8; 3], dark: [u8; 3], squares: u32) -> Self {
        let squares = squares.clamp(1, TILE_PX);
        let cell = TILE_PX / squares;
        let make = |phase: u32| {
            let img = RgbaImage::from_fn(TILE_PX, TILE_PX, |x, y| {
                let c = if ((x / cell) + (y / cell) + phase).is_multiple_of(2) {
                    light
                } else {
                    dark
                };
                Rgba([c[0], c[1], c[2], 255])
            });
            encode_png(&img)
        };
        Self {
            even: make(0),
            odd: make(1),
        }
    }
}

impl Default for Checkerboard {
    fn default() -> Self {
        Self::new([0xF2, 0xEF, 0xE9], [0xE4, 0xE0, 0xD8], 8)
    }
}

impl TileSource for Checkerboard {
    fn tile(&self, _z: u8, x: u32, y: u32) -> Result<Vec<u8>, TileError> {
        Ok(if (x + y).is_multiple_of(2) {
            self.even.clone()
        } else {
            self.odd.clone()
        })
    }

    fn describe(&self) -> String {
        "checkerboard".into()
    }
}

/// Offline tile tree laid out as `{root}/{z}/{x}/{y}.png`.
#[derive(Debug, Clone)]
pub struct DirTiles {
    root: PathBuf,
}

impl DirTiles {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
}

pub fn tile_path(root: &Path, z: u8, x: u32, y: u32) -> PathBuf {
    root.join(z.to_string()).join(x.to_string()).join(format!("{y}.png"))
}

impl TileSource for DirTiles {
    fn tile(&self, z: u8, x: u32, y: u32) -> Result<Vec<u8>, TileError> {
        let path = tile_path(&self.root, z, x, y);
        match fs::read(&path) {
            Ok(bytes) => Ok(bytes),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(TileError::NotFound { z, x, y }),
            Err(source) => Err(TileError::Io {
                path: path.display().to_string(),
                source,
            }),
        }
    }

    fn describe(&self) -> String {
        format!("dir:{}", self.root.display())
    }
}

/// HTTP tile endpoint backed by an on-disk cache.
///
/// The cache is written with write-temp-then-rename, so concurrent readers
/// only ever see complete files.
pub struct HttpTiles {
    template: String,
    cache: PathBuf,
    agent: ureq::Agent,
    user_agent: String,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl HttpTiles {
    /// `template` contains `{z}`, `{x}` and `{y}`.
    pub fn new(template: impl Into<String>, cache: impl Into<PathBuf>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(20)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            template: template.into(),
            cache: cache.into(),
            agent,
            user_agent: concat!("trajlens/", env!("CARGO_PKG_VERSION")).to_string(),
        }
    }

    fn url(&self, z: u8, x: u32, y: u32) -> String {
        self.template
            .replace("{z}", &z.to_string())
            .replace("{x}", &x.to_string())
            .replace("{y}", &y.to_string())
    }

    fn fetch(&self, z: u8, x: u32, y: u32) -> Result<Vec<u8>, TileError> {
        let url = self.url(z, x, y);
        let mut resp = self
            .agent
            .get(&url)
            .header("User-Agent", &self.user_agent)
            .call()
            .map_err(|e| TileError::Http(format!("{url}: {e}")))?;
        let status = resp.status().as_u16();
        if status == 404 {
            return Err(TileError::NotFound { z, x, y });
        }
        if status != 200 {
            return Err(TileError::Http(format!("{url}: HTTP {status}")));
        }
        let mut bytes = Vec::new();
        resp.body_mut()
            .as_reader()
            .read_to_end(&mut bytes)
            .map_err(|e| TileError::Http(format!("{url}: {e}")))?;
        Ok(bytes)
    }
}

/// Writes `bytes` to `path` through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let n = TMP_COUNTER.fetch_add(1, Ordering::Relaxed);
    let tmp = path.with_extension(format!("tmp.{}.{n}", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

impl TileSource for HttpTiles {
    fn tile(&self, z: u8, x: u32, y: u32) -> Result<Vec<u8>, TileError> {
        let path = tile_path(&self.cache, z, x, y);
        if let Ok(bytes) = fs::read(&path) {
            return Ok(bytes);
        }
        let bytes = self.fetch(z, x, y)?;
        write_atomic(&path, &bytes).map_err(|source| TileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(bytes)
    }

    fn describe(&self) -> String {
        format!("http:{}", self.template)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkerboard_is_valid_png() {
        let src = Checkerboard::default();
        let img = image::load_from_memory(&src.tile(3, 1, 2).unwrap()).unwrap();
        assert_eq!((img.width(), img.height()), (TILE_PX, TILE_PX));
        assert_eq!(src.tile(3, 1, 2).unwrap(), src.tile(9, 4, 5).unwrap());
        assert_ne!(src.tile(3, 1, 2).unwrap(), src.tile(3, 2, 2).unwrap());
    }

    #[test]
    fn dir_tiles_missing_is_not_found() {
        let dir = tempfile::tempdir().unwrap();
        let src = DirTiles::new(dir.path());
        assert!(matches!(src.tile(1, 0, 0), Err(TileError::NotFound { .. })));
        write_atomic(&tile_path(dir.path(), 1, 0, 0), b"abc").unwrap();
        assert_eq!(src.tile(1, 0, 0).unwrap(), b"abc");
    }

    #[test]
    fn http_cache_hit_avoids_network() {
        let dir = tempfile::tempdir().unwrap();
        write_atomic(&tile_path(dir.path(), 5, 3, 7), b"cached").unwrap();
        // unroutable endpoint: only the cache can answer
        let src = HttpTiles::new("http://127.0.0.1:9/{z}/{x}/{y}.png", dir.path());
        assert_eq!(src.tile(5, 3, 7).unwrap(), b"cached");
    }
}
