use std::path::Path;

use crate::mesh::Rgb;
use crate::raster::Raster;
use crate::Result;

pub const VISIBLE_COLOR: Rgb = [0.0, 1.0, 0.0];
pub const OCCLUDED_COLOR: Rgb = [1.0, 0.0, 0.0];

/// Copy of `image` with a filled dot per landmark: green when visible, red
/// when occluded.
pub fn draw_landmarks(image: &Raster, landmarks: &[[f64; 2]], visible: &[bool]) -> Raster {
    let mut out = image.clone();
    let r = (image.width().min(image.height()) as f64 / 128.0)
        .ceil()
        .max(1.0) as i64;
    for (p, &v) in landmarks.iter().zip(visible) {
        let color = if v { VISIBLE_COLOR } else { OCCLUDED_COLOR };
        let (cx, cy) = (p[0].round() as i64, p[1].round() as i64);
        for y in cy - r..=cy + r {
            for x in cx - r..=cx + r {
                let inside = (x - cx).pow(2) + (y - cy).pow(2) <= r * r;
                if inside
                    && x >= 0
                    && y >= 0
                    && (x as usize) < out.width()
                    && (y as usize) < out.height()
                {
                    out.set(x as usize, y as usize, color);
                }
            }
        }
    }
    out
}

/// Tiles laid out row-major, `cols` per row, each cell sized to the
/// largest tile; `None` for no tiles.
pub fn overlay_grid(tiles: &[Raster], cols: usize) -> Option<Raster> {
    if tiles.is_empty() {
        return None;
    }
    let cols = cols.clamp(1, tiles.len());
    let rows = tiles.len().div_ceil(cols);
    let cw = tiles.iter().map(Raster::width).max()?;
    let ch = tiles.iter().map(Raster::height).max()?;
    let mut grid = Raster::filled(cw * cols, ch * rows, [0.0; 3]);
    for (k, t) in tiles.iter().enumerate() {
        let (ox, oy) = ((k % cols) * cw, (k / cols) * ch);
        for y in 0..t.height() {
            for x in 0..t.width() {
                grid.set(ox + x, oy + y, t.get(x, y));
            }
        }
    }
    Some(grid)
}

/// Draws every `(image, landmarks, visibility)` triple and saves the grid
/// to `path`. Writes nothing and returns `false` for an empty input.
/// Image, landmarks and visibility flags of one tile.
pub type OverlayItem = (Raster, Vec<[f64; 2]>, Vec<bool>);

pub fn emit_overlays(items: &[OverlayItem], cols: usize, path: &Path) -> Result<bool> {
    let tiles: Vec<Raster> = items
        .iter()
        .map(|(img, l, v)| draw_landmarks(img, l, v))
        .collect();
    match overlay_grid(&tiles, cols) {
        Some(grid) => {
            grid.save(path)?;
            Ok(true)
        }
        None => Ok(false),
    }
}
