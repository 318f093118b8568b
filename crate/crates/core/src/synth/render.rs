//! Styled rasterisation of a module grid.

use serde::{Deserialize, Serialize};

use crate::grid::BinaryGrid;
use crate::image::{Rgb, RgbImage};
use crate::protocol::{alignment_centers, finder_origins};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModuleShape {
    Square,
    Circle,
    Rounded,
    Diamond,
}

/// How finder and alignment patterns ("eyes") are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EyeShape {
    /// Module by module, like any other cell.
    #[default]
    Modules,
    /// Concentric circles spanning the pattern.
    Circle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleSpec {
    pub module_shape: ModuleShape,
    pub eye_shape: EyeShape,
    pub fg_palette: Vec<Rgb>,
    pub bg_color: Rgb,
    /// Drawn extent of a module within its cell, in (0, 1].
    pub module_scale: f64,
    /// Side of the centred logo square as a fraction of the symbol side, in [0, 0.3].
    pub logo_fraction: f64,
    pub logo_color: Rgb,
    pub inverted: bool,
    pub pixels_per_module: usize,
    pub quiet_zone_modules: usize,
}

impl Default for StyleSpec {
    fn default() -> Self {
        StyleSpec::plain()
    }
}

impl StyleSpec {
    /// Square black modules on white, four-module quiet zone.
    pub fn plain() -> Self {
        StyleSpec {
            module_shape: ModuleShape::Square,
            eye_shape: EyeShape::Modules,
            fg_palette: vec![Rgb::BLACK],
            bg_color: Rgb::WHITE,
            module_scale: 1.0,
            logo_fraction: 0.0,
            logo_color: Rgb::WHITE,
            inverted: false,
            pixels_per_module: 10,
            quiet_zone_modules: 4,
        }
    }

    pub fn with_shape(shape: ModuleShape) -> Self {
        StyleSpec {
            module_shape: shape,
            ..StyleSpec::plain()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.fg_palette.is_empty() {
            return Err("palette is empty".into());
        }
        if !(self.module_scale > 0.0 && self.module_scale <= 1.0) {
            return Err(format!("module_scale {} outside (0, 1]", self.module_scale));
        }
        if !(0.0..=0.3).contains(&self.logo_fraction) {
            return Err(format!("logo_fraction {} outside [0, 0.3]", self.logo_fraction));
        }
        if self.pixels_per_module < 2 {
            return Err("pixels_per_module must be >= 2".into());
        }
        Ok(())
    }

    /// Named presets used by the corpus tooling.
    pub fn preset(name: &str) -> Option<StyleSpec> {
        let navy = Rgb([20, 30, 110]);
        let green = Rgb([10, 100, 40]);
        let maroon = Rgb([120, 20, 30]);
        let style = match name {
            "plain" => StyleSpec::plain(),
            "circle" => StyleSpec {
                eye_shape: EyeShape::Circle,
                ..StyleSpec::with_shape(ModuleShape::Circle)
            },
            "rounded" => StyleSpec::with_shape(ModuleShape::Rounded),
            "diamond" => StyleSpec::with_shape(ModuleShape::Diamond),
            "dots" => StyleSpec {
                module_scale: 0.4,
                ..StyleSpec::plain()
            },
            "color" => StyleSpec {
                fg_palette: vec![navy, green, maroon],
                bg_color: Rgb([255, 250, 235]),
                eye_shape: EyeShape::Circle,
                ..StyleSpec::with_shape(ModuleShape::Rounded)
            },
            "logo" => StyleSpec {
                logo_fraction: 0.2,
                logo_color: Rgb([230, 120, 20]),
                eye_shape: EyeShape::Circle,
                ..StyleSpec::with_shape(ModuleShape::Circle)
            },
            "inverted" => StyleSpec {
                inverted: true,
                ..StyleSpec::plain()
            },
            _ => return None,
        };
        Some(style)
    }

    pub const PRESETS: [&'static str; 8] = [
        "plain", "circle", "rounded", "diamond", "dots", "color", "logo", "inverted",
    ];
}

/// Whether a point at normalised offset `(dx, dy)` from the cell centre
/// (cell spans [-1, 1]) lies inside a shape of half-extent `h`.
fn inside(shape: ModuleShape, dx: f64, dy: f64, h: f64) -> bool {
    let (ax, ay) = (dx.abs(), dy.abs());
    match shape {
        ModuleShape::Square => ax.max(ay) <= h,
        ModuleShape::Circle => dx * dx + dy * dy <= h * h,
        ModuleShape::Diamond => ax + ay <= h,
        ModuleShape::Rounded => {
            let radius = 0.5 * h;
            let qx = (ax - (h - radius)).max(0.0);
            let qy = (ay - (h - radius)).max(0.0);
            ax.max(ay) <= h && qx * qx + qy * qy <= radius * radius
        }
    }
}

/// Regions drawn as concentric circles: (top row, left col, size in modules).
fn eye_regions(grid: &BinaryGrid) -> Vec<(usize, usize, usize)> {
    let mut regions: Vec<_> = finder_origins(grid.side())
        .into_iter()
        .map(|(r, c)| (r, c, 7))
        .collect();
    regions.extend(alignment_centers(grid.version()).into_iter().map(|(r, c)| (r - 2, c - 2, 5)));
    regions
}

/// Circular eye: dark outer annulus, light annulus, dark disc, each one
/// module wide.
fn eye_pixel_dark(size: usize, fx: f64, fy: f64) -> bool {
    let half = size as f64 / 2.0;
    let d = ((fx - half).powi(2) + (fy - half).powi(2)).sqrt();
    if d > half {
        return false;
    }
    // ring 0 is the outermost module-wide annulus; everything inside ring 1 is dark
    let ring = (half - d).floor() as usize;
    ring != 1
}

/// Draws `grid` with `style`. Dark cells take palette colours cycled by
/// cell index; the logo is an opaque square over the symbol centre;
/// inversion negates the whole raster including the quiet zone.
pub fn render(grid: &BinaryGrid, style: &StyleSpec) -> RgbImage {
    let ppm = style.pixels_per_module;
    let side = grid.side();
    let quiet = style.quiet_zone_modules * ppm;
    let symbol_px = side * ppm;
    let total = symbol_px + 2 * quiet;
    let mut img = RgbImage::filled(total, total, style.bg_color);
    let palette = &style.fg_palette;

    let mut in_eye = vec![false; side * side];
    if style.eye_shape == EyeShape::Circle {
        for (r0, c0, size) in eye_regions(grid) {
            let color = palette[(r0 * side + c0) % palette.len()];
            for r in r0..r0 + size {
                for c in c0..c0 + size {
                    in_eye[r * side + c] = true;
                }
            }
            for py in 0..size * ppm {
                for px in 0..size * ppm {
                    let fx = (px as f64 + 0.5) / ppm as f64;
                    let fy = (py as f64 + 0.5) / ppm as f64;
                    if eye_pixel_dark(size, fx, fy) {
                        img.set(quiet + c0 * ppm + px, quiet + r0 * ppm + py, color);
                    }
                }
            }
        }
    }

    let half = ppm as f64 / 2.0;
    let mut cell_mask = vec![false; ppm * ppm];
    for (i, slot) in cell_mask.iter_mut().enumerate() {
        let (px, py) = (i % ppm, i / ppm);
        let dx = (px as f64 + 0.5 - half) / half;
        let dy = (py as f64 + 0.5 - half) / half;
        *slot = inside(style.module_shape, dx, dy, style.module_scale);
    }
    for r in 0..side {
        for c in 0..side {
            if !grid.get(r, c) || in_eye[r * side + c] {
                continue;
            }
            let color = palette[(r * side + c) % palette.len()];
            for (i, &on) in cell_mask.iter().enumerate() {
                if on {
                    img.set(quiet + c * ppm + i % ppm, quiet + r * ppm + i / ppm, color);
                }
            }
        }
    }

    if style.logo_fraction > 0.0 {
        let logo = (style.logo_fraction * symbol_px as f64).round() as usize;
        let start = quiet + (symbol_px - logo) / 2;
        for y in start..start + logo {
            for x in start..start + logo {
                img.set(x, y, style.logo_color);
            }
        }
    }

    if style.inverted {
        img.map(Rgb::negative);
    }
    img
}
