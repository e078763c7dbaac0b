//! Deterministic synthetic wafer maps for the eight common defect classes.
//!
//! The wafer is the disc inscribed in a `size x size` grid. Geometry is
//! evaluated with integer disc membership and basic IEEE arithmetic only
//! (no trigonometry), and randomness comes from ChaCha8 seeded through
//! SplitMix64, so a `(class, size, seed)` triple yields the same grid on
//! every platform.
//!
//! Shape parameter ranges are invented stand-ins for real fab data; they
//! mimic the qualitative split between classes with a uniform appearance
//! (Center, Donut, Near-Full) and classes that vary strongly in location,
//! orientation or density (Edge-Loc, Loc, Scratch, Random).

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureMatrix, LabeledDataset};
use crate::error::{IchError, Result};

pub const MIN_SIZE: usize = 16;
pub const DEFAULT_SIZE: usize = 64;
/// Probability of an isolated failing die anywhere on the wafer.
pub const BACKGROUND_DEFECT_RATE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DefectClass {
    Center,
    Donut,
    EdgeLoc,
    Loc,
    NearFull,
    Random,
    Ring,
    Scratch,
}

impl DefectClass {
    pub const ALL: [DefectClass; 8] = [
        DefectClass::Center,
        DefectClass::Donut,
        DefectClass::EdgeLoc,
        DefectClass::Loc,
        DefectClass::NearFull,
        DefectClass::Random,
        DefectClass::Ring,
        DefectClass::Scratch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DefectClass::Center => "Center",
            DefectClass::Donut => "Donut",
            DefectClass::EdgeLoc => "Edge-Loc",
            DefectClass::Loc => "Loc",
            DefectClass::NearFull => "Near-Full",
            DefectClass::Random => "Random",
            DefectClass::Ring => "Ring",
            DefectClass::Scratch => "Scratch",
        }
    }
}

impl fmt::Display for DefectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DefectClass {
    type Err = IchError;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        DefectClass::ALL
            .into_iter()
            .find(|c| c.name().replace('-', "").to_ascii_lowercase() == key)
            .ok_or_else(|| IchError::InvalidConfig(format!("unknown defect class {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum Cell {
    Outside = 0,
    Pass = 1,
    Defect = 2,
}

impl Cell {
    pub fn feature_value(self) -> f64 {
        match self {
            Cell::Outside => 0.0,
            Cell::Pass => 0.5,
            Cell::Defect => 1.0,
        }
    }

    pub fn gray(self) -> u8 {
        match self {
            Cell::Outside => 0,
            Cell::Pass => 128,
            Cell::Defect => 255,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticWaferMap {
    pub size: usize,
    /// Row-major `size x size`.
    pub grid: Vec<Cell>,
    pub label: DefectClass,
    pub seed: u64,
    pub params: BTreeMap<String, f64>,
}

impl SyntheticWaferMap {
    pub fn cell(&self, row: usize, col: usize) -> Cell {
        self.grid[row * self.size + col]
    }

    pub fn features(&self) -> Vec<f64> {
        self.grid.iter().map(|c| c.feature_value()).collect()
    }

    pub fn defect_fraction(&self) -> f64 {
        let disc = self.grid.iter().filter(|&&c| c != Cell::Outside).count();
        let bad = self.grid.iter().filter(|&&c| c == Cell::Defect).count();
        if disc == 0 {
            0.0
        } else {
            bad as f64 / disc as f64
        }
    }
}

/// Whether cell `(row, col)` lies on the wafer disc of a `size` grid.
pub fn in_disc(size: usize, row: usize, col: usize) -> bool {
    let s = size as i64;
    let x = 2 * col as i64 + 1 - s;
    let y = 2 * row as i64 + 1 - s;
    x * x + y * y <= s * s
}

/// Cell centre relative to the wafer centre, in units of the wafer radius.
pub fn rel_coords(size: usize, row: usize, col: usize) -> (f64, f64) {
    let s = size as f64;
    (
        (2 * col + 1) as f64 / s - 1.0,
        (2 * row + 1) as f64 / s - 1.0,
    )
}

/// Mean radial distance (in wafer radii) of the cells selected by `weight`,
/// weighted by it. Used as a centrality statistic.
pub fn weighted_mean_radius(size: usize, weight: impl Fn(usize, usize) -> f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for r in 0..size {
        for c in 0..size {
            if !in_disc(size, r, c) {
                continue;
            }
            let w = weight(r, c);
            let (x, y) = rel_coords(size, r, c);
            num += w * (x * x + y * y).sqrt();
            den += w;
        }
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform random unit vector by rejection from the square.
fn unit_vector(rng: &mut ChaCha8Rng) -> (f64, f64) {
    loop {
        let x: f64 = rng.gen_range(-1.0..1.0);
        let y: f64 = rng.gen_range(-1.0..1.0);
        let r2 = x * x + y * y;
        if r2 > 1e-4 && r2 <= 1.0 {
            let r = r2.sqrt();
            return (x / r, y / r);
        }
    }
}

/// Uniform point in the disc of radius `radius`.
fn point_in_disc(rng: &mut ChaCha8Rng, radius: f64) -> (f64, f64) {
    loop {
        let x: f64 = rng.gen_range(-1.0..1.0);
        let y: f64 = rng.gen_range(-1.0..1.0);
        if x * x + y * y <= 1.0 {
            return (x * radius, y * radius);
        }
    }
}

fn seg_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    (qx * qx + qy * qy).sqrt()
}

/// Class-specific defect region: returns the probability that a disc cell
/// at relative coordinates `(x, y)` fails.
type Shape = Box<dyn Fn(f64, f64) -> f64>;

fn build_shape(
    label: DefectClass,
    size: usize,
    rng: &mut ChaCha8Rng,
    params: &mut BTreeMap<String, f64>,
) -> Shape {
    let mut put = |k: &str, v: f64| {
        params.insert(k.to_string(), v);
        v
    };
    match label {
        DefectClass::Center => {
            let radius = put("radius", rng.gen_range(0.15..=0.35));
            let ox = put("offset_x", rng.gen_range(-0.04..=0.04));
            let oy = put("offset_y", rng.gen_range(-0.04..=0.04));
            let density = put("density", rng.gen_range(0.75..=1.0));
            Box::new(move |x, y| {
                let (dx, dy) = (x - ox, y - oy);
                if (dx * dx + dy * dy).sqrt() <= radius {
                    density
                } else {
                    0.0
                }
            })
        }
        DefectClass::Donut => {
            let inner = put("inner_radius", rng.gen_range(0.2..=0.4));
            let outer = put("outer_radius", inner + rng.gen_range(0.12..=0.25));
            let density = put("density", rng.gen_range(0.75..=1.0));
            Box::new(move |x, y| {
                let r = (x * x + y * y).sqrt();
                if r >= inner && r <= outer {
                    density
                } else {
                    0.0
                }
            })
        }
        DefectClass::Ring => {
            let outer = put("outer_radius", rng.gen_range(0.93..=1.0));
            let inner = put("inner_radius", outer - rng.gen_range(0.06..=0.12));
            let density = put("density", rng.gen_range(0.8..=1.0));
            let arc = rng.gen_bool(0.35);
            put("arc", if arc { 1.0 } else { 0.0 });
            let (ux, uy) = unit_vector(rng);
            // Cells whose direction has cosine >= this with (ux, uy) survive.
            let min_cos = if arc {
                put("arc_min_cos", rng.gen_range(-0.3..=0.6))
            } else {
                -2.0
            };
            Box::new(move |x, y| {
                let r = (x * x + y * y).sqrt();
                if r < inner || r > outer {
                    return 0.0;
                }
                if r > 0.0 && (x * ux + y * uy) / r < min_cos {
                    return 0.0;
                }
                density
            })
        }
        DefectClass::EdgeLoc => {
            let (ux, uy) = unit_vector(rng);
            let reach = put("center_radius", rng.gen_range(0.9..=1.0));
            let radius = put("radius", rng.gen_range(0.15..=0.3));
            let density = put("density", rng.gen_range(0.7..=1.0));
            let (cx, cy) = (put("center_x", ux * reach), put("center_y", uy * reach));
            Box::new(move |x, y| {
                let (dx, dy) = (x - cx, y - cy);
                if (dx * dx + dy * dy).sqrt() <= radius {
                    density
                } else {
                    0.0
                }
            })
        }
        DefectClass::Loc => {
            let radius = put("radius", rng.gen_range(0.1..=0.2));
            let (cx, cy) = point_in_disc(rng, 0.6 - radius);
            put("center_x", cx);
            put("center_y", cy);
            let density = put("density", rng.gen_range(0.7..=1.0));
            Box::new(move |x, y| {
                let (dx, dy) = (x - cx, y - cy);
                if (dx * dx + dy * dy).sqrt() <= radius {
                    density
                } else {
                    0.0
                }
            })
        }
        DefectClass::Scratch => {
            let start = point_in_disc(rng, 0.7);
            let segments = rng.gen_range(2..=4usize);
            put("segments", segments as f64);
            let (mut dx, mut dy) = unit_vector(rng);
            let mut points = vec![start];
            let mut total = 0.0;
            for _ in 0..segments {
                let len: f64 = rng.gen_range(0.2..=0.45);
                total += len;
                let (jx, jy) = unit_vector(rng);
                let (nx, ny) = (dx + 0.35 * jx, dy + 0.35 * jy);
                let norm = (nx * nx + ny * ny).sqrt();
                dx = nx / norm;
                dy = ny / norm;
                let last = *points.last().expect("non-empty");
                points.push((last.0 + dx * len, last.1 + dy * len));
            }
            put("length", total);
            // Half-width of roughly 0.7 cells.
            let half_width = put("half_width", 1.4 / size as f64);
            Box::new(move |x, y| {
                let hit = points
                    .windows(2)
                    .any(|w| seg_distance((x, y), w[0], w[1]) <= half_width);
                if hit {
                    1.0
                } else {
                    0.0
                }
            })
        }
        DefectClass::Random => {
            let p = put("density", rng.gen_range(0.05..=0.15));
            Box::new(move |_, _| p)
        }
        DefectClass::NearFull => {
            let p = put("density", rng.gen_range(0.6..=0.9));
            Box::new(move |_, _| p)
        }
    }
}

pub fn generate_map(label: DefectClass, size: usize, seed: u64) -> Result<SyntheticWaferMap> {
    if size < MIN_SIZE {
        return Err(IchError::InvalidConfig(format!(
            "map size {size} is below the minimum of {MIN_SIZE}"
        )));
    }
    let stream = splitmix64(seed ^ splitmix64(label as u64 + 1));
    let mut rng = ChaCha8Rng::seed_from_u64(stream);
    let mut params = BTreeMap::new();
    let shape = build_shape(label, size, &mut rng, &mut params);
    let mut grid = Vec::with_capacity(size * size);
    for r in 0..size {
        for c in 0..size {
            if !in_disc(size, r, c) {
                grid.push(Cell::Outside);
                continue;
            }
            let (x, y) = rel_coords(size, r, c);
            let p = shape(x, y);
            // Two draws per cell regardless of outcome keep the stream aligned.
            let u_shape: f64 = rng.gen();
            let u_noise: f64 = rng.gen();
            let bad = u_shape < p || u_noise < BACKGROUND_DEFECT_RATE;
            grid.push(if bad { Cell::Defect } else { Cell::Pass });
        }
    }
    Ok(SyntheticWaferMap {
        size,
        grid,
        label,
        seed,
        params,
    })
}

/// A labeled feature dataset plus the maps it was flattened from.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub dataset: LabeledDataset,
    pub maps: Vec<SyntheticWaferMap>,
}

impl SyntheticDataset {
    /// `{label}_{index}_{seed}.png`, matching the sample id.
    pub fn image_name(&self, i: usize) -> String {
        format!("{}.png", self.dataset.sample_ids()[i])
    }

    /// Writes one grayscale PNG per map and a `manifest.csv` with
    /// `filename,label` rows.
    pub fn write_image_archive(&self, dir: impl AsRef<Path>) -> Result<Vec<String>> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| IchError::io(dir, e))?;
        let mut manifest = csv::Writer::from_path(dir.join("manifest.csv"))?;
        manifest.write_record(["filename", "label"])?;
        let mut names = Vec::with_capacity(self.maps.len());
        for (i, map) in self.maps.iter().enumerate() {
            let name = self.image_name(i);
            let pixels: Vec<u8> = map.grid.iter().map(|c| c.gray()).collect();
            let img = image::GrayImage::from_raw(map.size as u32, map.size as u32, pixels)
                .expect("grid matches dimensions");
            img.save(dir.join(&name))?;
            manifest.write_record([name.as_str(), map.label.name()])?;
            names.push(name);
        }
        manifest
            .flush()
            .map_err(|e| IchError::io(dir.join("manifest.csv"), e))?;
        Ok(names)
    }
}

/// Generates `count` maps per class in class order. Map `i` (global index)
/// uses seed `splitmix64(seed + i)`.
pub fn generate_dataset(
    class_counts: &BTreeMap<DefectClass, usize>,
    size: usize,
    seed: u64,
) -> Result<SyntheticDataset> {
    if size < MIN_SIZE {
        return Err(IchError::InvalidConfig(format!(
            "map size {size} is below the minimum of {MIN_SIZE}"
        )));
    }
    let mut maps = Vec::new();
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (&label, &count) in class_counts {
        for _ in 0..count {
            let index = maps.len();
            let map = generate_map(label, size, splitmix64(seed.wrapping_add(index as u64)))?;
            ids.push(format!("{}_{}_{}", label.name(), index, seed));
            labels.push(label.name().to_string());
            values.extend(map.features());
            maps.push(map);
        }
    }
    let features = FeatureMatrix::new(maps.len(), size * size, values)?;
    let dataset = LabeledDataset::new(features, ids, Some(labels))?;
    Ok(SyntheticDataset { dataset, maps })
}

/// `count` maps of every class.
pub fn balanced_counts(count: usize) -> BTreeMap<DefectClass, usize> {
    DefectClass::ALL.iter().map(|&c| (c, count)).collect()
}

/// Parses `Center=40,Ring=40`.
pub fn parse_class_counts(spec: &str) -> Result<BTreeMap<DefectClass, usize>> {
    let mut out = BTreeMap::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, count) = part.split_once('=').ok_or_else(|| {
            IchError::InvalidConfig(format!("expected CLASS=COUNT, got {part:?}"))
        })?;
        let class: DefectClass = name.trim().parse()?;
        let count: usize = count
            .trim()
            .parse()
            .map_err(|_| IchError::InvalidConfig(format!("invalid count in {part:?}")))?;
        if out.insert(class, count).is_some() {
            return Err(IchError::InvalidConfig(format!(
                "class {name:?} given twice"
            )));
        }
    }
    if out.is_empty() {
        return Err(IchError::InvalidConfig("no class counts given".into()));
    }
    Ok(out)
}
