//! Procedural 10-class image source in the 32x32 RGB record format.
//!
//! Each class is a spatial arrangement of micro-textures: one of five
//! fixed 6x6 tile patterns paired with its cycle neighbor, laid out
//! either east or south of it at a fixed gap. Everything else in the
//! image is a nuisance: each placed tile gets a random amplitude and
//! polarity, singleton distractor tiles appear at class-independent
//! positions, and a per-image color cast, smooth background waves, and
//! pixel noise decorate the scene. Tile presence, contrast, energy, and
//! color statistics therefore carry no class information — only the
//! identity of the paired tiles and their relative geometry does.
//!
//! The generator exists so the full pipeline — binary files on disk, the
//! record loader, subsetting, training — can run self-contained; written
//! directories are loadable by the standard record reader.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cifar::{quantize_pixel, write_record_file, TEST_FILE, TRAIN_FILES};
use crate::dataset::{Dataset, IMAGE_PIXELS, IMAGE_SIDE, NUM_CLASSES};
use crate::error::Result;

pub const CLASS_NAMES: [&str; NUM_CLASSES] = [
    "h-v-east",
    "h-v-south",
    "v-d-east",
    "v-d-south",
    "d-rg-east",
    "d-rg-south",
    "rg-by-east",
    "rg-by-south",
    "by-h-east",
    "by-h-south",
];

/// Tile side length in pixels.
pub const TILE_SIDE: usize = 6;
const TILE_VALUES: usize = 3 * TILE_SIDE * TILE_SIDE;
const TILE_COUNT: usize = 5;

/// Center distance between the two tiles of a class pair.
const PAIR_GAP: i64 = 8;
/// Minimum center distance between any other two placements, chosen so
/// no accidental pair can mimic a class arrangement (gap + jitter < 11).
const MIN_SEPARATION: f64 = 11.0;
const DISTRACTORS: usize = 4;

/// Peak-ish pixel amplitude of a unit-norm tile at full strength.
const TILE_GAIN: f64 = 2.2;
const AMP_LO: f64 = 0.35;
const BG_WAVES: usize = 3;
const BG_AMP: f64 = 0.05;
const NOISE_SIGMA: f64 = 0.02;

/// Tile pattern pairs per class: `(PAIRS[class / 2], class % 2)` gives
/// the tile indices and the arrangement (0 = east, 1 = south).
const PAIRS: [(usize, usize); 5] = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)];

/// The five fixed micro-textures, each zero-mean per channel and unit
/// L2 norm overall: three luminance gratings (horizontal, vertical,
/// diagonal) and two chromatic patterns (red-green blob, blue-yellow
/// product grating). Pairwise correlations are near zero, so one tile
/// never reads as another.
pub fn tile_patterns() -> [[f64; TILE_VALUES]; TILE_COUNT] {
    let tau = std::f64::consts::TAU;
    let mut tiles = [[0.0; TILE_VALUES]; TILE_COUNT];
    for y in 0..TILE_SIDE {
        for x in 0..TILE_SIDE {
            let (xf, yf) = (x as f64, y as f64);
            let h = (tau * yf / 3.0).cos();
            let v = (tau * xf / 3.0).cos();
            let d = (tau * (xf + yf) / 3.0).cos();
            let (du, dv) = (xf - 2.5, yf - 2.5);
            let blob = (-(du * du + dv * dv) / 2.8).exp();
            let grid = (tau * xf / 3.0).cos() * (tau * yf / 3.0).cos();
            for c in 0..3 {
                let i = (c * TILE_SIDE + y) * TILE_SIDE + x;
                tiles[0][i] = h;
                tiles[1][i] = v;
                tiles[2][i] = d;
                tiles[3][i] = match c {
                    0 => blob,
                    1 => -blob,
                    _ => 0.0,
                };
                tiles[4][i] = match c {
                    2 => grid,
                    _ => -grid / 2.0,
                };
            }
        }
    }
    for tile in &mut tiles {
        for c in 0..3 {
            let plane = &mut tile[c * TILE_SIDE * TILE_SIDE..(c + 1) * TILE_SIDE * TILE_SIDE];
            let mean = plane.iter().sum::<f64>() / plane.len() as f64;
            plane.iter_mut().for_each(|v| *v -= mean);
        }
        let norm = tile.iter().map(|v| v * v).sum::<f64>().sqrt();
        tile.iter_mut().for_each(|v| *v /= norm);
    }
    tiles
}

struct Placement {
    tile: usize,
    x: i64,
    y: i64,
    strength: f64,
}

fn center_dist(a: (i64, i64), b: (i64, i64)) -> f64 {
    let dx = (a.0 - b.0) as f64;
    let dy = (a.1 - b.1) as f64;
    (dx * dx + dy * dy).sqrt()
}

/// Signed tile strength: random amplitude, random polarity.
fn draw_strength(rng: &mut ChaCha8Rng) -> f64 {
    let amp = rng.gen_range(AMP_LO..1.0) * TILE_GAIN;
    if rng.gen::<bool>() {
        amp
    } else {
        -amp
    }
}

/// Renders one example of `class` as record-format pixel bytes.
pub fn render_image(class: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    assert!(class < NUM_CLASSES);
    let (first_tile, second_tile) = PAIRS[class / 2];
    let south = class % 2 == 1;

    let hi = (IMAGE_SIDE - TILE_SIDE - 1) as i64;
    let jx = rng.gen_range(-1..=1);
    let jy = rng.gen_range(-1..=1);
    let reach = PAIR_GAP + 1;
    let (x0, y0) = if south {
        (rng.gen_range(1..=hi), rng.gen_range(1..=hi - reach))
    } else {
        (rng.gen_range(1..=hi - reach), rng.gen_range(1..=hi))
    };
    let (x1, y1) = if south {
        (x0 + jx, y0 + PAIR_GAP + jy)
    } else {
        (x0 + PAIR_GAP + jx, y0 + jy)
    };

    let mut placements = vec![
        Placement { tile: first_tile, x: x0, y: y0, strength: draw_strength(rng) },
        Placement { tile: second_tile, x: x1, y: y1, strength: draw_strength(rng) },
    ];
    for _ in 0..DISTRACTORS {
        for _attempt in 0..200 {
            let x = rng.gen_range(1..=hi);
            let y = rng.gen_range(1..=hi);
            let clear = placements
                .iter()
                .all(|p| center_dist((x, y), (p.x, p.y)) >= MIN_SEPARATION);
            if clear {
                let tile = rng.gen_range(0..TILE_COUNT);
                placements.push(Placement { tile, x, y, strength: draw_strength(rng) });
                break;
            }
        }
    }

    let mut waves = [(0.0, 0.0, 0.0, [0.0; 3]); BG_WAVES];
    for w in &mut waves {
        let fx = rng.gen_range(0.03..0.1) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let fy = rng.gen_range(0.03..0.1) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        let amps = [
            rng.gen_range(-BG_AMP..BG_AMP),
            rng.gen_range(-BG_AMP..BG_AMP),
            rng.gen_range(-BG_AMP..BG_AMP),
        ];
        *w = (fx, fy, phase, amps);
    }
    let cast = [
        rng.gen_range(0.8..1.2),
        rng.gen_range(0.8..1.2),
        rng.gen_range(0.8..1.2),
    ];

    let tiles = tile_patterns();
    let plane = IMAGE_SIDE * IMAGE_SIDE;
    let mut bytes = vec![0u8; IMAGE_PIXELS];
    for y in 0..IMAGE_SIDE {
        for x in 0..IMAGE_SIDE {
            let mut signal = [0.0; 3];
            for (fx, fy, phase, amps) in &waves {
                let arg = std::f64::consts::TAU * (fx * x as f64 + fy * y as f64) + phase;
                let s = arg.cos();
                for c in 0..3 {
                    signal[c] += amps[c] * s;
                }
            }
            for p in &placements {
                let (tx, ty) = (x as i64 - p.x, y as i64 - p.y);
                if (0..TILE_SIDE as i64).contains(&tx) && (0..TILE_SIDE as i64).contains(&ty) {
                    for c in 0..3 {
                        let i = (c * TILE_SIDE + ty as usize) * TILE_SIDE + tx as usize;
                        signal[c] += p.strength * tiles[p.tile][i];
                    }
                }
            }
            for c in 0..3 {
                let value = 0.5 + cast[c] * signal[c] + NOISE_SIGMA * standard_normal(rng);
                bytes[c * plane + y * IMAGE_SIDE + x] = quantize_pixel(value);
            }
        }
    }
    bytes
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Builds a balanced dataset of `n` examples (`n` divisible by 10; labels
/// cycle 0..9). Each image draws from its own rng stream keyed by
/// `(seed, stream_offset + index)`, so generation order doesn't matter.
pub fn generate_synthetic(n: usize, seed: u64, stream_offset: u64, split: &str) -> Result<Dataset> {
    let mut pixels = Vec::with_capacity(n * IMAGE_PIXELS);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % NUM_CLASSES;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_offset + i as u64);
        pixels.extend_from_slice(&render_image(class, &mut rng));
        labels.push(class as u8);
    }
    Dataset::new(pixels, labels, split)
}

/// Generates a train/test pair and writes it as a standard record
/// directory: five train files plus one test file.
pub fn write_synthetic_cifar_dir(
    dir: impl AsRef<Path>,
    train_n: usize,
    test_n: usize,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let dir = dir.as_ref();
    let train = generate_synthetic(train_n, seed, 0, "train")?;
    // disjoint stream range for the test split
    let test = generate_synthetic(test_n, seed, train_n as u64, "test")?;
    let per_file = train_n.div_ceil(TRAIN_FILES.len());
    for (f, name) in TRAIN_FILES.iter().enumerate() {
        let lo = (f * per_file).min(train_n);
        let hi = ((f + 1) * per_file).min(train_n);
        let indices: Vec<usize> = (lo..hi).collect();
        write_record_file(&train.gather(&indices, "train")?, dir.join(name))?;
    }
    write_record_file(&test, dir.join(TEST_FILE))?;
    Ok((train, test))
}
