//! Permeability fields: plain-text files in the SPE10 layout and seeded
//! synthetic lognormal fields.

use std::io::Read;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use crate::error::{io_err, Error, Result};

pub const MILLIDARCY: f64 = 9.869233e-16;

/// Extent of the full SPE10 model 2 grid.
pub const SPE10_DIMS: [usize; 3] = [60, 220, 85];

/// Where a 2D grid sits inside a layered permeability file.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub file_dims: [usize; 3],
    pub layer: usize,
    /// Cell offset of the grid's origin within the layer, `[x, y]`.
    pub offset: [usize; 2],
}

/// Parses whitespace-separated values in millidarcy, layer-major with x
/// fastest. The file holds either one block (isotropic) or three
/// consecutive blocks `K_x, K_y, K_z`. Returns per-cell values in m^2 for
/// a `grid[0] x grid[1]` patch of the requested layer.
pub fn parse_permeability<R: Read>(mut input: R, slice: &Slice, grid: [usize; 2]) -> Result<Vec<[f64; 3]>> {
    let mut text = String::new();
    input.read_to_string(&mut text).map_err(io_err("<permeability>"))?;
    let values = text
        .split_whitespace()
        .map(|tok| tok.parse::<f64>().map_err(|_| Error::Config(format!("permeability value '{tok}' is not a number"))))
        .collect::<Result<Vec<f64>>>()?;

    let [fx, fy, fz] = slice.file_dims;
    let block = fx * fy * fz;
    let components = if values.len() == block {
        1
    } else if values.len() == 3 * block {
        3
    } else {
        return Err(Error::Config(format!(
            "permeability file holds {} values, expected {block} or {} for a {fx}x{fy}x{fz} grid",
            values.len(),
            3 * block
        )));
    };
    if slice.layer >= fz {
        return Err(Error::Config(format!("layer {} outside the file's {fz} layers", slice.layer)));
    }
    let [ox, oy] = slice.offset;
    if ox + grid[0] > fx || oy + grid[1] > fy {
        return Err(Error::Config(format!(
            "a {}x{} patch at offset ({ox}, {oy}) does not fit in a {fx}x{fy} layer",
            grid[0], grid[1]
        )));
    }

    let mut out = Vec::with_capacity(grid[0] * grid[1]);
    for j in 0..grid[1] {
        for i in 0..grid[0] {
            let idx = (ox + i) + fx * ((oy + j) + fy * slice.layer);
            let k = |c: usize| values[c * block + idx] * MILLIDARCY;
            let kk = if components == 3 { [k(0), k(1), k(2)] } else { [k(0); 3] };
            if kk.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::Config(format!("non-positive permeability at cell ({i}, {j})")));
            }
            out.push(kk);
        }
    }
    Ok(out)
}

pub fn load_permeability_file(path: &Path, slice: &Slice, grid: [usize; 2]) -> Result<Vec<[f64; 3]>> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    parse_permeability(std::io::BufReader::new(file), slice, grid).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Independent lognormal values with the given median (m^2) and log
/// standard deviation; `kz = kz_ratio * k`.
pub fn lognormal_field(n_cells: usize, median: f64, sigma: f64, kz_ratio: f64, seed: u64) -> Result<Vec<[f64; 3]>> {
    if !(median > 0.0) || !(kz_ratio > 0.0) {
        return Err(Error::Config("lognormal permeability needs a positive median and kz_ratio".into()));
    }
    let dist = LogNormal::new(median.ln(), sigma).map_err(|e| Error::Config(format!("lognormal permeability: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n_cells)
        .map(|_| {
            let k = dist.sample(&mut rng);
            [k, k, kz_ratio * k]
        })
        .collect())
}
