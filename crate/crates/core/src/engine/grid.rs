//! Scalar field over the cell lattice plus the transport step.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Grid {
    pub fn zeros(width: usize, height: usize) -> Grid {
        Grid {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[self.idx(x, y)]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        let i = self.idx(x, y);
        self.data[i] = v;
    }

    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.total() / self.data.len() as f64
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }
}

/// Multiplicative decay followed by one explicit 4-neighbor diffusion step
/// with no-flux boundaries. Flux form `x[c] + d * sum(x[n] - x[c])` moves
/// equal and opposite amounts across each edge, so with lam = 1 total mass
/// is conserved to floating-point roundoff, and d <= 0.25 keeps every output
/// a convex combination of inputs (hence non-negative).
pub fn diffuse_decay(field: &Grid, d: f64, lam: f64) -> Result<Grid> {
    if !(0.0..=0.25).contains(&d) {
        return Err(Error::Config(format!(
            "diffusion fraction {d} outside [0, 0.25]"
        )));
    }
    if !(lam > 0.0 && lam <= 1.0) {
        return Err(Error::Config(format!("decay factor {lam} outside (0, 1]")));
    }
    let mut out = field.clone();
    let mut scratch = vec![0.0; field.data.len()];
    diffuse_decay_inplace(&mut out, &mut scratch, d, lam);
    Ok(out)
}

/// Hot-path variant: parameters already validated by SimConfig, reuses the
/// caller's scratch buffer. Rows are processed in three bands (top edge,
/// interior, bottom edge) so the interior loop carries no bounds branches.
pub(crate) fn diffuse_decay_inplace(field: &mut Grid, scratch: &mut [f64], d: f64, lam: f64) {
    let (w, h) = (field.width, field.height);
    let src = &mut field.data;
    debug_assert_eq!(scratch.len(), src.len());

    if lam != 1.0 {
        for v in src.iter_mut() {
            *v *= lam;
        }
    }
    if d == 0.0 {
        return;
    }

    // Each cell: c + d * (sum of in-bounds neighbors - count * c).
    let edge_row = |src: &[f64], scratch: &mut [f64], y: usize, other: usize| {
        let base = y * w;
        let ob = other * w;
        let c = src[base];
        scratch[base] = c + d * (src[base + 1] + src[ob] - 2.0 * c);
        for x in 1..w - 1 {
            let i = base + x;
            let c = src[i];
            scratch[i] = c + d * (src[i - 1] + src[i + 1] + src[ob + x] - 3.0 * c);
        }
        let i = base + w - 1;
        let c = src[i];
        scratch[i] = c + d * (src[i - 1] + src[ob + w - 1] - 2.0 * c);
    };
    edge_row(src, scratch, 0, 1);
    for y in 1..h - 1 {
        let base = y * w;
        let c = src[base];
        scratch[base] = c + d * (src[base + 1] + src[base - w] + src[base + w] - 3.0 * c);
        for x in 1..w - 1 {
            let i = base + x;
            let c = src[i];
            scratch[i] = c + d * (src[i - 1] + src[i + 1] + src[i - w] + src[i + w] - 4.0 * c);
        }
        let i = base + w - 1;
        let c = src[i];
        scratch[i] = c + d * (src[i - 1] + src[i - w] + src[i + w] - 3.0 * c);
    }
    edge_row(src, scratch, h - 1, h - 2);

    src.copy_from_slice(scratch);
}
