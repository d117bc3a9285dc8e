//! Block hierarchy over the noise canvas.
//!
//! The canvas is a per-channel `H × W` grid tiled by square blocks of side
//! `k`. Each block is one ground-set element: blocks in the working set carry
//! `+ε`, all others `−ε`. The canvas is mapped onto the image by
//! nearest-neighbour resampling with the floor convention
//! `src = ⌊dst · src_len / dst_len⌋`.

mod attack;

pub use attack::{hierarchical_attack, AttackConfig, AttackResult, Termination, TrajectoryPoint};

use std::ops::Range;

use thiserror::Error;

use crate::setfn::{ElementSet, GroundSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BlockError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("image has {got} values, expected {expected}")]
    Shape { expected: usize, got: usize },
    #[error("cannot split blocks of size 1")]
    Unsplittable,
}

/// Image geometry and value range. Pixel data is channel-major:
/// `index = (c · h + y) · w + x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageSpec {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub lo: f64,
    pub hi: f64,
}

impl ImageSpec {
    pub fn new(height: usize, width: usize, channels: usize) -> Result<Self, BlockError> {
        Self::with_range(height, width, channels, 0.0, 1.0)
    }

    pub fn with_range(height: usize, width: usize, channels: usize, lo: f64, hi: f64) -> Result<Self, BlockError> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(BlockError::Config(format!(
                "image dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(BlockError::Config(format!("empty value range [{lo}, {hi}]")));
        }
        Ok(Self {
            height,
            width,
            channels,
            lo,
            hi,
        })
    }

    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn check(&self, image: &[f64]) -> Result<(), BlockError> {
        if image.len() != self.len() {
            return Err(BlockError::Shape {
                expected: self.len(),
                got: image.len(),
            });
        }
        Ok(())
    }
}

/// Block-space resolution of the perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseCanvas {
    pub height: usize,
    pub width: usize,
}

impl NoiseCanvas {
    pub fn new(height: usize, width: usize) -> Result<Self, BlockError> {
        if height == 0 || width == 0 {
            return Err(BlockError::Config("canvas dimensions must be positive".into()));
        }
        Ok(Self { height, width })
    }

    /// Canvas for an image attacked from block size `initial_k`: the image
    /// itself when both sides are divisible by `initial_k`, otherwise, per
    /// side, the smallest `initial_k · 2^m` covering at least half the side
    /// (299 with k = 32 gives 256).
    pub fn for_image(spec: &ImageSpec, initial_k: usize) -> Result<Self, BlockError> {
        if initial_k == 0 || !initial_k.is_power_of_two() {
            return Err(BlockError::Config(format!(
                "initial block size {initial_k} is not a power of two"
            )));
        }
        if spec.height.is_multiple_of(initial_k) && spec.width.is_multiple_of(initial_k) {
            return Self::new(spec.height, spec.width);
        }
        let side = |len: usize| {
            let mut s = initial_k;
            while 2 * s < len {
                s *= 2;
            }
            s
        };
        Self::new(side(spec.height), side(spec.width))
    }

    fn row_map(&self, spec: &ImageSpec) -> Vec<usize> {
        nearest_indices(self.height, spec.height)
    }

    fn col_map(&self, spec: &ImageSpec) -> Vec<usize> {
        nearest_indices(self.width, spec.width)
    }
}

/// Source index for each of `dst_len` destination positions.
pub fn nearest_indices(src_len: usize, dst_len: usize) -> Vec<usize> {
    (0..dst_len).map(|d| d * src_len / dst_len).collect()
}

/// Nearest-neighbour resize of a single `src_h × src_w` plane.
pub fn resize_nearest(src: &[f64], src_h: usize, src_w: usize, dst_h: usize, dst_w: usize) -> Vec<f64> {
    assert_eq!(src.len(), src_h * src_w);
    let rows = nearest_indices(src_h, dst_h);
    let cols = nearest_indices(src_w, dst_w);
    let mut out = Vec::with_capacity(dst_h * dst_w);
    for &r in &rows {
        out.extend(cols.iter().map(|&c| src[r * src_w + c]));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Block {
    pub channel: usize,
    pub row0: usize,
    pub col0: usize,
    pub size: usize,
}

/// Ground set of blocks at the current granularity plus the working set.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGrid {
    spec: ImageSpec,
    canvas: NoiseCanvas,
    k: usize,
    blocks: Vec<Block>,
    pub working: ElementSet,
    // Block id of every image pixel.
    pixel_block: Vec<usize>,
}

impl BlockGrid {
    /// Tiles the canvas with `k × k` blocks in (channel, row, col) order,
    /// with an empty working set.
    pub fn build(spec: ImageSpec, canvas: NoiseCanvas, k: usize) -> Result<Self, BlockError> {
        if k == 0 || !canvas.height.is_multiple_of(k) || !canvas.width.is_multiple_of(k) {
            return Err(BlockError::Config(format!(
                "block size {k} does not divide the {}x{} canvas",
                canvas.height, canvas.width
            )));
        }
        let (rows, cols) = (canvas.height / k, canvas.width / k);
        let mut blocks = Vec::with_capacity(rows * cols * spec.channels);
        for channel in 0..spec.channels {
            for r in 0..rows {
                for c in 0..cols {
                    blocks.push(Block {
                        channel,
                        row0: r * k,
                        col0: c * k,
                        size: k,
                    });
                }
            }
        }
        let row_map = canvas.row_map(&spec);
        let col_map = canvas.col_map(&spec);
        let mut pixel_block = Vec::with_capacity(spec.len());
        for channel in 0..spec.channels {
            for &y in &row_map {
                let base = (channel * rows + y / k) * cols;
                pixel_block.extend(col_map.iter().map(|&x| base + x / k));
            }
        }
        Ok(Self {
            spec,
            canvas,
            k,
            working: ElementSet::empty(blocks.len()),
            blocks,
            pixel_block,
        })
    }

    pub fn spec(&self) -> &ImageSpec {
        &self.spec
    }

    pub fn canvas(&self) -> NoiseCanvas {
        self.canvas
    }

    pub fn block_size(&self) -> usize {
        self.k
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn ground_set(&self) -> GroundSet {
        GroundSet::new(self.blocks.len())
    }

    /// Block id covering canvas cell (`channel`, `row`, `col`).
    pub fn block_at(&self, channel: usize, row: usize, col: usize) -> usize {
        let (rows, cols) = (self.canvas.height / self.k, self.canvas.width / self.k);
        (channel * rows + row / self.k) * cols + col / self.k
    }

    /// Block id of each image pixel, channel-major.
    pub fn pixel_blocks(&self) -> &[usize] {
        &self.pixel_block
    }

    /// Halves the block size. Children of working blocks are working.
    pub fn split(&self) -> Result<Self, BlockError> {
        if self.k < 2 {
            return Err(BlockError::Unsplittable);
        }
        let mut child = Self::build(self.spec, self.canvas, self.k / 2)?;
        child.working = self.split_set(&child, &self.working);
        Ok(child)
    }

    /// Maps a set over this grid onto the finer grid `child`.
    pub fn split_set(&self, child: &Self, set: &ElementSet) -> ElementSet {
        let ids = child
            .blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| set.contains(self.block_at(b.channel, b.row0, b.col0)))
            .map(|(i, _)| i);
        ElementSet::from_ids(child.len(), ids).expect("child ids are in range")
    }

    /// `C × H × W` canvas holding `+ε` on blocks in `set`, `−ε` elsewhere.
    pub fn noise_canvas(&self, set: &ElementSet, epsilon: f64) -> Vec<f64> {
        let (h, w) = (self.canvas.height, self.canvas.width);
        let mut out = Vec::with_capacity(self.spec.channels * h * w);
        for c in 0..self.spec.channels {
            for r in 0..h {
                out.extend((0..w).map(|col| {
                    if set.contains(self.block_at(c, r, col)) {
                        epsilon
                    } else {
                        -epsilon
                    }
                }));
            }
        }
        out
    }

    /// `x + ε Σ_{i∈S} e_i − ε Σ_{i∉S} e_i` at image resolution, clamped to
    /// the value range when `clip` is set.
    pub fn assemble(&self, x: &[f64], set: &ElementSet, epsilon: f64, clip: bool) -> Result<Vec<f64>, BlockError> {
        let mut out = vec![0.0; self.spec.len()];
        self.assemble_into(x, set, epsilon, clip, &mut out)?;
        Ok(out)
    }

    pub fn assemble_into(
        &self,
        x: &[f64],
        set: &ElementSet,
        epsilon: f64,
        clip: bool,
        out: &mut [f64],
    ) -> Result<(), BlockError> {
        self.spec.check(x)?;
        self.spec.check(out)?;
        if set.universe() != self.blocks.len() {
            return Err(BlockError::Shape {
                expected: self.blocks.len(),
                got: set.universe(),
            });
        }
        let mut sign = vec![-epsilon; self.blocks.len()];
        for id in set.iter() {
            sign[id] = epsilon;
        }
        for ((o, &xv), &b) in out.iter_mut().zip(x).zip(&self.pixel_block) {
            let v = xv + sign[b];
            *o = if clip { v.clamp(self.spec.lo, self.spec.hi) } else { v };
        }
        Ok(())
    }
}

/// Free-function form of [`BlockGrid::build`] with the canvas chosen by
/// [`NoiseCanvas::for_image`].
pub fn build_ground_set(spec: ImageSpec, canvas: NoiseCanvas, k: usize) -> Result<BlockGrid, BlockError> {
    BlockGrid::build(spec, canvas, k)
}

pub fn split_blocks(grid: &BlockGrid) -> Result<BlockGrid, BlockError> {
    grid.split()
}

pub fn assemble_perturbation(
    x: &[f64],
    grid: &BlockGrid,
    set: &ElementSet,
    epsilon: f64,
    clip: bool,
) -> Result<Vec<f64>, BlockError> {
    grid.assemble(x, set, epsilon, clip)
}

/// Contiguous slices of `0..n` of length `batch_size`, the last possibly
/// shorter.
pub fn partition_minibatches(n: usize, batch_size: usize) -> Vec<Range<usize>> {
    assert!(batch_size >= 1, "batch size must be positive");
    (0..n)
        .step_by(batch_size)
        .map(|start| start..(start + batch_size).min(n))
        .collect()
}
