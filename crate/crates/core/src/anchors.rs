//! Oriented anchor grid construction, offset encoding/decoding, and the
//! ceil-based matching strategy.
//!
//! The input image is divided into `grid_n x grid_n` cells; each cell hosts
//! `k` anchors that share the cell center and differ only in default
//! rotation. Matching a ground-truth rectangle to its anchor is pure index
//! arithmetic (floor on the center coordinates, ceil on the angle) and never
//! evaluates a Jaccard index.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, OrientedRect};

/// Geometry of the anchor grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnchorGridConfig {
    /// Side of the square input image, pixels.
    pub input_size: u32,
    /// Cells per side.
    pub grid_n: u32,
    /// Anchors (angle bins) per cell.
    pub k: u32,
    /// Default anchor width, pixels.
    pub anchor_w: f64,
    /// Default anchor height, pixels.
    pub anchor_h: f64,
}

impl Default for AnchorGridConfig {
    fn default() -> Self {
        AnchorGridConfig {
            input_size: 320,
            grid_n: 10,
            k: 6,
            anchor_w: 54.0,
            anchor_h: 54.0,
        }
    }
}

impl AnchorGridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_n == 0 || self.input_size == 0 {
            return Err(Error::Config(
                "input_size and grid_n must be positive".into(),
            ));
        }
        if self.input_size % self.grid_n != 0 {
            return Err(Error::Config(format!(
                "input_size {} is not divisible by grid_n {}",
                self.input_size, self.grid_n
            )));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !(self.anchor_w > 0.0) || !(self.anchor_h > 0.0) {
            return Err(Error::Config("anchor extents must be positive".into()));
        }
        Ok(())
    }

    /// Cell side in pixels.
    pub fn stride(&self) -> f64 {
        (self.input_size / self.grid_n) as f64
    }

    /// Width of one angle bin in degrees.
    pub fn bin_width(&self) -> f64 {
        180.0 / self.k as f64
    }

    /// Total number of anchors (`grid_n^2 * k`).
    pub fn anchor_count(&self) -> usize {
        (self.grid_n as usize) * (self.grid_n as usize) * (self.k as usize)
    }

    /// Default rotation of angle bin `i`: `90 - (i + 0.5) * 180/k` degrees.
    /// For k = 6 this is {75, 45, 15, -15, -45, -75}.
    pub fn angle_center(&self, angle_index: u32) -> f64 {
        wrap_angle(90.0 - (angle_index as f64 + 0.5) * self.bin_width())
    }

    /// The anchor at a given cell and angle bin.
    pub fn anchor_at(&self, cell_row: u32, cell_col: u32, angle_index: u32) -> AnchorBox {
        let stride = self.stride();
        AnchorBox {
            cell_row,
            cell_col,
            angle_index,
            x_a: (cell_col as f64 + 0.5) * stride,
            y_a: (cell_row as f64 + 0.5) * stride,
            w_a: self.anchor_w,
            h_a: self.anchor_h,
            theta_a: self.angle_center(angle_index),
        }
    }

    /// Inverse of [`AnchorBox::flat_index`].
    pub fn anchor_at_index(&self, index: usize) -> AnchorBox {
        let k = self.k as usize;
        let n = self.grid_n as usize;
        let cell = index / k;
        self.anchor_at(
            (cell / n) as u32,
            (cell % n) as u32,
            (index % k) as u32,
        )
    }

    /// Angle bin owning `theta` (degrees, normalized): the bin whose center
    /// is nearest, with exact boundaries assigned to the higher-angle bin.
    pub fn angle_bin(&self, theta: f64) -> u32 {
        let raw = ((90.0 - theta) / self.bin_width()).ceil() as i64 - 1;
        raw.clamp(0, self.k as i64 - 1) as u32
    }
}

/// One oriented anchor box: grid position plus its default rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorBox {
    pub cell_row: u32,
    pub cell_col: u32,
    pub angle_index: u32,
    pub x_a: f64,
    pub y_a: f64,
    pub w_a: f64,
    pub h_a: f64,
    pub theta_a: f64,
}

impl AnchorBox {
    /// Position in the canonical ordering: row-major cells, then angle bins.
    pub fn flat_index(&self, config: &AnchorGridConfig) -> usize {
        ((self.cell_row as usize * config.grid_n as usize) + self.cell_col as usize)
            * config.k as usize
            + self.angle_index as usize
    }

    /// The anchor's own rectangle (what all-zero offsets decode to).
    pub fn rect(&self) -> OrientedRect {
        OrientedRect::new(self.x_a, self.y_a, self.w_a, self.h_a, self.theta_a)
            .expect("anchor defaults form a valid rectangle")
    }
}

/// The five regression targets of a rectangle relative to an anchor.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OffsetVector {
    pub t_x: f64,
    pub t_y: f64,
    pub t_w: f64,
    pub t_h: f64,
    pub t_theta: f64,
}

impl OffsetVector {
    pub fn as_array(&self) -> [f64; 5] {
        [self.t_x, self.t_y, self.t_w, self.t_h, self.t_theta]
    }

    pub fn from_array(v: [f64; 5]) -> Self {
        OffsetVector {
            t_x: v[0],
            t_y: v[1],
            t_w: v[2],
            t_h: v[3],
            t_theta: v[4],
        }
    }
}

/// Builds the full anchor set in canonical order (row-major cells, angle
/// bins ascending). The default configuration yields 600 anchors.
pub fn build_grid(config: &AnchorGridConfig) -> Result<Vec<AnchorBox>> {
    config.validate()?;
    let mut anchors = Vec::with_capacity(config.anchor_count());
    for row in 0..config.grid_n {
        for col in 0..config.grid_n {
            for bin in 0..config.k {
                anchors.push(config.anchor_at(row, col, bin));
            }
        }
    }
    Ok(anchors)
}

/// Projects a rectangle into anchor-relative offsets:
/// `t_x = (x - x_a)/w_a`, `t_y = (y - y_a)/h_a`, `t_w = ln(w/w_a)`,
/// `t_h = ln(h/h_a)`, `t_theta = (theta - theta_a)/(180/k)`.
pub fn encode(gt: &OrientedRect, anchor: &AnchorBox, k: u32) -> Result<OffsetVector> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if !(anchor.w_a > 0.0) || !(anchor.h_a > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "anchor extents must be positive, got w_a={}, h_a={}",
            anchor.w_a, anchor.h_a
        )));
    }
    Ok(OffsetVector {
        t_x: (gt.x() - anchor.x_a) / anchor.w_a,
        t_y: (gt.y() - anchor.y_a) / anchor.h_a,
        t_w: (gt.w() / anchor.w_a).ln(),
        t_h: (gt.h() / anchor.h_a).ln(),
        t_theta: (gt.theta() - anchor.theta_a) / (180.0 / k as f64),
    })
}

/// Inverse of [`encode`]. Finite offsets always decode to a valid rectangle
/// (`exp` keeps the extents positive); the angle is re-normalized.
pub fn decode(offsets: &OffsetVector, anchor: &AnchorBox, k: u32) -> OrientedRect {
    debug_assert!(k >= 1);
    OrientedRect::new(
        offsets.t_x * anchor.w_a + anchor.x_a,
        offsets.t_y * anchor.h_a + anchor.y_a,
        anchor.w_a * offsets.t_w.exp(),
        anchor.h_a * offsets.t_h.exp(),
        offsets.t_theta * (180.0 / k as f64) + anchor.theta_a,
    )
    .expect("finite offsets decode to a valid rectangle")
}

/// One positive anchor assignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositiveMatch {
    /// Flat anchor index in canonical grid order.
    pub anchor_index: usize,
    /// Index of the ground-truth rectangle that claimed the slot.
    pub gt_index: usize,
    /// Regression target, `encode(gt, anchor, k)`.
    pub target: OffsetVector,
}

/// Positive assignments plus the count of ground truths that could not be
/// matched because their center lies outside the image.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// At most one entry per anchor slot, sorted by anchor index.
    pub positives: Vec<PositiveMatch>,
    pub num_skipped: usize,
}

impl MatchResult {
    /// N, the number of positive anchor slots.
    pub fn num_positive(&self) -> usize {
        self.positives.len()
    }
}

/// Assigns each ground truth to the anchor sharing its grid cell and nearest
/// angle bin: `col = floor(x/stride)`, `row = floor(y/stride)`,
/// `bin = ceil((90 - theta)/(180/k)) - 1`. Rectangles whose center falls
/// outside `[0, input_size)^2` are skipped and counted. When two ground
/// truths land on the same slot the later one wins.
pub fn match_anchors(gts: &[OrientedRect], config: &AnchorGridConfig) -> Result<MatchResult> {
    config.validate()?;
    let stride = config.stride();
    let limit = config.input_size as f64;
    let mut slots: BTreeMap<usize, PositiveMatch> = BTreeMap::new();
    let mut skipped = 0usize;
    for (gt_index, gt) in gts.iter().enumerate() {
        if !(gt.x() >= 0.0 && gt.x() < limit && gt.y() >= 0.0 && gt.y() < limit) {
            skipped += 1;
            continue;
        }
        let col = (gt.x() / stride).floor() as u32;
        let row = (gt.y() / stride).floor() as u32;
        let bin = config.angle_bin(gt.theta());
        let anchor = config.anchor_at(row, col, bin);
        let target = encode(gt, &anchor, config.k)?;
        slots.insert(
            anchor.flat_index(config),
            PositiveMatch {
                anchor_index: anchor.flat_index(config),
                gt_index,
                target,
            },
        );
    }
    Ok(MatchResult {
        positives: slots.into_values().collect(),
        num_skipped: skipped,
    })
}
