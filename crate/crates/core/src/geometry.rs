//! Axis-aligned bounding boxes in continuous pixel coordinates.
//!
//! The origin is the top-left corner of the frame and `y` grows downward.
//! Boxes are never quantized to pixels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// An axis-aligned rectangle `(x, y, w, h)` with strictly positive extent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoxError {
    NonFinite,
    NonPositiveExtent,
    FieldCount(usize),
    BadNumber(String),
}

impl fmt::Display for BoxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoxError::NonFinite => write!(f, "non-finite coordinate"),
            BoxError::NonPositiveExtent => write!(f, "non-positive extent"),
            BoxError::FieldCount(n) => write!(f, "expected 4 box fields, found {n}"),
            BoxError::BadNumber(s) => write!(f, "malformed number {s:?}"),
        }
    }
}

impl std::error::Error for BoxError {}

impl BoundingBox {
    /// Builds a box, rejecting NaN/infinite coordinates and zero or negative extent.
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, BoxError> {
        if !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(BoxError::NonFinite);
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(BoxError::NonPositiveExtent);
        }
        Ok(Self { x, y, w, h })
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self, BoxError> {
        Self::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn aspect_ratio(&self) -> f64 {
        self.w / self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            x: self.x + dx,
            y: self.y + dy,
            ..*self
        }
    }

    /// Uniform scaling about the frame origin.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            x: self.x * factor,
            y: self.y * factor,
            w: self.w * factor,
            h: self.h * factor,
        }
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let iw = self.right().min(other.right()) - self.x.max(other.x);
        let ih = self.bottom().min(other.bottom()) - self.y.max(other.y);
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }

    pub fn iou(&self, other: &BoundingBox) -> f64 {
        iou(self, other)
    }

    /// Parses the comma-separated `x,y,w,h` form used by every text file of the toolkit.
    pub fn parse_fields(fields: &[&str]) -> Result<Self, BoxError> {
        if fields.len() != 4 {
            return Err(BoxError::FieldCount(fields.len()));
        }
        let mut v = [0.0; 4];
        for (slot, raw) in v.iter_mut().zip(fields) {
            *slot = parse_number(raw)?;
        }
        Self::new(v[0], v[1], v[2], v[3])
    }
}

/// Accepts plain decimals only: optional `-`, digits, optional `.digits`.
pub(crate) fn parse_number(raw: &str) -> Result<f64, BoxError> {
    let digits = raw.strip_prefix('-').unwrap_or(raw);
    let (int, frac) = match digits.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (digits, None),
    };
    let all_digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    if !all_digits(int) || !frac.is_none_or(all_digits) {
        return Err(BoxError::BadNumber(raw.to_string()));
    }
    let value: f64 = raw
        .parse()
        .map_err(|_| BoxError::BadNumber(raw.to_string()))?;
    if !value.is_finite() {
        return Err(BoxError::NonFinite);
    }
    Ok(value)
}

impl FromStr for BoundingBox {
    type Err = BoxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let fields: Vec<&str> = s.split(',').collect();
        Self::parse_fields(&fields)
    }
}

/// Writes `x,y,w,h` using the shortest decimal form that round-trips.
impl fmt::Display for BoundingBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.x, self.y, self.w, self.h)
    }
}

/// Intersection over union; 0 for disjoint boxes, 1 for identical ones.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0.0 {
        return 0.0;
    }
    // Areas from the same edge arithmetic as the intersection, so that
    // identical boxes give exactly 1.
    let extent = |r: &BoundingBox| (r.right() - r.x) * (r.bottom() - r.y);
    let union = extent(a) + extent(b) - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Euclidean distance between box centers, with the x offset divided by the
/// ground-truth width and the y offset by the ground-truth height.
pub fn norm_center_distance(pred: &BoundingBox, gt: &BoundingBox) -> f64 {
    let (px, py) = pred.center();
    let (gx, gy) = gt.center();
    let dx = (px - gx) / gt.w;
    let dy = (py - gy) / gt.h;
    dx.hypot(dy)
}
