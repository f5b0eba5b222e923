use serde::{Deserialize, Serialize};

/// An axis-aligned rectangle in sheet coordinates, origin bottom-left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub dx: f64,
    pub dy: f64,
}

impl Rect {
    pub const fn new(x: f64, y: f64, dx: f64, dy: f64) -> Self {
        Rect { x, y, dx, dy }
    }

    pub fn x_max(&self) -> f64 {
        self.x + self.dx
    }

    pub fn y_max(&self) -> f64 {
        self.y + self.dy
    }

    pub fn area(&self) -> f64 {
        self.dx * self.dy
    }

    /// Lesser and greater side.
    pub fn sides(&self) -> (f64, f64) {
        if self.dx <= self.dy {
            (self.dx, self.dy)
        } else {
            (self.dy, self.dx)
        }
    }

    pub fn translated(&self, ox: f64, oy: f64) -> Rect {
        Rect { x: self.x + ox, y: self.y + oy, ..*self }
    }

    /// Containment with an absolute slack `tol` on every edge.
    pub fn contains(&self, other: &Rect, tol: f64) -> bool {
        other.x >= self.x - tol
            && other.y >= self.y - tol
            && other.x_max() <= self.x_max() + tol
            && other.y_max() <= self.y_max() + tol
    }
}

/// Axis along which details are stacked inside an active box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

/// A placed detail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacedDetail {
    pub n: u64,
    pub rect: Rect,
}

/// A live empty box with its position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutBox {
    pub id: crate::box_store::BoxId,
    pub class: crate::box_store::BoxClass,
    pub origin_n: u64,
    pub created_at: u64,
    pub rect: Rect,
}

/// Full geometric state of a run: details, live boxes and the LRP tile the sheet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub kind: crate::detail::DetailKind,
    pub n0: u64,
    pub side: f64,
    pub details: Vec<PlacedDetail>,
    pub boxes: Vec<LayoutBox>,
    pub lrp: Rect,
}
