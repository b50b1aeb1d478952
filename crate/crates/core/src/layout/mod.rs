//! Structured room layouts and their exact quarter-turn algebra.
//!
//! Coordinates are continuous centimetres with the origin at the room's
//! bounding-box top-left corner, `x` to the right and `y` downward. A quarter
//! turn maps `(x, y)` in a `W x H` room to `(y, W - x)` in an `H x W` room;
//! larger turns are repeated applications of that map, so composition laws
//! hold bit-for-bit whenever coordinates are exactly representable.

mod catalog;
mod validate;

pub use catalog::{CategoryId, RoomType, N_CATEGORIES};
pub use validate::{validate_layout, Violation, MAX_ITEM_IOU};

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LayoutError {
    #[error("rotation must be 0..=3 quarter turns, got {0}")]
    InvalidRotation(i64),
    #[error("direction must be one of 0, 90, 180, 270 degrees, got {0}")]
    InvalidDirection(i64),
    #[error("point ({x}, {y}) lies outside the {w} x {h} extent")]
    PointOutsideExtent { x: f64, y: f64, w: f64, h: f64 },
    #[error("unknown furniture category {0:?}")]
    UnknownCategory(String),
    #[error("unknown room type {0:?}")]
    UnknownRoomType(String),
}

/// A position in centimetres.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// Width and height in centimetres.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extent {
    pub w: f64,
    pub h: f64,
}

impl Extent {
    pub const fn new(w: f64, h: f64) -> Self {
        Extent { w, h }
    }

    pub fn transposed(self) -> Self {
        Extent { w: self.h, h: self.w }
    }

    pub fn rotated(self, k: Rotation) -> Self {
        if k.is_odd() {
            self.transposed()
        } else {
            self
        }
    }
}

/// A multiple of 90 degrees, stored as quarter turns `k` in `0..=3`.
///
/// Used both for the scene orientation and for furniture directions. The
/// dataset's "360 degrees" orientation is `k = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Rotation(u8);

impl Rotation {
    pub const R0: Rotation = Rotation(0);
    pub const R90: Rotation = Rotation(1);
    pub const R180: Rotation = Rotation(2);
    pub const R270: Rotation = Rotation(3);
    pub const ALL: [Rotation; 4] = [Self::R0, Self::R90, Self::R180, Self::R270];

    pub fn new(k: i64) -> Result<Self, LayoutError> {
        if (0..4).contains(&k) {
            Ok(Rotation(k as u8))
        } else {
            Err(LayoutError::InvalidRotation(k))
        }
    }

    /// Accepts 0, 90, 180, 270 and 360 (an alias for 0).
    pub fn from_degrees(deg: i64) -> Result<Self, LayoutError> {
        match deg {
            0 | 360 => Ok(Self::R0),
            90 => Ok(Self::R90),
            180 => Ok(Self::R180),
            270 => Ok(Self::R270),
            other => Err(LayoutError::InvalidDirection(other)),
        }
    }

    pub fn quarter_turns(self) -> usize {
        self.0 as usize
    }

    pub fn degrees(self) -> u16 {
        self.0 as u16 * 90
    }

    pub fn is_odd(self) -> bool {
        self.0 % 2 == 1
    }

    pub fn then(self, other: Rotation) -> Rotation {
        Rotation((self.0 + other.0) % 4)
    }

    pub fn inverse(self) -> Rotation {
        Rotation((4 - self.0) % 4)
    }

    /// Circular difference in degrees, one of 0, 90, 180.
    pub fn circular_difference(self, other: Rotation) -> u16 {
        let d = (self.degrees() as i32 - other.degrees() as i32).unsigned_abs() as u16;
        d.min(360 - d)
    }
}

impl fmt::Display for Rotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}deg", self.degrees())
    }
}

/// Axis-aligned box in centimetres.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn new(min: Point, max: Point) -> Self {
        Aabb { min, max }
    }

    pub fn from_center(c: Point, w: f64, h: f64) -> Self {
        Aabb { min: Point::new(c.x - w / 2.0, c.y - h / 2.0), max: Point::new(c.x + w / 2.0, c.y + h / 2.0) }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point {
        Point::new((self.min.x + self.max.x) / 2.0, (self.min.y + self.max.y) / 2.0)
    }

    pub fn is_valid(&self) -> bool {
        self.min.x < self.max.x && self.min.y < self.max.y
    }

    pub fn intersection_area(&self, other: &Aabb) -> f64 {
        let w = self.max.x.min(other.max.x) - self.min.x.max(other.min.x);
        let h = self.max.y.min(other.max.y) - self.min.y.max(other.min.y);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// Grows the box by `margin` on every side.
    pub fn inflate(&self, margin: f64) -> Aabb {
        Aabb { min: Point::new(self.min.x - margin, self.min.y - margin), max: Point::new(self.max.x + margin, self.max.y + margin) }
    }
}

/// Intersection over union of two boxes; 0 when they are disjoint.
pub fn iou(a: &Aabb, b: &Aabb) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    inter / union
}

/// One piece of furniture. `size` is measured in the item's own frame
/// (direction 0); `position` is the item center.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FurnitureItem {
    pub category: CategoryId,
    pub position: Point,
    pub size: Extent,
    /// Facing direction. 0 faces +y, 90 faces +x, 180 faces -y, 270 faces -x.
    pub direction: Rotation,
}

impl FurnitureItem {
    pub fn new(category: CategoryId, position: Point, size: Extent, direction: Rotation) -> Self {
        FurnitureItem { category, position, size, direction }
    }
}

/// World-space box of an item; the footprint swaps for 90 and 270 degrees.
pub fn item_bbox(item: &FurnitureItem) -> Aabb {
    let Extent { w, h } = item.size.rotated(item.direction);
    Aabb::from_center(item.position, w, h)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpeningKind {
    Door,
    Window,
}

impl OpeningKind {
    pub fn name(self) -> &'static str {
        match self {
            OpeningKind::Door => "door",
            OpeningKind::Window => "window",
        }
    }
}

/// Compass side of the bounding box a wall faces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WallSide {
    North,
    East,
    South,
    West,
}

impl WallSide {
    pub fn name(self) -> &'static str {
        match self {
            WallSide::North => "north",
            WallSide::East => "east",
            WallSide::South => "south",
            WallSide::West => "west",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [WallSide::North, WallSide::East, WallSide::South, WallSide::West].into_iter().find(|w| w.name() == s)
    }

    /// Where this side ends up after the scene is turned by `k`.
    pub fn rotated(self, k: Rotation) -> Self {
        (0..k.quarter_turns()).fold(self, |side, _| match side {
            WallSide::North => WallSide::West,
            WallSide::West => WallSide::South,
            WallSide::South => WallSide::East,
            WallSide::East => WallSide::North,
        })
    }

    /// Facing direction of an item standing against this side.
    pub fn inward_direction(self) -> Rotation {
        match self {
            WallSide::North => Rotation::R0,
            WallSide::West => Rotation::R90,
            WallSide::South => Rotation::R180,
            WallSide::East => Rotation::R270,
        }
    }
}

/// A door or window; `position` is the span midpoint on its wall.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Opening {
    pub kind: OpeningKind,
    pub position: Point,
    pub length: f64,
    pub side: WallSide,
}

/// Axis-aligned wall segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WallFragment {
    pub a: Point,
    pub b: Point,
}

impl WallFragment {
    pub fn new(a: Point, b: Point) -> Self {
        WallFragment { a, b }
    }

    pub fn is_horizontal(&self) -> bool {
        self.a.y == self.b.y && self.a.x != self.b.x
    }

    pub fn is_vertical(&self) -> bool {
        self.a.x == self.b.x && self.a.y != self.b.y
    }

    pub fn length(&self) -> f64 {
        (self.b.x - self.a.x).abs() + (self.b.y - self.a.y).abs()
    }

    /// Distance from `p` to this axis-aligned segment.
    pub fn distance_to(&self, p: Point) -> f64 {
        let cx = p.x.clamp(self.a.x.min(self.b.x), self.a.x.max(self.b.x));
        let cy = p.y.clamp(self.a.y.min(self.b.y), self.a.y.max(self.b.y));
        ((p.x - cx).powi(2) + (p.y - cy).powi(2)).sqrt()
    }
}

/// An empty room: a closed rectilinear wall loop plus its openings.
#[derive(Clone, Debug, PartialEq)]
pub struct Room {
    pub extent: Extent,
    pub walls: Vec<WallFragment>,
    pub openings: Vec<Opening>,
}

impl Room {
    /// Rectangular room with four clockwise walls.
    pub fn rectangle(extent: Extent) -> Self {
        let (w, h) = (extent.w, extent.h);
        let corners = [Point::new(0.0, 0.0), Point::new(w, 0.0), Point::new(w, h), Point::new(0.0, h)];
        let walls = (0..4).map(|i| WallFragment::new(corners[i], corners[(i + 1) % 4])).collect();
        Room { extent, walls, openings: Vec::new() }
    }

    /// The wall fragment whose segment passes within `tol` of `p`.
    pub fn wall_at(&self, p: Point, tol: f64) -> Option<&WallFragment> {
        self.walls.iter().find(|w| w.distance_to(p) <= tol)
    }

    fn on_boundary(&self, p: Point) -> bool {
        self.walls.iter().any(|w| w.distance_to(p) <= 1e-9)
    }

    /// Inclusive point-in-polygon test for the wall loop.
    pub fn contains_point(&self, p: Point) -> bool {
        if self.on_boundary(p) {
            return true;
        }
        // Ray cast toward +x; only vertical walls can cross it.
        let mut inside = false;
        for w in &self.walls {
            if w.a.x != w.b.x {
                continue;
            }
            let (y0, y1) = (w.a.y.min(w.b.y), w.a.y.max(w.b.y));
            if p.y >= y0 && p.y < y1 && w.a.x > p.x {
                inside = !inside;
            }
        }
        inside
    }

    /// True when the box lies inside the loop (touching walls is allowed).
    pub fn contains_box(&self, b: &Aabb) -> bool {
        let corners = [b.min, Point::new(b.max.x, b.min.y), b.max, Point::new(b.min.x, b.max.y)];
        if !corners.iter().all(|c| self.contains_point(*c)) {
            return false;
        }
        // A reflex corner of the loop could still cut into the box.
        !self.walls.iter().any(|w| {
            let (x0, x1) = (w.a.x.min(w.b.x), w.a.x.max(w.b.x));
            let (y0, y1) = (w.a.y.min(w.b.y), w.a.y.max(w.b.y));
            x1 > b.min.x && x0 < b.max.x && y1 > b.min.y && y0 < b.max.y
        })
    }
}

/// A room, its furniture and the scene orientation.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneLayout {
    pub scene_id: String,
    pub room_type: RoomType,
    pub theta: Rotation,
    pub room: Room,
    pub items: Vec<FurnitureItem>,
}

/// Maps a point through `k` quarter turns of a `W x H` extent.
pub fn rotate_point(p: Point, k: Rotation, extent: Extent) -> Result<Point, LayoutError> {
    if !(p.x >= 0.0 && p.x <= extent.w && p.y >= 0.0 && p.y <= extent.h) {
        return Err(LayoutError::PointOutsideExtent { x: p.x, y: p.y, w: extent.w, h: extent.h });
    }
    Ok(rotate_point_unchecked(p, k, extent))
}

fn rotate_point_unchecked(p: Point, k: Rotation, extent: Extent) -> Point {
    let mut p = p;
    let mut ext = extent;
    for _ in 0..k.quarter_turns() {
        p = Point::new(p.y, ext.w - p.x);
        ext = ext.transposed();
    }
    p
}

/// Turns the whole scene by `k` quarter turns.
///
/// Item sizes and categories are untouched; centers, opening midpoints and
/// wall endpoints move, directions advance by `k`, and the extent swaps for
/// odd `k`.
pub fn rotate_layout(s: &SceneLayout, k: Rotation) -> SceneLayout {
    let extent = s.room.extent;
    let map = |p: Point| rotate_point_unchecked(p, k, extent);
    let room = Room {
        extent: extent.rotated(k),
        walls: s.room.walls.iter().map(|w| WallFragment::new(map(w.a), map(w.b))).collect(),
        openings: s.room.openings.iter().map(|o| Opening { position: map(o.position), side: o.side.rotated(k), ..*o }).collect(),
    };
    let items = s.items.iter().map(|it| FurnitureItem { position: map(it.position), direction: it.direction.then(k), ..*it }).collect();
    SceneLayout { scene_id: s.scene_id.clone(), room_type: s.room_type, theta: s.theta.then(k), room, items }
}
