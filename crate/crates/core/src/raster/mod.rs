//! Top-down rasterization of rooms and layouts, mode masks, and the inverse
//! extraction of furniture from (possibly soft) label grids.
//!
//! Rooms are letterboxed into a square `R x R` grid: the longer side spans
//! the full grid and the shorter side is centered. Every grid is stored
//! channels-first, row-major, matching the tensor engine's layout.

mod pnm;

pub use pnm::{write_layout_ppm, write_pgm, write_room_ppm, CATEGORY_PALETTE};

use std::collections::VecDeque;

use thiserror::Error;

use crate::layout::{item_bbox, rotate_layout, Aabb, CategoryId, Extent, FurnitureItem, Point, Room, Rotation, SceneLayout, N_CATEGORIES};
use crate::tensor::quarter_turn_planes;

/// Slack when snapping box edges that land on pixel boundaries.
const SNAP_EPS: f64 = 1e-9;

/// Smallest connected component `extract_items` turns into an item.
pub const MIN_COMPONENT_PX: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum RasterError {
    #[error("resolution {0} must be at least 16 and a multiple of 4")]
    InvalidResolution(usize),
    #[error("room extent {w} x {h} is degenerate")]
    DegenerateExtent { w: f64, h: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RasterConfig {
    resolution: usize,
}

impl RasterConfig {
    pub fn new(resolution: usize) -> Result<Self, RasterError> {
        if resolution < 16 || !resolution.is_multiple_of(4) {
            return Err(RasterError::InvalidResolution(resolution));
        }
        Ok(RasterConfig { resolution })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Category channels including the empty channel 0.
    pub fn cat_channels(&self) -> usize {
        N_CATEGORIES + 1
    }

    pub fn frame(&self, extent: Extent) -> Result<Frame, RasterError> {
        Frame::new(extent, self.resolution)
    }
}

/// Pixel rectangle `[c0, c1) x [r0, r1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PixelRect {
    pub c0: usize,
    pub c1: usize,
    pub r0: usize,
    pub r1: usize,
}

impl PixelRect {
    pub fn area(&self) -> usize {
        (self.c1 - self.c0) * (self.r1 - self.r0)
    }

    fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.r0..self.r1).flat_map(move |r| (self.c0..self.c1).map(move |c| (r, c)))
    }
}

/// Mapping between room centimetres and grid pixels for one extent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub resolution: usize,
    pub cm_per_px: f64,
    pub offset_x: f64,
    pub offset_y: f64,
}

impl Frame {
    pub fn new(extent: Extent, resolution: usize) -> Result<Self, RasterError> {
        if !(extent.w > 0.0 && extent.h > 0.0 && extent.w.is_finite() && extent.h.is_finite()) {
            return Err(RasterError::DegenerateExtent { w: extent.w, h: extent.h });
        }
        let r = resolution as f64;
        let cm_per_px = extent.w.max(extent.h) / r;
        Ok(Frame { resolution, cm_per_px, offset_x: (r - extent.w / cm_per_px) / 2.0, offset_y: (r - extent.h / cm_per_px) / 2.0 })
    }

    pub fn to_px(&self, p: Point) -> (f64, f64) {
        (p.x / self.cm_per_px + self.offset_x, p.y / self.cm_per_px + self.offset_y)
    }

    pub fn to_cm(&self, px: f64, py: f64) -> Point {
        Point::new((px - self.offset_x) * self.cm_per_px, (py - self.offset_y) * self.cm_per_px)
    }

    /// Smallest pixel rectangle covering the box, clipped to the grid.
    pub fn cover(&self, b: &Aabb) -> PixelRect {
        let r = self.resolution as f64;
        let (x0, y0) = self.to_px(b.min);
        let (x1, y1) = self.to_px(b.max);
        let lo = |v: f64| (v + SNAP_EPS).floor().clamp(0.0, r) as usize;
        let hi = |v: f64| (v - SNAP_EPS).ceil().clamp(0.0, r) as usize;
        let (c0, r0) = (lo(x0), lo(y0));
        let (mut c1, mut r1) = (hi(x1), hi(y1));
        // Thin boxes still occupy one pixel.
        if c1 <= c0 {
            c1 = (c0 + 1).min(self.resolution);
        }
        if r1 <= r0 {
            r1 = (r0 + 1).min(self.resolution);
        }
        let c0 = c0.min(c1.saturating_sub(1));
        let r0 = r0.min(r1.saturating_sub(1));
        PixelRect { c0, c1, r0, r1 }
    }
}

/// Empty-room image with channels (wall, door, window).
#[derive(Clone, Debug, PartialEq)]
pub struct RoomImage {
    pub resolution: usize,
    pub data: Vec<f64>,
}

impl RoomImage {
    pub const CHANNELS: usize = 3;

    pub fn plane(&self, channel: usize) -> &[f64] {
        let n = self.resolution * self.resolution;
        &self.data[channel * n..(channel + 1) * n]
    }
}

/// One-hot category map (channel 0 = empty) plus a direction map that is
/// one-hot on furniture pixels and zero elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct LayoutImage {
    pub resolution: usize,
    pub cat: Vec<f64>,
    pub dir: Vec<f64>,
}

impl LayoutImage {
    pub const DIR_CHANNELS: usize = 4;

    pub fn empty(resolution: usize) -> Self {
        let n = resolution * resolution;
        let mut cat = vec![0.0; (N_CATEGORIES + 1) * n];
        cat[..n].fill(1.0);
        LayoutImage { resolution, cat, dir: vec![0.0; Self::DIR_CHANNELS * n] }
    }

    pub fn cat_channels(&self) -> usize {
        self.cat.len() / (self.resolution * self.resolution)
    }

    pub fn cat_plane(&self, channel: usize) -> &[f64] {
        let n = self.resolution * self.resolution;
        &self.cat[channel * n..(channel + 1) * n]
    }

    pub fn dir_plane(&self, channel: usize) -> &[f64] {
        let n = self.resolution * self.resolution;
        &self.dir[channel * n..(channel + 1) * n]
    }

    /// Category and direction channels stacked, categories first.
    pub fn to_channels(&self) -> Vec<f64> {
        let mut v = self.cat.clone();
        v.extend_from_slice(&self.dir);
        v
    }

    /// Exact grid quarter turn: pixels move as the scene does and the
    /// direction one-hot advances by `k` channels.
    pub fn rotated(&self, k: Rotation) -> LayoutImage {
        let r = self.resolution;
        let cat = quarter_turn_planes(&self.cat, r, k);
        let turned = quarter_turn_planes(&self.dir, r, k);
        let n = r * r;
        let mut dir = vec![0.0; turned.len()];
        for d in 0..Self::DIR_CHANNELS {
            let to = (d + k.quarter_turns()) % Self::DIR_CHANNELS;
            dir[to * n..(to + 1) * n].copy_from_slice(&turned[d * n..(d + 1) * n]);
        }
        LayoutImage { resolution: r, cat, dir }
    }

    /// Per-pixel argmax over category channels (lowest index wins ties).
    pub fn argmax_categories(&self) -> Vec<usize> {
        let n = self.resolution * self.resolution;
        let channels = self.cat_channels();
        (0..n)
            .map(|i| {
                let mut best = 0;
                for c in 1..channels {
                    if self.cat[c * n + i] > self.cat[best * n + i] {
                        best = c;
                    }
                }
                best
            })
            .collect()
    }
}

/// Binary attention map, 1 inside furniture boxes.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeMask {
    pub resolution: usize,
    pub data: Vec<f64>,
}

impl ModeMask {
    pub fn ones(resolution: usize) -> Self {
        ModeMask { resolution, data: vec![1.0; resolution * resolution] }
    }

    pub fn zeros(resolution: usize) -> Self {
        ModeMask { resolution, data: vec![0.0; resolution * resolution] }
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|v| **v == 1.0).count()
    }

    pub fn rotated(&self, k: Rotation) -> ModeMask {
        ModeMask { resolution: self.resolution, data: quarter_turn_planes(&self.data, self.resolution, k) }
    }
}

fn band(center_px: f64, r: usize) -> (usize, usize) {
    let c = center_px.round() as i64;
    ((c - 1).clamp(0, r as i64) as usize, (c + 1).clamp(0, r as i64) as usize)
}

fn span(a: f64, b: f64, r: usize) -> (usize, usize) {
    let (lo, hi) = (a.min(b), a.max(b));
    (lo.round().clamp(0.0, r as f64) as usize, hi.round().clamp(0.0, r as f64) as usize)
}

/// Paints walls as 2-pixel bands centered on each wall line, then carves
/// door and window spans out of the wall channel into their own channels.
pub fn render_empty_room(room: &Room, cfg: &RasterConfig) -> Result<RoomImage, RasterError> {
    let r = cfg.resolution();
    let frame = cfg.frame(room.extent)?;
    let n = r * r;
    let mut data = vec![0.0; RoomImage::CHANNELS * n];
    for w in &room.walls {
        let (ax, ay) = frame.to_px(w.a);
        let (bx, by) = frame.to_px(w.b);
        let (rows, cols) = if w.is_horizontal() {
            let (c0, c1) = span(ax, bx, r);
            (band(ay, r), (c0.saturating_sub(1), (c1 + 1).min(r)))
        } else {
            let (r0, r1) = span(ay, by, r);
            ((r0.saturating_sub(1), (r1 + 1).min(r)), band(ax, r))
        };
        for row in rows.0..rows.1 {
            data[row * r + cols.0..row * r + cols.1].fill(1.0);
        }
    }
    for o in &room.openings {
        let Some(w) = room.wall_at(o.position, 0.5) else { continue };
        let channel = match o.kind {
            crate::layout::OpeningKind::Door => 1,
            crate::layout::OpeningKind::Window => 2,
        };
        let half = o.length / 2.0;
        let (rows, cols) = if w.is_horizontal() {
            let (x0, y) = frame.to_px(Point::new(o.position.x - half, o.position.y));
            let (x1, _) = frame.to_px(Point::new(o.position.x + half, o.position.y));
            (band(y, r), span(x0, x1, r))
        } else {
            let (x, y0) = frame.to_px(Point::new(o.position.x, o.position.y - half));
            let (_, y1) = frame.to_px(Point::new(o.position.x, o.position.y + half));
            (span(y0, y1, r), band(x, r))
        };
        for row in rows.0..rows.1 {
            for col in cols.0..cols.1 {
                let i = row * r + col;
                data[i] = 0.0;
                data[channel * n + i] = 1.0;
            }
        }
    }
    Ok(RoomImage { resolution: r, data })
}

/// Paints each item's covering box with its category and direction;
/// later items overwrite earlier ones.
pub fn render_layout(s: &SceneLayout, cfg: &RasterConfig) -> Result<LayoutImage, RasterError> {
    let r = cfg.resolution();
    let frame = cfg.frame(s.room.extent)?;
    let n = r * r;
    let mut img = LayoutImage::empty(r);
    let cat_channels = img.cat_channels();
    for it in &s.items {
        let rect = frame.cover(&item_bbox(it));
        let cat = it.category.channel();
        let dir = it.direction.quarter_turns();
        for (row, col) in rect.cells() {
            let i = row * r + col;
            for c in 0..cat_channels {
                img.cat[c * n + i] = if c == cat { 1.0 } else { 0.0 };
            }
            for d in 0..LayoutImage::DIR_CHANNELS {
                img.dir[d * n + i] = if d == dir { 1.0 } else { 0.0 };
            }
        }
    }
    Ok(img)
}

/// Union of the furniture boxes of `s` turned by `k`.
pub fn mode_mask(s: &SceneLayout, k: Rotation, cfg: &RasterConfig) -> Result<ModeMask, RasterError> {
    let turned = rotate_layout(s, k);
    let r = cfg.resolution();
    let frame = cfg.frame(turned.room.extent)?;
    let mut mask = ModeMask::zeros(r);
    for it in &turned.items {
        for (row, col) in frame.cover(&item_bbox(it)).cells() {
            mask.data[row * r + col] = 1.0;
        }
    }
    Ok(mask)
}

/// Hadamard product of every channel with the mask.
pub fn apply_mask(img: &LayoutImage, m: &ModeMask) -> Result<LayoutImage, RasterError> {
    if img.resolution != m.resolution {
        return Err(RasterError::ShapeMismatch(format!("layout is {0}x{0} but mask is {1}x{1}", img.resolution, m.resolution)));
    }
    let n = m.data.len();
    let mul = |v: &[f64]| -> Vec<f64> { v.iter().enumerate().map(|(i, x)| x * m.data[i % n]).collect() };
    Ok(LayoutImage { resolution: img.resolution, cat: mul(&img.cat), dir: mul(&img.dir) })
}

/// A furniture item recovered from a label grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detection {
    pub item: FurnitureItem,
    pub confidence: f64,
}

/// Turns 4-connected same-category regions back into furniture items.
///
/// Each component of at least [`MIN_COMPONENT_PX`] pixels becomes one item
/// whose box is the component's bounding box. Touching same-category items
/// merge into one component.
pub fn extract_items(img: &LayoutImage, frame: &Frame) -> Result<Vec<Detection>, RasterError> {
    let r = img.resolution;
    if frame.resolution != r {
        return Err(RasterError::ShapeMismatch(format!("layout is {r}x{r} but frame is for {0}x{0}", frame.resolution)));
    }
    let n = r * r;
    let labels = img.argmax_categories();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    let mut pixels = Vec::new();
    for start in 0..n {
        if seen[start] || labels[start] == 0 {
            continue;
        }
        let cat = labels[start];
        seen[start] = true;
        queue.push_back(start);
        pixels.clear();
        while let Some(i) = queue.pop_front() {
            pixels.push(i);
            let (row, col) = (i / r, i % r);
            let mut visit = |j: usize| {
                if !seen[j] && labels[j] == cat {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if row > 0 {
                visit(i - r);
            }
            if row + 1 < r {
                visit(i + r);
            }
            if col > 0 {
                visit(i - 1);
            }
            if col + 1 < r {
                visit(i + 1);
            }
        }
        if pixels.len() < MIN_COMPONENT_PX {
            continue;
        }
        let (mut c0, mut c1, mut r0, mut r1) = (r, 0, r, 0);
        let mut dir_sum = [0.0; LayoutImage::DIR_CHANNELS];
        let mut conf = 0.0;
        for &i in &pixels {
            let (row, col) = (i / r, i % r);
            c0 = c0.min(col);
            c1 = c1.max(col + 1);
            r0 = r0.min(row);
            r1 = r1.max(row + 1);
            for (d, s) in dir_sum.iter_mut().enumerate() {
                *s += img.dir[d * n + i];
            }
            conf += img.cat[cat * n + i];
        }
        let mut dir = 0;
        for d in 1..LayoutImage::DIR_CHANNELS {
            if dir_sum[d] > dir_sum[dir] {
                dir = d;
            }
        }
        let direction = Rotation::ALL[dir];
        let lo = frame.to_cm(c0 as f64, r0 as f64);
        let hi = frame.to_cm(c1 as f64, r1 as f64);
        let bbox = Aabb::new(lo, hi);
        let size = Extent::new(bbox.width(), bbox.height()).rotated(direction);
        let category = CategoryId::new(cat as u8).expect("label channel is a catalog id");
        out.push(Detection { item: FurnitureItem::new(category, bbox.center(), size, direction), confidence: conf / pixels.len() as f64 });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{Opening, OpeningKind, RoomType, WallSide};

    fn cfg(r: usize) -> RasterConfig {
        RasterConfig::new(r).unwrap()
    }

    fn scene(extent: Extent, items: Vec<FurnitureItem>) -> SceneLayout {
        SceneLayout { scene_id: "r".into(), room_type: RoomType::Bedroom, theta: Rotation::R0, room: Room::rectangle(extent), items }
    }

    #[test]
    fn config_rejects_bad_resolutions() {
        assert!(RasterConfig::new(12).is_err());
        assert!(RasterConfig::new(18).is_err());
        assert!(RasterConfig::new(16).is_ok());
    }

    #[test]
    fn empty_room_ring_at_r8() {
        // Hand count at R=8: a 1-cell border ring has 8*4 - 4 = 28 cells.
        let room = Room::rectangle(Extent::new(400.0, 400.0));
        let img = render_empty_room(&room, &RasterConfig { resolution: 8 }).unwrap();
        let wall = img.plane(0);
        assert_eq!(wall.iter().filter(|v| **v == 1.0).count(), 28);
        for row in 0..8 {
            for col in 0..8 {
                let border = row == 0 || row == 7 || col == 0 || col == 7;
                assert_eq!(wall[row * 8 + col] == 1.0, border, "({row},{col})");
            }
        }
    }

    #[test]
    fn empty_room_ring_at_r64() {
        let room = Room::rectangle(Extent::new(400.0, 400.0));
        let img = render_empty_room(&room, &cfg(64)).unwrap();
        assert_eq!(img.plane(0).iter().filter(|v| **v == 1.0).count(), 64 * 4 - 4);
        assert!(img.plane(1).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn door_span_replaces_wall() {
        let mut room = Room::rectangle(Extent::new(400.0, 400.0));
        room.openings.push(Opening { kind: OpeningKind::Door, position: Point::new(200.0, 400.0), length: 80.0, side: WallSide::South });
        let img = render_empty_room(&room, &cfg(64)).unwrap();
        let door = img.plane(1);
        let bottom = &door[63 * 64..];
        let cells: Vec<usize> = (0..64).filter(|c| bottom[*c] == 1.0).collect();
        assert!((12..=13).contains(&cells.len()), "{}", cells.len());
        assert!(cells.windows(2).all(|w| w[1] == w[0] + 1));
        for c in &cells {
            assert_eq!(img.plane(0)[63 * 64 + c], 0.0);
        }
        assert_eq!(door.iter().filter(|v| **v == 1.0).count(), cells.len());
        assert_eq!(render_empty_room(&room, &cfg(64)).unwrap(), img);
    }

    #[test]
    fn degenerate_room_is_an_error() {
        let room = Room::rectangle(Extent::new(0.0, 100.0));
        assert!(matches!(render_empty_room(&room, &cfg(16)), Err(RasterError::DegenerateExtent { .. })));
    }

    #[test]
    fn zero_items_render_empty() {
        let img = render_layout(&scene(Extent::new(320.0, 320.0), vec![]), &cfg(32)).unwrap();
        assert!(img.cat_plane(0).iter().all(|v| *v == 1.0));
        assert!(img.dir.iter().all(|v| *v == 0.0));
        let m = mode_mask(&scene(Extent::new(320.0, 320.0), vec![]), Rotation::R90, &cfg(32)).unwrap();
        assert_eq!(m.count_ones(), 0);
    }

    #[test]
    fn item_covering_ten_by_six_pixels() {
        // 320 cm over 32 px: 10 cm per pixel, box 100 x 60 cm aligned to the grid.
        let item = FurnitureItem::new(CategoryId::DESK, Point::new(150.0, 130.0), Extent::new(100.0, 60.0), Rotation::R180);
        let s = scene(Extent::new(320.0, 320.0), vec![item]);
        let img = render_layout(&s, &cfg(32)).unwrap();
        let desk = img.cat_plane(CategoryId::DESK.channel());
        assert_eq!(desk.iter().filter(|v| **v == 1.0).count(), 60);
        assert_eq!(img.dir_plane(2).iter().filter(|v| **v == 1.0).count(), 60);
        assert_eq!(img.dir.iter().filter(|v| **v == 1.0).count(), 60);
        assert_eq!(mode_mask(&s, Rotation::R0, &cfg(32)).unwrap().count_ones(), 60);
    }

    #[test]
    fn later_items_overwrite() {
        let a = FurnitureItem::new(CategoryId::BED, Point::new(100.0, 100.0), Extent::new(100.0, 100.0), Rotation::R0);
        let b = FurnitureItem::new(CategoryId::DESK, Point::new(150.0, 100.0), Extent::new(100.0, 100.0), Rotation::R90);
        let img = render_layout(&scene(Extent::new(320.0, 320.0), vec![a, b]), &cfg(32)).unwrap();
        let i = 10 * 32 + 12;
        assert_eq!(img.cat_plane(CategoryId::DESK.channel())[i], 1.0);
        assert_eq!(img.cat_plane(CategoryId::BED.channel())[i], 0.0);
        assert_eq!(img.dir_plane(1)[i], 1.0);
    }

    #[test]
    fn masks_select_the_box() {
        let item = FurnitureItem::new(CategoryId::SOFA, Point::new(150.0, 130.0), Extent::new(100.0, 60.0), Rotation::R0);
        let s = scene(Extent::new(320.0, 320.0), vec![item]);
        let gt = render_layout(&s, &cfg(32)).unwrap();
        assert_eq!(apply_mask(&gt, &ModeMask::ones(32)).unwrap(), gt);
        let z = apply_mask(&gt, &ModeMask::zeros(32)).unwrap();
        assert!(z.cat.iter().chain(z.dir.iter()).all(|v| *v == 0.0));
        let m = mode_mask(&s, Rotation::R0, &cfg(32)).unwrap();
        let g = apply_mask(&gt, &m).unwrap();
        for i in 0..32 * 32 {
            for c in 0..gt.cat_channels() {
                assert_eq!(g.cat[c * 1024 + i], gt.cat[c * 1024 + i] * m.data[i]);
            }
        }
        assert!(g.cat_plane(0).iter().all(|v| *v == 0.0));
        assert_eq!(apply_mask(&g, &m).unwrap(), g);
        assert!(apply_mask(&gt, &ModeMask::ones(16)).is_err());
    }

    #[test]
    fn extract_empty_image() {
        let frame = cfg(32).frame(Extent::new(320.0, 320.0)).unwrap();
        assert!(extract_items(&LayoutImage::empty(32), &frame).unwrap().is_empty());
    }

    #[test]
    fn extract_recovers_one_item() {
        let item = FurnitureItem::new(CategoryId::BED, Point::new(150.0, 120.0), Extent::new(160.0, 200.0), Rotation::R90);
        let s = scene(Extent::new(400.0, 300.0), vec![item]);
        let c = cfg(64);
        let img = render_layout(&s, &c).unwrap();
        let frame = c.frame(s.room.extent).unwrap();
        let got = extract_items(&img, &frame).unwrap();
        assert_eq!(got.len(), 1);
        let d = got[0];
        assert_eq!(d.item.category, CategoryId::BED);
        assert_eq!(d.item.direction, Rotation::R90);
        assert_eq!(d.confidence, 1.0);
        assert!((d.item.position.x - 150.0).abs() <= frame.cm_per_px);
        assert!((d.item.position.y - 120.0).abs() <= frame.cm_per_px);
        assert!((d.item.size.w - 160.0).abs() <= 2.0 * frame.cm_per_px);
    }

    #[test]
    fn touching_same_category_items_merge() {
        let a = FurnitureItem::new(CategoryId::CHAIR, Point::new(50.0, 50.0), Extent::new(60.0, 60.0), Rotation::R0);
        let b = FurnitureItem::new(CategoryId::CHAIR, Point::new(110.0, 50.0), Extent::new(60.0, 60.0), Rotation::R0);
        let s = scene(Extent::new(320.0, 320.0), vec![a, b]);
        let img = render_layout(&s, &cfg(32)).unwrap();
        let frame = cfg(32).frame(s.room.extent).unwrap();
        let got = extract_items(&img, &frame).unwrap();
        assert_eq!(got.len(), 1);
        assert!((got[0].item.size.w - 120.0).abs() < 1e-9);
    }

    #[test]
    fn speckle_is_ignored() {
        let mut img = LayoutImage::empty(16);
        for i in [0usize, 1, 16] {
            img.cat[i] = 0.0;
            img.cat[3 * 256 + i] = 1.0;
        }
        let frame = cfg(16).frame(Extent::new(160.0, 160.0)).unwrap();
        assert!(extract_items(&img, &frame).unwrap().is_empty());
    }

    #[test]
    fn letterbox_centers_short_side() {
        let f = Frame::new(Extent::new(400.0, 200.0), 32).unwrap();
        assert_eq!(f.cm_per_px, 12.5);
        assert_eq!(f.offset_x, 0.0);
        assert_eq!(f.offset_y, 8.0);
        assert_eq!(f.to_cm(0.0, 8.0), Point::new(0.0, 0.0));
    }
}
