use std::fmt;

use super::{iou, item_bbox, Point, SceneLayout};

/// Largest pairwise item IoU a valid layout may contain.
pub const MAX_ITEM_IOU: f64 = 0.3;

/// Openings must sit within this distance (cm) of a wall segment.
const OPENING_TOLERANCE: f64 = 0.5;

/// One broken invariant of a scene.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    DegenerateExtent,
    WallDegenerate(usize),
    WallNotAxisAligned(usize),
    WallsNotClosed,
    ExtentMismatch,
    OpeningLength(usize),
    OpeningOffWall(usize),
    ItemSize(usize),
    ItemOutsideRoom(usize),
    ItemsOverlap { first: usize, second: usize, iou: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DegenerateExtent => write!(f, "room extent is degenerate"),
            Violation::WallDegenerate(i) => write!(f, "wall {i} is degenerate"),
            Violation::WallNotAxisAligned(i) => write!(f, "wall {i} is not axis-aligned"),
            Violation::WallsNotClosed => write!(f, "walls do not form a closed loop"),
            Violation::ExtentMismatch => write!(f, "extent does not match the wall bounding box"),
            Violation::OpeningLength(i) => write!(f, "opening {i} has non-positive length"),
            Violation::OpeningOffWall(i) => write!(f, "opening {i} is not on a wall"),
            Violation::ItemSize(i) => write!(f, "item {i} has non-positive size"),
            Violation::ItemOutsideRoom(i) => write!(f, "item {i} outside room"),
            Violation::ItemsOverlap { first, second, iou } => {
                write!(f, "items {first},{second} overlap IoU {iou:.1} > {MAX_ITEM_IOU}")
            }
        }
    }
}

/// Checks every room, wall, opening and item invariant; empty means valid.
pub fn validate_layout(s: &SceneLayout) -> Vec<Violation> {
    let mut out = Vec::new();
    let room = &s.room;
    let ext = room.extent;
    if !(ext.w > 0.0 && ext.h > 0.0 && ext.w.is_finite() && ext.h.is_finite()) {
        out.push(Violation::DegenerateExtent);
    }

    let mut walls_ok = !room.walls.is_empty();
    for (i, w) in room.walls.iter().enumerate() {
        if w.a == w.b {
            out.push(Violation::WallDegenerate(i));
            walls_ok = false;
        } else if !(w.is_horizontal() || w.is_vertical()) {
            out.push(Violation::WallNotAxisAligned(i));
            walls_ok = false;
        }
    }
    let n = room.walls.len();
    let closed = n >= 4 && (0..n).all(|i| room.walls[i].b == room.walls[(i + 1) % n].a);
    if !closed {
        out.push(Violation::WallsNotClosed);
        walls_ok = false;
    }
    if n > 0 {
        let pts = room.walls.iter().flat_map(|w| [w.a, w.b]);
        let (mut lo, mut hi) = (Point::new(f64::INFINITY, f64::INFINITY), Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
        for p in pts {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        if lo != Point::new(0.0, 0.0) || hi != Point::new(ext.w, ext.h) {
            out.push(Violation::ExtentMismatch);
        }
    }

    for (i, o) in room.openings.iter().enumerate() {
        if !(o.length > 0.0) {
            out.push(Violation::OpeningLength(i));
        }
        if room.wall_at(o.position, OPENING_TOLERANCE).is_none() {
            out.push(Violation::OpeningOffWall(i));
        }
    }

    let boxes: Vec<_> = s.items.iter().map(item_bbox).collect();
    for (i, it) in s.items.iter().enumerate() {
        if !(it.size.w > 0.0 && it.size.h > 0.0 && it.size.w.is_finite() && it.size.h.is_finite()) {
            out.push(Violation::ItemSize(i));
            continue;
        }
        if walls_ok && !room.contains_box(&boxes[i]) {
            out.push(Violation::ItemOutsideRoom(i));
        }
    }
    for i in 0..boxes.len() {
        for j in i + 1..boxes.len() {
            if !(boxes[i].is_valid() && boxes[j].is_valid()) {
                continue;
            }
            let v = iou(&boxes[i], &boxes[j]);
            if v > MAX_ITEM_IOU {
                out.push(Violation::ItemsOverlap { first: i, second: j, iou: v });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::*;

    fn scene(items: Vec<FurnitureItem>) -> SceneLayout {
        SceneLayout {
            scene_id: "v".into(),
            room_type: RoomType::Study,
            theta: Rotation::R0,
            room: Room::rectangle(Extent::new(300.0, 300.0)),
            items,
        }
    }

    fn chair(x: f64, y: f64) -> FurnitureItem {
        FurnitureItem::new(CategoryId::CHAIR, Point::new(x, y), Extent::new(50.0, 50.0), Rotation::R0)
    }

    #[test]
    fn valid_scene_has_no_violations() {
        assert!(validate_layout(&scene(vec![chair(100.0, 100.0), chair(200.0, 200.0)])).is_empty());
    }

    #[test]
    fn item_outside_room_is_reported() {
        let v = validate_layout(&scene(vec![chair(400.0, 100.0)]));
        assert_eq!(v, vec![Violation::ItemOutsideRoom(0)]);
        assert_eq!(v[0].to_string(), "item 0 outside room");
    }

    #[test]
    fn stacked_items_overlap() {
        let v = validate_layout(&scene(vec![chair(100.0, 100.0), chair(100.0, 100.0)]));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].to_string(), "items 0,1 overlap IoU 1.0 > 0.3");
    }

    #[test]
    fn broken_walls_and_openings() {
        let mut s = scene(vec![]);
        s.room.walls.pop();
        s.room.openings.push(Opening { kind: OpeningKind::Door, position: Point::new(150.0, 150.0), length: 0.0, side: WallSide::North });
        let v = validate_layout(&s);
        assert!(v.contains(&Violation::WallsNotClosed));
        assert!(v.contains(&Violation::OpeningLength(0)));
        assert!(v.contains(&Violation::OpeningOffWall(0)));
    }

    #[test]
    fn negative_size_is_reported() {
        let mut c = chair(100.0, 100.0);
        c.size.w = -5.0;
        assert_eq!(validate_layout(&scene(vec![c])), vec![Violation::ItemSize(0)]);
    }

    #[test]
    fn extent_must_match_walls() {
        let mut s = scene(vec![]);
        s.room.extent = Extent::new(310.0, 300.0);
        assert!(validate_layout(&s).contains(&Violation::ExtentMismatch));
    }
}
