//! Rule-based room furnishing with rejection sampling.
//!
//! Every coordinate the generator emits is a multiple of 5 cm, which keeps
//! quarter turns exact in floating point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::layout::{
    item_bbox, validate_layout, Aabb, CategoryId, Extent, FurnitureItem, Opening, OpeningKind, Point, Room, RoomType, Rotation,
    SceneLayout, WallSide,
};

use super::SynthError;

/// Give up on a spec after this many rejected attempts.
pub const MAX_ATTEMPTS: usize = 1000;
/// Minimum free gap between any two pieces of furniture.
pub const CLEARANCE_CM: f64 = 20.0;
/// Depth of the free zone kept in front of a door.
pub const DOOR_SWING_CM: f64 = 90.0;
pub const EXTENT_RANGE_CM: (f64, f64) = (250.0, 500.0);
const GRID: f64 = 5.0;
const PLACEMENT_TRIES: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GenSpec {
    pub room_type: RoomType,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Rule {
    /// Back against the longest wall.
    LongestWall,
    /// Back against the wall holding the first window when possible.
    WindowWall,
    /// Back against the shared plumbing wall.
    PlumbingWall,
    AnyWall,
    Corner,
    /// Same wall as template entry `i`, directly beside it.
    Beside(usize),
    /// In front of template entry `i`, facing it.
    Facing(usize),
}

#[derive(Clone, Copy, Debug)]
struct Entry {
    cat: CategoryId,
    /// Width along the wall, in multiples of 10 cm.
    width: (u32, u32),
    depth: (u32, u32),
    count: (usize, usize),
    rule: Rule,
    /// Tall pieces stay clear of windows.
    tall: bool,
}

const fn entry(cat: CategoryId, width: (u32, u32), depth: (u32, u32), count: (usize, usize), rule: Rule) -> Entry {
    Entry { cat, width, depth, count, rule, tall: false }
}

const fn tall(e: Entry) -> Entry {
    Entry { tall: true, ..e }
}

fn template(t: RoomType) -> Vec<Entry> {
    use CategoryId as C;
    match t {
        RoomType::Bedroom => vec![
            entry(C::BED, (140, 180), (200, 210), (1, 1), Rule::LongestWall),
            entry(C::NIGHTSTAND, (40, 50), (40, 50), (1, 2), Rule::Beside(0)),
            tall(entry(C::WARDROBE, (100, 180), (60, 60), (0, 1), Rule::AnyWall)),
            entry(C::DESK, (100, 140), (50, 60), (0, 1), Rule::WindowWall),
        ],
        RoomType::Bathroom => vec![
            entry(C::TOILET, (40, 40), (70, 70), (1, 1), Rule::PlumbingWall),
            entry(C::SINK, (50, 80), (40, 50), (1, 1), Rule::PlumbingWall),
            entry(C::SHOWER, (80, 100), (80, 100), (1, 1), Rule::Corner),
            entry(C::WASHING_MACHINE, (60, 60), (60, 60), (0, 1), Rule::AnyWall),
        ],
        RoomType::Study => vec![
            entry(C::DESK, (120, 160), (60, 70), (1, 1), Rule::WindowWall),
            entry(C::CHAIR, (50, 50), (50, 50), (1, 1), Rule::Facing(0)),
            tall(entry(C::BOOKSHELF, (80, 120), (40, 40), (1, 2), Rule::AnyWall)),
            entry(C::SOFA, (160, 200), (80, 90), (0, 1), Rule::AnyWall),
        ],
        RoomType::Tatami => vec![
            entry(C::TATAMI_PLATFORM, (180, 270), (180, 270), (1, 1), Rule::Corner),
            entry(C::DESK, (80, 120), (60, 80), (0, 1), Rule::WindowWall),
            entry(C::CHAIR, (50, 50), (50, 50), (0, 1), Rule::Facing(1)),
            tall(entry(C::CABINET, (80, 120), (40, 50), (1, 2), Rule::AnyWall)),
        ],
    }
}

const SIDES: [WallSide; 4] = [WallSide::North, WallSide::East, WallSide::South, WallSide::West];

fn wall_length(e: Extent, side: WallSide) -> f64 {
    match side {
        WallSide::North | WallSide::South => e.w,
        WallSide::East | WallSide::West => e.h,
    }
}

/// Unit step pointing the way a piece with direction `d` faces.
fn facing_vector(d: Rotation) -> (f64, f64) {
    match d.quarter_turns() {
        0 => (0.0, 1.0),
        1 => (1.0, 0.0),
        2 => (0.0, -1.0),
        _ => (-1.0, 0.0),
    }
}

/// Point on `side` at distance `along` from the wall's start and `off` into the room.
fn wall_point(e: Extent, side: WallSide, along: f64, off: f64) -> Point {
    match side {
        WallSide::North => Point::new(along, off),
        WallSide::South => Point::new(along, e.h - off),
        WallSide::West => Point::new(off, along),
        WallSide::East => Point::new(e.w - off, along),
    }
}

fn rand_tens(rng: &mut ChaCha8Rng, (lo, hi): (u32, u32)) -> f64 {
    (rng.random_range(lo / 10..=hi / 10) * 10) as f64
}

/// Random multiple of the grid in `[lo, hi]`.
fn rand_grid(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Option<f64> {
    let (a, b) = ((lo / GRID).ceil() as i64, (hi / GRID).floor() as i64);
    (a <= b).then(|| rng.random_range(a..=b) as f64 * GRID)
}

struct Draft {
    extent: Extent,
    openings: Vec<Opening>,
    keep_out: Vec<Aabb>,
    windows: Vec<Aabb>,
    plumbing: WallSide,
    items: Vec<FurnitureItem>,
    /// `(template index, wall side)` of every placed item.
    placed: Vec<(usize, Option<WallSide>)>,
}

impl Draft {
    fn fits(&self, b: &Aabb, tall: bool) -> bool {
        let e = self.extent;
        if b.min.x < 0.0 || b.min.y < 0.0 || b.max.x > e.w || b.max.y > e.h {
            return false;
        }
        if self.keep_out.iter().any(|z| z.intersection_area(b) > 0.0) {
            return false;
        }
        if tall && self.windows.iter().any(|z| z.intersection_area(b) > 0.0) {
            return false;
        }
        self.items.iter().all(|it| separation(&item_bbox(it), b) >= CLEARANCE_CM)
    }
}

/// Chebyshev gap between two boxes; zero or negative when they touch or overlap.
fn separation(a: &Aabb, b: &Aabb) -> f64 {
    let dx = (a.min.x - b.max.x).max(b.min.x - a.max.x);
    let dy = (a.min.y - b.max.y).max(b.min.y - a.max.y);
    dx.max(dy)
}

/// Free zone of an opening reaching `depth` into the room.
fn opening_zone(e: Extent, o: &Opening, depth: f64) -> Aabb {
    let half = o.length / 2.0;
    match o.side {
        WallSide::North => Aabb::new(Point::new(o.position.x - half, 0.0), Point::new(o.position.x + half, depth)),
        WallSide::South => Aabb::new(Point::new(o.position.x - half, e.h - depth), Point::new(o.position.x + half, e.h)),
        WallSide::West => Aabb::new(Point::new(0.0, o.position.y - half), Point::new(depth, o.position.y + half)),
        WallSide::East => Aabb::new(Point::new(e.w - depth, o.position.y - half), Point::new(e.w, o.position.y + half)),
    }
}

fn sample_room(rng: &mut ChaCha8Rng) -> Option<Draft> {
    let (lo, hi) = EXTENT_RANGE_CM;
    let extent = Extent::new(rand_tens(rng, (lo as u32, hi as u32)), rand_tens(rng, (lo as u32, hi as u32)));
    let mut openings: Vec<Opening> = Vec::new();
    let n_windows = rng.random_range(1..=2);
    for i in 0..=n_windows {
        let (kind, len) =
            if i == 0 { (OpeningKind::Door, rand_tens(rng, (80, 90))) } else { (OpeningKind::Window, rand_tens(rng, (100, 180))) };
        let side = SIDES[rng.random_range(0..4)];
        let along = rand_grid(rng, len / 2.0 + 10.0, wall_length(extent, side) - len / 2.0 - 10.0)?;
        let o = Opening { kind, position: wall_point(extent, side, along, 0.0), length: len, side };
        let span = opening_zone(extent, &o, 1.0);
        if openings.iter().any(|p| separation(&opening_zone(extent, p, 1.0), &span) < 10.0) {
            return None;
        }
        openings.push(o);
    }
    let keep_out = vec![opening_zone(extent, &openings[0], DOOR_SWING_CM)];
    let windows = openings[1..].iter().map(|o| opening_zone(extent, o, 1.0)).collect();
    let plumbing = SIDES[rng.random_range(0..4)];
    Some(Draft { extent, openings, keep_out, windows, plumbing, items: Vec::new(), placed: Vec::new() })
}

fn wall_item(e: Extent, side: WallSide, along: f64, cat: CategoryId, w: f64, d: f64) -> FurnitureItem {
    FurnitureItem::new(cat, wall_point(e, side, along, d / 2.0), Extent::new(w, d), side.inward_direction())
}

fn try_place(rng: &mut ChaCha8Rng, draft: &Draft, e: &Entry) -> Option<(FurnitureItem, Option<WallSide>)> {
    let ext = draft.extent;
    let w = rand_tens(rng, e.width);
    let d = rand_tens(rng, e.depth);
    let side = match e.rule {
        Rule::LongestWall => {
            let longest: Vec<WallSide> = SIDES.into_iter().filter(|s| wall_length(ext, *s) == ext.w.max(ext.h)).collect();
            Some(longest[rng.random_range(0..longest.len())])
        }
        Rule::WindowWall => Some(if rng.random_bool(0.8) { draft.openings[1].side } else { SIDES[rng.random_range(0..4)] }),
        Rule::PlumbingWall => Some(draft.plumbing),
        Rule::AnyWall | Rule::Corner => Some(SIDES[rng.random_range(0..4)]),
        Rule::Beside(_) | Rule::Facing(_) => None,
    };
    let item = match e.rule {
        Rule::Corner => {
            let side = side.expect("corner has a side");
            let len = wall_length(ext, side);
            let along = if rng.random_bool(0.5) { w / 2.0 } else { len - w / 2.0 };
            wall_item(ext, side, along, e.cat, w, d)
        }
        Rule::Beside(anchor) | Rule::Facing(anchor) => {
            let candidates: Vec<_> =
                draft.placed.iter().enumerate().filter(|(_, (t, _))| *t == anchor).map(|(i, (_, s))| (draft.items[i], *s)).collect();
            let (host, host_side) = *candidates.get(rng.random_range(0..candidates.len().max(1)))?;
            if let Rule::Beside(_) = e.rule {
                let side = host_side?;
                let host_along = match side {
                    WallSide::North | WallSide::South => host.position.x,
                    _ => host.position.y,
                };
                let host_w = host.size.w;
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let along = host_along + sign * (host_w / 2.0 + CLEARANCE_CM + w / 2.0);
                let item = wall_item(ext, side, along, e.cat, w, d);
                return draft.fits(&item_bbox(&item), e.tall).then_some((item, Some(side)));
            }
            let (fx, fy) = facing_vector(host.direction);
            let reach = host.size.h / 2.0 + CLEARANCE_CM + d / 2.0;
            let position = Point::new(host.position.x + fx * reach, host.position.y + fy * reach);
            FurnitureItem::new(e.cat, position, Extent::new(w, d), host.direction.then(Rotation::R180))
        }
        _ => {
            let side = side.expect("wall rule has a side");
            let along = rand_grid(rng, w / 2.0, wall_length(ext, side) - w / 2.0)?;
            wall_item(ext, side, along, e.cat, w, d)
        }
    };
    draft.fits(&item_bbox(&item), e.tall).then_some((item, side))
}

fn attempt(rng: &mut ChaCha8Rng, room_type: RoomType) -> Option<Draft> {
    let mut draft = sample_room(rng)?;
    for (idx, e) in template(room_type).iter().enumerate() {
        let n = rng.random_range(e.count.0..=e.count.1);
        for i in 0..n {
            let placed = (0..PLACEMENT_TRIES).find_map(|_| try_place(rng, &draft, e));
            match placed {
                Some((item, side)) => {
                    draft.items.push(item);
                    draft.placed.push((idx, side));
                }
                // Required copies must fit; optional extras are simply skipped.
                None if i < e.count.0 => return None,
                None => break,
            }
        }
    }
    Some(draft)
}

/// Furnishes one canonical (`k = 0`) room; a pure function of the spec.
pub fn generate_scene(spec: &GenSpec, scene_id: &str) -> Result<SceneLayout, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for _ in 0..MAX_ATTEMPTS {
        let Some(d) = attempt(&mut rng, spec.room_type) else { continue };
        let mut room = Room::rectangle(d.extent);
        room.openings = d.openings;
        let s = SceneLayout { scene_id: scene_id.to_string(), room_type: spec.room_type, theta: Rotation::R0, room, items: d.items };
        if validate_layout(&s).is_empty() {
            return Ok(s);
        }
    }
    Err(SynthError::Exhausted { room_type: spec.room_type, seed: spec.seed, attempts: MAX_ATTEMPTS })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn on_grid(v: f64) -> bool {
        (v / GRID).fract() == 0.0
    }

    #[test]
    fn same_spec_same_scene() {
        let spec = GenSpec { room_type: RoomType::Bedroom, seed: 7 };
        assert_eq!(generate_scene(&spec, "a").unwrap(), generate_scene(&spec, "a").unwrap());
    }

    #[test]
    fn every_bedroom_has_one_bed() {
        for seed in 0..100 {
            let s = generate_scene(&GenSpec { room_type: RoomType::Bedroom, seed }, "b").unwrap();
            assert_eq!(s.items.iter().filter(|i| i.category == CategoryId::BED).count(), 1, "seed {seed}");
        }
    }

    #[test]
    fn templates_use_the_room_taxonomy() {
        for t in RoomType::ALL {
            for e in template(t) {
                assert!(t.categories().contains(&e.cat), "{t} {}", e.cat);
                assert!(e.width.0 >= 40 && e.depth.0 >= 40);
                assert!(e.width.0 % 10 == 0 && e.depth.1 % 10 == 0);
            }
            for seed in 0..20 {
                let s = generate_scene(&GenSpec { room_type: t, seed }, "x").unwrap();
                assert_eq!(s.room_type, t);
                assert!(s.items.iter().all(|i| t.categories().contains(&i.category)));
            }
        }
    }

    #[test]
    fn coordinates_sit_on_the_grid() {
        for t in RoomType::ALL {
            for seed in 0..30 {
                let s = generate_scene(&GenSpec { room_type: t, seed }, "x").unwrap();
                for it in &s.items {
                    let b = item_bbox(it);
                    assert!([b.min.x, b.min.y, b.max.x, b.max.y].into_iter().all(on_grid));
                }
                for o in &s.room.openings {
                    assert!(on_grid(o.position.x) && on_grid(o.position.y));
                }
                assert!(s.room.openings.iter().filter(|o| o.kind == OpeningKind::Door).count() == 1);
            }
        }
    }

    #[test]
    fn items_keep_their_distance() {
        for t in RoomType::ALL {
            for seed in 0..30 {
                let s = generate_scene(&GenSpec { room_type: t, seed }, "x").unwrap();
                for (i, a) in s.items.iter().enumerate() {
                    for b in &s.items[i + 1..] {
                        assert!(separation(&item_bbox(a), &item_bbox(b)) >= CLEARANCE_CM);
                    }
                }
            }
        }
    }

    #[test]
    fn chairs_face_their_desk() {
        for seed in 0..30 {
            let s = generate_scene(&GenSpec { room_type: RoomType::Study, seed }, "x").unwrap();
            let desk = s.items.iter().find(|i| i.category == CategoryId::DESK).unwrap();
            let chair = s.items.iter().find(|i| i.category == CategoryId::CHAIR).unwrap();
            assert_eq!(chair.direction, desk.direction.then(Rotation::R180));
            let (fx, fy) = facing_vector(chair.direction);
            let to_desk = (desk.position.x - chair.position.x, desk.position.y - chair.position.y);
            assert!(fx * to_desk.0 + fy * to_desk.1 > 0.0);
        }
    }
}
