//! `scenes.jsonl` + `manifest.json` serialization.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::layout::{
    validate_layout, CategoryId, Extent, FurnitureItem, Opening, OpeningKind, Point, Room, RoomType, Rotation, SceneLayout, WallFragment,
    WallSide,
};

use super::{manifest_for, Dataset, Manifest, Split, SynthError};

pub const SCHEMA_VERSION: u32 = 1;
pub const SCENES_FILE: &str = "scenes.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Serialize, Deserialize)]
struct SceneRecord {
    scene_id: String,
    room_type: String,
    theta_deg: i64,
    extent_cm: [f64; 2],
    walls: Vec<[[f64; 2]; 2]>,
    openings: Vec<OpeningRecord>,
    items: Vec<ItemRecord>,
}

#[derive(Serialize, Deserialize)]
struct OpeningRecord {
    kind: String,
    x: f64,
    y: f64,
    len: f64,
    side: String,
}

#[derive(Serialize, Deserialize)]
struct ItemRecord {
    cat: String,
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    dir: i64,
}

fn to_record(s: &SceneLayout) -> SceneRecord {
    SceneRecord {
        scene_id: s.scene_id.clone(),
        room_type: s.room_type.name().to_string(),
        theta_deg: s.theta.degrees() as i64,
        extent_cm: [s.room.extent.w, s.room.extent.h],
        walls: s.room.walls.iter().map(|w| [[w.a.x, w.a.y], [w.b.x, w.b.y]]).collect(),
        openings: s
            .room
            .openings
            .iter()
            .map(|o| OpeningRecord {
                kind: o.kind.name().to_string(),
                x: o.position.x,
                y: o.position.y,
                len: o.length,
                side: o.side.name().to_string(),
            })
            .collect(),
        items: s
            .items
            .iter()
            .map(|it| ItemRecord {
                cat: it.category.name().to_string(),
                x: it.position.x,
                y: it.position.y,
                w: it.size.w,
                h: it.size.h,
                dir: it.direction.degrees() as i64,
            })
            .collect(),
    }
}

fn from_record(r: SceneRecord) -> Result<SceneLayout, SynthError> {
    let invalid = |detail: String| SynthError::Invalid { scene_id: r.scene_id.clone(), detail };
    let room_type = RoomType::parse(&r.room_type).map_err(|e| invalid(e.to_string()))?;
    let theta = Rotation::from_degrees(r.theta_deg).map_err(|e| invalid(e.to_string()))?;
    let mut openings = Vec::with_capacity(r.openings.len());
    for o in &r.openings {
        let kind = match o.kind.as_str() {
            "door" => OpeningKind::Door,
            "window" => OpeningKind::Window,
            other => return Err(invalid(format!("unknown opening kind {other:?}"))),
        };
        let side = WallSide::parse(&o.side).ok_or_else(|| invalid(format!("unknown wall side {:?}", o.side)))?;
        openings.push(Opening { kind, position: Point::new(o.x, o.y), length: o.len, side });
    }
    let mut items = Vec::with_capacity(r.items.len());
    for it in &r.items {
        let cat = CategoryId::from_name(&it.cat).map_err(|e| invalid(e.to_string()))?;
        let dir = Rotation::from_degrees(it.dir).map_err(|e| invalid(e.to_string()))?;
        items.push(FurnitureItem::new(cat, Point::new(it.x, it.y), Extent::new(it.w, it.h), dir));
    }
    let walls = r.walls.iter().map(|[a, b]| WallFragment::new(Point::new(a[0], a[1]), Point::new(b[0], b[1]))).collect();
    let s = SceneLayout {
        scene_id: r.scene_id.clone(),
        room_type,
        theta,
        room: Room { extent: Extent::new(r.extent_cm[0], r.extent_cm[1]), walls, openings },
        items,
    };
    let violations = validate_layout(&s);
    if let Some(v) = violations.first() {
        return Err(invalid(v.to_string()));
    }
    Ok(s)
}

pub fn write_dataset(d: &Dataset, dir: &Path) -> Result<(), SynthError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SynthError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let scenes_path = dir.join(SCENES_FILE);
    let f = fs::File::create(&scenes_path).map_err(io_err(&scenes_path))?;
    let mut w = BufWriter::new(f);
    for s in &d.scenes {
        let line = serde_json::to_string(&to_record(s)).expect("records serialize");
        writeln!(w, "{line}").map_err(io_err(&scenes_path))?;
    }
    w.flush().map_err(io_err(&scenes_path))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&d.manifest).expect("manifest serializes");
    fs::write(&manifest_path, json + "\n").map_err(io_err(&manifest_path))?;
    Ok(())
}

/// Reads and cross-checks a dataset: every scene must validate, and the
/// manifest's counts and split lists must agree with the scene lines.
pub fn read_dataset(dir: &Path) -> Result<Dataset, SynthError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(|source| SynthError::Io { path: manifest_path.clone(), source })?;
    let fmt = |detail: String| SynthError::Format { path: manifest_path.clone(), detail };
    let version: serde_json::Value = serde_json::from_str(&text).map_err(|e| fmt(e.to_string()))?;
    match version.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == SCHEMA_VERSION as u64 => {}
        Some(v) => return Err(fmt(format!("schema version {v}, expected {SCHEMA_VERSION}"))),
        None => return Err(fmt("missing schema_version".into())),
    }
    let manifest: Manifest = serde_json::from_value(version).map_err(|e| fmt(e.to_string()))?;

    let scenes_path = dir.join(SCENES_FILE);
    let f = fs::File::open(&scenes_path).map_err(|source| SynthError::Io { path: scenes_path.clone(), source })?;
    let mut scenes = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|source| SynthError::Io { path: scenes_path.clone(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SceneRecord = serde_json::from_str(&line)
            .map_err(|e| SynthError::Format { path: scenes_path.clone(), detail: format!("line {}: {e}", i + 1) })?;
        scenes.push(from_record(rec)?);
    }

    if manifest.total != scenes.len() {
        return Err(fmt(format!("manifest lists {} scenes, {SCENES_FILE} has {}", manifest.total, scenes.len())));
    }
    let mut split = BTreeMap::new();
    for (ids, which) in [(&manifest.train, Split::Train), (&manifest.test, Split::Test)] {
        for id in ids {
            if split.insert(id.clone(), which).is_some() {
                return Err(fmt(format!("scene {id} listed twice in the split")));
            }
        }
    }
    if split.len() != scenes.len() || scenes.iter().any(|s| !split.contains_key(&s.scene_id)) {
        return Err(fmt("split lists do not match the scene ids".into()));
    }
    let recount = manifest_for(&scenes, &split, &manifest.room_types, manifest.n_per_type, manifest.seed);
    if recount.counts != manifest.counts || recount.category_counts != manifest.category_counts {
        return Err(fmt("counts disagree with the scene lines".into()));
    }
    Ok(Dataset { scenes, split, manifest })
}
