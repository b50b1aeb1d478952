//! Rotates one scene through all four quarter turns, checks the group laws
//! on it and writes each orientation as PPM images.
//!
//! cargo run --release --example rotate_render -- [out_dir] [room_type] [seed]

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use rotlayout::layout::{rotate_layout, validate_layout, RoomType, Rotation};
use rotlayout::raster::{mode_mask, render_empty_room, render_layout, write_layout_ppm, write_pgm, write_room_ppm, RasterConfig};
use rotlayout::synthgen::{generate_scene, GenSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out = PathBuf::from(args.first().map_or("rotations", String::as_str));
    let room_type = RoomType::parse(args.get(1).map_or("bedroom", String::as_str))?;
    let seed: u64 = args.get(2).map(|s| s.parse()).transpose()?.unwrap_or(0);
    let scene = generate_scene(&GenSpec { room_type, seed }, "scene")?;
    let rc = RasterConfig::new(64)?;
    fs::create_dir_all(&out)?;

    for k in Rotation::ALL {
        let s = rotate_layout(&scene, k);
        assert!(validate_layout(&s).is_empty(), "rotated scene is invalid");
        // Four single turns equal one turn by k composed with the rest.
        let back = rotate_layout(&s, k.inverse());
        assert_eq!(back, scene, "k then -k is not the identity");
        let img = render_layout(&s, &rc)?;
        assert_eq!(img, render_layout(&scene, &rc)?.rotated(k), "raster does not commute with rotation");

        let deg = k.degrees();
        write_room_ppm(BufWriter::new(File::create(out.join(format!("r{deg}.room.ppm")))?), &render_empty_room(&s.room, &rc)?)?;
        write_layout_ppm(BufWriter::new(File::create(out.join(format!("r{deg}.layout.ppm")))?), &img)?;
        let m = mode_mask(&scene, k, &rc)?;
        write_pgm(BufWriter::new(File::create(out.join(format!("r{deg}.mask.pgm")))?), &m.data, rc.resolution())?;
        println!(
            "{deg:>3}°  extent {:>3}x{:<3} cm  theta {:>3}°  directions {:?}",
            s.room.extent.w,
            s.room.extent.h,
            s.theta.degrees(),
            s.items.iter().map(|i| i.direction.degrees()).collect::<Vec<_>>()
        );
    }
    println!("images in {}", out.display());
    Ok(())
}
