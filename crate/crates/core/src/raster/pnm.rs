//! Binary PGM/PPM dumps for eyeballing grids.

use std::io::{self, Write};

use super::{LayoutImage, RoomImage};

/// RGB per category channel; index 0 is the empty background.
pub const CATEGORY_PALETTE: [[u8; 3]; 14] = [
    [255, 255, 255],
    [214, 39, 40],
    [140, 86, 75],
    [255, 127, 14],
    [31, 119, 180],
    [23, 190, 207],
    [44, 160, 44],
    [148, 103, 189],
    [188, 189, 34],
    [227, 119, 194],
    [127, 127, 127],
    [174, 199, 232],
    [152, 223, 138],
    [255, 187, 120],
];

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes one `side x side` plane as an 8-bit binary PGM (P5).
pub fn write_pgm<W: Write>(mut w: W, plane: &[f64], side: usize) -> io::Result<()> {
    if plane.len() != side * side {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "plane is not side x side"));
    }
    write!(w, "P5\n{side} {side}\n255\n")?;
    let bytes: Vec<u8> = plane.iter().map(|v| to_byte(*v)).collect();
    w.write_all(&bytes)
}

/// Writes the argmax category of every pixel as an 8-bit binary PPM (P6).
pub fn write_layout_ppm<W: Write>(mut w: W, img: &LayoutImage) -> io::Result<()> {
    let side = img.resolution;
    write!(w, "P6\n{side} {side}\n255\n")?;
    let mut bytes = Vec::with_capacity(side * side * 3);
    for c in img.argmax_categories() {
        bytes.extend_from_slice(&CATEGORY_PALETTE[c.min(CATEGORY_PALETTE.len() - 1)]);
    }
    w.write_all(&bytes)
}

/// Writes the wall, door and window planes as the red, green and blue
/// channels of an 8-bit binary PPM (P6).
pub fn write_room_ppm<W: Write>(mut w: W, img: &RoomImage) -> io::Result<()> {
    let side = img.resolution;
    let n = side * side;
    if img.data.len() != RoomImage::CHANNELS * n {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "room image size does not match its resolution"));
    }
    write!(w, "P6\n{side} {side}\n255\n")?;
    let bytes: Vec<u8> = (0..n).flat_map(|i| (0..3).map(move |c| to_byte(img.data[c * n + i]))).collect();
    w.write_all(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_header_and_payload() {
        let mut buf = Vec::new();
        write_pgm(&mut buf, &[0.0, 1.0, 0.5, 2.0], 2).unwrap();
        assert_eq!(&buf[..11], b"P5\n2 2\n255\n");
        assert_eq!(&buf[11..], &[0, 255, 128, 255]);
        assert!(write_pgm(Vec::new(), &[0.0; 3], 2).is_err());
    }

    #[test]
    fn room_ppm_interleaves_planes() {
        let img = RoomImage { resolution: 1, data: vec![1.0, 0.0, 0.5] };
        let mut buf = Vec::new();
        write_room_ppm(&mut buf, &img).unwrap();
        assert_eq!(&buf[..], b"P6\n1 1\n255\n\xff\x00\x80");
    }

    #[test]
    fn ppm_is_white_for_empty_layout() {
        let mut buf = Vec::new();
        write_layout_ppm(&mut buf, &LayoutImage::empty(16)).unwrap();
        let header = b"P6\n16 16\n255\n";
        assert_eq!(&buf[..header.len()], header);
        assert_eq!(buf.len(), header.len() + 16 * 16 * 3);
        assert!(buf[header.len()..].iter().all(|b| *b == 255));
    }
}
