//! Deterministic placeholder thumbnails for records without an image.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seqfuse_core::data::{CameraId, PersonId};

const CELLS: usize = 5;
const CELL_PX: usize = 12;

/// A horizontally symmetric 5×5 block pattern. The pattern and colour depend
/// only on `pid`; the border colour marks the camera.
pub fn identicon_svg(pid: PersonId, camera: CameraId) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(u64::from(pid));
    let hue = rng.random_range(0..360u32);
    let fill = format!("hsl({hue},60%,45%)");
    let border = format!("hsl({},35%,70%)", (u32::from(camera) * 57) % 360);
    let size = CELLS * CELL_PX + 8;
    let mut svg = String::new();
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = write!(
        svg,
        r#"<rect width="{size}" height="{size}" fill="{border}"/>"#
    );
    let _ = write!(
        svg,
        r##"<rect x="4" y="4" width="{0}" height="{0}" fill="#f4f4f4"/>"##,
        CELLS * CELL_PX
    );
    for row in 0..CELLS {
        for col in 0..CELLS.div_ceil(2) {
            if rng.random_bool(0.5) {
                let mirror = CELLS - 1 - col;
                for c in if mirror == col {
                    vec![col]
                } else {
                    vec![col, mirror]
                } {
                    let _ = write!(
                        svg,
                        r#"<rect x="{}" y="{}" width="{CELL_PX}" height="{CELL_PX}" fill="{fill}"/>"#,
                        4 + c * CELL_PX,
                        4 + row * CELL_PX
                    );
                }
            }
        }
    }
    let _ = write!(
        svg,
        r##"<text x="{}" y="{}" font-size="9" text-anchor="end" fill="#333">c{camera}</text>"##,
        size - 2,
        size - 1
    );
    svg.push_str("</svg>");
    svg
}
