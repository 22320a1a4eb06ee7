//! Colour-based patch selection on a generated slide: white background,
//! two stained tissue regions. Writes the picks as CSV to stdout.

use graphmil::data::{sample_patches, write_selection_csv, PatchConfig};
use graphmil::diffcore::Rng;
use image::{Rgb, RgbImage};

fn main() -> graphmil::Result<()> {
    let (w, h) = (640, 384);
    let img = RgbImage::from_fn(w, h, |x, y| {
        let shade = ((x * 7 + y * 13) % 40) as u8;
        if x < 256 && y < 256 {
            Rgb([180 + shade / 2, 60 + shade, 140])
        } else if x >= 384 && y >= 128 {
            Rgb([110, 40 + shade, 120 + shade])
        } else {
            Rgb([245, 245, 242])
        }
    });

    let config = PatchConfig { patch_size: 32, ..PatchConfig::default() };
    let selection = sample_patches(&img, &config, &mut Rng::new(0))?;
    eprintln!(
        "{} patches, {} with tissue, {} clusters of sizes {:?}, {} selected",
        selection.total_patches,
        selection.tissue_patches,
        selection.clusters.len(),
        selection.cluster_sizes,
        selection.selections.len()
    );
    write_selection_csv(&selection, std::io::stdout().lock())
}
