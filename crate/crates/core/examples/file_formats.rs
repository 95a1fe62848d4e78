//! Datasets on disk: CSV in, binary LFMT out, and the tagged container used
//! for models.
//!
//! cargo run --release --example file_formats

use lofi::dataio::{load_dataset, load_lfmt, save_dataset, Container};
use lofi::Rng;

fn main() -> lofi::Result<()> {
    let dir = std::env::temp_dir().join("lofi_file_formats");
    std::fs::create_dir_all(&dir)?;

    let csv = dir.join("small.csv");
    std::fs::write(&csv, "x1,x2,y\n0.5,1.0,1\n-1.5,2.0,-1\n3.0,-0.25,1\n")?;
    let ds = load_dataset(&csv, true)?;
    println!("csv: {} rows, {} features, labels {:?}", ds.len(), ds.dim(), ds.y);

    let bin = dir.join("small.lfmt");
    save_dataset(&ds, &bin)?;
    let raw = load_lfmt(&bin)?;
    println!("lfmt: {}x{} matrix (features plus label column), {} bytes", raw.rows(), raw.cols(), std::fs::metadata(&bin)?.len());
    let back = load_dataset(&bin, false)?;
    assert_eq!(back.x, ds.x);

    let mut c = Container::new("notes");
    c.set("author", "example");
    c.set_f64("scale", 0.1 + 0.2);
    c.put("weights", Rng::new(1).gaussian_matrix(2, 3));
    let path = dir.join("notes.bin");
    c.save(&path)?;
    let c2 = Container::load(&path)?;
    println!("container kind={} scale={} weights {:?}", c2.kind(), c2.get("scale")?, c2.block("weights")?.shape());
    Ok(())
}
