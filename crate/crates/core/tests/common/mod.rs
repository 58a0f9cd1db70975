#![allow(dead_code)]

use std::path::{Path as FsPath, PathBuf};
use std::sync::OnceLock;

use epwind::branches::SortKey;
use epwind::family::{builtin_paper4, MatrixFamily};
use epwind::linalg::{c, C64};
use epwind::path::Path;
use epwind::singular::{map_cuts, Atlas, Region};
use rand::Rng;

pub fn paper4() -> &'static MatrixFamily {
    static F: OnceLock<MatrixFamily> = OnceLock::new();
    F.get_or_init(builtin_paper4)
}

/// The reference atlas: [-3,3]², grid 200, ascending real part.
pub fn model_atlas() -> &'static Atlas {
    static A: OnceLock<Atlas> = OnceLock::new();
    A.get_or_init(|| map_cuts(paper4(), &Region::square(3.0), 200, SortKey::ReAsc).expect("atlas"))
}

pub fn closed_form_eps() -> Vec<C64> {
    let a = (2.0 * 3f64.sqrt() - 3.0).sqrt();
    let b = (2.0 * 3f64.sqrt() + 3.0).sqrt();
    vec![c(-1.0, 0.0), c(-a, 0.0), c(0.0, -b), c(0.0, b), c(a, 0.0), c(1.0, 0.0)]
}

pub fn random_point<R: Rng>(rng: &mut R, half: f64) -> C64 {
    c(rng.gen_range(-half..half), rng.gen_range(-half..half))
}

/// True when the path stays at least `clearance` away from every EP.
pub fn avoids(p: &Path, eps: &[C64], clearance: f64) -> bool {
    eps.iter().all(|z| p.distance_to(*z) >= clearance)
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_epwind")
}

/// Relative paths and contents of every file under `dir`, sorted.
pub fn tree(dir: &FsPath) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(root: &FsPath, dir: &FsPath, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}
