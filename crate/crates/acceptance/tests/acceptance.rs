//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! with status 1 if any criterion fails.
//!
//! Set `HFEM_TRUI` to a 256x256 PGM of the trui test image (or place it at
//! `testdata/trui.pgm`) to evaluate the absolute MSE bands of criterion 1.

use std::alloc::{GlobalAlloc, Layout, System};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use harmonic_fem::codec::Payload;
use harmonic_fem::femsolve::{assemble_stiffness, FemSystem};
use harmonic_fem::image::mean_abs_error;
use harmonic_fem::mesh::{Point, TriMesh, Triangulation, VertexRole, VertexSet};
use harmonic_fem::spatial::{canonical_mesh, densify, DensifyConfig, MaskSet};
use harmonic_fem::tonal::{
    adjoint_pair, tonal_optimise, tonal_optimise_l1, ReconstructionOperator, DEFAULT_EPSILON, DEFAULT_IRLS_ITERS,
    DEFAULT_OUTER_MAX, DEFAULT_OUTER_TOL,
};
use harmonic_fem::Image;
use harmonic_fem_cli::bench::{run_bench, BenchConfig};
use harmonic_fem_oracles::{cholesky, delaunay_check, fdm_inpaint_dense, least_squares, materialise_b};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Counting;

static CURRENT: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc(layout);
        if !p.is_null() {
            let now = CURRENT.fetch_add(layout.size(), Ordering::Relaxed) + layout.size();
            PEAK.fetch_max(now, Ordering::Relaxed);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        CURRENT.fetch_sub(layout.size(), Ordering::Relaxed);
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let p = System.realloc(ptr, layout, new_size);
        if !p.is_null() {
            if new_size >= layout.size() {
                let now = CURRENT.fetch_add(new_size - layout.size(), Ordering::Relaxed) + new_size - layout.size();
                PEAK.fetch_max(now, Ordering::Relaxed);
            } else {
                CURRENT.fetch_sub(layout.size() - new_size, Ordering::Relaxed);
            }
        }
        p
    }
}

#[global_allocator]
static ALLOC: Counting = Counting;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const DENSITY: f64 = 0.04;

fn testdata(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../testdata").join(name)
}

fn load(name: &str) -> Image {
    let path = testdata(name);
    Image::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn trui() -> Option<Image> {
    let path = std::env::var_os("HFEM_TRUI").map(PathBuf::from).unwrap_or_else(|| testdata("trui.pgm"));
    path.exists().then(|| Image::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display())))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mask_count(f: &Image) -> usize {
    (DENSITY * f.pixel_count() as f64).round() as usize
}

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

/// Densify with n = 100 and optimise tonally; returns (MSE before, MSE after, seconds).
fn full_run(f: &Image, seed: u64) -> (f64, f64, f64) {
    let start = Instant::now();
    let m = mask_count(f);
    let d = densify(f, &DensifyConfig::new(m, 100).with_seed(seed)).unwrap();
    let op = ReconstructionOperator::new(d.mesh, f.width(), f.height()).unwrap();
    let r = tonal_optimise(&op, f, DEFAULT_OUTER_TOL, DEFAULT_OUTER_MAX).unwrap();
    (r.mse_before, r.mse_after, start.elapsed().as_secs_f64())
}

fn criterion_1() -> Outcome {
    let (name, f) = match trui() {
        Some(f) => ("trui", f),
        None => ("astronaut (stand-in)", load("astronaut256.pgm")),
    };
    let mut pass = true;
    let (mut before, mut after, mut slowest) = (Vec::new(), Vec::new(), 0.0f64);
    for seed in SEEDS {
        let (b, a, secs) = full_run(&f, seed);
        if a > 0.8 * b || secs >= 120.0 {
            pass = false;
        }
        before.push(b);
        after.push(a);
        slowest = slowest.max(secs);
    }
    let worst_gain = before.iter().zip(&after).map(|(b, a)| 1.0 - a / b).fold(f64::INFINITY, f64::min);
    let (mb, ma) = (median(before), median(after));
    let bands = if name == "trui" {
        let ok = (30.0..=47.0).contains(&mb) && (22.0..=34.0).contains(&ma);
        pass &= ok;
        format!("bands {}", if ok { "met" } else { "missed" })
    } else {
        "absolute bands not evaluated without trui".to_string()
    };
    Outcome::new(
        pass,
        format!(
            "{name}: median MSE {mb:.2} -> {ma:.2}, smallest per-seed gain {:.1}%, slowest run {slowest:.1} s; {bands}",
            100.0 * worst_gain
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut images = vec![("astronaut", load("astronaut256.pgm")), ("camera", load("camera256.pgm"))];
    if let Some(t) = trui() {
        images.insert(0, ("trui", t));
    }
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, f) in &images {
        let m = mask_count(f);
        let medians: Vec<f64> = [10, 30, 100]
            .iter()
            .map(|&n| {
                let mses = SEEDS
                    .iter()
                    .map(|&seed| {
                        let d = densify(f, &DensifyConfig::new(m, n).with_seed(seed)).unwrap();
                        harmonic_fem::image::mse(&d.reconstruction, f).unwrap()
                    })
                    .collect();
                median(mses)
            })
            .collect();
        pass &= medians[2] <= medians[1] && medians[1] <= medians[0];
        detail.push(format!("{name} n=10/30/100: {:.2} / {:.2} / {:.2}", medians[0], medians[1], medians[2]));
    }
    Outcome::new(pass, detail.join("; "))
}

fn criterion_3() -> Outcome {
    let cfg = BenchConfig {
        sizes: vec![64, 128, 256, 512, 1024],
        density: DENSITY,
        iters: 10,
        seed: 0,
        repeats: 5,
        source: Some(load("retina1024.pgm")),
    };
    let report = run_bench(&cfg).unwrap();
    let pass = report.ratios.iter().all(|r| r.spatial <= 5.5 && r.tonal <= 5.5);
    let ratios: Vec<String> =
        report.ratios.iter().map(|r| format!("{}->{} x{:.2}/x{:.2}", r.from, r.to, r.spatial, r.tonal)).collect();
    let last = report.rows.last().unwrap();
    Outcome::new(
        pass,
        format!(
            "spatial/tonal ratios {}; 1024^2: {:.2} s / {:.2} s",
            ratios.join(", "),
            last.spatial_seconds,
            last.tonal_seconds
        ),
    )
}

fn criterion_4() -> Outcome {
    let f = load("retina1024.pgm");
    let d = densify(&f, &DensifyConfig::new(mask_count(&f), 10)).unwrap();
    let mesh = d.mesh.clone();
    drop(d);

    let baseline = CURRENT.load(Ordering::Relaxed);
    PEAK.store(baseline, Ordering::Relaxed);
    let op = ReconstructionOperator::new(mesh, f.width(), f.height()).unwrap();
    let result = tonal_optimise(&op, &f, DEFAULT_OUTER_TOL, DEFAULT_OUTER_MAX).unwrap();
    let peak = PEAK.load(Ordering::Relaxed) - baseline;
    drop((op, result));

    let limit = 64 * f.pixel_count();
    Outcome::new(
        peak <= limit,
        format!("peak {peak} bytes = {:.1} bytes/pixel (limit 64)", peak as f64 / f.pixel_count() as f64),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let (w, h) = (32, 32);
    let mut worst = 0.0f64;
    for masks in [1, 10, 50, 200, 600] {
        let f = Image::from_fn(w, h, |_, _| rng.gen_range(0.0..255.0)).unwrap();
        let mut order = rand::seq::index::sample(&mut rng, w * h, w * h).into_vec();
        let mut unknowns = order.split_off(masks);
        let mut mask = order;
        mask.sort_unstable();
        unknowns.sort_unstable();
        let system = FemSystem::new(canonical_mesh(w, &mask, &unknowns).unwrap(), w, h).unwrap();
        let g = MaskSet::sample(&f, mask.clone()).values;
        let fem = system.inpaint(&g, 1, 1e-10, None).unwrap().image;
        let fdm = fdm_inpaint_dense(&f, &mask).unwrap();
        let diff = fem.data().iter().zip(fdm.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(diff);
    }
    Outcome::new(worst <= 1e-5, format!("5 masks on 32x32, max |FEM - FDM| = {worst:.2e}"))
}

/// Random mesh on a `w` x `h` grid: `masks` mask pixels, `free` further
/// unknown vertices, and the corners.
fn random_mesh(
    rng: &mut ChaCha8Rng,
    w: usize,
    h: usize,
    masks: usize,
    free: usize,
) -> (Vec<usize>, Vec<usize>, TriMesh) {
    let n = w * h;
    let masks = masks.clamp(1, n / 2);
    let corners = [0, w - 1, (h - 1) * w, n - 1];
    let order = rand::seq::index::sample(rng, n, n).into_vec();
    let mut mask: Vec<usize> = order[..masks].to_vec();
    let mut unknowns: Vec<usize> = order[masks..].iter().copied().filter(|i| !corners.contains(i)).take(free).collect();
    unknowns.extend(corners.iter().filter(|c| !mask.contains(c)));
    mask.sort_unstable();
    unknowns.sort_unstable();
    let mesh = canonical_mesh(w, &mask, &unknowns).unwrap();
    (mask, unknowns, mesh)
}

fn random_grey(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Image {
    Image::from_fn(w, h, |_, _| rng.gen_range(0.0..255.0)).unwrap()
}

fn check(failures: &mut Vec<String>, name: &str, ok: bool) {
    if !ok {
        failures.push(name.to_string());
    }
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut failures = Vec::new();

    // Stiffness symmetry, zero row sums, SPD reduced block.
    let mut ok_sym = true;
    let mut ok_spd = true;
    for _ in 0..50 {
        let (w, h) = (rng.gen_range(3..16), rng.gen_range(3..16));
        let (masks, free) = (rng.gen_range(1..8), rng.gen_range(0..20));
        let (_, _, mesh) = random_mesh(&mut rng, w, h, masks, free);
        let a = assemble_stiffness(&mesh).unwrap();
        ok_sym &= a.symmetry_defect() <= 1e-12;
        ok_sym &= (0..a.nrows()).all(|i| a.row(i).map(|(_, v)| v).sum::<f64>().abs() <= 1e-12);
        let system = FemSystem::new(mesh, w, h).unwrap();
        let a_uu = &system.split().a_uu;
        if a_uu.nrows() > 0 {
            let dense = DMatrix::from_fn(a_uu.nrows(), a_uu.ncols(), |i, j| a_uu.get(i, j));
            ok_spd &= cholesky(&dense).is_ok();
        }
    }
    check(&mut failures, "stiffness symmetry/row sums", ok_sym);
    check(&mut failures, "A_uu Cholesky", ok_spd);

    // Discrete maximum principle and constant reproduction.
    let mut ok_dmp = true;
    let mut ok_const = true;
    for _ in 0..50 {
        let (w, h) = (rng.gen_range(4..24), rng.gen_range(4..24));
        let (masks, free) = (rng.gen_range(1..20), rng.gen_range(0..40));
        let (mask, _, mesh) = random_mesh(&mut rng, w, h, masks, free);
        let system = FemSystem::new(mesh, w, h).unwrap();
        let g: Vec<f64> = (0..mask.len()).map(|_| rng.gen_range(0.0..255.0)).collect();
        let (lo, hi) = g.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        let u = system.inpaint(&g, 1, 1e-10, None).unwrap().image;
        ok_dmp &= u.data().iter().all(|&v| v >= lo - 1e-6 && v <= hi + 1e-6);
        let c = rng.gen_range(0.0..255.0);
        let u = system.inpaint(&vec![c; mask.len()], 1, 1e-10, None).unwrap().image;
        ok_const &= u.data().iter().all(|&v| (v - c).abs() <= 1e-6);
    }
    check(&mut failures, "maximum principle", ok_dmp);
    check(&mut failures, "constant reproduction", ok_const);

    // Delaunay brute force, determinism, incremental insertion.
    let mut ok_del = true;
    let mut ok_inc = true;
    for _ in 0..50 {
        let (w, h) = (rng.gen_range(4i64..40), rng.gen_range(4i64..40));
        let count = rng.gen_range(3..((w * h) as usize).min(120));
        let picks = rand::seq::index::sample(&mut rng, (w * h) as usize, count).into_vec();
        let points: Vec<Point> = picks.iter().map(|&i| Point::new(i as i64 % w, i as i64 / w)).collect();
        let set = || VertexSet::new(points.clone(), vec![VertexRole::Unknown; points.len()]).unwrap();
        let Ok(mesh) = TriMesh::delaunay(set()) else {
            continue; // all points collinear
        };
        ok_del &= delaunay_check(&mesh).0;
        ok_del &= TriMesh::delaunay(set()).unwrap() == mesh;
        let split = points.len().div_ceil(2).max(3);
        if let Ok(mut tri) = Triangulation::new(&points[..split]) {
            for &p in &points[split..] {
                tri.insert(p).unwrap();
            }
            ok_inc &= TriMesh::from_triangulation(set(), &tri) == mesh;
        }
    }
    check(&mut failures, "Delaunay brute force/determinism", ok_del);
    check(&mut failures, "incremental vs rebuild", ok_inc);

    // Adjoint identity on 10 probes.
    let (_, _, mesh) = random_mesh(&mut rng, 32, 32, 40, 40);
    let op = ReconstructionOperator::new(mesh, 32, 32).unwrap();
    let mut ok_adj = true;
    for _ in 0..10 {
        let x: Vec<f64> = (0..op.mask_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..op.pixel_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (lhs, rhs) = adjoint_pair(&op, &x, &y).unwrap();
        ok_adj &= (lhs - rhs).abs() <= 1e-5 * lhs.abs().max(rhs.abs()).max(1e-12);
    }
    check(&mut failures, "adjoint identity", ok_adj);

    // Dense least-squares oracle and the never-hurts invariant.
    let mut ok_ls = true;
    let mut ok_hurt = true;
    for _ in 0..5 {
        let (w, h) = (12, 12);
        let f = random_grey(&mut rng, w, h);
        let (_, _, mesh) = random_mesh(&mut rng, w, h, 8, 6);
        let op = ReconstructionOperator::new(mesh, w, h).unwrap().with_inner_tol(1e-12);
        let exact = least_squares(&materialise_b(&op).unwrap(), &DVector::from_column_slice(f.data())).unwrap();
        let r = tonal_optimise(&op, &f, 1e-10, 500).unwrap();
        ok_ls &= r.g_opt.iter().zip(exact.iter()).all(|(x, y)| (x - y).abs() <= 1e-4 * y.abs().max(1.0));
        ok_hurt &= r.mse_after <= r.mse_before + 1e-9;
    }
    for _ in 0..10 {
        let (w, h) = (rng.gen_range(8..40), rng.gen_range(8..40));
        let f = random_grey(&mut rng, w, h);
        let (masks, free) = (rng.gen_range(1..30), rng.gen_range(0..30));
        let (_, _, mesh) = random_mesh(&mut rng, w, h, masks, free);
        let op = ReconstructionOperator::new(mesh, w, h).unwrap();
        let r = tonal_optimise(&op, &f, DEFAULT_OUTER_TOL, DEFAULT_OUTER_MAX).unwrap();
        ok_hurt &= r.mse_after <= r.mse_before + 1e-9;
    }
    check(&mut failures, "dense least squares", ok_ls);
    check(&mut failures, "never hurts", ok_hurt);

    // Codec round trip, decoder mesh equality, fixed-seed determinism.
    let f = load("chelsea_rgb128.ppm");
    let cfg = DensifyConfig::new(mask_count(&f), 10).with_seed(7);
    let encode = || {
        let d = densify(&f, &cfg).unwrap();
        let payload = Payload::from_mask(&d.mask, &d.unknowns, f.width(), f.height()).unwrap();
        let op = ReconstructionOperator::new(d.mesh.clone(), f.width(), f.height()).unwrap();
        let r = tonal_optimise(&op, &f, DEFAULT_OUTER_TOL, DEFAULT_OUTER_MAX).unwrap();
        (d.mesh, payload.with_values(&r.g_opt).unwrap().encode())
    };
    let (mesh, bytes) = encode();
    let decoded = Payload::decode(&bytes).unwrap();
    check(&mut failures, "codec round trip", decoded.encode() == bytes);
    check(&mut failures, "decoder mesh", decoded.mesh().unwrap() == mesh);
    check(&mut failures, "fixed-seed payload bytes", encode().1 == bytes);

    let pass = failures.is_empty();
    let detail = if pass { "11 suites passed".to_string() } else { format!("failed: {}", failures.join(", ")) };
    Outcome::new(pass, detail)
}

fn criterion_7() -> Outcome {
    let clean = load("camera256.pgm");
    let mut pass = true;
    let mut detail = Vec::new();
    for seed in 0..3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(700 + seed);
        let n = clean.pixel_count();
        let mut data = clean.data().to_vec();
        for i in rand::seq::index::sample(&mut rng, n, n / 20) {
            data[i] = if rng.gen_bool(0.5) { 0.0 } else { 255.0 };
        }
        let f = Image::new(clean.width(), clean.height(), 1, data).unwrap();
        let d = densify(&f, &DensifyConfig::new(mask_count(&f), 10).with_seed(seed)).unwrap();
        let op = ReconstructionOperator::new(d.mesh, f.width(), f.height()).unwrap();
        let l2 = tonal_optimise(&op, &f, DEFAULT_OUTER_TOL, DEFAULT_OUTER_MAX).unwrap();
        let l1 = tonal_optimise_l1(&op, &f, DEFAULT_IRLS_ITERS, DEFAULT_EPSILON, DEFAULT_OUTER_TOL, DEFAULT_OUTER_MAX)
            .unwrap();
        let e2 = mean_abs_error(&l2.reconstruction, &f).unwrap();
        let e1 = mean_abs_error(&l1.reconstruction, &f).unwrap();
        pass &= e1 < e2;
        detail.push(format!("{e2:.3} -> {e1:.3}"));
    }
    Outcome::new(pass, format!("mean |error| L2-optimised -> L1-optimised: {}", detail.join(", ")))
}

fn main() {
    // `cargo test -- --list` and filters passed by the test runner.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [Criterion; 7] = [
        ("1 MSE at 4% density, n = 100", criterion_1),
        ("2 iteration-count trend", criterion_2),
        ("3 runtime scaling", criterion_3),
        ("4 tonal memory", criterion_4),
        ("5 FDM equivalence", criterion_5),
        ("6 property suites", criterion_6),
        ("7 L1 tonal optimisation", criterion_7),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        failed += usize::from(!outcome.pass);
        println!(
            "criterion {name}: {} ({}; {:.1} s)",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
