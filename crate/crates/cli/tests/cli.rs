use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use image::{GrayImage, Luma, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scatter_cli::ingest::{load_and_resize, resize_square, to_planes};
use scatter_core::features::format_path_table;
use scatter_core::{count_features, path_table, ColorMode, FeatureFile, ScatteringConfig};

fn scatter(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scatter")).args(args).output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_small_config(dir: &Path) -> PathBuf {
    let path = dir.join("small.cfg");
    std::fs::write(&path, "# quick network\nsize = 32\nj = 3\nk1 = 8\n").unwrap();
    path
}

/// Three classes of 8-bit images: stripes at two orientations and dots.
fn write_dataset(root: &Path, per_class: usize, side: u32) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (c, name) in ["dots", "horizontal", "vertical"].iter().enumerate() {
        let dir = root.join(name);
        std::fs::create_dir_all(&dir).unwrap();
        for i in 0..per_class {
            let phase: f32 = rng.gen_range(0.0..6.28);
            let (cy, cx) = (rng.gen_range(0..side) as f32, rng.gen_range(0..side) as f32);
            let img = GrayImage::from_fn(side, side, |x, y| {
                let (x, y) = (x as f32, y as f32);
                let v = match c {
                    0 => (-((x - cx).powi(2) + (y - cy).powi(2)) / 20.0).exp(),
                    1 => 0.5 + 0.5 * (0.8 * y + phase).sin(),
                    _ => 0.5 + 0.5 * (0.8 * x + phase).sin(),
                };
                Luma([(255.0 * v).round() as u8])
            });
            img.save(dir.join(format!("img{i:02}.png"))).unwrap();
        }
    }
}

#[test]
fn extract_writes_one_row_per_image() {
    let tmp = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..10 {
        let img = RgbImage::from_fn(100 + i, 90, |_, _| image::Rgb([rng.gen(), rng.gen(), rng.gen()]));
        let path = tmp.path().join(format!("{i}.png"));
        img.save(&path).unwrap();
        files.push(path);
    }
    let out = tmp.path().join("f.scf");
    let mut args = vec!["extract", "-o", s(&out)];
    args.extend(files.iter().map(|p| s(p)));
    ok(&scatter(&args));
    let f = FeatureFile::read(std::fs::File::open(&out).unwrap()).unwrap();
    let config = ScatteringConfig::default();
    assert_eq!(f.rows(), 10);
    assert_eq!(f.width, count_features(&config));
    assert!(f.labels.is_none());
    assert_eq!(f.path_table, format_path_table(&path_table(&config)));
    assert_eq!(f.path_blocks().unwrap(), path_table(&config));
}

#[test]
fn pipeline_is_deterministic_across_runs_and_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("data");
    write_dataset(&root, 6, 40);
    let cfg = write_small_config(tmp.path());
    let p = |n: &str| tmp.path().join(n);
    let extract = |threads: &str, train: &Path, test: &Path| {
        ok(&scatter(&[
            "extract",
            s(&root),
            "--config",
            s(&cfg),
            "--threads",
            threads,
            "--seed",
            "4",
            "--train-per-class",
            "3",
            "-o",
            s(train),
            "--test-output",
            s(test),
        ]))
    };
    extract("1", &p("a_train"), &p("a_test"));
    extract("8", &p("b_train"), &p("b_test"));
    extract("1", &p("c_train"), &p("c_test"));
    let bytes = |n: &str| std::fs::read(p(n)).unwrap();
    for stem in ["train", "test"] {
        assert_eq!(bytes(&format!("a_{stem}")), bytes(&format!("b_{stem}")));
        assert_eq!(bytes(&format!("a_{stem}")), bytes(&format!("c_{stem}")));
    }
    let train = FeatureFile::read(&bytes("a_train")[..]).unwrap();
    assert_eq!(train.rows(), 9);
    assert_eq!(train.labels.as_deref().unwrap().iter().filter(|&&l| l == 2).count(), 3);

    for (i, threads) in ["1", "8"].iter().enumerate() {
        ok(&scatter(&[
            "fit",
            s(&p("a_train")),
            "--threads",
            threads,
            "--model",
            s(&p(&format!("m{i}"))),
            "--standardizer",
            s(&p(&format!("s{i}"))),
        ]));
    }
    assert_eq!(bytes("m0"), bytes("m1"));
    assert_eq!(bytes("s0"), bytes("s1"));
    let report = |threads: &str| {
        ok(&scatter(&[
            "eval",
            s(&p("a_test")),
            "--threads",
            threads,
            "--model",
            s(&p("m0")),
            "--standardizer",
            s(&p("s0")),
        ]))
    };
    let r = report("1");
    assert_eq!(r, report("8"));
    assert!(r.contains("mean per-class accuracy"), "{r}");
    assert!(r.contains("confusion"), "{r}");
}

fn blob_fixture(per_class: usize, seed: u64) -> FeatureFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for k in 0..4u32 {
        for _ in 0..per_class {
            for j in 0..4 {
                let u: f64 = rng.gen_range(f64::EPSILON..1.0);
                let v: f64 = rng.gen();
                let noise = (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos();
                values.push((f64::from(u8::from(j == k)) + 0.1 * noise) as f32);
            }
            labels.push(k);
        }
    }
    FeatureFile::new(String::new(), 4, values, Some(labels)).unwrap()
}

#[test]
fn fit_and_eval_on_blobs() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |n: &str| tmp.path().join(n);
    blob_fixture(50, 1).write(std::fs::File::create(p("train")).unwrap()).unwrap();
    blob_fixture(50, 2).write(std::fs::File::create(p("test")).unwrap()).unwrap();
    let fit = |m: &str, st: &str| {
        ok(&scatter(&["fit", s(&p("train")), "--model", s(&p(m)), "--standardizer", s(&p(st)), "-c", "1"]))
    };
    fit("m", "s");
    fit("m2", "s2");
    assert_eq!(std::fs::read(p("m")).unwrap(), std::fs::read(p("m2")).unwrap());
    let report = ok(&scatter(&["eval", s(&p("test")), "--model", s(&p("m")), "--standardizer", s(&p("s"))]));
    let acc: f64 = report
        .lines()
        .find_map(|l| l.strip_prefix("accuracy: "))
        .and_then(|l| l.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(acc >= 0.99, "{report}");

    // Features of another width.
    let wide = FeatureFile::new(String::new(), 5, vec![0.0; 10], Some(vec![0, 1])).unwrap();
    wide.write(std::fs::File::create(p("wide")).unwrap()).unwrap();
    let out = scatter(&["eval", s(&p("wide")), "--model", s(&p("m")), "--standardizer", s(&p("s"))]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("width mismatch"));

    // Corrupt model file.
    std::fs::write(p("bad"), b"SCM1\x01\x00").unwrap();
    let out = scatter(&["eval", s(&p("test")), "--model", s(&p("bad")), "--standardizer", s(&p("s"))]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("byte"));
}

#[test]
fn frame_check_reports_bounds() {
    let report = ok(&scatter(&["frame-check"]));
    let field = |line: &str, key: &str| -> f64 {
        let rest = &line[line.find(key).unwrap() + key.len()..];
        rest.split(',').next().unwrap().trim().parse().unwrap()
    };
    for name in ["layer 1:", "layer 2:"] {
        let line = report.lines().find(|l| l.starts_with(name)).unwrap();
        assert!((field(line, "B = ") - 1.0).abs() <= 1e-6, "{line}");
        assert!(field(line, "A = ") >= 0.5, "{line}");
    }

    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("k1.cfg");
    std::fs::write(&cfg, "k1 = 1\n").unwrap();
    let out = scatter(&["frame-check", "--config", s(&cfg)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("degenerate"));

    let img = tmp.path().join("lp.png");
    ok(&scatter(&["frame-check", "--image", s(&img)]));
    assert_eq!(image::open(&img).unwrap().width(), 128);
}

#[test]
fn usage_and_data_errors_have_distinct_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("typo.cfg");
    std::fs::write(&cfg, "k_1 = 8\n").unwrap();
    let out = scatter(&["frame-check", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));
    assert_eq!(scatter(&["fit"]).status.code(), Some(2));

    let root = tmp.path().join("data");
    write_dataset(&root, 2, 32);
    let broken = root.join("dots").join("zz_broken.png");
    std::fs::write(&broken, b"not an image").unwrap();
    let small = write_small_config(tmp.path());
    let out_file = tmp.path().join("f.scf");
    let out = scatter(&["extract", s(&root), "--config", s(&small), "-o", s(&out_file)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("zz_broken.png"));
    ok(&scatter(&["extract", s(&root), "--config", s(&small), "--skip-bad", "-o", s(&out_file)]));
    let f = FeatureFile::read(std::fs::File::open(&out_file).unwrap()).unwrap();
    assert_eq!(f.rows(), 6);
    assert_eq!(f.labels.unwrap(), vec![0, 0, 1, 1, 2, 2]);
}

#[test]
fn dump_filters_writes_images() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_small_config(tmp.path());
    let dir = tmp.path().join("filters");
    ok(&scatter(&["dump-filters", "--config", s(&cfg), "-o", s(&dir)]));
    let count = std::fs::read_dir(&dir).unwrap().count();
    // 3 scales x 8 angles, 4 scales x 8 angles, and the lowpass.
    assert_eq!(count, 24 + 32 + 1);
    assert_eq!(image::open(dir.join("layer1_j0_k0.png")).unwrap().width(), 32);
}

#[test]
fn upscaled_checkerboard_keeps_its_mean() {
    let tmp = tempfile::tempdir().unwrap();
    let small = GrayImage::from_fn(2, 2, |x, y| Luma([if (x + y) % 2 == 0 { 255 } else { 0 }]));
    let big = image::imageops::resize(&small, 128, 128, image::imageops::FilterType::Triangle);
    let path = tmp.path().join("checker.png");
    big.save(&path).unwrap();
    let planes = load_and_resize(&path, 128, ColorMode::Gray).unwrap();
    let before = big.pixels().map(|p| f64::from(p.0[0]) / 255.0).sum::<f64>() / (128.0 * 128.0);
    assert!((planes[0].mean() - before).abs() <= 1e-3);
    assert!((planes[0].mean() - 0.5).abs() <= 1e-2);

    // An image already at the target size passes through.
    let planes = to_planes(&resize_square(&image::DynamicImage::ImageLuma8(big.clone()), 128), ColorMode::Gray);
    for (v, p) in planes[0].data().iter().zip(big.pixels()) {
        assert!((v - f64::from(p.0[0]) / 255.0).abs() <= 1.0 / 255.0);
    }
}
