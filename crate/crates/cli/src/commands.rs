//! Subcommand implementations. Progress goes to stderr, reports to the
//! returned string.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use image::{GrayImage, Luma};
use rayon::prelude::*;
use scatter_core::classifier::TrainOptions;
use scatter_core::features::{fit_standardizer, format_path_table};
use scatter_core::filterbank::{build_filter_bank, littlewood_paley_scan, LpScan, SpatialFilterBank};
use scatter_core::{Complex64, FeatureFile, LinearModel, Plane, ScatterError, Scattering, ScatteringConfig, Standardizer};

use crate::dataset::{collect_inputs, split, Item};
use crate::error::{CliError, Result};
use crate::ingest::load_and_resize;

#[derive(Debug, Clone)]
pub struct ExtractArgs {
    pub config: ScatteringConfig,
    pub inputs: Vec<PathBuf>,
    pub output: PathBuf,
    /// With `train_per_class`, receives the held-out rows.
    pub test_output: Option<PathBuf>,
    pub train_per_class: Option<usize>,
    pub seed: u64,
    pub skip_bad: bool,
}

pub fn extract(args: &ExtractArgs) -> Result<String> {
    let (items, classes) = collect_inputs(&args.inputs)?;
    if items.is_empty() {
        return Err(CliError::Data("no input images".into()));
    }
    if args.train_per_class.is_some() != args.test_output.is_some() {
        return Err(CliError::Usage("--train-per-class and --test-output go together".into()));
    }
    let net = Scattering::new(args.config.clone())?;
    let table = format_path_table(&net.path_table());
    let started = Instant::now();
    let done = AtomicUsize::new(0);
    let every = (items.len() / 20).max(1);
    let rows: Vec<Result<Vec<f64>>> = items
        .par_iter()
        .map(|item| {
            let row = load_and_resize(&item.path, args.config.size, args.config.color)
                .and_then(|planes| Ok(net.scatter(&planes)?.values));
            let n = done.fetch_add(1, Ordering::Relaxed) + 1;
            if n % every == 0 || n == items.len() {
                eprintln!("extract: {n}/{} images, {:.1} s", items.len(), started.elapsed().as_secs_f64());
            }
            row
        })
        .collect();

    let mut good = Vec::new();
    let mut good_rows = Vec::new();
    let mut bad = Vec::new();
    for (item, row) in items.into_iter().zip(rows) {
        match row {
            Ok(r) => {
                good.push(item);
                good_rows.push(r);
            }
            Err(e) => bad.push(e),
        }
    }
    if !bad.is_empty() {
        eprintln!("extract: {} input(s) failed:", bad.len());
        for e in &bad {
            eprintln!("  {e}");
        }
        if !args.skip_bad {
            return Err(CliError::Data(format!(
                "{} input(s) could not be processed (use --skip-bad to drop them)",
                bad.len()
            )));
        }
    }

    let mut report = String::new();
    if let Some(names) = &classes {
        for (i, n) in names.iter().enumerate() {
            let _ = writeln!(report, "class {i}: {n}");
        }
    }
    let width = net.feature_len();
    match (args.train_per_class, &args.test_output) {
        (Some(n), Some(test_path)) => {
            let (train, test) = split(&good, n, args.seed)?;
            for (idx, path) in [(train, &args.output), (test, test_path)] {
                write_rows(path, &table, width, idx.iter().map(|&i| &good_rows[i]), idx.iter().map(|&i| &good[i]))?;
                let _ = writeln!(report, "wrote {} rows of width {width} to {}", idx.len(), path.display());
            }
        }
        _ => {
            write_rows(&args.output, &table, width, good_rows.iter(), good.iter())?;
            let _ = writeln!(report, "wrote {} rows of width {width} to {}", good.len(), args.output.display());
        }
    }
    eprintln!("extract: finished in {:.1} s", started.elapsed().as_secs_f64());
    Ok(report)
}

fn write_rows<'a>(
    path: &Path,
    table: &str,
    width: usize,
    rows: impl Iterator<Item = &'a Vec<f64>>,
    items: impl Iterator<Item = &'a Item>,
) -> Result<()> {
    let values: Vec<f32> = rows.flat_map(|r| r.iter().map(|&v| v as f32)).collect();
    let labels: Option<Vec<u32>> = items.map(|it| it.label).collect();
    let file = FeatureFile::new(table.to_string(), width, values, labels)?;
    file.write(BufWriter::new(create(path)?))?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct FitArgs {
    pub train: PathBuf,
    pub model: PathBuf,
    pub standardizer: PathBuf,
    pub c: f64,
    pub seed: u64,
}

pub fn fit(args: &FitArgs) -> Result<String> {
    let started = Instant::now();
    let file = read_features(&args.train)?;
    let labels = file
        .labels
        .clone()
        .ok_or_else(|| CliError::Data(format!("{} has no labels", args.train.display())))?;
    let x = file.to_matrix();
    let standardizer = fit_standardizer(&x)?;
    let constant = standardizer.constant_columns();
    if !constant.is_empty() {
        eprintln!("fit: {} constant column(s) zeroed", constant.len());
    }
    let z = standardizer.apply_matrix(&x)?;
    let opts = TrainOptions {
        c: args.c,
        seed: args.seed,
        ..TrainOptions::default()
    };
    let (model, reports) = scatter_core::classifier::train_with(&z, &labels, &opts)?;
    let mut report = String::new();
    for (class, r) in model.classes().iter().zip(&reports) {
        let _ = writeln!(
            report,
            "class {class}: {} epochs, relative duality gap {:.2e}{}",
            r.epochs,
            r.relative_gap(),
            if r.converged { "" } else { " (epoch limit reached)" }
        );
    }
    let train_eval = model.evaluate(&z, &labels)?;
    let _ = writeln!(
        report,
        "trained on {} rows of width {}, {} constant columns, train accuracy {:.4}",
        x.rows(),
        x.cols(),
        constant.len(),
        train_eval.accuracy
    );
    model.write(BufWriter::new(create(&args.model)?))?;
    standardizer.write(BufWriter::new(create(&args.standardizer)?))?;
    eprintln!("fit: finished in {:.1} s", started.elapsed().as_secs_f64());
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub model: PathBuf,
    pub standardizer: PathBuf,
    pub test: PathBuf,
}

pub fn eval(args: &EvalArgs) -> Result<String> {
    let model = LinearModel::read(BufReader::new(open(&args.model)?)).map_err(in_file(&args.model))?;
    let standardizer =
        Standardizer::read(BufReader::new(open(&args.standardizer)?)).map_err(in_file(&args.standardizer))?;
    let file = read_features(&args.test)?;
    if standardizer.width() != model.width() || file.width != model.width() {
        return Err(CliError::Format(format!(
            "width mismatch: model {}, standardizer {}, features {}",
            model.width(),
            standardizer.width(),
            file.width
        )));
    }
    let labels = file
        .labels
        .clone()
        .ok_or_else(|| CliError::Data(format!("{} has no labels", args.test.display())))?;
    let z = standardizer.apply_matrix(&file.to_matrix())?;
    let e = model.evaluate(&z, &labels)?;

    let mut out = String::new();
    let total: u64 = e.confusion.iter().flatten().sum();
    let correct: u64 = (0..e.classes.len()).map(|i| e.confusion[i][i]).sum();
    let _ = writeln!(out, "accuracy: {:.4} ({correct}/{total})", e.accuracy);
    let _ = writeln!(out, "mean per-class accuracy: {:.4}", e.mean_per_class);
    for (class, acc) in e.classes.iter().zip(&e.per_class) {
        match acc {
            Some(a) => {
                let _ = writeln!(out, "  class {class}: {a:.4}");
            }
            None => {
                let _ = writeln!(out, "  class {class}: no test examples");
            }
        }
    }
    let _ = writeln!(out, "confusion (rows true, columns predicted):");
    let _ = write!(out, "{:>8}", "");
    for c in &e.classes {
        let _ = write!(out, " {c:>6}");
    }
    out.push('\n');
    for (c, row) in e.classes.iter().zip(&e.confusion) {
        let _ = write!(out, "{c:>8}");
        for v in row {
            let _ = write!(out, " {v:>6}");
        }
        out.push('\n');
    }
    Ok(out)
}

/// Frame bounds of both spatial banks and the angular bank; optionally
/// writes the first-layer Littlewood–Paley sum as an image centered on the
/// zero frequency.
pub fn frame_check(config: &ScatteringConfig, image: Option<&Path>) -> Result<String> {
    let started = Instant::now();
    let banks = build_filter_bank(config)?;
    let mut out = String::new();
    let first = describe_bank(&mut out, "layer 1", &banks.layer1);
    let second = describe_bank(&mut out, "layer 2", &banks.layer2);
    let angular = banks.angular.littlewood_paley();
    let (lo, hi) = angular
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let _ = writeln!(
        out,
        "angular: {} wavelets on {} orientations, A = {lo:.6}, B = {hi:.9}",
        banks.angular.psi_b.len(),
        banks.angular.k1
    );
    let tight = [&first, &second].iter().all(|s| (s.upper - 1.0).abs() <= 1e-6);
    let _ = writeln!(out, "upper bounds within 1e-6 of 1: {}", if tight { "yes" } else { "no" });
    if let Some(path) = image {
        let n = first.size;
        let img = GrayImage::from_fn(n as u32, n as u32, |x, y| {
            let (ky, kx) = ((y as usize + n / 2) % n, (x as usize + n / 2) % n);
            Luma([(255.0 * first.grid[ky * n + kx] / first.upper).round().clamp(0.0, 255.0) as u8])
        });
        img.save(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let _ = writeln!(out, "wrote {}", path.display());
    }
    let _ = writeln!(out, "elapsed: {:.3} s", started.elapsed().as_secs_f64());
    if !tight {
        return Err(CliError::Data(format!("{out}upper frame bound is not 1")));
    }
    Ok(out)
}

fn describe_bank(out: &mut String, name: &str, bank: &SpatialFilterBank) -> LpScan {
    let scan = littlewood_paley_scan(bank);
    let n = bank.size;
    let freq = |(ky, kx): (usize, usize)| {
        let f = |k: usize| scatter_core::conv::bin_frequency(k, n);
        format!("bin ({ky}, {kx}), omega = ({:.4}, {:.4})", f(ky), f(kx))
    };
    let _ = writeln!(
        out,
        "{name}: {} wavelets, A = {:.6}, B = {:.9}, wavelet scale factor {:.6}",
        bank.psi.len(),
        scan.lower,
        scan.upper,
        bank.normalization
    );
    let _ = writeln!(out, "  min at {}", freq(scan.argmin));
    let _ = writeln!(out, "  max at {}", freq(scan.argmax));
    scan
}

/// Writes the real part of every spatial filter, centered, as 8-bit images.
pub fn dump_filters(config: &ScatteringConfig, dir: &Path) -> Result<String> {
    let banks = build_filter_bank(config)?;
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let mut written = 0;
    for (layer, bank) in [("layer1", &banks.layer1), ("layer2", &banks.layer2)] {
        for w in &bank.psi {
            let name = format!("{layer}_j{}_k{}.png", w.scale_index, w.k);
            save_centered(&w.spectrum.inverse(0), &dir.join(name))?;
            written += 1;
        }
    }
    save_centered(&banks.layer1.phi.inverse(0), &dir.join("phi.png"))?;
    Ok(format!("wrote {} filter images to {}\n", written + 1, dir.display()))
}

fn save_centered(p: &Plane<Complex64>, path: &Path) -> Result<()> {
    let (h, w) = (p.height(), p.width());
    let peak = p.data().iter().map(|v| v.re.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let img = GrayImage::from_fn(w as u32, h as u32, |x, y| {
        let v = p.get((y as usize + h / 2) % h, (x as usize + w / 2) % w).re;
        Luma([(127.5 + 127.5 * v / peak).round().clamp(0.0, 255.0) as u8])
    });
    img.save(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_features(path: &Path) -> Result<FeatureFile> {
    FeatureFile::read(BufReader::new(open(path)?)).map_err(in_file(path))
}

// Format errors gain the file name.
fn in_file(path: &Path) -> impl FnOnce(ScatterError) -> CliError + '_ {
    move |e| match e {
        ScatterError::Format { .. } => CliError::Format(format!("{}: {e}", path.display())),
        other => other.into(),
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(CliError::io(path))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(CliError::io(path))
}
