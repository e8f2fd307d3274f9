//! `key = value` configuration files for [`ScatteringConfig`].
//!
//! Blank lines and text after `#` are ignored. Lists are comma separated.
//! `j1_set` and `output_stride_log2` default to `0..J` and `J - 1` for the
//! configured `J`.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use scatter_core::filterbank::WaveletFamily;
use scatter_core::{ColorMode, J2Rule, Pooling, ScatteringConfig};

use crate::error::{CliError, Result};

pub const KEYS: &[&str] = &[
    "size",
    "j",
    "k1",
    "k2",
    "q",
    "j1_set",
    "j2_rule",
    "l2_set",
    "family",
    "pooling",
    "pool_window_log2",
    "output_stride_log2",
    "color",
    "morlet_sigma",
    "morlet_xi",
    "morlet_slant",
    "lowpass_sigma",
    "angular_sigma",
    "angular_xi",
];

pub fn load(path: &Path) -> Result<ScatteringConfig> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    parse(&text).map_err(|e| match e {
        CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse(text: &str) -> Result<ScatteringConfig> {
    let mut entries: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| usage(line_no, format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(usage(line_no, format!("unknown key `{key}`")));
        }
        if entries.insert(key, (line_no, value.trim())).is_some() {
            return Err(usage(line_no, format!("duplicate key `{key}`")));
        }
    }

    let get = |key: &str| entries.get(key).copied();
    let size = match get("size") {
        Some((l, v)) => number(l, "size", v)?,
        None => ScatteringConfig::default().size,
    };
    let j = match get("j") {
        Some((l, v)) => number(l, "j", v)?,
        None => ScatteringConfig::default().j,
    };
    let mut c = ScatteringConfig::with_size_and_scale(size, j);
    for (&key, &(l, v)) in &entries {
        match key {
            "size" | "j" => {}
            "k1" => c.k1 = number(l, key, v)?,
            "k2" => c.k2 = number(l, key, v)?,
            "q" => c.q = number(l, key, v)?,
            "j1_set" => c.j1_set = list(l, key, v)?,
            "l2_set" => c.l2_set = list(l, key, v)?,
            "pool_window_log2" => c.pool_window_log2 = number(l, key, v)?,
            "output_stride_log2" => c.output_stride_log2 = number(l, key, v)?,
            "morlet_sigma" => c.morlet.sigma = number(l, key, v)?,
            "morlet_xi" => c.morlet.xi = number(l, key, v)?,
            "morlet_slant" => c.morlet.slant = number(l, key, v)?,
            "lowpass_sigma" => c.lowpass_sigma = number(l, key, v)?,
            "angular_sigma" => c.angular.sigma = number(l, key, v)?,
            "angular_xi" => c.angular.xi = number(l, key, v)?,
            "j2_rule" => {
                c.j2_rule = choice(l, key, v, &[("inclusive", J2Rule::Inclusive), ("strict", J2Rule::Strict)])?
            }
            "family" => {
                c.family = choice(
                    l,
                    key,
                    v,
                    &[("morlet", WaveletFamily::MorletComplex), ("haar", WaveletFamily::HaarReal)],
                )?
            }
            "pooling" => {
                c.pooling = choice(
                    l,
                    key,
                    v,
                    &[
                        ("average", Pooling::Average),
                        ("max", Pooling::MaxNonOverlap),
                        ("max_overlap", Pooling::MaxOverlap),
                    ],
                )?
            }
            "color" => c.color = choice(l, key, v, &[("gray", ColorMode::Gray), ("yuv", ColorMode::Yuv)])?,
            _ => unreachable!("key list and match arms disagree on `{key}`"),
        }
    }
    c.validate()?;
    Ok(c)
}

/// Text form of a configuration that [`parse`] reads back unchanged.
pub fn render(c: &ScatteringConfig) -> String {
    let join = |v: &[u32]| v.iter().map(u32::to_string).collect::<Vec<_>>().join(", ");
    let family = match c.family {
        WaveletFamily::MorletComplex => "morlet",
        WaveletFamily::HaarReal => "haar",
    };
    let pooling = match c.pooling {
        Pooling::Average => "average",
        Pooling::MaxNonOverlap => "max",
        Pooling::MaxOverlap => "max_overlap",
    };
    let j2_rule = match c.j2_rule {
        J2Rule::Inclusive => "inclusive",
        J2Rule::Strict => "strict",
    };
    let color = match c.color {
        ColorMode::Gray => "gray",
        ColorMode::Yuv => "yuv",
    };
    format!(
        "size = {}\nj = {}\nk1 = {}\nk2 = {}\nq = {}\nj1_set = {}\nj2_rule = {j2_rule}\nl2_set = {}\n\
         family = {family}\npooling = {pooling}\npool_window_log2 = {}\noutput_stride_log2 = {}\ncolor = {color}\n\
         morlet_sigma = {:?}\nmorlet_xi = {:?}\nmorlet_slant = {:?}\nlowpass_sigma = {:?}\n\
         angular_sigma = {:?}\nangular_xi = {:?}\n",
        c.size,
        c.j,
        c.k1,
        c.k2,
        c.q,
        join(&c.j1_set),
        join(&c.l2_set),
        c.pool_window_log2,
        c.output_stride_log2,
        c.morlet.sigma,
        c.morlet.xi,
        c.morlet.slant,
        c.lowpass_sigma,
        c.angular.sigma,
        c.angular.xi,
    )
}

fn usage(line: usize, msg: String) -> CliError {
    CliError::Usage(format!("line {line}: {msg}"))
}

fn number<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| usage(line, format!("`{key}` expects a number, got `{v}`")))
}

fn list(line: usize, key: &str, v: &str) -> Result<Vec<u32>> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|item| number(line, key, item.trim())).collect()
}

fn choice<T: Copy>(line: usize, key: &str, v: &str, options: &[(&str, T)]) -> Result<T> {
    options
        .iter()
        .find(|(name, _)| name.eq_ignore_ascii_case(v))
        .map(|&(_, t)| t)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            usage(line, format!("`{key}` must be one of {}, got `{v}`", names.join(", ")))
        })
}
