mod common;

use common::*;
use rand::seq::SliceRandom;
use rand::Rng;
use scatter_core::filterbank::WaveletFamily;
use scatter_core::{count_features, path_table, ColorMode, J2Rule, Plane, Pooling, Scattering, ScatteringConfig};

/// Path count by nested enumeration, independent of the library's formula.
fn enumerate(c: &ScatteringConfig) -> usize {
    let avg_cells = (c.size >> c.output_stride_log2).pow(2);
    let cells = match c.pooling {
        Pooling::Average => avg_cells,
        Pooling::MaxNonOverlap => (c.size >> c.pool_window_log2).pow(2),
        Pooling::MaxOverlap => {
            let w = 1usize << c.pool_window_log2;
            let mut starts = 0;
            let mut p = 0;
            while p + w <= c.size {
                starts += 1;
                p += w / 2;
            }
            starts * starts
        }
    };
    let mut total = 0;
    for _channel in 0..c.color.channels() {
        total += avg_cells;
        for _j1 in &c.j1_set {
            for _t1 in 0..c.k1 {
                total += cells;
            }
        }
        for &j1 in &c.j1_set {
            for j2 in 0..=c.j * c.q {
                let admissible = match c.j2_rule {
                    J2Rule::Inclusive => j2 >= j1,
                    J2Rule::Strict => j2 > j1,
                };
                if !admissible {
                    continue;
                }
                for _t2 in 0..c.k2 {
                    for _t1 in 0..c.k1 {
                        for _angular in 0..=c.l2_set.len() {
                            total += cells;
                        }
                    }
                }
            }
        }
    }
    total
}

fn random_config(r: &mut rand_chacha::ChaCha8Rng) -> ScatteringConfig {
    loop {
        let size = *[16usize, 32].choose(r).unwrap();
        let j = r.gen_range(1..=size.trailing_zeros());
        let q = r.gen_range(1..=2);
        let k1 = *[4usize, 8].choose(r).unwrap();
        let mut j1_set: Vec<u32> = (0..j * q).filter(|_| r.gen_bool(0.6)).collect();
        if j1_set.is_empty() {
            j1_set.push(0);
        }
        let l2_set: Vec<u32> = (0..3).filter(|&l| (1usize << l) < k1 && r.gen_bool(0.5)).collect();
        let pooling = *[Pooling::Average, Pooling::MaxNonOverlap, Pooling::MaxOverlap].choose(r).unwrap();
        let c = ScatteringConfig {
            size,
            j,
            q,
            k1,
            k2: r.gen_range(1..=8),
            j1_set,
            j2_rule: if r.gen_bool(0.5) { J2Rule::Inclusive } else { J2Rule::Strict },
            l2_set,
            family: WaveletFamily::MorletComplex,
            pooling,
            pool_window_log2: r.gen_range(1..=size.trailing_zeros()),
            output_stride_log2: r.gen_range(0..=j),
            color: if r.gen_bool(0.3) { ColorMode::Yuv } else { ColorMode::Gray },
            ..ScatteringConfig::default()
        };
        if c.validate().is_ok() && Scattering::new(c.clone()).is_ok() {
            return c;
        }
    }
}

#[test]
fn default_counts() {
    let c = ScatteringConfig::default();
    assert_eq!(count_features(&c), 64 + 2560 + 20 * 8 * 8 * 4 * 64);
    assert_eq!(enumerate(&c), count_features(&c));
    let strict = ScatteringConfig {
        j2_rule: J2Rule::Strict,
        ..c.clone()
    };
    assert_eq!(count_features(&strict), 64 + 2560 + 15 * 8 * 8 * 4 * 64);
    let yuv = ScatteringConfig {
        color: ColorMode::Yuv,
        ..c.clone()
    };
    assert_eq!(count_features(&yuv), 3 * count_features(&c));
}

#[test]
fn formula_matches_enumeration_and_output() {
    let mut r = rng(30);
    for _ in 0..20 {
        let c = random_config(&mut r);
        let n = count_features(&c);
        assert_eq!(n, enumerate(&c), "{c:?}");
        let table = path_table(&c);
        assert_eq!(table.iter().map(|b| b.len()).sum::<usize>(), n);
        let mut sorted = table.clone();
        sorted.sort_by_key(|b| (b.channel, b.path));
        sorted.dedup_by_key(|b| (b.channel, b.path));
        assert_eq!(sorted.len(), table.len(), "duplicate path");

        let net = Scattering::new(c.clone()).unwrap();
        let channels: Vec<Plane<f64>> = (0..c.color.channels()).map(|_| random_plane(&mut r, c.size)).collect();
        let f = net.scatter(&channels).unwrap();
        assert_eq!(f.values.len(), n);
        assert_eq!(f.paths, table);
    }
}
