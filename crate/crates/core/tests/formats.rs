use proptest::prelude::*;
use scatter_core::classifier::LinearModel;
use scatter_core::features::fit_standardizer;
use scatter_core::{FeatureFile, Matrix, ScatterError, Standardizer};

fn value() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1.0f64..1.0,
        prop::sample::select(vec![1e30, -1e30, 1e-30, -1e-30, 0.0, -0.0]),
        (-30i32..=30).prop_map(|e| 10f64.powi(e)),
    ]
}

fn matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (0..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| (Just(r), Just(c), prop::collection::vec(value(), r * c)))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, ..ProptestConfig::default() })]

    #[test]
    fn feature_file_round_trips((rows, cols, data) in matrix(12, 20), labeled in any::<bool>(), text in "[ -~\n]{0,40}") {
        let values: Vec<f32> = data.iter().map(|&v| v as f32).collect();
        let labels = labeled.then(|| (0..rows as u32).map(|i| i * 7 % 5).collect());
        let file = FeatureFile::new(text, cols, values, labels).unwrap();
        let mut bytes = Vec::new();
        file.write(&mut bytes).unwrap();
        let back = FeatureFile::read(&bytes[..]).unwrap();
        prop_assert_eq!(back.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                        file.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(&back, &file);
        let mut again = Vec::new();
        back.write(&mut again).unwrap();
        prop_assert_eq!(again, bytes);
    }

    #[test]
    fn model_file_round_trips((k, width, data) in matrix(6, 10).prop_filter("classes", |(r, _, _)| *r > 0),
                               biases in prop::collection::vec(value(), 6), c in 1e-3f64..1e3, seed in any::<u64>()) {
        let weights = Matrix::new(k, width, data).unwrap();
        let classes: Vec<u32> = (0..k as u32).map(|i| i * 3 + 1).collect();
        let model = LinearModel::new(weights, biases[..k].to_vec(), classes, c, seed).unwrap();
        let mut bytes = Vec::new();
        model.write(&mut bytes).unwrap();
        let back = LinearModel::read(&bytes[..]).unwrap();
        prop_assert_eq!(&back, &model);
        let mut again = Vec::new();
        back.write(&mut again).unwrap();
        prop_assert_eq!(again, bytes);
    }

    #[test]
    fn standardizing_twice_is_idempotent((rows, cols, data) in matrix(30, 8).prop_filter("rows", |(r, _, _)| *r >= 2)) {
        let m = Matrix::new(rows, cols, data.iter().map(|v| v.clamp(-1e6, 1e6)).collect()).unwrap();
        let s = fit_standardizer(&m).unwrap();
        let z = s.apply_matrix(&m).unwrap();
        let again = fit_standardizer(&z).unwrap();
        let constant = s.constant_columns();
        for c in 0..cols {
            if constant.contains(&c) {
                continue;
            }
            let col: Vec<f64> = (0..rows).map(|r| z.row(r)[c]).collect();
            let mean = col.iter().sum::<f64>() / rows as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / rows as f64;
            prop_assert!(mean.abs() <= 1e-9, "mean {}", mean);
            prop_assert!((var - 1.0).abs() <= 1e-6, "var {}", var);
            prop_assert!(again.mean[c].abs() <= 1e-9);
            prop_assert!((again.inv_std[c] - 1.0).abs() <= 1e-6);
        }
        let mut bytes = Vec::new();
        s.write(&mut bytes).unwrap();
        prop_assert_eq!(Standardizer::read(&bytes[..]).unwrap(), s);
    }
}

#[test]
fn every_truncation_is_reported() {
    let file = FeatureFile::new("c0 o0 2x2\n".into(), 4, vec![1.5; 12], Some(vec![0, 1, 2])).unwrap();
    let mut bytes = Vec::new();
    file.write(&mut bytes).unwrap();
    for cut in 0..bytes.len() {
        match FeatureFile::read(&bytes[..cut]) {
            Err(ScatterError::Format { offset, .. }) => assert!(offset <= cut as u64),
            other => panic!("cut at {cut}: {other:?}"),
        }
    }
    let mut longer = bytes.clone();
    longer.push(0);
    assert!(matches!(FeatureFile::read(&longer[..]), Err(ScatterError::Format { .. })));
}
