use std::path::PathBuf;
use std::time::Duration;

use dualex::blackbox::{analytic, external_predictor, trees_fit, AnalyticFn, ExternalPredictor, Predictor};
use dualex::data::{gen_feature_dataset, gen_linear7, gen_ring, load_csv, SyntheticId, TargetColumn, RING_TRAIN};
use dualex::Error;

// Child processes below implement the stdio protocol as sh read loops: a
// `PREDICT r c` header, then one output line per input row. (Children must
// not buffer stdin; mawk, for one, does unless run with `-W interactive`.)

fn sh_child(row_reply: &str) -> String {
    format!(r#"while read -r a b c d rest; do case "$a" in PREDICT) ;; QUIT) exit ;; *) {row_reply} ;; esac; done"#)
}

#[test]
fn constant_child_predicts_zero() {
    let p = external_predictor(&sh_child("echo 0.0")).unwrap();
    let x = gen_linear7(25, 0.0, 1).x;
    assert_eq!(p.predict_batch(&x).unwrap(), vec![0.0; 25]);
    // a second batch reuses the session
    assert_eq!(p.predict(x.row(3)).unwrap(), 0.0);
}

#[test]
fn linear_child_matches_the_in_process_function() {
    let cmd = sh_child(r#"awk "BEGIN {printf \"%.17g\n\", 10*$a - 20*$b - 2*$c + 3*$d}""#);
    let p = external_predictor(&cmd).unwrap();
    let x = gen_linear7(200, 0.0, 2).x;
    let oracle = analytic(AnalyticFn::Linear7).predict_batch(&x).unwrap();
    let got = p.predict_batch(&x).unwrap();
    for (g, o) in got.iter().zip(&oracle) {
        assert!((g - o).abs() <= 1e-9, "{g} vs {o}");
    }
}

#[test]
fn child_exiting_mid_batch_is_an_io_error() {
    let cmd = r#"n=0; while read -r a rest; do case "$a" in PREDICT) n=0 ;; *) n=$((n+1)); [ $n -eq 3 ] && exit 1; echo 1 ;; esac; done"#;
    let p = external_predictor(cmd).unwrap();
    let err = p.predict_batch(&gen_linear7(10, 0.0, 3).x).unwrap_err();
    assert!(matches!(err, Error::PredictorIo(_)), "{err}");
    // the session is gone; later calls fail too
    assert!(p.predict_batch(&gen_linear7(2, 0.0, 3).x).is_err());
}

#[test]
fn malformed_reply_is_an_io_error() {
    let p = external_predictor(&sh_child("echo nan-ish")).unwrap();
    let err = p.predict_batch(&gen_linear7(2, 0.0, 4).x).unwrap_err();
    assert!(matches!(err, Error::PredictorIo(_)), "{err}");
}

#[test]
fn silent_child_times_out() {
    let p = ExternalPredictor::spawn("sleep 5", Duration::from_millis(200)).unwrap();
    let err = p.predict_batch(&gen_linear7(2, 0.0, 5).x).unwrap_err();
    assert!(matches!(err, Error::PredictorIo(_)), "{err}");
}

fn variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
}

#[test]
fn forest_fits_the_ring_function() {
    let train = gen_feature_dataset(SyntheticId::FeatEx3, 11).unwrap();
    let y = train.targets().unwrap();
    let forest = trees_fit(&train.x, y, 100, 11).unwrap();

    let fitted = forest.predict_batch(&train.x).unwrap();
    let sse: f64 = fitted.iter().zip(y).map(|(f, t)| (f - t).powi(2)).sum();
    let r2 = 1.0 - sse / (variance(y) * y.len() as f64);
    assert!(r2 >= 0.9, "training R^2 {r2}");

    let test = gen_ring(300, RING_TRAIN, 0.0, 12, 3).unwrap();
    let truth = test.targets().unwrap();
    let pred = forest.predict_batch(&test.x).unwrap();
    let mse = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / truth.len() as f64;
    assert!(mse * 10.0 <= variance(y), "test MSE {mse}, target variance {}", variance(y));
}

#[test]
fn ccpp_fixture_loads_with_zscored_features() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/ccpp_synthetic_500.csv");
    let ds = load_csv(&path, &TargetColumn::Named("PE".into()), true).unwrap();
    assert_eq!((ds.len(), ds.dim()), (500, 4));
    for j in 0..4 {
        let c = ds.x.column(j);
        let m = c.iter().sum::<f64>() / c.len() as f64;
        assert!(m.abs() < 1e-12);
        assert!((variance(&c).sqrt() - 1.0).abs() < 0.01);
    }
    let pe = ds.targets().unwrap();
    assert!(pe.iter().all(|&v| (400.0..=520.0).contains(&v)));
}
