use ppgstress::compress::{calibrate, load_any, quantize_ptq, AnyModel, QuantModel};
use ppgstress::model::{default_builder, load_model, save_model};
use ppgstress::scalogram::{read_sclg, write_sclg, ScalogramImage};
use ppgstress::{Class, Error};

#[test]
fn model_files_round_trip_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let m = default_builder(10).build(4).unwrap();
    let fp = dir.path().join("float.sdm");
    save_model(&m, &fp).unwrap();
    assert_eq!(load_model(&fp).unwrap(), m);
    assert!(matches!(load_any(&fp).unwrap(), AnyModel::Float(_)));

    let q = quantize_ptq(&m, &calibrate(&m, &[ScalogramImage::zeros()]).unwrap()).unwrap();
    let qp = dir.path().join("quant.sdm");
    q.save(&qp).unwrap();
    assert_eq!(QuantModel::load(&qp).unwrap(), q);
    assert!(load_model(&qp).is_err());
    assert!(matches!(load_any(&qp).unwrap(), AnyModel::Quant(_)));
}

#[test]
fn truncated_and_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    let m = default_builder(6).build(1).unwrap();
    let p = dir.path().join("m.sdm");
    save_model(&m, &p).unwrap();
    let bytes = std::fs::read(&p).unwrap();
    std::fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
    assert!(matches!(load_model(&p), Err(Error::Truncated { .. })));
    assert!(matches!(load_model(dir.path().join("nope.sdm")), Err(Error::Io { .. })));
}

#[test]
fn sclg_round_trip_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let mut a = ScalogramImage::from_pixels((0..4096).map(|i| (i % 7) as f32 / 6.0).collect(), Some(Class::Stress)).unwrap();
    a.provenance.window_start = 3;
    let b = ScalogramImage::zeros();
    let p = dir.path().join("x.sclg");
    write_sclg(&p, &[a.clone(), b.clone()]).unwrap();
    let back = read_sclg(&p).unwrap();
    assert_eq!(back.len(), 2);
    assert_eq!(back[0].pixels, a.pixels);
    assert_eq!(back[0].label, Some(Class::Stress));
    assert_eq!(back[1].label, None);
}
