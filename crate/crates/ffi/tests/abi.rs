use std::ffi::CString;
use std::ptr;

use fbg_skin::geometry::build_default_layout;
use fbg_skin::neural::TrainConfig;
use fbg_skin::pipeline::{train_pipeline, DataSplit, PipelineConfig};
use fbg_skin::simulator::{generate_dataset, FieldParams, Protocol};
use fbg_skin_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0u8; 256];
    let n = unsafe { fbg_last_error_message(buf.as_mut_ptr().cast(), buf.len()) };
    buf.truncate(n.min(255));
    String::from_utf8(buf).unwrap()
}

fn handles() -> (*mut FbgLayout, *mut FbgParams) {
    let mut layout = ptr::null_mut();
    let mut params = ptr::null_mut();
    unsafe {
        assert_eq!(fbg_layout_new_default(&mut layout), FbgStatus::Ok);
        assert_eq!(fbg_params_new_default(ptr::null(), false, &mut params), FbgStatus::Ok);
    }
    (layout, params)
}

#[test]
fn sensor_response_matches_core() {
    let (layout, params) = handles();
    let mut out = [0.0; 16];
    let status = unsafe { fbg_sensor_response(layout, params, 1.0, 50.0, 0.7, out.as_mut_ptr(), out.len()) };
    assert_eq!(status, FbgStatus::Ok);
    let expected = fbg_skin::simulator::sensor_response(
        &build_default_layout(),
        &FieldParams::default(),
        fbg_skin::simulator::Contact { point: fbg_skin::geometry::SurfacePoint::new(1.0, 50.0), force: 0.7 },
    )
    .unwrap();
    assert_eq!(out.to_vec(), expected);
    unsafe {
        fbg_params_free(params);
        fbg_layout_free(layout);
    }
}

#[test]
fn errors_map_to_codes_and_messages() {
    let (layout, params) = handles();
    let mut out = [0.0; 16];
    unsafe {
        assert_eq!(fbg_sensor_response(layout, params, 100.0, 50.0, 1.0, out.as_mut_ptr(), 16), FbgStatus::OutOfDomain);
        assert!(last_error().contains("out of domain"), "{}", last_error());
        assert_eq!(fbg_sensor_response(layout, params, 0.0, 50.0, 1.0, out.as_mut_ptr(), 15), FbgStatus::ShapeMismatch);
        assert_eq!(
            fbg_sensor_response(ptr::null(), params, 0.0, 50.0, 1.0, out.as_mut_ptr(), 16),
            FbgStatus::NullPointer
        );
        assert_eq!(fbg_params_new_default(ptr::null(), true, &mut ptr::null_mut()), FbgStatus::NullPointer);
        let mut v = 0.0;
        assert_eq!(fbg_threshold_at(1.0, 0.0, 1.5, &mut v), FbgStatus::InvalidArgument);
        let missing = CString::new("/nonexistent/model").unwrap();
        let mut model = ptr::null_mut();
        assert_eq!(fbg_model_load(missing.as_ptr(), &mut model), FbgStatus::Io);
        assert!(model.is_null());
        fbg_params_free(params);
        fbg_layout_free(layout);
    }
}

#[test]
fn truncated_error_buffer_is_terminated() {
    let mut v = 0.0;
    unsafe {
        fbg_threshold_at(0.0, 0.0, 0.5, &mut v);
        let mut buf = [1i8; 8];
        let n = fbg_last_error_message(buf.as_mut_ptr(), buf.len());
        assert!(n > 7);
        assert_eq!(buf[7], 0);
    }
}

#[test]
fn sigmoid_functions() {
    let xs: Vec<f64> = (-3..=3).map(f64::from).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 1.0 / (1.0 + (-x).exp())).collect();
    let (mut a, mut b, mut r) = (0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(fbg_fit_sigmoid(xs.as_ptr(), ys.as_ptr(), xs.len(), &mut a, &mut b, &mut r), FbgStatus::Ok);
    }
    assert!((a - 1.0).abs() < 1e-6 && b.abs() < 1e-6 && r < 1e-12);
    let mut t = 0.0;
    unsafe { assert_eq!(fbg_threshold_at(1.0, 0.0, 0.75, &mut t), FbgStatus::Ok) };
    assert!((t - 3f64.ln()).abs() < 1e-12);
}

#[test]
fn model_round_trip_through_abi() {
    let protocol = Protocol { frames: 60, ..Protocol::default() };
    let d = generate_dataset(&build_default_layout(), &FieldParams::default(), &protocol, 8, 2).unwrap();
    let split = DataSplit { train: (0..6).collect(), held_out: vec![6, 7] };
    let quick = TrainConfig { epochs: 1, ..TrainConfig::default() };
    let config = PipelineConfig {
        hidden: vec![8],
        frame_stride: 2,
        force_train: quick.clone(),
        loc_train: quick,
        ..PipelineConfig::default()
    };
    let model = train_pipeline(&d, &split, &config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    model.save(dir.path()).unwrap();

    let path = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut handle = ptr::null_mut();
    unsafe { assert_eq!(fbg_model_load(path.as_ptr(), &mut handle), FbgStatus::Ok) };
    let mut w = 0usize;
    unsafe { assert_eq!(fbg_model_window(handle, &mut w), FbgStatus::Ok) };
    assert_eq!(w, 8);

    let frames = &d.indentations[6].frames[10..18];
    let window: Vec<f64> = frames.iter().flat_map(|f| f.shifts.iter().copied()).collect();
    let (mut contact, mut force, mut x, mut y) = (-1, f64::NAN, f64::NAN, f64::NAN);
    let status = unsafe { fbg_model_infer(handle, window.as_ptr(), 8, &mut contact, &mut force, &mut x, &mut y) };
    assert_eq!(status, FbgStatus::Ok);
    let rows: Vec<Vec<f64>> = frames.iter().map(|f| f.shifts.clone()).collect();
    match model.infer(&rows).unwrap() {
        fbg_skin::pipeline::ContactEstimate::NoContact => assert_eq!(contact, 0),
        fbg_skin::pipeline::ContactEstimate::Contact { force: f, point } => {
            assert_eq!(contact, 1);
            assert_eq!((force, x, y), (f, point.x, point.y));
        }
    }
    let status = unsafe { fbg_model_infer(handle, window.as_ptr(), 7, &mut contact, &mut force, &mut x, &mut y) };
    assert_eq!(status, FbgStatus::ShapeMismatch);
    unsafe { fbg_model_free(handle) };
}
