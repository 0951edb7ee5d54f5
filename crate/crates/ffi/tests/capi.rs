use std::ffi::{CStr, CString};
use std::ptr;

use divrec::pipeline::{Experiment, ExperimentConfig};
use divrec::recommender::Algorithm;
use divrec::synth::{generate, SynthConfig};
use divrec_ffi::*;

fn small_panel_json() -> String {
    let cfg = SynthConfig {
        n_users: 120,
        n_domains: 40,
        max_domains_per_user: 25,
        min_visitors: 5,
        seed: 3,
        ..SynthConfig::default()
    };
    let data = generate(&cfg).unwrap();
    data.panel(cfg.min_visitors).unwrap().to_json().unwrap()
}

fn last_error() -> String {
    let p = divrec_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(divrec_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn panel_and_recommender_match_core() {
    let json = small_panel_json();
    let c_json = CString::new(json.clone()).unwrap();
    let mut panel: *mut DivrecPanel = ptr::null_mut();
    assert_eq!(unsafe { divrec_panel_from_json(c_json.as_ptr(), &mut panel) }, DivrecStatus::Ok);

    let core_panel = divrec::ingest::PanelDataset::from_json(&json).unwrap();
    assert_eq!(unsafe { divrec_panel_n_users(panel) }, core_panel.n_users());
    assert_eq!(unsafe { divrec_panel_n_domains(panel) }, core_panel.n_domains());

    let cfg = divrec_config_default();
    let mut rec: *mut DivrecRecommender = ptr::null_mut();
    assert_eq!(unsafe { divrec_recommender_new(panel, &cfg, &mut rec) }, DivrecStatus::Ok);
    unsafe { divrec_panel_free(panel) };

    let exp = Experiment::build(&core_panel, &ExperimentConfig::default()).unwrap();
    let mut t = 0.0;
    assert_eq!(unsafe { divrec_recommender_location(rec, &mut t) }, DivrecStatus::Ok);
    assert_eq!(t, exp.params.t);

    let mut checked = 0;
    for c in exp.candidates.iter().take(20) {
        for (i, &d) in c.domains.iter().enumerate() {
            let mut v = f64::NAN;
            assert_eq!(unsafe { divrec_recommender_predict_cf(rec, c.user, d, &mut v) }, DivrecStatus::Ok);
            assert_eq!(v, c.cf[i]);
            assert_eq!(unsafe { divrec_recommender_predict_cfd(rec, c.user, d, &mut v) }, DivrecStatus::Ok);
            assert_eq!(v, c.cf[i] + c.g[i]);
            checked += 1;
        }
        for (algo, c_algo) in [
            (Algorithm::Cf, DivrecAlgorithm::Cf),
            (Algorithm::Cfd, DivrecAlgorithm::Cfd),
            (Algorithm::GlobalPopularity, DivrecAlgorithm::Popularity),
            (Algorithm::ActualVisits, DivrecAlgorithm::Actual),
        ] {
            let want = c.rank(algo, &exp.popularity);
            let mut len = 0usize;
            let st = unsafe { divrec_recommender_rank(rec, c.user, c_algo, ptr::null_mut(), ptr::null_mut(), 0, &mut len) };
            assert_eq!(st, DivrecStatus::BufferTooSmall);
            assert_eq!(len, want.len());
            let mut domains = vec![0u32; len];
            let mut scores = vec![0f64; len];
            let st = unsafe {
                divrec_recommender_rank(rec, c.user, c_algo, domains.as_mut_ptr(), scores.as_mut_ptr(), len, &mut len)
            };
            assert_eq!(st, DivrecStatus::Ok);
            assert_eq!(domains, want.domains().collect::<Vec<_>>());
            assert_eq!(scores, want.entries.iter().map(|e| e.rating).collect::<Vec<_>>());
        }
    }
    assert!(checked > 0);

    let mut v = 0.0;
    let n_users = core_panel.n_users() as u32;
    assert_eq!(
        unsafe { divrec_recommender_predict_cf(rec, n_users, 0, &mut v) },
        DivrecStatus::InvalidArgument
    );
    assert!(last_error().contains("outside"));
    unsafe { divrec_recommender_free(rec) };
}

#[test]
fn scalar_functions() {
    let mut v = 0.0;
    let h = [0.0, 0.0, 0.0, 4.0, 0.0, 0.0, 0.0];
    assert_eq!(unsafe { divrec_diversity(h.as_ptr(), DivrecMetric::Variance, &mut v) }, DivrecStatus::Ok);
    assert_eq!(v, 0.0);
    let h = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
    assert_eq!(unsafe { divrec_diversity(h.as_ptr(), DivrecMetric::Variance, &mut v) }, DivrecStatus::Ok);
    assert!((v - 9.0).abs() < 1e-12);
    let empty = [0.0; 7];
    assert_eq!(
        unsafe { divrec_diversity(empty.as_ptr(), DivrecMetric::EntropyMl, &mut v) },
        DivrecStatus::Computation
    );

    let x = [1.0, 2.0, 2.0, 3.0];
    let y = [1.0, 3.0, 2.0, 2.0];
    assert_eq!(
        unsafe { divrec_similarity(DivrecKernel::Kendall, x.as_ptr(), y.as_ptr(), 4, &mut v) },
        DivrecStatus::Ok
    );
    assert!((v - 0.7).abs() < 1e-12);
    let c = [2.0; 4];
    assert_eq!(
        unsafe { divrec_similarity(DivrecKernel::Pearson, x.as_ptr(), c.as_ptr(), 4, &mut v) },
        DivrecStatus::Undefined
    );

    assert_eq!(unsafe { divrec_logistic(1.0, 1.0, 2.0, 2.0, &mut v) }, DivrecStatus::Ok);
    assert_eq!(v, 0.5);
    assert_eq!(unsafe { divrec_logistic(1.0, 0.0, 2.0, 2.0, &mut v) }, DivrecStatus::InvalidArgument);
    assert!(last_error().contains("psi"));

    let mut p = [0.0; 3];
    assert_eq!(unsafe { divrec_discount(3, 1.0, p.as_mut_ptr()) }, DivrecStatus::Ok);
    assert_eq!(p, [6.0 / 11.0, 3.0 / 11.0, 2.0 / 11.0]);

    let rec = [100.0, 50.0, 0.0];
    let base = [0.0, 50.0];
    assert_eq!(
        unsafe { divrec_delta_q(rec.as_ptr(), 3, base.as_ptr(), 2, 1.0, &mut v) },
        DivrecStatus::Ok
    );
    assert!((v - 200.0 / 3.0).abs() < 1e-12);
    assert_eq!(
        unsafe { divrec_delta_q(rec.as_ptr(), 3, base.as_ptr(), 0, 1.0, &mut v) },
        DivrecStatus::InvalidArgument
    );
}

#[test]
fn null_pointers_are_reported() {
    assert_eq!(unsafe { divrec_logistic(1.0, 1.0, 0.0, 0.0, ptr::null_mut()) }, DivrecStatus::NullPointer);
    assert!(last_error().contains("null"));
    assert_eq!(unsafe { divrec_panel_n_users(ptr::null()) }, 0);
    unsafe { divrec_panel_free(ptr::null_mut()) };
    unsafe { divrec_recommender_free(ptr::null_mut()) };
}

#[test]
fn load_reports_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    let missing = CString::new(dir.path().join("nope.csv").to_str().unwrap()).unwrap();
    let paths = [missing.as_ptr()];
    let mut panel: *mut DivrecPanel = ptr::null_mut();
    let st = unsafe {
        divrec_panel_load(paths.as_ptr(), 1, missing.as_ptr(), missing.as_ptr(), ptr::null(), 5, &mut panel)
    };
    assert_eq!(st, DivrecStatus::Io);
    assert!(panel.is_null());
    assert!(last_error().contains("nope.csv"));
}

#[test]
fn load_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SynthConfig {
        n_users: 80,
        n_domains: 30,
        max_domains_per_user: 20,
        min_visitors: 5,
        seed: 9,
        ..SynthConfig::default()
    };
    let data = generate(&cfg).unwrap();
    data.write(dir.path()).unwrap();
    let want = data.panel(5).unwrap();

    let p = |name: &str| CString::new(dir.path().join(name).to_str().unwrap()).unwrap();
    let traffic = [p("traffic_wave1.csv"), p("traffic_wave2.csv")];
    let traffic_ptrs: Vec<_> = traffic.iter().map(|c| c.as_ptr()).collect();
    let (survey, scores, slants) = (p("survey.csv"), p("scores.csv"), p("slants.csv"));
    let mut panel: *mut DivrecPanel = ptr::null_mut();
    let st = unsafe {
        divrec_panel_load(
            traffic_ptrs.as_ptr(),
            traffic_ptrs.len(),
            survey.as_ptr(),
            scores.as_ptr(),
            slants.as_ptr(),
            5,
            &mut panel,
        )
    };
    assert_eq!(st, DivrecStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { divrec_panel_n_users(panel) }, want.n_users());
    assert_eq!(unsafe { divrec_panel_n_domains(panel) }, want.n_domains());

    let name = CString::new(want.domains[0].clone()).unwrap();
    let mut idx = u32::MAX;
    assert_eq!(unsafe { divrec_panel_domain_index(panel, name.as_ptr(), &mut idx) }, DivrecStatus::Ok);
    assert_eq!(idx, 0);
    unsafe { divrec_panel_free(panel) };
}
