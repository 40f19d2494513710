use std::collections::BTreeMap;
use std::fs;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use lsynth::models::{branch_counts, canola_preset};
use lsynth::render::decode_image;
use lsynth_cli::server::app;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Reply {
    status: StatusCode,
    headers: axum::http::HeaderMap,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|_| panic!("not JSON: {}", String::from_utf8_lossy(&self.body)))
    }
}

async fn call(router: &Router, method: &str, uri: &str, body: Option<Value>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = router.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, headers, body }
}

async fn raw(router: &Router, uri: &str, body: &str) -> Reply {
    let req = Request::post(uri).header("content-type", "application/json").body(Body::from(body.to_string())).unwrap();
    let resp = router.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    Reply { status, headers, body: resp.into_body().collect().await.unwrap().to_bytes().to_vec() }
}

#[tokio::test]
async fn health_and_presets() {
    let r = app(None);
    let h = call(&r, "GET", "/health", None).await;
    assert_eq!((h.status, h.body.as_slice()), (StatusCode::OK, b"ok".as_slice()));
    let p = call(&r, "GET", "/presets", None).await.json();
    let names: Vec<&str> = p.as_array().unwrap().iter().map(|v| v["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["maize", "canola-v1", "canola-v2", "canola-v3", "canola-v4", "canola-v5"]);
    assert_eq!(p[0]["species"], "maize");
    assert!(p[3]["target"].is_object() && p[1]["target"].is_null());
    assert_eq!(call(&r, "GET", "/nowhere", None).await.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn render_is_deterministic_png_with_annotation() {
    let r = app(None);
    let body = json!({"preset": "maize", "day": 20, "seed": 7, "resolution": 128});
    let a = call(&r, "POST", "/render", Some(body.clone())).await;
    let b = call(&r, "POST", "/render", Some(body)).await;
    assert_eq!(a.status, StatusCode::OK);
    assert_eq!(a.headers["content-type"], "image/png");
    assert_eq!(a.body, b.body);
    let img = decode_image(&a.body).unwrap();
    assert_eq!((img.width, img.height), (128, 128));
    let ann: Value = serde_json::from_str(a.headers["x-annotation"].to_str().unwrap()).unwrap();
    assert_eq!(ann["task"], "leaf_count");
    assert_eq!(ann["day"], 20);
    assert_eq!(ann["count"].to_string(), a.headers["x-count"].to_str().unwrap());
    assert!(ann["count"].as_u64().unwrap() >= 1);

    let other = call(&r, "POST", "/render", Some(json!({"preset": "maize", "day": 20, "seed": 8, "resolution": 128}))).await;
    assert_ne!(other.body, a.body);
    let over = json!({"preset": "maize", "day": 20, "seed": 7, "resolution": 128, "overrides": {"leaf_len": 0.6}});
    assert_ne!(call(&r, "POST", "/render", Some(over)).await.body, a.body);
}

#[tokio::test]
async fn render_errors() {
    let r = app(None);
    let bad = |v: Value| {
        let r = r.clone();
        async move { call(&r, "POST", "/render", Some(v)).await }
    };
    let e = bad(json!({"preset": "maize", "day": "x"})).await;
    assert_eq!(e.status, StatusCode::BAD_REQUEST);
    assert!(e.json()["error"].as_str().unwrap().contains("day"));
    let e = bad(json!({"preset": "maize", "colour": 3})).await;
    assert_eq!(e.status, StatusCode::BAD_REQUEST);
    assert!(e.json()["error"].as_str().unwrap().contains("colour"));
    assert_eq!(raw(&r, "/render", "{not json").await.status, StatusCode::BAD_REQUEST);
    assert_eq!(bad(json!({"day": 3})).await.status, StatusCode::BAD_REQUEST);
    assert_eq!(bad(json!({"preset": "sunflower"})).await.status, StatusCode::NOT_FOUND);
    assert_eq!(bad(json!({"preset": "maize", "day": 28})).await.status, StatusCode::BAD_REQUEST);
    assert_eq!(bad(json!({"preset": "maize", "resolution": 8})).await.status, StatusCode::BAD_REQUEST);
    let e = bad(json!({"preset": "maize", "overrides": {"nope": 1.0}})).await;
    assert_eq!(e.status, StatusCode::BAD_REQUEST);
    assert!(e.json()["error"].as_str().unwrap().contains("overrides.nope"));

    let e = bad(json!({"preset": "maize", "overrides": {"leaf_len": 1e308, "int_len": 1e308}})).await;
    assert_eq!(e.status, StatusCode::INTERNAL_SERVER_ERROR);
    let id = e.json()["error_id"].as_str().unwrap().to_string();
    assert!(id.starts_with('E'));
}

#[tokio::test]
async fn simulate_batch_histograms() {
    let r = app(None);
    let a = call(&r, "POST", "/simulate-batch", Some(json!({"preset": "canola-v3", "n": 200, "seed": 1}))).await;
    assert_eq!(a.status, StatusCode::OK);
    let v = a.json();
    let hist: BTreeMap<u32, usize> = serde_json::from_value(v["histogram"].clone()).unwrap();
    assert_eq!(hist.values().sum::<usize>(), 200);
    assert_eq!(hist, branch_counts(&canola_preset(3).unwrap(), 200, 1).unwrap());
    let d = v["distance"].as_f64().unwrap();
    let target: BTreeMap<u32, f64> = serde_json::from_value(v["target"].clone()).unwrap();
    let h: BTreeMap<u32, f64> = hist.iter().map(|(&k, &c)| (k, c as f64)).collect();
    assert!((d - lsynth::metrics::histogram_distance(&h, &target).unwrap()).abs() < 1e-12);

    for n in [0, 1001] {
        let e = call(&r, "POST", "/simulate-batch", Some(json!({"preset": "canola-v3", "n": n}))).await;
        assert_eq!(e.status, StatusCode::BAD_REQUEST);
    }
    let e = call(&r, "POST", "/simulate-batch", Some(json!({"preset": "maize", "n": 5}))).await;
    assert_eq!(e.status, StatusCode::BAD_REQUEST);
    let e = call(&r, "POST", "/simulate-batch", Some(json!({"preset": "canola-v3"}))).await;
    assert_eq!(e.status, StatusCode::BAD_REQUEST);
    assert!(e.json()["error"].as_str().unwrap().contains('n'));
}

fn manifest_file(dir: &std::path::Path, counts: &[u32]) -> std::path::PathBuf {
    let mut csv = String::from("image_id,path,plant_id,genotype_id,day,view,species,source,variant,task,count\n");
    for (i, c) in counts.iter().enumerate() {
        csv.push_str(&format!("i{i},i{i}.png,p{i},g{i},1,top,canola,real,,inflorescence_branch_count,{c}\n"));
    }
    let path = dir.join("real.csv");
    fs::write(&path, csv).unwrap();
    path
}

#[tokio::test]
async fn real_distribution_and_target_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let path = manifest_file(dir.path(), &[2, 3, 3, 5]);
    let r = app(None);
    let q = format!("/real-distribution?manifest={}", path.display());
    let v = call(&r, "GET", &q, None).await.json();
    assert_eq!(v["total"], 4);
    assert_eq!(v["histogram"], json!({"2": 1, "3": 2, "5": 1}));
    assert_eq!(call(&r, "GET", "/real-distribution", None).await.status, StatusCode::BAD_REQUEST);
    let missing = format!("/real-distribution?manifest={}", dir.path().join("no.csv").display());
    assert_eq!(call(&r, "GET", &missing, None).await.status, StatusCode::NOT_FOUND);

    let b = json!({"preset": "canola-v4", "n": 50, "target_manifest": path});
    let v = call(&r, "POST", "/simulate-batch", Some(b)).await.json();
    assert_eq!(v["target"], json!({"2": 0.25, "3": 0.5, "5": 0.25}));
}

#[tokio::test]
async fn sessions_are_isolated() {
    let r = app(None);
    let a = json!({"preset": "canola-v3", "overrides": {"vigour": 0.8}});
    let b = json!({"preset": "canola-v3", "overrides": {"vigour": 2.4, "branch_thr": 1.2}});
    assert_eq!(call(&r, "PUT", "/sessions/alpha", Some(a.clone())).await.status, StatusCode::OK);
    assert_eq!(call(&r, "PUT", "/sessions/beta", Some(b.clone())).await.status, StatusCode::OK);
    assert_eq!(call(&r, "GET", "/sessions/alpha", None).await.json(), a);
    assert_eq!(call(&r, "GET", "/sessions/beta", None).await.json(), b);

    let run = |s: &str| {
        let r = r.clone();
        let body = json!({"session": s, "n": 60, "seed": 2});
        async move { call(&r, "POST", "/simulate-batch", Some(body)).await.json()["histogram"].clone() }
    };
    let (ha, hb) = (run("alpha").await, run("beta").await);
    assert_ne!(ha, hb);
    let mut direct = canola_preset(3).unwrap();
    direct.apply_override("vigour", 0.8).unwrap();
    let expect: BTreeMap<u32, usize> = branch_counts(&direct, 60, 2).unwrap();
    assert_eq!(serde_json::from_value::<BTreeMap<u32, usize>>(ha).unwrap(), expect);

    let render = json!({"session": "alpha", "resolution": 64});
    assert_eq!(call(&r, "POST", "/render", Some(render)).await.status, StatusCode::OK);

    assert_eq!(call(&r, "GET", "/sessions/gamma", None).await.status, StatusCode::NOT_FOUND);
    let ghost = json!({"session": "gamma", "n": 5});
    assert_eq!(call(&r, "POST", "/simulate-batch", Some(ghost)).await.status, StatusCode::NOT_FOUND);
    let bad_preset = json!({"preset": "sunflower"});
    assert_eq!(call(&r, "PUT", "/sessions/x", Some(bad_preset)).await.status, StatusCode::NOT_FOUND);
    let bad_key = json!({"preset": "maize", "overrides": {"nope": 1}});
    assert_eq!(call(&r, "PUT", "/sessions/x", Some(bad_key)).await.status, StatusCode::BAD_REQUEST);
    assert_eq!(call(&r, "PUT", "/sessions/a%20b", Some(a)).await.status, StatusCode::BAD_REQUEST);
    // a fresh app has no sessions
    assert_eq!(call(&app(None), "GET", "/sessions/alpha", None).await.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn static_ui_files() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("index.html"), "<html>ui</html>").unwrap();
    let r = app(Some(dir.path().to_path_buf()));
    let page = call(&r, "GET", "/", None).await;
    assert_eq!((page.status, page.body.as_slice()), (StatusCode::OK, b"<html>ui</html>".as_slice()));
    assert_eq!(call(&r, "GET", "/index.html", None).await.status, StatusCode::OK);
    assert_eq!(call(&r, "GET", "/missing.js", None).await.status, StatusCode::NOT_FOUND);
    assert_eq!(call(&r, "GET", "/health", None).await.body, b"ok");
}
