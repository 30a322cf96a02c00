use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use pairrank_core::data::CatalogEntry;
use pairrank_core::{ItemCatalog, ItemId};
use pairrank_survey::store::COMPARISONS_FILE;
use pairrank_survey::{open_state, router, AppState, ServiceConfig, Strategy, SurveyOptions};
use serde_json::{json, Value};
use tower::ServiceExt;

fn write_catalog(dir: &Path, ids: &[&str]) -> std::path::PathBuf {
    let mut catalog = ItemCatalog::new();
    for id in ids {
        catalog
            .push(CatalogEntry { id: ItemId::new(*id).unwrap(), image: Some(format!("{id}.jpg")), metadata: Default::default() })
            .unwrap();
        std::fs::write(dir.join(format!("{id}.jpg")), id.as_bytes()).unwrap();
    }
    let path = dir.join("catalog.json");
    catalog.write_manifest(&path).unwrap();
    path
}

fn config(root: &Path, ids: &[&str]) -> ServiceConfig {
    let images = root.join("images");
    std::fs::create_dir_all(&images).unwrap();
    ServiceConfig {
        data_dir: root.join("data"),
        catalog: Some(write_catalog(&images, ids)),
        image_dir: Some(images),
        listen: "127.0.0.1:0".parse().unwrap(),
        strategy: Strategy::Uniform,
        options: SurveyOptions { seed: Some(3), ..Default::default() },
    }
}

struct Client {
    app: Router,
    state: Arc<AppState>,
}

impl Client {
    fn open(config: &ServiceConfig) -> Client {
        let state = open_state(config).unwrap();
        Client { app: router(Arc::clone(&state), config.image_dir.clone()), state }
    }

    async fn raw(&self, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
        let req = Request::builder().method(method).uri(uri);
        let req = match body {
            Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let res = self.app.clone().oneshot(req).await.unwrap();
        let status = res.status();
        (status, res.into_body().collect().await.unwrap().to_bytes().to_vec())
    }

    async fn call(&self, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let (status, bytes) = self.raw(method, uri, body).await;
        (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
    }

    async fn session(&self) -> String {
        let (status, v) = self.call("POST", "/api/sessions", None).await;
        assert_eq!(status, StatusCode::OK);
        v["session_id"].as_str().unwrap().to_string()
    }

    async fn next(&self, session: &str) -> Value {
        let (status, v) = self.call("GET", &format!("/api/sessions/{session}/next"), None).await;
        assert_eq!(status, StatusCode::OK, "{v}");
        v
    }

    async fn vote(&self, session: &str, token: &str, outcome: &str) -> (StatusCode, Value) {
        self.call("POST", &format!("/api/sessions/{session}/vote"), Some(json!({ "token": token, "outcome": outcome })))
            .await
    }

    fn log_lines(&self, config: &ServiceConfig) -> usize {
        std::fs::read_to_string(config.data_dir.join(COMPARISONS_FILE)).unwrap_or_default().lines().count()
    }
}

#[tokio::test]
async fn vote_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &["a", "b", "c"]);
    let c = Client::open(&cfg);
    let s = c.session().await;
    let pair = c.next(&s).await;
    let token = pair["token"].as_str().unwrap();
    let left = pair["left"]["id"].as_str().unwrap().to_string();
    assert_ne!(left, pair["right"]["id"].as_str().unwrap());
    assert_eq!(pair["left"]["image"], format!("/images/{left}.jpg"));

    let (status, v) = c.vote(&s, token, "left").await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["recorded"], true);
    assert_eq!(v["updated"]["left"]["id"], left.as_str());
    assert_eq!(v["updated"]["left"]["score"], 1516.0);
    assert_eq!(v["updated"]["right"]["score"], 1484.0);
    assert!(v["updated"]["left"]["mu"].as_f64().unwrap() > 25.0);
    assert!(v["updated"]["right"]["sigma"].as_f64().unwrap() < 25.0 / 3.0);
    assert_eq!(c.log_lines(&cfg), 1);

    let (status, _) = c.vote(&s, token, "left").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(c.log_lines(&cfg), 1);

    let logged: pairrank_survey::LogEntry =
        serde_json::from_str(std::fs::read_to_string(cfg.data_dir.join(COMPARISONS_FILE)).unwrap().trim()).unwrap();
    assert_eq!(logged.ticket, token);
    assert_eq!(logged.record.a.as_str(), left);
    assert_eq!(logged.record.session.as_deref(), Some(s.as_str()));
}

#[tokio::test]
async fn request_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &["a", "b", "c"]);
    let c = Client::open(&cfg);
    let s = c.session().await;
    assert_eq!(c.call("GET", "/api/sessions/nope/next", None).await.0, StatusCode::NOT_FOUND);
    let pair = c.next(&s).await;
    let token = pair["token"].as_str().unwrap();
    assert_eq!(c.call("GET", &format!("/api/sessions/{s}/next"), None).await.0, StatusCode::CONFLICT);
    assert_eq!(c.call("GET", &format!("/api/sessions/{s}/next?strategy=best"), None).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(c.vote(&s, token, "sideways").await.0, StatusCode::BAD_REQUEST);
    let (status, _) = c.call("POST", &format!("/api/sessions/{s}/vote"), Some(json!({ "token": token }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let other = c.session().await;
    assert_eq!(c.vote(&other, token, "left").await.0, StatusCode::CONFLICT);

    let (status, v) = c.vote(&s, token, "skip").await;
    assert_eq!((status, &v["recorded"]), (StatusCode::OK, &json!(false)));
    assert_eq!(c.log_lines(&cfg), 0);

    assert_eq!(c.call("GET", "/api/scores?method=lsr", None).await.0, StatusCode::CONFLICT);
    assert_eq!(c.call("GET", "/api/scores?method=best", None).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(c.call("GET", "/api/scores", None).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(c.call("GET", "/api/scores?method=elo&k=3", None).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn scores_before_and_after_votes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &["A", "B"]);
    let c = Client::open(&cfg);
    let (status, v) = c.call("GET", "/api/scores?method=elo", None).await;
    assert_eq!(status, StatusCode::OK);
    for item in v["items"].as_array().unwrap() {
        assert_eq!(item["score"], 1500.0);
        assert_eq!(item["normalized"], 0.5);
    }

    // A beats B twice, B beats A once.
    let s = c.session().await;
    for winner in ["A", "A", "B"] {
        let pair = c.next(&s).await;
        let side = if pair["left"]["id"] == winner { "left" } else { "right" };
        let (status, _) = c.vote(&s, pair["token"].as_str().unwrap(), side).await;
        assert_eq!(status, StatusCode::OK);
    }

    let (status, first) = c.raw("GET", "/api/scores?method=lsr&alpha_reg=0", None).await;
    assert_eq!(status, StatusCode::OK);
    let (_, second) = c.raw("GET", "/api/scores?method=lsr&alpha_reg=0", None).await;
    assert_eq!(first, second);
    let v: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(v["records"], 3);
    let pi: Vec<f64> = v["items"].as_array().unwrap().iter().map(|i| i["score"].as_f64().unwrap().exp()).collect();
    assert!((pi[0] - 2.0 / 3.0).abs() < 1e-9 && (pi[1] - 1.0 / 3.0).abs() < 1e-9, "{pi:?}");

    // Online TrueSkill weighs the last vote most, so only batch methods are
    // checked for order.
    for method in ["co", "lsr", "gp"] {
        let (status, v) = c.call("GET", &format!("/api/scores?method={method}"), None).await;
        assert_eq!(status, StatusCode::OK, "{method}: {v}");
        let items = v["items"].as_array().unwrap();
        let a = items.iter().find(|i| i["id"] == "A").unwrap();
        let b = items.iter().find(|i| i["id"] == "B").unwrap();
        assert!(a["score"].as_f64().unwrap() > b["score"].as_f64().unwrap(), "{method}");
        assert_eq!(a["normalized"], 1.0);
        assert_eq!(b["normalized"], 0.0);
        assert_eq!(a["sigma"].as_f64().is_some(), method == "gp");
    }
    let (_, v) = c.call("GET", "/api/scores?method=trueskill", None).await;
    assert!(v["items"].as_array().unwrap().iter().all(|i| i["sigma"].as_f64().unwrap() < 25.0 / 3.0));

    // More votes invalidate the cache.
    let pair = c.next(&s).await;
    c.vote(&s, pair["token"].as_str().unwrap(), "tie").await;
    let (_, third) = c.call("GET", "/api/scores?method=lsr&alpha_reg=0", None).await;
    assert_eq!(third["records"], 4);
}

#[tokio::test]
async fn items_and_images() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &["a", "b"]);
    let c = Client::open(&cfg);
    let (status, v) = c.call("GET", "/api/items", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v, json!([{ "id": "a", "image": "/images/a.jpg" }, { "id": "b", "image": "/images/b.jpg" }]));
    let (status, bytes) = c.raw("GET", "/images/b.jpg", None).await;
    assert_eq!((status, bytes.as_slice()), (StatusCode::OK, b"b".as_slice()));
}

#[tokio::test]
async fn restart_rehydrates_sessions_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &["a", "b", "c", "d"]);
    let c = Client::open(&cfg);
    let s = c.session().await;
    for outcome in ["left", "right", "tie", "left"] {
        let pair = c.next(&s).await;
        c.vote(&s, pair["token"].as_str().unwrap(), outcome).await;
    }
    let (_, elo) = c.raw("GET", "/api/scores?method=elo", None).await;
    let (_, ts) = c.raw("GET", "/api/scores?method=trueskill", None).await;
    drop(c);

    // Second start reads the stored catalog copy.
    let restarted = ServiceConfig { catalog: None, ..cfg.clone() };
    let c = Client::open(&restarted);
    assert_eq!(c.raw("GET", "/api/scores?method=elo", None).await.1, elo);
    assert_eq!(c.raw("GET", "/api/scores?method=trueskill", None).await.1, ts);
    assert_eq!(c.state.survey().served_count(&s), Some(4));
    let pair = c.next(&s).await;
    let (status, _) = c.vote(&s, pair["token"].as_str().unwrap(), "tie").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(c.log_lines(&cfg), 5);
}

#[tokio::test]
async fn changed_catalog_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &["a", "b"]);
    drop(Client::open(&cfg));
    let other = write_catalog(&dir.path().join("images"), &["a", "b", "c"]);
    assert!(open_state(&ServiceConfig { catalog: Some(other), ..cfg }).is_err());
}

#[tokio::test]
async fn uncertainty_strategy_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &["a", "b", "c"]);
    let c = Client::open(&cfg);
    let s = c.session().await;
    let pair = c.next(&s).await;
    c.vote(&s, pair["token"].as_str().unwrap(), "left").await;
    // The unrated item has the widest belief and must appear.
    let untouched = ["a", "b", "c"]
        .into_iter()
        .find(|id| pair["left"]["id"] != *id && pair["right"]["id"] != *id)
        .unwrap();
    let (status, next) = c.call("GET", &format!("/api/sessions/{s}/next?strategy=uncertainty"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(next["left"]["id"] == untouched || next["right"]["id"] == untouched, "{next}");
}
