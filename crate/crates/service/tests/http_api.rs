use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ikiwisi_core::fixture::{generate, FixtureConfig};
use ikiwisi_core::{EvalSession, ModelDescriptor, RatingRecord};
use ikiwisi_service::catalog::{GridView, RatingsView, SessionView};
use ikiwisi_service::{http, load_data_dir, write_data_dir, Catalog};
use serde_json::{json, Value};
use tokio::sync::oneshot;

struct Server {
    base: String,
    client: reqwest::Client,
    stop: Option<oneshot::Sender<()>>,
    task: tokio::task::JoinHandle<std::io::Result<()>>,
}

impl Server {
    async fn start(data_dir: &Path, log_dir: &Path) -> Self {
        let catalog = Arc::new(Catalog::open(load_data_dir(data_dir).unwrap(), log_dir).unwrap());
        let (addr_tx, addr_rx) = oneshot::channel::<SocketAddr>();
        let (stop_tx, stop_rx) = oneshot::channel::<()>();
        let task = tokio::spawn(http::serve(
            catalog,
            "127.0.0.1:0".parse().unwrap(),
            move |a| addr_tx.send(a).unwrap(),
            async {
                let _ = stop_rx.await;
            },
        ));
        let addr = addr_rx.await.unwrap();
        Self {
            base: format!("http://{addr}"),
            client: reqwest::Client::new(),
            stop: Some(stop_tx),
            task,
        }
    }

    async fn get(&self, path: &str) -> reqwest::Response {
        self.client.get(format!("{}{path}", self.base)).send().await.unwrap()
    }

    async fn post(&self, path: &str, body: Value) -> reqwest::Response {
        self.client
            .post(format!("{}{path}", self.base))
            .json(&body)
            .send()
            .await
            .unwrap()
    }

    async fn stop(mut self) {
        self.stop.take().unwrap().send(()).unwrap();
        self.task.await.unwrap().unwrap();
    }
}

fn tiny() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/tiny")
}

#[tokio::test(flavor = "multi_thread")]
async fn listing_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    write_data_dir(
        &data,
        &generate(&FixtureConfig {
            objects: 20,
            segments: 3,
            videos: 2,
            ..FixtureConfig::reference(2)
        }),
    )
    .unwrap();
    let s = Server::start(&data, &dir.path().join("logs")).await;

    let models: Vec<ModelDescriptor> = s.get("/api/models").await.json().await.unwrap();
    assert_eq!(models.len(), 5);
    let datasets: Value = s.get("/api/datasets").await.json().await.unwrap();
    assert_eq!(datasets[0]["dataset_id"], "fixture");
    assert_eq!(datasets[0]["segments"].as_array().unwrap().len(), 3);
    let seg: Value = s
        .get("/api/datasets/fixture/segments/seg-01")
        .await
        .json()
        .await
        .unwrap();
    assert_eq!(seg["segment_id"], "seg-01");
    assert_eq!(s.get("/api/datasets/fixture/segments/seg-99").await.status(), 404);
    assert_eq!(s.get("/api/sessions/unknown").await.status(), 404);
    assert_eq!(s.get("/api/sessions/unknown/grid").await.status(), 404);
    s.stop().await;
}

#[tokio::test(flavor = "multi_thread")]
async fn session_lifecycle_over_http() {
    let logs = tempfile::tempdir().unwrap();
    let s = Server::start(&tiny(), logs.path()).await;

    let created = s
        .post(
            "/api/sessions",
            json!({"rater_id": "r1", "model_id": "cached", "segment_id": "s0"}),
        )
        .await;
    assert_eq!(created.status(), 201);
    let session: EvalSession = created.json().await.unwrap();
    let id = session.session_id.clone();
    let events = format!("/api/sessions/{id}/events");

    // empty selection has no grid yet
    assert_eq!(s.get(&format!("/api/sessions/{id}/grid")).await.status(), 422);

    for raw in ["Car", "*Chair"] {
        let r = s
            .post(&events, json!({"kind": "add_object", "payload": {"raw_name": raw}}))
            .await;
        assert_eq!(r.status(), 200);
    }
    let r = s
        .post(
            &events,
            json!({"kind": "add_object", "payload": {"raw_name": "Dragon"}}),
        )
        .await;
    assert_eq!(r.status(), 422);
    let body: Value = r.json().await.unwrap();
    assert!(body["error"].as_str().unwrap().contains("Dragon"));
    let r = s
        .post(
            &events,
            json!({"kind": "toggle", "payload": {"object": "Car", "frame": 1}}),
        )
        .await;
    assert_eq!(r.status(), 200);
    let r = s.post(&events, json!({"kind": "bogus", "payload": {}})).await;
    assert!(r.status().is_client_error());

    let grid: GridView = s.get(&format!("/api/sessions/{id}/grid")).await.json().await.unwrap();
    assert_eq!(grid.missing_spy_rows, vec!["Chair".to_string()]);
    assert_eq!(grid.modification_summary.iter().map(|m| m.toggles).sum::<usize>(), 1);

    let r = s
        .post(&format!("/api/sessions/{id}/record"), json!({"rating": 45}))
        .await;
    assert_eq!(r.status(), 422);
    let rec: RatingRecord = s
        .post(
            &format!("/api/sessions/{id}/record"),
            json!({"rating": 40, "comment": "meh"}),
        )
        .await
        .json()
        .await
        .unwrap();
    assert_eq!(rec.raw_rating, 40);
    // Car over three frames: tp, fn, tn; Chair adds only tn
    assert!((rec.f1_star - 2.0 / 3.0).abs() < 1e-12);

    let r = s
        .post(&events, json!({"kind": "rating", "payload": {"rating": 10}}))
        .await;
    assert_eq!(r.status(), 409);
    let view: SessionView = s.get(&format!("/api/sessions/{id}")).await.json().await.unwrap();
    assert_eq!(view.event_count, 5);
    let log: Vec<Value> = s.get(&events).await.json().await.unwrap();
    assert_eq!(log.len(), 5);
    assert_eq!(log[0]["kind"], "create");
    assert_eq!(log[4]["kind"], "record");

    let ratings: RatingsView = s.get("/api/analysis/ratings").await.json().await.unwrap();
    assert_eq!(ratings.ratings, vec![rec.clone()]);
    s.stop().await;

    // a restarted server serves the same history
    let s = Server::start(&tiny(), logs.path()).await;
    let ratings: RatingsView = s.get("/api/analysis/ratings").await.json().await.unwrap();
    assert_eq!(ratings.ratings, vec![rec]);
    s.stop().await;
}
