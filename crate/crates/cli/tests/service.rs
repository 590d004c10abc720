use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use dlp2c::service::{bind, serve, ServiceConfig};
use dlp2c_core::graph::{from_json, to_value, HyperParams, LayerKind, Node};
use dlp2c_core::CompGraph;
use reqwest::{Client, StatusCode};
use serde_json::{json, Value};
use tokio::sync::oneshot;

struct Server {
    base: String,
    stop: Option<oneshot::Sender<()>>,
    task: tokio::task::JoinHandle<anyhow::Result<()>>,
}

impl Server {
    async fn start(config: ServiceConfig) -> Server {
        let listener = bind("127.0.0.1:0".parse().unwrap()).await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let (tx, rx) = oneshot::channel();
        let task = tokio::spawn(async move {
            serve(&config, listener, async {
                let _ = rx.await;
            })
            .await
        });
        Server { base, stop: Some(tx), task }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    async fn stop(mut self) {
        let _ = self.stop.take().unwrap().send(());
        self.task.await.unwrap().unwrap();
    }
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden").join(name)
}

fn lenet() -> Value {
    serde_json::from_str(&fs::read_to_string(golden("lenet.dlg.json")).unwrap()).unwrap()
}

fn chain(n: usize) -> CompGraph {
    let mut g = CompGraph::new("chain");
    g.add_node(Node::bare("in", LayerKind::InputMnist));
    g.add_node(Node::new("cv", LayerKind::Conv2D, HyperParams::Conv2D { filters: 8, filter_size: 3 }));
    g.add_node(Node::bare("fl", LayerKind::Flatten));
    g.add_edge("in", "cv").add_edge("cv", "fl");
    let mut prev = "fl".to_string();
    for i in 3..n {
        let id = format!("d{i}");
        g.add_node(Node::new(id.clone(), LayerKind::Dense, HyperParams::Dense { nodes: 64 }));
        g.add_edge(prev, id.clone());
        prev = id;
    }
    g
}

async fn post(c: &Client, url: String, body: &Value) -> (StatusCode, Value) {
    let r = c.post(url).json(body).send().await.unwrap();
    let status = r.status();
    (status, r.json().await.unwrap_or(Value::Null))
}

#[tokio::test]
async fn validate_and_malformed_bodies() {
    let dir = tempfile::tempdir().unwrap();
    let s = Server::start(ServiceConfig::new(dir.path())).await;
    let c = Client::new();
    let (st, v) = post(&c, s.url("/api/v1/validate"), &lenet()).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["violations"], json!([]));
    assert_eq!(v["valid"], true);

    let mut broken = lenet();
    broken["edges"] = json!([]);
    let (st, v) = post(&c, s.url("/api/v1/validate"), &broken).await;
    assert_eq!(st, StatusCode::OK);
    assert!(!v["violations"].as_array().unwrap().is_empty());

    let r = c.post(s.url("/api/v1/validate")).body("{not json").send().await.unwrap();
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);
    let (st, _) = post(&c, s.url("/api/v1/validate"), &json!({"nodes": 7})).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    s.stop().await;
}

#[tokio::test]
async fn codegen_parity_latency_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let s = Server::start(ServiceConfig::new(dir.path())).await;
    let c = Client::new();
    for name in ["lenet", "branch_conv", "text_lstm"] {
        let path = golden(&format!("{name}.dlg.json"));
        let graph: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        for target in ["keras", "caffe"] {
            let (st, v) = post(&c, s.url(&format!("/api/v1/codegen/{target}")), &graph).await;
            assert_eq!(st, StatusCode::OK);
            let cli = Command::new(env!("CARGO_BIN_EXE_dlp2c"))
                .args(["codegen", "--in", path.to_str().unwrap(), "--target", target])
                .output()
                .unwrap();
            assert!(cli.status.success());
            assert_eq!(v["code"].as_str().unwrap().as_bytes(), &cli.stdout[..], "{name} {target}");
        }
    }

    let big = to_value(&chain(64));
    for target in ["keras", "caffe"] {
        let t = Instant::now();
        let (st, v) = post(&c, s.url(&format!("/api/v1/codegen/{target}")), &big).await;
        assert!(t.elapsed() < Duration::from_secs(1));
        assert_eq!(st, StatusCode::OK);
        assert!(v["code"].as_str().unwrap().contains("d63"));
    }

    let mut broken = lenet();
    broken["edges"] = json!([]);
    let (st, v) = post(&c, s.url("/api/v1/codegen/caffe"), &broken).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(!v["errors"].as_array().unwrap().is_empty());
    assert!(!v["violations"].as_array().unwrap().is_empty());
    let (st, _) = post(&c, s.url("/api/v1/codegen/torch"), &lenet()).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    s.stop().await;
}

#[tokio::test]
async fn crud_lifecycle_and_durability() {
    let dir = tempfile::tempdir().unwrap();
    let s = Server::start(ServiceConfig::new(dir.path())).await;
    let c = Client::new();
    let (st, created) = post(&c, s.url("/api/v1/designs"), &json!({"graph": lenet(), "provenance": "simulated", "source_ref": "1234.5678"})).await;
    assert_eq!(st, StatusCode::CREATED);
    let id = created["id"].as_str().unwrap().to_string();
    assert_eq!(created["version"], 1);
    assert_eq!(created["draft"], false);
    assert_eq!(created["provenance"], "simulated");
    let keras = created["generated"]["keras_path"].as_str().unwrap();
    assert_eq!(
        fs::read_to_string(dir.path().join(keras)).unwrap(),
        fs::read_to_string(golden("lenet.py")).unwrap()
    );

    let got: Value = c.get(s.url(&format!("/api/v1/designs/{id}"))).send().await.unwrap().json().await.unwrap();
    assert_eq!(got["graph"], created["graph"]);

    let mut edited = lenet();
    edited["nodes"][1]["params"]["filters"] = json!(16);
    let r = c.put(s.url(&format!("/api/v1/designs/{id}"))).json(&json!({"version": 1, "graph": edited})).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    let updated: Value = r.json().await.unwrap();
    assert_eq!((updated["version"].clone(), updated["provenance"].clone()), (json!(2), json!("edited")));
    assert_ne!(fs::read_to_string(dir.path().join(keras)).unwrap(), fs::read_to_string(golden("lenet.py")).unwrap());

    let mut last = Value::Null;
    for stars in [5, 4, 4] {
        let (st, v) = post(&c, s.url(&format!("/api/v1/designs/{id}/ratings")), &json!({"stars": stars})).await;
        assert_eq!(st, StatusCode::OK);
        last = v;
    }
    assert_eq!(last["average"], 4.33);
    assert_eq!(last["count"], 3);
    let (st, _) = post(&c, s.url(&format!("/api/v1/designs/{id}/ratings")), &json!({"stars": 0})).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);

    let (_, second) = post(&c, s.url("/api/v1/designs"), &json!({"graph": lenet()})).await;
    s.stop().await;

    let s = Server::start(ServiceConfig::new(dir.path())).await;
    let list: Value = c.get(s.url("/api/v1/designs")).send().await.unwrap().json().await.unwrap();
    let ids: Vec<&str> = list["designs"].as_array().unwrap().iter().map(|d| d["id"].as_str().unwrap()).collect();
    assert_eq!(ids, [id.as_str(), second["id"].as_str().unwrap()]);
    assert_eq!(list["designs"][0]["rating_average"], 4.33);

    let r = c.delete(s.url(&format!("/api/v1/designs/{id}"))).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::NO_CONTENT);
    assert!(!dir.path().join(&id).exists());
    for r in [
        c.get(s.url(&format!("/api/v1/designs/{id}"))).send().await.unwrap(),
        c.delete(s.url(&format!("/api/v1/designs/{id}"))).send().await.unwrap(),
        c.get(s.url("/api/v1/designs/not-a-uuid")).send().await.unwrap(),
    ] {
        assert_eq!(r.status(), StatusCode::NOT_FOUND);
    }
    s.stop().await;
}

#[tokio::test]
async fn invalid_designs_are_drafts() {
    let dir = tempfile::tempdir().unwrap();
    let s = Server::start(ServiceConfig::new(dir.path())).await;
    let c = Client::new();
    let mut broken = lenet();
    broken["edges"] = json!([]);
    let (st, v) = post(&c, s.url("/api/v1/designs"), &json!({"graph": broken})).await;
    assert_eq!(st, StatusCode::CREATED);
    assert_eq!(v["draft"], true);
    assert_eq!(v["generated"], json!({"keras_path": null, "caffe_path": null}));
    let (st, _) = post(&c, s.url("/api/v1/designs"), &json!({"graph": lenet(), "provenance": "scanned"})).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (st, _) = post(&c, s.url("/api/v1/designs"), &json!({"name": "x"})).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let r = c
        .put(s.url(&format!("/api/v1/designs/{}", v["id"].as_str().unwrap())))
        .json(&json!({"graph": lenet()}))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);
    s.stop().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn concurrent_updates_conflict_once() {
    let dir = tempfile::tempdir().unwrap();
    let s = Server::start(ServiceConfig::new(dir.path())).await;
    let (a, b) = (Client::new(), Client::new());
    let (_, created) = post(&a, s.url("/api/v1/designs"), &json!({"graph": lenet()})).await;
    let url = s.url(&format!("/api/v1/designs/{}", created["id"].as_str().unwrap()));
    for version in 1..=5u64 {
        let body = json!({"version": version, "graph": lenet()});
        let (ra, rb) = tokio::join!(a.put(&url).json(&body).send(), b.put(&url).json(&body).send());
        let mut codes = [ra.unwrap().status(), rb.unwrap().status()];
        codes.sort();
        assert_eq!(codes, [StatusCode::OK, StatusCode::CONFLICT]);
    }
    let v: Value = a.get(&url).send().await.unwrap().json().await.unwrap();
    assert_eq!(v["version"], 6);
    s.stop().await;
}

#[tokio::test]
async fn oversized_bodies_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let s = Server::start(ServiceConfig::new(dir.path())).await;
    let c = Client::new();
    let huge = format!("{{\"pad\": \"{}\"}}", "x".repeat(9 * 1024 * 1024));
    for path in ["/api/v1/validate", "/api/v1/codegen/keras", "/api/v1/designs"] {
        let r = c.post(s.url(path)).header("content-type", "application/json").body(huge.clone()).send().await.unwrap();
        assert_eq!(r.status(), StatusCode::PAYLOAD_TOO_LARGE, "{path}");
    }
    s.stop().await;

    let mut config = ServiceConfig::new(dir.path());
    config.body_limit = 128;
    let s = Server::start(config).await;
    let (st, _) = post(&c, s.url("/api/v1/validate"), &lenet()).await;
    assert_eq!(st, StatusCode::PAYLOAD_TOO_LARGE);
    let part = reqwest::multipart::Part::bytes(vec![0u8; 4096]).file_name("x.png");
    let r = c
        .post(s.url("/api/v1/extract"))
        .multipart(reqwest::multipart::Form::new().part("image", part))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::PAYLOAD_TOO_LARGE);
    s.stop().await;
}

#[tokio::test]
async fn extract_endpoint() {
    let dir = tempfile::tempdir().unwrap();
    let s = Server::start(ServiceConfig::new(dir.path())).await;
    let c = Client::new();
    let graph = from_json(&fs::read_to_string(golden("lenet.dlg.json")).unwrap()).unwrap();
    let rendered = dlp2c_vision::render(&graph, dlp2c_vision::RenderStyle::StyleK, 1).unwrap();
    let png = dlp2c_vision::render::encode_png(&rendered.image).unwrap();
    let form = reqwest::multipart::Form::new().part("image", reqwest::multipart::Part::bytes(png).file_name("lenet.png"));
    let r = c.post(s.url("/api/v1/extract")).multipart(form).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    let v: Value = r.json().await.unwrap();
    assert_eq!(v["blobs"].as_array().unwrap().len(), graph.len());
    assert_eq!(v["graph"]["nodes"].as_array().unwrap().len(), graph.len());
    assert_eq!(v["diagnostics"]["discarded_edges"], 0);

    let form = reqwest::multipart::Form::new().part("image", reqwest::multipart::Part::bytes(b"not a png".to_vec()));
    let r = c.post(s.url("/api/v1/extract")).multipart(form).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);
    let r = c.post(s.url("/api/v1/extract")).multipart(reqwest::multipart::Form::new()).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);
    s.stop().await;
}

#[tokio::test]
async fn cors_origin_is_configurable() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ServiceConfig::new(dir.path());
    config.cors_origins = vec!["http://editor.local".into()];
    let s = Server::start(config).await;
    let c = Client::new();
    let preflight = |origin: &'static str| {
        c.request(reqwest::Method::OPTIONS, s.url("/api/v1/validate"))
            .header("origin", origin)
            .header("access-control-request-method", "POST")
            .send()
    };
    let r = preflight("http://editor.local").await.unwrap();
    assert_eq!(r.headers()["access-control-allow-origin"], "http://editor.local");
    let r = preflight("http://elsewhere.local").await.unwrap();
    assert!(r.headers().get("access-control-allow-origin").is_none());
    s.stop().await;
}

#[tokio::test]
async fn corrupt_records_do_not_stop_startup() {
    let dir = tempfile::tempdir().unwrap();
    let s = Server::start(ServiceConfig::new(dir.path())).await;
    let c = Client::new();
    let (_, v) = post(&c, s.url("/api/v1/designs"), &json!({"graph": lenet()})).await;
    s.stop().await;
    let id = v["id"].as_str().unwrap();
    fs::write(dir.path().join(id).join("meta.json"), "[]").unwrap();
    let s = Server::start(ServiceConfig::new(dir.path())).await;
    let list: Value = c.get(s.url("/api/v1/designs")).send().await.unwrap().json().await.unwrap();
    assert_eq!(list["designs"], json!([]));
    assert!(dir.path().join("_corrupt").join(id).join("design.json").exists());
    s.stop().await;
}
