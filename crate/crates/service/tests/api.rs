use std::path::Path;
use std::sync::Arc;

use reqwest::StatusCode;
use serde_json::{json, Value};
use tokio::sync::oneshot;
use tokio::task::JoinHandle;
use tssort::{Algorithm, ComparisonOutcome, EngineParams, SortSession};
use tssort_service::{serve, SessionStore};

struct Server {
    base: String,
    stop: oneshot::Sender<()>,
    task: JoinHandle<std::io::Result<()>>,
}

impl Server {
    async fn start(dir: &Path) -> Server {
        let store = Arc::new(SessionStore::open(dir).unwrap());
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let (stop, rx) = oneshot::channel();
        let task = tokio::spawn(serve(listener, store, async {
            rx.await.ok();
        }));
        Server { base, stop, task }
    }

    async fn stop(self) {
        self.stop.send(()).unwrap();
        self.task.await.unwrap().unwrap();
    }
}

async fn get(client: &reqwest::Client, url: String) -> (StatusCode, Value) {
    let resp = client.get(url).send().await.unwrap();
    (resp.status(), resp.json().await.unwrap())
}

async fn post(client: &reqwest::Client, url: String, body: Value) -> (StatusCode, Value) {
    let resp = client.post(url).json(&body).send().await.unwrap();
    (resp.status(), resp.json().await.unwrap())
}

async fn create(client: &reqwest::Client, base: &str, body: Value) -> String {
    let (status, v) = post(client, format!("{base}/sessions"), body).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["session_id"].as_str().unwrap().to_string()
}

/// Answers the pending pair: the item with greater strength wins.
async fn answer(
    client: &reqwest::Client,
    base: &str,
    id: &str,
    strength: &[usize],
) -> (StatusCode, Value) {
    let (status, pair) = get(client, format!("{base}/sessions/{id}/next-pair")).await;
    if status != StatusCode::OK {
        return (status, pair);
    }
    let first = pair["first"]["index"].as_u64().unwrap() as usize;
    let second = pair["second"]["index"].as_u64().unwrap() as usize;
    let winner = if strength[first] > strength[second] {
        "first"
    } else {
        "second"
    };
    post(
        client,
        format!("{base}/sessions/{id}/outcome"),
        json!({ "pair_token": pair["pair_token"], "winner": winner }),
    )
    .await
}

fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("item-{i}")).collect()
}

#[tokio::test]
async fn create_validation_and_budget() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(dir.path()).await;
    let client = reqwest::Client::new();
    let base = &server.base;

    let (status, v) = get(&client, format!("{base}/healthz")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["schema_version"], 1);

    let (status, v) = post(
        &client,
        format!("{base}/sessions"),
        json!({ "items": labels(8) }),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(v["budget"], 24);
    assert_eq!(v["algorithm"], "tssort_partner_wover");
    assert_eq!(v["schema_version"], 1);

    for bad in [
        json!({ "items": ["only"] }),
        json!({ "items": ["a", "a"] }),
        json!({ "items": ["a", ""] }),
        json!({ "items": ["a", "b"], "algorithm": "heap" }),
        json!({ "nope": 1 }),
    ] {
        let (status, v) = post(&client, format!("{base}/sessions"), bad.clone()).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{bad}");
        assert_eq!(v["schema_version"], 1);
    }
    let (_, v) = post(
        &client,
        format!("{base}/sessions"),
        json!({ "items": ["only"] }),
    )
    .await;
    assert!(v["message"].as_str().unwrap().contains("at least 2"));

    let (status, v) = get(&client, format!("{base}/sessions/missing/ranking")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["error"], "not_found");
    server.stop().await;
}

#[tokio::test]
async fn pair_issue_is_idempotent_and_tokens_guard_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(dir.path()).await;
    let client = reqwest::Client::new();
    let base = &server.base;
    let id = create(&client, base, json!({ "items": ["a", "b", "c"] })).await;

    let (_, ranking) = get(&client, format!("{base}/sessions/{id}/ranking")).await;
    let order: Vec<&str> = ranking["ranking"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["label"].as_str().unwrap())
        .collect();
    assert_eq!(order, ["a", "b", "c"]);

    let (s1, p1) = get(&client, format!("{base}/sessions/{id}/next-pair")).await;
    let (_, p2) = get(&client, format!("{base}/sessions/{id}/next-pair")).await;
    assert_eq!(s1, StatusCode::OK);
    assert_eq!(p1, p2);
    assert_eq!(p1["first"]["label"], "a");
    assert_eq!(p1["second"]["label"], "b");
    assert_eq!(p1["pair_token"], "0.0.1");

    let outcome = |winner: &str| json!({ "pair_token": p1["pair_token"], "winner": winner });
    let (status, _) = post(
        &client,
        format!("{base}/sessions/{id}/outcome"),
        outcome("left"),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, v) = post(
        &client,
        format!("{base}/sessions/{id}/outcome"),
        outcome("second"),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["comparisons_done"], 1);

    let (_, before) = get(&client, format!("{base}/sessions/{id}")).await;
    let (status, v) = post(
        &client,
        format!("{base}/sessions/{id}/outcome"),
        outcome("second"),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["error"], "stale_pair_token");
    let (_, after) = get(&client, format!("{base}/sessions/{id}")).await;
    assert_eq!(before, after);

    let (_, ranking) = get(&client, format!("{base}/sessions/{id}/ranking")).await;
    let rows = ranking["ranking"].as_array().unwrap();
    let pos = |label: &str| rows.iter().position(|r| r["label"] == label).unwrap();
    assert!(pos("b") < pos("a"));
    server.stop().await;
}

#[tokio::test]
async fn draw_on_fresh_pair_is_symmetric() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(dir.path()).await;
    let client = reqwest::Client::new();
    let base = &server.base;
    let id = create(&client, base, json!({ "items": ["a", "b"] })).await;
    let (_, pair) = get(&client, format!("{base}/sessions/{id}/next-pair")).await;
    let (status, _) = post(
        &client,
        format!("{base}/sessions/{id}/outcome"),
        json!({ "pair_token": pair["pair_token"], "winner": "draw" }),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let (_, ranking) = get(&client, format!("{base}/sessions/{id}/ranking")).await;
    let prior = EngineParams::default().trueskill;
    for row in ranking["ranking"].as_array().unwrap() {
        assert_eq!(row["mu"].as_f64().unwrap(), prior.mu0);
        assert!(row["sigma"].as_f64().unwrap() < prior.sigma0);
    }
    server.stop().await;
}

#[tokio::test]
async fn consistent_transcript_yields_true_order_and_finishes() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(dir.path()).await;
    let client = reqwest::Client::new();
    let base = &server.base;
    let strength = [3, 7, 0, 5, 1, 6, 2, 4];
    let id = create(&client, base, json!({ "items": labels(8) })).await;

    let mut oracle =
        SortSession::new(8, Algorithm::TsSortPartnerWover, EngineParams::default()).unwrap();
    for _ in 0..24 {
        let (status, v) = answer(&client, base, &id, &strength).await;
        assert_eq!(status, StatusCode::OK, "{v}");
        let pair = oracle.next_pair().unwrap();
        let outcome = if strength[pair.first] > strength[pair.second] {
            ComparisonOutcome::FirstWins
        } else {
            ComparisonOutcome::SecondWins
        };
        oracle.apply_outcome(pair, outcome).unwrap();
    }

    let (status, v) = get(&client, format!("{base}/sessions/{id}/next-pair")).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["done"], true);
    assert_eq!(v["ranking"], format!("/sessions/{id}/ranking"));
    let (status, _) = post(
        &client,
        format!("{base}/sessions/{id}/outcome"),
        json!({ "pair_token": "24.0.1", "winner": "first" }),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (_, ranking) = get(&client, format!("{base}/sessions/{id}/ranking")).await;
    assert_eq!(ranking["done"], true);
    let served: Vec<usize> = ranking["ranking"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["index"].as_u64().unwrap() as usize)
        .collect();
    let mut truth: Vec<usize> = (0..8).collect();
    truth.sort_by_key(|&i| std::cmp::Reverse(strength[i]));
    assert_eq!(served, truth);
    assert_eq!(served, oracle.current_order());

    let (_, state) = get(&client, format!("{base}/sessions/{id}")).await;
    assert_eq!(state["state_digest"], oracle.state_digest());
    server.stop().await;
}

#[tokio::test]
async fn restart_restores_identical_state() {
    let dir = tempfile::tempdir().unwrap();
    let client = reqwest::Client::new();
    let strength = [2, 0, 4, 1, 3];

    let server = Server::start(dir.path()).await;
    let id = create(
        &client,
        &server.base,
        json!({ "items": labels(5), "algorithm": "tssort_wover" }),
    )
    .await;
    for _ in 0..4 {
        answer(&client, &server.base, &id, &strength).await;
    }
    let (_, state) = get(&client, format!("{}/sessions/{id}", server.base)).await;
    let (_, pair) = get(&client, format!("{}/sessions/{id}/next-pair", server.base)).await;
    let (_, ranking) = get(&client, format!("{}/sessions/{id}/ranking", server.base)).await;
    server.stop().await;

    let server = Server::start(dir.path()).await;
    assert_eq!(
        get(&client, format!("{}/sessions/{id}", server.base))
            .await
            .1,
        state
    );
    assert_eq!(
        get(&client, format!("{}/sessions/{id}/next-pair", server.base))
            .await
            .1,
        pair
    );
    assert_eq!(
        get(&client, format!("{}/sessions/{id}/ranking", server.base))
            .await
            .1,
        ranking
    );
    let (status, v) = answer(&client, &server.base, &id, &strength).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["comparisons_done"], 5);
    server.stop().await;
}

#[tokio::test]
async fn racing_outcomes_apply_once() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(dir.path()).await;
    let client = reqwest::Client::new();
    let base = server.base.clone();
    let id = create(&client, &base, json!({ "items": labels(6) })).await;
    let (_, pair) = get(&client, format!("{base}/sessions/{id}/next-pair")).await;
    let body = json!({ "pair_token": pair["pair_token"], "winner": "first" });
    let sends = (0..8).map(|_| {
        let client = client.clone();
        let url = format!("{base}/sessions/{id}/outcome");
        let body = body.clone();
        tokio::spawn(async move { client.post(url).json(&body).send().await.unwrap().status() })
    });
    let mut statuses = Vec::new();
    for s in sends {
        statuses.push(s.await.unwrap());
    }
    assert_eq!(statuses.iter().filter(|&&s| s == StatusCode::OK).count(), 1);
    assert_eq!(
        statuses
            .iter()
            .filter(|&&s| s == StatusCode::CONFLICT)
            .count(),
        7
    );
    let (_, state) = get(&client, format!("{base}/sessions/{id}")).await;
    assert_eq!(state["comparisons_done"], 1);
    server.stop().await;
}
