mod common;

use std::collections::BTreeSet;

use cbir_core::synthetic;
use common::{json, Server};
use serde_json::json;

async fn populated(per_class: usize) -> (tempfile::TempDir, Server, Vec<u64>) {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(dir.path()).await;
    let mut ids = Vec::new();
    for img in synthetic::corpus(per_class, 6) {
        let (status, body) = json(server.upload(&img.name, Some(&img.class_label), img.bytes).await).await;
        assert_eq!(status, 201, "{body}");
        ids.push(body["imageId"].as_u64().unwrap());
    }
    (dir, server, ids)
}

#[tokio::test(flavor = "multi_thread")]
async fn health_and_unknown_routes() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(dir.path()).await;
    let (status, body) = json(server.get("/health").await).await;
    assert_eq!(status, 200);
    assert_eq!(body, json!({"status": "ok", "images": 0, "indexes": 0}));
    let (status, body) = json(server.get("/nope").await).await;
    assert_eq!(status, 404);
    assert_eq!(body["code"], "NOT_FOUND");
    let (status, body) = json(server.client.put(server.url("/health")).send().await.unwrap()).await;
    assert_eq!(status, 405);
    assert_eq!(body["code"], "VALIDATION");
    server.stop().await;
}

#[tokio::test(flavor = "multi_thread")]
async fn uploads_validate_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(dir.path()).await;
    let img = synthetic::corpus(1, 0).remove(0);

    let (s1, b1) = json(server.upload("dots (1).png", None, img.bytes.clone()).await).await;
    let (s2, b2) = json(server.upload("dots (2).png", None, img.bytes.clone()).await).await;
    assert_eq!((s1, s2), (201, 201));
    assert!(b2["imageId"].as_u64() > b1["imageId"].as_u64());

    let (status, body) = json(server.upload("empty.png", None, Vec::new()).await).await;
    assert_eq!((status, body["code"].as_str()), (400, Some("VALIDATION")));
    let (status, body) = json(server.upload("junk.png", None, b"not an image".to_vec()).await).await;
    assert_eq!((status, body["code"].as_str()), (400, Some("DECODE")));
    let (status, body) = json(server.post_json("/images", json!({"name": "x.png"})).await).await;
    assert_eq!((status, body["code"].as_str()), (400, Some("VALIDATION")));

    let id = b1["imageId"].as_u64().unwrap();
    let (status, body) = json(server.get(&format!("/images/{id}")).await).await;
    assert_eq!(status, 200);
    assert_eq!(body["name"], "dots (1).png");
    assert_eq!(body["classLabel"], "dots");
    use base64::Engine;
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(body["imageBytes"].as_str().unwrap())
        .unwrap();
    assert_eq!(bytes, img.bytes);

    let (status, body) = json(server.get("/images/999").await).await;
    assert_eq!((status, body["code"].as_str()), (404, Some("NOT_FOUND")));
    let (status, _) = json(server.get("/images/abc").await).await;
    assert_eq!(status, 400);
    server.stop().await;
}

#[tokio::test(flavor = "multi_thread")]
async fn json_upload_and_paging() {
    use base64::Engine;
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(dir.path()).await;
    for img in synthetic::corpus(2, 1).into_iter().take(5) {
        let body = json!({
            "name": img.name,
            "classLabel": img.class_label,
            "imageBytes": base64::engine::general_purpose::STANDARD.encode(&img.bytes),
        });
        assert_eq!(server.post_json("/images", body).await.status().as_u16(), 201);
    }
    let (status, page) = json(server.get("/images?limit=2").await).await;
    assert_eq!(status, 200);
    assert_eq!(page["total"], 5);
    assert_eq!(page["items"].as_array().unwrap().len(), 2);
    assert!(page["items"][0].get("imageBytes").is_none());
    let (_, tail) = json(server.get("/images?offset=4&limit=10").await).await;
    assert_eq!(tail["items"].as_array().unwrap().len(), 1);
    let (status, _) = json(server.get("/images?limit=-1").await).await;
    assert_eq!(status, 400);
    server.stop().await;
}

#[tokio::test(flavor = "multi_thread")]
async fn concurrent_uploads_get_distinct_ids() {
    let dir = tempfile::tempdir().unwrap();
    let server = std::sync::Arc::new(Server::start(dir.path()).await);
    let images = synthetic::corpus(4, 2);
    let mut tasks = Vec::new();
    for img in images.into_iter().take(10) {
        let server = server.clone();
        tasks.push(tokio::spawn(async move {
            let (status, body) = json(server.upload(&img.name, None, img.bytes).await).await;
            assert_eq!(status, 201);
            body["imageId"].as_u64().unwrap()
        }));
    }
    let mut ids = BTreeSet::new();
    for t in tasks {
        ids.insert(t.await.unwrap());
    }
    assert_eq!(ids.len(), 10);
    let (_, health) = json(server.get("/health").await).await;
    assert_eq!(health["images"], 10);
}

#[tokio::test(flavor = "multi_thread")]
async fn index_lifecycle() {
    let (_dir, server, _) = populated(3).await;
    let (status, body) = json(server.post_json("/indexes", json!({"k": 100000})).await).await;
    assert_eq!((status, body["code"].as_str()), (409, Some("INSUFFICIENT_DATA")));
    let (status, body) = json(server.post_json("/indexes", json!({"k": 1})).await).await;
    assert_eq!((status, body["code"].as_str()), (400, Some("VALIDATION")));
    let (status, body) = json(server.post_json("/indexes", json!({"kk": 3})).await).await;
    assert_eq!((status, body["code"].as_str()), (400, Some("VALIDATION")));

    let (status, body) = json(server.post_json("/indexes", json!({"k": 8, "seed": 1})).await).await;
    assert_eq!(status, 201);
    let id = body["indexId"].as_u64().unwrap();
    let (_, list) = json(server.get("/indexes").await).await;
    assert_eq!(list["items"][0]["imageCount"], 9);
    assert_eq!(list["items"][0]["params"]["seed"], 1);

    let del = |id: u64| server.client.delete(server.url(&format!("/indexes/{id}"))).send();
    assert_eq!(del(id).await.unwrap().status().as_u16(), 204);
    let (status, body) = json(del(id).await.unwrap()).await;
    assert_eq!((status, body["code"].as_str()), (404, Some("NOT_FOUND")));
    server.stop().await;
}

#[tokio::test(flavor = "multi_thread")]
async fn queries_and_simulations() {
    let (_dir, server, ids) = populated(6).await;
    let (_, body) = json(server.post_json("/indexes", json!({"k": 16})).await).await;
    let index = body["indexId"].as_u64().unwrap();
    let probe = synthetic::corpus(6, 6).remove(0).bytes;

    let (status, body) = json(server.query(probe.clone(), json!({"indexId": index, "mode": "topK", "topK": 0})).await).await;
    assert_eq!((status, body["code"].as_str()), (400, Some("VALIDATION")));
    let (status, body) = json(server.query(probe.clone(), json!({"indexId": 77, "mode": "topK"})).await).await;
    assert_eq!((status, body["code"].as_str()), (404, Some("NOT_FOUND")));
    let (status, _) = json(server.query(b"junk".to_vec(), json!({"indexId": index})).await).await;
    assert_eq!(status, 400);

    let (status, body) = json(server.query(probe, json!({"indexId": index, "mode": "topK", "topK": 5})).await).await;
    assert_eq!(status, 200, "{body}");
    let entries = body["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 5);
    assert_eq!(entries[0]["imageId"].as_u64(), Some(ids[0]));
    assert_eq!(entries[0]["name"], "dots (1).png");
    let sims: Vec<f64> = entries.iter().map(|e| e["similarity"].as_f64().unwrap()).collect();
    assert!(sims.windows(2).all(|w| w[0] >= w[1]));

    let (status, row) = json(
        server
            .post_json(
                "/simulate/single",
                json!({"queryImageId": ids[0], "indexId": index, "options": {"mode": "topK", "topK": 5}}),
            )
            .await,
    )
    .await;
    assert_eq!(status, 200);
    let n = |k: &str| row[k].as_u64().unwrap();
    assert_eq!(n("RI"), n("rai") + n("iri"));
    assert_eq!(n("AI"), n("rai") + n("anr"));
    assert_eq!(n("rai") + n("iri") + n("anr") + n("inr"), 17);
    assert_eq!(row["name"], "dots (1).png");

    let (status, report) = json(
        server
            .post_json("/simulate/multi", json!({"indexId": index, "querySet": []}))
            .await,
    )
    .await;
    assert_eq!(status, 200);
    assert_eq!(report, json!({"rows": [], "aggregate": {"meanPrecision": null, "meanRecall": null}}));

    let (_, report) = json(
        server
            .post_json(
                "/simulate/multi",
                json!({"indexId": index, "querySet": &ids[..4], "options": {"mode": "topK", "topK": 5}}),
            )
            .await,
    )
    .await;
    assert_eq!(report["rows"].as_array().unwrap().len(), 4);
    let (_, report) = json(
        server
            .post_json("/simulate/multi", json!({"indexId": index, "split": {"ratio": 0.5, "seed": 3}}))
            .await,
    )
    .await;
    assert_eq!(report["rows"].as_array().unwrap().len(), 9);
    let (status, body) = json(server.post_json("/simulate/multi", json!({"indexId": 42})).await).await;
    assert_eq!((status, body["code"].as_str()), (404, Some("NOT_FOUND")));
    server.stop().await;
}

#[tokio::test(flavor = "multi_thread")]
async fn restart_keeps_inserted_images() {
    let dir = tempfile::tempdir().unwrap();
    let images = synthetic::corpus(3, 4);
    let server = Server::start(dir.path()).await;
    for img in &images {
        server.upload(&img.name, None, img.bytes.clone()).await;
    }
    let (status, _) = json(server.post_json("/indexes", json!({"k": 8})).await).await;
    assert_eq!(status, 201);
    server.stop().await;

    let server = Server::start(dir.path()).await;
    let (_, health) = json(server.get("/health").await).await;
    assert_eq!(health, json!({"status": "ok", "images": 9, "indexes": 1}));
    let (status, body) = json(
        server
            .query(images[4].bytes.clone(), json!({"indexId": 1, "mode": "topK", "topK": 1}))
            .await,
    )
    .await;
    assert_eq!(status, 200);
    assert_eq!(body["entries"][0]["name"], images[4].name);
    server.stop().await;
}
