#![allow(dead_code)]

use std::path::Path;

use cbir_core::config::EngineConfig;
use cbir_service::AppState;
use reqwest::multipart::{Form, Part};
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

pub struct Server {
    pub base: String,
    pub state: AppState,
    pub client: reqwest::Client,
    stop: Option<oneshot::Sender<()>>,
    handle: Option<JoinHandle<std::io::Result<()>>>,
}

impl Server {
    pub async fn start(store: &Path) -> Server {
        let state = AppState::open(store, EngineConfig::default()).unwrap();
        let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let (tx, rx) = oneshot::channel();
        let handle = tokio::spawn(cbir_service::serve(listener, state.clone(), async {
            let _ = rx.await;
        }));
        Server {
            base,
            state,
            client: reqwest::Client::new(),
            stop: Some(tx),
            handle: Some(handle),
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    /// Stops the server and releases the store.
    pub async fn stop(mut self) {
        let _ = self.stop.take().unwrap().send(());
        self.handle.take().unwrap().await.unwrap().unwrap();
    }

    pub async fn upload(&self, name: &str, label: Option<&str>, bytes: Vec<u8>) -> reqwest::Response {
        let mut form = Form::new().part("image", Part::bytes(bytes).file_name(name.to_string()));
        form = form.text("name", name.to_string());
        if let Some(label) = label {
            form = form.text("classLabel", label.to_string());
        }
        self.client.post(self.url("/images")).multipart(form).send().await.unwrap()
    }

    pub async fn query(&self, bytes: Vec<u8>, options: serde_json::Value) -> reqwest::Response {
        let form = Form::new()
            .part("image", Part::bytes(bytes).file_name("query.png"))
            .text("options", options.to_string());
        self.client.post(self.url("/query")).multipart(form).send().await.unwrap()
    }

    pub async fn post_json(&self, path: &str, body: serde_json::Value) -> reqwest::Response {
        self.client.post(self.url(path)).json(&body).send().await.unwrap()
    }

    pub async fn get(&self, path: &str) -> reqwest::Response {
        self.client.get(self.url(path)).send().await.unwrap()
    }
}

pub async fn json(resp: reqwest::Response) -> (u16, serde_json::Value) {
    let status = resp.status().as_u16();
    let text = resp.text().await.unwrap();
    let value = if text.is_empty() {
        serde_json::Value::Null
    } else {
        serde_json::from_str(&text).unwrap_or_else(|e| panic!("not JSON ({e}): {text}"))
    };
    (status, value)
}
