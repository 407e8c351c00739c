//! HTTP front end for the retrieval engine.
//!
//! | Route | Purpose |
//! |---|---|
//! | `GET /health` | liveness and corpus counts |
//! | `POST /images` | insert an image (JSON with base64 bytes, or multipart) |
//! | `GET /images` | paged image metadata (`offset`, `limit`) |
//! | `GET /images/{id}` | one image including its bytes |
//! | `GET /indexes` | indexes with their parameters |
//! | `POST /indexes` | build an index |
//! | `DELETE /indexes/{id}` | drop an index and its histograms |
//! | `POST /query` | multipart query image plus options |
//! | `POST /simulate/single` | precision/recall for one stored query image |
//! | `POST /simulate/multi` | precision/recall over a query set |
//!
//! Failures carry an [`ApiError`] body.

pub mod contract;
pub mod error;
mod routes;

use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::DefaultBodyLimit;
use axum::routing::{delete, get, post};
use axum::Router;
use cbir_core::config::EngineConfig;
use cbir_core::executor::Engine;
use cbir_core::store::Store;
use tokio::net::TcpListener;

pub use crate::error::ApiError;

/// Upload ceiling for image and query bodies.
pub const MAX_BODY_BYTES: usize = 64 * 1024 * 1024;

#[derive(Clone)]
pub struct AppState {
    pub engine: Arc<Engine>,
    pub config: Arc<EngineConfig>,
}

impl AppState {
    pub fn new(engine: Arc<Engine>, config: EngineConfig) -> Self {
        Self {
            engine,
            config: Arc::new(config),
        }
    }

    /// Opens the store at `path` and builds a SURF engine from `config`.
    pub fn open(path: impl Into<PathBuf>, config: EngineConfig) -> cbir_core::error::Result<Self> {
        let store = Arc::new(Store::open(path.into())?);
        let engine = Engine::surf(store, config.extractor)?;
        Ok(Self::new(Arc::new(engine), config))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(routes::health))
        .route("/images", post(routes::upload_image).get(routes::list_images))
        .route("/images/{id}", get(routes::get_image))
        .route("/indexes", post(routes::create_index).get(routes::list_indexes))
        .route("/indexes/{id}", delete(routes::delete_index))
        .route("/query", post(routes::query))
        .route("/simulate/single", post(routes::simulate_single))
        .route("/simulate/multi", post(routes::simulate_multi))
        .fallback(routes::not_found)
        .method_not_allowed_fallback(routes::method_not_allowed)
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(state)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    pub store_path: PathBuf,
    pub config_file: Option<PathBuf>,
}

impl ServiceConfig {
    pub fn engine_config(&self) -> cbir_core::error::Result<EngineConfig> {
        match &self.config_file {
            Some(path) => EngineConfig::load(path),
            None => Ok(EngineConfig::default()),
        }
    }
}

/// Serves until `shutdown` resolves, then lets in-flight requests finish.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Resolves on Ctrl-C or, on Unix, SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}

/// Opens the store, binds, and serves until a shutdown signal arrives.
pub async fn run(config: ServiceConfig) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let engine_config = config.engine_config()?;
    let state = AppState::open(&config.store_path, engine_config)?;
    let listener = TcpListener::bind((config.host.as_str(), config.port))
        .await
        .map_err(|e| format!("cannot bind {}:{}: {e}", config.host, config.port))?;
    let addr: SocketAddr = listener.local_addr()?;
    tracing::info!(%addr, store = %config.store_path.display(), "listening");
    serve(listener, state, shutdown_signal()).await?;
    tracing::info!("shut down");
    Ok(())
}
