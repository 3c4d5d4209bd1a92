//! HTTP JSON service that answers next-word and sentence-completion queries
//! from a bundle loaded once at startup.

mod api;
mod state;

pub use api::{
    app, CandidateBody, CompleteRequest, CompleteResponse, ErrorBody, HealthResponse, SuggestRequest,
    SuggestResponse, MAX_COMPLETE_LEN, MAX_K,
};
pub use state::{AppState, Metrics};

use std::io;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;

use nextword_core::predictor::ModelBundle;
use tokio::net::TcpListener;
use tokio::sync::oneshot;

#[derive(Clone, Debug)]
pub struct ServerConfig {
    pub host: IpAddr,
    pub port: u16,
    /// Allowed browser origin; `None` allows any.
    pub cors_origin: Option<String>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            host: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: 8080,
            cors_origin: None,
        }
    }
}

/// Binds, starts loading `bundle_dir` in the background and serves until
/// ctrl-c. Requests arriving before the load finishes get 503.
pub async fn serve(config: ServerConfig, bundle_dir: PathBuf) -> io::Result<()> {
    let listener = TcpListener::bind(SocketAddr::new(config.host, config.port)).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    serve_on(listener, config, bundle_dir).await
}

pub async fn serve_on(listener: TcpListener, config: ServerConfig, bundle_dir: PathBuf) -> io::Result<()> {
    let state = AppState::new();
    let router = app(state.clone(), &config)?;

    let (failed_tx, failed_rx) = oneshot::channel();
    let loader = state.clone();
    let dir = bundle_dir.clone();
    tokio::task::spawn_blocking(move || match ModelBundle::load_dir(&dir) {
        Ok(bundle) => {
            log::info!(
                "bundle {} loaded: orders {:?}, {} tokens",
                dir.display(),
                bundle.neural_orders(),
                bundle.vocabulary().size()
            );
            loader.install(bundle);
        }
        Err(e) => {
            let _ = failed_tx.send(e);
        }
    });

    let (stop_tx, stop_rx) = oneshot::channel::<()>();
    let load_error = tokio::spawn(async move {
        let err = failed_rx.await.ok();
        let _ = stop_tx.send(());
        err
    });
    let shutdown = async move {
        tokio::select! {
            _ = tokio::signal::ctrl_c() => {}
            _ = stop_rx => {}
        }
    };
    axum::serve(listener, router).with_graceful_shutdown(shutdown).await?;

    if load_error.is_finished() {
        if let Ok(Some(e)) = load_error.await {
            return Err(io::Error::other(format!("loading {}: {e}", bundle_dir.display())));
        }
    }
    Ok(())
}
