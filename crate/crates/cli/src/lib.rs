//! Slate service (HTTP + WebSocket) and the `poetslate` command line tools.

pub mod commands;
pub mod config;
pub mod live;
pub mod server;
pub mod wire;

use std::sync::Arc;
use std::time::Duration;

use anyhow::{Context, Result};
use poetslate_core::ChainSpecs;

use crate::config::ServiceConfig;
use crate::server::{AppState, Services};

/// Resolves everything a server needs from its config.
pub fn services(config: &ServiceConfig) -> Result<Services> {
    Ok(Services {
        vocabulary: Arc::new(commands::load_vocabulary(config.vocabulary.as_deref())?),
        backend: commands::build_backend(config)?,
        specs: Arc::new(ChainSpecs::standard()),
        session: config.session(),
        tick: Duration::from_millis(config.tick_ms),
        log_path: config.log_path.clone(),
        participant: config.participant.clone(),
    })
}

/// Serves until ctrl-c.
pub async fn serve(config: ServiceConfig) -> Result<()> {
    let services = services(&config)?;
    let listener = tokio::net::TcpListener::bind(config.bind)
        .await
        .with_context(|| format!("binding {}", config.bind))?;
    tracing::info!(addr = %listener.local_addr()?, backend = ?config.backend, "serving");
    let app = server::router(AppState::new(services, config.multi_session));
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
