//! HTTP API over a cellvault store, mounted under `/api/v1`.

mod config;
mod error;
mod extract;
mod routes;

use thiserror::Error;

pub use crate::config::{ConfigError, ServiceConfig, DEFAULT_BODY_LIMIT};
pub use crate::error::ApiError;
pub use crate::routes::router;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Store(#[from] cellvault_core::Error),
    #[error("binding {addr}: {source}")]
    Bind {
        addr: String,
        source: std::io::Error,
    },
    #[error("server: {0}")]
    Io(#[from] std::io::Error),
}

/// Opens (or initialises) the configured store and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), ServeError> {
    let store = cellvault_core::store::Store::init(&config.store)?;
    let app = router(store, config.token, config.body_limit);
    let listener = tokio::net::TcpListener::bind(&config.listen)
        .await
        .map_err(|source| ServeError::Bind {
            addr: config.listen.clone(),
            source,
        })?;
    eprintln!("cellvault listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
