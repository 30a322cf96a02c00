//! Live pairwise survey over HTTP. Votes go to an append-only JSONL log in
//! the data directory, which is replayed on start.

pub mod api;
pub mod error;
pub mod store;
pub mod survey;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use pairrank_core::ItemCatalog;

pub use api::{router, AppState};
pub use error::{Result, ServiceError};
pub use store::{LogEntry, SessionEntry, Store};
pub use survey::{Choice, Strategy, Survey, SurveyOptions, Ticket, DEFAULT_IDLE_TIMEOUT};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    /// Catalog manifest. Required on first start; afterwards the copy kept
    /// in the data directory is used when absent.
    pub catalog: Option<PathBuf>,
    /// Root for `/images`; defaults to the catalog's directory.
    pub image_dir: Option<PathBuf>,
    pub listen: SocketAddr,
    pub strategy: Strategy,
    pub options: SurveyOptions,
}

fn ids(catalog: &ItemCatalog) -> Vec<&str> {
    catalog.ids().map(|id| id.as_str()).collect()
}

/// Resolves the catalog against the copy stored in `data_dir`, writing the
/// copy on first use.
pub fn load_catalog(data_dir: &Path, given: Option<&Path>) -> Result<ItemCatalog> {
    std::fs::create_dir_all(data_dir).map_err(|e| ServiceError::io(data_dir, e))?;
    let stored_path = data_dir.join(store::CATALOG_FILE);
    let stored = if stored_path.exists() { Some(ItemCatalog::read_manifest(&stored_path)?) } else { None };
    match (given, stored) {
        (Some(path), stored) => {
            let catalog = ItemCatalog::read_manifest(path)?;
            match stored {
                Some(s) if ids(&s) != ids(&catalog) => Err(ServiceError::Config(format!(
                    "{} lists different items than the catalog this data directory was started with",
                    path.display()
                ))),
                Some(_) => Ok(catalog),
                None => {
                    catalog.write_manifest(&stored_path)?;
                    Ok(catalog)
                }
            }
        }
        (None, Some(stored)) => Ok(stored),
        (None, None) => Err(ServiceError::Config("no catalog given and none stored in the data directory".into())),
    }
}

/// Loads the catalog and log and builds the shared state.
pub fn open_state(config: &ServiceConfig) -> Result<Arc<AppState>> {
    let catalog = load_catalog(&config.data_dir, config.catalog.as_deref())?;
    let (store, entries, sessions) = Store::open(&config.data_dir)?;
    let survey = Survey::open(catalog, store, entries, sessions, config.options.clone())?;
    Ok(AppState::new(survey, config.strategy))
}

/// Runs until interrupted. The bound address is reported on stderr as
/// `listening on ADDR`.
pub async fn serve(config: ServiceConfig) -> Result<()> {
    let state = open_state(&config)?;
    let image_dir = config
        .image_dir
        .clone()
        .or_else(|| config.catalog.as_deref().and_then(Path::parent).map(Path::to_path_buf))
        .unwrap_or_else(|| config.data_dir.clone());
    let app = router(state, Some(image_dir));
    let listener =
        tokio::net::TcpListener::bind(config.listen).await.map_err(|e| ServiceError::Config(format!("{}: {e}", config.listen)))?;
    let addr = listener.local_addr().map_err(|e| ServiceError::Config(e.to_string()))?;
    eprintln!("listening on {addr}");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| ServiceError::Config(e.to_string()))
}
