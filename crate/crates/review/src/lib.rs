//! Local HTTP service for the cluster review step.

pub mod session;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Body;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use canopy_core::geometry::{Box3, Frame};
use canopy_core::io::write_ply;
use canopy_core::synth::voxel_downsample;
use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

pub use session::{replay, ClusterInfo, ClusterSet, Edit, ReviewError, ReviewSession};

#[derive(Clone)]
pub struct AppState {
    session: Arc<Mutex<ReviewSession>>,
    /// Ground-removed map; fixed for the session, so read without the lock.
    above_ground: Arc<Vec<Point3<f64>>>,
    /// Preview voxel edge when a request does not give one (m).
    default_voxel: f64,
}

impl AppState {
    pub fn new(session: ReviewSession, default_voxel: f64) -> Self {
        let above_ground = Arc::new(session.above_ground());
        Self { session: Arc::new(Mutex::new(session)), above_ground, default_voxel }
    }

    pub fn session(&self) -> std::sync::MutexGuard<'_, ReviewSession> {
        self.session.lock().unwrap_or_else(|e| e.into_inner())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxJson {
    pub center: [f64; 3],
    pub extents: [f64; 3],
}

impl From<&Box3> for BoxJson {
    fn from(b: &Box3) -> Self {
        Self { center: [b.center.x, b.center.y, b.center.z], extents: [b.extents.x, b.extents.y, b.extents.z] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterJson {
    pub id: u32,
    pub point_count: usize,
    pub bbox: BoxJson,
    pub source: String,
}

impl From<&ClusterInfo> for ClusterJson {
    fn from(c: &ClusterInfo) -> Self {
        Self { id: c.id, point_count: c.point_count, bbox: BoxJson::from(&c.bbox), source: c.source.as_str().to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AddClusterRequest {
    pub bbox: BoxJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitResponse {
    pub clusters: usize,
    pub edits: usize,
}

#[derive(Debug, Deserialize)]
pub struct CloudQuery {
    pub voxel: Option<f64>,
}

#[derive(Serialize)]
struct ErrorJson {
    error: String,
}

impl IntoResponse for ReviewError {
    fn into_response(self) -> Response {
        let status = match &self {
            ReviewError::UnknownCluster(_) => StatusCode::NOT_FOUND,
            ReviewError::EmptyBox => StatusCode::UNPROCESSABLE_ENTITY,
            ReviewError::InvalidBox(_) => StatusCode::BAD_REQUEST,
            ReviewError::NothingToUndo => StatusCode::CONFLICT,
            ReviewError::Dataset(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        error_response(status, self.to_string())
    }
}

fn error_response(status: StatusCode, msg: String) -> Response {
    (status, Json(ErrorJson { error: msg })).into_response()
}

fn cluster_list(s: &ReviewSession) -> Vec<ClusterJson> {
    s.clusters().iter().map(ClusterJson::from).collect()
}

async fn get_cloud(State(st): State<AppState>, Query(q): Query<CloudQuery>) -> Response {
    let voxel = q.voxel.unwrap_or(st.default_voxel);
    if !(voxel.is_finite() && voxel > 0.0) {
        return error_response(StatusCode::BAD_REQUEST, "voxel must be a positive number".into());
    }
    let points = st.above_ground.clone();
    let body = tokio::task::spawn_blocking(move || {
        let decimated = voxel_downsample(points.iter().copied(), voxel);
        let mut buf = Vec::with_capacity(128 + decimated.len() * 12);
        write_ply(&mut buf, &decimated).expect("writing to memory");
        buf
    })
    .await;
    match body {
        Ok(buf) => ([(header::CONTENT_TYPE, "application/octet-stream")], Body::from(buf)).into_response(),
        Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn list_clusters(State(st): State<AppState>) -> Json<Vec<ClusterJson>> {
    Json(cluster_list(&st.session()))
}

async fn delete_cluster(State(st): State<AppState>, Path(id): Path<u32>) -> Result<StatusCode, ReviewError> {
    st.session().delete(id)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn add_cluster(
    State(st): State<AppState>,
    Json(req): Json<AddClusterRequest>,
) -> Result<(StatusCode, Json<ClusterJson>), ReviewError> {
    let bbox = Box3 { center: Point3::from(req.bbox.center), extents: Vector3::from(req.bbox.extents), frame: Frame::World };
    let mut s = st.session();
    let id = s.add_box(bbox)?;
    let info = s.cluster(id).expect("new cluster exists");
    Ok((StatusCode::CREATED, Json(ClusterJson::from(&info))))
}

async fn undo(State(st): State<AppState>) -> Result<Json<Vec<ClusterJson>>, ReviewError> {
    let mut s = st.session();
    s.undo()?;
    Ok(Json(cluster_list(&s)))
}

async fn commit(State(st): State<AppState>) -> Result<Json<CommitResponse>, ReviewError> {
    let s = st.session();
    s.commit()?;
    Ok(Json(CommitResponse { clusters: s.current().clusters.len(), edits: s.log().len() }))
}

/// API routes, plus static UI assets from `ui_dir` when given.
pub fn router(state: AppState, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/cloud", get(get_cloud))
        .route("/api/clusters", get(list_clusters).post(add_cluster))
        .route("/api/clusters/{id}", delete(delete_cluster))
        .route("/api/undo", post(undo))
        .route("/api/commit", post(commit))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

/// Serves the review API on `addr` until Ctrl-C.
pub async fn serve(state: AppState, addr: SocketAddr, ui_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("review service listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state, ui_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
