//! HTTP API over a loaded bundle. Nothing here reads the key file.

use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::json;
use tower_http::services::ServeDir;

use crate::bundle::{Bundle, BundleCase};
use crate::store::{ScoreLog, ScoreSubmission};
use crate::{Error, Result};

const LABELS: [&str; 4] = ["A", "B", "C", "D"];
const INDEX: &str = include_str!("../static/index.html");

pub struct AppState {
    pub bundle: Bundle,
    pub bundle_dir: PathBuf,
    pub log: ScoreLog,
}

impl AppState {
    pub fn open(bundle_dir: &Path, log_path: &Path) -> Result<Self> {
        Ok(Self { bundle: Bundle::load(bundle_dir)?, bundle_dir: bundle_dir.to_path_buf(), log: ScoreLog::open(log_path)? })
    }

    fn rater_case(&self, rater: &str, case_id: &str) -> std::result::Result<&BundleCase, ApiError> {
        self.check_rater(rater)?;
        self.bundle
            .cases_for(rater)
            .into_iter()
            .find(|c| c.case_id == case_id)
            .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("case `{case_id}` is not in the session of `{rater}`")))
    }

    fn check_rater(&self, rater: &str) -> std::result::Result<(), ApiError> {
        if self.bundle.knows_rater(rater) {
            Ok(())
        } else {
            Err(ApiError(StatusCode::NOT_FOUND, format!("unknown rater `{rater}`")))
        }
    }

    fn progress(&self, rater: &str) -> Progress {
        let scored: BTreeSet<(String, String)> = self.log.scored_by(rater).into_iter().collect();
        let cases = self.bundle.cases_for(rater);
        let done: Vec<String> = cases
            .iter()
            .filter(|c| c.candidates.iter().all(|a| scored.contains(&(c.case_id.clone(), a.clone()))))
            .map(|c| c.case_id.clone())
            .collect();
        let next = cases.iter().find(|c| !done.contains(&c.case_id)).map(|c| c.case_id.clone());
        Progress { rater_id: rater.to_string(), total: cases.len(), completed: done.len(), completed_cases: done, next_case: next }
    }
}

#[derive(Debug)]
pub struct ApiError(pub StatusCode, pub String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Invalid(_) => StatusCode::BAD_REQUEST,
            Error::NotFound(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(code, e.to_string())
    }
}

#[derive(Serialize)]
struct Progress {
    rater_id: String,
    total: usize,
    completed: usize,
    completed_cases: Vec<String>,
    next_case: Option<String>,
}

type Shared = Arc<AppState>;
type ApiResult<T> = std::result::Result<T, ApiError>;

async fn session(State(st): State<Shared>, UrlPath(rater): UrlPath<String>) -> ApiResult<Json<serde_json::Value>> {
    st.check_rater(&rater)?;
    let cases: Vec<_> = st
        .bundle
        .cases_for(&rater)
        .into_iter()
        .map(|c| json!({ "case_id": c.case_id, "candidates": st.bundle.presentation(&rater, c) }))
        .collect();
    let p = st.progress(&rater);
    Ok(Json(json!({
        "rater_id": rater,
        "instructions": st.bundle.instructions,
        "questions": st.bundle.questions,
        "scale": st.bundle.scale,
        "cases": cases,
        "progress": p,
    })))
}

async fn case(State(st): State<Shared>, UrlPath((rater, case_id)): UrlPath<(String, String)>) -> ApiResult<Json<serde_json::Value>> {
    let c = st.rater_case(&rater, &case_id)?;
    let candidates: Vec<_> = st
        .bundle
        .presentation(&rater, c)
        .into_iter()
        .zip(LABELS)
        .map(|(alias, label)| {
            let scores = st.log.latest(&rater, &case_id, &alias).map(|r| json!({ "q1": r.submission.q1, "q2": r.submission.q2, "q3": r.submission.q3 }));
            json!({ "label": label, "alias": alias, "image": format!("/img/{alias}"), "scores": scores })
        })
        .collect();
    Ok(Json(json!({
        "case_id": c.case_id,
        "candidates": candidates,
        "references": {
            "input": format!("/img/{}", c.references.input),
            "hr": format!("/img/{}", c.references.hr),
        },
    })))
}

async fn image(State(st): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let rel = st.bundle.images.get(&id).ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("unknown image `{id}`")))?;
    let path = st.bundle_dir.join(rel);
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, format!("image `{id}` unreadable: {e}")))?;
    let mime = if rel.ends_with(".pgm") { "image/x-portable-graymap" } else { "image/png" };
    Ok(([(header::CONTENT_TYPE, mime), (header::CACHE_CONTROL, "no-store")], bytes).into_response())
}

async fn score(State(st): State<Shared>, Json(s): Json<ScoreSubmission>) -> ApiResult<Json<serde_json::Value>> {
    let c = st.rater_case(&s.rater_id, &s.case_id)?;
    if !c.candidates.contains(&s.alias) {
        return Err(ApiError(StatusCode::NOT_FOUND, format!("`{}` is not a candidate of case `{}`", s.alias, s.case_id)));
    }
    s.check_range()?;
    let st2 = st.clone();
    let ack = tokio::task::spawn_blocking(move || st2.log.submit(s))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(json!({ "ack": ack })))
}

async fn progress(State(st): State<Shared>, UrlPath(rater): UrlPath<String>) -> ApiResult<Json<Progress>> {
    st.check_rater(&rater)?;
    Ok(Json(st.progress(&rater)))
}

async fn index() -> Html<&'static str> {
    Html(INDEX)
}

/// API routes; `/` serves `static_dir` when given, else a minimal built-in page.
pub fn router(state: Arc<AppState>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/session/{rater}", get(session))
        .route("/api/case/{rater}/{case}", get(case))
        .route("/api/progress/{rater}", get(progress))
        .route("/api/score", post(score))
        .route("/img/{id}", get(image))
        .with_state(state);
    match static_dir {
        Some(d) => api.fallback_service(ServeDir::new(d)),
        None => api.route("/", get(index)),
    }
}

pub async fn serve(addr: SocketAddr, state: Arc<AppState>, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("serving {} cases on http://{}", state.bundle.cases.len(), listener.local_addr()?);
    axum::serve(listener, router(state, static_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
