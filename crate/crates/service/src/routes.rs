use std::collections::BTreeMap;

use axum::extract::rejection::{PathRejection, QueryRejection};
use axum::extract::{FromRequest, Multipart, Path, Query, Request, State};
use axum::http::header::CONTENT_TYPE;
use axum::http::StatusCode;
use axum::Json;
use cbir_core::error::ErrorCode;
use cbir_core::executor::{Executor, NewImage};
use cbir_core::model::{ImageRecord, Vocabulary};
use cbir_core::simulation::{self, SimulationReport};

use crate::contract::*;
use crate::error::ApiError;
use crate::AppState;

type ApiResult<T> = Result<T, ApiError>;

/// Runs engine work on the blocking pool.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| {
        ApiError::new(ErrorCode::Internal, "request worker failed").with_detail(e.to_string())
    })?
}

fn id_from(path: Result<Path<u64>, PathRejection>) -> ApiResult<u64> {
    path.map(|Path(id)| id)
        .map_err(|e| ApiError::validation("invalid path parameter").with_detail(e.body_text()))
}

pub async fn health(State(app): State<AppState>) -> Json<Health> {
    let (images, indexes) = app
        .engine
        .store()
        .read(|v| (v.count::<ImageRecord>(), v.count::<Vocabulary>()));
    Json(Health {
        status: "ok".into(),
        images,
        indexes,
    })
}

pub async fn not_found() -> ApiError {
    ApiError::new(ErrorCode::NotFound, "no such route")
}

pub async fn method_not_allowed() -> (StatusCode, Json<ApiError>) {
    (
        StatusCode::METHOD_NOT_ALLOWED,
        Json(ApiError::validation("method not allowed on this route")),
    )
}

fn is_multipart(req: &Request) -> bool {
    req.headers()
        .get(CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"))
}

async fn multipart(req: Request, app: &AppState) -> ApiResult<Multipart> {
    Multipart::from_request(req, app)
        .await
        .map_err(|e| ApiError::validation("invalid multipart body").with_detail(e.body_text()))
}

async fn text_field(field: axum::extract::multipart::Field<'_>) -> ApiResult<String> {
    let name = field.name().unwrap_or_default().to_string();
    field
        .text()
        .await
        .map_err(|e| ApiError::validation(format!("field {name:?} is not valid text")).with_detail(e.body_text()))
}

/// Multipart upload: an `image` file part plus optional `name` and
/// `classLabel` text parts. The name defaults to the part's file name.
async fn read_upload(mut form: Multipart) -> ApiResult<NewImage> {
    let mut bytes = None;
    let mut file_name = None;
    let mut name = None;
    let mut class_label = None;
    while let Some(field) = form.next_field().await? {
        match field.name() {
            Some("image") => {
                file_name = field.file_name().map(str::to_string);
                bytes = Some(field.bytes().await?.to_vec());
            }
            Some("name") => name = Some(text_field(field).await?),
            Some("classLabel") => class_label = Some(text_field(field).await?),
            other => {
                return Err(ApiError::validation(format!(
                    "unexpected multipart field {:?}",
                    other.unwrap_or_default()
                )))
            }
        }
    }
    let bytes = bytes.ok_or_else(|| ApiError::validation("missing multipart field \"image\""))?;
    let name = name.or(file_name).unwrap_or_default();
    Ok(NewImage {
        name,
        class_label,
        bytes,
    })
}

pub async fn upload_image(State(app): State<AppState>, req: Request) -> ApiResult<(StatusCode, Json<CreatedImage>)> {
    let image = if is_multipart(&req) {
        read_upload(multipart(req, &app).await?).await?
    } else {
        let Json(contract) = Json::<ImageContract>::from_request(req, &app).await?;
        NewImage {
            name: contract.name,
            class_label: contract.class_label,
            bytes: contract.image_bytes,
        }
    };
    let image_id = blocking(move || Ok(app.engine.insert_image(image)?)).await?;
    Ok((StatusCode::CREATED, Json(CreatedImage { image_id })))
}

pub async fn get_image(
    State(app): State<AppState>,
    id: Result<Path<u64>, PathRejection>,
) -> ApiResult<Json<ImageContract>> {
    let id = id_from(id)?;
    let img = app.engine.store().read(|v| v.get::<ImageRecord>(id).cloned())?;
    Ok(Json(img.into()))
}

pub async fn list_images(
    State(app): State<AppState>,
    page: Result<Query<PageParams>, QueryRejection>,
) -> ApiResult<Json<ImagePage>> {
    let Query(page) =
        page.map_err(|e| ApiError::validation("invalid paging parameters").with_detail(e.body_text()))?;
    if page.limit > MAX_PAGE {
        return Err(ApiError::validation(format!("limit must not exceed {MAX_PAGE}")));
    }
    let (total, items) = app.engine.store().read(|v| {
        let items = v
            .iter::<ImageRecord>()
            .skip(page.offset)
            .take(page.limit)
            .map(ImageSummary::from)
            .collect();
        (v.count::<ImageRecord>(), items)
    });
    Ok(Json(ImagePage {
        total,
        offset: page.offset,
        limit: page.limit,
        items,
    }))
}

pub async fn list_indexes(State(app): State<AppState>) -> Json<IndexList> {
    let items = app.engine.store().read(|v| {
        v.iter::<Vocabulary>()
            .map(|voc| IndexSummary {
                id: voc.id,
                k: voc.k,
                created_at: voc.created_at,
                params: voc.params,
                image_count: v.histograms_for_index(voc.id).count(),
            })
            .collect()
    });
    Json(IndexList { items })
}

pub async fn create_index(
    State(app): State<AppState>,
    body: Result<Json<IndexRequest>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<(StatusCode, Json<CreatedIndex>)> {
    let Json(request) = body?;
    let params = request.resolve(&app.config.indexer);
    let index_id = blocking(move || Ok(app.engine.create_index(&params)?)).await?;
    Ok((StatusCode::CREATED, Json(CreatedIndex { index_id })))
}

pub async fn delete_index(State(app): State<AppState>, id: Result<Path<u64>, PathRejection>) -> ApiResult<StatusCode> {
    let id = id_from(id)?;
    blocking(move || Ok(app.engine.delete_index(id)?)).await?;
    Ok(StatusCode::NO_CONTENT)
}

/// Multipart query: an `image` file part and an `options` part holding the
/// query options as JSON (`indexId` required).
pub async fn query(State(app): State<AppState>, req: Request) -> ApiResult<Json<QueryResponse>> {
    if !is_multipart(&req) {
        return Err(ApiError::validation("query expects a multipart/form-data body"));
    }
    let mut form = multipart(req, &app).await?;
    let mut bytes = None;
    let mut options = None;
    while let Some(field) = form.next_field().await? {
        match field.name() {
            Some("image") => bytes = Some(field.bytes().await?.to_vec()),
            Some("options") => {
                let text = text_field(field).await?;
                let parsed: OptionsRequest = serde_json::from_str(&text)
                    .map_err(|e| ApiError::validation("invalid query options").with_detail(e.to_string()))?;
                options = Some(parsed);
            }
            other => {
                return Err(ApiError::validation(format!(
                    "unexpected multipart field {:?}",
                    other.unwrap_or_default()
                )))
            }
        }
    }
    let bytes = bytes.ok_or_else(|| ApiError::validation("missing multipart field \"image\""))?;
    let options = options.ok_or_else(|| ApiError::validation("missing multipart field \"options\""))?;
    let index_id = options
        .index_id
        .ok_or_else(|| ApiError::validation("query options need an indexId"))?;
    let options = options.resolve(&app.config.query, index_id);

    let response = blocking(move || {
        let result = app.engine.execute_query(&bytes, &options)?;
        let names: BTreeMap<u64, String> = app.engine.store().read(|v| {
            result
                .entries
                .iter()
                .filter_map(|e| v.find::<ImageRecord>(e.image_id).map(|img| (img.id, img.name.clone())))
                .collect()
        });
        let entries = result
            .entries
            .iter()
            .map(|e| QueryHit {
                image_id: e.image_id,
                name: names.get(&e.image_id).cloned().unwrap_or_default(),
                similarity: round_sig9(e.similarity),
            })
            .collect();
        Ok(QueryResponse {
            entries,
            query_descriptor_count: result.query_descriptor_count,
        })
    })
    .await?;
    Ok(Json(response))
}

pub async fn simulate_single(
    State(app): State<AppState>,
    body: Result<Json<SimulateSingleRequest>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<Json<simulation::RetrievalFactors>> {
    let Json(request) = body?;
    let options = request.options.resolve(&app.config.query, request.index_id);
    let factors = blocking(move || {
        Ok(simulation::simulate_single_query(
            &app.engine,
            request.query_image_id,
            request.index_id,
            &options,
        )?)
    })
    .await?;
    Ok(Json(round_factors(factors)))
}

pub async fn simulate_multi(
    State(app): State<AppState>,
    body: Result<Json<SimulateMultiRequest>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<Json<SimulationReport>> {
    let Json(request) = body?;
    let options = request.options.resolve(&app.config.query, request.index_id);
    let report = blocking(move || {
        let engine = &app.engine;
        let query_set = match (request.query_set, request.split) {
            (Some(ids), _) => ids,
            (None, Some(split)) => {
                let images: Vec<ImageRecord> = engine.store().read(|v| v.iter().cloned().collect());
                simulation::split_dataset(&images, split.ratio, split.seed)?.query_set
            }
            (None, None) => simulation::unindexed_images(engine.store(), request.index_id)?,
        };
        Ok(simulation::simulate_multi_query(
            engine,
            &query_set,
            request.index_id,
            &options,
        )?)
    })
    .await?;
    Ok(Json(round_report(report)))
}
