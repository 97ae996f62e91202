use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;
use vinewatch_core::aggregate::CellSummary;
use vinewatch_core::geo::LonLat;
use vinewatch_core::glyph::render_glyph;
use vinewatch_core::ingest::{CategoryManifest, CATEGORY_COUNT};
use vinewatch_core::predict::{AreaFeatures, Prediction, PredictionCatalog};
use vinewatch_service::{router, ApiSession, ServiceConfig};

const WOOD: &str = "FOREST_MIXED";

/// Projected origin of a 1 km cell near (8.0, 48.0).
fn origin() -> (f64, f64) {
    let (x, y) = LonLat::new(8.0, 48.0).to_mercator();
    ((x / 1000.0).floor() * 1000.0, (y / 1000.0).floor() * 1000.0)
}

fn area(id: &str, dx: f64, dy: f64, wood: f64, height: f64) -> AreaFeatures {
    let (x0, y0) = origin();
    let manifest = CategoryManifest::default();
    let mut landuse = vec![0.0; CATEGORY_COUNT];
    landuse[manifest.index_of(WOOD).unwrap()] = wood;
    landuse[0] = 1.0 - wood;
    AreaFeatures { area_id: id.into(), centroid: LonLat::from_mercator(x0 + dx, y0 + dy), height_m: height, landuse }
}

/// A1, A2 share a 1 km cell; B1 is alone next to it; C1 sits 5 km away.
fn session() -> ApiSession {
    let areas = vec![
        area("A1", 100.0, 100.0, 0.6, 200.0),
        area("A2", 600.0, 700.0, 0.5, 300.0),
        area("B1", 1500.0, 200.0, 0.1, 250.0),
        area("C1", 5500.0, 5500.0, 0.0, 400.0),
    ];
    let onset = |id: &str| match id {
        "A1" | "A2" => 6,
        _ => 8,
    };
    let mut predictions = Vec::new();
    for a in &areas {
        for month in 1..=12 {
            let endangered = month >= onset(&a.area_id);
            let certainty = if endangered { 0.6 + 0.03 * month as f64 } else { 0.95 - 0.02 * month as f64 };
            predictions.push(Prediction { area_id: a.area_id.clone(), month, endangered, certainty });
        }
    }
    let catalog = PredictionCatalog::from_parts(predictions, areas, vec![], "fixture-model".into()).unwrap();
    ApiSession::new(catalog, CategoryManifest::default(), ServiceConfig::default())
}

fn app() -> (Arc<ApiSession>, Router) {
    let s = Arc::new(session());
    (s.clone(), router(s))
}

async fn get(app: &Router, uri: &str) -> (StatusCode, String, Vec<u8>) {
    let resp = app.clone().oneshot(Request::get(uri).body(Body::empty()).unwrap()).await.unwrap();
    let status = resp.status();
    let ctype = resp.headers().get("content-type").map(|v| v.to_str().unwrap().to_string()).unwrap_or_default();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, ctype, body)
}

async fn get_json(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (status, _, body) = get(app, uri).await;
    (status, serde_json::from_slice(&body).unwrap())
}

fn cell_of(id: &str, size: f64) -> (i64, i64) {
    let s = session();
    let c = s.catalog().area(id).unwrap().centroid;
    let (x, y) = c.to_mercator();
    ((x / size).floor() as i64, (y / size).floor() as i64)
}

#[tokio::test]
async fn grid_lists_non_empty_cells() {
    let (_, app) = app();
    let (status, v) = get_json(&app, "/api/grid?cell_size_m=1000").await;
    assert_eq!(status, StatusCode::OK);
    let cells = v["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 3);
    let total: u64 = cells.iter().map(|c| c["summary"]["vineyard_count"].as_u64().unwrap()).sum();
    assert_eq!(total, 4);
    let (a_i, a_j) = cell_of("A1", 1000.0);
    let a = cells.iter().find(|c| c["cell_index"]["i"] == a_i && c["cell_index"]["j"] == a_j).unwrap();
    assert_eq!(a["summary"]["member_area_ids"], serde_json::json!(["A1", "A2"]));
}

#[tokio::test]
async fn empty_bbox_and_overview() {
    let (_, app) = app();
    let (status, v) = get_json(&app, "/api/grid?cell_size_m=1000&bbox=100,10,101,11").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["cells"].as_array().unwrap().len(), 0);
    let (_, v) = get_json(&app, "/api/grid?cell_size_m=200000").await;
    let cells = v["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 1);
    assert_eq!(cells[0]["summary"]["vineyard_count"], 4);
}

#[tokio::test]
async fn overlapping_windows_share_identical_cells() {
    let (_, app) = app();
    let (_, small) = get_json(&app, "/api/grid?cell_size_m=1000&bbox=7.99,47.99,8.02,48.01").await;
    let (_, large) = get_json(&app, "/api/grid?cell_size_m=1000&bbox=7.5,47.5,8.5,48.5").await;
    let small = small["cells"].as_array().unwrap();
    assert!(!small.is_empty());
    for c in small {
        let twin = large["cells"].as_array().unwrap().iter().find(|l| l["cell_index"] == c["cell_index"]).unwrap();
        assert_eq!(serde_json::to_string(c).unwrap(), serde_json::to_string(twin).unwrap());
    }
}

#[tokio::test]
async fn cell_detail_matches_grid() {
    let (_, app) = app();
    let (i, j) = cell_of("B1", 1000.0);
    let (status, v) = get_json(&app, &format!("/api/cell/{i}/{j}?cell_size_m=1000")).await;
    assert_eq!(status, StatusCode::OK);
    let months = v["months"].as_array().unwrap();
    assert_eq!(months.len(), 12);
    for m in months {
        assert_eq!(m["endangered"].as_u64().unwrap() + m["safe"].as_u64().unwrap(), 1);
        assert!(m["stddev_certainty"].as_f64().unwrap() >= 0.0);
    }
    let (_, grid) = get_json(&app, "/api/grid?cell_size_m=1000").await;
    for c in grid["cells"].as_array().unwrap() {
        let (ci, cj) = (c["cell_index"]["i"].as_i64().unwrap(), c["cell_index"]["j"].as_i64().unwrap());
        let (_, d) = get_json(&app, &format!("/api/cell/{ci}/{cj}?cell_size_m=1000")).await;
        for (k, m) in d["months"].as_array().unwrap().iter().enumerate() {
            assert_eq!(m["endangered"], c["summary"]["months"][k]["endangered"]);
            assert_eq!(m["safe"], c["summary"]["months"][k]["safe"]);
        }
    }
}

#[tokio::test]
async fn cell_errors() {
    let (_, app) = app();
    let (status, v) = get_json(&app, "/api/cell/0/0?cell_size_m=1000").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(v["error"].as_str().unwrap().contains("no vineyards"));
    assert_eq!(get(&app, "/api/cell/x/0").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, "/api/cell/0/0?cell_size_m=100").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, "/api/cell/0/0?cell_size_m=abc").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, "/api/grid?bbox=1,2,3").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, "/api/grid?bbox=9,48,8,49").await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn compare_profiles() {
    let (_, app) = app();
    let (ai, aj) = cell_of("A1", 1000.0);
    let (bi, bj) = cell_of("B1", 1000.0);
    let (status, v) = get_json(&app, &format!("/api/compare?cells={ai},{aj};{bi},{bj}&cell_size_m=1000")).await;
    assert_eq!(status, StatusCode::OK);
    let features = v["features"].as_array().unwrap();
    assert_eq!(features.len(), 84);
    assert_eq!(features[83]["code"], "height_m");
    let wood = features.iter().position(|f| f["code"] == WOOD).unwrap();
    let profiles = v["profiles"].as_array().unwrap();
    assert_eq!(profiles[0]["values"].as_array().unwrap().len(), 84);
    let a_wood = profiles[0]["values"][wood].as_f64().unwrap();
    let b_wood = profiles[1]["values"][wood].as_f64().unwrap();
    assert!((a_wood - 0.55).abs() < 1e-12);
    assert!(a_wood > b_wood);
    assert_eq!(profiles[0]["values"][83].as_f64().unwrap(), 250.0);

    let (_, same) = get_json(&app, &format!("/api/compare?cells={ai},{aj};{ai},{aj}&cell_size_m=1000")).await;
    assert_eq!(same["profiles"][0]["values"], same["profiles"][1]["values"]);

    let five = format!("{ai},{aj};{ai},{aj};{ai},{aj};{ai},{aj};{ai},{aj}");
    assert_eq!(get(&app, &format!("/api/compare?cells={five}&cell_size_m=1000")).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, "/api/compare?cells=0,0&cell_size_m=1000").await.0, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/api/compare?cell_size_m=1000").await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn glyph_is_the_rendered_summary() {
    let (session, app) = app();
    let (i, j) = cell_of("A1", 1000.0);
    let (status, ctype, body) = get(&app, &format!("/api/glyph/{i}/{j}.svg?cell_size_m=1000&radius_px=40")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ctype, "image/svg+xml");
    let summary: CellSummary = session.summary(1000.0, vinewatch_core::aggregate::CellIndex::new(i, j)).unwrap();
    assert_eq!(String::from_utf8(body).unwrap(), render_glyph(&summary, 40.0).unwrap());

    let (_, _, body) = get(&app, &format!("/api/glyph/{i}/{j}.svg?cell_size_m=1000")).await;
    let svg = String::from_utf8(body).unwrap();
    assert!(svg.contains(&format!(r#"data-cell-i="{i}" data-cell-j="{j}" data-cell-size-m="1000.000""#)));

    assert_eq!(get(&app, &format!("/api/glyph/{i}/{j}.svg?cell_size_m=1000&radius_px=8")).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, &format!("/api/glyph/{i}/{j}.svg?cell_size_m=1000&radius_px=500")).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, "/api/glyph/0/0.svg?cell_size_m=1000").await.0, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, &format!("/api/glyph/{i}/{j}.png")).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_requests_are_consistent_and_read_only() {
    let (session, app) = app();
    let before = session.fingerprint();
    let (ai, aj) = cell_of("A1", 2000.0);
    let (bi, bj) = cell_of("B1", 1000.0);
    let uris = [
        "/api/grid?cell_size_m=2000".to_string(),
        format!("/api/cell/{ai}/{aj}?cell_size_m=2000"),
        format!("/api/glyph/{ai}/{aj}.svg?cell_size_m=2000&radius_px=24"),
        format!("/api/compare?cells={bi},{bj}&cell_size_m=1000"),
        "/api/grid?cell_size_m=4000&bbox=7,47,9,49".to_string(),
        "/api/info".to_string(),
    ];
    let mut handles = Vec::new();
    for w in 0..32 {
        let app = app.clone();
        let uris = uris.clone();
        handles.push(tokio::spawn(async move {
            let mut out = Vec::new();
            for k in 0..uris.len() {
                let uri = &uris[(k + w) % uris.len()];
                out.push((uri.clone(), get(&app, uri).await));
            }
            out
        }));
    }
    let mut seen = std::collections::HashMap::new();
    for h in handles {
        for (uri, resp) in h.await.unwrap() {
            assert_eq!(resp.0, StatusCode::OK, "{uri}");
            let prev = seen.entry(uri.clone()).or_insert_with(|| resp.clone());
            assert_eq!(prev, &resp, "{uri}");
        }
    }
    let (_, grid) = get_json(&app, "/api/grid?cell_size_m=2000").await;
    let (_, detail) = get_json(&app, &format!("/api/cell/{ai}/{aj}?cell_size_m=2000")).await;
    let cell = grid["cells"].as_array().unwrap().iter().find(|c| c["cell_index"]["i"] == ai && c["cell_index"]["j"] == aj).unwrap();
    assert_eq!(cell["summary"]["vineyard_count"], detail["vineyard_count"]);
    assert_eq!(session.fingerprint(), before);
    let (_, info) = get_json(&app, "/api/info").await;
    assert_eq!(info["catalog_fingerprint"], session.catalog().fingerprint());
    assert_eq!(info["n_areas"], 4);
}
