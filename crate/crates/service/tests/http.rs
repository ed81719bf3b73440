use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use eloran_core::coverage::ConductivitySource;
use eloran_core::demo::{korea_scenario, write_demo_data};
use eloran_core::jitter::write_tor_log;
use eloran_core::synthetic::{generate_pair, SyntheticPairConfig};
use eloran_service::api::{router, AppState};
use eloran_service::store::ScenarioStore;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

struct Harness {
    _dir: tempfile::TempDir,
    app: Router,
}

fn harness() -> Harness {
    let dir = tempfile::tempdir().unwrap();
    write_demo_data(dir.path()).unwrap();
    let app = router(AppState::new(ScenarioStore::open(dir.path()).unwrap()));
    Harness { _dir: dir, app }
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, headers, body)
}

fn json(body: &[u8]) -> Value {
    serde_json::from_slice(body).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(body)))
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

fn post_toml(uri: &str, body: String) -> Request<Body> {
    Request::post(uri)
        .header(header::CONTENT_TYPE, "application/toml")
        .body(Body::from(body))
        .unwrap()
}

async fn create(app: &Router, source: ConductivitySource) -> String {
    let (status, headers, body) = send(app, post_toml("/api/scenarios", korea_scenario(source).to_toml_string())).await;
    assert_eq!(status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&body));
    let id = json(&body)["id"].as_str().unwrap().to_string();
    assert_eq!(headers[header::LOCATION], format!("/api/scenarios/{id}"));
    assert_eq!(headers[header::ETAG], "\"1\"");
    id
}

async fn compute_and_wait(app: &Router, id: &str) -> Value {
    let (status, _, body) = send(app, Request::post(format!("/api/scenarios/{id}/compute")).body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{}", String::from_utf8_lossy(&body));
    let job_id = json(&body)["job_id"].as_str().unwrap().to_string();
    let start = Instant::now();
    loop {
        let (status, _, body) = send(app, get(&format!("/api/jobs/{job_id}"))).await;
        assert_eq!(status, StatusCode::OK);
        let s = json(&body);
        let p = s["progress"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&p));
        match s["state"].as_str().unwrap() {
            "done" => return s,
            "failed" | "cancelled" => panic!("job ended: {s}"),
            _ => {}
        }
        assert!(start.elapsed() < Duration::from_secs(120), "job did not finish");
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
}

#[tokio::test]
async fn compute_lifecycle_and_cache_hit() {
    let h = harness();
    let id = create(&h.app, ConductivitySource::ItuBaseline).await;

    let (status, _, body) = send(&h.app, get(&format!("/api/scenarios/{id}/accuracy-map"))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(json(&body)["error"]["kind"], "not_found");

    let done = compute_and_wait(&h.app, &id).await;
    assert_eq!(done["cache_hit"], false);
    assert_eq!(done["result"], format!("/api/scenarios/{id}/accuracy-map"));

    let (status, headers, body) = send(&h.app, get(&format!("/api/scenarios/{id}/accuracy-map"))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(headers[header::CONTENT_TYPE], "application/geo+json");
    let n_features = json(&body)["features"].as_array().unwrap().len();
    assert_eq!(n_features as u64, done["total_cells"].as_u64().unwrap());

    let (status, _, csv) = send(&h.app, get(&format!("/api/scenarios/{id}/accuracy-map?format=csv"))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), n_features + 1);

    let (status, _, _) = send(&h.app, get(&format!("/api/scenarios/{id}/accuracy-map?format=png"))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    // identical content under a new id is served from the cache
    let twin = create(&h.app, ConductivitySource::ItuBaseline).await;
    let s = compute_and_wait(&h.app, &twin).await;
    assert_eq!(s["cache_hit"], true);
    let (status, _, _) = send(&h.app, get(&format!("/api/scenarios/{twin}/accuracy-map"))).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn crud_versions_and_conflicts() {
    let h = harness();
    let id = create(&h.app, ConductivitySource::LandCover).await;

    let (status, _, body) = send(&h.app, get("/api/scenarios")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(json(&body).as_array().unwrap().len(), 1);

    let mut edited = korea_scenario(ConductivitySource::LandCover);
    edited.transmitters[0].location = eloran_core::GeoPoint::new(36.5, 128.0).unwrap();
    let put = |version: &str| {
        Request::put(format!("/api/scenarios/{id}"))
            .header(header::CONTENT_TYPE, "application/json")
            .header(header::IF_MATCH, version)
            .body(Body::from(serde_json::to_vec(&edited).unwrap()))
            .unwrap()
    };
    let (status, headers, _) = send(&h.app, put("\"1\"")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(headers[header::ETAG], "\"2\"");
    let (status, _, body) = send(&h.app, put("\"1\"")).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(json(&body)["error"]["kind"], "conflict");

    let (status, _, body) = send(&h.app, get(&format!("/api/scenarios/{id}"))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(json(&body)["scenario"]["transmitters"][0]["location"]["lat_deg"], 36.5);

    let del = |version: &str| {
        Request::delete(format!("/api/scenarios/{id}"))
            .header(header::IF_MATCH, version)
            .body(Body::empty())
            .unwrap()
    };
    assert_eq!(send(&h.app, del("\"1\"")).await.0, StatusCode::CONFLICT);
    assert_eq!(send(&h.app, del("\"2\"")).await.0, StatusCode::NO_CONTENT);
    assert_eq!(send(&h.app, get(&format!("/api/scenarios/{id}"))).await.0, StatusCode::NOT_FOUND);
    assert_eq!(send(&h.app, get("/api/jobs/nope")).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn invalid_scenarios_are_400() {
    let h = harness();
    let (status, _, body) = send(&h.app, post_toml("/api/scenarios", "schema_version = 1\nname = 3".into())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(json(&body)["error"]["kind"], "invalid_scenario");

    let mut two = korea_scenario(ConductivitySource::LandCover);
    two.transmitters.truncate(2);
    let (status, _, _) = send(&h.app, post_toml("/api/scenarios", two.to_toml_string())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn missing_raster_on_compute_is_422() {
    let h = harness();
    let mut s = korea_scenario(ConductivitySource::LandCover);
    s.conductivity.land_cover = Some("nowhere.asc".into());
    let (status, _, body) = send(&h.app, post_toml("/api/scenarios", s.to_toml_string())).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = json(&body)["id"].as_str().unwrap().to_string();
    let (status, _, body) = send(&h.app, Request::post(format!("/api/scenarios/{id}/compute")).body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let err = json(&body);
    assert_eq!(err["error"]["kind"], "file");
    assert!(err["error"]["path"].as_str().unwrap().ends_with("nowhere.asc"));
}

fn short_log(stations: usize) -> Vec<u8> {
    let cfg = SyntheticPairConfig {
        site_id: "Okcheon".into(),
        station_ids: ("pohang".into(), "gwangju".into()),
        duration_s: 4.0 * 3600.0,
        ..Default::default()
    };
    let (a, b) = generate_pair(&cfg).unwrap();
    let series = if stations == 2 { vec![a, b] } else { vec![a] };
    let mut out = Vec::new();
    write_tor_log(&mut out, &series).unwrap();
    out
}

#[tokio::test]
async fn jitter_estimates_endpoint() {
    let h = harness();
    let req = |uri: &str, body: Vec<u8>| {
        Request::post(uri)
            .header(header::CONTENT_TYPE, "text/csv")
            .body(Body::from(body))
            .unwrap()
    };
    let (status, _, body) = send(&h.app, req("/api/jitter-estimates?bandwidth_grid=1:1000:30", short_log(2))).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    let r = json(&body);
    assert_eq!(r["metadata"]["bandwidth_grid"], "1:1000:30");
    assert_eq!(r["rows"].as_array().unwrap().len(), 2);
    assert_eq!(r["averages"].as_array().unwrap().len(), 2);

    let (status, headers, body) = send(&h.app, req("/api/jitter-estimates?format=csv", short_log(2))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(headers[header::CONTENT_TYPE], "text/csv");
    assert!(String::from_utf8(body).unwrap().contains("# averages"));

    let (status, _, body) = send(&h.app, req("/api/jitter-estimates", short_log(1))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(json(&body)["error"]["kind"], "pairing");

    let (status, _, _) = send(&h.app, req("/api/jitter-estimates", b"not,a,log\n1,2,3\n".to_vec())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn terrain_classes_are_listed() {
    let h = harness();
    let (status, _, body) = send(&h.app, get("/api/meta/terrain-classes")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(json(&body).as_array().unwrap().len(), 10);
}
