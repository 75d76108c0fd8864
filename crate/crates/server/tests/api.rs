use std::sync::{Arc, RwLock};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use classalg::Store;
use classalg_server::api::router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app() -> Router {
    router(Arc::new(RwLock::new(Store::new())))
}

async fn call(
    app: &Router,
    method: Method,
    uri: &str,
    body: Option<Value>,
    if_match: Option<&str>,
) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(r) = if_match {
        req = req.header("if-match", r);
    }
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, v)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Method::GET, uri, None, None).await
}

async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    call(app, Method::POST, uri, Some(body), None).await
}

async fn seeded() -> Router {
    let app = app();
    for (age, dept) in [(25, "x"), (35, "x"), (45, "y"), (55, "y")] {
        let (st, _) = post(
            &app,
            "/objects",
            json!({ "attributes": { "age": age, "dept": [dept] } }),
        )
        .await;
        assert_eq!(st, StatusCode::CREATED);
    }
    let (st, v) = post(
        &app,
        "/classes",
        json!({ "name": "young", "expression": "any where age<40" }),
    )
    .await;
    assert_eq!(st, StatusCode::CREATED, "{v}");
    let (st, v) = post(
        &app,
        "/classes",
        json!({ "name": "ydept", "expression": "any where dept=\"y\"" }),
    )
    .await;
    assert_eq!(st, StatusCode::CREATED, "{v}");
    app
}

#[tokio::test]
async fn health_and_revision() {
    let app = app();
    let (st, v) = get(&app, "/health").await;
    assert_eq!((st, v), (StatusCode::OK, json!({ "status": "ok" })));
    assert_eq!(get(&app, "/revision").await.1["revision"], 0);
    post(&app, "/objects", json!({})).await;
    assert_eq!(get(&app, "/revision").await.1["revision"], 1);
}

#[tokio::test]
async fn query_any_has_probability_one() {
    let app = seeded().await;
    let (st, v) = post(&app, "/query", json!({ "expression": "any" })).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["probability"]["exact"], "1");
    assert_eq!(v["probability"]["value"], 1.0);
    assert_eq!(v["sdnf"], "true");
    assert_eq!(v["trueSet"], json!([1, 2, 3, 4]));
    assert_eq!(v["revision"], 6);
}

#[tokio::test]
async fn query_on_empty_store() {
    let (st, v) = post(&app(), "/query", json!({ "expression": "any" })).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "EmptyUniverse");
}

#[tokio::test]
async fn syntax_errors_carry_a_position() {
    let app = app();
    let (st, v) = post(
        &app,
        "/classes",
        json!({ "name": "c", "expression": "any where age <" }),
    )
    .await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "SyntaxError");
    assert!(v["position"].is_u64(), "{v}");
    assert!(v["message"].as_str().unwrap().contains("syntax"));
    assert_eq!(get(&app, "/revision").await.1["revision"], 0);
}

#[tokio::test]
async fn malformed_bodies_are_parse_errors() {
    let app = app();
    let (st, v) = call(
        &app,
        Method::POST,
        "/objects",
        Some(json!("not an object")),
        None,
    )
    .await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "ParseError");
    let (st, v) = post(&app, "/query", json!({ "expr": "any" })).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "ParseError");
}

#[tokio::test]
async fn stale_if_match_is_a_conflict() {
    let app = seeded().await;
    let rev = get(&app, "/revision").await.1["revision"].as_u64().unwrap();
    let stale = (rev - 1).to_string();
    let (st, v) = call(
        &app,
        Method::POST,
        "/objects",
        Some(json!({})),
        Some(&stale),
    )
    .await;
    assert_eq!(st, StatusCode::CONFLICT);
    assert_eq!(v["code"], "RevisionConflict");
    assert_eq!(get(&app, "/revision").await.1["revision"], rev);

    let (st, v) = call(
        &app,
        Method::DELETE,
        "/objects/1",
        None,
        Some(&format!("\"{rev}\"")),
    )
    .await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert_eq!(v["revision"], rev + 1);
}

#[tokio::test]
async fn object_crud() {
    let app = app();
    let (st, v) = post(
        &app,
        "/objects",
        json!({ "attributes": { "w": [1, "a"], "r": { "number": "1/3" } } }),
    )
    .await;
    assert_eq!(st, StatusCode::CREATED);
    assert_eq!(v["oid"], 1);
    assert_eq!(
        v["attributes"],
        json!({ "r": [{ "number": "1/3" }], "w": [1, "a"] })
    );

    let (st, v) = call(
        &app,
        Method::PATCH,
        "/objects/1",
        Some(json!({ "attributes": { "w": null, "z": 2 } })),
        None,
    )
    .await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert_eq!(
        v["attributes"],
        json!({ "r": [{ "number": "1/3" }], "z": [2] })
    );
    assert_eq!(
        get(&app, "/objects").await.1["objects"]
            .as_array()
            .unwrap()
            .len(),
        1
    );

    let (st, _) = call(&app, Method::DELETE, "/objects/1", None, None).await;
    assert_eq!(st, StatusCode::OK);
    let (st, v) = get(&app, "/objects/1").await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "UnknownOid");
    let (st, v) = post(&app, "/objects", json!({ "attributes": { "e": [] } })).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "EmptyValueList");
}

#[tokio::test]
async fn failed_batches_leave_the_store_untouched() {
    let app = seeded().await;
    let (st, _) = post(
        &app,
        "/relations",
        json!({ "kind": "explicit", "name": "knows" }),
    )
    .await;
    assert_eq!(st, StatusCode::CREATED);
    let rev = get(&app, "/revision").await.1["revision"].clone();
    let (st, v) = post(
        &app,
        "/relations/knows/edges",
        json!({ "edges": [[1, 2], [2, 99]] }),
    )
    .await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "UnknownOid");
    assert_eq!(get(&app, "/revision").await.1["revision"], rev);

    let (st, v) = post(
        &app,
        "/relations/knows/edges",
        json!({ "edges": [[1, 2], [2, 3]] }),
    )
    .await;
    assert_eq!(st, StatusCode::OK, "{v}");
    let doc = get(&app, "/document").await.1;
    assert_eq!(doc["relations"][0]["edges"], json!([[1, 2], [2, 3]]));
}

#[tokio::test]
async fn classes_and_paged_extents() {
    let app = seeded().await;
    let (_, v) = get(&app, "/classes").await;
    let young = &v["classes"][0];
    assert_eq!(young["name"], "young");
    assert_eq!(young["sdnf"], "age<40");
    assert_eq!(
        young["extentCounts"],
        json!({ "true": 2, "false": 2, "unknown": 0 })
    );

    let (_, v) = get(&app, "/classes/young/extent?limit=1").await;
    assert_eq!(v["trueSet"], json!([1]));
    assert_eq!(v["falseSet"], json!([3]));
    assert_eq!(v["counts"]["true"], 2);
    assert_eq!(v["nextCursor"], 1);
    let (_, v) = get(&app, "/classes/young/extent?limit=1&cursor=1").await;
    assert_eq!(v["trueSet"], json!([2]));
    assert!(v.get("nextCursor").is_none());

    let (st, v) = get(&app, "/classes/nope/extent").await;
    assert_eq!(
        (st, v["code"].clone()),
        (StatusCode::BAD_REQUEST, json!("UnknownClassName"))
    );
    let (st, v) = post(
        &app,
        "/classes",
        json!({ "name": "young2", "expression": "any where age<40" }),
    )
    .await;
    assert_eq!(
        (st, v["code"].clone()),
        (StatusCode::BAD_REQUEST, json!("DuplicateIntent"))
    );
}

#[tokio::test]
async fn reports() {
    let app = seeded().await;
    let (st, v) = get(&app, "/report/implications").await;
    assert_eq!(st, StatusCode::OK);
    assert!(v["logicalImplications"].is_array());

    let (st, v) = post(&app, "/describe", json!({ "oids": [1, 2] })).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    let young = v["perClassMembership"]
        .as_array()
        .unwrap()
        .iter()
        .find(|m| m["class"] == "young")
        .unwrap();
    assert_eq!(young["fraction"], "1");
    let (st, v) = post(&app, "/describe", json!({ "oids": [] })).await;
    assert_eq!(
        (st, v["code"].clone()),
        (StatusCode::BAD_REQUEST, json!("EmptyOidSet"))
    );

    let (st, v) = get(&app, "/hierarchy").await;
    assert_eq!(st, StatusCode::OK);
    assert!(v["nodes"].as_array().unwrap().len() >= 4);
    assert!(v["edges"].is_array());

    let (st, v) = get(&app, "/summarize?attr=dept").await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert_eq!(v["groups"].as_array().unwrap().len(), 2);
    let (st, v) = get(&app, "/summarize").await;
    assert_eq!(
        (st, v["code"].clone()),
        (StatusCode::BAD_REQUEST, json!("MissingParameter"))
    );

    let (st, v) = get(&app, "/rules").await;
    assert_eq!(st, StatusCode::OK);
    assert!(v["rules"].is_array());

    let (_, v) = post(&app, "/normalize", json!({ "expression": "young * ydept" })).await;
    assert_eq!(v["sdnf"], "age<40&dept=\"y\"");
    let (_, v) = post(
        &app,
        "/normalize",
        json!({ "expression": "young - any where age<50" }),
    )
    .await;
    assert_eq!(v["sdnf"], "false");
}

#[tokio::test]
async fn constraints_validate_then_apply() {
    let app = seeded().await;
    let (st, v) = post(
        &app,
        "/constraints",
        json!({ "constraints": ["Pr(young|ydept) >= 0.4", "Pr(ydept|young) >= 0.4"] }),
    )
    .await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["valid"], false);
    assert_eq!(v["violations"][0]["type"], 1);

    let rev = get(&app, "/revision").await.1["revision"].as_u64().unwrap();
    let (st, v) = post(
        &app,
        "/constraints/apply",
        json!({ "constraints": ["Pr(ydept|young) >= 0.5"] }),
    )
    .await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert!(v["revision"].as_u64().unwrap() > rev);
    assert_eq!(v["status"][0]["satisfied"], true);
    let (_, q) = post(&app, "/query", json!({ "expression": "young * ydept" })).await;
    assert_eq!(q["counts"]["true"], 2);

    let (_, v) = get(&app, "/constraints").await;
    assert_eq!(v["status"].as_array().unwrap().len(), 1);
    let (st, v) = post(
        &app,
        "/constraints/apply",
        json!({ "constraints": ["Pr(young|ydept) >= 0.4", "Pr(ydept|young) >= 0.4"] }),
    )
    .await;
    assert_eq!(
        (st, v["code"].clone()),
        (StatusCode::BAD_REQUEST, json!("ForbiddenConstraint"))
    );
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_writes_are_serialized() {
    let app = app();
    let tasks: Vec<_> = (0..32)
        .map(|i| {
            let app = app.clone();
            tokio::spawn(async move {
                post(&app, "/objects", json!({ "attributes": { "i": i } })).await
            })
        })
        .collect();
    let mut oids = vec![];
    for t in tasks {
        let (st, v) = t.await.unwrap();
        assert_eq!(st, StatusCode::CREATED);
        oids.push(v["oid"].as_u64().unwrap());
    }
    oids.sort();
    assert_eq!(oids, (1..=32).collect::<Vec<_>>());
    assert_eq!(get(&app, "/revision").await.1["revision"], 32);
}
