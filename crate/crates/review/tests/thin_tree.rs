//! Synthetic review round trip: a thin tree below the cluster-size threshold
//! is added by hand, an auto cluster is deleted, and labels follow the edit.

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use canopy_core::geometry::{CameraIntrinsics, Frame};
use canopy_core::io::{list_frame_files, read_config, read_labels, read_point_cloud, read_trajectory, DatasetLayout};
use canopy_core::pipeline::{label_dataset, segment_dataset, sparsify_dataset};
use canopy_core::synth::{
    export_dataset, generate_trajectory, ExportOptions, Ground, MapOptions, NoiseModel, RenderOptions, Scene, Tree,
    TrajectorySpec,
};
use canopy_review::{router, AppState, ClusterJson, ReviewSession};
use http_body_util::BodyExt;
use nalgebra::Point3;
use serde_json::json;
use tower::ServiceExt;

const THIN: [f64; 2] = [5.0, 1.8];
const DELETED: [f64; 2] = [6.0, -2.2];

fn scene() -> Scene {
    let trees = vec![
        Tree { id: 0, center: [3.5, 2.0], diameter: 0.4, height: 4.0 },
        Tree { id: 1, center: DELETED, diameter: 0.45, height: 4.0 },
        Tree { id: 2, center: [8.0, 2.5], diameter: 0.35, height: 3.5 },
        Tree { id: 3, center: THIN, diameter: 0.1, height: 1.5 },
    ];
    Scene { trees, ground: Ground { x: [-10.0, 30.0], y: [-20.0, 20.0] } }
}

async fn call(app: &axum::Router, method: Method, uri: &str, body: Option<serde_json::Value>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header("content-type", "application/json");
    }
    let body = body.map_or_else(Body::empty, |v| Body::from(v.to_string()));
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

fn bev_near(c: &Point3<f64>, xy: [f64; 2], tol: f64) -> bool {
    (c.x - xy[0]).hypot(c.y - xy[1]) < tol
}

#[tokio::test(flavor = "multi_thread")]
async fn thin_tree_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let scene = scene();
    let traj = generate_trajectory(&scene, &TrajectorySpec { n_frames: 50, seed: 3, ..Default::default() }).unwrap();
    let opts = ExportOptions {
        intrinsics: CameraIntrinsics::zed2_720p(),
        noise: NoiseModel::zero(),
        render: RenderOptions::default(),
        map: MapOptions::default(),
        seed: 3,
    };
    export_dataset(&scene, &traj, &opts, dir.path()).unwrap();
    let layout = DatasetLayout::new(dir.path());
    let cfg = read_config(&layout.config()).unwrap();
    let seg = segment_dataset(&layout, &cfg).unwrap();
    sparsify_dataset(&layout, &cfg).unwrap();

    let app = router(AppState::new(ReviewSession::open(layout.clone()).unwrap(), 0.05), None);
    let (_, body) = call(&app, Method::GET, "/api/clusters", None).await;
    let auto: Vec<ClusterJson> = serde_json::from_slice(&body).unwrap();
    assert_eq!(auto.len(), seg.clusters.len());
    let centers: Vec<Point3<f64>> = auto.iter().map(|c| Point3::from(c.bbox.center)).collect();
    assert!(centers.iter().all(|c| !bev_near(c, THIN, 0.5)), "thin tree must be below the size threshold");
    let victim = auto.iter().find(|c| bev_near(&Point3::from(c.bbox.center), DELETED, 0.5)).expect("auto cluster for tree 1");

    let (s, _) = call(&app, Method::DELETE, &format!("/api/clusters/{}", victim.id), None).await;
    assert_eq!(s, StatusCode::NO_CONTENT);
    let body = json!({"bbox": {"center": [THIN[0], THIN[1], 0.85], "extents": [0.5, 0.5, 1.5]}});
    let (s, body) = call(&app, Method::POST, "/api/clusters", Some(body)).await;
    assert_eq!(s, StatusCode::CREATED);
    let manual: ClusterJson = serde_json::from_slice(&body).unwrap();
    assert!(bev_near(&Point3::from(manual.bbox.center), THIN, 0.1));
    let (s, _) = call(&app, Method::POST, "/api/commit", None).await;
    assert_eq!(s, StatusCode::OK);

    label_dataset(&layout, &cfg).unwrap();
    let poses = read_trajectory(&layout.trajectory()).unwrap();
    let mut thin_frames = 0;
    for (k, path) in list_frame_files(&layout.labels_dir(), "txt").unwrap() {
        let pose = &poses[k];
        let world: Vec<Point3<f64>> = read_labels(&path).unwrap().iter().map(|l| pose.camera_to_world(&l.center)).collect();
        assert!(world.iter().all(|c| !bev_near(c, DELETED, 0.5)), "frame {k} still labels the deleted tree");

        // Visible thin-tree points: sparse points on its trunk surface.
        let sparse = read_point_cloud(&layout.sparse_dir().join(format!("{k:06}.ply")), Frame::Camera(k)).unwrap();
        let visible = sparse.points.iter().map(|p| pose.camera_to_world(p)).any(|w| {
            w.z > 0.1 && w.z < 1.5 && ((w.x - THIN[0]).hypot(w.y - THIN[1]) - 0.05).abs() < 0.01
        });
        let labeled = world.iter().any(|c| bev_near(c, THIN, 0.2));
        assert_eq!(labeled, visible, "frame {k}: thin tree labeled {labeled}, visible {visible}");
        thin_frames += visible as usize;
    }
    assert!(thin_frames > 10, "thin tree visible in only {thin_frames} frames");
}
