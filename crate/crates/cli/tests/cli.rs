use std::path::Path;
use std::process::{Command, Output};

use faceaug::annotate::{scheme, AnnotatedFace, BBox};
use faceaug::mesh::{parse_obj, Rgb};
use faceaug::pipeline::{read_manifest, DatasetManifest, ManifestHeader, ManifestRecord};
use faceaug::pose::{Camera, RigidPose};
use faceaug::render::{rasterize, Background, RenderConfig};
use faceaug::synthetic::{generate_head, DEFAULT_RESOLUTION};
use faceaug::texture::ColoredMesh;
use faceaug::Vector3;
use serde_json::Value;

fn faceaug(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_faceaug"))
        .args(args)
        .env_remove("FACEAUG_ROOT")
        .output()
        .unwrap()
}

fn ok_json(args: &[&str]) -> Value {
    let out = faceaug(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// One frontal record of the synthetic head, no per-record mesh, so the
/// run falls back to the generic mesh and estimates the pose.
fn write_frontal_dataset(dir: &Path, size: usize) {
    let head = generate_head(DEFAULT_RESOLUTION).unwrap();
    let camera = Camera::new(size, size, 1.0).unwrap();
    let pose = RigidPose::new(
        RigidPose::from_euler_deg(0.0, 0.0, 0.0),
        Vector3::zeros(),
        0.38 * size as f64,
    )
    .unwrap();
    let colors: Vec<Rgb> = head
        .mesh
        .vertices()
        .iter()
        .map(|v| [(0.5 + 0.2 * v.y) as f32, 0.5, 0.4])
        .collect();
    let cm = ColoredMesh {
        mesh: head.mesh.clone(),
        textured: vec![true; colors.len()],
        colors,
    };
    let cfg = RenderConfig {
        emission_weight: 1.0,
        background: Background::Solid([0.1; 3]),
        ..Default::default()
    };
    let image = rasterize(&cm, &pose, &camera, None, &cfg, None)
        .unwrap()
        .image;
    std::fs::create_dir_all(dir.join("img")).unwrap();
    image.save(dir.join("img/a.png")).unwrap();
    let landmarks: Vec<[f64; 2]> = head
        .landmark_points()
        .iter()
        .map(|v| {
            let q = camera.project(&pose.transform_point(v));
            [q.x, q.y]
        })
        .collect();
    let mut m = DatasetManifest::new(ManifestHeader::default());
    m.push(ManifestRecord {
        id: "a".into(),
        face: AnnotatedFace {
            image: "img/a.png".into(),
            bbox: BBox::around(&landmarks),
            landmarks,
            visible: None,
            five_points: scheme::FIVE_POINTS,
            identity: "alice".into(),
            age: None,
            gender: None,
            yaw_deg: 0.0,
            pitch_deg: 0.0,
            is_synthetic: false,
            light_id: None,
        },
        mesh: None,
        mesh_landmarks: None,
        pose: None,
        source_id: None,
        view: None,
    })
    .unwrap();
    std::fs::write(dir.join("manifest.jsonl"), m.to_jsonl().unwrap()).unwrap();
}

#[test]
fn augment_then_reports() {
    let dir = tempfile::tempdir().unwrap();
    write_frontal_dataset(dir.path(), 96);
    let out = dir.path().join("out");
    let manifest = dir.path().join("manifest.jsonl");
    let report = ok_json(&[
        "augment",
        "--manifest",
        p(&manifest),
        "--out",
        p(&out),
        "--seed",
        "3",
    ]);
    assert_eq!(report["seed"], 3);
    assert_eq!(report["real_count"], 1);
    let synth = report["synth_count"].as_u64().unwrap();
    // landmark menu has four views, the ratio cap allows floor(0.5 * 1) = 0
    assert_eq!(synth, 0);

    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "task = \"landmark\"\n[sampling]\nratio_cap = 4.0\n").unwrap();
    let out2 = dir.path().join("out2");
    let report = ok_json(&[
        "augment",
        "--manifest",
        p(&manifest),
        "--config",
        p(&cfg),
        "--out",
        p(&out2),
    ]);
    let synth = report["synth_count"].as_u64().unwrap();
    assert!((1..=4).contains(&synth), "{report}");
    let merged = read_manifest(&out2.join("manifest.jsonl")).unwrap();
    assert_eq!(merged.records.len() as u64, 1 + synth);
    assert!(merged
        .records
        .iter()
        .skip(1)
        .all(|r| r.face.is_synthetic && r.face.identity == "alice"));

    let ent = ok_json(&[
        "report-entropy",
        "--manifest",
        p(&out2.join("manifest.jsonl")),
        "--out",
        p(&dir.path().join("ent")),
    ]);
    assert_eq!(ent["identities"], 1);
    assert_eq!(ent["mean_entropy_before"], 0.0);
    assert!(dir.path().join("ent/entropy_report.csv").exists());

    let grid = dir.path().join("grid.png");
    let o = faceaug(&[
        "overlay",
        "--manifest",
        p(&out2.join("manifest.jsonl")),
        "--out",
        p(&grid),
    ]);
    assert!(o.status.success());
    assert!(grid.exists());

    // the run's own landmarks scored against themselves
    let nme = ok_json(&[
        "metrics",
        "nme",
        "--manifest",
        p(&out2.join("manifest.jsonl")),
        "--pred",
        p(&out2.join("landmarks.txt")),
    ]);
    assert_eq!(nme["nme"], 0.0);
    assert_eq!(nme["count"].as_u64().unwrap(), 1 + synth);
}

#[test]
fn root_env_var_overrides_manifest_root() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    write_frontal_dataset(&data, 64);
    let elsewhere = dir.path().join("elsewhere");
    std::fs::create_dir_all(&elsewhere).unwrap();
    std::fs::copy(
        data.join("manifest.jsonl"),
        elsewhere.join("manifest.jsonl"),
    )
    .unwrap();
    let manifest = elsewhere.join("manifest.jsonl");
    let o = dir.path().join("o");
    let args = ["augment", "--manifest", p(&manifest), "--out", p(&o)];
    // without the override the image cannot be found, so the only record fails
    assert!(!faceaug(&args).status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_faceaug"))
        .args(args)
        .env("FACEAUG_ROOT", &data)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn synth_head_writes_obj_and_landmarks() {
    let dir = tempfile::tempdir().unwrap();
    let obj = dir.path().join("head.obj");
    let lm = dir.path().join("lm.txt");
    let o = faceaug(&[
        "synth-head",
        "--resolution",
        "12",
        "--out",
        p(&obj),
        "--landmarks",
        p(&lm),
    ]);
    assert!(o.status.success());
    let mesh = parse_obj(&std::fs::read(&obj).unwrap()).unwrap();
    let ids: Vec<usize> = std::fs::read_to_string(&lm)
        .unwrap()
        .split_whitespace()
        .map(|t| t.parse().unwrap())
        .collect();
    assert_eq!(ids.len(), 68);
    assert!(ids.iter().all(|&i| i < mesh.vertices().len()));
    assert!(
        !faceaug(&["synth-head", "--resolution", "2", "--out", p(&obj)])
            .status
            .success()
    );
}

#[test]
fn roc_and_covariate_from_scores() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("scores.csv");
    // genuine 0.9 0.8 0.05; imposters 0.7 then 0.01..0.09
    let mut text = String::from("id_a,id_b,score,label,yaw_a,yaw_b\n");
    for (i, (s, y)) in [(0.9, 5.0), (0.8, 35.0), (0.05, 65.0)].iter().enumerate() {
        text += &format!("g{i},g{i}b,{s},1,0,{y}\n");
    }
    for i in 0..10 {
        text += &format!(
            "i{i},j{i},{},0,0,0\n",
            if i == 0 { 0.7 } else { 0.01 * i as f64 }
        );
    }
    std::fs::write(&scores, text).unwrap();
    let roc = ok_json(&["metrics", "roc", "--scores", p(&scores), "--far", "0.1"]);
    // at FAR 0.1 one imposter of ten may pass: the threshold lands above 0.09
    let t = roc[0]["threshold"].as_f64().unwrap();
    assert!(t > 0.09 && t <= 0.7, "{t}");
    assert_eq!(roc[0]["tar"].as_f64().unwrap(), 2.0 / 3.0);
    assert_eq!(roc[0]["fnmr"].as_f64().unwrap(), 1.0 - 2.0 / 3.0);
    let cov = ok_json(&[
        "metrics",
        "covariate",
        "--scores",
        p(&scores),
        "--far",
        "0.1",
    ]);
    let bins = &cov["rows"][0]["bins"];
    assert_eq!(bins[0]["tar"], 1.0);
    assert_eq!(bins[2]["tar"], 1.0);
    assert_eq!(bins[3]["tar"], 0.0);
    assert!(bins[1].is_null() && bins[4].is_null());
    assert!(
        !faceaug(&["metrics", "roc", "--scores", p(&scores), "--far", "0.01"])
            .status
            .success()
    );
}

#[test]
fn openset_and_mae() {
    let dir = tempfile::tempdir().unwrap();
    let gallery = dir.path().join("g.csv");
    let probes = dir.path().join("p.csv");
    std::fs::write(&gallery, "a,1,0\nb,0,1\n").unwrap();
    std::fs::write(&probes, "a,0.9,0.1\nb,0.6,0.4\nz,0.7,0.7\nq,-1,0\n").unwrap();
    let r = ok_json(&[
        "metrics",
        "openset",
        "--gallery",
        p(&gallery),
        "--probes",
        p(&probes),
        "--fpir",
        "0.5",
        "--similarity",
        "cosine",
    ]);
    assert_eq!(r["mated"], 2);
    assert_eq!(r["non_mated"], 2);
    assert_eq!(r["rank1"], 0.5);

    let values = dir.path().join("v.csv");
    std::fs::write(&values, "predicted,truth\n10,12\n20,17\n").unwrap();
    let m = ok_json(&["metrics", "mae", "--values", p(&values)]);
    assert_eq!(m["mae"], 2.5);
    assert_eq!(m["count"], 2);
}

#[test]
fn bad_input_exits_nonzero() {
    let o = faceaug(&[
        "augment",
        "--manifest",
        "/nonexistent/m.jsonl",
        "--out",
        "/tmp/x",
    ]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    assert!(!faceaug(&[
        "metrics",
        "openset",
        "--gallery",
        "a",
        "--probes",
        "b",
        "--similarity",
        "hamming"
    ])
    .status
    .success());
}
