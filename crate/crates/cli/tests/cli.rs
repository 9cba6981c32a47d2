use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const SCENE: &str = r#"{
  "mesh": {"primitive": "sphere", "subdivisions": 12},
  "materials": {"albedo": [0.7, 0.5, 0.3], "metallic": 0.2, "roughness": 0.4, "resolution": [4, 2]},
  "lights": {
    "environment": {"constant": [0.2, 0.25, 0.3]},
    "directional": [{"direction": [0.3, 1.0, 0.6], "radiance": [2.5, 2.5, 2.5]}],
    "point": [{"position": [-2.0, 1.5, 2.5], "intensity": [8, 8, 8]}]
  },
  "orbit": {"azimuths": 3, "elevations": [20], "radius": 2.8, "resolution": 20},
  "samples": {"rgb": 8, "specular": 8},
  "seed": 5
}"#;

fn pbrforge(args: &[&str], threads: Option<usize>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pbrforge"));
    cmd.args(args).env("RUST_LOG", "warn");
    match threads {
        Some(n) => cmd.env("PBRFORGE_THREADS", n.to_string()),
        None => cmd.env_remove("PBRFORGE_THREADS"),
    };
    cmd.output().expect("spawn pbrforge")
}

fn ok(args: &[&str]) -> Output {
    let out = pbrforge(args, None);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn scene(dir: &Path) -> PathBuf {
    let p = dir.join("scene.json");
    fs::write(&p, SCENE).unwrap();
    p
}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().into_string().unwrap(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn unknown_subcommand_prints_usage_and_exits_1() {
    let out = pbrforge(&["frobnicate"], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    let out = pbrforge(&["render", "--no-such-flag"], None);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_scene_reports_the_path() {
    let out = pbrforge(
        &[
            "render",
            "--scene",
            "/nonexistent/scene.json",
            "--out",
            "/tmp/unused",
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/scene.json"));
}

#[test]
fn malformed_inputs_exit_1() {
    let t = tempfile::tempdir().unwrap();
    let bad = t.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    let out = pbrforge(
        &[
            "render",
            "--scene",
            s(&bad),
            "--out",
            s(&t.path().join("o")),
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(1));
    let sc = scene(t.path());
    let out = pbrforge(
        &[
            "render",
            "--scene",
            s(&sc),
            "--channels",
            "rgb,bogus",
            "--out",
            s(&t.path().join("o")),
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(1));
    let out = pbrforge(
        &["render", "--scene", s(&sc), "--out", s(&t.path().join("o"))],
        Some(0),
    )
    .status;
    assert!(out.success());
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pbrforge"));
    let out = cmd
        .args(["render", "--scene", s(&sc), "--out", s(&t.path().join("o"))])
        .env("PBRFORGE_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn orbit_writes_21_views() {
    let t = tempfile::tempdir().unwrap();
    let sc = scene(t.path());
    let out = t.path().join("orbit");
    ok(&[
        "orbit",
        "--scene",
        s(&sc),
        "--azimuths",
        "7",
        "--elevations",
        "30,0,-30",
        "--resolution",
        "8",
        "--channels",
        "rgb,mask",
        "--out",
        s(&out),
    ]);
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["views"].as_array().unwrap().len(), 21);
    assert_eq!(m["config"]["orbit"]["azimuths"], 7);
    assert!(m["config"].get("threads").is_none());
    for i in 0..21 {
        assert!(out.join(format!("view_{i:03}_rgb.pbrf")).exists());
    }
}

#[test]
fn render_is_byte_identical_across_runs_and_thread_counts() {
    let t = tempfile::tempdir().unwrap();
    let sc = scene(t.path());
    let run = |name: &str, threads| {
        let out = t.path().join(name);
        let o = pbrforge(
            &[
                "render",
                "--scene",
                s(&sc),
                "--seed",
                "42",
                "--out",
                s(&out),
            ],
            threads,
        );
        assert!(o.status.success());
        dir_bytes(&out)
    };
    let a = run("a", Some(1));
    assert_eq!(a, run("b", Some(1)));
    assert_eq!(a, run("c", Some(3)));
    let m: Value = serde_json::from_slice(&a["manifest.json"]).unwrap();
    assert_eq!(m["seed"], 42);
    assert_eq!(m["config"]["samples"]["rgb"], 8);
}

#[test]
fn recover_is_byte_identical_and_reports_errors() {
    let t = tempfile::tempdir().unwrap();
    let sc = scene(t.path());
    let obs = t.path().join("obs");
    ok(&["render", "--scene", s(&sc), "--out", s(&obs)]);
    let manifest = obs.join("manifest.json");
    let run = |name: &str, threads| {
        let out = t.path().join(name);
        let o = pbrforge(
            &[
                "recover",
                "--scene",
                s(&sc),
                "--obs",
                s(&manifest),
                "--steps",
                "60",
                "--env-samples",
                "4",
                "--gt-scene",
                "--out",
                s(&out),
            ],
            threads,
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        dir_bytes(&out)
    };
    let a = run("a", Some(1));
    assert_eq!(a, run("b", Some(1)));
    assert_eq!(a, run("c", Some(4)));
    for f in [
        "albedo.pbrf",
        "metallic.pbrf",
        "roughness.pbrf",
        "mro.pbrf",
        "report.json",
    ] {
        assert!(a.contains_key(f), "{f}");
    }
    let r: Value = serde_json::from_slice(&a["report.json"]).unwrap();
    assert_eq!(r["trace"].as_array().unwrap().len(), 61);
    assert!(r["final_loss"].as_f64().unwrap() < r["initial_loss"].as_f64().unwrap());
    assert!(r["per_channel_error"]["albedo_max"].is_array());
    assert_eq!(r["stochastic"], true);
    assert!(r["coverage_fraction"].as_f64().unwrap() > 0.0);
}

#[test]
fn recover_rejects_bad_texture_size() {
    let t = tempfile::tempdir().unwrap();
    let sc = scene(t.path());
    let obs = t.path().join("obs");
    ok(&[
        "render",
        "--scene",
        s(&sc),
        "--channels",
        "rgb",
        "--out",
        s(&obs),
    ]);
    let out = pbrforge(
        &[
            "recover",
            "--scene",
            s(&sc),
            "--obs",
            s(&obs.join("manifest.json")),
            "--tex-size",
            "4by2",
            "--out",
            s(&t.path().join("x")),
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn self_comparisons_score_perfectly() {
    let t = tempfile::tempdir().unwrap();
    let sc = scene(t.path());
    let obs = t.path().join("obs");
    ok(&["render", "--scene", s(&sc), "--out", s(&obs)]);
    let m = obs.join("manifest.json");
    let pbr = t.path().join("pbr.json");
    ok(&["eval-pbr", "--pred", s(&m), "--gt", s(&m), "--out", s(&pbr)]);
    let r = json(&pbr);
    for c in ["rgb", "albedo", "mro", "speclight", "mask"] {
        assert_eq!(r["channels"][c]["psnr"], "inf", "{c}");
        assert_eq!(r["channels"][c]["mse"], 0.0);
    }

    let grid = t.path().join("s.pbrs");
    let mesh = t.path().join("s.obj");
    ok(&[
        "sdf",
        "--sphere",
        "1",
        "--resolution",
        "24",
        "--out",
        s(&grid),
    ]);
    ok(&[
        "extract",
        "--sdf",
        s(&grid),
        "--iso",
        "0",
        "--out",
        s(&mesh),
    ]);
    let geom = t.path().join("geom.json");
    ok(&[
        "eval-geom",
        "--pred",
        s(&mesh),
        "--gt",
        s(&mesh),
        "--samples",
        "3000",
        "--taus",
        "0.1,0.2,0.5",
        "--out",
        s(&geom),
    ]);
    let r = json(&geom);
    assert_eq!(r["geometry"]["cd"], 0.0);
    for tau in ["0.1", "0.2", "0.5"] {
        assert_eq!(r["geometry"]["fscore"][tau], 1.0);
    }
    assert_eq!(r["geometry"]["sample_count"], 3000);
}

#[test]
fn extracted_sphere_is_closed() {
    let t = tempfile::tempdir().unwrap();
    let grid = t.path().join("g.pbrs");
    let mesh = t.path().join("m.obj");
    ok(&[
        "sdf",
        "--sphere",
        "0.8",
        "--resolution",
        "20",
        "--extent",
        "1.2",
        "--out",
        s(&grid),
    ]);
    ok(&["extract", "--sdf", s(&grid), "--out", s(&mesh)]);
    let m = pbrforge_core::TriangleMesh::load_obj(&mesh).unwrap();
    assert!(m.triangle_count() > 100);
    assert!(pbrforge_core::meshing::mesh_is_closed(&m));
    let out = pbrforge(
        &["sdf", "--sphere", "1", "--cube", "1", "--out", s(&grid)],
        None,
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn mro_pack_and_unpack_round_trip() {
    let t = tempfile::tempdir().unwrap();
    let sc = scene(t.path());
    let obs = t.path().join("obs");
    ok(&[
        "render",
        "--scene",
        s(&sc),
        "--channels",
        "metallic,roughness,mro",
        "--out",
        s(&obs),
    ]);
    let packed = t.path().join("mro.pbrf");
    ok(&[
        "pack-mro",
        "--metallic",
        s(&obs.join("view_000_metallic.pbrf")),
        "--roughness",
        s(&obs.join("view_000_roughness.pbrf")),
        "--out",
        s(&packed),
    ]);
    assert_eq!(
        fs::read(&packed).unwrap(),
        fs::read(obs.join("view_000_mro.pbrf")).unwrap()
    );
    let (m, r) = (t.path().join("m.pbrf"), t.path().join("r.pbrf"));
    ok(&[
        "unpack-mro",
        "--mro",
        s(&packed),
        "--metallic",
        s(&m),
        "--roughness",
        s(&r),
    ]);
    assert_eq!(
        fs::read(&m).unwrap(),
        fs::read(obs.join("view_000_metallic.pbrf")).unwrap()
    );
    assert_eq!(
        fs::read(&r).unwrap(),
        fs::read(obs.join("view_000_roughness.pbrf")).unwrap()
    );
}

/// Validates JSON outputs against the published schemas with Python's
/// `jsonschema` package when it is installed.
#[test]
fn outputs_match_published_schemas() {
    let probe = Command::new("python3")
        .args(["-c", "import jsonschema"])
        .output();
    if !probe.map(|o| o.status.success()).unwrap_or(false) {
        eprintln!("python3 with jsonschema not found; schema validation skipped");
        return;
    }
    let t = tempfile::tempdir().unwrap();
    let sc = scene(t.path());
    let obs = t.path().join("obs");
    ok(&["render", "--scene", s(&sc), "--out", s(&obs)]);
    let m = obs.join("manifest.json");
    let tex = t.path().join("tex");
    ok(&[
        "recover",
        "--scene",
        s(&sc),
        "--obs",
        s(&m),
        "--steps",
        "5",
        "--env-samples",
        "2",
        "--out",
        s(&tex),
    ]);
    let pbr = t.path().join("pbr.json");
    ok(&[
        "eval-pbr",
        "--pred",
        s(&m),
        "--gt",
        s(&m),
        "--object-id",
        "sphere",
        "--out",
        s(&pbr),
    ]);
    let mesh = t.path().join("cube.obj");
    fs::write(
        &mesh,
        pbrforge_core::scene::primitive_cube().to_obj_string(),
    )
    .unwrap();
    let geom = t.path().join("geom.json");
    ok(&[
        "eval-geom",
        "--pred",
        s(&mesh),
        "--gt",
        s(&mesh),
        "--samples",
        "500",
        "--out",
        s(&geom),
    ]);

    let schemas = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas");
    let pairs = [
        ("manifest", m),
        ("recover-report", tex.join("report.json")),
        ("eval-report", pbr),
        ("eval-report", geom),
    ];
    let script = "import json, sys, jsonschema\n\
                  schema = json.load(open(sys.argv[1]))\n\
                  jsonschema.Draft202012Validator.check_schema(schema)\n\
                  jsonschema.validate(json.load(open(sys.argv[2])), schema, cls=jsonschema.Draft202012Validator)\n";
    for (name, doc) in pairs {
        let schema = schemas.join(format!("{name}.schema.json"));
        let out = Command::new("python3")
            .args(["-c", script, s(&schema), s(&doc)])
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{name}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}
