use spatial_cli::render::{render_svg, RenderSpec};
use spatial_core::blobs::frontier_e;
use spatial_core::fields::{Field, FieldType};
use spatial_core::lang::var;
use spatial_core::runtime::{interpret, Configuration};
use spatial_core::voronoi::three_seed_fixture;
use spatial_core::SimplicialMedium;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn spatial(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spatial")).args(args).output().unwrap()
}

fn stdout_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Compares against a committed golden file; `UPDATE_GOLDEN=1` rewrites it.
fn golden(name: &str, got: &str) {
    let path = golden_dir().join(name);
    if std::env::var("UPDATE_GOLDEN").is_ok_and(|v| v == "1") {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, got).unwrap();
        return;
    }
    let want = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(want == got, "{} differs from the rendered output", path.display());
}

fn write_seeds(dir: &Path, seeds: &[Vec<u32>]) -> String {
    let p = dir.join("seeds.json");
    std::fs::write(&p, serde_json::to_string(seeds).unwrap()).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn empty_render_is_outline_only() {
    let m = SimplicialMedium::hex_torus(4, 4).unwrap();
    let svg = render_svg(&RenderSpec {
        medium: &m,
        fields: vec![(Field::zeros(&m, FieldType::bool_v()), "red".into())],
        transfer: false,
    })
    .unwrap();
    assert!(!svg.contains(r#"fill="red""#));
    // 16 hexagons, 48 rectangles, 32 triangles
    assert_eq!(svg.matches("<polygon").count(), 96);
    golden("empty_hex4.svg", &svg);
}

#[test]
fn blob_and_frontier_render() {
    let m = SimplicialMedium::hex_torus(6, 6).unwrap();
    let mut blob = vec![14];
    blob.extend_from_slice(m.neighbors(14));
    let x = Field::from_points(&m, FieldType::bool_v(), &blob).unwrap();
    let fe = interpret(&frontier_e(&var("x")), &Configuration::single("x", x.clone()), &m);
    assert_eq!(fe.popcount(), 18);
    let svg = render_svg(&RenderSpec {
        medium: &m,
        fields: vec![(x, "#4f81bd".into()), (fe, "#c0504d".into())],
        transfer: true,
    })
    .unwrap();
    assert_eq!(svg.matches(r##"fill="#4f81bd""##).count(), 7);
    assert_eq!(svg.matches(r##"fill="#c0504d""##).count(), 18);
    golden("blob_frontier_hex6.svg", &svg);
}

#[test]
fn isotropic_render_skips_the_outer_vertex() {
    let m = SimplicialMedium::isotropic(30, 2, 5).unwrap();
    let svg = render_svg(&RenderSpec {
        medium: &m,
        fields: vec![],
        transfer: false,
    })
    .unwrap();
    let o = m.outer_vertex().unwrap();
    let outer_edges = m.vertex_edges(o).len();
    let outer_faces = m.vertex_faces(o).len();
    let cells = m.num_vertices() - 1 + m.num_edges() - outer_edges + m.num_faces() - outer_faces;
    assert_eq!(svg.matches("<polygon").count(), cells);
}

#[test]
fn voronoi_frames_match_golden_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let seeds = write_seeds(dir.path(), &[vec![0], vec![4 * 8 + 4]]);
    let frames = dir.path().join("frames");
    let o = spatial(&[
        "--json",
        "voronoi",
        "--medium",
        "hex:8x8",
        "--seeds",
        &seeds,
        "--frames",
        frames.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let t_c = stdout_json(&o)["t_c"].as_u64().unwrap();
    let mut names: Vec<String> = std::fs::read_dir(&frames)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len() as u64, t_c + 1);
    for n in names {
        golden(&format!("vd_frames/{n}"), &std::fs::read_to_string(frames.join(&n)).unwrap());
    }
}

#[test]
fn compile_report_for_voronoi() {
    let o = spatial(&["compile", "--circuit", "voronoi", "--medium", "hex:16x16", "--report"]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert_eq!(v["gates_per_tile"].as_f64(), Some(55.0));
    assert_eq!(v["radius"].as_u64(), Some(4));
    assert_eq!(v["gates_total"].as_u64(), Some(55 * 256));
}

#[test]
fn compile_expression_with_netlist() {
    let o = spatial(&[
        "compile",
        "--expr",
        "frontierE(x)",
        "--medium",
        "hex:6x6",
        "--report",
        "--netlist",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert_eq!(v["gates_per_tile"].as_f64(), Some(3.0));
    assert_eq!(v["netlist"].as_array().unwrap().len(), 3);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(spatial(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(spatial(&["compile", "--circuit", "voronoi", "--medium", "hex:3"]).status.code(), Some(2));
    assert_eq!(spatial(&["compile", "--expr", "and(x"]).status.code(), Some(2));
    assert_eq!(spatial(&["compile", "--circuit", "nope"]).status.code(), Some(2));
    assert_eq!(spatial(&["voronoi", "--skip-prob", "1.5"]).status.code(), Some(2));
}

#[test]
fn voronoi_fixture_matches_oracle() {
    let m = SimplicialMedium::hex_torus(16, 16).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let seeds = write_seeds(dir.path(), &three_seed_fixture(&m, 8 * 16 + 8, 5));
    let o = spatial(&["--json", "voronoi", "--medium", "hex:16x16", "--seeds", &seeds, "--compare-oracle"]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert_eq!(v["oracle"]["exact"], true);
    assert_eq!(v["multi_vertices"], serde_json::json!([8 * 16 + 8]));
}

#[test]
fn random_seed_exit_code_follows_the_comparison() {
    for seed in ["1", "2", "3"] {
        let o = spatial(&["--json", "--seed", seed, "voronoi", "--medium", "hex:16x16", "--compare-oracle"]);
        let v = stdout_json(&o);
        let ok = v["oracle"]["exact"] == true && v["blobs_conserved"] == true;
        assert_eq!(o.status.code(), Some(if ok { 0 } else { 1 }));
    }
}

#[test]
fn adjacent_seeds_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let seeds = write_seeds(dir.path(), &[vec![0], vec![1]]);
    assert_eq!(spatial(&["voronoi", "--medium", "hex:8x8", "--seeds", &seeds]).status.code(), Some(2));
}

#[test]
fn traces_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let t = dir.path().join(name);
        let o = spatial(&[
            "--seed",
            "9",
            "run",
            "--circuit",
            "growth",
            "--medium",
            "iso:60",
            "--skip-prob",
            "0.3",
            "--trace",
            t.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&t)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        files
    };
    let a = run("a");
    assert_eq!(a, run("b"));
    let manifest: serde_json::Value =
        serde_json::from_slice(&a.iter().find(|f| f.0 == "manifest.json").unwrap().1).unwrap();
    let t_c = manifest["t_c"].as_u64().unwrap();
    assert_eq!(a.len() as u64, t_c + 2);
    assert_eq!(manifest["seed"], 9);
    assert_eq!(manifest["engine"], "gates");
}

#[test]
fn render_from_trace_dump() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("trace");
    let seeds = write_seeds(dir.path(), &[vec![0], vec![27]]);
    let o = spatial(&["voronoi", "--medium", "hex:6x6", "--seeds", &seeds, "--trace", t.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let dump = t.join("t00001_x.field");
    let svg = dir.path().join("out.svg");
    let field = format!("{}=#228833", dump.display());
    let args = ["render", "--medium", "hex:6x6", "--field", &field, "--out", svg.to_str().unwrap()];
    assert_eq!(spatial(&args).status.code(), Some(0));
    let text = std::fs::read_to_string(&svg).unwrap();
    let (_, x) = Field::load(&std::fs::read(&dump).unwrap()).unwrap();
    assert!(x.popcount() > 2);
    assert_eq!(text.matches(r##"fill="#228833""##).count(), x.popcount());
    // dumps are tied to the medium they were taken on
    let other = ["render", "--medium", "hex:8x8", "--field", &field];
    assert_eq!(spatial(&other).status.code(), Some(1));
}

#[test]
fn medium_gen_and_validate() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.json");
    let o = spatial(&["--seed", "4", "medium", "gen", "--medium", "iso:50", "--out", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let o = spatial(&["--json", "medium", "validate", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout_json(&o)["passed"], true);
    // the generated file also works as a medium argument
    let o = spatial(&["compile", "--circuit", "growth", "--medium", p.to_str().unwrap(), "--report"]);
    assert_eq!(o.status.code(), Some(0));

    let mut doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    doc["faces"][0] = serde_json::json!([0, 0, 1]);
    std::fs::write(&p, doc.to_string()).unwrap();
    let o = spatial(&["--json", "medium", "validate", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stdout_json(&o)["passed"], false);
}
