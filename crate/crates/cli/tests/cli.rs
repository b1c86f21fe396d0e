use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn geom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geom")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

fn report(path: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn invariant<'a>(r: &'a Value, name: &str) -> &'a Value {
    r["invariants"].as_array().unwrap().iter().find(|i| i["name"] == name).unwrap_or_else(|| panic!("no {name}"))
}

#[test]
fn list_shows_builtins_and_user_entries() {
    let o = geom(&["list"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let names: Vec<&str> = v.as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
    for n in ["minkowski4", "kapadia", "wuenschmann_cone", "frw_like"] {
        assert!(names.contains(&n));
    }
    assert!(v.as_array().unwrap().iter().all(|e| e["provenance"] == "builtin"));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.toml", "[geometry]\nname = \"flat3\"\nn = 3\nk = 2\nexpression = \"(v1^2 - v2^2 - v3^2)/2\"\n");
    let o = geom(&["list", "--config", &cfg, "--format", "csv"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("flat3,3,2,") && l.contains(",user,")), "{text}");
}

#[test]
fn invariants_on_minkowski_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json").display().to_string();
    let o = geom(&["invariants", "--geometry", "minkowski4", "--points", "5", "--out", &out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(&out);
    assert_eq!(r["verdict"], "pass");
    assert_eq!(r["records"].as_array().unwrap().len(), 5);
    for i in r["invariants"].as_array().unwrap() {
        assert!(i["max"].as_f64().unwrap() <= 1e-12, "{i}");
    }
}

#[test]
fn kapadia_geodesics_satisfy_the_cone_formula() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json").display().to_string();
    let o = geom(&["geodesic", "--geometry", "kapadia", "--points", "50", "--seed", "3", "--out", &out]);
    assert_eq!(code(&o), 0);
    let r = report(&out);
    let inv = invariant(&r, "kapadia_cone");
    assert_eq!(inv["count"], 50);
    assert!(inv["max"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn conformal_check_on_minkowski() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "operation = \"conformal-check\"\n[geometry]\nbuiltin = \"minkowski4\"\n[conformal]\nexpression = \"sqrt(v1^2 + v2^2 + v3^2 + v4^2)\"\nq = 1\n[points]\ncount = 6\n",
    );
    let out = dir.path().join("r.json").display().to_string();
    let o = geom(&["conformal-check", "--config", &cfg, "--out", &out]);
    assert_eq!(code(&o), 0);
    let r = report(&out);
    assert!(invariant(&r, "weyl_deviation")["max"].as_f64().unwrap() <= 1e-7);
    assert!(invariant(&r, "x_law_printed")["max"].as_f64().unwrap() <= 1e-6);
    assert!(invariant(&r, "x_law_corrected")["max"].as_f64().unwrap() <= 1e-6);
    assert_eq!(invariant(&r, "x_law_printed")["gating"], false);
}

#[test]
fn identical_config_gives_identical_records() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| -> Value {
        let out = dir.path().join(name).display().to_string();
        let o = geom(&["weyl", "--geometry", "kapadia", "--points", "4", "--seed", "8", "--out", &out]);
        assert_eq!(code(&o), 0);
        let text = std::fs::read_to_string(&out).unwrap();
        let mut v: Value = serde_json::from_str(&text).unwrap();
        v["timing"] = Value::Null;
        v["config"]["output"] = Value::Null;
        v
    };
    let (a, b) = (run("a.json"), run("b.json"));
    assert_eq!(a["records"].to_string(), b["records"].to_string());
    assert_eq!(a, b);
}

#[test]
fn csv_and_json_carry_the_same_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let js = dir.path().join("r.json").display().to_string();
    let cs = dir.path().join("r.csv").display().to_string();
    let args = ["raychaudhuri", "--geometry", "frw_like", "--points", "1", "--seed", "2"];
    assert_eq!(code(&geom(&[&args[..], &["--out", &js]].concat())), 0);
    assert_eq!(code(&geom(&[&args[..], &["--out", &cs, "--format", "csv"]].concat())), 0);
    let r = report(&js);
    let text = std::fs::read_to_string(&cs).unwrap();
    let (records, table) = text.split_once("\n# congruence\n").expect("congruence section");
    let mut rd = csv::Reader::from_reader(records.as_bytes());
    let header = rd.headers().unwrap().clone();
    let row = rd.records().next().unwrap().unwrap();
    let col = |name: &str| row[header.iter().position(|h| h == name).unwrap()].parse::<f64>().unwrap();
    let rec = &r["records"][0];
    for key in ["max_residual", "max_rho", "t_last"] {
        let a = rec[key].as_f64().unwrap();
        assert!((col(key) - a).abs() <= 1e-15 * a.abs().max(1e-300), "{key}");
    }
    assert_eq!(col("vertex.x_1"), rec["vertex"]["x"][1].as_f64().unwrap());
    let mut td = csv::Reader::from_reader(table.as_bytes());
    let th = td.headers().unwrap().clone();
    let states = r["congruence"].as_array().unwrap();
    let mut n = 0;
    for (row, st) in td.records().zip(states) {
        let row = row.unwrap();
        for (h, cell) in th.iter().zip(row.iter()) {
            match st[h].as_f64() {
                Some(x) => assert!((cell.parse::<f64>().unwrap() - x).abs() <= 1e-15 * x.abs(), "{h}"),
                None => assert!(cell.is_empty() && st[h].is_null(), "{h}"),
            }
        }
        n += 1;
    }
    assert_eq!(n, states.len());
}

#[test]
fn exit_statuses() {
    let dir = tempfile::tempdir().unwrap();
    // config parse error, with position
    let bad = write(dir.path(), "bad.toml", "[points]\ncount = \"many\"\n");
    let o = geom(&["invariants", "--config", &bad]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    assert_eq!(code(&geom(&["weyl", "--geometry", "no_such"])), 2);
    assert_eq!(code(&geom(&["conformal-check", "--geometry", "minkowski4"])), 2);
    assert_eq!(code(&geom(&["weyl", "--geometry", "kapadia", "--tol", "-1"])), 2);

    // invariant failure: report still written
    let strict = write(dir.path(), "s.toml", "[geometry]\nbuiltin = \"kapadia\"\n[tolerances]\nkapadia_cone = 0.0\n");
    let out = dir.path().join("f.json").display().to_string();
    let o = geom(&["geodesic", "--config", &strict, "--points", "5", "--out", &out]);
    assert_eq!(code(&o), 1);
    let r = report(&out);
    assert_eq!(r["verdict"], "fail");
    assert_eq!(invariant(&r, "kapadia_cone")["pass"], false);
    assert_eq!(r["records"].as_array().unwrap().len(), 5);

    // runtime error: off-domain explicit point is recorded
    let off = write(
        dir.path(),
        "o.toml",
        "[geometry]\nbuiltin = \"kapadia\"\n[[points.explicit]]\nx = [1.0, 0.0, 0.0, 0.0]\nv = [1.0, 0.0, 0.0, 0.0]\n[[points.explicit]]\nx = [-1.0, 0.0, 0.0, 0.0]\nv = [1.0, 1.0, 0.0, 0.0]\n",
    );
    let out = dir.path().join("e.json").display().to_string();
    let o = geom(&["eval", "--config", &off, "--out", &out]);
    assert_eq!(code(&o), 3);
    let r = report(&out);
    assert_eq!(r["errors"][0]["index"], 1);
    assert_eq!(r["records"].as_array().unwrap().len(), 1);
}
