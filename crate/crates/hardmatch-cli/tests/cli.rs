use std::path::Path;
use std::process::{Command, Output};

fn hardmatch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hardmatch")).args(args).output().expect("spawn hardmatch")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Point J^ℓ_0[0] at an Ext_0 coordinate of its own gadget, keeping the stored glue tables.
fn tamper(path: &Path) {
    let b = std::fs::read(path).unwrap();
    let hlen = u64::from_le_bytes(b[12..20].try_into().unwrap()) as usize;
    let mut header: serde_json::Value = serde_json::from_slice(&b[20..20 + hlen]).unwrap();
    let ell = (0..header["j"].as_array().unwrap().len())
        .find(|&l| header["layout"]["gadgets"][l]["ext"][0].as_array().is_some_and(|e| !e.is_empty()))
        .expect("a gadget with Ext_0");
    let ext = header["layout"]["gadgets"][ell]["ext"][0][0].clone();
    header["j"][ell][0] = ext;
    let h = serde_json::to_vec(&header).unwrap();
    let mut out = b[..12].to_vec();
    out.extend((h.len() as u64).to_le_bytes());
    out.extend(h);
    out.extend(&b[20 + hlen..]);
    std::fs::write(path, out).unwrap();
}

#[test]
fn sizes_on_fix_a_pass_with_table() {
    let o = hardmatch(&["verify", "--preset", "fix-a", "--suite", "sizes"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("|T^0_1| (enumeration): expected 32, got 32"), "{s}");
    assert!(s.contains("|S^0_0| (counting): expected 32, got 32"), "{s}");
    assert!(!s.contains("FAIL"));
}

#[test]
fn key_on_fix_a_alpha_has_no_violations() {
    let o = hardmatch(&["verify", "--preset", "fix-a-alpha", "--suite", "key"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("expected 0, got 0"));
}

#[test]
fn tampered_file_fails_glue_but_not_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("d.hm");
    let fs = f.to_str().unwrap();
    assert_eq!(hardmatch(&["gen", "--preset", "fix-d", "--seed", "4", "--out", fs]).status.code(), Some(0));
    assert_eq!(hardmatch(&["verify", "--instance", fs, "--suite", "sizes,glue"]).status.code(), Some(0));
    tamper(&f);
    let sizes = hardmatch(&["verify", "--instance", fs, "--suite", "sizes"]);
    assert_eq!(sizes.status.code(), Some(0), "{}", stdout(&sizes));
    let glue = hardmatch(&["verify", "--instance", fs, "--suite", "glue"]);
    assert_eq!(glue.status.code(), Some(1));
    let s = stdout(&glue);
    assert!(s.lines().any(|l| l.starts_with("FAIL [glue] Property q-k") && l.contains("∉ B̆")), "{s}");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(hardmatch(&["verify"]).status.code(), Some(2));
    assert_eq!(hardmatch(&["verify", "--preset", "fix-z"]).status.code(), Some(2));
    assert_eq!(hardmatch(&["verify", "--instance", "/no/such/file"]).status.code(), Some(2));
    assert_eq!(hardmatch(&["verify", "--preset", "fix-a", "--suite", "bogus"]).status.code(), Some(2));
    assert_eq!(hardmatch(&["run", "--preset", "fix-a", "--budget", "x"]).status.code(), Some(2));
    assert_eq!(hardmatch(&["bogus"]).status.code(), Some(2));
}

#[test]
fn run_csv_embeds_config_and_seed() {
    let o = hardmatch(&["run", "--preset", "fix-a", "--seed", "9", "--alg", "greedy,store-all", "--budget", "P,10"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    let mut lines = s.lines();
    let first = lines.next().unwrap();
    assert!(first.starts_with("# config=") && first.contains("\"seed\":9") && first.ends_with("seed=9"), "{first}");
    assert_eq!(lines.next().unwrap(), "alg,seed,K,L,n,budget,kept,m_alg,opt,ratio,cover_bound,special_kept,runtime_ms");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.split(',').nth(1) == Some("9")));
}

#[test]
fn run_is_reproducible() {
    let a = hardmatch(&["run", "--preset", "fix-a", "--seed", "3", "--alg", "uniform", "--budget", "8", "--format", "json"]);
    let b = hardmatch(&["run", "--preset", "fix-a", "--seed", "3", "--alg", "uniform", "--budget", "8", "--format", "json"]);
    let strip = |o: &Output| {
        let mut v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        for r in v["runs"].as_array_mut().unwrap() {
            r["runtime_ms"] = 0.into();
        }
        v
    };
    assert_eq!(strip(&a), strip(&b));
    assert_eq!(strip(&a)["seed"], 3);
}

#[test]
fn gen_then_load_gives_same_stream() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("a.hm");
    let e1 = dir.path().join("e1.txt");
    let e2 = dir.path().join("e2.txt");
    let fs = f.to_str().unwrap();
    assert!(hardmatch(&["gen", "--preset", "fix-a", "--seed", "2", "--out", fs]).status.success());
    assert!(hardmatch(&["export", "--instance", fs, "--edges", e1.to_str().unwrap()]).status.success());
    assert!(hardmatch(&["export", "--preset", "fix-a", "--seed", "2", "--edges", e2.to_str().unwrap()]).status.success());
    let t1 = std::fs::read_to_string(&e1).unwrap();
    assert_eq!(t1, std::fs::read_to_string(&e2).unwrap());
    assert!(t1.starts_with("p bipartite 64 32 64\n"), "{}", &t1[..40]);
}

#[test]
fn analytic_csv_columns() {
    let o = hardmatch(&["analytic", "--K", "2", "--L", "2"]);
    assert!(o.status.success());
    let s = stdout(&o);
    let mut r = csv::Reader::from_reader(s.as_bytes());
    let rec: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rec.len(), 1);
    assert_eq!(&rec[0][2], "1/2");
    assert_eq!(&rec[0][4], "1/4");
    assert_eq!(&rec[0][10], "1/2");
}

#[test]
fn fvec_json_is_valid_family() {
    let o = hardmatch(&["fvec", "--n", "64", "--eps", "1/2", "--size", "16", "--seed", "1"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let vecs = v["vectors"].as_array().unwrap();
    assert_eq!(vecs.len(), 16);
    assert!(vecs.iter().all(|x| x.as_array().unwrap().len() == 16));
}

#[test]
fn inline_config_and_params() {
    let o = hardmatch(&["params", "--config", r#"{"K":2,"L":1,"n":3,"slack":[2,1],"mode":"standalone"}"#]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["m"], "4");
    assert_eq!(v["W"], "2");
    assert_eq!(v["N"], "64");
}
