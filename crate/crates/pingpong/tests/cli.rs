//! Exit-code and output contract of the command-line interface.

use pingpong::cli::run;

fn fixture_path(name: &str) -> String {
    format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn check_proper_fixture_exits_zero() {
    assert_eq!(run(["pingpong", "check", &fixture_path("farey.scheme")]), 0);
}

#[test]
fn check_broken_fixture_exits_one() {
    assert_eq!(run(["pingpong", "check", &fixture_path("farey-broken.scheme")]), 1);
}

#[test]
fn every_shipped_fixture_parses_and_checks() {
    for name in pingpong::fixtures::FIXTURE_NAMES {
        let code = run(["pingpong", "check", &fixture_path(&format!("{name}.scheme"))]);
        let want = if *name == "farey-broken" { 1 } else { 0 };
        assert_eq!(code, want, "{name}: exit code {code}, want {want}");
    }
}

#[test]
fn fixtures_list_names_at_least_ten() {
    assert_eq!(run(["pingpong", "fixtures", "list"]), 0);
    assert!(pingpong::fixtures::FIXTURE_NAMES.len() >= 10);
}

#[test]
fn missing_file_is_a_usage_error() {
    assert_eq!(run(["pingpong", "check", "/nonexistent/nowhere.scheme"]), 2);
}

#[test]
fn render_is_byte_deterministic() {
    let dir = std::env::temp_dir().join("pingpong-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let out1 = dir.join("a.svg");
    let out2 = dir.join("b.svg");
    for out in [&out1, &out2] {
        assert_eq!(
            run([
                "pingpong",
                "render",
                &fixture_path("mmrt.scheme"),
                "--out",
                out.to_str().unwrap(),
            ]),
            0
        );
    }
    let a = std::fs::read(&out1).unwrap();
    let b = std::fs::read(&out2).unwrap();
    assert!(!a.is_empty() && a == b);
}
