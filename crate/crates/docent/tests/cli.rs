use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use docent::files::{forest_to_toml, load_trace, registry_to_toml, stage_to_toml};
use docent_core::profile::{mentor1_forest, mentor1_registry, Stage};
use docent_core::RecordKind;

const TOUR: &str = include_str!("../../core/tests/corpus/tour.txt");

fn docent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_docent"))
        .args(args)
        .env_remove("DOCENT_LLM_ENDPOINT")
        .env_remove("DOCENT_LLM_MODEL")
        .env_remove("DOCENT_LLM_API_KEY")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn exhibit(dir: &Path) -> PathBuf {
    write(
        dir,
        "loom.txt",
        "The Jacquard loom\nIt was built in 1804 and read its patterns from chains of punched cards.\n\
         A single weaver could produce brocade that used to need a team.\n",
    )
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .map(|rd| rd.map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect())
        .unwrap_or_default();
    names.sort();
    names
}

#[test]
fn offline_generate_is_deterministic_and_valid() {
    let dir = tempfile::tempdir().unwrap();
    let input = exhibit(dir.path());
    let (a, b) = (dir.path().join("a.txt"), dir.path().join("b.txt"));
    for out in [&a, &b] {
        let run = docent(&["generate", s(&input), "--offline", "--seed", "4", "--length", "800", "-o", s(out)]);
        assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
        assert!(stdout(&run).contains("narrative:"));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert!(text.contains('<'));
    assert_eq!(code(&docent(&["validate", s(&a)])), 0);
}

#[test]
fn default_output_sits_next_to_the_exhibit() {
    let dir = tempfile::tempdir().unwrap();
    let input = exhibit(dir.path());
    assert_eq!(code(&docent(&["generate", s(&input), "--offline"])), 0);
    assert!(dir.path().join("loom.scenario.txt").exists());
}

#[test]
fn missing_provider_fails_without_touching_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let input = exhibit(dir.path());
    let cache = dir.path().join("cache");
    let out = dir.path().join("out.txt");
    let run = docent(&["generate", s(&input), "--cache", s(&cache), "-o", s(&out)]);
    assert_eq!(code(&run), 3);
    assert!(String::from_utf8_lossy(&run.stderr).contains("DOCENT_LLM_ENDPOINT"));
    assert!(listing(&cache).is_empty());
    assert!(!out.exists());
}

#[test]
fn unreachable_provider_falls_back_to_the_closest_cached_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let input = exhibit(dir.path());
    let cache = dir.path().join("cache");
    for (style, length) in [("formal", "1200"), ("humorous", "800")] {
        let out = dir.path().join(format!("{style}.txt"));
        let run = docent(&[
            "generate", s(&input), "--offline", "--cache", s(&cache), "--style", style, "--length", length,
            "--audience", "specialists", "-o", s(&out),
        ]);
        assert_eq!(code(&run), 0);
    }
    let before = listing(&cache);
    assert_eq!(
        before,
        [
            "index.json",
            "loom.basic.txt",
            "loom.formal.specialists.1200.txt",
            "loom.humorous.specialists.800.txt"
        ]
    );

    let out = dir.path().join("fallback.txt");
    let run = Command::new(env!("CARGO_BIN_EXE_docent"))
        .args([
            "generate", s(&input), "--cache", s(&cache), "--fallback", "--style", "humorous", "--length", "1200",
            "--audience", "specialists", "-o", s(&out),
        ])
        .env("DOCENT_LLM_ENDPOINT", "http://127.0.0.1:9/v1/chat/completions")
        .env("DOCENT_LLM_MODEL", "any")
        .output()
        .unwrap();
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    assert!(stdout(&run).contains("(800, humorous, specialists)"));
    assert_eq!(
        fs::read_to_string(&out).unwrap(),
        fs::read_to_string(dir.path().join("humorous.txt")).unwrap()
    );
    assert_eq!(listing(&cache), before);
}

#[test]
fn fallback_requires_a_cache() {
    let dir = tempfile::tempdir().unwrap();
    let input = exhibit(dir.path());
    assert_eq!(code(&docent(&["generate", s(&input), "--fallback"])), 2);
}

#[test]
fn fallback_to_the_basic_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let input = exhibit(dir.path());
    let cache = dir.path().join("cache");
    fs::create_dir(&cache).unwrap();
    fs::write(
        cache.join("index.json"),
        r#"{"version":1,"exhibits":{"loom":{"basic":"loom.basic.txt","generated":[]}}}"#,
    )
    .unwrap();
    fs::write(cache.join("loom.basic.txt"), "<facial:joy> Welcome to the loom.").unwrap();
    let out = dir.path().join("out.txt");
    let run = docent(&["generate", s(&input), "--cache", s(&cache), "--fallback", "-o", s(&out)]);
    assert_eq!(code(&run), 0);
    assert!(stdout(&run).contains("basic scenario"));
    assert_eq!(fs::read_to_string(&out).unwrap(), "<facial:joy> Welcome to the loom.");
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let clean = write(dir.path(), "clean.txt", TOUR);
    let run = docent(&["validate", s(&clean)]);
    assert_eq!(code(&run), 0);
    assert!(stdout(&run).starts_with("tags: 11 kept, 0 dropped"));

    let dirty = write(dir.path(), "dirty.txt", "Hello <dance:left> and <facial:moonwalk> there.");
    let run = docent(&["validate", s(&dirty)]);
    assert_eq!(code(&run), 1);
    assert!(stdout(&run).contains("2 dropped"));

    let broken = write(dir.path(), "broken.txt", "Hello <facial:joy");
    assert_eq!(code(&docent(&["validate", s(&broken)])), 1);
    assert_eq!(code(&docent(&["validate", s(&dir.path().join("missing.txt"))])), 2);
}

#[test]
fn simulate_the_tour_listing() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(dir.path(), "tour.txt", TOUR);
    let trace = dir.path().join("tour.jsonl");
    let run = docent(&["simulate", s(&scenario), "--trace", s(&trace)]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let records = load_trace(&trace).unwrap();
    assert_eq!(records.iter().filter(|r| r.kind == RecordKind::Dispatched).count(), 11);
    assert!(stdout(&run).contains("errors             0"));

    let summary = docent(&["trace", "summary", s(&trace)]);
    assert_eq!(code(&summary), 0);
    assert!(stdout(&summary).contains("dispatched         11"));
}

#[test]
fn all_unknown_tags_still_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(dir.path(), "junk.txt", "<dance:left> Hello. <sing:loud> Goodbye. <fly:away> Done.");
    let trace = dir.path().join("junk.jsonl");
    let run = docent(&["simulate", s(&scenario), "--trace", s(&trace)]);
    assert_eq!(code(&run), 0);
    assert!(stdout(&run).starts_with("tags: 0 kept, 3 dropped"));
    let records = load_trace(&trace).unwrap();
    assert!(records.iter().all(|r| r.kind != RecordKind::Dispatched));
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(dir.path(), "tour.txt", TOUR);
    let cyclic = forest_to_toml(&mentor1_forest())
        .replacen("id = \"android\"\n", "id = \"android\"\nparent = \"carriage\"\n", 1);
    let forest = write(dir.path(), "cyclic.toml", &cyclic);
    let run = docent(&["simulate", s(&scenario), "--forest", s(&forest)]);
    assert_eq!(code(&run), 2);
    assert!(String::from_utf8_lossy(&run.stderr).contains("cycle"));

    let bad_toml = write(dir.path(), "bad.toml", "[[action]\n");
    assert_eq!(code(&docent(&["simulate", s(&scenario), "--registry", s(&bad_toml)])), 2);
    assert_eq!(code(&docent(&["simulate", s(&scenario), "--tick", "0"])), 2);
}

#[test]
fn strict_mode_changes_the_trace() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(dir.path(), "brows.txt", "<brows:raised> Look at this. <eyes:joy> Lovely.");
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    assert_eq!(code(&docent(&["simulate", s(&scenario), "--trace", s(&a)])), 0);
    assert_eq!(code(&docent(&["simulate", s(&scenario), "--strict-alg1", "--trace", s(&b)])), 0);
    let executed = |p: &Path| {
        load_trace(p)
            .unwrap()
            .iter()
            .filter(|r| r.kind == RecordKind::Executed && (r.agent == "brows" || r.agent == "eyes"))
            .count()
    };
    assert_eq!((executed(&a), executed(&b)), (2, 0));

    let diff = docent(&["trace", "diff", s(&a), s(&b)]);
    assert_eq!(code(&diff), 1);
    assert!(stdout(&diff).lines().any(|l| l.starts_with("- ") && l.contains("brows executed")));
    let same = docent(&["trace", "diff", s(&a), s(&a)]);
    assert_eq!((code(&same), stdout(&same).trim()), (0, "identical"));
}

#[test]
fn shipped_profile_matches_the_builtin() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../profiles/mentor1");
    let read = |name: &str| fs::read_to_string(root.join(name)).unwrap();
    assert_eq!(read("registry.toml"), registry_to_toml(&mentor1_registry()));
    assert_eq!(read("forest.toml"), forest_to_toml(&mentor1_forest()));
    assert_eq!(read("stage.toml"), stage_to_toml(&Stage::default()));
    assert_eq!(stdout(&docent(&["registry", "dump"])), read("registry.toml"));

    let list = stdout(&docent(&["registry", "list"]));
    assert_eq!(list.lines().count(), mentor1_registry().iter().count());
    assert!(list.lines().any(|l| l.starts_with("anim:limb;name;[repeat]")));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&docent(&["generate", "x.txt", "--style", "poetic"])), 2);
    assert_eq!(code(&docent(&["bogus"])), 2);
}
