use infosieve_web::{explore_code, oracle, train_demo};
use serde_json::Value;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn explorer_hardens_until_the_mask_drops() {
    let v = parse(explore_code("0.9, -0.8, 0.7, 0.6", "0.9 0.8 0.2 0.9", 2.0));
    assert_eq!(v["hard"], "10");
    assert_eq!(v["eff_length"], 4);
    // 0.95·0.9/2 + 0.1·0.8/4 + 0.85·0.2/8 + 0.8·0.9/16
    let want = 0.95 * 0.9 / 2.0 + 0.1 * 0.8 / 4.0 + 0.85 * 0.2 / 8.0 + 0.8 * 0.9 / 16.0;
    assert!((v["positional_value"].as_f64().unwrap() - want).abs() < 1e-12);
    let len = 0.9 * 2.0 + 0.8 * 4.0 + 0.2 * 8.0 + 0.9 * 16.0;
    assert!((v["length_loss"].as_f64().unwrap() - len).abs() < 1e-9);
}

#[test]
fn explorer_reports_bad_input() {
    assert!(parse(explore_code("0.5,x", "1,1", 2.0))["error"].is_string());
    assert!(parse(explore_code("0.5", "1,1", 2.0))["error"].is_string());
    assert!(parse(explore_code("1.5", "1", 2.0))["error"].is_string());
    assert!(parse(explore_code("0.5", "1", 3.0))["error"].is_string());
    assert!(parse(explore_code("", "", 2.0))["error"].is_string());
}

#[test]
fn oracle_accepts_both_label_formats() {
    let a = parse(oracle("AABB"));
    let b = parse(oracle("cat, cat, dog, dog"));
    for v in [&a, &b] {
        assert_eq!(v["min_total"], 8);
        assert_eq!(v["valid"], true);
        assert_eq!(v["samples"].as_array().unwrap().len(), 4);
        assert_eq!(v["prefixes"].as_array().unwrap().len(), 2);
    }
    assert_eq!(b["prefixes"][0]["label"], "cat");
    assert!(b["tree"].as_str().unwrap().starts_with("tree samples=4 nodes=7"));
    assert!(parse(oracle("AAAAABBBB"))["error"].is_string());
}

#[test]
fn demo_training_separates_the_four_classes() {
    let v = parse(train_demo(0, 40));
    assert!(v.get("error").is_none(), "{v}");
    assert_eq!(v["loss"].as_array().unwrap().len(), 40);
    assert_eq!(v["samples"].as_array().unwrap().len(), 48);
    assert_eq!(v["classes"].as_array().unwrap().len(), 4);
    assert!(v["code"]["all"].as_f64().unwrap() >= 0.9, "{}", v["summary"]);
    assert!(v["purity"].as_f64().unwrap() >= 0.9, "{}", v["summary"]);
    assert_eq!(parse(train_demo(0, 40)), v);
}

#[test]
fn demo_rejects_long_runs() {
    assert!(parse(train_demo(0, 501))["error"].is_string());
}
