//! Hand-computed GAP scoring fixture and significance-test oracles.

use corefkit::gap_eval::{gap_report, parse_gap, GapExample};
use corefkit::sigtest::{
    mcnemar_exact, stratified_randomization_test, PairedBinaryOutcomes, StratifiedScores,
};

const GAP_HEADER: &str =
    "ID\tText\tPronoun\tPronoun-offset\tA\tA-offset\tA-coref\tB\tB-offset\tB-coref\tURL";

fn row(id: &str, pronoun: &str, label_a: bool, label_b: bool) -> String {
    let text = format!("Anna met Bella before {pronoun} left");
    let fmt = |b: bool| if b { "TRUE" } else { "FALSE" };
    format!(
        "{id}\t{text}\t{pronoun}\t{}\tAnna\t0\t{}\tBella\t9\t{}\thttp://x\n",
        text.find(pronoun).unwrap(),
        fmt(label_a),
        fmt(label_b),
    )
}

/// 12 examples: male side engineered to tp=3 fp=1 fn=2, female side to
/// tp=4 fp=2 fn=1.
fn fixture() -> (Vec<GapExample>, Vec<(bool, bool)>) {
    let mut text = String::from(GAP_HEADER);
    text.push('\n');
    let cases: [(&str, bool, bool, bool, bool); 12] = [
        // (pronoun, label_a, label_b, pred_a, pred_b)
        ("he", true, false, true, false),
        ("he", true, false, true, false),
        ("he", true, false, true, true),
        ("he", true, false, false, false),
        ("he", true, false, false, false),
        ("he", false, false, false, false),
        ("she", true, true, true, true),
        ("she", true, false, true, false),
        ("she", true, false, true, true),
        ("she", false, false, true, false),
        ("she", true, false, false, false),
        ("she", false, false, false, false),
    ];
    let mut preds = Vec::new();
    for (i, (pronoun, la, lb, pa, pb)) in cases.iter().enumerate() {
        text.push_str(&row(&format!("x{i}"), pronoun, *la, *lb));
        preds.push((*pa, *pb));
    }
    (parse_gap(&text).unwrap(), preds)
}

#[test]
fn twelve_example_fixture_matches_hand_arithmetic() {
    let (examples, preds) = fixture();
    let report = gap_report(&examples, &preds).unwrap();

    assert_eq!((report.male.tp, report.male.fp, report.male.fn_), (3, 1, 2));
    assert!((report.male.precision.unwrap() - 0.75).abs() < 1e-9);
    assert!((report.male.recall.unwrap() - 0.6).abs() < 1e-9);
    assert!((report.male.f1.unwrap() - 2.0 / 3.0).abs() < 1e-9);

    assert_eq!((report.female.tp, report.female.fp, report.female.fn_), (4, 2, 1));
    assert!((report.female.precision.unwrap() - 2.0 / 3.0).abs() < 1e-9);
    assert!((report.female.recall.unwrap() - 0.8).abs() < 1e-9);
    assert!((report.female.f1.unwrap() - 8.0 / 11.0).abs() < 1e-9);

    assert_eq!((report.overall.tp, report.overall.fp, report.overall.fn_), (7, 3, 3));
    assert!((report.overall.f1.unwrap() - 0.7).abs() < 1e-9);

    // bias is female F1 over male F1
    assert!((report.bias.unwrap() - 12.0 / 11.0).abs() < 1e-9);
}

#[test]
fn bias_matches_published_style_ratio() {
    assert!((70.6f64 / 75.8 - 0.9314).abs() < 5e-4);
}

fn binom(n: u64, k: u64) -> u128 {
    let mut out: u128 = 1;
    for i in 0..k {
        out = out * (n - i) as u128 / (i + 1) as u128;
    }
    out
}

/// Exact binomial-tail oracle for the two-sided McNemar p-value.
fn mcnemar_oracle(b: u64, c: u64) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let k = b.min(c);
    let tail: u128 = (0..=k).map(|i| binom(n, i)).sum();
    let p = 2.0 * tail as f64 / 2f64.powi(n as i32);
    p.min(1.0)
}

#[test]
fn mcnemar_matches_exact_binomial_oracle() {
    let p = mcnemar_exact(PairedBinaryOutcomes { b: 10, c: 2 });
    assert!((p - 158.0 / 4096.0).abs() < 1e-6);
    for b in 0..=30u64 {
        for c in 0..=30u64 {
            let got = mcnemar_exact(PairedBinaryOutcomes { b, c });
            let want = mcnemar_oracle(b, c);
            assert!((got - want).abs() < 1e-9, "b={b} c={c}: {got} vs {want}");
            let sym = mcnemar_exact(PairedBinaryOutcomes { b: c, c: b });
            assert!((got - sym).abs() < 1e-12);
            if b == c {
                assert!((got - 1.0).abs() < 1e-12);
            }
        }
    }
}

fn mean_metric(stats: &[f64]) -> f64 {
    stats[0] / stats[1]
}

#[test]
fn identical_systems_always_give_p_one() {
    let strata: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 1.0]).collect();
    let scores = StratifiedScores {
        system_a: &strata,
        system_b: &strata,
        metric: mean_metric,
    };
    assert_eq!(stratified_randomization_test(&scores, 9999, 1).unwrap(), 1.0);
}

#[test]
fn uniform_margin_fixture_is_significant_for_ten_seeds() {
    let a: Vec<Vec<f64>> = (0..20).map(|_| vec![1.0, 1.0]).collect();
    let b: Vec<Vec<f64>> = (0..20).map(|_| vec![0.0, 1.0]).collect();
    let rounds = 9999;
    for seed in 0..10u64 {
        let scores = StratifiedScores {
            system_a: &a,
            system_b: &b,
            metric: mean_metric,
        };
        let p = stratified_randomization_test(&scores, rounds, seed).unwrap();
        assert!(p <= 0.05, "seed {seed}: p = {p}");
        assert!(p >= 1.0 / (rounds as f64 + 1.0));
    }
}
