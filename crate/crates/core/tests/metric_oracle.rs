use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use triage_core::metrics::eval_report;
use triage_core::{Label, Task};

fn close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= 1e-12,
        (None, None) => true,
        _ => false,
    }
}

fn div(a: f64, b: f64) -> Option<f64> {
    if b == 0.0 {
        None
    } else {
        Some(a / b)
    }
}

/// Per-class metrics recomputed by direct counting, with `pos` as positive.
fn naive(preds: &[bool], golds: &[bool], pos: bool) -> [Option<f64>; 5] {
    let count = |p: bool, g: bool| {
        preds
            .iter()
            .zip(golds)
            .filter(|(a, b)| (**a == pos) == p && (**b == pos) == g)
            .count() as f64
    };
    let (tp, fp, tn, fnn) = (
        count(true, true),
        count(true, false),
        count(false, false),
        count(false, true),
    );
    let recall = div(tp, tp + fnn);
    let precision = div(tp, tp + fp);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    [
        recall,
        precision,
        div(tn, tn + fp),
        f1,
        div(tp + tn, preds.len() as f64),
    ]
}

#[test]
fn every_metric_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..200 {
        let bias: f64 = rng.random_range(0.01..0.99);
        let golds: Vec<bool> = (0..1000).map(|_| rng.random_bool(bias)).collect();
        let preds: Vec<bool> = golds
            .iter()
            .map(|g| if rng.random_bool(0.85) { *g } else { !*g })
            .collect();
        let to_labels = |v: &[bool]| {
            v.iter()
                .map(|&b| if b { Label::Reportable } else { Label::NonReportable })
                .collect::<Vec<_>>()
        };
        let r = eval_report(&to_labels(&preds), &to_labels(&golds), Task::T2).unwrap();

        for (pos, m) in [(true, &r.positive), (false, &r.negative)] {
            let want = naive(&preds, &golds, pos);
            let got = [m.recall, m.precision, m.specificity, m.f1, m.accuracy];
            for (g, w) in got.iter().zip(want) {
                assert!(close(*g, w), "trial {trial}: {got:?} vs {want:?}");
            }
        }
        let acc = preds.iter().zip(&golds).filter(|(a, b)| a == b).count() as f64 / 1000.0;
        assert_eq!(r.micro_f1, Some(acc), "trial {trial}");
        let macro_want = (naive(&preds, &golds, true)[3].unwrap() + naive(&preds, &golds, false)[3].unwrap()) / 2.0;
        assert!(close(r.macro_f1, Some(macro_want)));
        assert_eq!(
            r.missed_positive_count,
            preds.iter().zip(&golds).filter(|(p, g)| !**p && **g).count()
        );
    }
}

#[test]
fn reported_f1_values_lie_within_rounding_intervals() {
    use triage_core::metrics::{f1_score, round2};
    // (recall, precision, F1) as printed, in hundredths
    let rows = [
        (97, 100, 98),
        (99, 89, 94),
        (97, 100, 99),
        (99, 91, 95),
        (96, 100, 98),
        (99, 88, 93),
        (99, 94, 96),
        (98, 100, 99),
        (99, 95, 97),
        (99, 100, 99),
        (98, 96, 97),
        (99, 99, 99),
    ];
    let interval = |v: i32| ((v as f64 - 0.5) / 100.0, ((v as f64 + 0.5) / 100.0).min(1.0));
    for (r, p, f1) in rows {
        // F1 is increasing in both arguments, so the corners bound it
        let (r_lo, r_hi) = interval(r);
        let (p_lo, p_hi) = interval(p);
        let lo = round2(f1_score(p_lo, r_lo));
        let hi = round2(f1_score(p_hi, r_hi));
        let want = f1 as f64 / 100.0;
        assert!(
            lo <= want && want <= hi,
            "row ({r}, {p}, {f1}): attainable [{lo}, {hi}]"
        );
    }
}
