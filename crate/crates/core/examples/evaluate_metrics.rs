//! AP metrics on a small hand-made prediction set.

use masklift::eval::{average_precision, benchmark_suite, ClassGroups, GroundTruthInstance, Prediction};
use masklift::scene::BitMask;

fn main() -> masklift::Result<()> {
    let n = 40;
    let gt = |r: std::ops::Range<usize>, class_id| GroundTruthInstance {
        mask: BitMask::from_indices(n, r),
        class_id,
    };
    let pred = |r: std::ops::Range<usize>, class_id, score| Prediction {
        mask: BitMask::from_indices(n, r),
        class_id,
        score,
    };
    let gts = vec![gt(0..10, 1), gt(10..20, 1), gt(20..30, 2)];
    let preds = vec![
        pred(0..10, Some(1), 0.9),
        pred(12..20, Some(1), 0.8),
        pred(20..26, Some(2), 0.7),
        pred(30..40, Some(2), 0.6),
        pred(0..12, None, 0.5),
    ];
    for t in [0.25, 0.5, 0.75] {
        println!("class-agnostic AP@{t}: {:.4}", average_precision(&preds, &gts, t));
    }
    let mut groups = ClassGroups::new();
    groups.insert("head".into(), vec![1]);
    groups.insert("tail".into(), vec![2]);
    let r = benchmark_suite(&preds, &gts, Some(&groups))?;
    println!("AP {:.4}  AP50 {:.4}  AP25 {:.4}", r.ap, r.ap50, r.ap25);
    for (name, g) in &r.groups {
        println!("  {name}: AP {:.4}", g.ap);
    }
    let a = &r.class_agnostic;
    println!("class-agnostic AP {:.4} AR {:.4} recall@50 {:.4}", a.ap, a.ar, a.recall50);
    Ok(())
}
