//! Build the supported split plans and check that test folds partition
//! the samples.

use hfnt::data::SplitPlan;
use hfnt::pipeline::CvProtocol;

fn main() -> hfnt::Result<()> {
    let labels: Vec<usize> = (0..40).map(|i| usize::from(i % 4 == 0)).collect();
    let plans = [
        ("kfold:5", SplitPlan::kfold(40, 5, 1)?),
        ("stratified kfold:5", SplitPlan::kfold_stratified(&labels, 5, 1)?),
        ("5x2", SplitPlan::five_by_two(40, 1)?),
        ("holdout:0.75", SplitPlan::holdout(40, 0.75)?),
    ];
    for (name, plan) in &plans {
        let pairs = plan.pairs();
        println!("{name}: {} folds", pairs.len());
        for (i, p) in pairs.iter().enumerate().take(2) {
            let positives = p.test.iter().filter(|&&j| labels[j] == 1).count();
            println!("  fold {i}: {} train, {} test ({positives} positive)", p.train.len(), p.test.len());
        }
    }
    let parsed: CvProtocol = "kfold:10".parse()?;
    println!("parsed protocol {parsed}");
    Ok(())
}
