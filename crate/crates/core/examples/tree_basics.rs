//! Build a tree by hand, evaluate it, and inspect its structure and
//! parameter vector.

use hfnt::tree::{random_tree, Activation, NeuralTree, TreeConfig, TreeNode};

fn main() -> hfnt::Result<()> {
    let inner = TreeNode::internal(
        Activation::Tanh,
        0.5,
        0.2,
        vec![0.8, -0.4],
        vec![TreeNode::leaf(0), TreeNode::leaf(2)],
    );
    let root = TreeNode::internal(
        Activation::Gaussian,
        0.3,
        0.7,
        vec![0.6, 0.9, -0.1],
        vec![inner, TreeNode::leaf(1), TreeNode::leaf(0)],
    );
    let tree = NeuralTree::new(root)?;
    let row = [0.2, 0.5, 0.9];
    println!("output on {row:?}: {:.6}", tree.eval(&row)?);
    println!(
        "size {} (internal {}, leaves {}), depth {}, activation kinds {}",
        tree.size(),
        tree.internal_count(),
        tree.leaf_count(),
        tree.depth(),
        tree.diversity_index()
    );
    println!("features used: {:?}", tree.used_features());

    let params = tree.encode_params();
    println!("{} tunable parameters: {:?}", params.len(), params.values);
    let shifted: Vec<f64> = params.values.iter().map(|v| v * 0.5).collect();
    let halved = tree.decode_params(&shifted)?;
    println!("output with halved parameters: {:.6}", halved.eval(&row)?);

    let json = tree.to_json()?;
    assert_eq!(NeuralTree::from_json(&json)?, tree);
    println!("JSON: {json}");

    let cfg = TreeConfig::default();
    let random = random_tree(3, &cfg, &mut hfnt::rng::seeded(7));
    random.validate(&cfg, Some(3))?;
    println!("random tree: size {}, depth {}, output {:.6}", random.size(), random.depth(), random.eval(&row)?);
    Ok(())
}
