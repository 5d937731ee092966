use rep4ex::models::{Activation, Mlp};
use rep4ex::numcore::gradcheck::{check_plan, GraphPlan};
use rep4ex::{DenseMatrix, Graph, RngStream};
use std::collections::BTreeSet;
use std::time::Instant;

const H: f64 = 1e-5;
const TOL: f64 = 1e-6;
/// Denominator floor: below this magnitude the comparison is absolute.
const FLOOR: f64 = 1e-3;

#[test]
fn hundred_random_graphs_match_central_differences() {
    let t = Instant::now();
    let mut kinds = BTreeSet::new();
    let mut worst = 0.0f64;
    for seed in 0..100 {
        let plan = GraphPlan::random(seed, 6 + (seed as usize % 7));
        kinds.extend(plan.op_kinds());
        let r = check_plan(&plan, H, FLOOR).unwrap();
        assert!(r.entries > 0);
        assert!(r.max_rel_error < TOL, "graph {seed}: relative error {:e}", r.max_rel_error);
        worst = worst.max(r.max_rel_error);
    }
    for k in ["matmul", "add", "sub", "add_row", "leaky_relu", "tanh", "square", "scale", "mean", "sum", "quad_form"] {
        assert!(kinds.contains(k), "op kind {k} never drawn");
    }
    assert!(t.elapsed().as_secs_f64() < 10.0, "took {:?}", t.elapsed());
    eprintln!("worst relative error {worst:e}");
}

#[test]
fn two_layer_mlp_matches_central_differences() {
    let mut s = RngStream::new(11, 0);
    let net = Mlp::init(&[5, 7, 3], Activation::LeakyRelu, &mut s);
    let x = s.normal_matrix(6, 5);
    let y = s.normal_matrix(6, 3);
    let loss_of = |params: &[DenseMatrix]| -> (f64, Vec<DenseMatrix>) {
        let mut g = Graph::new();
        let p: Vec<_> = params.iter().map(|m| g.parameter(m.clone())).collect();
        let xi = g.constant(x.clone());
        let yi = g.constant(y.clone());
        let out = net.forward_graph(&mut g, xi, &p);
        let d = g.sub(out, yi);
        let sq = g.square(d);
        let l = g.mean(sq);
        let grads = g.backward(l).unwrap();
        (g.value(l).item(), p.iter().zip(params).map(|(&id, m)| grads.get_or_zeros(id, m)).collect())
    };
    let mut params = net.params();
    let (_, analytic) = loss_of(&params);
    for (pi, a) in analytic.iter().enumerate() {
        for e in 0..a.as_slice().len() {
            let orig = params[pi].as_slice()[e];
            params[pi].as_mut_slice()[e] = orig + H;
            let up = loss_of(&params).0;
            params[pi].as_mut_slice()[e] = orig - H;
            let down = loss_of(&params).0;
            params[pi].as_mut_slice()[e] = orig;
            let num = (up - down) / (2.0 * H);
            let an = a.as_slice()[e];
            let rel = (an - num).abs() / an.abs().max(num.abs()).max(FLOOR);
            assert!(rel < TOL, "tensor {pi} entry {e}: {an} vs {num}");
        }
    }
}
