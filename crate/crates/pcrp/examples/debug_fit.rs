use pcrp::igmm::*;
use pcrp::metrics::adjusted_rand_index;
use pcrp::partition::Partition;
use pcrp::process::ProcessSpec;
use nalgebra::DVector;
use rand::Rng; use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use pcrp::datasets::gen_grid;

fn gen(radius: f64, ratio: f64, ppc: usize, seed: u64) -> (Vec<DVector<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::new(); let mut labels = Vec::new();
    let sigma_d = 1.0 / ratio;
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    for i in 0..3 {
        let a = phase + std::f64::consts::TAU * i as f64 / 3.0;
        let (cx, cy) = (radius * a.cos() + 0.05*rng.sample::<f64,_>(StandardNormal),
                        radius * a.sin() + 0.05*rng.sample::<f64,_>(StandardNormal));
        for _ in 0..ppc {
            pts.push(DVector::from_row_slice(&[cx + sigma_d*rng.sample::<f64,_>(StandardNormal), cy + sigma_d*rng.sample::<f64,_>(StandardNormal)]));
            labels.push(i);
        }
    }
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    for i in 0..2 {
        let a = phase + std::f64::consts::TAU * i as f64 / 2.0;
        let (cx, cy) = (6.0 * a.cos(), 6.0 * a.sin());
        for _ in 0..ppc {
            pts.push(DVector::from_row_slice(&[cx + rng.sample::<f64,_>(StandardNormal), cy + rng.sample::<f64,_>(StandardNormal)]));
            labels.push(3 + i);
        }
    }
    (pts, labels)
}

fn main() {
    // Multiscale: 3 independent seed sets.
    for base in [1000u64, 7000, 22000] {
        let diffs: Vec<f64> = (0..20usize).into_par_iter().map(|i| {
            let (points, truth) = gen(0.9, 4.0, 60, base + i as u64);
            let prior = NiwParams::from_data(&points).unwrap();
            let t = Partition::from_raw_labels(&truth);
            let f = |r: f64| {
                let spec = ProcessSpec::powered(1.0, r).unwrap();
                let res = fit(&points, &prior, &spec, &StoppingRule::default(), base + 500 + i as u64).unwrap();
                adjusted_rand_index(&res.partition, &t).unwrap()
            };
            f(0.7) - f(1.0)
        }).collect();
        let md = diffs.iter().sum::<f64>() / 20.0;
        println!("multiscale seedset {base}: mean paired diff = {md:+.4}");
    }
    // Grid: full 7-value profile at spacing 5, 20 runs.
    let rs = [0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2];
    let mut means = Vec::new();
    for &r in &rs {
        let aris: Vec<f64> = (0..20usize).into_par_iter().map(|i| {
            let ds = gen_grid(3, 50, 5.0, 3000 + i as u64).unwrap();
            let points = vectors_from_rows(&ds.points);
            let prior = NiwParams::from_data(&points).unwrap();
            let spec = ProcessSpec::powered(1.0, r).unwrap();
            let res = fit(&points, &prior, &spec, &StoppingRule::default(), 4000 + i as u64).unwrap();
            adjusted_rand_index(&res.partition, &Partition::new(ds.labels.clone().unwrap()).unwrap()).unwrap()
        }).collect();
        means.push(aris.iter().sum::<f64>() / 20.0);
    }
    for (r, m) in rs.iter().zip(&means) { println!("grid r={r}: mean ARI = {m:.4}"); }
    let best = means.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    println!("grid argmax r = {} (interior = {})", rs[best], best != 0 && best != rs.len()-1);
}
