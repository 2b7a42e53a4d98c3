//! Posterior recovery of slowly moving volatilities and a constant
//! contemporaneous relation.

use nalgebra::DVector;
use tvpsv::irf::{residual_volatility_paths, summarize};
use tvpsv::kernel::RngStream;
use tvpsv::model::{run_gibbs, ModelSpec, PriorSpec, StatePaths};
use tvpsv::synth::simulate_from_paths;
use tvpsv::QuarterDate;

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[test]
fn tracks_smooth_volatility_cycles() {
    // 41 presample rows (lag + training) plus 260 estimation periods.
    let n = 301;
    let base = [1.0f64.ln(), 0.5f64.ln()];
    let truth = |t: usize, j: usize| {
        let phase = 2.0 * std::f64::consts::PI * t as f64 / 120.0 + j as f64;
        base[j] + 0.6 * phase.sin()
    };
    let paths = StatePaths {
        beta: vec![DVector::from_vec(vec![0.5, 0.1, -0.1, 0.4]); n],
        a: vec![DVector::from_element(1, 0.5); n],
        h: (0..n).map(|t| DVector::from_fn(2, |j, _| truth(t, j))).collect(),
    };
    let start = QuarterDate::new(1950, 1).unwrap();
    let panel = simulate_from_paths(&paths, 1, vec!["x".into(), "y".into()], start, &mut RngStream::new(71)).unwrap();
    let spec = ModelSpec {
        n_draws: 6_000,
        burn_in: 1_000,
        thinning: 2,
        ..ModelSpec::default()
    };
    let store = run_gibbs(&panel, &spec, &PriorSpec::default(), &mut RngStream::new(72)).unwrap();
    let offset = n - store.periods();
    let vol = residual_volatility_paths(&store).unwrap();
    for (j, path) in vol.iter().enumerate() {
        let med: Vec<f64> = path.summaries.iter().map(|s| s.median.ln()).collect();
        let tru: Vec<f64> = (0..store.periods()).map(|t| truth(t + offset, j)).collect();
        let r = pearson(&med, &tru);
        let mae = med.iter().zip(&tru).map(|(a, b)| (a - b).abs()).sum::<f64>() / med.len() as f64;
        assert!(r >= 0.8, "variable {j}: correlation {r:.3}");
        assert!(mae <= 0.3, "variable {j}: mean |log error| {mae:.3}");
    }

    // The constant contemporaneous coefficient is the single free element
    // of the unit lower-triangular A.
    let mut covered = 0;
    for t in 0..store.periods() {
        let draws: Vec<f64> = (0..store.len()).map(|d| store.a(d, t)[0]).collect();
        let band = summarize(&draws).unwrap();
        if band.p17 <= 0.5 && 0.5 <= band.p83 {
            covered += 1;
        }
    }
    let share = covered as f64 / store.periods() as f64;
    assert!(share >= 0.5, "66% band covers the true relation at {:.0}% of periods", 100.0 * share);
}
