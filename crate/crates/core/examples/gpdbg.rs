use nroy_core::design::maximin_lhs;
use nroy_core::ensemble::{Ensemble, RunOutcome, RunRecord};
use nroy_core::simulate::{SimOutcome, Simulator, TwoBoxEquilibrium};
use nroy_core::emulator::gp::{gp_fit_with, GpSettings};
use nroy_core::emulator::Emulator;

fn main() {
    let sim = TwoBoxEquilibrium::default();
    let space = sim.spec().input_space.clone();
    for (nug, v_hi, l_hi) in [(1e-8, 100.0, 10.0)] {
        let mut worst_all = 0.0f64;
        let mut worst_rmse = 0.0f64;
        for n in [10usize, 30] {
            for seed in [1u64, 5, 42, 7] {
                let design = maximin_lhs(&space, n, seed, 4).unwrap();
                let mut ens = Ensemble::new(vec!["T".into()]).unwrap();
                for p in &design.points {
                    if let SimOutcome::Completed(m) = sim.run(p).unwrap() {
                        ens.push(RunRecord { point: p.clone(), outcome: RunOutcome::Completed(m), wave: 0 }).unwrap();
                    }
                }
                let settings = GpSettings { nugget: nug, variance_bounds: (1e-4, v_hi), lengthscale_bounds: (1e-2, l_hi), ..GpSettings::default() };
                let model = gp_fit_with(&ens, &space, &settings, seed).unwrap();
                let std = model.target_transform(0).std;
                let mut worst = 0.0f64;
                for (p, m, _) in ens.completed() {
                    let pred = model.predict(p).unwrap()[0];
                    worst = worst.max((pred.mean - m.values()[0]).abs() / std);
                }
                worst_all = worst_all.max(worst);
                // held-out quality: rmse on a grid
                let mut se = 0.0; let mut cnt = 0;
                for i in 0..15 { for j in 0..15 {
                    let g = 1.0 + (i as f64 + 0.5)/15.0; let d = 30.0 + 20.0*(j as f64+0.5)/15.0;
                    let p = nroy_core::Point::new(vec![g, d]);
                    let pred = model.predict(&p).unwrap()[0];
                    let t = sim.spec(); let _ = t;
                    let truth = match sim.run(&p).unwrap() { SimOutcome::Completed(m) => m.values()[0], _ => unreachable!() };
                    se += (pred.mean - truth).powi(2); cnt += 1;
                }}
                worst_rmse = worst_rmse.max((se / cnt as f64).sqrt());
            }
        }
        println!("nug {nug:.0e} v_hi {v_hi:>6} l_hi {l_hi:>4}: worst interp misfit {worst_all:.2e}, worst grid rmse {worst_rmse:.2e} K");
    }
}
