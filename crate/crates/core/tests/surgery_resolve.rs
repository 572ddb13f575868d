//! Window surgery verified by re-solving the transformed potentials. The
//! test model is the confining p(x) = x, q = 0 on [0, 30]: two samples,
//! reproduced exactly by linear interpolation.

use dirac_spectral::model::{BoundaryParams, CanonicalPotential, Grid, SurgeryPlan, SurgeryStep, VectorSolution};
use dirac_spectral::ode::interior_residuals;
use dirac_spectral::spectrum::refine_near;
use dirac_spectral::surgery::{
    add_eigenvalue, compose_surgery, halfline_normalized_seed, remove_eigenvalue, scale_norming,
    transformed_seed, window_eigenpair, window_norming, WindowContext,
};

fn confining() -> CanonicalPotential {
    CanonicalPotential::sampled(Grid::new(30.0, 2).unwrap(), vec![0.0, 30.0], vec![0.0, 0.0])
        .unwrap()
}

fn boundary() -> BoundaryParams {
    BoundaryParams::new(0.0, 0.0).unwrap()
}

fn trapezoid_norm(w: &VectorSolution) -> f64 {
    let h = w.grid.spacing();
    let f: Vec<f64> = (0..w.len())
        .map(|i| {
            let (a, b) = w.at(i);
            a * a + b * b
        })
        .collect();
    h * (f.iter().sum::<f64>() - 0.5 * (f[0] + f[w.len() - 1]))
}

#[test]
fn scale_rescales_the_window_norming_constant() {
    let pot = confining();
    let ctx = WindowContext::new(12.0).unwrap();
    let t = 0.5f64;
    let (l0, a_before) = window_norming(&pot, 0.0, -0.8, &ctx).unwrap();
    let (le, h) = window_eigenpair(&pot, 0.0, -0.8, &ctx).unwrap();
    let out = scale_norming(&pot, 0.0, le, t, &h, &ctx).unwrap();
    // every level stays put
    for seed in [-0.83, 1.76, 2.65, 3.32] {
        let before = refine_near(&pot, &boundary(), seed, ctx.grid()).unwrap();
        let after = refine_near(&out, &boundary(), seed, ctx.grid()).unwrap();
        assert!(
            (after - before).abs() <= 1e-4,
            "seed {seed}: {before} -> {after}"
        );
    }
    // the seeded level's norming constant picks up e^{t}
    let (_, a_after) = window_norming(&out, 0.0, l0, &ctx).unwrap();
    let ratio = a_after / a_before;
    assert!((ratio - t.exp()).abs() <= 1e-3 * t.exp(), "ratio = {ratio}");
    // the transformed seed solves the new system at the old eigenvalue
    let w = transformed_seed(&h, (-t).exp_m1(), &ctx).unwrap();
    let res = interior_residuals(&out, &w, le).unwrap();
    let max = res.iter().map(|&(_, r)| r).fold(0.0f64, f64::max);
    assert!(max <= 1e-6, "max intertwining residual {max}");
    // norm identity (1/gamma)(1/theta(0) - 1/theta(X)) against quadrature
    let closed = w.total_norm_sq();
    assert!((closed - t.exp()).abs() <= 1e-8);
    let quad = trapezoid_norm(&w);
    assert!((quad - closed).abs() <= 1e-6 * (1.0 + closed.abs()));
}

#[test]
fn add_then_remove_is_a_round_trip() {
    let pot = confining();
    // insert on a wider window so the seed for the removal can be
    // normalized over [0, 12], then operate on the [0, 8] window
    let ctx_big = WindowContext::new(12.0).unwrap();
    let ctx = WindowContext::new(8.0).unwrap();
    let mu = 7.0;
    let pot1 = add_eigenvalue(&pot, 0.0, mu, 1.0, &ctx_big).unwrap();
    let lnew = refine_near(&pot1, &boundary(), mu, ctx.grid()).unwrap();
    assert!((lnew - mu).abs() <= 2e-2, "inserted level at {lnew}");

    let (l_rm, h) = halfline_normalized_seed(&pot1, 0.0, lnew, 12.0, &ctx).unwrap();
    let theta_end = 1.0 - h.total_norm_sq();
    assert!(theta_end > 1e-6, "theta(X) = {theta_end}");
    let pot2 = remove_eigenvalue(&pot1, 0.0, l_rm, &h, &ctx).unwrap();

    // the original spectrum is restored
    for seed in [-0.83, 1.76, 2.65, 5.57, 6.86, 7.42] {
        let orig = refine_near(&pot, &boundary(), seed, ctx.grid()).unwrap();
        let back = refine_near(&pot2, &boundary(), seed, ctx.grid()).unwrap();
        assert!(
            (back - orig).abs() <= 2e-3,
            "seed {seed}: {orig} -> {back}"
        );
    }
    // ... and the inserted level is gone
    match refine_near(&pot2, &boundary(), mu, ctx.grid()) {
        Ok(l) => assert!((l - mu).abs() > 0.05, "inserted level survived at {l}"),
        Err(_) => {}
    }

    // intertwining holds away from the theta floor
    let w = transformed_seed(&h, -1.0, &ctx).unwrap();
    let res = interior_residuals(&pot2, &w, l_rm).unwrap();
    let mut max = 0.0f64;
    for &(i, r) in &res {
        if 1.0 - h.norm_accum[i] >= 1e-7 {
            max = max.max(r);
        }
    }
    assert!(max <= 1e-5, "max intertwining residual {max}");
}

#[test]
fn composed_add_and_scale_plan() {
    let pot = confining();
    let plan = SurgeryPlan {
        steps: vec![
            SurgeryStep::Add { nu: 0.7, c: 1.0 },
            SurgeryStep::Scale { nu: 0.7, t: 1.0 },
        ],
        window_end: 8.0,
    };
    let (fin, inter) = compose_surgery(&pot, 0.0, &plan).unwrap();
    assert_eq!(inter.len(), 2);
    let ctx = WindowContext::new(8.0).unwrap();
    // the inserted level sits in the spectral gap around 0.7
    let (l_mid, a_mid) = window_norming(&inter[0], 0.0, 0.7, &ctx).unwrap();
    assert!((l_mid - 0.7).abs() <= 2e-2, "inserted level at {l_mid}");
    let (l_fin, a_fin) = window_norming(&fin, 0.0, l_mid, &ctx).unwrap();
    assert!((l_fin - l_mid).abs() <= 1e-6, "scale moved the level to {l_fin}");
    // scale multiplies the inserted level's norming constant by e^{t}
    let ratio = a_fin / a_mid;
    assert!(
        (ratio - 1.0f64.exp()).abs() <= 1e-2 * 1.0f64.exp(),
        "ratio = {ratio}"
    );
    // the neighbours of the gap are carried through both steps
    for seed in [-0.83, 1.76] {
        let before = refine_near(&pot, &boundary(), seed, ctx.grid()).unwrap();
        let after = refine_near(&fin, &boundary(), seed, ctx.grid()).unwrap();
        assert!((after - before).abs() <= 1e-4, "seed {seed}");
    }
}
