//! Least-squares fit of the multilinear LSP model.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsp::{Lsp, LspCoefficients, LspSample, ParameterSet, StateParams, Terms};
use crate::scenario::{LinkState, Scenario};

/// Smallest singular value, relative to the largest, of the standardized
/// design matrix that is still treated as full rank.
const RANK_TOLERANCE: f64 = 1e-10;

/// Minimum spread of a regressor, in decades, below which its column is
/// dropped: distance, frequency, elevation.
pub const MIN_DECADES: [f64; 3] = [1.0, 1.0, 0.1];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovariateRanges {
    /// m
    pub distance: (f64, f64),
    /// GHz
    pub freq_ghz: (f64, f64),
    /// rad
    pub elevation: (f64, f64),
}

impl CovariateRanges {
    fn of(samples: &[&LspSample]) -> Self {
        let mut r = CovariateRanges {
            distance: (f64::INFINITY, f64::NEG_INFINITY),
            freq_ghz: (f64::INFINITY, f64::NEG_INFINITY),
            elevation: (f64::INFINITY, f64::NEG_INFINITY),
        };
        for s in samples {
            for (range, v) in [(&mut r.distance, s.cov.distance), (&mut r.freq_ghz, s.cov.freq_ghz), (&mut r.elevation, s.cov.elevation)] {
                range.0 = range.0.min(v);
                range.1 = range.1.max(v);
            }
        }
        r
    }

    /// Span of each covariate in decades.
    pub fn decades(&self) -> [f64; 3] {
        [self.distance, self.freq_ghz, self.elevation].map(|(lo, hi)| (hi / lo).log10())
    }
}

/// Fitted coefficients of one LSP for one scenario and link state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub scenario: Scenario,
    pub state: LinkState,
    pub lsp: Lsp,
    pub coeffs: LspCoefficients<f64>,
    /// RMS of the residuals around the fitted mean.
    pub residual_rms: f64,
    pub n: usize,
    pub ranges: CovariateRanges,
    /// Coefficients forced to 0 because their regressor does not vary enough.
    pub dropped: Vec<String>,
}

/// Ordinary least squares on columns standardized to zero mean and unit
/// spread, except the leading intercept column.
fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let (n, k) = x.shape();
    let mut z = x.clone();
    let mut shift = vec![0.0; k];
    let mut scale = vec![1.0; k];
    for j in 1..k {
        let col = x.column(j);
        let m = col.sum() / n as f64;
        let s = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt();
        shift[j] = m;
        scale[j] = s;
        for i in 0..n {
            z[(i, j)] = (x[(i, j)] - m) / s;
        }
    }
    // normal equations on the standardized columns, plus one refinement step
    let gram = z.tr_mul(&z);
    let eig = gram.clone().symmetric_eigenvalues();
    let (emin, emax) = (eig.min(), eig.max());
    if !(emin > RANK_TOLERANCE * RANK_TOLERANCE * emax) {
        return Err(Error::Degenerate(format!("design matrix is rank deficient (eigenvalues {emin:e} / {emax:e})")));
    }
    let chol = gram.cholesky().ok_or_else(|| Error::Degenerate("normal equations are not positive definite".into()))?;
    let mut b = chol.solve(&z.tr_mul(y));
    let r = y - &z * &b;
    b += chol.solve(&z.tr_mul(&r));
    let mut beta = DVector::zeros(k);
    beta[0] = b[0];
    for j in 1..k {
        beta[j] = b[j] / scale[j];
        beta[0] -= beta[j] * shift[j];
    }
    Ok(beta)
}

/// Fits `lsp` over `samples`, which must share one scenario and link state.
///
/// The mean coefficients come from least squares on
/// `[1, log10 d, log10 f, log10 α]`, the spread coefficients from least
/// squares of `|residual|·sqrt(π/2)` on `[1, log10 f, log10 α]`. Terms off in
/// `terms`, or whose covariate spans less than [`MIN_DECADES`], are reported
/// as 0. Samples whose value is missing or not finite are skipped.
pub fn fit_multilinear(samples: &[LspSample], lsp: Lsp, terms: Terms) -> Result<FitResult> {
    let mut used: Vec<&LspSample> = samples.iter().filter(|s| s.values.get(lsp).is_some_and(f64::is_finite)).collect();
    let first = *used.first().ok_or_else(|| Error::InvalidInput(format!("no finite {lsp} samples")))?;
    if used.iter().any(|s| s.scenario != first.scenario || s.state != first.state) {
        return Err(Error::InvalidInput(format!("{lsp} samples mix scenarios or link states")));
    }
    let skipped = samples.len() - used.len();
    if skipped > 0 {
        log::debug!("{} {} {lsp}: skipped {skipped} samples without a finite value", first.scenario, first.state);
    }
    // summation order independent of the input order
    used.sort_by(|a, b| {
        (a.key.term_id, a.key.sat_id)
            .cmp(&(b.key.term_id, b.key.sat_id))
            .then(a.key.time.total_cmp(&b.key.time))
            .then(a.cov.freq_ghz.total_cmp(&b.cov.freq_ghz))
    });

    let ranges = CovariateRanges::of(&used);
    let span = ranges.decades();
    let mut dropped = Vec::new();
    let mut keep = |on: bool, name: &str, axis: usize| {
        if on && !(span[axis] >= MIN_DECADES[axis] - 1e-9) {
            log::warn!(
                "{} {} {lsp}: {name} dropped, covariate spans {:.3} decades (< {})",
                first.scenario,
                first.state,
                span[axis],
                MIN_DECADES[axis]
            );
            dropped.push(name.to_string());
            return false;
        }
        on
    };
    let mean_cols = [keep(terms.eps, "eps", 0), keep(terms.gam, "gam", 1), keep(terms.alp, "alp", 2)];
    let std_cols = [keep(terms.del, "del", 1), keep(terms.bet, "bet", 2)];

    let n = used.len();
    let n_mean = 1 + mean_cols.iter().filter(|c| **c).count();
    if n < 10 * n_mean {
        return Err(Error::InvalidInput(format!("{n} {lsp} samples for {n_mean} regressors; need at least {}", 10 * n_mean)));
    }
    let logs: Vec<[f64; 3]> = used.iter().map(|s| [s.cov.distance.log10(), s.cov.freq_ghz.log10(), s.cov.elevation.log10()]).collect();
    let design = |cols: &[(bool, usize)]| {
        let active: Vec<usize> = cols.iter().filter(|c| c.0).map(|c| c.1).collect();
        DMatrix::from_fn(n, 1 + active.len(), |i, j| if j == 0 { 1.0 } else { logs[i][active[j - 1]] })
    };
    let expand = |beta: &DVector<f64>, on: &[bool]| -> Vec<f64> {
        let mut it = beta.iter().skip(1);
        on.iter().map(|o| if *o { *it.next().expect("coefficient per column") } else { 0.0 }).collect()
    };

    let y = DVector::from_iterator(n, used.iter().map(|s| s.values.get(lsp).expect("filtered")));
    let xm = design(&[(mean_cols[0], 0), (mean_cols[1], 1), (mean_cols[2], 2)]);
    let bm = least_squares(&xm, &y)?;
    let res = &y - &xm * &bm;
    let residual_rms = (res.norm_squared() / n as f64).sqrt();
    if !residual_rms.is_finite() {
        return Err(Error::Degenerate(format!("{lsp} residuals are not finite")));
    }

    let half_normal = (std::f64::consts::PI / 2.0).sqrt();
    let ya = res.map(|r| r.abs() * half_normal);
    let xs = design(&[(std_cols[0], 1), (std_cols[1], 2)]);
    let bs = least_squares(&xs, &ya)?;

    let m = expand(&bm, &mean_cols);
    let s = expand(&bs, &std_cols);
    Ok(FitResult {
        scenario: first.scenario,
        state: first.state,
        lsp,
        coeffs: LspCoefficients { mu: bm[0], eps: m[0], gam: m[1], alp: m[2], sig: bs[0], del: s[0], bet: s[1], lambda: None },
        residual_rms,
        n,
        ranges,
        dropped,
    })
}

/// Fits every LSP of both link states. Decorrelation distances and cluster
/// metadata, which the samples do not determine, are copied from
/// `reference` and listed as inherited.
pub fn fit_scenario(samples: &[LspSample], reference: &ParameterSet, name: &str) -> Result<(ParameterSet, Vec<FitResult>)> {
    let mut out = ParameterSet { name: name.to_string(), scenario: reference.scenario, los: StateParams::default(), nlos: StateParams::default() };
    let mut fits = Vec::new();
    for state in LinkState::ALL {
        let subset: Vec<LspSample> = samples.iter().filter(|s| s.state == state && s.scenario == reference.scenario).copied().collect();
        let base = reference.state(state);
        if subset.is_empty() {
            log::warn!("no {} {state} samples; keeping the reference coefficients", reference.scenario);
            let mut p = base.clone();
            p.inherited = vec!["all".into()];
            *out.state_mut(state) = p;
            continue;
        }
        let mut p = StateParams {
            clusters: base.clusters,
            delay_factor: base.delay_factor,
            cluster_ds: base.cluster_ds,
            cluster_asa: base.cluster_asa,
            cluster_esa: base.cluster_esa,
            inherited: vec!["lambda".into(), "L".into(), "r_DS".into(), "cDS".into(), "cASA".into(), "cESA".into()],
            ..Default::default()
        };
        for lsp in Lsp::ALL {
            if lsp == Lsp::Kf && state == LinkState::Nlos {
                continue;
            }
            let fit = fit_multilinear(&subset, lsp, lsp.terms())?;
            let mut c = fit.coeffs;
            c.lambda = base.lsps.get(&lsp).and_then(|r| r.lambda);
            p.lsps.insert(lsp, c);
            fits.push(fit);
        }
        *out.state_mut(state) = p;
    }
    Ok((out, fits))
}

/// Sets each sample's shadow fading to its path loss minus the fitted mean.
pub fn fill_shadow_fading(samples: &mut [LspSample], fitted: &ParameterSet) -> Result<()> {
    for s in samples.iter_mut() {
        let c = fitted.state(s.state).coeffs(Lsp::Pl)?;
        s.values.sf = Some(s.values.pl - c.eval_mean(s.cov.distance, s.cov.freq_ghz, s.cov.elevation)?);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lsp::{Covariates, LinkKey, LspValues, ParameterDatabase};
    use crate::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn sample(k: usize, cov: Covariates, v: f64) -> LspSample {
        LspSample {
            key: LinkKey { term_id: k, sat_id: 0, time: 0.0 },
            scenario: Scenario::Urban,
            state: LinkState::Nlos,
            cov,
            values: LspValues { pl: v, sf: None, kf: None, ds: v, asa: v, asd: v, esa: v, esd: v, xpr: v },
        }
    }

    fn covariates<R: Rng>(r: &mut R) -> Covariates {
        Covariates {
            distance: 10f64.powf(r.random_range(5.7..7.3)),
            freq_ghz: 10f64.powf(r.random_range(0.3..1.6)),
            elevation: r.random_range(10f64.to_radians()..90f64.to_radians()),
        }
    }

    #[test]
    fn exact_recovery_without_noise() {
        let truth = LspCoefficients { mu: 47.5, eps: 20.0, gam: 22.8, alp: -8.4, ..Default::default() };
        let mut r = rng::stream(1, &[]);
        let s: Vec<LspSample> = (0..500)
            .map(|k| {
                let c = covariates(&mut r);
                sample(k, c, truth.eval_mean(c.distance, c.freq_ghz, c.elevation).unwrap())
            })
            .collect();
        let f = fit_multilinear(&s, Lsp::Pl, Terms::FULL).unwrap();
        for ((name, got), (_, want)) in f.coeffs.named().iter().zip(truth.named()) {
            assert!((got - want).abs() < 1e-9, "{name}: {got} vs {want}");
        }
        assert!(f.residual_rms < 1e-10);
        assert_eq!(f.n, 500);
        assert!(f.dropped.is_empty());
    }

    #[test]
    fn noisy_recovery() {
        let truth = LspCoefficients { mu: -6.5, eps: 0.3, gam: -0.4, alp: 0.35, sig: 0.3, del: -0.05, bet: 0.08, lambda: None };
        let mut r = rng::stream(2, &[]);
        let s: Vec<LspSample> = (0..100_000)
            .map(|k| {
                let c = covariates(&mut r);
                sample(k, c, truth.eval(c.distance, c.freq_ghz, c.elevation, r.sample(StandardNormal)).unwrap())
            })
            .collect();
        let f = fit_multilinear(&s, Lsp::Ds, Terms::FULL).unwrap();
        let c = f.coeffs;
        for (got, want) in [(c.mu, truth.mu), (c.eps, truth.eps), (c.gam, truth.gam), (c.alp, truth.alp)] {
            assert!((got - want).abs() < 0.02, "{got} vs {want}");
        }
        // spreads through a reference point rather than the collinear raw terms
        let sd = |c: &LspCoefficients<f64>, f: f64, a: f64| c.eval_std(f, a);
        for (fq, a) in [(2.0, 0.2), (40.0, 1.5), (10.0, 0.7)] {
            let (got, want) = (sd(&c, fq, a), sd(&truth, fq, a));
            assert!((got / want - 1.0).abs() < 0.05, "{got} vs {want}");
        }
    }

    #[test]
    fn narrow_covariate_is_dropped() {
        let mut r = rng::stream(3, &[]);
        let s: Vec<LspSample> = (0..200)
            .map(|k| {
                let mut c = covariates(&mut r);
                c.freq_ghz = 20.0;
                sample(k, c, 1.0 + 2.0 * c.distance.log10())
            })
            .collect();
        let f = fit_multilinear(&s, Lsp::Pl, Terms::FULL).unwrap();
        assert_eq!(f.dropped, vec!["gam".to_string(), "del".to_string()]);
        assert_eq!(f.coeffs.gam, 0.0);
        assert!((f.coeffs.eps - 2.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        let mut r = rng::stream(4, &[]);
        let few: Vec<LspSample> = (0..30).map(|k| sample(k, covariates(&mut r), 1.0)).collect();
        assert!(fit_multilinear(&few, Lsp::Pl, Terms::FULL).is_err());
        assert!(fit_multilinear(&[], Lsp::Pl, Terms::FULL).is_err());
        let mut mixed: Vec<LspSample> = (0..100).map(|k| sample(k, covariates(&mut r), 1.0)).collect();
        mixed[3].state = LinkState::Los;
        assert!(fit_multilinear(&mixed, Lsp::Ds, Terms::FULL).is_err());
        // non-finite values are skipped, not fatal
        let mut inf: Vec<LspSample> = (0..100).map(|k| sample(k, covariates(&mut r), 1.0)).collect();
        inf[0].values.ds = f64::NEG_INFINITY;
        assert_eq!(fit_multilinear(&inf, Lsp::Ds, Terms::FULL).unwrap().n, 99);
    }

    #[test]
    fn order_does_not_matter() {
        let mut r = rng::stream(5, &[]);
        let mut s: Vec<LspSample> = (0..300)
            .map(|k| {
                let c = covariates(&mut r);
                sample(k, c, r.sample::<f64, _>(StandardNormal) + c.freq_ghz.log10())
            })
            .collect();
        let a = fit_multilinear(&s, Lsp::Asa, Terms::FULL).unwrap();
        s.reverse();
        assert_eq!(a, fit_multilinear(&s, Lsp::Asa, Terms::FULL).unwrap());
    }

    #[test]
    fn scenario_fit_and_shadow_fading() {
        let db = ParameterDatabase::bundled();
        let reference = db.base(Scenario::Urban).unwrap();
        let mut r = rng::stream(6, &[]);
        let mut s: Vec<LspSample> = (0..400)
            .map(|k| {
                let c = covariates(&mut r);
                let mut x = sample(k, c, r.sample(StandardNormal));
                if k % 2 == 0 {
                    x.state = LinkState::Los;
                    x.values.kf = Some(10.0);
                }
                x
            })
            .collect();
        let (set, fits) = fit_scenario(&s, reference, "UrbanFit").unwrap();
        assert_eq!(fits.len(), 15);
        assert!(!set.nlos.lsps.contains_key(&Lsp::Kf));
        assert_eq!(set.los.coeffs(Lsp::Ds).unwrap().lambda, reference.los.coeffs(Lsp::Ds).unwrap().lambda);
        assert_eq!(set.los.clusters, reference.los.clusters);
        fill_shadow_fading(&mut s, &set).unwrap();
        let mean_sf = s.iter().map(|x| x.values.sf.unwrap()).sum::<f64>() / s.len() as f64;
        assert!(mean_sf.abs() < 1e-9, "{mean_sf}");
    }
}
