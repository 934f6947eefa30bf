//! LSP records and correlated LSP draws.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::params::{CorrelationMatrix, StateParams};
use super::Lsp;
use crate::error::{Error, Result};
use crate::scenario::{LinkState, Scenario};

/// Regression covariates of one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Covariates {
    /// m
    pub distance: f64,
    /// GHz
    pub freq_ghz: f64,
    /// rad
    pub elevation: f64,
}

/// Identifies the link a sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LinkKey {
    pub term_id: usize,
    pub sat_id: usize,
    pub time: f64,
}

impl LinkKey {
    /// Stable 64-bit key for RNG sub-streams.
    pub fn stream_parts(&self) -> [u64; 3] {
        [self.term_id as u64, self.sat_id as u64, self.time.to_bits()]
    }
}

/// One realization of every LSP. Spreads are log10 (DS in s, angles in deg);
/// losses and ratios are dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LspValues {
    pub pl: f64,
    /// Set once the PL regression is known.
    pub sf: Option<f64>,
    /// LOS only.
    pub kf: Option<f64>,
    pub ds: f64,
    pub asa: f64,
    pub asd: f64,
    pub esa: f64,
    pub esd: f64,
    pub xpr: f64,
}

impl LspValues {
    pub fn get(&self, lsp: Lsp) -> Option<f64> {
        match lsp {
            Lsp::Pl => Some(self.pl),
            Lsp::Kf => self.kf,
            Lsp::Ds => Some(self.ds),
            Lsp::Asa => Some(self.asa),
            Lsp::Asd => Some(self.asd),
            Lsp::Esa => Some(self.esa),
            Lsp::Esd => Some(self.esd),
            Lsp::Xpr => Some(self.xpr),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LspSample {
    pub key: LinkKey,
    pub scenario: Scenario,
    pub state: LinkState,
    pub cov: Covariates,
    pub values: LspValues,
}

/// Draws correlated LSP realizations for one scenario and link state.
#[derive(Debug, Clone)]
pub struct LspMixer {
    root: [[f64; 7]; 7],
}

impl LspMixer {
    pub fn new(corr: &CorrelationMatrix) -> Self {
        Self { root: corr.sqrt() }
    }

    /// Correlated deviates in [`Lsp::CORRELATED`] order from independent
    /// unit-variance inputs.
    pub fn mix(&self, z: &[f64; 7]) -> [f64; 7] {
        let mut x = [0.0; 7];
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = (0..7).map(|k| self.root[i][k] * z[k]).sum();
        }
        x
    }

    /// LSP values from independent unit-variance inputs `z` (correlated
    /// LSPs) and `z_xpr`.
    pub fn values(&self, p: &StateParams, state: LinkState, cov: &Covariates, z: &[f64; 7], z_xpr: f64) -> Result<LspValues> {
        let x = self.mix(z);
        let (d, f, a) = (cov.distance, cov.freq_ghz, cov.elevation);
        let at = |lsp: Lsp| -> Result<f64> {
            let i = Lsp::CORRELATED.iter().position(|l| *l == lsp).expect("correlated LSP");
            p.coeffs(lsp)?.eval(d, f, a, x[i])
        };
        let pl_c = p.coeffs(Lsp::Pl)?;
        let sf = pl_c.eval_std(f, a) * x[2];
        let kf = match state {
            LinkState::Los => Some(at(Lsp::Kf)?),
            LinkState::Nlos => None,
        };
        Ok(LspValues {
            pl: pl_c.eval_mean(d, f, a)? + sf,
            sf: Some(sf),
            kf,
            ds: at(Lsp::Ds)?,
            asa: at(Lsp::Asa)?,
            asd: at(Lsp::Asd)?,
            esa: at(Lsp::Esa)?,
            esd: at(Lsp::Esd)?,
            xpr: p.coeffs(Lsp::Xpr)?.eval(d, f, a, z_xpr)?,
        })
    }

    /// As [`LspMixer::values`] with i.i.d. inputs from `rng`, for links that
    /// are far apart compared to every decorrelation distance.
    pub fn draw<R: Rng + ?Sized>(&self, p: &StateParams, state: LinkState, cov: &Covariates, rng: &mut R) -> Result<LspValues> {
        let mut z = [0.0; 7];
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let z_xpr = rng.sample(StandardNormal);
        self.values(p, state, cov, &z, z_xpr)
    }
}

/// Spatially consistent LSP map: one correlated field per LSP with its own
/// decorrelation distance, mixed across LSPs at every position.
pub fn sample_lsp_map<R: Rng + ?Sized>(
    p: &StateParams,
    state: LinkState,
    corr: &CorrelationMatrix,
    positions: &[[f64; 2]],
    cov: &[Covariates],
    rng: &mut R,
) -> Result<Vec<LspValues>> {
    if positions.len() != cov.len() {
        return Err(Error::InvalidInput("positions and covariates differ in length".into()));
    }
    let lambda = |lsp: Lsp| -> Result<f64> {
        match p.lsps.get(&lsp) {
            Some(c) => c.lambda.ok_or_else(|| Error::Parameters(format!("{lsp} has no decorrelation distance"))),
            None => Ok(50.0),
        }
    };
    let mut fields = Vec::with_capacity(8);
    for lsp in Lsp::CORRELATED.iter().chain([Lsp::Xpr].iter()) {
        fields.push(super::correlated_field(positions, lambda(*lsp)?, rng)?);
    }
    let mixer = LspMixer::new(corr);
    (0..positions.len())
        .map(|k| {
            let z: [f64; 7] = std::array::from_fn(|i| fields[i][k]);
            mixer.values(p, state, &cov[k], &z, fields[7][k])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lsp::ParameterDatabase;
    use crate::rng;

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for (x, y) in a.iter().zip(b) {
            sab += (x - ma) * (y - mb);
            saa += (x - ma).powi(2);
            sbb += (y - mb).powi(2);
        }
        sab / (saa * sbb).sqrt()
    }

    const COV: Covariates = Covariates { distance: 1.2e6, freq_ghz: 20.0, elevation: 0.7 };

    #[test]
    fn ds_kf_correlation() {
        let db = ParameterDatabase::bundled();
        let p = &db.base(Scenario::DenseUrban).unwrap().los;
        let mixer = LspMixer::new(&db.correlation(Scenario::DenseUrban, LinkState::Los));
        let mut r = rng::stream(11, &[]);
        let draws: Vec<LspValues> = (0..100_000).map(|_| mixer.draw(p, LinkState::Los, &COV, &mut r).unwrap()).collect();
        let ds: Vec<f64> = draws.iter().map(|v| v.ds).collect();
        let kf: Vec<f64> = draws.iter().map(|v| v.kf.unwrap()).collect();
        let c = corr(&ds, &kf);
        assert!((c + 0.8).abs() < 0.05, "{c}");

        // population moments against the model
        for (lsp, vals) in [(Lsp::Ds, &ds), (Lsp::Kf, &kf)] {
            let co = p.coeffs(lsp).unwrap();
            let n = vals.len() as f64;
            let m = vals.iter().sum::<f64>() / n;
            let s = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
            let want_m = co.eval_mean(COV.distance, COV.freq_ghz, COV.elevation).unwrap();
            let want_s = co.eval_std(COV.freq_ghz, COV.elevation);
            assert!((m - want_m).abs() < 3.0 * want_s / n.sqrt(), "{lsp} mean {m} vs {want_m}");
            assert!((s - want_s).abs() < 3.0 * want_s / (2.0 * n).sqrt(), "{lsp} std {s} vs {want_s}");
        }
    }

    #[test]
    fn identity_and_zero_spread() {
        let db = ParameterDatabase::bundled();
        let mut p = db.base(Scenario::Rural).unwrap().nlos.clone();
        for c in p.lsps.values_mut() {
            c.sig = 0.0;
            c.del = 0.0;
            c.bet = 0.0;
        }
        let mixer = LspMixer::new(&CorrelationMatrix::identity());
        let v = mixer.draw(&p, LinkState::Nlos, &COV, &mut rng::stream(2, &[])).unwrap();
        assert_eq!(v.ds, p.coeffs(Lsp::Ds).unwrap().eval_mean(COV.distance, COV.freq_ghz, COV.elevation).unwrap());
        assert_eq!(v.pl, p.coeffs(Lsp::Pl).unwrap().eval_mean(COV.distance, COV.freq_ghz, COV.elevation).unwrap());
        assert_eq!(v.kf, None);
        let z = [0.3, -1.0, 2.0, 0.5, 0.1, -0.2, 0.9];
        assert_eq!(mixer.mix(&z), z);
    }

    #[test]
    fn map_is_spatially_consistent() {
        let db = ParameterDatabase::bundled();
        let p = &db.base(Scenario::Urban).unwrap().los;
        let c = db.correlation(Scenario::Urban, LinkState::Los);
        let pos = [[0.0, 0.0], [0.0, 0.0], [5000.0, 0.0]];
        let v = sample_lsp_map(p, LinkState::Los, &c, &pos, &[COV; 3], &mut rng::stream(3, &[])).unwrap();
        assert_eq!(v[0], v[1]);
        assert_ne!(v[0], v[2]);
        assert!(sample_lsp_map(p, LinkState::Los, &c, &pos, &[COV; 2], &mut rng::stream(3, &[])).is_err());
    }
}
