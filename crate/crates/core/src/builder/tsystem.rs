//! The sector polynomials `T_l = f_{σ(l)}·e^{iφ_{σ(l)}}`.

use num_complex::Complex64;
use rayon::prelude::*;

use super::ConstructedSystem;
use crate::exact_eval::{character, RationalPoint, TrigPoly};
use crate::regions::FreqRegion;
use crate::tree::depth;
use crate::{Error, Result};

/// Explicit `f_n` and `T_l` of one system.
#[derive(Clone, Debug)]
pub struct TSystem {
    pub gamma: f64,
    /// `f_polys[n-2] = f_n`.
    pub f_polys: Vec<TrigPoly>,
    /// `t_polys[l-2] = T_l`.
    pub t_polys: Vec<TrigPoly>,
}

impl TSystem {
    /// Builds every `f_n` and `T_l`. The cap `γ` must not bind anywhere
    /// (`γ ≥ (d(n)+1)/√m` for all `n`), since the smoothing only encodes
    /// the sign conditions.
    pub fn build(sys: &ConstructedSystem, gamma: f64) -> Result<Self> {
        let m = sys.m();
        let nu = sys.nu();
        let worst = (2..=nu).map(|n| (depth(n) + 1) as f64).fold(0.0, f64::max) / (m as f64).sqrt();
        if gamma < worst {
            return Err(Error::Config(format!(
                "γ = {gamma} lets the cap bind (needs ≥ {worst:.4}); smoothing would not approximate E_n"
            )));
        }
        let f_polys: Vec<TrigPoly> = (2..=nu)
            .into_par_iter()
            .map(|n| sys.smoothing.poly(&sys.schedule, n))
            .collect::<Result<_>>()?;
        let t_polys = (2..=nu)
            .map(|l| {
                let n = sys.sigma.sigma(l);
                f_polys[n - 2].shift(sys.schedule.freq(n))
            })
            .collect::<Result<_>>()?;
        Ok(TSystem {
            gamma,
            f_polys,
            t_polys,
        })
    }

    pub fn term_count(&self) -> usize {
        self.t_polys.iter().map(|t| t.len()).sum()
    }

    /// `Σ_l T_l` as one polynomial.
    pub fn sum(&self) -> TrigPoly {
        self.t_polys
            .iter()
            .fold(TrigPoly::zero(), |acc, t| acc.add(t))
    }

    /// Terms of `T_l` outside `S_l`, over all `l`.
    pub fn placement_exceptions(&self, sys: &ConstructedSystem) -> usize {
        self.t_polys
            .par_iter()
            .zip(sys.sectors.par_iter())
            .map(|(t, s)| t.spectrum().filter(|f| !s.contains_freq(*f)).count())
            .sum()
    }

    /// `T_l(pt)` from the factored form of `f_{σ(l)}`.
    pub fn eval_factored(sys: &ConstructedSystem, l: usize, pt: RationalPoint) -> Complex64 {
        let n = sys.sigma.sigma(l);
        character(sys.schedule.freq(n), pt) * sys.smoothing.eval(&sys.schedule, n, pt)
    }

    /// `(T_2(pt), …, T_ν(pt))` from the factored forms.
    pub fn values_factored(sys: &ConstructedSystem, pt: RationalPoint) -> Vec<Complex64> {
        (2..=sys.nu())
            .map(|l| Self::eval_factored(sys, l, pt))
            .collect()
    }
}

/// `max_l |Σ_{j≤l} v_j|`.
pub fn max_prefix(values: &[Complex64]) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    values.iter().fold(0.0f64, |best, v| {
        acc += v;
        best.max(acc.norm())
    })
}
