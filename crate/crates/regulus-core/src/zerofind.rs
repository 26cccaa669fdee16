//! Bounded-search zero finding on represented compact metric spaces.
//!
//! Given a space `(a_i, d, alpha)`, a uniformly continuous `F` with modulus
//! `omega`, and a regularity modulus `rho` for `F` (every point with
//! `|F(x)| < 2^-rho(n)` lies within `2^-n` of the zero set), the finder
//! builds a sequence of indices `x_0, x_1, ...` with
//! `d(x_k, zer F) <= 2^-k`-style control and `d(x_(k+1), x_k) <= 2^-(k+1)`,
//! so the `x_k` converge to a zero at rate `2^-k`. Every stage is a least-
//! index scan over a bound computed from the moduli, and the exact test
//! values are recorded in certificates that can be re-checked later.

use serde::{Deserialize, Serialize};

use crate::rational::Rational;
use crate::spaces::{CompactSpaceRep, Modulus, UcFunctionRep};
use crate::{RegulusError, SearchCap};

/// Everything one stage committed to: the chosen index, the bound that was
/// scanned, and the exact approximants compared against the thresholds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCertificate {
    /// 0 is the base stage; stage `j >= 1` refines stage `j-1`.
    pub stage: u32,
    /// Chosen index: `x_stage = a_index`.
    pub index: u64,
    /// The scan ran over `0..=search_bound`.
    pub search_bound: u64,
    /// Precision at which `F(a_n)` was read.
    pub f_precision: u32,
    /// The signed approximant `(F(a_index))(f_precision)`.
    pub f_approx: Rational,
    /// The test was `|f_approx| < f_threshold`.
    pub f_threshold: Rational,
    /// Distance test against the previous stage (absent for the base).
    pub d_precision: Option<u32>,
    pub d_approx: Option<Rational>,
    pub d_threshold: Option<Rational>,
}

/// Lazily extended sequence of certified stages.
pub struct ZeroApproximationSequence<'p> {
    space: &'p CompactSpaceRep,
    f: &'p UcFunctionRep,
    rho: &'p Modulus,
    cap: SearchCap,
    stages: std::sync::Mutex<Vec<StageCertificate>>,
}

/// Entry point: nothing is computed until a stage is queried.
pub fn find_zero<'p>(
    space: &'p CompactSpaceRep,
    f: &'p UcFunctionRep,
    rho: &'p Modulus,
    cap: SearchCap,
) -> ZeroApproximationSequence<'p> {
    ZeroApproximationSequence {
        space,
        f,
        rho,
        cap,
        stages: std::sync::Mutex::new(Vec::new()),
    }
}

impl<'p> ZeroApproximationSequence<'p> {
    /// Certificate of stage `k`, computing stages up to `k` as needed.
    pub fn stage(&self, k: u32) -> Result<StageCertificate, RegulusError> {
        let mut stages = self.stages.lock().unwrap();
        while stages.len() <= k as usize {
            let next = self.compute_stage(&stages)?;
            stages.push(next);
        }
        Ok(stages[k as usize].clone())
    }

    /// Index of `x_k`.
    pub fn index(&self, k: u32) -> Result<u64, RegulusError> {
        Ok(self.stage(k)?.index)
    }

    /// All certificates computed so far.
    pub fn certificates(&self) -> Vec<StageCertificate> {
        self.stages.lock().unwrap().clone()
    }

    fn compute_stage(&self, done: &[StageCertificate]) -> Result<StageCertificate, RegulusError> {
        let omega = self.f.omega();
        if done.is_empty() {
            // base: the rho(2)-level test localizes within 2^-2 of the
            // zero set, enough to seed the invariant for stage 1
            let rho2 = self.rho.eval(2);
            let fp = rho2 + 2;
            let fthr = Rational::pow2(-(rho2 as i32) - 1);
            let bound = self.space.alpha(omega.eval(fp));
            self.cap.admit("zerofind base stage", bound)?;
            for n in 0..=bound {
                let fa = self.f.value(n).approx(fp);
                if fa.abs() < fthr {
                    return Ok(StageCertificate {
                        stage: 0,
                        index: n,
                        search_bound: bound,
                        f_precision: fp,
                        f_approx: fa,
                        f_threshold: fthr,
                        d_precision: None,
                        d_approx: None,
                        d_threshold: None,
                    });
                }
            }
            return Err(RegulusError::SearchExhausted {
                stage: "zerofind base stage".into(),
                bound,
            });
        }
        // step k -> k+1 with k = stage-1 of the stage being built
        let j = done.len() as u32;
        let k = j - 1;
        let prev = done[k as usize].index;
        let n_exp = (k + 1).max(self.rho.eval(k + 3));
        let dp = k + 4;
        let dthr = Rational::pow2(-(k as i32) - 3) + Rational::pow2(-(k as i32) - 2);
        let fp = n_exp + 2;
        let fthr = Rational::pow2(-(n_exp as i32) - 1);
        let bound = self.space.alpha((k + 4).max(omega.eval(n_exp + 2)));
        let stage_name = format!("zerofind stage {j}");
        self.cap.admit(&stage_name, bound)?;
        for n in 0..=bound {
            let da = self.space.dist(n, prev).approx(dp);
            if da >= dthr {
                continue;
            }
            let fa = self.f.value(n).approx(fp);
            if fa.abs() < fthr {
                return Ok(StageCertificate {
                    stage: j,
                    index: n,
                    search_bound: bound,
                    f_precision: fp,
                    f_approx: fa,
                    f_threshold: fthr,
                    d_precision: Some(dp),
                    d_approx: Some(da),
                    d_threshold: Some(dthr),
                });
            }
        }
        Err(RegulusError::SearchExhausted {
            stage: stage_name,
            bound,
        })
    }
}

/// One re-checked claim of a certificate.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyRow {
    pub stage: u32,
    pub ok: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub rows: Vec<VerifyRow>,
}

impl VerifyReport {
    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(|r| r.ok)
    }

    pub(crate) fn push(&mut self, stage: u32, ok: bool, detail: impl Into<String>) {
        self.rows.push(VerifyRow {
            stage,
            ok,
            detail: detail.into(),
        });
    }
}

/// Re-checks a certificate chain against the problem oracles: parameters are
/// re-derived from the moduli, every recorded approximant is re-evaluated,
/// the threshold tests are re-run, and (since each stage claims a *least*
/// index) every earlier index is re-scanned to confirm it fails. Any
/// tampering with an index or a recorded value surfaces as a failed row.
pub fn verify_certificates(
    space: &CompactSpaceRep,
    f: &UcFunctionRep,
    rho: &Modulus,
    certs: &[StageCertificate],
) -> VerifyReport {
    let mut report = VerifyReport { rows: Vec::new() };
    let omega = f.omega();
    for (pos, cert) in certs.iter().enumerate() {
        let stage = cert.stage;
        if stage as usize != pos {
            report.push(stage, false, format!("stage numbering broken at {pos}"));
            continue;
        }
        let (fp, fthr, bound, dpart) = if pos == 0 {
            let rho2 = rho.eval(2);
            (
                rho2 + 2,
                Rational::pow2(-(rho2 as i32) - 1),
                space.alpha(omega.eval(rho2 + 2)),
                None,
            )
        } else {
            let k = stage - 1;
            let n_exp = (k + 1).max(rho.eval(k + 3));
            let dthr = Rational::pow2(-(k as i32) - 3) + Rational::pow2(-(k as i32) - 2);
            (
                n_exp + 2,
                Rational::pow2(-(n_exp as i32) - 1),
                space.alpha((k + 4).max(omega.eval(n_exp + 2))),
                Some((k + 4, dthr, certs[pos - 1].index)),
            )
        };
        if cert.f_precision != fp || cert.f_threshold != fthr || cert.search_bound != bound {
            report.push(stage, false, "recorded parameters disagree with moduli");
            continue;
        }
        let passes = |n: u64| -> (bool, Rational, Option<Rational>) {
            let da = dpart
                .as_ref()
                .map(|(dp, _, prev)| space.dist(n, *prev).approx(*dp));
            let d_ok = match (&da, &dpart) {
                (Some(v), Some((_, dthr, _))) => *v < *dthr,
                _ => true,
            };
            if !d_ok {
                return (false, Rational::zero(), da);
            }
            let fa = f.value(n).approx(fp);
            let ok = fa.abs() < fthr;
            (ok, fa, da)
        };
        let (ok, fa, da) = passes(cert.index);
        if !ok {
            report.push(stage, false, "recorded index fails the stage tests");
            continue;
        }
        if fa != cert.f_approx {
            report.push(stage, false, "recorded F-approximant disagrees");
            continue;
        }
        match (&da, &cert.d_approx, &dpart) {
            (Some(v), Some(rec), Some((dp, dthr, _)))
                if v == rec
                    && cert.d_precision == Some(*dp)
                    && cert.d_threshold == Some(dthr.clone()) => {}
            (None, None, None) => {}
            _ => {
                report.push(stage, false, "recorded distance data disagrees");
                continue;
            }
        }
        let mut minimal = true;
        for n in 0..cert.index {
            if passes(n).0 {
                minimal = false;
                break;
            }
        }
        if !minimal {
            report.push(stage, false, "an earlier index passes the stage tests");
            continue;
        }
        report.push(
            stage,
            true,
            format!(
                "index {} least admissible within bound {}",
                cert.index, bound
            ),
        );
    }
    report
}
