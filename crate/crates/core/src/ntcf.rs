//! The κ-to-1 family: `f′_{k,b}(x) = D_{B_P}(· − Ax − b·t)` with public
//! `t = As + e`, its trapdoor inversion, and the public check.

use rand::Rng;
use thiserror::Error;

use crate::codec::{CodecError, TextReader, TextWriter};
use crate::gaussian::{hellinger_shift_bound, hellinger_sq, Density, GaussianError, TruncatedGaussian};
use crate::params::{LayoutKind, NtcfParams, ParamsError};
use crate::trapdoor::{gen_trap, gen_trap_exhaustive, invert, TrapdoorError, TrapdoorKey};
use crate::zq::{mat_vec_mul, ZqError, ZqMatrix, ZqVector};

pub const KEY_HEADER: &str = "ntcf-key v1";
pub const SECRET_HEADER: &str = "ntcf-sk v1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NtcfError {
    #[error("branch b = {b} is outside 0..{kappa}")]
    BranchOutOfRange { b: u32, kappa: u32 },
    #[error("trapdoor does not match the key")]
    KeyMismatch,
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Trapdoor(#[from] TrapdoorError),
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
    #[error(transparent)]
    Zq(#[from] ZqError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// Public key `k = (A, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NtcfKey {
    pub params: NtcfParams,
    pub a: ZqMatrix,
    pub t: ZqVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NtcfTrapdoor {
    pub trapdoor: TrapdoorKey,
    pub s: ZqVector,
    pub e: ZqVector,
}

/// `(x_0, …, x_{κ−1})` with `x_b = x_0 − b·s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Claw {
    pub xs: Vec<ZqVector>,
}

impl Claw {
    pub fn kappa(&self) -> usize {
        self.xs.len()
    }

    pub fn is_consistent(&self, s: &ZqVector) -> bool {
        self.xs.windows(2).all(|w| w[0].sub(&w[1]).as_ref() == Ok(s))
    }
}

/// Exact and bounded Hellinger distances for one branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchHellinger {
    pub b: u32,
    pub exact: f64,
    /// `1 − e^{−2π√m‖b·e‖/B_P}`.
    pub shift_bound: f64,
    /// `1 − e^{−2π·m·b·B_V/B_P}`.
    pub family_bound: f64,
}

impl NtcfKey {
    pub fn kappa(&self) -> u32 {
        self.params.kappa
    }

    pub fn image_noise(&self) -> Result<TruncatedGaussian, NtcfError> {
        Ok(TruncatedGaussian::new(self.params.q, self.params.b_p, self.params.m)?)
    }

    fn check_branch(&self, b: u32) -> Result<(), NtcfError> {
        if b >= self.params.kappa {
            return Err(NtcfError::BranchOutOfRange { b, kappa: self.params.kappa });
        }
        Ok(())
    }

    /// `Ax + b·t`, the center of `f′_{k,b}(x)`.
    pub fn center(&self, b: u32, x: &ZqVector) -> Result<ZqVector, NtcfError> {
        Ok(mat_vec_mul(&self.a, x)?.add(&self.t.scale(b as i64))?)
    }

    /// Table of `f′_{k,b}(x)`; needs only the public key.
    pub fn f_prime_density(&self, b: u32, x: &ZqVector, cap: usize) -> Result<Density, NtcfError> {
        self.check_branch(b)?;
        Ok(self.image_noise()?.shifted_density(&self.center(b, x)?, cap)?)
    }

    /// Table of the ideal `f_{k,b}(x)`, centered at `Ax + b·As`.
    pub fn f_density(&self, td: &NtcfTrapdoor, b: u32, x: &ZqVector, cap: usize) -> Result<Density, NtcfError> {
        self.check_branch(b)?;
        let center = mat_vec_mul(&self.a, &x.add(&td.s.scale(b as i64))?)?;
        Ok(self.image_noise()?.shifted_density(&center, cap)?)
    }

    /// Public check: `y − Ax − b·t` lies in the support of `D_{B_P}`.
    /// The support is the box `|r_i| ≤ B_P`, which sits inside the ball
    /// `‖r‖ ≤ B_P√m`.
    pub fn chk(&self, b: u32, x: &ZqVector, y: &ZqVector) -> bool {
        if b >= self.params.kappa || x.len() != self.params.n || y.len() != self.params.m {
            return false;
        }
        let Ok(center) = self.center(b, x) else { return false };
        let Ok(r) = y.sub(&center) else { return false };
        let bound = self.params.b_p.floor() as i64;
        r.centered_lift().iter().all(|v| v.abs() <= bound)
    }

    pub fn to_text(&self) -> String {
        let mut w = TextWriter::new();
        w.line(KEY_HEADER);
        self.write_body(&mut w);
        w.finish()
    }

    pub(crate) fn write_body(&self, w: &mut TextWriter) {
        self.params.write_text(w);
        w.matrix("A", self.a.rows(), self.a.cols(), self.a.data());
        w.vector("t", self.t.entries());
    }

    pub fn from_text(text: &str) -> Result<Self, NtcfError> {
        let mut r = TextReader::new(text);
        r.expect_line(KEY_HEADER)?;
        let key = Self::read_body(&mut r)?;
        r.finish()?;
        Ok(key)
    }

    pub(crate) fn read_body(r: &mut TextReader<'_>) -> Result<Self, NtcfError> {
        let params = NtcfParams::read_text(r)?;
        params.ensure_valid()?;
        let (rows, cols, data) = r.matrix::<u32>("A")?;
        if rows != params.m || cols != params.n {
            return Err(r.error(format!("A is {rows}×{cols}, expected {}×{}", params.m, params.n)).into());
        }
        let a = ZqMatrix::new(rows, cols, data, params.q)?;
        let t = ZqVector::new(r.vector("t")?, params.q)?;
        if t.len() != params.m {
            return Err(r.error("t has the wrong length").into());
        }
        Ok(Self { params, a, t })
    }
}

/// GEN: trapdoor matrix, uniform `s`, `e ← D_{B_V}`.
pub fn gen<R: Rng + ?Sized>(p: &NtcfParams, rng: &mut R) -> Result<(NtcfKey, NtcfTrapdoor), NtcfError> {
    p.ensure_valid()?;
    let (a, trapdoor) = match p.layout {
        LayoutKind::Gadget => gen_trap(p.n, p.m, p.q, rng)?,
        LayoutKind::Exhaustive => gen_trap_exhaustive(p.n, p.m, p.q, rng)?,
    };
    let s = ZqVector::random(p.n, p.q, rng);
    let e = TruncatedGaussian::new(p.q, p.b_v, p.m)?.sample(rng);
    let t = mat_vec_mul(&a, &s)?.add(&e)?;
    Ok((NtcfKey { params: p.clone(), a, t }, NtcfTrapdoor { trapdoor, s, e }))
}

impl NtcfTrapdoor {
    /// INV: `Invert(t_A, y) − b·s`. Decoding absorbs `b·e` into the noise, so
    /// every branch shares one inversion; the result is not re-checked
    /// against the `B_P` box.
    pub fn inv(&self, key: &NtcfKey, b: u32, y: &ZqVector) -> Result<ZqVector, NtcfError> {
        key.check_branch(b)?;
        let (x, _) = invert(&self.trapdoor, y)?;
        Ok(x.sub(&self.s.scale(b as i64))?)
    }

    /// `x_b = inv(b, y)` for every branch.
    pub fn claw_enumerate(&self, key: &NtcfKey, y: &ZqVector) -> Result<Claw, NtcfError> {
        let x0 = self.inv(key, 0, y)?;
        let xs = (0..key.kappa()).map(|b| x0.sub(&self.s.scale(b as i64))).collect::<Result<_, _>>()?;
        Ok(Claw { xs })
    }

    /// Exact `H²(f_{k,b}(x), f′_{k,b}(x))` against both bounds.
    pub fn hellinger_branch(
        &self,
        key: &NtcfKey,
        b: u32,
        x: &ZqVector,
        cap: usize,
    ) -> Result<BranchHellinger, NtcfError> {
        let f = key.f_density(self, b, x, cap)?;
        let fp = key.f_prime_density(b, x, cap)?;
        let p = &key.params;
        let shift_norm = self.e.scale(b as i64).euclidean_norm();
        Ok(BranchHellinger {
            b,
            exact: hellinger_sq(&f, &fp),
            shift_bound: hellinger_shift_bound(p.b_p, p.m, shift_norm),
            family_bound: 1.0 - (-2.0 * std::f64::consts::PI * p.m as f64 * b as f64 * p.b_v / p.b_p).exp(),
        })
    }

    /// Secret file: parameters, `s`, `e`, then the trapdoor with `A`.
    pub fn to_text(&self, key: &NtcfKey) -> String {
        let mut w = TextWriter::new();
        w.line(SECRET_HEADER);
        key.params.write_text(&mut w);
        w.vector("s", self.s.entries());
        w.vector("e", self.e.entries());
        self.trapdoor.write_text(&mut w);
        w.finish()
    }

    /// Parses a secret file and rebuilds the matching public key.
    pub fn from_text(text: &str) -> Result<(NtcfKey, Self), NtcfError> {
        let mut r = TextReader::new(text);
        r.expect_line(SECRET_HEADER)?;
        let params = NtcfParams::read_text(&mut r)?;
        params.ensure_valid()?;
        let s = ZqVector::new(r.vector("s")?, params.q)?;
        let e = ZqVector::new(r.vector("e")?, params.q)?;
        let trapdoor = TrapdoorKey::read_text(&mut r, params.q)?;
        r.finish()?;
        let a = trapdoor.matrix().clone();
        if a.rows() != params.m || a.cols() != params.n || s.len() != params.n || e.len() != params.m {
            return Err(NtcfError::KeyMismatch);
        }
        let t = mat_vec_mul(&a, &s)?.add(&e)?;
        Ok((NtcfKey { params, a, t }, Self { trapdoor, s, e }))
    }

    pub fn matches(&self, key: &NtcfKey) -> bool {
        self.trapdoor.matrix() == &key.a
            && mat_vec_mul(&key.a, &self.s).and_then(|v| v.add(&self.e)).as_ref() == Ok(&key.t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::DEFAULT_TABLE_CAP;
    use crate::params::LayoutKind;
    use crate::trapdoor::for_each_vector;
    use crate::zq::Modulus;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// q = 17, n = 1, m = 2, exhaustive layout; small enough to scan every y.
    fn q17(kappa: u32) -> NtcfParams {
        let q = Modulus::new(17).unwrap();
        NtcfParams::new(
            q,
            1,
            2,
            1,
            kappa,
            2.0,
            2.5,
            crate::params::c_t_for(q, 1, 2, kappa, 3.5),
            LayoutKind::Exhaustive,
        )
    }

    fn sample_image<R: Rng>(key: &NtcfKey, b: u32, x: &ZqVector, rng: &mut R) -> ZqVector {
        key.center(b, x).unwrap().add(&key.image_noise().unwrap().sample(rng)).unwrap()
    }

    #[test]
    fn key_identity_and_noise_bound() {
        let p = NtcfParams::desk(3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let (k, td) = gen(&p, &mut rng).unwrap();
            assert_eq!(k.t.sub(&mat_vec_mul(&k.a, &td.s).unwrap()).unwrap(), td.e);
            assert!(td.e.euclidean_norm() <= p.b_v * (p.m as f64).sqrt());
            assert!(td.matches(&k));
        }
    }

    #[test]
    fn seeded_keys_serialize_identically() {
        let p = NtcfParams::desk(3);
        let a = gen(&p, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = gen(&p, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a.0.to_text(), b.0.to_text());
        assert_eq!(a.1.to_text(&a.0), b.1.to_text(&b.0));
    }

    #[test]
    fn files_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for p in [NtcfParams::desk(3), NtcfParams::tiny_exact()] {
            let (k, td) = gen(&p, &mut rng).unwrap();
            let text = k.to_text();
            assert_eq!(NtcfKey::from_text(&text).unwrap(), k);
            let (k2, td2) = NtcfTrapdoor::from_text(&td.to_text(&k)).unwrap();
            assert_eq!((k2, td2), (k.clone(), td));
            assert!(NtcfKey::from_text(&text.replace("kappa=", "kappa=1")).is_err());
        }
    }

    #[test]
    fn f_and_f_prime() {
        let p = q17(3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (k, td) = gen(&p, &mut rng).unwrap();
        let x = ZqVector::random(1, p.q, &mut rng);
        assert_eq!(
            k.f_density(&td, 0, &x, DEFAULT_TABLE_CAP).unwrap(),
            k.f_prime_density(0, &x, DEFAULT_TABLE_CAP).unwrap()
        );
        for b in 0..3 {
            let f = k.f_density(&td, b, &x, DEFAULT_TABLE_CAP).unwrap();
            let fp = k.f_prime_density(b, &x, DEFAULT_TABLE_CAP).unwrap();
            // f′ is f translated by b·e.
            let shift = td.e.scale(b as i64);
            for (y, pr) in f.iter() {
                let moved = ZqVector::new(y.clone(), p.q).unwrap().add(&shift).unwrap();
                assert_eq!(fp.prob(moved.entries()), pr);
            }
            assert_eq!(fp.mode().unwrap(), k.center(b, &x).unwrap().entries());
        }
        assert!(matches!(k.f_prime_density(3, &x, 10), Err(NtcfError::BranchOutOfRange { .. })));
    }

    #[test]
    fn inv_recovers_sampled_preimages() {
        let p = NtcfParams::desk(3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (k, td) = gen(&p, &mut rng).unwrap();
        for i in 0..1000 {
            let b = i % 3;
            let x = ZqVector::random(p.n, p.q, &mut rng);
            let y = sample_image(&k, b, &x, &mut rng);
            assert_eq!(td.inv(&k, b, &y).unwrap(), x);
            let x0 = td.inv(&k, 0, &y).unwrap();
            assert_eq!(td.inv(&k, b, &y).unwrap(), x0.sub(&td.s.scale(b as i64)).unwrap());
        }
        let x = ZqVector::random(p.n, p.q, &mut rng);
        assert_eq!(td.inv(&k, 2, &k.center(2, &x).unwrap()).unwrap(), x);
    }

    #[test]
    fn claw_differences_are_the_secret() {
        let p = NtcfParams::desk(3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (k, td) = gen(&p, &mut rng).unwrap();
        for _ in 0..100 {
            let x = ZqVector::random(p.n, p.q, &mut rng);
            let y = sample_image(&k, 1, &x, &mut rng);
            let claw = td.claw_enumerate(&k, &y).unwrap();
            assert_eq!(claw.kappa(), 3);
            assert!(claw.is_consistent(&td.s));
            for b in 0..3 {
                for b2 in 0..3 {
                    let d = claw.xs[b].sub(&claw.xs[b2]).unwrap();
                    assert_eq!(d, td.s.scale(b2 as i64 - b as i64));
                }
            }
        }
    }

    #[test]
    fn chk_matches_support_exhaustively() {
        let p = q17(3);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (k, _) = gen(&p, &mut rng).unwrap();
        for b in 0..3 {
            for xv in 0..17 {
                let x = ZqVector::new(vec![xv], p.q).unwrap();
                let table = k.f_prime_density(b, &x, DEFAULT_TABLE_CAP).unwrap();
                for_each_vector(2, 17, |y| {
                    let yv = ZqVector::new(y.to_vec(), p.q).unwrap();
                    assert_eq!(k.chk(b, &x, &yv), table.prob(y) > 0.0);
                });
            }
        }
        let x = ZqVector::zero(1, p.q);
        assert!(k.chk(0, &x, &k.center(0, &x).unwrap()));
        assert!(!k.chk(3, &x, &k.center(0, &x).unwrap()));
    }

    #[test]
    fn claw_matches_brute_force_scan() {
        // At q = 17, n = 1 every branch has a unique x passing chk when the
        // image noise stays inside the box for all branches.
        let p = q17(3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        while checked < 50 {
            let (k, td) = gen(&p, &mut rng).unwrap();
            let x = ZqVector::random(1, p.q, &mut rng);
            let y = sample_image(&k, 0, &x, &mut rng);
            let scan: Vec<Vec<ZqVector>> = (0..3)
                .map(|b| (0..17).map(|v| ZqVector::new(vec![v], p.q).unwrap()).filter(|xv| k.chk(b, xv, &y)).collect())
                .collect();
            if scan.iter().any(|s| s.len() != 1) {
                continue;
            }
            let Ok(claw) = td.claw_enumerate(&k, &y) else { continue };
            for b in 0..3 {
                assert_eq!(claw.xs[b], scan[b][0]);
            }
            checked += 1;
        }
    }

    #[test]
    fn hellinger_branches_at_q97() {
        let q = Modulus::new(97).unwrap();
        let p =
            NtcfParams::new(q, 1, 2, 1, 3, 2.0, 2.5, crate::params::c_t_for(q, 1, 2, 3, 6.0), LayoutKind::Exhaustive);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let (k, td) = gen(&p, &mut rng).unwrap();
            let x = ZqVector::random(1, q, &mut rng);
            let rows: Vec<_> = (0..3).map(|b| td.hellinger_branch(&k, b, &x, DEFAULT_TABLE_CAP).unwrap()).collect();
            assert_eq!((rows[0].exact, rows[0].shift_bound, rows[0].family_bound), (0.0, 0.0, 0.0));
            for r in &rows {
                assert!(r.exact <= r.shift_bound + 1e-10, "{r:?}");
                assert!(r.exact <= r.family_bound + 1e-10, "{r:?}");
            }
            if !td.e.is_zero() {
                assert!(rows[0].exact < rows[1].exact && rows[1].exact <= rows[2].exact, "{rows:?}");
            }
        }
    }
}
