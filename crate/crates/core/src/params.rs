//! Parameters of the κ-to-1 family, their validation, and named presets.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::codec::{CodecError, TextReader, TextWriter};
use crate::trapdoor::{min_gadget_rows, DEFAULT_GADGET_BASE, EXHAUSTIVE_CAP};
use crate::zq::{Modulus, ZqError};

pub const DEFAULT_RATIO_FLOOR: f64 = 8.0;

/// Target B_P shared by the desk presets; `C_T` is derived from it.
pub const DESK_B_P: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamsError {
    #[error("unknown preset `{0}` (known: tiny-exact, desk-k3, desk-k2)")]
    UnknownPreset(String),
    #[error("invalid parameters:\n{0}")]
    Invalid(ValidationReport),
    #[error(transparent)]
    Zq(#[from] ZqError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// Desk mode turns the asymptotic conditions into numeric floors with
/// warnings; asymptotic mode treats them as hard.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Desk,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayoutKind {
    Gadget,
    Exhaustive,
}

macro_rules! text_enum {
    ($ty:ident { $($variant:ident => $text:literal),+ }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $text),+ })
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($text => Ok($ty::$variant),)+
                    other => Err(format!("unknown {} `{other}`", stringify!($ty))),
                }
            }
        }
    };
}

text_enum!(Mode { Desk => "desk", Asymptotic => "asymptotic" });
text_enum!(LayoutKind { Gadget => "gadget", Exhaustive => "exhaustive" });

#[derive(Debug, Clone, PartialEq)]
pub struct NtcfParams {
    /// Security label; not used numerically.
    pub lambda: u32,
    pub q: Modulus,
    pub n: usize,
    pub m: usize,
    /// EDCP batch size and condition (i) only.
    pub ell: usize,
    pub kappa: u32,
    pub b_l: f64,
    pub b_v: f64,
    pub b_p: f64,
    pub c_t: f64,
    pub mode: Mode,
    pub layout: LayoutKind,
    /// Desk floor standing in for a super-polynomial ratio.
    pub ratio_floor: f64,
    /// Constant `c` in conditions (i) and (ii).
    pub c_decl: f64,
}

/// Violations (hard) and warnings (soft) found by [`NtcfParams::validate`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "violation: {v}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

/// `B_P = q / (κ·C_T·√(m·n·⌈log₂ q⌉))`.
pub fn b_p_formula(q: Modulus, n: usize, m: usize, kappa: u32, c_t: f64) -> f64 {
    q.q() as f64 / (kappa as f64 * c_t * ((m * n) as f64 * q.bits() as f64).sqrt())
}

/// The `C_T` that makes [`b_p_formula`] produce `b_p`.
pub fn c_t_for(q: Modulus, n: usize, m: usize, kappa: u32, b_p: f64) -> f64 {
    q.q() as f64 / (kappa as f64 * b_p * ((m * n) as f64 * q.bits() as f64).sqrt())
}

fn ulp(x: f64) -> f64 {
    let next = f64::from_bits(x.abs().to_bits() + 1);
    next - x.abs()
}

impl NtcfParams {
    /// Builds parameters whose `B_P` follows from `c_t`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        q: Modulus,
        n: usize,
        m: usize,
        ell: usize,
        kappa: u32,
        b_l: f64,
        b_v: f64,
        c_t: f64,
        layout: LayoutKind,
    ) -> Self {
        Self {
            lambda: 0,
            q,
            n,
            m,
            ell,
            kappa,
            b_l,
            b_v,
            b_p: b_p_formula(q, n, m, kappa, c_t),
            c_t,
            mode: Mode::Desk,
            layout,
            ratio_floor: DEFAULT_RATIO_FLOOR,
            c_decl: 1.0,
        }
    }

    /// q = 521, n = 2, m = 40 with the given κ and `B_P` = [`DESK_B_P`].
    pub fn desk(kappa: u32) -> Self {
        let q = Modulus::new(521).expect("521 is prime");
        let c_t = c_t_for(q, 2, 40, kappa, DESK_B_P);
        let mut p = Self::new(q, 2, 40, 4, kappa, 2.0 * 2f64.sqrt(), 3.2, c_t, LayoutKind::Gadget);
        p.lambda = 9;
        p
    }

    /// q = 7, n = 1, m = 2, κ = 3: every state is small enough to enumerate.
    pub fn tiny_exact() -> Self {
        let q = Modulus::new(7).expect("7 is prime");
        let c_t = c_t_for(q, 1, 2, 3, 2.5);
        let mut p = Self::new(q, 1, 2, 1, 3, 2.0, 2.25, c_t, LayoutKind::Exhaustive);
        p.lambda = 3;
        p
    }

    pub fn preset(name: &str) -> Result<Self, ParamsError> {
        match name {
            "tiny-exact" => Ok(Self::tiny_exact()),
            "desk-k3" => Ok(Self::desk(3)),
            "desk-k2" => Ok(Self::desk(2)),
            other => Err(ParamsError::UnknownPreset(other.to_string())),
        }
    }

    pub fn log_q(&self) -> u32 {
        self.q.bits()
    }

    /// Length of `J(x)` for `x ∈ Z_q^n`.
    pub fn bit_len(&self) -> usize {
        self.n * self.q.bits() as usize
    }

    /// Checks conditions (i)–(iv) and whether the trapdoor layout fits.
    pub fn validate(&self) -> ValidationReport {
        let mut r = ValidationReport::default();
        let logq = self.log_q() as f64;
        let desk = self.mode == Mode::Desk;

        if self.n == 0 || self.m == 0 {
            r.violations.push("n and m must be positive".into());
            return r;
        }
        if self.kappa < 1 || self.kappa > self.q.q() {
            r.violations.push(format!("κ = {} must lie in [1, q]", self.kappa));
        }
        for (name, v) in [("B_L", self.b_l), ("B_V", self.b_v), ("B_P", self.b_p), ("C_T", self.c_t)] {
            if !(v.is_finite() && v > 0.0) {
                r.violations.push(format!("{name} = {v} must be positive and finite"));
            }
        }
        if !r.is_ok() {
            return r;
        }

        // (i) n ≥ c·ℓ·log q
        let need_n = self.c_decl * self.ell as f64 * logq;
        if (self.n as f64) < need_n {
            let msg = format!("(i) n = {} is below c·ℓ·⌈log₂ q⌉ = {need_n}", self.n);
            if desk {
                r.warnings.push(msg)
            } else {
                r.violations.push(msg)
            }
        }
        // (ii) m ≥ c·n·log q
        let need_m = self.c_decl * self.n as f64 * logq;
        if (self.m as f64) < need_m {
            let msg = format!("(ii) m = {} is below c·n·⌈log₂ q⌉ = {need_m}", self.m);
            if desk {
                r.warnings.push(msg)
            } else {
                r.violations.push(msg)
            }
        }
        // (iii) B_P formula
        let expected = b_p_formula(self.q, self.n, self.m, self.kappa, self.c_t);
        if (self.b_p - expected).abs() > ulp(expected) {
            r.violations.push(format!("(iii) B_P = {} but q/(κ·C_T·√(mn⌈log₂ q⌉)) = {expected}", self.b_p));
        }
        // (iv) ordering
        let floor_l = 2.0 * (self.n as f64).sqrt();
        if !(floor_l <= self.b_l && self.b_l < self.b_v && self.b_v < self.b_p) {
            r.violations.push(format!(
                "(iv) need 2√n = {floor_l} ≤ B_L = {} < B_V = {} < B_P = {}",
                self.b_l, self.b_v, self.b_p
            ));
        }
        for (name, ratio) in [("B_P/B_V", self.b_p / self.b_v), ("B_V/B_L", self.b_v / self.b_l)] {
            if ratio < self.ratio_floor {
                let msg = format!("ratio {name} = {ratio:.4} is below the floor {}", self.ratio_floor);
                if desk {
                    r.warnings.push(msg)
                } else {
                    r.violations.push(msg)
                }
            }
        }

        match self.layout {
            LayoutKind::Gadget => match min_gadget_rows(self.n, self.q, DEFAULT_GADGET_BASE) {
                Ok(req) if self.m < req => r.violations.push(format!("gadget layout needs m ≥ {req}, got {}", self.m)),
                Ok(_) => {}
                Err(e) => r.violations.push(e.to_string()),
            },
            LayoutKind::Exhaustive => {
                let size = (self.q.q() as u128).checked_pow(self.n as u32).unwrap_or(u128::MAX);
                if size > EXHAUSTIVE_CAP as u128 {
                    r.violations.push(format!("exhaustive layout needs q^n ≤ {EXHAUSTIVE_CAP}, got {size}"));
                }
            }
        }
        r
    }

    /// Validation that fails on hard violations only.
    pub fn ensure_valid(&self) -> Result<ValidationReport, ParamsError> {
        let report = self.validate();
        if report.is_ok() {
            Ok(report)
        } else {
            Err(ParamsError::Invalid(report))
        }
    }

    pub fn write_text(&self, w: &mut TextWriter) {
        w.field("lambda", self.lambda)
            .field("q", self.q.q())
            .field("n", self.n)
            .field("m", self.m)
            .field("ell", self.ell)
            .field("kappa", self.kappa)
            .field("b_l", self.b_l)
            .field("b_v", self.b_v)
            .field("b_p", self.b_p)
            .field("c_t", self.c_t)
            .field("mode", self.mode)
            .field("layout", self.layout)
            .field("ratio_floor", self.ratio_floor)
            .field("c_decl", self.c_decl);
    }

    pub fn read_text(r: &mut TextReader<'_>) -> Result<Self, ParamsError> {
        let lambda = r.parse("lambda")?;
        let q = Modulus::new(r.parse("q")?)?;
        Ok(Self {
            lambda,
            q,
            n: r.parse("n")?,
            m: r.parse("m")?,
            ell: r.parse("ell")?,
            kappa: r.parse("kappa")?,
            b_l: r.parse("b_l")?,
            b_v: r.parse("b_v")?,
            b_p: r.parse("b_p")?,
            c_t: r.parse("c_t")?,
            mode: r.parse("mode")?,
            layout: r.parse("layout")?,
            ratio_floor: r.parse("ratio_floor")?,
            c_decl: r.parse("c_decl")?,
        })
    }
}
