//! Brute-force sparse state-vector simulator.
//!
//! A basis label is the concatenation of every register's value; amplitudes
//! live in an ordered map so iteration, sampling, and dumps are
//! deterministic. Classical steps of the circuits (`U_f`, uncomputation, `J`)
//! are label rewrites; the only dense transforms are Hadamard on bit
//! registers and the QFT over Z_q.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::gaussian::{kahan_sum, Density, GaussianError, TruncatedGaussian};
use crate::ntcf::NtcfKey;
use crate::trapdoor::for_each_vector;
use crate::zq::{j_encode, mat_vec_mul, Modulus, ZqError, ZqVector};

/// Amplitudes below this magnitude are dropped.
pub const PRUNE_EPS: f64 = 1e-14;
pub const DEFAULT_LABEL_CAP: usize = 1 << 22;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("empty domain")]
    EmptyDomain,
    #[error("no register named `{0}`")]
    UnknownRegister(String),
    #[error("register `{0}` already exists")]
    DuplicateRegister(String),
    #[error("register `{0}` is not a bit register")]
    NotBits(String),
    #[error("register `{0}` is not a mod-q register")]
    NotModular(String),
    #[error("label has {got} entries, expected {expected}")]
    LabelLength { expected: usize, got: usize },
    #[error("label value {value} out of range for register `{register}`")]
    LabelRange { register: String, value: u32 },
    #[error("state would exceed the cap of {0} basis labels")]
    CapExceeded(usize),
    #[error("relabeling of `{0}` is not injective")]
    NotInjective(String),
    #[error("register `{0}` is not constant and cannot be discarded")]
    Entangled(String),
    #[error("outcome has zero probability")]
    ZeroProbability,
    #[error("states have different register layouts")]
    LayoutMismatch,
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
    #[error(transparent)]
    Zq(#[from] ZqError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegisterKind {
    Modular { modulus: Modulus, dim: usize },
    Bits { width: usize },
}

impl RegisterKind {
    pub fn slots(&self) -> usize {
        match *self {
            RegisterKind::Modular { dim, .. } => dim,
            RegisterKind::Bits { width } => width,
        }
    }

    fn radix(&self) -> u32 {
        match *self {
            RegisterKind::Modular { modulus, .. } => modulus.q(),
            RegisterKind::Bits { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterSpec {
    pub name: String,
    pub kind: RegisterKind,
}

impl RegisterSpec {
    pub fn modular(name: &str, modulus: Modulus, dim: usize) -> Self {
        Self { name: name.into(), kind: RegisterKind::Modular { modulus, dim } }
    }

    pub fn bits(name: &str, width: usize) -> Self {
        Self { name: name.into(), kind: RegisterKind::Bits { width } }
    }
}

/// Read access to the registers of one basis label.
pub struct LabelView<'a> {
    state: &'a SparseState,
    label: &'a [u32],
}

impl<'a> LabelView<'a> {
    /// Panics on an unknown name; callers resolve names before iterating.
    pub fn get(&self, name: &str) -> &'a [u32] {
        let (start, len) = self.state.range(name).expect("register resolved by caller");
        &self.label[start..start + len]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseState {
    registers: Vec<RegisterSpec>,
    amps: BTreeMap<Vec<u32>, Complex64>,
    cap: usize,
}

impl SparseState {
    /// Equal amplitudes over `domain`; duplicates count once.
    pub fn init_uniform(registers: Vec<RegisterSpec>, domain: Vec<Vec<u32>>) -> Result<Self, OracleError> {
        let mut st = Self { registers, amps: BTreeMap::new(), cap: DEFAULT_LABEL_CAP };
        for label in domain {
            st.check_label(&label)?;
            st.amps.insert(label, Complex64::new(1.0, 0.0));
        }
        if st.amps.is_empty() {
            return Err(OracleError::EmptyDomain);
        }
        if st.amps.len() > st.cap {
            return Err(OracleError::CapExceeded(st.cap));
        }
        let a = 1.0 / (st.amps.len() as f64).sqrt();
        st.amps.values_mut().for_each(|v| *v = Complex64::new(a, 0.0));
        Ok(st)
    }

    /// Uniform superposition over every label of the registers.
    pub fn uniform_product(registers: Vec<RegisterSpec>) -> Result<Self, OracleError> {
        let radices: Vec<u32> = registers.iter().flat_map(|r| vec![r.kind.radix(); r.kind.slots()]).collect();
        let size = radices.iter().try_fold(1usize, |acc, &r| acc.checked_mul(r as usize));
        if size.is_none_or(|s| s > DEFAULT_LABEL_CAP) {
            return Err(OracleError::CapExceeded(DEFAULT_LABEL_CAP));
        }
        let mut domain = Vec::new();
        let mut x = vec![0u32; radices.len()];
        'outer: loop {
            domain.push(x.clone());
            for j in (0..x.len()).rev() {
                x[j] += 1;
                if x[j] < radices[j] {
                    continue 'outer;
                }
                x[j] = 0;
            }
            break;
        }
        Self::init_uniform(registers, domain)
    }

    /// Builds a state from explicit amplitudes, normalizing them.
    pub fn from_amplitudes(
        registers: Vec<RegisterSpec>,
        amps: impl IntoIterator<Item = (Vec<u32>, Complex64)>,
    ) -> Result<Self, OracleError> {
        let mut st = Self { registers, amps: BTreeMap::new(), cap: DEFAULT_LABEL_CAP };
        for (label, a) in amps {
            st.check_label(&label)?;
            *st.amps.entry(label).or_default() += a;
        }
        st.prune();
        let norm = st.norm_sq().sqrt();
        if norm == 0.0 {
            return Err(OracleError::EmptyDomain);
        }
        st.amps.values_mut().for_each(|v| *v /= norm);
        Ok(st)
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn registers(&self) -> &[RegisterSpec] {
        &self.registers
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn amplitude(&self, label: &[u32]) -> Complex64 {
        self.amps.get(label).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<u32>, &Complex64)> + '_ {
        self.amps.iter()
    }

    pub fn norm_sq(&self) -> f64 {
        kahan_sum(self.amps.values().map(|a| a.norm_sqr()))
    }

    fn width(&self) -> usize {
        self.registers.iter().map(|r| r.kind.slots()).sum()
    }

    fn index(&self, name: &str) -> Result<usize, OracleError> {
        self.registers.iter().position(|r| r.name == name).ok_or_else(|| OracleError::UnknownRegister(name.into()))
    }

    /// `(offset, slots)` of a register within a label.
    fn range(&self, name: &str) -> Result<(usize, usize), OracleError> {
        let i = self.index(name)?;
        let start = self.registers[..i].iter().map(|r| r.kind.slots()).sum();
        Ok((start, self.registers[i].kind.slots()))
    }

    fn check_label(&self, label: &[u32]) -> Result<(), OracleError> {
        if label.len() != self.width() {
            return Err(OracleError::LabelLength { expected: self.width(), got: label.len() });
        }
        let mut pos = 0;
        for r in &self.registers {
            for &v in &label[pos..pos + r.kind.slots()] {
                if v >= r.kind.radix() {
                    return Err(OracleError::LabelRange { register: r.name.clone(), value: v });
                }
            }
            pos += r.kind.slots();
        }
        Ok(())
    }

    fn prune(&mut self) {
        self.amps.retain(|_, a| a.norm() >= PRUNE_EPS);
    }

    fn check_cap(&self, size: usize) -> Result<(), OracleError> {
        if size > self.cap {
            return Err(OracleError::CapExceeded(self.cap));
        }
        Ok(())
    }

    /// `|l⟩ ↦ |l⟩|f(l)⟩` with a fresh register.
    pub fn compute_register(
        &mut self,
        spec: RegisterSpec,
        f: impl Fn(&LabelView<'_>) -> Vec<u32>,
    ) -> Result<(), OracleError> {
        if self.index(&spec.name).is_ok() {
            return Err(OracleError::DuplicateRegister(spec.name));
        }
        let mut out = BTreeMap::new();
        for (label, &a) in &self.amps {
            let mut value = f(&LabelView { state: self, label });
            let mut full = label.clone();
            full.append(&mut value);
            out.insert(full, a);
        }
        self.registers.push(spec);
        if let Some(label) = out.keys().next() {
            self.check_label(label)?;
        }
        self.amps = out;
        Ok(())
    }

    /// Rewrites register `name` in place and optionally changes its type;
    /// fails unless the rewrite is injective on the current support.
    pub fn relabel_register(
        &mut self,
        name: &str,
        new_kind: Option<RegisterKind>,
        f: impl Fn(&LabelView<'_>) -> Vec<u32>,
    ) -> Result<(), OracleError> {
        let i = self.index(name)?;
        let (start, len) = self.range(name)?;
        let mut out = BTreeMap::new();
        for (label, &a) in &self.amps {
            let value = f(&LabelView { state: self, label });
            let mut full = Vec::with_capacity(label.len() - len + value.len());
            full.extend_from_slice(&label[..start]);
            full.extend_from_slice(&value);
            full.extend_from_slice(&label[start + len..]);
            if out.insert(full, a).is_some() {
                return Err(OracleError::NotInjective(name.into()));
            }
        }
        if let Some(kind) = new_kind {
            self.registers[i].kind = kind;
        }
        self.amps = out;
        if let Some(label) = self.amps.keys().next() {
            self.check_label(label)?;
        }
        Ok(())
    }

    /// Drops a register that holds the same value on every label.
    pub fn discard_register(&mut self, name: &str) -> Result<Vec<u32>, OracleError> {
        let i = self.index(name)?;
        let (start, len) = self.range(name)?;
        let mut value: Option<Vec<u32>> = None;
        for label in self.amps.keys() {
            let v = &label[start..start + len];
            match &value {
                None => value = Some(v.to_vec()),
                Some(w) if w != v => return Err(OracleError::Entangled(name.into())),
                _ => {}
            }
        }
        self.amps = std::mem::take(&mut self.amps)
            .into_iter()
            .map(|(mut l, a)| {
                l.drain(start..start + len);
                (l, a)
            })
            .collect();
        self.registers.remove(i);
        Ok(value.unwrap_or_default())
    }

    /// Tensors a fresh mod-q register carrying `Σ √D(e₀) |e₀⟩`.
    pub fn load_gaussian_register(&mut self, name: &str, g: &TruncatedGaussian) -> Result<(), OracleError> {
        if self.index(name).is_ok() {
            return Err(OracleError::DuplicateRegister(name.into()));
        }
        let table = g.table(self.cap)?;
        self.check_cap(self.amps.len().saturating_mul(table.len()))?;
        let mut out = BTreeMap::new();
        for (label, &a) in &self.amps {
            for (point, p) in table.iter() {
                let mut full = label.clone();
                full.extend_from_slice(point);
                out.insert(full, a * p.sqrt());
            }
        }
        self.registers.push(RegisterSpec::modular(name, g.modulus(), g.dim()));
        self.amps = out;
        Ok(())
    }

    /// `|b⟩|x⟩|e₀⟩ ↦ |b⟩|x⟩|Ax + e₀ + b·t⟩`, in place on register `e_reg`.
    pub fn apply_ufkb(&mut self, key: &NtcfKey, b_reg: &str, x_reg: &str, e_reg: &str) -> Result<(), OracleError> {
        self.check_ufkb_layout(key, b_reg, x_reg, e_reg)?;
        let q = key.params.q;
        self.relabel_register(e_reg, None, |v| {
            let y = image_of(key, v.get(b_reg)[0], v.get(x_reg));
            y.iter().zip(v.get(e_reg)).map(|(&yi, &ei)| q.add(yi, ei)).collect()
        })
    }

    /// `|b⟩|x⟩|e₀⟩|0⟩ ↦ |b⟩|x⟩|e₀⟩|Ax + e₀ + b·t⟩` into a new register.
    pub fn compute_image(
        &mut self,
        key: &NtcfKey,
        b_reg: &str,
        x_reg: &str,
        e_reg: &str,
        y_reg: &str,
    ) -> Result<(), OracleError> {
        self.check_ufkb_layout(key, b_reg, x_reg, e_reg)?;
        let q = key.params.q;
        self.compute_register(RegisterSpec::modular(y_reg, q, key.params.m), |v| {
            let y = image_of(key, v.get(b_reg)[0], v.get(x_reg));
            y.iter().zip(v.get(e_reg)).map(|(&yi, &ei)| q.add(yi, ei)).collect()
        })
    }

    /// `e₀ ↦ e₀ − (y − Ax − b·t) = 0`, then removes the noise register.
    pub fn uncompute_noise(
        &mut self,
        key: &NtcfKey,
        b_reg: &str,
        x_reg: &str,
        e_reg: &str,
        y_reg: &str,
    ) -> Result<(), OracleError> {
        let q = key.params.q;
        self.relabel_register(e_reg, None, |v| {
            let center = image_of(key, v.get(b_reg)[0], v.get(x_reg));
            v.get(e_reg).iter().zip(v.get(y_reg)).zip(&center).map(|((&e, &y), &c)| q.sub(e, q.sub(y, c))).collect()
        })?;
        let value = self.discard_register(e_reg)?;
        debug_assert!(value.iter().all(|&v| v == 0));
        Ok(())
    }

    fn check_ufkb_layout(&self, key: &NtcfKey, b_reg: &str, x_reg: &str, e_reg: &str) -> Result<(), OracleError> {
        let p = &key.params;
        let expect = [(b_reg, 1usize), (x_reg, p.n), (e_reg, p.m)];
        for (name, slots) in expect {
            let i = self.index(name)?;
            let kind = self.registers[i].kind;
            match kind {
                RegisterKind::Modular { dim, .. } if dim == slots => {}
                RegisterKind::Modular { dim, .. } => {
                    return Err(OracleError::LabelLength { expected: slots, got: dim })
                }
                RegisterKind::Bits { .. } => return Err(OracleError::NotModular(name.into())),
            }
        }
        Ok(())
    }

    /// Converts a mod-q register into the bit register `J(x)`.
    pub fn apply_j_encoding(&mut self, name: &str) -> Result<(), OracleError> {
        let i = self.index(name)?;
        let RegisterKind::Modular { modulus, dim } = self.registers[i].kind else {
            return Err(OracleError::NotModular(name.into()));
        };
        let width = dim * modulus.bits() as usize;
        self.relabel_register(name, Some(RegisterKind::Bits { width }), |v| {
            let x = ZqVector::new(v.get(name).to_vec(), modulus).expect("register values are residues");
            j_encode(&x).bits().iter().map(|&b| b as u32).collect()
        })
    }

    /// Hadamard on every qubit of a bit register.
    pub fn apply_hadamard_bits(&mut self, name: &str) -> Result<(), OracleError> {
        let i = self.index(name)?;
        let RegisterKind::Bits { width } = self.registers[i].kind else {
            return Err(OracleError::NotBits(name.into()));
        };
        let (start, _) = self.range(name)?;
        let outcomes = 1usize << width;
        self.check_cap(self.amps.len().saturating_mul(outcomes))?;
        let scale = (outcomes as f64).sqrt().recip();
        let mut out: BTreeMap<Vec<u32>, Complex64> = BTreeMap::new();
        for (label, &a) in &self.amps {
            let z = bits_to_index(&label[start..start + width]);
            for zp in 0..outcomes {
                let sign = if (z & zp).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
                let mut l = label.clone();
                index_to_bits(zp, &mut l[start..start + width]);
                *out.entry(l).or_default() += a * sign * scale;
            }
        }
        self.amps = out;
        self.prune();
        Ok(())
    }

    /// `F_q` on every coordinate of a mod-q register.
    pub fn apply_qft_q(&mut self, name: &str) -> Result<(), OracleError> {
        self.qft(name, 1.0)
    }

    pub fn apply_inverse_qft_q(&mut self, name: &str) -> Result<(), OracleError> {
        self.qft(name, -1.0)
    }

    fn qft(&mut self, name: &str, sign: f64) -> Result<(), OracleError> {
        let i = self.index(name)?;
        let RegisterKind::Modular { modulus, dim } = self.registers[i].kind else {
            return Err(OracleError::NotModular(name.into()));
        };
        let (start, _) = self.range(name)?;
        let q = modulus.q() as usize;
        let roots: Vec<Complex64> =
            (0..q).map(|k| Complex64::from_polar(1.0, sign * 2.0 * PI * k as f64 / q as f64)).collect();
        let scale = (q as f64).sqrt().recip();
        for c in start..start + dim {
            self.check_cap(self.amps.len().saturating_mul(q))?;
            let mut out: BTreeMap<Vec<u32>, Complex64> = BTreeMap::new();
            for (label, &a) in &self.amps {
                let iv = label[c] as usize;
                for y in 0..q {
                    let mut l = label.clone();
                    l[c] = y as u32;
                    *out.entry(l).or_default() += a * roots[(iv * y) % q] * scale;
                }
            }
            self.amps = out;
            self.prune();
        }
        Ok(())
    }

    /// Exact `|amp|²` marginal over the named registers, in the given order.
    pub fn full_distribution(&self, names: &[&str]) -> Result<Density, OracleError> {
        let ranges = names.iter().map(|n| self.range(n)).collect::<Result<Vec<_>, _>>()?;
        let mut acc: BTreeMap<Vec<u32>, Vec<f64>> = BTreeMap::new();
        for (label, a) in &self.amps {
            let key: Vec<u32> = ranges.iter().flat_map(|&(s, l)| label[s..s + l].iter().copied()).collect();
            acc.entry(key).or_default().push(a.norm_sqr());
        }
        Ok(Density::from_pairs(acc.into_iter().map(|(k, v)| (k, kahan_sum(v)))))
    }

    /// Collapses onto `value` in register `name`; returns its probability.
    pub fn project(&mut self, name: &str, value: &[u32]) -> Result<f64, OracleError> {
        let (start, len) = self.range(name)?;
        if value.len() != len {
            return Err(OracleError::LabelLength { expected: len, got: value.len() });
        }
        self.amps.retain(|l, _| &l[start..start + len] == value);
        let p = self.norm_sq();
        if p == 0.0 {
            return Err(OracleError::ZeroProbability);
        }
        let norm = p.sqrt();
        self.amps.values_mut().for_each(|a| *a /= norm);
        Ok(p)
    }

    /// Samples an outcome from the exact marginal and collapses onto it.
    pub fn measure_register<R: Rng + ?Sized>(&mut self, name: &str, rng: &mut R) -> Result<Vec<u32>, OracleError> {
        let marginal = self.full_distribution(&[name])?;
        let u: f64 = rng.gen::<f64>() * marginal.total();
        let mut acc = 0.0;
        let mut chosen = None;
        for (value, p) in marginal.iter() {
            acc += p;
            chosen = Some(value.clone());
            if u < acc {
                break;
            }
        }
        let value = chosen.ok_or(OracleError::EmptyDomain)?;
        self.project(name, &value)?;
        Ok(value)
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &SparseState) -> Result<f64, OracleError> {
        if self.registers != other.registers {
            return Err(OracleError::LayoutMismatch);
        }
        let overlap: Complex64 = self.amps.iter().filter_map(|(l, a)| other.amps.get(l).map(|b| a.conj() * b)).sum();
        Ok(overlap.norm_sqr())
    }

    /// Debug dump: one `label -> re im` line per basis state.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in &self.registers {
            let _ = writeln!(s, "# {} {:?}", r.name, r.kind);
        }
        for (l, a) in &self.amps {
            let label: Vec<String> = l.iter().map(u32::to_string).collect();
            let _ = writeln!(s, "{} -> {:e} {:e}", label.join(" "), a.re, a.im);
        }
        s
    }
}

/// `Ax + b·t` as raw residues.
fn image_of(key: &NtcfKey, b: u32, x: &[u32]) -> Vec<u32> {
    let q = key.params.q;
    let xv = ZqVector::new(x.to_vec(), q).expect("register values are residues");
    let ax = mat_vec_mul(&key.a, &xv).expect("dimensions checked");
    ax.entries().iter().zip(key.t.entries()).map(|(&a, &t)| q.add(a, q.mul(b % q.q(), t))).collect()
}

fn bits_to_index(bits: &[u32]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
}

fn index_to_bits(mut v: usize, out: &mut [u32]) {
    for slot in out.iter_mut().rev() {
        *slot = (v & 1) as u32;
        v >>= 1;
    }
}

/// Register layout `B (κ), X (Z_q^n)` used by the image circuit.
pub fn bx_registers(key: &NtcfKey) -> Result<Vec<RegisterSpec>, OracleError> {
    let p = &key.params;
    Ok(vec![
        RegisterSpec::modular("B", Modulus::new_composite(p.kappa as u64)?, 1),
        RegisterSpec::modular("X", p.q, p.n),
    ])
}

/// Uniform `B, X`, Gaussian `E`, `U_f` into `Y`, uncompute `E`.
/// The result is the state over `B, X, Y` just before `Y` is measured.
pub fn image_circuit(key: &NtcfKey) -> Result<SparseState, OracleError> {
    let mut st = SparseState::uniform_product(bx_registers(key)?)?;
    let g = TruncatedGaussian::new(key.params.q, key.params.b_p, key.params.m)?;
    st.load_gaussian_register("E", &g)?;
    st.compute_image(key, "B", "X", "E", "Y")?;
    st.uncompute_noise(key, "B", "X", "E", "Y")?;
    Ok(st)
}

/// The `BX` residual left after measuring `Y = y` in [`image_circuit`],
/// with the `Y` register removed.
pub fn residual_after_image(circuit: &SparseState, y: &[u32]) -> Result<(f64, SparseState), OracleError> {
    let mut st = circuit.clone();
    let p = st.project("Y", y)?;
    st.discard_register("Y")?;
    Ok((p, st))
}

/// Every `y` the image circuit can output.
/// Law of measuring `Y`, then `B` and `X`, on the image circuit; labels are
/// `y‖b‖x`.
pub fn joint_distribution(key: &NtcfKey) -> Result<Density, OracleError> {
    image_circuit(key)?.full_distribution(&["Y", "B", "X"])
}

pub fn image_support(circuit: &SparseState) -> Result<Vec<Vec<u32>>, OracleError> {
    let marginal = circuit.full_distribution(&["Y"])?;
    Ok(marginal.iter().map(|(y, _)| y.clone()).collect())
}

/// Two-register `(B: 1 bit, X)` state `(|0,x₀⟩ + |1,x₁⟩)/√2`.
pub fn dcp_state(modulus: Modulus, x0: &ZqVector, x1: &ZqVector) -> Result<SparseState, OracleError> {
    let regs = vec![RegisterSpec::bits("B", 1), RegisterSpec::modular("X", modulus, x0.len())];
    let amp = Complex64::new(1.0, 0.0);
    let mut l0 = vec![0];
    l0.extend_from_slice(x0.entries());
    let mut l1 = vec![1];
    l1.extend_from_slice(x1.entries());
    SparseState::from_amplitudes(regs, [(l0, amp), (l1, amp)])
}

/// `J` onto `X`, Hadamard on `B` and `J(X)`; the returned density is over
/// `(c, d)` with `c` first.
pub fn equation_distribution(dcp: &SparseState) -> Result<Density, OracleError> {
    let mut st = dcp.clone();
    st.apply_j_encoding("X")?;
    st.apply_hadamard_bits("B")?;
    st.apply_hadamard_bits("X")?;
    st.full_distribution(&["B", "X"])
}

/// Every label of `Z_q^n`, in odometer order.
pub fn all_vectors(n: usize, modulus: Modulus) -> Vec<ZqVector> {
    let mut out = Vec::new();
    for_each_vector(n, modulus.q(), |x| out.push(ZqVector::new(x.to_vec(), modulus).expect("residues")));
    out
}
