//! Gromov–Witten numbers of `P^r` from the associativity (WDVV) equations.
//!
//! The instanton part of the potential is written in the divided-power basis
//!
//! ```text
//! Phi_d(x) = e^{d x_1} * sum_m I(d; m) x^m / m!
//! ```
//!
//! where `m` runs over exponent vectors of `x_2, ..., x_r`. In this basis a
//! partial derivative `d/dx_a` (a >= 2) just lowers one exponent, `d/dx_1`
//! multiplies the degree-`d` part by `d`, and `d/dx_0` kills it. Products pick
//! up binomial factors. All recursion arithmetic is exact.

use crate::numeric::{factorial, CompensatedSum};
use crate::{Error, Result, C64};
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// A key `(d; a_1 <= ... <= a_n)` of the Gromov–Witten table.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GwKey {
    degree: u32,
    insertions: Vec<u32>,
}

impl GwKey {
    /// Builds a canonical (sorted) key and validates it against the grading of `P^r`.
    pub fn new(r: u32, degree: u32, mut insertions: Vec<u32>) -> Result<Self> {
        insertions.sort_unstable();
        let key = GwKey { degree, insertions };
        key.validate(r)?;
        Ok(key)
    }

    fn validate(&self, r: u32) -> Result<()> {
        if self.degree == 0 {
            return Err(Error::InvalidParameter("degree must be positive".into()));
        }
        if self.insertions.len() < 2 {
            return Err(Error::InvalidParameter(
                "at least two insertions are required".into(),
            ));
        }
        if let Some(a) = self.insertions.iter().find(|&&a| a < 2 || a > r) {
            return Err(Error::InvalidParameter(format!(
                "insertion {a} outside [2, {r}]"
            )));
        }
        if self.weight() != grading_weight(r, self.degree) {
            return Err(Error::InvalidParameter(format!(
                "key {} violates the grading of P^{r}",
                self.label()
            )));
        }
        Ok(())
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn insertions(&self) -> &[u32] {
        &self.insertions
    }

    /// `sum (a_i - 1)`.
    pub fn weight(&self) -> u64 {
        self.insertions.iter().map(|&a| u64::from(a) - 1).sum()
    }

    /// Dash-joined insertion list, e.g. `2-2-3`.
    pub fn label(&self) -> String {
        let parts: Vec<String> = self.insertions.iter().map(|a| format!("{a}")).collect();
        parts.join("-")
    }

    fn exponents(&self, r: u32) -> Vec<u32> {
        let mut e = vec![0u32; (r - 1) as usize];
        for &a in &self.insertions {
            e[(a - 2) as usize] += 1;
        }
        e
    }

    fn from_exponents(degree: u32, exps: &[u32]) -> Self {
        let mut insertions = Vec::new();
        for (k, &m) in exps.iter().enumerate() {
            insertions.extend(core::iter::repeat_n(k as u32 + 2, m as usize));
        }
        GwKey { degree, insertions }
    }
}

/// Keys are ordered by degree, then by the number of insertions, then
/// lexicographically. This is also the order of the unknowns in the solver.
impl Ord for GwKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree
            .cmp(&other.degree)
            .then(self.insertions.len().cmp(&other.insertions.len()))
            .then(self.insertions.cmp(&other.insertions))
    }
}

impl PartialOrd for GwKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// `(r+1) d + r - 3`, the value of `sum (a_i - 1)` for admissible keys.
fn grading_weight(r: u32, d: u32) -> u64 {
    u64::from(r + 1) * u64::from(d) + u64::from(r) - 3
}

fn check_r(r: u32) -> Result<()> {
    if r < 2 {
        return Err(Error::InvalidParameter(format!(
            "projective dimension r = {r} must be at least 2"
        )));
    }
    Ok(())
}

/// All admissible keys of degree `d` for `P^r`, in lexicographic order of the
/// sorted multisets.
pub fn admissible_keys(r: u32, d: u32) -> Result<Vec<GwKey>> {
    check_r(r)?;
    if d < 1 {
        return Err(Error::InvalidParameter(format!(
            "degree d = {d} must be at least 1"
        )));
    }
    let target = grading_weight(r, d);
    let mut out = Vec::new();
    let mut current = Vec::new();
    fill_multisets(r, 2, target, &mut current, &mut out);
    out.retain(|a: &Vec<u32>| a.len() >= 2);
    out.sort();
    Ok(out
        .into_iter()
        .map(|insertions| GwKey {
            degree: d,
            insertions,
        })
        .collect())
}

fn fill_multisets(
    r: u32,
    min: u32,
    remaining: u64,
    current: &mut Vec<u32>,
    out: &mut Vec<Vec<u32>>,
) {
    if remaining == 0 {
        out.push(current.clone());
        return;
    }
    for a in min..=r {
        let w = u64::from(a) - 1;
        if w > remaining {
            break;
        }
        current.push(a);
        fill_multisets(r, a, remaining - w, current, out);
        current.pop();
    }
}

/// A complete table of Gromov–Witten numbers `I(d; a)` for `d <= d_max`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GwTable {
    r: u32,
    d_max: u32,
    entries: BTreeMap<GwKey, BigInt>,
}

impl GwTable {
    /// Builds a table from explicit entries, checking keys and completeness.
    pub fn from_entries<I>(r: u32, d_max: u32, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (GwKey, BigInt)>,
    {
        check_r(r)?;
        let mut map = BTreeMap::new();
        for (key, value) in entries {
            key.validate(r)?;
            if key.degree > d_max {
                return Err(Error::InvalidData(format!(
                    "key {} exceeds d_max = {d_max}",
                    key.label()
                )));
            }
            if map.insert(key.clone(), value).is_some() {
                return Err(Error::InvalidData(format!("duplicate key {}", key.label())));
            }
        }
        for d in 1..=d_max {
            for key in admissible_keys(r, d)? {
                if !map.contains_key(&key) {
                    return Err(Error::InvalidData(format!(
                        "missing entry d = {d}, a = {}",
                        key.label()
                    )));
                }
            }
        }
        Ok(GwTable {
            r,
            d_max,
            entries: map,
        })
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn d_max(&self) -> u32 {
        self.d_max
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &GwKey) -> Option<&BigInt> {
        self.entries.get(key)
    }

    /// Looks up `I(d; a)` for an unsorted insertion list.
    pub fn value(&self, d: u32, insertions: &[u32]) -> Option<&BigInt> {
        let key = GwKey::new(self.r, d, insertions.to_vec()).ok()?;
        self.entries.get(&key)
    }

    /// Entries in key order.
    pub fn iter(&self) -> impl Iterator<Item = (&GwKey, &BigInt)> {
        self.entries.iter()
    }

    /// Overwrites an existing entry. The result need not satisfy WDVV any more;
    /// [`wdvv_residual_exact`] detects that.
    pub fn set(&mut self, key: GwKey, value: BigInt) -> Result<()> {
        match self.entries.get_mut(&key) {
            Some(slot) => {
                *slot = value;
                Ok(())
            }
            None => Err(Error::InvalidParameter(format!(
                "key {} not in table",
                key.label()
            ))),
        }
    }

    /// The sub-table of degrees `<= d_max`.
    pub fn truncated(&self, d_max: u32) -> GwTable {
        let d_max = d_max.min(self.d_max);
        GwTable {
            r: self.r,
            d_max,
            entries: self
                .entries
                .iter()
                .filter(|(k, _)| k.degree <= d_max)
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }
}

/// Polynomial in `x_2..x_r` in the divided-power basis: exponents -> coefficient.
type Poly = BTreeMap<Vec<u32>, BigInt>;

fn add_scaled(target: &mut Poly, source: &Poly, factor: &BigInt) {
    for (m, c) in source {
        let entry = target.entry(m.clone()).or_insert_with(BigInt::zero);
        *entry += c * factor;
        if entry.is_zero() {
            target.remove(m);
        }
    }
}

/// `prod_k C(m_k + n_k, m_k)`: the product rule in the divided-power basis.
fn divided_power_factor(m: &[u32], n: &[u32]) -> BigInt {
    let mut f = BigInt::one();
    for (&a, &b) in m.iter().zip(n) {
        f *= binomial_big(a + b, a);
    }
    f
}

fn binomial_big(n: u32, k: u32) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

fn multiply(p: &Poly, q: &Poly) -> Poly {
    let mut out = Poly::new();
    for (m, a) in p {
        for (n, b) in q {
            let exps: Vec<u32> = m.iter().zip(n).map(|(x, y)| x + y).collect();
            let c = a * b * divided_power_factor(m, n);
            let entry = out.entry(exps).or_insert_with(BigInt::zero);
            *entry += c;
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

/// Applies `d/dx_p` to the degree-`d` part `e^{d x_1} f(x)`, returning the new `f`.
fn differentiate(f: &Poly, degree: u32, p: u32) -> Poly {
    match p {
        0 => Poly::new(),
        1 => {
            let mut out = f.clone();
            if degree == 0 {
                return Poly::new();
            }
            for c in out.values_mut() {
                *c *= BigInt::from(degree);
            }
            out
        }
        _ => {
            let k = (p - 2) as usize;
            f.iter()
                .filter(|(m, _)| m[k] > 0)
                .map(|(m, c)| {
                    let mut m = m.clone();
                    m[k] -= 1;
                    (m, c.clone())
                })
                .collect()
        }
    }
}

/// Third derivatives of each instanton degree and of the classical part.
struct DerivativeCache {
    r: u32,
    /// `by_degree[d][(p, q, s) sorted]` for d >= 1; index 0 holds the classical part.
    by_degree: Vec<BTreeMap<[u32; 3], Poly>>,
}

impl DerivativeCache {
    fn new(r: u32) -> Self {
        let nvars = (r - 1) as usize;
        let mut classical = BTreeMap::new();
        for p in 0..=r {
            for q in p..=r {
                for s in q..=r {
                    if p + q + s == r {
                        let mut poly = Poly::new();
                        poly.insert(vec![0; nvars], BigInt::one());
                        classical.insert([p, q, s], poly);
                    }
                }
            }
        }
        DerivativeCache {
            r,
            by_degree: vec![classical],
        }
    }

    fn push_degree(&mut self, degree: u32, f: &Poly) {
        let r = self.r;
        let mut map = BTreeMap::new();
        for p in 0..=r {
            let fp = differentiate(f, degree, p);
            for q in p..=r {
                let fpq = differentiate(&fp, degree, q);
                for s in q..=r {
                    let fpqs = differentiate(&fpq, degree, s);
                    if !fpqs.is_empty() {
                        map.insert([p, q, s], fpqs);
                    }
                }
            }
        }
        self.by_degree.push(map);
    }

    fn get(&self, degree: u32, p: u32, q: u32, s: u32) -> Option<&Poly> {
        let mut idx = [p, q, s];
        idx.sort_unstable();
        self.by_degree.get(degree as usize)?.get(&idx)
    }
}

/// `sum_{d1 + d2 = D, d1, d2 in range} sum_e (F_abe F_{r-e,cd} - F_bce F_{r-e,ad})`.
fn wdvv_quadratic(
    cache: &DerivativeCache,
    total: u32,
    idx: [u32; 4],
    include_classical: bool,
) -> Poly {
    let r = cache.r;
    let [a, b, c, d] = idx;
    let lo = if include_classical { 0 } else { 1 };
    let mut out = Poly::new();
    let one = BigInt::one();
    let minus = -BigInt::one();
    for d1 in lo..=total {
        let d2 = total - d1;
        if d2 < lo {
            continue;
        }
        for e in 0..=r {
            let f = r - e;
            if let (Some(x), Some(y)) = (cache.get(d1, a, b, e), cache.get(d2, f, c, d)) {
                add_scaled(&mut out, &multiply(x, y), &one);
            }
            if let (Some(x), Some(y)) = (cache.get(d1, b, c, e), cache.get(d2, f, a, d)) {
                add_scaled(&mut out, &multiply(x, y), &minus);
            }
        }
    }
    out
}

/// Sparse linear form over the unknowns of one degree.
type LinearForm = BTreeMap<usize, BigInt>;

/// Linear part of WDVV at degree `D`: classical times instanton terms.
///
/// With classical third derivatives `delta_{p+q+s, r}` the contraction reduces to
/// `F_{a+b,c,d} + F_{a,b,c+d} - F_{b+c,a,d} - F_{b,c,a+d}` (indices above `r` drop out).
fn wdvv_linear(
    r: u32,
    degree: u32,
    idx: [u32; 4],
    unknowns: &[Vec<u32>],
) -> BTreeMap<Vec<u32>, LinearForm> {
    let [a, b, c, d] = idx;
    let terms: [(u32, u32, u32, i32); 4] = [
        (a + b, c, d, 1),
        (a, b, c + d, 1),
        (b + c, a, d, -1),
        (b, c, a + d, -1),
    ];
    let mut out: BTreeMap<Vec<u32>, LinearForm> = BTreeMap::new();
    for (u, exps) in unknowns.iter().enumerate() {
        let mut single = Poly::new();
        single.insert(exps.clone(), BigInt::one());
        for &(p, q, s, sign) in &terms {
            if p > r || q > r || s > r {
                continue;
            }
            let deriv = differentiate(
                &differentiate(&differentiate(&single, degree, p), degree, q),
                degree,
                s,
            );
            for (m, coeff) in deriv {
                let form = out.entry(m).or_default();
                let entry = form.entry(u).or_insert_with(BigInt::zero);
                *entry += coeff * BigInt::from(sign);
            }
        }
    }
    for form in out.values_mut() {
        form.retain(|_, c| !c.is_zero());
    }
    out
}

/// Reduced row echelon form over the rationals, built one row at a time.
struct Echelon {
    n: usize,
    rows: Vec<(usize, Vec<BigRational>, BigRational)>,
}

enum Insert {
    NewPivot,
    Redundant,
    Contradiction(BigRational),
}

impl Echelon {
    fn new(n: usize) -> Self {
        Echelon {
            n,
            rows: Vec::new(),
        }
    }

    fn rank(&self) -> usize {
        self.rows.len()
    }

    fn insert(&mut self, mut row: Vec<BigRational>, mut rhs: BigRational) -> Insert {
        for (col, prow, prhs) in &self.rows {
            if row[*col].is_zero() {
                continue;
            }
            let f = row[*col].clone();
            for k in 0..self.n {
                if !prow[k].is_zero() {
                    row[k] -= &f * &prow[k];
                }
            }
            rhs -= &f * prhs;
        }
        let Some(pivot) = row.iter().position(|x| !x.is_zero()) else {
            return if rhs.is_zero() {
                Insert::Redundant
            } else {
                Insert::Contradiction(rhs)
            };
        };
        let inv = row[pivot].recip();
        for x in row.iter_mut() {
            *x *= &inv;
        }
        rhs *= &inv;
        for (_, prow, prhs) in self.rows.iter_mut() {
            if prow[pivot].is_zero() {
                continue;
            }
            let f = prow[pivot].clone();
            for k in 0..self.n {
                if !row[k].is_zero() {
                    prow[k] -= &f * &row[k];
                }
            }
            *prhs -= &f * &rhs;
        }
        self.rows.push((pivot, row, rhs));
        Insert::NewPivot
    }

    fn solution(&self) -> Vec<BigRational> {
        let mut x = vec![BigRational::zero(); self.n];
        for (col, _, rhs) in &self.rows {
            x[*col] = rhs.clone();
        }
        x
    }
}

fn exps_label(exps: &[u32]) -> String {
    GwKey::from_exponents(0, exps).label()
}

/// Computes the unique table satisfying WDVV with `I(1; r, r) = 1`.
///
/// Degrees are processed in increasing order. At each degree the coefficient
/// identities of WDVV are linear in the new unknowns; they are reduced exactly
/// until the system has full rank, and the solution is then checked against
/// every identity of that degree.
pub fn compute_gw_table(r: u32, d_max: u32) -> Result<GwTable> {
    check_r(r)?;
    if d_max < 1 {
        return Err(Error::InvalidParameter(format!(
            "d_max = {d_max} must be at least 1"
        )));
    }
    let mut cache = DerivativeCache::new(r);
    let mut entries = BTreeMap::new();
    for degree in 1..=d_max {
        let mut keys = admissible_keys(r, degree)?;
        keys.sort();
        let unknowns: Vec<Vec<u32>> = keys.iter().map(|k| k.exponents(r)).collect();
        let mut ech = Echelon::new(unknowns.len());
        if degree == 1 {
            let seed = GwKey::new(r, 1, vec![r, r])?;
            let pos = keys
                .iter()
                .position(|k| *k == seed)
                .expect("seed key is admissible");
            let mut row = vec![BigRational::zero(); unknowns.len()];
            row[pos] = BigRational::one();
            ech.insert(row, BigRational::one());
        }
        'outer: for idx in wdvv_indices(r, false) {
            let linear = wdvv_linear(r, degree, idx, &unknowns);
            let quadratic = wdvv_quadratic(&cache, degree, idx, false);
            let mut monomials: Vec<&Vec<u32>> = linear.keys().chain(quadratic.keys()).collect();
            monomials.sort();
            monomials.dedup();
            for m in monomials {
                let mut row = vec![BigRational::zero(); unknowns.len()];
                if let Some(form) = linear.get(m) {
                    for (&u, c) in form {
                        row[u] = BigRational::from_integer(c.clone());
                    }
                }
                let rhs = -BigRational::from_integer(quadratic.get(m).cloned().unwrap_or_default());
                if let Insert::Contradiction(v) = ech.insert(row, rhs) {
                    return Err(Error::Inconsistent(format!(
                        "degree {degree}: identity (a,b,c,d) = {idx:?} at monomial x^[{}] reduces to 0 = {v}",
                        exps_label(m)
                    )));
                }
                if ech.rank() == unknowns.len() {
                    break 'outer;
                }
            }
        }
        if ech.rank() < unknowns.len() {
            return Err(Error::Inconsistent(format!(
                "degree {degree}: rank {} < {} unknowns",
                ech.rank(),
                unknowns.len()
            )));
        }
        let solution = ech.solution();
        let mut f = Poly::new();
        for (key, value) in keys.iter().zip(solution) {
            if !value.is_integer() {
                return Err(Error::Inconsistent(format!(
                    "I({degree}; {}) = {value} is not an integer",
                    key.label()
                )));
            }
            let value = value.to_integer();
            if !value.is_zero() {
                f.insert(key.exponents(r), value.clone());
            }
            entries.insert(key.clone(), value);
        }
        cache.push_degree(degree, &f);
        if let Some(w) = first_violation(&cache, degree)? {
            return Err(Error::Inconsistent(format!(
                "degree {degree}: identity {:?} fails at monomial x^[{}] with value {}",
                w.indices,
                exps_label(&w.monomial),
                w.value
            )));
        }
        if degree == 1 {
            check_three_point_lines(r, &entries)?;
        }
    }
    Ok(GwTable { r, d_max, entries })
}

/// Every line through a point meeting two generic cycles of complementary
/// dimension is unique: `I(1; a, b, c) = 1`. Used as a cross-check.
fn check_three_point_lines(r: u32, entries: &BTreeMap<GwKey, BigInt>) -> Result<()> {
    for (key, value) in entries {
        if key.degree == 1 && key.insertions.len() == 3 && !value.is_one() {
            return Err(Error::Inconsistent(format!(
                "I(1; {}) = {value} for P^{r}, expected 1",
                key.label()
            )));
        }
    }
    Ok(())
}

fn wdvv_indices(r: u32, include_zero: bool) -> Vec<[u32; 4]> {
    let lo = if include_zero { 0 } else { 1 };
    let mut out = Vec::new();
    for a in lo..=r {
        for b in lo..=r {
            for c in lo..=r {
                for d in lo..=r {
                    out.push([a, b, c, d]);
                }
            }
        }
    }
    out
}

/// A violated WDVV coefficient identity.
#[derive(Clone, Debug, PartialEq)]
pub struct WdvvWitness {
    /// Instanton degree of the violated coefficient.
    pub degree: u32,
    /// The indices `(a, b, c, d)` of the identity.
    pub indices: [u32; 4],
    /// Exponents of `x_2..x_r` of the monomial.
    pub monomial: Vec<u32>,
    /// Coefficient of `x^m / m!` in the residual.
    pub value: BigRational,
}

/// Outcome of an exact WDVV check.
#[derive(Clone, Debug, PartialEq)]
pub struct WdvvResidual {
    /// Largest absolute coefficient of any residual (zero when WDVV holds).
    pub max: BigRational,
    /// The first violated identity, in the order degree, indices, monomial.
    pub witness: Option<WdvvWitness>,
}

impl WdvvResidual {
    pub fn is_zero(&self) -> bool {
        self.max.is_zero()
    }
}

fn first_violation(cache: &DerivativeCache, degree: u32) -> Result<Option<WdvvWitness>> {
    for idx in wdvv_indices(cache.r, true) {
        let res = wdvv_quadratic(cache, degree, idx, true);
        if let Some((m, v)) = res.into_iter().next() {
            return Ok(Some(WdvvWitness {
                degree,
                indices: idx,
                monomial: m,
                value: BigRational::from_integer(v),
            }));
        }
    }
    Ok(None)
}

fn table_cache(table: &GwTable, up_to: u32) -> DerivativeCache {
    let r = table.r;
    let mut cache = DerivativeCache::new(r);
    for degree in 1..=up_to {
        let mut f = Poly::new();
        for (key, value) in table.entries.iter().filter(|(k, _)| k.degree == degree) {
            if !value.is_zero() {
                f.insert(key.exponents(r), value.clone());
            }
        }
        cache.push_degree(degree, &f);
    }
    cache
}

/// Evaluates every WDVV identity (all indices in `0..=r`) on all monomials of
/// instanton degree `<= window`.
pub fn wdvv_residual_exact(table: &GwTable, window: u32) -> Result<WdvvResidual> {
    if window > table.d_max {
        return Err(Error::InvalidParameter(format!(
            "window {window} exceeds table degree {}",
            table.d_max
        )));
    }
    let cache = table_cache(table, window);
    let mut max = BigRational::zero();
    let mut witness = None;
    for degree in 0..=window {
        for idx in wdvv_indices(table.r, true) {
            for (m, v) in wdvv_quadratic(&cache, degree, idx, true) {
                let v = BigRational::from_integer(v);
                if v.abs() > max {
                    max = v.abs();
                }
                if witness.is_none() {
                    witness = Some(WdvvWitness {
                        degree,
                        indices: idx,
                        monomial: m,
                        value: v,
                    });
                }
            }
        }
    }
    Ok(WdvvResidual { max, witness })
}

/// A monomial `coeff * prod_i x_i^{k_i}` over all `r + 1` flat coordinates.
#[derive(Clone, Debug)]
struct Monomial {
    coeff: f64,
    exps: Vec<u32>,
}

impl Monomial {
    /// Derivative for the multi-index `counts` evaluated at `x`, or `None` if it vanishes.
    fn derivative_at(&self, counts: &[u32], x: &[C64], skip: &[bool]) -> Option<C64> {
        let mut value = C64::new(self.coeff, 0.0);
        for (i, (&k, &j)) in self.exps.iter().zip(counts).enumerate() {
            if skip[i] {
                continue;
            }
            if j > k {
                return None;
            }
            let falling: f64 = (0..j).map(|t| f64::from(k - t)).product();
            value *= falling;
            if k > j {
                value *= x[i].powu(k - j);
            }
        }
        Some(value)
    }
}

/// Value of a potential derivative together with its truncation diagnostic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativeValue {
    pub value: C64,
    /// `|last retained degree term| / |value|`; zero when that term vanishes.
    pub truncation: f64,
}

/// The potential `Phi = Phi_cl + sum_{d <= d_max} Phi_d` of `P^r` built from a table.
#[derive(Clone, Debug)]
pub struct TruncatedPotential {
    r: u32,
    d_max: u32,
    table: GwTable,
    classical: Vec<Monomial>,
    /// Per degree: monomials in all coordinates, exponent of `x_1` unused.
    instanton: Vec<Vec<Monomial>>,
    max_jet_order: usize,
}

impl TruncatedPotential {
    pub fn new(table: GwTable) -> Self {
        let r = table.r;
        let n = (r + 1) as usize;
        let mut classical = Vec::new();
        for a in 0..=r {
            for b in a..=r {
                if a + b > r {
                    break;
                }
                let c = r - a - b;
                if c < b {
                    continue;
                }
                let mut exps = vec![0u32; n];
                exps[a as usize] += 1;
                exps[b as usize] += 1;
                exps[c as usize] += 1;
                let orderings = if a == b && b == c {
                    1.0
                } else if a == b || b == c {
                    3.0
                } else {
                    6.0
                };
                classical.push(Monomial {
                    coeff: orderings / 6.0,
                    exps,
                });
            }
        }
        let mut instanton = vec![Vec::new(); table.d_max as usize + 1];
        for (key, value) in table.iter() {
            if value.is_zero() {
                continue;
            }
            let mut exps = vec![0u32; n];
            for &a in key.insertions() {
                exps[a as usize] += 1;
            }
            let denom: f64 = exps.iter().map(|&k| factorial(k as usize)).product();
            let coeff = value.to_f64().unwrap_or(f64::NAN) / denom;
            instanton[key.degree as usize].push(Monomial { coeff, exps });
        }
        TruncatedPotential {
            r,
            d_max: table.d_max,
            table,
            classical,
            instanton,
            max_jet_order: 4,
        }
    }

    /// Allows derivatives of order up to `3 + order`.
    pub fn with_max_jet_order(mut self, order: usize) -> Self {
        self.max_jet_order = order;
        self
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn d_max(&self) -> u32 {
        self.d_max
    }

    pub fn table(&self) -> &GwTable {
        &self.table
    }

    /// Constant flat metric `g_ab = delta_{a+b, r}`.
    pub fn metric_entry(&self, a: usize, b: usize) -> f64 {
        if a + b == self.r as usize {
            1.0
        } else {
            0.0
        }
    }

    /// Largest deviation of a monomial weight from `r - 3`, with weight `a - 1`
    /// for `x_a` and `-(r + 1)` for `e^{x_1}`.
    pub fn weight_defect(&self) -> i64 {
        let target = i64::from(self.r) - 3;
        let weight = |m: &Monomial, d: i64| -> i64 {
            m.exps
                .iter()
                .enumerate()
                .filter(|(a, _)| *a != 1 || d == 0)
                .map(|(a, &k)| (a as i64 - 1) * i64::from(k))
                .sum::<i64>()
                - (i64::from(self.r) + 1) * d
        };
        let classical = self.classical.iter().map(|m| (weight(m, 0) - target).abs());
        let inst = self
            .instanton
            .iter()
            .enumerate()
            .flat_map(|(d, ms)| ms.iter().map(move |m| (m, d as i64)))
            .map(|(m, d)| (weight(m, d) - target).abs());
        classical.chain(inst).max().unwrap_or(0)
    }

    /// `Phi_{abc}` at a point.
    pub fn third_derivative(
        &self,
        a: usize,
        b: usize,
        c: usize,
        x: &[C64],
    ) -> Result<DerivativeValue> {
        self.derivative(&[a, b, c], x)
    }

    /// Arbitrary partial derivative of the truncated potential.
    pub fn derivative(&self, indices: &[usize], x: &[C64]) -> Result<DerivativeValue> {
        let n = self.r as usize + 1;
        if x.len() != n {
            return Err(Error::InvalidParameter(format!(
                "point has {} coordinates, expected {n}",
                x.len()
            )));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidParameter(format!(
                "index {bad} outside [0, {}]",
                n - 1
            )));
        }
        if indices.len() > 3 + self.max_jet_order {
            return Err(Error::JetOrder(format!(
                "derivative of order {} exceeds 3 + {}",
                indices.len(),
                self.max_jet_order
            )));
        }
        let mut counts = vec![0u32; n];
        for &i in indices {
            counts[i] += 1;
        }
        let mut sum = CompensatedSum::new();
        let no_skip = vec![false; n];
        for m in &self.classical {
            if let Some(v) = m.derivative_at(&counts, x, &no_skip) {
                sum.add(v);
            }
        }
        if counts[0] > 0 {
            return Ok(DerivativeValue {
                value: sum.value(),
                truncation: 0.0,
            });
        }
        let mut skip = vec![false; n];
        skip[0] = true;
        skip[1] = true;
        let mut last = C64::new(0.0, 0.0);
        for (d, monomials) in self.instanton.iter().enumerate().skip(1) {
            let mut part = CompensatedSum::new();
            for m in monomials {
                if let Some(v) = m.derivative_at(&counts, x, &skip) {
                    part.add(v);
                }
            }
            let scale = (x[1] * d as f64).exp() * (d as f64).powi(counts[1] as i32);
            let term = part.value() * scale;
            sum.add(term);
            if d as u32 == self.d_max {
                last = term;
            }
        }
        let value = sum.value();
        let truncation = if last.norm() == 0.0 {
            0.0
        } else if value.norm() == 0.0 {
            f64::INFINITY
        } else {
            last.norm() / value.norm()
        };
        Ok(DerivativeValue { value, truncation })
    }
}
