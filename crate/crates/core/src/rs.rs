//! Evaluation-form Reed-Solomon codes.
//!
//! A codeword is `(f(x_0), ..., f(x_{n-1}))` for a polynomial `f` of degree
//! below `k`, with `x_i = α^i`. When `n` equals the field size the last point
//! is `0` instead. The message occupies the first `k` coordinates, so the
//! encoder is systematic and `f` is the interpolant of the message.
//!
//! Two decoders are provided: a syndrome/Berlekamp-Massey errors-and-erasures
//! decoder for the full coordinate set, and a Welch-Berlekamp style decoder
//! (Gao's formulation) for any subset of coordinates.

use crate::error::{Error, Result};
use crate::gf::{Field, Symbol};

#[derive(Debug, Clone)]
pub struct RsCode {
    field: &'static Field,
    k: usize,
    n: usize,
    points: Vec<Symbol>,
    // 1 / prod_{m != i, m < k} (x_i - x_m), used by the barycentric encoder.
    msg_weights: Vec<Symbol>,
}

impl RsCode {
    pub fn new(field: &'static Field, message_len: usize, codeword_len: usize) -> Result<RsCode> {
        if message_len == 0 || message_len > codeword_len {
            return Err(Error::Params(format!(
                "RS({codeword_len},{message_len}) needs 0 < k <= n"
            )));
        }
        if codeword_len > field.size() {
            return Err(Error::Params(format!(
                "RS length {codeword_len} exceeds field size {}",
                field.size()
            )));
        }
        let points = evaluation_points(field, codeword_len);
        let msg_weights = consecutive_weights(field, message_len);
        Ok(RsCode {
            field,
            k: message_len,
            n: codeword_len,
            points,
            msg_weights,
        })
    }

    pub fn field(&self) -> &'static Field {
        self.field
    }

    pub fn message_len(&self) -> usize {
        self.k
    }

    pub fn codeword_len(&self) -> usize {
        self.n
    }

    pub fn evaluation_points(&self) -> &[Symbol] {
        &self.points
    }

    /// Barycentric coefficients `c` such that `f(x) = sum_i c_i m_i` for the
    /// message interpolant `f`, at a point `x` outside the message positions.
    fn row_at(&self, x: Symbol, row: &mut Vec<Symbol>) {
        let f = self.field;
        row.clear();
        let mut ell: Symbol = 1;
        for i in 0..self.k {
            let diff = x ^ self.points[i];
            ell = f.mul(ell, diff);
            row.push(f.div(self.msg_weights[i], diff));
        }
        for c in row.iter_mut() {
            *c = f.mul(*c, ell);
        }
    }

    /// Value at coordinate `j` of the codeword for `message`.
    pub fn symbol_at(&self, message: &[Symbol], j: usize) -> Symbol {
        if j < self.k {
            return message[j];
        }
        let mut row = Vec::with_capacity(self.k);
        self.row_at(self.points[j], &mut row);
        dot(self.field, &row, message)
    }

    /// Coordinate `j` of the codewords of several messages.
    pub fn symbols_at(&self, messages: &[Vec<Symbol>], j: usize) -> Vec<Symbol> {
        if j < self.k {
            return messages.iter().map(|m| m[j]).collect();
        }
        let mut row = Vec::with_capacity(self.k);
        self.row_at(self.points[j], &mut row);
        messages.iter().map(|m| dot(self.field, &row, m)).collect()
    }

    /// Evaluates the message interpolant at an arbitrary field element.
    pub fn evaluate(&self, message: &[Symbol], x: Symbol) -> Symbol {
        if let Some(j) = self.points[..self.k].iter().position(|&p| p == x) {
            return message[j];
        }
        let mut row = Vec::with_capacity(self.k);
        self.row_at(x, &mut row);
        dot(self.field, &row, message)
    }

    pub fn encode(&self, message: &[Symbol]) -> Result<Vec<Symbol>> {
        if message.len() != self.k {
            return Err(Error::Length {
                expected: self.k,
                got: message.len(),
            });
        }
        let mut out = Vec::with_capacity(self.n);
        out.extend_from_slice(message);
        let mut row = Vec::with_capacity(self.k);
        for j in self.k..self.n {
            self.row_at(self.points[j], &mut row);
            out.push(dot(self.field, &row, message));
        }
        Ok(out)
    }

    /// Encodes several messages at once, sharing the per-point coefficient rows.
    /// Returns codewords in the same order as `messages`.
    pub fn encode_many(&self, messages: &[Vec<Symbol>]) -> Result<Vec<Vec<Symbol>>> {
        self.encode_many_range(messages, self.n)
    }

    /// Like [`encode_many`](Self::encode_many) but stops after `len` coordinates.
    pub fn encode_many_range(&self, messages: &[Vec<Symbol>], len: usize) -> Result<Vec<Vec<Symbol>>> {
        for m in messages {
            if m.len() != self.k {
                return Err(Error::Length {
                    expected: self.k,
                    got: m.len(),
                });
            }
        }
        let len = len.min(self.n);
        let mut out: Vec<Vec<Symbol>> = messages
            .iter()
            .map(|m| {
                let mut v = Vec::with_capacity(len);
                v.extend_from_slice(&m[..len.min(self.k)]);
                v
            })
            .collect();
        let mut row = Vec::with_capacity(self.k);
        for j in self.k..len {
            self.row_at(self.points[j], &mut row);
            for (cw, m) in out.iter_mut().zip(messages) {
                cw.push(dot(self.field, &row, m));
            }
        }
        Ok(out)
    }

    /// Errors-and-erasures decoding over all `n` coordinates. `None` marks an
    /// erasure. Succeeds whenever `erasures + 2 * errors <= n - k`; beyond that
    /// it either fails or returns some other codeword's message.
    pub fn decode_full(&self, received: &[Option<Symbol>]) -> Result<Vec<Symbol>> {
        if received.len() != self.n {
            return Err(Error::Length {
                expected: self.n,
                got: received.len(),
            });
        }
        let erasures = received.iter().filter(|r| r.is_none()).count();
        if erasures > self.n - self.k {
            return Err(Error::Decode(format!(
                "{erasures} erasures exceed redundancy {}",
                self.n - self.k
            )));
        }
        if self.n == self.field.size() {
            // The point 0 breaks the α^i syndrome structure. Decode the other
            // n - 1 coordinates with BM and accept the result when the point-0
            // symbol is erased or agrees with it; within n - k of erasures plus
            // twice the errors no other codeword can pass that check.
            let last = self.n - 1;
            let short_erasures = erasures - usize::from(received[last].is_none());
            if short_erasures < self.n - self.k {
                let short = RsCode::new(self.field, self.k, last)?;
                if let Ok(msg) = bm_decode(&short, &received[..last]) {
                    match received[last] {
                        None => return Ok(msg),
                        Some(v) if self.evaluate(&msg, 0) == v => return Ok(msg),
                        Some(_) => {}
                    }
                }
            }
            // Otherwise use the subset decoder.
            let (pts, vals): (Vec<Symbol>, Vec<Symbol>) = received
                .iter()
                .zip(&self.points)
                .filter_map(|(r, &p)| r.map(|v| (p, v)))
                .unzip();
            let f = decode_punctured_poly(self.field, &pts, &vals, self.k)?;
            return Ok(self.points[..self.k]
                .iter()
                .map(|&x| poly_eval(self.field, &f, x))
                .collect());
        }
        bm_decode(self, received)
    }
}

fn dot(f: &Field, a: &[Symbol], b: &[Symbol]) -> Symbol {
    let mut acc = 0;
    for (&x, &y) in a.iter().zip(b) {
        acc ^= f.mul(x, y);
    }
    acc
}

/// α^0, ..., α^{n-1}, with 0 in place of the last point when n = 2^bits.
pub fn evaluation_points(field: &Field, n: usize) -> Vec<Symbol> {
    let mut pts: Vec<Symbol> = (0..n.min(field.order()))
        .map(|i| field.alpha_pow(i as i64))
        .collect();
    if n == field.size() {
        pts.push(0);
    }
    pts
}

/// `1 / prod_{m != i} (α^i + α^m)` over `m in 0..n`, for n below the field order.
///
/// Uses prod_{m<i} = α^{i(i-1)/2} G(i) and prod_{m>i} = α^{i(n-1-i)} G(n-1-i)
/// with G(j) = prod_{d=1..j} (1 + α^d).
fn consecutive_weights(f: &Field, n: usize) -> Vec<Symbol> {
    let order = f.order();
    let n_eff = n.min(order);
    // log G(j) for j in 0..n_eff
    let mut log_g = vec![0usize; n_eff];
    for j in 1..n_eff {
        let term = 1 ^ f.alpha_pow(j as i64);
        log_g[j] = (log_g[j - 1] + f.log(term)) % order;
    }
    let mut w: Vec<Symbol> = (0..n_eff)
        .map(|i| {
            let e = (i * i.saturating_sub(1) / 2 + i * (n_eff - 1 - i)) % order;
            let l = (e + log_g[i] + log_g[n_eff - 1 - i]) % order;
            f.alpha_pow(-(l as i64))
        })
        .collect();
    if n > n_eff {
        // Extra point 0: each weight picks up a factor 1/x_i and the new
        // point's own product is prod_m α^m.
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = f.mul_alpha_pow(*wi, order - i);
        }
        let s = (n_eff * (n_eff - 1) / 2) % order;
        w.push(f.alpha_pow(-(s as i64)));
    }
    w
}

fn bm_decode(code: &RsCode, received: &[Option<Symbol>]) -> Result<Vec<Symbol>> {
    let f = code.field;
    let n = code.n;
    let order = f.order();
    let two_t = n - code.k;
    // Column multipliers of the dual code: u_i = 1 / prod_{m != i} (x_i - x_m).
    let v = consecutive_weights(f, n);
    let mut word: Vec<Symbol> = received.iter().map(|r| r.unwrap_or(0)).collect();
    let syn = syndromes(f, &v, &word, two_t);
    let erased: Vec<usize> = received
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_none())
        .map(|(i, _)| i)
        .collect();
    if syn.iter().all(|&s| s == 0) {
        return Ok(word[..code.k].to_vec());
    }
    let rho = erased.len();
    // Erasure locator Γ(x) = prod (1 - X_e x).
    let mut gamma: Vec<Symbol> = vec![1];
    for &e in &erased {
        let xe = f.alpha_pow(e as i64);
        gamma = poly_mul(f, &gamma, &[1, xe]);
    }
    let mut lambda = gamma.clone();
    let mut b = gamma;
    let mut l = rho;
    for r in rho..two_t {
        let mut delta = 0;
        for (j, &c) in lambda.iter().enumerate() {
            if j > r {
                break;
            }
            delta ^= f.mul(c, syn[r - j]);
        }
        // B <- x B is applied in both branches below.
        let mut xb = Vec::with_capacity(b.len() + 1);
        xb.push(0);
        xb.extend_from_slice(&b);
        if delta == 0 {
            b = xb;
            continue;
        }
        let mut t = lambda.clone();
        if t.len() < xb.len() {
            t.resize(xb.len(), 0);
        }
        for (j, &c) in xb.iter().enumerate() {
            t[j] ^= f.mul(delta, c);
        }
        if 2 * l <= r + rho {
            let inv = f.inv(delta);
            b = lambda.iter().map(|&c| f.mul(c, inv)).collect();
            l = r + 1 + rho - l;
        } else {
            b = xb;
        }
        lambda = t;
    }
    trim(&mut lambda);
    let deg = lambda.len() - 1;
    if deg != l || rho + 2 * (l - rho) > two_t {
        return Err(Error::Decode(format!(
            "locator degree {deg}, register length {l}"
        )));
    }
    // Chien search over the n coordinates: Λ(α^{-i}) = 0.
    let mut roots = Vec::with_capacity(deg);
    let log_lambda: Vec<Option<usize>> = lambda
        .iter()
        .map(|&c| if c == 0 { None } else { Some(f.log(c)) })
        .collect();
    for i in 0..n {
        let mut acc = 0;
        for (j, lc) in log_lambda.iter().enumerate() {
            if let Some(lc) = lc {
                let e = (lc + (order - (i * j) % order)) % order;
                acc ^= f.alpha_pow(e as i64);
            }
        }
        if acc == 0 {
            roots.push(i);
        }
    }
    if roots.len() != deg {
        return Err(Error::Decode(format!(
            "locator has {} roots in range, degree {deg}",
            roots.len()
        )));
    }
    // Forney: Y_i = X_i Ω(X_i^{-1}) / Λ'(X_i^{-1}), e_i = Y_i / v_i.
    let mut omega = poly_mul(f, &syn, &lambda);
    omega.truncate(two_t);
    let dlambda: Vec<Symbol> = (1..lambda.len())
        .map(|j| if j % 2 == 1 { lambda[j] } else { 0 })
        .collect();
    for &i in &roots {
        let xi = f.alpha_pow(i as i64);
        let xinv = f.inv(xi);
        let den = poly_eval(f, &dlambda, xinv);
        if den == 0 {
            return Err(Error::Decode("repeated locator root".into()));
        }
        let y = f.mul(xi, f.div(poly_eval(f, &omega, xinv), den));
        word[i] ^= f.div(y, v[i]);
    }
    if syndromes(f, &v, &word, two_t).iter().any(|&s| s != 0) {
        return Err(Error::Decode("nonzero syndrome after correction".into()));
    }
    Ok(word[..code.k].to_vec())
}

/// S_j = sum_i v_i r_i α^{ij}, j < count.
fn syndromes(f: &Field, v: &[Symbol], word: &[Symbol], count: usize) -> Vec<Symbol> {
    let order = f.order();
    let mut s = vec![0 as Symbol; count];
    for (i, (&r, &vi)) in word.iter().zip(v).enumerate() {
        let u = f.mul(r, vi);
        if u == 0 {
            continue;
        }
        let mut e = f.log(u);
        let step = i % order;
        for sj in s.iter_mut() {
            *sj ^= f.alpha_pow(e as i64);
            e += step;
            if e >= order {
                e -= order;
            }
        }
    }
    s
}

/// Precomputed state for decoding many value vectors over one point set.
#[derive(Debug, Clone)]
pub struct PuncturedDecoder {
    field: &'static Field,
    points: Vec<Symbol>,
    k: usize,
    g0: Vec<Symbol>,
    // 1 / g0'(x_i)
    inv_deriv: Vec<Symbol>,
}

impl PuncturedDecoder {
    pub fn new(field: &'static Field, points: &[Symbol], message_len: usize) -> Result<PuncturedDecoder> {
        if points.len() < message_len || message_len == 0 {
            return Err(Error::Decode(format!(
                "{} points cannot determine {message_len} symbols",
                points.len()
            )));
        }
        let mut sorted = points.to_vec();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Params("evaluation points must be distinct".into()));
        }
        let mut g0: Vec<Symbol> = vec![1];
        for &x in points {
            g0 = poly_mul(field, &g0, &[x, 1]);
        }
        let inv_deriv = points
            .iter()
            .enumerate()
            .map(|(i, &xi)| {
                let mut p: Symbol = 1;
                for (j, &xj) in points.iter().enumerate() {
                    if j != i {
                        p = field.mul(p, xi ^ xj);
                    }
                }
                field.inv(p)
            })
            .collect();
        Ok(PuncturedDecoder {
            field,
            points: points.to_vec(),
            k: message_len,
            g0,
            inv_deriv,
        })
    }

    pub fn points(&self) -> &[Symbol] {
        &self.points
    }

    /// Recovers the coefficient vector of the message polynomial, or fails
    /// when more than `(points - k) / 2` values are wrong and no consistent
    /// polynomial is found.
    pub fn decode_poly(&self, values: &[Symbol]) -> Result<Vec<Symbol>> {
        let f = self.field;
        let m = self.points.len();
        if values.len() != m {
            return Err(Error::Length {
                expected: m,
                got: values.len(),
            });
        }
        // g1 = interpolant of the values.
        let mut g1 = vec![0 as Symbol; m];
        let mut q = vec![0 as Symbol; m];
        for (i, &xi) in self.points.iter().enumerate() {
            let c = f.mul(values[i], self.inv_deriv[i]);
            if c == 0 {
                continue;
            }
            // q = g0 / (x - xi) by synthetic division.
            let mut carry = 0;
            for j in (0..m).rev() {
                carry = self.g0[j + 1] ^ f.mul(carry, xi);
                q[j] = carry;
            }
            for j in 0..m {
                g1[j] ^= f.mul(c, q[j]);
            }
        }
        trim(&mut g1);
        if g1.len() <= self.k {
            return Ok(g1);
        }
        // Partial extended Euclid until deg r < (m + k) / 2.
        let mut r0 = self.g0.clone();
        let mut r1 = g1;
        let mut v0: Vec<Symbol> = vec![0];
        let mut v1: Vec<Symbol> = vec![1];
        while !is_zero(&r1) && 2 * (r1.len() - 1) >= m + self.k {
            let (quo, rem) = poly_divrem(f, &r0, &r1)?;
            let qv = poly_mul(f, &quo, &v1);
            let mut nv = v0.clone();
            add_assign(&mut nv, &qv);
            trim(&mut nv);
            r0 = std::mem::replace(&mut r1, rem);
            v0 = std::mem::replace(&mut v1, nv);
        }
        let (fpoly, rem) = poly_divrem(f, &r1, &v1)?;
        if !is_zero(&rem) || (!is_zero(&fpoly) && fpoly.len() > self.k) {
            return Err(Error::Decode(
                "too many errors for the retained coordinates".into(),
            ));
        }
        Ok(fpoly)
    }
}

/// Decodes a message from values at an arbitrary subset of evaluation points.
/// The message is the interpolant's values at α^0..α^{k-1}.
pub fn decode_punctured(field: &'static Field, points: &[Symbol], values: &[Symbol], message_len: usize) -> Result<Vec<Symbol>> {
    let fpoly = decode_punctured_poly(field, points, values, message_len)?;
    Ok((0..message_len)
        .map(|i| poly_eval(field, &fpoly, field.alpha_pow(i as i64)))
        .collect())
}

fn decode_punctured_poly(field: &'static Field, points: &[Symbol], values: &[Symbol], k: usize) -> Result<Vec<Symbol>> {
    PuncturedDecoder::new(field, points, k)?.decode_poly(values)
}

// Polynomials are coefficient vectors, lowest degree first.

pub fn poly_eval(f: &Field, p: &[Symbol], x: Symbol) -> Symbol {
    let mut acc = 0;
    for &c in p.iter().rev() {
        acc = f.mul(acc, x) ^ c;
    }
    acc
}

pub fn poly_mul(f: &Field, a: &[Symbol], b: &[Symbol]) -> Vec<Symbol> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] ^= f.mul(x, y);
        }
    }
    out
}

pub fn poly_divrem(f: &Field, a: &[Symbol], b: &[Symbol]) -> Result<(Vec<Symbol>, Vec<Symbol>)> {
    let mut b = b.to_vec();
    trim(&mut b);
    if is_zero(&b) {
        return Err(Error::Decode("polynomial division by zero".into()));
    }
    let mut rem = a.to_vec();
    trim(&mut rem);
    let db = b.len() - 1;
    if rem.len() < b.len() {
        return Ok((vec![0], rem));
    }
    let lead_inv = f.inv(b[db]);
    let mut quo = vec![0; rem.len() - db];
    for i in (0..quo.len()).rev() {
        let c = f.mul(rem[i + db], lead_inv);
        quo[i] = c;
        if c != 0 {
            for (j, &bj) in b.iter().enumerate() {
                rem[i + j] ^= f.mul(c, bj);
            }
        }
    }
    rem.truncate(db.max(1));
    trim(&mut rem);
    trim(&mut quo);
    Ok((quo, rem))
}

fn add_assign(a: &mut Vec<Symbol>, b: &[Symbol]) {
    if a.len() < b.len() {
        a.resize(b.len(), 0);
    }
    for (x, &y) in a.iter_mut().zip(b) {
        *x ^= y;
    }
}

fn trim(p: &mut Vec<Symbol>) {
    while p.len() > 1 && *p.last().unwrap() == 0 {
        p.pop();
    }
    if p.is_empty() {
        p.push(0);
    }
}

fn is_zero(p: &[Symbol]) -> bool {
    p.iter().all(|&c| c == 0)
}
