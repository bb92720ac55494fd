//! Dense row-major matrices and the deterministic random source used by
//! every other module.
//!
//! All randomness in the workbench flows through [`RngState`], a
//! xoshiro256++ generator seeded through splitmix64 expansion of a single
//! 64-bit seed. Gaussian draws use the Box-Muller transform so that the
//! number of consumed RNG words is a deterministic function of the number
//! of requested values. Identical seeds give bitwise identical streams.

/// Number of scalar accumulator lanes used by the dot-product kernels.
///
/// Every code path that reduces over an index (dot products, matrix
/// products) uses the same lane pattern so that the same mathematical
/// quantity is bitwise identical no matter which entry point computed it.
const LANES: usize = 8;

/// One step of the splitmix64 sequence, advancing `state` in place.
pub fn splitmix64_next(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream seed for run/trial `index` from a base seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut s = seed ^ index;
    splitmix64_next(&mut s)
}

/// xoshiro256++ generator state plus a cached spare Gaussian.
#[derive(Debug, Clone)]
pub struct RngState {
    s: [u64; 4],
    spare_gaussian: Option<f64>,
}

impl RngState {
    /// Seeds the generator by expanding `seed` with splitmix64.
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let mut s = [0u64; 4];
        for word in &mut s {
            *word = splitmix64_next(&mut sm);
        }
        // splitmix64 cannot realistically emit four zero words, but the
        // all-zero state is absorbing for xoshiro so it is excluded.
        if s == [0, 0, 0, 0] {
            s[0] = 0x9E37_79B9_7F4A_7C15;
        }
        RngState {
            s,
            spare_gaussian: None,
        }
    }

    /// Next raw 64-bit word of the xoshiro256++ stream.
    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.s;
        let result = (s[0].wrapping_add(s[3]))
            .rotate_left(23)
            .wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform double in `[0, 1)` built from the top 53 bits of one word.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw via Box-Muller on two uniform words.
    ///
    /// Pairs are produced two words at a time; the second value of each
    /// pair is cached, so `2*ceil(k/2)` words are consumed for `k` draws.
    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare_gaussian.take() {
            return z;
        }
        // 1 - U in (0, 1] keeps the log argument strictly positive.
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let radius = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        let (sin_t, cos_t) = theta.sin_cos();
        self.spare_gaussian = Some(radius * sin_t);
        radius * cos_t
    }

    /// Uniform index in `[0, bound)` via the multiply-shift reduction.
    pub fn next_index(&mut self, bound: usize) -> usize {
        assert!(bound > 0, "next_index bound must be positive");
        ((self.next_u64() as u128 * bound as u128) >> 64) as usize
    }

    /// Samples `k` distinct indices from `0..n` uniformly without
    /// replacement (partial Fisher-Yates; order is the selection order).
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "cannot sample {k} of {n} indices");
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.next_index(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}

/// Dense row-major matrix of 64-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Canonical dot product: eight-lane accumulation over chunks, remainder
/// into the low lanes, then a fixed-order lane reduction. All reductions
/// over a contraction index in this crate follow this exact pattern.
#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = [0.0f64; LANES];
    let chunks = x.len() / LANES;
    for c in 0..chunks {
        let xa = &x[c * LANES..c * LANES + LANES];
        let ya = &y[c * LANES..c * LANES + LANES];
        for l in 0..LANES {
            acc[l] += xa[l] * ya[l];
        }
    }
    for (l, i) in (chunks * LANES..x.len()).enumerate() {
        acc[l] += x[i] * y[i];
    }
    let mut total = 0.0;
    for a in acc {
        total += a;
    }
    total
}

impl Matrix {
    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from row-major data.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "data length {} does not match {rows}x{cols}",
            data.len()
        );
        Matrix { rows, cols, data }
    }

    /// Builds a matrix from nested row slices; rows must be equal length.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        assert!(!rows.is_empty());
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix::from_vec(rows.len(), cols, data)
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Matrix with i.i.d. `N(0, std^2)` entries drawn row-major from `rng`.
    pub fn gaussian(rng: &mut RngState, rows: usize, cols: usize, std: f64) -> Self {
        assert!(std > 0.0, "gaussian std must be positive");
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(rng.next_gaussian() * std);
        }
        Matrix::from_vec(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// Sum of squared entries.
    pub fn frob_sq(&self) -> f64 {
        dot(&self.data, &self.data)
    }

    /// `self += scale * other`, entrywise.
    pub fn add_scaled(&mut self, other: &Matrix, scale: f64) {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    /// Standard product `self * b`.
    pub fn matmul(&self, b: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, b.rows,
            "matmul dimension mismatch: {}x{} * {}x{}",
            self.rows, self.cols, b.rows, b.cols
        );
        let (m, k, n) = (self.rows, self.cols, b.cols);
        let mut out = Matrix::zeros(m, n);
        // 4x16 register tile accumulated over k.
        const RT: usize = 4;
        const CT: usize = 16;
        let main_rows = m - m % RT;
        let main_cols = n - n % CT;
        for i0 in (0..main_rows).step_by(RT) {
            for j0 in (0..main_cols).step_by(CT) {
                let mut acc = [[0.0f64; CT]; RT];
                for kk in 0..k {
                    let brow = &b.data[kk * n + j0..kk * n + j0 + CT];
                    for a in 0..RT {
                        let s = self.data[(i0 + a) * k + kk];
                        for l in 0..CT {
                            acc[a][l] += s * brow[l];
                        }
                    }
                }
                for a in 0..RT {
                    out.data[(i0 + a) * n + j0..(i0 + a) * n + j0 + CT]
                        .copy_from_slice(&acc[a]);
                }
            }
        }
        // Remainder rows and columns.
        for i in 0..m {
            let jstart = if i < main_rows { main_cols } else { 0 };
            if jstart == n {
                continue;
            }
            for j in jstart..n {
                let mut s = 0.0;
                for kk in 0..k {
                    s += self.data[i * k + kk] * b.data[kk * n + j];
                }
                out.data[i * n + j] = s;
            }
        }
        out
    }

    /// `self * b^T`; both operands are traversed along contiguous rows.
    ///
    /// Entry `(i, j)` is the canonical [`dot`] of row `i` of `self` with
    /// row `j` of `b`, so single-vector and batched code paths agree
    /// bitwise.
    pub fn matmul_bt(&self, b: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, b.cols,
            "matmul_bt dimension mismatch: {}x{} * ({}x{})^T",
            self.rows, self.cols, b.rows, b.cols
        );
        let (m, n) = (self.rows, b.rows);
        let mut out = Matrix::zeros(m, n);
        for i in 0..m {
            let xrow = self.row(i);
            let orow = out.row_mut(i);
            for j in 0..n {
                orow[j] = dot(xrow, b.row(j));
            }
        }
        out
    }

    /// `self^T * b`, contracting over the shared row index.
    pub fn matmul_at(&self, b: &Matrix) -> Matrix {
        assert_eq!(
            self.rows, b.rows,
            "matmul_at dimension mismatch: ({}x{})^T * {}x{}",
            self.rows, self.cols, b.rows, b.cols
        );
        let (k, m, n) = (self.rows, self.cols, b.cols);
        let mut out = Matrix::zeros(m, n);
        const RT: usize = 4;
        const CT: usize = 16;
        let main_rows = m - m % RT;
        let main_cols = n - n % CT;
        for r0 in (0..main_rows).step_by(RT) {
            for t0 in (0..main_cols).step_by(CT) {
                let mut acc = [[0.0f64; CT]; RT];
                for i in 0..k {
                    let brow = &b.data[i * n + t0..i * n + t0 + CT];
                    for a in 0..RT {
                        let s = self.data[i * m + r0 + a];
                        for l in 0..CT {
                            acc[a][l] += s * brow[l];
                        }
                    }
                }
                for a in 0..RT {
                    out.data[(r0 + a) * n + t0..(r0 + a) * n + t0 + CT]
                        .copy_from_slice(&acc[a]);
                }
            }
        }
        for r in 0..m {
            let tstart = if r < main_rows { main_cols } else { 0 };
            if tstart == n {
                continue;
            }
            for t in tstart..n {
                let mut s = 0.0;
                for i in 0..k {
                    s += self.data[i * m + r] * b.data[i * n + t];
                }
                out.data[r * n + t] = s;
            }
        }
        out
    }

    /// Matrix-vector product; row `i` of the result is the canonical
    /// [`dot`] of row `i` with `v`.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(
            self.cols,
            v.len(),
            "matvec dimension mismatch: {}x{} * len {}",
            self.rows,
            self.cols,
            v.len()
        );
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// All entries finite (no NaN or infinity).
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Sum of squared entries across a collection of matrices.
pub fn frobenius_norm_sq(ws: &[Matrix]) -> f64 {
    assert!(!ws.is_empty(), "frobenius_norm_sq of an empty list");
    ws.iter().map(|w| w.frob_sq()).sum()
}

/// Euclidean norm of a vector.
pub fn vec_norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values computed with an independent big-integer
    // implementation of splitmix64 and xoshiro256++.
    #[test]
    fn splitmix64_reference_stream() {
        let mut s = 1u64;
        let got: Vec<u64> = (0..4).map(|_| splitmix64_next(&mut s)).collect();
        assert_eq!(
            got,
            vec![
                10451216379200822465,
                13757245211066428519,
                17911839290282890590,
                8196980753821780235
            ]
        );
        let mut s = 0xDEADBEEFu64;
        let got: Vec<u64> = (0..4).map(|_| splitmix64_next(&mut s)).collect();
        assert_eq!(
            got,
            vec![
                5395234354446855067,
                16021672434157553954,
                153047824787635229,
                8387618351419058064
            ]
        );
    }

    #[test]
    fn xoshiro_reference_stream() {
        let mut rng = RngState::new(1);
        let got: Vec<u64> = (0..5).map(|_| rng.next_u64()).collect();
        assert_eq!(
            got,
            vec![
                14971601782005023387,
                13781649495232077965,
                1847458086238483744,
                13765271635752736470,
                3406718355780431780
            ]
        );
        let mut rng = RngState::new(0xDEADBEEF);
        let got: Vec<u64> = (0..5).map(|_| rng.next_u64()).collect();
        assert_eq!(
            got,
            vec![
                887788264254705374,
                3131310381243359458,
                13700943409776775970,
                6855428166950120087,
                16142291723720382552
            ]
        );
    }

    #[test]
    fn equal_seeds_equal_streams() {
        let mut a = RngState::new(777);
        let mut b = RngState::new(777);
        for _ in 0..1_000_000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn gaussian_pair_consumes_two_words() {
        let mut a = RngState::new(9);
        let mut b = RngState::new(9);
        let _ = a.next_gaussian(); // consumes two words, caches the spare
        let _ = a.next_gaussian(); // consumes none
        let _ = b.next_u64();
        let _ = b.next_u64();
        assert_eq!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn gaussian_moments_large_sample() {
        let mut rng = RngState::new(20250512);
        let m = Matrix::gaussian(&mut rng, 1000, 1000, 1.0);
        let n = m.data().len() as f64;
        let mean = m.data().iter().sum::<f64>() / n;
        let var = m.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        assert!(mean.abs() < 0.01, "sample mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "sample variance {var}");
        assert!(m.is_finite());
    }

    #[test]
    fn gaussian_same_seed_bitwise_identical() {
        let mut a = RngState::new(4242);
        let mut b = RngState::new(4242);
        let ma = Matrix::gaussian(&mut a, 17, 13, 0.3);
        let mb = Matrix::gaussian(&mut b, 17, 13, 0.3);
        assert_eq!(ma, mb);
    }

    #[test]
    fn matmul_identity_and_zero() {
        let mut rng = RngState::new(5);
        let m = Matrix::gaussian(&mut rng, 3, 3, 1.0);
        let id = Matrix::identity(3);
        assert_eq!(id.matmul(&m), m);
        assert_eq!(m.matmul(&id), m);
        let z = Matrix::zeros(3, 3);
        assert_eq!(z.matmul(&m), Matrix::zeros(3, 3));
    }

    #[test]
    fn matmul_hand_example() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = Matrix::from_rows(&[&[5.0], &[6.0]]);
        let c = a.matmul(&b);
        assert_eq!(c.data(), &[17.0, 39.0]);
    }

    #[test]
    #[should_panic(expected = "matmul dimension mismatch")]
    fn matmul_dimension_mismatch_panics() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 3);
        let _ = a.matmul(&b);
    }

    #[test]
    fn matmul_variants_agree_with_naive() {
        let mut rng = RngState::new(88);
        for (m, k, n) in [(5, 7, 9), (19, 33, 18), (64, 64, 64), (21, 50, 37)] {
            let a = Matrix::gaussian(&mut rng, m, k, 1.0);
            let b = Matrix::gaussian(&mut rng, k, n, 1.0);
            let c = a.matmul(&b);
            let mut naive = Matrix::zeros(m, n);
            for i in 0..m {
                for j in 0..n {
                    let mut s = 0.0;
                    for kk in 0..k {
                        s += a.get(i, kk) * b.get(kk, j);
                    }
                    naive.set(i, j, s);
                }
            }
            for (x, y) in c.data().iter().zip(naive.data()) {
                assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
            }
            let via_bt = a.matmul_bt(&b.transpose());
            let via_at = a.transpose().matmul_at(&b);
            for (x, y) in via_bt.data().iter().zip(naive.data()) {
                assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
            }
            for (x, y) in via_at.data().iter().zip(naive.data()) {
                assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
            }
        }
    }

    #[test]
    fn matvec_matches_matmul_bt_bitwise() {
        let mut rng = RngState::new(31);
        let w = Matrix::gaussian(&mut rng, 40, 23, 1.0);
        let x = Matrix::gaussian(&mut rng, 6, 23, 1.0);
        let batched = x.matmul_bt(&w); // rows are per-sample results
        for i in 0..6 {
            let single = w.matvec(x.row(i));
            assert_eq!(single.as_slice(), batched.row(i));
        }
    }

    #[test]
    fn frobenius_examples() {
        assert_eq!(frobenius_norm_sq(&[Matrix::zeros(3, 2)]), 0.0);
        assert_eq!(frobenius_norm_sq(&[Matrix::identity(2)]), 2.0);
        let m = Matrix::from_rows(&[&[3.0, 4.0]]);
        assert_eq!(frobenius_norm_sq(&[m]), 25.0);
    }

    #[test]
    fn frobenius_additive_over_list() {
        let mut rng = RngState::new(7);
        let ws: Vec<Matrix> = (0..4)
            .map(|_| Matrix::gaussian(&mut rng, 8, 8, 1.0))
            .collect();
        let total = frobenius_norm_sq(&ws);
        let sum: f64 = ws.iter().map(|w| frobenius_norm_sq(&[w.clone()])).sum();
        assert_eq!(total, sum);
    }

    #[test]
    fn sample_indices_without_replacement() {
        let mut rng = RngState::new(99);
        for _ in 0..50 {
            let mut idx = rng.sample_indices(20, 12);
            idx.sort_unstable();
            idx.dedup();
            assert_eq!(idx.len(), 12);
            assert!(idx.iter().all(|&i| i < 20));
        }
        let mut all = rng.sample_indices(7, 7);
        all.sort_unstable();
        assert_eq!(all, (0..7).collect::<Vec<_>>());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn matmul_associative(seed in 0u64..1_000_000) {
                let mut rng = RngState::new(seed);
                let a = Matrix::gaussian(&mut rng, 6, 5, 1.0);
                let b = Matrix::gaussian(&mut rng, 5, 7, 1.0);
                let c = Matrix::gaussian(&mut rng, 7, 4, 1.0);
                let left = a.matmul(&b).matmul(&c);
                let right = a.matmul(&b.matmul(&c));
                for (x, y) in left.data().iter().zip(right.data()) {
                    let scale = x.abs().max(y.abs()).max(1.0);
                    prop_assert!((x - y).abs() <= 1e-10 * scale);
                }
            }
        }
    }
}
