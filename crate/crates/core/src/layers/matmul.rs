//! Register-tiled f64 matrix kernels. All heavy layers (conv via im2col,
//! fully-connected) reduce to these three products, written so the
//! auto-vectorizer emits wide FMA loops with enough independent
//! accumulators to hide latency. Loop and reduction orders are fixed, so
//! results are bit-deterministic for a given build.

/// Rows per register tile.
const MR: usize = 4;
/// Columns per register tile (two 8-lane vectors).
const NR: usize = 16;
/// Lanes per dot-product accumulator.
const VEC: usize = 8;

/// `C[m×n] += A[m×k] · B[k×n]`, all row-major.
pub fn gemm_nn(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    assert_eq!(a.len(), m * k, "gemm_nn: A length");
    assert_eq!(b.len(), k * n, "gemm_nn: B length");
    assert_eq!(c.len(), m * n, "gemm_nn: C length");
    let mut i = 0;
    while i < m {
        let mr = MR.min(m - i);
        let mut j = 0;
        while j < n {
            let nr = NR.min(n - j);
            if mr == MR && nr == NR {
                nn_tile_full(a, b, c, k, n, i, j);
            } else {
                nn_tile_edge(a, b, c, k, n, i, j, mr, nr);
            }
            j += NR;
        }
        i += MR;
    }
}

#[inline]
fn nn_tile_full(a: &[f64], b: &[f64], c: &mut [f64], k: usize, n: usize, i: usize, j: usize) {
    let mut acc = [[0.0f64; NR]; MR];
    let a0 = &a[i * k..(i + 1) * k];
    let a1 = &a[(i + 1) * k..(i + 2) * k];
    let a2 = &a[(i + 2) * k..(i + 3) * k];
    let a3 = &a[(i + 3) * k..(i + 4) * k];
    for kk in 0..k {
        let b_row = &b[kk * n + j..kk * n + j + NR];
        let av = [a0[kk], a1[kk], a2[kk], a3[kk]];
        for r in 0..MR {
            for cc in 0..NR {
                acc[r][cc] += av[r] * b_row[cc];
            }
        }
    }
    for r in 0..MR {
        let dst = &mut c[(i + r) * n + j..(i + r) * n + j + NR];
        for cc in 0..NR {
            dst[cc] += acc[r][cc];
        }
    }
}

#[inline]
#[allow(clippy::too_many_arguments)]
fn nn_tile_edge(
    a: &[f64],
    b: &[f64],
    c: &mut [f64],
    k: usize,
    n: usize,
    i: usize,
    j: usize,
    mr: usize,
    nr: usize,
) {
    let mut acc = [[0.0f64; NR]; MR];
    for kk in 0..k {
        let b_row = &b[kk * n + j..kk * n + j + nr];
        for r in 0..mr {
            let av = a[(i + r) * k + kk];
            for (cc, &bv) in b_row.iter().enumerate() {
                acc[r][cc] += av * bv;
            }
        }
    }
    for r in 0..mr {
        let dst = &mut c[(i + r) * n + j..(i + r) * n + j + nr];
        for (cc, d) in dst.iter_mut().enumerate() {
            *d += acc[r][cc];
        }
    }
}

/// `C[m×n] += A[m×p] · B[n×p]ᵀ` — both operands reduce along their
/// contiguous axis (a blocked batch of dot products).
pub fn gemm_nt(a: &[f64], b: &[f64], c: &mut [f64], m: usize, p: usize, n: usize) {
    assert_eq!(a.len(), m * p, "gemm_nt: A length");
    assert_eq!(b.len(), n * p, "gemm_nt: B length");
    assert_eq!(c.len(), m * n, "gemm_nt: C length");
    const MT: usize = 4;
    const NT: usize = 4;
    let chunks = p / VEC;
    let mut i = 0;
    while i < m {
        let mt = MT.min(m - i);
        let mut j = 0;
        while j < n {
            let nt = NT.min(n - j);
            // one 8-lane accumulator per (r, s) cell of the tile
            let mut acc = [[[0.0f64; VEC]; NT]; MT];
            for ch in 0..chunks {
                let off = ch * VEC;
                for r in 0..mt {
                    let av = &a[(i + r) * p + off..(i + r) * p + off + VEC];
                    for s in 0..nt {
                        let bv = &b[(j + s) * p + off..(j + s) * p + off + VEC];
                        for l in 0..VEC {
                            acc[r][s][l] += av[l] * bv[l];
                        }
                    }
                }
            }
            for r in 0..mt {
                for s in 0..nt {
                    // scalar tail, then the pinned lane reduction
                    let mut tail = 0.0;
                    for off in chunks * VEC..p {
                        tail += a[(i + r) * p + off] * b[(j + s) * p + off];
                    }
                    c[(i + r) * n + (j + s)] += reduce_lanes(&acc[r][s]) + tail;
                }
            }
            j += NT;
        }
        i += MT;
    }
}

/// Fixed-order lane reduction (same shape as the scalar `dot` helper).
#[inline]
fn reduce_lanes(l: &[f64; VEC]) -> f64 {
    ((l[0] + l[4]) + (l[1] + l[5])) + ((l[2] + l[6]) + (l[3] + l[7]))
}

/// `C[m×n] += Aᵀ · B` with `A[p×m]`, `B[p×n]`, all row-major — the
/// reduction runs down the rows of both operands.
pub fn gemm_tn(a: &[f64], b: &[f64], c: &mut [f64], p: usize, m: usize, n: usize) {
    assert_eq!(a.len(), p * m, "gemm_tn: A length");
    assert_eq!(b.len(), p * n, "gemm_tn: B length");
    assert_eq!(c.len(), m * n, "gemm_tn: C length");
    let mut i = 0;
    while i < m {
        let mr = MR.min(m - i);
        let mut j = 0;
        while j < n {
            let nr = NR.min(n - j);
            let mut acc = [[0.0f64; NR]; MR];
            if mr == MR && nr == NR {
                for pp in 0..p {
                    let b_row = &b[pp * n + j..pp * n + j + NR];
                    let a_row = &a[pp * m + i..pp * m + i + MR];
                    for r in 0..MR {
                        for cc in 0..NR {
                            acc[r][cc] += a_row[r] * b_row[cc];
                        }
                    }
                }
            } else {
                for pp in 0..p {
                    let b_row = &b[pp * n + j..pp * n + j + nr];
                    for r in 0..mr {
                        let av = a[pp * m + i + r];
                        for (cc, &bv) in b_row.iter().enumerate() {
                            acc[r][cc] += av * bv;
                        }
                    }
                }
            }
            for r in 0..mr {
                let dst = &mut c[(i + r) * n + j..(i + r) * n + j + nr];
                for (cc, d) in dst.iter_mut().enumerate() {
                    *d += acc[r][cc];
                }
            }
            j += NR;
        }
        i += MR;
    }
}
