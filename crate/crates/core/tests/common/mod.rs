//! Independent Born-rule oracle on the full `(in, aux, X2)^N` register,
//! written with raw matrices so it shares no code with the library models.

#![allow(dead_code)]

use broadcast_core::tensor::{CMatrix, C64};
use broadcast_core::LabeledOperator;
use nalgebra::DMatrix;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn id2() -> CMatrix {
    DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)])
}

pub fn sx() -> CMatrix {
    DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
}

pub fn sy() -> CMatrix {
    DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)])
}

pub fn sz() -> CMatrix {
    DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
}

/// `sigma_0..3 = I, X, Y, Z`.
pub fn sigma(m: usize) -> CMatrix {
    [id2(), sx(), sy(), sz()][m].clone()
}

/// `|i> -> |i>_in (|00> + |11>)_{aux X2} / sqrt2`.
pub fn splitting_isometry() -> CMatrix {
    let mut v = CMatrix::zeros(8, 2);
    for i in 0..2 {
        for a in 0..2 {
            v[(i * 4 + a * 2 + a, i)] = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        }
    }
    v
}

fn half(op: &CMatrix, sign: f64) -> CMatrix {
    (id2() + op * c(sign, 0.0)) * c(0.5, 0.0)
}

/// Upper effect on `(in, aux)` for setting `x1`, outcome `a1`.
pub fn upper_effect(x1: usize, a1: usize) -> CMatrix {
    if x1 == 0 {
        // (sigma_m (x) I) Phi+ written on (aux, in)
        let s = sigma(a1);
        let mut v = CMatrix::zeros(4, 1);
        for i in 0..2 {
            for a in 0..2 {
                v[(i * 2 + a, 0)] = s[(a, i)] * c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            }
        }
        return &v * v.adjoint();
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let m = match x1 {
        1 => (sz() + sx()) * c(r, 0.0),
        2 => (sz() - sx()) * c(r, 0.0),
        3 => (sz() + sy()) * c(r, 0.0),
        4 => (sz() - sy()) * c(r, 0.0),
        5 => (sx() + sy()) * c(r, 0.0),
        6 => (sx() - sy()) * c(r, 0.0),
        _ => panic!("x1 = {x1}"),
    };
    id2().kronecker(&half(&m, if a1 == 0 { 1.0 } else { -1.0 }))
}

/// Lower effect for setting index `x2` (Z, X, Y), outcome `a2`.
pub fn lower_effect(x2: usize, a2: usize) -> CMatrix {
    let m = [sz(), sx(), sy()][x2].clone();
    half(&m, if a2 == 0 { 1.0 } else { -1.0 })
}

/// `(V (x) ... (x) V) rho (V (x) ... (x) V)^dagger`.
pub fn broadcast_state(rho: &CMatrix, parties: usize) -> CMatrix {
    let v = splitting_isometry();
    let mut total = v.clone();
    for _ in 1..parties {
        total = total.kronecker(&v);
    }
    &total * rho * total.adjoint()
}

/// `P(a1 a2 b1 b2 ... | x1 x2 y1 y2 ...)` with per-party `(x1, a1, x2, a2)`.
pub fn born(global: &CMatrix, local: &[(usize, usize, usize, usize)]) -> f64 {
    let mut effect =
        upper_effect(local[0].0, local[0].1).kronecker(&lower_effect(local[0].2, local[0].3));
    for &(x1, a1, x2, a2) in &local[1..] {
        effect = effect.kronecker(&upper_effect(x1, a1).kronecker(&lower_effect(x2, a2)));
    }
    // tr[E G] without forming the product
    let d = global.nrows();
    let mut acc = 0.0;
    for i in 0..d {
        for j in 0..d {
            acc += (effect[(i, j)] * global[(j, i)]).re;
        }
    }
    acc
}

/// `I(P)` for a witness table `w[a][b][x][y]` (0-based settings), conditioning on `Phi+` twice.
#[allow(clippy::needless_range_loop)]
pub fn functional(global: &CMatrix, w: &[[[[f64; 3]; 3]; 2]; 2]) -> f64 {
    let mut total = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            for x in 0..3 {
                for y in 0..3 {
                    total += w[a][b][x][y] * born(global, &[(0, 0, x, a), (0, 0, y, b)]);
                }
            }
        }
    }
    total
}

pub fn matrix(op: &LabeledOperator) -> CMatrix {
    op.data().clone()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
