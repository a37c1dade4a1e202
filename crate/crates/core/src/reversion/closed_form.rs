use num_complex::Complex64 as C64;

use super::{negate, ForwardBackend, TruncatedPinv, PROVEN_ORDER};
use crate::error::{Error, Result};

/// `F_1..F_K` (`K ≤ 4`) from the expanded formulas
///
/// ```text
/// F_2 = −G_2
/// F_3 = −G_3 + L_21 + R_21
/// F_4 = −G_4 − G_22 + C_22 + V_22 + L_31 − LL_22 − LR_22 + H_22 + R_31 − RR_22 − RL_22
/// ```
///
/// where `G_k = MP(F_1)^k N`, `G_22 = MP(G_2)²N`, `L_k1 = MP(F_1)P(G_k)N`,
/// `R_k1 = MP(G_k)P(F_1)N`, `LL_22 = MP(F_1)P(L_21)N`, `RR_22 = MP(R_21)P(F_1)N`,
/// `RL_22 = MP(L_21)P(F_1)N`, `LR_22 = MP(F_1)P(R_21)N`,
/// `C_22 = MP(F_1)P(G_2)P(F_1)N`, `V_22 = MP(F_1)²P(G_2)N` and
/// `H_22 = MP(G_2)P(F_1)²N`.
pub fn closed_form_terms<B: ForwardBackend>(
    backend: &B,
    u: &[B::State],
    pinv: &TruncatedPinv,
    f1: &[C64],
    order: usize,
) -> Result<Vec<Vec<C64>>> {
    if order == 0 || order > PROVEN_ORDER {
        return Err(Error::InvalidArgument(format!(
            "closed-form terms exist for orders 1..=4, got {order}"
        )));
    }
    let p = |b: &[C64], s: &[B::State]| backend.apply_perturbation(b, s);
    let m = |s: &[B::State]| -> Result<Vec<C64>> { pinv.apply(&backend.measure(s)?) };

    let mut terms = vec![f1.to_vec()];
    if order < 2 {
        return Ok(terms);
    }
    let p1u = p(f1, u)?;
    let p11u = p(f1, &p1u)?;
    let g2 = m(&p11u)?;
    terms.push(negate(&g2));
    if order < 3 {
        return Ok(terms);
    }

    let p111u = p(f1, &p11u)?;
    let g3 = m(&p111u)?;
    let pg2u = p(&g2, u)?;
    let l21 = m(&p(f1, &pg2u)?)?;
    let r21 = m(&p(&g2, &p1u)?)?;
    terms.push(combine(&[(-1.0, &g3), (1.0, &l21), (1.0, &r21)]));
    if order < 4 {
        return Ok(terms);
    }

    let g4 = m(&p(f1, &p111u)?)?;
    let g22 = m(&p(&g2, &pg2u)?)?;
    let pg3u = p(&g3, u)?;
    let l31 = m(&p(f1, &pg3u)?)?;
    let r31 = m(&p(&g3, &p1u)?)?;
    let ll22 = m(&p(f1, &p(&l21, u)?)?)?;
    let lr22 = m(&p(f1, &p(&r21, u)?)?)?;
    let rr22 = m(&p(&r21, &p1u)?)?;
    let rl22 = m(&p(&l21, &p1u)?)?;
    let c22 = m(&p(f1, &p(&g2, &p1u)?)?)?;
    let v22 = m(&p(f1, &p(f1, &pg2u)?)?)?;
    let h22 = m(&p(&g2, &p11u)?)?;
    terms.push(combine(&[
        (-1.0, &g4),
        (-1.0, &g22),
        (1.0, &c22),
        (1.0, &v22),
        (1.0, &l31),
        (-1.0, &ll22),
        (-1.0, &lr22),
        (1.0, &h22),
        (1.0, &r31),
        (-1.0, &rr22),
        (-1.0, &rl22),
    ]));
    Ok(terms)
}

fn combine(parts: &[(f64, &Vec<C64>)]) -> Vec<C64> {
    let n = parts[0].1.len();
    (0..n).map(|k| parts.iter().map(|(c, v)| v[k] * *c).sum()).collect()
}
