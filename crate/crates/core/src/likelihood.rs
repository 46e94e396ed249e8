//! Category probabilities and the grouped log-likelihood.

use crate::error::{HetopError, Result};
use crate::model::{pull_back_gradient, unpack, CategoryCountTable, FreeParameterVector, GroupParams, IdentificationScheme};
use crate::normal::{self, PROB_FLOOR};

/// Probit arguments bounding category `k`: `(lambda (mu - tau_k), lambda (mu - tau_{k+1}))`
/// with `tau_0 = -inf` and `tau_{K+1} = +inf`.
#[inline]
fn bounds(mu: f64, lambda: f64, thresholds: &[f64], k: usize) -> (f64, f64) {
    let upper = if k == 0 { f64::INFINITY } else { lambda * (mu - thresholds[k - 1]) };
    let lower = if k == thresholds.len() { f64::NEG_INFINITY } else { lambda * (mu - thresholds[k]) };
    (upper, lower)
}

/// `Pr(Y = k) = Phi(lambda (mu - tau_k)) - Phi(lambda (mu - tau_{k+1}))`.
pub fn category_prob(mu: f64, lambda: f64, thresholds: &[f64], k: usize) -> Result<f64> {
    if k > thresholds.len() {
        return Err(HetopError::Index { index: k, limit: thresholds.len() + 1 });
    }
    if !(lambda > 0.0) {
        return Err(HetopError::Domain(format!("discrimination must be positive, got {lambda}")));
    }
    let (upper, lower) = bounds(mu, lambda, thresholds, k);
    Ok(normal::interval(upper, lower))
}

pub fn all_category_probs(params: &GroupParams, g: usize) -> Result<Vec<f64>> {
    if g >= params.n_groups() {
        return Err(HetopError::Index { index: g, limit: params.n_groups() });
    }
    let lambda = params.lambda(g);
    Ok((0..=params.n_thresholds())
        .map(|k| {
            let (upper, lower) = bounds(params.mu[g], lambda, &params.thresholds, k);
            normal::interval(upper, lower)
        })
        .collect())
}

/// Probability matrix `G x (K + 1)` for every group.
pub fn probability_table(params: &GroupParams) -> Vec<Vec<f64>> {
    (0..params.n_groups())
        .map(|g| all_category_probs(params, g).expect("group index in range"))
        .collect()
}

#[inline]
fn ln_floored(p: f64) -> f64 {
    p.max(PROB_FLOOR).ln()
}

/// `sum_g w_g sum_k n_gk ln p_gk` for an arbitrary probability matrix.
/// Empty cells contribute exactly zero.
pub fn loglik_from_probs(table: &CategoryCountTable, probs: &[Vec<f64>]) -> Result<f64> {
    if probs.len() != table.n_groups() {
        return Err(HetopError::Dimension { expected: table.n_groups(), actual: probs.len() });
    }
    let mut total = 0.0;
    for (g, (row, p)) in table.rows().zip(probs).enumerate() {
        if p.len() != table.n_categories() {
            return Err(HetopError::Dimension { expected: table.n_categories(), actual: p.len() });
        }
        let group: f64 = row
            .iter()
            .zip(p)
            .filter(|(n, _)| **n > 0.0)
            .map(|(n, p)| n * ln_floored(*p))
            .sum();
        total += table.weight(g) * group;
    }
    Ok(total)
}

fn check_shapes(table: &CategoryCountTable, params: &GroupParams) -> Result<()> {
    if params.n_groups() != table.n_groups() {
        return Err(HetopError::Dimension { expected: table.n_groups(), actual: params.n_groups() });
    }
    if params.n_thresholds() != table.n_thresholds() {
        return Err(HetopError::Dimension { expected: table.n_thresholds(), actual: params.n_thresholds() });
    }
    Ok(())
}

/// Grouped log-likelihood without the multinomial constant.
pub fn grouped_loglik(table: &CategoryCountTable, params: &GroupParams) -> Result<f64> {
    check_shapes(table, params)?;
    loglik_from_probs(table, &probability_table(params))
}

/// `C = sum_g [ln Gamma(n_g + 1) - sum_k ln Gamma(n_gk + 1)]`, the
/// parameter-free part of the multinomial log-likelihood.
pub fn multinomial_constant(table: &CategoryCountTable) -> f64 {
    table
        .rows()
        .map(|row| {
            let n: f64 = row.iter().sum();
            libm::lgamma(n + 1.0) - row.iter().map(|c| libm::lgamma(c + 1.0)).sum::<f64>()
        })
        .sum()
}

/// Log-likelihood and its gradient with respect to the natural parameters.
#[derive(Debug, Clone)]
pub struct NaturalGradient {
    pub loglik: f64,
    pub mu: Vec<f64>,
    pub log_scale: Vec<f64>,
    pub thresholds: Vec<f64>,
}

pub fn natural_gradient(table: &CategoryCountTable, params: &GroupParams) -> Result<NaturalGradient> {
    check_shapes(table, params)?;
    let n_groups = table.n_groups();
    let k_max = table.n_thresholds();
    let tau = &params.thresholds;
    let mut out = NaturalGradient {
        loglik: 0.0,
        mu: vec![0.0; n_groups],
        log_scale: vec![0.0; n_groups],
        thresholds: vec![0.0; k_max],
    };
    for (g, row) in table.rows().enumerate() {
        let w = table.weight(g);
        if w == 0.0 {
            continue;
        }
        let mu = params.mu[g];
        let lambda = params.lambda(g);
        let mut ll = 0.0;
        for (k, &n) in row.iter().enumerate() {
            if n == 0.0 {
                continue;
            }
            let (upper, lower) = bounds(mu, lambda, tau, k);
            let p = normal::interval(upper, lower);
            if p < PROB_FLOOR {
                // clamped region: constant objective, zero derivative
                ll += n * PROB_FLOOR.ln();
                continue;
            }
            ll += n * p.ln();
            let c = w * n / p;
            let (pdf_u, pdf_l) = (normal::pdf(upper), normal::pdf(lower));
            out.mu[g] += c * lambda * (pdf_u - pdf_l);
            out.log_scale[g] += c * (normal::x_pdf(lower) - normal::x_pdf(upper));
            if k > 0 {
                out.thresholds[k - 1] -= c * lambda * pdf_u;
            }
            if k < k_max {
                out.thresholds[k] += c * lambda * pdf_l;
            }
        }
        out.loglik += w * ll;
    }
    Ok(out)
}

/// Log-likelihood (without `C`) and its gradient in free coordinates.
pub fn loglik_and_gradient(
    table: &CategoryCountTable,
    v: &FreeParameterVector,
    scheme: &IdentificationScheme,
) -> Result<(f64, Vec<f64>)> {
    let params = unpack(v, scheme, table.n_groups(), table.n_thresholds())?;
    let ng = natural_gradient(table, &params)?;
    let grad = pull_back_gradient(v, scheme, &ng.mu, &ng.log_scale, &ng.thresholds);
    Ok((ng.loglik, grad))
}

/// Gradient of `grouped_loglik(table, unpack(v))` with respect to `v`.
pub fn loglik_gradient(
    table: &CategoryCountTable,
    v: &FreeParameterVector,
    scheme: &IdentificationScheme,
) -> Result<Vec<f64>> {
    loglik_and_gradient(table, v, scheme).map(|(_, g)| g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::pack;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn table(rows: Vec<Vec<f64>>) -> CategoryCountTable {
        let labels = (0..rows.len()).map(|g| format!("g{g}")).collect();
        CategoryCountTable::new(labels, rows, None).unwrap()
    }

    #[test]
    fn category_prob_examples() {
        assert_eq!(category_prob(0.0, 1.0, &[0.0], 1).unwrap(), 0.5);
        assert_abs_diff_eq!(category_prob(0.255, 1.0, &[0.0], 1).unwrap(), 0.600_638_450_384_382_6, epsilon = 1e-14);
        assert_abs_diff_eq!(
            category_prob(0.0, 2.0, &[-1.0, 1.0], 1).unwrap(),
            0.954_499_736_103_641_6,
            epsilon = 1e-15
        );
        assert!(matches!(category_prob(0.0, 1.0, &[0.0], 2), Err(HetopError::Index { .. })));
    }

    #[test]
    fn all_probs_examples() {
        let p = GroupParams::new(vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0]).unwrap();
        assert_eq!(all_category_probs(&p, 0).unwrap(), vec![0.5, 0.5]);
        let p = GroupParams::new(vec![0.0, 0.0], vec![0.0, 0.0], vec![-1.0, 1.0]).unwrap();
        let probs = all_category_probs(&p, 1).unwrap();
        assert_abs_diff_eq!(probs[0], 0.158_655_253_931_457, epsilon = 1e-12);
        assert_abs_diff_eq!(probs[1], 0.682_689_492_137_086, epsilon = 1e-12);
        assert_abs_diff_eq!(probs[2], 0.158_655_253_931_457, epsilon = 1e-12);
        assert!(all_category_probs(&p, 2).is_err());
    }

    #[test]
    fn grouped_loglik_examples() {
        let p1 = GroupParams::new(vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0]).unwrap();
        let t = table(vec![vec![5.0, 5.0], vec![5.0, 5.0]]);
        assert_abs_diff_eq!(grouped_loglik(&t, &p1).unwrap(), 20.0 * 0.5f64.ln(), epsilon = 1e-12);
        let t = table(vec![vec![8.0, 2.0], vec![5.0, 5.0]]);
        assert_abs_diff_eq!(grouped_loglik(&t, &p1).unwrap(), 20.0 * 0.5f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn loglik_never_nan_in_underflow() {
        let p = GroupParams::new(vec![40.0, -40.0], vec![-2.0, 2.0], vec![0.0]).unwrap();
        let t = table(vec![vec![3.0, 3.0], vec![2.0, 2.0]]);
        let ll = grouped_loglik(&t, &p).unwrap();
        assert!(ll.is_finite());
        let ng = natural_gradient(&t, &p).unwrap();
        assert!(ng.mu.iter().chain(&ng.log_scale).chain(&ng.thresholds).all(|x| x.is_finite()));
    }

    #[test]
    fn multinomial_constant_examples() {
        assert_abs_diff_eq!(multinomial_constant(&table(vec![vec![5.0, 5.0], vec![3.0, 0.0]])), 252f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(multinomial_constant(&table(vec![vec![1.0, 1.0, 1.0], vec![0.0, 0.0, 3.0]])), 6f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn mirrored_groups_give_antisymmetric_mean_gradient() {
        // group 1 is group 0 reflected about the centre of symmetric thresholds
        let t = table(vec![vec![7.0, 3.0, 5.0], vec![5.0, 3.0, 7.0]]);
        let p = GroupParams::new(vec![0.2, -0.2], vec![0.0, 0.0], vec![-0.5, 0.5]).unwrap();
        let ng = natural_gradient(&t, &p).unwrap();
        assert_abs_diff_eq!(ng.mu[0], -ng.mu[1], epsilon = 1e-12);
        assert_abs_diff_eq!(ng.log_scale[0], ng.log_scale[1], epsilon = 1e-12);
        let s = IdentificationScheme::sum_to_zero();
        let v = pack(&p, &s).unwrap();
        let swapped = t.permuted(&[1, 0]).unwrap();
        let q = GroupParams::new(vec![-0.2, 0.2], vec![0.0, 0.0], vec![-0.5, 0.5]).unwrap();
        let gv = loglik_gradient(&t, &v, &s).unwrap();
        let gs = loglik_gradient(&swapped, &pack(&q, &s).unwrap(), &s).unwrap();
        assert_abs_diff_eq!(gv[0], -gs[0], epsilon = 1e-12);
    }

    fn fd_gradient(table: &CategoryCountTable, v: &FreeParameterVector, s: &IdentificationScheme) -> Vec<f64> {
        let h = 1e-5;
        (0..v.len())
            .map(|i| {
                let mut a = v.clone();
                let mut b = v.clone();
                a.0[i] += h;
                b.0[i] -= h;
                let fa = grouped_loglik(table, &unpack(&a, s, table.n_groups(), table.n_thresholds()).unwrap()).unwrap();
                let fb = grouped_loglik(table, &unpack(&b, s, table.n_groups(), table.n_thresholds()).unwrap()).unwrap();
                (fa - fb) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn gradient_matches_finite_differences_g4_k3() {
        let t = table(vec![
            vec![12.0, 30.0, 25.0, 8.0],
            vec![4.0, 18.0, 40.0, 20.0],
            vec![22.0, 15.0, 9.0, 3.0],
            vec![6.0, 6.0, 6.0, 6.0],
        ]);
        for s in [IdentificationScheme::sum_to_zero(), IdentificationScheme::reference(2)] {
            let v = FreeParameterVector(vec![0.3, -0.4, 0.1, 0.2, -0.15, 0.05, -0.7, -0.2, 0.4]);
            let g = loglik_gradient(&t, &v, &s).unwrap();
            let fd = fd_gradient(&t, &v, &s);
            for (a, n) in g.iter().zip(&fd) {
                assert!((a - n).abs() / a.abs().max(n.abs()).max(1.0) < 1e-6, "{a} vs {n}");
            }
        }
    }

    proptest! {
        #[test]
        fn probabilities_sum_to_one(
            mu in -4.0f64..4.0, ls in -1.5f64..1.5,
            start in -3.0f64..3.0, gaps in prop::collection::vec(0.01f64..2.0, 0..6),
        ) {
            let mut t = vec![start];
            for gap in &gaps { t.push(t.last().unwrap() + gap); }
            let p = GroupParams::new(vec![mu, 0.0], vec![ls, 0.0], t).unwrap();
            let probs = all_category_probs(&p, 0).unwrap();
            prop_assert!(probs.iter().all(|x| *x >= 0.0));
            prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let mut cum = 0.0;
            let mut prev = 0.0;
            for x in &probs {
                cum += x;
                prop_assert!(cum >= prev);
                prev = cum;
            }
        }

        #[test]
        fn loglik_permutation_invariant(seed in 0u64..1000) {
            let vals: Vec<f64> = (0..12).map(|i| ((seed * 31 + i * 17) % 23) as f64 + 1.0).collect();
            let t = CategoryCountTable::new(
                vec!["a".into(), "b".into(), "c".into()],
                vals.chunks(4).map(|c| c.to_vec()).collect(),
                Some(vec![1.0, 2.0, 0.5]),
            ).unwrap();
            let p = GroupParams::new(vec![0.1, -0.3, 0.2], vec![0.0, 0.2, -0.2], vec![-1.0, 0.0, 0.8]).unwrap();
            let order = [2usize, 0, 1];
            let tp = t.permuted(&order).unwrap();
            let pp = GroupParams::new(
                order.iter().map(|&g| p.mu[g]).collect(),
                order.iter().map(|&g| p.log_scale[g]).collect(),
                p.thresholds.clone(),
            ).unwrap();
            let a = grouped_loglik(&t, &p).unwrap();
            let b = grouped_loglik(&tp, &pp).unwrap();
            prop_assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
            prop_assert!(a <= 0.0);
        }
    }

    #[test]
    fn pack_then_gradient_dimension() {
        let t = table(vec![vec![1.0, 2.0], vec![2.0, 1.0]]);
        let p = GroupParams::new(vec![0.1, -0.1], vec![0.0, 0.0], vec![0.0]).unwrap();
        let v = pack(&p, &IdentificationScheme::sum_to_zero()).unwrap();
        assert_eq!(loglik_gradient(&t, &v, &IdentificationScheme::sum_to_zero()).unwrap().len(), 3);
    }
}
