//! Principal ideal test and class number by enumeration.

use super::{FieldElement, IdealHNF, QuadField};
use crate::arith;
use crate::error::{Error, Result};

pub(crate) const DEFAULT_SEARCH_BUDGET: u64 = 200_000_000;

#[derive(Debug, Clone, PartialEq)]
pub enum SearchOutcome {
    Generator(FieldElement),
    /// The search region provably contains a generator of every principal
    /// ideal of this norm, and none was found.
    NotPrincipal,
}

/// Search for γ ∈ I with |N(γ)| = N(I).
///
/// Every principal ideal has a generator with γ_μ > 0 and
/// 1 ≤ γ_μ / |γ_ν| < ε², i.e. √N ≤ γ_μ < ε√N and |γ_ν| ≤ √N. Writing
/// γ = x + yω gives 0 ≤ y ≤ (ε + 1)√N / (ω_μ - ω_ν), so exhausting that
/// range of y (and solving for x exactly) settles principality.
pub(crate) fn principal_generator(field: &QuadField, ideal: &IdealHNF, budget: u64) -> Result<SearchOutcome> {
    if field.is_rational() {
        return Ok(SearchOutcome::Generator(field.elem(ideal.a, 0)));
    }
    let n = ideal.norm() as i128;
    let eps = field.fundamental_unit()?.embeddings().0;
    let (wm, wn) = field.basis.omega_embeddings();
    let y_max = ((eps + 1.0) * (n as f64).sqrt() / (wm - wn)).ceil() + 2.0;
    if y_max > budget as f64 {
        return Err(Error::SearchBudgetExceeded { bound: budget });
    }
    let (t, nn) = (field.basis.t, field.basis.n);
    for y in 0..=(y_max as i128) {
        if y % ideal.c != 0 {
            continue;
        }
        for s in [1i128, -1] {
            // x² + t·y·x - (n·y² + s·N) = 0
            let disc = t * t * y * y + 4 * (nn * y * y + s * n);
            if disc < 0 || !arith::is_square(disc) {
                continue;
            }
            let r = arith::isqrt(disc);
            for num in [-t * y + r, -t * y - r] {
                if num % 2 != 0 {
                    continue;
                }
                let x = num / 2;
                if ideal.contains_int((x, y)) {
                    return Ok(SearchOutcome::Generator(field.elem(x, y)));
                }
            }
        }
    }
    Ok(SearchOutcome::NotPrincipal)
}

pub(crate) fn class_number_by_enumeration(field: &QuadField) -> Result<u64> {
    if field.is_rational() {
        return Ok(1);
    }
    let bound = field.minkowski_bound().floor() as u64;
    let mut reps: Vec<IdealHNF> = vec![IdealHNF::unit()];
    for nrm in 2..=bound.max(1) {
        for i in field.ideals_of_norm(nrm) {
            let mut known = false;
            for j in &reps {
                let prod = field.ideal_mul(&i, &field.ideal_conj(j));
                if let SearchOutcome::Generator(_) = principal_generator(field, &prod, DEFAULT_SEARCH_BUDGET)? {
                    known = true;
                    break;
                }
            }
            if !known {
                reps.push(i);
            }
        }
    }
    Ok(reps.len() as u64)
}
