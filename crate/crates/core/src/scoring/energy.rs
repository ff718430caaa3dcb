//! Unbiased M-sample energy score, as a plain function and on the tape.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::scoring::grid::{GridFunction, PredictiveEnsemble};
use crate::tape::{NodeId, Tape};

/// `(1/M) sum_j ||u_j - y|| - 1/(2M(M-1)) sum_{j != h} ||u_j - u_h||`.
pub fn energy_score_estimator<T: Scalar>(
    ensemble: &PredictiveEnsemble<T>,
    obs: &GridFunction<T>,
) -> Result<T> {
    let m = ensemble.size();
    if m < 2 {
        return Err(Error::EstimatorUndefined(format!(
            "the unbiased energy score needs M >= 2 members, got {m}"
        )));
    }
    ensemble.check_obs(obs)?;
    let members = ensemble.members();
    let fit: T = members.iter().map(|u| u.distance_unchecked(obs)).sum();
    let mut spread = T::zero();
    for j in 0..m {
        for h in j + 1..m {
            spread += members[j].distance_unchecked(&members[h]);
        }
    }
    let mt = T::from_usize_lossy(m);
    // sum over ordered pairs j != h is twice the sum over j < h
    Ok(fit / mt - spread / (mt * (mt - T::one())))
}

/// The same estimator recorded on a tape. Members and observation are nodes of equal
/// layout; `weight` is the grid's per-point quadrature weight.
pub fn energy_score_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    members: &[NodeId],
    obs: NodeId,
    weight: T,
) -> Result<NodeId> {
    let m = members.len();
    if m < 2 {
        return Err(Error::EstimatorUndefined(format!(
            "the unbiased energy score needs M >= 2 members, got {m}"
        )));
    }
    let mut fit = Vec::with_capacity(m);
    for &u in members {
        let d = tape.sub(u, obs)?;
        fit.push(tape.norm(d, weight)?);
    }
    let mut spread = Vec::with_capacity(m * (m - 1) / 2);
    for j in 0..m {
        for h in j + 1..m {
            let d = tape.sub(members[j], members[h])?;
            spread.push(tape.norm(d, weight)?);
        }
    }
    let mt = T::from_usize_lossy(m);
    let fit_sum = tape.add_all(&fit)?;
    let fit_term = tape.scale(fit_sum, T::one() / mt)?;
    let spread_sum = tape.add_all(&spread)?;
    let spread_term = tape.scale(spread_sum, T::one() / (mt * (mt - T::one())))?;
    tape.sub(fit_term, spread_term)
}
