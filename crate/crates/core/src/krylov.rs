//! Preconditioned conjugate gradients on spectral fields.

use crate::spectral::SpectralField;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    /// L² norm of the true residual `b − A x` at exit.
    pub residual: f64,
    pub converged: bool,
}

/// Solve `A x = b` for a symmetric positive definite `A` (in the L² inner
/// product) starting from `x0`. Stops when the L² norm of the residual is at
/// most `tol`. The recursively updated residual is checked against a freshly
/// computed one before declaring convergence.
pub fn pcg<A, M>(
    mut apply: A,
    precondition: M,
    rhs: &SpectralField,
    x0: SpectralField,
    tol: f64,
    max_iter: usize,
) -> (SpectralField, CgOutcome)
where
    A: FnMut(&SpectralField) -> SpectralField,
    M: Fn(&SpectralField) -> SpectralField,
{
    let mut x = x0;
    let mut r = rhs - &apply(&x);
    let mut res = r.l2_norm();
    let mut iterations = 0;
    if res <= tol {
        return (
            x,
            CgOutcome {
                iterations,
                residual: res,
                converged: true,
            },
        );
    }
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = r.inner(&z);
    while iterations < max_iter {
        iterations += 1;
        let ap = apply(&p);
        let pap = p.inner(&ap);
        if pap <= 0.0 || !pap.is_finite() {
            break;
        }
        let alpha = rz / pap;
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        res = r.l2_norm();
        if res <= tol {
            r = rhs - &apply(&x);
            res = r.l2_norm();
            if res <= tol {
                return (
                    x,
                    CgOutcome {
                        iterations,
                        residual: res,
                        converged: true,
                    },
                );
            }
            // drifted recursion: restart from the true residual
            z = precondition(&r);
            p = z.clone();
            rz = r.inner(&z);
            continue;
        }
        z = precondition(&r);
        let rz_new = r.inner(&z);
        let beta = rz_new / rz;
        rz = rz_new;
        p = &z + &p.scale(beta);
    }
    let res = (rhs - &apply(&x)).l2_norm();
    (
        x,
        CgOutcome {
            iterations,
            residual: res,
            converged: res <= tol,
        },
    )
}
