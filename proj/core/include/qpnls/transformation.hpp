#pragma once

/*
 * Symplectic changes of variables used to conjugate the linearized operator
 * to constant coefficients.  Five kinds are supported:
 *
 *   matrix_mult   pointwise 2x2 multiplication with the realness pattern
 *                 [[alpha, beta], [conj beta, conj alpha]]; covers the
 *                 fiberwise diagonalization, the scalar rescalings
 *                 diag(e^s, e^{conj s}), and plain scalar factors.
 *   space_diffeo  h(phi, x) -> sqrt(1 + xi_x) h(phi, x + xi(phi, x)) applied
 *                 to both components (the square-root Jacobian factor keeps
 *                 the map symplectic; it can be disabled for translations).
 *   time_diffeo   h(phi, x) -> h(phi + omega alpha(phi), x), x-independent
 *                 reparametrization of the torus flow.
 *   operator_exp  exp(B) for a Toplitz-in-time generator B, applied by a
 *                 truncated exponential series.
 *
 * A TransformChain composes several of these left-to-right, i.e. the chain
 * [T1, T2, T3] realizes the operator product T1 T2 T3 acting on states.
 */

#include "qpnls/torus_function.hpp"
#include "qpnls/block_operator.hpp"

#include <array>
#include <vector>

namespace qpnls {

enum class TransformKind { matrix_mult, space_diffeo, time_diffeo, operator_exp };

struct Transformation {
    TransformKind kind = TransformKind::matrix_mult;

    /* matrix_mult: forward entries and precomputed pointwise inverse */
    TorusFunction alpha, beta, alpha_inv, beta_inv;
    double inverse_tail = 0.0; /* spectral tail dropped when fitting the
                                  pointwise inverse back into the cutoff box */

    /* space_diffeo: forward shift xi and its compositional inverse xi_hat */
    TorusFunction xi, xi_hat;
    bool jacobian_sqrt = true;
    double inverse_defect = 0.0; /* sup-norm identity defect of xi_hat */

    /* time_diffeo: forward shift and compositional inverse, and the frequency */
    TorusFunction tshift, tshift_hat;
    std::array<double, 3> omega{{0.0, 0.0, 0.0}};

    /* operator_exp */
    BlockOperator generator;
    double exp_tol = 1e-14;
    int exp_max_terms = 60;
};

/*
 * Builds the 2x2 multiplication transform.  alpha and beta live on the same
 * box; the pointwise inverse matrix is computed on an oversampled grid and
 * truncated back to the same box (the dropped l^2 mass is recorded in
 * inverse_tail).  Throws UsageError when the pointwise determinant
 * |alpha|^2 - |beta|^2 comes closer to zero than min_det.
 */
Transformation make_matrix_transform(const TorusFunction& alpha,
                                     const TorusFunction& beta,
                                     double min_det = 0.1,
                                     int oversample = 4);

/* Scalar factor r on both components: matrix transform with beta = 0. */
Transformation make_scalar_transform(const TorusFunction& r,
                                     double min_det = 0.1,
                                     int oversample = 4);

/*
 * Space diffeomorphism with real shift xi, sup |xi_x| < 1/2.  The
 * compositional inverse is computed once by fixed-point iteration.
 */
Transformation make_space_transform(const TorusFunction& xi,
                                    bool jacobian_sqrt = true);

/* Time reparametrization phi -> phi + omega * tshift(phi), tshift real and
 * x-independent. */
Transformation make_time_transform(const TorusFunction& tshift,
                                   const std::array<double, 3>& omega);

/* Exponential of a Toplitz generator. */
Transformation make_exp_transform(const BlockOperator& generator,
                                  double tol = 1e-14, int max_terms = 60);

/* Forward and inverse action on a two-component state. */
TorusFunction forward(const Transformation& t, const TorusFunction& u);
TorusFunction inverse(const Transformation& t, const TorusFunction& u);

struct TransformChain {
    std::vector<Transformation> steps;
};

/* (T1 T2 ... Tn) u and its inverse (Tn^{-1} ... T1^{-1}) u. */
TorusFunction forward(const TransformChain& chain, const TorusFunction& u);
TorusFunction inverse(const TransformChain& chain, const TorusFunction& u);

/*
 * exp(scale * B) u by the exponential series, run until the last term falls
 * below tol relative to the input norm (H^0) or max_terms is reached.
 */
TorusFunction exp_apply(const BlockOperator& b, const TorusFunction& u,
                        double scale = 1.0, double tol = 1e-14,
                        int max_terms = 60);

/* exp(scale * B) materialized as a Toplitz section with time half-width
 * l_out (exact composition, then truncation). */
BlockOperator exp_operator(const BlockOperator& b, int l_out,
                           double scale = 1.0, double tol = 1e-14,
                           int max_terms = 60);

/*
 * Toplitz part of the conjugation exp(-B) (drift * omega.d_phi + K) exp(B),
 * i.e. K' with exp(-B) (drift * omega.d_phi + K) exp(B)
 *            = drift * omega.d_phi + K'.
 * Computed as the commutator series
 *     K' = sum_n (1/n!) ad_{-B}^n(K)
 *          + drift * sum_n (-1)^n/(n+1)! ad_B^n(delta B),
 * where delta is the derivation [omega.d_phi, .] (block l scaled by
 * i omega.l).  All products are truncated to the time half-width of K.
 */
BlockOperator exp_conjugate(const BlockOperator& k, const BlockOperator& b,
                            const std::array<double, 3>& omega,
                            double drift = 1.0, double tol = 1e-14,
                            int max_terms = 60);

/* [omega.d_phi, X]: block l scaled by i omega.l. */
BlockOperator drift_commutator(const BlockOperator& x,
                               const std::array<double, 3>& omega);

/*
 * Numerical symplecticity certificate.  Random conjugate-pair states u, v
 * with interior support are pushed through the map and the pairing
 * Im integral conj(u) v dx of the first components is compared on matching
 * x-sections: the output is sliced at a random phase phi, the input at
 * matched_phase(phi) (time reparametrizations shift the slice, every other
 * kind leaves it fixed).  max_violation is the worst relative mismatch.
 */
struct SymplecticCheck {
    double max_violation = 0.0;
    bool ok = true;
};

/* Phase at which the input is sliced when the output is sliced at phi. */
std::array<double, 3> matched_phase(const Transformation& t,
                                    const std::array<double, 3>& phi);

SymplecticCheck check_symplectic(const Transformation& t, Rng& rng,
                                 int samples, double tol);
SymplecticCheck check_symplectic(const TransformChain& chain, Rng& rng,
                                 int samples, double tol);

/* Modes shifted in space: (shift_space(u, k))_{l, j+k} = u_{l, j}; modes
 * leaving the box are dropped. */
TorusFunction shift_space(const TorusFunction& u, int k);

/* Time modes collapsed at a fixed phase: v(x) = u(phi, x) as a function on
 * the same box with only the l = 0 row occupied. */
TorusFunction freeze_phase(const TorusFunction& u,
                           const std::array<double, 3>& phi);

} // namespace qpnls
