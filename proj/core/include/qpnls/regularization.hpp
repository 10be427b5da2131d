#pragma once

/*
 * Conjugation of the linearized operator to constant coefficients up to a
 * smoothing remainder.  Seven changes of variables are applied in order:
 *
 *   1. pointwise 2x2 diagonalization of the second-order block
 *   2. space diffeomorphism flattening the second-order coefficient in x
 *   3. time reparametrization making it constant (value m2), at the price
 *      of an overall scalar factor rho that is divided out
 *   4. phase-dependent space translation averaging the first-order
 *      coefficient in x
 *   5. unit-modulus rescaling diag(e^s, e^{-s}) making it constant (m1)
 *   6. exponential of a smoothing generator moving the x-dependence of the
 *      diagonal zero-order coefficient into the remainder
 *   7. multiplier diag(e^Gamma, e^{-Gamma}) making its average constant (m0)
 *
 * The output satisfies  L0 V2 = V1 (omega.d_phi + L7)  on states, where
 * V2 = T1...T7 is symplectic, V1 is the same chain with the scalar factor
 * rho inserted after step 3, and L7 is the Toplitz part of
 *   i m2 E dxx + i diag(m1, -conj m1) dx + i (m0 E + [[0, q0], [-conj q0, 0]])
 * plus a remainder of one smoothing order.
 *
 * Every stage is certified at runtime: coefficients of the conjugated
 * operator are re-extracted by probing with single space modes, structural
 * claims (vanishing cross coefficients, reality, x-independence) are
 * measured, and the stage operator rebuilt from the extracted coefficients
 * is compared against the functional conjugation chain on random states.
 */

#include "qpnls/model.hpp"
#include "qpnls/transformation.hpp"

#include <functional>
#include <string>
#include <vector>

namespace qpnls {

/* Coefficient functions of a differential operator in the standard shape
 *   omega.d_phi + i (E + A2) dxx + i A1 dx + i (m E + A0),
 * A_k = [[a_k, b_k], [-conj b_k, -conj a_k]]. */
struct Coefficients {
    TorusFunction a2, b2, a1, b1, a0, b0;
};

struct StepDiagnostics {
    std::string name;
    /* relative mismatch between the functional conjugation chain and the
     * operator rebuilt from the extracted coefficients, on a random state */
    double conjugation_residual = 0.0;
    /* worst violation of the stage's structural claims (coefficients that
     * must vanish, be real, be imaginary, or be x-independent) */
    double structure_defect = 0.0;
    /* spectral mass dropped by grid fits and section truncations */
    double tail = 0.0;
    /* slice symplecticity of the stage transformation */
    double symplectic_violation = 0.0;
};

struct RegularizationOptions {
    int Nf = 24;       /* working cutoff for coefficient functions */
    int J = 16;        /* space half-width of operator sections */
    int L = 16;        /* time half-width of operator sections */
    double divisor_floor = 1e-10; /* guard for omega.l inversions */
    double min_det = 0.05;        /* pointwise invertibility floor, step 1 */
    bool residual_checks = true;
    int symplectic_samples = 5;
    std::uint64_t seed = 1234;
};

struct RegularizationResult {
    /* constants of the normal form */
    double m2 = 1.0;
    cd m1{0.0, 0.0};
    double m0 = 0.0;
    TorusFunction q0; /* residual off-diagonal zero-order coefficient */

    /* full Toplitz part of the final operator and its smoothing remainder
     * (final minus the constant-coefficient normal form) */
    BlockOperator L7;
    BlockOperator remainder;

    /* L0 V2 = V1 (omega.d_phi + L7): V2 symplectic, V1 carries rho */
    TransformChain V1, V2;

    /* step artifacts, kept for inspection and dumps */
    TorusFunction xi;         /* step 2 shift */
    TorusFunction alpha_time; /* step 3 reparametrization */
    TorusFunction rho;        /* step 3 scalar factor */
    TorusFunction beta_shift; /* step 4 translation */
    TorusFunction s_rescale;  /* step 5 exponent */
    TorusFunction w_gen;      /* step 6 generator coefficient */
    TorusFunction gamma_phase;/* step 7 exponent */

    /* stage-by-stage extracted coefficients (entry 0 = input operator) */
    std::vector<Coefficients> stages;
    std::vector<StepDiagnostics> steps;

    /* nondegeneracy of the first-order average: |m1| >= eps |e| / 2 */
    double m1_floor = 0.0;
    bool m1_nondegenerate = false;

    /* master identity residual ||L0 V2 h - V1 (drift + L7) h|| relative,
     * on a random state (0 when residual_checks are disabled) */
    double identity_residual = 0.0;

    /* structural defects of the final operator section */
    double final_hamiltonian_defect = 0.0;
    double final_realness_defect = 0.0;
};

using OpAction = std::function<TorusFunction(const TorusFunction&)>;

/* Materializes the standard differential shape with the given coefficient
 * functions in a (J, L) section; accumulates into *dropped the l2 mass of
 * coefficient time-modes outside the section. */
BlockOperator assemble_differential(double m, const Coefficients& c, int J,
                                    int L, double* dropped = nullptr);

/*
 * Recovers the coefficient functions of an operator of the standard shape
 * by applying it to the probes (e^{ikx}, 0) and (0, e^{ikx}), k = 0, 1, 2,
 * and forming exact linear combinations of the shifted outputs.  Valid as
 * long as the operator's remainder part vanishes (stages 1 through 5).
 */
Coefficients extract_coefficients(const OpAction& op, double m, int d, int N);

RegularizationResult regularize(const ModelParams& mp, const Nonlinearity& nl,
                                const std::array<double, 3>& omega,
                                const TorusFunction& state,
                                const RegularizationOptions& opt);

} // namespace qpnls
