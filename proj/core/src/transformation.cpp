#include "qpnls/transformation.hpp"
#include "qpnls/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qpnls {

namespace {

/* Assembles a two-component state from its components. */
TorusFunction pair_from(const TorusFunction& plus, const TorusFunction& minus,
                        Reality tag) {
    if (!plus.same_shape(minus))
        throw UsageError("pair_from: component shapes differ");
    TorusFunction out = TorusFunction::zero(plus.d, plus.N, 2, tag);
    const std::size_t per = out.per_comp();
    std::copy(plus.data.begin(), plus.data.end(), out.data.begin());
    std::copy(minus.data.begin(), minus.data.end(), out.data.begin() + per);
    return out;
}

void require_two_components(const TorusFunction& u, const char* where) {
    if (u.ncomp != 2)
        throw UsageError(std::string(where) + ": two-component state required");
}

} // namespace

Transformation make_matrix_transform(const TorusFunction& alpha,
                                     const TorusFunction& beta,
                                     double min_det, int oversample) {
    if (!alpha.same_shape(beta) || alpha.ncomp != 1)
        throw UsageError("make_matrix_transform: entries must share a scalar box");
    Transformation t;
    t.kind = TransformKind::matrix_mult;
    t.alpha = alpha;
    t.beta = beta;

    /* Pointwise inverse of [[alpha, beta], [conj beta, conj alpha]]:
     * (1/det) [[conj alpha, -beta], [-conj beta, alpha]] with the real
     * determinant det = |alpha|^2 - |beta|^2.  The inverse keeps the same
     * realness pattern, so only two entry functions are stored. */
    const int m = grid_size(alpha.N, oversample);
    GridValues ga = to_grid(alpha, 0, m, m);
    GridValues gb = to_grid(beta, 0, m, m);
    GridValues gia = ga, gib = gb;
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < ga.v.size(); ++p) {
        const cd a = ga.v[p], b = gb.v[p];
        const double det = std::norm(a) - std::norm(b);
        worst = std::min(worst, std::abs(det));
        gia.v[p] = std::conj(a) / det;
        gib.v[p] = -b / det;
    }
    if (!(worst >= min_det))
        throw UsageError("make_matrix_transform: pointwise determinant too small");
    GridProjection pa = from_grid(gia, alpha.d, alpha.N);
    GridProjection pb = from_grid(gib, alpha.d, alpha.N);
    t.alpha_inv = pa.value;
    t.beta_inv = pb.value;
    t.inverse_tail = pa.tail + pb.tail;
    return t;
}

Transformation make_scalar_transform(const TorusFunction& r, double min_det,
                                     int oversample) {
    TorusFunction zero = TorusFunction::zero(r.d, r.N, 1, r.tag);
    return make_matrix_transform(r, zero, min_det, oversample);
}

Transformation make_space_transform(const TorusFunction& xi,
                                    bool jacobian_sqrt) {
    Transformation t;
    t.kind = TransformKind::space_diffeo;
    t.xi = xi;
    t.jacobian_sqrt = jacobian_sqrt;
    DiffeoInverse inv = invert_diffeo(xi);
    t.xi_hat = inv.value;
    t.inverse_defect = inv.identity_defect + inv.fp_residual;
    return t;
}

Transformation make_time_transform(const TorusFunction& tshift,
                                   const std::array<double, 3>& omega) {
    Transformation t;
    t.kind = TransformKind::time_diffeo;
    t.tshift = tshift;
    t.omega = omega;
    DiffeoInverse inv = invert_time_diffeo(tshift, omega);
    t.tshift_hat = inv.value;
    t.inverse_defect = inv.identity_defect + inv.fp_residual;
    return t;
}

Transformation make_exp_transform(const BlockOperator& generator, double tol,
                                  int max_terms) {
    Transformation t;
    t.kind = TransformKind::operator_exp;
    t.generator = generator;
    t.exp_tol = tol;
    t.exp_max_terms = max_terms;
    return t;
}

namespace {

TorusFunction matrix_apply(const TorusFunction& a, const TorusFunction& b,
                           const TorusFunction& u) {
    require_two_components(u, "matrix transform");
    TorusFunction up = u.component(0), um = u.component(1);
    TorusFunction outp = multiply(a, up, u.N).value;
    outp += multiply(b, um, u.N).value;
    TorusFunction outm = multiply(conj_function(b), up, u.N).value;
    outm += multiply(conj_function(a), um, u.N).value;
    return pair_from(outp, outm, u.tag);
}

TorusFunction diffeo_apply(const Transformation& t, const TorusFunction& u,
                           bool fwd) {
    std::vector<TorusFunction> comps;
    comps.reserve(std::size_t(u.ncomp));
    for (int c = 0; c < u.ncomp; ++c) {
        if (t.kind == TransformKind::space_diffeo)
            comps.push_back(compose_space_diffeo(u.component(c),
                                                 fwd ? t.xi : t.xi_hat,
                                                 t.jacobian_sqrt)
                                .value);
        else
            comps.push_back(compose_time_diffeo(u.component(c),
                                                fwd ? t.tshift : t.tshift_hat,
                                                t.omega)
                                .value);
    }
    if (u.ncomp == 1) return comps[0];
    require_two_components(u, "diffeomorphism transform");
    return pair_from(comps[0], comps[1], u.tag);
}

} // namespace

TorusFunction forward(const Transformation& t, const TorusFunction& u) {
    switch (t.kind) {
    case TransformKind::matrix_mult:
        return matrix_apply(t.alpha, t.beta, u);
    case TransformKind::space_diffeo:
    case TransformKind::time_diffeo:
        return diffeo_apply(t, u, true);
    case TransformKind::operator_exp:
        return exp_apply(t.generator, u, 1.0, t.exp_tol, t.exp_max_terms);
    }
    throw UsageError("forward: unknown transform kind");
}

TorusFunction inverse(const Transformation& t, const TorusFunction& u) {
    switch (t.kind) {
    case TransformKind::matrix_mult:
        return matrix_apply(t.alpha_inv, t.beta_inv, u);
    case TransformKind::space_diffeo:
    case TransformKind::time_diffeo:
        return diffeo_apply(t, u, false);
    case TransformKind::operator_exp:
        return exp_apply(t.generator, u, -1.0, t.exp_tol, t.exp_max_terms);
    }
    throw UsageError("inverse: unknown transform kind");
}

TorusFunction forward(const TransformChain& chain, const TorusFunction& u) {
    TorusFunction out = u;
    for (auto it = chain.steps.rbegin(); it != chain.steps.rend(); ++it)
        out = forward(*it, out);
    return out;
}

TorusFunction inverse(const TransformChain& chain, const TorusFunction& u) {
    TorusFunction out = u;
    for (const Transformation& t : chain.steps) out = inverse(t, out);
    return out;
}

TorusFunction exp_apply(const BlockOperator& b, const TorusFunction& u,
                        double scale, double tol, int max_terms) {
    TorusFunction out = u;
    TorusFunction term = u;
    const double base = sobolev_norm(u, 0.0);
    for (int n = 1; n <= max_terms; ++n) {
        term = apply(b, term);
        term *= cd(scale / double(n), 0.0);
        out += term;
        if (sobolev_norm(term, 0.0) <= tol * (1.0 + base)) return out;
    }
    return out;
}

BlockOperator exp_operator(const BlockOperator& b, int l_out, double scale,
                           double tol, int max_terms) {
    BlockOperator out = BlockOperator::identity(b.d, b.J, l_out);
    BlockOperator term = out;
    for (int n = 1; n <= max_terms; ++n) {
        term = compose(term, b, l_out);
        term *= cd(scale / double(n), 0.0);
        out += term;
        if (decay_norm(term, 0.0) <= tol) break;
    }
    return out;
}

BlockOperator drift_commutator(const BlockOperator& x,
                               const std::array<double, 3>& omega) {
    BlockOperator out = x;
    const TimeBox box = x.tbox();
    for (int idx = 0; idx < box.count(); ++idx) {
        const std::array<int, 3> l = box.unflatten(idx);
        out.mats[std::size_t(idx)] *= cd(0.0, dot(omega, l, x.d));
    }
    return out;
}

BlockOperator exp_conjugate(const BlockOperator& k, const BlockOperator& b,
                            const std::array<double, 3>& omega, double drift,
                            double tol, int max_terms) {
    const int l = k.L;
    const double scale = 1.0 + decay_norm(k, 0.0);

    /* exp(-B) K exp(B) = sum_n (1/n!) ad_{-B}^n(K),
     * ad_{-B}(X) = X B - B X. */
    BlockOperator out = k;
    BlockOperator term = k;
    for (int n = 1; n <= max_terms; ++n) {
        BlockOperator next = compose(term, b, l);
        next -= compose(b, term, l);
        next *= cd(1.0 / double(n), 0.0);
        term = next;
        out += term;
        if (decay_norm(term, 0.0) <= tol * scale) break;
    }

    if (drift != 0.0) {
        /* exp(-B) [omega.d_phi, exp(B)] = sum_n (-1)^n/(n+1)! ad_B^n(dB). */
        /* the commutator chain widens the time box of each term up to the
         * output width, so accumulate with the box-promoting add */
        BlockOperator t2 = drift_commutator(b, omega);
        add_scaled(out, t2, cd(drift, 0.0));
        for (int n = 1; n <= max_terms; ++n) {
            BlockOperator next = compose(b, t2, l);
            add_scaled(next, compose(t2, b, l), cd(-1.0, 0.0));
            next *= cd(-1.0 / double(n + 1), 0.0);
            t2 = next;
            add_scaled(out, t2, cd(drift, 0.0));
            if (decay_norm(t2, 0.0) <= tol * scale) break;
        }
    }
    return out;
}

namespace {

int transform_dim(const Transformation& t) {
    switch (t.kind) {
    case TransformKind::matrix_mult: return t.alpha.d;
    case TransformKind::space_diffeo: return t.xi.d;
    case TransformKind::time_diffeo: return t.tshift.d;
    case TransformKind::operator_exp: return t.generator.d;
    }
    return 1;
}

int transform_box(const Transformation& t) {
    switch (t.kind) {
    case TransformKind::matrix_mult: return t.alpha.N;
    case TransformKind::space_diffeo: return t.xi.N;
    case TransformKind::time_diffeo: return t.tshift.N;
    case TransformKind::operator_exp: return t.generator.J;
    }
    return 0;
}

std::array<double, 3> random_phase(Rng& rng, int d) {
    std::array<double, 3> phi{{0.0, 0.0, 0.0}};
    for (int k = 0; k < d; ++k) phi[std::size_t(k)] = rng.uniform(0.0, kTwoPi);
    return phi;
}

TorusFunction sample_state(Rng& rng, int d, int nbig) {
    const int ncontent = std::min(3, nbig);
    return make_conjugate_pair(
        embed(random_function(rng, d, ncontent, 1.5), nbig));
}

} // namespace

std::array<double, 3> matched_phase(const Transformation& t,
                                    const std::array<double, 3>& phi) {
    if (t.kind != TransformKind::time_diffeo) return phi;
    const double shift = std::real(eval_at(t.tshift, 0, phi, 0.0));
    std::array<double, 3> out = phi;
    for (int k = 0; k < t.tshift.d; ++k)
        out[std::size_t(k)] += t.omega[std::size_t(k)] * shift;
    return out;
}

SymplecticCheck check_symplectic(const Transformation& t, Rng& rng,
                                 int samples, double tol) {
    TransformChain chain;
    chain.steps.push_back(t);
    return check_symplectic(chain, rng, samples, tol);
}

SymplecticCheck check_symplectic(const TransformChain& chain, Rng& rng,
                                 int samples, double tol) {
    SymplecticCheck result;
    if (chain.steps.empty()) return result;
    const int d = transform_dim(chain.steps.front());
    int box = 0;
    for (const Transformation& t : chain.steps)
        box = std::max(box, transform_box(t));
    const int nbig = box + 8;

    for (int it = 0; it < samples; ++it) {
        TorusFunction u = sample_state(rng, d, nbig);
        TorusFunction v = sample_state(rng, d, nbig);
        const std::array<double, 3> phi = random_phase(rng, d);
        std::array<double, 3> inner = phi;
        for (const Transformation& t : chain.steps)
            inner = matched_phase(t, inner);

        const TorusFunction tu = forward(chain, u), tv = forward(chain, v);
        const double before =
            symplectic_form(u.component(0), v.component(0), inner);
        const double after =
            symplectic_form(tu.component(0), tv.component(0), phi);
        const double viol = std::abs(after - before) / (1.0 + std::abs(before));
        result.max_violation = std::max(result.max_violation, viol);
    }
    result.ok = result.max_violation <= tol;
    return result;
}

TorusFunction shift_space(const TorusFunction& u, int k) {
    TorusFunction out = TorusFunction::zero(u.d, u.N, u.ncomp, u.tag);
    const TimeBox box = u.tbox();
    for (int c = 0; c < u.ncomp; ++c)
        for (int idx = 0; idx < box.count(); ++idx) {
            const std::array<int, 3> l = box.unflatten(idx);
            for (int j = -u.N; j <= u.N; ++j) {
                const int jj = j + k;
                if (jj < -u.N || jj > u.N) continue;
                out.at(c, l, jj) = u.get(c, l, j);
            }
        }
    return out;
}

TorusFunction freeze_phase(const TorusFunction& u,
                           const std::array<double, 3>& phi) {
    TorusFunction out = TorusFunction::zero(u.d, u.N, u.ncomp, u.tag);
    const TimeBox box = u.tbox();
    const std::array<int, 3> zero{{0, 0, 0}};
    for (int c = 0; c < u.ncomp; ++c)
        for (int idx = 0; idx < box.count(); ++idx) {
            const std::array<int, 3> l = box.unflatten(idx);
            const cd phase = std::exp(cd(0.0, dot(phi, l, u.d)));
            for (int j = -u.N; j <= u.N; ++j)
                out.at(c, zero, j) += phase * u.get(c, l, j);
        }
    return out;
}

} // namespace qpnls
