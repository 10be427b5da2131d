#include "qpnls/regularization.hpp"

#include <algorithm>
#include <cmath>

namespace qpnls {

namespace {

TorusFunction pair2(const TorusFunction& plus, const TorusFunction& minus,
                    Reality tag) {
    TorusFunction out = TorusFunction::zero(plus.d, plus.N, 2, tag);
    const std::size_t per = out.per_comp();
    std::copy(plus.data.begin(), plus.data.end(), out.data.begin());
    std::copy(minus.data.begin(), minus.data.end(), out.data.begin() + per);
    return out;
}

double norm0(const TorusFunction& u) { return sobolev_norm(u, 0.0); }

TorusFunction sub(const TorusFunction& a, const TorusFunction& b) {
    TorusFunction c = a;
    c -= b;
    return c;
}

/* x-average as a function of phase: the j = 0 column. */
TorusFunction average_x(const TorusFunction& u) {
    TorusFunction out = u;
    const TimeBox box = u.tbox();
    for (int c = 0; c < u.ncomp; ++c)
        for (int idx = 0; idx < box.count(); ++idx) {
            const std::array<int, 3> l = box.unflatten(idx);
            for (int j = -u.N; j <= u.N; ++j)
                if (j != 0) out.at(c, l, j) = cd(0.0, 0.0);
        }
    return out;
}

cd coeff00(const TorusFunction& u) { return u.get(0, {0, 0, 0}, 0); }

/* distance from a real-valued function */
double imag_defect(const TorusFunction& u) {
    TorusFunction v = conj_function(u);
    v -= u;
    return 0.5 * norm0(v);
}

/* distance from a purely imaginary-valued function */
double real_defect(const TorusFunction& u) {
    TorusFunction v = conj_function(u);
    v += u;
    return 0.5 * norm0(v);
}

TorusFunction const_fn(int d, int N, cd value) {
    return TorusFunction::single_mode(d, N, {0, 0, 0}, 0, value);
}

/* pointwise algebra of several coefficient functions on a common grid */
TorusFunction grid_map(const std::vector<const TorusFunction*>& in, int N,
                       const std::function<cd(const std::vector<cd>&)>& f,
                       double* tail) {
    const int d = in.at(0)->d;
    const int m = grid_size(N, 4);
    std::vector<GridValues> gs;
    gs.reserve(in.size());
    for (const TorusFunction* p : in) gs.push_back(to_grid(embed(*p, N), 0, m, m));
    GridValues out = gs[0];
    std::vector<cd> vals(in.size());
    for (std::size_t p = 0; p < out.v.size(); ++p) {
        for (std::size_t i = 0; i < gs.size(); ++i) vals[i] = gs[i].v[p];
        out.v[p] = f(vals);
    }
    GridProjection pr = from_grid(out, d, N);
    if (tail) *tail += pr.tail;
    return pr.value;
}

/* both components multiplied by the scalar function f */
TorusFunction scale_components(const TorusFunction& f, const TorusFunction& u) {
    TorusFunction p = multiply(f, u.component(0), u.N).value;
    TorusFunction q = multiply(f, u.component(1), u.N).value;
    return pair2(p, q, u.tag);
}

OpAction wrap(const OpAction& g, const Transformation& t) {
    return [g, t](const TorusFunction& h) {
        return inverse(t, g(forward(t, h)));
    };
}

double conjugation_residual(const OpAction& g, const BlockOperator& assembled,
                            const std::array<double, 3>& omega, Rng& rng,
                            int d, int nf) {
    TorusFunction h =
        make_conjugate_pair(embed(random_function(rng, d, 3, 1.5), nf));
    TorusFunction lhs = g(h);
    TorusFunction rhs = derivative(h, Deriv::omega_dphi, omega);
    rhs += apply(assembled, h);
    return norm0(sub(lhs, rhs)) / (1.0 + norm0(lhs));
}

/* zero out the total average after recording its size */
double strip_mean(TorusFunction& u) {
    const double size = std::abs(coeff00(u));
    u.at(0, {0, 0, 0}, 0) = cd(0.0, 0.0);
    return size;
}

void force_real(TorusFunction& u) {
    u.tag = Reality::real_valued;
    symmetrize_reality(u);
}

/* project onto purely imaginary values: u <- (u - conj u) / 2 */
void force_imag(TorusFunction& u) {
    TorusFunction v = conj_function(u);
    u -= v;
    u *= cd(0.5, 0.0);
}

} // namespace

BlockOperator assemble_differential(double m, const Coefficients& c, int J,
                                    int L, double* dropped) {
    const int d = c.a2.d;
    BlockOperator A(d, J, L);
    add_symbol(A, 0, [&](int j) { return cd(0, 1) * cd(-double(j) * j + m, 0); });
    add_symbol(A, 1, [&](int j) { return cd(0, -1) * cd(-double(j) * j + m, 0); });
    const TorusFunction* as[3] = {&c.a0, &c.a1, &c.a2};
    const TorusFunction* bs[3] = {&c.b0, &c.b1, &c.b2};
    double drop = 0.0;
    for (int k = 0; k < 3; ++k) {
        BlockOperator Mk(d, J, L);
        drop += add_mult(Mk, 0, 0, *as[k], cd(0, 1));
        drop += add_mult(Mk, 0, 1, *bs[k], cd(0, 1));
        drop += add_mult(Mk, 1, 0, conj_function(*bs[k]), cd(0, -1));
        drop += add_mult(Mk, 1, 1, conj_function(*as[k]), cd(0, -1));
        if (k == 0) {
            A += Mk;
        } else {
            BlockOperator Dk(d, J, 0);
            add_symbol(Dk, 0, [&](int j) { return std::pow(cd(0, j), k); });
            add_symbol(Dk, 1, [&](int j) { return std::pow(cd(0, j), k); });
            add_scaled(A, compose(Mk, Dk, L), cd(1, 0));
        }
    }
    if (dropped) *dropped += drop;
    return A;
}

Coefficients extract_coefficients(const OpAction& op, double m, int d, int N) {
    auto probe = [&](int comp, int k) {
        TorusFunction p = TorusFunction::zero(d, N, 2, Reality::complex_valued);
        p.at(comp, {0, 0, 0}, k) = cd(1.0, 0.0);
        TorusFunction plus = op(p).component(0);
        plus = shift_space(plus, -k);
        plus *= cd(0.0, -1.0);
        return plus;
    };
    /* F_k = -k^2 (1 + a2) + i k a1 + (m + a0), and the same combinations on
     * the second-component probes for the cross coefficients. */
    const TorusFunction F0 = probe(0, 0), F1 = probe(0, 1), F2 = probe(0, 2);
    const TorusFunction H0 = probe(1, 0), H1 = probe(1, 1), H2 = probe(1, 2);

    Coefficients c;
    TorusFunction e2 = F2;
    e2 -= cd(2.0, 0.0) * F1;
    e2 += F0;
    e2 *= cd(-0.5, 0.0);

    c.a2 = e2;
    c.a2.at(0, {0, 0, 0}, 0) -= cd(1.0, 0.0);
    c.a1 = F1;
    c.a1 -= F0;
    c.a1 += e2;
    c.a1 *= cd(0.0, -1.0);
    c.a0 = F0;
    c.a0.at(0, {0, 0, 0}, 0) -= cd(m, 0.0);

    TorusFunction b2 = H2;
    b2 -= cd(2.0, 0.0) * H1;
    b2 += H0;
    b2 *= cd(-0.5, 0.0);
    c.b2 = b2;
    c.b1 = H1;
    c.b1 -= H0;
    c.b1 += b2;
    c.b1 *= cd(0.0, -1.0);
    c.b0 = H0;
    return c;
}

RegularizationResult regularize(const ModelParams& mp, const Nonlinearity& nl,
                                const std::array<double, 3>& omega,
                                const TorusFunction& state,
                                const RegularizationOptions& opt) {
    const int d = mp.d, Nf = opt.Nf, J = opt.J, L = opt.L;
    const double m = mp.m, eps = mp.epsilon;
    Rng rng(opt.seed);
    RegularizationResult R;
    std::vector<Transformation> T; /* T1..T7 in order */

    /* ---- stage 0: the linearized operator itself ---- */
    LinOp lin = linearized_operator(mp, nl, omega, state, J, L, Nf);
    OpAction G = [lin](const TorusFunction& h) { return apply(lin, h); };

    {
        StepDiagnostics sd;
        sd.name = "assembly";
        Coefficients c0 = extract_coefficients(G, m, d, Nf);
        /* independent rebuild of the coefficients from the model partials */
        NonlinearityEval ev = nl.eval(state, Nf);
        double mismatch = 0.0;
        const TorusFunction* ex[6] = {&c0.a2, &c0.b2, &c0.a1,
                                      &c0.b1, &c0.a0, &c0.b0};
        const TorusFunction* md[6] = {&ev.fz[2], &ev.fzbar[2], &ev.fz[1],
                                      &ev.fzbar[1], &ev.fz[0], &ev.fzbar[0]};
        for (int i = 0; i < 6; ++i)
            mismatch = std::max(
                mismatch, norm0(sub(*ex[i], cd(eps, 0.0) * embed(*md[i], Nf))));
        sd.structure_defect = mismatch;
        if (opt.residual_checks) {
            BlockOperator a0 = assemble_differential(m, c0, J, L, &sd.tail);
            sd.conjugation_residual =
                conjugation_residual(G, a0, omega, rng, d, Nf);
        }
        R.steps.push_back(sd);
        R.stages.push_back(c0);
    }

    auto push_stage = [&](const char* name, const Transformation& t,
                          double structure_pre) {
        T.push_back(t);
        G = wrap(G, t);
        StepDiagnostics sd;
        sd.name = name;
        sd.structure_defect = structure_pre;
        Coefficients c = extract_coefficients(G, m, d, Nf);
        if (opt.residual_checks && T.size() <= 5) {
            BlockOperator a = assemble_differential(m, c, J, L, &sd.tail);
            sd.conjugation_residual =
                conjugation_residual(G, a, omega, rng, d, Nf);
        }
        sd.symplectic_violation =
            check_symplectic(t, rng, opt.symplectic_samples, 1e-9)
                .max_violation;
        R.steps.push_back(sd);
        R.stages.push_back(c);
    };
    auto stage = [&](int i) -> const Coefficients& {
        return R.stages.at(std::size_t(i));
    };
    auto diag = [&](int i) -> StepDiagnostics& {
        return R.steps.at(std::size_t(i));
    };

    /* ---- stage 1: pointwise diagonalization of the second-order block ----
     * lambda1 = sqrt((1+a2)^2 - |b2|^2),  mu = sqrt(2 lambda1 (1+a2+lambda1)),
     * alpha = (1+a2+lambda1)/mu,  beta = -b2/mu;  then |alpha|^2-|beta|^2 = 1
     * and the transformed block is diag(lambda1, -lambda1). */
    {
        const Coefficients& c0 = stage(0);
        double tail = 0.0;
        TorusFunction alpha = grid_map(
            {&c0.a2, &c0.b2}, Nf,
            [](const std::vector<cd>& v) {
                const double e = 1.0 + v[0].real();
                const double l1 = std::sqrt(e * e - std::norm(v[1]));
                return cd((e + l1) / std::sqrt(2.0 * l1 * (e + l1)), 0.0);
            },
            &tail);
        TorusFunction beta = grid_map(
            {&c0.a2, &c0.b2}, Nf,
            [](const std::vector<cd>& v) {
                const double e = 1.0 + v[0].real();
                const double l1 = std::sqrt(e * e - std::norm(v[1]));
                return -v[1] / std::sqrt(2.0 * l1 * (e + l1));
            },
            &tail);
        const double pre = imag_defect(c0.a2); /* a2 must be real-valued */
        Transformation t1 = make_matrix_transform(alpha, beta, opt.min_det);
        push_stage("fiber diagonalization", t1, pre);
        diag(1).tail += tail + t1.inverse_tail;
        /* the transformed cross coefficients must vanish */
        diag(1).structure_defect = std::max(
            {diag(1).structure_defect, norm0(stage(1).b2), norm0(stage(1).b1)});
    }

    /* ---- stage 2: space diffeomorphism flattening a2 in x ----
     * rho0 = (1+a2')^{1/2} (1+a2)^{-1/2} - 1 with the phase-only profile
     * a2'(phi) = (avg_x (1+a2)^{-1/2})^{-2} - 1, and xi = dx^{-1} rho0. */
    {
        const Coefficients& c1 = stage(1);
        double tail = 0.0;
        TorusFunction g = grid_map(
            {&c1.a2}, Nf,
            [](const std::vector<cd>& v) {
                return cd(1.0 / std::sqrt(1.0 + v[0].real()), 0.0);
            },
            &tail);
        TorusFunction gavg = average_x(g);
        TorusFunction rho0 = grid_map(
            {&gavg, &g}, Nf,
            [](const std::vector<cd>& v) {
                const double a22 = 1.0 / (v[0].real() * v[0].real());
                return cd(std::sqrt(a22) * v[1].real() - 1.0, 0.0);
            },
            &tail);
        TorusFunction r0avg = average_x(rho0);
        const double pre = norm0(r0avg) + imag_defect(c1.a2);
        rho0 -= r0avg;
        TorusFunction xi = dx_inverse(rho0);
        force_real(xi);
        R.xi = xi;
        Transformation t2 = make_space_transform(xi, true);
        push_stage("space flattening", t2, pre);
        diag(2).tail += tail;
        diag(2).structure_defect =
            std::max({diag(2).structure_defect,
                      norm0(sub(stage(2).a2, average_x(stage(2).a2))),
                      norm0(stage(2).b2), norm0(stage(2).b1),
                      t2.inverse_defect});
    }

    /* ---- stage 3: time reparametrization making a2 constant ----
     * m2 = avg_phi (1+a2),  alpha = (1/m2) (omega.d_phi)^{-1} (1+a2-m2);
     * the conjugation produces the factor rho = T3^{-1}(1 + omega.d_phi
     * alpha) which is divided out of the whole operator. */
    {
        TorusFunction ax = average_x(stage(2).a2);
        R.m2 = 1.0 + coeff00(ax).real();
        double pre = std::abs(coeff00(ax).imag());
        TorusFunction pa = sub(ax, const_fn(d, Nf, cd(R.m2 - 1.0, 0.0)));
        pre += strip_mean(pa);
        TorusFunction alpha_t =
            omega_dphi_inverse(pa, omega, opt.divisor_floor);
        alpha_t *= cd(1.0 / R.m2, 0.0);
        pre += imag_defect(alpha_t);
        force_real(alpha_t);
        R.alpha_time = alpha_t;
        Transformation t3 = make_time_transform(alpha_t, omega);

        TorusFunction one_plus = derivative(alpha_t, Deriv::omega_dphi, omega);
        one_plus += const_fn(d, Nf, cd(1.0, 0.0));
        ComposeResult rr = compose_time_diffeo(one_plus, t3.tshift_hat, omega);
        R.rho = rr.value;
        force_real(R.rho);
        double tail = rr.tail;
        double rho_min = 1e300;
        TorusFunction inv_rho = grid_map(
            {&R.rho}, Nf,
            [&rho_min](const std::vector<cd>& v) {
                rho_min = std::min(rho_min, v[0].real());
                return cd(1.0 / v[0].real(), 0.0);
            },
            &tail);
        if (rho_min < 0.3)
            throw UsageError("regularize: time rescaling factor too small");

        /* conjugate, then divide both components by rho */
        T.push_back(t3);
        OpAction base = G;
        Transformation t3c = t3;
        TorusFunction ir = inv_rho;
        G = [base, t3c, ir](const TorusFunction& h) {
            return scale_components(ir, inverse(t3c, base(forward(t3c, h))));
        };
        StepDiagnostics sd;
        sd.name = "time rescaling";
        sd.structure_defect = pre;
        sd.tail = tail;
        Coefficients c = extract_coefficients(G, m, d, Nf);
        if (opt.residual_checks) {
            BlockOperator a = assemble_differential(m, c, J, L, &sd.tail);
            sd.conjugation_residual =
                conjugation_residual(G, a, omega, rng, d, Nf);
        }
        sd.symplectic_violation =
            check_symplectic(t3, rng, opt.symplectic_samples, 1e-9)
                .max_violation;
        sd.structure_defect = std::max(
            sd.structure_defect,
            norm0(sub(c.a2, const_fn(d, Nf, cd(R.m2 - 1.0, 0.0)))));
        R.steps.push_back(sd);
        R.stages.push_back(c);
    }

    /* ---- stage 4: phase-dependent translation averaging a1 in x ----
     * m1 = total average of a1,  beta = i (omega.d_phi)^{-1}(m1 - avg_x a1). */
    {
        const Coefficients& c3 = stage(3);
        R.m1 = coeff00(c3.a1);
        double pre = std::abs(R.m1.real()) + real_defect(c3.a1);
        TorusFunction V = sub(const_fn(d, Nf, R.m1), average_x(c3.a1));
        pre += strip_mean(V);
        TorusFunction beta = omega_dphi_inverse(V, omega, opt.divisor_floor);
        beta *= cd(0.0, 1.0);
        pre += imag_defect(beta);
        force_real(beta);
        R.beta_shift = beta;
        Transformation t4 = make_space_transform(beta, true);
        push_stage("space translation", t4, pre);
        diag(4).structure_defect =
            std::max(diag(4).structure_defect,
                     norm0(sub(average_x(stage(4).a1), const_fn(d, Nf, R.m1))));

        const cd e = forcing_average(nl, d);
        R.m1_floor = 0.5 * eps * std::abs(e);
        R.m1_nondegenerate = std::abs(R.m1) >= R.m1_floor;
    }

    /* ---- stage 5: unit-modulus rescaling making a1 constant ----
     * s = -(1/(2 m2)) dx^{-1}(a1 - m1), purely imaginary, T5 = diag(e^s, e^{-s}). */
    {
        const Coefficients& c4 = stage(4);
        TorusFunction ax = average_x(c4.a1);
        double pre = norm0(sub(ax, const_fn(d, Nf, R.m1)));
        TorusFunction s = dx_inverse(sub(c4.a1, ax));
        s *= cd(-1.0 / (2.0 * R.m2), 0.0);
        pre += real_defect(s);
        force_imag(s);
        R.s_rescale = s;
        double tail = 0.0;
        TorusFunction es = grid_map(
            {&s}, Nf, [](const std::vector<cd>& v) { return std::exp(v[0]); },
            &tail);
        Transformation t5 = make_matrix_transform(
            es, TorusFunction::zero(d, Nf, 1, Reality::complex_valued),
            opt.min_det);
        push_stage("first-order rescaling", t5, pre);
        diag(5).tail += tail + t5.inverse_tail;
        diag(5).structure_defect =
            std::max({diag(5).structure_defect,
                      norm0(sub(stage(5).a1, const_fn(d, Nf, R.m1))),
                      imag_defect(stage(5).a0)});
    }

    /* from here on the conjugated operator is no longer a pure differential
     * operator: stages 6 and 7 are also tracked in the Toplitz section
     * algebra, where the smoothing remainder is materialized */
    BlockOperator l5_asm(d, J, L), l6_op(d, J, L), l7_op(d, J, L);

    /* ---- stage 6: smoothing exponential removing the x-dependence of the
     * diagonal zero-order coefficient to leading order ----
     * w = (i/(2 m2)) dx^{-1}(a0 - avg_x a0), generator
     * B = (1/2)(M_w Y + Y M_w) on both diagonal channels, Y = dx (1 - dxx)^{-1}. */
    {
        const Coefficients& c5 = stage(5);
        TorusFunction ahat = average_x(c5.a0);
        TorusFunction w = dx_inverse(sub(c5.a0, ahat));
        w *= cd(0.0, 1.0 / (2.0 * R.m2));
        double pre = imag_defect(c5.a0) + real_defect(w);
        force_imag(w);
        R.w_gen = w;

        double tail = 0.0;
        BlockOperator W(d, J, L);
        tail += add_mult(W, 0, 0, w, cd(1.0, 0.0));
        tail += add_mult(W, 1, 1, w, cd(1.0, 0.0));
        BlockOperator U(d, J, 0);
        auto upsilon = [](int j) {
            return cd(double(j) / (1.0 + double(j) * j), 0.0);
        };
        add_symbol(U, 0, upsilon);
        add_symbol(U, 1, upsilon);
        BlockOperator B = compose(W, U, L);
        add_scaled(B, compose(U, W, L), cd(1.0, 0.0));
        B *= cd(0.5, 0.0);

        Transformation t6 = make_exp_transform(B);
        T.push_back(t6);
        G = wrap(G, t6);

        l5_asm = assemble_differential(m, c5, J, L, &tail);
        l6_op = exp_conjugate(l5_asm, B, omega, 1.0);

        StepDiagnostics sd;
        sd.name = "smoothing exponential";
        sd.structure_defect = pre;
        sd.tail = tail;
        if (opt.residual_checks)
            sd.conjugation_residual =
                conjugation_residual(G, l6_op, omega, rng, d, Nf);
        sd.symplectic_violation =
            check_symplectic(t6, rng, opt.symplectic_samples, 1e-9)
                .max_violation;
        R.steps.push_back(sd);
        R.stages.push_back(extract_coefficients(G, m, d, Nf));
    }

    /* ---- stage 7: multiplier diag(e^Gamma, e^{-Gamma}) averaging the
     * diagonal zero-order coefficient over phase ----
     * m0 = m + avg_phi a0hat,  Gamma = -i (omega.d_phi)^{-1}(a0hat + m - m0). */
    {
        TorusFunction ahat = average_x(stage(5).a0);
        R.m0 = m + coeff00(ahat).real();
        double pre = std::abs(coeff00(ahat).imag());
        TorusFunction garg = sub(ahat, const_fn(d, Nf, cd(R.m0 - m, 0.0)));
        pre += strip_mean(garg);
        TorusFunction gamma =
            omega_dphi_inverse(garg, omega, opt.divisor_floor);
        gamma *= cd(0.0, -1.0);
        pre += real_defect(gamma);
        force_imag(gamma);
        R.gamma_phase = gamma;

        double tail = 0.0;
        TorusFunction eg = grid_map(
            {&gamma}, Nf,
            [](const std::vector<cd>& v) { return std::exp(v[0]); }, &tail);
        TorusFunction egi = grid_map(
            {&gamma}, Nf,
            [](const std::vector<cd>& v) { return std::exp(-v[0]); }, &tail);
        Transformation t7 = make_matrix_transform(
            eg, TorusFunction::zero(d, Nf, 1, Reality::complex_valued),
            opt.min_det);
        T.push_back(t7);
        G = wrap(G, t7);

        /* q0 = e^{-2 Gamma} b0 (the off-diagonal zero-order coefficient is
         * conjugated, not removed) */
        const TorusFunction& b06 = stage(5).b0;
        R.q0 = grid_map(
            {&gamma, &b06}, Nf,
            [](const std::vector<cd>& v) { return std::exp(-2.0 * v[0]) * v[1]; },
            &tail);

        /* Toplitz conjugation by the multiplier, with the drift correction
         * diag(omega.d_phi Gamma, conj): T7^{-1}(om.dphi)(T7 h) =
         * om.dphi h + (om.dphi Gamma) h on the first channel. */
        BlockOperator Mf(d, J, L), Mi(d, J, L);
        tail += add_mult(Mf, 0, 0, eg, cd(1.0, 0.0));
        tail += add_mult(Mf, 1, 1, conj_function(eg), cd(1.0, 0.0));
        tail += add_mult(Mi, 0, 0, egi, cd(1.0, 0.0));
        tail += add_mult(Mi, 1, 1, conj_function(egi), cd(1.0, 0.0));
        l7_op = compose(Mi, compose(l6_op, Mf, L), L);
        TorusFunction dg = derivative(gamma, Deriv::omega_dphi, omega);
        tail += add_mult(l7_op, 0, 0, dg, cd(1.0, 0.0));
        tail += add_mult(l7_op, 1, 1, conj_function(dg), cd(1.0, 0.0));

        StepDiagnostics sd;
        sd.name = "zero-order averaging";
        sd.structure_defect = pre;
        sd.tail = tail + t7.inverse_tail;
        if (opt.residual_checks)
            sd.conjugation_residual =
                conjugation_residual(G, l7_op, omega, rng, d, Nf);
        sd.symplectic_violation =
            check_symplectic(t7, rng, opt.symplectic_samples, 1e-9)
                .max_violation;
        R.steps.push_back(sd);
        R.stages.push_back(extract_coefficients(G, m, d, Nf));
    }

    /* ---- final assembly: normal form and remainder ---- */
    R.L7 = l7_op;
    {
        Coefficients cn;
        const TorusFunction zero =
            TorusFunction::zero(d, Nf, 1, Reality::complex_valued);
        cn.a2 = const_fn(d, Nf, cd(R.m2 - 1.0, 0.0));
        cn.b2 = zero;
        cn.a1 = const_fn(d, Nf, R.m1);
        cn.b1 = zero;
        cn.a0 = const_fn(d, Nf, cd(R.m0 - m, 0.0));
        cn.b0 = R.q0;
        BlockOperator D = assemble_differential(m, cn, J, L);
        R.remainder = R.L7;
        R.remainder -= D;
    }
    R.final_hamiltonian_defect = hamiltonian_defect(R.L7);
    R.final_realness_defect = realness_defect(R.L7);

    /* chains: V1 carries the scalar factor after step 3, V2 does not */
    R.V2.steps = T;
    R.V1.steps.clear();
    for (std::size_t i = 0; i < T.size(); ++i) {
        R.V1.steps.push_back(T[i]);
        if (i == 2) R.V1.steps.push_back(make_scalar_transform(R.rho));
    }

    /* master identity on a random state: L0 (V2 h) = V1 (drift + L7) h */
    if (opt.residual_checks) {
        TorusFunction h =
            make_conjugate_pair(embed(random_function(rng, d, 3, 1.5), Nf));
        TorusFunction lhs = apply(lin, forward(R.V2, h));
        TorusFunction inner = derivative(h, Deriv::omega_dphi, omega);
        inner += apply(R.L7, h);
        TorusFunction rhs = forward(R.V1, inner);
        R.identity_residual = norm0(sub(lhs, rhs)) / (1.0 + norm0(lhs));
    }
    return R;
}

} // namespace qpnls
