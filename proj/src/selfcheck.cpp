#include "ffoptics/selfcheck.hpp"

#include <complex>

#include <unsupported/Eigen/MatrixFunctions>

#include "ffoptics/fiber.hpp"
#include "ffoptics/rng.hpp"

namespace ffo {

namespace {

CVec seeded_state(int P, std::uint64_t seed) {
    Rng rng(seed);
    CVec a(P);
    for (int p = 0; p < P; ++p) a[p] = std::complex<double>(rng.normal(), rng.normal());
    a /= std::sqrt(a.squaredNorm());
    return a;
}

}  // namespace

int fiber_selfcheck(const SelfcheckOptions& opt, std::ostream& out) {
    FiberGeometry geom;
    OpticsConfig cfg;
    cfg.mode_count = opt.modes;
    cfg.grid_n = opt.grid;
    cfg.dz = opt.dz;
    OpticalTransform medium(geom, cfg, 0.5 * geom.group_spacing(), 1e-3, 1.0);
    const CVec a0 = seeded_state(opt.modes, 1);
    int failures = 0;
    auto line = [&](const char* name, double value, double limit) {
        bool ok = value < limit;
        out << name << ": value=" << value << " limit=" << limit << (ok ? " PASS" : " FAIL")
            << "\n";
        if (!ok) ++failures;
    };

    CVec aL = medium.propagator().propagate(a0);
    line("conservation", std::abs(aL.squaredNorm() / a0.squaredNorm() - 1.0), 1e-6);

    OpticsConfig lin_cfg = medium.config();
    lin_cfg.gamma_tilde = 0.0;
    CwPropagator lin(medium.basis(), medium.propagator().coupling(), medium.kerr(), geom, lin_cfg);
    CMat h = medium.propagator().coupling();
    for (int p = 0; p < opt.modes; ++p) h(p, p) += medium.basis().dbeta0[p];
    CMat u = (std::complex<double>(0.0, geom.length) * h).exp();
    line("linear-limit", (lin.propagate(a0) - u * a0).cwiseAbs().maxCoeff(), 1e-8);

    ModeBasis coarse = build_mode_basis(geom, 15, opt.grid);
    ModeBasis fine = build_mode_basis(geom, 15, 2 * opt.grid);
    KerrTensor kc = compute_kerr_tensor(coarse, 1e-3);
    KerrTensor kf = compute_kerr_tensor(fine, 1e-3);
    double worst = 0.0;
    for (const auto& e : kc.entries) {
        double a = kc.lookup(e.p, e.l, e.m, e.n);
        double b = kf.lookup(e.p, e.l, e.m, e.n);
        worst = std::max(worst, std::abs(a - b) / std::max(std::abs(b), 1e-300));
    }
    line("grid-convergence", worst, 1e-3);

    return failures == 0 ? 0 : 1;
}

}  // namespace ffo
