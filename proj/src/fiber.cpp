#include "ffoptics/fiber.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "ffoptics/cache.hpp"
#include "ffoptics/common.hpp"
#include "ffoptics/rng.hpp"

namespace ffo {

namespace {

using Cplx = std::complex<double>;
// mode-major layout: row = mode, contiguous samples/time slices per row


constexpr double kC0 = 299792458.0;

// grid half-width beyond the classical turning radius of the highest retained
// group, in units of the mode scale; wide enough that even the fundamental's
// tail passes the norm gate, tight enough to spend the grid on the beam
constexpr double kGridMargin = 1.0;

}  // namespace

double FiberGeometry::delta() const {
    return numerical_aperture * numerical_aperture / (2.0 * core_index * core_index);
}

double FiberGeometry::group_spacing() const {
    return std::sqrt(2.0 * delta()) / core_radius;
}

double FiberGeometry::mode_scale() const {
    double k0 = 2.0 * M_PI / wavelength;
    return std::sqrt(core_radius / (k0 * core_index * std::sqrt(2.0 * delta())));
}

double FiberGeometry::omega0() const {
    return 2.0 * M_PI * kC0 / wavelength;
}

ModeBasis build_mode_basis(const FiberGeometry& geom, int P, int N) {
    if (N < 32) throw GridTooCoarse("grid " + std::to_string(N) + " < 32");
    ModeBasis b;
    b.mode_count = P;
    b.grid_n = N;
    b.mode_scale = geom.mode_scale();
    // complete mode groups: group q holds q+1 modes
    int count = 0, qmax = -1;
    while (count < P) {
        ++qmax;
        count += qmax + 1;
    }
    if (count != P)
        throw ConfigError("mode count " + std::to_string(P) + " is not a sum of complete groups");
    b.nx.reserve(P);
    for (int q = 0; q <= qmax; ++q)
        for (int i = 0; i <= q; ++i) {
            b.nx.push_back(i);
            b.ny.push_back(q - i);
            b.group.push_back(q);
        }

    double w = b.mode_scale;
    double extent = w * (std::sqrt(2.0 * qmax + 1.0) + kGridMargin);
    b.pitch = 2.0 * extent / N;
    b.grid_x = Vec(N);
    for (int i = 0; i < N; ++i) b.grid_x[i] = -extent + (i + 0.5) * b.pitch;

    // 1D Hermite functions by recurrence, checked against the analytic norm
    b.h1d = Mat(qmax + 1, N);
    for (int i = 0; i < N; ++i) {
        double xi = b.grid_x[i] / w;
        double g = std::exp(-0.5 * xi * xi);
        b.h1d(0, i) = g;
        if (qmax >= 1) b.h1d(1, i) = 2.0 * xi * g;
        for (int n = 2; n <= qmax; ++n)
            b.h1d(n, i) = 2.0 * xi * b.h1d(n - 1, i) - 2.0 * (n - 1) * b.h1d(n - 2, i);
    }
    double log_fact = 0.0;
    for (int n = 0; n <= qmax; ++n) {
        if (n > 0) log_fact += std::log(double(n));
        double analytic = std::sqrt(std::sqrt(M_PI) * w) *
                          std::exp(0.5 * (n * std::log(2.0) + log_fact));
        double grid_norm = std::sqrt(b.h1d.row(n).squaredNorm() * b.pitch);
        if (std::abs(grid_norm / analytic - 1.0) > 1e-2)
            throw GridTooCoarse("mode order " + std::to_string(n) + " unresolved at N=" +
                                std::to_string(N));
        b.h1d.row(n) /= grid_norm;
    }

    double spacing = geom.group_spacing();
    b.dbeta0 = Vec(P);
    b.dbeta1 = Vec(P);
    b.beta2 = Vec::Constant(P, 19e-27);
    for (int p = 0; p < P; ++p) {
        b.dbeta0[p] = -b.group[p] * spacing;
        b.dbeta1[p] = b.group[p] * spacing / geom.omega0();
    }

    b.profiles = Mat(N * N, P);
    for (int p = 0; p < P; ++p)
        for (int iy = 0; iy < N; ++iy)
            for (int ix = 0; ix < N; ++ix)
                b.profiles(iy * N + ix, p) = b.h1d(b.nx[p], ix) * b.h1d(b.ny[p], iy);
    return b;
}

KerrTensor compute_kerr_tensor(const ModeBasis& basis, double prune_threshold) {
    const int P = basis.mode_count;
    const int K = int(basis.h1d.rows());
    const int N = basis.grid_n;
    // 1D quartic overlaps J[a,b,c,d] = sum_x h_a h_b h_c h_d * pitch
    std::vector<double> J(std::size_t(K) * K * K * K, 0.0);
    for (int a = 0; a < K; ++a)
        for (int b2 = a; b2 < K; ++b2)
            for (int c = b2; c < K; ++c)
                for (int d = c; d < K; ++d) {
                    double acc = 0.0;
                    for (int i = 0; i < N; ++i)
                        acc += basis.h1d(a, i) * basis.h1d(b2, i) * basis.h1d(c, i) *
                               basis.h1d(d, i);
                    acc *= basis.pitch;
                    // fill the entire permutation orbit
                    int perm[4] = {a, b2, c, d};
                    do {
                        J[((std::size_t(perm[0]) * K + perm[1]) * K + perm[2]) * K + perm[3]] = acc;
                    } while (std::next_permutation(perm, perm + 4));
                }
    auto eta = [&](int p, int l, int m, int n) {
        double jx = J[((std::size_t(basis.nx[p]) * K + basis.nx[l]) * K + basis.nx[m]) * K +
                      basis.nx[n]];
        double jy = J[((std::size_t(basis.ny[p]) * K + basis.ny[l]) * K + basis.ny[m]) * K +
                      basis.ny[n]];
        return jx * jy;
    };

    KerrTensor out;
    out.eta0000 = eta(0, 0, 0, 0);
    for (int p = 0; p < P; ++p)
        for (int l = 0; l < P; ++l)
            for (int m = l; m < P; ++m)
                for (int n = 0; n < P; ++n)
                    out.max_abs = std::max(out.max_abs, std::abs(eta(p, l, m, n)));
    double cut = prune_threshold * out.max_abs;
    for (int p = 0; p < P; ++p)
        for (int n = p; n < P; ++n)
            for (int l = 0; l < P; ++l)
                for (int m = l; m < P; ++m) {
                    double v = eta(p, l, m, n);
                    if (std::abs(v) < cut) continue;
                    out.entries.push_back({p, l, m, n, v * (l == m ? 1.0 : 2.0)});
                    out.kept_raw += std::size_t(l == m ? 1 : 2) * (p == n ? 1 : 2);
                }
    return out;
}

double KerrTensor::lookup(int p, int l, int m, int n) const {
    if (p > n) std::swap(p, n);
    if (l > m) std::swap(l, m);
    for (const auto& e : entries)
        if (e.p == p && e.l == l && e.m == m && e.n == n)
            return e.value / (l == m ? 1.0 : 2.0);
    return 0.0;
}

CMat build_coupling(int P, const std::vector<int>& group, double strength, std::uint64_t seed) {
    Rng rng(seed);
    CMat C = CMat::Zero(P, P);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (int i = 0; i < P; ++i)
        for (int j = i; j < P; ++j) {
            double decay = std::exp(-std::abs(group[i] - group[j]));
            if (i == j) {
                C(i, i) = strength * decay * rng.normal();
            } else {
                Cplx v(rng.normal() * inv_sqrt2, rng.normal() * inv_sqrt2);
                C(i, j) = strength * decay * v;
                C(j, i) = std::conj(C(i, j));
            }
        }
    return C;
}

double calibrated_gamma(double knob, double eta0000, double length) {
    return knob * M_PI / (eta0000 * length);
}

ModeState encode_and_project(const Vec& features, const ModeBasis& basis, const OpticsConfig& cfg) {
    if (features.size() != kCanvasSize)
        throw DimensionMismatch("feature length " + std::to_string(features.size()));
    const int N = basis.grid_n;
    const double w0 = cfg.beam_waist;
    double vmax = features.maxCoeff();
    double depth = vmax > 0.0 ? 2.0 * M_PI * (1.0 - 1e-3) / vmax : 0.0;
    Vec re(N * N), im(N * N);
    for (int iy = 0; iy < N; ++iy) {
        int sy = iy * kCanvasSide / N;
        double y = basis.grid_x[iy];
        for (int ix = 0; ix < N; ++ix) {
            int sx = ix * kCanvasSide / N;
            double x = basis.grid_x[ix];
            double env = std::exp(-(x * x + y * y) / (w0 * w0));
            double phase = depth * features[sy * kCanvasSide + sx];
            re[iy * N + ix] = env * std::cos(phase);
            im[iy * N + ix] = env * std::sin(phase);
        }
    }
    Vec ar = basis.profiles.transpose() * re * (basis.pitch * basis.pitch);
    Vec ai = basis.profiles.transpose() * im * (basis.pitch * basis.pitch);
    ModeState st;
    st.power_scale = cfg.power_scale;
    st.amplitudes = CVec(basis.mode_count);
    for (int p = 0; p < basis.mode_count; ++p) st.amplitudes[p] = Cplx(ar[p], ai[p]);
    double power = st.amplitudes.squaredNorm();
    if (power > 0.0) st.amplitudes *= std::sqrt(cfg.power_scale / power);
    return st;
}

Vec render_intensity(const ModeState& state, const ModeBasis& basis) {
    const int N = basis.grid_n;
    if (N % kCanvasSide != 0)
        throw DimensionMismatch("grid " + std::to_string(N) + " not a canvas multiple");
    const int k = N / kCanvasSide;
    Vec ar(basis.mode_count), ai(basis.mode_count);
    for (int p = 0; p < basis.mode_count; ++p) {
        ar[p] = state.amplitudes[p].real();
        ai[p] = state.amplitudes[p].imag();
    }
    Vec er = basis.profiles * ar;
    Vec ei = basis.profiles * ai;
    Vec out = Vec::Zero(kCanvasSize);
    // mean over each k x k block times pitch^2 k^2 = plain quadrature sum
    double cell = basis.pitch * basis.pitch;
    for (int iy = 0; iy < N; ++iy)
        for (int ix = 0; ix < N; ++ix) {
            int r = iy * N + ix;
            out[(iy / k) * kCanvasSide + (ix / k)] += (er[r] * er[r] + ei[r] * ei[r]) * cell;
        }
    return out;
}

CwPropagator::CwPropagator(const ModeBasis& basis, const CMat& coupling, const KerrTensor& kerr,
                           const FiberGeometry& geom, const OpticsConfig& cfg)
    : coupling_(coupling),
      gamma_(cfg.gamma_tilde),
      dz_(cfg.dz),
      P_(basis.mode_count) {
    for (const auto& e : kerr.entries) {
        if (e.p == e.n) {
            ed_l_.push_back(e.l);
            ed_m_.push_back(e.m);
            ed_p_.push_back(e.p);
            ed_v_.push_back(e.value);
        } else {
            eo_l_.push_back(e.l);
            eo_m_.push_back(e.m);
            eo_n_.push_back(e.n);
            eo_p_.push_back(e.p);
            eo_v_.push_back(e.value);
        }
    }
    if (cfg.dz > geom.length) throw StepTooLarge("dz exceeds fiber length");
    CMat H = coupling;
    for (int p = 0; p < P_; ++p) H(p, p) += basis.dbeta0[p];
    Eigen::SelfAdjointEigenSolver<CMat> eig(H);
    const CMat& V = eig.eigenvectors();
    CVec ph(P_);
    for (int p = 0; p < P_; ++p)
        ph[p] = std::exp(Cplx(0.0, eig.eigenvalues()[p] * dz_ * 0.5));
    half_ = V * ph.asDiagonal() * V.adjoint();
    full_ = half_ * half_;
    steps_ = std::max(1, int(std::lround(geom.length / dz_)));
}

void CwPropagator::kerr_accum(const Mat& ar, const Mat& ai, Mat& outr, Mat& outi) const {
    // all matrices are mode-major (rows = modes, samples contiguous per row)
    const int S = int(ar.cols());
    outr.setZero();
    outi.setZero();
    const double* Ar = ar.data();
    const double* Ai = ai.data();
    double* Or = outr.data();
    double* Oi = outi.data();
    auto row = [S](const double* base, std::int32_t r) { return base + std::size_t(r) * S; };
    auto wrow = [S](double* base, std::int32_t r) { return base + std::size_t(r) * S; };
    const std::size_t nd = ed_v_.size();
    for (std::size_t e = 0; e < nd; ++e) {
        const double v = ed_v_[e];
        const double* lr = row(Ar, ed_l_[e]);
        const double* li = row(Ai, ed_l_[e]);
        const double* mr = row(Ar, ed_m_[e]);
        const double* mi = row(Ai, ed_m_[e]);
        const double* nr = row(Ar, ed_p_[e]);  // p == n for this block
        const double* ni = row(Ai, ed_p_[e]);
        double* pr = wrow(Or, ed_p_[e]);
        double* pi = wrow(Oi, ed_p_[e]);
        for (int s = 0; s < S; ++s) {
            double tr = v * (lr[s] * mr[s] - li[s] * mi[s]);
            double ti = v * (lr[s] * mi[s] + li[s] * mr[s]);
            pr[s] += tr * nr[s] + ti * ni[s];
            pi[s] += ti * nr[s] - tr * ni[s];
        }
    }
    const std::size_t no = eo_v_.size();
    for (std::size_t e = 0; e < no; ++e) {
        const double v = eo_v_[e];
        const double* lr = row(Ar, eo_l_[e]);
        const double* li = row(Ai, eo_l_[e]);
        const double* mr = row(Ar, eo_m_[e]);
        const double* mi = row(Ai, eo_m_[e]);
        const double* nr = row(Ar, eo_n_[e]);
        const double* ni = row(Ai, eo_n_[e]);
        const double* qr = row(Ar, eo_p_[e]);
        const double* qi = row(Ai, eo_p_[e]);
        double* pr = wrow(Or, eo_p_[e]);
        double* pi = wrow(Oi, eo_p_[e]);
        double* ur = wrow(Or, eo_n_[e]);
        double* ui = wrow(Oi, eo_n_[e]);
        for (int s = 0; s < S; ++s) {
            double tr = v * (lr[s] * mr[s] - li[s] * mi[s]);
            double ti = v * (lr[s] * mi[s] + li[s] * mr[s]);
            pr[s] += tr * nr[s] + ti * ni[s];
            pi[s] += ti * nr[s] - tr * ni[s];
            ur[s] += tr * qr[s] + ti * qi[s];
            ui[s] += ti * qr[s] - tr * qi[s];
        }
    }
}

CVec CwPropagator::propagate(const CVec& a0) const {
    return propagate_batch(a0).col(0);
}

CMat CwPropagator::propagate_batch(const CMat& a0) const {
    if (a0.rows() != P_) throw DimensionMismatch("state rows != mode count");
    const int S = int(a0.cols());
    CRMat a = half_ * a0;
    Vec p_before(S);
    Mat ar(P_, S), ai(P_, S), tr(P_, S), ti(P_, S);
    Mat k1r(P_, S), k1i(P_, S), k2r(P_, S), k2i(P_, S);
    Mat k3r(P_, S), k3i(P_, S), k4r(P_, S), k4i(P_, S);
    for (int step = 0; step < steps_; ++step) {
        for (int s = 0; s < S; ++s) p_before[s] = a.col(s).squaredNorm();
        if (gamma_ != 0.0) {
            for (int p = 0; p < P_; ++p)
                for (int s = 0; s < S; ++s) {
                    ar(p, s) = a(p, s).real();
                    ai(p, s) = a(p, s).imag();
                }
            // k = i*gamma*accum, folded into each update: re -= g*acc_i, im += g*acc_r
            const double g = gamma_;
            kerr_accum(ar, ai, k1r, k1i);
            tr = ar - (0.5 * dz_ * g) * k1i;
            ti = ai + (0.5 * dz_ * g) * k1r;
            kerr_accum(tr, ti, k2r, k2i);
            tr = ar - (0.5 * dz_ * g) * k2i;
            ti = ai + (0.5 * dz_ * g) * k2r;
            kerr_accum(tr, ti, k3r, k3i);
            tr = ar - (dz_ * g) * k3i;
            ti = ai + (dz_ * g) * k3r;
            kerr_accum(tr, ti, k4r, k4i);
            ar -= (dz_ * g / 6.0) * (k1i + 2.0 * k2i + 2.0 * k3i + k4i);
            ai += (dz_ * g / 6.0) * (k1r + 2.0 * k2r + 2.0 * k3r + k4r);
            for (int p = 0; p < P_; ++p)
                for (int s = 0; s < S; ++s) a(p, s) = Cplx(ar(p, s), ai(p, s));
        }
        a = (step + 1 < steps_) ? CRMat(full_ * a) : CRMat(half_ * a);
        for (int s = 0; s < S; ++s) {
            double after = a.col(s).squaredNorm();
            double ref = std::max(p_before[s], 1e-300);
            if (std::abs(after - p_before[s]) / ref > 1e-8)
                throw StepTooLarge("power drift at step " + std::to_string(step));
        }
    }
    return a;
}

CMat propagate_time(const CMat& a0, const ModeBasis& basis, const CMat& coupling,
                    const KerrTensor& kerr, const FiberGeometry& geom, const OpticsConfig& cfg,
                    double time_window) {
    const int P = basis.mode_count;
    const int T = int(a0.cols());
    if (a0.rows() != P) throw DimensionMismatch("state rows != mode count");
    if (T < 2 || (T & (T - 1)) != 0) throw DimensionMismatch("time samples must be a power of two");
    const double dz = cfg.dz;
    if (dz > geom.length) throw StepTooLarge("dz exceeds fiber length");
    const int steps = std::max(1, int(std::lround(geom.length / dz)));

    // exact half-step propagator per frequency bin: exp(i(diag(phase(w)) + C) dz/2)
    std::vector<CMat> half(T);
    for (int k = 0; k < T; ++k) {
        double w = 2.0 * M_PI * ((k < T / 2) ? k : k - T) / time_window;
        CMat H = coupling;
        for (int p = 0; p < P; ++p)
            H(p, p) += basis.dbeta0[p] - basis.dbeta1[p] * w + 0.5 * basis.beta2[p] * w * w;
        Eigen::SelfAdjointEigenSolver<CMat> eig(H);
        CVec ph(P);
        for (int p = 0; p < P; ++p)
            ph[p] = std::exp(Cplx(0.0, eig.eigenvalues()[p] * dz * 0.5));
        half[k] = eig.eigenvectors() * ph.asDiagonal() * eig.eigenvectors().adjoint();
    }

    CRMat a = a0;
    CRMat spec(P, T);
    int Tn = T;
    fftw_plan fwd = fftw_plan_many_dft(
        1, &Tn, P, reinterpret_cast<fftw_complex*>(a.data()), nullptr, 1, T,
        reinterpret_cast<fftw_complex*>(spec.data()), nullptr, 1, T, FFTW_FORWARD, FFTW_ESTIMATE);
    fftw_plan bwd = fftw_plan_many_dft(
        1, &Tn, P, reinterpret_cast<fftw_complex*>(spec.data()), nullptr, 1, T,
        reinterpret_cast<fftw_complex*>(a.data()), nullptr, 1, T, FFTW_BACKWARD, FFTW_ESTIMATE);

    CRMat k1(P, T), k2(P, T), k3(P, T), k4(P, T), tmp(P, T);
    auto kerr_rk4 = [&](CRMat& cur) {
        if (cfg.gamma_tilde == 0.0) return;
        auto f = [&](const CRMat& x, CRMat& out) {
            out.setZero();
            const Cplx* xd = x.data();
            Cplx* od = out.data();
            for (const auto& e : kerr.entries) {
                const Cplx* al = xd + std::size_t(e.l) * T;
                const Cplx* am = xd + std::size_t(e.m) * T;
                const Cplx* an = xd + std::size_t(e.n) * T;
                const Cplx* ap = xd + std::size_t(e.p) * T;
                Cplx* op = od + std::size_t(e.p) * T;
                if (e.p == e.n) {
                    for (int s = 0; s < T; ++s) op[s] += e.value * al[s] * am[s] * std::conj(an[s]);
                } else {
                    Cplx* on = od + std::size_t(e.n) * T;
                    for (int s = 0; s < T; ++s) {
                        Cplx t = e.value * al[s] * am[s];
                        op[s] += t * std::conj(an[s]);
                        on[s] += t * std::conj(ap[s]);
                    }
                }
            }
            out *= Cplx(0.0, cfg.gamma_tilde);
        };
        f(cur, k1);
        tmp = cur + (0.5 * dz) * k1;
        f(tmp, k2);
        tmp = cur + (0.5 * dz) * k2;
        f(tmp, k3);
        tmp = cur + dz * k3;
        f(tmp, k4);
        cur += (dz / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    };

    CVec col(P);
    auto apply_half = [&] {
        fftw_execute(fwd);
        for (int k = 0; k < T; ++k) {
            for (int p = 0; p < P; ++p) col[p] = spec(p, k);
            col = half[k] * col;
            for (int p = 0; p < P; ++p) spec(p, k) = col[p];
        }
        fftw_execute(bwd);
        a /= double(T);
    };

    double e0 = a.squaredNorm();
    for (int step = 0; step < steps; ++step) {
        double before = a.squaredNorm();
        apply_half();
        kerr_rk4(a);
        apply_half();
        double after = a.squaredNorm();
        if (std::abs(after - before) / std::max(e0, 1e-300) > 1e-8)
            throw StepTooLarge("energy drift at step " + std::to_string(step));
    }
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
    return a;
}

namespace {

std::string medium_cache_path(const FiberGeometry& g, const OpticsConfig& c, double strength,
                              double prune, bool with_kerr) {
    const double scalars[] = {g.core_radius, g.numerical_aperture, g.core_index,
                              g.wavelength,  g.length,             strength,
                              prune,         kGridMargin,          with_kerr ? 1.0 : 0.0};
    std::uint64_t h = fnv1a(scalars, sizeof(scalars));
    h = fnv1a(&c.mode_count, sizeof(c.mode_count), h);
    h = fnv1a(&c.grid_n, sizeof(c.grid_n), h);
    h = fnv1a(&c.seed, sizeof(c.seed), h);
    char name[40];
    std::snprintf(name, sizeof(name), "fiber_%016llx.ffon", static_cast<unsigned long long>(h));
    return cache_dir() + "/" + name;
}

void save_medium(const std::string& path, const ModeBasis& b, const KerrTensor& k, const CMat& C) {
    ArrayStore st;
    st.real["grid_x"] = b.grid_x;
    st.real["h1d"] = b.h1d;
    st.real["profiles"] = b.profiles;
    Mat modes(b.mode_count, 6);
    for (int p = 0; p < b.mode_count; ++p) {
        modes(p, 0) = b.nx[std::size_t(p)];
        modes(p, 1) = b.ny[std::size_t(p)];
        modes(p, 2) = b.group[std::size_t(p)];
        modes(p, 3) = b.dbeta0[p];
        modes(p, 4) = b.dbeta1[p];
        modes(p, 5) = b.beta2[p];
    }
    st.real["modes"] = modes;
    Mat scalars(1, 2);
    scalars << b.pitch, b.mode_scale;
    st.real["scalars"] = scalars;
    Mat entries(long(k.entries.size()), 5);
    for (long i = 0; i < entries.rows(); ++i) {
        const auto& e = k.entries[std::size_t(i)];
        entries.row(i) << e.p, e.l, e.m, e.n, e.value;
    }
    st.real["kerr"] = entries;
    st.cplx["coupling"] = C;
    st.meta["kept_raw"] = k.kept_raw;
    st.meta["max_abs"] = std::bit_cast<std::uint64_t>(k.max_abs);
    st.meta["eta0000"] = std::bit_cast<std::uint64_t>(k.eta0000);
    std::filesystem::create_directories(cache_dir());
    st.save(path);
}

bool load_medium(const std::string& path, int P, int N, ModeBasis& b, KerrTensor& k, CMat& C) {
    if (!std::filesystem::exists(path)) return false;
    ArrayStore st = ArrayStore::load(path);
    const Mat& modes = st.real.at("modes");
    const Mat& scalars = st.real.at("scalars");
    if (modes.rows() != P || st.real.at("profiles").cols() != P) return false;
    b.mode_count = P;
    b.grid_n = N;
    b.pitch = scalars(0, 0);
    b.mode_scale = scalars(0, 1);
    b.grid_x = st.real.at("grid_x");
    b.h1d = st.real.at("h1d");
    b.profiles = st.real.at("profiles");
    b.nx.resize(std::size_t(P));
    b.ny.resize(std::size_t(P));
    b.group.resize(std::size_t(P));
    b.dbeta0.resize(P);
    b.dbeta1.resize(P);
    b.beta2.resize(P);
    for (int p = 0; p < P; ++p) {
        b.nx[std::size_t(p)] = int(modes(p, 0));
        b.ny[std::size_t(p)] = int(modes(p, 1));
        b.group[std::size_t(p)] = int(modes(p, 2));
        b.dbeta0[p] = modes(p, 3);
        b.dbeta1[p] = modes(p, 4);
        b.beta2[p] = modes(p, 5);
    }
    const Mat& entries = st.real.at("kerr");
    k.entries.resize(std::size_t(entries.rows()));
    for (long i = 0; i < entries.rows(); ++i) {
        auto& e = k.entries[std::size_t(i)];
        e.p = std::int32_t(entries(i, 0));
        e.l = std::int32_t(entries(i, 1));
        e.m = std::int32_t(entries(i, 2));
        e.n = std::int32_t(entries(i, 3));
        e.value = entries(i, 4);
    }
    k.kept_raw = st.meta.at("kept_raw");
    k.max_abs = std::bit_cast<double>(st.meta.at("max_abs"));
    k.eta0000 = std::bit_cast<double>(st.meta.at("eta0000"));
    C = st.cplx.at("coupling");
    return C.rows() == P && C.cols() == P;
}

}  // namespace

OpticalTransform::OpticalTransform(const FiberGeometry& geom, const OpticsConfig& cfg,
                                   double coupling_strength, double prune_threshold,
                                   double gamma_knob)
    : geom_(geom), cfg_(cfg) {
    const bool with_kerr = gamma_knob != 0.0;
    const std::string path =
        medium_cache_path(geom, cfg, coupling_strength, prune_threshold, with_kerr);
    CMat C;
    bool loaded = false;
    try {
        loaded = load_medium(path, cfg.mode_count, cfg.grid_n, basis_, kerr_, C);
    } catch (...) {
        loaded = false;  // unreadable cache entries are rebuilt, not fatal
    }
    if (!loaded) {
        basis_ = build_mode_basis(geom, cfg.mode_count, cfg.grid_n);
        if (with_kerr) kerr_ = compute_kerr_tensor(basis_, prune_threshold);
        C = build_coupling(cfg.mode_count, basis_.group, coupling_strength, cfg.seed);
        try {
            save_medium(path, basis_, kerr_, C);
        } catch (...) {
            // cache write failure must not break the run
        }
    }
    cfg_.gamma_tilde = with_kerr ? calibrated_gamma(gamma_knob, kerr_.eta0000, geom.length) : 0.0;
    if (cfg_.beam_waist <= 0.0) {
        int qmax = basis_.group.back();
        cfg_.beam_waist = 0.8 * basis_.mode_scale * std::sqrt(2.0 * qmax + 1.0);
    }
    prop_ = std::make_unique<CwPropagator>(basis_, C, kerr_, geom_, cfg_);
}

Vec OpticalTransform::operator()(const Vec& features) const {
    ModeState st = encode_and_project(features, basis_, cfg_);
    st.amplitudes = prop_->propagate(st.amplitudes);
    ++calls_;
    return render_intensity(st, basis_);
}

Mat OpticalTransform::apply_batch(const Mat& features) const {
    const int S = int(features.rows());
    Mat out(S, kCanvasSize);
    const int chunk = 256;
    for (int s0 = 0; s0 < S; s0 += chunk) {
        int s1 = std::min(S, s0 + chunk);
        CMat block(basis_.mode_count, s1 - s0);
        for (int s = s0; s < s1; ++s)
            block.col(s - s0) = encode_and_project(features.row(s).transpose(), basis_, cfg_).amplitudes;
        CMat prop = prop_->propagate_batch(block);
        for (int s = s0; s < s1; ++s) {
            ModeState st{prop.col(s - s0), cfg_.power_scale};
            out.row(s) = render_intensity(st, basis_).transpose();
        }
    }
    calls_ += S;
    return out;
}

}  // namespace ffo
