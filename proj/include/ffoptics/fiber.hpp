#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <vector>

#include "ffoptics/linalg.hpp"

namespace ffo {

struct FiberGeometry {
    double core_radius = 25e-6;
    double numerical_aperture = 0.20;
    double core_index = 1.47;
    double wavelength = 1030e-9;
    double length = 5.0;

    double delta() const;          // index contrast NA^2 / (2 n^2)
    double group_spacing() const;  // propagation-constant spacing between mode groups, rad/m
    double mode_scale() const;     // 1/e field radius of the fundamental mode
    double omega0() const;         // center angular frequency
};

// Hermite-Gaussian modes of the equivalent parabolic profile, sampled on an
// N x N grid that spans the highest retained mode group with margin.
struct ModeBasis {
    int mode_count = 0;
    int grid_n = 0;
    double pitch = 0.0;
    double mode_scale = 0.0;
    Vec grid_x;                    // cell-center coordinates, one axis
    std::vector<int> nx, ny, group;
    Vec dbeta0;                    // rad/m
    Vec dbeta1;                    // s/m, used only in time-resolved runs
    Vec beta2;                     // s^2/m, same
    Mat h1d;                       // (qmax+1) x N, grid-normalized 1D profiles
    Mat profiles;                  // N^2 x P, row = grid cell (y-major)
};

ModeBasis build_mode_basis(const FiberGeometry& geom, int P, int N);

struct KerrTensor {
    // canonical entries: l <= m and p <= n; each stands for the full
    // symmetry orbit of the stored (p,l,m,n)
    struct Entry {
        std::int32_t p, l, m, n;
        double value;   // eta * (l==m ? 1 : 2)
    };
    std::vector<Entry> entries;
    double max_abs = 0.0;
    double eta0000 = 0.0;
    std::size_t kept_raw = 0;  // raw tensor entries the canonical list represents

    // eta_{p,l,m,n} reconstructed from the canonical list (test support)
    double lookup(int p, int l, int m, int n) const;
};

KerrTensor compute_kerr_tensor(const ModeBasis& basis, double prune_threshold);

// random Hermitian disorder with group-distance decay, deterministic per seed
CMat build_coupling(int P, const std::vector<int>& group, double strength, std::uint64_t seed);

struct OpticsConfig {
    int grid_n = 64;
    double dz = 1e-3;
    double gamma_tilde = 0.0;  // effective Kerr coefficient as used in the mode ODE
    double beam_waist = 0.0;
    int mode_count = 45;
    std::uint64_t seed = 2025;
    double power_scale = 1.0;
};

// gamma_tilde such that the fundamental mode accrues knob*pi of self-phase
// rotation over length L at unit power
double calibrated_gamma(double knob, double eta0000, double length);

struct ModeState {
    CVec amplitudes;
    double power_scale = 1.0;
};

ModeState encode_and_project(const Vec& features, const ModeBasis& basis, const OpticsConfig& cfg);

Vec render_intensity(const ModeState& state, const ModeBasis& basis);

// Propagates mode amplitudes over the fiber length. Each step applies the
// exact unitary of the linear operator diag(dbeta0) + C for half a step,
// classical RK4 on the Kerr term for a full step, then the second linear
// half step. Throws StepTooLarge if any step drifts total power by more
// than 1e-8 relative.
class CwPropagator {
public:
    CwPropagator(const ModeBasis& basis, const CMat& coupling, const KerrTensor& kerr,
                 const FiberGeometry& geom, const OpticsConfig& cfg);

    CVec propagate(const CVec& a0) const;
    // columns are independent samples
    CMat propagate_batch(const CMat& a0) const;

    const CMat& coupling() const { return coupling_; }

private:
    // Accumulates sum_{l,m,n} eta_{p,l,m,n} A_l A_m conj(A_n) into (outr, outi)
    // without the i*gamma factor; callers fold that into their update.
    void kerr_accum(const Mat& ar, const Mat& ai, Mat& outr, Mat& outi) const;
    CMat half_, full_;
    CMat coupling_;
    // tensor entries split by p==n (diagonal writes one output row, off-diagonal two),
    // stored as parallel arrays so the sample loop vectorizes
    std::vector<std::int32_t> ed_l_, ed_m_, ed_p_;
    std::vector<double> ed_v_;
    std::vector<std::int32_t> eo_l_, eo_m_, eo_n_, eo_p_;
    std::vector<double> eo_v_;
    double gamma_;
    double dz_;
    int steps_;
    int P_;
};

// Time-resolved state: rows = modes, columns = T time samples across window.
// Linear terms (dbeta0, dbeta1, beta2 phases and the coupling matrix) are
// applied exactly per frequency bin; RK4 integrates the instantaneous Kerr
// term per time slice.
CMat propagate_time(const CMat& a0, const ModeBasis& basis, const CMat& coupling,
                    const KerrTensor& kerr, const FiberGeometry& geom, const OpticsConfig& cfg,
                    double time_window);

// encode -> propagate -> render with a fixed seeded medium; counts calls.
// gamma_knob rescales the pi-phase calibration (cfg.gamma_tilde is derived
// from it once the Kerr tensor is known); beam_waist <= 0 selects a default
// sized to the retained mode groups.
class OpticalTransform {
public:
    OpticalTransform(const FiberGeometry& geom, const OpticsConfig& cfg,
                     double coupling_strength, double prune_threshold, double gamma_knob);

    Vec operator()(const Vec& features) const;
    Mat apply_batch(const Mat& features) const;  // rows = samples

    long calls() const { return calls_; }
    void reset_calls() { calls_ = 0; }

    const ModeBasis& basis() const { return basis_; }
    const KerrTensor& kerr() const { return kerr_; }
    const CwPropagator& propagator() const { return *prop_; }
    const OpticsConfig& config() const { return cfg_; }

private:
    FiberGeometry geom_;
    OpticsConfig cfg_;
    ModeBasis basis_;
    KerrTensor kerr_;
    std::unique_ptr<CwPropagator> prop_;
    mutable long calls_ = 0;
};

}  // namespace ffo
