#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bstop/beta.hpp"
#include "bstop/trellis.hpp"

namespace bstop {

// 2D field of true Bernoulli parameters, row-major. range_lo/range_hi is the
// declared value range; range_hi is the PSNR peak.
struct Scene {
    int width = 0;
    int height = 0;
    std::vector<double> p;
    double range_lo = 0.0;
    double range_hi = 1.0;

    double& at(int row, int col) { return p[static_cast<std::size_t>(row) * width + col]; }
    double at(int row, int col) const { return p[static_cast<std::size_t>(row) * width + col]; }
    std::size_t pixel_count() const { return p.size(); }
};

// Modified Shepp-Logan phantom on an n-by-n grid spanning [-1, 1]^2, values
// in [0, 1] from the standard ten-ellipse table.
Scene shepp_logan(int size);

// Affine map sending the scene minimum to lo and maximum to hi. Fails on a
// constant scene; already-matching scenes pass through unchanged.
Scene rescale(const Scene& scene, double lo, double hi);

// Per-pixel counts from a simulated raster scan.
struct AcquisitionRecord {
    int width = 0;
    int height = 0;
    std::vector<long long> successes;  // k per pixel
    std::vector<long long> trials;     // m per pixel
    std::uint64_t seed = 0;
};

// Runs the stopping rule independently at every pixel using a per-pixel
// random stream derived from (seed, pixel index).
AcquisitionRecord acquire(const Scene& scene, const StoppingRule& rule,
                          std::uint64_t seed);

enum class ReconMethod { PixelwiseMmse, PixelwiseMl, TvMl };

struct Reconstruction {
    int width = 0;
    int height = 0;
    std::vector<double> estimate;
    Estimand estimand = Estimand::P;
    ReconMethod method = ReconMethod::PixelwiseMmse;
    double mse = 0.0;
    double psnr_db = 0.0;
};

struct ImageMetrics {
    double mse = 0.0;
    double psnr_db = 0.0;
};

ImageMetrics image_metrics(const std::vector<double>& estimate, const Scene& truth,
                           Estimand estimand);
double improvement_db(double mse_a, double mse_b);

// Closed-form per-pixel estimates; MSE/PSNR against the true scene (or its
// log). ML requires m >= 1 everywhere, and k >= 1 for log p.
Reconstruction estimate_pixelwise(const AcquisitionRecord& record, const BetaParams& prior,
                                  Estimand estimand, ReconMethod method,
                                  const Scene& truth);

struct TvOptions {
    int max_iterations = 5000;
    double rel_tolerance = 1e-8;
    int prox_iterations = 60;
    double clamp_epsilon = 1e-6;
};

struct TvResult {
    Reconstruction recon;
    int iterations = 0;
    bool converged = false;
    double final_objective = 0.0;
    std::vector<double> objective_trace;
};

// Minimizes sum_px [-k log p - (m-k) log(1-p)] + tv_weight * TV(p) over
// p in [eps, 1-eps] by proximal gradient with backtracking; the anisotropic
// TV prox is solved by projected dual ascent. Deterministic given inputs.
TvResult estimate_tv_ml(const AcquisitionRecord& record, double tv_weight,
                        const Scene& truth, const TvOptions& options = {});

// Scene I/O. PGM reads P2/P5 at 8 or 16 bits and maps to [0, 1]; CSV holds
// exact doubles, one row per image line.
Scene load_scene_pgm(const std::string& path);
Scene load_scene_csv(const std::string& path);
void save_pgm(const std::string& path, const std::vector<double>& img, int width,
              int height, double lo, double hi);
void save_csv(const std::string& path, const std::vector<double>& img, int width,
              int height);

}  // namespace bstop
