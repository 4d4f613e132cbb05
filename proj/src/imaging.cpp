#include "bstop/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "bstop/evaluation.hpp"
#include "bstop/rng.hpp"

namespace bstop {

namespace {

struct Ellipse {
    double value, a, b, x0, y0, phi_deg;
};

// Modified Shepp-Logan table: additive value, semi-axes, center, rotation.
constexpr Ellipse kPhantom[10] = {
    {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
    {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
    {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0},
    {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0},
    {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},
    {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
    {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},
    {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
    {0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0},
    {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
};

void check_scene_for_acquisition(const Scene& scene) {
    if (scene.width <= 0 || scene.height <= 0 ||
        scene.p.size() != static_cast<std::size_t>(scene.width) * scene.height) {
        throw std::invalid_argument("Scene: inconsistent dimensions");
    }
    for (double v : scene.p) {
        if (!(v > 0.0) || !(v < 1.0)) {
            throw std::invalid_argument("Scene: parameters must lie strictly in (0, 1)");
        }
    }
}

}  // namespace

Scene shepp_logan(int size) {
    if (size < 16) throw std::invalid_argument("shepp_logan: size must be >= 16");
    Scene s;
    s.width = s.height = size;
    s.p.assign(static_cast<std::size_t>(size) * size, 0.0);
    const double half = (size - 1) / 2.0;
    for (int i = 0; i < size; ++i) {
        const double y = (half - i) / half;
        for (int j = 0; j < size; ++j) {
            const double x = (j - half) / half;
            double v = 0.0;
            for (const auto& e : kPhantom) {
                const double phi = e.phi_deg * M_PI / 180.0;
                const double dx = x - e.x0;
                const double dy = y - e.y0;
                const double xr = dx * std::cos(phi) + dy * std::sin(phi);
                const double yr = dy * std::cos(phi) - dx * std::sin(phi);
                if (xr * xr / (e.a * e.a) + yr * yr / (e.b * e.b) <= 1.0) v += e.value;
            }
            s.at(i, j) = v;
        }
    }
    s.range_lo = 0.0;
    s.range_hi = 1.0;
    return s;
}

Scene rescale(const Scene& scene, double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("rescale: need lo < hi");
    if (scene.p.empty()) throw std::invalid_argument("rescale: empty scene");
    const auto [mn_it, mx_it] = std::minmax_element(scene.p.begin(), scene.p.end());
    const double mn = *mn_it, mx = *mx_it;
    if (!(mx > mn)) throw std::invalid_argument("rescale: constant scene");
    Scene out = scene;
    out.range_lo = lo;
    out.range_hi = hi;
    if (mn == lo && mx == hi) return out;
    const double scale = (hi - lo) / (mx - mn);
    for (double& v : out.p) v = lo + (v - mn) * scale;
    return out;
}

AcquisitionRecord acquire(const Scene& scene, const StoppingRule& rule,
                          std::uint64_t seed) {
    check_scene_for_acquisition(scene);
    AcquisitionRecord rec;
    rec.width = scene.width;
    rec.height = scene.height;
    rec.seed = seed;
    const std::size_t n = scene.pixel_count();
    rec.successes.resize(n);
    rec.trials.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        CounterRng rng = CounterRng::stream(seed, i);
        const auto [k, m] = simulate_stop(rule, scene.p[i], rng);
        rec.successes[i] = k;
        rec.trials[i] = m;
    }
    return rec;
}

ImageMetrics image_metrics(const std::vector<double>& estimate, const Scene& truth,
                           Estimand estimand) {
    if (estimate.size() != truth.pixel_count()) {
        throw std::invalid_argument("image_metrics: dimension mismatch");
    }
    double mse = 0.0;
    for (std::size_t i = 0; i < estimate.size(); ++i) {
        const double t =
            estimand == Estimand::P ? truth.p[i] : std::log(truth.p[i]);
        const double e = estimate[i] - t;
        mse += e * e;
    }
    mse /= static_cast<double>(estimate.size());
    ImageMetrics out;
    out.mse = mse;
    out.psnr_db = mse > 0.0
                      ? 10.0 * std::log10(truth.range_hi * truth.range_hi / mse)
                      : std::numeric_limits<double>::infinity();
    return out;
}

double improvement_db(double mse_a, double mse_b) {
    return 10.0 * std::log10(mse_a / mse_b);
}

Reconstruction estimate_pixelwise(const AcquisitionRecord& record, const BetaParams& prior,
                                  Estimand estimand, ReconMethod method,
                                  const Scene& truth) {
    if (method == ReconMethod::TvMl) {
        throw std::invalid_argument("estimate_pixelwise: use estimate_tv_ml for TV");
    }
    if (record.successes.size() != truth.pixel_count()) {
        throw std::invalid_argument("estimate_pixelwise: record/scene size mismatch");
    }
    const Estimator est = method == ReconMethod::PixelwiseMmse ? Estimator::MmseUnderPrior
                                                               : Estimator::Ml;
    Reconstruction out;
    out.width = record.width;
    out.height = record.height;
    out.estimand = estimand;
    out.method = method;
    out.estimate.resize(record.successes.size());
    for (std::size_t i = 0; i < record.successes.size(); ++i) {
        out.estimate[i] =
            leaf_estimate(static_cast<int>(record.successes[i]),
                          static_cast<int>(record.trials[i]), prior, estimand, est);
    }
    const auto metrics = image_metrics(out.estimate, truth, estimand);
    out.mse = metrics.mse;
    out.psnr_db = metrics.psnr_db;
    return out;
}

namespace {

// Binomial negative log-likelihood and gradient over clamped [eps, 1-eps].
double nll(const AcquisitionRecord& rec, const std::vector<double>& x) {
    double f = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double k = static_cast<double>(rec.successes[i]);
        const double mk = static_cast<double>(rec.trials[i] - rec.successes[i]);
        f += -k * std::log(x[i]) - mk * std::log1p(-x[i]);
    }
    return f;
}

void nll_gradient(const AcquisitionRecord& rec, const std::vector<double>& x,
                  std::vector<double>& grad) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double k = static_cast<double>(rec.successes[i]);
        const double mk = static_cast<double>(rec.trials[i] - rec.successes[i]);
        grad[i] = -k / x[i] + mk / (1.0 - x[i]);
    }
}

double tv_anisotropic(const std::vector<double>& x, int w, int h) {
    double tv = 0.0;
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            const std::size_t idx = static_cast<std::size_t>(i) * w + j;
            if (j + 1 < w) tv += std::abs(x[idx + 1] - x[idx]);
            if (i + 1 < h) tv += std::abs(x[idx + w] - x[idx]);
        }
    }
    return tv;
}

// prox of gamma * anisotropic TV at z: projected gradient ascent on the dual
// with componentwise clipping to [-gamma, gamma]. Warm-started between calls.
void tv_prox(const std::vector<double>& z, double gamma, int w, int h, int iterations,
             std::vector<double>& ph, std::vector<double>& pv, std::vector<double>& y) {
    const double step = 0.24;  // below 2 / ||grad||^2 = 1/4 for the 2D lattice
    y = z;
    if (gamma <= 0.0) return;
    auto apply_divergence = [&]() {
        // y = z - D^T (ph, pv)
        y = z;
        for (int i = 0; i < h; ++i) {
            for (int j = 0; j + 1 < w; ++j) {
                const std::size_t e = static_cast<std::size_t>(i) * (w - 1) + j;
                const std::size_t idx = static_cast<std::size_t>(i) * w + j;
                y[idx] += ph[e];
                y[idx + 1] -= ph[e];
            }
        }
        for (int i = 0; i + 1 < h; ++i) {
            for (int j = 0; j < w; ++j) {
                const std::size_t e = static_cast<std::size_t>(i) * w + j;
                const std::size_t idx = static_cast<std::size_t>(i) * w + j;
                y[idx] += pv[e];
                y[idx + w] -= pv[e];
            }
        }
    };
    for (int it = 0; it < iterations; ++it) {
        apply_divergence();
        for (int i = 0; i < h; ++i) {
            for (int j = 0; j + 1 < w; ++j) {
                const std::size_t e = static_cast<std::size_t>(i) * (w - 1) + j;
                const std::size_t idx = static_cast<std::size_t>(i) * w + j;
                ph[e] = std::clamp(ph[e] + step * (y[idx + 1] - y[idx]), -gamma, gamma);
            }
        }
        for (int i = 0; i + 1 < h; ++i) {
            for (int j = 0; j < w; ++j) {
                const std::size_t e = static_cast<std::size_t>(i) * w + j;
                const std::size_t idx = static_cast<std::size_t>(i) * w + j;
                pv[e] = std::clamp(pv[e] + step * (y[idx + w] - y[idx]), -gamma, gamma);
            }
        }
    }
    apply_divergence();
}

}  // namespace

TvResult estimate_tv_ml(const AcquisitionRecord& record, double tv_weight,
                        const Scene& truth, const TvOptions& options) {
    if (!(tv_weight >= 0.0)) throw std::invalid_argument("estimate_tv_ml: weight must be >= 0");
    if (record.successes.size() != truth.pixel_count()) {
        throw std::invalid_argument("estimate_tv_ml: record/scene size mismatch");
    }
    const int w = record.width, h = record.height;
    const double eps = options.clamp_epsilon;
    const std::size_t n = record.successes.size();

    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        // Smoothed frequency keeps the start interior even at k = 0 or k = m.
        x[i] = std::clamp((record.successes[i] + 1.0) / (record.trials[i] + 2.0), eps,
                          1.0 - eps);
    }

    auto objective = [&](const std::vector<double>& v) {
        return nll(record, v) + tv_weight * tv_anisotropic(v, w, h);
    };

    if (tv_weight == 0.0) {
        // The unpenalized problem separates per pixel; the minimizer over the
        // clamped box is the clamped frequency (any interior point when m = 0).
        for (std::size_t i = 0; i < n; ++i) {
            if (record.trials[i] > 0) {
                x[i] = std::clamp(
                    static_cast<double>(record.successes[i]) / record.trials[i], eps,
                    1.0 - eps);
            }
        }
        TvResult direct;
        direct.converged = true;
        direct.final_objective = objective(x);
        direct.objective_trace.push_back(direct.final_objective);
        direct.recon.width = w;
        direct.recon.height = h;
        direct.recon.estimand = Estimand::P;
        direct.recon.method = ReconMethod::TvMl;
        direct.recon.estimate = std::move(x);
        const auto m0 = image_metrics(direct.recon.estimate, truth, Estimand::P);
        direct.recon.mse = m0.mse;
        direct.recon.psnr_db = m0.psnr_db;
        return direct;
    }

    std::vector<double> grad(n), z(n), y(n);
    std::vector<double> ph(static_cast<std::size_t>(std::max(w - 1, 0)) * h, 0.0);
    std::vector<double> pv(static_cast<std::size_t>(w) * std::max(h - 1, 0), 0.0);

    // Initial step from the curvature at the start point.
    double curvature = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double k = static_cast<double>(record.successes[i]);
        const double mk = static_cast<double>(record.trials[i] - record.successes[i]);
        curvature = std::max(curvature, k / (x[i] * x[i]) + mk / ((1.0 - x[i]) * (1.0 - x[i])));
    }
    double step = 1.0 / curvature;

    TvResult result;
    double fx = objective(x);
    result.objective_trace.push_back(fx);
    int it = 0;
    for (; it < options.max_iterations; ++it) {
        nll_gradient(record, x, grad);
        bool accepted = false;
        double fnew = fx;
        for (int bt = 0; bt < 60; ++bt) {
            for (std::size_t i = 0; i < n; ++i) z[i] = x[i] - step * grad[i];
            tv_prox(z, step * tv_weight, w, h, options.prox_iterations, ph, pv, y);
            for (double& v : y) v = std::clamp(v, eps, 1.0 - eps);
            fnew = objective(y);
            if (fnew <= fx) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;  // no descent direction left at this scale
        x.swap(y);
        result.objective_trace.push_back(fnew);
        const double drop = fx - fnew;
        fx = fnew;
        step *= 1.2;
        if (drop <= options.rel_tolerance * std::abs(fx)) {
            result.converged = true;
            ++it;
            break;
        }
    }
    result.iterations = it;
    result.final_objective = fx;
    if (!result.converged && it >= options.max_iterations) result.converged = false;

    result.recon.width = w;
    result.recon.height = h;
    result.recon.estimand = Estimand::P;
    result.recon.method = ReconMethod::TvMl;
    result.recon.estimate = std::move(x);
    const auto metrics = image_metrics(result.recon.estimate, truth, Estimand::P);
    result.recon.mse = metrics.mse;
    result.recon.psnr_db = metrics.psnr_db;
    return result;
}

namespace {

void skip_pgm_separators(std::istream& is) {
    for (;;) {
        const int c = is.peek();
        if (c == '#') {
            std::string line;
            std::getline(is, line);
        } else if (std::isspace(c)) {
            is.get();
        } else {
            return;
        }
    }
}

}  // namespace

Scene load_scene_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::string magic;
    is >> magic;
    if (magic != "P5" && magic != "P2") throw std::runtime_error("not a PGM file: " + path);
    int w = 0, h = 0, maxval = 0;
    skip_pgm_separators(is);
    is >> w;
    skip_pgm_separators(is);
    is >> h;
    skip_pgm_separators(is);
    is >> maxval;
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) {
        throw std::runtime_error("bad PGM header: " + path);
    }
    Scene s;
    s.width = w;
    s.height = h;
    s.p.resize(static_cast<std::size_t>(w) * h);
    if (magic == "P2") {
        for (auto& v : s.p) {
            long raw;
            if (!(is >> raw)) throw std::runtime_error("truncated PGM: " + path);
            v = static_cast<double>(raw) / maxval;
        }
    } else {
        is.get();  // single separator byte after maxval
        const int bytes = maxval > 255 ? 2 : 1;
        std::vector<unsigned char> buf(s.p.size() * bytes);
        is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (static_cast<std::size_t>(is.gcount()) != buf.size()) {
            throw std::runtime_error("truncated PGM: " + path);
        }
        for (std::size_t i = 0; i < s.p.size(); ++i) {
            const unsigned raw = bytes == 2
                                     ? (static_cast<unsigned>(buf[2 * i]) << 8) | buf[2 * i + 1]
                                     : buf[i];
            s.p[i] = static_cast<double>(raw) / maxval;
        }
    }
    s.range_lo = 0.0;
    s.range_hi = 1.0;
    return s;
}

Scene load_scene_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    Scene s;
    std::string line;
    int width = -1;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream row(line);
        std::string cell;
        int count = 0;
        while (std::getline(row, cell, ',')) {
            s.p.push_back(std::stod(cell));
            ++count;
        }
        if (width < 0) width = count;
        if (count != width) throw std::runtime_error("ragged CSV: " + path);
        ++s.height;
    }
    if (width <= 0 || s.height == 0) throw std::runtime_error("empty CSV: " + path);
    s.width = width;
    const auto [mn, mx] = std::minmax_element(s.p.begin(), s.p.end());
    s.range_lo = *mn;
    s.range_hi = *mx;
    return s;
}

void save_pgm(const std::string& path, const std::vector<double>& img, int width,
              int height, double lo, double hi) {
    if (img.size() != static_cast<std::size_t>(width) * height) {
        throw std::invalid_argument("save_pgm: size mismatch");
    }
    if (!(hi > lo)) throw std::invalid_argument("save_pgm: need hi > lo");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os << "P5\n" << width << " " << height << "\n65535\n";
    const double scale = 65535.0 / (hi - lo);
    for (double v : img) {
        const long q = std::lround(std::clamp((v - lo) * scale, 0.0, 65535.0));
        const unsigned char hi_byte = static_cast<unsigned char>((q >> 8) & 0xFF);
        const unsigned char lo_byte = static_cast<unsigned char>(q & 0xFF);
        os.put(static_cast<char>(hi_byte));
        os.put(static_cast<char>(lo_byte));
    }
}

void save_csv(const std::string& path, const std::vector<double>& img, int width,
              int height) {
    if (img.size() != static_cast<std::size_t>(width) * height) {
        throw std::invalid_argument("save_csv: size mismatch");
    }
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    char buf[64];
    for (int i = 0; i < height; ++i) {
        for (int j = 0; j < width; ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", img[static_cast<std::size_t>(i) * width + j]);
            os << buf << (j + 1 < width ? "," : "\n");
        }
    }
}

}  // namespace bstop
