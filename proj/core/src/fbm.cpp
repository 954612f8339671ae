#include "treeshadow/fbm.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <iomanip>
#include <ostream>
#include <random>
#include <stdexcept>

namespace treeshadow::fbm {

namespace {

constexpr const char* kGeneratorName = "mt19937-64.box-muller.block1024";
constexpr int kBlockPaths = 1024;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t block_seed(std::uint64_t seed, int block) {
    return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(block) + 1));
}

// Deterministic standard normals: 53-bit uniforms from mt19937_64 fed through
// Box-Muller. std::normal_distribution is implementation-defined, so not used.
class NormalStream {
  public:
    explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

  private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Lower-triangular Cholesky with escalating diagonal jitter. The fBm covariance
// is positive definite but ill-conditioned for H near 1.
Eigen::MatrixXd cholesky_with_jitter(const Eigen::MatrixXd& cov) {
    const auto n = cov.rows();
    const double max_diag = cov.diagonal().maxCoeff();
    const double jitters[] = {0.0, 1e-16, 1e-14, 1e-12, 1e-10};
    int fail_pivot = -1;
    for (double jit : jitters) {
        Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
        bool ok = true;
        for (Eigen::Index j = 0; j < n && ok; ++j) {
            double d = cov(j, j) + jit * max_diag;
            for (Eigen::Index k = 0; k < j; ++k) d -= L(j, k) * L(j, k);
            if (d <= 0.0) {
                ok = false;
                fail_pivot = static_cast<int>(j);
                break;
            }
            L(j, j) = std::sqrt(d);
            for (Eigen::Index i = j + 1; i < n; ++i) {
                double s = cov(i, j);
                for (Eigen::Index k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
                L(i, j) = s / L(j, j);
            }
        }
        if (ok) return L;
    }
    throw std::runtime_error("covariance factorization failed: non-positive pivot at index " +
                             std::to_string(fail_pivot) +
                             " (matrix numerically indefinite after max jitter 1e-10)");
}

void run_blocks(int n_paths, int jobs, const std::function<void(int, int, int)>& work) {
    // work(block_index, first_path, count); block seeds depend only on block_index,
    // so the sampled values are independent of the worker count.
    const int n_blocks = (n_paths + kBlockPaths - 1) / kBlockPaths;
    jobs = std::max(1, std::min(jobs, n_blocks));
    if (jobs == 1) {
        for (int b = 0; b < n_blocks; ++b)
            work(b, b * kBlockPaths, std::min(kBlockPaths, n_paths - b * kBlockPaths));
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::future<void>> workers;
    workers.reserve(jobs);
    for (int w = 0; w < jobs; ++w) {
        workers.push_back(std::async(std::launch::async, [&] {
            for (int b = next.fetch_add(1); b < n_blocks; b = next.fetch_add(1))
                work(b, b * kBlockPaths, std::min(kBlockPaths, n_paths - b * kBlockPaths));
        }));
    }
    for (auto& f : workers) f.get();
}

// --- Moving-average (Mandelbrot-van Ness) discretisation -----------------------

struct NoiseCell {
    double a = 0.0, b = 0.0;  // [a, b)
    double width() const { return b - a; }
};

// Base cells over [-truncation, horizon] aligned with the observation times,
// with dyadic refinement of the cell left of each kernel singularity
// (s -> t_k for the (t-s)^{H-1/2} part, s -> 0 for the history part).
std::vector<NoiseCell> build_cells(const std::vector<double>& times, double truncation,
                                   int n_substeps, int refine_levels) {
    std::vector<double> anchors;  // cell boundaries that must be hit exactly
    anchors.push_back(-truncation);
    anchors.push_back(0.0);
    for (double t : times) anchors.push_back(t);
    std::sort(anchors.begin(), anchors.end());

    std::vector<NoiseCell> cells;
    for (std::size_t i = 0; i + 1 < anchors.size(); ++i) {
        const double lo = anchors[i], hi = anchors[i + 1];
        const int n = std::max(1, static_cast<int>(std::ceil((hi - lo) * n_substeps)));
        const double w = (hi - lo) / n;
        for (int j = 0; j < n; ++j) {
            NoiseCell c{lo + j * w, (j + 1 == n) ? hi : lo + (j + 1) * w};
            if (j + 1 == n) {
                // split [c.a, hi) into halves shrinking toward the singularity at hi
                double a = c.a;
                for (int m = 0; m < refine_levels; ++m) {
                    const double mid = hi - (hi - a) * 0.5;
                    cells.push_back({a, mid});
                    a = mid;
                }
                cells.push_back({a, hi});
            } else {
                cells.push_back(c);
            }
        }
    }
    return cells;
}

// Exact integral of the kernel over one cell:
//   int_a^b ( (t-s)^{H-1/2} - |s|^{H-1/2} 1_{s<0} ) ds
double kernel_cell_integral(double hurst, double t, const NoiseCell& c) {
    const double q = hurst + 0.5;  // exponent of the antiderivative
    double val = 0.0;
    const double hi = std::min(c.b, t);
    if (hi > c.a) val += (std::pow(t - c.a, q) - std::pow(t - hi, q)) / q;
    if (c.b <= 0.0) val -= (std::pow(-c.a, q) - std::pow(-c.b, q)) / q;
    return val;
}

struct MvnWeights {
    Eigen::MatrixXd rows;  // n_steps x n_cells, scaled for unit normals
};

MvnWeights mvn_weights(const FbmSpec& spec, double truncation, int n_substeps) {
    spec.validate();
    if (!(truncation > 0.0)) throw std::invalid_argument("truncation must be > 0");
    if (n_substeps <= 0) throw std::invalid_argument("n_substeps must be positive");

    std::vector<double> times(spec.n_steps);
    for (int k = 0; k < spec.n_steps; ++k)
        times[k] = spec.horizon * (k + 1) / spec.n_steps;

    const int refine_levels = 14;
    const auto cells = build_cells(times, truncation, n_substeps, refine_levels);

    Eigen::MatrixXd w(spec.n_steps, static_cast<Eigen::Index>(cells.size()));
    for (int k = 0; k < spec.n_steps; ++k)
        for (std::size_t j = 0; j < cells.size(); ++j)
            w(k, static_cast<Eigen::Index>(j)) =
                kernel_cell_integral(spec.hurst, times[k], cells[j]) /
                std::sqrt(cells[j].width());

    // Calibrate the scale so the discrete variance at the last time is t^{2H}.
    const double var_last = w.row(spec.n_steps - 1).squaredNorm();
    const double target = std::pow(times.back(), 2.0 * spec.hurst);
    w *= std::sqrt(target / var_last);
    return {std::move(w)};
}

}  // namespace

void FbmSpec::validate() const {
    if (!(hurst > 0.0 && hurst < 1.0))
        throw std::invalid_argument("hurst must lie in (0,1)");
    if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be > 0");
    if (n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be > 0");
    if (!std::isfinite(mu)) throw std::invalid_argument("mu must be finite");
}

double covariance_at(double hurst, double s, double t) {
    const double h2 = 2.0 * hurst;
    return 0.5 * (std::pow(s, h2) + std::pow(t, h2) - std::pow(std::abs(t - s), h2));
}

GaussianGrid covariance(const FbmSpec& spec) {
    spec.validate();
    GaussianGrid grid;
    grid.spec = spec;
    grid.times.resize(spec.n_steps);
    for (int k = 0; k < spec.n_steps; ++k)
        grid.times[k] = spec.horizon * (k + 1) / spec.n_steps;

    const int n = spec.n_steps;
    grid.cov.resize(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) {
            const double v = covariance_at(spec.hurst, grid.times[i], grid.times[j]);
            grid.cov(i, j) = v;
            grid.cov(j, i) = v;
        }
    grid.factor = cholesky_with_jitter(grid.cov);
    return grid;
}

PathSet sample_cholesky(const GaussianGrid& grid, int n_paths, std::uint64_t seed,
                        int jobs) {
    if (n_paths < 0) throw std::invalid_argument("n_paths must be >= 0");
    const int n = grid.spec.n_steps;
    PathSet out;
    out.spec = grid.spec;
    out.seed = seed;
    out.generator = kGeneratorName;
    out.values.resize(n_paths, n);
    if (n_paths == 0) return out;

    run_blocks(n_paths, jobs, [&](int block, int first, int count) {
        NormalStream rng(block_seed(seed, block));
        Eigen::VectorXd z(n);
        for (int p = 0; p < count; ++p) {
            for (int i = 0; i < n; ++i) z(i) = rng.next();
            out.values.row(first + p) = (grid.factor * z).transpose();
        }
    });
    return out;
}

PathSet sample_mvn(const FbmSpec& spec, double truncation, int n_substeps, int n_paths,
                   std::uint64_t seed, int jobs) {
    if (n_paths < 0) throw std::invalid_argument("n_paths must be >= 0");
    const auto weights = mvn_weights(spec, truncation, n_substeps);
    const auto n_cells = weights.rows.cols();

    PathSet out;
    out.spec = spec;
    out.seed = seed;
    out.generator = kGeneratorName;
    out.values.resize(n_paths, spec.n_steps);
    if (n_paths == 0) return out;

    run_blocks(n_paths, jobs, [&](int block, int first, int count) {
        NormalStream rng(block_seed(seed, block));
        Eigen::MatrixXd z(count, n_cells);
        for (int p = 0; p < count; ++p)
            for (Eigen::Index c = 0; c < n_cells; ++c) z(p, c) = rng.next();
        out.values.middleRows(first, count).noalias() = z * weights.rows.transpose();
    });
    return out;
}

Eigen::MatrixXd mvn_discrete_covariance(const FbmSpec& spec, double truncation,
                                        int n_substeps) {
    const auto weights = mvn_weights(spec, truncation, n_substeps);
    return weights.rows * weights.rows.transpose();
}

ConditionalWeights conditional_weights(const GaussianGrid& grid, int k) {
    const int n = grid.spec.n_steps;
    if (k < 1 || k >= n)
        throw std::invalid_argument("conditioning length must satisfy 1 <= k < n_steps");

    const Eigen::MatrixXd sigma11 = grid.cov.topLeftCorner(k, k);
    Eigen::VectorXd c(k);
    for (int i = 0; i < k; ++i) c(i) = grid.cov(i, k) - grid.cov(i, k - 1);
    const double var_d =
        grid.cov(k, k) + grid.cov(k - 1, k - 1) - 2.0 * grid.cov(k, k - 1);

    Eigen::LDLT<Eigen::MatrixXd> ldlt(sigma11);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw std::runtime_error("singular conditioning block for times t_1..t_" +
                                 std::to_string(k));
    const Eigen::VectorXd w = ldlt.solve(c);
    const double var_cond = var_d - c.dot(w);
    if (var_cond < -1e-10 * grid.cov(k, k))
        throw std::runtime_error("conditioning produced negative variance at times t_" +
                                 std::to_string(k) + ", t_" + std::to_string(k + 1));
    return {w, std::sqrt(std::max(var_cond, 0.0))};
}

ConditionalMoments conditional_increment(const GaussianGrid& grid,
                                         const std::vector<double>& history) {
    const int k = static_cast<int>(history.size());
    const auto cw = conditional_weights(grid, k);
    double mean = 0.0;
    for (int i = 0; i < k; ++i) mean += cw.weights(i) * history[i];
    return {mean, cw.stddev};
}

void export_csv(const PathSet& paths, std::ostream& os) {
    os << "path_id,t,value\n";
    os << std::setprecision(17);
    const int n = paths.spec.n_steps;
    for (int p = 0; p < paths.n_paths(); ++p)
        for (int k = 0; k < n; ++k)
            os << p << ',' << paths.spec.horizon * (k + 1) / n << ','
               << paths.values(p, k) << '\n';
}

}  // namespace treeshadow::fbm
