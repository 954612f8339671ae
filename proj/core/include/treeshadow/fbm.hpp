#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace treeshadow::fbm {

// Parameters of a fractional Brownian motion model on [0, horizon].
struct FbmSpec {
    double hurst = 0.5;    // H in (0,1)
    double horizon = 1.0;  // T > 0
    int n_steps = 1;       // observation times t_k = k*horizon/n_steps
    double mu = 0.0;       // drift per unit time (geometric models)
    double sigma = 1.0;    // volatility > 0 (geometric models)

    void validate() const;  // throws std::invalid_argument on bad fields
};

// R(s,t) = (s^{2H} + t^{2H} - |t-s|^{2H}) / 2, normalised so Var(B_1) = 1.
double covariance_at(double hurst, double s, double t);

struct GaussianGrid {
    FbmSpec spec;
    std::vector<double> times;  // strictly increasing, starts after 0
    Eigen::MatrixXd cov;        // pairwise covariances R(t_i, t_j)
    Eigen::MatrixXd factor;     // lower triangular, factor * factor^T = cov
};

GaussianGrid covariance(const FbmSpec& spec);

struct PathSet {
    Eigen::MatrixXd values;  // n_paths x n_steps
    FbmSpec spec;
    std::uint64_t seed = 0;
    std::string generator;  // fixed algorithm name, part of the determinism contract

    int n_paths() const { return static_cast<int>(values.rows()); }
};

// Exact-in-law sampler: each path is factor * (iid standard normals).
PathSet sample_cholesky(const GaussianGrid& grid, int n_paths, std::uint64_t seed,
                        int jobs = 1);

// Moving-average sampler driven by white noise on a grid over [-truncation, horizon].
// The kernel ((t-s)^{H-1/2} - |s|^{H-1/2} 1_{s<0}) is integrated exactly over each
// noise cell; cells adjacent to the kernel singularities are dyadically refined.
// n_substeps counts base cells per unit time. The scale constant is calibrated so
// the discrete variance at the last observation time equals t^{2H} (Var(B_1) = 1).
PathSet sample_mvn(const FbmSpec& spec, double truncation, int n_substeps, int n_paths,
                   std::uint64_t seed, int jobs = 1);

// Covariance of the law actually produced by sample_mvn (no sampling involved).
// Useful to bound truncation/discretisation bias against covariance(spec).
Eigen::MatrixXd mvn_discrete_covariance(const FbmSpec& spec, double truncation,
                                        int n_substeps);

struct ConditionalMoments {
    double mean = 0.0;
    double stddev = 0.0;
};

// Mean and standard deviation of B_{t_{k+1}} - B_{t_k} given realised values at
// t_1..t_k. history.size() = k with 1 <= k < n_steps.
ConditionalMoments conditional_increment(const GaussianGrid& grid,
                                         const std::vector<double>& history);

// Level-k prediction weights: mean = w . history, stddev independent of history.
// Shared by all histories of the same length; used by the tree quantiser.
struct ConditionalWeights {
    Eigen::VectorXd weights;
    double stddev = 0.0;
};
ConditionalWeights conditional_weights(const GaussianGrid& grid, int k);

// CSV with header path_id,t,value; rows ordered by (path_id, t).
void export_csv(const PathSet& paths, std::ostream& os);

}  // namespace treeshadow::fbm
