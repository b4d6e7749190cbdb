#pragma once

// Seeded trajectory simulation. Every path draws from its own stream derived
// from (seed, path index), so batches do not depend on the worker count.

#include "maplab/map_model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace maplab {

/// xoshiro256++ seeded through splitmix64.
class PathRng {
public:
    PathRng(std::uint64_t seed, std::uint64_t stream);
    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }
    /// Uniform on (0, 1); never returns 0 or 1.
    double uniform();
    double normal();
    double exponential();

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
};

/// Worker count: explicit value if positive, else MAPLAB_THREADS, else 1.
int resolve_threads(int requested);

struct SimulationOptions {
    int threads = 0;
    bool keep_terminal_x = false;
    /// Extra observation times (sorted, within the horizon); d = 1 only.
    std::vector<double> checkpoints;
};

struct TrajectoryBatch {
    std::string spec_id;
    long n_steps = 0;
    double t_horizon = 0.0;
    long n_paths = 0;
    std::uint64_t seed = 0;
    int d = 1;
    /// Row-major n_paths x d.
    std::vector<double> terminal_y;
    std::vector<int> terminal_x;
    std::vector<double> checkpoints;
    /// Row-major n_paths x checkpoints.size().
    std::vector<double> checkpoint_y;

    double y(long path, int comp = 0) const { return terminal_y[static_cast<std::size_t>(path * d + comp)]; }
    double at(long path, std::size_t checkpoint) const {
        return checkpoint_y[static_cast<std::size_t>(path) * checkpoints.size() + checkpoint];
    }
    /// Terminal (d = 1) or checkpoint column as a vector.
    std::vector<double> column(std::optional<std::size_t> checkpoint = std::nullopt) const;
};

TrajectoryBatch simulate_discrete(const MapSpec& spec, long n, long n_paths, std::uint64_t seed,
                                  const std::optional<Vector>& mu = std::nullopt,
                                  const SimulationOptions& options = {});

TrajectoryBatch simulate_ct(const CtMapSpec& spec, double t, long n_paths, std::uint64_t seed,
                            const std::optional<Vector>& mu = std::nullopt,
                            const SimulationOptions& options = {});

/// Row-major n_paths x n matrix of increments Y_k - Y_{k-1} (d = 1), stationary start.
struct IncrementPanel {
    long n_paths = 0;
    int n = 0;
    std::vector<double> values;
    double operator()(long path, int k) const { return values[static_cast<std::size_t>(path * n + k)]; }
};

IncrementPanel increment_panel(const MapSpec& spec, int n, long n_paths, std::uint64_t seed,
                               int threads = 0);

/// Transition counts N_xy along each path, recorded at every n in the list.
struct EdgeCountBatch {
    long n_paths = 0;
    Eigen::Index states = 0;
    std::vector<long> n_list;
    /// Row-major n_paths x n_list.size() x states^2.
    std::vector<std::uint32_t> counts;

    const std::uint32_t* at(long path, std::size_t checkpoint) const {
        const auto block = static_cast<std::size_t>(states * states);
        return counts.data() + (static_cast<std::size_t>(path) * n_list.size() + checkpoint) * block;
    }
};

/// Paths of the driving chain summarized by edge counts; the stream of path p is
/// PathRng(seed, p).
EdgeCountBatch simulate_edge_counts(const StochasticKernel& kernel, std::vector<long> n_list, long n_paths,
                                    std::uint64_t seed, const std::optional<Vector>& mu = std::nullopt,
                                    int threads = 0);

/// Standard normal quantile.
double normal_quantile(double u);

}  // namespace maplab
