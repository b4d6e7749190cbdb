#include "maplab/fixtures.hpp"

#include "maplab/errors.hpp"

#include <algorithm>

namespace maplab {

namespace {

using Kind = IncrementLaw::Kind;

// Increment depends only on the target state.
MapSpec functional(const Matrix& P, const std::vector<double>& xi, bool centered) {
    std::vector<EdgeLaw> laws;
    for (Eigen::Index x = 0; x < P.rows(); ++x) {
        for (Eigen::Index y = 0; y < P.cols(); ++y) {
            if (P(x, y) > 0.0) laws.push_back({x, y, IncrementLaw::deterministic(xi[y])});
        }
    }
    return MapSpec(StochasticKernel(P), 1, std::move(laws), centered);
}

MapSpec gaussian_target(const Matrix& P, const std::vector<double>& mean, double var,
                        bool centered) {
    std::vector<EdgeLaw> laws;
    for (Eigen::Index x = 0; x < P.rows(); ++x) {
        for (Eigen::Index y = 0; y < P.cols(); ++y) {
            if (P(x, y) > 0.0) laws.push_back({x, y, IncrementLaw::gaussian(mean[y], var)});
        }
    }
    return MapSpec(StochasticKernel(P), 1, std::move(laws), centered);
}

Matrix rows(std::initializer_list<std::initializer_list<double>> r) {
    Matrix M(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
    Eigen::Index i = 0;
    for (const auto& row : r) {
        Eigen::Index j = 0;
        for (double v : row) M(i, j++) = v;
        ++i;
    }
    return M;
}

}  // namespace

const std::vector<FixtureInfo>& fixture_catalog() {
    static const std::vector<FixtureInfo> catalog = {
        {"two_state", "P=[[0.7,0.3],[0.2,0.8]], occupation of state 1", false},
        {"iid_rademacher", "i.i.d. symmetric +-1 steps", false},
        {"lattice_pm1", "P=[[0.6,0.4],[0.4,0.6]], +-1 by target state", false},
        {"skewed_mixture", "i.i.d. selection (0.8,0.2) of N(-0.5,0.25) and N(2,0.25)", false},
        {"gaussian_iid", "i.i.d. selection (0.5,0.5) of N(-0.5,0.75) and N(0.5,0.75)", false},
        {"birth_death_5", "5-state birth-death chain, up 0.3, down 0.45, normalized position x/4", false},
        {"ct_two_state", "generator [[-1,1],[2,-2]], reward (0,1)", true},
        {"mean_contrast_problem", "contrast (xi - alpha)^2 on P=[[1-a,a],[0.2,0.8]], a in {0.2,...,0.4}", false, true},
    };
    return catalog;
}

bool has_fixture(const std::string& name) {
    const auto& c = fixture_catalog();
    return std::any_of(c.begin(), c.end(), [&](const FixtureInfo& f) { return f.name == name; });
}

std::shared_ptr<const CtMapSpec> ct_fixture(const std::string& name, bool centered) {
    if (name == "ct_two_state") {
        return std::make_shared<const CtMapSpec>(rows({{-1.0, 1.0}, {2.0, -2.0}}),
                                                 Vector((Vector(2) << 0.0, 1.0).finished()),
                                                 std::nullopt, centered);
    }
    throw InvalidSpec("unknown continuous-time fixture '" + name + "'");
}

MapSpec fixture(const std::string& name, bool centered) {
    if (name == "two_state") {
        return functional(rows({{0.7, 0.3}, {0.2, 0.8}}), {0.0, 1.0}, centered);
    }
    if (name == "iid_rademacher") {
        return functional(rows({{0.5, 0.5}, {0.5, 0.5}}), {-1.0, 1.0}, centered);
    }
    if (name == "lattice_pm1") {
        return functional(rows({{0.6, 0.4}, {0.4, 0.6}}), {-1.0, 1.0}, centered);
    }
    if (name == "skewed_mixture") {
        return gaussian_target(rows({{0.8, 0.2}, {0.8, 0.2}}), {-0.5, 2.0}, 0.25, centered);
    }
    if (name == "gaussian_iid") {
        return gaussian_target(rows({{0.5, 0.5}, {0.5, 0.5}}), {-0.5, 0.5}, 0.75, centered);
    }
    if (name == "birth_death_5") {
        Matrix P = Matrix::Zero(5, 5);
        for (int x = 0; x < 5; ++x) {
            if (x < 4) P(x, x + 1) = 0.3;
            if (x > 0) P(x, x - 1) = 0.45;
            P(x, x) = 1.0 - P.row(x).sum();
        }
        return functional(P, {0.0, 0.25, 0.5, 0.75, 1.0}, centered);
    }
    if (name == "ct_two_state") return ct_sample_skeleton(ct_fixture(name, centered));
    throw InvalidSpec("unknown fixture '" + name + "'");
}

}  // namespace maplab
