#include "maplab/io.hpp"

#include "maplab/errors.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace maplab::io {

namespace {

const json& field(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) {
        throw InvalidSpec(std::string("missing field '") + key + "'");
    }
    return j.at(key);
}

json law_to_json(Eigen::Index from, Eigen::Index to, const IncrementLaw& law) {
    json e = {{"from", from}, {"to", to}};
    switch (law.kind()) {
        case IncrementLaw::Kind::Deterministic:
            e["kind"] = "deterministic";
            e["value"] = to_json(law.value());
            break;
        case IncrementLaw::Kind::Gaussian:
            e["kind"] = "gaussian";
            e["mean"] = to_json(law.gaussian_mean());
            e["cov"] = to_json(law.covariance());
            break;
        case IncrementLaw::Kind::Mixture: {
            e["kind"] = "mixture";
            json atoms = json::array();
            for (const auto& a : law.atoms()) atoms.push_back({{"prob", a.prob}, {"value", to_json(a.value)}});
            e["atoms"] = atoms;
            break;
        }
        case IncrementLaw::Kind::Callable:
            throw InvalidSpec("callable increment laws have no JSON form");
    }
    return e;
}

IncrementLaw law_from_json(const json& e, int d) {
    const std::string kind = field(e, "kind").get<std::string>();
    auto vec = [&](const json& v) {
        Vector out = v.is_number() ? Vector::Constant(1, v.get<double>()) : vector_from_json(v);
        if (out.size() != d) throw InvalidSpec("increment dimension differs from d");
        return out;
    };
    if (kind == "deterministic") return IncrementLaw::deterministic(vec(field(e, "value")));
    if (kind == "gaussian") {
        const json& c = field(e, "cov");
        Matrix cov = c.is_number() ? Matrix::Constant(1, 1, c.get<double>()) : matrix_from_json(c);
        return IncrementLaw::gaussian(vec(field(e, "mean")), cov);
    }
    if (kind == "mixture") {
        std::vector<IncrementLaw::Atom> atoms;
        for (const auto& a : field(e, "atoms")) atoms.push_back({field(a, "prob").get<double>(), vec(field(a, "value"))});
        return IncrementLaw::mixture(std::move(atoms));
    }
    throw InvalidSpec("unknown increment kind '" + kind + "'");
}

}  // namespace

Vector vector_from_json(const json& j) {
    if (!j.is_array()) throw InvalidSpec("expected a numeric array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw InvalidSpec("expected a numeric array");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

Matrix matrix_from_json(const json& j) {
    if (!j.is_array() || j.empty() || !j[0].is_array()) throw InvalidSpec("expected a nested numeric array");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const Vector row = vector_from_json(j[static_cast<std::size_t>(r)]);
        if (row.size() != cols) throw InvalidSpec("ragged matrix");
        m.row(r) = row.transpose();
    }
    return m;
}

json to_json(const Vector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

json to_json(const Matrix& m) {
    json a = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(to_json(Vector(m.row(r).transpose())));
    return a;
}

json spec_to_json(const MapSpec& spec) {
    if (const auto& ct = spec.ct_source()) {
        return {{"skeleton_of", ct_spec_to_json(*ct)}, {"centered", spec.centered()}};
    }
    const auto& K = spec.kernel();
    json incs = json::array();
    // Store the laws before centering so the document reproduces the spec.
    const Vector undo = spec.centering_shift();
    for (Eigen::Index x = 0; x < K.size(); ++x) {
        for (Eigen::Index y = 0; y < K.size(); ++y) {
            if (spec.has_law(x, y)) incs.push_back(law_to_json(x, y, spec.law(x, y).shifted(undo)));
        }
    }
    return {{"kernel", {{"states", K.states()}, {"P", to_json(K.P())}}},
            {"d", spec.dim()},
            {"increments", incs},
            {"centered", spec.centered()}};
}

MapSpec spec_from_json(const json& j) {
    if (j.contains("skeleton_of")) {
        auto ct = ct_spec_from_json(j.at("skeleton_of"));
        MapSpec sk = ct_sample_skeleton(ct);
        return j.value("centered", false) ? sk.centered_copy() : sk;
    }
    const json& k = field(j, "kernel");
    const Matrix P = matrix_from_json(field(k, "P"));
    std::vector<std::string> states;
    if (k.contains("states")) {
        for (const auto& s : k.at("states")) states.push_back(s.is_string() ? s.get<std::string>() : s.dump());
    } else {
        for (Eigen::Index x = 0; x < P.rows(); ++x) states.push_back(std::to_string(x));
    }
    std::optional<StochasticKernel> kernel;
    if (k.contains("pi")) {
        kernel.emplace(states, P, vector_from_json(k.at("pi")));
    } else {
        kernel.emplace(states, P);
    }
    const int d = j.value("d", 1);
    std::vector<EdgeLaw> laws;
    for (const auto& e : field(j, "increments")) {
        laws.push_back({field(e, "from").get<Eigen::Index>(), field(e, "to").get<Eigen::Index>(), law_from_json(e, d)});
    }
    return MapSpec(*kernel, d, std::move(laws), j.value("centered", false));
}

json ct_spec_to_json(const CtMapSpec& spec) {
    Vector reward = spec.reward();
    if (spec.centered()) reward.array() += spec.drift();
    json j = {{"generator", to_json(spec.generator())}, {"reward", to_json(reward)}, {"centered", spec.centered()}};
    if (spec.has_jump_increments()) j["jump_increments"] = to_json(spec.jump_increments());
    return j;
}

std::shared_ptr<const CtMapSpec> ct_spec_from_json(const json& j) {
    std::optional<Matrix> jumps;
    if (j.contains("jump_increments") && !j.at("jump_increments").is_null()) {
        jumps = matrix_from_json(j.at("jump_increments"));
    }
    return std::make_shared<const CtMapSpec>(matrix_from_json(field(j, "generator")),
                                             vector_from_json(field(j, "reward")), jumps,
                                             j.value("centered", false));
}

bool is_ct_json(const json& j) {
    return j.is_object() && j.contains("generator");
}

std::string content_hash(const json& j) {
    const std::string text = j.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string spec_hash(const MapSpec& spec) {
    return content_hash(spec_to_json(spec));
}

std::string spec_hash(const CtMapSpec& spec) {
    return content_hash(ct_spec_to_json(spec));
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("cannot parse '" + path.string() + "': " + e.what());
    }
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw ConfigError("write to '" + tmp.string() + "' failed");
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace maplab::io
