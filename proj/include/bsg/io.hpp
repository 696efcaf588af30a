#pragma once

#include <cstdint>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bsg/cascade.hpp"
#include "bsg/free_energy.hpp"
#include "bsg/hj.hpp"
#include "bsg/measures.hpp"

namespace bsg {

using json = nlohmann::json;

inline json measure_to_json(const DiscreteMeasure& m) {
    json atoms = json::array();
    for (const Atom& a : m.atoms()) atoms.push_back({a.location, a.weight});
    return json{{"atoms", atoms}};
}

inline DiscreteMeasure measure_from_json(const json& j, double max_location = 1.0,
                                         double min_location = 0.0) {
    if (!j.contains("atoms")) throw std::invalid_argument("measure_from_json: missing atoms");
    std::vector<Atom> atoms;
    double top = max_location;
    for (const auto& a : j.at("atoms")) {
        atoms.push_back({a.at(0).get<double>(), a.at(1).get<double>()});
        top = std::max(top, atoms.back().location);
    }
    return DiscreteMeasure(std::move(atoms), top, min_location);
}

inline json cascade_to_json(const CascadeSpec& spec) {
    return json{{"zetas", spec.zetas}, {"q1", spec.q[0]}, {"q2", spec.q[1]}};
}

inline CascadeSpec cascade_from_json(const json& j) {
    CascadeSpec spec;
    spec.zetas = j.at("zetas").get<std::vector<double>>();
    spec.q[0] = j.at("q1").get<std::vector<double>>();
    spec.q[1] = j.at("q2").get<std::vector<double>>();
    spec.validate();
    return spec;
}

inline json model_to_json(const ModelSpec& m) {
    return json{{"N", m.n_spins},
                {"pi1", measure_to_json(m.pi1)},
                {"pi2", measure_to_json(m.pi2)},
                {"t", m.t},
                {"cascade", cascade_to_json(m.cascade)}};
}

inline ModelSpec model_from_json(const json& j) {
    ModelSpec m{j.at("N").get<std::size_t>(),
                measure_from_json(j.at("pi1"), 1.0, -1.0),
                measure_from_json(j.at("pi2"), 1.0, -1.0),
                j.at("t").get<double>(),
                cascade_from_json(j.at("cascade"))};
    m.validate();
    return m;
}

inline void free_energy_csv_header(std::ostream& os) {
    os << "t,q1,q2,estimate,stderr,n_disorder,seed\n";
}

inline void free_energy_csv_row(std::ostream& os, const ModelSpec& model, const Estimate& e,
                                std::uint64_t seed) {
    auto ladder = [](const std::vector<double>& q) {
        std::string s;
        for (std::size_t i = 0; i < q.size(); ++i)
            s += (i ? " " : "") + std::to_string(q[i]);
        return s;
    };
    os << model.t << ",\"" << ladder(model.cascade.q[0]) << "\",\""
       << ladder(model.cascade.q[1]) << "\"," << e.value << "," << e.stderr_ << "," << e.n
       << "," << seed << "\n";
}

inline json overlap_stats_to_json(const OverlapStats& stats) {
    json per_level = json::array();
    for (std::size_t l = 0; l <= stats.depth; ++l) {
        const Estimate mass = stats.column_estimate(stats.idx_mass(l));
        const Estimate ov1 = stats.column_estimate(stats.idx_ov(0, l));
        const Estimate ov2 = stats.column_estimate(stats.idx_ov(1, l));
        per_level.push_back({{"level", l},
                             {"mass", mass.value},
                             {"mass_stderr", mass.stderr_},
                             {"overlap1", ov1.value},
                             {"overlap1_stderr", ov1.stderr_},
                             {"overlap2", ov2.value},
                             {"overlap2_stderr", ov2.stderr_}});
    }
    const Estimate cross = stats.column_estimate(OverlapStats::idx_cross());
    json joint = json::array();
    for (const auto& [r1, r2, r0] : stats.joint_samples) joint.push_back({r1, r2, r0});
    return json{{"depth", stats.depth},
                {"n_samples", stats.rows.size()},
                {"cross", cross.value},
                {"cross_stderr", cross.stderr_},
                {"levels", per_level},
                {"joint_samples", joint}};
}

/// Long-format rows of the sampled joint replica histogram.
inline void overlap_histogram_csv(const OverlapStats& stats, std::ostream& os) {
    os << "r1,r2,r0\n";
    for (const auto& [r1, r2, r0] : stats.joint_samples)
        os << r1 << "," << r2 << "," << r0 << "\n";
}

/// Flattened grid with coordinates, one row per canonical grid point.
inline void field_to_csv(const SolutionField& f, std::ostream& os) {
    const std::size_t axes = f.axes();
    for (std::size_t a = 0; a < f.species(); ++a)
        for (std::size_t k = 0; k < f.levels(); ++k) os << "q_" << (a + 1) << "_" << (k + 1) << ",";
    os << "value\n";
    std::vector<std::size_t> idx(axes, 0);
    const double h = f.h();
    for (;;) {
        if (f.is_canonical(idx)) {
            for (std::size_t a = 0; a < f.species(); ++a)
                for (std::size_t k = 0; k < f.levels(); ++k)
                    os << h * static_cast<double>(idx[k * f.species() + a]) << ",";
            os << f.at(idx) << "\n";
        }
        std::size_t m = axes;
        bool done = true;
        while (m-- > 0) {
            if (++idx[m] < f.n_per_axis()) {
                done = false;
                break;
            }
            idx[m] = 0;
        }
        if (done) break;
    }
}

// Binary field dump: "BSGF", u32 version, u32 levels, u32 species,
// u32 n_per_axis, f64 q_max, f64 time, then the raw value block. Values are
// little-endian doubles in the field's native row-major layout.
inline void field_to_binary(const SolutionField& f, std::ostream& os) {
    const char magic[4] = {'B', 'S', 'G', 'F'};
    os.write(magic, 4);
    auto put_u32 = [&](std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); };
    auto put_f64 = [&](double v) { os.write(reinterpret_cast<const char*>(&v), 8); };
    put_u32(1);
    put_u32(static_cast<std::uint32_t>(f.levels()));
    put_u32(static_cast<std::uint32_t>(f.species()));
    put_u32(static_cast<std::uint32_t>(f.n_per_axis()));
    put_f64(f.q_max());
    put_f64(f.time);
    os.write(reinterpret_cast<const char*>(f.values().data()),
             static_cast<std::streamsize>(f.values().size() * sizeof(double)));
}

inline SolutionField field_from_binary(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || magic[0] != 'B' || magic[1] != 'S' || magic[2] != 'G' || magic[3] != 'F')
        throw std::runtime_error("field_from_binary: bad magic");
    auto get_u32 = [&]() {
        std::uint32_t v = 0;
        is.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    auto get_f64 = [&]() {
        double v = 0;
        is.read(reinterpret_cast<char*>(&v), 8);
        return v;
    };
    const std::uint32_t version = get_u32();
    if (version != 1) throw std::runtime_error("field_from_binary: unsupported version");
    const std::uint32_t levels = get_u32();
    const std::uint32_t species = get_u32();
    const std::uint32_t n = get_u32();
    const double q_max = get_f64();
    const double time = get_f64();
    SolutionField f(levels, species, n, q_max);
    f.time = time;
    is.read(reinterpret_cast<char*>(f.values().data()),
            static_cast<std::streamsize>(f.values().size() * sizeof(double)));
    if (!is) throw std::runtime_error("field_from_binary: truncated value block");
    return f;
}

}  // namespace bsg
