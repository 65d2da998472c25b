#ifndef GPCHECK_IO_HPP
#define GPCHECK_IO_HPP

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gpcheck/error.hpp"
#include "gpcheck/gp.hpp"
#include "gpcheck/grid.hpp"
#include "gpcheck/inequalities.hpp"
#include "gpcheck/manybody.hpp"
#include "gpcheck/potentials.hpp"
#include "gpcheck/radial.hpp"
#include "gpcheck/scattering.hpp"

namespace gpcheck {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Radial profiles and potential specs
//
// Profile JSON:
//   {"kind": "constant", "r": [r0, ..., rn], "v": [v0, ..., v(n-1)]}
//   {"kind": "linear",   "r": [r0, ..., rn], "v": [v0, ..., vn]}
//   {"kind": "segments", "segments": [[a, b, va, vb], ...]}

inline RadialPotential profile_from_json(const json& j) {
    if (j.is_null()) return {};
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "segments") {
        std::vector<Segment> s;
        for (const auto& e : j.at("segments")) {
            if (e.size() != 4) throw ParameterError("profile: segment entries need [a, b, va, vb]");
            s.push_back({e[0].get<double>(), e[1].get<double>(), e[2].get<double>(), e[3].get<double>()});
        }
        return RadialPotential(std::move(s));
    }
    const auto r = j.at("r").get<std::vector<double>>();
    const auto v = j.at("v").get<std::vector<double>>();
    if (kind == "constant") return RadialPotential::piecewise_constant(r, v);
    if (kind == "linear") return RadialPotential::piecewise_linear(r, v);
    throw ParameterError("profile: unknown kind '" + kind + "'");
}

inline json profile_to_json(const RadialPotential& p) {
    const auto& segs = p.segments();
    if (segs.empty()) return nullptr;
    bool constant = true;
    for (std::size_t i = 0; i < segs.size(); ++i) {
        if (segs[i].va != segs[i].vb) constant = false;
        if (i > 0 && segs[i - 1].b != segs[i].a) constant = false;
    }
    if (constant) {
        json r = json::array(), v = json::array();
        r.push_back(segs.front().a);
        for (const auto& s : segs) {
            r.push_back(s.b);
            v.push_back(s.va);
        }
        return {{"kind", "constant"}, {"r", r}, {"v", v}};
    }
    json s = json::array();
    for (const auto& e : segs) s.push_back({e.a, e.b, e.va, e.vb});
    return {{"kind", "segments"}, {"segments", s}};
}

// Either explicit profiles, or "shape": "square" with "barrier" and "well" heights.
inline PotentialSpec spec_from_json(const json& j) {
    const double r1 = j.at("r1").get<double>(), r2 = j.at("r2").get<double>(), R = j.at("R").get<double>();
    const double eps = j.value("epsilon", 0.5);
    if (j.value("shape", std::string{}) == "square")
        return PotentialSpec::square(r1, r2, R, j.at("barrier").get<double>(), j.at("well").get<double>(), eps);
    return PotentialSpec(r1, r2, R, j.at("lambda_plus").get<double>(), j.at("lambda_minus").get<double>(),
                         profile_from_json(j.value("vplus", json(nullptr))), profile_from_json(j.value("vminus", json(nullptr))),
                         eps);
}

inline json spec_to_json(const PotentialSpec& s) {
    return {{"r1", s.r1()},
            {"r2", s.r2()},
            {"R", s.R()},
            {"lambda_plus", s.lambda_plus()},
            {"lambda_minus", s.lambda_minus()},
            {"epsilon", s.epsilon()},
            {"vplus", profile_to_json(s.vplus())},
            {"vminus", profile_to_json(s.vminus())}};
}

inline json read_json_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw ParameterError("cannot open " + p.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParameterError("malformed JSON in " + p.string() + ": " + e.what());
    }
}

inline PotentialSpec load_spec(const std::filesystem::path& p) {
    try {
        return spec_from_json(read_json_file(p));
    } catch (const json::exception& e) {
        throw ParameterError("spec " + p.string() + ": " + e.what());
    }
}

inline void write_json_file(const std::filesystem::path& p, const json& j) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p);
    if (!out) throw ParameterError("cannot write " + p.string());
    out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Reports

inline json to_json(const ValidationReport& r) {
    return {{"n1", r.n1},
            {"n2", r.n2},
            {"core_check", r.core_check},
            {"sign_structure_check", r.sign_structure_check},
            {"lambda_ratio_check", r.lambda_ratio_check},
            {"er_infimum", r.er_infimum},
            {"er_check", r.er_check},
            {"overall", r.overall},
            {"largest_passing_epsilon", r.largest_passing_epsilon},
            {"tolerance", r.tol_form},
            {"covering_sweep", r.covering_sweep},
            {"er_nodes", r.er_nodes}};
}

inline json to_json(const FormCheckResult& r) {
    return {{"min_eigenvalue", r.min_eigenvalue},
            {"method", to_string(r.method)},
            {"trial_count", r.trial_count},
            {"violated", r.violated},
            {"tolerance", r.tolerance},
            {"discretization_estimate", r.discretization_estimate},
            {"extrapolated", r.extrapolated},
            {"nodes", r.nodes}};
}

inline json to_json(const OperatorCheckReport& r) {
    json sweep = json::array();
    for (const auto& e : r.two_body) sweep.push_back({{"epsilon", e.epsilon}, {"result", to_json(e.result)}});
    return {{"two_body_positivity",
             {{"largest_passing_epsilon", r.largest_passing_epsilon}, {"pass", r.two_body_pass}, {"sweep", sweep}}},
            {"localized_three_body_form",
             {{"note", "sampled quadratic form; a necessary condition, not a certificate"},
              {"result", to_json(r.sampled_form)},
              {"epsilon", r.form_epsilon},
              {"pair_radius", r.shell_radius},
              {"min_random", r.min_random},
              {"min_cluster", r.min_cluster},
              {"cluster_trials", r.cluster_trials},
              {"grid_points", r.grid_points},
              {"box", r.box}}},
            {"pass", r.pass()}};
}

inline json to_json(const PartitionStats& s) {
    json ratios = json::object(), ref = json::object(), match = json::object();
    const auto expect = partition_reference_ratios(s.N);
    bool all = true;
    for (const auto& name : partition_ratio_names()) {
        const auto& v = s.ratios.at(name);
        ratios[name] = v.str();
        ref[name] = expect.at(name).str();
        match[name] = v == expect.at(name);
        all = all && v == expect.at(name);
    }
    return {{"N", s.N}, {"partitions", s.partitions}, {"ratios", ratios}, {"reference", ref}, {"matches", match}, {"all_match", all}};
}

inline json to_json(const PartitionOperatorCheck& c) {
    return {{"dimension", c.dimension},
            {"max_abs_difference", c.max_abs_difference},
            {"operator_scale", c.operator_scale},
            {"dense_cube_configs", c.dense_cube_configs},
            {"sparse_cube_configs", c.sparse_cube_configs},
            {"n1", c.n1},
            {"tolerance", c.tolerance},
            {"pass", c.pass}};
}

inline json to_json(const CoveringCheckReport& c) {
    return {{"n1", c.n1},
            {"configurations", c.configurations},
            {"worst_slack", c.worst_slack},
            {"worst_ratio", c.worst_ratio},
            {"max_cubes_met", c.max_cubes_met},
            {"pairs_dominate", c.pairs_dominate},
            {"violated", c.violated}};
}

inline json to_json(const ScalingReport& r) {
    json pts = json::array();
    for (const auto& p : r.points) pts.push_back({{"N", p.N}, {"radius", p.radius}, {"ratio", p.ratio}});
    return {{"points", pts},
            {"slope", r.slope},
            {"constant", r.constant},
            {"target_slope", r.target_slope},
            {"bounded", r.bounded},
            {"pass", r.pass()}};
}

inline json to_json(const RatioReport& r) {
    return {{"scale_sweep", r.scale_sweep},
            {"c_potential", r.c_potential},
            {"c_gradient", r.c_gradient},
            {"finite", r.finite},
            {"stable_potential", r.stable_potential},
            {"stable_gradient", r.stable_gradient}};
}

inline json to_json(const EnergyDecomposition& d) {
    json terms = json::object();
    for (const auto& t : d.terms) terms[t.name] = t.value;
    return {{"terms", terms},
            {"many_body_energy", d.many_body_energy},
            {"gp_energy", d.gp_energy},
            {"sum", d.sum},
            {"residual", d.residual},
            {"scale", d.scale}};
}

inline json grid_json(const PeriodicGrid& g) { return {{"dim", g.dim}, {"points", g.n}, {"box", g.L}}; }

// ---------------------------------------------------------------------------
// Tables: one "# {json}" metadata line, a header, then rows printed with %.17g.

class CsvTable {
public:
    CsvTable(json meta, std::vector<std::string> columns) : meta_(std::move(meta)), cols_(std::move(columns)) {}

    void add(const std::vector<double>& row) {
        if (row.size() != cols_.size()) throw DimensionError("table: row width does not match the header");
        rows_.push_back(row);
    }
    const std::vector<std::vector<double>>& rows() const { return rows_; }

    std::string str() const {
        std::ostringstream o;
        o << "# " << meta_.dump() << '\n';
        for (std::size_t i = 0; i < cols_.size(); ++i) o << (i ? "," : "") << cols_[i];
        o << '\n';
        char buf[32];
        for (const auto& r : rows_) {
            for (std::size_t i = 0; i < r.size(); ++i) {
                std::snprintf(buf, sizeof buf, "%.17g", r[i]);
                o << (i ? "," : "") << buf;
            }
            o << '\n';
        }
        return o.str();
    }

    void write(const std::filesystem::path& p) const {
        if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
        std::ofstream out(p);
        if (!out) throw ParameterError("cannot write " + p.string());
        out << str();
    }

private:
    json meta_;
    std::vector<std::string> cols_;
    std::vector<std::vector<double>> rows_;
};

// ---------------------------------------------------------------------------
// Field snapshots: raw little-endian complex doubles plus a JSON sidecar.

inline void write_snapshot(const std::filesystem::path& base, const GPField& f, const json& meta = json::object()) {
    if (base.has_parent_path()) std::filesystem::create_directories(base.parent_path());
    auto bin = base;
    bin += ".bin";
    std::ofstream out(bin, std::ios::binary);
    if (!out) throw ParameterError("cannot write " + bin.string());
    out.write(reinterpret_cast<const char*>(f.values.data()), std::streamsize(f.values.size() * sizeof(cd)));
    json side = {{"grid", grid_json(f.grid)}, {"time", f.time}, {"values", f.values.size()}, {"layout", "complex128, row-major"}};
    side["meta"] = meta;
    auto js = base;
    js += ".json";
    write_json_file(js, side);
}

inline GPField read_snapshot(const std::filesystem::path& base) {
    auto js = base;
    js += ".json";
    const json side = read_json_file(js);
    const auto& gj = side.at("grid");
    const PeriodicGrid g(gj.at("dim").get<int>(), gj.at("points").get<int>(), gj.at("box").get<double>());
    std::vector<cd> v(side.at("values").get<std::size_t>());
    if (v.size() != g.points()) throw DimensionError("snapshot: value count does not match the grid");
    auto bin = base;
    bin += ".bin";
    std::ifstream in(bin, std::ios::binary);
    if (!in.read(reinterpret_cast<char*>(v.data()), std::streamsize(v.size() * sizeof(cd))))
        throw ParameterError("snapshot: truncated " + bin.string());
    return GPField(g, std::move(v), side.at("time").get<double>());
}

} // namespace gpcheck

#endif
