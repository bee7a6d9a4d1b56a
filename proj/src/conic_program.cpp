#include "mmco/conic_program.hpp"

#include "mmco/cycle.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

namespace mmco {

using nlohmann::json;
using Triplet = Eigen::Triplet<double>;

const VarBlock& ConicProgram::block(const std::string& name) const {
    for (const auto& b : layout) {
        if (b.name == name) return b;
    }
    throw std::out_of_range("program has no variable '" + name + "'");
}

bool ConicProgram::has(const std::string& name) const {
    return std::any_of(layout.begin(), layout.end(), [&](const VarBlock& b) { return b.name == name; });
}

int ConicProgram::index(const std::string& name, int k) const {
    const VarBlock& b = block(name);
    if (k < 0 || k >= b.size) throw std::out_of_range("index out of range for '" + name + "'");
    return b.offset + k;
}

socp::Problem ConicProgram::to_problem() const {
    socp::Problem p;
    p.c = c;
    p.A = A_eq;
    p.b = b_eq;
    p.G = G;
    p.h = h;
    p.cones = cones;
    return p;
}

int ProgramBuilder::add_block(const std::string& name, int size) {
    layout_.push_back({name, n_, size});
    n_ += size;
    return layout_.back().offset;
}

void ProgramBuilder::push_group(std::vector<RowGroup>& groups, const std::string& tag, int row) {
    if (!groups.empty() && groups.back().tag == tag && groups.back().first + groups.back().count == row) {
        ++groups.back().count;
    } else {
        groups.push_back({tag, row, 1});
    }
}

void ProgramBuilder::add_le(const std::vector<std::pair<int, double>>& terms, double rhs, const std::string& tag) {
    push_group(le_groups_, tag, static_cast<int>(le_.size()));
    le_.push_back({terms, rhs});
}

void ProgramBuilder::add_eq(const std::vector<std::pair<int, double>>& terms, double rhs, const std::string& tag) {
    push_group(eq_groups_, tag, static_cast<int>(eq_.size()));
    eq_.push_back({terms, rhs});
}

void ProgramBuilder::add_cone(const std::vector<AffineRow>& rows, const std::string& tag) {
    if (rows.size() < 2) throw std::invalid_argument("cone '" + tag + "' needs dimension >= 2");
    std::vector<Row> cone;
    for (const auto& r : rows) {
        Row row;
        for (const auto& [j, v] : r.terms) row.terms.emplace_back(j, -v);
        row.rhs = r.constant;
        cone.push_back(std::move(row));
    }
    cones_.push_back(std::move(cone));
    cone_tags_.push_back(tag);
}

ConicProgram ProgramBuilder::finish(Eigen::VectorXd c, double constant, ProgramMeta meta) {
    if (c.size() != n_) throw std::invalid_argument("objective length does not match the layout");
    ConicProgram p;
    p.layout = layout_;
    p.c = std::move(c);
    p.objective_constant = constant;
    p.meta = std::move(meta);

    auto check = [&](const std::vector<std::pair<int, double>>& terms) {
        for (const auto& t : terms) {
            if (t.first < 0 || t.first >= n_) throw std::invalid_argument("constraint references an undeclared variable");
        }
    };

    std::vector<Triplet> trip;
    p.b_eq.resize(static_cast<Eigen::Index>(eq_.size()));
    for (std::size_t i = 0; i < eq_.size(); ++i) {
        check(eq_[i].terms);
        for (const auto& [j, v] : eq_[i].terms) trip.emplace_back(static_cast<int>(i), j, v);
        p.b_eq(static_cast<Eigen::Index>(i)) = eq_[i].rhs;
    }
    p.A_eq.resize(static_cast<Eigen::Index>(eq_.size()), n_);
    p.A_eq.setFromTriplets(trip.begin(), trip.end());
    p.A_eq.makeCompressed();
    p.eq_groups = eq_groups_;

    int rows = static_cast<int>(le_.size());
    for (const auto& cone : cones_) rows += static_cast<int>(cone.size());
    trip.clear();
    p.h.resize(rows);
    int r = 0;
    for (const auto& row : le_) {
        check(row.terms);
        for (const auto& [j, v] : row.terms) trip.emplace_back(r, j, v);
        p.h(r++) = row.rhs;
    }
    p.in_groups = le_groups_;
    p.cones.linear = static_cast<int>(le_.size());
    for (std::size_t q = 0; q < cones_.size(); ++q) {
        const int first = r;
        for (const auto& row : cones_[q]) {
            check(row.terms);
            for (const auto& [j, v] : row.terms) trip.emplace_back(r, j, v);
            p.h(r++) = row.rhs;
        }
        p.cones.soc.push_back(static_cast<int>(cones_[q].size()));
        if (!p.in_groups.empty() && p.in_groups.back().tag == cone_tags_[q] &&
            p.in_groups.back().first + p.in_groups.back().count == first) {
            p.in_groups.back().count += r - first;
        } else {
            p.in_groups.push_back({cone_tags_[q], first, r - first});
        }
    }
    p.G.resize(rows, n_);
    p.G.setFromTriplets(trip.begin(), trip.end());
    p.G.makeCompressed();
    return p;
}

const std::vector<double>& Solution::at(const std::string& name) const {
    const auto it = values.find(name);
    if (it == values.end()) throw std::out_of_range("solution has no variable '" + name + "'");
    return it->second;
}

Solution make_solution(const ConicProgram& program, const socp::Result& result, const socp::Settings& settings) {
    Solution s;
    s.status = socp::to_string(result.status);
    s.iterations = result.iterations;
    s.primal_residual = result.primal_residual;
    s.dual_residual = result.dual_residual;
    s.gap = result.gap;
    s.feasibility_tol = settings.feasibility_tol;
    s.gap_tol = settings.gap_tol;
    if (result.status == socp::Status::optimal) {
        s.x = result.x;
        s.objective = result.primal_objective + program.objective_constant;
        for (const auto& b : program.layout) {
            s.values[b.name] = std::vector<double>(result.x.data() + b.offset, result.x.data() + b.offset + b.size);
        }
    }
    return s;
}

namespace {

std::string tag_for(const std::vector<RowGroup>& groups, int row) {
    for (const auto& g : groups) {
        if (row >= g.first && row < g.first + g.count) return g.tag;
    }
    return {};
}

}  // namespace

Violation constraint_violation(const ConicProgram& program, const Eigen::VectorXd& x) {
    Violation v;
    double worst = 0.0;
    if (program.A_eq.rows() > 0) {
        const Eigen::VectorXd r = program.A_eq * x - program.b_eq;
        for (Eigen::Index i = 0; i < r.size(); ++i) {
            if (std::abs(r(i)) > v.equality) v.equality = std::abs(r(i));
            if (std::abs(r(i)) > worst) {
                worst = std::abs(r(i));
                v.worst_tag = tag_for(program.eq_groups, static_cast<int>(i));
            }
        }
    }
    const Eigen::VectorXd u = program.h - program.G * x;
    for (int i = 0; i < program.cones.linear; ++i) {
        const double d = std::max(0.0, -u(i));
        if (d > v.inequality) v.inequality = d;
        if (d > worst) {
            worst = d;
            v.worst_tag = tag_for(program.in_groups, i);
        }
    }
    int off = program.cones.linear;
    for (int dim : program.cones.soc) {
        const double d = std::max(0.0, u.segment(off + 1, dim - 1).norm() - u(off));
        if (d > v.cone) v.cone = d;
        if (d > worst) {
            worst = d;
            v.worst_tag = tag_for(program.in_groups, off);
        }
        off += dim;
    }
    return v;
}

namespace {

json sparse_to_json(const socp::SparseMatrix& m, Eigen::Index row0, Eigen::Index rows) {
    json trip = json::array();
    for (Eigen::Index col = 0; col < m.outerSize(); ++col) {
        for (socp::SparseMatrix::InnerIterator it(m, col); it; ++it) {
            if (it.row() >= row0 && it.row() < row0 + rows) trip.push_back({it.row() - row0, it.col(), it.value()});
        }
    }
    std::sort(trip.begin(), trip.end());
    return {{"rows", rows}, {"cols", m.cols()}, {"triplets", trip}};
}

void append_rows(const json& j, Eigen::Index row_offset, std::vector<Triplet>& out) {
    for (const auto& t : j.at("triplets")) {
        out.emplace_back(static_cast<int>(t.at(0).get<Eigen::Index>() + row_offset), t.at(1).get<int>(),
                         t.at(2).get<double>());
    }
}

json vec_to_json(const Eigen::VectorXd& v, Eigen::Index first, Eigen::Index n) {
    return std::vector<double>(v.data() + first, v.data() + first + n);
}

json groups_to_json(const std::vector<RowGroup>& groups) {
    json out = json::array();
    for (const auto& g : groups) out.push_back({{"tag", g.tag}, {"first", g.first}, {"count", g.count}});
    return out;
}

std::vector<RowGroup> groups_from_json(const json& j) {
    std::vector<RowGroup> out;
    for (const auto& g : j) out.push_back({g.at("tag"), g.at("first"), g.at("count")});
    return out;
}

}  // namespace

json program_to_json(const ConicProgram& p) {
    json vars = json::array();
    for (const auto& b : p.layout) vars.push_back({{"name", b.name}, {"offset", b.offset}, {"size", b.size}});
    json cones = json::array();
    Eigen::Index off = p.cones.linear;
    for (int dim : p.cones.soc) {
        cones.push_back({{"dim", dim}, {"G", sparse_to_json(p.G, off, dim)}, {"h", vec_to_json(p.h, off, dim)}});
        off += dim;
    }
    const auto& m = p.meta;
    return {
        {"format", "mmco-socp"},
        {"version", 1},
        {"convention", "min c'x + constant s.t. A_eq x = b_eq, A_in x <= b_in, h - G x in SOC (first entry bounds the rest)"},
        {"variables", vars},
        {"objective", {{"c", std::vector<double>(p.c.data(), p.c.data() + p.c.size())}, {"constant", p.objective_constant}}},
        {"A_eq", sparse_to_json(p.A_eq, 0, p.A_eq.rows())},
        {"b_eq", vec_to_json(p.b_eq, 0, p.b_eq.size())},
        {"A_in", sparse_to_json(p.G, 0, p.cones.linear)},
        {"b_in", vec_to_json(p.h, 0, p.cones.linear)},
        {"cones", cones},
        {"eq_groups", groups_to_json(p.eq_groups)},
        {"in_groups", groups_to_json(p.in_groups)},
        {"meta",
         {{"dt_s", m.dt},
          {"steps", m.steps},
          {"p_em_max_w", m.p_em_max_w},
          {"m_bar_kg", m.m_bar},
          {"transmission", m.transmission},
          {"d_cycle_m", m.d_cycle_m},
          {"power_unit", m.power_unit},
          {"energy_unit", m.energy_unit},
          {"initial_soe", m.initial_soe}}},
    };
}

ConicProgram program_from_json(const json& j) {
    if (j.value("format", "") != "mmco-socp" || j.value("version", 0) != 1) {
        throw ParseError("not an mmco-socp version 1 document");
    }
    ConicProgram p;
    for (const auto& v : j.at("variables")) p.layout.push_back({v.at("name"), v.at("offset"), v.at("size")});
    const auto c = j.at("objective").at("c").get<std::vector<double>>();
    p.c = Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
    p.objective_constant = j.at("objective").at("constant");
    const auto n = static_cast<Eigen::Index>(c.size());

    std::vector<Triplet> trip;
    const auto b_eq = j.at("b_eq").get<std::vector<double>>();
    append_rows(j.at("A_eq"), 0, trip);
    p.A_eq.resize(static_cast<Eigen::Index>(b_eq.size()), n);
    p.A_eq.setFromTriplets(trip.begin(), trip.end());
    p.A_eq.makeCompressed();
    p.b_eq = Eigen::Map<const Eigen::VectorXd>(b_eq.data(), static_cast<Eigen::Index>(b_eq.size()));

    trip.clear();
    std::vector<double> h = j.at("b_in").get<std::vector<double>>();
    append_rows(j.at("A_in"), 0, trip);
    p.cones.linear = static_cast<int>(h.size());
    for (const auto& cone : j.at("cones")) {
        const int dim = cone.at("dim");
        append_rows(cone.at("G"), static_cast<Eigen::Index>(h.size()), trip);
        const auto hc = cone.at("h").get<std::vector<double>>();
        if (static_cast<int>(hc.size()) != dim) throw ParseError("cone h length does not match its dimension");
        h.insert(h.end(), hc.begin(), hc.end());
        p.cones.soc.push_back(dim);
    }
    p.G.resize(static_cast<Eigen::Index>(h.size()), n);
    p.G.setFromTriplets(trip.begin(), trip.end());
    p.G.makeCompressed();
    p.h = Eigen::Map<const Eigen::VectorXd>(h.data(), static_cast<Eigen::Index>(h.size()));
    if (j.contains("eq_groups")) p.eq_groups = groups_from_json(j.at("eq_groups"));
    if (j.contains("in_groups")) p.in_groups = groups_from_json(j.at("in_groups"));

    const auto& m = j.at("meta");
    p.meta.dt = m.at("dt_s");
    p.meta.steps = m.at("steps");
    p.meta.p_em_max_w = m.at("p_em_max_w");
    p.meta.m_bar = m.at("m_bar_kg");
    p.meta.transmission = m.at("transmission");
    p.meta.d_cycle_m = m.at("d_cycle_m");
    p.meta.power_unit = m.value("power_unit", "kW");
    p.meta.energy_unit = m.value("energy_unit", "kWh");
    p.meta.initial_soe = m.value("initial_soe", "full");
    return p;
}

json solution_to_json(const Solution& s) {
    json values = json::object();
    for (const auto& [name, v] : s.values) values[name] = v;
    return {{"format", "mmco-socp-solution"},
            {"version", 1},
            {"status", s.status},
            {"objective", s.objective},
            {"iterations", s.iterations},
            {"primal_residual", s.primal_residual},
            {"dual_residual", s.dual_residual},
            {"gap", s.gap},
            {"feasibility_tol", s.feasibility_tol},
            {"gap_tol", s.gap_tol},
            {"values", values}};
}

Solution solution_from_json(const json& j, const ConicProgram& program) {
    if (j.value("format", "") != "mmco-socp-solution") throw ParseError("not an mmco-socp-solution document");
    Solution s;
    s.status = j.at("status");
    s.objective = j.at("objective");
    s.iterations = j.value("iterations", 0);
    s.primal_residual = j.value("primal_residual", 0.0);
    s.dual_residual = j.value("dual_residual", 0.0);
    s.gap = j.value("gap", 0.0);
    s.feasibility_tol = j.value("feasibility_tol", 0.0);
    s.gap_tol = j.value("gap_tol", 0.0);
    if (s.optimal()) {
        s.x = Eigen::VectorXd::Zero(program.num_vars());
        for (const auto& b : program.layout) {
            const auto v = j.at("values").at(b.name).get<std::vector<double>>();
            if (static_cast<int>(v.size()) != b.size) throw ParseError("solution size mismatch for '" + b.name + "'");
            for (int k = 0; k < b.size; ++k) s.x(b.offset + k) = v[static_cast<std::size_t>(k)];
            s.values[b.name] = v;
        }
    }
    return s;
}

}  // namespace mmco
