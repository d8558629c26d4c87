#include "hrma/cli_io.hpp"

#include "hrma/hj_solver.hpp"
#include "hrma/ma_measure.hpp"
#include "hrma/moser_flow.hpp"
#include "hrma/strip_harmonic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#ifndef HRMA_VERSION
#define HRMA_VERSION "0.0.0"
#endif

namespace hrma {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string version_string() { return HRMA_VERSION; }

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"lifespan", "ray", "flow", "verify", "obstruction"};
    return names;
}

void ToleranceConfig::scale(double factor) {
    if (!(factor > 0) || !std::isfinite(factor)) throw ConfigError("tolerance scale must be positive and finite");
    for (double* t : {&s0, &affine, &conservation, &caustic, &hj, &graph, &obstruction, &multiplier, &transition}) {
        *t *= factor;
    }
}

// ---------------------------------------------------------------------------
// Configuration schema

namespace {

using Path = std::vector<std::string>;

std::string dotted(const Path& path) {
    std::string out;
    for (const auto& part : path) {
        if (part.front() == '[') {
            out += part;
        } else {
            if (!out.empty()) out += '.';
            out += part;
        }
    }
    return out.empty() ? "<root>" : out;
}

int line_at(const std::string& text, std::size_t pos) {
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(std::min(pos, text.size())), '\n'));
}

class Schema {
  public:
    Schema(const std::string& text, fs::path base) : text_(text), base_(std::move(base)) {}

    /// Line of the last key of `path` present in the text, found by scanning for each key in turn;
    /// a missing key reports its nearest present ancestor, the root object being line 1.
    int line_of(const Path& path) const {
        std::size_t pos = text_.find('{');
        if (pos == std::string::npos) pos = 0;
        for (const auto& part : path) {
            if (part.front() == '[') continue;
            const auto hit = text_.find('"' + part + '"', pos);
            if (hit == std::string::npos) break;
            pos = hit;
        }
        return line_at(text_, pos);
    }

    [[noreturn]] void fail(const Path& path, const std::string& msg) const {
        throw ConfigError(dotted(path) + ": " + msg, line_of(path));
    }

    void allow_keys(const json& obj, const Path& path, std::initializer_list<const char*> keys) const {
        if (!obj.is_object()) fail(path, "expected an object");
        for (const auto& [key, value] : obj.items()) {
            if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; })) {
                Path p = path;
                p.push_back(key);
                fail(p, "unknown key");
            }
        }
    }

    double number(const json& j, const Path& path) const {
        if (!j.is_number()) fail(path, "expected a number");
        const double v = j.get<double>();
        if (!std::isfinite(v)) fail(path, "must be finite");
        return v;
    }

    double positive(const json& j, const Path& path) const {
        const double v = number(j, path);
        if (!(v > 0)) fail(path, "must be positive");
        return v;
    }

    int integer(const json& j, const Path& path, int lo, int hi) const {
        if (!j.is_number_integer()) fail(path, "expected an integer");
        const auto v = j.get<long long>();
        if (v < lo || v > hi) fail(path, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        return static_cast<int>(v);
    }

    std::string string(const json& j, const Path& path) const {
        if (!j.is_string()) fail(path, "expected a string");
        return j.get<std::string>();
    }

    std::string existing_file(const json& j, const Path& path) const {
        fs::path p = string(j, path);
        if (p.is_relative()) p = base_ / p;
        p = p.lexically_normal();
        if (!fs::is_regular_file(p)) fail(path, "file not found: " + p.string());
        return p.string();
    }

    std::vector<double> numbers(const json& j, const Path& path) const {
        if (!j.is_array()) fail(path, "expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], with_index(path, i)));
        return out;
    }

    std::vector<std::vector<double>> points(const json& j, const Path& path) const {
        if (!j.is_array()) fail(path, "expected an array of points");
        std::vector<std::vector<double>> out;
        for (std::size_t i = 0; i < j.size(); ++i) {
            out.push_back(numbers(j[i], with_index(path, i)));
            if (out.back().empty() || out.back().size() > 2) fail(with_index(path, i), "points have one or two coordinates");
            if (out.back().size() != out.front().size()) fail(with_index(path, i), "points must share one dimension");
        }
        return out;
    }

    static Path with_index(const Path& path, std::size_t i) {
        Path p = path;
        p.push_back("[" + std::to_string(i) + "]");
        return p;
    }

    static Path with_key(const Path& path, const char* key) {
        Path p = path;
        p.push_back(key);
        return p;
    }

  private:
    const std::string& text_;
    fs::path base_;
};

void check_increasing_from_zero(const Schema& sc, const std::vector<double>& s, const Path& path) {
    if (s.empty()) return;
    if (s.front() != 0.0) sc.fail(path, "must start at 0");
    for (std::size_t k = 1; k < s.size(); ++k) {
        if (!(s[k] > s[k - 1])) sc.fail(Schema::with_index(path, k), "must be strictly increasing");
    }
}

SourceConfig parse_source(const Schema& sc, const json& j, const Path& path) {
    sc.allow_keys(j, path, {"preset", "shape", "u0", "udot0", "psi0", "psidot0", "dual_shape", "polytope"});
    SourceConfig src;
    const bool preset = j.contains("preset");
    const bool dual = j.contains("u0") || j.contains("udot0");
    const bool primal = j.contains("psi0") || j.contains("psidot0");
    if (preset + dual + primal != 1) sc.fail(path, "give exactly one of preset, (u0, udot0) or (psi0, psidot0)");
    auto key = [&](const char* k) { return Schema::with_key(path, k); };
    if (preset) {
        src.preset = sc.string(j["preset"], key("preset"));
        const auto& ids = preset_ids();
        if (std::find(ids.begin(), ids.end(), src.preset) == ids.end()) sc.fail(key("preset"), "unknown preset '" + src.preset + "'");
        if (j.contains("shape")) src.shape = sc.integer(j["shape"], key("shape"), 0, 100000);
        if (src.shape != 0 && src.shape < 5) sc.fail(key("shape"), "needs 0 (default) or at least 5 nodes");
        for (const char* k : {"dual_shape", "polytope"}) {
            if (j.contains(k)) sc.fail(key(k), "not used with a preset");
        }
        return src;
    }
    if (j.contains("shape")) sc.fail(key("shape"), "only used with a preset");
    if (dual) {
        if (!j.contains("u0") || !j.contains("udot0")) sc.fail(path, "u0 and udot0 must be given together");
        src.u0 = sc.existing_file(j["u0"], key("u0"));
        src.udot0 = sc.existing_file(j["udot0"], key("udot0"));
        if (j.contains("dual_shape")) sc.fail(key("dual_shape"), "only used with psi0/psidot0");
    } else {
        if (!j.contains("psi0") || !j.contains("psidot0")) sc.fail(path, "psi0 and psidot0 must be given together");
        src.psi0 = sc.existing_file(j["psi0"], key("psi0"));
        src.psidot0 = sc.existing_file(j["psidot0"], key("psidot0"));
        if (j.contains("dual_shape")) src.dual_shape = sc.integer(j["dual_shape"], key("dual_shape"), 0, 100000);
    }
    if (!j.contains("polytope")) sc.fail(path, "tabulated data needs a polytope");
    const Path pp = key("polytope");
    const json& poly = j["polytope"];
    sc.allow_keys(poly, pp, {"normals", "offsets"});
    if (!poly.contains("normals") || !poly.contains("offsets")) sc.fail(pp, "needs normals and offsets");
    src.normals = sc.points(poly["normals"], Schema::with_key(pp, "normals"));
    src.offsets = sc.numbers(poly["offsets"], Schema::with_key(pp, "offsets"));
    if (src.normals.size() != src.offsets.size()) sc.fail(Schema::with_key(pp, "offsets"), "one offset per normal");
    if (src.normals.size() < 2) sc.fail(Schema::with_key(pp, "normals"), "a bounded polytope needs at least two facets");
    return src;
}

ToleranceConfig parse_tolerances(const Schema& sc, const json& j, const Path& path) {
    sc.allow_keys(j, path, {"cvx_rel", "s0", "affine", "conservation", "caustic", "hj", "graph", "mass_ratio",
                            "obstruction", "multiplier", "transition", "pw_margin"});
    ToleranceConfig tol;
    const std::pair<const char*, double*> fields[] = {
        {"cvx_rel", &tol.cvx_rel}, {"s0", &tol.s0}, {"affine", &tol.affine}, {"conservation", &tol.conservation},
        {"caustic", &tol.caustic}, {"hj", &tol.hj}, {"graph", &tol.graph},
        {"mass_ratio", &tol.mass_ratio}, {"obstruction", &tol.obstruction}, {"multiplier", &tol.multiplier},
        {"transition", &tol.transition}, {"pw_margin", &tol.pw_margin}};
    for (const auto& [key, slot] : fields) {
        if (j.contains(key)) *slot = sc.positive(j[key], Schema::with_key(path, key));
    }
    if (!(tol.mass_ratio < 1)) sc.fail(Schema::with_key(path, "mass_ratio"), "must be below 1");
    return tol;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const fs::path& base_dir) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("malformed JSON: ") + e.what(), line_at(text, e.byte == 0 ? 0 : e.byte - 1));
    }
    const Schema sc(text, base_dir);
    sc.allow_keys(root, {}, {"command", "source", "grid", "s_grid", "tolerances", "out_dir", "seed_count", "seeds",
                             "verify", "obstruction"});
    ExperimentConfig cfg;
    if (!root.contains("command")) sc.fail({"command"}, "required");
    cfg.command = sc.string(root["command"], {"command"});
    const auto& cmds = command_names();
    if (std::find(cmds.begin(), cmds.end(), cfg.command) == cmds.end()) sc.fail({"command"}, "unknown command '" + cfg.command + "'");
    if (!root.contains("source")) sc.fail({"source"}, "required");
    cfg.source = parse_source(sc, root["source"], {"source"});

    if (root.contains("grid")) {
        const json& g = root["grid"];
        sc.allow_keys(g, {"grid"}, {"x_shape", "x_box"});
        if (g.contains("x_shape")) cfg.grid.x_shape = sc.integer(g["x_shape"], {"grid", "x_shape"}, 0, 100000);
        if (cfg.grid.x_shape != 0 && cfg.grid.x_shape < 5) sc.fail({"grid", "x_shape"}, "needs 0 (default) or at least 5 nodes");
        if (g.contains("x_box")) {
            const Path p{"grid", "x_box"};
            if (!g["x_box"].is_array()) sc.fail(p, "expected an array of [lo, hi] pairs");
            for (std::size_t i = 0; i < g["x_box"].size(); ++i) {
                const auto row = sc.numbers(g["x_box"][i], Schema::with_index(p, i));
                if (row.size() != 2 || !(row[0] < row[1])) sc.fail(Schema::with_index(p, i), "expected [lo, hi] with lo < hi");
                cfg.grid.x_box.push_back({row[0], row[1]});
            }
            if (cfg.grid.x_box.size() > 2) sc.fail(p, "at most two axes");
        }
    }

    if (root.contains("s_grid")) {
        const json& s = root["s_grid"];
        const Path p{"s_grid"};
        if (s.is_object()) {
            sc.allow_keys(s, p, {"max", "count"});
            if (!s.contains("max") || !s.contains("count")) sc.fail(p, "needs max and count");
            const double smax = sc.positive(s["max"], {"s_grid", "max"});
            const int count = sc.integer(s["count"], {"s_grid", "count"}, 2, 1000000);
            cfg.s_grid = uniform_s_grid(smax, count);
        } else {
            cfg.s_grid = sc.numbers(s, p);
            check_increasing_from_zero(sc, cfg.s_grid, p);
            if (cfg.s_grid.size() == 1) sc.fail(p, "needs at least two values");
        }
    }
    if (root.contains("tolerances")) cfg.tol = parse_tolerances(sc, root["tolerances"], {"tolerances"});
    if (root.contains("out_dir")) {
        cfg.out_dir = sc.string(root["out_dir"], {"out_dir"});
        if (cfg.out_dir.empty()) sc.fail({"out_dir"}, "must not be empty");
    }
    if (root.contains("seed_count")) cfg.seed_count = sc.integer(root["seed_count"], {"seed_count"}, 2, 1000000);
    if (root.contains("seeds")) cfg.seeds = sc.points(root["seeds"], {"seeds"});

    if (root.contains("verify")) {
        const json& v = root["verify"];
        sc.allow_keys(v, {"verify"}, {"levels", "mass_x_shape", "mass_s_count", "slices"});
        if (v.contains("levels")) cfg.verify.levels = sc.integer(v["levels"], {"verify", "levels"}, 0, 6);
        if (v.contains("mass_x_shape")) cfg.verify.mass_x_shape = sc.integer(v["mass_x_shape"], {"verify", "mass_x_shape"}, 0, 100000);
        if (v.contains("mass_s_count")) cfg.verify.mass_s_count = sc.integer(v["mass_s_count"], {"verify", "mass_s_count"}, 0, 100000);
        if (cfg.verify.mass_x_shape != 0 && cfg.verify.mass_x_shape < 5) sc.fail({"verify", "mass_x_shape"}, "needs 0 (default) or at least 5 nodes");
        if (cfg.verify.mass_s_count != 0 && cfg.verify.mass_s_count < 3) sc.fail({"verify", "mass_s_count"}, "needs 0 (default) or at least 3 values");
        if (v.contains("slices")) {
            const Path p{"verify", "slices"};
            if (!v["slices"].is_array()) sc.fail(p, "expected an array of file paths");
            for (std::size_t i = 0; i < v["slices"].size(); ++i) cfg.verify.slices.push_back(sc.existing_file(v["slices"][i], Schema::with_index(p, i)));
            if (!cfg.verify.slices.empty() && cfg.verify.slices.size() != cfg.s_grid.size()) {
                sc.fail(p, "needs one slice per entry of s_grid");
            }
        }
    }

    if (root.contains("obstruction")) {
        const json& o = root["obstruction"];
        const Path p{"obstruction"};
        sc.allow_keys(o, p, {"points", "T", "L", "N", "rows", "kernel_rate", "T_sweep"});
        auto key = [&](const char* k) { return Schema::with_key(p, k); };
        auto& ob = cfg.obstruction;
        if (o.contains("points")) ob.points = sc.points(o["points"], key("points"));
        if (o.contains("T")) {
            ob.T = sc.number(o["T"], key("T"));
            if (ob.T < 0) sc.fail(key("T"), "must be non-negative");
        }
        if (o.contains("L")) ob.L = sc.positive(o["L"], key("L"));
        if (o.contains("N")) {
            ob.N = sc.integer(o["N"], key("N"), 64, 1 << 24);
            if ((ob.N & (ob.N - 1)) != 0) sc.fail(key("N"), "must be a power of two");
        }
        if (o.contains("rows")) ob.rows = sc.integer(o["rows"], key("rows"), 3, 100000);
        if (o.contains("kernel_rate")) ob.kernel_rate = sc.positive(o["kernel_rate"], key("kernel_rate"));
        if (o.contains("T_sweep")) {
            ob.T_sweep = sc.numbers(o["T_sweep"], key("T_sweep"));
            for (std::size_t k = 0; k < ob.T_sweep.size(); ++k) {
                if (!(ob.T_sweep[k] > 0) || (k > 0 && !(ob.T_sweep[k] > ob.T_sweep[k - 1]))) {
                    sc.fail(Schema::with_index(key("T_sweep"), k), "must be positive and strictly increasing");
                }
            }
        }
    }
    return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_config(buf.str(), path.parent_path().empty() ? fs::path(".") : path.parent_path());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

ojson config_to_json(const ExperimentConfig& c) {
    ojson root;
    root["command"] = c.command;
    ojson src = ojson::object();
    if (!c.source.preset.empty()) {
        src["preset"] = c.source.preset;
        src["shape"] = c.source.shape;
    } else {
        if (!c.source.u0.empty()) {
            src["u0"] = c.source.u0;
            src["udot0"] = c.source.udot0;
        } else {
            src["psi0"] = c.source.psi0;
            src["psidot0"] = c.source.psidot0;
            src["dual_shape"] = c.source.dual_shape;
        }
        src["polytope"] = {{"normals", c.source.normals}, {"offsets", c.source.offsets}};
    }
    root["source"] = src;
    ojson box = ojson::array();
    for (const auto& b : c.grid.x_box) box.push_back({b[0], b[1]});
    root["grid"] = {{"x_shape", c.grid.x_shape}, {"x_box", box}};
    root["s_grid"] = c.s_grid;
    const auto& t = c.tol;
    root["tolerances"] = {{"cvx_rel", t.cvx_rel},       {"s0", t.s0},           {"affine", t.affine},
                          {"conservation", t.conservation}, {"caustic", t.caustic}, {"hj", t.hj},
                          {"graph", t.graph},           {"mass_ratio", t.mass_ratio},
                          {"obstruction", t.obstruction}, {"multiplier", t.multiplier}, {"transition", t.transition},
                          {"pw_margin", t.pw_margin}};
    root["out_dir"] = c.out_dir;
    root["seed_count"] = c.seed_count;
    root["seeds"] = c.seeds;
    root["verify"] = {{"levels", c.verify.levels}, {"mass_x_shape", c.verify.mass_x_shape},
                      {"mass_s_count", c.verify.mass_s_count}, {"slices", c.verify.slices}};
    const auto& o = c.obstruction;
    root["obstruction"] = {{"points", o.points}, {"T", o.T}, {"L", o.L}, {"N", o.N}, {"rows", o.rows},
                           {"kernel_rate", o.kernel_rate}, {"T_sweep", o.T_sweep}};
    return root;
}

std::string emit_config(const ExperimentConfig& config) { return config_to_json(config).dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// GridFn CSV

void write_gridfn_csv(std::ostream& out, const GridFn& f, const std::string& value_name) {
    ojson header;
    header["dim"] = f.dim();
    ojson box = ojson::array(), shape = ojson::array();
    for (const auto& ax : f.axes()) {
        box.push_back({ax.lo, ax.hi});
        shape.push_back(ax.n);
    }
    header["box"] = box;
    header["shape"] = shape;
    out << "# " << header.dump() << "\n";
    for (int k = 0; k < f.dim(); ++k) out << "x" << (k + 1) << ",";
    out << value_name << "\n";
    for (std::size_t flat = 0; flat < f.size(); ++flat) {
        const Vec x = f.node(flat);
        for (int k = 0; k < f.dim(); ++k) out << format_number(x[k]) << ",";
        out << format_number(f[flat]) << "\n";
    }
}

void write_gridfn_csv(const fs::path& path, const GridFn& f, const std::string& value_name) {
    std::ofstream out(path);
    if (!out) throw DomainError("cannot write " + path.string());
    write_gridfn_csv(out, f, value_name);
}

namespace {

std::vector<double> split_numbers(const std::string& line, const std::string& origin, int lineno) {
    std::vector<double> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        char* end = nullptr;
        const double v = std::strtod(cell.c_str(), &end);
        while (end && (*end == ' ' || *end == '\r')) ++end;
        if (end == cell.c_str() || (end && *end != '\0')) {
            throw ConfigError(origin + ": not a number '" + cell + "'", lineno);
        }
        out.push_back(v);
    }
    return out;
}

}  // namespace

GridFn read_gridfn_csv(std::istream& in, const std::string& origin) {
    std::string line;
    int lineno = 1;
    if (!std::getline(in, line) || line.rfind("#", 0) != 0) throw ConfigError(origin + ": missing '# {json}' header", lineno);
    json header;
    try {
        header = json::parse(line.substr(1));
    } catch (const json::parse_error& e) {
        throw ConfigError(origin + ": malformed header: " + e.what(), lineno);
    }
    Axes axes;
    try {
        const int dim = header.at("dim").get<int>();
        if (dim < 1 || dim > 2) throw ConfigError(origin + ": dim must be 1 or 2", lineno);
        const auto& box = header.at("box");
        const auto& shape = header.at("shape");
        if (static_cast<int>(box.size()) != dim || static_cast<int>(shape.size()) != dim) {
            throw ConfigError(origin + ": box and shape need one entry per axis", lineno);
        }
        for (int k = 0; k < dim; ++k) {
            Axis ax{box[k].at(0).get<double>(), box[k].at(1).get<double>(), shape[k].get<int>()};
            if (!(ax.hi > ax.lo) || ax.n < 4) {
                throw ConfigError(origin + ": axis " + std::to_string(k) + " needs hi > lo and at least 4 nodes", lineno);
            }
            axes.push_back(ax);
        }
    } catch (const json::exception& e) {
        throw ConfigError(origin + ": header schema: " + e.what(), lineno);
    }
    const int dim = static_cast<int>(axes.size());
    ++lineno;
    if (!std::getline(in, line)) throw ConfigError(origin + ": missing column header", lineno);
    if (std::count(line.begin(), line.end(), ',') != dim) throw ConfigError(origin + ": expected " + std::to_string(dim + 1) + " columns", lineno);

    GridFn f(axes, std::vector<double>(axes.size() == 1 ? axes[0].n : static_cast<std::size_t>(axes[0].n) * axes[1].n));
    std::size_t flat = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        if (flat >= f.size()) throw ConfigError(origin + ": more rows than the header shape", lineno);
        const auto row = split_numbers(line, origin, lineno);
        if (static_cast<int>(row.size()) != dim + 1) throw ConfigError(origin + ": expected " + std::to_string(dim + 1) + " columns", lineno);
        const Vec x = f.node(flat);
        for (int k = 0; k < dim; ++k) {
            const double tol = 1e-9 * (axes[k].hi - axes[k].lo);
            if (std::abs(row[k] - x[k]) > tol) throw ConfigError(origin + ": coordinate does not match the grid node", lineno);
        }
        if (!std::isfinite(row[dim])) throw ConfigError(origin + ": value must be finite", lineno);
        f[flat++] = row[dim];
    }
    if (flat != f.size()) throw ConfigError(origin + ": " + std::to_string(flat) + " rows for " + std::to_string(f.size()) + " nodes", lineno);
    return f;
}

GridFn read_gridfn_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    return read_gridfn_csv(in, path.string());
}

CauchyData load_source(const SourceConfig& source, const ConvexTolerances& tol) {
    if (!source.preset.empty()) return make_preset(source.preset, source.shape);
    Polytope P;
    for (std::size_t j = 0; j < source.normals.size(); ++j) {
        P.normals.push_back(Eigen::Map<const Vec>(source.normals[j].data(), static_cast<Eigen::Index>(source.normals[j].size())));
        P.offsets.push_back(source.offsets[j]);
    }
    if (!source.u0.empty()) {
        CauchyData data{"tabulated", P, read_gridfn_csv(fs::path(source.u0)), read_gridfn_csv(fs::path(source.udot0)), {}, {}};
        validate(data, tol);
        return data;
    }
    auto data = to_symplectic(read_gridfn_csv(fs::path(source.psi0)), read_gridfn_csv(fs::path(source.psidot0)), P,
                              source.dual_shape, tol);
    data.label = "tabulated";
    return data;
}

// ---------------------------------------------------------------------------
// Commands

ojson RunManifest::to_json() const {
    ojson j;
    j["tool"] = tool;
    j["version"] = version;
    j["command"] = command;
    j["config"] = config;
    j["wall_clock_s"] = wall_clock_s;
    j["artifacts"] = artifacts;
    ojson cs = ojson::array();
    for (const auto& c : checks) {
        ojson e;
        e["name"] = c.name;
        e["pass"] = c.pass;
        e["value"] = std::isfinite(c.value) ? ojson(c.value) : ojson(format_number(c.value));
        e["tolerance"] = c.tolerance;
        if (!c.detail.empty()) e["detail"] = c.detail;
        cs.push_back(e);
    }
    j["checks"] = cs;
    j["summary"] = summary;
    j["pass"] = pass;
    j["exit_code"] = exit_code;
    if (!error.empty()) j["error"] = error;
    return j;
}

namespace {

ojson jnum(double v) { return std::isfinite(v) ? ojson(v) : ojson(format_number(v)); }

ojson jvec(const Vec& v) {
    ojson a = ojson::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(jnum(v[k]));
    return a;
}

std::string csv_row(std::initializer_list<double> head, const Vec& a = Vec(), const Vec& b = Vec(), std::initializer_list<double> tail = {}) {
    std::string out;
    auto put = [&](double v) {
        if (!out.empty()) out += ',';
        out += format_number(v);
    };
    for (double v : head) put(v);
    for (Eigen::Index k = 0; k < a.size(); ++k) put(a[k]);
    for (Eigen::Index k = 0; k < b.size(); ++k) put(b[k]);
    for (double v : tail) put(v);
    return out + "\n";
}

std::string indexed(const std::string& stem, std::size_t k, const std::string& ext) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "_%03zu", k);
    return stem + buf + ext;
}

/// Artifact bookkeeping for one command invocation.
class Run {
  public:
    explicit Run(const ExperimentConfig& config) : config_(config), dir_(config.out_dir) {
        manifest_.version = version_string();
        manifest_.command = config.command;
        manifest_.config = config_to_json(config);
        manifest_.summary = ojson::object();
        fs::create_directories(dir_);
    }

    void write_text(const std::string& name, const std::string& body) {
        std::ofstream out(dir_ / name, std::ios::binary);
        if (!out) throw DomainError("cannot write " + (dir_ / name).string());
        out << body;
        manifest_.artifacts.push_back(name);
    }

    void write_json(const std::string& name, const ojson& j) { write_text(name, j.dump(2) + "\n"); }

    void write_grid(const std::string& name, const GridFn& f, const std::string& value_name) {
        std::ostringstream out;
        write_gridfn_csv(out, f, value_name);
        write_text(name, out.str());
    }

    void check(const std::string& name, bool pass, double value, double tolerance, const std::string& detail = "") {
        manifest_.checks.push_back({name, pass, value, tolerance, detail});
    }

    ojson& summary() { return manifest_.summary; }
    RunManifest& manifest() { return manifest_; }
    const ExperimentConfig& config() const { return config_; }

  private:
    const ExperimentConfig& config_;
    fs::path dir_;
    RunManifest manifest_;
};

ConvexTolerances convex_tol(const ExperimentConfig& c) {
    ConvexTolerances t;
    t.cvx_rel = c.tol.cvx_rel;
    return t;
}

/// The configured grid, else `count` points on [0, 0.9 T] ([0, 1] when T is infinite).
std::vector<double> choose_s_grid(const ExperimentConfig& c, double lifespan, int count) {
    if (!c.s_grid.empty()) return c.s_grid;
    return uniform_s_grid(std::isfinite(lifespan) ? 0.9 * lifespan : 1.0, count);
}

/// Difference-in-s checks need a fine s grid; 2-D slices are costlier.
int fine_s_count(int dim) { return dim == 1 ? 451 : 181; }

Axes choose_x_axes(const ExperimentConfig& c, const CauchyData& data, const std::vector<double>& s_grid) {
    const int shape = c.grid.x_shape > 0 ? c.grid.x_shape : (data.dim() == 1 ? 401 : 41);
    if (c.grid.x_box.empty()) return default_x_box(data, s_grid, shape);
    if (static_cast<int>(c.grid.x_box.size()) != data.dim()) throw DomainError("grid.x_box dimension differs from the data");
    Axes axes;
    for (const auto& b : c.grid.x_box) axes.push_back({b[0], b[1], shape});
    return axes;
}

std::vector<Vec> to_points(const std::vector<std::vector<double>>& pts, int dim, const char* what) {
    std::vector<Vec> out;
    for (const auto& p : pts) {
        if (static_cast<int>(p.size()) != dim) throw DomainError(std::string(what) + " dimension differs from the data");
        out.push_back(Eigen::Map<const Vec>(p.data(), dim));
    }
    return out;
}

RayOptions ray_options(const ExperimentConfig& c) {
    RayOptions opt;
    opt.admissibility.tol = convex_tol(c);
    return opt;
}

FlowOptions flow_options(const ExperimentConfig& c) {
    FlowOptions opt;
    opt.tol = convex_tol(c);
    return opt;
}

/// Runs `body`, timing it and mapping failures onto exit codes; always writes manifest.json.
RunManifest execute(const ExperimentConfig& config, const std::function<void(Run&)>& body) {
    Run run(config);
    const auto start = std::chrono::steady_clock::now();
    auto& m = run.manifest();
    try {
        body(run);
        m.pass = std::all_of(m.checks.begin(), m.checks.end(), [](const CheckResult& c) { return c.pass; });
        m.exit_code = m.pass ? kExitPass : kExitCheckFailure;
    } catch (const ConfigError&) {
        throw;
    } catch (const NumericalError& e) {
        m.pass = false;
        m.exit_code = kExitNumericalFailure;
        m.error = e.what();
    } catch (const DomainError& e) {
        m.pass = false;
        m.exit_code = kExitConfigError;
        m.error = e.what();
    } catch (const std::exception& e) {
        m.pass = false;
        m.exit_code = kExitNumericalFailure;
        m.error = e.what();
    }
    m.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    m.artifacts.push_back("manifest.json");
    std::ofstream out(fs::path(config.out_dir) / "manifest.json", std::ios::binary);
    out << m.to_json().dump(2) << "\n";
    return m;
}

void require_command(const ExperimentConfig& c, const char* name) {
    if (c.command != name) throw ConfigError("config command is '" + c.command + "', expected '" + name + "'");
}

/// max over nodes of |slice0 - psi0| where the primal data is known independently of the ray.
std::optional<double> s0_deviation(const CauchyData& data, const std::string& preset, const GridFn& slice0) {
    double dev = 0.0;
    if (!preset.empty()) {
        const auto& spec = preset_spec(preset);
        for (std::size_t j = 0; j < slice0.size(); ++j) dev = std::max(dev, std::abs(slice0[j] - spec.psi0(slice0.node(j))));
        return dev;
    }
    if (!data.psi0) return std::nullopt;
    std::size_t used = 0;
    for (std::size_t j = 0; j < slice0.size(); ++j) {
        const Vec x = slice0.node(j);
        if (!data.psi0->contains(x, 1.0)) continue;
        dev = std::max(dev, std::abs(slice0[j] - data.psi0->value(x)));
        ++used;
    }
    if (used == 0) return std::nullopt;
    return dev;
}

/// mass.json body and the ma_mass check: every refinement must shrink the mass by mass_ratio.
void record_mass_study(Run& run, ojson& mass, const WeakSolutionReport& weak, double mass_ratio) {
    ojson level_json = ojson::array();
    double worst_ratio = 0.0;
    bool all_zero = true;
    for (std::size_t k = 0; k < weak.levels.size(); ++k) {
        const auto& L = weak.levels[k];
        level_json.push_back({{"h", L.h}, {"ds", L.ds}, {"total_mass", L.total_mass}, {"max_cell", L.max_cell}});
        all_zero = all_zero && L.total_mass == 0.0;
        if (k > 0) {
            const double prev = weak.levels[k - 1].total_mass;
            worst_ratio = std::max(worst_ratio, prev > 0 ? L.total_mass / prev : (L.total_mass > 0 ? INFINITY : 0.0));
        }
    }
    mass["levels"] = level_json;
    mass["order_estimate"] = jnum(weak.order_estimate);
    run.check("ma_mass", all_zero || worst_ratio <= mass_ratio, worst_ratio, mass_ratio,
              "largest ratio of consecutive refinement masses");
}

}  // namespace

RunManifest cmd_lifespan(const ExperimentConfig& config) {
    require_command(config, "lifespan");
    return execute(config, [](Run& run) {
        const auto& c = run.config();
        const auto data = load_source(c.source, convex_tol(c));
        const auto rep = lifespan_report(data, convex_tol(c));
        ojson out;
        out["T_cvx"] = rep.infinite ? ojson("infinite") : ojson(rep.lifespan);
        out["infinite"] = rep.infinite;
        out["argmin"] = rep.infinite ? ojson(nullptr) : jvec(rep.argmin);
        out["message"] = rep.infinite ? "infinite (no obstruction found)" : "convexity breaks down at the lifespan";
        run.write_json("lifespan.json", out);
        if (!c.source.preset.empty()) {
            const double ref = preset_spec(c.source.preset).lifespan;
            if (std::isinf(ref) || rep.infinite) {
                run.check("preset_lifespan", std::isinf(ref) == rep.infinite, rep.lifespan, 0.0,
                          "closed-form lifespan " + format_number(ref));
            } else {
                const double rel = std::abs(rep.lifespan - ref) / ref;
                run.check("preset_lifespan", rel <= c.tol.caustic, rel, c.tol.caustic, "closed-form lifespan " + format_number(ref));
            }
        }
        run.summary() = out;
    });
}

RunManifest cmd_ray(const ExperimentConfig& config) {
    require_command(config, "ray");
    return execute(config, [](Run& run) {
        const auto& c = run.config();
        const auto data = load_source(c.source, convex_tol(c));
        const double T = convex_lifespan(data, convex_tol(c));
        const auto s = choose_s_grid(c, T, 10);
        const auto ray = legendre_ray(data, s, choose_x_axes(c, data, s), ray_options(c));
        const auto lift = hcma_lift(ray);
        for (std::size_t k = 0; k < s.size(); ++k) run.write_grid(indexed("slice", k, ".csv"), ray.slices[k], "psi");
        for (std::size_t k = 0; k < lift.size(); ++k) run.write_grid(indexed("lift", k, ".csv"), lift[k], "phi");

        ojson out;
        out["lifespan"] = jnum(T);
        out["s_grid"] = s;
        ojson flags = ojson::array(), margins = ojson::array(), covers = ojson::array();
        std::size_t bad_inside = 0;
        for (std::size_t k = 0; k < s.size(); ++k) {
            flags.push_back(static_cast<bool>(ray.admissible[k]));
            margins.push_back(jnum(ray.reports[k].min_margin));
            covers.push_back(ray.reports[k].covers_polytope);
            if (s[k] < T && !ray.admissible[k]) ++bad_inside;
        }
        out["admissible"] = flags;
        out["min_margin"] = margins;
        out["covers_polytope"] = covers;
        run.write_json("ray.json", out);

        run.check("admissible_before_lifespan", bad_inside == 0, static_cast<double>(bad_inside), 0.0,
                  "inadmissible slices with s < lifespan");
        if (const auto dev = s0_deviation(data, c.source.preset, ray.slices.front())) {
            const double h = ray.slices.front().min_step();
            run.check("s0_matches_psi0", *dev <= c.tol.s0 * h * h, *dev, c.tol.s0 * h * h, "bound s0 * h_x^2");
        }
        run.summary()["lifespan"] = jnum(T);
        run.summary()["admissible"] = flags;
    });
}

RunManifest cmd_flow(const ExperimentConfig& config) {
    require_command(config, "flow");
    return execute(config, [](Run& run) {
        const auto& c = run.config();
        const auto ctol = convex_tol(c);
        const auto data = load_source(c.source, ctol);
        const int dim = data.dim();
        const double T = convex_lifespan(data, ctol);
        const auto s = choose_s_grid(c, T, fine_s_count(dim));
        const auto fopt = flow_options(c);
        const auto seeds = c.seeds.empty() ? primal_samples(data, c.seed_count) : to_points(c.seeds, dim, "seeds");

        // Leaves, with a least-squares affine fit per coordinate as the straightness check.
        const auto lv = leaves(data, seeds, s.back(), fopt);
        std::string leaf_csv = dim == 1 ? "seed_id,s,x_1\n" : "seed_id,s,x_1,x_2\n";
        double affine_dev = 0.0;
        for (std::size_t i = 0; i < lv.size(); ++i) {
            std::vector<double> ss;
            std::vector<Vec> xs;
            for (double sv : s) {
                if (sv > lv[i].s_max) break;
                ss.push_back(sv);
                xs.push_back(lv[i].position(sv));
                leaf_csv += csv_row({static_cast<double>(i), sv}, xs.back());
            }
            if (ss.size() < 3) continue;
            const double n = static_cast<double>(ss.size());
            double sm = 0, ss2 = 0;
            for (double v : ss) sm += v, ss2 += v * v;
            for (int k = 0; k < dim; ++k) {
                double xm = 0, sx = 0;
                for (std::size_t r = 0; r < ss.size(); ++r) xm += xs[r][k], sx += ss[r] * xs[r][k];
                const double slope = (n * sx - sm * xm) / (n * ss2 - sm * sm);
                const double icpt = (xm - slope * sm) / n;
                for (std::size_t r = 0; r < ss.size(); ++r) affine_dev = std::max(affine_dev, std::abs(xs[r][k] - icpt - slope * ss[r]));
            }
        }
        run.write_text("leaves.csv", leaf_csv);
        run.check("leaf_affine", affine_dev <= c.tol.affine, affine_dev, c.tol.affine);

        std::string map_csv = dim == 1 ? "s,x_in_1,x_out_1,jac_det\n" : "s,x_in_1,x_in_2,x_out_1,x_out_2,jac_det\n";
        for (double sv : s) {
            const auto fm = flow_map(data, sv, seeds, fopt);
            for (std::size_t i = 0; i < fm.points.size(); ++i) map_csv += csv_row({sv}, fm.points[i], fm.images[i], {fm.jac_det[i]});
        }
        run.write_text("flow_map.csv", map_csv);

        const int n = dim == 1 ? c.seed_count : std::max(3, static_cast<int>(std::lround(std::sqrt(c.seed_count))));
        const auto mesh = seed_mesh(data, n);
        const auto strip = trace_characteristics(data, mesh, s, dim == 1 ? std::array<int, 2>{n, 1} : std::array<int, 2>{n, n}, ctol);
        std::string ch_csv = dim == 1 ? "seed_id,s,x_1,z,p_sigma,p_xi_1\n" : "seed_id,s,x_1,x_2,z,p_sigma,p_xi_1,p_xi_2\n";
        for (std::size_t i = 0; i < strip.size(); ++i) {
            for (double sv : s) {
                std::string row = csv_row({static_cast<double>(i), sv}, strip.position(i, sv), Vec(), {strip.value(i, sv), strip.p_sigma[i]});
                row.pop_back();
                row += "," + csv_row({}, strip.p_xi[i]);
                ch_csv += row;
            }
        }
        run.write_text("characteristics.csv", ch_csv);

        const auto caustic = caustic_time(strip);
        ojson cj;
        cj["first_crossing_s"] = jnum(caustic.first_crossing_s);
        cj["infinite"] = caustic.infinite;
        cj["crossing_pair"] = {caustic.crossing_pair[0], caustic.crossing_pair[1]};
        cj["location"] = caustic.infinite ? ojson(nullptr) : jvec(caustic.location);
        cj["resolution_bound"] = jnum(caustic.resolution_bound);
        run.write_json("caustic.json", cj);
        if (std::isinf(T) || caustic.infinite) {
            run.check("caustic_matches_lifespan", std::isinf(T) == caustic.infinite, caustic.first_crossing_s, 0.0,
                      "lifespan " + format_number(T));
        } else {
            const double rel = std::abs(caustic.first_crossing_s - T) / T;
            run.check("caustic_matches_lifespan", rel <= c.tol.caustic, rel, c.tol.caustic, "lifespan " + format_number(T));
        }

        // Conservation on the part of the grid at most 0.9 T.
        std::vector<double> sc;
        for (double sv : s) {
            if (sv <= 0.9 * T) sc.push_back(sv);
        }
        if (sc.size() < 3) sc = uniform_s_grid(std::isfinite(T) ? 0.9 * T : 1.0, fine_s_count(dim));
        const auto ray = legendre_ray(data, sc, choose_x_axes(c, data, sc), ray_options(c));
        const auto cons = conservation_check(ray, seeds, fopt);
        ojson co;
        co["s_grid"] = sc;
        co["sup_error"] = jnum(cons.sup_error);
        co["sup_error_dual"] = jnum(cons.sup_error_dual);
        co["route_gap"] = jnum(cons.route_gap);
        co["worst_s"] = cons.worst_s;
        co["worst_point"] = jvec(cons.worst_point);
        co["samples_used"] = cons.samples_used;
        co["samples_skipped"] = cons.samples_skipped;
        run.write_json("conservation.json", co);
        run.check("conservation", cons.sup_error <= c.tol.conservation, cons.sup_error, c.tol.conservation);

        run.summary()["lifespan"] = jnum(T);
        run.summary()["caustic_time"] = jnum(caustic.first_crossing_s);
        run.summary()["conservation_sup_error"] = jnum(cons.sup_error);
    });
}

RunManifest cmd_verify(const ExperimentConfig& config) {
    require_command(config, "verify");
    return execute(config, [](Run& run) {
        const auto& c = run.config();
        const auto ctol = convex_tol(c);
        const auto data = load_source(c.source, ctol);
        const double T = convex_lifespan(data, ctol);
        const auto s = choose_s_grid(c, T, fine_s_count(data.dim()));

        RaySolution ray;
        const bool supplied = !c.verify.slices.empty();
        ojson mass = ojson::object();
        if (supplied) {
            ray.data = data;
            ray.s_grid = s;
            ray.lifespan = T;
            for (const auto& path : c.verify.slices) ray.slices.push_back(read_gridfn_csv(fs::path(path)));
            for (const auto& sl : ray.slices) {
                if (!sl.same_geometry(ray.slices.front())) throw ConfigError("verify.slices must share one grid");
            }
            ray.admissible.assign(s.size(), true);
            ray.reports.resize(s.size());
            // The refinement study runs on the supplied data itself, coarsened by powers of two.
            const auto st = spacetime_from_ray(ray);
            const int feasible = max_coarsening_levels(st);
            const int levels = std::min(c.verify.levels > 0 ? c.verify.levels : 3, feasible);
            if (levels < 2) throw ConfigError("verify.slices: the (s, x) grid must coarsen by 2 at least once");
            try {
                record_mass_study(run, mass, mass_refinement(st, levels, ctol), c.tol.mass_ratio);
            } catch (const ConvexityError& e) {
                mass["levels"] = ojson::array();
                mass["order_estimate"] = nullptr;
                run.check("ma_mass", false, e.second_difference(), 0.0, e.what());
            }
        } else {
            ray = legendre_ray(data, s, choose_x_axes(c, data, s), ray_options(c));
            const bool one_d = data.dim() == 1;
            const int levels = c.verify.levels > 0 ? c.verify.levels : (one_d ? 3 : 2);
            const int mass_x = c.verify.mass_x_shape > 0 ? c.verify.mass_x_shape : (one_d ? 81 : 41);
            const int mass_s = c.verify.mass_s_count > 0 ? c.verify.mass_s_count : 37;
            if (levels < 2) throw ConfigError("verify.levels must be at least 2 for a computed ray");
            // The refinement study starts from its own coarse ray over the same s range.
            const auto base_s = uniform_s_grid(s.back(), mass_s);
            const auto base = legendre_ray(data, base_s, default_x_box(data, base_s, mass_x), ray_options(c));
            record_mass_study(run, mass, weak_solution_check(base, levels, ray_options(c), ctol), c.tol.mass_ratio);
        }
        run.write_json("mass.json", mass);

        ojson out;
        try {
            const auto g = c.seeds.empty() ? gradient_graph_check(ray, flow_options(c))
                                           : gradient_graph_check(ray, to_points(c.seeds, data.dim(), "seeds"), flow_options(c));
            out["graph"] = {{"sup_deviation", jnum(g.sup_deviation)}, {"worst_s", g.worst_s}, {"worst_x", jvec(g.worst_x)},
                            {"samples_used", g.samples_used}, {"samples_skipped", g.samples_skipped}};
            run.check("gradient_graph", g.sup_deviation <= c.tol.graph, g.sup_deviation, c.tol.graph);
        } catch (const DomainError& e) {
            out["graph"] = {{"error", e.what()}};
            run.check("gradient_graph", false, INFINITY, c.tol.graph, e.what());
        }
        try {
            HJOptions hopt;
            hopt.tol = ctol;
            const auto h = hj_residual(ray.s_grid, ray.slices, data, hopt);
            out["hj"] = {{"sup_residual", jnum(h.sup_residual)}, {"worst_s", h.worst_s}, {"worst_x", jvec(h.worst_x)},
                         {"evaluated", h.evaluated}, {"flat_nodes", h.flat_nodes}, {"excluded", h.excluded}};
            run.check("hj_residual", h.sup_residual <= c.tol.hj, h.sup_residual, c.tol.hj);
        } catch (const DomainError& e) {
            out["hj"] = {{"error", e.what()}};
            run.check("hj_residual", false, INFINITY, c.tol.hj, e.what());
        }
        out["supplied"] = supplied;
        out["s_grid"] = s;
        run.write_json("verify.json", out);
        run.summary()["supplied"] = supplied;
        run.summary()["lifespan"] = jnum(T);
    });
}

namespace {

std::string spectrum_csv(const LineFn& f) {
    const auto sp = spectrum(f);
    std::string out = "xi,re,im,log_abs\n";
    for (std::size_t k = 0; k < sp.xi.size(); ++k) {
        const auto z = sp.coeffs[k];
        out += csv_row({sp.xi[k], z.real(), z.imag(), std::log(std::abs(z))});
    }
    return out;
}

ojson pw_json(const PWResult& r) {
    return {{"fitted_rate", jnum(r.fitted_rate)}, {"band", {r.band_lo, r.band_hi}}, {"pass", r.pass}, {"margin", r.margin},
            {"super_exponential", r.super_exponential}, {"vanishing", r.vanishing}};
}

}  // namespace

RunManifest cmd_obstruction(const ExperimentConfig& config) {
    require_command(config, "obstruction");
    return execute(config, [](Run& run) {
        const auto& c = run.config();
        const auto& ob = c.obstruction;
        const auto ctol = convex_tol(c);
        const auto data = load_source(c.source, ctol);
        const int dim = data.dim();
        const double T_cvx = convex_lifespan(data, ctol);
        const double T = ob.T > 0 ? ob.T : (std::isfinite(T_cvx) ? T_cvx : 1.0);
        const auto N = static_cast<std::size_t>(ob.N);
        PWOptions popt;
        popt.margin = c.tol.pw_margin;

        std::vector<Vec> points;
        if (!ob.points.empty()) {
            points = to_points(ob.points, dim, "obstruction.points");
        } else {
            const auto range = slope_range(data.u0);
            for (double f : dim == 1 ? std::vector<double>{0.3, 0.5, 0.7} : std::vector<double>{0.5}) {
                Vec z(dim);
                for (int k = 0; k < dim; ++k) z[k] = range[k][0] + f * (range[k][1] - range[k][0]);
                points.push_back(z);
            }
        }
        const auto rows = uniform_s_grid(T, ob.rows);

        ojson leaves_json = ojson::array();
        double worst_variation = 0.0, worst_identity = 0.0;
        bool centred_pass = true;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const auto leaf = toric_leaf_solution(data, points[i], T, rows, ob.L, N);
            std::string csv = "s,chi\n";
            for (std::size_t k = 0; k < rows.size(); ++k) csv += csv_row({rows[k], leaf.chi.at(k, 0)});
            run.write_text(indexed("leaf", i, ".csv"), csv);

            LineFn centred = leaf.q;
            double scale = 0.0;
            for (std::size_t j = 0; j < N; ++j) {
                scale = std::max({scale, std::abs(leaf.q.values[j]), std::abs(leaf.p.values[j])});
                centred.values[j] -= leaf.p.values[j] + leaf.obstruction;
            }
            // Coefficients below the worst-case round-off of the centring sum count as zero.
            PWOptions copt = popt;
            copt.abs_floor = std::max(popt.abs_floor, 2 * ob.L * static_cast<double>(N) * std::numeric_limits<double>::epsilon() * scale);
            const auto pw = pw_test(centred, T, copt);
            centred_pass = centred_pass && pw.pass;
            const double var = leaf.obstruction_variation / std::max(1.0, std::abs(leaf.slope));
            worst_variation = std::max(worst_variation, var);

            // d_s chi(0, .) = -A_T chi(0, .) + (D / sinh TD) chi(T, .).
            const auto lhs = multiplier_AT(leaf.chi.row(0), T);
            const auto rhs = multiplier_DsinhTD(leaf.chi.row(rows.size() - 1), T);
            for (std::size_t j = 0; j < N; ++j) worst_identity = std::max(worst_identity, std::abs(-lhs.values[j] + rhs.values[j] - leaf.slope));

            leaves_json.push_back({{"point", jvec(points[i])}, {"dual_point", jvec(leaf.dual_point)}, {"slope", leaf.slope},
                                   {"obstruction", leaf.obstruction}, {"obstruction_variation", leaf.obstruction_variation},
                                   {"trivial", leaf.trivial}, {"pw_centred", pw_json(pw)}});
        }
        run.check("obstruction_constant", worst_variation <= c.tol.obstruction, worst_variation, c.tol.obstruction,
                  "sup |q - p - mean| relative to max(1, |slope|)");
        run.check("centred_obstruction_pw", centred_pass, centred_pass ? 0.0 : 1.0, 0.0, "q - p - mean passes the Paley-Wiener test at T");

        // Identity on a non-trivial pair: finite-difference normal derivative of the strip extension.
        const auto a = LineFn::sample([](double t) { return std::exp(-t * t / 2); }, ob.L, N);
        const auto b = LineFn::sample([](double t) { return 0.5 * std::exp(-(t - 1) * (t - 1)); }, ob.L, N);
        const double ds = T / 400;
        const auto u = widder_extend(a, b, T, {0.0, ds, 2 * ds});
        const auto at = multiplier_AT(a, T), db = multiplier_DsinhTD(b, T);
        for (std::size_t j = 0; j < N; ++j) {
            if (std::abs(a.t(j)) > ob.L / 2) continue;
            const double d = (-3 * u.at(0, j) + 4 * u.at(1, j) - u.at(2, j)) / (2 * ds);
            worst_identity = std::max(worst_identity, std::abs(d - (-at.values[j] + db.values[j])));
        }
        run.check("multiplier_identity", worst_identity <= c.tol.multiplier, worst_identity, c.tol.multiplier);

        // Poisson-kernel family: pass for T below the decay rate, fail above.
        const double rate = ob.kernel_rate;
        auto sweep = ob.T_sweep;
        if (sweep.empty()) {
            for (int k = 5; k <= 100; ++k) sweep.push_back(0.02 * k * rate);
        }
        const auto kernel = LineFn::sample([&](double t) { return rate / (3.14159265358979323846 * (rate * rate + t * t)); }, ob.L, N);
        const auto gauss = LineFn::sample([](double t) { return std::exp(-t * t / 2); }, ob.L, N);
        run.write_text("spectrum_kernel.csv", spectrum_csv(kernel));
        run.write_text("spectrum_gaussian.csv", spectrum_csv(gauss));
        std::string sweep_csv = "T,kernel_pass,kernel_rate,gaussian_pass\n";
        double last_pass = NAN, first_fail = NAN;
        bool monotone = true, gauss_all = true;
        PWResult kernel_pw;
        for (double Tk : sweep) {
            const auto kp = pw_test(kernel, Tk, popt);
            const auto gp = pw_test(gauss, Tk, popt);
            kernel_pw = kp;
            gauss_all = gauss_all && gp.pass;
            if (kp.pass) {
                if (!std::isnan(first_fail)) monotone = false;
                last_pass = Tk;
            } else if (std::isnan(first_fail)) {
                first_fail = Tk;
            }
            sweep_csv += csv_row({Tk, kp.pass ? 1.0 : 0.0, kp.fitted_rate, gp.pass ? 1.0 : 0.0});
        }
        run.write_text("sweep.csv", sweep_csv);
        const double transition = std::isnan(last_pass) || std::isnan(first_fail) ? NAN : 0.5 * (last_pass + first_fail);
        const double rel = std::isnan(transition) ? INFINITY : std::abs(transition - rate) / rate;
        run.check("kernel_transition", monotone && rel <= c.tol.transition, rel, c.tol.transition,
                  "pass/fail transition " + format_number(transition) + " against rate " + format_number(rate));
        run.check("gaussian_control", gauss_all, gauss_all ? 0.0 : 1.0, 0.0, "Gaussian passes every T in the sweep");

        ojson out;
        out["T"] = T;
        out["leaves"] = leaves_json;
        out["kernel"] = {{"rate", rate}, {"transition", jnum(transition)}, {"monotone", monotone}, {"pw_last", pw_json(kernel_pw)}};
        out["gaussian_all_pass"] = gauss_all;
        run.write_json("obstruction.json", out);
        run.summary()["T"] = T;
        run.summary()["transition"] = jnum(transition);
    });
}

RunManifest run_command(const ExperimentConfig& config) {
    if (config.command == "lifespan") return cmd_lifespan(config);
    if (config.command == "ray") return cmd_ray(config);
    if (config.command == "flow") return cmd_flow(config);
    if (config.command == "verify") return cmd_verify(config);
    if (config.command == "obstruction") return cmd_obstruction(config);
    throw ConfigError("unknown command '" + config.command + "'");
}

}  // namespace hrma
