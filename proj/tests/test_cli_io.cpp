#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hrma/cli_io.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

using namespace hrma;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "hrma_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

ExperimentConfig preset_config(const std::string& command, const std::string& preset, const fs::path& out) {
    ExperimentConfig c;
    c.command = command;
    c.source.preset = preset;
    c.out_dir = out.string();
    return c;
}

const CheckResult& find_check(const RunManifest& m, const std::string& name) {
    for (const auto& c : m.checks) {
        if (c.name == name) return c;
    }
    FAIL("missing check " << name);
    throw std::logic_error("unreachable");
}

int line_of_error(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.line();
    }
    return -1;
}

// Oracle: dense scan of closed-form second derivatives, T = min of -u0'' / udot0'' where udot0'' < 0.
double dense_lifespan_scan(const PresetSpec& spec) {
    const Axis& ax = spec.grid[0];
    const double h = 1e-4;
    double T = INFINITY;
    for (int i = 1; i < 20000; ++i) {
        const double y = ax.lo + (ax.hi - ax.lo) * i / 20000.0;
        auto d2 = [&](const ScalarFn& f) {
            return (f(Vec::Constant(1, y + h)) - 2 * f(Vec::Constant(1, y)) + f(Vec::Constant(1, y - h))) / (h * h);
        };
        const double b = d2(spec.udot0);
        if (b < 0) T = std::min(T, -d2(spec.u0) / b);
    }
    return T;
}

}  // namespace

TEST_CASE("format_number uses 17 significant digits") {
    CHECK(format_number(0.1) == "0.10000000000000001");
    CHECK(format_number(1.0) == "1");
    CHECK(format_number(INFINITY) == "inf");
    CHECK(format_number(-INFINITY) == "-inf");
    CHECK(format_number(NAN) == "nan");
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int k = 0; k < 200; ++k) {
        const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
        CHECK(std::strtod(format_number(v).c_str(), nullptr) == v);
    }
}

TEST_CASE("GridFn CSV") {
    SUBCASE("1-D and 2-D round trip bit for bit") {
        const auto f1 = GridFn::sample({{-0.3, 1.7, 33}}, [](const Vec& x) { return std::exp(x[0]) / 3; });
        const auto f2 = GridFn::sample({{0.0, 1.0, 7}, {-2.0, 0.5, 9}}, [](const Vec& x) { return std::sin(x[0]) * x[1]; });
        for (const GridFn* f : {&f1, &f2}) {
            std::stringstream buf;
            write_gridfn_csv(buf, *f, "u");
            const auto back = read_gridfn_csv(buf);
            REQUIRE(back.same_geometry(*f));
            for (std::size_t k = 0; k < f->size(); ++k) CHECK(back[k] == (*f)[k]);
        }
        std::stringstream buf;
        write_gridfn_csv(buf, f2, "u");
        std::string header, columns;
        std::getline(buf, header);
        std::getline(buf, columns);
        CHECK(header == R"(# {"dim":2,"box":[[0.0,1.0],[-2.0,0.5]],"shape":[7,9]})");
        CHECK(columns == "x1,x2,u");
    }
    SUBCASE("errors carry the line number") {
        std::stringstream good("# {\"dim\":1,\"box\":[[0,1]],\"shape\":[5]}\nx1,v\n0,1\n0.25,2\n0.5,2\n0.75,2\n1,3\n");
        CHECK(read_gridfn_csv(good).size() == 5);
        auto line_of = [](const std::string& text) {
            std::stringstream in(text);
            try {
                read_gridfn_csv(in);
            } catch (const ConfigError& e) {
                return e.line();
            }
            return -1;
        };
        const std::string head = "# {\"dim\":1,\"box\":[[0,1]],\"shape\":[5]}\nx1,v\n0,1\n";
        CHECK(line_of(head + "0.3,2\n0.5,2\n0.75,2\n1,3\n") == 4);
        CHECK(line_of(head + "0.25,2\n0.5,abc\n0.75,2\n1,3\n") == 5);
        CHECK(line_of(head + "0.25,2\n0.5,inf\n0.75,2\n1,3\n") == 5);
        CHECK(line_of(head + "0.25,2\n0.5,2\n0.75,2\n") == 6);
        CHECK(line_of(head + "0.25,2\n0.5,2\n0.75,2\n1,3\n1.25,3\n") == 8);
        CHECK(line_of("# {\"dim\":1,\"box\":[[0,1]],\"shape\":[3]}\nx1,v\n") == 1);
        CHECK(line_of("x1,v\n0,1\n") == 1);
        CHECK(line_of("# {\"dim\":3,\"box\":[[0,1]],\"shape\":[3]}\nx1,v\n") == 1);
    }
}

TEST_CASE("config parsing") {
    SUBCASE("defaults and s_grid forms") {
        const auto c = parse_config(R"({"command": "ray", "source": {"preset": "quartic"}})");
        CHECK(c.command == "ray");
        CHECK(c.source.preset == "quartic");
        CHECK(c.s_grid.empty());
        CHECK(c.tol == ToleranceConfig{});
        const auto g = parse_config(R"({"command": "ray", "source": {"preset": "quartic"}, "s_grid": {"max": 0.5, "count": 6}})");
        REQUIRE(g.s_grid.size() == 6);
        CHECK(g.s_grid.front() == 0.0);
        CHECK(g.s_grid.back() == doctest::Approx(0.5).epsilon(1e-15));
    }
    SUBCASE("schema violations report the offending line") {
        CHECK(line_of_error("{\n  \"command\": \"ray\",\n  \"source\": {\"preset\": \"quartic\"},\n  \"tolerances\": {\n    \"hj\": -1\n  }\n}") == 5);
        CHECK(line_of_error("{\n  \"command\": \"ray\",\n  \"source\": {\"preset\": \"nope\"}\n}") == 3);
        CHECK(line_of_error("{\n  \"command\": \"ray\",\n  \"source\": {\"preset\": \"quartic\"},\n  \"colour\": 1\n}") == 4);
        CHECK(line_of_error("{\n  \"command\": \"ray\",\n  \"source\": {\"preset\": \"quartic\"},\n  \"s_grid\": [0.1, 0.2]\n}") == 4);
        CHECK(line_of_error("{\n  \"command\": \"ray\",\n  \"source\": {\"preset\": \"quartic\"},\n  \"s_grid\": [0, 0.2, 0.2]\n}") == 4);
        CHECK(line_of_error("{\n  \"command\": \"ray\",\n  \"source\": {\"u0\": \"missing.csv\", \"udot0\": \"missing.csv\"}\n}") == 3);
        CHECK(line_of_error("{\n  \"command\": \"ray\",\n\n  \"source\": {\"preset\": \"quartic\"\n}") == 5);
        CHECK(line_of_error("\n{\"source\": {\"preset\": \"quartic\"}}") == 2);
        CHECK_THROWS_WITH_AS(parse_config(R"({"command": "fly", "source": {"preset": "quartic"}})"),
                             "line 1: command: unknown command 'fly'", ConfigError);
        CHECK_THROWS_AS(parse_config(R"({"command": "ray", "source": {"preset": "quartic", "u0": "a.csv"}})"), ConfigError);
        CHECK_THROWS_AS(parse_config(R"({"command": "ray", "source": {"preset": "quartic"}, "tolerances": {"mass_ratio": 1.5}})"), ConfigError);
        CHECK_THROWS_AS(parse_config(R"({"command": "ray", "source": {"preset": "quartic"}, "obstruction": {"N": 1000}})"), ConfigError);
        CHECK_THROWS_AS(parse_config(R"({"command": "ray", "source": {"preset": "quartic"}, "seeds": [[0.1], [0.1, 0.2]]})"), ConfigError);
    }
    SUBCASE("tolerance scaling leaves algorithm parameters alone") {
        ToleranceConfig t;
        t.scale(10);
        CHECK(t.hj == doctest::Approx(1e-2));
        CHECK(t.conservation == doctest::Approx(1e-2));
        CHECK(t.cvx_rel == ToleranceConfig{}.cvx_rel);
        CHECK(t.mass_ratio == ToleranceConfig{}.mass_ratio);
        CHECK(t.pw_margin == ToleranceConfig{}.pw_margin);
        CHECK_THROWS_AS(t.scale(0), ConfigError);
    }
}

TEST_CASE("property: parse(emit(config)) == config") {
    const fs::path dir = scratch("roundtrip");
    const auto f = GridFn::sample({{0.0, 1.0, 11}}, [](const Vec& y) { return y[0] * y[0]; });
    write_gridfn_csv(dir / "u0.csv", f);
    write_gridfn_csv(dir / "udot0.csv", -1.0 * f);

    std::mt19937 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto& ids = preset_ids();
    for (int trial = 0; trial < 60; ++trial) {
        ExperimentConfig c;
        c.command = command_names()[rng() % command_names().size()];
        if (trial % 3 == 0) {
            c.source.u0 = (dir / "u0.csv").string();
            c.source.udot0 = (dir / "udot0.csv").string();
            c.source.normals = {{1.0}, {-1.0}};
            c.source.offsets = {1.0, 0.0};
        } else if (trial % 3 == 1) {
            c.source.psi0 = (dir / "u0.csv").string();
            c.source.psidot0 = (dir / "udot0.csv").string();
            c.source.dual_shape = static_cast<int>(rng() % 50);
            c.source.normals = {{1.0, 0.0}, {-1.0, 0.0}, {0.0, 1.0}, {0.0, -1.0}};
            c.source.offsets = {u(rng), u(rng), u(rng), u(rng)};
        } else {
            c.source.preset = ids[rng() % ids.size()];
            c.source.shape = 5 + static_cast<int>(rng() % 100);
        }
        c.grid.x_shape = trial % 2 ? 0 : 5 + static_cast<int>(rng() % 300);
        if (trial % 4 == 0) c.grid.x_box = {{-u(rng), 1 + u(rng)}};
        if (trial % 5 != 0) c.s_grid = uniform_s_grid(0.1 + u(rng), 2 + static_cast<int>(rng() % 20));
        c.tol.hj = u(rng) * 1e-2 + 1e-12;
        c.tol.cvx_rel = u(rng) * 1e-9 + 1e-15;
        c.tol.mass_ratio = 0.5 + 0.4 * u(rng);
        c.out_dir = "out_" + std::to_string(trial);
        c.seed_count = 2 + static_cast<int>(rng() % 200);
        for (int k = 0; k < static_cast<int>(rng() % 4); ++k) c.seeds.push_back({u(rng)});
        c.verify.levels = static_cast<int>(rng() % 5);
        c.obstruction.points = {{u(rng)}, {u(rng)}};
        c.obstruction.T = u(rng);
        c.obstruction.N = 1 << (6 + rng() % 6);
        c.obstruction.T_sweep = {0.5, 0.5 + u(rng)};

        const std::string text = emit_config(c);
        const auto back = parse_config(text);
        CHECK(back == c);
        CHECK(emit_config(back) == text);
    }
}

TEST_CASE("relative CSV paths resolve against the config directory") {
    const fs::path dir = scratch("relative");
    fs::create_directories(dir / "data");
    const auto data = make_preset("quadratic", 201);
    write_gridfn_csv(dir / "data" / "u0.csv", data.u0);
    write_gridfn_csv(dir / "data" / "udot0.csv", data.udot0);
    std::ofstream(dir / "cfg.json") << R"({"command": "lifespan",
        "source": {"u0": "data/u0.csv", "udot0": "data/udot0.csv", "polytope": {"normals": [[1], [-1]], "offsets": [1, 0]}},
        "out_dir": ")" << (dir / "out").string() << "\"}";
    const auto c = load_config(dir / "cfg.json");
    CHECK(fs::path(c.source.u0) == (dir / "data" / "u0.csv").lexically_normal());
    const auto m = run_command(c);
    CHECK(m.exit_code == kExitPass);
    const auto out = read_json(dir / "out" / "lifespan.json");
    CHECK(out["T_cvx"].get<double>() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("cmd_lifespan") {
    const fs::path dir = scratch("lifespan");
    SUBCASE("quadratic") {
        const auto m = cmd_lifespan(preset_config("lifespan", "quadratic", dir / "q"));
        CHECK(m.exit_code == kExitPass);
        CHECK(read_json(dir / "q" / "lifespan.json")["T_cvx"].get<double>() == doctest::Approx(1.0).epsilon(1e-6));
    }
    SUBCASE("drift") {
        cmd_lifespan(preset_config("lifespan", "drift", dir / "d"));
        const auto out = read_json(dir / "d" / "lifespan.json");
        CHECK(out["T_cvx"] == "infinite");
        CHECK(out["message"] == "infinite (no obstruction found)");
    }
    SUBCASE("quartic against a dense Hessian scan") {
        cmd_lifespan(preset_config("lifespan", "quartic", dir / "k"));
        const double T = read_json(dir / "k" / "lifespan.json")["T_cvx"].get<double>();
        const double ref = dense_lifespan_scan(preset_spec("quartic"));
        CHECK(std::abs(T - ref) <= 0.01 * ref);
    }
    SUBCASE("wrong command") {
        CHECK_THROWS_AS(cmd_lifespan(preset_config("ray", "quadratic", dir / "x")), ConfigError);
    }
}

TEST_CASE("cmd_ray") {
    const fs::path dir = scratch("ray");
    SUBCASE("slices past the lifespan are flagged, s = 0 reproduces psi0") {
        auto c = preset_config("ray", "quadratic", dir / "q");
        c.s_grid = {0.0, 0.5, 0.9, 1.1, 1.3};
        const auto m = cmd_ray(c);
        CHECK(m.exit_code == kExitPass);
        const auto out = read_json(dir / "q" / "ray.json");
        CHECK(out["admissible"] == json({true, true, true, false, false}));
        CHECK(m.summary["admissible"] == out["admissible"]);
        const auto s0 = read_gridfn_csv(dir / "q" / "slice_000.csv");
        const auto& spec = preset_spec("quadratic");
        double err = 0.0;
        for (std::size_t k = 0; k < s0.size(); ++k) err = std::max(err, std::abs(s0[k] - spec.psi0(s0.node(k))));
        CHECK(err <= 2 * s0.step(0) * s0.step(0));
        const auto lift0 = read_gridfn_csv(dir / "q" / "lift_000.csv");
        for (std::size_t k = 0; k < lift0.size(); ++k) CHECK(lift0[k] == 0.0);
    }
    SUBCASE("drift: every slice admissible") {
        auto c = preset_config("ray", "drift", dir / "d");
        c.s_grid = uniform_s_grid(3.0, 7);
        cmd_ray(c);
        for (const auto& flag : read_json(dir / "d" / "ray.json")["admissible"]) CHECK(flag.get<bool>());
    }
}

TEST_CASE("cmd_flow") {
    const fs::path dir = scratch("flow");
    const auto m = cmd_flow(preset_config("flow", "quadratic", dir));
    CHECK(m.exit_code == kExitPass);
    const auto caustic = read_json(dir / "caustic.json");
    CHECK(caustic["first_crossing_s"].get<double>() == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(find_check(m, "conservation").value <= 1e-3);

    // Straight-line check on the exported leaves, refitted here.
    std::ifstream in(dir / "leaves.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "seed_id,s,x_1");
    std::map<int, std::vector<std::pair<double, double>>> rows;
    while (std::getline(in, line)) {
        double id, s, x;
        REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf", &id, &s, &x) == 3);
        rows[static_cast<int>(id)].push_back({s, x});
    }
    CHECK(rows.size() == 101);
    double worst = 0.0;
    for (const auto& [id, pts] : rows) {
        const auto [s0, x0] = pts.front();
        const auto [s1, x1] = pts.back();
        for (const auto& [s, x] : pts) worst = std::max(worst, std::abs(x - (x0 + (x1 - x0) * (s - s0) / (s1 - s0))));
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("cmd_verify") {
    const fs::path dir = scratch("verify");
    SUBCASE("computed Legendre ray passes") {
        const auto m = cmd_verify(preset_config("verify", "quadratic", dir / "psiL"));
        CHECK(m.exit_code == kExitPass);
        const auto mass = read_json(dir / "psiL" / "mass.json");
        CHECK(mass["levels"].size() == 3);
    }
    // Supplied slices: the ray command's own output, the same data bumped by 0.05 s^2, and psi0 frozen in s.
    auto ray_cfg = preset_config("ray", "quartic", dir / "ray");
    ray_cfg.s_grid = uniform_s_grid(0.9 * 0.99999583, 451);
    REQUIRE(cmd_ray(ray_cfg).exit_code == kExitPass);
    auto verify_with = [&](const std::string& name, const std::function<double(double, const Vec&, double)>& edit) {
        fs::create_directories(dir / name);
        auto c = preset_config("verify", "quartic", dir / name / "out");
        c.s_grid = ray_cfg.s_grid;
        for (std::size_t k = 0; k < c.s_grid.size(); ++k) {
            char file[32];
            std::snprintf(file, sizeof file, "slice_%03zu.csv", k);
            auto slice = read_gridfn_csv(dir / "ray" / file);
            for (std::size_t j = 0; j < slice.size(); ++j) slice[j] = edit(c.s_grid[k], slice.node(j), slice[j]);
            write_gridfn_csv(dir / name / file, slice);
            c.verify.slices.push_back((dir / name / file).string());
        }
        return cmd_verify(c);
    };
    SUBCASE("supplied psi_L passes") {
        const auto m = verify_with("same", [](double, const Vec&, double v) { return v; });
        CHECK(m.exit_code == kExitPass);
        CHECK(m.summary["supplied"] == true);
    }
    SUBCASE("perturbed input is rejected by the mass check") {
        const auto m = verify_with("bumped", [](double s, const Vec&, double v) { return v + 0.05 * s * s; });
        CHECK(m.exit_code == kExitCheckFailure);
        CHECK_FALSE(find_check(m, "ma_mass").pass);
        CHECK(find_check(m, "ma_mass").value > 0.8);
    }
    SUBCASE("frozen psi0 is rejected by the HJ residual") {
        const auto& spec = preset_spec("quartic");
        const auto m = verify_with("frozen", [&](double, const Vec& x, double) { return spec.psi0(x); });
        CHECK(m.exit_code == kExitCheckFailure);
        CHECK(find_check(m, "ma_mass").pass);
        CHECK_FALSE(find_check(m, "hj_residual").pass);
        CHECK(find_check(m, "hj_residual").value > 0.1);
    }
}

TEST_CASE("cmd_obstruction") {
    const fs::path dir = scratch("obstruction");
    const auto m = cmd_obstruction(preset_config("obstruction", "quadratic", dir));
    CHECK(m.exit_code == kExitPass);
    const auto out = read_json(dir / "obstruction.json");
    CHECK(std::abs(out["kernel"]["transition"].get<double>() - 2.0) <= 0.05 * 2.0);
    CHECK(out["gaussian_all_pass"] == true);
    for (const auto& leaf : out["leaves"]) CHECK(leaf["obstruction_variation"].get<double>() <= 1e-10);
    // Exported spectrum of the a = 2 kernel: |f^(xi)| = exp(-2 xi) in the resolved band.
    std::ifstream in(dir / "spectrum_kernel.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "xi,re,im,log_abs");
    int checked = 0;
    while (std::getline(in, line)) {
        double xi, re, im, la;
        REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &xi, &re, &im, &la) == 4);
        if (xi > 1.0 && xi < 4.0) {
            CHECK(la == doctest::Approx(-2 * xi).epsilon(0.02));
            ++checked;
        }
    }
    CHECK(checked > 10);
}

TEST_CASE("manifest completeness, exit codes and determinism") {
    for (const auto& cmd : command_names()) {
        CAPTURE(cmd);
        const fs::path a = scratch("det_a_" + cmd), b = scratch("det_b_" + cmd);
        auto c = preset_config(cmd, "quartic", a);
        c.seed_count = 21;
        c.s_grid = uniform_s_grid(0.8, 201);
        const auto ma = run_command(c);
        c.out_dir = b.string();
        const auto mb = run_command(c);

        std::set<std::string> listed(ma.artifacts.begin(), ma.artifacts.end());
        std::set<std::string> on_disk;
        for (const auto& e : fs::directory_iterator(a)) on_disk.insert(e.path().filename().string());
        CHECK(listed == on_disk);
        CHECK(ma.artifacts.back() == "manifest.json");

        const bool all_pass = std::all_of(ma.checks.begin(), ma.checks.end(), [](const CheckResult& r) { return r.pass; });
        CHECK(ma.pass == all_pass);
        CHECK((ma.exit_code == kExitPass) == all_pass);

        for (const auto& name : ma.artifacts) {
            if (name == "manifest.json") continue;
            CHECK_MESSAGE(slurp(a / name) == slurp(b / name), name);
        }
        auto ja = read_json(a / "manifest.json"), jb = read_json(b / "manifest.json");
        for (json* j : {&ja, &jb}) {
            j->erase("wall_clock_s");
            (*j)["config"].erase("out_dir");
        }
        CHECK(ja == jb);
        CHECK(ja["version"] == version_string());
        CHECK(ja["config"]["command"] == cmd);
    }
}

TEST_CASE("domain failures inside a command land in the manifest with exit code 2") {
    const fs::path dir = scratch("domain");
    auto c = preset_config("flow", "quadratic", dir);
    c.seeds = {{0.5, 0.5}};
    const auto m = run_command(c);
    CHECK(m.exit_code == kExitConfigError);
    CHECK_FALSE(m.pass);
    CHECK(m.error.find("dimension") != std::string::npos);
    CHECK(read_json(dir / "manifest.json")["exit_code"] == kExitConfigError);
}

#ifdef HRMA_CLI_PATH
TEST_CASE("hrma executable") {
    const fs::path dir = scratch("exe");
    auto run = [&](const std::string& args, const std::string& env = "") {
        const std::string cmd = env + " \"" HRMA_CLI_PATH "\" " + args + " > \"" + (dir / "stdout.txt").string() + "\" 2>&1";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    };
    std::ofstream(dir / "ok.json") << R"({"command": "lifespan", "source": {"preset": "quadratic"}, "out_dir": "unused"})";
    std::ofstream(dir / "bad.json") << "{\n  \"command\": \"lifespan\",\n  \"source\": {\"preset\": \"quadratic\", \"shape\": 2}\n}";
    std::ofstream(dir / "fail.json") << R"({"command": "lifespan", "source": {"preset": "quartic"}, "tolerances": {"caustic": 1e-9}})";

    CHECK(run("lifespan --config \"" + (dir / "ok.json").string() + "\" --out \"" + (dir / "o1").string() + "\"") == 0);
    CHECK(fs::exists(dir / "o1" / "lifespan.json"));

    CHECK(run("lifespan --config \"" + (dir / "ok.json").string() + "\"", "HRMA_OUT_DIR=\"" + (dir / "o2").string() + "\"") == 0);
    CHECK(fs::exists(dir / "o2" / "manifest.json"));

    CHECK(run("lifespan --config \"" + (dir / "bad.json").string() + "\"") == kExitConfigError);
    CHECK(slurp(dir / "stdout.txt").find("line 3") != std::string::npos);

    CHECK(run("lifespan --config \"" + (dir / "fail.json").string() + "\" --out \"" + (dir / "o3").string() + "\"") == kExitCheckFailure);
    CHECK(run("lifespan --config \"" + (dir / "fail.json").string() + "\" --out \"" + (dir / "o4").string() + "\" --tol-scale 1e9") == 0);

    CHECK(run("ray --config \"" + (dir / "ok.json").string() + "\"") == kExitConfigError);
    CHECK(run("bogus") == kExitConfigError);

    CHECK(run("flow --help") == 0);
    const auto help = slurp(dir / "stdout.txt");
    CHECK(help.find("seed_id,s,x_1[,x_2]") != std::string::npos);
    CHECK(help.find("--seed-count") != std::string::npos);
}
#endif
