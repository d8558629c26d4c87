#include "hrma/cli_io.hpp"
#include "hrma/convex_core.hpp"
#include "hrma/hj_solver.hpp"
#include "hrma/ma_measure.hpp"
#include "hrma/moser_flow.hpp"
#include "hrma/strip_harmonic.hpp"
#include "hrma/toric_cauchy.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace hrma;

namespace {

py::array_t<double> grid_values(const GridFn& f) {
    std::vector<py::ssize_t> shape;
    for (const auto& ax : f.axes()) shape.push_back(ax.n);
    py::array_t<double> out(shape);
    std::copy(f.values().begin(), f.values().end(), out.mutable_data());
    return out;
}

GridFn grid_from_array(const Axes& axes, py::array_t<double, py::array::c_style | py::array::forcecast> values) {
    std::size_t expected = 1;
    for (const auto& ax : axes) expected *= static_cast<std::size_t>(ax.n);
    if (static_cast<std::size_t>(values.size()) != expected) throw DomainError("GridFn: values do not match the axes");
    return GridFn(axes, std::vector<double>(values.data(), values.data() + values.size()));
}

std::vector<double> line_values(const LineFn& f) { return f.values; }

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Geodesic rays of toric Cauchy data: Legendre rays, Moser flow, Hamilton-Jacobi, Monge-Ampere mass";
    m.attr("__version__") = version_string();

    auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    auto domain = py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", domain.ptr());
    py::register_exception<ConvexityError>(m, "ConvexityError", domain.ptr());
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    (void)error;

    py::class_<Axis>(m, "Axis")
        .def(py::init([](double lo, double hi, int n) { return Axis{lo, hi, n}; }), py::arg("lo"), py::arg("hi"), py::arg("n"))
        .def_readonly("lo", &Axis::lo)
        .def_readonly("hi", &Axis::hi)
        .def_readonly("n", &Axis::n)
        .def_property_readonly("step", &Axis::step)
        .def("__repr__", [](const Axis& a) {
            return "Axis(" + format_number(a.lo) + ", " + format_number(a.hi) + ", " + std::to_string(a.n) + ")";
        });

    py::class_<GridFn>(m, "GridFn")
        .def(py::init(&grid_from_array), py::arg("axes"), py::arg("values"))
        .def_static("sample", &GridFn::sample, py::arg("axes"), py::arg("f"))
        .def_property_readonly("axes", &GridFn::axes)
        .def_property_readonly("dim", &GridFn::dim)
        .def_property_readonly("values", &grid_values)
        .def("node", &GridFn::node)
        .def("__call__", &GridFn::value)
        .def("__len__", &GridFn::size);

    py::class_<Polytope>(m, "Polytope")
        .def_static("interval", &Polytope::interval)
        .def_static("box", &Polytope::box)
        .def_readonly("normals", &Polytope::normals)
        .def_readonly("offsets", &Polytope::offsets)
        .def_property_readonly("dim", &Polytope::dim)
        .def("contains", &Polytope::contains, py::arg("y"), py::arg("margin") = 0.0)
        .def("vertices", &Polytope::vertices);

    py::class_<CauchyData>(m, "CauchyData")
        .def_readonly("label", &CauchyData::label)
        .def_readonly("polytope", &CauchyData::polytope)
        .def_readonly("u0", &CauchyData::u0)
        .def_readonly("udot0", &CauchyData::udot0)
        .def_readonly("psi0", &CauchyData::psi0)
        .def_readonly("psidot0", &CauchyData::psidot0)
        .def_property_readonly("dim", &CauchyData::dim);

    m.def("preset_ids", &preset_ids);
    m.def("make_preset", &make_preset, py::arg("id"), py::arg("shape") = 0);
    m.def("preset_lifespan", [](const std::string& id) { return preset_spec(id).lifespan; });
    m.def("make_cauchy", &make_cauchy, py::arg("u0"), py::arg("udot0"), py::arg("polytope"), py::arg("grid"),
          py::arg("label") = "custom");
    m.def("to_symplectic", [](const GridFn& psi0, const GridFn& psidot0, const Polytope& P, int dual_shape) {
              return to_symplectic(psi0, psidot0, P, dual_shape);
          },
          py::arg("psi0"), py::arg("psidot0"), py::arg("polytope"), py::arg("dual_shape") = 0);

    m.def("legendre_transform", [](const GridFn& f, const Axes& dual, bool refine) {
              LegendreOptions opt;
              opt.refine = refine;
              return legendre_transform(f, dual, opt);
          },
          py::arg("f"), py::arg("dual"), py::arg("refine") = false);
    m.def("biconjugate", &biconjugate);
    m.def("convexity_margin", [](const GridFn& f) { return convexity_report(f).min_margin; });

    py::class_<LifespanReport>(m, "LifespanReport")
        .def_readonly("lifespan", &LifespanReport::lifespan)
        .def_readonly("infinite", &LifespanReport::infinite)
        .def_readonly("argmin", &LifespanReport::argmin);
    m.def("lifespan_report", [](const CauchyData& d) { return lifespan_report(d); });
    m.def("convex_lifespan", [](const CauchyData& d) { return convex_lifespan(d); });

    py::class_<AdmissibilityReport>(m, "AdmissibilityReport")
        .def_readonly("admissible", &AdmissibilityReport::admissible)
        .def_readonly("strictly_convex", &AdmissibilityReport::strictly_convex)
        .def_readonly("covers_polytope", &AdmissibilityReport::covers_polytope)
        .def_readonly("min_margin", &AdmissibilityReport::min_margin)
        .def_readonly("largest_gap_radius", &AdmissibilityReport::largest_gap_radius);
    py::class_<RaySolution>(m, "RaySolution")
        .def_readonly("data", &RaySolution::data)
        .def_readonly("s_grid", &RaySolution::s_grid)
        .def_readonly("slices", &RaySolution::slices)
        .def_readonly("lifespan", &RaySolution::lifespan)
        .def_readonly("admissible", &RaySolution::admissible)
        .def_readonly("reports", &RaySolution::reports);
    m.def("uniform_s_grid", &uniform_s_grid, py::arg("s_max"), py::arg("count"));
    m.def("default_x_box", &default_x_box, py::arg("data"), py::arg("s_grid"), py::arg("shape"));
    m.def("legendre_ray", [](const CauchyData& d, const std::vector<double>& s, const Axes& x) { return legendre_ray(d, s, x); },
          py::arg("data"), py::arg("s_grid"), py::arg("x_axes"));
    m.def("hcma_lift", &hcma_lift);

    m.def("primal_samples", &primal_samples, py::arg("data"), py::arg("count"), py::arg("margin_fraction") = 0.05);
    m.def("moser_map", [](const CauchyData& d, double s, const Vec& x) { return moser_map(d, s, x); });
    m.def("jacobian_det", [](const CauchyData& d, double s, const Vec& x) { return jacobian_det(d, s, x); });
    m.def("invertibility_check", [](const CauchyData& d, double s) { return invertibility_check(d, s); });
    m.def("group_law_defect", [](const CauchyData& d, double s1, double s2, const std::vector<Vec>& pts) {
        return group_law_defect(d, s1, s2, pts);
    });
    m.def("conservation_error", [](const RaySolution& ray) { return conservation_check(ray).sup_error; });

    py::class_<CausticReport>(m, "CausticReport")
        .def_readonly("first_crossing_s", &CausticReport::first_crossing_s)
        .def_readonly("infinite", &CausticReport::infinite)
        .def_readonly("location", &CausticReport::location)
        .def_readonly("resolution_bound", &CausticReport::resolution_bound);
    m.def("seed_mesh", &seed_mesh, py::arg("data"), py::arg("n"), py::arg("margin_fraction") = 0.02);
    m.def("caustic_time", [](const CauchyData& d, const std::vector<Vec>& seeds, const std::vector<double>& s) {
              return caustic_time(trace_characteristics(d, seeds, s));
          },
          py::arg("data"), py::arg("seeds"), py::arg("s_grid"));
    m.def("hopf_lax_value", &hopf_lax_value);
    m.def("hj_residual", [](const RaySolution& ray) { return hj_residual(ray).sup_residual; });
    m.def("hj_residual_of", [](const std::vector<double>& s, const std::vector<GridFn>& eta, const CauchyData& d) {
              return hj_residual(s, eta, d).sup_residual;
          },
          py::arg("s_grid"), py::arg("eta"), py::arg("data"));

    py::class_<MassLevel>(m, "MassLevel")
        .def_readonly("h", &MassLevel::h)
        .def_readonly("ds", &MassLevel::ds)
        .def_readonly("total_mass", &MassLevel::total_mass)
        .def_readonly("max_cell", &MassLevel::max_cell);
    py::class_<WeakSolutionReport>(m, "WeakSolutionReport")
        .def_readonly("levels", &WeakSolutionReport::levels)
        .def_readonly("order_estimate", &WeakSolutionReport::order_estimate)
        .def_readonly("decreasing", &WeakSolutionReport::decreasing);
    m.def("weak_solution_check", [](const RaySolution& ray, int levels) { return weak_solution_check(ray, levels); },
          py::arg("ray"), py::arg("levels") = 3);
    m.def("gradient_graph_deviation", [](const RaySolution& ray) { return gradient_graph_check(ray).sup_deviation; });

    py::class_<PWResult>(m, "PWResult")
        .def_readonly("passed", &PWResult::pass)
        .def_readonly("fitted_rate", &PWResult::fitted_rate)
        .def_readonly("margin", &PWResult::margin)
        .def_readonly("super_exponential", &PWResult::super_exponential)
        .def_readonly("vanishing", &PWResult::vanishing);
    m.def("pw_test", [](const std::function<double(double)>& f, double T, double L, std::size_t N) {
              return pw_test(LineFn::sample(f, L, N), T);
          },
          py::arg("f"), py::arg("T"), py::arg("L") = 40.0, py::arg("N") = 4096);
    m.def("symbol_AT", &symbol_AT);
    m.def("symbol_DsinhTD", &symbol_DsinhTD);
    m.def("hilbert", [](const std::function<double(double)>& f, double L, std::size_t N) {
              return line_values(hilbert(LineFn::sample(f, L, N, false)));
          },
          py::arg("f"), py::arg("L") = 40.0, py::arg("N") = 4096);

    py::class_<ToricLeaf>(m, "ToricLeaf")
        .def_readonly("dual_point", &ToricLeaf::dual_point)
        .def_readonly("slope", &ToricLeaf::slope)
        .def_readonly("obstruction", &ToricLeaf::obstruction)
        .def_readonly("obstruction_variation", &ToricLeaf::obstruction_variation)
        .def_readonly("trivial", &ToricLeaf::trivial)
        .def_property_readonly("chi", [](const ToricLeaf& l) { return l.chi.values; });
    m.def("toric_leaf_solution", &toric_leaf_solution, py::arg("data"), py::arg("z"), py::arg("T"), py::arg("s_grid"),
          py::arg("L") = 40.0, py::arg("N") = 4096);

    m.def("run_config", [](const std::string& text, const std::filesystem::path& base_dir,
                           const std::optional<std::string>& out_dir) {
              auto config = parse_config(text, base_dir);
              if (out_dir) config.out_dir = *out_dir;
              const auto manifest = run_command(config);
              return py::module_::import("json").attr("loads")(manifest.to_json().dump());
          },
          py::arg("text"), py::arg("base_dir") = ".", py::arg("out_dir") = py::none(),
          "Runs one experiment configuration (JSON text) and returns the manifest as a dict.");
    m.def("emit_config", [](const std::string& text) { return emit_config(parse_config(text)); });
}
