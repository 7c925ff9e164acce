#include "vortexbc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "vortexbc/bessel.hpp"
#include "vortexbc/stokes.hpp"

namespace vortexbc {
namespace {

using nlohmann::json;

constexpr const char* kVersion = "0.1.0";
constexpr int kSchemaVersion = 1;

[[noreturn]] void fail_key(const std::string& path, const std::string& what) {
    throw std::invalid_argument("scenario: " + path + ": " + what);
}

std::string join_path(const std::string& parent, const std::string& key) {
    return parent.empty() ? key : parent + "." + key;
}

int edit_distance(const std::string& a, const std::string& b) {
    const size_t n = a.size(), m = b.size();
    std::vector<int> row(m + 1);
    for (size_t j = 0; j <= m; ++j) row[j] = static_cast<int>(j);
    for (size_t i = 1; i <= n; ++i) {
        int diag = row[0];
        row[0] = static_cast<int>(i);
        for (size_t j = 1; j <= m; ++j) {
            const int up = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1,
                               diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = up;
        }
    }
    return row[m];
}

void check_keys(const json& obj, const std::string& path,
                const std::vector<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) != allowed.end()) continue;
        std::string best = allowed.front();
        int best_d = edit_distance(it.key(), best);
        for (const std::string& cand : allowed) {
            const int d = edit_distance(it.key(), cand);
            if (d < best_d) {
                best_d = d;
                best = cand;
            }
        }
        fail_key(join_path(path, it.key()),
                 "unknown key (did you mean \"" + best + "\"?)");
    }
}

const json* find(const json& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) fail_key(path, "must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail_key(path, "must be finite");
    return x;
}

double get_number(const json& obj, const std::string& path, const char* key, double dflt) {
    const json* v = find(obj, key);
    return v ? as_number(*v, join_path(path, key)) : dflt;
}

int get_integer(const json& obj, const std::string& path, const char* key, int dflt) {
    const json* v = find(obj, key);
    if (!v) return dflt;
    if (!v->is_number_integer()) fail_key(join_path(path, key), "must be an integer");
    return v->get<int>();
}

std::string get_string(const json& obj, const std::string& path, const char* key,
                       const std::string& dflt) {
    const json* v = find(obj, key);
    if (!v) return dflt;
    if (!v->is_string()) fail_key(join_path(path, key), "must be a string");
    return v->get<std::string>();
}

complexd as_complex(const json& v, const std::string& path) {
    if (v.is_number()) return complexd(as_number(v, path), 0.0);
    if (v.is_array() && v.size() == 2)
        return complexd(as_number(v[0], path + "[0]"), as_number(v[1], path + "[1]"));
    fail_key(path, "must be a number or an [re, im] pair");
}

ProfileSpec parse_profile(const json& obj, const std::string& path, int N,
                          double r0, double r_max) {
    if (!obj.is_object()) fail_key(path, "must be an object");
    check_keys(obj, path, {"family", "k", "amplitude", "center", "width", "exponent"});

    ProfileSpec p;
    p.family = get_string(obj, path, "family", "");
    if (p.family != "gaussian_bump" && p.family != "annular_patch" &&
        p.family != "power_tail")
        fail_key(join_path(path, "family"),
                 "must be one of gaussian_bump, annular_patch, power_tail");

    p.k = get_integer(obj, path, "k", 0);
    if (p.k < 0 || p.k > N)
        fail_key(join_path(path, "k"), "must lie in [0, discretization.N]");
    if (const json* v = find(obj, "amplitude"))
        p.amplitude = as_complex(*v, join_path(path, "amplitude"));

    if (p.family == "power_tail") {
        if (find(obj, "center") || find(obj, "width"))
            fail_key(path, "power_tail profiles take no center or width");
        p.exponent = get_number(obj, path, "exponent", p.exponent);
        if (p.exponent <= 2.0)
            fail_key(join_path(path, "exponent"),
                     "must be > 2 for integrable moments");
        return p;
    }

    if (find(obj, "exponent"))
        fail_key(join_path(path, "exponent"), "only power_tail profiles take an exponent");
    p.center = get_number(obj, path, "center", p.center);
    p.width = get_number(obj, path, "width", p.width);
    if (p.width <= 0.0) fail_key(join_path(path, "width"), "must be > 0");
    if (p.family == "annular_patch") {
        if (p.center - p.width < r0 || p.center + p.width > r_max)
            fail_key(join_path(path, "center"),
                     "patch support leaves the annulus [r0, r_max]");
    } else if (p.center <= r0 || p.center >= r_max) {
        fail_key(join_path(path, "center"), "must lie inside (r0, r_max)");
    }
    return p;
}

json complex_json(const complexd& z) { return json::array({z.real(), z.imag()}); }

json scenario_echo(const Scenario& sc) {
    json geometry{{"r0", sc.r0}};
    json coeffs = json::array();
    for (const complexd& b : sc.map_coefficients) coeffs.push_back(complex_json(b));
    geometry["map_coefficients"] = coeffs;

    json initial = json::array();
    for (const ProfileSpec& p : sc.initial) {
        json e{{"family", p.family}, {"k", p.k}, {"amplitude", complex_json(p.amplitude)}};
        if (p.family == "power_tail")
            e["exponent"] = p.exponent;
        else {
            e["center"] = p.center;
            e["width"] = p.width;
        }
        initial.push_back(e);
    }

    return json{
        {"geometry", geometry},
        {"discretization",
         {{"N", sc.N},
          {"r_max", sc.r_max},
          {"lambda_min", sc.lambda_min},
          {"lambda_max", sc.lambda_max},
          {"radial_panel_width", sc.radial_panel_width},
          {"spectral_panel_width", sc.spectral_panel_width},
          {"points_per_panel", sc.points_per_panel}}},
        {"physics",
         {{"v_inf", json::array({sc.vx, sc.vy})},
          {"initial", initial},
          {"project_to_manifold", sc.project_to_manifold}}},
        {"run",
         {{"solver", sc.solver},
          {"T", sc.T},
          {"dt", sc.dt},
          {"stream", json::array({sc.stream_x, sc.stream_y})},
          {"picard_tol", sc.options.picard_tol},
          {"picard_max_iter", sc.options.picard_max_iter},
          {"control_tol", sc.options.control_tol},
          {"control_max_outer", sc.options.control_max_outer},
          {"control_modes", sc.options.control_modes}}},
        {"output", {{"directory", sc.directory}, {"emit_every", sc.emit_every}}}};
}

struct CsvFile {
    std::FILE* f = nullptr;

    CsvFile(const std::filesystem::path& p, const char* header) {
        f = std::fopen(p.string().c_str(), "w");
        if (!f) throw std::runtime_error("harness: cannot open " + p.string());
        std::fprintf(f, "%s\n", header);
    }
    ~CsvFile() {
        if (f) std::fclose(f);
    }
    CsvFile(const CsvFile&) = delete;
    CsvFile& operator=(const CsvFile&) = delete;
};

void write_json_file(const std::filesystem::path& p, const json& j) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("harness: cannot open " + p.string());
    out << j.dump(2) << "\n";
}

std::vector<size_t> emission_indices(size_t n_times, int every) {
    std::vector<size_t> idx;
    for (size_t j = 0; j < n_times; j += static_cast<size_t>(every)) idx.push_back(j);
    if (idx.empty() || idx.back() != n_times - 1) idx.push_back(n_times - 1);
    return idx;
}

// Uniform stream (sx, sy) as a velocity state: constant coefficients on the
// |k| = 1 modes, exactly like the far-field contribution.
VelocityState stream_field(int N, const GridPtr& g, double sx, double sy) {
    VelocityState v(N, g);
    const FarField s = far_field_coeffs(sx, sy);
    for (int k = -1; k <= 1; k += 2)
        for (int i = 0; i < g->size(); ++i) {
            v.vr_mode(k).values[static_cast<size_t>(i)] = s.r_coeff(k);
            v.vphi_mode(k).values[static_cast<size_t>(i)] = s.phi_coeff(k);
        }
    return v;
}

void require_finite_record(const json& rec, double t) {
    for (const auto& item : rec.items()) {
        const json& v = item.value();
        auto bad = [&](double x) { return !std::isfinite(x); };
        if (v.is_number() && bad(v.get<double>()))
            throw std::runtime_error("harness: non-finite diagnostic \"" + item.key() +
                                     "\" at t = " + std::to_string(t));
        if (v.is_array())
            for (const json& e : v)
                if (e.is_number() && bad(e.get<double>()))
                    throw std::runtime_error("harness: non-finite diagnostic \"" +
                                             item.key() +
                                             "\" at t = " + std::to_string(t));
    }
}

void emit_outputs(const Scenario& sc, const ConformalMap& map, const FarField& far,
                  const TrajectoryRecord& rec, const ControlSolution* ctrl) {
    namespace fs = std::filesystem;
    const fs::path base(sc.directory);
    const bool mapped = !map.is_identity();
    const bool stokes_like = sc.solver == "stokes" || sc.solver == "map";

    CsvFile modes_csv(base / "modes.csv", "t,k,r,re_w,im_w");
    CsvFile vel_csv(base / "velocity.csv", "t,k,r,re_vr,im_vr,re_vphi,im_vphi");

    const VorticityState& w0 = rec.states.front();
    const double base_l2 = l2_norm(w0);
    const double base_h1 = h1_norm(w0);

    json records = json::array();
    for (size_t j : emission_indices(rec.times.size(), sc.emit_every)) {
        const double t = rec.times[j];
        const VorticityState& w = rec.states[j];
        const Grid& g = *w.grid;

        BiotSavartReport rep;
        const VelocityState vel = mapped
                                      ? mapped_reconstruct_velocity(map, w, far, &rep)
                                      : reconstruct_velocity(w, far, &rep);

        for (int k = -w.N; k <= w.N; ++k)
            for (int i = 0; i < g.size(); ++i) {
                const complexd wv = w.mode(k).values[static_cast<size_t>(i)];
                std::fprintf(modes_csv.f, "%.17g,%d,%.17g,%.17g,%.17g\n", t, k,
                             g.nodes[static_cast<size_t>(i)], wv.real(), wv.imag());
                const complexd vr = vel.vr_mode(k).values[static_cast<size_t>(i)];
                const complexd vp = vel.vphi_mode(k).values[static_cast<size_t>(i)];
                std::fprintf(vel_csv.f, "%.17g,%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", t, k,
                             g.nodes[static_cast<size_t>(i)], vr.real(), vr.imag(),
                             vp.real(), vp.imag());
            }

        const std::vector<complexd> man = mapped ? mapped_manifold_residual(map, w, far)
                                                 : manifold_residual(w, far);
        const std::vector<complexd> rob = robin_residual(w);
        json man_j = json::array(), rob_j = json::array();
        for (int k = 0; k <= w.N; ++k) {
            man_j.push_back(std::abs(man[static_cast<size_t>(k)]));
            rob_j.push_back(std::abs(rob[static_cast<size_t>(k + w.N)]));
        }

        const StepDiagnostics* d = j > 0 ? &rec.diagnostics[j - 1] : nullptr;
        json r{{"t", t},
               {"manifold_residuals", man_j},
               {"robin_residuals", rob_j},
               {"circulation", mapped ? mapped_circulation(map, w) : circulation(w)},
               {"boundary_velocity", boundary_velocity_norm(vel, w.N)},
               {"tail_fraction", std::max(rep.tail_fraction, d ? d->tail_fraction : 0.0)}};
        if (stokes_like) {
            const double e = std::exp(1.0);
            r["l2_ratio"] = base_l2 > 0.0 ? l2_norm(w) / base_l2 : 0.0;
            r["grad_ratio"] = base_l2 > 0.0 && t > 0.0
                                  ? std::sqrt(e * t) * gradient_norm(w) / base_l2
                                  : 0.0;
            r["h1_ratio"] =
                base_h1 > 0.0 ? h1_norm(w) / (std::sqrt(3.0) * base_h1) : 0.0;
        } else {
            r["cfl_number"] = d ? d->cfl_number : 0.0;
            if (sc.solver != "oseen") {
                r["picard_iterations"] = d ? d->picard_iterations : 0;
                r["contraction"] = d ? d->contraction : 0.0;
            }
        }
        require_finite_record(r, t);
        records.push_back(std::move(r));
    }

    write_json_file(base / "diagnostics.json",
                    json{{"records", records},
                         {"scenario", scenario_echo(sc)},
                         {"versions", {{"vortexbc", kVersion}, {"schema", kSchemaVersion}}}});

    if (ctrl) {
        CsvFile control_csv(base / "control.csv", "t,k,re_u,im_u");
        const BoundaryControl& u = ctrl->control;
        for (int j = 0; j < u.nodes(); ++j)
            for (int k = 0; k <= u.N; ++k) {
                const complexd uv = u.value(k, j);
                std::fprintf(control_csv.f, "%.17g,%d,%.17g,%.17g\n", u.time(j), k,
                             uv.real(), uv.imag());
            }
    }
}

int run_verify(const Scenario& sc) {
    const GridPtr rg = Grid::radial(sc.r0, sc.r_max, sc.radial_panel_width,
                                    sc.points_per_panel);
    const GridPtr sg = Grid::spectral(sc.lambda_min, sc.lambda_max,
                                      sc.spectral_panel_width, sc.points_per_panel);
    TransformCache cache(rg, sg);

    json checks = json::array();
    bool all_pass = true;
    auto add = [&](const char* name, double measured, double budget) {
        const bool pass = std::isfinite(measured) && measured <= budget;
        checks.push_back(
            {{"name", name}, {"measured", measured}, {"budget", budget}, {"pass", pass}});
        all_pass = all_pass && pass;
    };

    std::vector<double> xs;
    for (int i = 0; i < 40; ++i)
        xs.push_back(0.05 * std::pow(50.0 / 0.05, i / 39.0));

    double wronskian = 0.0;
    for (int k = 1; k <= 8; ++k)
        for (double x : xs) {
            const double want = 2.0 / (M_PI * x);
            const double got = bessel_j(k, x) * bessel_y(k - 1, x) -
                               bessel_y(k, x) * bessel_j(k - 1, x);
            wronskian = std::max(wronskian, std::abs(got - want) / want);
        }
    add("wronskian_cross_product", wronskian, 1e-10);

    double trace = 0.0;
    for (int k = 1; k <= 8; ++k)
        for (double x : xs) {
            const double lam = x / sc.r0;
            const double rho = forcing_kernel(k, lam, sc.r0);
            trace = std::max(trace,
                             std::abs(kernel_R(k, k - 1, lam, sc.r0, sc.r0) - rho) /
                                 std::abs(rho));
        }
    add("kernel_boundary_trace", trace, 1e-10);

    auto bump = [&](double c, double wd) {
        RadialFunction f(rg);
        for (int i = 0; i < rg->size(); ++i) {
            const double r = rg->nodes[static_cast<size_t>(i)];
            f.values[static_cast<size_t>(i)] = std::exp(-std::pow((r - c) / wd, 2));
        }
        return f;
    };
    const double span = sc.r_max - sc.r0;

    double bessel_ratio = 0.0;
    for (int i = 0; i < 20; ++i) {
        const RadialFunction f =
            bump(sc.r0 + span * (0.1 + 0.6 * i / 19.0), 0.4 + 0.03 * i);
        const double fn = weighted_l2(*rg, f.values);
        for (int k = 1; k <= 3; ++k) {
            const SpectralFunction fh = cache.mode_plan(k)->forward(f);
            bessel_ratio = std::max(bessel_ratio, weighted_l2(*sg, fh.values) / fn);
        }
    }
    add("bessel_inequality", bessel_ratio, 1.0 + 1e-6);

    double round_trip = 0.0;
    double rule = 0.0;
    for (int k = 0; k <= 4; ++k) {
        const RadialFunction f = project_moment_free(
            k, bump(sc.r0 + 0.2 * span + 0.02 * span * k, 0.8), complexd(0.0));
        const PlanPtr plan = cache.mode_plan(k);
        const RadialFunction back = plan->inverse(plan->forward(f));
        double num = 0.0;
        for (int i = 0; i < rg->size(); ++i)
            num = std::max(num, std::abs(back.values[static_cast<size_t>(i)] -
                                         f.values[static_cast<size_t>(i)]));
        round_trip = std::max(round_trip, num / weighted_l2(*rg, f.values));
        if (k >= 1) {
            const DerivativeRuleReport rep = check_derivative_rules(k, f, cache);
            rule = std::max({rule, rep.dr_residual, rep.over_r_residual,
                             rep.forward_residual});
        }
    }
    add("transform_round_trip", round_trip, 1e-6);
    add("derivative_rules", rule, 1e-6);

    VorticityState w0(3, rg);
    for (int k = 0; k <= 3; ++k)
        w0.mode(k) = project_moment_free(
            k, bump(sc.r0 + span * (0.15 + 0.03 * k), 0.7), complexd(0.0));
    w0.mirror_negative_modes();

    const SemigroupBoundsReport bounds =
        verify_semigroup_bounds(w0, {0.1, 0.5, 1.0}, cache);
    add("semigroup_bounds", bounds.worst, 1.02);

    const SemigroupResult two = evolve_stokes(evolve_stokes(w0, 0.2, cache).state, 0.3, cache);
    const SemigroupResult one = evolve_stokes(w0, 0.5, cache);
    double comp = 0.0;
    for (int k = -3; k <= 3; ++k) {
        std::vector<complexd> diff(two.state.mode(k).values);
        for (size_t i = 0; i < diff.size(); ++i) diff[i] -= one.state.mode(k).values[i];
        comp = std::max(comp, weighted_l2(*rg, diff));
    }
    add("semigroup_composition", comp / l2_norm(w0), 1e-6);

    write_json_file(std::filesystem::path(sc.directory) / "verify.json",
                    json{{"checks", checks}, {"all_pass", all_pass}});
    return all_pass ? 0 : 1;
}

} // namespace

int Scenario::steps() const { return static_cast<int>(std::llround(T / dt)); }

Scenario scenario_from_json_text(const std::string& text, const std::string& origin) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error("scenario: " + origin + ": " + e.what());
    }
    if (!root.is_object()) throw std::invalid_argument("scenario: top level must be an object");
    check_keys(root, "", {"geometry", "discretization", "physics", "run", "output"});

    Scenario sc;

    if (const json* g = find(root, "geometry")) {
        if (!g->is_object()) fail_key("geometry", "must be an object");
        check_keys(*g, "geometry", {"r0", "map_coefficients"});
        sc.r0 = get_number(*g, "geometry", "r0", sc.r0);
        if (sc.r0 <= 0.0) fail_key("geometry.r0", "must be > 0");
        if (const json* mc = find(*g, "map_coefficients")) {
            if (!mc->is_array()) fail_key("geometry.map_coefficients", "must be an array");
            for (size_t i = 0; i < mc->size(); ++i)
                sc.map_coefficients.push_back(as_complex(
                    (*mc)[i], "geometry.map_coefficients[" + std::to_string(i) + "]"));
        }
    }

    if (const json* d = find(root, "discretization")) {
        if (!d->is_object()) fail_key("discretization", "must be an object");
        check_keys(*d, "discretization",
                   {"N", "r_max", "lambda_min", "lambda_max", "radial_panel_width",
                    "spectral_panel_width", "points_per_panel"});
        sc.N = get_integer(*d, "discretization", "N", sc.N);
        sc.r_max = get_number(*d, "discretization", "r_max", sc.r_max);
        sc.lambda_min = get_number(*d, "discretization", "lambda_min", sc.lambda_min);
        sc.lambda_max = get_number(*d, "discretization", "lambda_max", sc.lambda_max);
        sc.radial_panel_width =
            get_number(*d, "discretization", "radial_panel_width", 0.0);
        sc.spectral_panel_width =
            get_number(*d, "discretization", "spectral_panel_width", 0.0);
        sc.points_per_panel =
            get_integer(*d, "discretization", "points_per_panel", sc.points_per_panel);
    }
    if (sc.N < 1) fail_key("discretization.N", "must be >= 1");
    if (sc.N > 64) fail_key("discretization.N", "must be <= 64 (kernel accuracy range)");
    if (sc.r_max <= sc.r0) fail_key("discretization.r_max", "must be > geometry.r0");
    if (sc.lambda_min <= 0.0) fail_key("discretization.lambda_min", "must be > 0");
    if (sc.lambda_max <= sc.lambda_min)
        fail_key("discretization.lambda_max", "must be > lambda_min");
    if (sc.points_per_panel < 4 || sc.points_per_panel > 32)
        fail_key("discretization.points_per_panel", "must lie in [4, 32]");
    if (sc.radial_panel_width == 0.0)
        sc.radial_panel_width = 2.0 * M_PI / sc.lambda_max;
    if (sc.radial_panel_width <= 0.0)
        fail_key("discretization.radial_panel_width", "must be > 0");
    if (sc.spectral_panel_width == 0.0)
        sc.spectral_panel_width = 2.0 * M_PI / sc.r_max;
    if (sc.spectral_panel_width <= 0.0)
        fail_key("discretization.spectral_panel_width", "must be > 0");

    if (const json* p = find(root, "physics")) {
        if (!p->is_object()) fail_key("physics", "must be an object");
        check_keys(*p, "physics", {"v_inf", "initial", "project_to_manifold"});
        if (const json* b = find(*p, "project_to_manifold")) {
            if (!b->is_boolean())
                fail_key("physics.project_to_manifold", "must be a boolean");
            sc.project_to_manifold = b->get<bool>();
        }
        if (const json* v = find(*p, "v_inf")) {
            if (!v->is_array() || v->size() != 2)
                fail_key("physics.v_inf", "must be a [vx, vy] pair");
            sc.vx = as_number((*v)[0], "physics.v_inf[0]");
            sc.vy = as_number((*v)[1], "physics.v_inf[1]");
        }
        if (const json* list = find(*p, "initial")) {
            if (!list->is_array()) fail_key("physics.initial", "must be an array");
            for (size_t i = 0; i < list->size(); ++i)
                sc.initial.push_back(
                    parse_profile((*list)[i], "physics.initial[" + std::to_string(i) + "]",
                                  sc.N, sc.r0, sc.r_max));
        }
    }

    if (const json* r = find(root, "run")) {
        if (!r->is_object()) fail_key("run", "must be an object");
        check_keys(*r, "run",
                   {"solver", "T", "dt", "stream", "picard_tol", "picard_max_iter",
                    "control_tol", "control_max_outer", "control_modes"});
        sc.solver = get_string(*r, "run", "solver", sc.solver);
        sc.T = get_number(*r, "run", "T", sc.T);
        sc.dt = get_number(*r, "run", "dt", sc.dt);
        if (const json* s = find(*r, "stream")) {
            if (!s->is_array() || s->size() != 2)
                fail_key("run.stream", "must be a [vx, vy] pair");
            sc.stream_x = as_number((*s)[0], "run.stream[0]");
            sc.stream_y = as_number((*s)[1], "run.stream[1]");
        }
        sc.options.picard_tol =
            get_number(*r, "run", "picard_tol", sc.options.picard_tol);
        sc.options.picard_max_iter =
            get_integer(*r, "run", "picard_max_iter", sc.options.picard_max_iter);
        sc.options.control_tol =
            get_number(*r, "run", "control_tol", sc.options.control_tol);
        sc.options.control_max_outer =
            get_integer(*r, "run", "control_max_outer", sc.options.control_max_outer);
        sc.options.control_modes =
            get_integer(*r, "run", "control_modes", sc.options.control_modes);
    }
    const std::set<std::string> solvers{"stokes", "oseen", "helmholtz",
                                        "control", "map", "verify"};
    if (!solvers.count(sc.solver))
        fail_key("run.solver",
                 "must be one of stokes, oseen, helmholtz, control, map, verify");
    if (sc.T <= 0.0) fail_key("run.T", "must be > 0");
    if (sc.dt <= 0.0) fail_key("run.dt", "must be > 0");
    if (sc.steps() < 1 || std::abs(sc.steps() * sc.dt - sc.T) > 1e-9 * std::max(1.0, sc.T))
        fail_key("run.dt", "does not divide run.T within rounding");
    if (sc.options.picard_tol <= 0.0) fail_key("run.picard_tol", "must be > 0");
    if (sc.options.picard_max_iter < 1) fail_key("run.picard_max_iter", "must be >= 1");
    if (sc.options.control_tol <= 0.0) fail_key("run.control_tol", "must be > 0");
    if (sc.options.control_max_outer < 1)
        fail_key("run.control_max_outer", "must be >= 1");
    if (sc.options.control_modes < -1) fail_key("run.control_modes", "must be >= -1");
    if ((sc.stream_x != 0.0 || sc.stream_y != 0.0) && sc.solver != "oseen")
        fail_key("run.stream", "only the oseen solver takes an advecting stream");
    if (!sc.map_coefficients.empty() && sc.solver != "map")
        fail_key("geometry.map_coefficients",
                 "only the map solver evolves under a nontrivial map");
    try {
        ConformalMap(sc.r0, sc.map_coefficients);
    } catch (const std::invalid_argument& e) {
        fail_key("geometry.map_coefficients", e.what());
    }

    if (const json* o = find(root, "output")) {
        if (!o->is_object()) fail_key("output", "must be an object");
        check_keys(*o, "output", {"directory", "emit_every"});
        sc.directory = get_string(*o, "output", "directory", sc.directory);
        sc.emit_every = get_integer(*o, "output", "emit_every", sc.emit_every);
    }
    if (sc.directory.empty()) fail_key("output.directory", "must be nonempty");
    if (sc.emit_every < 1) fail_key("output.emit_every", "must be >= 1");

    return sc;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("scenario: cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return scenario_from_json_text(buf.str(), path);
}

VorticityState initial_state(const Scenario& sc, const GridPtr& grid) {
    VorticityState w(sc.N, grid);
    for (const ProfileSpec& p : sc.initial) {
        std::vector<complexd>& vals = w.mode(p.k).values;
        for (int i = 0; i < grid->size(); ++i) {
            const double r = grid->nodes[static_cast<size_t>(i)];
            if (p.family == "gaussian_bump") {
                vals[static_cast<size_t>(i)] +=
                    p.amplitude * std::exp(-std::pow((r - p.center) / p.width, 2));
            } else if (p.family == "annular_patch") {
                const double x = (r - p.center) / p.width;
                if (std::abs(x) < 1.0)
                    vals[static_cast<size_t>(i)] += p.amplitude * std::exp(1.0) *
                                                    std::exp(-1.0 / (1.0 - x * x));
            } else {
                vals[static_cast<size_t>(i)] +=
                    p.amplitude * std::pow(sc.r0 / r, p.exponent);
            }
        }
    }
    w.mirror_negative_modes();

    if (sc.project_to_manifold) {
        const ConformalMap map(sc.r0, sc.map_coefficients);
        const FarField far = far_field_coeffs(sc.vx, sc.vy);
        // Ascending moment fixes; under a nontrivial map the conjugate modes
        // couple back weakly, so sweep until the residuals settle.
        for (int pass = 0; pass < 8; ++pass) {
            std::vector<complexd> res = mapped_manifold_residual(map, w, far);
            double worst = 0.0;
            for (const complexd& r : res) worst = std::max(worst, std::abs(r));
            if (worst <= 1e-12 * std::max(1.0, l2_norm(w))) break;
            for (int k = 0; k <= sc.N; ++k) {
                res = mapped_manifold_residual(map, w, far);
                w.mode(k) = project_moment_free(
                    k, w.mode(k),
                    radial_moment(k, w.mode(k)) - res[static_cast<size_t>(k)]);
                w.mirror_negative_modes();
            }
        }
    }
    return w;
}

int run_scenario(const Scenario& sc) {
    namespace fs = std::filesystem;
    fs::create_directories(sc.directory);
    if (sc.solver == "verify") return run_verify(sc);

    const GridPtr rg = Grid::radial(sc.r0, sc.r_max, sc.radial_panel_width,
                                    sc.points_per_panel);
    const GridPtr sg = Grid::spectral(sc.lambda_min, sc.lambda_max,
                                      sc.spectral_panel_width, sc.points_per_panel);
    TransformCache cache(rg, sg);

    const ConformalMap map(sc.r0, sc.map_coefficients);
    const FarField far = far_field_coeffs(sc.vx, sc.vy);
    const VorticityState w0 = initial_state(sc, rg);

    const double circ = mapped_circulation(map, w0);
    const double scale = l2_norm(w0);
    if (std::abs(circ) > 1e-8 * scale)
        std::fprintf(stderr,
                     "vortexbc: warning: initial circulation %.3e is not zero; "
                     "the reconstructed velocity is not the decaying field\n",
                     circ);

    try {
        TrajectoryRecord rec;
        ControlSolution ctrl;
        bool has_ctrl = false;

        if (sc.solver == "stokes" || sc.solver == "map") {
            rec = evolve_stokes_mapped(map, w0, far, sc.T, sc.steps(), cache);
        } else if (sc.solver == "oseen") {
            const VelocityState vel = stream_field(sc.N, rg, sc.stream_x, sc.stream_y);
            const BoundaryControl u(sc.N, 0.0, sc.dt, sc.steps() + 1);
            rec.times.push_back(0.0);
            rec.states.push_back(w0);
            VorticityState w = w0;
            for (int j = 0; j < sc.steps(); ++j) {
                OseenStepReport rep;
                w = step_oseen(w, vel, u, j * sc.dt, sc.dt, cache, &rep);
                StepDiagnostics d;
                d.cfl_number = rep.cfl_number;
                d.tail_fraction = rep.tail_fraction;
                rec.times.push_back((j + 1) * sc.dt);
                rec.states.push_back(w);
                rec.diagnostics.push_back(d);
            }
        } else if (sc.solver == "helmholtz") {
            const BoundaryControl u(sc.N, 0.0, sc.dt, sc.steps() + 1);
            rec = solve_helmholtz(w0, far, u, sc.T, sc.dt, cache, sc.options);
        } else {
            ctrl = solve_noslip_control(w0, far, sc.T, sc.dt, cache, sc.options);
            rec = ctrl.trajectory;
            has_ctrl = true;
        }

        emit_outputs(sc, map, far, rec, has_ctrl ? &ctrl : nullptr);
        return 0;
    } catch (const std::runtime_error& e) {
        const json err{{"error",
                        {{"code", "non_convergence"},
                         {"solver", sc.solver},
                         {"message", e.what()}}}};
        write_json_file(fs::path(sc.directory) / "error.json", err);
        std::fprintf(stderr, "%s\n", err.dump().c_str());
        return 3;
    }
}

} // namespace vortexbc
