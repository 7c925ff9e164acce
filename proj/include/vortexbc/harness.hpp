#pragma once

#include <string>
#include <vector>

#include "vortexbc/conformal.hpp"
#include "vortexbc/nonlinear.hpp"

namespace vortexbc {

// One named analytic radial profile contributing to vorticity mode k:
//   gaussian_bump   amp * exp(-((r - center) / width)^2)
//   annular_patch   amp * e * exp(-1 / (1 - x^2)) on |x| < 1, x = (r - center) / width
//   power_tail      amp * (r0 / r)^exponent
// Profiles targeting the same k add; negative modes follow by conjugation.
struct ProfileSpec {
    std::string family;
    int k = 0;
    complexd amplitude{1.0, 0.0};
    double center = 4.0;
    double width = 1.0;
    double exponent = 4.0;
};

// Fully resolved run configuration.  load_scenario fills every field, so a
// Scenario in hand always passes validation and the echo written next to the
// diagnostics reproduces the run exactly.
struct Scenario {
    double r0 = 1.0;
    std::vector<complexd> map_coefficients;

    int N = 4;
    double r_max = 24.0;
    double lambda_min = 1e-3;
    double lambda_max = 16.0;
    double radial_panel_width = 0.0;   // resolved to 2 pi / lambda_max
    double spectral_panel_width = 0.0; // resolved to 2 pi / r_max
    int points_per_panel = 16;

    double vx = 0.0;
    double vy = 0.0;
    std::vector<ProfileSpec> initial;
    bool project_to_manifold = false;

    std::string solver = "stokes";
    double T = 1.0;
    double dt = 0.05;
    double stream_x = 0.0; // oseen advecting stream
    double stream_y = 0.0;
    SolverOptions options;

    std::string directory = "out";
    int emit_every = 1;

    int steps() const;
};

// Parses, validates, and resolves a scenario.  Unknown keys are rejected with
// the nearest valid key named; validation errors carry the offending key
// path.  Both throw std::invalid_argument; unreadable or unparsable files
// throw std::runtime_error with position info.
Scenario load_scenario(const std::string& path);
Scenario scenario_from_json_text(const std::string& text, const std::string& origin);

// The scenario's initial vorticity sampled on a grid, mirrored to k < 0.
// With project_to_manifold set, every mode k = 0..N is then adjusted by a
// moment bump until the (mapped) manifold residuals vanish, so controlled
// runs start from admissible data.
VorticityState initial_state(const Scenario& sc, const GridPtr& grid);

// Executes the scenario and writes its outputs into sc.directory:
//   modes.csv         t, k, r, re_w, im_w
//   velocity.csv      t, k, r, re_vr, im_vr, re_vphi, im_vphi
//   diagnostics.json  per-emission records, scenario echo, versions
//   control.csv       t, k, re_u, im_u (control runs)
//   verify.json       pass/fail per identity check (verify runs)
// Returns the process exit status: 0 on success, 1 when a verify check
// fails, 3 when a solver does not converge (error.json is written and the
// error object printed to stderr).
int run_scenario(const Scenario& sc);

} // namespace vortexbc
