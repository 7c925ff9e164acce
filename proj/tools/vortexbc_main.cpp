#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "vortexbc/harness.hpp"

namespace {

struct SubcommandSpec {
    const char* name;
    const char* help;
};

constexpr SubcommandSpec kSubcommands[] = {
    {"stokes", "Heat evolution of the vorticity modes with Robin boundary data"},
    {"oseen", "Linear advection-diffusion around a frozen uniform stream"},
    {"helmholtz", "Self-consistent vorticity evolution by Picard iteration"},
    {"control", "No-slip boundary control via the outer fixed point"},
    {"map", "Heat evolution on a conformally mapped exterior domain"},
    {"verify", "Kernel, transform, and semigroup identity checks"},
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spectral solver for the vorticity equation exterior to a disc"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_dir;
    int emit_every = 0;
    for (const SubcommandSpec& spec : kSubcommands) {
        CLI::App* sub = app.add_subcommand(spec.name, spec.help);
        sub->add_option("--scenario", scenario_path, "Scenario file (JSON)")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "Output directory (overrides the scenario)");
        sub->add_option("--emit-every", emit_every,
                        "Emission cadence in steps (overrides the scenario)")
            ->check(CLI::PositiveNumber);
    }

    CLI11_PARSE(app, argc, argv);
    const std::string cmd = app.get_subcommands().front()->get_name();

    try {
        vortexbc::Scenario sc = vortexbc::load_scenario(scenario_path);
        if (sc.solver != cmd) {
            std::fprintf(stderr,
                         "vortexbc: %s: scenario requests run.solver \"%s\"; invoke "
                         "that subcommand\n",
                         scenario_path.c_str(), sc.solver.c_str());
            return 2;
        }
        if (!out_dir.empty()) sc.directory = out_dir;
        if (emit_every > 0) sc.emit_every = emit_every;
        return vortexbc::run_scenario(sc);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "vortexbc: %s\n", e.what());
        return 2;
    }
}
