#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "nlz/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Nonlinear Landau-Zener experiments"};
    app.set_version_flag("--version", std::string(nlz::kToolVersion));
    std::string kind, config, out;
    int threads = 1;
    app.add_option("kind", kind, "experiment kind")->required()->check(CLI::IsMember(nlz::experiment_kinds()));
    app.add_option("--config", config, "JSON configuration file")->required();
    app.add_option("--out", out, "output directory (overrides NLZ_OUT_DIR and output_dir)");
    app.add_option("--threads", threads, "worker threads for independent runs")->check(CLI::PositiveNumber);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    const nlz::RunOutcome res = nlz::run_from_file(kind, config, out, threads);
    if (res.exit_code != 0) {
        nlz::Json err = {{"status", "error"}, {"exit_code", res.exit_code}};
        if (res.manifest.contains("error")) err["error"] = res.manifest["error"];
        std::cerr << err.dump() << "\n";
    } else {
        std::cout << "wrote " << res.manifest["files"].size() << " data file(s) and manifest.json\n";
    }
    return res.exit_code;
}
