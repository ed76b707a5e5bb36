// tabgns: gate-based architecture search for tabular MLPs.
//
//   tabgns search   --out DIR [--config FILE] [--seed N] [--section.key=value ...]
//   tabgns baseline --out DIR --method=large-mlp|random-search [...]
//   tabgns evaluate --checkpoint PATH [--out DIR] [...]
//   tabgns report   --out DIR RUN_DIR [RUN_DIR ...]

#include <iostream>
#include <string>
#include <vector>

#include "tabgns/errors.hpp"
#include "tabgns/experiment.hpp"
#include "tabgns/parallel.hpp"

namespace {

void usage(std::ostream& out) {
    out << "usage: tabgns <command> [options]\n"
           "\n"
           "commands:\n"
           "  search     gate-based architecture search + fine-tune\n"
           "  baseline   train a fixed large MLP or run random search\n"
           "  evaluate   score a saved checkpoint on a dataset\n"
           "  report     aggregate run directories into comparison tables\n"
           "\n"
           "options:\n"
           "  --config FILE          JSON config (flags override file values)\n"
           "  --seed N               run seed (alias for --search.seed)\n"
           "  --out DIR              output directory\n"
           "  --checkpoint PATH      model checkpoint (evaluate)\n"
           "  --section.key=value    override any config key, e.g. --search.tau=0.5\n"
           "\n"
           "report takes run directories as positional arguments.\n"
           "TABGNS_THREADS caps parallelism; 0 or 1 forces the determinism path.\n";
}

struct Flag {
    std::string key;
    std::string value;
};

int run(int argc, char** argv) {
    if (argc < 2) {
        usage(std::cerr);
        return 2;
    }
    const std::string cmd = argv[1];
    if (cmd == "-h" || cmd == "--help" || cmd == "help") {
        usage(std::cout);
        return 0;
    }
    if (cmd != "search" && cmd != "baseline" && cmd != "evaluate" && cmd != "report") {
        std::cerr << "tabgns: unknown command '" << cmd << "'\n";
        usage(std::cerr);
        return 2;
    }

    std::string config_path;
    std::vector<Flag> flags;
    std::vector<std::string> positionals;
    for (int i = 2; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg.rfind("--", 0) != 0) {
            positionals.push_back(arg);
            continue;
        }
        const std::string body = arg.substr(2);
        std::string key;
        std::string value;
        const std::size_t eq = body.find('=');
        if (eq != std::string::npos) {
            key = body.substr(0, eq);
            value = body.substr(eq + 1);
        } else {
            key = body;
            if (i + 1 >= argc) {
                throw tabgns::ConfigError("flag --" + key + " needs a value");
            }
            value = argv[++i];
        }
        if (key.empty()) throw tabgns::ConfigError("bad flag '" + arg + "'");
        if (key == "config") {
            config_path = value;
        } else {
            flags.push_back({key, value});
        }
    }

    tabgns::ExperimentConfig config;
    if (!config_path.empty()) config = tabgns::load_config_file(config_path);
    for (const Flag& f : flags) tabgns::apply_override(config, f.key, f.value);

    if (cmd == "report") {
        return tabgns::cmd_report(config, positionals);
    }
    if (!positionals.empty()) {
        throw tabgns::ConfigError("unexpected argument '" + positionals.front() + "'");
    }
    if (cmd == "search") return tabgns::cmd_search(std::move(config));
    if (cmd == "baseline") return tabgns::cmd_baseline(std::move(config));
    return tabgns::cmd_evaluate(std::move(config));
}

} // namespace

int main(int argc, char** argv) {
    tabgns::configure_threads_from_env("TABGNS_THREADS");
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "tabgns: " << e.what() << "\n";
        return tabgns::exit_code_for(e);
    }
}
