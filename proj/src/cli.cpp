#include "editlab/cli.hpp"

#include <ostream>

#include <CLI11.hpp>

#include "editlab/error.hpp"
#include "editlab/pipeline.hpp"
#include "editlab/report.hpp"

namespace editlab {

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"locate-then-edit workbench for tiny language models"};
    app.name("editlab");
    app.fallthrough();
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolName) + " " + kToolVersion);

    std::string config_path, seed_str, out_dir, metric, layers, batch_size, n_batches;
    auto* opt_config =
        app.add_option("--config", config_path, "key-value config file (flags override it)");
    auto* opt_seed = app.add_option("--seed", seed_str, "run seed");
    auto* opt_out = app.add_option("--out", out_dir, "run directory for artifacts");
    auto* opt_metric =
        app.add_option("--metric", metric, "scoring rule: exact or prob");
    auto* opt_layers =
        app.add_option("--layers", layers, "edit layers: 'auto' or comma-separated indices");
    auto* opt_batch = app.add_option("--batch-size", batch_size, "edit requests per batch");
    auto* opt_nbatches = app.add_option("--n-batches", n_batches, "sequential edit batches");

    auto* c_generate = app.add_subcommand("generate", "build the fact corpus and tokenizer");
    auto* c_train = app.add_subcommand("train", "train the model on the generated corpus");
    auto* c_trace = app.add_subcommand("trace", "locate the decisive (token, layer) site");
    auto* c_edit = app.add_subcommand("edit", "apply the planned batched edits");
    auto* c_quadrants =
        app.add_subcommand("quadrants", "evaluate all four edit/test polarity cells");
    auto* c_factcheck =
        app.add_subcommand("factcheck", "true/false verification accuracy, pre vs post edit");
    auto* c_selftest = app.add_subcommand("selftest", "check the metric pipeline on scripted "
                                                      "responders with known scores");
    auto* c_audit =
        app.add_subcommand("table-audit", "recompute discrepancy columns of published results");
    std::string table_path;
    c_audit->add_option("table", table_path, "JSON file of published table rows")->required();

    try {
        std::vector<const char*> argv;
        argv.push_back("editlab");
        for (const auto& a : args) argv.push_back(a.c_str());
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion& e) {
        out << e.what() << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        RunConfig cfg;
        if (opt_config->count() > 0) cfg.load_file(config_path);
        std::vector<std::string> problems;
        auto override_kv = [&](const CLI::Option* opt, const char* key, const std::string& v) {
            if (opt->count() == 0) return;
            if (const std::string e = cfg.apply(key, v); !e.empty()) problems.push_back(e);
        };
        override_kv(opt_seed, "seed", seed_str);
        override_kv(opt_out, "out", out_dir);
        override_kv(opt_metric, "metric", metric);
        override_kv(opt_layers, "plan.layers", layers);
        override_kv(opt_batch, "plan.batch_size", batch_size);
        override_kv(opt_nbatches, "plan.n_batches", n_batches);
        if (!problems.empty()) {
            throw validation_error("invalid flags: " + [&] {
                std::string joined;
                for (size_t i = 0; i < problems.size(); ++i)
                    joined += (i ? "; " : "") + problems[i];
                return joined;
            }());
        }

        // Commands that only report write artifacts when a run directory was
        // actually named.
        const bool have_dir = opt_out->count() > 0 || opt_config->count() > 0;

        if (*c_generate) {
            cmd_generate(cfg, out);
        } else if (*c_train) {
            cmd_train(cfg, out);
        } else if (*c_trace) {
            cmd_trace(cfg, out);
        } else if (*c_edit) {
            cmd_edit(cfg, out);
        } else if (*c_quadrants) {
            cmd_quadrants(cfg, out);
        } else if (*c_factcheck) {
            cmd_factcheck(cfg, out);
        } else if (*c_selftest) {
            if (!cmd_selftest(have_dir ? cfg.out_dir : std::string(), out)) return 3;
        } else if (*c_audit) {
            cmd_table_audit(table_path, have_dir ? cfg.out_dir : std::string(), out);
        }
        return 0;
    } catch (const validation_error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const numeric_error& e) {
        err << "numeric error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace editlab
