#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "match/pipeline.hpp"

namespace {

std::vector<std::string> split_ids(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"job-to-candidate matching pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::string jobs_csv;
    std::uint64_t seed = 0;
    bool seed_set = false;

    const char* stages[] = {"gen-data",    "train-dlem", "train-graph", "embed",
                            "build-index", "recommend",  "evaluate",    "export-embeddings"};
    std::string chosen;
    for (const char* name : stages) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "TOML config file");
        sub->add_option("--seed", seed, "override the global seed")->each([&](const std::string&) {
            seed_set = true;
        });
        if (std::string(name) == "recommend")
            sub->add_option("--jobs", jobs_csv, "comma-separated job ids (default: all)");
        sub->callback([&chosen, name] { chosen = name; });
    }

    CLI11_PARSE(app, argc, argv);

    try {
        match::PipelineConfig cfg = config_path.empty()
                                        ? match::default_pipeline_config()
                                        : match::load_pipeline_config(config_path);
        if (seed_set) {
            cfg.seed = seed;
            match::refresh_config_hash(cfg);
        }
        match::run_stage(chosen, cfg, split_ids(jobs_csv));
        return 0;
    } catch (const match::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const match::ParameterError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const match::DependencyError& e) {
        std::cerr << "dependency error: " << e.what() << "\n";
        return 3;
    } catch (const match::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 4;
    } catch (const match::FormatError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
