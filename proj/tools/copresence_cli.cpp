// Command-line front end: generate, train, eval, predict, report, ablate.

#include "copresence/checkpoint.hpp"
#include "copresence/config.hpp"
#include "copresence/dataset.hpp"
#include "copresence/errors.hpp"
#include "copresence/report.hpp"
#include "copresence/trainer.hpp"
#include "copresence/version.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace copresence;

namespace {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfig = 2, kIo = 3, kTraining = 4, kCompatibility = 5 };

CliConfig resolved_config(const std::string& path) {
    auto cfg = load_cli_config(path.empty() ? std::nullopt : std::optional<fs::path>(path));
    apply_seed_override(cfg, std::getenv("COPRESENCE_SEED"));
    return cfg;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw IoError("cannot create directory '" + dir.string() + "'");
    }
}

void write_json(const fs::path& path, const nlohmann::json& j) { report::write_text(path, j.dump(2) + "\n"); }

std::string svg_stamp(const std::string& svg, const std::string& config_hash) {
    const auto pos = svg.find('\n');
    return svg.substr(0, pos + 1) + "<!-- copresence " + std::string(kVersion) + " config " + config_hash + " -->\n" +
           svg.substr(pos + 1);
}

void print_line(const nlohmann::json& j) { std::cout << j.dump() << std::endl; }

// -------------------------------------------------------------------------------------------------

struct GenerateArgs {
    std::string config;
    std::string out;
    std::optional<std::size_t> count;
};

int cmd_generate(const GenerateArgs& a) {
    auto cfg = resolved_config(a.config);
    if (a.count) cfg.dataset.count = *a.count;
    cfg.dataset.validate();
    const fs::path out = a.out.empty() ? fs::path(cfg.dataset_dir) : fs::path(a.out);
    if (out.empty()) {
        throw ConfigError("generate: no output directory (--out or dataset_dir)");
    }
    data::WriteSummary summary;
    const auto ds = data::generate_dataset(cfg.dataset, out, &summary);
    std::map<std::string, std::size_t> strata, splits;
    for (const auto& s : ds.samples) {
        ++strata[s.stratum];
        ++splits[s.split];
    }
    nlohmann::json j{{"event", "generate"},
                     {"dir", out.string()},
                     {"samples", ds.samples.size()},
                     {"splits", splits},
                     {"strata", strata},
                     {"files_written", summary.files_written},
                     {"files_unchanged", summary.files_unchanged}};
    print_line(j);
    if (summary.unchanged()) {
        std::cout << "dataset unchanged\n";
    }
    return kOk;
}

// -------------------------------------------------------------------------------------------------

struct TrainArgs {
    std::string config;
    std::string dataset;
    std::string out;
    std::string ablation = "full";
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> samples;
};

void apply_ablation(train::TrainConfig& t, const std::string& ablation) {
    if (ablation == "no-unc") {
        t.disable_mfe = true;
        t.disable_pul = true;
        t.lambda = 0.0;
    } else if (ablation == "no-mfe") {
        t.disable_mfe = true;
    } else if (ablation == "no-pul") {
        t.disable_pul = true;
        t.lambda = 0.0;
    } else if (ablation != "full") {
        throw ConfigError("unknown ablation '" + ablation + "'");
    }
}

nlohmann::json evaluation_document(const train::Evaluation& ev, const std::vector<std::string>& categories,
                                   const std::string& track, const nlohmann::json& config) {
    auto j = track == "classification" ? report::classification_json(ev, categories)
                                       : report::estimation_json(ev, categories);
    j["tool_version"] = kVersion;
    j["config"] = config;
    return j;
}

void write_evaluation(const fs::path& out, const nlohmann::json& doc, const std::string& track,
                      const std::string& config_hash) {
    if (track == "classification") {
        write_json(out / "classification.json", doc);
        report::write_text(out / "classification.csv", report::classification_csv(doc));
        return;
    }
    write_json(out / "evaluation.json", doc);
    report::write_text(out / "per_category.csv", report::estimation_csv(doc));
    report::write_text(out / "strata.csv", report::strata_csv(doc));
    std::vector<std::string> labels;
    report::Series ssd{"SSD", {}};
    for (const auto& r : doc.at("strata")) {
        labels.push_back(r.at("stratum").get<std::string>());
        ssd.values.push_back(report::summary_from_json(r).ssd);
    }
    report::write_text(out / "strata.svg", svg_stamp(report::svg_bar_chart("SSD per co-presence count", labels, {ssd}),
                                                     config_hash));
}

int cmd_train(const TrainArgs& a) {
    auto cfg = resolved_config(a.config);
    apply_ablation(cfg.train, a.ablation);
    if (a.epochs) cfg.train.epochs = *a.epochs;
    if (a.samples) cfg.train.max_samples = *a.samples;
    cfg.train.validate();
    const fs::path dataset_dir = a.dataset.empty() ? fs::path(cfg.dataset_dir) : fs::path(a.dataset);
    const fs::path out = a.out.empty() ? fs::path(cfg.output_dir) : fs::path(a.out);
    if (dataset_dir.empty() || out.empty()) {
        throw ConfigError("train: dataset and output directories are required");
    }
    const auto ds = data::load_dataset(dataset_dir);
    ensure_dir(out);
    const nlohmann::json resolved = cfg;
    write_json(out / "resolved_config.json", {{"tool_version", kVersion}, {"config", resolved}});

    std::ofstream log(out / "log.jsonl", std::ios::trunc);
    auto logger = [&](const nlohmann::json& j) {
        print_line(j);
        log << j.dump() << '\n';
    };
    train::TrainResult result = [&] {
        try {
            return train::train(cfg.train, ds, logger);
        } catch (const ConfigError&) {
            throw;
        } catch (const IoError&) {
            throw;
        } catch (const CompatibilityError& e) {
            logger({{"event", "error"}, {"cause", e.what()}});
            throw;
        } catch (const std::exception& e) {
            logger({{"event", "error"}, {"cause", e.what()}});
            throw TrainingError(e.what());
        }
    }();
    const auto& rec = result.record;
    nlohmann::json meta{{"config", resolved}, {"config_hash", rec.config_hash}, {"best_epoch", rec.best_epoch}};
    save_checkpoint(out / "checkpoint.json", result.model, ds.categories, meta);
    auto record = report::run_record_json(rec);
    record["resolved_config"] = resolved;
    write_json(out / "run_record.json", record);
    write_json(out / "timing.json", {{"wall_seconds", rec.wall_seconds}});
    report::write_text(out / "loss_curve.csv", report::loss_curve_csv(rec));
    report::write_text(out / "loss_curve.svg", svg_stamp(report::loss_curve_svg(rec), rec.config_hash));

    const auto ev = train::evaluate(result.model, ds, "test");
    write_evaluation(out, evaluation_document(ev, ds.categories, "estimation", resolved), "estimation",
                     rec.config_hash);
    logger({{"event", "done"},
            {"best_epoch", rec.best_epoch},
            {"test_ssd", ev.estimation.overall.ssd},
            {"test_r2", ev.estimation.overall.r2}});
    return kOk;
}

// -------------------------------------------------------------------------------------------------

struct EvalArgs {
    std::string checkpoint;
    std::string dataset;
    std::string track = "estimation";
    std::string split = "test";
    std::string out;
};

int cmd_eval(const EvalArgs& a) {
    const auto ckpt = load_checkpoint(a.checkpoint);
    const auto ds = data::load_dataset(a.dataset);
    require_same_categories(ckpt.categories, ds.categories);
    const auto ev = train::evaluate(ckpt.model, ds, a.split);
    const nlohmann::json config = ckpt.metadata.value("config", nlohmann::json::object());
    const auto doc = evaluation_document(ev, ds.categories, a.track, config);
    if (!a.out.empty()) {
        ensure_dir(a.out);
        write_evaluation(a.out, doc, a.track, ckpt.metadata.value("config_hash", std::string("unknown")));
    }
    std::cout << (a.track == "classification" ? report::classification_csv(doc) : report::estimation_csv(doc));
    if (a.track == "estimation") {
        std::cout << '\n' << report::strata_csv(doc);
    }
    return kOk;
}

// -------------------------------------------------------------------------------------------------

struct PredictArgs {
    std::string checkpoint;
    std::string image;
    std::string svg;
};

int cmd_predict(const PredictArgs& a) {
    const auto ckpt = load_checkpoint(a.checkpoint);
    const Image img = read_png(a.image);
    const std::size_t size = ckpt.model.config().image_size;
    const auto out = ckpt.model.forward_infer(resize_bilinear(img, size, size));
    std::vector<std::size_t> order(out.prediction.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return out.prediction[x] > out.prediction[y]; });
    nlohmann::json rows = nlohmann::json::array();
    std::vector<std::string> labels;
    report::Series probs{"probability", {}}, unc{"uncertainty", {}};
    for (std::size_t i : order) {
        const double u = out.category_uncertainty.empty() ? 0.0 : out.category_uncertainty[i];
        rows.push_back({{"category", ckpt.categories[i]}, {"probability", out.prediction[i]}, {"uncertainty", u}});
        labels.push_back(ckpt.categories[i]);
        probs.values.push_back(out.prediction[i]);
        unc.values.push_back(u);
    }
    print_line({{"image", a.image}, {"uncertainty", out.uncertainty}, {"tool_version", kVersion}, {"rows", rows}});
    if (!a.svg.empty()) {
        report::write_text(a.svg, report::svg_bar_chart("per-weather estimate", labels, {probs, unc}));
    }
    return kOk;
}

// -------------------------------------------------------------------------------------------------

struct ReportArgs {
    std::vector<std::string> runs;
    std::string out;
};

int cmd_report(const ReportArgs& a) {
    std::vector<report::NamedEstimation> runs;
    std::vector<std::string> categories;
    for (const auto& dir : a.runs) {
        const fs::path file = fs::path(dir) / "evaluation.json";
        if (!fs::is_regular_file(file)) {
            throw IoError("run directory '" + dir + "' has no evaluation.json");
        }
        nlohmann::json est;
        try {
            est = nlohmann::json::parse(data::read_text_file(file));
        } catch (const nlohmann::json::parse_error& e) {
            throw IoError("'" + file.string() + "' is not valid JSON: " + e.what());
        }
        const auto cats = est.at("categories").get<std::vector<std::string>>();
        if (categories.empty()) {
            categories = cats;
        } else {
            require_same_categories(categories, cats);
        }
        runs.push_back({fs::path(dir).lexically_normal().filename().string(), est});
        if (runs.back().name.empty()) runs.back().name = dir;
    }
    const std::string per_category = report::comparison_csv(runs, "per_category", "category");
    const std::string strata = report::comparison_csv(runs, "strata", "stratum");
    std::cout << per_category << '\n' << strata;
    if (!a.out.empty()) {
        ensure_dir(a.out);
        report::write_text(fs::path(a.out) / "comparison.csv", per_category);
        report::write_text(fs::path(a.out) / "strata_comparison.csv", strata);
        std::vector<report::Series> cat_series, strata_series;
        std::vector<std::string> strata_labels;
        for (const auto& r : runs) {
            report::Series s{r.name, {}}, t{r.name, {}};
            for (const auto& row : r.estimation.at("per_category")) s.values.push_back(report::summary_from_json(row).ssd);
            for (const auto& row : r.estimation.at("strata")) {
                t.values.push_back(report::summary_from_json(row).ssd);
                if (&r == &runs.front()) strata_labels.push_back(row.at("stratum").get<std::string>());
            }
            cat_series.push_back(s);
            strata_series.push_back(t);
        }
        report::write_text(fs::path(a.out) / "comparison.svg",
                           report::svg_bar_chart("SSD per category", categories, cat_series));
        report::write_text(fs::path(a.out) / "strata_comparison.svg",
                           report::svg_bar_chart("SSD per co-presence count", strata_labels, strata_series));
    }
    return kOk;
}

// -------------------------------------------------------------------------------------------------

struct AblateArgs {
    std::string config;
    std::string dataset;
    std::string out;
    std::string axis;
    std::vector<std::string> values;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> samples;
};

int cmd_ablate(const AblateArgs& a) {
    auto cfg = resolved_config(a.config);
    if (a.epochs) cfg.train.epochs = *a.epochs;
    if (a.samples) cfg.train.max_samples = *a.samples;
    cfg.train.validate();
    const auto axis = train::sweep_axis_from_string(a.axis);
    const auto values = a.values.empty() ? train::default_sweep_values(axis) : a.values;
    for (const auto& v : values) {
        (void)train::apply_sweep_value(cfg.train, axis, v);
    }
    const fs::path dataset_dir = a.dataset.empty() ? fs::path(cfg.dataset_dir) : fs::path(a.dataset);
    const auto ds = data::load_dataset(dataset_dir);
    const auto table = train::ablation_sweep(axis, values, cfg.train, ds, print_line);
    auto doc = report::ablation_json(table);
    doc["config"] = cfg;
    const std::string csv = report::ablation_csv(table);
    std::cout << csv;
    if (!a.out.empty()) {
        ensure_dir(a.out);
        const std::string stem = "ablation_" + train::to_string(axis);
        write_json(fs::path(a.out) / (stem + ".json"), doc);
        report::write_text(fs::path(a.out) / (stem + ".csv"), csv);
        report::Series ssd{"SSD", {}};
        for (const auto& r : table.rows) ssd.values.push_back(r.metrics.ssd);
        report::write_text(fs::path(a.out) / (stem + ".svg"),
                           report::svg_bar_chart("SSD by " + train::to_string(axis), values, {ssd}));
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-weather co-presence estimation: data generation, training and evaluation"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "Render a synthetic dataset");
    g->add_option("--config", gen.config, "Config file (JSON)");
    g->add_option("--out", gen.out, "Output dataset directory");
    g->add_option("--count", gen.count, "Override sample count");

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train a model and write a run directory");
    t->add_option("--config", tr.config, "Config file (JSON)");
    t->add_option("--dataset", tr.dataset, "Dataset directory");
    t->add_option("--out", tr.out, "Run output directory");
    t->add_option("--ablation", tr.ablation, "Module ablation")
        ->check(CLI::IsMember({"full", "no-unc", "no-mfe", "no-pul"}));
    t->add_option("--epochs", tr.epochs, "Override epoch count");
    t->add_option("--samples", tr.samples, "Limit training-split samples");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
    e->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
    e->add_option("--dataset", ev.dataset, "Dataset directory")->required();
    e->add_option("--track", ev.track, "Evaluation track")->check(CLI::IsMember({"estimation", "classification"}));
    e->add_option("--split", ev.split, "Split name")->check(CLI::IsMember({"train", "test"}));
    e->add_option("--out", ev.out, "Directory for JSON/CSV reports");

    PredictArgs pr;
    auto* p = app.add_subcommand("predict", "Per-weather probabilities and uncertainty for one image");
    p->add_option("--checkpoint", pr.checkpoint, "Checkpoint file")->required();
    p->add_option("--image", pr.image, "PNG image")->required();
    p->add_option("--svg", pr.svg, "Optional SVG bar chart output");

    ReportArgs rp;
    auto* r = app.add_subcommand("report", "Compare run directories (first run is the baseline)");
    r->add_option("runs", rp.runs, "Run directories")->required();
    r->add_option("--out", rp.out, "Directory for tables and figures");

    AblateArgs ab;
    auto* a = app.add_subcommand("ablate", "Sweep one hyper-parameter axis");
    a->add_option("--config", ab.config, "Config file (JSON)");
    a->add_option("--dataset", ab.dataset, "Dataset directory");
    a->add_option("--out", ab.out, "Output directory");
    a->add_option("--axis", ab.axis, "Sweep axis")->required()->check(CLI::IsMember({"latent", "loss", "lambda"}));
    a->add_option("--values", ab.values, "Values (defaults per axis)");
    a->add_option("--epochs", ab.epochs, "Override epoch count");
    a->add_option("--samples", ab.samples, "Limit training-split samples");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*g) return cmd_generate(gen);
        if (*t) return cmd_train(tr);
        if (*e) return cmd_eval(ev);
        if (*p) return cmd_predict(pr);
        if (*r) return cmd_report(rp);
        if (*a) return cmd_ablate(ab);
    } catch (const ConfigError& err) {
        std::cerr << "config error: " << err.what() << '\n';
        return kConfig;
    } catch (const IoError& err) {
        std::cerr << "I/O error: " << err.what() << '\n';
        return kIo;
    } catch (const CompatibilityError& err) {
        std::cerr << "compatibility error: " << err.what() << '\n';
        return kCompatibility;
    } catch (const TrainingError& err) {
        std::cerr << "training error: " << err.what() << '\n';
        return kTraining;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return kFailure;
    }
    return kFailure;
}
