#include "copresence/checkpoint.hpp"
#include "copresence/config.hpp"
#include "copresence/report.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

using namespace copresence;
namespace fs = std::filesystem;

namespace {

model::ModelConfig tiny_model() {
    model::ModelConfig c;
    c.categories = 14;
    c.image_size = 16;
    c.patch = 4;
    c.channels = 8;
    c.depth = 1;
    c.latent = 4;
    c.seed = 12;
    return c;
}

data::Dataset tiny_dataset() {
    data::DatasetConfig dc;
    dc.count = 30;
    dc.image_size = 16;
    dc.seed = 2;
    auto g = data::generate_in_memory(dc);
    return {"", g.categories, std::move(g.samples)};
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(Checkpoint, JsonRoundTripIsBitExact) {
    const model::MeFormer m(tiny_model());
    const auto names = sim::category_names(14);
    const auto back = checkpoint_from_json(nlohmann::json::parse(checkpoint_json(m, names).dump()));
    EXPECT_EQ(back.categories, names);
    EXPECT_EQ(nlohmann::json(back.model.config()), nlohmann::json(m.config()));
    for (const auto& p : m.params()) EXPECT_EQ(back.model.params().at(p.name).value, p.value) << p.name;
}

TEST(Checkpoint, SaveLoadReproducesEvaluationExactly) {
    const auto ds = tiny_dataset();
    const model::MeFormer m(tiny_model());
    const fs::path path = fs::temp_directory_path() / "copresence_ckpt_test.json";
    save_checkpoint(path, m, ds.categories, {{"note", "x"}});
    const auto loaded = load_checkpoint(path);
    EXPECT_EQ(loaded.metadata.at("note"), "x");
    const auto a = train::evaluate(m, ds, "test");
    const auto b = train::evaluate(loaded.model, ds, "test");
    EXPECT_EQ(a.predictions, b.predictions);
    EXPECT_EQ(a.uncertainty, b.uncertainty);
    EXPECT_EQ(report::estimation_json(a, ds.categories), report::estimation_json(b, ds.categories));
    fs::remove(path);
}

TEST(Checkpoint, RejectsForeignOrBrokenDocuments) {
    const model::MeFormer m(tiny_model());
    auto j = checkpoint_json(m, sim::category_names(14));
    auto wrong_version = j;
    wrong_version["version"] = 99;
    EXPECT_THROW((void)checkpoint_from_json(wrong_version), CompatibilityError);
    EXPECT_THROW((void)checkpoint_from_json(nlohmann::json{{"format", "other"}}), CompatibilityError);
    auto missing = j;
    missing["parameters"].erase(missing["parameters"].begin());
    EXPECT_THROW((void)checkpoint_from_json(missing), CompatibilityError);
    auto categories = j;
    categories["categories"].erase(categories["categories"].begin());
    EXPECT_THROW((void)checkpoint_from_json(categories), CompatibilityError);
    EXPECT_THROW((void)checkpoint_json(m, sim::category_names(3)), CompatibilityError);
    EXPECT_THROW((void)load_checkpoint(fs::temp_directory_path() / "copresence_no_such_ckpt.json"), IoError);
    const fs::path junk = fs::temp_directory_path() / "copresence_junk_ckpt.json";
    report::write_text(junk, "{not json");
    EXPECT_THROW((void)load_checkpoint(junk), IoError);
    fs::remove(junk);
}

TEST(Checkpoint, CategoryListComparisonNamesFirstDifference) {
    EXPECT_NO_THROW(require_same_categories({"a", "b"}, {"a", "b"}));
    try {
        require_same_categories({"a", "b"}, {"a", "c"});
        FAIL();
    } catch (const CompatibilityError& e) {
        EXPECT_NE(std::string(e.what()).find("index 1"), std::string::npos);
    }
    EXPECT_THROW(require_same_categories({"a"}, {"a", "b"}), CompatibilityError);
}

TEST(Report, NumberFormattingRoundTrips) {
    for (double v : {0.1, 1.0 / 3.0, 2.0e-7, 1234.5, -0.0625}) EXPECT_EQ(std::strtod(report::num(v).c_str(), nullptr), v);
    EXPECT_EQ(report::num(0.5), "0.5");
    EXPECT_EQ(report::num(std::nan("")), "nan");
}

TEST(Report, EstimationTablesHaveOneRowPerCategoryPlusAll) {
    const auto ds = tiny_dataset();
    const model::MeFormer m(tiny_model());
    const auto ev = train::evaluate(m, ds, "test");
    const auto est = report::estimation_json(ev, ds.categories);
    const auto csv = report::estimation_csv(est);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "category,count,ssd,kl,r2,ce");
    EXPECT_EQ(line_count(csv), 1 + ds.categories.size() + 1);
    EXPECT_NE(csv.find("\nall,"), std::string::npos);
    EXPECT_EQ(line_count(report::strata_csv(est)), 1U + 6U);
    EXPECT_EQ(est.at("category_rule"), report::kCategoryRule);
    const auto back = report::summary_from_json(est.at("overall"));
    EXPECT_EQ(back.ssd, ev.estimation.overall.ssd);
}

TEST(Report, ClassificationTableListsAllSixScores) {
    const auto ds = tiny_dataset();
    const model::MeFormer m(tiny_model());
    const auto ev = train::evaluate(m, ds, "test");
    const auto csv = report::classification_csv(report::classification_json(ev, ds.categories));
    for (const char* k : {"\nAP,", "\nAR,", "\nAF1,", "\nOP,", "\nOR,", "\nOF1,"}) EXPECT_NE(csv.find(k), std::string::npos) << k;
}

TEST(Report, ComparisonDeltas) {
    const auto est = [](double ssd) {
        objectives::MetricSummary s;
        s.count = 4;
        s.ssd = ssd;
        s.kl = 0.5;
        s.r2 = 0.8;
        s.ce = 1.0;
        auto row = report::summary_json(s);
        row["category"] = "rainy";
        return nlohmann::json{{"per_category", nlohmann::json::array({row})}, {"overall", report::summary_json(s)}};
    };
    const auto single = report::comparison_csv({{"base", est(2.0)}}, "per_category", "category");
    EXPECT_EQ(single.substr(0, single.find('\n')), "category,run,count,ssd,kl,r2,ce");
    const auto pair = report::comparison_csv({{"base", est(2.0)}, {"ours", est(1.5)}}, "per_category", "category");
    EXPECT_NE(pair.find("rainy,ours,4,1.5,0.5,0.8,1,-25.0%,+0.0%,+0.0%,+0.0%"), std::string::npos);
    const auto self = report::comparison_csv({{"a", est(2.0)}, {"b", est(2.0)}}, "per_category", "category");
    EXPECT_EQ(self.find("-0.0%"), std::string::npos);
    std::istringstream lines(self);
    std::string line;
    std::getline(lines, line);
    while (std::getline(lines, line)) EXPECT_NE(line.find("+0.0%,+0.0%,+0.0%,+0.0%"), std::string::npos) << line;
    EXPECT_DOUBLE_EQ(report::relative_delta(1.340, 2.037), (1.340 - 2.037) / 2.037);
    EXPECT_TRUE(std::isnan(report::relative_delta(1.0, 0.0)));
    auto other = est(1.0);
    other["per_category"][0]["category"] = "snowy";
    EXPECT_THROW((void)report::comparison_csv({{"a", est(2.0)}, {"b", other}}, "per_category", "category"),
                 CompatibilityError);
    EXPECT_THROW((void)report::comparison_csv({}, "per_category", "category"), ConfigError);
}

TEST(Report, RunRecordOmitsWallTime) {
    train::RunRecord r;
    r.config_hash = "abc";
    r.wall_seconds = 12.5;
    r.epochs.push_back({1, 0.5, 0.4, 0.1, 0.3, 0.2});
    const auto j = report::run_record_json(r);
    EXPECT_FALSE(j.dump().find("wall") != std::string::npos);
    EXPECT_EQ(j.at("tool_version"), kVersion);
    EXPECT_EQ(line_count(report::loss_curve_csv(r)), 2U);
    const auto svg = report::loss_curve_svg(r);
    EXPECT_EQ(svg.rfind("<svg", 0), 0U);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(Report, SvgEscapesLabels) {
    const auto svg = report::svg_bar_chart("a<b", {"x&y"}, {{"s\"1", {0.5}}});
    EXPECT_NE(svg.find("a&lt;b"), std::string::npos);
    EXPECT_NE(svg.find("x&amp;y"), std::string::npos);
    EXPECT_NE(svg.find("s&quot;1"), std::string::npos);
    EXPECT_EQ(svg.find("a<b"), std::string::npos);
}

TEST(Report, AblationTableLayout) {
    train::AblationTable t;
    t.axis = train::SweepAxis::lambda;
    for (const char* v : {"1e-3", "1e-4"}) {
        objectives::MetricSummary s;
        s.count = 1;
        t.rows.push_back({v, s, "h"});
    }
    const auto csv = report::ablation_csv(t);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "lambda,ssd,kl,r2,ce");
    EXPECT_EQ(line_count(csv), 3U);
    EXPECT_EQ(report::ablation_json(t).at("rows").size(), 2U);
}

TEST(CliConfig, StrictSchemaAndSeedOverride) {
    const auto c = parse_cli_config(R"({"dataset": {"count": 12}, "train": {"epochs": 3}, "dataset_dir": "d"})");
    EXPECT_EQ(c.dataset.count, 12U);
    EXPECT_EQ(c.train.epochs, 3U);
    EXPECT_EQ(c.dataset_dir, "d");
    EXPECT_THROW((void)parse_cli_config(R"({"datasets": {}})"), ConfigError);
    EXPECT_THROW((void)parse_cli_config(R"({"train": {"epochs": 0}})"), ConfigError);
    EXPECT_THROW((void)parse_cli_config("{"), ConfigError);
    EXPECT_THROW((void)parse_cli_config(R"({"train": {"epochs": "many"}})"), ConfigError);
    auto d = c;
    apply_seed_override(d, "77");
    EXPECT_EQ(d.dataset.seed, 77U);
    EXPECT_EQ(d.train.seed, 77U);
    apply_seed_override(d, nullptr);
    EXPECT_EQ(d.train.seed, 77U);
    EXPECT_THROW(apply_seed_override(d, "7x"), ConfigError);
    EXPECT_EQ(nlohmann::json(parse_cli_config(nlohmann::json(c).dump())), nlohmann::json(c));
    EXPECT_THROW((void)load_cli_config(fs::path("/nonexistent/config.json")), ConfigError);
}
