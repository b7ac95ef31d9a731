#include "copresence/report.hpp"

#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace copresence::report {

std::string num(double v) {
    if (!std::isfinite(v)) {
        return "nan";
    }
    char buf[32];
    for (int precision = 6; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v) {
            break;
        }
    }
    return buf;
}

nlohmann::json summary_json(const objectives::MetricSummary& s) {
    auto finite_or_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    return {{"count", s.count},           {"ssd", finite_or_null(s.ssd)}, {"kl", finite_or_null(s.kl)},
            {"r2", finite_or_null(s.r2)}, {"ce", finite_or_null(s.ce)},   {"r2_count", s.r2_count}};
}

objectives::MetricSummary summary_from_json(const nlohmann::json& j) {
    auto value = [&](const char* key) {
        const auto& v = j.at(key);
        return v.is_null() ? std::nan("") : v.get<double>();
    };
    objectives::MetricSummary s;
    s.count = j.at("count").get<std::size_t>();
    s.ssd = value("ssd");
    s.kl = value("kl");
    s.r2 = value("r2");
    s.ce = value("ce");
    s.r2_count = j.value("r2_count", std::size_t{0});
    return s;
}

nlohmann::json estimation_json(const train::Evaluation& ev, const std::vector<std::string>& categories) {
    nlohmann::json per_category = nlohmann::json::array();
    for (std::size_t c = 0; c < categories.size(); ++c) {
        auto row = summary_json(ev.estimation.per_category.at(c));
        row["category"] = categories[c];
        per_category.push_back(row);
    }
    nlohmann::json strata = nlohmann::json::array();
    for (const auto& s : ev.strata) {
        auto row = summary_json(s.metrics);
        row["stratum"] = s.name;
        strata.push_back(row);
    }
    return {{"track", "estimation"},
            {"split", ev.split},
            {"category_rule", kCategoryRule},
            {"categories", categories},
            {"overall", summary_json(ev.estimation.overall)},
            {"per_category", per_category},
            {"strata", strata}};
}

nlohmann::json classification_json(const train::Evaluation& ev, const std::vector<std::string>& categories) {
    const auto& c = ev.classification;
    nlohmann::json per_category = nlohmann::json::array();
    for (std::size_t i = 0; i < categories.size(); ++i) {
        const auto& k = c.per_category.at(i);
        per_category.push_back({{"category", categories[i]},
                                {"precision", k.precision},
                                {"recall", k.recall},
                                {"f1", k.f1},
                                {"accuracy", k.accuracy},
                                {"precision_undefined", k.precision_undefined},
                                {"recall_undefined", k.recall_undefined},
                                {"tp", k.counts.tp},
                                {"fp", k.counts.fp},
                                {"fn", k.counts.fn},
                                {"tn", k.counts.tn}});
    }
    return {{"track", "classification"},
            {"split", ev.split},
            {"categories", categories},
            {"overall", {{"AP", c.ap}, {"AR", c.ar}, {"AF1", c.af1}, {"OP", c.op}, {"OR", c.orecall}, {"OF1", c.of1}}},
            {"per_category", per_category}};
}

std::string estimation_csv(const nlohmann::json& est) {
    std::ostringstream out;
    out << "category,count,ssd,kl,r2,ce\n";
    auto row = [&](const std::string& name, const nlohmann::json& j) {
        const auto s = summary_from_json(j);
        out << name << ',' << s.count << ',' << num(s.ssd) << ',' << num(s.kl) << ',' << num(s.r2) << ',' << num(s.ce)
            << '\n';
    };
    for (const auto& r : est.at("per_category")) {
        row(r.at("category").get<std::string>(), r);
    }
    row("all", est.at("overall"));
    return out.str();
}

std::string strata_csv(const nlohmann::json& est) {
    std::ostringstream out;
    out << "stratum,count,ssd,kl,r2,ce\n";
    for (const auto& r : est.at("strata")) {
        const auto s = summary_from_json(r);
        out << r.at("stratum").get<std::string>() << ',' << s.count << ',' << num(s.ssd) << ',' << num(s.kl) << ','
            << num(s.r2) << ',' << num(s.ce) << '\n';
    }
    return out.str();
}

std::string classification_csv(const nlohmann::json& cls) {
    std::ostringstream out;
    out << "category,precision,recall,f1,accuracy\n";
    for (const auto& r : cls.at("per_category")) {
        out << r.at("category").get<std::string>() << ',' << num(r.at("precision").get<double>()) << ','
            << num(r.at("recall").get<double>()) << ',' << num(r.at("f1").get<double>()) << ','
            << num(r.at("accuracy").get<double>()) << '\n';
    }
    out << "\nmetric,value\n";
    for (const char* k : {"AP", "AR", "AF1", "OP", "OR", "OF1"}) {
        out << k << ',' << num(cls.at("overall").at(k).get<double>()) << '\n';
    }
    return out.str();
}

nlohmann::json run_record_json(const train::RunRecord& r) {
    nlohmann::json epochs = nlohmann::json::array();
    for (const auto& e : r.epochs) {
        epochs.push_back(train::epoch_json(e));
    }
    return {{"tool_version", kVersion},
            {"config_hash", r.config_hash},
            {"seed", r.seed},
            {"config", r.config},
            {"adam", {{"beta1", r.config.beta1}, {"beta2", r.config.beta2}, {"eps", r.config.adam_eps}}},
            {"train_samples", r.train_samples},
            {"validation_samples", r.validation_samples},
            {"best_epoch", r.best_epoch},
            {"epochs", epochs}};
}

std::string loss_curve_csv(const train::RunRecord& r) {
    std::ostringstream out;
    out << "epoch,train_loss,train_regression,train_kl,val_ssd,val_r2\n";
    for (const auto& e : r.epochs) {
        out << e.epoch << ',' << num(e.train_loss) << ',' << num(e.train_regression) << ',' << num(e.train_kl) << ','
            << num(e.val_ssd) << ',' << num(e.val_r2) << '\n';
    }
    return out.str();
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&':
                out += "&amp;";
                break;
            case '<':
                out += "&lt;";
                break;
            case '>':
                out += "&gt;";
                break;
            case '"':
                out += "&quot;";
                break;
            default:
                out += c;
        }
    }
    return out;
}

std::string svg_bar_chart(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<Series>& series) {
    const double width = 80.0 + 40.0 * static_cast<double>(labels.size()) * std::max<std::size_t>(1, series.size());
    const double height = 320.0, top = 40.0, bottom = 250.0, left = 50.0;
    double vmax = 0.0;
    for (const auto& s : series) {
        for (double v : s.values) {
            if (std::isfinite(v)) vmax = std::max(vmax, v);
        }
    }
    if (vmax <= 0.0) vmax = 1.0;
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
        << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    out << "<text x=\"" << num(left) << "\" y=\"20\" font-size=\"14\">" << xml_escape(title) << "</text>\n";
    out << "<line x1=\"" << num(left) << "\" y1=\"" << num(bottom) << "\" x2=\"" << num(width - 10) << "\" y2=\""
        << num(bottom) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"4\" y=\"" << num(top + 4) << "\">" << num(vmax) << "</text>\n";
    const double group = (width - left - 10.0) / static_cast<double>(std::max<std::size_t>(1, labels.size()));
    const double bar = group / static_cast<double>(series.size() + 1);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double gx = left + group * static_cast<double>(i);
        for (std::size_t s = 0; s < series.size(); ++s) {
            const double v = i < series[s].values.size() ? series[s].values[i] : 0.0;
            const double h = std::isfinite(v) ? std::max(0.0, v) / vmax * (bottom - top) : 0.0;
            out << "<rect x=\"" << num(gx + bar * (static_cast<double>(s) + 0.5)) << "\" y=\"" << num(bottom - h)
                << "\" width=\"" << num(bar * 0.9) << "\" height=\"" << num(h) << "\" fill=\""
                << kPalette[s % kPalette.size()] << "\"><title>" << xml_escape(series[s].name) << ": " << num(v)
                << "</title></rect>\n";
        }
        out << "<text transform=\"translate(" << num(gx + group / 2) << "," << num(bottom + 10) << ") rotate(45)\">"
            << xml_escape(labels[i]) << "</text>\n";
    }
    for (std::size_t s = 0; s < series.size(); ++s) {
        const double ly = 30.0 + 14.0 * static_cast<double>(s);
        out << "<rect x=\"" << num(width - 150) << "\" y=\"" << num(ly - 9) << "\" width=\"10\" height=\"10\" fill=\""
            << kPalette[s % kPalette.size()] << "\"/><text x=\"" << num(width - 135) << "\" y=\"" << num(ly) << "\">"
            << xml_escape(series[s].name) << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

std::string svg_line_chart(const std::string& title, const std::vector<Series>& series) {
    const double width = 520.0, height = 320.0, left = 60.0, right = 500.0, top = 40.0, bottom = 280.0;
    double vmin = std::numeric_limits<double>::infinity(), vmax = -vmin;
    std::size_t n = 0;
    for (const auto& s : series) {
        n = std::max(n, s.values.size());
        for (double v : s.values) {
            if (std::isfinite(v)) {
                vmin = std::min(vmin, v);
                vmax = std::max(vmax, v);
            }
        }
    }
    if (!(vmax > vmin)) {
        vmin = std::isfinite(vmin) ? vmin - 1.0 : 0.0;
        vmax = vmin + 2.0;
    }
    auto px = [&](std::size_t i) {
        return n <= 1 ? (left + right) / 2
                      : left + (right - left) * static_cast<double>(i) / static_cast<double>(n - 1);
    };
    auto py = [&](double v) { return bottom - (v - vmin) / (vmax - vmin) * (bottom - top); };
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
        << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    out << "<text x=\"" << num(left) << "\" y=\"20\" font-size=\"14\">" << xml_escape(title) << "</text>\n";
    out << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(right - left) << "\" height=\""
        << num(bottom - top) << "\" fill=\"none\" stroke=\"black\"/>\n";
    out << "<text x=\"4\" y=\"" << num(top + 4) << "\">" << num(vmax) << "</text>\n";
    out << "<text x=\"4\" y=\"" << num(bottom) << "\">" << num(vmin) << "</text>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        std::ostringstream pts;
        for (std::size_t i = 0; i < series[s].values.size(); ++i) {
            if (std::isfinite(series[s].values[i])) {
                pts << num(px(i)) << ',' << num(py(series[s].values[i])) << ' ';
            }
        }
        out << "<polyline fill=\"none\" stroke=\"" << kPalette[s % kPalette.size()] << "\" points=\"" << pts.str()
            << "\"/>\n";
        out << "<text x=\"" << num(right - 120) << "\" y=\"" << num(top + 14 + 14 * static_cast<double>(s))
            << "\" fill=\"" << kPalette[s % kPalette.size()] << "\">" << xml_escape(series[s].name) << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

std::string loss_curve_svg(const train::RunRecord& r) {
    Series train{"train loss", {}}, val{"validation SSD", {}};
    for (const auto& e : r.epochs) {
        train.values.push_back(e.train_loss);
        val.values.push_back(e.val_ssd);
    }
    return svg_line_chart("loss curves", {train, val});
}

double relative_delta(double ours, double base) {
    if (!std::isfinite(ours) || !std::isfinite(base) || base == 0.0) {
        return std::nan("");
    }
    return (ours - base) / base;
}

std::string percent(double fraction) {
    if (!std::isfinite(fraction)) {
        return "n/a";
    }
    double pct = 100.0 * fraction;
    if (std::fabs(pct) < 0.05) pct = 0.0;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%+.1f%%", pct);
    return buf;
}

std::string comparison_csv(const std::vector<NamedEstimation>& runs, const std::string& rows_key,
                           const std::string& label_key) {
    if (runs.empty()) {
        throw ConfigError("report needs at least one run");
    }
    static constexpr std::array<const char*, 4> kMetrics = {"ssd", "kl", "r2", "ce"};
    std::ostringstream out;
    out << label_key << ",run,count,ssd,kl,r2,ce";
    if (runs.size() > 1) {
        out << ",d_ssd,d_kl,d_r2,d_ce";
    }
    out << '\n';
    auto rows_with_all = [&](const nlohmann::json& est) {
        std::vector<std::pair<std::string, objectives::MetricSummary>> rows;
        for (const auto& r : est.at(rows_key)) {
            rows.emplace_back(r.at(label_key).get<std::string>(), summary_from_json(r));
        }
        if (rows_key == "per_category") {
            rows.emplace_back("all", summary_from_json(est.at("overall")));
        }
        return rows;
    };
    const auto base = rows_with_all(runs.front().estimation);
    for (std::size_t i = 0; i < base.size(); ++i) {
        for (const auto& run : runs) {
            const auto rows = rows_with_all(run.estimation);
            if (rows.size() != base.size() || rows[i].first != base[i].first) {
                throw CompatibilityError("run '" + run.name + "' has a different " + label_key + " list");
            }
            const auto& s = rows[i].second;
            const double vals[4] = {s.ssd, s.kl, s.r2, s.ce};
            out << rows[i].first << ',' << run.name << ',' << s.count;
            for (double v : vals) out << ',' << num(v);
            if (runs.size() > 1) {
                const auto& b = base[i].second;
                const double bvals[4] = {b.ssd, b.kl, b.r2, b.ce};
                for (std::size_t m = 0; m < kMetrics.size(); ++m) {
                    out << ',' << percent(relative_delta(vals[m], bvals[m]));
                }
            }
            out << '\n';
        }
    }
    return out.str();
}

nlohmann::json ablation_json(const train::AblationTable& t) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : t.rows) {
        auto j = summary_json(r.metrics);
        j["value"] = r.value;
        j["config_hash"] = r.config_hash;
        rows.push_back(j);
    }
    return {{"axis", train::to_string(t.axis)}, {"tool_version", kVersion}, {"rows", rows}};
}

std::string ablation_csv(const train::AblationTable& t) {
    std::ostringstream out;
    out << train::to_string(t.axis) << ",ssd,kl,r2,ce\n";
    for (const auto& r : t.rows) {
        out << r.value << ',' << num(r.metrics.ssd) << ',' << num(r.metrics.kl) << ',' << num(r.metrics.r2) << ','
            << num(r.metrics.ce) << '\n';
    }
    return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}
}  // namespace copresence::report
