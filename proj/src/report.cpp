#include <spillover/report.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace spillover::report {

using nlohmann::json;

namespace {

struct VariableInfo {
  const char* abbreviation;
  const char* long_name;
};

const std::map<std::string, VariableInfo>& variable_info() {
  static const std::map<std::string, VariableInfo> info{
      {"rr", {"RR", "Recovery rate"}},
      {"nc", {"NC", "Number of claims"}},
      {"mp", {"MP", "Mean of PDE"}},
      {"sdp", {"SDP", "Standard deviation of PDE"}},
      {"mdp", {"MDP", "Major damage level of PDE"}},
      {"pop", {"POP", "Population density"}},
      {"ms", {"MS", "Minority segregation"}},
      {"is", {"IS", "Income segregation"}},
      {"hmi", {"HMI", "Human mobility index"}},
      {"poi", {"POI", "POI density"}},
      {"rd", {"RD", "Road density"}},
  };
  return info;
}

std::size_t display_width(const std::string& s) {
  std::size_t w = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++w;
  }
  return w;
}

std::string rendered_csv(const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream ss;
  csv::Writer w(ss);
  for (const auto& r : rows) w.row(r);
  return ss.str();
}

double number(const json& j) { return j.is_number() ? j.get<double>() : std::nan(""); }

std::string starred(const json& part) {
  return fixed3(number(part.at("estimate"))) + part.value("stars", std::string());
}

std::string csv_number(const json& j) { return j.is_number() ? csv::format_number(j.get<double>()) : std::string(); }

const json* find_named(const json& arr, const std::string& name) {
  for (const auto& e : arr) {
    if (e.at("name") == name) return &e;
  }
  return nullptr;
}

std::string star_note(const json& regression) {
  const bool strict = regression.value("significance", std::string("table")) == "strict";
  return strict ? "***, **, and * refer to the significance level at 0.1%, 1%, and 5%, respectively."
                : "***, **, and * refer to the significance level at 1%, 5%, and 10%, respectively.";
}

std::string moran_label(const json& moran, const std::string& p_label) {
  if (moran.is_null()) return "Global Moran's I: n/a";
  std::string label = "Global Moran's I: " + fixed3(number(moran.at("statistic")));
  if (moran.at("p_value").is_number()) {
    label += ", " + p_label + ": " + fixed3(number(moran.at("p_value"))) + moran.value("stars", std::string());
  }
  return label;
}

bool is_damage(const std::string& name) { return name == "nc" || name == "mp" || name == "sdp" || name == "mdp"; }

std::string metric_text(const json& metrics, const char* key) {
  const auto& v = metrics.at(key);
  return v.is_number() ? fixed3(v.get<double>()) : std::string("n/a");
}

constexpr const char* kMetricKeys[] = {"r_squared", "adjusted_r_squared", "log_likelihood", "aic"};
constexpr const char* kMetricLabels[] = {"R²", "Adjusted R²", "Log-likelihood", "AIC"};

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string abbreviation(const std::string& variable) {
  auto it = variable_info().find(variable);
  if (it != variable_info().end()) return it->second.abbreviation;
  std::string up = variable;
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return up;
}

std::string long_name(const std::string& variable) {
  auto it = variable_info().find(variable);
  return it != variable_info().end() ? it->second.long_name : variable;
}

std::string fixed3(double value) {
  if (std::isnan(value)) return "n/a";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", value);
  std::string s(buf);
  if (s == "-0.000") s = "0.000";
  return s;
}

std::string align(const std::vector<std::vector<std::string>>& rows, std::size_t spanning_rows, std::size_t left_columns) {
  // In the first spanning_rows rows the last nonempty cell may overrun its column. Single-cell
  // rows are section labels and never widen a column.
  auto last_filled = [](const std::vector<std::string>& r) {
    std::size_t last = 0;
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (!r[c].empty()) last = c;
    }
    return last;
  };
  std::vector<std::size_t> widths;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() > widths.size()) widths.resize(r.size(), 0);
    if (r.size() == 1) continue;
    const std::size_t span = i < spanning_rows ? last_filled(r) : r.size();
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c != span) widths[c] = std::max(widths[c], display_width(r[c]));
    }
  }
  std::ostringstream out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const std::size_t span = i < spanning_rows ? last_filled(r) : r.size();
    std::string line;
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c > 0) line += "  ";
      if (c == span && c > 0) {
        line += r[c];
        break;
      }
      const std::string pad(widths[c] > display_width(r[c]) ? widths[c] - display_width(r[c]) : 0, ' ');
      line += c < left_columns ? r[c] + pad : pad + r[c];
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << '\n';
  }
  return out.str();
}

Rendered descriptive_table(const csv::Table& d) {
  d.require_columns({"variable", "type", "min", "max", "mean", "std"});
  static const std::vector<std::string> order{"rr", "nc", "mp", "sdp", "mdp", "pop", "ms", "is", "hmi", "poi", "rd"};
  std::map<std::string, std::size_t> row_of;
  for (std::size_t r = 0; r < d.size(); ++r) row_of[d.at(r, "variable")] = r;

  std::vector<std::vector<std::string>> csv_rows{{"type", "variable", "abbreviation", "min", "max", "mean", "std"}};
  std::vector<std::vector<std::string>> text{{"Variable Type", "Variables", "Abbreviation", "Min", "Max", "Mean", "Std Dev"}};
  std::string last_type;
  auto cell = [&](std::size_t r, const char* col) {
    auto v = csv::parse_double(d.at(r, col));
    return v ? fixed3(*v) : std::string("n/a");
  };
  auto add = [&](const std::string& var) {
    auto it = row_of.find(var);
    if (it == row_of.end()) return;
    const std::size_t r = it->second;
    const std::string type = d.at(r, "type");
    csv_rows.push_back({type, var, abbreviation(var), d.at(r, "min"), d.at(r, "max"), d.at(r, "mean"), d.at(r, "std")});
    std::string label;
    if (type != last_type) {
      label = type == "dependent" ? "Dependent Variable" : type == "independent" ? "Independent Variables" : "Control Variables";
      last_type = type;
    }
    text.push_back({label, long_name(var), abbreviation(var), cell(r, "min"), cell(r, "max"), cell(r, "mean"), cell(r, "std")});
  };
  for (const auto& v : order) add(v);
  for (std::size_t r = 0; r < d.size(); ++r) {
    if (std::find(order.begin(), order.end(), d.at(r, "variable")) == order.end()) add(d.at(r, "variable"));
  }
  return {rendered_csv(csv_rows), "Descriptive statistics of variables\n\n" + align(text, 0, 3)};
}

Rendered regression_table(const json& reg) {
  const auto variables = reg.at("variables").get<std::vector<std::string>>();
  const json& ols = reg.at("ols");
  const json& slx = reg.at("slx");
  const bool has_slx = !slx.is_null();
  const bool has_effects = has_slx && slx.contains("effects") && !slx.at("effects").empty();

  std::vector<std::vector<std::string>> csv_rows{{"section", "variable", "model", "column", "estimate", "p_value", "stars"}};
  std::vector<std::vector<std::string>> text;
  std::vector<std::string> top{"Variables", "OLS Model"};
  std::vector<std::string> sub{"", "Coefficient"};
  if (has_slx) {
    top.push_back("SLX Model (" + moran_label(reg.at("moran"), "P value") + ")");
    sub.push_back("Coefficient");
    if (has_effects) {
      top.insert(top.end(), {"", "", ""});
      sub.insert(sub.end(), {"Direct effect", "Indirect effect", "Total effect"});
    }
  }
  text.push_back(top);
  text.push_back(sub);

  auto coef_row = [&](const std::string& section, const std::string& var, const std::string& model, const json& fit) {
    const json* c = find_named(fit.at("coefficients"), var);
    if (!c) return std::string("n/a");
    csv_rows.push_back({section, var, model, "coefficient", csv_number(c->at("estimate")), csv_number(c->at("p")),
                        c->value("stars", std::string())});
    return fixed3(number(c->at("estimate"))) + c->value("stars", std::string());
  };

  for (const bool damage : {true, false}) {
    const std::string section = damage ? "independent" : "control";
    text.push_back({damage ? "Independent Variables:" : "Control Variables:"});
    for (const auto& var : variables) {
      if (is_damage(var) != damage) continue;
      std::vector<std::string> row{abbreviation(var), coef_row(section, var, "ols", ols)};
      if (has_slx) {
        row.push_back(coef_row(section, var, "slx", slx));
        if (has_effects) {
          const json* e = find_named(slx.at("effects"), var);
          for (const char* part : {"direct", "indirect", "total"}) {
            if (!e) {
              row.push_back("n/a");
              continue;
            }
            const json& p = e->at(part);
            csv_rows.push_back({section, var, "slx", part, csv_number(p.at("estimate")), csv_number(p.at("p")),
                                p.value("stars", std::string())});
            row.push_back(starred(p));
          }
        }
      }
      text.push_back(row);
    }
  }

  text.push_back({"Model Performance"});
  for (std::size_t m = 0; m < 4; ++m) {
    std::vector<std::string> row{kMetricLabels[m], metric_text(ols.at("metrics"), kMetricKeys[m])};
    csv_rows.push_back({"performance", kMetricKeys[m], "ols", "value", csv_number(ols.at("metrics").at(kMetricKeys[m])), "", ""});
    if (has_slx) {
      row.push_back(metric_text(slx.at("metrics"), kMetricKeys[m]));
      csv_rows.push_back({"performance", kMetricKeys[m], "slx", "value", csv_number(slx.at("metrics").at(kMetricKeys[m])), "", ""});
    }
    text.push_back(row);
  }
  if (has_slx && !reg.at("moran").is_null()) {
    const json& mo = reg.at("moran");
    csv_rows.push_back({"moran", "rr", "slx", "global_morans_i", csv_number(mo.at("statistic")), csv_number(mo.at("p_value")),
                        mo.value("stars", std::string())});
  }

  std::string body = "Regression result and model performance of OLS and SLX model\n\n" + align(text, 1);
  body += "\nNote: Number of observations: " + std::to_string(reg.at("n").get<long long>()) + " CBGs; " + star_note(reg) + "\n";
  return {rendered_csv(csv_rows), body};
}

Rendered robustness_table(const json& reg, const json& reach) {
  const auto variables = reg.at("variables").get<std::vector<std::string>>();
  std::vector<std::vector<std::string>> csv_rows{{"scheme", "variable", "column", "estimate", "p_value", "stars"}};
  std::ostringstream text;
  text << "Regression result and model performance of SLX models with different spatial weight matrices\n";

  // Reach distances exist for the inverse-square sweep only.
  const json* reach_sq = nullptr;
  if (reach.is_object() && reach.contains("inverse_square") && !reach.at("inverse_square").is_null()) {
    const std::string target = reach.value("reach_variable", std::string("nc"));
    for (const auto& v : reach.at("inverse_square").at("variables")) {
      if (v.at("variable") == target) reach_sq = &v;
    }
  }
  auto distance_cell = [](const json& v, const char* key, const char* dev) {
    if (v.at(key).is_null()) return std::string("n/a");
    std::string s = fixed3(number(v.at(key)));
    if (v.contains(dev) && v.at(dev).is_number()) {
      char buf[64];
      std::snprintf(buf, sizeof buf, " (%.2f%%)", v.at(dev).get<double>());
      s += buf;
    }
    return s;
  };

  for (const auto& entry : reg.at("robustness")) {
    const std::string scheme = entry.at("scheme").get<std::string>();
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"Variables", "Coefficient", "Direct", "Indirect", "Total"});
    for (const auto& var : variables) {
      std::vector<std::string> row{abbreviation(var)};
      const json* c = find_named(entry.at("coefficients"), var);
      row.push_back(c ? fixed3(number(c->at("estimate"))) + c->value("stars", std::string()) : "n/a");
      if (c) {
        csv_rows.push_back({scheme, var, "coefficient", csv_number(c->at("estimate")), csv_number(c->at("p")),
                            c->value("stars", std::string())});
      }
      const json* e = find_named(entry.at("effects"), var);
      for (const char* part : {"direct", "indirect", "total"}) {
        if (!e) {
          row.push_back("n/a");
          continue;
        }
        const json& p = e->at(part);
        csv_rows.push_back({scheme, var, part, csv_number(p.at("estimate")), csv_number(p.at("p")), p.value("stars", std::string())});
        row.push_back(starred(p));
      }
      rows.push_back(row);
    }
    for (std::size_t m = 0; m < 4; ++m) {
      rows.push_back({kMetricLabels[m], metric_text(entry.at("metrics"), kMetricKeys[m])});
      csv_rows.push_back({scheme, kMetricKeys[m], "value", csv_number(entry.at("metrics").at(kMetricKeys[m])), "", ""});
    }
    const bool has_reach = scheme == "inverse_square" && reach_sq;
    rows.push_back({"Cut-off distance", has_reach ? distance_cell(*reach_sq, "cutoff_distance", "cutoff_deviation_pct") : "n/a"});
    rows.push_back({"Min/max distance", has_reach ? distance_cell(*reach_sq, "extremum_distance", "extremum_deviation_pct") : "n/a"});
    if (has_reach) {
      csv_rows.push_back({scheme, "cutoff_distance", "value", csv_number(reach_sq->at("cutoff_distance")), "", ""});
      csv_rows.push_back({scheme, "extremum_distance", "value", csv_number(reach_sq->at("extremum_distance")), "", ""});
    }
    if (!entry.at("moran").is_null()) {
      const json& mo = entry.at("moran");
      csv_rows.push_back({scheme, "rr", "global_morans_i", csv_number(mo.at("statistic")), csv_number(mo.at("p_value")),
                          mo.value("stars", std::string())});
    }
    text << "\n" << scheme << " (" << moran_label(entry.at("moran"), "P") << ")\n" << align(rows);
  }
  text << "\nNote: Number of observations: " << reg.at("n").get<long long>() << " CBGs; " << star_note(reg)
       << " Parenthesized values are deviations from the inverse-distance distances.\n";
  return {rendered_csv(csv_rows), text.str()};
}

std::string reach_curve(const csv::Table& main, const csv::Table* square, double alpha) {
  std::ostringstream ss;
  csv::Writer w(ss);
  w.row({"scheme", "distance", "variable", "direct", "indirect", "total", "p_indirect", "significant"});
  auto add = [&](const csv::Table& t, const std::string& scheme) {
    t.require_columns({"D", "variable", "direct", "indirect", "total", "p_indirect", "skipped"});
    for (std::size_t r = 0; r < t.size(); ++r) {
      if (!t.at(r, "skipped").empty()) continue;
      const auto p = csv::parse_double(t.at(r, "p_indirect"));
      w.row({scheme, t.at(r, "D"), t.at(r, "variable"), t.at(r, "direct"), t.at(r, "indirect"), t.at(r, "total"),
             t.at(r, "p_indirect"), p && *p <= alpha ? "1" : "0"});
    }
  };
  add(main, "inverse_distance");
  if (square) add(*square, "inverse_square");
  return ss.str();
}

std::vector<std::filesystem::path> emit_report(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  auto need = [&](const char* rel) {
    const fs::path p = dir / rel;
    if (!fs::is_regular_file(p)) throw InvalidArgument(std::string("missing regression artifact '") + rel + "'");
    return p;
  };
  const json reg = json::parse(read_text(need("regression/regression_report.json")));
  const csv::Table descriptive = csv::read_file(need("regression/descriptive.csv"));
  json reach = nullptr;
  if (fs::is_regular_file(dir / "sweep/reach_summary.json")) reach = json::parse(read_text(dir / "sweep/reach_summary.json"));

  const fs::path out = dir / "report";
  fs::create_directories(out);
  std::vector<fs::path> written;
  auto put = [&](const std::string& name, const std::string& bytes) {
    std::ofstream f(out / name, std::ios::binary);
    f << bytes;
    written.push_back(out / name);
  };
  const auto t1 = descriptive_table(descriptive);
  put("table1.csv", t1.csv);
  put("table1.txt", t1.text);
  const auto t2 = regression_table(reg);
  put("table2.csv", t2.csv);
  put("table2.txt", t2.text);
  const auto s1 = robustness_table(reg, reach);
  put("tableS1.csv", s1.csv);
  put("tableS1.txt", s1.text);
  if (fs::is_regular_file(dir / "sweep/reach_profile.csv")) {
    const auto main = csv::read_file(dir / "sweep/reach_profile.csv");
    std::optional<csv::Table> square;
    if (fs::is_regular_file(dir / "sweep/reach_profile_inverse_square.csv")) {
      square = csv::read_file(dir / "sweep/reach_profile_inverse_square.csv");
    }
    const double alpha = reach.is_object() ? reach.value("alpha", 0.10) : 0.10;
    put("reach_curve.csv", reach_curve(main, square ? &*square : nullptr, alpha));
  }
  return written;
}

}  // namespace spillover::report
