#include "neuroair/error.hpp"
#include "neuroair/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace neuroair::eval {

namespace {

const std::vector<std::string>& model_order() {
  static const std::vector<std::string> order{"eegnet", "deepconvnet", "shallowconvnet"};
  return order;
}

const std::vector<std::string>& feature_order() {
  static const std::vector<std::string> order{"eeg", "ica", "scout", "shd", "hhd"};
  return order;
}

// Known names first in display order, then anything else alphabetically.
std::vector<std::string> ordered(const std::set<std::string>& present, const std::vector<std::string>& canon) {
  std::vector<std::string> out;
  for (const auto& c : canon) {
    if (present.count(c)) out.push_back(c);
  }
  for (const auto& p : present) {
    if (std::find(canon.begin(), canon.end(), p) == canon.end()) out.push_back(p);
  }
  return out;
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

const CellSummary* find_cell(const std::vector<CellSummary>& cells, const CellKey& key) {
  for (const auto& c : cells) {
    if (c.key == key) return &c;
  }
  return nullptr;
}

std::string table_text(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size(), 0);
  for (std::size_t j = 0; j < header.size(); ++j) width[j] = header[j].size();
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < r.size(); ++j) width[j] = std::max(width[j], r[j].size());
  }
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t j = 0; j < r.size(); ++j) {
      os << pad(r[j], width[j]);
      os << (j + 1 < r.size() ? "  " : "\n");
    }
  };
  line(header);
  std::size_t total = 0;
  for (auto w : width) total += w + 2;
  os << std::string(total - 2, '-') << '\n';
  for (const auto& r : rows) line(r);
  return os.str();
}

}  // namespace

const std::vector<std::string>& band_columns() {
  static const std::vector<std::string> cols{"delta", "theta", "alpha", "beta", "gamma", "broadband", "delta_theta"};
  return cols;
}

std::string band_title(const std::string& band) {
  static const std::map<std::string, std::string> titles{
      {"delta", "Delta"}, {"theta", "Theta"},         {"alpha", "Alpha"},
      {"beta", "Beta"},   {"gamma", "Gamma"},         {"broadband", "Combined"},
      {"combined", "Combined"}, {"delta_theta", "Delta+Theta"}};
  auto it = titles.find(band);
  return it == titles.end() ? band : it->second;
}

std::string model_title(const std::string& model) {
  static const std::map<std::string, std::string> titles{
      {"eegnet", "EEGNet"}, {"deepconvnet", "DeepConvNet"}, {"shallowconvnet", "ShallowConvNet"}};
  auto it = titles.find(model);
  return it == titles.end() ? model : it->second;
}

std::string feature_title(const std::string& feature) {
  static const std::map<std::string, std::string> titles{{"eeg", "EEG (V)"},
                                                         {"ica", "ICA (U)"},
                                                         {"scout", "Source (S)"},
                                                         {"shd", "Spherical harmonics (V_SH)"},
                                                         {"hhd", "Head harmonics (V_H2)"}};
  auto it = titles.find(feature);
  return it == titles.end() ? feature : it->second;
}

void write_results_csv(const std::filesystem::path& path, const std::vector<ResultRecord>& records) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
  out << "subject,feature,band,model,order,fold,accuracy,n_test,status\n";
  for (const auto& r : records) {
    for (const std::string* field : {&r.subject, &r.feature, &r.band, &r.model}) {
      require(field->find_first_of(",\n\r") == std::string::npos, ErrorCode::kInvalidArgument,
              "results csv: field '" + *field + "' contains a separator");
    }
    out << r.subject << ',' << r.feature << ',' << r.band << ',' << r.model << ',' << r.order << ','
        << r.fold << ',' << fmt("%.17g", r.accuracy) << ',' << r.n_test << ','
        << (r.status == Status::kOk ? "ok" : "failed") << '\n';
  }
  require(out.good(), ErrorCode::kIo, "error writing " + path.string());
}

std::vector<ResultRecord> read_results_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == "subject,feature,band,model,order,fold,accuracy,n_test,status", ErrorCode::kFormat,
          path.string() + ": unexpected header '" + line + "'");
  std::vector<ResultRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    require(f.size() == 9, ErrorCode::kFormat, where + ": expected 9 fields, got " + std::to_string(f.size()));
    ResultRecord r;
    r.subject = f[0];
    r.feature = f[1];
    r.band = f[2];
    r.model = f[3];
    try {
      std::size_t pos = 0;
      r.order = std::stoi(f[4], &pos);
      require(pos == f[4].size(), ErrorCode::kFormat, "order");
      r.fold = std::stoi(f[5], &pos);
      require(pos == f[5].size(), ErrorCode::kFormat, "fold");
      r.accuracy = std::stod(f[6], &pos);
      require(pos == f[6].size(), ErrorCode::kFormat, "accuracy");
      r.n_test = static_cast<std::size_t>(std::stoull(f[7], &pos));
      require(pos == f[7].size(), ErrorCode::kFormat, "n_test");
    } catch (const std::exception& e) {
      fail(ErrorCode::kFormat, where + ": malformed number (" + e.what() + ")");
    }
    require(r.accuracy >= 0.0 && r.accuracy <= 1.0, ErrorCode::kFormat, where + ": accuracy outside [0, 1]");
    if (f[8] == "ok") {
      r.status = Status::kOk;
    } else if (f[8] == "failed") {
      r.status = Status::kFailed;
    } else {
      fail(ErrorCode::kFormat, where + ": unknown status '" + f[8] + "'");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string render_accuracy_table(const std::vector<CellSummary>& cells, const std::string& feature, int order) {
  std::set<std::string> models;
  std::size_t failed = 0;
  std::vector<std::string> failed_cells;
  for (const auto& c : cells) {
    if (c.key.feature != feature || c.key.order != order) continue;
    models.insert(c.key.model);
    if (c.folds_failed > 0) {
      failed += c.folds_failed;
      failed_cells.push_back(model_title(c.key.model) + "/" + band_title(c.key.band) + ": " +
                             std::to_string(c.folds_failed));
    }
  }
  std::ostringstream os;
  os << feature_title(feature);
  if (order > 0) os << ", order " << order;
  os << "\n";
  std::vector<std::string> header{"Model"};
  for (const auto& b : band_columns()) header.push_back(band_title(b));
  std::vector<std::vector<std::string>> rows;
  for (const auto& m : ordered(models, model_order())) {
    std::vector<std::string> row{model_title(m)};
    for (const auto& b : band_columns()) {
      const CellSummary* c = find_cell(cells, {feature, b, m, order});
      row.push_back(c && !std::isnan(c->mean) ? fmt("%.2f", 100.0 * c->mean) : "-");
    }
    rows.push_back(std::move(row));
  }
  os << table_text(header, rows);
  os << "failed folds: " << failed;
  if (!failed_cells.empty()) {
    os << " (";
    for (std::size_t i = 0; i < failed_cells.size(); ++i) os << (i ? "; " : "") << failed_cells[i];
    os << ")";
  }
  os << "\n";
  return os.str();
}

std::string render_component_curve(const std::vector<CellSummary>& cells, const std::string& feature,
                                   const std::string& band, const std::string& model) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& c : cells) {
    if (c.key.feature != feature || c.key.band != band || c.key.model != model) continue;
    rows.push_back({std::to_string(c.key.order), std::isnan(c.mean) ? "-" : fmt("%.2f", 100.0 * c.mean),
                    std::to_string(c.folds_failed)});
  }
  std::ostringstream os;
  os << feature_title(feature) << ", " << band_title(band) << ", " << model_title(model) << "\n";
  os << table_text({"k", "accuracy", "failed"}, rows);
  return os.str();
}

PValueMatrix pvalue_matrix(const std::vector<CellSummary>& cells, Axis axis, const CellKey& fixed) {
  auto matches = [&](const CellKey& k) {
    switch (axis) {
      case Axis::kModel:
        return k.feature == fixed.feature && k.band == fixed.band && k.order == fixed.order;
      case Axis::kBand:
        return k.feature == fixed.feature && k.model == fixed.model && k.order == fixed.order;
      case Axis::kFeature:
        return k.band == fixed.band && k.model == fixed.model;
    }
    return false;
  };
  auto label_of = [&](const CellKey& k) {
    switch (axis) {
      case Axis::kModel: return k.model;
      case Axis::kBand: return k.band;
      case Axis::kFeature: return k.feature;
    }
    return std::string{};
  };

  // Features differ in order (harmonics carry one, the rest 0): take the
  // requested order when present, otherwise the highest available.
  std::map<std::string, const CellSummary*> chosen;
  for (const auto& c : cells) {
    if (!matches(c.key)) continue;
    const std::string label = label_of(c.key);
    auto it = chosen.find(label);
    if (it == chosen.end()) {
      chosen[label] = &c;
    } else if (it->second->key.order != fixed.order &&
               (c.key.order == fixed.order || c.key.order > it->second->key.order)) {
      it->second = &c;
    }
  }
  std::set<std::string> present;
  for (const auto& [label, c] : chosen) present.insert(label);
  PValueMatrix m;
  m.labels = ordered(present, axis == Axis::kModel  ? model_order()
                              : axis == Axis::kBand ? band_columns()
                                                    : feature_order());
  const std::size_t n = m.labels.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  m.p.assign(n, std::vector<double>(n, nan));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const CellSummary& a = *chosen.at(m.labels[i]);
      const CellSummary& b = *chosen.at(m.labels[j]);
      std::vector<double> xa;
      std::vector<double> xb;
      for (std::size_t s = 0; s < a.subjects.size(); ++s) {
        auto it = std::find(b.subjects.begin(), b.subjects.end(), a.subjects[s]);
        if (it == b.subjects.end()) continue;
        xa.push_back(a.subject_means[s]);
        xb.push_back(b.subject_means[static_cast<std::size_t>(it - b.subjects.begin())]);
      }
      if (xa.size() < 2) continue;
      const TTest t = paired_t_one_tailed(xa, xb);
      const double p = t.t >= 0.0 ? t.p : 1.0 - t.p;
      m.p[i][j] = p;
      m.p[j][i] = p;
    }
  }
  return m;
}

std::string render_pvalue_matrix(const PValueMatrix& m, double alpha) {
  auto title = [](const std::string& l) {
    const std::string t = model_title(l);
    if (t != l) return t;
    const std::string b = band_title(l);
    if (b != l) return b;
    return feature_title(l);
  };
  std::vector<std::string> header{""};
  for (const auto& l : m.labels) header.push_back(title(l));
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    std::vector<std::string> row{title(m.labels[i])};
    for (std::size_t j = 0; j < m.labels.size(); ++j) {
      const double p = m.p[i][j];
      if (i == j || std::isnan(p)) {
        row.push_back("-");
        continue;
      }
      std::string s = p < 1e-3 ? fmt("%.2e", p) : fmt("%.4f", p);
      if (p < alpha) s += "*";
      row.push_back(s);
    }
    rows.push_back(std::move(row));
  }
  return table_text(header, rows) + "* p < " + fmt("%g", alpha) + "\n";
}

void emit_report(const std::filesystem::path& dir, const std::vector<ResultRecord>& records) {
  require(!records.empty(), ErrorCode::kInvalidArgument, "report: no records");
  std::filesystem::create_directories(dir);
  write_results_csv(dir / "results.csv", records);
  const auto cells = aggregate(records);

  std::set<std::pair<std::string, int>> tables;
  std::set<std::string> features;
  std::set<std::string> bands;
  std::set<std::string> models;
  for (const auto& c : cells) {
    tables.insert({c.key.feature, c.key.order});
    features.insert(c.key.feature);
    bands.insert(c.key.band);
    models.insert(c.key.model);
  }

  std::ostringstream summary;
  summary << "Mean recognition accuracy (%), " << records.size() << " fold results\n\n";
  for (const auto& [feature, order] : tables) {
    const std::string text = render_accuracy_table(cells, feature, order);
    summary << text << '\n';
    std::string name = "accuracy_" + feature;
    if (order > 0) name += "_order" + std::to_string(order);
    std::ofstream(dir / (name + ".txt")) << text;
  }

  auto section = [&](const std::string& heading, const PValueMatrix& m) {
    if (m.labels.size() < 2) return;
    bool any = false;
    for (const auto& row : m.p) {
      for (double p : row) any = any || !std::isnan(p);
    }
    if (!any) return;
    summary << heading << '\n' << render_pvalue_matrix(m) << '\n';
  };
  for (const auto& [feature, order] : tables) {
    for (const auto& b : ordered(bands, band_columns())) {
      section("p-values between models: " + feature_title(feature) + ", " + band_title(b) +
                  (order > 0 ? ", order " + std::to_string(order) : ""),
              pvalue_matrix(cells, Axis::kModel, {feature, b, "", order}));
    }
    for (const auto& m : ordered(models, model_order())) {
      section("p-values between bands: " + feature_title(feature) + ", " + model_title(m) +
                  (order > 0 ? ", order " + std::to_string(order) : ""),
              pvalue_matrix(cells, Axis::kBand, {feature, "", m, order}));
    }
  }
  if (features.size() > 1) {
    for (const auto& b : ordered(bands, band_columns())) {
      for (const auto& m : ordered(models, model_order())) {
        section("p-values between features: " + band_title(b) + ", " + model_title(m),
                pvalue_matrix(cells, Axis::kFeature, {"", b, m, 0}));
      }
    }
  }
  summary << "Fold accuracies (%)\n";
  std::map<std::pair<CellKey, std::string>, std::vector<const ResultRecord*>> folds;
  for (const auto& r : records) folds[{CellKey{r.feature, r.band, r.model, r.order}, r.subject}].push_back(&r);
  for (const auto& [key, rs] : folds) {
    summary << feature_title(key.first.feature) << " / " << band_title(key.first.band) << " / "
            << model_title(key.first.model);
    if (key.first.order > 0) summary << " / order " << key.first.order;
    summary << " / " << key.second << ":";
    double sum = 0.0;
    std::size_t ok = 0;
    for (const ResultRecord* r : rs) {
      if (r->status == Status::kOk) {
        summary << ' ' << fmt("%.2f", 100.0 * r->accuracy);
        sum += r->accuracy;
        ++ok;
      } else {
        summary << " failed";
      }
    }
    summary << "  mean " << (ok ? fmt("%.2f", 100.0 * sum / static_cast<double>(ok)) : std::string("-")) << '\n';
  }
  std::ofstream out(dir / "summary.txt");
  require(out.good(), ErrorCode::kIo, "cannot write " + (dir / "summary.txt").string());
  out << summary.str();
}

}  // namespace neuroair::eval
