#include "csmart/trial_data.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace csmart {

long TrialDataset::total_members() const {
  long total = 0;
  for (const auto& c : clusters) total += static_cast<long>(c.size());
  return total;
}

int consistency_indicator(const ClusterRecord& record, EmbeddedAI ai) {
  if (record.a1 != ai.a1) return 0;
  if (record.r == 1) return 1;
  return (record.a2 && *record.a2 == ai.a2) ? 1 : 0;
}

int pathway_of(const ClusterRecord& record) {
  const int base = record.a1 == 1 ? 0 : 3;
  if (record.r == 1) return base + 1;
  return base + (record.a2 && *record.a2 == 1 ? 2 : 3);
}

std::array<int, 2> regimen_pathways(EmbeddedAI ai) {
  const int base = ai.a1 == 1 ? 0 : 3;
  return {base + 1, base + (ai.a2 == 1 ? 2 : 3)};
}

std::string ValidationReport::str() const {
  std::ostringstream out;
  out << (ok ? "PASS" : "FAIL") << "\n";
  out << "pathway counts:";
  for (int k = 0; k < 6; ++k) out << " [" << k + 1 << "]=" << pathway_counts[k];
  out << "\nregimen counts:";
  for (int k = 0; k < 4; ++k) {
    out << " (" << kRegimens[k].a1 << "," << kRegimens[k].a2
        << ")=" << regimen_counts[k];
  }
  out << "\n";
  for (const auto& issue : issues) out << "issue: " << issue << "\n";
  return out.str();
}

ValidationReport validate_design(const TrialDataset& ds) {
  ValidationReport report;
  if (ds.n() < 1) {
    report.ok = false;
    report.issues.push_back("dataset has no clusters");
    return report;
  }
  for (int i = 0; i < ds.n(); ++i) {
    const auto& c = ds.clusters[i];
    const std::string tag = "cluster " + c.cluster_id;
    if (c.a1 != 1 && c.a1 != -1) {
      report.issues.push_back(tag + ": a1 must be -1 or 1");
      continue;
    }
    if (c.r != 0 && c.r != 1) {
      report.issues.push_back(tag + ": r must be 0 or 1");
      continue;
    }
    if (c.r == 1 && c.a2) {
      report.issues.push_back(tag + ": responder has a2 present");
      continue;
    }
    if (c.r == 0 && (!c.a2 || (*c.a2 != 1 && *c.a2 != -1))) {
      report.issues.push_back(tag + ": non-responder needs a2 in {-1, 1}");
      continue;
    }
    if (c.size() < 1) {
      report.issues.push_back(tag + ": empty outcome vector (m_i = 0)");
      continue;
    }
    if (!c.y.allFinite() || !c.x.allFinite()) {
      report.issues.push_back(tag + ": non-finite value");
      continue;
    }
    if (c.x.size() != ds.p) {
      report.issues.push_back(tag + ": covariate length != p");
      continue;
    }
    ++report.pathway_counts[pathway_of(c) - 1];
    for (int k = 0; k < 4; ++k) {
      report.regimen_counts[k] += consistency_indicator(c, kRegimens[k]);
    }
  }
  for (int k = 0; k < 6; ++k) {
    if (report.pathway_counts[k] == 0) {
      report.issues.push_back("pathway " + std::to_string(k + 1) + " is empty");
    }
  }
  for (int k = 0; k < 4; ++k) {
    if (report.regimen_counts[k] == 0) {
      report.issues.push_back(
          "no cluster consistent with regimen (" +
          std::to_string(kRegimens[k].a1) + "," +
          std::to_string(kRegimens[k].a2) + ")");
      report.ok = false;
    }
  }
  // Structural violations (not mere empty pathways) fail the report.
  for (const auto& issue : report.issues) {
    if (issue.find("pathway") == std::string::npos) report.ok = false;
  }
  return report;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    // trim whitespace
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    fields.push_back(b == std::string::npos ? ""
                                            : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

double parse_double(const std::string& s, int row, const std::string& col) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("row " + std::to_string(row) + ": bad numeric value '" +
                     s + "' in column " + col);
  }
}

int parse_sign(const std::string& s, int row, const std::string& col) {
  if (s == "1" || s == "+1") return 1;
  if (s == "-1") return -1;
  throw ParseError("row " + std::to_string(row) + ": column " + col +
                   " must be -1 or 1, got '" + s + "'");
}

}  // namespace

TrialDataset parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file");
  auto header = split_csv_line(line);
  const std::vector<std::string> fixed = {"cluster_id", "member_id",
                                          "a1",         "r",
                                          "a2",         "y"};
  if (header.size() < fixed.size()) {
    throw ParseError("header must start with cluster_id,member_id,a1,r,a2,y");
  }
  for (std::size_t k = 0; k < fixed.size(); ++k) {
    if (header[k] != fixed[k]) {
      throw ParseError("unknown or misplaced column '" + header[k] +
                       "', expected '" + fixed[k] + "'");
    }
  }
  const int p = static_cast<int>(header.size() - fixed.size());
  for (int k = 0; k < p; ++k) {
    const auto& name = header[fixed.size() + k];
    if (name.empty()) throw ParseError("empty covariate column name");
  }

  TrialDataset ds;
  ds.p = p;
  ds.covariate_names.assign(header.begin() + fixed.size(), header.end());

  struct Pending {
    ClusterRecord rec;
    std::vector<double> y;
  };
  std::vector<Pending> order;
  std::map<std::string, std::size_t> index;

  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) != 6 + p) {
      throw ParseError("row " + std::to_string(row) + ": expected " +
                       std::to_string(6 + p) + " fields, got " +
                       std::to_string(fields.size()));
    }
    const std::string& id = fields[0];
    const int a1 = parse_sign(fields[2], row, "a1");
    const int r = fields[3] == "1" ? 1
                  : fields[3] == "0"
                      ? 0
                      : throw ParseError("row " + std::to_string(row) +
                                         ": r must be 0 or 1");
    std::optional<int> a2;
    if (fields[4] == "NA") {
      if (r == 0) {
        throw ParseError("row " + std::to_string(row) +
                         ": a2 is NA for a non-responder");
      }
    } else {
      a2 = parse_sign(fields[4], row, "a2");
      if (r == 1) {
        throw ParseError("row " + std::to_string(row) +
                         ": a2 must be NA for a responder");
      }
    }
    const double y = parse_double(fields[5], row, "y");
    Eigen::VectorXd x(p);
    for (int k = 0; k < p; ++k) {
      x[k] = parse_double(fields[6 + k], row, ds.covariate_names[k]);
    }

    auto it = index.find(id);
    if (it == index.end()) {
      index.emplace(id, order.size());
      Pending pend;
      pend.rec.cluster_id = id;
      pend.rec.a1 = a1;
      pend.rec.r = r;
      pend.rec.a2 = a2;
      pend.rec.x = x;
      pend.y.push_back(y);
      order.push_back(std::move(pend));
    } else {
      Pending& pend = order[it->second];
      if (pend.rec.a1 != a1 || pend.rec.r != r || pend.rec.a2 != a2 ||
          (pend.rec.x - x).cwiseAbs().maxCoeff() > 0.0) {
        throw ParseError("row " + std::to_string(row) +
                         ": cluster-level fields differ within cluster '" +
                         id + "'");
      }
      pend.y.push_back(y);
    }
  }

  for (auto& pend : order) {
    pend.rec.y = Eigen::Map<Eigen::VectorXd>(pend.y.data(),
                                             static_cast<long>(pend.y.size()));
    ds.clusters.push_back(std::move(pend.rec));
  }
  return ds;
}

TrialDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return parse_csv(in);
}

void write_csv(const TrialDataset& ds, std::ostream& out) {
  out << "cluster_id,member_id,a1,r,a2,y";
  for (const auto& name : ds.covariate_names) out << "," << name;
  out << "\n";
  out << std::setprecision(17);
  for (const auto& c : ds.clusters) {
    for (Eigen::Index j = 0; j < c.size(); ++j) {
      out << c.cluster_id << "," << j + 1 << "," << c.a1 << "," << c.r << ",";
      if (c.a2) {
        out << *c.a2;
      } else {
        out << "NA";
      }
      out << "," << c.y[j];
      for (Eigen::Index k = 0; k < c.x.size(); ++k) out << "," << c.x[k];
      out << "\n";
    }
  }
}

void write_csv(const TrialDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  write_csv(ds, out);
}

}  // namespace csmart
