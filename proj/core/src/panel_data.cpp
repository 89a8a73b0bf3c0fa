#include "ssov/panel_data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace ssov {

namespace {

constexpr double kShareSumTol = 1e-9;

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::string path;

  int col(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return static_cast<int>(j);
    throw ValidationError("missing column '" + name + "' in " + path);
  }
  int col_optional(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return static_cast<int>(j);
    return -1;
  }
};

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

CsvTable read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path);
  CsvTable table;
  table.path = path;
  std::string line;
  bool first = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split_line(line);
    if (first) {
      table.header = fields;
      first = false;
      continue;
    }
    if (fields.size() != table.header.size())
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": expected " + std::to_string(table.header.size()) +
                            " fields, got " + std::to_string(fields.size()));
    table.rows.push_back(std::move(fields));
  }
  if (first) throw ValidationError("empty file: " + path);
  return table;
}

double parse_cell(const std::string& s, const std::string& what) {
  const char* begin = s.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw ValidationError("cannot parse numeric cell '" + s + "' for " + what);
  if (!std::isfinite(v))
    throw ValidationError("non-finite cell '" + s + "' for " + what);
  return v;
}

bool all_numeric(const std::vector<std::string>& vals) {
  for (const auto& s : vals) {
    const char* b = s.c_str();
    char* e = nullptr;
    std::strtod(b, &e);
    if (e == b || *e != '\0') return false;
  }
  return true;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string prefix_of(const std::string& code, int digits) {
  return code.size() <= static_cast<std::size_t>(digits)
             ? code
             : code.substr(0, digits);
}

}  // namespace

std::vector<int> cluster_ids(const std::vector<std::string>& labels,
                             int* n_clusters) {
  std::unordered_map<std::string, int> seen;
  std::vector<int> ids(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = seen.emplace(labels[i], static_cast<int>(seen.size()));
    ids[i] = it->second;
  }
  if (n_clusters) *n_clusters = static_cast<int>(seen.size());
  return ids;
}

PanelDataset load_csv(const std::string& obs_path, const std::string& shock_path,
                      const CsvSchema& schema) {
  CsvTable obs = read_table(obs_path);

  // Resolve sector codes: explicit list, or every header matching the prefix.
  std::vector<std::string> codes = schema.sector_codes;
  if (codes.empty()) {
    for (const auto& h : obs.header)
      if (h.size() > schema.share_prefix.size() &&
          h.rfind(schema.share_prefix, 0) == 0)
        codes.push_back(h.substr(schema.share_prefix.size()));
  }
  if (codes.empty())
    throw ValidationError("no share columns with prefix '" +
                          schema.share_prefix + "' in " + obs_path);
  {
    std::unordered_set<std::string> uniq(codes.begin(), codes.end());
    if (uniq.size() != codes.size())
      throw ValidationError("duplicate sector codes among share columns");
  }

  const int p = static_cast<int>(codes.size());
  const int unit_c = obs.col(schema.unit);
  const int period_c = obs.col(schema.period);
  const int y_c = obs.col(schema.outcome);
  const int x_c = obs.col(schema.regressor);
  const int w_c = obs.col(schema.weight);
  const int cl_c = obs.col(schema.cluster);
  std::vector<int> control_c;
  for (const auto& name : schema.controls) control_c.push_back(obs.col(name));
  std::vector<int> share_c(p), share_x_c;
  for (int j = 0; j < p; ++j) share_c[j] = obs.col(schema.share_prefix + codes[j]);
  if (!schema.share_x_prefix.empty()) {
    share_x_c.resize(p);
    for (int j = 0; j < p; ++j)
      share_x_c[j] = obs.col(schema.share_x_prefix + codes[j]);
  }

  // Units in order of first appearance; periods sorted (numerically when
  // every period label parses as a number).
  std::vector<std::string> unit_id, period_vals;
  std::unordered_map<std::string, int> unit_ix;
  std::unordered_set<std::string> period_set;
  for (const auto& row : obs.rows) {
    if (unit_ix.emplace(row[unit_c], static_cast<int>(unit_id.size())).second)
      unit_id.push_back(row[unit_c]);
    period_set.insert(row[period_c]);
  }
  period_vals.assign(period_set.begin(), period_set.end());
  if (all_numeric(period_vals)) {
    std::sort(period_vals.begin(), period_vals.end(),
              [](const std::string& a, const std::string& b) {
                return std::strtod(a.c_str(), nullptr) <
                       std::strtod(b.c_str(), nullptr);
              });
  } else {
    std::sort(period_vals.begin(), period_vals.end());
  }
  std::unordered_map<std::string, int> period_ix;
  for (std::size_t t = 0; t < period_vals.size(); ++t)
    period_ix[period_vals[t]] = static_cast<int>(t);

  const int n = static_cast<int>(unit_id.size());
  const int T = static_cast<int>(period_vals.size());
  const int d_in = static_cast<int>(control_c.size());
  const int d = d_in + (schema.add_intercept ? 1 : 0);

  PanelDataset ds;
  ds.n = n;
  ds.T = T;
  ds.p = p;
  ds.d = d;
  ds.y.setZero(n, T);
  ds.x.setZero(n, T);
  ds.reg_weight.setZero(n, T);
  ds.w.assign(T, Eigen::MatrixXd::Zero(n, d));
  ds.s_z.assign(T, Eigen::MatrixXd::Zero(n, p));
  if (!share_x_c.empty()) ds.s_x.assign(T, Eigen::MatrixXd::Zero(n, p));
  ds.obs_cluster.assign(static_cast<std::size_t>(n) * T, "");
  ds.sector_code = codes;
  ds.unit_id = unit_id;
  ds.period_id = period_vals;
  ds.sector_cluster_digits = schema.sector_cluster_digits;
  if (schema.add_intercept) ds.control_names.push_back("(intercept)");
  for (const auto& name : schema.controls) ds.control_names.push_back(name);

  std::vector<char> filled(static_cast<std::size_t>(n) * T, 0);
  for (const auto& row : obs.rows) {
    int i = unit_ix[row[unit_c]];
    int t = period_ix[row[period_c]];
    std::size_t flat = static_cast<std::size_t>(i) * T + t;
    if (filled[flat])
      throw ValidationError("duplicate (unit,period): (" + row[unit_c] + "," +
                            row[period_c] + ")");
    filled[flat] = 1;
    std::string at = " at (" + row[unit_c] + "," + row[period_c] + ")";
    ds.y(i, t) = parse_cell(row[y_c], schema.outcome + at);
    ds.x(i, t) = parse_cell(row[x_c], schema.regressor + at);
    double wt = parse_cell(row[w_c], schema.weight + at);
    if (!(wt > 0.0))
      throw ValidationError("non-positive weight " + fmt(wt) + at);
    ds.reg_weight(i, t) = wt;
    ds.obs_cluster[flat] = row[cl_c];
    int off = schema.add_intercept ? 1 : 0;
    if (schema.add_intercept) ds.w[t](i, 0) = 1.0;
    for (int k = 0; k < d_in; ++k)
      ds.w[t](i, k + off) = parse_cell(row[control_c[k]], schema.controls[k] + at);
    double sum = 0.0;
    for (int j = 0; j < p; ++j) {
      double s = parse_cell(row[share_c[j]], "share " + codes[j] + at);
      if (s < 0.0)
        throw ValidationError("negative share " + fmt(s) + " in column " +
                              schema.share_prefix + codes[j] + at);
      ds.s_z[t](i, j) = s;
      sum += s;
    }
    if (sum > 1.0 + kShareSumTol)
      throw ValidationError("share row sum " + fmt(sum) + " exceeds 1" + at);
    if (!share_x_c.empty())
      for (int j = 0; j < p; ++j) {
        double s = parse_cell(row[share_x_c[j]], "share_x " + codes[j] + at);
        if (s < 0.0)
          throw ValidationError("negative share " + fmt(s) + " in column " +
                                schema.share_x_prefix + codes[j] + at);
        ds.s_x[t](i, j) = s;
      }
  }
  for (int i = 0; i < n; ++i)
    for (int t = 0; t < T; ++t)
      if (!filled[static_cast<std::size_t>(i) * T + t])
        throw ValidationError("unbalanced panel: missing row for (" +
                              unit_id[i] + "," + period_vals[t] + ")");

  // Shock file: match sectors by code, both directions.
  CsvTable sh = read_table(shock_path);
  ds.shock_z.setZero(T, p);
  const bool want_x = !schema.shock_x.empty();
  if (want_x) ds.shock_x.setZero(T, p);
  std::vector<std::vector<char>> shock_seen(T, std::vector<char>(p, 0));
  std::unordered_map<std::string, int> code_ix;
  for (int j = 0; j < p; ++j) code_ix[codes[j]] = j;

  if (schema.shock_layout == "long") {
    int pt = sh.col(schema.shock_period);
    int sc = sh.col(schema.shock_sector);
    int zc = sh.col(schema.shock_z);
    int xc = want_x ? sh.col(schema.shock_x) : -1;
    for (const auto& row : sh.rows) {
      auto it = period_ix.find(row[pt]);
      if (it == period_ix.end())
        throw ValidationError("shock file period '" + row[pt] +
                              "' not present in observations");
      auto jc = code_ix.find(row[sc]);
      if (jc == code_ix.end())
        throw ValidationError("unmatched sector code '" + row[sc] +
                              "' in shock file");
      int t = it->second, j = jc->second;
      if (shock_seen[t][j])
        throw ValidationError("duplicate shock row for (period,sector)=(" +
                              row[pt] + "," + row[sc] + ")");
      shock_seen[t][j] = 1;
      ds.shock_z(t, j) = parse_cell(row[zc], "shock z " + row[sc]);
      if (want_x) ds.shock_x(t, j) = parse_cell(row[xc], "shock x " + row[sc]);
    }
  } else if (schema.shock_layout == "wide") {
    int pt = sh.col(schema.shock_period);
    std::vector<int> sec_c(p);
    for (int j = 0; j < p; ++j) sec_c[j] = sh.col(codes[j]);
    if (want_x)
      throw ValidationError("wide shock layout does not carry regressor shocks");
    for (const auto& row : sh.rows) {
      auto it = period_ix.find(row[pt]);
      if (it == period_ix.end())
        throw ValidationError("shock file period '" + row[pt] +
                              "' not present in observations");
      int t = it->second;
      for (int j = 0; j < p; ++j) {
        if (shock_seen[t][j])
          throw ValidationError("duplicate shock row for period " + row[pt]);
        shock_seen[t][j] = 1;
        ds.shock_z(t, j) = parse_cell(row[sec_c[j]], "shock z " + codes[j]);
      }
    }
  } else {
    throw ValidationError("unknown shock_layout '" + schema.shock_layout + "'");
  }
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < p; ++j)
      if (!shock_seen[t][j])
        throw ValidationError("unmatched sector code '" + codes[j] +
                              "': no shock for period " + period_vals[t]);

  ds.sector_cluster.resize(p);
  for (int j = 0; j < p; ++j)
    ds.sector_cluster[j] = prefix_of(codes[j], schema.sector_cluster_digits);

  // Bartik instrument at the native level.
  ds.z.setZero(n, T);
  for (int t = 0; t < T; ++t)
    ds.z.col(t) = ds.s_z[t] * ds.shock_z.row(t).transpose();

  validate(ds);
  return ds;
}

void save_csv(const PanelDataset& ds, const std::string& obs_path,
              const std::string& shock_path, const CsvSchema& schema) {
  std::ofstream out(obs_path);
  if (!out) throw ValidationError("cannot write file: " + obs_path);
  out << schema.unit << "," << schema.period << "," << schema.outcome << ","
      << schema.regressor << "," << schema.weight << "," << schema.cluster;
  for (const auto& c : ds.control_names) out << "," << c;
  for (const auto& code : ds.sector_code) out << "," << schema.share_prefix << code;
  if (ds.has_regressor_shares())
    for (const auto& code : ds.sector_code)
      out << "," << schema.share_x_prefix << code;
  out << "\n";
  for (int i = 0; i < ds.n; ++i)
    for (int t = 0; t < ds.T; ++t) {
      out << ds.unit_id[i] << "," << ds.period_id[t] << "," << fmt(ds.y(i, t))
          << "," << fmt(ds.x(i, t)) << "," << fmt(ds.reg_weight(i, t)) << ","
          << ds.cluster_of(i, t);
      for (int k = 0; k < ds.d; ++k) out << "," << fmt(ds.w[t](i, k));
      for (int j = 0; j < ds.p; ++j) out << "," << fmt(ds.s_z[t](i, j));
      if (ds.has_regressor_shares())
        for (int j = 0; j < ds.p; ++j) out << "," << fmt(ds.s_x[t](i, j));
      out << "\n";
    }

  std::ofstream shk(shock_path);
  if (!shk) throw ValidationError("cannot write file: " + shock_path);
  shk << schema.shock_period << "," << schema.shock_sector << ","
      << schema.shock_z;
  if (ds.has_regressor_shocks()) shk << "," << (schema.shock_x.empty() ? "zx" : schema.shock_x);
  shk << "\n";
  for (int t = 0; t < ds.T; ++t)
    for (int j = 0; j < static_cast<int>(ds.shock_z.cols()); ++j) {
      // After aggregation the shock columns keep their native codes, which
      // are no longer listed in sector_code; only native datasets round-trip.
      shk << ds.period_id[t] << "," << ds.sector_code[j] << ","
          << fmt(ds.shock_z(t, j));
      if (ds.has_regressor_shocks()) shk << "," << fmt(ds.shock_x(t, j));
      shk << "\n";
    }
}

void validate(const PanelDataset& ds) {
  auto finite = [](const Eigen::MatrixXd& m) { return m.allFinite(); };
  if (ds.n <= 0 || ds.T <= 0 || ds.p <= 0)
    throw ValidationError("empty dataset");
  if (!finite(ds.y) || !finite(ds.x) || !finite(ds.z) || !finite(ds.shock_z) ||
      !finite(ds.reg_weight))
    throw ValidationError("non-finite values in dataset");
  if ((ds.reg_weight.array() <= 0.0).any())
    throw ValidationError("non-positive regression weight");
  if (ds.obs_cluster.size() != static_cast<std::size_t>(ds.n) * ds.T)
    throw ValidationError("obs_cluster size mismatch");
  if (ds.sector_cluster.size() != static_cast<std::size_t>(ds.p) ||
      ds.sector_code.size() != static_cast<std::size_t>(ds.p))
    throw ValidationError("sector label size mismatch");
  for (int t = 0; t < ds.T; ++t) {
    if (!finite(ds.s_z[t]) || !finite(ds.w[t]))
      throw ValidationError("non-finite values in dataset");
    if ((ds.s_z[t].array() < 0.0).any())
      throw ValidationError("negative share entry");
    Eigen::VectorXd sums = ds.s_z[t].rowwise().sum();
    if ((sums.array() > 1.0 + kShareSumTol).any())
      throw ValidationError("share row sum exceeds 1 at period " +
                            std::to_string(t));
  }
  if (ds.shares_match_shocks()) {
    if (ds.shock_z.cols() != ds.p)
      throw ValidationError("shock/share sector count mismatch");
    for (int t = 0; t < ds.T; ++t) {
      Eigen::VectorXd zt = ds.s_z[t] * ds.shock_z.row(t).transpose();
      double scale = std::max(1.0, zt.cwiseAbs().maxCoeff());
      if (((zt - ds.z.col(t)).cwiseAbs().array() > 1e-12 * scale).any())
        throw ValidationError("stored instrument disagrees with S'Z");
    }
  }
}

PanelDataset aggregate_sic(const PanelDataset& ds, int level) {
  if (level <= 0) throw ValidationError("aggregation level must be positive");
  for (const auto& code : ds.sector_code)
    if (code.size() < static_cast<std::size_t>(level))
      throw ValidationError("aggregation level " + std::to_string(level) +
                            " exceeds sector code length for '" + code + "'");

  // Group columns by prefix, first-appearance order.
  std::vector<std::string> groups;
  std::unordered_map<std::string, int> group_ix;
  std::vector<int> col_group(ds.p);
  for (int j = 0; j < ds.p; ++j) {
    std::string pre = ds.sector_code[j].substr(0, level);
    auto [it, inserted] = group_ix.emplace(pre, static_cast<int>(groups.size()));
    if (inserted) groups.push_back(pre);
    col_group[j] = it->second;
  }
  const int pg = static_cast<int>(groups.size());
  if (pg == ds.p) {
    bool identity = true;
    for (int j = 0; j < ds.p; ++j)
      if (groups[col_group[j]] != ds.sector_code[j]) identity = false;
    if (identity) return ds;  // native level requested
  }

  PanelDataset out = ds;
  out.p = pg;
  out.sector_code = groups;
  out.aggregated_level = level;
  out.sector_cluster.resize(pg);
  for (int g = 0; g < pg; ++g)
    out.sector_cluster[g] =
        prefix_of(groups[g], std::min(level, ds.sector_cluster_digits));
  out.s_z.assign(ds.T, Eigen::MatrixXd::Zero(ds.n, pg));
  for (int t = 0; t < ds.T; ++t)
    for (int j = 0; j < ds.p; ++j)
      out.s_z[t].col(col_group[j]) += ds.s_z[t].col(j);
  if (ds.has_regressor_shares()) {
    out.s_x.assign(ds.T, Eigen::MatrixXd::Zero(ds.n, pg));
    for (int t = 0; t < ds.T; ++t)
      for (int j = 0; j < ds.p; ++j)
        out.s_x[t].col(col_group[j]) += ds.s_x[t].col(j);
  }
  return out;
}

StackedDesign stack_panel(const PanelDataset& ds) {
  StackedDesign sd;
  sd.n = ds.n;
  sd.T = ds.T;
  sd.p = ds.p;
  sd.d = ds.d;
  const Eigen::Index rows = static_cast<Eigen::Index>(ds.n) * ds.T;
  sd.y.resize(rows);
  sd.x.resize(rows);
  sd.z.resize(rows);
  sd.weight.resize(rows);
  sd.W.resize(rows, ds.d);
  sd.S.resize(rows, ds.p);
  sd.obs_cluster.resize(rows);
  sd.unit_index.resize(rows);
  sd.period_index.resize(rows);
  for (int i = 0; i < ds.n; ++i)
    for (int t = 0; t < ds.T; ++t) {
      Eigen::Index r = static_cast<Eigen::Index>(i) * ds.T + t;
      sd.y(r) = ds.y(i, t);
      sd.x(r) = ds.x(i, t);
      sd.z(r) = ds.z(i, t);
      sd.weight(r) = ds.reg_weight(i, t);
      if (ds.d > 0) sd.W.row(r) = ds.w[t].row(i);
      sd.S.row(r) = ds.s_z[t].row(i);
      sd.obs_cluster[r] = ds.cluster_of(i, t);
      sd.unit_index[r] = i;
      sd.period_index[r] = t;
    }
  return sd;
}

StackedDesign restrict_to_period(const StackedDesign& design, int t) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index r = 0; r < design.rows(); ++r)
    if (design.period_index[r] == t) keep.push_back(r);
  if (keep.empty())
    throw ValidationError("period index " + std::to_string(t) + " out of range");
  StackedDesign sub;
  sub.n = design.n;
  sub.T = 1;
  sub.p = design.p;
  sub.d = design.d;
  const Eigen::Index m = static_cast<Eigen::Index>(keep.size());
  sub.y.resize(m);
  sub.x.resize(m);
  sub.z.resize(m);
  sub.weight.resize(m);
  sub.W.resize(m, design.d);
  sub.S.resize(m, design.p);
  sub.obs_cluster.resize(m);
  sub.unit_index.resize(m);
  sub.period_index.resize(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    Eigen::Index r = keep[k];
    sub.y(k) = design.y(r);
    sub.x(k) = design.x(r);
    sub.z(k) = design.z(r);
    sub.weight(k) = design.weight(r);
    if (design.d > 0) sub.W.row(k) = design.W.row(r);
    sub.S.row(k) = design.S.row(r);
    sub.obs_cluster[k] = design.obs_cluster[r];
    sub.unit_index[k] = design.unit_index[r];
    sub.period_index[k] = design.period_index[r];
  }
  return sub;
}

}  // namespace ssov
