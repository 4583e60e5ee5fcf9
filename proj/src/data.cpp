#include "prefgp/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "prefgp/kernels.hpp"

namespace prefgp {

int PreferenceDataset::num_users() const {
  if (users.rows() > 0) return static_cast<int>(users.rows());
  int max_user = -1;
  for (const auto& p : pairs) max_user = std::max(max_user, p.user);
  return max_user + 1;
}

void PreferenceDataset::validate() const {
  const int n = num_items();
  const int u = num_users();
  for (size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    if (p.item_a == p.item_b) {
      throw InvalidInputError("pair " + std::to_string(i) +
                              ": item_a equals item_b");
    }
    if (p.item_a < 0 || p.item_a >= n || p.item_b < 0 || p.item_b >= n ||
        p.user < 0 || (u > 0 && p.user >= u)) {
      throw InvalidInputError("pair " + std::to_string(i) +
                              ": index out of bounds");
    }
    if (p.y != 0 && p.y != 1) {
      throw InvalidInputError("pair " + std::to_string(i) +
                              ": label must be 0 or 1");
    }
  }
  if (!items.allFinite() || (users.size() > 0 && !users.allFinite())) {
    throw InvalidInputError("feature matrices must not contain NaN/Inf");
  }
}

void SimulationConfig::validate() const {
  if (grid_side < 1) throw InvalidConfigError("sim: grid_side must be >= 1");
  if (users < 1) throw InvalidConfigError("sim: users must be >= 1");
  if (C_true < 0) throw InvalidConfigError("sim: C_true must be >= 0");
  if (pairs < 1) throw InvalidConfigError("sim: pairs must be >= 1");
  if (!(s_t > 0.0) || !(s_w > 0.0)) {
    throw InvalidConfigError("sim: inverse scales must be positive");
  }
  for (double s : s_v) {
    if (!(s > 0.0)) throw InvalidConfigError("sim: s_v entries must be > 0");
  }
  if (s_v.empty() && C_true > 0 &&
      (!(s_v_min > 0.0) || !(s_v_max >= s_v_min))) {
    throw InvalidConfigError("sim: s_v list or a valid s_v_min/s_v_max range "
                             "is required when C_true > 0");
  }
  if (item_subsample < 0 || item_subsample > grid_side * grid_side) {
    throw InvalidConfigError("sim: item_subsample out of range");
  }
}

namespace {

Eigen::VectorXd gp_draw(const Eigen::MatrixXd& K, double inverse_scale,
                        std::mt19937_64& rng) {
  const auto chol = cholesky_with_jitter(K / inverse_scale, 1e-6);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd z(K.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = gauss(rng);
  return chol.llt.matrixL() * z;
}

}  // namespace

PreferenceDataset simulate_crowd(const SimulationConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);

  // Item features: a grid_side x grid_side grid scaled to [0, 1]^2.
  const int grid_n = cfg.grid_side * cfg.grid_side;
  Eigen::MatrixXd grid(grid_n, 2);
  const double denom = cfg.grid_side > 1 ? cfg.grid_side - 1.0 : 1.0;
  for (int r = 0; r < cfg.grid_side; ++r) {
    for (int c = 0; c < cfg.grid_side; ++c) {
      grid(r * cfg.grid_side + c, 0) = r / denom;
      grid(r * cfg.grid_side + c, 1) = c / denom;
    }
  }
  Eigen::MatrixXd items;
  if (cfg.item_subsample > 0 && cfg.item_subsample < grid_n) {
    std::vector<int> idx(grid_n);
    for (int i = 0; i < grid_n; ++i) idx[i] = i;
    for (size_t i = idx.size(); i > 1; --i) {
      std::swap(idx[i - 1], idx[rng() % i]);
    }
    items.resize(cfg.item_subsample, 2);
    for (int i = 0; i < cfg.item_subsample; ++i) items.row(i) = grid.row(idx[i]);
  } else {
    items = grid;
  }
  const int n = static_cast<int>(items.rows());

  // User features: 2-D uniform in [0, 1]^2.
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::MatrixXd users(cfg.users, 2);
  for (int j = 0; j < cfg.users; ++j) {
    users(j, 0) = unif(rng);
    users(j, 1) = unif(rng);
  }

  const KernelConfig item_kernel =
      KernelConfig::matern32(median_heuristic(items));
  const KernelConfig user_kernel =
      cfg.users > 1 ? KernelConfig::matern32(median_heuristic(users))
                    : KernelConfig::matern32(Eigen::VectorXd::Ones(2));
  const Eigen::MatrixXd K = covariance_matrix(items, items, item_kernel);
  const Eigen::MatrixXd L = covariance_matrix(users, users, user_kernel);

  std::vector<double> s_v = cfg.s_v;
  if (s_v.empty() && cfg.C_true > 0) {
    std::uniform_real_distribution<double> sv_dist(cfg.s_v_min, cfg.s_v_max);
    for (int c = 0; c < cfg.C_true; ++c) s_v.push_back(sv_dist(rng));
  }
  while (static_cast<int>(s_v.size()) < cfg.C_true) s_v.push_back(s_v.back());

  const Eigen::VectorXd t = gp_draw(K, cfg.s_t, rng);
  Eigen::MatrixXd F = t.replicate(1, cfg.users);
  Eigen::MatrixXd V(n, cfg.C_true);
  for (int c = 0; c < cfg.C_true; ++c) {
    const Eigen::VectorXd v = gp_draw(K, s_v[c], rng);
    const Eigen::VectorXd w = gp_draw(L, cfg.s_w, rng);
    V.col(c) = v;
    F += v * w.transpose();
  }

  PreferenceDataset ds;
  ds.items = items;
  ds.users = users;
  ds.gold_f = F;
  ds.gold_t = t;
  ds.gold_v = V;
  ds.pairs.reserve(cfg.pairs);
  for (int p = 0; p < cfg.pairs; ++p) {
    const int u = static_cast<int>(rng() % static_cast<uint64_t>(cfg.users));
    const int a = static_cast<int>(rng() % static_cast<uint64_t>(n));
    int b = static_cast<int>(rng() % static_cast<uint64_t>(n - 1));
    if (b >= a) ++b;
    const double prob = std_normal_cdf(F(a, u) - F(b, u));
    const int y = unif(rng) < prob ? 1 : 0;
    ds.pairs.push_back({u, a, b, y});
  }
  return ds;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

struct Table {
  std::vector<std::string> headers;
  std::vector<std::vector<std::string>> rows;  // without the id column
  std::vector<std::string> ids;
};

Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open file: " + path);
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw LoadError("empty file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.headers = split_line(line);
  if (t.headers.size() < 2) {
    throw LoadError("file " + path + ": expected an id column plus data");
  }
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != t.headers.size()) {
      throw LoadError("file " + path + ", line " + std::to_string(line_no) +
                      ": expected " + std::to_string(t.headers.size()) +
                      " columns, got " + std::to_string(cells.size()));
    }
    t.ids.push_back(cells[0]);
    cells.erase(cells.begin());
    t.rows.push_back(std::move(cells));
  }
  return t;
}

bool parse_double(const std::string& s, double& out) {
  try {
    size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

// Numeric-aware id ordering so that saved integer ids round-trip in order.
bool id_less(const std::string& a, const std::string& b) {
  long long ia, ib;
  const auto pa = std::from_chars(a.data(), a.data() + a.size(), ia);
  const auto pb = std::from_chars(b.data(), b.data() + b.size(), ib);
  const bool na = pa.ec == std::errc() && pa.ptr == a.data() + a.size();
  const bool nb = pb.ec == std::errc() && pb.ptr == b.data() + b.size();
  if (na && nb) return ia < ib;
  if (na != nb) return na;
  return a < b;
}

struct EncodedFeatures {
  Eigen::MatrixXd values;
  std::map<std::string, int> id_to_index;
};

EncodedFeatures encode_features(const std::string& path) {
  const Table t = read_table(path);
  const size_t n = t.rows.size();
  if (n == 0) throw LoadError("file " + path + ": no data rows");

  const size_t ncols = t.headers.size() - 1;
  std::vector<bool> categorical(ncols, false);
  for (size_t c = 0; c < ncols; ++c) {
    const std::string& h = t.headers[c + 1];
    const auto colon = h.rfind(':');
    if (colon != std::string::npos) {
      const std::string kind = h.substr(colon + 1);
      if (kind == "categorical") {
        categorical[c] = true;
      } else if (kind != "numeric") {
        throw LoadError("file " + path + ": unknown column kind '" + kind +
                        "' in header '" + h + "'");
      }
    }
  }

  // Column layout: numeric columns keep one slot, categorical columns get
  // one slot per sorted level.
  std::vector<std::vector<std::string>> levels(ncols);
  for (size_t c = 0; c < ncols; ++c) {
    if (!categorical[c]) continue;
    std::set<std::string> seen;
    for (const auto& row : t.rows) seen.insert(row[c]);
    levels[c].assign(seen.begin(), seen.end());
  }
  size_t dims = 0;
  for (size_t c = 0; c < ncols; ++c) {
    dims += categorical[c] ? levels[c].size() : 1;
  }

  EncodedFeatures out;
  out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                     static_cast<Eigen::Index>(dims));

  std::vector<std::string> sorted_ids = t.ids;
  std::sort(sorted_ids.begin(), sorted_ids.end(), id_less);
  for (size_t i = 0; i < sorted_ids.size(); ++i) {
    if (!out.id_to_index.emplace(sorted_ids[i], static_cast<int>(i)).second) {
      throw LoadError("file " + path + ": duplicate id '" + sorted_ids[i] +
                      "'");
    }
  }

  for (size_t r = 0; r < n; ++r) {
    const int row = out.id_to_index.at(t.ids[r]);
    size_t col = 0;
    for (size_t c = 0; c < ncols; ++c) {
      if (categorical[c]) {
        const auto it = std::find(levels[c].begin(), levels[c].end(),
                                  t.rows[r][c]);
        out.values(row, static_cast<Eigen::Index>(
                            col + (it - levels[c].begin()))) = 1.0;
        col += levels[c].size();
      } else {
        double v;
        if (!parse_double(t.rows[r][c], v)) {
          throw LoadError("file " + path + ": non-numeric value '" +
                          t.rows[r][c] + "' for id '" + t.ids[r] + "'");
        }
        out.values(row, static_cast<Eigen::Index>(col)) = v;
        ++col;
      }
    }
  }
  return out;
}

}  // namespace

PreferenceDataset load_csv(const std::string& items_path,
                           const std::string& users_path,
                           const std::string& pairs_path) {
  PreferenceDataset ds;
  EncodedFeatures items = encode_features(items_path);
  ds.items = items.values;

  std::map<std::string, int> user_ids;
  if (!users_path.empty()) {
    EncodedFeatures users = encode_features(users_path);
    ds.users = users.values;
    user_ids = std::move(users.id_to_index);
  }

  std::ifstream in(pairs_path);
  if (!in) throw LoadError("cannot open file: " + pairs_path);
  std::string line;
  if (!std::getline(in, line)) throw LoadError("empty file: " + pairs_path);
  size_t line_no = 1;
  std::map<std::string, int> implicit_users;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != 4) {
      throw LoadError("file " + pairs_path + ", line " +
                      std::to_string(line_no) + ": expected 4 columns");
    }
    PairwiseLabel p;
    const auto item_index = [&](const std::string& id) {
      const auto it = items.id_to_index.find(id);
      if (it == items.id_to_index.end()) {
        throw LoadError("file " + pairs_path + ", line " +
                        std::to_string(line_no) + ": unknown item id '" + id +
                        "'");
      }
      return it->second;
    };
    if (!users_path.empty()) {
      const auto it = user_ids.find(cells[0]);
      if (it == user_ids.end()) {
        throw LoadError("file " + pairs_path + ", line " +
                        std::to_string(line_no) + ": unknown user id '" +
                        cells[0] + "'");
      }
      p.user = it->second;
    } else {
      // No user-feature file: assign dense indices in sorted id order after
      // a first pass is not possible streaming, so map on first sight and
      // re-densify below.
      p.user = static_cast<int>(
          implicit_users.emplace(cells[0], implicit_users.size())
              .first->second);
    }
    p.item_a = item_index(cells[1]);
    p.item_b = item_index(cells[2]);
    if (cells[3] != "0" && cells[3] != "1") {
      throw LoadError("file " + pairs_path + ", line " +
                      std::to_string(line_no) + ": malformed label '" +
                      cells[3] + "' (expected 0 or 1)");
    }
    p.y = cells[3] == "1" ? 1 : 0;
    if (p.item_a == p.item_b) {
      throw LoadError("file " + pairs_path + ", line " +
                      std::to_string(line_no) + ": item compared with itself");
    }
    ds.pairs.push_back(p);
  }

  if (users_path.empty() && !implicit_users.empty()) {
    // Re-map first-sight user indices to sorted-id order.
    std::vector<std::string> ids;
    for (const auto& [id, _] : implicit_users) ids.push_back(id);
    std::sort(ids.begin(), ids.end(), id_less);
    std::map<int, int> remap;
    for (size_t i = 0; i < ids.size(); ++i) {
      remap[implicit_users.at(ids[i])] = static_cast<int>(i);
    }
    for (auto& p : ds.pairs) p.user = remap.at(p.user);
  }

  ds.validate();
  return ds;
}

void save_csv(const PreferenceDataset& ds, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const auto open = [&dir](const std::string& name) {
    std::ofstream out(fs::path(dir) / name);
    if (!out) throw LoadError("cannot write file: " + name + " in " + dir);
    out.precision(17);
    return out;
  };

  {
    auto out = open("items.csv");
    out << "id";
    for (Eigen::Index d = 0; d < ds.items.cols(); ++d) {
      out << ",f" << d << ":numeric";
    }
    out << "\n";
    for (Eigen::Index i = 0; i < ds.items.rows(); ++i) {
      out << i;
      for (Eigen::Index d = 0; d < ds.items.cols(); ++d) {
        out << "," << ds.items(i, d);
      }
      out << "\n";
    }
  }
  if (ds.users.size() > 0) {
    auto out = open("users.csv");
    out << "id";
    for (Eigen::Index d = 0; d < ds.users.cols(); ++d) {
      out << ",f" << d << ":numeric";
    }
    out << "\n";
    for (Eigen::Index i = 0; i < ds.users.rows(); ++i) {
      out << i;
      for (Eigen::Index d = 0; d < ds.users.cols(); ++d) {
        out << "," << ds.users(i, d);
      }
      out << "\n";
    }
  }
  {
    auto out = open("pairs.csv");
    out << "user_id,item_a,item_b,label\n";
    for (const auto& p : ds.pairs) {
      out << p.user << "," << p.item_a << "," << p.item_b << "," << p.y
          << "\n";
    }
  }
  if (ds.gold_f.size() > 0) {
    auto out = open("gold_f.csv");
    out << "id";
    for (Eigen::Index u = 0; u < ds.gold_f.cols(); ++u) out << ",u" << u;
    out << "\n";
    for (Eigen::Index i = 0; i < ds.gold_f.rows(); ++i) {
      out << i;
      for (Eigen::Index u = 0; u < ds.gold_f.cols(); ++u) {
        out << "," << ds.gold_f(i, u);
      }
      out << "\n";
    }
  }
  if (ds.gold_t.size() > 0) {
    auto out = open("gold_t.csv");
    out << "id,t\n";
    for (Eigen::Index i = 0; i < ds.gold_t.size(); ++i) {
      out << i << "," << ds.gold_t[i] << "\n";
    }
  }
}

namespace {

PreferenceDataset with_pairs(const PreferenceDataset& ds,
                             std::vector<PairwiseLabel> pairs) {
  PreferenceDataset out;
  out.items = ds.items;
  out.users = ds.users;
  out.gold_f = ds.gold_f;
  out.gold_t = ds.gold_t;
  out.gold_v = ds.gold_v;
  out.pairs = std::move(pairs);
  return out;
}

}  // namespace

SplitResult split_dataset(const PreferenceDataset& ds, double train_fraction,
                          uint64_t seed) {
  if (!(train_fraction >= 0.0) || train_fraction > 1.0) {
    throw InvalidInputError("split_dataset: train_fraction must be in [0, 1]");
  }
  std::vector<int> order(ds.pairs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::mt19937_64 rng(seed);
  for (size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng() % i]);
  }
  const size_t n_train = static_cast<size_t>(
      std::llround(train_fraction * static_cast<double>(order.size())));
  std::vector<PairwiseLabel> train, test;
  for (size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? train : test).push_back(ds.pairs[order[i]]);
  }
  return {with_pairs(ds, std::move(train)), with_pairs(ds, std::move(test))};
}

SplitResult split_dataset_per_user(const PreferenceDataset& ds,
                                   int train_per_user, int test_per_user,
                                   uint64_t seed) {
  std::map<int, std::vector<int>> by_user;
  for (size_t i = 0; i < ds.pairs.size(); ++i) {
    by_user[ds.pairs[i].user].push_back(static_cast<int>(i));
  }
  std::string offenders;
  for (const auto& [user, idx] : by_user) {
    if (static_cast<int>(idx.size()) < train_per_user + test_per_user) {
      offenders += (offenders.empty() ? "" : ", ") + std::to_string(user);
    }
  }
  if (!offenders.empty()) {
    throw InvalidInputError(
        "split_dataset_per_user: not enough pairs for users: " + offenders);
  }
  std::mt19937_64 rng(seed);
  std::vector<PairwiseLabel> train, test;
  for (auto& [user, idx] : by_user) {
    for (size_t i = idx.size(); i > 1; --i) {
      std::swap(idx[i - 1], idx[rng() % i]);
    }
    for (int i = 0; i < train_per_user; ++i) train.push_back(ds.pairs[idx[i]]);
    for (int i = 0; i < test_per_user; ++i) {
      test.push_back(ds.pairs[idx[train_per_user + i]]);
    }
  }
  return {with_pairs(ds, std::move(train)), with_pairs(ds, std::move(test))};
}

}  // namespace prefgp
