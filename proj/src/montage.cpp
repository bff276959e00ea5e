#include "nstate/montage.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <unordered_map>

#include "nstate/rng.hpp"

namespace nstate {

namespace {

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 normalized(const Vec3& p) {
  const double n = std::sqrt(dot(p, p));
  return {p[0] / n, p[1] / n, p[2] / n};
}

std::string trim(std::string s) {
  const auto issp = [](unsigned char c) { return std::isspace(c); };
  while (!s.empty() && issp(s.back())) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && issp(s[i])) ++i;
  return s.substr(i);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError(where + ": '" + s + "' is not a number");
  }
}

int e_number(const std::string& name) {
  int v = 0;
  if (name.size() < 2 || name[0] != 'E') return -1;
  auto [p, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), v);
  return (ec == std::errc() && p == name.data() + name.size()) ? v : -1;
}

double clamp_cos(double c) { return std::clamp(c, -1.0, 1.0); }

double pearson(const double* a, const double* b, std::size_t n) {
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= double(n);
  mb /= double(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  // flat lines (std below 1 nV) have no defined correlation; count as 0
  constexpr double kFlatVar = 1e-18;
  if (saa <= kFlatVar * double(n) || sbb <= kFlatVar * double(n)) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

using Comparator = std::pair<std::uint16_t, std::uint16_t>;

// Batcher odd-even merge sort on the next power of two >= n, with the
// padding rows held at +inf. Comparators that cannot change anything are
// dropped, then only those feeding the middle output(s) are kept.
std::vector<Comparator> median_network(std::size_t n, std::size_t& width) {
  width = 1;
  while (width < n) width <<= 1;
  std::vector<Comparator> all;
  for (std::size_t p = 1; p < width; p <<= 1)
    for (std::size_t k = p; k >= 1; k >>= 1)
      for (std::size_t j = k % p; j + k < width; j += 2 * k)
        for (std::size_t i = 0; i < std::min(k, width - j - k); ++i)
          if ((i + j) / (2 * p) == (i + j + k) / (2 * p))
            all.emplace_back(std::uint16_t(i + j), std::uint16_t(i + j + k));
  std::vector<bool> inf(width, false);
  for (std::size_t i = n; i < width; ++i) inf[i] = true;
  std::vector<Comparator> live;
  for (auto [a, b] : all) {
    if (inf[b]) continue;  // min(x, inf) = x: no-op
    if (inf[a]) {
      inf[a] = false;
      inf[b] = true;
    }
    live.emplace_back(a, b);
  }
  std::vector<bool> need(width, false);
  need[(n - 1) / 2] = true;
  need[n / 2] = true;
  std::vector<Comparator> kept;
  for (auto it = live.rbegin(); it != live.rend(); ++it) {
    if (!need[it->first] && !need[it->second]) continue;
    need[it->first] = need[it->second] = true;
    kept.push_back(*it);
  }
  std::reverse(kept.begin(), kept.end());
  return kept;
}

}  // namespace

void column_median(const double* data, std::size_t rows, std::size_t len, double* out) {
  require(rows >= 1 && rows <= 4096, "column_median: rows must be in [1, 4096]");
  std::size_t width = 0;
  const auto net = median_network(rows, width);
  constexpr std::size_t kBlock = 64;
  std::vector<double> buf(width * kBlock);
  const std::size_t lo = (rows - 1) / 2, hi = rows / 2;
  for (std::size_t start = 0; start < len; start += kBlock) {
    const std::size_t m = std::min(kBlock, len - start);
    for (std::size_t r = 0; r < width; ++r) {
      double* row = buf.data() + r * kBlock;
      if (r < rows)
        std::copy_n(data + r * len + start, m, row);
      else
        std::fill_n(row, m, std::numeric_limits<double>::infinity());
    }
    for (auto [a, b] : net) {
      double* pa = buf.data() + a * kBlock;
      double* pb = buf.data() + b * kBlock;
      for (std::size_t i = 0; i < m; ++i) {
        const double x = pa[i], y = pb[i];
        pa[i] = std::min(x, y);
        pb[i] = std::max(x, y);
      }
    }
    const double* ml = buf.data() + lo * kBlock;
    const double* mh = buf.data() + hi * kBlock;
    for (std::size_t i = 0; i < m; ++i) out[start + i] = lo == hi ? ml[i] : 0.5 * (ml[i] + mh[i]);
  }
}

const std::vector<std::string>& cogn26_channels() {
  static const std::vector<std::string> names = {
      "E98",  "E99",  "E100", "E101", "E108", "E109", "E110", "E116", "E117",
      "E118", "E119", "E124", "E125", "E126", "E127", "E128", "E129", "E137",
      "E138", "E139", "E140", "E141", "E149", "E150", "E151", "E152"};
  return names;
}

// ---------------------------------------------------------------- montage

bool Montage::contains(const std::string& name) const {
  return std::find(names.begin(), names.end(), name) != names.end();
}

std::size_t Montage::index_of(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ContractError("montage has no channel '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

void Montage::add_channel(const std::string& name, const Vec3& p) {
  if (name.empty()) throw ContractError("empty channel name");
  if (contains(name)) throw ContractError("duplicate channel name '" + name + "'");
  for (double v : p)
    if (!std::isfinite(v)) throw ContractError("non-finite position for '" + name + "'");
  const double n = std::sqrt(dot(p, p));
  if (!(n > 0.0)) throw ContractError("zero-length position for '" + name + "'");
  names.push_back(name);
  positions.push_back(normalized(p));
}

void Montage::add_subset(const std::string& name, std::vector<std::string> members) {
  for (const auto& m : members)
    if (!contains(m)) throw ContractError("subset " + name + ": unknown channel '" + m + "'");
  subsets[name] = std::move(members);
}

bool Montage::register_cogn26() {
  const auto& c = cogn26_channels();
  if (!std::all_of(c.begin(), c.end(), [&](const std::string& n) { return contains(n); }))
    return false;
  add_subset(kCogn26Name, c);
  return true;
}

Montage Montage::select(const std::vector<std::string>& channels) const {
  Montage out;
  for (const auto& n : channels) out.add_channel(n, position(n));
  for (const auto& [name, members] : subsets)
    if (std::all_of(members.begin(), members.end(),
                    [&](const std::string& m) { return out.contains(m); }))
      out.subsets[name] = members;
  return out;
}

void Montage::validate() const {
  require(names.size() == positions.size(), "montage names/positions disagree");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < names.size(); ++i) {
    require(seen.insert(names[i]).second, "duplicate channel name '" + names[i] + "'");
    require(std::abs(std::sqrt(dot(positions[i], positions[i])) - 1.0) <= 1e-9,
            "position of '" + names[i] + "' is not unit length");
  }
  for (const auto& [name, members] : subsets)
    for (const auto& m : members)
      require(seen.count(m) == 1, "subset " + name + ": unknown channel '" + m + "'");
}

Montage load_montage(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open montage " + path.string());
  std::string line;
  std::size_t lineno = 0;
  Montage m;
  bool header = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (!header) {
      if (fields != std::vector<std::string>{"name", "x", "y", "z"})
        throw FormatError(where + ": expected header 'name,x,y,z'");
      header = true;
      continue;
    }
    if (fields.size() != 4)
      throw FormatError(where + ": expected 4 fields, found " + std::to_string(fields.size()));
    if (fields[0].empty()) throw FormatError(where + ": empty channel name");
    const Vec3 p{parse_double(fields[1], where), parse_double(fields[2], where),
                 parse_double(fields[3], where)};
    for (double v : p)
      if (!std::isfinite(v)) throw FormatError(where + ": non-finite coordinate");
    if (m.contains(fields[0]))
      throw FormatError(where + ": duplicate channel name '" + fields[0] + "'");
    if (!(dot(p, p) > 0.0)) throw FormatError(where + ": zero-length position");
    m.add_channel(fields[0], p);
  }
  if (!header) throw FormatError(path.string() + ": empty montage file");
  if (m.size() == 0) throw FormatError(path.string() + ": no channels");
  m.register_cogn26();
  return m;
}

void save_montage(const std::filesystem::path& path, const Montage& m) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  os << "name,x,y,z\n";
  os.precision(17);
  for (std::size_t i = 0; i < m.size(); ++i)
    os << m.names[i] << ',' << m.positions[i][0] << ',' << m.positions[i][1] << ','
       << m.positions[i][2] << '\n';
  if (!os) throw FormatError("write failed: " + path.string());
}

std::vector<Vec3> fibonacci_sphere(std::size_t n) {
  require(n > 0, "fibonacci_sphere: n must be positive");
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  std::vector<Vec3> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * double(i) + 1.0) / double(n);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * double(i);
    pts[i] = normalized({r * std::cos(phi), r * std::sin(phi), z});
  }
  return pts;
}

Vec3 posterior_pole() { return normalized({0.0, -0.7, 0.7}); }

Montage synthetic_montage(std::size_t channels) {
  constexpr std::size_t kNet = 256;
  require(channels >= 1 && channels <= kNet, "synthetic_montage: channels must be in [1, 256]");
  const auto pts = fibonacci_sphere(kNet);
  const Vec3 pole = posterior_pole();
  std::vector<std::size_t> order(kNet);
  for (std::size_t i = 0; i < kNet; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dot(pts[a], pole) > dot(pts[b], pole);
  });
  const auto& cogn = cogn26_channels();
  std::set<std::string> cogn_set(cogn.begin(), cogn.end());
  std::vector<std::string> others;
  for (std::size_t e = 1; e <= kNet; ++e) {
    const std::string n = "E" + std::to_string(e);
    if (!cogn_set.count(n)) others.push_back(n);
  }
  std::vector<std::pair<std::string, Vec3>> chosen;
  for (std::size_t r = 0; r < channels; ++r) {
    const std::string name = r < cogn.size() ? cogn[r] : others[r - cogn.size()];
    chosen.emplace_back(name, pts[order[r]]);
  }
  std::stable_sort(chosen.begin(), chosen.end(), [](const auto& a, const auto& b) {
    return e_number(a.first) < e_number(b.first);
  });
  Montage m;
  for (const auto& [name, p] : chosen) m.add_channel(name, p);
  m.register_cogn26();
  return m;
}

// ---------------------------------------------------------------- splines

double spline_g(double x, int m, int n_terms) {
  require(x >= -1.0 - 1e-12 && x <= 1.0 + 1e-12, "spline_g: cosine outside [-1, 1]");
  require(m >= 1 && n_terms >= 1, "spline_g: stiffness and term count must be positive");
  x = clamp_cos(x);
  double p_prev = 1.0, p = x, sum = 0.0;
  for (int n = 1; n <= n_terms; ++n) {
    const double nn = double(n) * double(n + 1);
    sum += (2.0 * n + 1.0) / std::pow(nn, m) * p;
    const double p_next = ((2.0 * n + 1.0) * x * p - double(n) * p_prev) / double(n + 1);
    p_prev = p;
    p = p_next;
  }
  return sum / (4.0 * std::numbers::pi);
}

std::vector<double> spline_weights(const std::vector<Vec3>& sources,
                                   const std::vector<Vec3>& targets, const SplineOptions& opts) {
  const std::size_t g = sources.size(), b = targets.size();
  if (g < 4)
    throw ContractError("spline interpolation needs at least 4 good channels, got " +
                        std::to_string(g));
  Eigen::MatrixXd sys(g + 1, g + 1);
  for (std::size_t i = 0; i < g; ++i) {
    for (std::size_t j = i; j < g; ++j) {
      const double v = spline_g(clamp_cos(dot(sources[i], sources[j])), opts.stiffness,
                                opts.n_terms);
      sys(Eigen::Index(i), Eigen::Index(j)) = v;
      sys(Eigen::Index(j), Eigen::Index(i)) = v;
    }
    sys(Eigen::Index(i), Eigen::Index(i)) += opts.ridge;
    sys(Eigen::Index(i), Eigen::Index(g)) = 1.0;
    sys(Eigen::Index(g), Eigen::Index(i)) = 1.0;
  }
  sys(Eigen::Index(g), Eigen::Index(g)) = 0.0;
  Eigen::MatrixXd rhs(g + 1, b);
  for (std::size_t t = 0; t < b; ++t) {
    for (std::size_t j = 0; j < g; ++j)
      rhs(Eigen::Index(j), Eigen::Index(t)) =
          spline_g(clamp_cos(dot(targets[t], sources[j])), opts.stiffness, opts.n_terms);
    rhs(Eigen::Index(g), Eigen::Index(t)) = 1.0;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(sys);
  if (!lu.isInvertible()) throw NumericError("spline system is singular");
  // the system is symmetric, so solving for the target kernels gives the
  // rows of the interpolation map directly
  const Eigen::MatrixXd sol = lu.solve(rhs);
  std::vector<double> w(b * g);
  for (std::size_t t = 0; t < b; ++t)
    for (std::size_t j = 0; j < g; ++j) {
      const double v = sol(Eigen::Index(j), Eigen::Index(t));
      if (!std::isfinite(v)) throw NumericError("spline system produced non-finite weights");
      w[t * g + j] = v;
    }
  return w;
}

TensorD spline_interpolate(const std::vector<Vec3>& good_positions, const TensorD& good_data,
                           const std::vector<Vec3>& target_positions,
                           const SplineOptions& opts) {
  require(good_data.rank() == 2 && good_data.dim(0) == good_positions.size(),
          "spline_interpolate: data must be [G x N] matching the good positions");
  require(!target_positions.empty(), "spline_interpolate: no targets");
  const std::size_t g = good_positions.size(), b = target_positions.size(), n = good_data.dim(1);
  const auto w = spline_weights(good_positions, target_positions, opts);
  TensorD out({b, n});
  for (std::size_t t = 0; t < b; ++t) {
    double* o = out.data() + t * n;
    for (std::size_t j = 0; j < g; ++j) {
      const double a = w[t * g + j];
      const double* x = good_data.data() + j * n;
      for (std::size_t i = 0; i < n; ++i) o[i] += a * x[i];
    }
  }
  return out;
}

Recording interpolate_channels(const Recording& rec, const Montage& montage,
                               const std::vector<std::string>& bad) {
  rec.validate();
  Recording out = rec;
  if (bad.empty()) return out;
  std::set<std::string> bad_set(bad.begin(), bad.end());
  std::vector<std::size_t> good_idx, bad_idx;
  std::vector<Vec3> good_pos, bad_pos;
  for (std::size_t i = 0; i < rec.channels.size(); ++i) {
    const Vec3& p = montage.position(rec.channels[i]);
    if (bad_set.count(rec.channels[i])) {
      bad_idx.push_back(i);
      bad_pos.push_back(p);
    } else {
      good_idx.push_back(i);
      good_pos.push_back(p);
    }
  }
  if (bad_idx.size() != bad_set.size())
    throw ContractError("interpolate_channels: bad channel not in recording");
  const auto w = spline_weights(good_pos, bad_pos);
  const std::size_t n = rec.n_samples(), g = good_idx.size();
  std::vector<double> acc(n);
  for (std::size_t t = 0; t < bad_idx.size(); ++t) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t j = 0; j < g; ++j) {
      const double a = w[t * g + j];
      const float* x = rec.data.data() + good_idx[j] * n;
      for (std::size_t i = 0; i < n; ++i) acc[i] += a * double(x[i]);
    }
    float* o = out.data.data() + bad_idx[t] * n;
    for (std::size_t i = 0; i < n; ++i) o[i] = static_cast<float>(acc[i]);
  }
  std::vector<std::string> names;
  for (auto i : bad_idx) names.push_back(rec.channels[i]);
  out.provenance["interpolated"] = names;
  return out;
}

// ---------------------------------------------------------------- ransac

void RansacParams::validate() const {
  require(n_resamples >= 1, "ransac: n_resamples must be >= 1");
  require(subset_fraction > 0.0 && subset_fraction < 1.0,
          "ransac: subset_fraction must be in (0, 1)");
  require(window_seconds > 0.0, "ransac: window must be positive");
  require(correlation_threshold > 0.0 && correlation_threshold < 1.0,
          "ransac: correlation threshold must be in (0, 1)");
  require(bad_window_fraction > 0.0 && bad_window_fraction < 1.0,
          "ransac: bad-window fraction must be in (0, 1)");
}

RansacResult ransac_detect(const Recording& rec, const Montage& montage,
                           const RansacParams& params) {
  params.validate();
  rec.validate();
  const std::size_t c = rec.n_channels(), n = rec.n_samples();
  std::vector<Vec3> pos;
  for (const auto& name : rec.channels) {
    if (!montage.contains(name))
      throw ContractError("ransac: channel '" + name + "' missing from montage");
    pos.push_back(montage.position(name));
  }
  if (c < 5) throw ContractError("ransac: need at least 5 channels");
  const auto win = static_cast<std::size_t>(std::llround(params.window_seconds * rec.fs));
  const std::size_t windows = n / win;
  if (windows == 0)
    throw ContractError("ransac: recording " + rec.subject + " is shorter than one " +
                        std::to_string(params.window_seconds) + " s window");
  const std::size_t k = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(params.subset_fraction * double(c))), 4, c - 1);
  const std::size_t r_count = params.n_resamples;

  // subsets[r][ch]: k predictor channels drawn from the channels other than ch
  Rng rng(params.seed, streams::kRansac);
  std::vector<std::size_t> subsets(r_count * c * k);
  std::vector<double> weights(r_count * c * k);
  std::vector<std::size_t> pool(c - 1);
  for (std::size_t r = 0; r < r_count; ++r) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t i = 0, v = 0; v < c; ++v)
        if (v != ch) pool[i++] = v;
      // partial Fisher-Yates: first k entries are a uniform k-subset
      for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(c - 1 - i));
        std::swap(pool[i], pool[j]);
      }
      std::sort(pool.begin(), pool.begin() + std::ptrdiff_t(k));
      std::vector<Vec3> src;
      for (std::size_t i = 0; i < k; ++i) src.push_back(pos[pool[i]]);
      const auto w = spline_weights(src, {pos[ch]});
      const std::size_t base = (r * c + ch) * k;
      std::copy_n(pool.begin(), k, subsets.begin() + std::ptrdiff_t(base));
      std::copy(w.begin(), w.end(), weights.begin() + std::ptrdiff_t(base));
    }
  }

  std::vector<std::size_t> low_corr(c, 0);
  std::vector<double> x(c * win), pred(r_count * win), med(win);
  for (std::size_t wi = 0; wi < windows; ++wi) {
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < win; ++i) x[ch * win + i] = rec.data[ch * n + wi * win + i];
    for (std::size_t ch = 0; ch < c; ++ch) {
      std::fill(pred.begin(), pred.end(), 0.0);
      for (std::size_t r = 0; r < r_count; ++r) {
        const std::size_t base = (r * c + ch) * k;
        double* p = pred.data() + r * win;
        for (std::size_t j = 0; j < k; ++j) {
          const double a = weights[base + j];
          const double* src = x.data() + subsets[base + j] * win;
          for (std::size_t i = 0; i < win; ++i) p[i] += a * src[i];
        }
      }
      column_median(pred.data(), r_count, win, med.data());
      if (pearson(x.data() + ch * win, med.data(), win) < params.correlation_threshold)
        ++low_corr[ch];
    }
  }

  RansacResult res;
  res.windows = windows;
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double frac = double(low_corr[ch]) / double(windows);
    res.bad_window_fraction.push_back(frac);
    if (frac > params.bad_window_fraction) res.bad.push_back(rec.channels[ch]);
  }
  return res;
}

std::vector<std::string> ransac_bad_channels(const Recording& rec, const Montage& montage,
                                             const RansacParams& params) {
  return ransac_detect(rec, montage, params).bad;
}

}  // namespace nstate
