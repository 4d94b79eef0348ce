#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <variant>

#include "psld/error.hpp"
#include "psld/harness.hpp"

namespace psld {

namespace {

using Scalar = std::variant<double, bool, std::string>;
struct Value {
  std::vector<Scalar> items;
  bool is_list = false;
  int line = 0;
};

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

[[noreturn]] void fail(int line, const std::string& msg) {
  throw Error(ErrorKind::InvalidConfig, "config line " + std::to_string(line) + ": " + msg);
}

Scalar parse_scalar(const std::string& raw, int line) {
  const std::string s = trim(raw);
  if (s.empty()) fail(line, "empty value");
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') fail(line, "unterminated string");
    return s.substr(1, s.size() - 2);
  }
  if (s == "true") return true;
  if (s == "false") return false;
  const char* b = s.c_str();
  char* e = nullptr;
  const double v = std::strtod(b, &e);
  if (e != b && *e == '\0') return v;
  // bare words are accepted as strings
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.'))
      fail(line, "cannot parse value '" + s + "'");
  return s;
}

// strips a trailing comment that is not inside a string
std::string strip_comment(const std::string& s) {
  bool in_str = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') in_str = !in_str;
    if (s[i] == '#' && !in_str) return s.substr(0, i);
  }
  return s;
}

Value parse_value(const std::string& raw, int line) {
  const std::string s = trim(raw);
  Value v;
  v.line = line;
  if (!s.empty() && s.front() == '[') {
    if (s.back() != ']') fail(line, "unterminated list");
    v.is_list = true;
    const std::string body = trim(s.substr(1, s.size() - 2));
    if (!body.empty()) {
      std::stringstream ss(body);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (trim(item).empty()) continue;  // tolerate a trailing comma
        v.items.push_back(parse_scalar(item, line));
      }
    }
  } else {
    v.items.push_back(parse_scalar(s, line));
  }
  return v;
}

class Table {
 public:
  explicit Table(std::map<std::string, Value> kv) : kv_(std::move(kv)) {}

  bool has(const std::string& k) const { return kv_.count(k) > 0; }

  double num(const std::string& k, double def) {
    if (!has(k)) return def;
    return as_num(scalar(k), k);
  }
  bool flag(const std::string& k, bool def) {
    if (!has(k)) return def;
    const Scalar& s = scalar(k);
    if (const bool* b = std::get_if<bool>(&s)) return *b;
    if (const std::string* t = std::get_if<std::string>(&s)) {
      if (*t == "on") return true;
      if (*t == "off") return false;
    }
    fail(kv_.at(k).line, k + " must be a boolean");
  }
  std::string str(const std::string& k, const std::string& def) {
    if (!has(k)) return def;
    const Scalar& s = scalar(k);
    if (const std::string* t = std::get_if<std::string>(&s)) return *t;
    fail(kv_.at(k).line, k + " must be a string");
  }
  std::vector<double> nums(const std::string& k) {
    used_.insert(k);
    std::vector<double> out;
    for (const auto& s : kv_.at(k).items) out.push_back(as_num(s, k));
    return out;
  }
  std::uint64_t uint(const std::string& k, std::uint64_t def) {
    if (!has(k)) return def;
    const double v = num(k, 0.0);
    if (v < 0.0 || v != std::floor(v) || v > 9.007199254740992e15) fail(kv_.at(k).line, k + " must be a non-negative integer");
    return static_cast<std::uint64_t>(v);
  }
  void check_all_used() const {
    for (const auto& [k, v] : kv_)
      if (!used_.count(k)) fail(v.line, "unknown key '" + k + "'");
  }

 private:
  const Scalar& scalar(const std::string& k) {
    used_.insert(k);
    const Value& v = kv_.at(k);
    if (v.is_list || v.items.size() != 1) fail(v.line, k + " must be a single value");
    return v.items.front();
  }
  double as_num(const Scalar& s, const std::string& k) const {
    if (const double* d = std::get_if<double>(&s)) return *d;
    fail(kv_.at(k).line, k + " must be a number");
  }

  std::map<std::string, Value> kv_;
  std::set<std::string> used_;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  // keep floats recognisable as floats in TOML
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string fmt_list(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s + "]";
}

std::vector<double> broadcast(Table& t, const std::string& key, std::size_t d) {
  if (!t.has(key)) return std::vector<double>(d, 0.0);
  std::vector<double> v = t.nums(key);
  if (v.size() == 1) v.assign(d, v.front());
  if (v.size() != d) throw Error(ErrorKind::InvalidConfig, key + " must have " + std::to_string(d) + " entries");
  return v;
}

const char* bt_name(BTKind k) {
  switch (k) {
    case BTKind::Zero: return "zero";
    case BTKind::LambdaI: return "lambda_i";
    case BTKind::LambdaOnes: return "lambda_ones";
    case BTKind::Custom: break;
  }
  throw Error(ErrorKind::InvalidConfig, "custom B_t cannot be expressed in a config file");
}

}  // namespace

RunConfig parse_config(std::istream& is) {
  std::map<std::string, Value> kv;
  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const std::string s = trim(strip_comment(raw));
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail(line, "expected key = value");
    const std::string key = trim(s.substr(0, eq));
    if (key.empty()) fail(line, "empty key");
    if (kv.count(key)) fail(line, "duplicate key '" + key + "'");
    kv.emplace(key, parse_value(s.substr(eq + 1), line));
  }
  Table t(std::move(kv));
  RunConfig c;

  const std::string proc = t.str("process", "psld");
  if (proc == "psld") c.process = ProcessSpec{};
  else if (proc == "vp") c.process = ProcessSpec::vp(8.0);
  else throw Error(ErrorKind::InvalidConfig, "process must be psld or vp");
  c.process.beta = t.num("beta", c.process.beta);
  c.process.beta_slope = t.num("beta_slope", c.process.beta_slope);
  c.process.gamma_fric = t.num("gamma_fric", c.process.gamma_fric);
  c.process.nu = t.num("nu", c.process.nu);
  c.process.mass_inv = t.num("mass_inv", c.process.mass_inv);
  c.process.gamma0 = t.num("gamma0", c.process.gamma0);
  c.process.T = t.num("T", c.process.T);

  c.eps = t.num("eps", c.eps);
  c.schedule = parse_schedule_kind(t.str("schedule", "quadratic"));
  c.sampler = parse_sampler(t.str("sampler", to_string(c.sampler)));
  if (t.has("steps")) {
    c.steps.clear();
    for (double v : t.nums("steps")) {
      if (v < 1.0 || v != std::floor(v)) throw Error(ErrorKind::InvalidConfig, "steps must be positive integers");
      c.steps.push_back(static_cast<std::size_t>(v));
    }
  }
  if (t.has("lambda") && t.has("lambdas")) throw Error(ErrorKind::InvalidConfig, "give lambda or lambdas, not both");
  if (t.has("lambda")) c.lambdas = {t.num("lambda", 0.0)};
  if (t.has("lambdas")) c.lambdas = t.nums("lambdas");
  const std::string bt = t.str("bt", "lambda_i");
  if (bt == "zero") c.bt = BTKind::Zero;
  else if (bt == "lambda_i") c.bt = BTKind::LambdaI;
  else if (bt == "lambda_ones") c.bt = BTKind::LambdaOnes;
  else throw Error(ErrorKind::InvalidConfig, "bt must be zero, lambda_i or lambda_ones");
  c.lambda_s = t.num("lambda_s", c.lambda_s);
  c.churn = t.flag("churn", c.churn);
  c.denoise = t.flag("denoise", c.denoise);
  c.chains = t.uint("chains", c.chains);
  c.seed = t.uint("seed", c.seed);
  const std::string param = t.str("param", "default");
  if (param == "default") c.param = ParamKind::Default;
  else if (param == "preconditioned") c.param = ParamKind::Preconditioned;
  else throw Error(ErrorKind::InvalidConfig, "param must be default or preconditioned");
  c.sigma0_sq = t.num("sigma0_sq", c.sigma0_sq);
  c.ab_order = static_cast<int>(t.uint("ab_order", 0));
  c.quad_tol = t.num("quad_tol", c.quad_tol);
  const std::string prior = t.str("prior", "marginal");
  if (prior == "marginal") c.prior = PriorKind::Marginal;
  else if (prior == "stationary") c.prior = PriorKind::Stationary;
  else throw Error(ErrorKind::InvalidConfig, "prior must be marginal or stationary");
  c.threads = static_cast<unsigned>(t.uint("threads", 0));
  c.timing = t.flag("timing", false);

  const std::size_t d = t.uint("dim", 2);
  if (t.has("mix.k")) {
    const std::size_t k = t.uint("mix.k", 0);
    if (k < 1) throw Error(ErrorKind::InvalidConfig, "mix.k must be >= 1");
    c.mixture = MixtureSpec{d, {}};
    const double smm_def = c.process.kind == ProcessKind::VP ? 1.0 : c.process.mass() * c.process.gamma0;
    for (std::size_t i = 0; i < k; ++i) {
      const std::string p = "mix." + std::to_string(i) + ".";
      MixtureComponent comp;
      comp.weight = t.num(p + "weight", 1.0 / static_cast<double>(k));
      comp.mean = State(broadcast(t, p + "mean_x", d), broadcast(t, p + "mean_m", d));
      comp.cov = SPD2{t.num(p + "cov_xx", 1.0), t.num(p + "cov_xm", 0.0), t.num(p + "cov_mm", smm_def)};
      c.mixture.components.push_back(comp);
    }
  } else {
    if (d != 2) throw Error(ErrorKind::InvalidConfig, "the built-in mixture is 2-D; give mix.* keys for other dims");
    c.mixture = benchmark_mixture(c.process);
  }
  t.check_all_used();
  c.validate();
  return c;
}

RunConfig parse_config_string(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot open config '" + path + "'");
  return parse_config(f);
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream os;
  const ProcessSpec& p = c.process;
  os << "process = \"" << (p.kind == ProcessKind::VP ? "vp" : "psld") << "\"\n";
  os << "beta = " << fmt(p.beta) << "\n";
  os << "beta_slope = " << fmt(p.beta_slope) << "\n";
  os << "gamma_fric = " << fmt(p.gamma_fric) << "\n";
  os << "nu = " << fmt(p.nu) << "\n";
  os << "mass_inv = " << fmt(p.mass_inv) << "\n";
  os << "gamma0 = " << fmt(p.gamma0) << "\n";
  os << "T = " << fmt(p.T) << "\n";
  os << "eps = " << fmt(c.eps) << "\n";
  os << "schedule = \"" << to_string(c.schedule) << "\"\n";
  os << "sampler = \"" << to_string(c.sampler) << "\"\n";
  os << "steps = [";
  for (std::size_t i = 0; i < c.steps.size(); ++i) os << (i ? ", " : "") << c.steps[i];
  os << "]\n";
  os << "lambdas = " << fmt_list(c.lambdas) << "\n";
  os << "bt = \"" << bt_name(c.bt) << "\"\n";
  os << "lambda_s = " << fmt(c.lambda_s) << "\n";
  os << "churn = " << (c.churn ? "true" : "false") << "\n";
  os << "denoise = " << (c.denoise ? "true" : "false") << "\n";
  os << "chains = " << c.chains << "\n";
  os << "seed = " << c.seed << "\n";
  os << "param = \"" << (c.param == ParamKind::Preconditioned ? "preconditioned" : "default") << "\"\n";
  os << "sigma0_sq = " << fmt(c.sigma0_sq) << "\n";
  os << "ab_order = " << c.ab_order << "\n";
  os << "quad_tol = " << fmt(c.quad_tol) << "\n";
  os << "prior = \"" << (c.prior == PriorKind::Stationary ? "stationary" : "marginal") << "\"\n";
  os << "threads = " << c.threads << "\n";
  os << "timing = " << (c.timing ? "true" : "false") << "\n";
  os << "dim = " << c.mixture.d << "\n";
  os << "mix.k = " << c.mixture.components.size() << "\n";
  for (std::size_t i = 0; i < c.mixture.components.size(); ++i) {
    const auto& m = c.mixture.components[i];
    const std::string pre = "mix." + std::to_string(i) + ".";
    os << pre << "weight = " << fmt(m.weight) << "\n";
    os << pre << "mean_x = " << fmt_list(m.mean.x) << "\n";
    os << pre << "mean_m = " << fmt_list(m.mean.m) << "\n";
    os << pre << "cov_xx = " << fmt(m.cov.xx) << "\n";
    os << pre << "cov_xm = " << fmt(m.cov.xm) << "\n";
    os << pre << "cov_mm = " << fmt(m.cov.mm) << "\n";
  }
  return os.str();
}

}  // namespace psld
