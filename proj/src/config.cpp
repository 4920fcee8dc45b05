#include "motiondiff/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "motiondiff/tensor.hpp"

namespace motiondiff {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Removes a trailing comment that is not inside a string.
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '\\' && in_string) {
      ++i;
    } else if (c == '"') {
      in_string = !in_string;
    } else if (c == '#' && !in_string) {
      return line.substr(0, i);
    }
  }
  return line;
}

struct ParseSite {
  const std::string& source;
  int line;
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(source + ":" + std::to_string(line) + ": " + what);
  }
};

TomlScalar parse_scalar(const std::string& text, const ParseSite& site) {
  if (text.empty()) site.fail("missing value");
  if (text.front() == '"') {
    if (text.size() < 2 || text.back() != '"') site.fail("unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < text.size(); ++i) {
      char c = text[i];
      if (c == '\\') {
        if (i + 2 >= text.size()) site.fail("bad escape");
        c = text[++i];
        switch (c) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: site.fail(std::string("unsupported escape \\") + c);
        }
      } else {
        out += c;
      }
    }
    return out;
  }
  if (text == "true") return true;
  if (text == "false") return false;
  std::string digits;
  for (char c : text)
    if (c != '_') digits += c;
  const bool looks_float = digits.find_first_of(".eE") != std::string::npos || digits == "inf" || digits == "nan";
  const char* first = digits.data();
  const char* last = digits.data() + digits.size();
  if (!digits.empty() && digits.front() == '+') ++first;
  if (!looks_float) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec == std::errc() && ptr == last) return v;
  } else {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec == std::errc() && ptr == last) return v;
  }
  site.fail("cannot parse value '" + text + "'");
}

std::vector<std::string> split_array(const std::string& body, const ParseSite& site) {
  std::vector<std::string> items;
  std::string cur;
  bool in_string = false;
  for (std::size_t i = 0; i < body.size(); ++i) {
    const char c = body[i];
    if (c == '"' && (i == 0 || body[i - 1] != '\\')) in_string = !in_string;
    if (c == ',' && !in_string) {
      items.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (in_string) site.fail("unterminated string in array");
  const std::string tail = trim(cur);
  if (!tail.empty()) items.push_back(tail);
  for (const auto& item : items)
    if (item.empty()) site.fail("empty array element");
  return items;
}

// Typed access with key tracking. Absent keys read as zero values and are
// reported by finish() together with unknown keys, so a misspelt key names
// both the typo and what it should have been.
class SectionReader {
 public:
  SectionReader(const TomlTable& table, std::string section) : section_(std::move(section)) {
    auto it = table.find(section_);
    if (it == table.end()) throw ConfigError("missing config section [" + section_ + "]");
    entries_ = &it->second;
  }

  double number(const std::string& key) {
    const TomlScalar* s = scalar(key);
    if (!s) return 0.0;
    if (auto p = std::get_if<double>(s)) return *p;
    if (auto p = std::get_if<std::int64_t>(s)) return static_cast<double>(*p);
    fail(key, "expected a number");
  }
  int integer(const std::string& key) {
    const TomlScalar* s = scalar(key);
    if (!s) return 0;
    if (auto p = std::get_if<std::int64_t>(s)) return static_cast<int>(*p);
    fail(key, "expected an integer");
  }
  std::uint64_t unsigned_integer(const std::string& key) {
    const TomlScalar* s = scalar(key);
    if (!s) return 0;
    if (auto p = std::get_if<std::int64_t>(s); p && *p >= 0) return static_cast<std::uint64_t>(*p);
    fail(key, "expected a non-negative integer");
  }
  bool boolean(const std::string& key) {
    const TomlScalar* s = scalar(key);
    if (!s) return false;
    if (auto p = std::get_if<bool>(s)) return *p;
    fail(key, "expected true or false");
  }
  std::string string(const std::string& key) {
    const TomlScalar* s = scalar(key);
    if (!s) return {};
    if (auto p = std::get_if<std::string>(s)) return *p;
    fail(key, "expected a string");
  }
  std::vector<int> int_array(const std::string& key) {
    const TomlValue* v = value(key);
    if (!v) return {};
    if (!v->is_array) fail(key, "expected an array of integers");
    std::vector<int> out;
    for (const auto& s : v->array) {
      auto p = std::get_if<std::int64_t>(&s);
      if (!p) fail(key, "expected an array of integers");
      out.push_back(static_cast<int>(*p));
    }
    return out;
  }

  void finish() const {
    std::string problems;
    for (const auto& [key, _] : *entries_) {
      if (!used_.count(key)) problems += (problems.empty() ? "" : "; ") + ("unknown config key [" + section_ + "] " + key);
    }
    for (const auto& key : missing_) {
      problems += (problems.empty() ? "" : "; ") + ("missing config key [" + section_ + "] " + key);
    }
    if (!problems.empty()) throw ConfigError(problems);
  }

 private:
  const TomlValue* value(const std::string& key) {
    auto it = entries_->find(key);
    if (it == entries_->end()) {
      missing_.push_back(key);
      return nullptr;
    }
    used_.insert(key);
    return &it->second;
  }
  const TomlScalar* scalar(const std::string& key) {
    const TomlValue* v = value(key);
    if (v && v->is_array) fail(key, "expected a scalar");
    return v ? &v->scalar : nullptr;
  }
  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError("config key [" + section_ + "] " + key + ": " + what);
  }

  std::string section_;
  const std::map<std::string, TomlValue>* entries_ = nullptr;
  std::set<std::string> used_;
  std::vector<std::string> missing_;
};

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

}  // namespace

void ExperimentConfig::sync() {
  network.observed = data.observed;
  network.future = data.future;
}

void ExperimentConfig::validate() const {
  if (data.observed < 1) throw ConfigError("[data] observed must be >= 1");
  if (data.future < 1) throw ConfigError("[data] future must be >= 1");
  if (data.train_stride < 1) throw ConfigError("[data] train_stride must be >= 1");
  if (data.eval_stride < 1) throw ConfigError("[data] eval_stride must be >= 1");
  if (data.root < 0 || data.root >= network.joints) throw ConfigError("[data] root must index a joint");
  if (network.observed != data.observed || network.future != data.future) {
    throw ConfigError("network window sizes disagree with [data]");
  }
  if (schedule.steps < 2) throw ConfigError("[schedule] steps must be >= 2");
  if (!(schedule.beta_1 > 0.0 && schedule.beta_1 <= schedule.beta_K && schedule.beta_K < 1.0)) {
    throw ConfigError("[schedule] requires 0 < beta_1 <= beta_K < 1");
  }
  network.validate();
  if (!(train.lr > 0.0)) throw ConfigError("[train] lr must be positive");
  if (train.epochs < 1) throw ConfigError("[train] epochs must be >= 1");
  if (train.batch_size < 1) throw ConfigError("[train] batch_size must be >= 1");
  if (train.decay_start < 0 || train.decay_start > train.epochs) {
    throw ConfigError("[train] decay_start must lie in [0, epochs]");
  }
  if (!(train.decay_final_fraction > 0.0 && train.decay_final_fraction <= 1.0)) {
    throw ConfigError("[train] decay_final_fraction must lie in (0, 1]");
  }
  if (!(train.adam_beta1 >= 0.0 && train.adam_beta1 < 1.0)) throw ConfigError("[train] adam_beta1 must lie in [0, 1)");
  if (!(train.adam_beta2 >= 0.0 && train.adam_beta2 < 1.0)) throw ConfigError("[train] adam_beta2 must lie in [0, 1)");
  if (!(train.adam_eps > 0.0)) throw ConfigError("[train] adam_eps must be positive");
  if (train.k_per_example < 1) throw ConfigError("[train] k_per_example must be >= 1");
  if (train.loss_reduction != "sum" && train.loss_reduction != "mean") {
    throw ConfigError("[train] loss_reduction must be \"sum\" or \"mean\"");
  }
  refine.net.validate();
  if (refine.samples < 2) throw ConfigError("[refine] samples must be >= 2");
  if (refine.epochs < 1) throw ConfigError("[refine] epochs must be >= 1");
  if (!(refine.lr > 0.0)) throw ConfigError("[refine] lr must be positive");
  if (refine.decay_start < 0 || refine.decay_start > refine.epochs) {
    throw ConfigError("[refine] decay_start must lie in [0, epochs]");
  }
  if (refine.batch_size < 1) throw ConfigError("[refine] batch_size must be >= 1");
  if (refine.train_stride < 1) throw ConfigError("[refine] train_stride must be >= 1");
  if (eval.samples < 1) throw ConfigError("[eval] samples must be >= 1");
  if (!(eval.delta > 0.0)) throw ConfigError("[eval] delta must be positive");
}

TomlTable parse_toml(std::istream& in, const std::string& source) {
  TomlTable table;
  std::string section;
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const ParseSite site{source, lineno};
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') site.fail("malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) site.fail("empty section name");
      if (table.count(section)) site.fail("duplicate section [" + section + "]");
      table[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) site.fail("expected key = value");
    if (section.empty()) site.fail("key outside of any section");
    const std::string key = trim(line.substr(0, eq));
    const std::string rhs = trim(line.substr(eq + 1));
    if (key.empty()) site.fail("empty key");
    auto& entries = table[section];
    if (entries.count(key)) site.fail("duplicate key " + key);
    TomlValue v;
    if (!rhs.empty() && rhs.front() == '[') {
      if (rhs.back() != ']') site.fail("unterminated array");
      v.is_array = true;
      for (const auto& item : split_array(rhs.substr(1, rhs.size() - 2), site)) {
        v.array.push_back(parse_scalar(item, site));
      }
    } else {
      v.scalar = parse_scalar(rhs, site);
    }
    entries.emplace(key, std::move(v));
  }
  return table;
}

ExperimentConfig config_from_toml(const TomlTable& table) {
  static const std::set<std::string> known{"data", "schedule", "network", "train", "refine", "eval"};
  for (const auto& [name, _] : table) {
    if (!known.count(name)) throw ConfigError("unknown config section [" + name + "]");
  }
  ExperimentConfig cfg;

  SectionReader data(table, "data");
  cfg.data.train_dir = data.string("train_dir");
  cfg.data.observed = data.integer("observed");
  cfg.data.future = data.integer("future");
  cfg.data.train_stride = data.integer("train_stride");
  cfg.data.eval_stride = data.integer("eval_stride");
  cfg.data.root = data.integer("root");
  data.finish();

  SectionReader sched(table, "schedule");
  cfg.schedule.steps = sched.integer("steps");
  cfg.schedule.beta_1 = sched.number("beta_1");
  cfg.schedule.beta_K = sched.number("beta_K");
  sched.finish();

  SectionReader net(table, "network");
  cfg.network.joints = net.integer("joints");
  cfg.network.joint_dim = net.integer("joint_dim");
  cfg.network.d_model = net.integer("d_model");
  cfg.network.n_heads = net.integer("n_heads");
  cfg.network.n_spatial_layers = net.integer("n_spatial_layers");
  cfg.network.n_temporal_layers = net.integer("n_temporal_layers");
  cfg.network.cond_dim = net.integer("cond_dim");
  cfg.network.ffn_mult = net.integer("ffn_mult");
  cfg.network.head_dims = net.int_array("head_dims");
  cfg.network.spatial_transformer = net.boolean("spatial_transformer");
  net.finish();

  SectionReader train(table, "train");
  cfg.train.lr = train.number("lr");
  cfg.train.epochs = train.integer("epochs");
  cfg.train.batch_size = train.integer("batch_size");
  cfg.train.decay_start = train.integer("decay_start");
  cfg.train.decay_final_fraction = train.number("decay_final_fraction");
  cfg.train.seed = train.unsigned_integer("seed");
  cfg.train.adam_beta1 = train.number("adam_beta1");
  cfg.train.adam_beta2 = train.number("adam_beta2");
  cfg.train.adam_eps = train.number("adam_eps");
  cfg.train.k_per_example = train.integer("k_per_example");
  cfg.train.loss_reduction = train.string("loss_reduction");
  cfg.train.record_wallclock = train.boolean("record_wallclock");
  train.finish();

  SectionReader ref(table, "refine");
  cfg.refine.net.n_gcn_layers = ref.integer("n_gcn_layers");
  cfg.refine.net.gcn_hidden = ref.integer("gcn_hidden");
  cfg.refine.net.cond_proj = ref.integer("cond_proj");
  cfg.refine.net.lambda = ref.number("lambda");
  cfg.refine.net.gamma = ref.number("gamma");
  cfg.refine.net.sigma = ref.number("sigma");
  cfg.refine.samples = ref.integer("samples");
  cfg.refine.epochs = ref.integer("epochs");
  cfg.refine.lr = ref.number("lr");
  cfg.refine.decay_start = ref.integer("decay_start");
  cfg.refine.batch_size = ref.integer("batch_size");
  cfg.refine.train_stride = ref.integer("train_stride");
  cfg.refine.seed = ref.unsigned_integer("seed");
  ref.finish();

  SectionReader ev(table, "eval");
  cfg.eval.samples = ev.integer("samples");
  cfg.eval.delta = ev.number("delta");
  cfg.eval.seed = ev.unsigned_integer("seed");
  ev.finish();

  cfg.sync();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return config_from_toml(parse_toml(in, path.string()));
}

void write_config_toml(std::ostream& out, const ExperimentConfig& cfg) {
  auto str = [](const std::string& s) {
    std::string q = "\"";
    for (char c : s) {
      if (c == '"' || c == '\\') q += '\\';
      q += c;
    }
    return q + "\"";
  };
  auto boolean = [](bool b) { return b ? "true" : "false"; };
  out << "[data]\n"
      << "train_dir = " << str(cfg.data.train_dir) << "\n"
      << "observed = " << cfg.data.observed << "\n"
      << "future = " << cfg.data.future << "\n"
      << "train_stride = " << cfg.data.train_stride << "\n"
      << "eval_stride = " << cfg.data.eval_stride << "\n"
      << "root = " << cfg.data.root << "\n\n";
  out << "[schedule]\n"
      << "steps = " << cfg.schedule.steps << "\n"
      << "beta_1 = " << fmt_double(cfg.schedule.beta_1) << "\n"
      << "beta_K = " << fmt_double(cfg.schedule.beta_K) << "\n\n";
  out << "[network]\n"
      << "joints = " << cfg.network.joints << "\n"
      << "joint_dim = " << cfg.network.joint_dim << "\n"
      << "d_model = " << cfg.network.d_model << "\n"
      << "n_heads = " << cfg.network.n_heads << "\n"
      << "n_spatial_layers = " << cfg.network.n_spatial_layers << "\n"
      << "n_temporal_layers = " << cfg.network.n_temporal_layers << "\n"
      << "cond_dim = " << cfg.network.cond_dim << "\n"
      << "ffn_mult = " << cfg.network.ffn_mult << "\n"
      << "head_dims = [";
  for (std::size_t i = 0; i < cfg.network.head_dims.size(); ++i) {
    out << (i ? ", " : "") << cfg.network.head_dims[i];
  }
  out << "]\n"
      << "spatial_transformer = " << boolean(cfg.network.spatial_transformer) << "\n\n";
  out << "[train]\n"
      << "lr = " << fmt_double(cfg.train.lr) << "\n"
      << "epochs = " << cfg.train.epochs << "\n"
      << "batch_size = " << cfg.train.batch_size << "\n"
      << "decay_start = " << cfg.train.decay_start << "\n"
      << "decay_final_fraction = " << fmt_double(cfg.train.decay_final_fraction) << "\n"
      << "seed = " << cfg.train.seed << "\n"
      << "adam_beta1 = " << fmt_double(cfg.train.adam_beta1) << "\n"
      << "adam_beta2 = " << fmt_double(cfg.train.adam_beta2) << "\n"
      << "adam_eps = " << fmt_double(cfg.train.adam_eps) << "\n"
      << "k_per_example = " << cfg.train.k_per_example << "\n"
      << "loss_reduction = " << str(cfg.train.loss_reduction) << "\n"
      << "record_wallclock = " << boolean(cfg.train.record_wallclock) << "\n\n";
  out << "[refine]\n"
      << "n_gcn_layers = " << cfg.refine.net.n_gcn_layers << "\n"
      << "gcn_hidden = " << cfg.refine.net.gcn_hidden << "\n"
      << "cond_proj = " << cfg.refine.net.cond_proj << "\n"
      << "lambda = " << fmt_double(cfg.refine.net.lambda) << "\n"
      << "gamma = " << fmt_double(cfg.refine.net.gamma) << "\n"
      << "sigma = " << fmt_double(cfg.refine.net.sigma) << "\n"
      << "samples = " << cfg.refine.samples << "\n"
      << "epochs = " << cfg.refine.epochs << "\n"
      << "lr = " << fmt_double(cfg.refine.lr) << "\n"
      << "decay_start = " << cfg.refine.decay_start << "\n"
      << "batch_size = " << cfg.refine.batch_size << "\n"
      << "train_stride = " << cfg.refine.train_stride << "\n"
      << "seed = " << cfg.refine.seed << "\n\n";
  out << "[eval]\n"
      << "samples = " << cfg.eval.samples << "\n"
      << "delta = " << fmt_double(cfg.eval.delta) << "\n"
      << "seed = " << cfg.eval.seed << "\n";
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  // Round-trips through the TOML writer/reader so both formats share one
  // key list.
  std::ostringstream toml;
  write_config_toml(toml, cfg);
  std::istringstream in(toml.str());
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [section, entries] : parse_toml(in, "<config>")) {
    for (const auto& [key, value] : entries) {
      auto conv = [](const TomlScalar& s) -> nlohmann::json {
        return std::visit([](const auto& x) { return nlohmann::json(x); }, s);
      };
      if (value.is_array) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& s : value.array) arr.push_back(conv(s));
        j[section][key] = arr;
      } else {
        j[section][key] = conv(value.scalar);
      }
    }
  }
  return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("checkpoint config is not an object");
  TomlTable table;
  auto conv = [](const nlohmann::json& v) -> TomlScalar {
    if (v.is_boolean()) return v.get<bool>();
    if (v.is_number_integer()) return v.get<std::int64_t>();
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) return v.get<std::string>();
    throw ConfigError("unsupported value in checkpoint config");
  };
  for (const auto& [section, entries] : j.items()) {
    auto& out = table[section];
    for (const auto& [key, value] : entries.items()) {
      TomlValue v;
      if (value.is_array()) {
        v.is_array = true;
        for (const auto& x : value) v.array.push_back(conv(x));
      } else {
        v.scalar = conv(value);
      }
      out.emplace(key, std::move(v));
    }
  }
  return config_from_toml(table);
}

}  // namespace motiondiff
